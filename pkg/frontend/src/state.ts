// Edit state: what the sliders hold, and its exact mapping onto the
// /v1/relight request schema.  All lighting math lives server-side; the
// client only clamps slider positions to the bounds the service advertises.

export interface EditState {
    scene_id: string;
    dyaw_deg: number;
    dpitch_deg: number;
    energy_factor: number;   // multiplicative, log-scaled slider
    dtemp_k: number;
    show_mask: boolean;
}

export interface EditBounds {
    dyaw_deg: [number, number];
    dpitch_deg: [number, number];
    denergy_factor: [number, number];
    dtemp_k: [number, number];
}

export interface SceneInfo {
    scene_id: string;
    object_id: string;
    view_id: number;
    light_id: number;
    source_light: Record<string, unknown>;
    edit_bounds: EditBounds;
}

export interface RelightRequestBody {
    scene_id: string;
    dyaw_deg: number;
    dpitch_deg: number;
    denergy_factor: number;
    dtemp_k: number;
    show_mask: boolean;
}

export interface DeltaEcho {
    delta_sh: number[];
    delta_log_e: number;
    delta_tau: number;
    edit: { dyaw_rad: number; dpitch_rad: number };
}

export interface RelightResponse {
    png_base64: string;
    mask_png_base64?: string;
    delta_l: DeltaEcho;
    metrics?: { rmse: number; ssim: number; psnr: number };
    timing_ms: number;
}

export function zeroState(sceneId: string): EditState {
    return {
        scene_id: sceneId,
        dyaw_deg: 0,
        dpitch_deg: 0,
        energy_factor: 1,
        dtemp_k: 0,
        show_mask: false,
    };
}

export function isZeroEdit(state: EditState): boolean {
    return state.dyaw_deg === 0 && state.dpitch_deg === 0
        && state.energy_factor === 1 && state.dtemp_k === 0;
}

const clampNum = (v: number, lo: number, hi: number) =>
    Math.min(Math.max(v, lo), hi);

/** Clamp an edit into the bounds the service advertised for its scene, so a
 *  422 is impossible to construct through the panel. */
export function clampToBounds(state: EditState, bounds: EditBounds): EditState {
    return {
        ...state,
        dyaw_deg: clampNum(state.dyaw_deg, ...bounds.dyaw_deg),
        dpitch_deg: clampNum(state.dpitch_deg, ...bounds.dpitch_deg),
        energy_factor: clampNum(state.energy_factor, ...bounds.denergy_factor),
        dtemp_k: clampNum(state.dtemp_k, ...bounds.dtemp_k),
    };
}

/** Serialize to the request schema: field for field, energy as a factor. */
export function toRequestBody(state: EditState): RelightRequestBody {
    return {
        scene_id: state.scene_id,
        dyaw_deg: state.dyaw_deg,
        dpitch_deg: state.dpitch_deg,
        denergy_factor: state.energy_factor,
        dtemp_k: state.dtemp_k,
        show_mask: state.show_mask,
    };
}
