// The control panel: scene picker, four sliders in human units, source and
// relit panes, optional mask overlay, and a readout of the echoed lighting
// encoding.  Every number shown under "encoding" comes from the service
// response, never from client-side math.

import { ApiClient, ApiError, pngDataUrl } from "./api.js";
import { EditHistory } from "./history.js";
import { RequestScheduler } from "./scheduler.js";
import {
    EditState, RelightResponse, SceneInfo, clampToBounds, isZeroEdit,
    toRequestBody, zeroState,
} from "./state.js";

interface SliderSpec {
    key: "dyaw_deg" | "dpitch_deg" | "energy_factor" | "dtemp_k";
    label: string;
    step: number;
    format: (v: number) => string;
}

const SLIDERS: SliderSpec[] = [
    { key: "dyaw_deg", label: "yaw", step: 1, format: (v) => `${v.toFixed(0)} deg` },
    { key: "dpitch_deg", label: "pitch", step: 1, format: (v) => `${v.toFixed(0)} deg` },
    { key: "energy_factor", label: "energy", step: 0.01, format: (v) => `x${v.toFixed(2)}` },
    { key: "dtemp_k", label: "temperature", step: 50, format: (v) => `${v >= 0 ? "+" : ""}${v.toFixed(0)} K` },
];

export class Panel {
    private scenes: SceneInfo[] = [];
    private scene: SceneInfo | null = null;
    private history: EditHistory | null = null;
    private scheduler: RequestScheduler<EditState, RelightResponse>;
    private inputs = new Map<string, HTMLInputElement>();
    private values = new Map<string, HTMLElement>();

    constructor(private api: ApiClient, private root: HTMLElement) {
        this.scheduler = new RequestScheduler(
            (state) => this.api.relight(toRequestBody(state)),
            (result) => this.showResult(result),
            (err) => this.showError(err),
        );
    }

    async start(): Promise<void> {
        this.scenes = await this.api.scenes();
        this.render();
        if (this.scenes.length > 0) {
            this.selectScene(this.scenes[0]);
        }
    }

    private el<T extends HTMLElement>(id: string): T {
        return this.root.querySelector(`#${id}`) as T;
    }

    private render(): void {
        const options = this.scenes
            .map((s) => `<option value="${s.scene_id}">${s.scene_id}</option>`)
            .join("");
        const sliders = SLIDERS.map((s) => `
            <label class="control">
              <span>${s.label}</span>
              <input type="range" id="slider-${s.key}" step="${s.step}">
              <span class="value" id="value-${s.key}"></span>
            </label>`).join("");
        this.root.innerHTML = `
          <header>
            <select id="scene-select">${options}</select>
            <button id="undo" disabled>undo</button>
            <button id="redo" disabled>redo</button>
            <button id="reset">reset</button>
            <button id="export">export history</button>
            <label class="control"><input type="checkbox" id="mask-toggle"> mask</label>
          </header>
          <div id="error" class="error" hidden>
            <span id="error-text"></span><button id="retry">retry</button>
          </div>
          <main>
            <figure><img id="source-img" alt="source"><figcaption>source</figcaption></figure>
            <figure class="stack">
              <img id="relit-img" alt="relit">
              <img id="mask-img" alt="mask" class="overlay" hidden>
              <figcaption>relit <span id="timing"></span></figcaption>
            </figure>
            <aside>
              <div id="controls">${sliders}</div>
              <dl id="readout">
                <dt>log energy</dt><dd id="echo-loge">0</dd>
                <dt>temperature</dt><dd id="echo-tau">0</dd>
                <dt>sh |delta|</dt><dd id="echo-sh">0</dd>
              </dl>
              <div id="metrics" hidden>
                <span class="badge" id="badge-rmse"></span>
                <span class="badge" id="badge-ssim"></span>
                <span class="badge" id="badge-psnr"></span>
              </div>
            </aside>
          </main>`;
        this.el<HTMLSelectElement>("scene-select").addEventListener("change", (e) => {
            const id = (e.target as HTMLSelectElement).value;
            const scene = this.scenes.find((s) => s.scene_id === id);
            if (scene) {
                this.selectScene(scene);
            }
        });
        for (const spec of SLIDERS) {
            const input = this.el<HTMLInputElement>(`slider-${spec.key}`);
            this.inputs.set(spec.key, input);
            this.values.set(spec.key, this.el(`value-${spec.key}`));
            input.addEventListener("input", () => this.onSlider(spec, Number(input.value)));
        }
        this.el("undo").addEventListener("click", () => this.jump((h) => h.undo()));
        this.el("redo").addEventListener("click", () => this.jump((h) => h.redo()));
        this.el("reset").addEventListener("click", () => {
            if (this.scene) {
                this.commit(zeroState(this.scene.scene_id));
            }
        });
        this.el("export").addEventListener("click", () => this.exportHistory());
        this.el<HTMLInputElement>("mask-toggle").addEventListener("change", (e) => {
            if (this.history && this.scene) {
                this.commit({ ...this.history.state,
                              show_mask: (e.target as HTMLInputElement).checked });
            }
        });
        this.el("retry").addEventListener("click", () => {
            this.el("error").hidden = true;
            if (this.history) {
                this.scheduler.submit(this.history.state);
            }
        });
    }

    private selectScene(scene: SceneInfo): void {
        this.scene = scene;
        this.history = new EditHistory(zeroState(scene.scene_id));
        const src = this.api.previewUrl(scene.scene_id);
        this.el<HTMLImageElement>("source-img").src = src;
        this.el<HTMLImageElement>("relit-img").src = src;
        for (const spec of SLIDERS) {
            const input = this.inputs.get(spec.key)!;
            const bounds = spec.key === "energy_factor"
                ? scene.edit_bounds.denergy_factor
                : scene.edit_bounds[spec.key];
            input.min = String(bounds[0]);
            input.max = String(bounds[1]);
        }
        this.syncControls();
        this.updateButtons();
    }

    private onSlider(spec: SliderSpec, value: number): void {
        if (!this.scene || !this.history) {
            return;
        }
        const next = clampToBounds(
            { ...this.history.state, [spec.key]: value }, this.scene.edit_bounds);
        this.commit(next);
    }

    private commit(state: EditState): void {
        if (!this.history) {
            return;
        }
        this.history.push(state);
        this.syncControls();
        this.updateButtons();
        this.scheduler.submit(state);
    }

    private jump(move: (h: EditHistory) => EditState): void {
        if (!this.history) {
            return;
        }
        const state = move(this.history);
        this.syncControls();
        this.updateButtons();
        this.scheduler.submit(state);
    }

    private syncControls(): void {
        if (!this.history) {
            return;
        }
        const s = this.history.state;
        for (const spec of SLIDERS) {
            this.inputs.get(spec.key)!.value = String(s[spec.key]);
            this.values.get(spec.key)!.textContent = spec.format(s[spec.key]);
        }
        this.el<HTMLInputElement>("mask-toggle").checked = s.show_mask;
    }

    private updateButtons(): void {
        if (!this.history) {
            return;
        }
        this.el<HTMLButtonElement>("undo").disabled = !this.history.canUndo();
        this.el<HTMLButtonElement>("redo").disabled = !this.history.canRedo();
    }

    private showResult(result: RelightResponse): void {
        this.el("error").hidden = true;
        const relit = this.el<HTMLImageElement>("relit-img");
        // a zero edit is the source image by service contract; show its bytes
        relit.src = pngDataUrl(result.png_base64);
        const mask = this.el<HTMLImageElement>("mask-img");
        if (result.mask_png_base64) {
            mask.src = pngDataUrl(result.mask_png_base64);
            mask.hidden = false;
        } else {
            mask.hidden = true;
        }
        this.el("timing").textContent = `${result.timing_ms.toFixed(0)} ms`;
        // the readout mirrors the service echo; nothing is recomputed here
        this.el("echo-loge").textContent = result.delta_l.delta_log_e.toFixed(4);
        this.el("echo-tau").textContent = result.delta_l.delta_tau.toFixed(4);
        const shNorm = Math.sqrt(result.delta_l.delta_sh
            .reduce((acc, c) => acc + c * c, 0));
        this.el("echo-sh").textContent = shNorm.toFixed(4);
        const metrics = this.el("metrics");
        if (result.metrics) {
            metrics.hidden = false;
            this.el("badge-rmse").textContent = `rmse ${result.metrics.rmse.toFixed(3)}`;
            this.el("badge-ssim").textContent = `ssim ${result.metrics.ssim.toFixed(3)}`;
            this.el("badge-psnr").textContent = `psnr ${result.metrics.psnr.toFixed(1)}`;
        } else {
            metrics.hidden = true;
        }
    }

    private showError(err: unknown): void {
        const box = this.el("error");
        box.hidden = false;
        this.el("error-text").textContent = err instanceof ApiError
            ? `${err.status}: ${err.message}` : String(err);
    }

    private exportHistory(): void {
        if (!this.history) {
            return;
        }
        const blob = new Blob([this.history.exportJson()],
                              { type: "application/json" });
        const link = document.createElement("a");
        link.href = URL.createObjectURL(blob);
        link.download = "edit-history.json";
        link.click();
        URL.revokeObjectURL(link.href);
    }
}
