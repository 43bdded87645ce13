// Thin client for the /v1 JSON API.

import { RelightRequestBody, RelightResponse, SceneInfo } from "./state.js";

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

async function reject(response: Response): Promise<never> {
    let detail = response.statusText;
    try {
        const body = await response.json();
        if (body && body.detail) {
            detail = typeof body.detail === "string"
                ? body.detail : JSON.stringify(body.detail);
        }
    } catch {
        // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
}

export class ApiClient {
    constructor(private base: string = "") {}

    async scenes(): Promise<SceneInfo[]> {
        const r = await fetch(`${this.base}/v1/scenes`);
        if (!r.ok) {
            return reject(r);
        }
        const body = await r.json();
        return body.scenes as SceneInfo[];
    }

    previewUrl(sceneId: string): string {
        return `${this.base}/v1/scenes/${encodeURIComponent(sceneId)}/preview`;
    }

    async relight(body: RelightRequestBody): Promise<RelightResponse> {
        const r = await fetch(`${this.base}/v1/relight`, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!r.ok) {
            return reject(r);
        }
        return await r.json() as RelightResponse;
    }
}

export function pngDataUrl(base64: string): string {
    return `data:image/png;base64,${base64}`;
}
