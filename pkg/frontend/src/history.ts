// Bounded undo/redo over edit states, exportable as JSON for batch replay
// through the pipeline CLI.

import { EditState, toRequestBody } from "./state.js";

export const HISTORY_LIMIT = 64;

export class EditHistory {
    private past: EditState[] = [];
    private future: EditState[] = [];

    constructor(private current: EditState) {}

    get state(): EditState {
        return this.current;
    }

    /** Apply a new state; clears the redo stack. */
    push(state: EditState): void {
        this.past.push(this.current);
        if (this.past.length > HISTORY_LIMIT) {
            this.past.shift();
        }
        this.current = state;
        this.future = [];
    }

    canUndo(): boolean {
        return this.past.length > 0;
    }

    canRedo(): boolean {
        return this.future.length > 0;
    }

    undo(): EditState {
        const prev = this.past.pop();
        if (prev !== undefined) {
            this.future.push(this.current);
            this.current = prev;
        }
        return this.current;
    }

    redo(): EditState {
        const next = this.future.pop();
        if (next !== undefined) {
            this.past.push(this.current);
            this.current = next;
        }
        return this.current;
    }

    /** Every state from oldest to current, in request-body form: the exact
     *  payloads the service saw, replayable via `relightkit relight --replay`. */
    exportJson(): string {
        const states = [...this.past, this.current].map(toRequestBody);
        return JSON.stringify(states, null, 2);
    }
}
