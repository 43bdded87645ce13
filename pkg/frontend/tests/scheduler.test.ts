import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { DEBOUNCE_MS, RequestScheduler } from "../src/scheduler.js";

function deferred<T>() {
    let resolve!: (v: T) => void;
    const promise = new Promise<T>((r) => { resolve = r; });
    return { promise, resolve };
}

describe("request scheduler", () => {
    beforeEach(() => vi.useFakeTimers());
    afterEach(() => vi.useRealTimers());

    it("debounces a drag into one request", async () => {
        const calls: number[] = [];
        const sched = new RequestScheduler<number, number>(
            async (v) => { calls.push(v); return v; },
            () => {},
        );
        for (let i = 0; i < 10; i++) {
            sched.submit(i);
            vi.advanceTimersByTime(DEBOUNCE_MS / 2);
        }
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
        expect(calls).toEqual([9]);
    });

    it("keeps at most one request in flight across a 20-edit drag", async () => {
        const pending: Array<{ resolve: (v: number) => void; v: number }> = [];
        const applied: number[] = [];
        const sched = new RequestScheduler<number, number>(
            (v) => {
                const d = deferred<number>();
                pending.push({ resolve: d.resolve, v });
                return d.promise;
            },
            (r) => applied.push(r),
        );
        for (let i = 0; i < 20; i++) {
            sched.submit(i);
            await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 5);
            // resolve whatever is outstanding every few edits, like a slow server
            if (i % 3 === 2 && pending.length > 0) {
                pending.shift()!.resolve(i);
                await vi.advanceTimersByTimeAsync(1);
            }
        }
        while (pending.length > 0) {
            pending.shift()!.resolve(99);
            await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 5);
        }
        expect(sched.maxInFlight).toBe(1);
        expect(applied.length).toBeGreaterThan(0);
    });

    it("drops stale responses: the latest edit wins", async () => {
        const handlers = new Map<number, (v: number) => void>();
        const shown: number[] = [];
        const sched = new RequestScheduler<number, number>(
            (v) => new Promise<number>((r) => handlers.set(v, r)),
            (r) => shown.push(r),
        );
        sched.submit(1);
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 1);
        sched.submit(2);                   // supersedes while 1 is in flight
        handlers.get(1)!(1);
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 1);
        handlers.get(2)!(2);
        await vi.advanceTimersByTimeAsync(1);
        expect(shown).toEqual([1, 2]);     // 1 applied before 2 existed, then 2
        sched.submit(3);
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 1);
        sched.submit(4);
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 1);
        handlers.get(3)!(3);
        await vi.advanceTimersByTimeAsync(1);
        handlers.get(4)!(4);
        await vi.advanceTimersByTimeAsync(1);
        expect(shown).toEqual([1, 2, 3, 4]);
    });

    it("reports errors and recovers", async () => {
        const errors: unknown[] = [];
        const sched = new RequestScheduler<number, number>(
            async (v) => {
                if (v === 1) { throw new Error("boom"); }
                return v;
            },
            () => {},
            (e) => errors.push(e),
        );
        sched.submit(1);
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 1);
        expect(errors).toHaveLength(1);
        sched.submit(2);
        await vi.advanceTimersByTimeAsync(DEBOUNCE_MS + 1);
        expect(errors).toHaveLength(1);
    });
});
