// Debounced, latest-wins request scheduling: while the user drags a slider
// at most one relight request is in flight, and a response is dropped when a
// newer edit superseded it before it arrived.

export const DEBOUNCE_MS = 80;

export interface Scheduled<T> {
    seq: number;
    result: T;
}

type Runner<A, T> = (arg: A) => Promise<T>;

export class RequestScheduler<A, T> {
    private seq = 0;
    private applied = 0;
    private inFlight = false;
    private pending: A | null = null;
    private timer: ReturnType<typeof setTimeout> | null = null;
    inFlightCount = 0;
    maxInFlight = 0;

    constructor(
        private run: Runner<A, T>,
        private apply: (result: T, seq: number) => void,
        private onError: (err: unknown) => void = () => {},
        private debounceMs: number = DEBOUNCE_MS,
    ) {}

    /** Schedule an edit; earlier unsent edits are replaced. */
    submit(arg: A): void {
        this.pending = arg;
        if (this.timer !== null) {
            clearTimeout(this.timer);
        }
        this.timer = setTimeout(() => {
            this.timer = null;
            this.flush();
        }, this.debounceMs);
    }

    /** Send immediately, still respecting the single-request rule. */
    flush(): void {
        if (this.pending === null || this.inFlight) {
            return;
        }
        const arg = this.pending;
        this.pending = null;
        const seq = ++this.seq;
        this.inFlight = true;
        this.inFlightCount += 1;
        this.maxInFlight = Math.max(this.maxInFlight, this.inFlightCount);
        this.run(arg)
            .then((result) => {
                if (seq > this.applied) {
                    this.applied = seq;
                    this.apply(result, seq);
                }
            })
            .catch((err) => this.onError(err))
            .finally(() => {
                this.inFlight = false;
                this.inFlightCount -= 1;
                // a drag that continued while we were busy left a newer edit
                if (this.pending !== null && this.timer === null) {
                    this.flush();
                }
            });
    }
}
