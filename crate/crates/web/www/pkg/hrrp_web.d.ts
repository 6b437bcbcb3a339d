/* tslint:disable */
/* eslint-disable */

/**
 * Inter-atom-interference histograms before and after sensing-dictionary design.
 */
export function iai_histograms(pulses: number, seed: number): string;

/**
 * Recovers the reference target from a random pulse subset.
 * `snr_db` may be NaN or infinite for a noiseless echo.
 */
export function recover_srp(snr_db: number, pulses: number, seed: number, noise_seed: number, algorithm: string): string;

/**
 * Small Monte Carlo sweep of success probability over the reference SNRs.
 */
export function success_sweep(trials: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly iai_histograms: (a: number, b: number) => [number, number];
    readonly recover_srp: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly success_sweep: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
