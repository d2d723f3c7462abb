/* tslint:disable */
/* eslint-disable */

/**
 * One greedy phase-selection run on an i.i.d. Rayleigh instance.
 */
export class GreedyRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly antenna: number;
    readonly evaluations: number;
    /**
     * Achieved `|s_N|²`.
     */
    readonly gain: number;
    readonly phases: Float64Array;
    /**
     * `|s_i|` after each element.
     */
    readonly trace: Float64Array;
    /**
     * Lossless co-phased gain summed over antennas.
     */
    readonly upper: number;
}

/**
 * `points` samples of the amplitude over `[-π, π)`, as `[θ0, A0, θ1, A1, ...]`.
 */
export function amplitude_curve(points: number): Float64Array;

/**
 * `bits = 0` selects continuous phases.
 */
export function greedy_run(n: number, m: number, bits: number, seed: number): GreedyRun;

/**
 * SER against `P/N0` in dB, as `[snr, theory, simulated, ...]`.
 *
 * `symbols = 0` skips the simulation (the simulated column is then NaN).
 */
export function ser_curve(host: string, order_exponent: number, n: number, repetitions: number, snr_min_db: number, snr_max_db: number, points: number, symbols: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_greedyrun_free: (a: number, b: number) => void;
    readonly amplitude_curve: (a: number) => [number, number];
    readonly greedy_run: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly greedyrun_antenna: (a: number) => number;
    readonly greedyrun_evaluations: (a: number) => number;
    readonly greedyrun_gain: (a: number) => number;
    readonly greedyrun_phases: (a: number) => [number, number];
    readonly greedyrun_trace: (a: number) => [number, number];
    readonly greedyrun_upper: (a: number) => number;
    readonly ser_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
