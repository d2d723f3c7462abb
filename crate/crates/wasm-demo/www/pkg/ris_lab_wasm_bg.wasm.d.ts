/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_greedyrun_free: (a: number, b: number) => void;
export const amplitude_curve: (a: number) => [number, number];
export const greedy_run: (a: number, b: number, c: number, d: number) => [number, number, number];
export const greedyrun_antenna: (a: number) => number;
export const greedyrun_evaluations: (a: number) => number;
export const greedyrun_gain: (a: number) => number;
export const greedyrun_phases: (a: number) => [number, number];
export const greedyrun_trace: (a: number) => [number, number];
export const greedyrun_upper: (a: number) => number;
export const ser_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
