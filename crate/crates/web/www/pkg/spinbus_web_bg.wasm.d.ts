/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const __wbg_heatmap_free: (a: number, b: number) => void;
export const axis_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number];
export const curve_x: (a: number) => [number, number];
export const curve_y: (a: number) => [number, number];
export const fidelity_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const heatmap_ticks: (a: number) => [number, number];
export const heatmap_values: (a: number) => [number, number];
export const theta_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
