/* tslint:disable */
/* eslint-disable */

/**
 * Sampled curve handed to JavaScript as two `Float64Array`s.
 */
export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly x: Float64Array;
    readonly y: Float64Array;
}

/**
 * `f_max` over the (n_x, n_z) grid, row-major with n_z outer. Cells with
 * n_x² + n_z² > 1 hold NaN.
 */
export class Heatmap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Shared tick values of both axes.
     */
    readonly ticks: Float64Array;
    readonly values: Float64Array;
}

export function axis_heatmap(sites: number, theta_over_pi: number, step: number, window_us: number): Heatmap;

/**
 * F(t) on a uniform grid over `[0, window_us]`.
 */
export function fidelity_trace(sites: number, theta_over_pi: number, axis: Float64Array, field_z: number, window_us: number, points: number): Curve;

/**
 * Maximum fidelity over θ ∈ [0, 2π] (x in units of π).
 */
export function theta_curve(sites: number, axis: Float64Array, field_z: number, points: number, window_us: number): Curve;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly __wbg_heatmap_free: (a: number, b: number) => void;
    readonly axis_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly curve_x: (a: number) => [number, number];
    readonly curve_y: (a: number) => [number, number];
    readonly fidelity_trace: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly heatmap_ticks: (a: number) => [number, number];
    readonly heatmap_values: (a: number) => [number, number];
    readonly theta_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
