/* tslint:disable */
/* eslint-disable */

/**
 * Canonical config text with every key at its default.
 */
export function default_config(): string;

/**
 * `[{u, d_max}]` for `points` evenly spaced intensities.
 */
export function max_distance_vs_intensity(config: string, umin: number, umax: number, points: number): string;

/**
 * Rows of the rate-versus-distance table (same fields as the CLI CSV).
 */
export function rate_curve_json(config: string, dmin: number, dmax: number, step: number): string;

/**
 * Single-stream Monte Carlo run with its analytic comparison.
 */
export function simulate_json(config: string, distance: number, pulses: bigint, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly default_config: () => [number, number];
    readonly max_distance_vs_intensity: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly rate_curve_json: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulate_json: (a: number, b: number, c: number, d: bigint, e: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
