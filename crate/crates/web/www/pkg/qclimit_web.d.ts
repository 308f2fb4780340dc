/* tslint:disable */
/* eslint-disable */

/**
 * Lowest eigenvalues of the effective particle operator at `eps` and in the limit.
 */
export function spectrum(excited: boolean, re: number, im: number, eps: number, strength: number, count: number): string;

/**
 * Weak L^{3,inf} quasinorm of 1/|k| on the unit ball, sampled on an n^3 grid.
 */
export function weak_norm(n: number): string;

/**
 * Weyl-operator and moment errors along a halving eps sweep.
 */
export function weyl_sweep(excited: boolean, re: number, im: number, width: number, start: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly weak_norm: (a: number) => [number, number];
    readonly weyl_sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
