/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const weak_norm: (a: number) => [number, number];
export const weyl_sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
