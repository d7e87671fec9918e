/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demosession_free: (a: number, b: number) => void;
export const demosession_alpha_profile: (a: number) => [number, number, number, number];
export const demosession_evaluate: (a: number, b: number, c: number) => [number, number, number, number];
export const demosession_frontier: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demosession_new: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
export const demosession_table: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
