/* tslint:disable */
/* eslint-disable */

export class DemoSession {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Normalized global factor per layer, as JSON.
     */
    alpha_profile(): string;
    /**
     * f, g, FLOP savings and the per-layer, per-modality skip profile.
     */
    evaluate(tau_text: number, tau_vision: number): string;
    /**
     * Frontier search at target `rho`; with `compare` also counts the
     * exhaustive search's f evaluations.
     */
    frontier(rho: number, d: number, compare: boolean): string;
    /**
     * Build a model with `layers` MoE layers of 8 experts (top-2), sample
     * `samples` calibration sequences and estimate the global factors.
     */
    constructor(seed: bigint, layers: number, samples: number, text_fraction: number, vision_temperature: number);
    /**
     * Every cell of the `d × d` grid; rows are text thresholds.
     */
    table(d: number): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demosession_free: (a: number, b: number) => void;
    readonly demosession_alpha_profile: (a: number) => [number, number, number, number];
    readonly demosession_evaluate: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demosession_frontier: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demosession_new: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly demosession_table: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
