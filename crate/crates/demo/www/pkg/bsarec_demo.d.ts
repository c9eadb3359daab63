/* tslint:disable */
/* eslint-disable */

export function bandSplit(values: Float64Array, c: number, backend: string): Float64Array;

export function maxCutoff(len: number, backend: string): number;

export function padHistory(items: Uint32Array, len: number, mode: string): Uint32Array;

export function rescale(values: Float64Array, c: number, beta: number, backend: string): Float64Array;

export function scaledDc(labels: string): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bandSplit: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly maxCutoff: (a: number, b: number, c: number) => [number, number, number];
    readonly padHistory: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly rescale: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly scaledDc: (a: number, b: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
