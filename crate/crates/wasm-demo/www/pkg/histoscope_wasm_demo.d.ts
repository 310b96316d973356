/* tslint:disable */
/* eslint-disable */

/**
 * Handle exported to JavaScript.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    addCategory(category: string): string;
    histograms(sort: string): string;
    constructor(text: string, cutoff: number);
    search(query: string, semantic: boolean): string;
    summary(): string;
}

/**
 * Categories the offline generator can answer, as a JSON array.
 */
export function categories(): string;

/**
 * The bundled 500-line medical sample, one example per line.
 */
export function sampleText(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly categories: () => [number, number];
    readonly demo_addCategory: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_histograms: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_search: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_summary: (a: number) => [number, number];
    readonly sampleText: () => [number, number];
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
