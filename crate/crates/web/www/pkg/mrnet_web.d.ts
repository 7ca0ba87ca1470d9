/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Pyramid level `k` (1-based), the target of stage `k`.
     */
    level(k: number): Uint8Array;
    /**
     * `res` must be a power of two no smaller than 8; stages run from 8² up.
     */
    constructor(pattern_name: string, res: number, width: number, learning_rate: number, seed: bigint);
    /**
     * Network output at `res²` pixels and fractional level `lod` in `[1, N]`.
     */
    render(res: number, lod: number): Uint8Array;
    status(): string;
    /**
     * Runs up to `epochs` epochs, moving on to the next stage whenever one
     * finishes. Returns a one-line status.
     */
    train(epochs: number): string;
    /**
     * The texture on a tilted plane, point-sampled or anti-aliased.
     */
    warp(res: number, tilt: number, antialias: boolean): Uint8Array;
    readonly done: boolean;
    readonly params: number;
    readonly resolution: number;
    readonly stages: number;
    /**
     * Stages fully trained so far.
     */
    readonly trained_stages: number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_done: (a: number) => number;
    readonly demo_level: (a: number, b: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly demo_params: (a: number) => number;
    readonly demo_render: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_resolution: (a: number) => number;
    readonly demo_stages: (a: number) => number;
    readonly demo_status: (a: number) => [number, number];
    readonly demo_train: (a: number, b: number) => [number, number, number, number];
    readonly demo_trained_stages: (a: number) => number;
    readonly demo_warp: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
