/* tslint:disable */
/* eslint-disable */

/**
 * Layers of one enhancement run, each as RGBA8.
 */
export class Enhanced {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly admm_iterations: number;
    readonly enhanced: Uint8Array;
    readonly hqs_iterations: number;
    readonly illumination: Uint8Array;
    /**
     * Clamped to `[0, 1]` for display.
     */
    readonly reflectance: Uint8Array;
}

/**
 * A procedural test scene, so the page works without an upload.
 */
export function demo_scene(kind: number, size: number, seed: number): Uint8Array;

export function enhance(width: number, height: number, rgba: Uint8Array, alpha: number, beta: number, gamma1: number, gamma2: number, denoiser: number, noise_level: number): Enhanced;

export function scene_kinds(): number;

/**
 * `[psnr, ssim]` of `result` against `reference`.
 */
export function score(width: number, height: number, result: Uint8Array, reference: Uint8Array): Float64Array;

/**
 * Darkens and adds seeded noise; same result as the `synth` command.
 */
export function synthesize_lowlight(width: number, height: number, rgba: Uint8Array, darken: number, noise_sigma: number, seed: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_enhanced_free: (a: number, b: number) => void;
    readonly demo_scene: (a: number, b: number, c: number) => [number, number];
    readonly enhance: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
    readonly enhanced_admm_iterations: (a: number) => number;
    readonly enhanced_enhanced: (a: number) => [number, number];
    readonly enhanced_hqs_iterations: (a: number) => number;
    readonly enhanced_illumination: (a: number) => [number, number];
    readonly enhanced_reflectance: (a: number) => [number, number];
    readonly scene_kinds: () => number;
    readonly score: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly synthesize_lowlight: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
