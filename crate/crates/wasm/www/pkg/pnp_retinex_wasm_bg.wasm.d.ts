/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_enhanced_free: (a: number, b: number) => void;
export const demo_scene: (a: number, b: number, c: number) => [number, number];
export const enhance: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
export const enhanced_admm_iterations: (a: number) => number;
export const enhanced_enhanced: (a: number) => [number, number];
export const enhanced_hqs_iterations: (a: number) => number;
export const enhanced_illumination: (a: number) => [number, number];
export const enhanced_reflectance: (a: number) => [number, number];
export const scene_kinds: () => number;
export const score: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const synthesize_lowlight: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
