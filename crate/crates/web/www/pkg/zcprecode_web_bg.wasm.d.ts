/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_encoded_free: (a: number, b: number) => void;
export const __wbg_precoded_free: (a: number, b: number) => void;
export const encode: (a: number, b: number, c: number, d: number) => [number, number, number];
export const encoded_bits_per_symbol: (a: number) => number;
export const encoded_conversion_loss: (a: number) => number;
export const encoded_crossings: (a: number) => [number, number];
export const encoded_pattern: (a: number) => [number, number];
export const encoded_symbols: (a: number) => [number, number];
export const margin_sweep: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const precode_bits: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const precoded_converged: (a: number) => number;
export const precoded_gamma: (a: number) => number;
export const precoded_pattern: (a: number) => [number, number];
export const precoded_received: (a: number) => [number, number];
export const precoded_rx_interval: (a: number) => number;
export const precoded_step: (a: number) => number;
export const precoded_waveform: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
