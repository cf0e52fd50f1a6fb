/* tslint:disable */
/* eslint-disable */

export class Encoded {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly bits_per_symbol: number;
    readonly conversion_loss: number;
    /**
     * Sample indices where the pattern changes sign.
     */
    readonly crossings: Uint32Array;
    readonly pattern: Int8Array;
    readonly symbols: Uint32Array;
}

export class Precoded {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly converged: boolean;
    readonly gamma: number;
    readonly pattern: Int8Array;
    /**
     * Noiseless receive samples, one per receive interval.
     */
    readonly received: Float64Array;
    readonly rx_interval: number;
    readonly step: number;
    /**
     * Transmit signal on a fine grid starting at the first transmit sample.
     */
    readonly waveform: Float64Array;
}

export function encode(bits: string, m_rx: number, pilot: number): Encoded;

export function margin_sweep(bits: string, m_rx: number, grid: Float64Array): Float64Array;

export function precode_bits(bits: string, scheme: string, m_rx: number, wtx_t: number): Precoded;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_encoded_free: (a: number, b: number) => void;
    readonly __wbg_precoded_free: (a: number, b: number) => void;
    readonly encode: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly encoded_bits_per_symbol: (a: number) => number;
    readonly encoded_conversion_loss: (a: number) => number;
    readonly encoded_crossings: (a: number) => [number, number];
    readonly encoded_pattern: (a: number) => [number, number];
    readonly encoded_symbols: (a: number) => [number, number];
    readonly margin_sweep: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly precode_bits: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly precoded_converged: (a: number) => number;
    readonly precoded_gamma: (a: number) => number;
    readonly precoded_pattern: (a: number) => [number, number];
    readonly precoded_received: (a: number) => [number, number];
    readonly precoded_rx_interval: (a: number) => number;
    readonly precoded_step: (a: number) => number;
    readonly precoded_waveform: (a: number) => [number, number];
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
