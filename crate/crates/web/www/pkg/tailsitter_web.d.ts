/* tslint:disable */
/* eslint-disable */

/**
 * Magnitude response of a second-order Butterworth section against the
 * analog prototype it was designed from, on a log frequency grid.
 */
export function filter_response(kind: string, cutoff_hz: number, sample_rate_hz: number, points: number): string;

/**
 * Samples the reference of a scenario and runs the flatness chain along it.
 */
export function preview(scenario_toml: string): string;

/**
 * Names of the bundled scenarios, as a JSON array.
 */
export function scenario_names(): string;

export function scenario_source(name: string): string | undefined;

/**
 * Flies a scenario with the given controller variant and returns the
 * metrics plus a decimated trace.
 */
export function simulate(scenario_toml: string, variant: string, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly filter_response: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly preview: (a: number, b: number) => [number, number, number, number];
    readonly scenario_names: () => [number, number];
    readonly scenario_source: (a: number, b: number) => [number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
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
