/* tslint:disable */
/* eslint-disable */

/**
 * Editing dimensions of the text action space, as a JSON array of
 * `{name, description}`.
 */
export function action_dims(): string;

/**
 * Embeds a `#topicN`-tagged message, moves it with the mock agent whose
 * first direction is `target_topic`, and reports how far it moved.
 */
export function mock_edit(values: Float64Array, message: string, target_topic: number, step_size: number, seed: bigint): string;

/**
 * The instruction an editing agent would receive for this action.
 */
export function render_prompt(values: Float64Array, message: string): string;

/**
 * Full and gain-only rewards for an influence change and a consistency.
 */
export function reward(delta_l: number, consistency: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly action_dims: () => [number, number];
    readonly mock_edit: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly render_prompt: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly reward: (a: number, b: number) => [number, number];
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
