/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    expression(i: number): string;
    /**
     * RGBA pixels of frame `k`, ready for `ImageData`.
     */
    frame_rgba(i: number, k: number): Uint8Array;
    /**
     * Row-major 0/1 mask of the referred objects at frame `k`.
     */
    gt_mask(i: number, k: number): Uint8Array;
    height(): number;
    is_empty(): boolean;
    kl_curve(): Float64Array;
    len(): number;
    /**
     * A small dataset of `n_videos` scenes generated from `seed`.
     */
    constructor(seed: bigint, n_videos: number);
    num_frames(i: number): number;
    /**
     * The current policy's greedy answer for sample `i`.
     */
    policy_response(i: number): string;
    /**
     * Response text for one box (or none, if `boxes` is empty) at frame `k`.
     * `boxes` holds `x1, y1, x2, y2` quadruples.
     */
    response_for(i: number, k: number, boxes: Float64Array): string;
    sample_id(i: number): string;
    sampled_times(i: number): Float64Array;
    /**
     * Reward breakdown (JSON) of a response text.
     */
    score_text(i: number, text: string): string;
    subset(i: number): string;
    /**
     * Trains the toy policy from scratch; returns per-step mean reward.
     */
    train(steps: number, learning_rate: number): Float64Array;
    width(): number;
}

/**
 * Group-normalized advantages of a reward list.
 */
export function advantages(rewards: Float64Array, epsilon_std: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly advantages: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_expression: (a: number, b: number) => [number, number];
    readonly demo_frame_rgba: (a: number, b: number, c: number) => [number, number];
    readonly demo_gt_mask: (a: number, b: number, c: number) => [number, number];
    readonly demo_height: (a: number) => number;
    readonly demo_is_empty: (a: number) => number;
    readonly demo_kl_curve: (a: number) => [number, number];
    readonly demo_len: (a: number) => number;
    readonly demo_new: (a: bigint, b: number) => [number, number, number];
    readonly demo_num_frames: (a: number, b: number) => number;
    readonly demo_policy_response: (a: number, b: number) => [number, number, number, number];
    readonly demo_response_for: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_sample_id: (a: number, b: number) => [number, number];
    readonly demo_sampled_times: (a: number, b: number) => [number, number];
    readonly demo_score_text: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_subset: (a: number, b: number) => [number, number];
    readonly demo_train: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
