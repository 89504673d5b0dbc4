/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const advantages: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_expression: (a: number, b: number) => [number, number];
export const demo_frame_rgba: (a: number, b: number, c: number) => [number, number];
export const demo_gt_mask: (a: number, b: number, c: number) => [number, number];
export const demo_height: (a: number) => number;
export const demo_is_empty: (a: number) => number;
export const demo_kl_curve: (a: number) => [number, number];
export const demo_len: (a: number) => number;
export const demo_new: (a: bigint, b: number) => [number, number, number];
export const demo_num_frames: (a: number, b: number) => number;
export const demo_policy_response: (a: number, b: number) => [number, number, number, number];
export const demo_response_for: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const demo_sample_id: (a: number, b: number) => [number, number];
export const demo_sampled_times: (a: number, b: number) => [number, number];
export const demo_score_text: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_subset: (a: number, b: number) => [number, number];
export const demo_train: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
