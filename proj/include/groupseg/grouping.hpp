#pragma once

#include "groupseg/rng.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

enum class AssignMode { Soft, Hard };

// Group-by-segment membership matrix. Soft columns sum to 1; hard columns
// are exactly one-hot. Batched values carry a leading batch axis.
struct AssignmentMatrix {
    Tensor values;  // [M, S] or [B, M, S]
    AssignMode mode = AssignMode::Soft;
};

// Projections of the grouping block. All four map width D to itself; the
// two layer norms are applied to group/segment tokens before the q/k
// projections.
struct GroupingBlockParams {
    Tensor w_q, w_k, w_v, w_o;           // [D, D]
    Tensor ln_g_gain, ln_g_bias;         // [D]
    Tensor ln_s_gain, ln_s_bias;         // [D]
};

// Per-forward Gumbel(0,1) draws, one per group token (per batch element in
// batched form). Disabled mode injects exactly zero.
struct GumbelNoise {
    std::vector<double> samples;
    bool enabled = false;

    static GumbelNoise disabled() { return GumbelNoise{}; }
    static GumbelNoise draw(Rng& rng, std::int64_t count);
};

// Soft assignment: logits[i, j] = q_i . k_j + noise_i over layer-normalized
// tokens, normalized across the group axis per segment column. temperature
// divides the logits (1.0 reproduces the formula as written).
AssignmentMatrix assign_soft(const Tensor& groups, const Tensor& segments,
                             const GroupingBlockParams& params, const GumbelNoise& noise,
                             double temperature = 1.0);

// Straight-through hard assignment: forward one-hot argmax per column (ties
// to the lowest group index), backward identical to the soft matrix.
AssignmentMatrix assign_hard(const AssignmentMatrix& a);

// merged_i = g_i + W_o . (sum_j a[i,j] W_v s_j) / max(sum_j a[i,j], eps).
// Hard columns make the denominator an integer count, so eps = 1 leaves
// every forward value unchanged (an empty group keeps only its residual)
// while capping the straight-through gradient at count 1; a smaller eps
// turns each empty group into a 1/eps gradient amplifier.
Tensor merge_segments(const Tensor& groups, const Tensor& segments,
                      const AssignmentMatrix& a, const GroupingBlockParams& params,
                      double eps = 1.0);

// assign_soft -> (assign_hard when mode is Hard) -> merge_segments. Returns
// the merged tokens and the assignment actually used for merging.
struct GroupingResult {
    Tensor new_segments;
    AssignmentMatrix assignment;
};
GroupingResult grouping_block(const Tensor& groups, const Tensor& segments,
                              const GroupingBlockParams& params, const GumbelNoise& noise,
                              AssignMode mode, double temperature = 1.0);

}  // namespace groupseg
