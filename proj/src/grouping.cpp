#include "groupseg/grouping.hpp"

#include "groupseg/ops.hpp"

namespace groupseg {

GumbelNoise GumbelNoise::draw(Rng& rng, std::int64_t count) {
    GumbelNoise n;
    n.enabled = true;
    n.samples.resize(static_cast<std::size_t>(count));
    for (auto& s : n.samples) s = rng.gumbel();
    return n;
}

namespace {

void check_widths(const Tensor& groups, const Tensor& segments) {
    if (groups.rank() < 2 || segments.rank() < 2 || groups.rank() != segments.rank())
        throw dim_error("groups " + shape_str(groups.shape()) + " and segments " +
                        shape_str(segments.shape()) + " must both be rank 2 or both rank 3");
    if (groups.dim(-1) != segments.dim(-1))
        throw dim_error("group width " + shape_str(groups.shape()) +
                        " does not match segment width " + shape_str(segments.shape()));
    if (groups.rank() == 3 && groups.dim(0) != segments.dim(0))
        throw dim_error("batch dims differ: " + shape_str(groups.shape()) + " vs " +
                        shape_str(segments.shape()));
}

}  // namespace

AssignmentMatrix assign_soft(const Tensor& groups, const Tensor& segments,
                             const GroupingBlockParams& params, const GumbelNoise& noise,
                             double temperature) {
    check_widths(groups, segments);
    bool batched = groups.rank() == 3;
    std::int64_t b = batched ? groups.dim(0) : 1;
    std::int64_t m = groups.dim(-2);

    Tensor g_n = layer_norm(groups, params.ln_g_gain, params.ln_g_bias);
    Tensor s_n = layer_norm(segments, params.ln_s_gain, params.ln_s_bias);
    Tensor q = matmul(g_n, params.w_q);                       // [.., M, D]
    Tensor k = matmul(s_n, params.w_k);                       // [.., S, D]
    Tensor logits = matmul(q, transpose(k, -2, -1));          // [.., M, S]
    if (temperature != 1.0) logits = scale(logits, 1.0 / temperature);
    if (noise.enabled) {
        if (static_cast<std::int64_t>(noise.samples.size()) != b * m)
            throw dim_error("noise has " + std::to_string(noise.samples.size()) +
                            " samples for " + std::to_string(b * m) + " group tokens");
        Shape nshape = batched ? Shape{b, m, 1} : Shape{m, 1};
        logits = add(logits, Tensor::from_data(nshape, noise.samples));
    }
    // Normalized over the group axis: each segment column is a distribution
    // over groups.
    return AssignmentMatrix{softmax(logits, -2), AssignMode::Soft};
}

AssignmentMatrix assign_hard(const AssignmentMatrix& a) {
    if (a.mode != AssignMode::Soft)
        throw dim_error("assign_hard expects a soft assignment");
    const Tensor& soft = a.values;
    std::int64_t m = soft.dim(-2);
    std::int64_t s = soft.dim(-1);
    std::int64_t batch = soft.numel() / (m * s);

    std::vector<double> onehot(soft.value().size(), 0.0);
    const double* v = soft.value().data();
    for (std::int64_t bi = 0; bi < batch; ++bi) {
        const double* slab = v + bi * m * s;
        double* out = onehot.data() + bi * m * s;
        for (std::int64_t j = 0; j < s; ++j) {
            std::int64_t best = 0;
            double bv = slab[j];
            for (std::int64_t i = 1; i < m; ++i) {
                double cand = slab[i * s + j];
                if (cand > bv) {
                    bv = cand;
                    best = i;
                }
            }
            out[best * s + j] = 1.0;
        }
    }
    Tensor oh = Tensor::from_data(soft.shape(), std::move(onehot));
    // one-hot + A - sg(A): one-hot forward, identity backward.
    Tensor hard = add(oh, sub(soft, stop_gradient(soft)));
    return AssignmentMatrix{hard, AssignMode::Hard};
}

Tensor merge_segments(const Tensor& groups, const Tensor& segments,
                      const AssignmentMatrix& a, const GroupingBlockParams& params,
                      double eps) {
    check_widths(groups, segments);
    if (a.values.dim(-2) != groups.dim(-2) || a.values.dim(-1) != segments.dim(-2))
        throw dim_error("assignment " + shape_str(a.values.shape()) + " does not pair groups " +
                        shape_str(groups.shape()) + " with segments " +
                        shape_str(segments.shape()));
    Tensor v = matmul(segments, params.w_v);            // [.., S, D]
    Tensor numer = matmul(a.values, v);                 // [.., M, D]
    Tensor denom = clamp_min(sum(a.values, -1, true), eps);  // [.., M, 1]
    Tensor merged = div(numer, denom);
    return add(groups, matmul(merged, params.w_o));
}

GroupingResult grouping_block(const Tensor& groups, const Tensor& segments,
                              const GroupingBlockParams& params, const GumbelNoise& noise,
                              AssignMode mode, double temperature) {
    AssignmentMatrix a = assign_soft(groups, segments, params, noise, temperature);
    if (mode == AssignMode::Hard) a = assign_hard(a);
    // The merge consumes the same normalized tokens the assignment scored:
    // the residual and the value projection both see the hatted tokens.
    Tensor g_n = layer_norm(groups, params.ln_g_gain, params.ln_g_bias);
    Tensor s_n = layer_norm(segments, params.ln_s_gain, params.ln_s_bias);
    Tensor merged = merge_segments(g_n, s_n, a, params);
    return GroupingResult{merged, a};
}

}  // namespace groupseg
