#pragma once

// Independent reference implementations used by the tests. Everything here
// is deliberately naive: triple-loop matrix products, direct formula
// evaluation in extended precision, and central finite differences. None of
// it shares code with the library under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "groupseg/tensor.hpp"

namespace oracles {

// c[m x n] = a[m x k] * b[k x n], row-major, long double accumulators.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            long double acc = 0.0L;
            for (std::size_t t = 0; t < k; ++t) {
                acc += static_cast<long double>(a[i * k + t]) * b[t * n + j];
            }
            c[i * n + j] = static_cast<double>(acc);
        }
    }
    return c;
}

inline long double sum(const std::vector<double>& x) {
    long double acc = 0.0L;
    for (double v : x) acc += v;
    return acc;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(acc);
}

// Stable softmax of one row.
inline std::vector<double> softmax_row(const std::vector<double>& x) {
    long double mx = x[0];
    for (double v : x) mx = std::max<long double>(mx, v);
    long double denom = 0.0L;
    std::vector<long double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(static_cast<long double>(x[i]) - mx);
        denom += e[i];
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(e[i] / denom);
    return out;
}

inline double logsumexp_row(const std::vector<double>& x) {
    long double mx = x[0];
    for (double v : x) mx = std::max<long double>(mx, v);
    long double acc = 0.0L;
    for (double v : x) acc += std::exp(static_cast<long double>(v) - mx);
    return static_cast<double>(mx + std::log(acc));
}

// Two-way InfoNCE over unit rows, direct evaluation. zi/zt are [b x p]
// row-major; returns (image-to-text + text-to-image).
inline double standard_contrastive(const std::vector<double>& zi, const std::vector<double>& zt,
                                   std::size_t b, std::size_t p, double tau) {
    long double total = 0.0L;
    for (int dir = 0; dir < 2; ++dir) {
        const std::vector<double>& rows = dir == 0 ? zi : zt;
        const std::vector<double>& cols = dir == 0 ? zt : zi;
        long double loss = 0.0L;
        for (std::size_t i = 0; i < b; ++i) {
            std::vector<double> logits(b);
            for (std::size_t j = 0; j < b; ++j) {
                long double acc = 0.0L;
                for (std::size_t t = 0; t < p; ++t) {
                    acc += static_cast<long double>(rows[i * p + t]) * cols[j * p + t];
                }
                logits[j] = static_cast<double>(acc / tau);
            }
            loss += logsumexp_row(logits) - logits[i];
        }
        total += loss / static_cast<long double>(b);
    }
    return static_cast<double>(total);
}

// Multi-label counterpart. zp is [k x b x p] row-major: prompt k of image i
// sits at row k*b + i of the flattened candidate list.
inline double multilabel_contrastive(const std::vector<double>& zi, const std::vector<double>& zp,
                                     std::size_t k, std::size_t b, std::size_t p, double tau) {
    const std::size_t kb = k * b;
    // image-to-prompts: softmax over all k*b candidates, positives pooled.
    long double fwd = 0.0L;
    for (std::size_t i = 0; i < b; ++i) {
        std::vector<double> logits(kb);
        for (std::size_t r = 0; r < kb; ++r) {
            long double acc = 0.0L;
            for (std::size_t t = 0; t < p; ++t) {
                acc += static_cast<long double>(zi[i * p + t]) * zp[r * p + t];
            }
            logits[r] = static_cast<double>(acc / tau);
        }
        std::vector<double> pos(k);
        for (std::size_t kk = 0; kk < k; ++kk) pos[kk] = logits[kk * b + i];
        fwd += logsumexp_row(logits) - logsumexp_row(pos);
    }
    fwd /= static_cast<long double>(b);
    // prompts-to-image: each prompt row scores all b images.
    long double bwd = 0.0L;
    for (std::size_t r = 0; r < kb; ++r) {
        std::vector<double> logits(b);
        for (std::size_t j = 0; j < b; ++j) {
            long double acc = 0.0L;
            for (std::size_t t = 0; t < p; ++t) {
                acc += static_cast<long double>(zp[r * p + t]) * zi[j * p + t];
            }
            logits[j] = static_cast<double>(acc / tau);
        }
        bwd += logsumexp_row(logits) - logits[r % b];
    }
    bwd /= static_cast<long double>(kb);
    return static_cast<double>(fwd + bwd);
}

// Central finite differences against the recorded gradient of `leaf`.
// `forward` must rebuild the whole graph from current leaf values and
// return the loss value. `grad` is the autograd result captured beforehand.
// Returns the largest relative mismatch over the checked entries.
inline double fd_max_rel_error(const std::function<double()>& forward, groupseg::Tensor leaf,
                               const std::vector<double>& grad, double h = 1e-5,
                               std::size_t max_entries = 0) {
    std::vector<double>& v = leaf.mutable_value();
    std::size_t n = v.size();
    if (max_entries != 0 && max_entries < n) n = max_entries;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double saved = v[i];
        v[i] = saved + h;
        const double up = forward();
        v[i] = saved - h;
        const double down = forward();
        v[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double ad = grad[i];
        const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-6});
        worst = std::max(worst, std::fabs(fd - ad) / denom);
    }
    return worst;
}

}  // namespace oracles
