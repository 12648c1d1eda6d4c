#include "groupseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "groupseg/kernels.hpp"

namespace groupseg {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

int norm_axis(int axis, int rank, const Shape& shape) {
    int a = axis;
    if (a < 0) a += rank;
    if (a < 0 || a >= rank)
        throw dim_error("axis " + std::to_string(axis) + " out of range for shape " +
                        shape_str(shape));
    return a;
}

Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
    std::size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        std::int64_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
        std::int64_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
        if (da != db && da != 1 && db != 1)
            throw dim_error(std::string(op) + ": shapes " + shape_str(a) + " and " +
                            shape_str(b) + " are not broadcast-compatible");
        out[r - 1 - i] = std::max(da, db);
    }
    return out;
}

// Strides of `op` relative to `out` (right-aligned); 0 on broadcast axes.
std::vector<std::int64_t> broadcast_strides(const Shape& op, const Shape& out) {
    int R = static_cast<int>(out.size());
    int r = static_cast<int>(op.size());
    std::vector<std::int64_t> st(static_cast<std::size_t>(R), 0);
    std::int64_t acc = 1;
    for (int i = r - 1; i >= 0; --i) {
        int oa = R - (r - i);
        if (op[static_cast<std::size_t>(i)] != 1) st[static_cast<std::size_t>(oa)] = acc;
        acc *= op[static_cast<std::size_t>(i)];
    }
    return st;
}

// Walks every element of `out`, exposing linear offsets into two operands.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, F&& f) {
    int R = static_cast<int>(out.size());
    std::int64_t total = shape_numel(out);
    std::vector<std::int64_t> idx(static_cast<std::size_t>(R), 0);
    std::int64_t offa = 0, offb = 0;
    for (std::int64_t lin = 0; lin < total; ++lin) {
        f(static_cast<std::size_t>(lin), static_cast<std::size_t>(offa),
          static_cast<std::size_t>(offb));
        for (int ax = R - 1; ax >= 0; --ax) {
            std::size_t u = static_cast<std::size_t>(ax);
            ++idx[u];
            offa += sa[u];
            offb += sb[u];
            if (idx[u] < out[u]) break;
            offa -= sa[u] * out[u];
            offb -= sb[u] * out[u];
            idx[u] = 0;
        }
    }
}

enum class BinKind { Add, Sub, Mul, Div };

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, BinKind kind) {
    Shape out_shape = broadcast_shape(name, a.shape(), b.shape());
    std::int64_t n = shape_numel(out_shape);
    std::vector<double> out(static_cast<std::size_t>(n));
    const auto& av = a.value();
    const auto& bv = b.value();

    bool same = a.shape() == out_shape && b.shape() == out_shape;
    if (same) {
        const auto& k = kernels();
        switch (kind) {
            case BinKind::Add: k.add(av.data(), bv.data(), out.data(), out.size()); break;
            case BinKind::Sub: k.sub(av.data(), bv.data(), out.data(), out.size()); break;
            case BinKind::Mul: k.mul(av.data(), bv.data(), out.data(), out.size()); break;
            case BinKind::Div:
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
                break;
        }
    } else {
        auto sa = broadcast_strides(a.shape(), out_shape);
        auto sb = broadcast_strides(b.shape(), out_shape);
        switch (kind) {
            case BinKind::Add:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                    out[o] = av[i] + bv[j];
                });
                break;
            case BinKind::Sub:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                    out[o] = av[i] - bv[j];
                });
                break;
            case BinKind::Mul:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                    out[o] = av[i] * bv[j];
                });
                break;
            case BinKind::Div:
                for_each_broadcast(out_shape, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                    out[o] = av[i] / bv[j];
                });
                break;
        }
    }

    auto an = a.node;
    auto bn = b.node;
    Shape osh = out_shape;
    return make_op_node(
        std::move(out_shape), std::move(out), {an, bn},
        [an, bn, osh, kind](Node& self) {
            const auto& g = self.grad;
            auto sa = broadcast_strides(an->shape, osh);
            auto sb = broadcast_strides(bn->shape, osh);
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            auto* ga = an->requires_grad ? an->grad.data() : nullptr;
            auto* gb = bn->requires_grad ? bn->grad.data() : nullptr;
            const auto& av = an->value;
            const auto& bv = bn->value;
            switch (kind) {
                case BinKind::Add:
                    for_each_broadcast(osh, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                        if (ga) ga[i] += g[o];
                        if (gb) gb[j] += g[o];
                    });
                    break;
                case BinKind::Sub:
                    for_each_broadcast(osh, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                        if (ga) ga[i] += g[o];
                        if (gb) gb[j] -= g[o];
                    });
                    break;
                case BinKind::Mul:
                    for_each_broadcast(osh, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                        if (ga) ga[i] += g[o] * bv[j];
                        if (gb) gb[j] += g[o] * av[i];
                    });
                    break;
                case BinKind::Div:
                    for_each_broadcast(osh, sa, sb, [&](std::size_t o, std::size_t i, std::size_t j) {
                        if (ga) ga[i] += g[o] / bv[j];
                        if (gb) gb[j] -= g[o] * av[i] / (bv[j] * bv[j]);
                    });
                    break;
            }
        });
}

// Splits a shape around `axis` into [outer, d, inner].
struct AxisSplit {
    std::int64_t outer = 1, d = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
    AxisSplit sp;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        std::size_t u = static_cast<std::size_t>(i);
        if (i < axis) sp.outer *= s[u];
        else if (i == axis) sp.d = s[u];
        else sp.inner *= s[u];
    }
    return sp;
}

Shape reduced_shape(const Shape& s, int axis, bool keepdim) {
    Shape out;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
        if (i == axis) {
            if (keepdim) out.push_back(1);
        } else {
            out.push_back(s[static_cast<std::size_t>(i)]);
        }
    }
    if (out.empty()) out.push_back(1);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op("add", a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op("sub", a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op("mul", a, b, BinKind::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op("div", a, b, BinKind::Div); }

Tensor scale(const Tensor& x, double c) {
    std::vector<double> out(x.value().size());
    kernels().scale(c, x.value().data(), out.data(), out.size());
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn, c](Node& self) {
        xn->ensure_grad();
        kernels().axpy(c, self.grad.data(), xn->grad.data(), self.grad.size());
    });
}

Tensor add_const(const Tensor& x, double c) {
    std::vector<double> out(x.value().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] + c;
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn](Node& self) {
        xn->ensure_grad();
        kernels().axpy(1.0, self.grad.data(), xn->grad.data(), self.grad.size());
    });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor exp(const Tensor& x) {
    std::vector<double> out(x.value().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.value()[i]);
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += self.grad[i] * self.value[i];
    });
}

Tensor log(const Tensor& x) {
    std::vector<double> out(x.value().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(x.value()[i] > 0.0))
            throw numeric_error("log of non-positive value " + std::to_string(x.value()[i]));
        out[i] = std::log(x.value()[i]);
    }
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += self.grad[i] / xn->value[i];
    });
}

Tensor gelu(const Tensor& x) {
    std::vector<double> out(x.value().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = x.value()[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            double v = xn->value[i];
            double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            xn->grad[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
}

Tensor clamp_min(const Tensor& x, double lo) {
    std::vector<double> out(x.value().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.value()[i], lo);
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn, lo](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xn->value[i] >= lo) xn->grad[i] += self.grad[i];
    });
}

Tensor stop_gradient(const Tensor& x) {
    return Tensor::from_data(x.shape(), x.value(), false);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw dim_error("matmul requires rank >= 2, got " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
    std::int64_t m = a.dim(-2), k = a.dim(-1);
    std::int64_t k2 = b.dim(-2), n = b.dim(-1);
    if (k != k2)
        throw dim_error("matmul: inner dimensions differ for " + shape_str(a.shape()) +
                        " and " + shape_str(b.shape()));
    Shape ba(a.shape().begin(), a.shape().end() - 2);
    Shape bb(b.shape().begin(), b.shape().end() - 2);
    Shape bout = (ba.empty() && bb.empty()) ? Shape{} : broadcast_shape("matmul", ba, bb);

    Shape out_shape = bout;
    out_shape.push_back(m);
    out_shape.push_back(n);
    std::int64_t batches = bout.empty() ? 1 : shape_numel(bout);
    std::vector<double> out(static_cast<std::size_t>(batches * m * n));

    auto sa = broadcast_strides(ba, bout);
    auto sb = broadcast_strides(bb, bout);
    Shape walk = bout.empty() ? Shape{1} : bout;
    if (bout.empty()) {
        sa.assign(1, 0);
        sb.assign(1, 0);
    }

    const auto& kern = kernels();
    const double* ap = a.value().data();
    const double* bp = b.value().data();
    for_each_broadcast(walk, sa, sb, [&](std::size_t lin, std::size_t ia, std::size_t ib) {
        kern.matmul_nn(ap + ia * m * k, bp + ib * k * n, out.data() + lin * m * n,
                       static_cast<std::size_t>(m), static_cast<std::size_t>(k),
                       static_cast<std::size_t>(n), false);
    });

    auto an = a.node;
    auto bn = b.node;
    return make_op_node(
        std::move(out_shape), std::move(out), {an, bn},
        [an, bn, sa, sb, walk, m, k, n](Node& self) {
            const auto& kern = kernels();
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            const double* g = self.grad.data();
            for_each_broadcast(walk, sa, sb, [&](std::size_t lin, std::size_t ia, std::size_t ib) {
                const double* gs = g + lin * m * n;
                if (an->requires_grad)
                    kern.matmul_nt(gs, bn->value.data() + ib * k * n,
                                   an->grad.data() + ia * m * k, static_cast<std::size_t>(m),
                                   static_cast<std::size_t>(n), static_cast<std::size_t>(k),
                                   true);
                if (bn->requires_grad)
                    kern.matmul_tn(an->value.data() + ia * m * k, gs,
                                   bn->grad.data() + ib * k * n, static_cast<std::size_t>(k),
                                   static_cast<std::size_t>(m), static_cast<std::size_t>(n),
                                   true);
            });
        });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw dim_error("reshape: cannot view " + shape_str(x.shape()) + " as " +
                        shape_str(shape));
    auto xn = x.node;
    return make_op_node(std::move(shape), x.value(), {xn}, [xn](Node& self) {
        xn->ensure_grad();
        kernels().axpy(1.0, self.grad.data(), xn->grad.data(), self.grad.size());
    });
}

Tensor transpose(const Tensor& x, int axis_a, int axis_b) {
    int r = x.rank();
    int i = norm_axis(axis_a, r, x.shape());
    int j = norm_axis(axis_b, r, x.shape());
    if (i == j) return reshape(x, x.shape());

    const Shape& in = x.shape();
    std::vector<int> perm(static_cast<std::size_t>(r));
    for (int t = 0; t < r; ++t) perm[static_cast<std::size_t>(t)] = t;
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);

    Shape out_shape(static_cast<std::size_t>(r));
    for (int t = 0; t < r; ++t)
        out_shape[static_cast<std::size_t>(t)] = in[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])];

    std::vector<std::int64_t> in_strides(static_cast<std::size_t>(r), 1);
    for (int t = r - 2; t >= 0; --t)
        in_strides[static_cast<std::size_t>(t)] =
            in_strides[static_cast<std::size_t>(t + 1)] * in[static_cast<std::size_t>(t + 1)];
    // Stride of output axis t in the input buffer.
    std::vector<std::int64_t> map_strides(static_cast<std::size_t>(r));
    for (int t = 0; t < r; ++t)
        map_strides[static_cast<std::size_t>(t)] =
            in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])];

    std::int64_t total = x.numel();
    std::vector<double> out(static_cast<std::size_t>(total));
    std::vector<std::int64_t> zeros_st(static_cast<std::size_t>(r), 0);
    for_each_broadcast(out_shape, map_strides, zeros_st,
                       [&](std::size_t o, std::size_t src, std::size_t) {
                           out[o] = x.value()[src];
                       });

    auto xn = x.node;
    return make_op_node(std::move(out_shape), std::move(out), {xn},
                        [xn, map_strides, zeros_st](Node& self) {
                            xn->ensure_grad();
                            for_each_broadcast(self.shape, map_strides, zeros_st,
                                               [&](std::size_t o, std::size_t src, std::size_t) {
                                                   xn->grad[src] += self.grad[o];
                                               });
                        });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw dim_error("concat of zero tensors");
    int r = xs[0].rank();
    int ax = norm_axis(axis, r, xs[0].shape());
    Shape out_shape = xs[0].shape();
    std::int64_t total_d = 0;
    for (const auto& x : xs) {
        if (x.rank() != r)
            throw dim_error("concat: rank mismatch between " + shape_str(xs[0].shape()) +
                            " and " + shape_str(x.shape()));
        for (int t = 0; t < r; ++t) {
            if (t != ax && x.shape()[static_cast<std::size_t>(t)] != out_shape[static_cast<std::size_t>(t)])
                throw dim_error("concat: shapes " + shape_str(xs[0].shape()) + " and " +
                                shape_str(x.shape()) + " differ outside axis " +
                                std::to_string(ax));
        }
        total_d += x.shape()[static_cast<std::size_t>(ax)];
    }
    out_shape[static_cast<std::size_t>(ax)] = total_d;

    auto sp_out = split_axis(out_shape, ax);
    std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
    std::int64_t pos = 0;
    for (const auto& x : xs) {
        auto sp = split_axis(x.shape(), ax);
        for (std::int64_t o = 0; o < sp.outer; ++o) {
            const double* src = x.value().data() + o * sp.d * sp.inner;
            double* dst = out.data() + (o * sp_out.d + pos) * sp_out.inner;
            std::memcpy(dst, src, static_cast<std::size_t>(sp.d * sp.inner) * sizeof(double));
        }
        pos += sp.d;
    }

    std::vector<std::shared_ptr<Node>> parents;
    std::vector<std::int64_t> sizes;
    for (const auto& x : xs) {
        parents.push_back(x.node);
        sizes.push_back(x.shape()[static_cast<std::size_t>(ax)]);
    }
    auto parents_copy = parents;
    return make_op_node(std::move(out_shape), std::move(out), std::move(parents),
                        [parents_copy, sizes, sp_out](Node& self) {
                            std::int64_t pos = 0;
                            for (std::size_t t = 0; t < parents_copy.size(); ++t) {
                                auto& p = parents_copy[t];
                                std::int64_t d = sizes[t];
                                if (p->requires_grad) {
                                    p->ensure_grad();
                                    for (std::int64_t o = 0; o < sp_out.outer; ++o) {
                                        const double* gs =
                                            self.grad.data() + (o * sp_out.d + pos) * sp_out.inner;
                                        double* gd = p->grad.data() + o * d * sp_out.inner;
                                        for (std::int64_t u = 0; u < d * sp_out.inner; ++u)
                                            gd[u] += gs[u];
                                    }
                                }
                                pos += d;
                            }
                        });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len) {
    int ax = norm_axis(axis, x.rank(), x.shape());
    std::int64_t d = x.shape()[static_cast<std::size_t>(ax)];
    if (len <= 0 || start < 0 || start + len > d)
        throw dim_error("slice [" + std::to_string(start) + ", " +
                        std::to_string(start + len) + ") out of range for axis " +
                        std::to_string(ax) + " of " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[static_cast<std::size_t>(ax)] = len;
    auto sp = split_axis(x.shape(), ax);
    std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        const double* src = x.value().data() + (o * sp.d + start) * sp.inner;
        std::memcpy(out.data() + o * len * sp.inner, src,
                    static_cast<std::size_t>(len * sp.inner) * sizeof(double));
    }
    auto xn = x.node;
    return make_op_node(std::move(out_shape), std::move(out), {xn},
                        [xn, sp, start, len](Node& self) {
                            xn->ensure_grad();
                            for (std::int64_t o = 0; o < sp.outer; ++o) {
                                const double* gs = self.grad.data() + o * len * sp.inner;
                                double* gd = xn->grad.data() + (o * sp.d + start) * sp.inner;
                                for (std::int64_t u = 0; u < len * sp.inner; ++u) gd[u] += gs[u];
                            }
                        });
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
    int ax = norm_axis(axis, x.rank(), x.shape());
    auto sp = split_axis(x.shape(), ax);
    Shape out_shape = reduced_shape(x.shape(), ax, keepdim);
    std::vector<double> out(static_cast<std::size_t>(sp.outer * sp.inner), 0.0);
    const double* xv = x.value().data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t j = 0; j < sp.d; ++j)
            for (std::int64_t i = 0; i < sp.inner; ++i)
                out[static_cast<std::size_t>(o * sp.inner + i)] +=
                    xv[(o * sp.d + j) * sp.inner + i];
    auto xn = x.node;
    return make_op_node(std::move(out_shape), std::move(out), {xn}, [xn, sp](Node& self) {
        xn->ensure_grad();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t j = 0; j < sp.d; ++j)
                for (std::int64_t i = 0; i < sp.inner; ++i)
                    xn->grad[static_cast<std::size_t>((o * sp.d + j) * sp.inner + i)] +=
                        self.grad[static_cast<std::size_t>(o * sp.inner + i)];
    });
}

Tensor mean(const Tensor& x, int axis, bool keepdim) {
    int ax = norm_axis(axis, x.rank(), x.shape());
    double inv = 1.0 / static_cast<double>(x.shape()[static_cast<std::size_t>(ax)]);
    return scale(sum(x, ax, keepdim), inv);
}

Tensor reduce_max(const Tensor& x, int axis, bool keepdim) {
    int ax = norm_axis(axis, x.rank(), x.shape());
    auto sp = split_axis(x.shape(), ax);
    Shape out_shape = reduced_shape(x.shape(), ax, keepdim);
    std::vector<double> out(static_cast<std::size_t>(sp.outer * sp.inner));
    auto arg = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(sp.outer * sp.inner), 0);
    const double* xv = x.value().data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            double best = xv[(o * sp.d) * sp.inner + i];
            std::int64_t bj = 0;
            for (std::int64_t j = 1; j < sp.d; ++j) {
                double v = xv[(o * sp.d + j) * sp.inner + i];
                if (v > best) {
                    best = v;
                    bj = j;
                }
            }
            out[static_cast<std::size_t>(o * sp.inner + i)] = best;
            (*arg)[static_cast<std::size_t>(o * sp.inner + i)] = bj;
        }
    auto xn = x.node;
    return make_op_node(std::move(out_shape), std::move(out), {xn}, [xn, sp, arg](Node& self) {
        xn->ensure_grad();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                std::int64_t j = (*arg)[static_cast<std::size_t>(o * sp.inner + i)];
                xn->grad[static_cast<std::size_t>((o * sp.d + j) * sp.inner + i)] +=
                    self.grad[static_cast<std::size_t>(o * sp.inner + i)];
            }
    });
}

Tensor sum_all(const Tensor& x) {
    double s = kernels().sum(x.value().data(), x.value().size());
    auto xn = x.node;
    return make_op_node(Shape{1}, {s}, {xn}, [xn](Node& self) {
        xn->ensure_grad();
        double g = self.grad[0];
        for (auto& v : xn->grad) v += g;
    });
}

Tensor mean_all(const Tensor& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor softmax(const Tensor& x, int axis) {
    int ax = norm_axis(axis, x.rank(), x.shape());
    auto sp = split_axis(x.shape(), ax);
    const double* xv = x.value().data();
    std::vector<double> out(x.value().size());
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::int64_t j = 0; j < sp.d; ++j) {
                double v = xv[(o * sp.d + j) * sp.inner + i];
                if (!std::isfinite(v))
                    throw numeric_error("softmax input contains a non-finite value");
                m = std::max(m, v);
            }
            double z = 0.0;
            for (std::int64_t j = 0; j < sp.d; ++j) {
                double e = std::exp(xv[(o * sp.d + j) * sp.inner + i] - m);
                out[static_cast<std::size_t>((o * sp.d + j) * sp.inner + i)] = e;
                z += e;
            }
            double invz = 1.0 / z;
            for (std::int64_t j = 0; j < sp.d; ++j)
                out[static_cast<std::size_t>((o * sp.d + j) * sp.inner + i)] *= invz;
        }
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn, sp](Node& self) {
        xn->ensure_grad();
        const double* y = self.value.data();
        const double* g = self.grad.data();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                double dot = 0.0;
                for (std::int64_t j = 0; j < sp.d; ++j) {
                    std::size_t u = static_cast<std::size_t>((o * sp.d + j) * sp.inner + i);
                    dot += g[u] * y[u];
                }
                for (std::int64_t j = 0; j < sp.d; ++j) {
                    std::size_t u = static_cast<std::size_t>((o * sp.d + j) * sp.inner + i);
                    xn->grad[u] += y[u] * (g[u] - dot);
                }
            }
    });
}

Tensor logsumexp(const Tensor& x, int axis, bool keepdim) {
    int ax = norm_axis(axis, x.rank(), x.shape());
    auto sp = split_axis(x.shape(), ax);
    Shape out_shape = reduced_shape(x.shape(), ax, keepdim);
    const double* xv = x.value().data();
    std::vector<double> out(static_cast<std::size_t>(sp.outer * sp.inner));
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (std::int64_t j = 0; j < sp.d; ++j) {
                double v = xv[(o * sp.d + j) * sp.inner + i];
                if (!std::isfinite(v))
                    throw numeric_error("logsumexp input contains a non-finite value");
                m = std::max(m, v);
            }
            double z = 0.0;
            for (std::int64_t j = 0; j < sp.d; ++j)
                z += std::exp(xv[(o * sp.d + j) * sp.inner + i] - m);
            out[static_cast<std::size_t>(o * sp.inner + i)] = m + std::log(z);
        }
    auto xn = x.node;
    return make_op_node(std::move(out_shape), std::move(out), {xn}, [xn, sp](Node& self) {
        xn->ensure_grad();
        const double* lse = self.value.data();
        const double* g = self.grad.data();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                double l = lse[o * sp.inner + i];
                double go = g[o * sp.inner + i];
                for (std::int64_t j = 0; j < sp.d; ++j) {
                    std::size_t u = static_cast<std::size_t>((o * sp.d + j) * sp.inner + i);
                    xn->grad[u] += go * std::exp(xn->value[u] - l);
                }
            }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    std::int64_t n = x.dim(-1);
    if (gain.rank() != 1 || gain.dim(0) != n || bias.rank() != 1 || bias.dim(0) != n)
        throw dim_error("layer_norm: affine shapes " + shape_str(gain.shape()) + ", " +
                        shape_str(bias.shape()) + " do not match last dim of " +
                        shape_str(x.shape()));
    std::int64_t rows = x.numel() / n;
    const double* xv = x.value().data();
    const double* gv = gain.value().data();
    const double* bv = bias.value().data();
    std::vector<double> out(x.value().size());
    auto mu = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    auto inv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = xv + r * n;
        double m = 0.0;
        for (std::int64_t j = 0; j < n; ++j) m += row[j];
        m /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            double d = row[j] - m;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double iv = 1.0 / std::sqrt(var + eps);
        (*mu)[static_cast<std::size_t>(r)] = m;
        (*inv)[static_cast<std::size_t>(r)] = iv;
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(r * n + j)] = gv[j] * ((row[j] - m) * iv) + bv[j];
    }
    auto xn = x.node;
    auto gn = gain.node;
    auto bn2 = bias.node;
    return make_op_node(
        x.shape(), std::move(out), {xn, gn, bn2}, [xn, gn, bn2, mu, inv, n, rows](Node& self) {
            if (xn->requires_grad) xn->ensure_grad();
            if (gn->requires_grad) gn->ensure_grad();
            if (bn2->requires_grad) bn2->ensure_grad();
            const double* g = self.grad.data();
            const double* gv = gn->value.data();
            for (std::int64_t r = 0; r < rows; ++r) {
                double m = (*mu)[static_cast<std::size_t>(r)];
                double iv = (*inv)[static_cast<std::size_t>(r)];
                const double* row = xn->value.data() + r * n;
                const double* grow = g + r * n;
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    double xh = (row[j] - m) * iv;
                    double dxh = grow[j] * gv[j];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * xh;
                    if (gn->requires_grad) gn->grad[static_cast<std::size_t>(j)] += grow[j] * xh;
                    if (bn2->requires_grad) bn2->grad[static_cast<std::size_t>(j)] += grow[j];
                }
                mean_dxh /= static_cast<double>(n);
                mean_dxh_xh /= static_cast<double>(n);
                if (xn->requires_grad) {
                    for (std::int64_t j = 0; j < n; ++j) {
                        double xh = (row[j] - m) * iv;
                        double dxh = grow[j] * gv[j];
                        xn->grad[static_cast<std::size_t>(r * n + j)] +=
                            iv * (dxh - mean_dxh - xh * mean_dxh_xh);
                    }
                }
            }
        });
}

Tensor l2_normalize(const Tensor& x, double eps) {
    std::int64_t n = x.dim(-1);
    std::int64_t rows = x.numel() / n;
    const double* xv = x.value().data();
    std::vector<double> out(x.value().size());
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        double s = kernels().dot(xv + r * n, xv + r * n, static_cast<std::size_t>(n));
        double nr = std::sqrt(s);
        (*norms)[static_cast<std::size_t>(r)] = nr;
        double inv = 1.0 / (nr > eps ? nr : eps);
        for (std::int64_t j = 0; j < n; ++j)
            out[static_cast<std::size_t>(r * n + j)] = xv[r * n + j] * inv;
    }
    auto xn = x.node;
    return make_op_node(x.shape(), std::move(out), {xn}, [xn, norms, n, rows, eps](Node& self) {
        xn->ensure_grad();
        const double* g = self.grad.data();
        const double* y = self.value.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            double nr = (*norms)[static_cast<std::size_t>(r)];
            if (nr > eps) {
                double dot = kernels().dot(g + r * n, y + r * n, static_cast<std::size_t>(n));
                double inv = 1.0 / nr;
                for (std::int64_t j = 0; j < n; ++j)
                    xn->grad[static_cast<std::size_t>(r * n + j)] +=
                        (g[r * n + j] - y[r * n + j] * dot) * inv;
            } else {
                double inv = 1.0 / eps;
                for (std::int64_t j = 0; j < n; ++j)
                    xn->grad[static_cast<std::size_t>(r * n + j)] += g[r * n + j] * inv;
            }
        }
    });
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::int64_t>& ids) {
    if (table.rank() != 2)
        throw dim_error("embedding_lookup expects a rank-2 table, got " +
                        shape_str(table.shape()));
    std::int64_t v = table.dim(0), d = table.dim(1);
    for (std::int64_t id : ids)
        if (id < 0 || id >= v)
            throw dim_error("embedding id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(v) + ")");
    std::int64_t t = static_cast<std::int64_t>(ids.size());
    std::vector<double> out(static_cast<std::size_t>(t * d));
    for (std::int64_t r = 0; r < t; ++r)
        std::memcpy(out.data() + r * d, table.value().data() + ids[static_cast<std::size_t>(r)] * d,
                    static_cast<std::size_t>(d) * sizeof(double));
    auto tn = table.node;
    auto ids_copy = std::make_shared<std::vector<std::int64_t>>(ids);
    return make_op_node(Shape{t, d}, std::move(out), {tn}, [tn, ids_copy, d](Node& self) {
        tn->ensure_grad();
        for (std::size_t r = 0; r < ids_copy->size(); ++r) {
            double* dst = tn->grad.data() + (*ids_copy)[r] * d;
            const double* src = self.grad.data() + static_cast<std::int64_t>(r) * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    });
}

Tensor scatter_rows(const Tensor& src, const std::vector<std::int64_t>& ids,
                    std::int64_t num_rows) {
    if (src.rank() != 2)
        throw dim_error("scatter_rows expects rank-2 input, got " + shape_str(src.shape()));
    std::int64_t t = src.dim(0), d = src.dim(1);
    if (static_cast<std::int64_t>(ids.size()) != t)
        throw dim_error("scatter_rows: " + std::to_string(ids.size()) + " ids for " +
                        std::to_string(t) + " rows");
    for (std::int64_t id : ids)
        if (id < 0 || id >= num_rows)
            throw dim_error("scatter id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(num_rows) + ")");
    std::vector<double> out(static_cast<std::size_t>(num_rows * d), 0.0);
    for (std::int64_t r = 0; r < t; ++r) {
        double* dst = out.data() + ids[static_cast<std::size_t>(r)] * d;
        const double* sp = src.value().data() + r * d;
        for (std::int64_t j = 0; j < d; ++j) dst[j] += sp[j];
    }
    auto sn = src.node;
    auto ids_copy = std::make_shared<std::vector<std::int64_t>>(ids);
    return make_op_node(Shape{num_rows, d}, std::move(out), {sn}, [sn, ids_copy, d](Node& self) {
        sn->ensure_grad();
        for (std::size_t r = 0; r < ids_copy->size(); ++r) {
            const double* gs = self.grad.data() + (*ids_copy)[r] * d;
            double* gd = sn->grad.data() + static_cast<std::int64_t>(r) * d;
            for (std::int64_t j = 0; j < d; ++j) gd[j] += gs[j];
        }
    });
}

}  // namespace groupseg
