#include "groupseg/zeroshot.hpp"

#include <algorithm>
#include <cmath>

#include "groupseg/errors.hpp"
#include "groupseg/kernels.hpp"

namespace groupseg {

namespace {

// Raw [M, S] view of a hard assignment, unwrapping a singleton batch.
struct MatView {
    const double* data;
    std::int64_t m, s;
};

MatView hard_view(const AssignmentMatrix& a, std::size_t index) {
    if (a.mode != AssignMode::Hard)
        throw config_error("assignment composition requires hard assignments (stage " +
                           std::to_string(index) + " is soft)");
    const Tensor& t = a.values;
    std::int64_t m, s;
    const double* base = t.value().data();
    if (t.rank() == 2) {
        m = t.dim(0);
        s = t.dim(1);
    } else if (t.rank() == 3 && t.dim(0) == 1) {
        m = t.dim(1);
        s = t.dim(2);
    } else {
        throw dim_error("assignment composition expects [M, S] matrices, got " +
                        shape_str(t.shape()));
    }
    for (std::int64_t j = 0; j < s; ++j) {
        double col = 0.0;
        for (std::int64_t i = 0; i < m; ++i) col += base[i * s + j];
        if (std::abs(col - 1.0) > 1e-9)
            throw numeric_error("assignment column " + std::to_string(j) +
                                " of stage " + std::to_string(index) + " is not one-hot");
    }
    return MatView{base, m, s};
}

}  // namespace

ComposedAssignment compose_assignments(const std::vector<AssignmentMatrix>& assignments,
                                       std::int64_t grid_rows, std::int64_t grid_cols) {
    if (assignments.empty()) throw dim_error("no assignments to compose");
    std::vector<MatView> views;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        views.push_back(hard_view(assignments[i], i));
    for (std::size_t i = 1; i < views.size(); ++i)
        if (views[i].s != views[i - 1].m)
            throw dim_error("assignment chain break: stage " + std::to_string(i) +
                            " has " + std::to_string(views[i].s) + " columns, stage " +
                            std::to_string(i - 1) + " has " + std::to_string(views[i - 1].m) +
                            " rows");

    ComposedAssignment out;
    out.n = views.front().s;
    const MatView& last = views.back();
    std::vector<double> acc(last.data, last.data + last.m * last.s);
    std::int64_t m = last.m;
    for (std::size_t i = views.size() - 1; i-- > 0;) {
        const MatView& v = views[i];
        std::vector<double> next(static_cast<std::size_t>(m * v.s));
        kernels().matmul_nn(acc.data(), v.data, next.data(), m, v.m, v.s, false);
        acc = std::move(next);
    }
    out.m = m;
    out.values = std::move(acc);

    if (grid_rows == 0 && grid_cols == 0) {
        auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(out.n))));
        if (side * side != out.n)
            throw dim_error("patch count " + std::to_string(out.n) +
                            " is not square; pass the grid explicitly");
        grid_rows = grid_cols = side;
    }
    if (grid_rows * grid_cols != out.n)
        throw dim_error("patch grid " + std::to_string(grid_rows) + "x" +
                        std::to_string(grid_cols) + " does not cover " +
                        std::to_string(out.n) + " patches");
    out.grid_rows = grid_rows;
    out.grid_cols = grid_cols;

    out.group_of_patch.resize(static_cast<std::size_t>(out.n));
    for (std::int64_t j = 0; j < out.n; ++j) {
        std::int64_t hot = -1;
        for (std::int64_t i = 0; i < out.m; ++i) {
            double v = out.values[static_cast<std::size_t>(i * out.n + j)];
            if (std::abs(v - 1.0) <= 1e-9) {
                if (hot >= 0) throw numeric_error("composed column is not one-hot");
                hot = i;
            } else if (std::abs(v) > 1e-9) {
                throw numeric_error("composed column is not one-hot");
            }
        }
        if (hot < 0) throw numeric_error("composed column is not one-hot");
        out.group_of_patch[static_cast<std::size_t>(j)] = hot;
    }
    return out;
}

GroupLabels label_segments(const Tensor& segment_embeddings, const ClassEmbeddingTable& classes,
                           double tau, double threshold) {
    if (classes.c == 0) throw config_error("class embedding table is empty");
    if (!(tau > 0.0)) throw numeric_error("labeling temperature must be positive");
    const Tensor& t = segment_embeddings;
    std::int64_t m, p;
    if (t.rank() == 2) {
        m = t.dim(0);
        p = t.dim(1);
    } else if (t.rank() == 3 && t.dim(0) == 1) {
        m = t.dim(1);
        p = t.dim(2);
    } else {
        throw dim_error("label_segments expects [M, P] embeddings, got " + shape_str(t.shape()));
    }
    if (p != classes.p)
        throw dim_error("embedding width " + std::to_string(p) + " does not match class table " +
                        std::to_string(classes.p));

    GroupLabels out;
    const double* seg = t.value().data();
    std::vector<double> sims(static_cast<std::size_t>(classes.c));
    for (std::int64_t g = 0; g < m; ++g) {
        for (std::int64_t c = 0; c < classes.c; ++c)
            sims[static_cast<std::size_t>(c)] =
                kernels().dot(seg + g * p, classes.embeddings.data() + c * p, p) / tau;
        double mx = *std::max_element(sims.begin(), sims.end());
        double denom = 0.0;
        for (double v : sims) denom += std::exp(v - mx);
        std::int64_t best = 0;
        double best_p = -1.0;
        for (std::int64_t c = 0; c < classes.c; ++c) {
            double pr = std::exp(sims[static_cast<std::size_t>(c)] - mx) / denom;
            if (pr > best_p) {
                best_p = pr;
                best = c;
            }
        }
        out.confidences.push_back(best_p);
        out.labels.push_back(best_p >= threshold ? best + 1 : 0);
    }
    return out;
}

SegmentationResult rasterize(const ComposedAssignment& composed, const GroupLabels& labels,
                             std::int64_t height, std::int64_t width) {
    if (static_cast<std::int64_t>(labels.labels.size()) != composed.m)
        throw dim_error("group label count " + std::to_string(labels.labels.size()) +
                        " does not match " + std::to_string(composed.m) + " groups");
    if (composed.grid_rows <= 0 || composed.grid_cols <= 0 ||
        height % composed.grid_rows != 0 || width % composed.grid_cols != 0)
        throw dim_error("image " + std::to_string(width) + "x" + std::to_string(height) +
                        " does not tile a " + std::to_string(composed.grid_cols) + "x" +
                        std::to_string(composed.grid_rows) + " patch grid");
    for (std::int64_t lbl : labels.labels)
        if (lbl < 0 || lbl > 254)
            throw data_error("group label " + std::to_string(lbl) + " out of mask range");

    std::int64_t ph = height / composed.grid_rows;
    std::int64_t pw = width / composed.grid_cols;
    SegmentationResult out;
    out.height = height;
    out.width = width;
    out.confidences = labels.confidences;
    out.labels.resize(static_cast<std::size_t>(height * width));
    out.group_map.resize(static_cast<std::size_t>(height * width));
    for (std::int64_t y = 0; y < height; ++y) {
        std::int64_t pr = y / ph;
        for (std::int64_t x = 0; x < width; ++x) {
            std::int64_t pc = x / pw;
            std::int64_t g =
                composed.group_of_patch[static_cast<std::size_t>(pr * composed.grid_cols + pc)];
            out.group_map[static_cast<std::size_t>(y * width + x)] = g;
            out.labels[static_cast<std::size_t>(y * width + x)] =
                static_cast<std::uint8_t>(labels.labels[static_cast<std::size_t>(g)]);
        }
    }
    return out;
}

IoUAccumulator::IoUAccumulator(std::int64_t classes) : num_classes(classes) {
    if (classes < 1) throw config_error("IoU needs at least one class");
    intersection.assign(static_cast<std::size_t>(classes), 0);
    pred_count.assign(static_cast<std::size_t>(classes), 0);
    truth_count.assign(static_cast<std::size_t>(classes), 0);
}

void IoUAccumulator::add(const std::uint8_t* pred, const GrayImage& truth) {
    std::int64_t total = truth.width * truth.height;
    for (std::int64_t i = 0; i < total; ++i) {
        std::uint8_t t = truth.pixels[static_cast<std::size_t>(i)];
        if (t == 255) continue;
        std::uint8_t p = pred[i];
        if (t >= num_classes)
            throw data_error("truth mask class " + std::to_string(t) + " out of range");
        if (p >= num_classes)
            throw data_error("predicted class " + std::to_string(p) + " out of range");
        ++pred_count[p];
        ++truth_count[t];
        if (p == t) ++intersection[p];
    }
}

std::vector<double> IoUAccumulator::per_class() const {
    std::vector<double> out(static_cast<std::size_t>(num_classes), -1.0);
    for (std::int64_t c = 0; c < num_classes; ++c) {
        std::int64_t uni = pred_count[static_cast<std::size_t>(c)] +
                           truth_count[static_cast<std::size_t>(c)] -
                           intersection[static_cast<std::size_t>(c)];
        if (uni > 0)
            out[static_cast<std::size_t>(c)] =
                static_cast<double>(intersection[static_cast<std::size_t>(c)]) /
                static_cast<double>(uni);
    }
    return out;
}

double IoUAccumulator::mean() const {
    double sum = 0.0;
    std::int64_t counted = 0;
    for (double v : per_class())
        if (v >= 0.0) {
            sum += v;
            ++counted;
        }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

double mean_iou(const SegmentationResult& pred, const GrayImage& truth,
                std::int64_t num_classes) {
    if (pred.height != truth.height || pred.width != truth.width)
        throw dim_error("prediction " + std::to_string(pred.width) + "x" +
                        std::to_string(pred.height) + " does not match truth " +
                        std::to_string(truth.width) + "x" + std::to_string(truth.height));
    IoUAccumulator acc(num_classes);
    acc.add(pred.labels.data(), truth);
    return acc.mean();
}

double mask_probe(const ComposedAssignment& composed, const GrayImage& truth) {
    if (truth.height % composed.grid_rows != 0 || truth.width % composed.grid_cols != 0)
        throw dim_error("truth mask does not tile the patch grid");
    std::int64_t ph = truth.height / composed.grid_rows;
    std::int64_t pw = truth.width / composed.grid_cols;

    std::vector<std::int64_t> area(static_cast<std::size_t>(composed.m), 0);
    std::vector<std::int64_t> inter(static_cast<std::size_t>(composed.m), 0);
    std::int64_t fg = 0;
    for (std::int64_t y = 0; y < truth.height; ++y)
        for (std::int64_t x = 0; x < truth.width; ++x) {
            std::uint8_t t = truth.pixels[static_cast<std::size_t>(y * truth.width + x)];
            if (t == 255) continue;
            std::int64_t g = composed.group_of_patch[static_cast<std::size_t>(
                (y / ph) * composed.grid_cols + x / pw)];
            ++area[static_cast<std::size_t>(g)];
            if (t != 0) {
                ++fg;
                ++inter[static_cast<std::size_t>(g)];
            }
        }
    if (fg == 0) throw data_error("mask probe needs a non-empty truth mask");

    double best = 0.0;
    for (std::int64_t g = 0; g < composed.m; ++g) {
        std::int64_t uni = area[static_cast<std::size_t>(g)] + fg -
                           inter[static_cast<std::size_t>(g)];
        if (uni > 0)
            best = std::max(best, static_cast<double>(inter[static_cast<std::size_t>(g)]) /
                                      static_cast<double>(uni));
    }
    return best;
}

std::vector<std::int64_t> oracle_assign(const ComposedAssignment& composed,
                                        const GrayImage& truth, std::int64_t num_classes) {
    if (truth.height % composed.grid_rows != 0 || truth.width % composed.grid_cols != 0)
        throw dim_error("truth mask does not tile the patch grid");
    std::int64_t ph = truth.height / composed.grid_rows;
    std::int64_t pw = truth.width / composed.grid_cols;

    // inter[g][c], group areas, class areas, all over non-ignored pixels.
    std::vector<std::int64_t> inter(static_cast<std::size_t>(composed.m * num_classes), 0);
    std::vector<std::int64_t> area(static_cast<std::size_t>(composed.m), 0);
    std::vector<std::int64_t> cls(static_cast<std::size_t>(num_classes), 0);
    for (std::int64_t y = 0; y < truth.height; ++y)
        for (std::int64_t x = 0; x < truth.width; ++x) {
            std::uint8_t t = truth.pixels[static_cast<std::size_t>(y * truth.width + x)];
            if (t == 255) continue;
            if (t >= num_classes)
                throw data_error("truth mask class " + std::to_string(t) + " out of range");
            std::int64_t g = composed.group_of_patch[static_cast<std::size_t>(
                (y / ph) * composed.grid_cols + x / pw)];
            ++inter[static_cast<std::size_t>(g * num_classes + t)];
            ++area[static_cast<std::size_t>(g)];
            ++cls[t];
        }

    std::vector<std::int64_t> labels(static_cast<std::size_t>(composed.m), 0);
    for (std::int64_t g = 0; g < composed.m; ++g) {
        double best_iou = -1.0;
        std::int64_t best = 0;
        for (std::int64_t c = 0; c < num_classes; ++c) {
            std::int64_t i = inter[static_cast<std::size_t>(g * num_classes + c)];
            std::int64_t uni = area[static_cast<std::size_t>(g)] +
                               cls[static_cast<std::size_t>(c)] - i;
            double iou = uni > 0 ? static_cast<double>(i) / static_cast<double>(uni) : 0.0;
            if (iou > best_iou) {
                best_iou = iou;
                best = c;
            }
        }
        labels[static_cast<std::size_t>(g)] = best;
    }
    return labels;
}

}  // namespace groupseg
