#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groupseg/grouping.hpp"
#include "groupseg/image_io.hpp"

namespace groupseg {

// Product of all stage assignments: final group of every patch. Columns of
// values are exactly one-hot.
struct ComposedAssignment {
    std::int64_t m = 0;  // final groups
    std::int64_t n = 0;  // patches
    std::vector<double> values;  // [m, n]
    std::int64_t grid_rows = 0, grid_cols = 0;
    std::vector<std::int64_t> group_of_patch;  // [n]
};

// Multiplies hard stage assignments last-to-first. Accepts [M, S] matrices
// or single-image [1, M, S] batches. grid_rows/cols of 0 infer a square
// patch grid.
ComposedAssignment compose_assignments(const std::vector<AssignmentMatrix>& assignments,
                                       std::int64_t grid_rows = 0, std::int64_t grid_cols = 0);

// Foreground class names with averaged, renormalized prompt embeddings.
// Index i here is full-label i+1; label 0 is the background.
struct ClassEmbeddingTable {
    std::vector<std::string> class_names;
    std::vector<double> embeddings;  // [C, P] unit rows
    std::int64_t c = 0, p = 0;
};

struct GroupLabels {
    std::vector<std::int64_t> labels;  // 0 = background, else 1-based class
    std::vector<double> confidences;   // max class probability per group
};

// Scores each group embedding against every class, softmaxes the
// similarities at temperature tau, and keeps the best class when its
// probability reaches the threshold (background otherwise).
GroupLabels label_segments(const Tensor& segment_embeddings, const ClassEmbeddingTable& classes,
                           double tau, double threshold);

struct SegmentationResult {
    std::int64_t height = 0, width = 0;
    std::vector<std::uint8_t> labels;        // class per pixel, 0 = background
    std::vector<std::int64_t> group_map;     // final group per pixel
    std::vector<double> confidences;         // per group
};

// Nearest-neighbor upsampling from the patch grid to pixels; every pixel of
// a patch takes the patch's group and that group's label.
SegmentationResult rasterize(const ComposedAssignment& composed, const GroupLabels& labels,
                             std::int64_t height, std::int64_t width);

// Pixel 255 in the truth mask is ignored everywhere below.
struct IoUAccumulator {
    explicit IoUAccumulator(std::int64_t num_classes);
    void add(const std::uint8_t* pred, const GrayImage& truth);
    // -1 marks a class absent from both prediction and truth.
    std::vector<double> per_class() const;
    double mean() const;

    std::int64_t num_classes = 0;  // includes background as class 0
    std::vector<std::int64_t> intersection, pred_count, truth_count;
};

double mean_iou(const SegmentationResult& pred, const GrayImage& truth,
                std::int64_t num_classes);

// Best Jaccard index between any final group's mask and a binary truth mask
// (nonzero = foreground, 255 = ignore).
double mask_probe(const ComposedAssignment& composed, const GrayImage& truth);

// Labels each group with the class (background included) whose truth mask
// it overlaps best, the upper bound for any text labeling of these groups.
std::vector<std::int64_t> oracle_assign(const ComposedAssignment& composed,
                                        const GrayImage& truth, std::int64_t num_classes);

}  // namespace groupseg
