#pragma once

#include <string>
#include <vector>

#include "groupseg/dataset.hpp"
#include "groupseg/encoder.hpp"
#include "groupseg/zeroshot.hpp"

namespace groupseg {

// Prompts every foreground class name through every template, encodes all
// C*T sentences in one batch, and averages per class into unit rows.
ClassEmbeddingTable build_class_table(const DualEncoder& encoder, const Vocabulary& vocab,
                                      const std::vector<std::string>& foreground_names,
                                      const std::vector<std::string>& templates);

struct EvalOptions {
    double threshold = 0.5;
    double label_temperature = 0.0;  // <= 0 uses the trained tau
    std::string templates_path = "configs/templates.txt";
    std::string class_list;  // empty = classes.txt inside the dataset dir
    std::int64_t baseline_trials = 0;  // 0 skips the random-labeling baseline
    std::uint64_t baseline_seed = 0;
};

struct ImageEval {
    double miou = 0.0;
    double oracle_miou = 0.0;
};

struct EvalReport {
    std::vector<std::string> class_names;  // full list, background first
    std::vector<double> per_class;         // -1 = absent from both
    double miou = 0.0;
    double oracle_miou = 0.0;
    double mask_probe_mean = 0.0;   // mean over (image, present class) pairs
    double random_baseline = -1.0;  // -1 when not requested
    std::vector<ImageEval> per_image;
    std::int64_t images = 0;
};

// Full zero-shot pass over a split: encode, compose, label, rasterize,
// score. Deterministic; images are processed in index order.
EvalReport evaluate_split(const DualEncoder& encoder, const Dataset& dataset,
                          const EvalOptions& options);

// Mean split mIoU over `trials` uniformly random group labelings (background
// included) of fixed composed assignments.
double random_labeling_baseline(const std::vector<ComposedAssignment>& composed,
                                const std::vector<GrayImage>& truths,
                                std::int64_t num_classes, std::int64_t trials, Rng& rng);

}  // namespace groupseg
