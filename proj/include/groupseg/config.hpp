#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace groupseg {

// One grouping stage: a run of transformer layers ending in a grouping block.
// num_input_group_tokens covers the variant where more tokens attend than
// groups remain (e.g. 64 learned tokens mixed down to 8 just before the
// block); it must equal num_group_tokens everywhere else.
struct GroupingStageConfig {
    std::int64_t num_group_tokens = 0;
    std::int64_t num_input_group_tokens = 0;  // 0 = same as num_group_tokens
    std::int64_t insert_after_layer = 0;      // layers completed before the block
    bool mixer_connector = false;
};

struct ModelConfig {
    std::int64_t image_size = 224;
    std::int64_t patch_size = 16;
    std::int64_t hidden_width = 384;
    std::int64_t num_layers = 12;
    std::int64_t num_heads = 6;
    std::vector<GroupingStageConfig> stages{{64, 64, 6, false}, {8, 8, 9, true}};
    std::int64_t projection_width = 256;
    std::int64_t text_layers = 12;
    std::int64_t text_width = 256;
    std::int64_t text_heads = 4;
    std::int64_t vocab_size = 49152;
    std::int64_t max_text_length = 77;
    std::string assignment_mode = "hard";  // "hard" | "soft"
    double gumbel_temperature = 1.0;

    std::int64_t patches_per_side() const { return image_size / patch_size; }
    std::int64_t num_patches() const { return patches_per_side() * patches_per_side(); }
    std::int64_t final_groups() const { return stages.back().num_group_tokens; }
};

struct OptimizerConfig {
    double learning_rate = 0.0016;
    double weight_decay = 0.05;
    std::int64_t warmup_epochs = 5;
    std::int64_t epochs = 30;
    std::int64_t batch_size = 4096;
    std::uint64_t seed = 0;
    double grad_clip = 1.0;
    std::int64_t checkpoint_every = 5;  // epochs between checkpoints
};

struct LossConfig {
    std::int64_t k = 3;  // prompted texts per image
    bool multilabel = true;
    std::string templates_path = "configs/templates.txt";
    std::string lexicon_path;  // empty = nouns.txt inside the dataset dir
};

struct EvalConfig {
    double threshold = 0.9;
    double threshold_alt = 0.5;
    std::string class_list;         // empty = classes.txt inside the dataset dir
    double label_temperature = 0.0;  // <= 0 = reuse the trained temperature
};

struct RunConfig {
    ModelConfig model;
    OptimizerConfig optimizer;
    LossConfig loss;
    EvalConfig eval;
};

// Flat "key = value" text, '#' comments, unknown keys rejected. Grouping
// stages use indexed keys (model.stage.<i>.<field>) with model.num_stages
// giving the count; specifying any stage key requires the full set.
RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);
void validate_run_config(const RunConfig& cfg);

}  // namespace groupseg
