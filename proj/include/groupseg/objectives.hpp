#pragma once

#include <set>
#include <string>
#include <vector>

#include "groupseg/rng.hpp"
#include "groupseg/tensor.hpp"

namespace groupseg {

// One training batch after encoding. z_images/z_texts are [B, P] with unit
// rows; z_prompted is [K, B, P] (K prompted texts per image); temperature is
// the in-graph [1] tensor tau.
struct ContrastiveBatch {
    Tensor z_images;
    Tensor z_texts;
    Tensor z_prompted;
    Tensor temperature;
};

struct ContrastiveParts {
    Tensor forward;   // image-to-text (or image-to-prompts) direction
    Tensor backward;  // text-to-image direction
    Tensor total;
};

// Two-way InfoNCE with diagonal positives and logits z_i . z_j / tau.
// Each direction is the batch mean of -log softmax at the matched pair.
ContrastiveParts contrastive_loss_parts(const Tensor& z_images, const Tensor& z_texts,
                                        const Tensor& temperature);
Tensor contrastive_loss(const Tensor& z_images, const Tensor& z_texts,
                        const Tensor& temperature);

// Multi-label variant over K prompted texts per image. The image-to-prompts
// direction pools the K positives inside one softmax over all K*B
// candidates; the prompts-to-image direction averages K*B standard terms.
ContrastiveParts multilabel_contrastive_loss_parts(const Tensor& z_images,
                                                   const Tensor& z_prompted,
                                                   const Tensor& temperature);
Tensor multilabel_contrastive_loss(const Tensor& z_images, const Tensor& z_prompted,
                                   const Tensor& temperature);

// Sum of the standard and multi-label losses over one batch.
Tensor total_loss(const ContrastiveBatch& batch);

struct PromptSet {
    std::vector<std::string> templates;  // each contains the {noun} placeholder
    std::set<std::string> noun_lexicon;
    std::int64_t k = 3;
};

// One line per template; every line must contain "{noun}".
std::vector<std::string> load_templates(const std::string& path);
// One noun per line.
std::set<std::string> load_lexicon(const std::string& path);

// Samples K nouns from the caption's lexicon words (without replacement when
// enough are present) and instantiates each into a random template. A
// caption with no lexicon nouns yields K copies of the caption itself.
std::vector<std::string> generate_prompts(const std::string& caption, const PromptSet& prompts,
                                          Rng& rng);

}  // namespace groupseg
