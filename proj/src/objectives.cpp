#include "groupseg/objectives.hpp"

#include <algorithm>
#include <fstream>

#include "groupseg/errors.hpp"
#include "groupseg/ops.hpp"
#include "groupseg/tokenizer.hpp"

namespace groupseg {

namespace {

constexpr double kMaskOff = -1e9;

void check_temperature(const Tensor& temperature) {
    if (temperature.numel() != 1)
        throw dim_error("temperature must be a single value, got " +
                        shape_str(temperature.shape()));
    if (!(temperature.item() > 0.0))
        throw numeric_error("temperature must be positive, got " +
                            std::to_string(temperature.item()));
}

// Row-wise positive logit selected by a constant one-hot mask.
Tensor pick_positives(const Tensor& logits, std::vector<double> onehot) {
    Tensor mask = Tensor::from_data(logits.shape(), std::move(onehot));
    return sum(mul(logits, mask), -1);
}

}  // namespace

ContrastiveParts contrastive_loss_parts(const Tensor& z_images, const Tensor& z_texts,
                                        const Tensor& temperature) {
    if (z_images.rank() != 2 || z_texts.rank() != 2 ||
        z_images.dim(0) != z_texts.dim(0) || z_images.dim(1) != z_texts.dim(1))
        throw dim_error("contrastive loss needs matching [batch, proj] embeddings, got " +
                        shape_str(z_images.shape()) + " and " + shape_str(z_texts.shape()));
    check_temperature(temperature);
    std::int64_t b = z_images.dim(0);

    Tensor logits = div(matmul(z_images, transpose(z_texts, 0, 1)), temperature);  // [B, B]
    std::vector<double> eye(static_cast<std::size_t>(b * b), 0.0);
    for (std::int64_t i = 0; i < b; ++i) eye[static_cast<std::size_t>(i * b + i)] = 1.0;

    Tensor pos = pick_positives(logits, eye);  // [B], same diagonal both ways
    Tensor l_it = mean_all(sub(logsumexp(logits, -1), pos));
    Tensor l_ti = mean_all(sub(logsumexp(transpose(logits, 0, 1), -1), pos));
    return ContrastiveParts{l_it, l_ti, add(l_it, l_ti)};
}

Tensor contrastive_loss(const Tensor& z_images, const Tensor& z_texts,
                        const Tensor& temperature) {
    return contrastive_loss_parts(z_images, z_texts, temperature).total;
}

ContrastiveParts multilabel_contrastive_loss_parts(const Tensor& z_images,
                                                   const Tensor& z_prompted,
                                                   const Tensor& temperature) {
    if (z_images.rank() != 2 || z_prompted.rank() != 3 ||
        z_prompted.dim(1) != z_images.dim(0) || z_prompted.dim(2) != z_images.dim(1))
        throw dim_error("multilabel loss needs [B, P] images and [K, B, P] prompts, got " +
                        shape_str(z_images.shape()) + " and " + shape_str(z_prompted.shape()));
    check_temperature(temperature);
    std::int64_t k = z_prompted.dim(0);
    std::int64_t b = z_images.dim(0);

    Tensor flat = reshape(z_prompted, {k * b, z_prompted.dim(2)});  // row r = k*B + i

    // Image i against all K*B prompts; its K positives share one softmax.
    Tensor fwd = div(matmul(z_images, transpose(flat, 0, 1)), temperature);  // [B, K*B]
    std::vector<double> off(static_cast<std::size_t>(b * k * b), kMaskOff);
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t kk = 0; kk < k; ++kk)
            off[static_cast<std::size_t>(i * k * b + kk * b + i)] = 0.0;
    Tensor pos_lse = logsumexp(add(fwd, Tensor::from_data({b, k * b}, std::move(off))), -1);
    Tensor l_fwd = mean_all(sub(logsumexp(fwd, -1), pos_lse));

    // Each prompt against all B images, standard one-positive terms.
    Tensor bwd = div(matmul(flat, transpose(z_images, 0, 1)), temperature);  // [K*B, B]
    std::vector<double> eye(static_cast<std::size_t>(k * b * b), 0.0);
    for (std::int64_t r = 0; r < k * b; ++r)
        eye[static_cast<std::size_t>(r * b + r % b)] = 1.0;
    Tensor l_bwd = mean_all(sub(logsumexp(bwd, -1), pick_positives(bwd, std::move(eye))));

    return ContrastiveParts{l_fwd, l_bwd, add(l_fwd, l_bwd)};
}

Tensor multilabel_contrastive_loss(const Tensor& z_images, const Tensor& z_prompted,
                                   const Tensor& temperature) {
    return multilabel_contrastive_loss_parts(z_images, z_prompted, temperature).total;
}

Tensor total_loss(const ContrastiveBatch& batch) {
    Tensor standard = contrastive_loss(batch.z_images, batch.z_texts, batch.temperature);
    Tensor multi =
        multilabel_contrastive_loss(batch.z_images, batch.z_prompted, batch.temperature);
    return add(standard, multi);
}

std::vector<std::string> load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open template file " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.find("{noun}") == std::string::npos)
            throw config_error("template '" + line + "' lacks the {noun} placeholder");
        out.push_back(line);
    }
    if (out.empty()) throw config_error("template file " + path + " is empty");
    return out;
}

std::set<std::string> load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open lexicon file " + path);
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.insert(line);
    }
    return out;
}

std::vector<std::string> generate_prompts(const std::string& caption, const PromptSet& prompts,
                                          Rng& rng) {
    if (prompts.k < 1) throw config_error("prompt count must be at least 1");
    if (prompts.templates.empty()) throw config_error("prompt templates are empty");

    std::vector<std::string> nouns;
    for (const auto& w : split_words(caption))
        if (prompts.noun_lexicon.count(w) &&
            std::find(nouns.begin(), nouns.end(), w) == nouns.end())
            nouns.push_back(w);

    std::vector<std::string> out;
    if (nouns.empty()) {
        out.assign(static_cast<std::size_t>(prompts.k), caption);
        return out;
    }

    std::vector<std::string> picked;
    std::int64_t n = static_cast<std::int64_t>(nouns.size());
    if (n >= prompts.k) {
        for (std::int64_t i = 0; i < prompts.k; ++i) {
            std::int64_t j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
            std::swap(nouns[static_cast<std::size_t>(i)], nouns[static_cast<std::size_t>(j)]);
            picked.push_back(nouns[static_cast<std::size_t>(i)]);
        }
    } else {
        for (std::int64_t i = 0; i < prompts.k; ++i)
            picked.push_back(nouns[rng.below(static_cast<std::uint64_t>(n))]);
    }

    for (const auto& noun : picked) {
        std::string t = prompts.templates[rng.below(prompts.templates.size())];
        std::size_t at = t.find("{noun}");
        t.replace(at, 6, noun);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace groupseg
