#include "groupseg/trainer.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "groupseg/errors.hpp"
#include "groupseg/objectives.hpp"
#include "groupseg/ops.hpp"

namespace groupseg {

namespace {

const double kTempBound = std::log(100.0);  // tau stays in [0.01, 100]

// Shortest round-trip decimal form, so logs are bit-reproducible.
std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::int64_t> epoch_permutation(std::int64_t n, std::uint64_t seed,
                                            std::int64_t epoch) {
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (std::int64_t i = n - 1; i > 0; --i) {
        std::int64_t j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

}  // namespace

AdamW::AdamW(ParamStore& params, double beta1, double beta2, double eps)
    : params_(&params), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, p] : params) {
        m_[name].assign(p.value().size(), 0.0);
        v_[name].assign(p.value().size(), 0.0);
    }
}

void AdamW::step(double lr, double weight_decay) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& [name, p] : *params_) {
        std::vector<double>& value = const_cast<Tensor&>(p).mutable_value();
        std::vector<double>& m = m_[name];
        std::vector<double>& v = v_[name];
        const std::vector<double>& grad = p.node->grad;
        bool decay = weight_decay > 0.0 && p.rank() >= 2;
        for (std::size_t i = 0; i < value.size(); ++i) {
            double g = i < grad.size() ? grad[i] : 0.0;
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
            if (decay) update += weight_decay * value[i];
            value[i] -= lr * update;
        }
    }
}

void AdamW::fill_checkpoint(Checkpoint& ckpt) const {
    for (const auto& [name, p] : *params_) {
        ckpt.put("opt.m:" + name, p.shape(), m_.at(name));
        ckpt.put("opt.v:" + name, p.shape(), v_.at(name));
    }
}

void AdamW::load_from_checkpoint(const Checkpoint& ckpt, std::uint64_t step) {
    t_ = step;
    for (const auto& [name, p] : *params_) {
        std::vector<double>& m = m_.at(name);
        std::vector<double>& v = v_.at(name);
        if (ckpt.has("opt.m:" + name)) {
            const auto& rec = ckpt.get("opt.m:" + name);
            if (rec.data.size() != m.size())
                throw data_error("optimizer moment size mismatch for " + name);
            m = rec.data;
        } else {
            std::fill(m.begin(), m.end(), 0.0);
        }
        if (ckpt.has("opt.v:" + name)) {
            const auto& rec = ckpt.get("opt.v:" + name);
            if (rec.data.size() != v.size())
                throw data_error("optimizer moment size mismatch for " + name);
            v = rec.data;
        } else {
            std::fill(v.begin(), v.end(), 0.0);
        }
    }
}

double clip_gradients(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, p] : params)
        for (double g : p.node->grad) sq += g * g;
    double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        double s = max_norm / norm;
        for (const auto& [name, p] : params)
            for (double& g : const_cast<Tensor&>(p).node->grad) g *= s;
    }
    return norm;
}

double lr_at(const OptimizerConfig& opt, std::int64_t step, std::int64_t steps_per_epoch) {
    std::int64_t warmup = opt.warmup_epochs * steps_per_epoch;
    std::int64_t total = opt.epochs * steps_per_epoch;
    if (step < warmup)
        return opt.learning_rate * static_cast<double>(step + 1) /
               static_cast<double>(warmup);
    std::int64_t span = std::max<std::int64_t>(1, total - warmup);
    double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
    return opt.learning_rate * 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
}

TrainResult train_model(const RunConfig& cfg, const Dataset& data, const std::string& out_dir,
                        const std::string& resume_path) {
    validate_run_config(cfg);
    std::int64_t b = cfg.optimizer.batch_size;
    std::int64_t steps_per_epoch = data.size() / b;
    if (steps_per_epoch < 1)
        throw data_error("batch size " + std::to_string(b) + " exceeds dataset size " +
                         std::to_string(data.size()));
    std::uint64_t total_steps =
        static_cast<std::uint64_t>(cfg.optimizer.epochs * steps_per_epoch);

    Vocabulary vocab = Vocabulary::load(data.vocab_path());
    if (vocab.size() > cfg.model.vocab_size)
        throw config_error("vocabulary has " + std::to_string(vocab.size()) +
                           " tokens, model embeds only " +
                           std::to_string(cfg.model.vocab_size));
    PromptSet prompts;
    prompts.templates = load_templates(cfg.loss.templates_path);
    prompts.noun_lexicon = load_lexicon(
        cfg.loss.lexicon_path.empty() ? data.nouns_path() : cfg.loss.lexicon_path);
    prompts.k = cfg.loss.k;

    AssignMode mode =
        cfg.model.assignment_mode == "hard" ? AssignMode::Hard : AssignMode::Soft;

    Rng init_rng(mix_seed(cfg.optimizer.seed, 1));
    DualEncoder encoder(cfg.model, init_rng);
    AdamW opt(encoder.params());
    Rng step_rng(mix_seed(cfg.optimizer.seed, 2));

    std::uint64_t start_step = 0;
    if (!resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_path);
        encoder.params().load_from_checkpoint(ckpt);
        opt.load_from_checkpoint(ckpt, ckpt.step);
        step_rng.set_state(ckpt.rng_state);
        start_step = ckpt.step;
        if (start_step > total_steps)
            throw config_error("checkpoint step " + std::to_string(start_step) +
                               " is past the configured " + std::to_string(total_steps) +
                               " steps");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create output directory " + out_dir);
    std::string metrics_path = out_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path,
                          resume_path.empty() ? std::ios::binary
                                              : std::ios::binary | std::ios::app);
    if (!metrics) throw data_error("cannot write " + metrics_path);

    // Patch rows and token ids never change; prepare them once.
    std::int64_t ppc = cfg.model.patch_size * cfg.model.patch_size * 3;
    std::int64_t n_patches = cfg.model.num_patches();
    std::vector<std::vector<double>> patch_cache;
    std::vector<TokenizedText> caption_cache;
    for (std::int64_t i = 0; i < data.size(); ++i) {
        RgbImage img = data.image(i);
        if (img.width != cfg.model.image_size || img.height != cfg.model.image_size)
            throw data_error("image " + data.entries[static_cast<std::size_t>(i)].image_file +
                             " is " + std::to_string(img.width) + "x" +
                             std::to_string(img.height) + ", config expects " +
                             std::to_string(cfg.model.image_size));
        patch_cache.push_back(patchify(img, cfg.model.patch_size));
        caption_cache.push_back(tokenize(data.entries[static_cast<std::size_t>(i)].caption,
                                         vocab, cfg.model.max_text_length));
    }

    std::vector<std::int64_t> perm;
    std::int64_t perm_epoch = -1;
    TrainResult result;
    result.metrics_path = metrics_path;

    for (std::uint64_t step = start_step; step < total_steps; ++step) {
        std::int64_t epoch = static_cast<std::int64_t>(step) / steps_per_epoch;
        std::int64_t bi = static_cast<std::int64_t>(step) % steps_per_epoch;
        if (epoch != perm_epoch) {
            perm = epoch_permutation(data.size(), cfg.optimizer.seed, epoch);
            perm_epoch = epoch;
        }

        std::vector<double> patch_data(static_cast<std::size_t>(b * n_patches * ppc));
        std::vector<TokenizedText> captions;
        std::vector<std::vector<std::string>> batch_prompts;
        for (std::int64_t i = 0; i < b; ++i) {
            std::int64_t id = perm[static_cast<std::size_t>(bi * b + i)];
            const auto& rows = patch_cache[static_cast<std::size_t>(id)];
            std::copy(rows.begin(), rows.end(),
                      patch_data.begin() + i * n_patches * ppc);
            captions.push_back(caption_cache[static_cast<std::size_t>(id)]);
            if (cfg.loss.multilabel)
                batch_prompts.push_back(generate_prompts(
                    data.entries[static_cast<std::size_t>(id)].caption, prompts, step_rng));
        }
        std::vector<GumbelNoise> noise = encoder.draw_noise(step_rng, b);

        Tensor patches = Tensor::from_data({b, n_patches, ppc}, std::move(patch_data));
        ImageEncodeResult img = encoder.encode_images(patches, mode, noise, true, false);
        Tensor z_txt = encoder.encode_texts(captions);
        Tensor tau = encoder.temperature();

        ContrastiveParts std_parts = contrastive_loss_parts(img.z, z_txt, tau);
        Tensor loss = std_parts.total;
        ContrastiveParts ml_parts;
        if (cfg.loss.multilabel) {
            std::vector<TokenizedText> prompt_texts;  // k-major: prompt k of image i
            for (std::int64_t kk = 0; kk < cfg.loss.k; ++kk)
                for (std::int64_t i = 0; i < b; ++i)
                    prompt_texts.push_back(
                        tokenize(batch_prompts[static_cast<std::size_t>(i)]
                                              [static_cast<std::size_t>(kk)],
                                 vocab, cfg.model.max_text_length));
            Tensor z_prompted = reshape(encoder.encode_texts(prompt_texts),
                                        {cfg.loss.k, b, cfg.model.projection_width});
            ml_parts = multilabel_contrastive_loss_parts(img.z, z_prompted, tau);
            loss = add(loss, ml_parts.total);
        }

        for (const auto& [name, p] : encoder.params()) const_cast<Tensor&>(p).zero_grad();
        loss.backward();
        double grad_norm = clip_gradients(encoder.params(), cfg.optimizer.grad_clip);
        double lr = lr_at(cfg.optimizer, static_cast<std::int64_t>(step), steps_per_epoch);
        opt.step(lr, cfg.optimizer.weight_decay);

        {
            double& s = const_cast<Tensor&>(encoder.temperature_param()).mutable_value()[0];
            s = std::min(kTempBound, std::max(-kTempBound, s));
        }

        result.final_loss = loss.item();
        result.steps = step + 1;
        metrics << "{\"step\":" << (step + 1) << ",\"epoch\":" << epoch
                << ",\"lr\":" << fmt_double(lr) << ",\"loss\":" << fmt_double(loss.item())
                << ",\"l_it\":" << fmt_double(std_parts.forward.item())
                << ",\"l_ti\":" << fmt_double(std_parts.backward.item())
                << ",\"l_ip\":"
                << fmt_double(cfg.loss.multilabel ? ml_parts.forward.item() : 0.0)
                << ",\"l_pi\":"
                << fmt_double(cfg.loss.multilabel ? ml_parts.backward.item() : 0.0)
                << ",\"tau\":"
                << fmt_double(std::exp(-encoder.temperature_param().item()))
                << ",\"grad_norm\":" << fmt_double(grad_norm) << "}\n";
        metrics.flush();

        bool epoch_end = bi == steps_per_epoch - 1;
        if (epoch_end && cfg.optimizer.checkpoint_every > 0 &&
            (epoch + 1) % cfg.optimizer.checkpoint_every == 0 &&
            step + 1 < total_steps) {
            Checkpoint ckpt;
            ckpt.step = step + 1;
            ckpt.rng_state = step_rng.state();
            encoder.params().fill_checkpoint(ckpt);
            opt.fill_checkpoint(ckpt);
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%04lld.ckpt",
                          static_cast<long long>(epoch + 1));
            save_checkpoint(out_dir + "/" + name, ckpt);
        }
    }

    Checkpoint final;
    final.step = total_steps;
    final.rng_state = step_rng.state();
    encoder.params().fill_checkpoint(final);
    opt.fill_checkpoint(final);
    result.final_checkpoint = out_dir + "/final.ckpt";
    save_checkpoint(result.final_checkpoint, final);
    return result;
}

}  // namespace groupseg
