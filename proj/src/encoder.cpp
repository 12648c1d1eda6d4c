#include "groupseg/encoder.hpp"

#include <cmath>

#include "groupseg/ops.hpp"

namespace groupseg {

namespace {

constexpr double kMaskOff = -1e9;

std::int64_t isqrt_exact(std::int64_t n, const char* what) {
    std::int64_t r = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (r * r != n)
        throw dim_error(std::string(what) + " count " + std::to_string(n) +
                        " is not a perfect square");
    return r;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
    Tensor h = gelu(add(matmul(x, p.w1), p.b1));
    return add(matmul(h, p.w2), p.b2);
}

Tensor attention(const Tensor& x, const AttentionParams& p, std::int64_t heads,
                 const Tensor* key_mask) {
    std::int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
    std::int64_t dh = d / heads;
    Tensor qkv = add(matmul(x, p.w_qkv), p.b_qkv);  // [B, T, 3D]
    Tensor q = transpose(reshape(slice(qkv, 2, 0, d), {b, t, heads, dh}), 1, 2);
    Tensor k = transpose(reshape(slice(qkv, 2, d, d), {b, t, heads, dh}), 1, 2);
    Tensor v = transpose(reshape(slice(qkv, 2, 2 * d, d), {b, t, heads, dh}), 1, 2);
    Tensor scores = scale(matmul(q, transpose(k, 2, 3)), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (key_mask) scores = add(scores, *key_mask);  // [B, 1, 1, T] broadcast
    Tensor att = softmax(scores, -1);
    Tensor ctx = reshape(transpose(matmul(att, v), 1, 2), {b, t, d});
    return add(matmul(ctx, p.w_out), p.b_out);
}

// Broadcasts a [M, D] parameter block across the batch axis.
Tensor tile_batch(const Tensor& block, std::int64_t b) {
    Tensor lifted = reshape(block, {1, block.dim(0), block.dim(1)});
    return add(lifted, Tensor::zeros({b, 1, 1}));
}

}  // namespace

std::vector<double> patchify(const RgbImage& image, std::int64_t patch_size) {
    if (patch_size <= 0 || image.height % patch_size != 0 || image.width % patch_size != 0)
        throw config_error("image " + std::to_string(image.width) + "x" +
                           std::to_string(image.height) + " is not divisible by patch size " +
                           std::to_string(patch_size));
    std::int64_t rows = image.height / patch_size;
    std::int64_t cols = image.width / patch_size;
    std::int64_t ppc = patch_size * patch_size * 3;
    std::vector<double> out(static_cast<std::size_t>(rows * cols * ppc));
    for (std::int64_t pr = 0; pr < rows; ++pr)
        for (std::int64_t pc = 0; pc < cols; ++pc) {
            double* dst = out.data() + (pr * cols + pc) * ppc;
            for (std::int64_t y = 0; y < patch_size; ++y)
                for (std::int64_t x = 0; x < patch_size; ++x) {
                    std::int64_t py = pr * patch_size + y;
                    std::int64_t px = pc * patch_size + x;
                    const double* src = image.pixels.data() + (py * image.width + px) * 3;
                    double* d = dst + (y * patch_size + x) * 3;
                    d[0] = src[0];
                    d[1] = src[1];
                    d[2] = src[2];
                }
        }
    return out;
}

Tensor transformer_layer(const Tensor& tokens, const LayerParams& params,
                         const Tensor* key_mask) {
    bool flat = tokens.rank() == 2;
    Tensor x = flat ? reshape(tokens, {1, tokens.dim(0), tokens.dim(1)}) : tokens;
    if (x.rank() != 3)
        throw dim_error("transformer_layer expects rank 2 or 3, got " +
                        shape_str(tokens.shape()));
    if (x.dim(2) != params.ln1_gain.dim(0))
        throw dim_error("token width " + shape_str(tokens.shape()) +
                        " does not match layer width " + shape_str(params.ln1_gain.shape()));
    Tensor h = layer_norm(x, params.ln1_gain, params.ln1_bias);
    x = add(x, attention(h, params.attn, params.heads, key_mask));
    Tensor h2 = layer_norm(x, params.ln2_gain, params.ln2_bias);
    x = add(x, mlp_forward(params.mlp, h2));
    return flat ? reshape(x, {x.dim(1), x.dim(2)}) : x;
}

Tensor mixer_connect(const Tensor& tokens, const MixerParams& params) {
    bool flat = tokens.rank() == 2;
    Tensor x = flat ? reshape(tokens, {1, tokens.dim(0), tokens.dim(1)}) : tokens;
    if (x.dim(1) != params.m_in)
        throw dim_error("mixer expects " + std::to_string(params.m_in) + " tokens, got " +
                        shape_str(tokens.shape()));
    Tensor t = layer_norm(x, params.ln_tok_gain, params.ln_tok_bias);
    Tensor h = mlp_forward(params.tok, transpose(t, 1, 2));  // [B, D, M_out]
    Tensor y = transpose(h, 1, 2);                           // [B, M_out, D]
    if (params.m_in == params.m_out) y = add(y, x);
    Tensor u = layer_norm(y, params.ln_ch_gain, params.ln_ch_bias);
    y = add(y, mlp_forward(params.ch, u));
    return flat ? reshape(y, {y.dim(1), y.dim(2)}) : y;
}

Tensor interpolate_pos_grid(const Tensor& pos, std::int64_t old_side, std::int64_t new_side) {
    if (pos.rank() != 2 || pos.dim(0) != old_side * old_side)
        throw dim_error("positional grid " + shape_str(pos.shape()) + " does not match side " +
                        std::to_string(old_side));
    if (new_side == old_side) return pos;
    std::int64_t n_new = new_side * new_side;
    std::int64_t n_old = old_side * old_side;
    std::vector<double> w(static_cast<std::size_t>(n_new * n_old), 0.0);
    auto coord = [&](std::int64_t i) {
        if (new_side == 1) return 0.5 * static_cast<double>(old_side - 1);
        return static_cast<double>(i) * static_cast<double>(old_side - 1) /
               static_cast<double>(new_side - 1);
    };
    for (std::int64_t iy = 0; iy < new_side; ++iy)
        for (std::int64_t ix = 0; ix < new_side; ++ix) {
            double fy = coord(iy), fx = coord(ix);
            std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
            std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
            std::int64_t y1 = std::min(y0 + 1, old_side - 1);
            std::int64_t x1 = std::min(x0 + 1, old_side - 1);
            double wy = fy - static_cast<double>(y0);
            double wx = fx - static_cast<double>(x0);
            double* row = w.data() + (iy * new_side + ix) * n_old;
            row[y0 * old_side + x0] += (1 - wy) * (1 - wx);
            row[y0 * old_side + x1] += (1 - wy) * wx;
            row[y1 * old_side + x0] += wy * (1 - wx);
            row[y1 * old_side + x1] += wy * wx;
        }
    return matmul(Tensor::from_data({n_new, n_old}, std::move(w)), pos);
}

MlpParams DualEncoder::make_mlp(const std::string& prefix, std::int64_t d_in,
                                std::int64_t hidden, std::int64_t d_out, Rng& rng) {
    MlpParams p;
    p.w1 = store_.add(prefix + ".fc1.w", trunc_normal_param({d_in, hidden}, 0.02, rng));
    p.b1 = store_.add(prefix + ".fc1.b", zeros_param({hidden}));
    p.w2 = store_.add(prefix + ".fc2.w", trunc_normal_param({hidden, d_out}, 0.02, rng));
    p.b2 = store_.add(prefix + ".fc2.b", zeros_param({d_out}));
    return p;
}

LayerParams DualEncoder::make_layer(const std::string& prefix, std::int64_t width,
                                    std::int64_t heads, Rng& rng) {
    LayerParams p;
    p.heads = heads;
    p.ln1_gain = store_.add(prefix + ".ln1.gain", ones_param({width}));
    p.ln1_bias = store_.add(prefix + ".ln1.bias", zeros_param({width}));
    p.attn.w_qkv = store_.add(prefix + ".attn.qkv.w",
                              trunc_normal_param({width, 3 * width}, 0.02, rng));
    p.attn.b_qkv = store_.add(prefix + ".attn.qkv.b", zeros_param({3 * width}));
    p.attn.w_out = store_.add(prefix + ".attn.out.w",
                              trunc_normal_param({width, width}, 0.02, rng));
    p.attn.b_out = store_.add(prefix + ".attn.out.b", zeros_param({width}));
    p.ln2_gain = store_.add(prefix + ".ln2.gain", ones_param({width}));
    p.ln2_bias = store_.add(prefix + ".ln2.bias", zeros_param({width}));
    p.mlp = make_mlp(prefix + ".mlp", width, 4 * width, width, rng);
    return p;
}

MixerParams DualEncoder::make_mixer(const std::string& prefix, std::int64_t m_in,
                                    std::int64_t m_out, Rng& rng) {
    std::int64_t width = cfg_.hidden_width;
    MixerParams p;
    p.m_in = m_in;
    p.m_out = m_out;
    p.ln_tok_gain = store_.add(prefix + ".ln_tok.gain", ones_param({width}));
    p.ln_tok_bias = store_.add(prefix + ".ln_tok.bias", zeros_param({width}));
    p.tok = make_mlp(prefix + ".tok", m_in, 2 * std::max(m_in, m_out), m_out, rng);
    p.ln_ch_gain = store_.add(prefix + ".ln_ch.gain", ones_param({width}));
    p.ln_ch_bias = store_.add(prefix + ".ln_ch.bias", zeros_param({width}));
    p.ch = make_mlp(prefix + ".ch", width, 4 * width, width, rng);
    return p;
}

DualEncoder::DualEncoder(const ModelConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    RunConfig probe;
    probe.model = cfg;
    validate_run_config(probe);

    std::int64_t d = cfg_.hidden_width;
    std::int64_t ppc = cfg_.patch_size * cfg_.patch_size * 3;
    patch_w_ = store_.add("img.patch.w", trunc_normal_param({ppc, d}, 0.02, init_rng));
    patch_b_ = store_.add("img.patch.b", zeros_param({d}));
    patch_pos_ = store_.add("img.pos", trunc_normal_param({cfg_.num_patches(), d}, 0.02,
                                                          init_rng));
    for (std::int64_t i = 0; i < cfg_.num_layers; ++i)
        img_layers_.push_back(
            make_layer("img.layer" + std::to_string(i), d, cfg_.num_heads, init_rng));

    std::int64_t prev_groups = 0;
    for (std::size_t s = 0; s < cfg_.stages.size(); ++s) {
        const auto& sc = cfg_.stages[s];
        std::int64_t input = sc.num_input_group_tokens == 0 ? sc.num_group_tokens
                                                            : sc.num_input_group_tokens;
        std::string prefix = "img.stage" + std::to_string(s);
        StageParams sp;
        if (s == 0) {
            sp.group_tokens =
                store_.add(prefix + ".tokens", trunc_normal_param({input, d}, 0.02, init_rng));
            if (sc.mixer_connector)
                sp.mixer = make_mixer(prefix + ".mixer", input, sc.num_group_tokens, init_rng);
        } else if (sc.mixer_connector) {
            sp.mixer = make_mixer(prefix + ".mixer", prev_groups, sc.num_group_tokens, init_rng);
        } else {
            sp.group_tokens = store_.add(
                prefix + ".tokens", trunc_normal_param({sc.num_group_tokens, d}, 0.02, init_rng));
        }
        sp.block.ln_g_gain = store_.add(prefix + ".block.ln_g.gain", ones_param({d}));
        sp.block.ln_g_bias = store_.add(prefix + ".block.ln_g.bias", zeros_param({d}));
        sp.block.ln_s_gain = store_.add(prefix + ".block.ln_s.gain", ones_param({d}));
        sp.block.ln_s_bias = store_.add(prefix + ".block.ln_s.bias", zeros_param({d}));
        sp.block.w_q = store_.add(prefix + ".block.wq", trunc_normal_param({d, d}, 0.02, init_rng));
        sp.block.w_k = store_.add(prefix + ".block.wk", trunc_normal_param({d, d}, 0.02, init_rng));
        sp.block.w_v = store_.add(prefix + ".block.wv", trunc_normal_param({d, d}, 0.02, init_rng));
        sp.block.w_o = store_.add(prefix + ".block.wo", trunc_normal_param({d, d}, 0.02, init_rng));
        stages_.push_back(std::move(sp));
        prev_groups = sc.num_group_tokens;
    }
    img_final_gain_ = store_.add("img.final.gain", ones_param({d}));
    img_final_bias_ = store_.add("img.final.bias", zeros_param({d}));
    img_proj_.mlp = make_mlp("img.proj", d, d, cfg_.projection_width, init_rng);

    std::int64_t dt = cfg_.text_width;
    tok_embed_ = store_.add("txt.tok_embed",
                            trunc_normal_param({cfg_.vocab_size, dt}, 0.02, init_rng));
    text_pos_ = store_.add("txt.pos",
                           trunc_normal_param({cfg_.max_text_length, dt}, 0.02, init_rng));
    for (std::int64_t i = 0; i < cfg_.text_layers; ++i)
        txt_layers_.push_back(
            make_layer("txt.layer" + std::to_string(i), dt, cfg_.text_heads, init_rng));
    txt_final_gain_ = store_.add("txt.final.gain", ones_param({dt}));
    txt_final_bias_ = store_.add("txt.final.bias", zeros_param({dt}));
    txt_proj_.mlp = make_mlp("txt.proj", dt, dt, cfg_.projection_width, init_rng);

    temp_s_ = store_.add("loss.temp_s", scalar_param(std::log(1.0 / 0.07)));
}

Tensor DualEncoder::temperature() const { return exp(neg(temp_s_)); }

std::vector<GumbelNoise> DualEncoder::draw_noise(Rng& rng, std::int64_t batch) const {
    std::vector<GumbelNoise> out;
    for (const auto& sc : cfg_.stages)
        out.push_back(GumbelNoise::draw(rng, batch * sc.num_group_tokens));
    return out;
}

ImageEncodeResult DualEncoder::encode_images(const Tensor& patches, AssignMode mode,
                                             const std::vector<GumbelNoise>& noise,
                                             bool want_pooled, bool want_segments) const {
    if (patches.rank() != 3)
        throw dim_error("encode_images expects [batch, patches, pixels], got " +
                        shape_str(patches.shape()));
    std::int64_t b = patches.dim(0);
    std::int64_t n = patches.dim(1);
    std::int64_t ppc = cfg_.patch_size * cfg_.patch_size * 3;
    if (patches.dim(2) != ppc)
        throw dim_error("patch pixel count " + std::to_string(patches.dim(2)) +
                        " does not match patch size " + std::to_string(cfg_.patch_size));
    if (!noise.empty() && noise.size() != stages_.size())
        throw dim_error("expected one noise block per stage");
    std::int64_t side = isqrt_exact(n, "patch");

    Tensor pos = patch_pos_;
    if (n != cfg_.num_patches())
        pos = interpolate_pos_grid(patch_pos_, cfg_.patches_per_side(), side);
    Tensor segments = add(add(matmul(patches, patch_w_), patch_b_), pos);  // [B, N, D]

    ImageEncodeResult result;
    result.patch_rows = side;
    result.patch_cols = side;

    Tensor prev_block_tokens;
    std::int64_t layer = 0;
    std::int64_t seg_count = n;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const auto& sc = cfg_.stages[s];
        const auto& sp = stages_[s];
        Tensor gt;
        if (s > 0 && sp.mixer) {
            gt = mixer_connect(prev_block_tokens, *sp.mixer);
        } else {
            gt = tile_batch(sp.group_tokens, b);
        }
        std::int64_t att_count = gt.dim(1);
        Tensor x = concat({gt, segments}, 1);
        while (layer < sc.insert_after_layer)
            x = transformer_layer(x, img_layers_[static_cast<std::size_t>(layer++)]);
        Tensor g_att = slice(x, 1, 0, att_count);
        segments = slice(x, 1, att_count, seg_count);
        // The first stage's mixer projects the attended tokens down right
        // before the block; later stages mix before their layers instead.
        Tensor g_block = (s == 0 && sp.mixer) ? mixer_connect(g_att, *sp.mixer) : g_att;
        GumbelNoise stage_noise =
            noise.empty() ? GumbelNoise::disabled() : noise[s];
        GroupingResult gr = grouping_block(g_block, segments, sp.block, stage_noise, mode,
                                           cfg_.gumbel_temperature);
        result.assignments.push_back(gr.assignment);
        segments = gr.new_segments;
        seg_count = sc.num_group_tokens;
        prev_block_tokens = g_block;
    }
    while (layer < cfg_.num_layers)
        segments = transformer_layer(segments, img_layers_[static_cast<std::size_t>(layer++)]);
    Tensor final_seg = layer_norm(segments, img_final_gain_, img_final_bias_);
    result.final_segments = final_seg;
    if (want_pooled)
        result.z = l2_normalize(mlp_forward(img_proj_.mlp, mean(final_seg, 1)));
    if (want_segments)
        result.segment_embeddings = l2_normalize(mlp_forward(img_proj_.mlp, final_seg));
    return result;
}

ImageEncodeResult DualEncoder::encode_image(const RgbImage& image, AssignMode mode,
                                            bool noise_enabled, Rng* rng) const {
    std::vector<double> px = patchify(image, cfg_.patch_size);
    std::int64_t n = static_cast<std::int64_t>(px.size()) /
                     (cfg_.patch_size * cfg_.patch_size * 3);
    Tensor patches = Tensor::from_data({1, n, cfg_.patch_size * cfg_.patch_size * 3},
                                       std::move(px));
    std::vector<GumbelNoise> noise;
    if (noise_enabled) {
        if (!rng) throw dim_error("noise requires a generator");
        noise = draw_noise(*rng, 1);
    }
    return encode_images(patches, mode, noise, true, true);
}

ImageEncodeResult DualEncoder::encode_image_segments(const RgbImage& image) const {
    return encode_image(image, AssignMode::Hard, false, nullptr);
}

Tensor DualEncoder::encode_texts(const std::vector<TokenizedText>& texts) const {
    if (texts.empty()) throw dim_error("encode_texts requires at least one text");
    std::int64_t bt = static_cast<std::int64_t>(texts.size());
    std::int64_t len = cfg_.max_text_length;
    std::vector<std::int64_t> ids;
    ids.reserve(static_cast<std::size_t>(bt * len));
    std::vector<double> mask(static_cast<std::size_t>(bt * len));
    std::vector<double> eos_pick(static_cast<std::size_t>(bt * len), 0.0);
    for (std::int64_t i = 0; i < bt; ++i) {
        const auto& t = texts[static_cast<std::size_t>(i)];
        if (static_cast<std::int64_t>(t.token_ids.size()) != len)
            throw dim_error("text " + std::to_string(i) + " has " +
                            std::to_string(t.token_ids.size()) + " ids, expected " +
                            std::to_string(len));
        if (t.end_position < 0 || t.end_position >= len)
            throw dim_error("text " + std::to_string(i) + " end position out of range");
        for (std::int64_t j = 0; j < len; ++j) {
            ids.push_back(t.token_ids[static_cast<std::size_t>(j)]);
            mask[static_cast<std::size_t>(i * len + j)] = j <= t.end_position ? 0.0 : kMaskOff;
        }
        eos_pick[static_cast<std::size_t>(i * len + t.end_position)] = 1.0;
    }
    Tensor x = reshape(embedding_lookup(tok_embed_, ids), {bt, len, cfg_.text_width});
    x = add(x, text_pos_);
    Tensor key_mask = Tensor::from_data({bt, 1, 1, len}, std::move(mask));
    for (const auto& lp : txt_layers_) x = transformer_layer(x, lp, &key_mask);
    x = layer_norm(x, txt_final_gain_, txt_final_bias_);
    Tensor pick = Tensor::from_data({bt, len, 1}, std::move(eos_pick));
    Tensor pooled = sum(mul(x, pick), 1);  // [B, Dt], the eos hidden state
    return l2_normalize(mlp_forward(txt_proj_.mlp, pooled));
}

Tensor DualEncoder::encode_text(const TokenizedText& text) const {
    return reshape(encode_texts({text}), {cfg_.projection_width});
}

}  // namespace groupseg
