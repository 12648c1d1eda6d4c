#pragma once

#include <optional>
#include <vector>

#include "groupseg/config.hpp"
#include "groupseg/grouping.hpp"
#include "groupseg/image_io.hpp"
#include "groupseg/params.hpp"
#include "groupseg/tokenizer.hpp"

namespace groupseg {

struct AttentionParams {
    Tensor w_qkv, b_qkv;  // [D, 3D], [3D]
    Tensor w_out, b_out;  // [D, D], [D]
};

struct MlpParams {
    Tensor w1, b1;  // [Din, H], [H]
    Tensor w2, b2;  // [H, Dout], [Dout]
};

struct LayerParams {
    Tensor ln1_gain, ln1_bias;
    AttentionParams attn;
    Tensor ln2_gain, ln2_bias;
    MlpParams mlp;
    std::int64_t heads = 1;
};

// Token-mixing MLP over the token axis ([M_in] -> [M_out]) followed by a
// channel MLP, both with residuals (the token residual only when the token
// count is preserved).
struct MixerParams {
    Tensor ln_tok_gain, ln_tok_bias;  // [D]
    MlpParams tok;                    // [M_in -> hidden -> M_out]
    Tensor ln_ch_gain, ln_ch_bias;    // [D]
    MlpParams ch;                     // [D -> hidden -> D]
    std::int64_t m_in = 0, m_out = 0;
};

struct StageParams {
    Tensor group_tokens;               // [A, D]; undefined when mixer-fed
    std::optional<MixerParams> mixer;  // stage 0: applied after the layers
    GroupingBlockParams block;
};

struct ProjectionParams {
    MlpParams mlp;  // [D -> D -> P]
};

// Per-column pixels of one image flattened into patch rows.
// [N, patch*patch*3], row-major patches scanned left-right, top-bottom.
std::vector<double> patchify(const RgbImage& image, std::int64_t patch_size);

Tensor transformer_layer(const Tensor& tokens, const LayerParams& params,
                         const Tensor* key_mask = nullptr);
Tensor mixer_connect(const Tensor& tokens, const MixerParams& params);
// Bilinear resampling of a [side*side, D] positional grid to a new side.
Tensor interpolate_pos_grid(const Tensor& pos, std::int64_t old_side, std::int64_t new_side);

struct ImageEncodeResult {
    Tensor z;                   // [B, P] unit rows (when pooled requested)
    Tensor segment_embeddings;  // [B, M_L, P] unit rows (when requested)
    Tensor final_segments;      // [B, M_L, D] after the final norm
    std::vector<AssignmentMatrix> assignments;  // one per stage, [B, M_l, S_l]
    std::int64_t patch_rows = 0, patch_cols = 0;
};

// The dual encoder: grouping image tower, text tower, and the learnable
// temperature. Owns every parameter through a named store.
class DualEncoder {
public:
    DualEncoder(const ModelConfig& cfg, Rng& init_rng);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const Tensor& temperature_param() const { return temp_s_; }  // tau = exp(-s)
    Tensor temperature() const;                                  // [1] tensor in-graph

    // patches: [B, N, patch*patch*3]. noise: one entry per stage (empty =
    // disabled everywhere). Pooled and per-segment outputs are both optional
    // to keep training graphs lean.
    ImageEncodeResult encode_images(const Tensor& patches, AssignMode mode,
                                    const std::vector<GumbelNoise>& noise, bool want_pooled,
                                    bool want_segments) const;
    ImageEncodeResult encode_image(const RgbImage& image, AssignMode mode,
                                   bool noise_enabled, Rng* rng) const;
    ImageEncodeResult encode_image_segments(const RgbImage& image) const;

    Tensor encode_texts(const std::vector<TokenizedText>& texts) const;
    Tensor encode_text(const TokenizedText& text) const;

    // Gumbel draws for one batched forward, in stage order.
    std::vector<GumbelNoise> draw_noise(Rng& rng, std::int64_t batch) const;

private:
    ModelConfig cfg_;
    ParamStore store_;

    Tensor patch_w_, patch_b_, patch_pos_;
    std::vector<LayerParams> img_layers_;
    std::vector<StageParams> stages_;
    Tensor img_final_gain_, img_final_bias_;
    ProjectionParams img_proj_;

    Tensor tok_embed_, text_pos_;
    std::vector<LayerParams> txt_layers_;
    Tensor txt_final_gain_, txt_final_bias_;
    ProjectionParams txt_proj_;

    Tensor temp_s_;

    LayerParams make_layer(const std::string& prefix, std::int64_t width, std::int64_t heads,
                           Rng& rng);
    MixerParams make_mixer(const std::string& prefix, std::int64_t m_in, std::int64_t m_out,
                           Rng& rng);
    MlpParams make_mlp(const std::string& prefix, std::int64_t d_in, std::int64_t hidden,
                       std::int64_t d_out, Rng& rng);
};

}  // namespace groupseg
