// Dual-encoder tests: patch extraction, stage geometry for the desk and
// published two-stage layouts plus the mixer-fed single-stage variant,
// positional grid resampling, text masking, and batch consistency.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "groupseg/config.hpp"
#include "groupseg/encoder.hpp"
#include "groupseg/ops.hpp"
#include "groupseg/rng.hpp"
#include "oracles.hpp"

using namespace groupseg;

namespace {

ModelConfig desk_model() {
    ModelConfig m;
    m.image_size = 64;
    m.patch_size = 8;
    m.hidden_width = 64;
    m.num_layers = 6;
    m.num_heads = 4;
    m.stages = {{8, 8, 2, false}, {4, 4, 4, true}};
    m.projection_width = 64;
    m.text_layers = 4;
    m.text_width = 64;
    m.text_heads = 4;
    m.vocab_size = 32;
    m.max_text_length = 16;
    return m;
}

RgbImage solid_image(std::int64_t size, double r, double g, double b) {
    RgbImage img;
    img.width = img.height = size;
    img.pixels.resize(static_cast<std::size_t>(size * size * 3));
    for (std::int64_t i = 0; i < size * size; ++i) {
        img.pixels[i * 3 + 0] = r;
        img.pixels[i * 3 + 1] = g;
        img.pixels[i * 3 + 2] = b;
    }
    return img;
}

double unit_norm_error(const std::vector<double>& v, std::int64_t rows, std::int64_t p) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < rows; ++i) {
        long double n = 0.0L;
        for (std::int64_t j = 0; j < p; ++j) n += static_cast<long double>(v[i * p + j]) * v[i * p + j];
        worst = std::max(worst, std::fabs(static_cast<double>(std::sqrt(n)) - 1.0));
    }
    return worst;
}

}  // namespace

TEST_CASE("patchify scans patches row-major and pixels within each patch") {
    RgbImage img;
    img.width = img.height = 4;
    img.pixels.resize(4 * 4 * 3);
    for (std::int64_t y = 0; y < 4; ++y)
        for (std::int64_t x = 0; x < 4; ++x) {
            img.pixels[(y * 4 + x) * 3 + 0] = y;
            img.pixels[(y * 4 + x) * 3 + 1] = x;
            img.pixels[(y * 4 + x) * 3 + 2] = 0.5;
        }
    auto rows = patchify(img, 2);
    REQUIRE(rows.size() == 4 * 12);
    // patch 0 covers (y,x) in {0,1}x{0,1}: pixel order (0,0),(0,1),(1,0),(1,1)
    std::vector<double> want0{0, 0, 0.5, 0, 1, 0.5, 1, 0, 0.5, 1, 1, 0.5};
    for (int i = 0; i < 12; ++i) CHECK(rows[i] == want0[i]);
    // patch 1 covers columns 2..3 of rows 0..1
    std::vector<double> want1{0, 2, 0.5, 0, 3, 0.5, 1, 2, 0.5, 1, 3, 0.5};
    for (int i = 0; i < 12; ++i) CHECK(rows[12 + i] == want1[i]);

    CHECK_THROWS(patchify(img, 3));
}

TEST_CASE("desk geometry flows 64 patches through 8 then 4 groups") {
    Rng rng(31);
    DualEncoder enc(desk_model(), rng);
    auto img = solid_image(64, 0.2, 0.5, 0.8);
    auto res = enc.encode_image(img, AssignMode::Hard, false, nullptr);

    REQUIRE(res.assignments.size() == 2);
    CHECK(res.assignments[0].values.shape() == Shape{1, 8, 64});
    CHECK(res.assignments[1].values.shape() == Shape{1, 4, 8});
    CHECK(res.z.shape() == Shape{1, 64});
    CHECK(res.patch_rows == 8);
    CHECK(res.patch_cols == 8);
    CHECK(unit_norm_error(res.z.value(), 1, 64) < 1e-9);

    auto seg = enc.encode_image_segments(img);
    CHECK(seg.segment_embeddings.shape() == Shape{1, 4, 64});
    CHECK(seg.final_segments.shape() == Shape{1, 4, 64});
    CHECK(unit_norm_error(seg.segment_embeddings.value(), 4, 64) < 1e-9);
}

TEST_CASE("published two-stage geometry yields 64x196 then 8x64 assignments") {
    ModelConfig m;
    m.image_size = 224;
    m.patch_size = 16;
    m.hidden_width = 64;  // narrow width, full token geometry
    m.num_layers = 12;
    m.num_heads = 4;
    m.stages = {{64, 64, 6, false}, {8, 8, 9, true}};
    m.projection_width = 32;
    m.text_layers = 2;
    m.text_width = 64;
    m.text_heads = 4;
    m.vocab_size = 16;
    m.max_text_length = 8;
    Rng rng(37);
    DualEncoder enc(m, rng);
    auto res = enc.encode_image(solid_image(224, 0.4, 0.4, 0.4), AssignMode::Hard, false, nullptr);
    REQUIRE(res.assignments.size() == 2);
    CHECK(res.assignments[0].values.shape() == Shape{1, 64, 196});
    CHECK(res.assignments[1].values.shape() == Shape{1, 8, 64});
    CHECK(res.z.shape() == Shape{1, 32});
}

TEST_CASE("single-stage variant mixes 64 learned tokens down to 8 groups") {
    ModelConfig m;
    m.image_size = 64;
    m.patch_size = 8;
    m.hidden_width = 64;
    m.num_layers = 6;
    m.num_heads = 4;
    m.stages = {{8, 64, 4, true}};
    m.projection_width = 64;
    m.text_layers = 2;
    m.text_width = 64;
    m.text_heads = 4;
    m.vocab_size = 16;
    m.max_text_length = 8;
    Rng rng(41);
    DualEncoder enc(m, rng);
    CHECK(enc.params().has("img.stage0.tokens"));
    CHECK(enc.params().at("img.stage0.tokens").shape() == Shape{64, 64});
    auto res = enc.encode_image(solid_image(64, 0.1, 0.6, 0.3), AssignMode::Hard, false, nullptr);
    REQUIRE(res.assignments.size() == 1);
    CHECK(res.assignments[0].values.shape() == Shape{1, 8, 64});
}

TEST_CASE("positional grid interpolation is exact on linear ramps") {
    const std::int64_t old_side = 4, new_side = 7, d = 2;
    std::vector<double> pv(old_side * old_side * d);
    for (std::int64_t r = 0; r < old_side; ++r)
        for (std::int64_t c = 0; c < old_side; ++c) {
            pv[(r * old_side + c) * d + 0] = 2.0 * r + 3.0 * c;
            pv[(r * old_side + c) * d + 1] = -1.0 * r + 0.25 * c;
        }
    auto pos = Tensor::from_data({old_side * old_side, d}, std::move(pv));
    auto out = interpolate_pos_grid(pos, old_side, new_side);
    REQUIRE(out.shape() == Shape{new_side * new_side, d});
    const double s = double(old_side - 1) / double(new_side - 1);
    for (std::int64_t r = 0; r < new_side; ++r)
        for (std::int64_t c = 0; c < new_side; ++c) {
            double rr = r * s, cc = c * s;
            CHECK(out.value()[(r * new_side + c) * d + 0] ==
                  doctest::Approx(2.0 * rr + 3.0 * cc).epsilon(1e-12));
            CHECK(out.value()[(r * new_side + c) * d + 1] ==
                  doctest::Approx(-1.0 * rr + 0.25 * cc).epsilon(1e-12));
        }

    // same side: values pass through untouched.
    auto same = interpolate_pos_grid(pos, old_side, old_side);
    CHECK(same.value() == pos.value());
}

TEST_CASE("an off-size image resamples the positional grid and still encodes") {
    Rng rng(43);
    DualEncoder enc(desk_model(), rng);
    auto res = enc.encode_image(solid_image(96, 0.3, 0.3, 0.3), AssignMode::Hard, false, nullptr);
    CHECK(res.patch_rows == 12);
    CHECK(res.patch_cols == 12);
    CHECK(res.assignments[0].values.shape() == Shape{1, 8, 144});
    CHECK(unit_norm_error(res.z.value(), 1, 64) < 1e-9);
}

TEST_CASE("text tokens after eos cannot influence the embedding") {
    Rng rng(47);
    ModelConfig m = desk_model();
    DualEncoder enc(m, rng);

    TokenizedText a;
    a.token_ids.assign(m.max_text_length, 0);
    a.token_ids[0] = 5;
    a.token_ids[1] = 9;
    a.token_ids[2] = Vocabulary::kEos;
    a.end_position = 2;
    TokenizedText b = a;
    for (std::size_t i = 3; i < b.token_ids.size(); ++i) b.token_ids[i] = 7;  // garbage tail

    auto za = enc.encode_text(a);
    auto zb = enc.encode_text(b);
    REQUIRE(za.shape() == zb.shape());
    for (std::size_t i = 0; i < za.value().size(); ++i) {
        CHECK(za.value()[i] == doctest::Approx(zb.value()[i]).epsilon(1e-12));
    }
    CHECK(unit_norm_error(za.value(), 1, m.projection_width) < 1e-9);
}

TEST_CASE("changing a word before eos changes the embedding") {
    Rng rng(53);
    DualEncoder enc(desk_model(), rng);
    TokenizedText a;
    a.token_ids.assign(16, 0);
    a.token_ids[0] = 5;
    a.token_ids[1] = Vocabulary::kEos;
    a.end_position = 1;
    TokenizedText b = a;
    b.token_ids[0] = 6;
    double diff = 0.0;
    auto za = enc.encode_text(a), zb = enc.encode_text(b);
    for (std::size_t i = 0; i < za.value().size(); ++i) {
        diff = std::max(diff, std::fabs(za.value()[i] - zb.value()[i]));
    }
    CHECK(diff > 1e-6);
}

TEST_CASE("batched encodes match single encodes") {
    Rng rng(59);
    ModelConfig m = desk_model();
    DualEncoder enc(m, rng);

    auto img1 = solid_image(64, 0.9, 0.1, 0.2);
    auto img2 = solid_image(64, 0.1, 0.8, 0.7);
    std::vector<double> both = patchify(img1, 8);
    auto p2 = patchify(img2, 8);
    both.insert(both.end(), p2.begin(), p2.end());
    auto patches = Tensor::from_data({2, 64, 192}, std::move(both));
    auto batch = enc.encode_images(patches, AssignMode::Soft, {}, true, false);
    auto one1 = enc.encode_image(img1, AssignMode::Soft, false, nullptr);
    auto one2 = enc.encode_image(img2, AssignMode::Soft, false, nullptr);
    REQUIRE(batch.z.shape() == Shape{2, 64});
    for (std::int64_t j = 0; j < 64; ++j) {
        CHECK(batch.z.value()[j] == doctest::Approx(one1.z.value()[j]).epsilon(1e-10));
        CHECK(batch.z.value()[64 + j] == doctest::Approx(one2.z.value()[j]).epsilon(1e-10));
    }

    TokenizedText ta, tb;
    ta.token_ids.assign(16, 0);
    ta.token_ids[0] = 4;
    ta.token_ids[1] = Vocabulary::kEos;
    ta.end_position = 1;
    tb.token_ids.assign(16, 0);
    tb.token_ids[0] = 8;
    tb.token_ids[1] = 9;
    tb.token_ids[2] = Vocabulary::kEos;
    tb.end_position = 2;
    auto zt = enc.encode_texts({ta, tb});
    auto z1 = enc.encode_text(ta), z2 = enc.encode_text(tb);
    REQUIRE(zt.shape() == Shape{2, 64});
    for (std::int64_t j = 0; j < 64; ++j) {
        CHECK(zt.value()[j] == doctest::Approx(z1.value()[j]).epsilon(1e-10));
        CHECK(zt.value()[64 + j] == doctest::Approx(z2.value()[j]).epsilon(1e-10));
    }
}

TEST_CASE("gumbel noise is reproducible from the generator seed") {
    Rng rng(61);
    DualEncoder enc(desk_model(), rng);
    auto img = solid_image(64, 0.5, 0.5, 0.5);

    Rng n1(123), n2(123), n3(321);
    auto a = enc.encode_image(img, AssignMode::Soft, true, &n1);
    auto b = enc.encode_image(img, AssignMode::Soft, true, &n2);
    auto c = enc.encode_image(img, AssignMode::Soft, true, &n3);
    CHECK(a.z.value() == b.z.value());

    double diff = 0.0;
    for (std::size_t i = 0; i < a.z.value().size(); ++i) {
        diff = std::max(diff, std::fabs(a.z.value()[i] - c.z.value()[i]));
    }
    CHECK(diff > 0.0);  // different draws move at least one assignment

    auto noise = enc.draw_noise(n1, 3);
    REQUIRE(noise.size() == 2);
    CHECK(noise[0].samples.size() == 3 * 8);
    CHECK(noise[1].samples.size() == 3 * 4);
}

TEST_CASE("parameter names cover both towers and the temperature") {
    Rng rng(67);
    ModelConfig m = desk_model();
    DualEncoder enc(m, rng);
    const ParamStore& ps = enc.params();
    for (const char* name : {"img.patch.w", "img.patch.b", "img.pos", "img.layer0.attn.qkv.w",
                             "img.layer5.mlp.fc2.b", "img.stage0.tokens", "img.stage1.block.wq",
                             "img.stage1.mixer.tok.fc1.w", "img.final.gain", "img.proj.fc1.w",
                             "txt.tok_embed", "txt.pos", "txt.layer3.ln2.gain", "txt.final.bias",
                             "txt.proj.fc2.w", "loss.temp_s"}) {
        CHECK(ps.has(name));
    }
    CHECK_FALSE(ps.has("img.stage1.tokens"));  // mixer-fed stages learn no tokens
    CHECK(enc.temperature().item() == doctest::Approx(0.07).epsilon(1e-12));
}
