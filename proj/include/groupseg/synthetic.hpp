#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "groupseg/image_io.hpp"
#include "groupseg/rng.hpp"

namespace groupseg {

// Shape identity doubles as the mask class: background 0, then these in
// order (circle = 1, ..., ring = 5).
inline constexpr std::array<const char*, 5> kShapeNames = {"circle", "square", "triangle",
                                                           "cross", "ring"};
inline constexpr std::array<const char*, 5> kColorNames = {"red", "green", "blue", "yellow",
                                                           "purple"};

struct SceneObject {
    std::int64_t shape = 0;  // index into kShapeNames
    std::int64_t color = 0;  // index into kColorNames
    double cx = 0, cy = 0;   // center, pixels
    double size = 0;         // characteristic radius, pixels
};

struct SceneSpec {
    std::vector<SceneObject> objects;  // 1..3, pairwise disjoint
    double background = 0.0;           // gray level
    std::uint64_t seed = 0;
};

struct SampleRecord {
    SceneSpec scene;
    RgbImage image;
    GrayImage mask;  // class per pixel, 0 = background
    std::string caption;
    std::vector<std::string> nouns;  // distinct shape words, first-use order
};

// Scene layout only (no rasterization); rejection-samples non-overlapping
// placements and drops objects that fail to fit after bounded retries.
SceneSpec sample_scene(std::uint64_t seed, std::int64_t image_size);

SampleRecord generate_sample(std::uint64_t seed, std::int64_t image_size = 64);

// Writes img_NNNNN.ppm / msk_NNNNN.pgm pairs, index.tsv
// ("filename<TAB>caption" per line), vocab.txt, nouns.txt, and classes.txt.
// Sample i uses seed mix_seed(seed, i), so distinct base seeds give
// disjoint streams for train and validation splits.
void generate_split(std::int64_t n, std::uint64_t seed, const std::string& out_dir,
                    std::int64_t image_size = 64);

// Exact point-in-shape test at pixel center (px, py); shared by the
// renderer and the area oracles in tests.
bool shape_covers(const SceneObject& obj, double px, double py);

}  // namespace groupseg
