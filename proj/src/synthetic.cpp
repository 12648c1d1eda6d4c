#include "groupseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "groupseg/errors.hpp"

namespace groupseg {

namespace {

constexpr std::array<std::array<double, 3>, 5> kColorRgb = {{
    {0.85, 0.10, 0.10},  // red
    {0.10, 0.75, 0.15},  // green
    {0.15, 0.20, 0.85},  // blue
    {0.90, 0.85, 0.10},  // yellow
    {0.60, 0.15, 0.75},  // purple
}};

constexpr std::array<double, 3> kBackgrounds = {0.0, 0.1, 0.2};

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

}  // namespace

bool shape_covers(const SceneObject& obj, double px, double py) {
    double dx = px - obj.cx;
    double dy = py - obj.cy;
    double s = obj.size;
    switch (obj.shape) {
        case 0:  // circle
            return dx * dx + dy * dy <= s * s;
        case 1: {  // square, half-side 0.8 s
            double h = 0.8 * s;
            return std::abs(dx) <= h && std::abs(dy) <= h;
        }
        case 2: {  // triangle with apex up: (0,-s), (-s,s), (s,s) around the center
            double ax = 0, ay = -s, bx = -s, by = s, cx = s, cy = s;
            double d1 = cross2(bx - ax, by - ay, dx - ax, dy - ay);
            double d2 = cross2(cx - bx, cy - by, dx - bx, dy - by);
            double d3 = cross2(ax - cx, ay - cy, dx - cx, dy - cy);
            return (d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0);
        }
        case 3: {  // cross of two bars
            double w = 0.35 * s;
            return (std::abs(dx) <= w && std::abs(dy) <= s) ||
                   (std::abs(dy) <= w && std::abs(dx) <= s);
        }
        case 4: {  // ring, inner radius 0.55 s
            double r2 = dx * dx + dy * dy;
            return r2 <= s * s && r2 >= 0.55 * s * 0.55 * s;
        }
        default:
            throw data_error("unknown shape index " + std::to_string(obj.shape));
    }
}

SceneSpec sample_scene(std::uint64_t seed, std::int64_t image_size) {
    if (image_size < 16) throw config_error("scene image size must be at least 16");
    Rng rng(seed);
    SceneSpec spec;
    spec.seed = seed;
    spec.background = kBackgrounds[rng.below(kBackgrounds.size())];
    std::int64_t wanted = 1 + static_cast<std::int64_t>(rng.below(3));

    double lo = static_cast<double>(image_size) / 6.0;
    double hi = static_cast<double>(image_size) / 3.6;
    for (std::int64_t i = 0; i < wanted; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
            SceneObject obj;
            obj.shape = static_cast<std::int64_t>(rng.below(kShapeNames.size()));
            obj.color = static_cast<std::int64_t>(rng.below(kColorNames.size()));
            obj.size = lo + (hi - lo) * rng.uniform();
            double margin = obj.size + 2.0;
            double span = static_cast<double>(image_size) - 2.0 * margin;
            obj.cx = margin + span * rng.uniform();
            obj.cy = margin + span * rng.uniform();
            bool clear = true;
            for (const auto& other : spec.objects) {
                double ddx = obj.cx - other.cx;
                double ddy = obj.cy - other.cy;
                double need = obj.size + other.size + 2.0;
                if (ddx * ddx + ddy * ddy < need * need) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                spec.objects.push_back(obj);
                placed = true;
            }
        }
        // A crowded scene just keeps fewer objects.
    }
    return spec;
}

SampleRecord generate_sample(std::uint64_t seed, std::int64_t image_size) {
    SampleRecord rec;
    rec.scene = sample_scene(seed, image_size);

    rec.image.width = image_size;
    rec.image.height = image_size;
    rec.image.pixels.assign(static_cast<std::size_t>(image_size * image_size * 3), 0.0);
    rec.mask.width = image_size;
    rec.mask.height = image_size;
    rec.mask.pixels.assign(static_cast<std::size_t>(image_size * image_size), 0);

    for (std::int64_t y = 0; y < image_size; ++y)
        for (std::int64_t x = 0; x < image_size; ++x) {
            double px = static_cast<double>(x) + 0.5;
            double py = static_cast<double>(y) + 0.5;
            double r = rec.scene.background, g = rec.scene.background,
                   b = rec.scene.background;
            std::uint8_t cls = 0;
            for (const auto& obj : rec.scene.objects)
                if (shape_covers(obj, px, py)) {
                    const auto& rgb = kColorRgb[static_cast<std::size_t>(obj.color)];
                    r = rgb[0];
                    g = rgb[1];
                    b = rgb[2];
                    cls = static_cast<std::uint8_t>(obj.shape + 1);
                    break;  // objects are disjoint by construction
                }
            std::size_t at = static_cast<std::size_t>(y * image_size + x);
            rec.image.pixels[at * 3 + 0] = r;
            rec.image.pixels[at * 3 + 1] = g;
            rec.image.pixels[at * 3 + 2] = b;
            rec.mask.pixels[at] = cls;
        }

    rec.caption = "a photo of";
    for (std::size_t i = 0; i < rec.scene.objects.size(); ++i) {
        const auto& obj = rec.scene.objects[i];
        rec.caption += i == 0 ? " a " : " and a ";
        rec.caption += kColorNames[static_cast<std::size_t>(obj.color)];
        rec.caption += ' ';
        rec.caption += kShapeNames[static_cast<std::size_t>(obj.shape)];
        std::string noun = kShapeNames[static_cast<std::size_t>(obj.shape)];
        if (std::find(rec.nouns.begin(), rec.nouns.end(), noun) == rec.nouns.end())
            rec.nouns.push_back(noun);
    }
    return rec;
}

void generate_split(std::int64_t n, std::uint64_t seed, const std::string& out_dir,
                    std::int64_t image_size) {
    if (n < 1) throw config_error("split size must be at least 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create dataset directory " + out_dir);

    std::ofstream index(out_dir + "/index.tsv", std::ios::binary);
    if (!index) throw data_error("cannot write " + out_dir + "/index.tsv");
    char name[32];
    for (std::int64_t i = 0; i < n; ++i) {
        SampleRecord rec = generate_sample(mix_seed(seed, static_cast<std::uint64_t>(i)),
                                           image_size);
        std::snprintf(name, sizeof name, "img_%05lld.ppm", static_cast<long long>(i));
        write_ppm(out_dir + "/" + name, rec.image);
        std::string img_name = name;
        std::snprintf(name, sizeof name, "msk_%05lld.pgm", static_cast<long long>(i));
        write_pgm(out_dir + "/" + name, rec.mask);
        index << img_name << '\t' << rec.caption << '\n';
    }
    index.close();

    std::ofstream nouns(out_dir + "/nouns.txt", std::ios::binary);
    for (const char* s : kShapeNames) nouns << s << '\n';

    std::ofstream classes(out_dir + "/classes.txt", std::ios::binary);
    classes << "background\n";
    for (const char* s : kShapeNames) classes << s << '\n';

    // Every word the captions and prompt templates can produce.
    std::ofstream vocab(out_dir + "/vocab.txt", std::ios::binary);
    vocab << "<pad>\n<unk>\n<eos>\n";
    for (const char* w :
         {"a", "photo", "of", "and", "picture", "an", "image", "drawing", "the", "in",
          "scene", "with", "one", "on", "plain", "background", "this", "is"})
        vocab << w << '\n';
    for (const char* s : kColorNames) vocab << s << '\n';
    for (const char* s : kShapeNames) vocab << s << '\n';
}

}  // namespace groupseg
