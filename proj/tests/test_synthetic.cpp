// Synthetic dataset tests. The renderer and the tests share shape_covers, so
// mask pixel counts are checked exactly; analytic shape areas bound the
// predicate itself; split files are checked for byte determinism and
// loader round trips.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "groupseg/dataset.hpp"
#include "groupseg/errors.hpp"
#include "groupseg/rng.hpp"
#include "groupseg/synthetic.hpp"
#include "groupseg/tokenizer.hpp"

using namespace groupseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("groupseg_syn_" + std::to_string(::getpid()));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

// Pixel-center count of shape_covers over a bounding grid.
std::int64_t covered_pixels(const SceneObject& obj, std::int64_t image_size) {
    std::int64_t n = 0;
    for (std::int64_t y = 0; y < image_size; ++y)
        for (std::int64_t x = 0; x < image_size; ++x)
            if (shape_covers(obj, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5))
                ++n;
    return n;
}

}  // namespace

TEST_CASE("pixel counts track analytic shape areas") {
    // Area within one perimeter length of the analytic value: pixel-center
    // quantization can only err along the boundary.
    struct Case {
        std::int64_t shape;
        double area;
        double perimeter;
    };
    const double s = 14.0;
    const double pi = 3.14159265358979323846;
    std::vector<Case> cases = {
        {0, pi * s * s, 2 * pi * s},
        {1, 1.6 * s * 1.6 * s, 4 * 1.6 * s},
        {2, 2.0 * s * s, (2.0 + 2.0 * std::sqrt(5.0)) * s},
        // two 0.7s x 2s bars overlapping in a 0.7s square
        {3, 2.0 * (0.7 * s * 2.0 * s) - 0.7 * s * 0.7 * s, 12.0 * s},
        {4, pi * s * s * (1.0 - 0.55 * 0.55), 2 * pi * s * (1.0 + 0.55)},
    };
    for (const auto& c : cases) {
        SceneObject obj;
        obj.shape = c.shape;
        obj.cx = 32.0;
        obj.cy = 32.0;
        obj.size = s;
        double got = static_cast<double>(covered_pixels(obj, 64));
        CHECK(std::fabs(got - c.area) < c.perimeter);
    }

    SceneObject bad;
    bad.shape = 9;
    CHECK_THROWS_AS(shape_covers(bad, 0, 0), data_error);
}

TEST_CASE("scenes respect bounds, margins, and disjointness") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SceneSpec spec = sample_scene(seed, 64);
        REQUIRE(spec.objects.size() >= 1);
        REQUIRE(spec.objects.size() <= 3);
        bool bg_ok = spec.background == 0.0 || spec.background == 0.1 || spec.background == 0.2;
        CHECK(bg_ok);
        for (const auto& obj : spec.objects) {
            CHECK(obj.size >= 64.0 / 6.4);
            CHECK(obj.size <= 64.0 / 4.0);
            CHECK(obj.cx >= obj.size);
            CHECK(obj.cx <= 64.0 - obj.size);
            CHECK(obj.cy >= obj.size);
            CHECK(obj.cy <= 64.0 - obj.size);
        }
        for (std::size_t i = 0; i < spec.objects.size(); ++i)
            for (std::size_t j = i + 1; j < spec.objects.size(); ++j) {
                double dx = spec.objects[i].cx - spec.objects[j].cx;
                double dy = spec.objects[i].cy - spec.objects[j].cy;
                double need = spec.objects[i].size + spec.objects[j].size;
                CHECK(dx * dx + dy * dy > need * need);
            }
    }
    CHECK_THROWS_AS(sample_scene(0, 8), config_error);
}

TEST_CASE("mask pixels equal the covering shape class exactly") {
    for (std::uint64_t seed : {3u, 17u, 99u}) {
        SampleRecord rec = generate_sample(seed, 64);
        std::map<std::uint8_t, std::int64_t> mask_count;
        for (std::uint8_t c : rec.mask.pixels) ++mask_count[c];

        std::int64_t checked = 0;
        for (std::int64_t y = 0; y < 64; ++y)
            for (std::int64_t x = 0; x < 64; ++x) {
                double px = static_cast<double>(x) + 0.5;
                double py = static_cast<double>(y) + 0.5;
                std::uint8_t want = 0;
                int covers = 0;
                for (const auto& obj : rec.scene.objects)
                    if (shape_covers(obj, px, py)) {
                        ++covers;
                        if (want == 0) want = static_cast<std::uint8_t>(obj.shape + 1);
                    }
                CHECK(covers <= 1);
                if (rec.mask.pixels[static_cast<std::size_t>(y * 64 + x)] != want) ++checked;
            }
        CHECK(checked == 0);

        // background pixels carry the background gray; object pixels do not
        for (std::int64_t i = 0; i < 64 * 64; ++i) {
            double r = rec.image.pixels[static_cast<std::size_t>(3 * i)];
            double g = rec.image.pixels[static_cast<std::size_t>(3 * i + 1)];
            double b = rec.image.pixels[static_cast<std::size_t>(3 * i + 2)];
            if (rec.mask.pixels[static_cast<std::size_t>(i)] == 0) {
                CHECK(r == rec.scene.background);
                CHECK(g == rec.scene.background);
                CHECK(b == rec.scene.background);
            } else {
                bool saturated = r > 0.5 || g > 0.5 || b > 0.5;
                CHECK(saturated);
            }
        }
    }
}

TEST_CASE("captions list every object and nouns deduplicate in order") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SampleRecord rec = generate_sample(seed, 64);
        std::string want = "a photo of";
        std::vector<std::string> want_nouns;
        for (std::size_t i = 0; i < rec.scene.objects.size(); ++i) {
            const auto& obj = rec.scene.objects[i];
            want += i == 0 ? " a " : " and a ";
            want += kColorNames[static_cast<std::size_t>(obj.color)];
            want += ' ';
            want += kShapeNames[static_cast<std::size_t>(obj.shape)];
            std::string noun = kShapeNames[static_cast<std::size_t>(obj.shape)];
            if (std::find(want_nouns.begin(), want_nouns.end(), noun) == want_nouns.end())
                want_nouns.push_back(noun);
        }
        CHECK(rec.caption == want);
        CHECK(rec.nouns == want_nouns);
    }
}

TEST_CASE("samples are seed-deterministic") {
    SampleRecord a = generate_sample(1234, 64);
    SampleRecord b = generate_sample(1234, 64);
    CHECK(a.caption == b.caption);
    CHECK(a.image.pixels == b.image.pixels);
    CHECK(a.mask.pixels == b.mask.pixels);

    SampleRecord c = generate_sample(1235, 64);
    bool differs = a.caption != c.caption || a.mask.pixels != c.mask.pixels;
    CHECK(differs);
}

TEST_CASE("object counts and shapes stay roughly uniform") {
    std::map<std::size_t, std::int64_t> count_hist;
    std::map<std::int64_t, std::int64_t> shape_hist;
    const std::int64_t trials = 900;
    std::int64_t objects = 0;
    for (std::uint64_t seed = 0; seed < trials; ++seed) {
        SceneSpec spec = sample_scene(mix_seed(777, seed), 64);
        ++count_hist[spec.objects.size()];
        for (const auto& obj : spec.objects) {
            ++shape_hist[obj.shape];
            ++objects;
        }
    }
    // Requested counts are uniform over {1,2,3}; crowding drops objects, so
    // mass shifts from three toward one, but every count must stay common
    // and no scene may come out empty.
    CHECK(count_hist[0] == 0);
    for (std::size_t k = 1; k <= 3; ++k) CHECK(count_hist[k] > trials / 20);
    for (std::int64_t shp = 0; shp < 5; ++shp) {
        double share = static_cast<double>(shape_hist[shp]) / static_cast<double>(objects);
        CHECK(share > 0.12);
        CHECK(share < 0.28);
    }
}

TEST_CASE("generate_split writes a loadable, byte-deterministic dataset") {
    TempDir tmp;
    std::string dir_a = tmp.str() + "/a";
    std::string dir_b = tmp.str() + "/b";
    generate_split(6, 42, dir_a, 64);
    generate_split(6, 42, dir_b, 64);

    std::vector<std::string> names = {"index.tsv", "vocab.txt", "nouns.txt", "classes.txt",
                                      "img_00000.ppm", "msk_00000.pgm", "img_00005.ppm",
                                      "msk_00005.pgm"};
    for (const auto& f : names) CHECK(read_bytes(dir_a + "/" + f) == read_bytes(dir_b + "/" + f));

    Dataset ds = load_dataset(dir_a);
    REQUIRE(ds.size() == 6);
    for (std::int64_t i = 0; i < 6; ++i) {
        SampleRecord rec = generate_sample(mix_seed(42, static_cast<std::uint64_t>(i)), 64);
        CHECK(ds.entries[static_cast<std::size_t>(i)].caption == rec.caption);
        GrayImage mask = ds.mask(i);
        CHECK(mask.pixels == rec.mask.pixels);
        RgbImage img = ds.image(i);
        REQUIRE(img.pixels.size() == rec.image.pixels.size());
        double worst = 0.0;
        for (std::size_t p = 0; p < img.pixels.size(); ++p)
            worst = std::max(worst, std::fabs(img.pixels[p] - rec.image.pixels[p]));
        CHECK(worst <= 0.5 / 255.0 + 1e-12);  // one byte-quantization trip
    }

    std::vector<std::string> classes = load_class_list(ds.classes_path());
    REQUIRE(classes.size() == 6);
    CHECK(classes[0] == "background");
    for (std::size_t i = 0; i < kShapeNames.size(); ++i) CHECK(classes[i + 1] == kShapeNames[i]);

    // vocabulary covers every caption word
    Vocabulary vocab = Vocabulary::load(ds.vocab_path());
    for (const auto& entry : ds.entries)
        for (const auto& w : split_words(entry.caption)) CHECK(vocab.id_of(w) > 2);

    // nouns.txt lists exactly the shape lexicon
    std::ifstream nf(ds.nouns_path());
    std::set<std::string> nouns;
    std::string line;
    while (std::getline(nf, line))
        if (!line.empty()) nouns.insert(line);
    CHECK(nouns == std::set<std::string>(kShapeNames.begin(), kShapeNames.end()));

    CHECK_THROWS_AS(generate_split(0, 1, tmp.str() + "/bad", 64), config_error);
}
