// PPM/PGM tests: write/read round trips, quantization midpoints, header
// tolerance, and malformed-file rejection.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "groupseg/errors.hpp"
#include "groupseg/image_io.hpp"

using namespace groupseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("groupseg_img_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("ppm round-trip preserves pixels to quantization accuracy") {
    TempDir tmp;
    RgbImage img;
    img.width = 3;
    img.height = 2;
    img.pixels.resize(18);
    for (int i = 0; i < 18; ++i) img.pixels[i] = i / 17.0;

    write_ppm(tmp.file("a.ppm"), img);
    RgbImage back = read_ppm(tmp.file("a.ppm"));
    REQUIRE(back.width == 3);
    REQUIRE(back.height == 2);
    REQUIRE(back.pixels.size() == 18);
    for (int i = 0; i < 18; ++i) {
        CHECK(std::fabs(back.pixels[i] - img.pixels[i]) <= 0.5 / 255.0 + 1e-12);
    }

    // a second round trip is exact: quantization is idempotent.
    write_ppm(tmp.file("b.ppm"), back);
    RgbImage again = read_ppm(tmp.file("b.ppm"));
    CHECK(again.pixels == back.pixels);
}

TEST_CASE("pgm round-trip is exact") {
    TempDir tmp;
    GrayImage m;
    m.width = 4;
    m.height = 2;
    m.pixels = {0, 1, 2, 3, 254, 255, 128, 7};
    write_pgm(tmp.file("m.pgm"), m);
    GrayImage back = read_pgm(tmp.file("m.pgm"));
    CHECK(back.width == 4);
    CHECK(back.height == 2);
    CHECK(back.pixels == m.pixels);
}

TEST_CASE("out-of-range values are clamped on write") {
    TempDir tmp;
    RgbImage img;
    img.width = 1;
    img.height = 1;
    img.pixels = {-0.5, 1.5, 0.5};
    write_ppm(tmp.file("c.ppm"), img);
    RgbImage back = read_ppm(tmp.file("c.ppm"));
    CHECK(back.pixels[0] == 0.0);
    CHECK(back.pixels[1] == 1.0);
    CHECK(std::fabs(back.pixels[2] - 0.5) <= 0.5 / 255.0);
}

TEST_CASE("comments and whitespace in headers parse") {
    TempDir tmp;
    {
        std::ofstream f(tmp.file("hdr.pgm"), std::ios::binary);
        f << "P5\n# a comment line\n 2 1 \n255\n";
        f.put(static_cast<char>(7));
        f.put(static_cast<char>(9));
    }
    GrayImage m = read_pgm(tmp.file("hdr.pgm"));
    CHECK(m.width == 2);
    CHECK(m.height == 1);
    CHECK(m.pixels == std::vector<std::uint8_t>{7, 9});
}

TEST_CASE("malformed files raise data_error") {
    TempDir tmp;
    CHECK_THROWS_AS(read_ppm(tmp.file("absent.ppm")), data_error);

    {
        std::ofstream f(tmp.file("badmagic.ppm"), std::ios::binary);
        f << "P4\n1 1\n255\nxxx";
    }
    CHECK_THROWS_AS(read_ppm(tmp.file("badmagic.ppm")), data_error);

    {
        std::ofstream f(tmp.file("short.ppm"), std::ios::binary);
        f << "P6\n2 2\n255\n";
        f.put(1);  // 12 bytes expected
    }
    CHECK_THROWS_AS(read_ppm(tmp.file("short.ppm")), data_error);

    {
        std::ofstream f(tmp.file("maxval.pgm"), std::ios::binary);
        f << "P5\n1 1\n65535\n";
        f.put(1);
        f.put(1);
    }
    CHECK_THROWS_AS(read_pgm(tmp.file("maxval.pgm")), data_error);
}
