// Checkpoint format tests: round trips, canonical byte layout independent of
// insertion order, and corruption handling.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "groupseg/checkpoint.hpp"
#include "groupseg/errors.hpp"

using namespace groupseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("groupseg_ckpt_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("checkpoint round-trips tensors, step, and rng state") {
    TempDir tmp;
    Checkpoint ckpt;
    ckpt.step = 12345;
    ckpt.rng_state = {1, 2, 3, 0xffffffffffffffffull};
    ckpt.put("w", {2, 3}, {1.0, -2.5, 3.25, 0.0, 1e-300, 1e300});
    ckpt.put("b", {3}, {0.5, 0.25, 0.125});

    save_checkpoint(tmp.file("a.ckpt"), ckpt);
    Checkpoint back = load_checkpoint(tmp.file("a.ckpt"));

    CHECK(back.step == 12345);
    CHECK(back.rng_state == ckpt.rng_state);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.get("w").shape == Shape{2, 3});
    CHECK(back.get("w").data == ckpt.get("w").data);
    CHECK(back.get("b").data == ckpt.get("b").data);
    CHECK(back.has("w"));
    CHECK_FALSE(back.has("missing"));
    CHECK_THROWS_AS(back.get("missing"), data_error);
}

TEST_CASE("save, load, save yields identical bytes") {
    TempDir tmp;
    Checkpoint ckpt;
    ckpt.step = 7;
    ckpt.put("alpha", {4}, {1, 2, 3, 4});
    ckpt.put("beta", {2, 2}, {5, 6, 7, 8});
    save_checkpoint(tmp.file("one.ckpt"), ckpt);
    Checkpoint mid = load_checkpoint(tmp.file("one.ckpt"));
    save_checkpoint(tmp.file("two.ckpt"), mid);
    CHECK(read_bytes(tmp.file("one.ckpt")) == read_bytes(tmp.file("two.ckpt")));
}

TEST_CASE("record order does not depend on insertion order") {
    TempDir tmp;
    Checkpoint a, b;
    a.put("x", {1}, {1.0});
    a.put("m", {1}, {2.0});
    a.put("a", {1}, {3.0});
    b.put("a", {1}, {3.0});
    b.put("x", {1}, {1.0});
    b.put("m", {1}, {2.0});
    save_checkpoint(tmp.file("a.ckpt"), a);
    save_checkpoint(tmp.file("b.ckpt"), b);
    CHECK(read_bytes(tmp.file("a.ckpt")) == read_bytes(tmp.file("b.ckpt")));
}

TEST_CASE("bad magic, truncation, and missing files raise data_error") {
    TempDir tmp;
    CHECK_THROWS_AS(load_checkpoint(tmp.file("absent.ckpt")), data_error);

    Checkpoint ckpt;
    ckpt.put("w", {2}, {1.0, 2.0});
    save_checkpoint(tmp.file("good.ckpt"), ckpt);

    std::string bytes = read_bytes(tmp.file("good.ckpt"));
    {
        std::string corrupt = bytes;
        corrupt[0] = 'X';
        std::ofstream f(tmp.file("magic.ckpt"), std::ios::binary);
        f << corrupt;
    }
    CHECK_THROWS_AS(load_checkpoint(tmp.file("magic.ckpt")), data_error);

    {
        std::ofstream f(tmp.file("short.ckpt"), std::ios::binary);
        f << bytes.substr(0, bytes.size() - 5);
    }
    CHECK_THROWS_AS(load_checkpoint(tmp.file("short.ckpt")), data_error);
}
