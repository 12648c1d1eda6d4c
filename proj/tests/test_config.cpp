// Config parser tests: defaults, typed errors, stage blocks, the serialize /
// reparse fixed point, and the shipped preset files.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <string>

#include "groupseg/config.hpp"
#include "groupseg/errors.hpp"

using namespace groupseg;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("empty text yields the default config") {
    RunConfig cfg = parse_run_config_text("");
    CHECK(cfg.model.image_size == 224);
    CHECK(cfg.model.patch_size == 16);
    CHECK(cfg.model.stages.size() == 2);
    CHECK(cfg.model.stages[0].num_group_tokens == 64);
    CHECK(cfg.optimizer.batch_size == 4096);
    CHECK(cfg.loss.k == 3);
}

TEST_CASE("comments, blanks, and whitespace are tolerated") {
    RunConfig cfg = parse_run_config_text(
        "# leading comment\n"
        "\n"
        "  model.image_size   =  128  \n"
        "model.patch_size = 8   # trailing comment\n");
    CHECK(cfg.model.image_size == 128);
    CHECK(cfg.model.patch_size == 8);
}

TEST_CASE("unknown, duplicate, and malformed keys are rejected") {
    CHECK_THROWS_AS(parse_run_config_text("model.imagesize = 64\n"), config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.image_size = 64\nmodel.image_size = 32\n"),
                    config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.image_size\n"), config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.image_size = abc\n"), config_error);
    CHECK_THROWS_AS(parse_run_config_text("loss.multilabel = yes\n"), config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.assignment_mode = fuzzy\n"), config_error);
}

TEST_CASE("stage blocks parse with indexed keys") {
    RunConfig cfg = parse_run_config_text(
        "model.num_stages = 1\n"
        "model.stage.0.num_group_tokens = 8\n"
        "model.stage.0.num_input_group_tokens = 64\n"
        "model.stage.0.insert_after_layer = 6\n"
        "model.stage.0.mixer_connector = true\n");
    REQUIRE(cfg.model.stages.size() == 1);
    CHECK(cfg.model.stages[0].num_group_tokens == 8);
    CHECK(cfg.model.stages[0].num_input_group_tokens == 64);
    CHECK(cfg.model.stages[0].insert_after_layer == 6);
    CHECK(cfg.model.stages[0].mixer_connector);

    // a stage key without the count is an error, as is a missing index.
    CHECK_THROWS_AS(parse_run_config_text("model.stage.0.num_group_tokens = 8\n"), config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.num_stages = 2\n"
                                          "model.stage.0.num_group_tokens = 8\n"
                                          "model.stage.0.insert_after_layer = 2\n"),
                    config_error);
}

TEST_CASE("serialize then reparse is a fixed point") {
    RunConfig cfg = parse_run_config_text(
        "model.image_size = 64\n"
        "model.patch_size = 8\n"
        "model.hidden_width = 64\n"
        "model.num_heads = 4\n"
        "model.num_stages = 2\n"
        "model.stage.0.num_group_tokens = 8\n"
        "model.stage.0.insert_after_layer = 2\n"
        "model.stage.1.num_group_tokens = 4\n"
        "model.stage.1.insert_after_layer = 4\n"
        "model.stage.1.mixer_connector = true\n"
        "optimizer.learning_rate = 0.0003\n"
        "loss.multilabel = false\n");
    std::string s1 = serialize_run_config(cfg);
    RunConfig back = parse_run_config_text(s1);
    std::string s2 = serialize_run_config(back);
    CHECK(s1 == s2);
    CHECK(back.model.image_size == 64);
    CHECK(back.model.stages[1].mixer_connector);
    CHECK(back.optimizer.learning_rate == 0.0003);
    CHECK_FALSE(back.loss.multilabel);
}

TEST_CASE("parsing validates geometry") {
    CHECK_THROWS_AS(parse_run_config_text("model.image_size = 65\nmodel.patch_size = 8\n"),
                    config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.hidden_width = 65\nmodel.num_heads = 4\n"),
                    config_error);
    CHECK_THROWS_AS(parse_run_config_text("model.num_layers = 4\n"
                                          "model.num_stages = 1\n"
                                          "model.stage.0.num_group_tokens = 8\n"
                                          "model.stage.0.insert_after_layer = 9\n"),
                    config_error);
    // more groups than incoming segments cannot group anything.
    CHECK_THROWS_AS(parse_run_config_text("model.num_stages = 1\n"
                                          "model.stage.0.num_group_tokens = 500\n"
                                          "model.stage.0.insert_after_layer = 6\n"),
                    config_error);
}

TEST_CASE("desk preset parses and validates") {
    RunConfig cfg = parse_run_config("configs/desk.cfg");
    validate_run_config(cfg);
    CHECK(cfg.model.image_size == 64);
    CHECK(cfg.model.patch_size == 8);
    CHECK(cfg.model.hidden_width == 64);
    CHECK(cfg.model.num_patches() == 64);
    REQUIRE(cfg.model.stages.size() == 2);
    CHECK(cfg.model.stages[0].num_group_tokens == 8);
    CHECK(cfg.model.stages[1].num_group_tokens == 4);
    CHECK(cfg.model.final_groups() == 4);
    CHECK(cfg.optimizer.batch_size == 32);
    CHECK(cfg.loss.multilabel);
}

TEST_CASE("published preset round-trips its architecture and training values") {
    RunConfig cfg = parse_run_config("configs/paper.cfg");
    validate_run_config(cfg);
    CHECK(cfg.model.image_size == 224);
    CHECK(cfg.model.patch_size == 16);
    CHECK(cfg.model.hidden_width == 384);
    CHECK(cfg.model.num_layers == 12);
    CHECK(cfg.model.num_heads == 6);
    CHECK(cfg.model.num_patches() == 196);
    REQUIRE(cfg.model.stages.size() == 2);
    CHECK(cfg.model.stages[0].num_group_tokens == 64);
    CHECK(cfg.model.stages[0].insert_after_layer == 6);
    CHECK(cfg.model.stages[1].num_group_tokens == 8);
    CHECK(cfg.model.stages[1].insert_after_layer == 9);
    CHECK(cfg.model.stages[1].mixer_connector);
    CHECK(cfg.model.projection_width == 256);
    CHECK(cfg.model.text_layers == 12);
    CHECK(cfg.model.text_width == 256);
    CHECK(cfg.model.max_text_length == 77);
    CHECK(cfg.optimizer.learning_rate == 0.0016);
    CHECK(cfg.optimizer.batch_size == 4096);
    CHECK(cfg.optimizer.epochs == 30);
    CHECK(cfg.optimizer.warmup_epochs == 5);
    CHECK(cfg.optimizer.weight_decay == 0.05);
    CHECK(cfg.eval.threshold == 0.9);
    CHECK(cfg.loss.k == 3);

    std::string s1 = serialize_run_config(cfg);
    CHECK(serialize_run_config(parse_run_config_text(s1)) == s1);

    // the single-stage variant: 8 groups straight from 64 mixed tokens.
    RunConfig one = parse_run_config("configs/paper-1stage.cfg");
    validate_run_config(one);
    REQUIRE(one.model.stages.size() == 1);
    CHECK(one.model.stages[0].num_group_tokens == 8);
    CHECK(one.model.stages[0].num_input_group_tokens == 64);
}
