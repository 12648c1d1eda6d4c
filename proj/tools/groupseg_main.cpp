#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "groupseg/dataset.hpp"
#include "groupseg/encoder.hpp"
#include "groupseg/errors.hpp"
#include "groupseg/eval.hpp"
#include "groupseg/objectives.hpp"
#include "groupseg/synthetic.hpp"
#include "groupseg/trainer.hpp"
#include "groupseg/zeroshot.hpp"

namespace {

using namespace groupseg;

DualEncoder make_encoder(const RunConfig& cfg, const std::string& checkpoint_path) {
    Rng init_rng(mix_seed(cfg.optimizer.seed, 1));
    DualEncoder encoder(cfg.model, init_rng);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    encoder.params().load_from_checkpoint(ckpt);
    return encoder;
}

// Distinct saturated colors by group index, for the group-map dumps.
std::array<double, 3> group_color(std::int64_t g, std::int64_t count) {
    double h = 6.0 * static_cast<double>(g) / static_cast<double>(std::max<std::int64_t>(count, 1));
    double s = 0.75, v = 0.95;
    int i = static_cast<int>(h) % 6;
    double f = h - std::floor(h);
    double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

void write_group_map(const std::string& path, const ComposedAssignment& composed,
                     std::int64_t height, std::int64_t width) {
    RgbImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<std::size_t>(height * width * 3));
    std::int64_t ph = height / composed.grid_rows;
    std::int64_t pw = width / composed.grid_cols;
    for (std::int64_t y = 0; y < height; ++y)
        for (std::int64_t x = 0; x < width; ++x) {
            std::int64_t g = composed.group_of_patch[static_cast<std::size_t>(
                (y / ph) * composed.grid_cols + x / pw)];
            auto rgb = group_color(g, composed.m);
            std::size_t at = static_cast<std::size_t>(y * width + x) * 3;
            img.pixels[at] = rgb[0];
            img.pixels[at + 1] = rgb[1];
            img.pixels[at + 2] = rgb[2];
        }
    write_ppm(path, img);
}

void print_report(const EvalReport& report) {
    std::printf("images %lld\n", static_cast<long long>(report.images));
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        double iou = report.per_class[c];
        if (iou < 0.0)
            std::printf("class %s iou absent\n", report.class_names[c].c_str());
        else
            std::printf("class %s iou %.4f\n", report.class_names[c].c_str(), iou);
    }
    std::printf("miou %.4f\n", report.miou);
    std::printf("oracle_miou %.4f\n", report.oracle_miou);
    std::printf("mask_probe %.4f\n", report.mask_probe_mean);
    if (report.random_baseline >= 0.0)
        std::printf("random_baseline %.4f\n", report.random_baseline);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-grouping dual-encoder toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "generate a synthetic shapes split");
    std::int64_t gen_n = 512;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::int64_t gen_size = 64;
    gen->add_option("--n", gen_n, "samples to generate");
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--image-size", gen_size, "square image size in pixels");

    auto* train = app.add_subcommand("train", "train the dual encoder on a split");
    std::string train_data, train_config = "configs/desk.cfg", train_out = "runs/train";
    std::string train_ckpt, train_mode;
    std::int64_t train_seed = -1;
    train->add_option("data", train_data, "dataset directory")->required();
    train->add_option("--config", train_config, "run config file");
    train->add_option("--out", train_out, "output directory");
    train->add_option("--seed", train_seed, "override optimizer.seed");
    train->add_option("--mode", train_mode, "override assignment mode")
        ->check(CLI::IsMember({"hard", "soft"}));
    train->add_option("--checkpoint", train_ckpt, "resume from this checkpoint");

    auto* eval = app.add_subcommand("eval", "zero-shot segmentation scores on a split");
    std::string eval_data, eval_config = "configs/desk.cfg", eval_ckpt;
    double eval_threshold = -1.0;
    std::int64_t eval_baseline = 0;
    std::uint64_t eval_seed = 0;
    eval->add_option("data", eval_data, "dataset directory")->required();
    eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
    eval->add_option("--config", eval_config, "run config file");
    eval->add_option("--threshold", eval_threshold, "foreground threshold override");
    eval->add_option("--baseline", eval_baseline, "random-labeling baseline trials");
    eval->add_option("--seed", eval_seed, "baseline rng seed");

    auto* seg = app.add_subcommand("segment", "segment one image and dump group maps");
    std::string seg_image, seg_data, seg_config = "configs/desk.cfg", seg_ckpt,
                seg_out = "segments";
    double seg_threshold = -1.0;
    std::int64_t seg_stages = 0;
    seg->add_option("image", seg_image, "input image (binary ppm)")->required();
    seg->add_option("data", seg_data, "dataset directory (class list + vocabulary)")
        ->required();
    seg->add_option("--checkpoint", seg_ckpt, "trained checkpoint")->required();
    seg->add_option("--config", seg_config, "run config file");
    seg->add_option("--out", seg_out, "output directory");
    seg->add_option("--threshold", seg_threshold, "foreground threshold override");
    seg->add_option("--stages", seg_stages, "dump group maps for this many stages (0 = all)");

    auto* inspect = app.add_subcommand("inspect-checkpoint", "print checkpoint contents");
    std::string inspect_path;
    inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            generate_split(gen_n, gen_seed, gen_out, gen_size);
            std::printf("wrote %lld samples to %s\n", static_cast<long long>(gen_n),
                        gen_out.c_str());
        } else if (train->parsed()) {
            RunConfig cfg = parse_run_config(train_config);
            if (train_seed >= 0) cfg.optimizer.seed = static_cast<std::uint64_t>(train_seed);
            if (!train_mode.empty()) cfg.model.assignment_mode = train_mode;
            Dataset data = load_dataset(train_data);
            TrainResult result = train_model(cfg, data, train_out, train_ckpt);
            std::printf("steps %llu final_loss %.6f checkpoint %s\n",
                        static_cast<unsigned long long>(result.steps), result.final_loss,
                        result.final_checkpoint.c_str());
        } else if (eval->parsed()) {
            RunConfig cfg = parse_run_config(eval_config);
            DualEncoder encoder = make_encoder(cfg, eval_ckpt);
            Dataset data = load_dataset(eval_data);
            EvalOptions opts;
            opts.threshold = eval_threshold >= 0.0 ? eval_threshold : cfg.eval.threshold;
            opts.label_temperature = cfg.eval.label_temperature;
            opts.templates_path = cfg.loss.templates_path;
            opts.class_list = cfg.eval.class_list;
            opts.baseline_trials = eval_baseline;
            opts.baseline_seed = eval_seed;
            print_report(evaluate_split(encoder, data, opts));
        } else if (seg->parsed()) {
            RunConfig cfg = parse_run_config(seg_config);
            DualEncoder encoder = make_encoder(cfg, seg_ckpt);
            RgbImage img = read_ppm(seg_image);
            Dataset data = load_dataset(seg_data);
            std::vector<std::string> classes = load_class_list(
                cfg.eval.class_list.empty() ? data.classes_path() : cfg.eval.class_list);
            Vocabulary vocab = Vocabulary::load(data.vocab_path());
            std::vector<std::string> foreground(classes.begin() + 1, classes.end());
            ClassEmbeddingTable table = build_class_table(
                encoder, vocab, foreground, load_templates(cfg.loss.templates_path));

            ImageEncodeResult enc = encoder.encode_image_segments(img);
            double tau = cfg.eval.label_temperature > 0.0
                             ? cfg.eval.label_temperature
                             : std::exp(-encoder.temperature_param().item());
            double threshold = seg_threshold >= 0.0 ? seg_threshold : cfg.eval.threshold;
            GroupLabels labels =
                label_segments(enc.segment_embeddings, table, tau, threshold);

            std::error_code ec;
            std::filesystem::create_directories(seg_out, ec);
            if (ec) throw data_error("cannot create output directory " + seg_out);

            ComposedAssignment full =
                compose_assignments(enc.assignments, enc.patch_rows, enc.patch_cols);
            SegmentationResult pred = rasterize(full, labels, img.height, img.width);
            GrayImage mask;
            mask.width = pred.width;
            mask.height = pred.height;
            mask.pixels = pred.labels;
            write_pgm(seg_out + "/mask.pgm", mask);
            std::printf("wrote %s/mask.pgm\n", seg_out.c_str());
            for (std::size_t g = 0; g < labels.labels.size(); ++g)
                std::printf("group %zu label %s confidence %.4f\n", g,
                            classes[static_cast<std::size_t>(labels.labels[g])].c_str(),
                            labels.confidences[g]);

            std::size_t dump = enc.assignments.size();
            if (seg_stages > 0)
                dump = std::min(dump, static_cast<std::size_t>(seg_stages));
            for (std::size_t l = 1; l <= dump; ++l) {
                std::vector<AssignmentMatrix> prefix(enc.assignments.begin(),
                                                     enc.assignments.begin() +
                                                         static_cast<std::ptrdiff_t>(l));
                ComposedAssignment part =
                    compose_assignments(prefix, enc.patch_rows, enc.patch_cols);
                std::string path = seg_out + "/groups_stage" + std::to_string(l) + ".ppm";
                write_group_map(path, part, img.height, img.width);
                std::printf("wrote %s\n", path.c_str());
            }
        } else if (inspect->parsed()) {
            Checkpoint ckpt = load_checkpoint(inspect_path);
            std::printf("version %u\nstep %llu\nrng %016llx %016llx %016llx %016llx\n",
                        ckpt.version, static_cast<unsigned long long>(ckpt.step),
                        static_cast<unsigned long long>(ckpt.rng_state[0]),
                        static_cast<unsigned long long>(ckpt.rng_state[1]),
                        static_cast<unsigned long long>(ckpt.rng_state[2]),
                        static_cast<unsigned long long>(ckpt.rng_state[3]));
            std::size_t total = 0;
            for (const auto& [name, rec] : ckpt.tensors) {
                std::string dims;
                for (std::size_t i = 0; i < rec.shape.size(); ++i)
                    dims += (i ? "x" : "") + std::to_string(rec.shape[i]);
                if (rec.shape.empty()) dims = "scalar";
                std::printf("%-40s %s\n", name.c_str(), dims.c_str());
                total += rec.data.size();
            }
            std::printf("records %zu values %zu\n", ckpt.tensors.size(), total);
        }
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const dim_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
