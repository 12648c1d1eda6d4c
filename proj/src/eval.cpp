#include "groupseg/eval.hpp"

#include <cmath>

#include "groupseg/errors.hpp"
#include "groupseg/objectives.hpp"

namespace groupseg {

ClassEmbeddingTable build_class_table(const DualEncoder& encoder, const Vocabulary& vocab,
                                      const std::vector<std::string>& foreground_names,
                                      const std::vector<std::string>& templates) {
    if (foreground_names.empty()) throw config_error("class table needs at least one class");
    if (templates.empty()) throw config_error("class table needs at least one template");
    std::int64_t c = static_cast<std::int64_t>(foreground_names.size());
    std::int64_t t = static_cast<std::int64_t>(templates.size());
    std::int64_t p = encoder.config().projection_width;

    std::vector<TokenizedText> texts;
    texts.reserve(static_cast<std::size_t>(c * t));
    for (const auto& name : foreground_names)
        for (const auto& tpl : templates) {
            std::string prompt = tpl;
            prompt.replace(prompt.find("{noun}"), 6, name);
            texts.push_back(tokenize(prompt, vocab, encoder.config().max_text_length));
        }
    Tensor z = encoder.encode_texts(texts);  // [C*T, P]

    ClassEmbeddingTable table;
    table.class_names = foreground_names;
    table.c = c;
    table.p = p;
    table.embeddings.assign(static_cast<std::size_t>(c * p), 0.0);
    const double* rows = z.value().data();
    for (std::int64_t i = 0; i < c; ++i) {
        double* dst = table.embeddings.data() + i * p;
        for (std::int64_t j = 0; j < t; ++j) {
            const double* src = rows + (i * t + j) * p;
            for (std::int64_t d = 0; d < p; ++d) dst[d] += src[d];
        }
        double norm = 0.0;
        for (std::int64_t d = 0; d < p; ++d) norm += dst[d] * dst[d];
        norm = std::sqrt(norm);
        if (norm < 1e-12)
            throw numeric_error("class '" + foreground_names[static_cast<std::size_t>(i)] +
                                "' has a degenerate embedding");
        for (std::int64_t d = 0; d < p; ++d) dst[d] /= norm;
    }
    return table;
}

EvalReport evaluate_split(const DualEncoder& encoder, const Dataset& dataset,
                          const EvalOptions& options) {
    std::vector<std::string> classes = load_class_list(
        options.class_list.empty() ? dataset.classes_path() : options.class_list);
    std::vector<std::string> foreground(classes.begin() + 1, classes.end());
    Vocabulary vocab = Vocabulary::load(dataset.vocab_path());
    std::vector<std::string> templates = load_templates(options.templates_path);
    ClassEmbeddingTable table = build_class_table(encoder, vocab, foreground, templates);

    double tau = options.label_temperature > 0.0
                     ? options.label_temperature
                     : std::exp(-encoder.temperature_param().item());
    std::int64_t num_classes = static_cast<std::int64_t>(classes.size());

    EvalReport report;
    report.class_names = classes;
    report.images = dataset.size();

    IoUAccumulator acc(num_classes);
    IoUAccumulator oracle_acc(num_classes);
    double probe_sum = 0.0;
    std::int64_t probe_count = 0;
    std::vector<ComposedAssignment> composed_cache;
    std::vector<GrayImage> truth_cache;

    for (std::int64_t i = 0; i < dataset.size(); ++i) {
        RgbImage img = dataset.image(i);
        GrayImage truth = dataset.mask(i);
        ImageEncodeResult enc = encoder.encode_image_segments(img);
        ComposedAssignment composed =
            compose_assignments(enc.assignments, enc.patch_rows, enc.patch_cols);
        GroupLabels labels =
            label_segments(enc.segment_embeddings, table, tau, options.threshold);
        SegmentationResult pred = rasterize(composed, labels, img.height, img.width);

        GroupLabels oracle;
        oracle.labels = oracle_assign(composed, truth, num_classes);
        oracle.confidences.assign(oracle.labels.size(), 1.0);
        SegmentationResult oracle_pred = rasterize(composed, oracle, img.height, img.width);

        acc.add(pred.labels.data(), truth);
        oracle_acc.add(oracle_pred.labels.data(), truth);

        IoUAccumulator one(num_classes), one_oracle(num_classes);
        one.add(pred.labels.data(), truth);
        one_oracle.add(oracle_pred.labels.data(), truth);
        report.per_image.push_back(ImageEval{one.mean(), one_oracle.mean()});

        for (std::int64_t cls = 1; cls < num_classes; ++cls) {
            GrayImage binary;
            binary.width = truth.width;
            binary.height = truth.height;
            binary.pixels.resize(truth.pixels.size());
            bool present = false;
            for (std::size_t px = 0; px < truth.pixels.size(); ++px) {
                std::uint8_t v = truth.pixels[px];
                binary.pixels[px] = v == 255 ? 255 : (v == cls ? 1 : 0);
                present = present || (v == cls);
            }
            if (!present) continue;
            probe_sum += mask_probe(composed, binary);
            ++probe_count;
        }

        composed_cache.push_back(std::move(composed));
        truth_cache.push_back(std::move(truth));
    }

    report.per_class = acc.per_class();
    report.miou = acc.mean();
    report.oracle_miou = oracle_acc.mean();
    report.mask_probe_mean = probe_count > 0 ? probe_sum / static_cast<double>(probe_count)
                                             : 0.0;
    if (options.baseline_trials > 0) {
        Rng rng(options.baseline_seed);
        report.random_baseline = random_labeling_baseline(composed_cache, truth_cache,
                                                          num_classes,
                                                          options.baseline_trials, rng);
    }
    return report;
}

double random_labeling_baseline(const std::vector<ComposedAssignment>& composed,
                                const std::vector<GrayImage>& truths,
                                std::int64_t num_classes, std::int64_t trials, Rng& rng) {
    if (composed.size() != truths.size())
        throw dim_error("baseline needs one truth mask per composed assignment");
    if (composed.empty() || trials < 1) throw config_error("baseline needs images and trials");
    double total = 0.0;
    for (std::int64_t t = 0; t < trials; ++t) {
        IoUAccumulator acc(num_classes);
        for (std::size_t i = 0; i < composed.size(); ++i) {
            GroupLabels labels;
            for (std::int64_t g = 0; g < composed[i].m; ++g)
                labels.labels.push_back(
                    static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(num_classes))));
            labels.confidences.assign(labels.labels.size(), 1.0);
            SegmentationResult pred = rasterize(composed[i], labels, truths[i].height,
                                                truths[i].width);
            acc.add(pred.labels.data(), truths[i]);
        }
        total += acc.mean();
    }
    return total / static_cast<double>(trials);
}

}  // namespace groupseg
