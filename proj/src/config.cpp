#include "groupseg/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "groupseg/errors.hpp"

namespace groupseg {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw config_error("key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw config_error("key '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error("line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw config_error("duplicate key '" + key + "'");
    }

    RunConfig cfg;
    bool stages_customized = false;
    std::int64_t num_stages = -1;
    // key -> (stage index, field); collected before sizing the stage list.
    std::map<std::string, std::string> stage_fields;

    for (const auto& [key, value] : kv) {
        if (key == "model.image_size") cfg.model.image_size = parse_int(key, value);
        else if (key == "model.patch_size") cfg.model.patch_size = parse_int(key, value);
        else if (key == "model.hidden_width") cfg.model.hidden_width = parse_int(key, value);
        else if (key == "model.num_layers") cfg.model.num_layers = parse_int(key, value);
        else if (key == "model.num_heads") cfg.model.num_heads = parse_int(key, value);
        else if (key == "model.projection_width") cfg.model.projection_width = parse_int(key, value);
        else if (key == "model.text_layers") cfg.model.text_layers = parse_int(key, value);
        else if (key == "model.text_width") cfg.model.text_width = parse_int(key, value);
        else if (key == "model.text_heads") cfg.model.text_heads = parse_int(key, value);
        else if (key == "model.vocab_size") cfg.model.vocab_size = parse_int(key, value);
        else if (key == "model.max_text_length") cfg.model.max_text_length = parse_int(key, value);
        else if (key == "model.assignment_mode") {
            if (value != "hard" && value != "soft")
                throw config_error("key '" + key + "': expected hard or soft, got '" + value + "'");
            cfg.model.assignment_mode = value;
        } else if (key == "model.gumbel_temperature") {
            cfg.model.gumbel_temperature = parse_double(key, value);
        } else if (key == "model.num_stages") {
            num_stages = parse_int(key, value);
            stages_customized = true;
        } else if (key.rfind("model.stage.", 0) == 0) {
            stage_fields[key] = value;
            stages_customized = true;
        } else if (key == "optimizer.learning_rate") {
            cfg.optimizer.learning_rate = parse_double(key, value);
        } else if (key == "optimizer.weight_decay") {
            cfg.optimizer.weight_decay = parse_double(key, value);
        } else if (key == "optimizer.warmup_epochs") {
            cfg.optimizer.warmup_epochs = parse_int(key, value);
        } else if (key == "optimizer.epochs") {
            cfg.optimizer.epochs = parse_int(key, value);
        } else if (key == "optimizer.batch_size") {
            cfg.optimizer.batch_size = parse_int(key, value);
        } else if (key == "optimizer.seed") {
            cfg.optimizer.seed = static_cast<std::uint64_t>(parse_int(key, value));
        } else if (key == "optimizer.grad_clip") {
            cfg.optimizer.grad_clip = parse_double(key, value);
        } else if (key == "optimizer.checkpoint_every") {
            cfg.optimizer.checkpoint_every = parse_int(key, value);
        } else if (key == "loss.k") {
            cfg.loss.k = parse_int(key, value);
        } else if (key == "loss.multilabel") {
            cfg.loss.multilabel = parse_bool(key, value);
        } else if (key == "loss.templates") {
            cfg.loss.templates_path = value;
        } else if (key == "loss.lexicon") {
            cfg.loss.lexicon_path = value;
        } else if (key == "eval.threshold") {
            cfg.eval.threshold = parse_double(key, value);
        } else if (key == "eval.threshold_alt") {
            cfg.eval.threshold_alt = parse_double(key, value);
        } else if (key == "eval.class_list") {
            cfg.eval.class_list = value;
        } else if (key == "eval.label_temperature") {
            cfg.eval.label_temperature = parse_double(key, value);
        } else {
            throw config_error("unknown config key '" + key + "'");
        }
    }

    if (stages_customized) {
        if (num_stages < 1)
            throw config_error("model.num_stages must be set (>= 1) when stage keys are given");
        cfg.model.stages.assign(static_cast<std::size_t>(num_stages), GroupingStageConfig{});
        std::vector<bool> got_groups(static_cast<std::size_t>(num_stages), false);
        std::vector<bool> got_insert(static_cast<std::size_t>(num_stages), false);
        std::vector<bool> got_mixer(static_cast<std::size_t>(num_stages), false);
        for (const auto& [key, value] : stage_fields) {
            std::string rest = key.substr(std::string("model.stage.").size());
            std::size_t dot = rest.find('.');
            if (dot == std::string::npos)
                throw config_error("unknown config key '" + key + "'");
            std::int64_t idx = parse_int(key, rest.substr(0, dot));
            std::string field = rest.substr(dot + 1);
            if (idx < 0 || idx >= num_stages)
                throw config_error("key '" + key + "': stage index out of range [0, " +
                                   std::to_string(num_stages) + ")");
            auto& st = cfg.model.stages[static_cast<std::size_t>(idx)];
            if (field == "num_group_tokens") {
                st.num_group_tokens = parse_int(key, value);
                got_groups[static_cast<std::size_t>(idx)] = true;
            } else if (field == "num_input_group_tokens") {
                st.num_input_group_tokens = parse_int(key, value);
            } else if (field == "insert_after_layer") {
                st.insert_after_layer = parse_int(key, value);
                got_insert[static_cast<std::size_t>(idx)] = true;
            } else if (field == "mixer_connector") {
                st.mixer_connector = parse_bool(key, value);
                got_mixer[static_cast<std::size_t>(idx)] = true;
            } else {
                throw config_error("unknown config key '" + key + "'");
            }
        }
        for (std::int64_t i = 0; i < num_stages; ++i) {
            std::size_t u = static_cast<std::size_t>(i);
            std::string prefix = "model.stage." + std::to_string(i) + ".";
            if (!got_groups[u])
                throw config_error("missing key '" + prefix + "num_group_tokens'");
            if (!got_insert[u])
                throw config_error("missing key '" + prefix + "insert_after_layer'");
            // Later stages chain from the previous stage's tokens by default.
            if (!got_mixer[u]) cfg.model.stages[u].mixer_connector = i > 0;
            if (cfg.model.stages[u].num_input_group_tokens == 0)
                cfg.model.stages[u].num_input_group_tokens = cfg.model.stages[u].num_group_tokens;
        }
    }

    validate_run_config(cfg);
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_run_config_text(buf.str());
}

void validate_run_config(const RunConfig& cfg) {
    const ModelConfig& m = cfg.model;
    if (m.image_size <= 0 || m.patch_size <= 0 || m.image_size % m.patch_size != 0)
        throw config_error("model.image_size " + std::to_string(m.image_size) +
                           " must be a positive multiple of model.patch_size " +
                           std::to_string(m.patch_size));
    if (m.hidden_width <= 0 || m.num_heads <= 0 || m.hidden_width % m.num_heads != 0)
        throw config_error("model.hidden_width " + std::to_string(m.hidden_width) +
                           " must be a positive multiple of model.num_heads " +
                           std::to_string(m.num_heads));
    if (m.text_width <= 0 || m.text_heads <= 0 || m.text_width % m.text_heads != 0)
        throw config_error("model.text_width " + std::to_string(m.text_width) +
                           " must be a positive multiple of model.text_heads " +
                           std::to_string(m.text_heads));
    if (m.num_layers <= 0) throw config_error("model.num_layers must be positive");
    if (m.text_layers <= 0) throw config_error("model.text_layers must be positive");
    if (m.projection_width <= 0) throw config_error("model.projection_width must be positive");
    if (m.vocab_size < 3)
        throw config_error("model.vocab_size must be at least 3 (pad/unk/eos)");
    if (m.max_text_length < 2)
        throw config_error("model.max_text_length must be at least 2");
    if (m.stages.empty()) throw config_error("model must have at least one grouping stage");
    if (m.gumbel_temperature <= 0.0)
        throw config_error("model.gumbel_temperature must be positive");
    std::int64_t prev_insert = 0;
    std::int64_t prev_groups = m.num_patches();
    for (std::size_t i = 0; i < m.stages.size(); ++i) {
        const auto& st = m.stages[i];
        std::string name = "model.stage." + std::to_string(i);
        if (st.num_group_tokens <= 0)
            throw config_error(name + ".num_group_tokens must be positive");
        if (st.num_group_tokens >= prev_groups)
            throw config_error(name + ".num_group_tokens " +
                               std::to_string(st.num_group_tokens) +
                               " must be strictly less than the previous segment count " +
                               std::to_string(prev_groups));
        std::int64_t input = st.num_input_group_tokens == 0 ? st.num_group_tokens
                                                            : st.num_input_group_tokens;
        if (i == 0) {
            if (input != st.num_group_tokens && !st.mixer_connector)
                throw config_error(name + ".num_input_group_tokens requires " + name +
                                   ".mixer_connector = true");
            if (input < st.num_group_tokens)
                throw config_error(name + ".num_input_group_tokens must be >= " + name +
                                   ".num_group_tokens");
        } else {
            if (input != st.num_group_tokens)
                throw config_error(name + ".num_input_group_tokens must equal " + name +
                                   ".num_group_tokens for stages after the first");
        }
        if (st.insert_after_layer <= prev_insert)
            throw config_error(name + ".insert_after_layer " +
                               std::to_string(st.insert_after_layer) +
                               " must exceed the previous insertion point " +
                               std::to_string(prev_insert));
        if (st.insert_after_layer >= m.num_layers)
            throw config_error(name + ".insert_after_layer " +
                               std::to_string(st.insert_after_layer) +
                               " must be < model.num_layers " + std::to_string(m.num_layers));
        prev_insert = st.insert_after_layer;
        prev_groups = st.num_group_tokens;
    }
    if (m.assignment_mode != "hard" && m.assignment_mode != "soft")
        throw config_error("model.assignment_mode must be hard or soft");

    const OptimizerConfig& o = cfg.optimizer;
    if (o.learning_rate <= 0) throw config_error("optimizer.learning_rate must be positive");
    if (o.weight_decay < 0) throw config_error("optimizer.weight_decay must be >= 0");
    if (o.epochs < 1) throw config_error("optimizer.epochs must be >= 1");
    if (o.warmup_epochs < 0 || o.warmup_epochs > o.epochs)
        throw config_error("optimizer.warmup_epochs must lie in [0, optimizer.epochs]");
    if (o.batch_size < 1) throw config_error("optimizer.batch_size must be >= 1");
    if (o.grad_clip <= 0) throw config_error("optimizer.grad_clip must be positive");
    if (o.checkpoint_every < 1) throw config_error("optimizer.checkpoint_every must be >= 1");

    if (cfg.loss.k < 1) throw config_error("loss.k must be >= 1");
    if (cfg.eval.threshold < 0 || cfg.eval.threshold > 1)
        throw config_error("eval.threshold must lie in [0, 1]");
    if (cfg.eval.threshold_alt < 0 || cfg.eval.threshold_alt > 1)
        throw config_error("eval.threshold_alt must lie in [0, 1]");
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    const ModelConfig& m = cfg.model;
    os << "model.image_size = " << m.image_size << '\n';
    os << "model.patch_size = " << m.patch_size << '\n';
    os << "model.hidden_width = " << m.hidden_width << '\n';
    os << "model.num_layers = " << m.num_layers << '\n';
    os << "model.num_heads = " << m.num_heads << '\n';
    os << "model.projection_width = " << m.projection_width << '\n';
    os << "model.text_layers = " << m.text_layers << '\n';
    os << "model.text_width = " << m.text_width << '\n';
    os << "model.text_heads = " << m.text_heads << '\n';
    os << "model.vocab_size = " << m.vocab_size << '\n';
    os << "model.max_text_length = " << m.max_text_length << '\n';
    os << "model.assignment_mode = " << m.assignment_mode << '\n';
    os << "model.gumbel_temperature = " << fmt_double(m.gumbel_temperature) << '\n';
    os << "model.num_stages = " << m.stages.size() << '\n';
    for (std::size_t i = 0; i < m.stages.size(); ++i) {
        const auto& st = m.stages[i];
        std::string p = "model.stage." + std::to_string(i) + ".";
        os << p << "num_group_tokens = " << st.num_group_tokens << '\n';
        os << p << "num_input_group_tokens = "
           << (st.num_input_group_tokens == 0 ? st.num_group_tokens : st.num_input_group_tokens)
           << '\n';
        os << p << "insert_after_layer = " << st.insert_after_layer << '\n';
        os << p << "mixer_connector = " << (st.mixer_connector ? "true" : "false") << '\n';
    }
    const OptimizerConfig& o = cfg.optimizer;
    os << "optimizer.learning_rate = " << fmt_double(o.learning_rate) << '\n';
    os << "optimizer.weight_decay = " << fmt_double(o.weight_decay) << '\n';
    os << "optimizer.warmup_epochs = " << o.warmup_epochs << '\n';
    os << "optimizer.epochs = " << o.epochs << '\n';
    os << "optimizer.batch_size = " << o.batch_size << '\n';
    os << "optimizer.seed = " << o.seed << '\n';
    os << "optimizer.grad_clip = " << fmt_double(o.grad_clip) << '\n';
    os << "optimizer.checkpoint_every = " << o.checkpoint_every << '\n';
    os << "loss.k = " << cfg.loss.k << '\n';
    os << "loss.multilabel = " << (cfg.loss.multilabel ? "true" : "false") << '\n';
    os << "loss.templates = " << cfg.loss.templates_path << '\n';
    os << "loss.lexicon = " << cfg.loss.lexicon_path << '\n';
    os << "eval.threshold = " << fmt_double(cfg.eval.threshold) << '\n';
    os << "eval.threshold_alt = " << fmt_double(cfg.eval.threshold_alt) << '\n';
    os << "eval.class_list = " << cfg.eval.class_list << '\n';
    os << "eval.label_temperature = " << fmt_double(cfg.eval.label_temperature) << '\n';
    return os.str();
}

}  // namespace groupseg
