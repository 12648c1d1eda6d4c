#include "groupseg/tokenizer.hpp"

#include <cctype>
#include <fstream>

#include "groupseg/errors.hpp"

namespace groupseg {

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 3 || tokens[0] != "<pad>" || tokens[1] != "<unk>" ||
        tokens[2] != "<eos>")
        throw data_error("vocabulary must start with <pad>, <unk>, <eos>");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<std::int64_t>(i)).second)
            throw data_error("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open vocabulary file '" + path + "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw data_error("cannot open '" + path + "' for writing");
    for (const auto& t : tokens_) os << t << '\n';
}

std::int64_t Vocabulary::id_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const {
    if (id < 0 || id >= size())
        throw data_error("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

TokenizedText tokenize(const std::string& text, const Vocabulary& vocab,
                       std::int64_t max_length) {
    if (max_length < 2)
        throw dim_error("max_length must be at least 2 to hold a word and eos");
    std::vector<std::string> words = split_words(text);
    if (static_cast<std::int64_t>(words.size()) > max_length - 1)
        words.resize(static_cast<std::size_t>(max_length - 1));
    TokenizedText out;
    out.token_ids.assign(static_cast<std::size_t>(max_length), Vocabulary::kPad);
    for (std::size_t i = 0; i < words.size(); ++i)
        out.token_ids[i] = vocab.id_of(words[i]);
    out.end_position = static_cast<std::int64_t>(words.size());
    out.token_ids[static_cast<std::size_t>(out.end_position)] = Vocabulary::kEos;
    return out;
}

std::string decode(const TokenizedText& text, const Vocabulary& vocab) {
    std::string out;
    for (std::int64_t id : text.token_ids) {
        if (id == Vocabulary::kPad || id == Vocabulary::kEos || id == Vocabulary::kUnk)
            continue;
        if (!out.empty()) out.push_back(' ');
        out += vocab.token(id);
    }
    return out;
}

}  // namespace groupseg
