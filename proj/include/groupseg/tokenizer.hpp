#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace groupseg {

// Word-level vocabulary. Ids 0/1/2 are reserved for <pad>/<unk>/<eos>; the
// vocabulary file lists one token per line and the line number is the id.
class Vocabulary {
public:
    static constexpr std::int64_t kPad = 0;
    static constexpr std::int64_t kUnk = 1;
    static constexpr std::int64_t kEos = 2;

    static Vocabulary from_tokens(std::vector<std::string> tokens);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()); }
    std::int64_t id_of(const std::string& word) const;  // kUnk when absent
    const std::string& token(std::int64_t id) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int64_t> index_;
};

struct TokenizedText {
    std::vector<std::int64_t> token_ids;  // length = max_text_length
    std::int64_t end_position = 0;        // index of the eos token
};

// Lowercases, splits on non-alphanumeric runs, maps words through the
// vocabulary, appends eos, pads. Words beyond max_length - 1 are dropped.
std::vector<std::string> split_words(const std::string& text);
TokenizedText tokenize(const std::string& text, const Vocabulary& vocab,
                       std::int64_t max_length);
// Joins the word tokens back; sentinels are skipped.
std::string decode(const TokenizedText& text, const Vocabulary& vocab);

}  // namespace groupseg
