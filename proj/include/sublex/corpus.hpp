#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sublex/error.hpp"

namespace sublex {

// Closed symbol inventory. Input symbols get ids 0..size()-1 in first-appearance
// order. The reserved boundary markers live outside that range: index size()
// denotes BOS on the context axis and EOS on the emission axis (the two never
// share an axis, so the slot is unambiguous).
class Alphabet {
public:
    static constexpr const char* kBosToken = "<s>";
    static constexpr const char* kEosToken = "</s>";

    Alphabet() = default;
    explicit Alphabet(std::vector<std::string> symbols);

    std::int32_t size() const { return static_cast<std::int32_t>(symbols_.size()); }
    const std::vector<std::string>& symbols() const { return symbols_; }

    bool has(const std::string& token) const { return index_.count(token) != 0; }
    std::int32_t id(const std::string& token) const;            // throws UnknownSymbol
    const std::string& token(std::int32_t id) const;            // throws UnknownSymbol

    // Boundary slot shared by BOS (context axis) and EOS (emission axis).
    std::int32_t boundary() const { return size(); }

    // Token rendering that also covers the boundary slot.
    std::string context_token(std::int32_t id) const;   // boundary -> "<s>"
    std::string emission_token(std::int32_t id) const;  // boundary -> "</s>"

    bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, std::int32_t> index_;
};

struct Word {
    std::vector<std::int32_t> symbol_ids;   // nonempty, ids in [0, alphabet.size())
    std::string external_id;                 // may be empty
    std::optional<std::int64_t> frequency;   // nonnegative

    double weight() const {
        return frequency ? static_cast<double>(*frequency) : 1.0;
    }
};

struct Lexicon {
    std::vector<Word> words;
    Alphabet alphabet;
    std::string provenance;

    std::size_t size() const { return words.size(); }
};

using LabelTable = std::unordered_map<std::string, std::string>;

struct LexiconFormat {
    // When true, the symbol field is one character (one UTF-8 code point) per
    // segment with no separators, DISC style. Default is space-separated tokens.
    bool compact = false;
};

Lexicon load_lexicon(const std::string& path, const LexiconFormat& format = {});
Lexicon parse_lexicon(const std::string& text, const LexiconFormat& format = {},
                      const std::string& provenance = "<string>");
void save_lexicon(const Lexicon& lexicon, const std::string& path);
std::string format_lexicon(const Lexicon& lexicon);

struct StripResult {
    Lexicon lexicon;
    std::size_t dropped_words = 0;   // words that became empty and were removed
};

StripResult strip_symbols(const Lexicon& lexicon,
                          const std::unordered_set<std::string>& removable);

Lexicon filter_min_frequency(const Lexicon& lexicon, std::int64_t threshold);

LabelTable load_labels(const std::string& path);
LabelTable parse_labels(const std::string& text, const std::string& origin = "<string>");
void save_labels(const LabelTable& labels, const std::string& path);

// Optional display-name translation table (CSV "from,to"), presentation only.
std::unordered_map<std::string, std::string> load_symbol_map(const std::string& path);

} // namespace sublex
