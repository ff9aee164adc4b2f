#include "sublex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace sublex {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

// Splits into UTF-8 code points (for the compact DISC-style reader).
std::vector<std::string> split_codepoints(const std::string& s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if (c >= 0xF0) len = 4;
        else if (c >= 0xE0) len = 3;
        else if (c >= 0xC0) len = 2;
        len = std::min(len, s.size() - i);
        out.push_back(s.substr(i, len));
        i += len;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open file for writing: " + path);
    out << content;
    if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

struct RawWord {
    std::vector<std::string> tokens;
    std::string external_id;
    std::optional<std::int64_t> frequency;
};

// Merges duplicates (same token sequence): first entry wins for identity,
// frequencies are summed when any duplicate carries one.
Lexicon build_lexicon(std::vector<RawWord> raw, const std::string& provenance) {
    std::vector<std::string> symbols;
    std::unordered_map<std::string, std::int32_t> symbol_index;
    std::map<std::string, std::size_t> seen;   // joined tokens -> index into words
    Lexicon lex;
    lex.provenance = provenance;

    for (auto& rw : raw) {
        for (const auto& tok : rw.tokens) {
            if (symbol_index.emplace(tok, static_cast<std::int32_t>(symbols.size())).second) {
                symbols.push_back(tok);
            }
        }
        std::string key;
        for (const auto& tok : rw.tokens) {
            key += tok;
            key += '\x1f';
        }
        auto it = seen.find(key);
        if (it != seen.end()) {
            Word& w = lex.words[it->second];
            if (rw.frequency) {
                w.frequency = w.frequency.value_or(0) + *rw.frequency;
            }
            continue;
        }
        Word w;
        w.symbol_ids.reserve(rw.tokens.size());
        for (const auto& tok : rw.tokens) w.symbol_ids.push_back(symbol_index.at(tok));
        w.external_id = std::move(rw.external_id);
        w.frequency = rw.frequency;
        seen.emplace(std::move(key), lex.words.size());
        lex.words.push_back(std::move(w));
    }
    lex.alphabet = Alphabet(std::move(symbols));
    return lex;
}

std::vector<RawWord> lexicon_to_raw(const Lexicon& lex) {
    std::vector<RawWord> raw;
    raw.reserve(lex.words.size());
    for (const Word& w : lex.words) {
        RawWord rw;
        rw.tokens.reserve(w.symbol_ids.size());
        for (std::int32_t id : w.symbol_ids) rw.tokens.push_back(lex.alphabet.token(id));
        rw.external_id = w.external_id;
        rw.frequency = w.frequency;
        raw.push_back(std::move(rw));
    }
    return raw;
}

} // namespace

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
        const std::string& tok = symbols_[i];
        if (tok == kBosToken || tok == kEosToken) {
            raise(ErrorCode::ParseError,
                  "reserved boundary token used as input symbol: " + tok);
        }
        if (!index_.emplace(tok, static_cast<std::int32_t>(i)).second) {
            raise(ErrorCode::ParseError, "duplicate symbol token: " + tok);
        }
    }
}

std::int32_t Alphabet::id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) raise(ErrorCode::UnknownSymbol, "unknown symbol: " + token);
    return it->second;
}

const std::string& Alphabet::token(std::int32_t id) const {
    if (id < 0 || id >= size()) {
        raise(ErrorCode::UnknownSymbol, "symbol id out of range: " + std::to_string(id));
    }
    return symbols_[static_cast<std::size_t>(id)];
}

std::string Alphabet::context_token(std::int32_t id) const {
    return id == boundary() ? std::string(kBosToken) : token(id);
}

std::string Alphabet::emission_token(std::int32_t id) const {
    return id == boundary() ? std::string(kEosToken) : token(id);
}

Lexicon parse_lexicon(const std::string& text, const LexiconFormat& format,
                      const std::string& provenance) {
    std::vector<RawWord> raw;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;

        const std::vector<std::string> fields = split(line, '\t');
        if (fields.size() > 3) {
            raise(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": too many tab-separated fields");
        }
        RawWord rw;
        if (format.compact) {
            rw.tokens = split_codepoints(fields[0]);
        } else {
            rw.tokens = split(fields[0], ' ');
        }
        for (const auto& tok : rw.tokens) {
            if (tok.empty()) {
                raise(ErrorCode::ParseError,
                      "line " + std::to_string(line_no) + ": empty symbol token");
            }
        }
        if (rw.tokens.empty()) {
            raise(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": empty word");
        }
        if (fields.size() >= 2) rw.external_id = fields[1];
        if (fields.size() == 3) {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(fields[2], &used);
                if (used != fields[2].size() || v < 0) throw std::invalid_argument("");
                rw.frequency = v;
            } catch (const std::exception&) {
                raise(ErrorCode::ParseError,
                      "line " + std::to_string(line_no) + ": bad frequency '" + fields[2] + "'");
            }
        }
        raw.push_back(std::move(rw));
    }
    if (raw.empty()) raise(ErrorCode::EmptyCorpus, "no words in input: " + provenance);
    return build_lexicon(std::move(raw), provenance);
}

Lexicon load_lexicon(const std::string& path, const LexiconFormat& format) {
    return parse_lexicon(read_file(path), format, path);
}

std::string format_lexicon(const Lexicon& lexicon) {
    std::ostringstream out;
    for (const Word& w : lexicon.words) {
        for (std::size_t t = 0; t < w.symbol_ids.size(); ++t) {
            if (t) out << ' ';
            out << lexicon.alphabet.token(w.symbol_ids[t]);
        }
        if (!w.external_id.empty() || w.frequency) {
            out << '\t' << w.external_id;
            if (w.frequency) out << '\t' << *w.frequency;
        }
        out << '\n';
    }
    return out.str();
}

void save_lexicon(const Lexicon& lexicon, const std::string& path) {
    write_file(path, format_lexicon(lexicon));
}

StripResult strip_symbols(const Lexicon& lexicon,
                          const std::unordered_set<std::string>& removable) {
    std::vector<RawWord> raw;
    std::size_t dropped = 0;
    std::vector<RawWord> source = lexicon_to_raw(lexicon);
    for (RawWord& rw : source) {
        std::vector<std::string> kept;
        kept.reserve(rw.tokens.size());
        for (auto& tok : rw.tokens) {
            if (removable.count(tok) == 0) kept.push_back(std::move(tok));
        }
        if (kept.empty()) {
            ++dropped;
            continue;
        }
        rw.tokens = std::move(kept);
        raw.push_back(std::move(rw));
    }
    StripResult result;
    result.dropped_words = dropped;
    if (raw.empty()) {
        result.lexicon.provenance = lexicon.provenance;
        return result;
    }
    result.lexicon = build_lexicon(std::move(raw), lexicon.provenance);
    return result;
}

Lexicon filter_min_frequency(const Lexicon& lexicon, std::int64_t threshold) {
    for (const Word& w : lexicon.words) {
        if (!w.frequency) {
            raise(ErrorCode::MissingFrequency,
                  "word without frequency (external id '" + w.external_id +
                  "'); frequency column required for filtering");
        }
    }
    std::vector<RawWord> raw;
    std::vector<RawWord> source = lexicon_to_raw(lexicon);
    for (RawWord& rw : source) {
        if (*rw.frequency >= threshold) raw.push_back(std::move(rw));
    }
    Lexicon out;
    out.provenance = lexicon.provenance;
    if (!raw.empty()) out = build_lexicon(std::move(raw), lexicon.provenance);
    out.provenance = lexicon.provenance;
    return out;
}

LabelTable parse_labels(const std::string& text, const std::string& origin) {
    LabelTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            raise(ErrorCode::ParseError,
                  origin + " line " + std::to_string(line_no) + ": expected 'id<TAB>label'");
        }
        auto [it, inserted] = table.emplace(fields[0], fields[1]);
        if (!inserted && it->second != fields[1]) {
            raise(ErrorCode::LabelConflict,
                  "conflicting labels for id '" + fields[0] + "': '" +
                  it->second + "' vs '" + fields[1] + "'");
        }
    }
    return table;
}

LabelTable load_labels(const std::string& path) {
    return parse_labels(read_file(path), path);
}

void save_labels(const LabelTable& labels, const std::string& path) {
    std::vector<std::pair<std::string, std::string>> rows(labels.begin(), labels.end());
    std::sort(rows.begin(), rows.end());
    std::ostringstream out;
    for (const auto& [id, label] : rows) out << id << '\t' << label << '\n';
    write_file(path, out.str());
}

std::unordered_map<std::string, std::string> load_symbol_map(const std::string& path) {
    std::unordered_map<std::string, std::string> map;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2) {
            raise(ErrorCode::ParseError,
                  path + " line " + std::to_string(line_no) + ": expected 'from,to'");
        }
        map[fields[0]] = fields[1];
    }
    return map;
}

} // namespace sublex
