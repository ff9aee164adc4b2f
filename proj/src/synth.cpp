#include "sublex/synth.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "sublex/error.hpp"
#include "sublex/rng.hpp"

namespace sublex {

namespace {

using nlohmann::json;

constexpr std::int64_t kMaxWordLength = 10000;

// One source compiled to dense rows: contexts over (subset + BOS)^2, emissions
// over subset symbols followed by EOS.
struct CompiledSource {
    std::string name;
    double weight = 0.0;
    std::vector<std::int32_t> global_ids;            // subset index -> global id
    std::vector<std::vector<double>> rows;           // [u * C + v][emission]
    std::int32_t n_symbols = 0;
};

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

CompiledSource compile_source(const SourceSpec::Source& source, const Alphabet& global,
                              Rng& rng) {
    if (source.alphabet.empty()) {
        raise(ErrorCode::InvalidArgument, "source with empty alphabet subset");
    }
    if (source.eos_floor < 0.0 || source.eos_floor >= 1.0) {
        raise(ErrorCode::InvalidArgument, "eos_floor must lie in [0, 1)");
    }
    CompiledSource out;
    out.name = source.name;
    out.weight = source.weight;
    out.n_symbols = static_cast<std::int32_t>(source.alphabet.size());
    std::map<std::string, std::int32_t> local;
    for (const std::string& tok : source.alphabet) {
        if (!local.emplace(tok, static_cast<std::int32_t>(out.global_ids.size())).second) {
            raise(ErrorCode::InvalidArgument, "duplicate symbol in source subset: " + tok);
        }
        out.global_ids.push_back(global.id(tok));
    }
    const std::int32_t S = out.n_symbols;
    const std::size_t C = static_cast<std::size_t>(S) + 1;   // + BOS on the context axis
    const std::size_t E = static_cast<std::size_t>(S) + 1;   // + EOS on the emission axis
    out.rows.assign(C * C, {});

    if (source.prior) {
        // Same hierarchical construction the trained model assumes.
        std::vector<double> base0(E, source.alpha0 / static_cast<double>(E));
        const std::vector<double> p0 = rng.next_dirichlet(base0);
        std::vector<std::vector<double>> p1(C);
        for (std::size_t v = 0; v < C; ++v) {
            std::vector<double> a(E);
            for (std::size_t s = 0; s < E; ++s) a[s] = source.alpha1 * p0[s];
            p1[v] = rng.next_dirichlet(a);
        }
        for (std::size_t u = 0; u < C; ++u) {
            for (std::size_t v = 0; v < C; ++v) {
                std::vector<double> a(E);
                for (std::size_t s = 0; s < E; ++s) a[s] = source.alpha2 * p1[v][s];
                out.rows[u * C + v] = rng.next_dirichlet(a);
            }
        }
    } else {
        auto parse_row = [&](const std::map<std::string, double>& dist) {
            std::vector<double> row(E, 0.0);
            double total = 0.0;
            for (const auto& [tok, p] : dist) {
                if (p < 0.0) raise(ErrorCode::InvalidArgument, "negative probability in table");
                std::size_t s;
                if (tok == Alphabet::kEosToken) {
                    s = static_cast<std::size_t>(S);
                } else {
                    auto it = local.find(tok);
                    if (it == local.end()) {
                        raise(ErrorCode::UnknownSymbol,
                              "table emission outside source subset: " + tok);
                    }
                    s = static_cast<std::size_t>(it->second);
                }
                row[s] = p;
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                raise(ErrorCode::InvalidArgument, "table row must sum to 1");
            }
            return row;
        };
        auto ctx_id = [&](const std::string& tok) -> std::size_t {
            if (tok == Alphabet::kBosToken) return static_cast<std::size_t>(S);
            auto it = local.find(tok);
            if (it == local.end()) {
                raise(ErrorCode::UnknownSymbol, "table context outside source subset: " + tok);
            }
            return static_cast<std::size_t>(it->second);
        };
        std::vector<double> fallback;
        auto star = source.tables.find("*");
        if (star != source.tables.end()) fallback = parse_row(star->second);
        for (const auto& [key, dist] : source.tables) {
            if (key == "*") continue;
            const std::vector<std::string> ctx = split_tokens(key);
            if (ctx.size() != 2) {
                raise(ErrorCode::InvalidArgument, "table context key must be two tokens: " + key);
            }
            out.rows[ctx_id(ctx[0]) * C + ctx_id(ctx[1])] = parse_row(dist);
        }
        for (std::vector<double>& row : out.rows) {
            if (row.empty()) {
                if (fallback.empty()) {
                    raise(ErrorCode::InvalidArgument,
                          "explicit tables leave contexts undefined and give no '*' default");
                }
                row = fallback;
            }
        }
    }

    double max_eos = 0.0;
    for (std::vector<double>& row : out.rows) {
        if (source.eos_floor > 0.0) {
            for (double& p : row) p *= 1.0 - source.eos_floor;
            row[static_cast<std::size_t>(S)] += source.eos_floor;
        }
        max_eos = std::max(max_eos, row[static_cast<std::size_t>(S)]);
    }
    if (max_eos == 0.0) {
        raise(ErrorCode::NonTerminating,
              "source '" + source.name + "' has zero EOS probability in every context");
    }
    return out;
}

} // namespace

SourceSpec SourceSpec::parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad source spec JSON: ") + e.what());
    }
    SourceSpec spec;
    try {
        if (!doc.contains("sources") || !doc["sources"].is_array() || doc["sources"].empty()) {
            raise(ErrorCode::ParseError, "source spec needs a nonempty 'sources' array");
        }
        if (doc.contains("alphabet")) {
            spec.alphabet = doc["alphabet"].get<std::vector<std::string>>();
        }
        for (const json& s : doc["sources"]) {
            Source source;
            source.name = s.value("name", "source_" + std::to_string(spec.sources.size()));
            source.weight = s.value("weight", 1.0);
            source.alphabet = s.at("alphabet").get<std::vector<std::string>>();
            source.eos_floor = s.value("eos_floor", 0.05);
            if (s.contains("tables") && !s["tables"].is_string()) {
                source.prior = false;
                for (auto it = s["tables"].begin(); it != s["tables"].end(); ++it) {
                    source.tables[it.key()] =
                        it.value().get<std::map<std::string, double>>();
                }
            } else {
                source.prior = true;
                if (s.contains("concentrations")) {
                    const json& conc = s["concentrations"];
                    source.alpha0 = conc.value("alpha0", 1.0);
                    source.alpha1 = conc.value("alpha1", 1.0);
                    source.alpha2 = conc.value("alpha2", 1.0);
                }
            }
            spec.sources.push_back(std::move(source));
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad source spec JSON: ") + e.what());
    }
    double wsum = 0.0;
    for (const Source& s : spec.sources) {
        if (s.weight <= 0.0) raise(ErrorCode::InvalidArgument, "source weights must be positive");
        wsum += s.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        raise(ErrorCode::InvalidArgument, "source weights must sum to 1");
    }
    if (spec.alphabet.empty()) {
        // Union of subsets in first-appearance order.
        std::map<std::string, bool> seen;
        for (const Source& s : spec.sources) {
            for (const std::string& tok : s.alphabet) {
                if (seen.emplace(tok, true).second) spec.alphabet.push_back(tok);
            }
        }
    }
    return spec;
}

SourceSpec SourceSpec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

SynthResult generate_corpus(const SourceSpec& spec, std::int64_t n_words,
                            std::uint64_t seed) {
    if (n_words < 1) raise(ErrorCode::InvalidArgument, "n_words must be >= 1");
    SynthResult result;
    result.lexicon.alphabet = Alphabet(spec.alphabet);
    result.lexicon.provenance = "synthetic";

    Rng rng(seed);
    std::vector<CompiledSource> sources;
    std::vector<double> weights;
    for (const SourceSpec::Source& s : spec.sources) {
        sources.push_back(compile_source(s, result.lexicon.alphabet, rng));
        weights.push_back(s.weight);
    }
    result.source_counts.assign(sources.size(), 0);

    std::map<std::vector<std::int32_t>, bool> seen;
    for (std::int64_t i = 0; i < n_words; ++i) {
        const std::size_t which = rng.next_categorical(weights);
        ++result.source_counts[which];
        const CompiledSource& src = sources[which];
        const std::size_t C = static_cast<std::size_t>(src.n_symbols) + 1;
        const std::size_t bos = static_cast<std::size_t>(src.n_symbols);
        std::vector<std::int32_t> symbols;
        // Empty draws (immediate EOS) are redrawn: lexicon words are nonempty.
        int empty_draws = 0;
        while (symbols.empty()) {
            if (++empty_draws > 10000) {
                raise(ErrorCode::NonTerminating,
                      "source '" + src.name + "' only generates empty words");
            }
            std::size_t u = bos, v = bos;
            for (;;) {
                const std::size_t s = rng.next_categorical(src.rows[u * C + v]);
                if (s == bos) break;   // EOS
                symbols.push_back(src.global_ids[s]);
                if (static_cast<std::int64_t>(symbols.size()) > kMaxWordLength) {
                    raise(ErrorCode::NonTerminating,
                          "word exceeded the generation length cap");
                }
                u = v;
                v = s;
            }
        }
        ++result.n_generated;
        if (!seen.emplace(symbols, true).second) {
            ++result.n_duplicates;
            continue;
        }
        Word word;
        word.symbol_ids = std::move(symbols);
        std::ostringstream id;
        id << 'w' << std::setw(6) << std::setfill('0') << i;
        word.external_id = id.str();
        result.labels.emplace(word.external_id, src.name);
        result.lexicon.words.push_back(std::move(word));
    }
    return result;
}

} // namespace sublex
