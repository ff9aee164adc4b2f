#include "sublex/represent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sublex/error.hpp"
#include "sublex/kernels.hpp"
#include "sublex/mathutil.hpp"

namespace sublex {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// KMP transition table for the core pattern; state = symbols matched so far.
// States 0..m inclusive; delta(m, s) continues through the failure function
// so overlapping future matches stay reachable.
std::vector<std::vector<std::int32_t>> kmp_delta(const std::vector<std::int32_t>& core,
                                                 std::int32_t n_symbols) {
    const std::size_t m = core.size();
    std::vector<std::size_t> fail(m + 1, 0);
    for (std::size_t q = 1; q < m; ++q) {
        std::size_t f = fail[q];
        while (f > 0 && core[f] != core[q]) f = fail[f];
        fail[q + 1] = (core[f] == core[q]) ? f + 1 : 0;
    }
    std::vector<std::vector<std::int32_t>> delta(m + 1,
        std::vector<std::int32_t>(static_cast<std::size_t>(n_symbols)));
    for (std::size_t q = 0; q <= m; ++q) {
        for (std::int32_t s = 0; s < n_symbols; ++s) {
            std::size_t f = q;
            if (f == m) f = fail[m];
            while (f > 0 && core[f] != s) f = fail[f];
            delta[q][static_cast<std::size_t>(s)] =
                (f < m && core[f] == s) ? static_cast<std::int32_t>(f + 1) : 0;
        }
    }
    return delta;
}

struct LogWeights {
    std::vector<double> log_w;   // log cluster weights
    int nonzero = 0;
};

LogWeights log_cluster_weights(const ModelPosterior& model) {
    LogWeights lw;
    const std::vector<double> w = cluster_weights(model);
    lw.log_w.resize(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        lw.log_w[k] = w[k] > 0.0 ? std::log(w[k]) : kNegInf;
        if (w[k] > 0.0) ++lw.nonzero;
    }
    return lw;
}

// Eq.-1 style log ratio from per-cluster log probabilities.
double log_ratio_score(const std::vector<double>& log_p, const LogWeights& lw, int cluster) {
    const std::size_t K = log_p.size();
    // Renormalize the weights over k' != cluster.
    std::vector<double> terms;
    terms.reserve(K - 1);
    std::vector<double> others;
    others.reserve(K - 1);
    for (std::size_t k = 0; k < K; ++k) {
        if (static_cast<int>(k) == cluster) continue;
        others.push_back(lw.log_w[k]);
    }
    const double log_norm = logsumexp(others);
    std::size_t j = 0;
    for (std::size_t k = 0; k < K; ++k) {
        if (static_cast<int>(k) == cluster) continue;
        terms.push_back(others[j] - log_norm + log_p[k]);
        ++j;
    }
    return log_p[static_cast<std::size_t>(cluster)] - logsumexp(terms);
}

} // namespace

Substring Substring::parse(const std::vector<std::string>& tokens, const Alphabet& alphabet) {
    if (tokens.empty()) raise(ErrorCode::InvalidArgument, "empty substring");
    if (tokens.size() > 8) raise(ErrorCode::InvalidArgument, "substring longer than 8 tokens");
    Substring sub;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (tok == Alphabet::kBosToken) {
            if (i != 0) raise(ErrorCode::InvalidArgument, "BOS marker must be leading");
            sub.bos_anchor = true;
        } else if (tok == Alphabet::kEosToken) {
            if (i + 1 != tokens.size()) {
                raise(ErrorCode::InvalidArgument, "EOS marker must be trailing");
            }
            sub.eos_anchor = true;
        } else {
            sub.core.push_back(alphabet.id(tok));
        }
    }
    return sub;
}

std::string Substring::to_string(const Alphabet& alphabet) const {
    std::string out;
    auto append = [&](const std::string& tok) {
        if (!out.empty()) out += ' ';
        out += tok;
    };
    if (bos_anchor) append(Alphabet::kBosToken);
    for (std::int32_t s : core) append(alphabet.token(s));
    if (eos_anchor) append(Alphabet::kEosToken);
    return out;
}

OccurrenceResult occurrence_log_prob(const Substring& substring, int cluster,
                                     const ModelPosterior& model,
                                     const PredictiveCache& cache,
                                     double tail_tolerance, int length_cap) {
    if (cluster < 0 || cluster >= model.k_max) {
        raise(ErrorCode::InvalidArgument, "cluster index out of range");
    }
    const std::int32_t S = model.alphabet.size();
    for (std::int32_t s : substring.core) {
        if (s < 0 || s >= S) raise(ErrorCode::UnknownSymbol, "substring symbol id out of range");
    }
    const std::size_t m = substring.core.size();
    OccurrenceResult result;

    // Core already matched before any emission: occurs in every word.
    if (m == 0 && !substring.eos_anchor) {
        result.log_prob = 0.0;
        return result;
    }

    const std::size_t C = static_cast<std::size_t>(model.ctx_dim());
    const std::size_t E = static_cast<std::size_t>(model.emit_dim());
    const std::int32_t bos = model.bos();
    const auto delta = substring.bos_anchor
                           ? std::vector<std::vector<std::int32_t>>{}
                           : kmp_delta(substring.core, S);

    // Mass over (match state, prev2, prev1); the accept state is absorbing.
    const std::size_t n_states = (m + 1) * C * C;
    std::vector<double> mass(n_states, 0.0), next(n_states, 0.0), scratch(E);
    auto at = [&](std::size_t q, std::size_t u, std::size_t v) {
        return (q * C + u) * C + v;
    };
    mass[at(0, static_cast<std::size_t>(bos), static_cast<std::size_t>(bos))] = 1.0;

    double accept = 0.0;
    double alive = 1.0;
    int steps = 0;
    while (alive >= tail_tolerance && steps < length_cap) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t q = 0; q <= m; ++q) {
            for (std::size_t u = 0; u < C; ++u) {
                for (std::size_t v = 0; v < C; ++v) {
                    const double p = mass[at(q, u, v)];
                    if (p == 0.0) continue;
                    const double* row = cache.row(
                        cluster, {static_cast<std::int32_t>(u), static_cast<std::int32_t>(v)});
                    kernels::scale(scratch.data(), row, p, E);
                    // EOS: accepts only when the core ends at the word edge.
                    if (substring.eos_anchor && q == m) accept += scratch[static_cast<std::size_t>(S)];
                    for (std::int32_t s = 0; s < S; ++s) {
                        std::int32_t q2;
                        if (substring.bos_anchor) {
                            // Anchored: a mismatch (or any symbol past an
                            // EOS-anchored core) can never match again.
                            if (q < m && substring.core[q] == s) {
                                q2 = static_cast<std::int32_t>(q) + 1;
                            } else {
                                continue;
                            }
                        } else {
                            q2 = delta[q][static_cast<std::size_t>(s)];
                        }
                        if (static_cast<std::size_t>(q2) == m && !substring.eos_anchor) {
                            accept += scratch[static_cast<std::size_t>(s)];
                        } else {
                            next[at(static_cast<std::size_t>(q2), v, static_cast<std::size_t>(s))] +=
                                scratch[static_cast<std::size_t>(s)];
                        }
                    }
                }
            }
        }
        mass.swap(next);
        alive = kernels::sum(mass.data(), n_states);
        ++steps;
    }

    result.residual = alive;
    result.steps = steps;
    result.capped = alive >= tail_tolerance;
    if (accept > 0.0) {
        result.log_prob = std::log(accept);
    } else {
        result.log_prob = kNegInf;
        result.zero = true;
    }
    return result;
}

OccurrenceResult occurrence_log_prob(const Substring& substring, int cluster,
                                     const ModelPosterior& model,
                                     double tail_tolerance, int length_cap) {
    PredictiveCache cache(model);
    return occurrence_log_prob(substring, cluster, model, cache, tail_tolerance, length_cap);
}

double representativeness(const Substring& substring, int cluster,
                          const ModelPosterior& model, const PredictiveCache& cache) {
    const LogWeights lw = log_cluster_weights(model);
    if (lw.nonzero < 2) {
        raise(ErrorCode::Unsupported,
              "representativeness requires at least 2 clusters with nonzero weight");
    }
    std::vector<double> log_p(static_cast<std::size_t>(model.k_max));
    for (int k = 0; k < model.k_max; ++k) {
        log_p[static_cast<std::size_t>(k)] =
            occurrence_log_prob(substring, k, model, cache, 1e-12, 100).log_prob;
    }
    return log_ratio_score(log_p, lw, cluster);
}

double representativeness(const Substring& substring, int cluster,
                          const ModelPosterior& model) {
    PredictiveCache cache(model);
    return representativeness(substring, cluster, model, cache);
}

RepresentativenessReport rank_ngrams(const ModelPosterior& model, const Lexicon& lexicon,
                                     int n_lo, int n_hi, std::int64_t min_freq, int cluster,
                                     bool token_positions) {
    if (cluster < 0 || cluster >= model.k_max) {
        raise(ErrorCode::InvalidArgument, "cluster index out of range");
    }
    if (n_lo < 1 || n_hi < n_lo || n_hi > 8) {
        raise(ErrorCode::InvalidArgument, "bad n-gram length range");
    }
    const std::int32_t kBosId = -1, kEosId = -2;

    struct VecHash {
        std::size_t operator()(const std::vector<std::int32_t>& v) const {
            std::size_t h = 0;
            for (std::int32_t x : v) {
                h = h * 1000003u + static_cast<std::size_t>(static_cast<std::uint32_t>(x) + 7);
            }
            return h;
        }
    };
    std::unordered_map<std::vector<std::int32_t>, std::int64_t, VecHash> freq;

    std::vector<std::int32_t> extended;
    std::set<std::vector<std::int32_t>> in_word;
    for (const Word& word : lexicon.words) {
        extended.clear();
        extended.push_back(kBosId);
        for (std::int32_t s : word.symbol_ids) {
            if (s < 0 || s >= model.alphabet.size()) {
                raise(ErrorCode::UnknownSymbol, "lexicon symbol id out of range for model");
            }
            extended.push_back(s);
        }
        extended.push_back(kEosId);
        in_word.clear();
        for (int n = n_lo; n <= n_hi; ++n) {
            if (static_cast<std::size_t>(n) > extended.size()) break;
            for (std::size_t start = 0; start + static_cast<std::size_t>(n) <= extended.size();
                 ++start) {
                std::vector<std::int32_t> gram(extended.begin() + static_cast<std::ptrdiff_t>(start),
                                               extended.begin() + static_cast<std::ptrdiff_t>(start + static_cast<std::size_t>(n)));
                if (token_positions) {
                    ++freq[std::move(gram)];
                } else {
                    in_word.insert(std::move(gram));
                }
            }
        }
        for (const auto& gram : in_word) ++freq[gram];
    }

    const LogWeights lw = log_cluster_weights(model);
    if (lw.nonzero < 2) {
        raise(ErrorCode::Unsupported,
              "n-gram ranking requires at least 2 clusters with nonzero weight");
    }
    PredictiveCache cache(model);

    RepresentativenessReport report;
    report.cluster = cluster;
    report.n_lo = n_lo;
    report.n_hi = n_hi;
    report.min_freq = min_freq;
    for (const auto& [gram, count] : freq) {
        if (count < min_freq) continue;
        Substring sub;
        for (std::int32_t x : gram) {
            if (x == kBosId) sub.bos_anchor = true;
            else if (x == kEosId) sub.eos_anchor = true;
            else sub.core.push_back(x);
        }
        std::vector<double> log_p(static_cast<std::size_t>(model.k_max));
        for (int k = 0; k < model.k_max; ++k) {
            log_p[static_cast<std::size_t>(k)] =
                occurrence_log_prob(sub, k, model, cache, 1e-12, 100).log_prob;
        }
        ReportRow row;
        row.item = sub.to_string(model.alphabet);
        row.n = static_cast<int>(gram.size());
        row.corpus_type_freq = count;
        row.scores.resize(static_cast<std::size_t>(model.k_max));
        for (int k = 0; k < model.k_max; ++k) {
            row.scores[static_cast<std::size_t>(k)] = log_ratio_score(log_p, lw, k);
        }
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(),
              [cluster](const ReportRow& a, const ReportRow& b) {
                  const double sa = a.scores[static_cast<std::size_t>(cluster)];
                  const double sb = b.scores[static_cast<std::size_t>(cluster)];
                  if (sa != sb) return sa > sb;
                  return a.item < b.item;
              });
    return report;
}

std::string report_to_csv(const RepresentativenessReport& report) {
    std::ostringstream out;
    out.precision(12);
    const std::size_t K = report.rows.empty() ? 0 : report.rows.front().scores.size();
    out << "item,n,corpus_type_freq";
    for (std::size_t k = 0; k < K; ++k) out << ",score_cluster_" << k;
    out << '\n';
    for (const ReportRow& row : report.rows) {
        std::string item = row.item;
        const bool quote = item.find(',') != std::string::npos ||
                           item.find('"') != std::string::npos;
        if (quote) {
            std::string quoted = "\"";
            for (char c : item) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            quoted += '"';
            item = quoted;
        }
        out << item << ',' << row.n << ',' << row.corpus_type_freq;
        for (double s : row.scores) out << ',' << s;
        out << '\n';
    }
    return out.str();
}

namespace {

using nlohmann::json;

// NFA over pattern slots; state = (slot index, repetitions consumed).
struct PatternNfa {
    const std::vector<PatternSlot>& slots;
    bool unanchored_start;
    int n_symbols;

    int encode(std::size_t j, int r) const { return static_cast<int>(j) * 16 + r; }
    static constexpr int kStart = -1;    // pre-pattern "not yet started" state
    int accept() const { return encode(slots.size(), 0); }

    void closure(std::set<int>& states) const {
        // Epsilon edges: (j, r >= lo_j) -> (j+1, 0); Start -> (0, 0).
        bool changed = true;
        while (changed) {
            changed = false;
            std::set<int> add;
            for (int st : states) {
                if (st == kStart) {
                    if (states.count(encode(0, 0)) == 0) add.insert(encode(0, 0));
                    continue;
                }
                const std::size_t j = static_cast<std::size_t>(st / 16);
                const int r = st % 16;
                if (j < slots.size()) {
                    const PatternSlot& slot = slots[j];
                    const int lo = slot.kind == PatternSlot::Kind::Class ? slot.lo : 1;
                    if (r >= lo && states.count(encode(j + 1, 0)) == 0) {
                        add.insert(encode(j + 1, 0));
                    }
                }
            }
            if (!add.empty()) {
                states.insert(add.begin(), add.end());
                changed = true;
            }
        }
    }

    std::set<int> step(const std::set<int>& states, std::int32_t symbol) const {
        std::set<int> out;
        for (int st : states) {
            if (st == kStart) {
                if (unanchored_start) out.insert(kStart);
                continue;
            }
            const std::size_t j = static_cast<std::size_t>(st / 16);
            const int r = st % 16;
            if (j >= slots.size()) continue;   // accept state consumes nothing
            const PatternSlot& slot = slots[j];
            const int hi = slot.kind == PatternSlot::Kind::Class ? slot.hi : 1;
            if (r >= hi) continue;
            const bool member =
                slot.kind == PatternSlot::Kind::Fixed
                    ? slot.fixed_symbol == symbol
                    : std::find(slot.symbols.begin(), slot.symbols.end(), symbol) !=
                          slot.symbols.end();
            if (member) out.insert(encode(j, r + 1));
        }
        closure(out);
        return out;
    }
};

// Subset-constructed DFA so every concrete matching prefix is counted once.
struct PatternDfa {
    std::vector<std::vector<int>> trans;   // [state][symbol] -> state or -1 (dead)
    std::vector<bool> accepting;
    int start = 0;
};

PatternDfa build_dfa(const std::vector<PatternSlot>& slots, bool anchored, int n_symbols) {
    PatternNfa nfa{slots, !anchored, n_symbols};
    std::map<std::set<int>, int> ids;
    std::vector<std::set<int>> subsets;
    PatternDfa dfa;

    std::set<int> start;
    if (anchored) start.insert(nfa.encode(0, 0));
    else start.insert(PatternNfa::kStart);
    nfa.closure(start);
    ids.emplace(start, 0);
    subsets.push_back(start);

    for (std::size_t q = 0; q < subsets.size(); ++q) {
        dfa.trans.emplace_back(static_cast<std::size_t>(n_symbols), -1);
        dfa.accepting.push_back(subsets[q].count(nfa.accept()) != 0);
        for (std::int32_t s = 0; s < n_symbols; ++s) {
            std::set<int> nxt = nfa.step(subsets[q], s);
            if (nxt.empty()) continue;
            auto [it, inserted] = ids.emplace(nxt, static_cast<int>(subsets.size()));
            if (inserted) subsets.push_back(std::move(nxt));
            dfa.trans[q][static_cast<std::size_t>(s)] = it->second;
        }
    }
    // trans rows for states discovered last:
    while (dfa.trans.size() < subsets.size()) {
        const std::size_t q = dfa.trans.size();
        dfa.trans.emplace_back(static_cast<std::size_t>(n_symbols), -1);
        dfa.accepting.push_back(subsets[q].count(nfa.accept()) != 0);
        for (std::int32_t s = 0; s < n_symbols; ++s) {
            std::set<int> nxt = nfa.step(subsets[q], s);
            if (nxt.empty()) continue;
            auto [it, inserted] = ids.emplace(nxt, static_cast<int>(subsets.size()));
            if (inserted) subsets.push_back(std::move(nxt));
            dfa.trans[q][static_cast<std::size_t>(s)] = it->second;
        }
    }
    return dfa;
}

// Total model probability of word prefixes accepted by the DFA (first-match
// absorption), per cluster.
std::vector<double> prefix_match_prob(const PatternDfa& dfa, const ModelPosterior& model,
                                      const PredictiveCache& cache,
                                      double tail_tolerance, int length_cap) {
    const std::int32_t S = model.alphabet.size();
    const std::size_t C = static_cast<std::size_t>(model.ctx_dim());
    const std::size_t Q = dfa.trans.size();
    const std::int32_t bos = model.bos();
    std::vector<double> out(static_cast<std::size_t>(model.k_max), 0.0);
    for (int k = 0; k < model.k_max; ++k) {
        std::vector<double> mass(Q * C * C, 0.0), next(Q * C * C, 0.0);
        auto at = [&](std::size_t q, std::size_t u, std::size_t v) {
            return (q * C + u) * C + v;
        };
        double accept = 0.0;
        if (dfa.accepting[static_cast<std::size_t>(dfa.start)]) {
            // Pattern matches the empty prefix.
            out[static_cast<std::size_t>(k)] = 1.0;
            continue;
        }
        mass[at(static_cast<std::size_t>(dfa.start), static_cast<std::size_t>(bos),
                static_cast<std::size_t>(bos))] = 1.0;
        double alive = 1.0;
        int steps = 0;
        while (alive >= tail_tolerance && steps < length_cap) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t q = 0; q < Q; ++q) {
                for (std::size_t u = 0; u < C; ++u) {
                    for (std::size_t v = 0; v < C; ++v) {
                        const double p = mass[at(q, u, v)];
                        if (p == 0.0) continue;
                        const double* row = cache.row(
                            k, {static_cast<std::int32_t>(u), static_cast<std::int32_t>(v)});
                        // EOS ends the word without a matching prefix.
                        for (std::int32_t s = 0; s < S; ++s) {
                            const int q2 = dfa.trans[q][static_cast<std::size_t>(s)];
                            if (q2 < 0) continue;
                            const double pm = p * row[static_cast<std::size_t>(s)];
                            if (dfa.accepting[static_cast<std::size_t>(q2)]) {
                                accept += pm;
                            } else {
                                next[at(static_cast<std::size_t>(q2), v,
                                        static_cast<std::size_t>(s))] += pm;
                            }
                        }
                    }
                }
            }
            mass.swap(next);
            alive = kernels::sum(mass.data(), mass.size());
            ++steps;
        }
        out[static_cast<std::size_t>(k)] = accept;
    }
    return out;
}

} // namespace

PatternQuery PatternQuery::parse(const std::string& json_text,
                                 const std::map<std::string, std::vector<std::string>>& classes,
                                 const Alphabet& alphabet) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad pattern JSON: ") + e.what());
    }
    PatternQuery query;
    query.anchored = doc.value("anchored", true);
    int n_targets = 0;
    auto resolve_class = [&](const std::string& name) {
        auto it = classes.find(name);
        if (it == classes.end()) {
            raise(ErrorCode::InvalidArgument, "undefined symbol class: " + name);
        }
        if (it->second.empty()) {
            raise(ErrorCode::InvalidArgument, "empty symbol class: " + name);
        }
        std::vector<std::int32_t> ids;
        ids.reserve(it->second.size());
        for (const std::string& tok : it->second) ids.push_back(alphabet.id(tok));
        return ids;
    };
    if (!doc.contains("slots") || !doc["slots"].is_array() || doc["slots"].empty()) {
        raise(ErrorCode::ParseError, "pattern needs a nonempty 'slots' array");
    }
    for (const json& s : doc["slots"]) {
        PatternSlot slot;
        if (s.contains("token")) {
            slot.kind = PatternSlot::Kind::Fixed;
            slot.fixed_symbol = alphabet.id(s["token"].get<std::string>());
        } else if (s.contains("target")) {
            slot.kind = PatternSlot::Kind::Target;
            slot.symbols = resolve_class(s["target"].get<std::string>());
            ++n_targets;
        } else if (s.contains("class")) {
            slot.kind = PatternSlot::Kind::Class;
            slot.symbols = resolve_class(s["class"].get<std::string>());
            slot.lo = s.value("min", 1);
            slot.hi = s.value("max", slot.lo);
        } else {
            raise(ErrorCode::ParseError, "slot needs 'token', 'class', or 'target'");
        }
        if (slot.kind == PatternSlot::Kind::Class &&
            (slot.lo < 0 || slot.hi < slot.lo || slot.hi > 8)) {
            raise(ErrorCode::InvalidArgument, "repetition bounds must satisfy 0 <= min <= max <= 8");
        }
        query.slots.push_back(std::move(slot));
    }
    if (n_targets != 1) {
        raise(ErrorCode::InvalidArgument, "pattern must contain exactly one TARGET slot");
    }
    return query;
}

PatternConditional pattern_conditional(const PatternQuery& pattern, const ModelPosterior& model,
                                       double tail_tolerance, int length_cap) {
    std::size_t target_index = 0;
    for (std::size_t j = 0; j < pattern.slots.size(); ++j) {
        if (pattern.slots[j].kind == PatternSlot::Kind::Target) target_index = j;
    }
    const std::vector<std::int32_t>& fillers = pattern.slots[target_index].symbols;
    if (fillers.empty()) raise(ErrorCode::InvalidArgument, "empty TARGET class");

    PredictiveCache cache(model);
    PatternConditional result;
    result.fillers = fillers;
    const std::size_t K = static_cast<std::size_t>(model.k_max);
    std::vector<std::vector<double>> raw(K, std::vector<double>(fillers.size(), 0.0));
    for (std::size_t f = 0; f < fillers.size(); ++f) {
        std::vector<PatternSlot> slots = pattern.slots;
        PatternSlot fixed;
        fixed.kind = PatternSlot::Kind::Fixed;
        fixed.fixed_symbol = fillers[f];
        slots[target_index] = fixed;
        const PatternDfa dfa = build_dfa(slots, pattern.anchored, model.alphabet.size());
        const std::vector<double> probs =
            prefix_match_prob(dfa, model, cache, tail_tolerance, length_cap);
        for (std::size_t k = 0; k < K; ++k) raw[k][f] = probs[k];
    }

    bool any = false;
    for (std::size_t k = 0; k < K; ++k) {
        const double total = kernels::sum(raw[k].data(), raw[k].size());
        if (total > 0.0) any = true;
    }
    if (!any) raise(ErrorCode::DegenerateQuery, "pattern has zero probability in all clusters");
    result.conditional.assign(K, std::vector<double>(fillers.size(), 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        const double total = kernels::sum(raw[k].data(), raw[k].size());
        if (total <= 0.0) {
            raise(ErrorCode::DegenerateQuery,
                  "pattern has zero probability in cluster " + std::to_string(k));
        }
        for (std::size_t f = 0; f < fillers.size(); ++f) {
            result.conditional[k][f] = raw[k][f] / total;
        }
    }

    result.scores.assign(K, std::vector<double>(fillers.size(), 0.0));
    if (model.k_max >= 2) {
        const LogWeights lw = log_cluster_weights(model);
        if (lw.nonzero >= 2) {
            std::vector<double> log_p(K);
            for (std::size_t f = 0; f < fillers.size(); ++f) {
                for (std::size_t k = 0; k < K; ++k) {
                    log_p[k] = result.conditional[k][f] > 0.0
                                   ? std::log(result.conditional[k][f])
                                   : kNegInf;
                }
                for (std::size_t k = 0; k < K; ++k) {
                    result.scores[k][f] = log_ratio_score(log_p, lw, static_cast<int>(k));
                }
            }
        }
    }
    return result;
}

std::map<std::string, std::vector<std::string>> parse_classes(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad class definition JSON: ") + e.what());
    }
    if (!doc.is_object()) raise(ErrorCode::ParseError, "class definitions must be a JSON object");
    std::map<std::string, std::vector<std::string>> classes;
    try {
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            classes[it.key()] = it.value().get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad class definition JSON: ") + e.what());
    }
    return classes;
}

std::map<std::string, std::vector<std::string>> load_classes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_classes(ss.str());
}

} // namespace sublex
