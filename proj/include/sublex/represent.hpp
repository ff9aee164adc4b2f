#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sublex/corpus.hpp"
#include "sublex/phonomodel.hpp"

namespace sublex {

// Contiguous query string: optional leading BOS anchor, input symbols, optional
// trailing EOS anchor. The core (symbol part) may be empty only when at least
// one anchor is present.
struct Substring {
    bool bos_anchor = false;
    bool eos_anchor = false;
    std::vector<std::int32_t> core;   // input symbol ids

    // Parses space-separated tokens, "<s>" / "</s>" as anchors.
    static Substring parse(const std::vector<std::string>& tokens, const Alphabet& alphabet);

    std::size_t length() const {
        return core.size() + (bos_anchor ? 1 : 0) + (eos_anchor ? 1 : 0);
    }
    std::string to_string(const Alphabet& alphabet) const;
};

struct OccurrenceResult {
    double log_prob = 0.0;        // log P(substring occurs in a word of cluster k)
    bool zero = false;            // P == 0; log_prob is -inf
    double residual = 0.0;        // un-terminated probability mass when the DP stopped
    int steps = 0;
    bool capped = false;          // length cap reached with residual >= tolerance
};

OccurrenceResult occurrence_log_prob(const Substring& substring, int cluster,
                                     const ModelPosterior& model,
                                     double tail_tolerance = 1e-12,
                                     int length_cap = 100);

// Shared-cache variant for batch scoring.
OccurrenceResult occurrence_log_prob(const Substring& substring, int cluster,
                                     const ModelPosterior& model,
                                     const PredictiveCache& cache,
                                     double tail_tolerance, int length_cap);

// R(x,k) = log P(..x..|k) - log sum_{k'!=k} P(..x..|k') w_{k'}, with the
// weights renormalized over k' != k. Natural-log units.
double representativeness(const Substring& substring, int cluster,
                          const ModelPosterior& model);
double representativeness(const Substring& substring, int cluster,
                          const ModelPosterior& model, const PredictiveCache& cache);

struct ReportRow {
    std::string item;
    int n = 0;                        // token count, anchors included
    std::int64_t corpus_type_freq = 0;
    std::vector<double> scores;       // per cluster
};

struct RepresentativenessReport {
    std::vector<ReportRow> rows;      // sorted descending by score for `cluster`
    int cluster = 0;
    int n_lo = 1, n_hi = 3;
    std::int64_t min_freq = 10;
};

// Candidate substrings are enumerated from the lexicon (lengths in
// [n_lo, n_hi], BOS/EOS-edged included) and filtered by the number of distinct
// word types containing them. When `token_positions` is set, occurrences are
// counted per position instead of per word type.
RepresentativenessReport rank_ngrams(const ModelPosterior& model, const Lexicon& lexicon,
                                     int n_lo, int n_hi, std::int64_t min_freq, int cluster,
                                     bool token_positions = false);

std::string report_to_csv(const RepresentativenessReport& report);

// Bounded-wildcard pattern: a concatenation of slots, exactly one of which is
// the TARGET slot whose conditional filler distribution is requested.
struct PatternSlot {
    enum class Kind { Fixed, Class, Target };
    Kind kind = Kind::Fixed;
    std::int32_t fixed_symbol = 0;         // Kind::Fixed
    std::vector<std::int32_t> symbols;     // Kind::Class / Kind::Target members
    int lo = 1, hi = 1;                    // repetition bounds (Class only)
};

struct PatternQuery {
    std::vector<PatternSlot> slots;
    bool anchored = true;   // pattern starts at BOS

    static PatternQuery parse(const std::string& json_text,
                              const std::map<std::string, std::vector<std::string>>& classes,
                              const Alphabet& alphabet);
};

struct PatternConditional {
    std::vector<std::int32_t> fillers;             // TARGET class members
    std::vector<std::vector<double>> conditional;  // [cluster][filler], each sums to 1
    std::vector<std::vector<double>> scores;       // per-filler representativeness
};

PatternConditional pattern_conditional(const PatternQuery& pattern, const ModelPosterior& model,
                                       double tail_tolerance = 1e-12, int length_cap = 100);

// Named symbol classes from a JSON object {"name": ["tok", ...], ...}.
std::map<std::string, std::vector<std::string>> load_classes(const std::string& path);
std::map<std::string, std::vector<std::string>> parse_classes(const std::string& json_text);

} // namespace sublex
