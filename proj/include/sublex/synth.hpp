#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sublex/corpus.hpp"

namespace sublex {

// Generator description: a mixture of trigram sources. Each source's tables
// are either sampled from the hierarchical prior (the trained model family) or
// given explicitly per context.
struct SourceSpec {
    struct Source {
        std::string name;
        double weight = 1.0;
        std::vector<std::string> alphabet;   // symbol subset used by this source
        bool prior = true;
        double alpha0 = 1.0, alpha1 = 1.0, alpha2 = 1.0;
        // Explicit mode: context "u v" (tokens, "<s>" allowed) or "*" for a
        // default row; each row maps emissions (symbols or "</s>") to
        // probabilities summing to 1.
        std::map<std::string, std::map<std::string, double>> tables;
        // Termination guarantee: p <- (1-f) p + f EOS in every context.
        double eos_floor = 0.05;
    };

    std::vector<Source> sources;
    std::vector<std::string> alphabet;   // global inventory; defaults to the
                                         // union of source subsets in order

    static SourceSpec parse(const std::string& json_text);
    static SourceSpec load(const std::string& path);
};

struct SynthResult {
    Lexicon lexicon;                     // deduplicated by token sequence
    LabelTable labels;                   // surviving word id -> source name
    std::vector<std::int64_t> source_counts;   // draws per source, pre-dedup
    std::int64_t n_generated = 0;
    std::int64_t n_duplicates = 0;
};

SynthResult generate_corpus(const SourceSpec& spec, std::int64_t n_words,
                            std::uint64_t seed);

} // namespace sublex
