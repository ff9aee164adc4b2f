#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sublex/corpus.hpp"

namespace sublex {

// Trigram context: the two preceding symbols, each an input symbol id or the
// BOS boundary. Word-initial contexts are (BOS,BOS), then (BOS,x1).
struct ContextKey {
    std::int32_t prev2 = 0;
    std::int32_t prev1 = 0;

    bool operator==(const ContextKey&) const = default;
};

inline std::uint32_t pack_context(ContextKey ctx, std::int32_t ctx_dim) {
    return static_cast<std::uint32_t>(ctx.prev2) * static_cast<std::uint32_t>(ctx_dim)
         + static_cast<std::uint32_t>(ctx.prev1);
}

struct CountRow {
    std::vector<double> counts;   // length emit_dim; index alphabet.size() = EOS
    double total = 0.0;
};

// One cluster's expected-count hierarchy. Only contexts with positive total
// are stored; queries for absent contexts fall through to the backoff layer.
struct ClusterTable {
    std::unordered_map<std::uint32_t, CountRow> trigram;  // key: packed (prev2,prev1)
    std::unordered_map<std::int32_t, CountRow> bigram;    // key: prev1
    CountRow unigram;                                      // may be empty (all-zero)
};

struct TrainMeta {
    double final_elbo = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    int restart_index = 0;
};

// Trained variational posterior. Immutable after training; all query
// operations are read-only.
struct ModelPosterior {
    Alphabet alphabet;
    int k_max = 1;
    std::vector<double> stick_a;   // k_max - 1 Beta parameters
    std::vector<double> stick_b;
    std::vector<ClusterTable> tables;   // size k_max
    double alpha0 = 1.0;      // unigram layer concentration
    double alpha1 = 1.0;      // bigram layer
    double alpha2 = 1.0;      // trigram layer
    double alpha_cluster = 1.0;
    double gamma_shape = 10.0;
    double gamma_scale = 0.1;
    TrainMeta meta;

    std::int32_t emit_dim() const { return alphabet.size() + 1; }   // sigma + EOS
    std::int32_t ctx_dim() const { return alphabet.size() + 1; }    // sigma + BOS
    std::int32_t bos() const { return alphabet.size(); }
    std::int32_t eos() const { return alphabet.size(); }

    // Empty model (all counts zero) over the given alphabet.
    static ModelPosterior untrained(Alphabet alphabet, int k_max);
};

// Recursive hierarchical-Dirichlet mean predictive:
//   p(s|uv,k) = (n_uvs + a2 p(s|v,k)) / (n_uv + a2)
//   p(s|v,k)  = (n_vs  + a1 p(s|0,k)) / (n_v  + a1)
//   p(s|0,k)  = (n_s + a0/|sigma+EOS|) / (n + a0)
// `symbol` is an input id or alphabet.size() for EOS.
double predictive_prob(std::int32_t symbol, ContextKey context, int cluster,
                       const ModelPosterior& model);

// Sum of log predictive probabilities over the word's symbols plus the final
// EOS, with BOS-padded contexts. Always finite and <= 0.
double word_log_likelihood(const Word& word, int cluster, const ModelPosterior& model);

// Expected stick-breaking weights; sums to 1, last entry absorbs the remainder.
std::vector<double> cluster_weights(const ModelPosterior& model);

// Posterior cluster probabilities r_k proportional to w_k * p(word|k),
// computed in log space.
std::vector<double> responsibilities(const Word& word, const ModelPosterior& model);

struct MapAssignment {
    std::vector<int> cluster_of;       // per word, argmax (ties to lower index)
    std::vector<std::int64_t> sizes;   // per cluster; sums to |lexicon|
};

MapAssignment map_assignment(const Lexicon& lexicon, const ModelPosterior& model);

// Dense per-cluster predictive tables for batch scoring (represent, synth).
class PredictiveCache {
public:
    explicit PredictiveCache(const ModelPosterior& model);

    int k_max() const { return k_max_; }
    std::int32_t emit_dim() const { return emit_dim_; }

    // Dense next-symbol distribution (length emit_dim) for a context.
    const double* row(int cluster, ContextKey ctx) const;

private:
    int k_max_;
    std::int32_t emit_dim_;
    std::int32_t ctx_dim_;
    // Per cluster: fallback rows for every prev1 value, plus stored trigram rows.
    std::vector<std::vector<double>> bigram_rows_;   // [k] -> ctx_dim * emit_dim
    std::vector<std::unordered_map<std::uint32_t, std::vector<double>>> trigram_rows_;
};

// Checkpoint I/O, JSON schema "sublex-model/1".
void save_model(const ModelPosterior& model, const std::string& path);
ModelPosterior load_model(const std::string& path);
std::string model_to_json(const ModelPosterior& model);
ModelPosterior model_from_json(const std::string& json_text);

} // namespace sublex
