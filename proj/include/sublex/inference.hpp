#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sublex/corpus.hpp"
#include "sublex/phonomodel.hpp"

namespace sublex {

struct TrainConfig {
    int k_max = 6;
    double gamma_shape = 10.0;
    double gamma_scale = 0.1;
    double elbo_tolerance = 0.1;     // absolute per-iteration improvement
    int max_iterations = 5000;
    int n_restarts = 1000;
    std::uint64_t seed = 0;
    int parallel_width = 1;
    // Backoff count propagation: minimal path (min(n,1) per type) by default,
    // maximal path (full counts) for sensitivity analysis.
    bool maximal_path = false;
    // Optional per-sweep progress hook (iteration, elbo, delta).
    std::function<void(int, double, double)> progress;
};

struct TrainResult {
    ModelPosterior model;
    std::vector<std::vector<double>> responsibilities;   // per word, length k_max
    std::vector<double> elbo_trace;
    bool converged = false;
    int restart_index = 0;
    std::vector<double> restart_elbos;   // filled by train(): final ELBO per restart
};

// One coordinate-ascent run from a random initialization.
TrainResult train_once(const Lexicon& lexicon, const TrainConfig& config,
                       std::uint64_t seed);

// Restarts with seeds seed+0 .. seed+n_restarts-1; returns the run with the
// highest final ELBO (ties to the lower restart index). Deterministic.
TrainResult train(const Lexicon& lexicon, const TrainConfig& config);

// Variational objective for an arbitrary (model, responsibilities) pair.
// Expected counts are rederived from the responsibilities, so for a trained
// pair this reproduces the trainer's internal value.
double elbo(const ModelPosterior& model,
            const std::vector<std::vector<double>>& responsibilities,
            const Lexicon& lexicon);

} // namespace sublex
