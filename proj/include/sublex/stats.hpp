#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sublex {

// Class-by-cluster count table with derived marginals.
struct ContingencyTable {
    std::vector<std::string> class_names;       // row order of first appearance
    std::vector<int> cluster_ids;               // column order, ascending
    std::vector<std::vector<std::int64_t>> counts;   // [class][cluster]
    std::vector<std::int64_t> row_totals;
    std::vector<std::int64_t> col_totals;
    std::int64_t total = 0;

    static ContingencyTable build(const std::vector<std::string>& labels,
                                  const std::vector<int>& clusters);
};

struct VMeasureResult {
    double homogeneity = 0.0;
    double completeness = 0.0;
    double v = 0.0;
};

VMeasureResult v_measure(const std::vector<std::string>& labels,
                         const std::vector<int>& clusters);
VMeasureResult v_measure(const ContingencyTable& table);

struct PermutationTestResult {
    double observed_v = 0.0;
    double raw_p = 0.0;            // strict-greater proportion
    double conservative_p = 0.0;   // (r+1)/(n+1) with ties counted as exceeding
    std::int64_t n_greater = 0;
    std::int64_t n_greater_or_tied = 0;
    std::int64_t n_permutations = 0;
    double null_mean = 0.0;
    double null_sd = 0.0;
    std::uint64_t seed = 0;
};

PermutationTestResult permutation_test(const std::vector<std::string>& labels,
                                       const std::vector<int>& clusters,
                                       std::int64_t n_permutations = 100000,
                                       std::uint64_t seed = 0);

struct MultinomialTestResult {
    double p_value = 1.0;
    bool exact = true;             // false when the Monte Carlo path ran
    std::int64_t n_draws = 0;      // Monte Carlo draws, 0 on the exact path
};

MultinomialTestResult multinomial_exact_test(const std::vector<std::int64_t>& counts,
                                             const std::vector<double>& null_probs,
                                             std::int64_t max_exact_n = 200,
                                             std::uint64_t seed = 0,
                                             std::int64_t n_mc_draws = 1000000);

// Two-sided exact McNemar from discordant-pair counts.
double mcnemar_exact(std::int64_t b, std::int64_t c);
double mcnemar_exact(const std::vector<std::pair<bool, bool>>& paired_outcomes);

struct BootstrapResult {
    double accuracy = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::int64_t n_boot = 0;
    std::uint64_t seed = 0;
};

BootstrapResult bootstrap_accuracy(const std::vector<bool>& correct_flags,
                                   std::int64_t n_boot = 1000, double level = 0.95,
                                   std::uint64_t seed = 0);

struct GroupProportionRow {
    std::string group;
    std::int64_t n = 0;
    std::vector<std::int64_t> counts;        // per cluster
    std::vector<double> proportions;
    double p_value = 1.0;
    int stars = 0;                           // thresholds 0.05 / 0.01 / 0.001
};

std::vector<GroupProportionRow> group_proportion_analysis(
    const std::map<std::string, std::vector<std::string>>& groups,
    const std::map<std::string, int>& assignments, int n_clusters,
    const std::vector<double>& null_probs, std::int64_t max_exact_n = 200,
    std::uint64_t seed = 0);

} // namespace sublex
