#include "sublex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "sublex/error.hpp"
#include "sublex/rng.hpp"

namespace sublex {

namespace {

// log multinomial pmf; -inf when a count falls on a zero-probability cell.
double log_multinomial_pmf(const std::vector<std::int64_t>& counts,
                           const std::vector<double>& log_probs, double log_n_fact) {
    double lp = log_n_fact;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) continue;
        if (log_probs[k] == -std::numeric_limits<double>::infinity()) {
            return -std::numeric_limits<double>::infinity();
        }
        lp += static_cast<double>(counts[k]) * log_probs[k] -
              std::lgamma(static_cast<double>(counts[k]) + 1.0);
    }
    return lp;
}

// Linear-domain pmf with binomial factors interleaved against the probability
// powers; keeps small dyadic cases (e.g. fair-coin nulls) exactly representable.
double multinomial_pmf(const std::vector<std::int64_t>& counts,
                       const std::vector<double>& probs) {
    double value = 1.0;
    std::int64_t placed = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        for (std::int64_t j = 1; j <= counts[k]; ++j) {
            value *= (static_cast<double>(placed + j) / static_cast<double>(j)) * probs[k];
        }
        placed += counts[k];
    }
    return value;
}

// Relative tie tolerance 1e-12 on probabilities, applied in the log domain.
constexpr double kTieLogTol = 1e-12;

int star_count(double p) {
    if (p < 0.001) return 3;
    if (p < 0.01) return 2;
    if (p < 0.05) return 1;
    return 0;
}

} // namespace

ContingencyTable ContingencyTable::build(const std::vector<std::string>& labels,
                                         const std::vector<int>& clusters) {
    if (labels.size() != clusters.size()) {
        raise(ErrorCode::InvalidArgument, "labels and clusters differ in length");
    }
    if (labels.empty()) raise(ErrorCode::InvalidArgument, "empty label list");
    ContingencyTable table;
    std::unordered_map<std::string, std::size_t> row_of;
    for (const std::string& label : labels) {
        if (row_of.emplace(label, table.class_names.size()).second) {
            table.class_names.push_back(label);
        }
    }
    std::vector<int> ids(clusters);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    table.cluster_ids = ids;
    std::unordered_map<int, std::size_t> col_of;
    for (std::size_t j = 0; j < ids.size(); ++j) col_of.emplace(ids[j], j);

    table.counts.assign(table.class_names.size(),
                        std::vector<std::int64_t>(ids.size(), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++table.counts[row_of[labels[i]]][col_of[clusters[i]]];
    }
    table.row_totals.assign(table.class_names.size(), 0);
    table.col_totals.assign(ids.size(), 0);
    for (std::size_t r = 0; r < table.counts.size(); ++r) {
        for (std::size_t c = 0; c < ids.size(); ++c) {
            table.row_totals[r] += table.counts[r][c];
            table.col_totals[c] += table.counts[r][c];
        }
        table.total += table.row_totals[r];
    }
    return table;
}

VMeasureResult v_measure(const ContingencyTable& table) {
    const double N = static_cast<double>(table.total);
    double h_c = 0.0, h_k = 0.0, h_c_given_k = 0.0, h_k_given_c = 0.0;
    for (std::int64_t rt : table.row_totals) {
        if (rt > 0) h_c -= (rt / N) * std::log(rt / N);
    }
    for (std::int64_t ct : table.col_totals) {
        if (ct > 0) h_k -= (ct / N) * std::log(ct / N);
    }
    for (std::size_t r = 0; r < table.counts.size(); ++r) {
        for (std::size_t c = 0; c < table.col_totals.size(); ++c) {
            const std::int64_t n = table.counts[r][c];
            if (n == 0) continue;
            h_c_given_k -= (n / N) * std::log(static_cast<double>(n) /
                                              static_cast<double>(table.col_totals[c]));
            h_k_given_c -= (n / N) * std::log(static_cast<double>(n) /
                                              static_cast<double>(table.row_totals[r]));
        }
    }
    VMeasureResult out;
    out.homogeneity = h_c == 0.0 ? 1.0 : 1.0 - h_c_given_k / h_c;
    out.completeness = h_k == 0.0 ? 1.0 : 1.0 - h_k_given_c / h_k;
    const double denom = out.homogeneity + out.completeness;
    out.v = denom == 0.0 ? 0.0 : 2.0 * out.homogeneity * out.completeness / denom;
    return out;
}

VMeasureResult v_measure(const std::vector<std::string>& labels,
                         const std::vector<int>& clusters) {
    return v_measure(ContingencyTable::build(labels, clusters));
}

PermutationTestResult permutation_test(const std::vector<std::string>& labels,
                                       const std::vector<int>& clusters,
                                       std::int64_t n_permutations, std::uint64_t seed) {
    if (n_permutations < 1) raise(ErrorCode::InvalidArgument, "n_permutations < 1");
    PermutationTestResult out;
    out.n_permutations = n_permutations;
    out.seed = seed;
    out.observed_v = v_measure(labels, clusters).v;

    std::vector<std::string> permuted(labels);
    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t i = 0; i < n_permutations; ++i) {
        // Fisher-Yates over the ground-truth labels.
        for (std::size_t j = permuted.size(); j > 1; --j) {
            std::swap(permuted[j - 1], permuted[rng.next_below(j)]);
        }
        const double v = v_measure(permuted, clusters).v;
        if (v > out.observed_v) ++out.n_greater;
        if (v >= out.observed_v) ++out.n_greater_or_tied;
        sum += v;
        sum_sq += v * v;
    }
    const double n = static_cast<double>(n_permutations);
    out.raw_p = static_cast<double>(out.n_greater) / n;
    out.conservative_p = static_cast<double>(out.n_greater_or_tied + 1) / (n + 1.0);
    out.null_mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - out.null_mean * out.null_mean);
    out.null_sd = std::sqrt(var);
    return out;
}

MultinomialTestResult multinomial_exact_test(const std::vector<std::int64_t>& counts,
                                             const std::vector<double>& null_probs,
                                             std::int64_t max_exact_n, std::uint64_t seed,
                                             std::int64_t n_mc_draws) {
    if (counts.empty() || counts.size() != null_probs.size()) {
        raise(ErrorCode::InvalidArgument, "counts and null_probs must have equal nonzero size");
    }
    double psum = 0.0;
    for (double p : null_probs) {
        if (p < 0.0) raise(ErrorCode::InvalidArgument, "negative null probability");
        psum += p;
    }
    if (std::abs(psum - 1.0) > 1e-9) {
        raise(ErrorCode::InvalidArgument, "null_probs must sum to 1");
    }
    std::int64_t n = 0;
    for (std::int64_t c : counts) {
        if (c < 0) raise(ErrorCode::InvalidArgument, "negative count");
        n += c;
    }
    if (n < 1) raise(ErrorCode::InvalidArgument, "total count must be >= 1");

    const std::size_t K = counts.size();
    std::vector<double> log_probs(K);
    for (std::size_t k = 0; k < K; ++k) {
        log_probs[k] = null_probs[k] > 0.0 ? std::log(null_probs[k])
                                           : -std::numeric_limits<double>::infinity();
    }
    const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
    const double lp_obs = log_multinomial_pmf(counts, log_probs, log_n_fact);

    MultinomialTestResult result;
    if (n <= max_exact_n) {
        // Enumerate all compositions of n into K parts.
        double p_sum = 0.0;
        std::vector<std::int64_t> vec(K, 0);
        auto recurse = [&](auto&& self, std::size_t k, std::int64_t remaining) -> void {
            if (k + 1 == K) {
                vec[k] = remaining;
                const double lp = log_multinomial_pmf(vec, log_probs, log_n_fact);
                if (lp <= lp_obs + kTieLogTol) p_sum += multinomial_pmf(vec, null_probs);
                return;
            }
            for (std::int64_t c = 0; c <= remaining; ++c) {
                vec[k] = c;
                self(self, k + 1, remaining - c);
            }
        };
        recurse(recurse, 0, n);
        result.p_value = std::min(1.0, p_sum);
        result.exact = true;
        return result;
    }

    // Monte Carlo with the same p-ordering criterion. Multinomial draws via
    // sequential conditional binomials (pmf-recurrence inversion).
    Rng rng(seed);
    auto binomial = [&](std::int64_t trials, double p) -> std::int64_t {
        if (trials <= 0 || p <= 0.0) return 0;
        if (p >= 1.0) return trials;
        const double u = rng.next_double();
        double pmf = std::exp(static_cast<double>(trials) * std::log1p(-p));
        double cdf = pmf;
        std::int64_t x = 0;
        while (cdf < u && x < trials) {
            pmf *= (static_cast<double>(trials - x) / static_cast<double>(x + 1)) *
                   (p / (1.0 - p));
            cdf += pmf;
            ++x;
        }
        return x;
    };
    std::int64_t hits = 0;
    std::vector<std::int64_t> draw(K, 0);
    for (std::int64_t d = 0; d < n_mc_draws; ++d) {
        std::int64_t remaining = n;
        double prob_left = 1.0;
        for (std::size_t k = 0; k + 1 < K; ++k) {
            const double p = prob_left > 0.0 ? std::min(1.0, null_probs[k] / prob_left) : 0.0;
            draw[k] = binomial(remaining, p);
            remaining -= draw[k];
            prob_left -= null_probs[k];
        }
        draw[K - 1] = remaining;
        const double lp = log_multinomial_pmf(draw, log_probs, log_n_fact);
        if (lp <= lp_obs + kTieLogTol) ++hits;
    }
    result.p_value = static_cast<double>(hits) / static_cast<double>(n_mc_draws);
    result.exact = false;
    result.n_draws = n_mc_draws;
    return result;
}

double mcnemar_exact(std::int64_t b, std::int64_t c) {
    if (b < 0 || c < 0) raise(ErrorCode::InvalidArgument, "negative discordant count");
    const std::int64_t n = b + c;
    if (n == 0) return 1.0;
    const std::int64_t tail = std::min(b, c);
    if (n <= 50) {
        // Binomial coefficients are exact in doubles at this size, so small
        // cases come out as exact dyadic rationals.
        double coeff = 1.0, tail_sum = 0.0;
        for (std::int64_t i = 0; i <= tail; ++i) {
            tail_sum += coeff;
            coeff = coeff * static_cast<double>(n - i) / static_cast<double>(i + 1);
        }
        return std::min(1.0, 2.0 * std::ldexp(tail_sum, static_cast<int>(-n)));
    }
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    double p = 0.0;
    for (std::int64_t i = 0; i <= tail; ++i) {
        p += std::exp(std::lgamma(static_cast<double>(n) + 1.0) -
                      std::lgamma(static_cast<double>(i) + 1.0) -
                      std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n);
    }
    return std::min(1.0, 2.0 * p);
}

double mcnemar_exact(const std::vector<std::pair<bool, bool>>& paired_outcomes) {
    if (paired_outcomes.empty()) raise(ErrorCode::InvalidArgument, "empty paired outcome list");
    std::int64_t b = 0, c = 0;
    for (const auto& [a_ok, b_ok] : paired_outcomes) {
        if (a_ok && !b_ok) ++b;
        if (!a_ok && b_ok) ++c;
    }
    return mcnemar_exact(b, c);
}

BootstrapResult bootstrap_accuracy(const std::vector<bool>& correct_flags,
                                   std::int64_t n_boot, double level, std::uint64_t seed) {
    if (correct_flags.empty()) raise(ErrorCode::InvalidArgument, "empty flag list");
    if (n_boot < 1) raise(ErrorCode::InvalidArgument, "n_boot < 1");
    if (level <= 0.0 || level >= 1.0) raise(ErrorCode::InvalidArgument, "level out of (0,1)");
    BootstrapResult out;
    out.n_boot = n_boot;
    out.seed = seed;
    const std::size_t n = correct_flags.size();
    std::int64_t n_correct = 0;
    for (bool f : correct_flags) n_correct += f ? 1 : 0;
    out.accuracy = static_cast<double>(n_correct) / static_cast<double>(n);

    Rng rng(seed);
    std::vector<double> means(static_cast<std::size_t>(n_boot));
    for (std::int64_t b = 0; b < n_boot; ++b) {
        std::int64_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            hits += correct_flags[rng.next_below(n)] ? 1 : 0;
        }
        means[static_cast<std::size_t>(b)] = static_cast<double>(hits) / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    // Percentile CI with midpoint interpolation between order statistics.
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n_boot) - 0.5;
        if (pos <= 0.0) return means.front();
        if (pos >= static_cast<double>(n_boot - 1)) return means.back();
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return means[lo] * (1.0 - frac) + means[lo + 1] * frac;
    };
    out.ci_low = quantile((1.0 - level) / 2.0);
    out.ci_high = quantile(1.0 - (1.0 - level) / 2.0);
    return out;
}

std::vector<GroupProportionRow> group_proportion_analysis(
    const std::map<std::string, std::vector<std::string>>& groups,
    const std::map<std::string, int>& assignments, int n_clusters,
    const std::vector<double>& null_probs, std::int64_t max_exact_n, std::uint64_t seed) {
    if (n_clusters < 1 || static_cast<std::size_t>(n_clusters) != null_probs.size()) {
        raise(ErrorCode::InvalidArgument, "null_probs size must match cluster count");
    }
    std::vector<GroupProportionRow> rows;
    for (const auto& [group, ids] : groups) {
        GroupProportionRow row;
        row.group = group;
        row.counts.assign(static_cast<std::size_t>(n_clusters), 0);
        for (const std::string& id : ids) {
            auto it = assignments.find(id);
            if (it == assignments.end()) {
                raise(ErrorCode::MissingAssignment, "no assignment for word id: " + id);
            }
            if (it->second < 0 || it->second >= n_clusters) {
                raise(ErrorCode::InvalidArgument, "assignment cluster out of range: " + id);
            }
            ++row.counts[static_cast<std::size_t>(it->second)];
            ++row.n;
        }
        if (row.n == 0) {
            raise(ErrorCode::InvalidArgument, "empty group: " + group);
        }
        row.proportions.resize(static_cast<std::size_t>(n_clusters));
        for (std::size_t k = 0; k < row.proportions.size(); ++k) {
            row.proportions[k] = static_cast<double>(row.counts[k]) /
                                 static_cast<double>(row.n);
        }
        row.p_value =
            multinomial_exact_test(row.counts, null_probs, max_exact_n, seed).p_value;
        row.stars = star_count(row.p_value);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace sublex
