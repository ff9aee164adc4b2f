#include "sublex/phonomodel.hpp"

#include <algorithm>
#include <cmath>

#include "sublex/error.hpp"
#include "sublex/kernels.hpp"
#include "sublex/mathutil.hpp"

namespace sublex {

namespace {

void check_cluster(int cluster, const ModelPosterior& model) {
    if (cluster < 0 || cluster >= model.k_max) {
        raise(ErrorCode::InvalidArgument,
              "cluster index " + std::to_string(cluster) + " out of range (k_max=" +
              std::to_string(model.k_max) + ")");
    }
}

void check_context(ContextKey ctx, const ModelPosterior& model) {
    if (ctx.prev2 < 0 || ctx.prev2 > model.bos() || ctx.prev1 < 0 || ctx.prev1 > model.bos()) {
        raise(ErrorCode::UnknownSymbol, "context symbol id out of range");
    }
}

double unigram_prob(std::int32_t symbol, const ClusterTable& table,
                    const ModelPosterior& model) {
    const double base = model.alpha0 / static_cast<double>(model.emit_dim());
    if (table.unigram.counts.empty()) return base / model.alpha0;
    return (table.unigram.counts[static_cast<std::size_t>(symbol)] + base)
         / (table.unigram.total + model.alpha0);
}

double bigram_prob(std::int32_t symbol, std::int32_t prev1, const ClusterTable& table,
                   const ModelPosterior& model) {
    const double backoff = unigram_prob(symbol, table, model);
    auto it = table.bigram.find(prev1);
    if (it == table.bigram.end()) return backoff;
    return (it->second.counts[static_cast<std::size_t>(symbol)] + model.alpha1 * backoff)
         / (it->second.total + model.alpha1);
}

} // namespace

ModelPosterior ModelPosterior::untrained(Alphabet alphabet, int k_max) {
    if (k_max < 1) raise(ErrorCode::InvalidArgument, "k_max must be >= 1");
    ModelPosterior m;
    m.alphabet = std::move(alphabet);
    m.k_max = k_max;
    m.stick_a.assign(static_cast<std::size_t>(k_max - 1), 1.0);
    m.stick_b.assign(static_cast<std::size_t>(k_max - 1), 1.0);
    m.tables.resize(static_cast<std::size_t>(k_max));
    return m;
}

double predictive_prob(std::int32_t symbol, ContextKey context, int cluster,
                       const ModelPosterior& model) {
    check_cluster(cluster, model);
    check_context(context, model);
    if (symbol < 0 || symbol >= model.emit_dim()) {
        raise(ErrorCode::UnknownSymbol,
              "emission symbol id out of range: " + std::to_string(symbol));
    }
    const ClusterTable& table = model.tables[static_cast<std::size_t>(cluster)];
    const double backoff = bigram_prob(symbol, context.prev1, table, model);
    auto it = table.trigram.find(pack_context(context, model.ctx_dim()));
    if (it == table.trigram.end()) return backoff;
    return (it->second.counts[static_cast<std::size_t>(symbol)] + model.alpha2 * backoff)
         / (it->second.total + model.alpha2);
}

double word_log_likelihood(const Word& word, int cluster, const ModelPosterior& model) {
    check_cluster(cluster, model);
    if (word.symbol_ids.empty()) raise(ErrorCode::InvalidArgument, "empty word");
    const std::int32_t bos = model.bos();
    double ll = 0.0;
    ContextKey ctx{bos, bos};
    for (std::int32_t s : word.symbol_ids) {
        if (s < 0 || s >= model.alphabet.size()) {
            raise(ErrorCode::UnknownSymbol, "word symbol id out of range");
        }
        ll += std::log(predictive_prob(s, ctx, cluster, model));
        ctx = {ctx.prev1, s};
    }
    ll += std::log(predictive_prob(model.eos(), ctx, cluster, model));
    return ll;
}

std::vector<double> cluster_weights(const ModelPosterior& model) {
    std::vector<double> w(static_cast<std::size_t>(model.k_max));
    double remaining = 1.0;
    for (int k = 0; k + 1 < model.k_max; ++k) {
        const double a = model.stick_a[static_cast<std::size_t>(k)];
        const double b = model.stick_b[static_cast<std::size_t>(k)];
        const double v = a / (a + b);
        w[static_cast<std::size_t>(k)] = remaining * v;
        remaining *= 1.0 - v;
    }
    w[static_cast<std::size_t>(model.k_max - 1)] = remaining;
    return w;
}

std::vector<double> responsibilities(const Word& word, const ModelPosterior& model) {
    const std::vector<double> w = cluster_weights(model);
    std::vector<double> scores(w.size());
    for (int k = 0; k < model.k_max; ++k) {
        scores[static_cast<std::size_t>(k)] =
            std::log(w[static_cast<std::size_t>(k)]) + word_log_likelihood(word, k, model);
    }
    const double norm = logsumexp(scores);
    for (double& s : scores) s = std::exp(s - norm);
    return scores;
}

MapAssignment map_assignment(const Lexicon& lexicon, const ModelPosterior& model) {
    MapAssignment out;
    out.cluster_of.reserve(lexicon.words.size());
    out.sizes.assign(static_cast<std::size_t>(model.k_max), 0);
    for (const Word& word : lexicon.words) {
        const std::vector<double> r = responsibilities(word, model);
        int best = 0;
        for (int k = 1; k < model.k_max; ++k) {
            if (r[static_cast<std::size_t>(k)] > r[static_cast<std::size_t>(best)]) best = k;
        }
        out.cluster_of.push_back(best);
        ++out.sizes[static_cast<std::size_t>(best)];
    }
    return out;
}

PredictiveCache::PredictiveCache(const ModelPosterior& model)
    : k_max_(model.k_max), emit_dim_(model.emit_dim()), ctx_dim_(model.ctx_dim()) {
    const std::size_t e = static_cast<std::size_t>(emit_dim_);
    bigram_rows_.resize(static_cast<std::size_t>(k_max_));
    trigram_rows_.resize(static_cast<std::size_t>(k_max_));
    std::vector<double> uni(e);
    for (int k = 0; k < k_max_; ++k) {
        const ClusterTable& table = model.tables[static_cast<std::size_t>(k)];
        for (std::int32_t s = 0; s < emit_dim_; ++s) {
            uni[static_cast<std::size_t>(s)] = unigram_prob(s, table, model);
        }
        auto& rows = bigram_rows_[static_cast<std::size_t>(k)];
        rows.assign(static_cast<std::size_t>(ctx_dim_) * e, 0.0);
        for (std::int32_t v = 0; v < ctx_dim_; ++v) {
            double* row = rows.data() + static_cast<std::size_t>(v) * e;
            auto it = table.bigram.find(v);
            if (it == table.bigram.end()) {
                std::copy(uni.begin(), uni.end(), row);
                continue;
            }
            const double denom = 1.0 / (it->second.total + model.alpha1);
            kernels::scale(row, uni.data(), model.alpha1, e);
            kernels::axpy(row, 1.0, it->second.counts.data(), e);
            kernels::scale(row, row, denom, e);
        }
        auto& tri = trigram_rows_[static_cast<std::size_t>(k)];
        for (const auto& [key, cnt] : table.trigram) {
            const std::int32_t v = static_cast<std::int32_t>(key % static_cast<std::uint32_t>(ctx_dim_));
            std::vector<double> row(e);
            const double denom = 1.0 / (cnt.total + model.alpha2);
            kernels::scale(row.data(), rows.data() + static_cast<std::size_t>(v) * e,
                           model.alpha2, e);
            kernels::axpy(row.data(), 1.0, cnt.counts.data(), e);
            kernels::scale(row.data(), row.data(), denom, e);
            tri.emplace(key, std::move(row));
        }
    }
}

const double* PredictiveCache::row(int cluster, ContextKey ctx) const {
    const auto& tri = trigram_rows_[static_cast<std::size_t>(cluster)];
    auto it = tri.find(pack_context(ctx, ctx_dim_));
    if (it != tri.end()) return it->second.data();
    return bigram_rows_[static_cast<std::size_t>(cluster)].data()
         + static_cast<std::size_t>(ctx.prev1) * static_cast<std::size_t>(emit_dim_);
}

} // namespace sublex
