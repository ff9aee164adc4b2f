#include "sublex/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "sublex/error.hpp"
#include "sublex/mathutil.hpp"
#include "sublex/rng.hpp"

namespace sublex {

namespace {

// Expected counts at or below this are treated as zero (storage, backoff
// propagation, ELBO sparsity).
constexpr double kCountEps = 1e-9;

constexpr double kAlphaLo = 1e-4;
constexpr double kAlphaHi = 1e6;
constexpr int kGoldenIters = 50;

// Observed trigram event types of a lexicon, grouped by context, with the
// per-word sparse event lists. Built once; shared read-only by all restarts.
struct EventIndex {
    std::int32_t n_symbols = 0;
    std::int32_t emit_dim = 0;   // symbols + EOS
    std::int32_t ctx_dim = 0;    // symbols + BOS

    // Trigram types.
    std::vector<std::int32_t> type_sym;    // emitted symbol per type
    std::vector<std::int32_t> type_prev1;  // last context symbol per type
    std::vector<int> type_group;           // context-group index per type
    std::vector<int> type_btype;           // bigram type per type

    // Context groups (distinct observed trigram contexts).
    std::vector<std::uint32_t> group_ctx;          // packed context
    std::vector<std::vector<int>> group_types;     // member types

    // Bigram types (distinct observed (prev1, sym) pairs).
    std::vector<std::int32_t> btype_prev1;
    std::vector<std::int32_t> btype_sym;

    // Per word: (trigram type, multiplicity), plus the training weight.
    std::vector<std::vector<std::pair<int, int>>> word_types;
    std::vector<double> weight;
    double total_weight = 0.0;
};

EventIndex build_index(const Lexicon& lexicon, bool allow_empty = false) {
    if (lexicon.words.empty() && !allow_empty) raise(ErrorCode::EmptyCorpus, "empty lexicon");
    EventIndex idx;
    idx.n_symbols = lexicon.alphabet.size();
    idx.emit_dim = idx.n_symbols + 1;
    idx.ctx_dim = idx.n_symbols + 1;
    const std::int32_t bos = idx.n_symbols;
    const std::int32_t eos = idx.n_symbols;

    std::unordered_map<std::uint64_t, int> type_of;    // (ctx, sym) -> type
    std::unordered_map<std::uint32_t, int> group_of;   // ctx -> group
    std::unordered_map<std::uint64_t, int> btype_of;   // (prev1, sym) -> btype

    idx.word_types.reserve(lexicon.words.size());
    idx.weight.reserve(lexicon.words.size());

    std::unordered_map<int, int> local;
    for (const Word& word : lexicon.words) {
        if (word.symbol_ids.empty()) raise(ErrorCode::InvalidArgument, "empty word");
        local.clear();
        ContextKey ctx{bos, bos};
        auto add_event = [&](std::int32_t sym) {
            const std::uint32_t packed = pack_context(ctx, idx.ctx_dim);
            const std::uint64_t key =
                (static_cast<std::uint64_t>(packed) << 32) | static_cast<std::uint32_t>(sym);
            auto [it, inserted] = type_of.emplace(key, static_cast<int>(idx.type_sym.size()));
            if (inserted) {
                idx.type_sym.push_back(sym);
                idx.type_prev1.push_back(ctx.prev1);
                auto [git, gnew] = group_of.emplace(packed, static_cast<int>(idx.group_ctx.size()));
                if (gnew) {
                    idx.group_ctx.push_back(packed);
                    idx.group_types.emplace_back();
                }
                idx.type_group.push_back(git->second);
                idx.group_types[static_cast<std::size_t>(git->second)].push_back(it->second);
                const std::uint64_t bkey =
                    (static_cast<std::uint64_t>(ctx.prev1) << 32) | static_cast<std::uint32_t>(sym);
                auto [bit, bnew] = btype_of.emplace(bkey, static_cast<int>(idx.btype_sym.size()));
                if (bnew) {
                    idx.btype_prev1.push_back(ctx.prev1);
                    idx.btype_sym.push_back(sym);
                }
                idx.type_btype.push_back(bit->second);
            }
            ++local[it->second];
        };
        for (std::int32_t s : word.symbol_ids) {
            if (s < 0 || s >= idx.n_symbols) {
                raise(ErrorCode::UnknownSymbol, "word symbol id out of range");
            }
            add_event(s);
            ctx = {ctx.prev1, s};
        }
        add_event(eos);

        std::vector<std::pair<int, int>> events(local.begin(), local.end());
        std::sort(events.begin(), events.end());
        idx.word_types.push_back(std::move(events));
        idx.weight.push_back(word.weight());
        idx.total_weight += idx.weight.back();
    }
    return idx;
}

// Per-run mutable state. Count tables and backoff points are fully derived
// from (responsibilities, concentrations); sticks are conjugate Beta factors.
struct RunState {
    int K = 1;
    std::vector<std::vector<double>> resp;   // N x K
    std::vector<std::vector<double>> n;      // K x n_types
    std::vector<double> group_total;         // K x n_groups (flattened per cluster)
    std::vector<std::vector<double>> t1;     // K x n_btypes
    std::vector<std::vector<double>> t0;     // K x emit_dim
    std::vector<std::vector<double>> p0;     // K x emit_dim
    std::vector<std::vector<double>> p1;     // K x (ctx_dim * emit_dim)
    std::vector<double> stick_a, stick_b;    // K-1
    std::vector<double> cluster_mass;        // Nk = sum_i f_i r_ik
    double entropy = 0.0;                    // -sum f r log r
    double alpha0 = 1.0, alpha1 = 1.0, alpha2 = 1.0, alpha_cluster = 1.0;
};

class Engine {
public:
    Engine(const Lexicon& lexicon, const TrainConfig& config, bool allow_empty = false)
        : lex_(lexicon), cfg_(config), idx_(build_index(lexicon, allow_empty)) {}

    TrainResult run(std::uint64_t seed, int restart_index) const;

    double evaluate(const ModelPosterior& model,
                    const std::vector<std::vector<double>>& resp) const;

    const EventIndex& index() const { return idx_; }

    ModelPosterior to_model(const RunState& st) const;

private:
    void derive_counts(RunState& st) const;
    void derive_points(RunState& st) const;
    double points_objective(const RunState& st) const;
    void update_points(RunState& st) const;
    void update_sticks(RunState& st) const;
    void update_concentrations(RunState& st) const;
    void update_responsibilities(RunState& st) const;
    void refresh_mass_entropy(RunState& st) const;
    void rebuild_from_resp(RunState& st) const;
    bool try_reassign(RunState& st, double current) const;
    bool try_split(RunState& st, double current) const;
    bool try_merge(RunState& st, double current) const;

    std::vector<double> expected_log_weights(const RunState& st) const;
    double data_and_leaf_term(const RunState& st, double alpha2) const;
    double full_elbo(const RunState& st) const;

    const Lexicon& lex_;
    TrainConfig cfg_;
    EventIndex idx_;
};

std::vector<double> Engine::expected_log_weights(const RunState& st) const {
    std::vector<double> elog(static_cast<std::size_t>(st.K), 0.0);
    double acc = 0.0;
    for (int k = 0; k + 1 < st.K; ++k) {
        const double a = st.stick_a[static_cast<std::size_t>(k)];
        const double b = st.stick_b[static_cast<std::size_t>(k)];
        const double dab = digamma(a + b);
        elog[static_cast<std::size_t>(k)] = acc + digamma(a) - dab;
        acc += digamma(b) - dab;
    }
    elog[static_cast<std::size_t>(st.K - 1)] = acc;
    return elog;
}

void Engine::derive_counts(RunState& st) const {
    const std::size_t n_types = idx_.type_sym.size();
    const std::size_t n_groups = idx_.group_ctx.size();
    const std::size_t n_btypes = idx_.btype_sym.size();
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);

    for (int k = 0; k < st.K; ++k) {
        auto& nk = st.n[static_cast<std::size_t>(k)];
        nk.assign(n_types, 0.0);
        for (std::size_t i = 0; i < idx_.word_types.size(); ++i) {
            const double w = idx_.weight[i] * st.resp[i][static_cast<std::size_t>(k)];
            if (w == 0.0) continue;
            for (const auto& [type, mult] : idx_.word_types[i]) {
                nk[static_cast<std::size_t>(type)] += w * static_cast<double>(mult);
            }
        }
        for (double& v : nk) {
            if (v <= kCountEps) v = 0.0;
        }
        // Backoff propagation: minimal path sends min(n,1) per type downward,
        // maximal path sends the full expected count.
        auto& t1k = st.t1[static_cast<std::size_t>(k)];
        t1k.assign(n_btypes, 0.0);
        for (std::size_t t = 0; t < n_types; ++t) {
            const double v = nk[t];
            if (v == 0.0) continue;
            t1k[static_cast<std::size_t>(idx_.type_btype[t])] +=
                cfg_.maximal_path ? v : std::min(v, 1.0);
        }
        auto& t0k = st.t0[static_cast<std::size_t>(k)];
        t0k.assign(e, 0.0);
        for (std::size_t bt = 0; bt < n_btypes; ++bt) {
            const double v = t1k[bt];
            if (v <= kCountEps) continue;
            t0k[static_cast<std::size_t>(idx_.btype_sym[bt])] +=
                cfg_.maximal_path ? v : std::min(v, 1.0);
        }
    }
    st.group_total.assign(static_cast<std::size_t>(st.K) * n_groups, 0.0);
    for (int k = 0; k < st.K; ++k) {
        const auto& nk = st.n[static_cast<std::size_t>(k)];
        double* gt = st.group_total.data() + static_cast<std::size_t>(k) * n_groups;
        for (std::size_t t = 0; t < n_types; ++t) {
            gt[static_cast<std::size_t>(idx_.type_group[t])] += nk[t];
        }
    }
}

void Engine::derive_points(RunState& st) const {
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);
    const std::size_t c = static_cast<std::size_t>(idx_.ctx_dim);
    const double base = st.alpha0 / static_cast<double>(idx_.emit_dim);
    for (int k = 0; k < st.K; ++k) {
        const auto& t0k = st.t0[static_cast<std::size_t>(k)];
        auto& p0k = st.p0[static_cast<std::size_t>(k)];
        p0k.assign(e, 0.0);
        double total0 = 0.0;
        for (double v : t0k) total0 += v;
        const double denom0 = total0 + st.alpha0;
        for (std::size_t s = 0; s < e; ++s) p0k[s] = (t0k[s] + base) / denom0;

        auto& p1k = st.p1[static_cast<std::size_t>(k)];
        p1k.assign(c * e, 0.0);
        // Start every row from the alpha1-weighted unigram point, then add
        // the propagated bigram counts and normalize per row.
        std::vector<double> row_total(c, 0.0);
        for (std::size_t v = 0; v < c; ++v) {
            for (std::size_t s = 0; s < e; ++s) p1k[v * e + s] = st.alpha1 * p0k[s];
        }
        const auto& t1k = st.t1[static_cast<std::size_t>(k)];
        for (std::size_t bt = 0; bt < t1k.size(); ++bt) {
            if (t1k[bt] == 0.0) continue;
            const std::size_t v = static_cast<std::size_t>(idx_.btype_prev1[bt]);
            p1k[v * e + static_cast<std::size_t>(idx_.btype_sym[bt])] += t1k[bt];
            row_total[v] += t1k[bt];
        }
        for (std::size_t v = 0; v < c; ++v) {
            const double denom = 1.0 / (row_total[v] + st.alpha1);
            for (std::size_t s = 0; s < e; ++s) p1k[v * e + s] *= denom;
        }
    }
}

double Engine::points_objective(const RunState& st) const {
    return data_and_leaf_term(st, st.alpha2);
}

void Engine::update_points(RunState& st) const {
    // The mean rule is a proposal, not an exact maximizer of the collapsed
    // leaf marginal. Guarded acceptance with geometric backtracking toward
    // the incumbent keeps every sweep an ascent step.
    if (st.p0.empty() || st.p0[0].empty()) {
        derive_points(st);
        return;
    }
    const std::vector<std::vector<double>> old_p0 = st.p0;
    const std::vector<std::vector<double>> old_p1 = st.p1;
    const double f_old = points_objective(st);
    derive_points(st);
    if (points_objective(st) >= f_old) return;
    const std::vector<std::vector<double>> cand_p0 = st.p0;
    const std::vector<std::vector<double>> cand_p1 = st.p1;

    auto blend_row = [](const double* a, const double* b, double t, double* out,
                        std::size_t len) {
        double total = 0.0;
        for (std::size_t s = 0; s < len; ++s) {
            out[s] = std::exp((1.0 - t) * std::log(a[s]) + t * std::log(b[s]));
            total += out[s];
        }
        for (std::size_t s = 0; s < len; ++s) out[s] /= total;
    };
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);
    const std::size_t c = static_cast<std::size_t>(idx_.ctx_dim);
    for (double t : {0.5, 0.25, 0.125, 0.0625}) {
        for (int k = 0; k < st.K; ++k) {
            blend_row(old_p0[static_cast<std::size_t>(k)].data(),
                      cand_p0[static_cast<std::size_t>(k)].data(), t,
                      st.p0[static_cast<std::size_t>(k)].data(), e);
            for (std::size_t v = 0; v < c; ++v) {
                blend_row(old_p1[static_cast<std::size_t>(k)].data() + v * e,
                          cand_p1[static_cast<std::size_t>(k)].data() + v * e, t,
                          st.p1[static_cast<std::size_t>(k)].data() + v * e, e);
            }
        }
        if (points_objective(st) >= f_old) return;
    }
    st.p0 = old_p0;
    st.p1 = old_p1;
}

void Engine::update_sticks(RunState& st) const {
    double tail = 0.0;
    for (int k = st.K - 2; k >= 0; --k) {
        tail += st.cluster_mass[static_cast<std::size_t>(k + 1)];
        st.stick_a[static_cast<std::size_t>(k)] =
            1.0 + st.cluster_mass[static_cast<std::size_t>(k)];
        st.stick_b[static_cast<std::size_t>(k)] = st.alpha_cluster + tail;
    }
}

double Engine::data_and_leaf_term(const RunState& st, double alpha2) const {
    // Collapsed leaf contribution: sum over stored contexts of
    //   lgamma(a2) - lgamma(a2 + n_ctx) + sum_s [lgamma(mu_s + n_s) - lgamma(mu_s)]
    // with mu_s = a2 * p1(s | prev1).
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);
    const std::size_t n_groups = idx_.group_ctx.size();
    const double lg_a2 = std::lgamma(alpha2);
    double total = 0.0;
    for (int k = 0; k < st.K; ++k) {
        const auto& nk = st.n[static_cast<std::size_t>(k)];
        const auto& p1k = st.p1[static_cast<std::size_t>(k)];
        const double* gt = st.group_total.data() + static_cast<std::size_t>(k) * n_groups;
        for (std::size_t g = 0; g < n_groups; ++g) {
            if (gt[g] <= kCountEps) continue;
            total += lg_a2 - std::lgamma(alpha2 + gt[g]);
            for (int t : idx_.group_types[g]) {
                const double nv = nk[static_cast<std::size_t>(t)];
                if (nv == 0.0) continue;
                const double mu = alpha2 *
                    p1k[static_cast<std::size_t>(idx_.type_prev1[static_cast<std::size_t>(t)]) * e +
                        static_cast<std::size_t>(idx_.type_sym[static_cast<std::size_t>(t)])];
                total += std::lgamma(mu + nv) - std::lgamma(mu);
            }
        }
    }
    return total;
}

double Engine::full_elbo(const RunState& st) const {
    const std::vector<double> elog = expected_log_weights(st);
    double value = st.entropy;
    for (int k = 0; k < st.K; ++k) {
        value += st.cluster_mass[static_cast<std::size_t>(k)] * elog[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k + 1 < st.K; ++k) {
        value -= kl_beta(st.stick_a[static_cast<std::size_t>(k)],
                         st.stick_b[static_cast<std::size_t>(k)], 1.0, st.alpha_cluster);
    }
    value += data_and_leaf_term(st, st.alpha2);
    value += log_gamma_pdf(st.alpha0, cfg_.gamma_shape, cfg_.gamma_scale);
    value += log_gamma_pdf(st.alpha1, cfg_.gamma_shape, cfg_.gamma_scale);
    value += log_gamma_pdf(st.alpha2, cfg_.gamma_shape, cfg_.gamma_scale);
    value += log_gamma_pdf(st.alpha_cluster, cfg_.gamma_shape, cfg_.gamma_scale);
    return value;
}

void Engine::update_responsibilities(RunState& st) const {
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);
    const std::size_t n_types = idx_.type_sym.size();
    const std::size_t n_groups = idx_.group_ctx.size();
    const std::vector<double> elog = expected_log_weights(st);

    // Per-type expected log emission probabilities under q(G):
    // psi(mu + n) - psi(a2 + n_ctx), valid for stored and unstored contexts alike.
    std::vector<std::vector<double>> score(static_cast<std::size_t>(st.K));
    for (int k = 0; k < st.K; ++k) {
        auto& sk = score[static_cast<std::size_t>(k)];
        sk.resize(n_types);
        const auto& nk = st.n[static_cast<std::size_t>(k)];
        const auto& p1k = st.p1[static_cast<std::size_t>(k)];
        const double* gt = st.group_total.data() + static_cast<std::size_t>(k) * n_groups;
        std::vector<double> group_psi(n_groups);
        for (std::size_t g = 0; g < n_groups; ++g) {
            group_psi[g] = digamma(st.alpha2 + gt[g]);
        }
        for (std::size_t t = 0; t < n_types; ++t) {
            const double mu = st.alpha2 *
                p1k[static_cast<std::size_t>(idx_.type_prev1[t]) * e +
                    static_cast<std::size_t>(idx_.type_sym[t])];
            sk[t] = digamma(mu + nk[t]) - group_psi[static_cast<std::size_t>(idx_.type_group[t])];
        }
    }

    st.cluster_mass.assign(static_cast<std::size_t>(st.K), 0.0);
    st.entropy = 0.0;
    std::vector<double> g(static_cast<std::size_t>(st.K));
    for (std::size_t i = 0; i < idx_.word_types.size(); ++i) {
        for (int k = 0; k < st.K; ++k) {
            double ll = 0.0;
            const auto& sk = score[static_cast<std::size_t>(k)];
            for (const auto& [type, mult] : idx_.word_types[i]) {
                ll += static_cast<double>(mult) * sk[static_cast<std::size_t>(type)];
            }
            g[static_cast<std::size_t>(k)] = elog[static_cast<std::size_t>(k)] + ll;
        }
        const double norm = logsumexp(g);
        auto& ri = st.resp[i];
        const double w = idx_.weight[i];
        for (int k = 0; k < st.K; ++k) {
            const double logr = g[static_cast<std::size_t>(k)] - norm;
            const double r = std::exp(logr);
            ri[static_cast<std::size_t>(k)] = r;
            st.cluster_mass[static_cast<std::size_t>(k)] += w * r;
            if (r > 0.0) st.entropy -= w * r * logr;
        }
    }
}

void Engine::update_concentrations(RunState& st) const {
    // Golden-section search in log domain, once per sweep per concentration.
    // The incumbent value is kept when no better point is found, so this step
    // never decreases the objective.
    auto golden_max = [](const std::function<double(double)>& f, double current) {
        const double gr = 0.6180339887498949;
        double lo = std::log(kAlphaLo), hi = std::log(kAlphaHi);
        double best_x = current;
        double best_f = f(current);
        double c = hi - gr * (hi - lo);
        double d = lo + gr * (hi - lo);
        double fc = f(std::exp(c));
        double fd = f(std::exp(d));
        auto consider = [&](double x, double fx) {
            if (fx > best_f) { best_f = fx; best_x = std::exp(x); }
        };
        consider(c, fc);
        consider(d, fd);
        for (int it = 0; it < kGoldenIters; ++it) {
            if (fc > fd) {
                hi = d; d = c; fd = fc;
                c = hi - gr * (hi - lo);
                fc = f(std::exp(c));
                consider(c, fc);
            } else {
                lo = c; c = d; fc = fd;
                d = lo + gr * (hi - lo);
                fd = f(std::exp(d));
                consider(d, fd);
            }
        }
        return best_x;
    };

    // Scratch copy without the (large, unused) responsibilities.
    RunState scratch = st;
    scratch.resp.clear();

    // alpha0/alpha1 move the backoff points with them (mean rule), so the
    // search result is a joint (alphas, points) proposal. It is adopted only
    // if it does not fall below the incumbent, keeping the sweep an ascent.
    auto coupled = [&](double a0, double a1) {
        scratch.alpha0 = a0;
        scratch.alpha1 = a1;
        derive_points(scratch);
        return data_and_leaf_term(scratch, scratch.alpha2) +
               log_gamma_pdf(a0, cfg_.gamma_shape, cfg_.gamma_scale) +
               log_gamma_pdf(a1, cfg_.gamma_shape, cfg_.gamma_scale);
    };
    const double f_incumbent =
        data_and_leaf_term(st, st.alpha2) +
        log_gamma_pdf(st.alpha0, cfg_.gamma_shape, cfg_.gamma_scale) +
        log_gamma_pdf(st.alpha1, cfg_.gamma_shape, cfg_.gamma_scale);
    const double a0_best =
        golden_max([&](double a0) { return coupled(a0, st.alpha1); }, st.alpha0);
    const double a1_best =
        golden_max([&](double a1) { return coupled(a0_best, a1); }, st.alpha1);
    if (coupled(a0_best, a1_best) >= f_incumbent) {
        st.alpha0 = a0_best;
        st.alpha1 = a1_best;
        derive_points(st);
    }

    // alpha2: leaf priors only.
    st.alpha2 = golden_max([&](double a2) {
        return data_and_leaf_term(st, a2) +
               log_gamma_pdf(a2, cfg_.gamma_shape, cfg_.gamma_scale);
    }, st.alpha2);

    // alpha_cluster: stick prior only.
    st.alpha_cluster = golden_max([&](double ac) {
        double v = log_gamma_pdf(ac, cfg_.gamma_shape, cfg_.gamma_scale);
        for (int k = 0; k + 1 < st.K; ++k) {
            v -= kl_beta(st.stick_a[static_cast<std::size_t>(k)],
                         st.stick_b[static_cast<std::size_t>(k)], 1.0, ac);
        }
        return v;
    }, st.alpha_cluster);
}

void Engine::refresh_mass_entropy(RunState& st) const {
    st.cluster_mass.assign(static_cast<std::size_t>(st.K), 0.0);
    st.entropy = 0.0;
    for (std::size_t i = 0; i < st.resp.size(); ++i) {
        const double w = idx_.weight[i];
        for (int k = 0; k < st.K; ++k) {
            const double r = st.resp[i][static_cast<std::size_t>(k)];
            st.cluster_mass[static_cast<std::size_t>(k)] += w * r;
            if (r > 0.0) st.entropy -= w * r * std::log(r);
        }
    }
}

void Engine::rebuild_from_resp(RunState& st) const {
    refresh_mass_entropy(st);
    derive_counts(st);
    update_points(st);
    update_sticks(st);
}

// Coordinate ascent cannot escape a partition once every word's own expected
// counts make its current cluster look best (the leaf posterior memorizes the
// word). These two moves propose global jumps and keep them only if the full
// objective improves, so the trace stays nondecreasing.

bool Engine::try_reassign(RunState& st, double current) const {
    // Hard reassignment of every word at once, scored with the word's own
    // expected counts removed. Order-independent: all scores come from the
    // unmodified state.
    if (st.K < 2) return false;
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);
    const std::size_t n_groups = idx_.group_ctx.size();
    const std::vector<double> elog = expected_log_weights(st);

    std::vector<std::vector<double>> hard(st.resp.size());
    std::vector<std::pair<int, double>> gmult;
    for (std::size_t i = 0; i < idx_.word_types.size(); ++i) {
        const double w = idx_.weight[i];
        gmult.clear();
        for (const auto& [type, mult] : idx_.word_types[i]) {
            const int g = idx_.type_group[static_cast<std::size_t>(type)];
            if (!gmult.empty() && gmult.back().first == g) {
                gmult.back().second += static_cast<double>(mult);
            } else {
                bool found = false;
                for (auto& gm : gmult) {
                    if (gm.first == g) { gm.second += static_cast<double>(mult); found = true; break; }
                }
                if (!found) gmult.emplace_back(g, static_cast<double>(mult));
            }
        }
        int best_k = 0;
        double best_s = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < st.K; ++k) {
            const double rik = st.resp[i][static_cast<std::size_t>(k)];
            const auto& nk = st.n[static_cast<std::size_t>(k)];
            const auto& p1k = st.p1[static_cast<std::size_t>(k)];
            const double* gt = st.group_total.data() + static_cast<std::size_t>(k) * n_groups;
            double s = elog[static_cast<std::size_t>(k)];
            for (const auto& [type, mult] : idx_.word_types[i]) {
                const std::size_t t = static_cast<std::size_t>(type);
                const double mu = st.alpha2 *
                    p1k[static_cast<std::size_t>(idx_.type_prev1[t]) * e +
                        static_cast<std::size_t>(idx_.type_sym[t])];
                const double loo = std::max(nk[t] - w * rik * static_cast<double>(mult), 0.0);
                s += w * static_cast<double>(mult) * std::log(mu + loo);
            }
            for (const auto& [g, m] : gmult) {
                const double loo = std::max(gt[g] - w * rik * m, 0.0);
                s -= w * m * std::log(st.alpha2 + loo);
            }
            if (s > best_s) { best_s = s; best_k = k; }
        }
        hard[i].assign(static_cast<std::size_t>(st.K), 0.0);
        hard[i][static_cast<std::size_t>(best_k)] = 1.0;
    }

    RunState backup = st;
    st.resp = std::move(hard);
    rebuild_from_resp(st);
    if (full_elbo(st) >= current) return true;
    st = std::move(backup);
    return false;
}

bool Engine::try_split(RunState& st, double current) const {
    // Split proposal for clusters that contain phonotactically unconnected
    // word families: group a cluster's members into connected components of
    // the shared-event graph (words are linked when they share a trigram
    // type, not counting the word-initial context shared by everything) and
    // move the extra components into empty clusters. Kept only if the full
    // objective improves.
    if (st.K < 2) return false;
    const std::size_t n_types = idx_.type_sym.size();
    const std::int32_t bos = idx_.n_symbols;
    const std::uint32_t bos_ctx = pack_context(ContextKey{bos, bos}, idx_.ctx_dim);

    std::vector<int> parent(st.resp.size());
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };

    bool any = false;
    for (int j = 0; j < st.K; ++j) {
        if (st.cluster_mass[static_cast<std::size_t>(j)] <= kCountEps) continue;

        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < st.resp.size(); ++i) {
            const auto& ri = st.resp[i];
            int arg = 0;
            for (int c = 1; c < st.K; ++c) {
                if (ri[static_cast<std::size_t>(c)] > ri[static_cast<std::size_t>(arg)]) arg = c;
            }
            if (arg == j) members.push_back(i);
        }
        if (members.size() < 2) continue;

        for (std::size_t i : members) parent[i] = static_cast<int>(i);
        std::vector<int> type_owner(n_types, -1);
        for (std::size_t i : members) {
            for (const auto& [type, mult] : idx_.word_types[i]) {
                const std::size_t t = static_cast<std::size_t>(type);
                if (idx_.group_ctx[static_cast<std::size_t>(idx_.type_group[t])] == bos_ctx) {
                    continue;
                }
                if (type_owner[t] < 0) {
                    type_owner[t] = static_cast<int>(i);
                } else {
                    const int a = find(type_owner[t]);
                    const int b = find(static_cast<int>(i));
                    if (a != b) parent[static_cast<std::size_t>(b)] = a;
                }
            }
        }
        // Components keyed by root, in order of first appearance.
        std::vector<int> roots;
        std::vector<std::vector<std::size_t>> comps;
        for (std::size_t i : members) {
            const int r = find(static_cast<int>(i));
            std::size_t c = 0;
            for (; c < roots.size(); ++c) {
                if (roots[c] == r) break;
            }
            if (c == roots.size()) {
                roots.push_back(r);
                comps.emplace_back();
            }
            comps[c].push_back(i);
        }
        if (comps.size() < 2) continue;

        RunState cand = st;
        std::size_t next_comp = 1;
        for (int k = 0; k < st.K && next_comp < comps.size(); ++k) {
            if (st.cluster_mass[static_cast<std::size_t>(k)] > kCountEps) continue;
            for (std::size_t i : comps[next_comp]) {
                auto& ri = cand.resp[i];
                std::fill(ri.begin(), ri.end(), 0.0);
                ri[static_cast<std::size_t>(k)] = 1.0;
            }
            ++next_comp;
        }
        if (next_comp == 1) continue;
        rebuild_from_resp(cand);
        update_concentrations(cand);
        const double v = full_elbo(cand);
        if (v >= current) {
            st = std::move(cand);
            current = v;
            any = true;
        }
    }
    return any;
}

bool Engine::try_merge(RunState& st, double current) const {
    // Greedy pairwise cluster merges, each kept only if the objective improves.
    bool any = false;
    double base = current;
    for (bool improved = true; improved;) {
        improved = false;
        int best_j = -1, best_k = -1;
        double best_v = base;
        for (int j = 0; j + 1 < st.K; ++j) {
            if (st.cluster_mass[static_cast<std::size_t>(j)] <= kCountEps) continue;
            for (int k = j + 1; k < st.K; ++k) {
                if (st.cluster_mass[static_cast<std::size_t>(k)] <= kCountEps) continue;
                RunState cand = st;
                for (auto& ri : cand.resp) {
                    ri[static_cast<std::size_t>(j)] += ri[static_cast<std::size_t>(k)];
                    ri[static_cast<std::size_t>(k)] = 0.0;
                }
                rebuild_from_resp(cand);
                const double v = full_elbo(cand);
                if (v >= best_v) { best_v = v; best_j = j; best_k = k; }
            }
        }
        if (best_j >= 0) {
            for (auto& ri : st.resp) {
                ri[static_cast<std::size_t>(best_j)] += ri[static_cast<std::size_t>(best_k)];
                ri[static_cast<std::size_t>(best_k)] = 0.0;
            }
            rebuild_from_resp(st);
            base = full_elbo(st);
            improved = true;
            any = true;
        }
    }
    return any;
}

ModelPosterior Engine::to_model(const RunState& st) const {
    ModelPosterior model = ModelPosterior::untrained(lex_.alphabet, st.K);
    model.stick_a = st.stick_a;
    model.stick_b = st.stick_b;
    model.alpha0 = st.alpha0;
    model.alpha1 = st.alpha1;
    model.alpha2 = st.alpha2;
    model.alpha_cluster = st.alpha_cluster;
    model.gamma_shape = cfg_.gamma_shape;
    model.gamma_scale = cfg_.gamma_scale;
    const std::size_t e = static_cast<std::size_t>(idx_.emit_dim);
    for (int k = 0; k < st.K; ++k) {
        ClusterTable& table = model.tables[static_cast<std::size_t>(k)];
        const auto& nk = st.n[static_cast<std::size_t>(k)];
        for (std::size_t t = 0; t < nk.size(); ++t) {
            if (nk[t] == 0.0) continue;
            const std::uint32_t ctx = idx_.group_ctx[static_cast<std::size_t>(idx_.type_group[t])];
            auto [it, inserted] = table.trigram.try_emplace(ctx);
            if (inserted) it->second.counts.assign(e, 0.0);
            it->second.counts[static_cast<std::size_t>(idx_.type_sym[t])] = nk[t];
        }
        for (auto& [ctx, row] : table.trigram) {
            row.total = 0.0;
            for (double v : row.counts) row.total += v;
        }
        const auto& t1k = st.t1[static_cast<std::size_t>(k)];
        for (std::size_t bt = 0; bt < t1k.size(); ++bt) {
            if (t1k[bt] <= kCountEps) continue;
            auto [it, inserted] = table.bigram.try_emplace(idx_.btype_prev1[bt]);
            if (inserted) it->second.counts.assign(e, 0.0);
            it->second.counts[static_cast<std::size_t>(idx_.btype_sym[bt])] = t1k[bt];
        }
        for (auto& [prev1, row] : table.bigram) {
            row.total = 0.0;
            for (double v : row.counts) row.total += v;
        }
        const auto& t0k = st.t0[static_cast<std::size_t>(k)];
        double total0 = 0.0;
        for (double v : t0k) total0 += v;
        if (total0 > 0.0) {
            table.unigram.counts = t0k;
            table.unigram.total = 0.0;
            for (double v : table.unigram.counts) table.unigram.total += v;
        }
    }
    return model;
}

TrainResult Engine::run(std::uint64_t seed, int restart_index) const {
    const std::size_t n_words = idx_.word_types.size();
    RunState st;
    st.K = cfg_.k_max;
    st.resp.resize(n_words);
    st.n.resize(static_cast<std::size_t>(st.K));
    st.t1.resize(static_cast<std::size_t>(st.K));
    st.t0.resize(static_cast<std::size_t>(st.K));
    st.p0.resize(static_cast<std::size_t>(st.K));
    st.p1.resize(static_cast<std::size_t>(st.K));
    st.stick_a.assign(static_cast<std::size_t>(st.K - 1), 1.0);
    st.stick_b.assign(static_cast<std::size_t>(st.K - 1), 1.0);

    // Random initialization: responsibilities from a symmetric Dirichlet(1).
    Rng rng(seed);
    st.cluster_mass.assign(static_cast<std::size_t>(st.K), 0.0);
    st.entropy = 0.0;
    for (std::size_t i = 0; i < n_words; ++i) {
        st.resp[i] = (st.K == 1) ? std::vector<double>{1.0}
                                 : rng.next_dirichlet_uniform(static_cast<std::size_t>(st.K));
        const double w = idx_.weight[i];
        for (int k = 0; k < st.K; ++k) {
            const double r = st.resp[i][static_cast<std::size_t>(k)];
            st.cluster_mass[static_cast<std::size_t>(k)] += w * r;
            if (r > 0.0) st.entropy -= w * r * std::log(r);
        }
    }
    derive_counts(st);
    derive_points(st);
    update_sticks(st);

    TrainResult result;
    result.restart_index = restart_index;
    double prev_elbo = 0.0;
    for (int iter = 1; iter <= cfg_.max_iterations; ++iter) {
        update_responsibilities(st);
        derive_counts(st);
        update_points(st);
        update_sticks(st);
        update_concentrations(st);
        double value = full_elbo(st);
        if (try_reassign(st, value)) value = full_elbo(st);
        if (try_merge(st, value)) value = full_elbo(st);
        if (try_split(st, value)) value = full_elbo(st);
        if (!std::isfinite(value)) {
            raise(ErrorCode::NumericalFailure,
                  "non-finite ELBO at iteration " + std::to_string(iter));
        }
        const double delta = result.elbo_trace.empty() ? std::numeric_limits<double>::infinity()
                                                       : value - prev_elbo;
        result.elbo_trace.push_back(value);
        prev_elbo = value;
        if (cfg_.progress) cfg_.progress(iter, value, delta);
        if (delta < cfg_.elbo_tolerance) {
            result.converged = true;
            break;
        }
    }

    result.model = to_model(st);
    result.model.meta.final_elbo = prev_elbo;
    result.model.meta.iterations = static_cast<int>(result.elbo_trace.size());
    result.model.meta.seed = seed;
    result.model.meta.converged = result.converged;
    result.model.meta.restart_index = restart_index;
    result.responsibilities = std::move(st.resp);
    return result;
}

double Engine::evaluate(const ModelPosterior& model,
                        const std::vector<std::vector<double>>& resp) const {
    if (resp.size() != idx_.word_types.size()) {
        raise(ErrorCode::InvalidArgument, "responsibilities/lexicon size mismatch");
    }
    RunState st;
    st.K = model.k_max;
    st.resp = resp;
    st.n.resize(static_cast<std::size_t>(st.K));
    st.t1.resize(static_cast<std::size_t>(st.K));
    st.t0.resize(static_cast<std::size_t>(st.K));
    st.p0.resize(static_cast<std::size_t>(st.K));
    st.p1.resize(static_cast<std::size_t>(st.K));
    st.stick_a = model.stick_a;
    st.stick_b = model.stick_b;
    st.alpha0 = model.alpha0;
    st.alpha1 = model.alpha1;
    st.alpha2 = model.alpha2;
    st.alpha_cluster = model.alpha_cluster;
    st.cluster_mass.assign(static_cast<std::size_t>(st.K), 0.0);
    st.entropy = 0.0;
    for (std::size_t i = 0; i < resp.size(); ++i) {
        if (static_cast<int>(resp[i].size()) != st.K) {
            raise(ErrorCode::InvalidArgument, "responsibility vector has wrong length");
        }
        const double w = idx_.weight[i];
        for (int k = 0; k < st.K; ++k) {
            const double r = resp[i][static_cast<std::size_t>(k)];
            st.cluster_mass[static_cast<std::size_t>(k)] += w * r;
            if (r > 0.0) st.entropy -= w * r * std::log(r);
        }
    }
    derive_counts(st);
    derive_points(st);
    const double value = full_elbo(st);
    if (std::isnan(value)) raise(ErrorCode::NumericalFailure, "NaN ELBO");
    return value;
}

} // namespace

TrainResult train_once(const Lexicon& lexicon, const TrainConfig& config,
                       std::uint64_t seed) {
    Engine engine(lexicon, config);
    return engine.run(seed, 0);
}

TrainResult train(const Lexicon& lexicon, const TrainConfig& config) {
    if (config.n_restarts < 1) raise(ErrorCode::InvalidArgument, "n_restarts must be >= 1");
    Engine engine(lexicon, config);

    std::vector<TrainResult> results(static_cast<std::size_t>(config.n_restarts));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(config.n_restarts));
    const int width = std::max(1, config.parallel_width);

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= config.n_restarts) return;
            try {
                results[static_cast<std::size_t>(t)] = engine.run(config.seed + static_cast<std::uint64_t>(t), t);
            } catch (...) {
                failures[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };
    if (width == 1 || config.n_restarts == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const int n_threads = std::min(width, config.n_restarts);
        threads.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    int best = -1;
    std::vector<double> finals;
    finals.reserve(results.size());
    for (int t = 0; t < config.n_restarts; ++t) {
        if (failures[static_cast<std::size_t>(t)]) {
            finals.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double e = results[static_cast<std::size_t>(t)].model.meta.final_elbo;
        finals.push_back(e);
        if (best < 0 || e > results[static_cast<std::size_t>(best)].model.meta.final_elbo) {
            best = t;
        }
    }
    if (best < 0) {
        // All restarts failed; surface the first failure.
        for (auto& f : failures) {
            if (f) std::rethrow_exception(f);
        }
        raise(ErrorCode::NumericalFailure, "all restarts failed");
    }
    TrainResult chosen = std::move(results[static_cast<std::size_t>(best)]);
    chosen.restart_elbos = std::move(finals);
    return chosen;
}

double elbo(const ModelPosterior& model,
            const std::vector<std::vector<double>>& responsibilities,
            const Lexicon& lexicon) {
    if (!(model.alphabet == lexicon.alphabet)) {
        raise(ErrorCode::IncompatibleModel, "model/lexicon alphabet mismatch");
    }
    TrainConfig cfg;
    cfg.k_max = model.k_max;
    cfg.gamma_shape = model.gamma_shape;
    cfg.gamma_scale = model.gamma_scale;
    Engine engine(lexicon, cfg, true);
    return engine.evaluate(model, responsibilities);
}

} // namespace sublex
