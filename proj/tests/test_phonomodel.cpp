#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "sublex/phonomodel.hpp"
#include "sublex/rng.hpp"

using namespace sublex;

namespace {

CountRow make_row(std::vector<double> counts) {
    CountRow row;
    row.counts = std::move(counts);
    for (double c : row.counts) row.total += c;
    return row;
}

// Small two-cluster model with hand-placed counts over {a, b}.
ModelPosterior toy_model() {
    ModelPosterior m = ModelPosterior::untrained(Alphabet({"a", "b"}), 2);
    // emit dim 3: a, b, EOS; ctx ids: a=0, b=1, BOS=2.
    m.tables[0].unigram = make_row({6.0, 2.0, 4.0});
    m.tables[0].bigram.emplace(0, make_row({3.0, 1.0, 2.0}));
    m.tables[0].bigram.emplace(2, make_row({4.0, 1.0, 0.0}));
    m.tables[0].trigram.emplace(pack_context({2, 2}, m.ctx_dim()), make_row({4.0, 1.0, 0.0}));
    m.tables[0].trigram.emplace(pack_context({2, 0}, m.ctx_dim()), make_row({1.0, 0.0, 2.0}));
    m.tables[1].unigram = make_row({1.0, 7.0, 4.0});
    m.tables[1].bigram.emplace(1, make_row({1.0, 4.0, 2.0}));
    m.tables[1].bigram.emplace(2, make_row({1.0, 3.0, 0.0}));
    m.tables[1].trigram.emplace(pack_context({2, 2}, m.ctx_dim()), make_row({1.0, 3.0, 0.0}));
    m.alpha0 = 1.5;
    m.alpha1 = 0.8;
    m.alpha2 = 1.2;
    return m;
}

ModelPosterior random_model(std::uint64_t seed, std::vector<std::string> symbols, int k) {
    ModelPosterior m = ModelPosterior::untrained(Alphabet(std::move(symbols)), k);
    Rng rng(seed);
    const std::size_t e = static_cast<std::size_t>(m.emit_dim());
    for (int c = 0; c < k; ++c) {
        std::vector<double> uni(e);
        for (double& x : uni) x = rng.next_double() * 5.0;
        m.tables[static_cast<std::size_t>(c)].unigram = make_row(uni);
        for (std::int32_t v = 0; v < m.ctx_dim(); ++v) {
            if (rng.next_double() < 0.3) continue;
            std::vector<double> row(e);
            for (double& x : row) x = rng.next_double() * 3.0;
            m.tables[static_cast<std::size_t>(c)].bigram.emplace(v, make_row(row));
            for (std::int32_t u = 0; u < m.ctx_dim(); ++u) {
                if (rng.next_double() < 0.5) continue;
                std::vector<double> tri(e);
                for (double& x : tri) x = rng.next_double() * 2.0;
                m.tables[static_cast<std::size_t>(c)].trigram.emplace(
                    pack_context({u, v}, m.ctx_dim()), make_row(tri));
            }
        }
    }
    return m;
}

} // namespace

TEST_CASE("untrained model is uniform over emissions") {
    const ModelPosterior m = ModelPosterior::untrained(Alphabet({"a", "b", "c"}), 2);
    const double uniform = 1.0 / 4.0;
    for (int k = 0; k < 2; ++k) {
        for (std::int32_t s = 0; s < m.emit_dim(); ++s) {
            CHECK(predictive_prob(s, {m.bos(), m.bos()}, k, m) == doctest::Approx(uniform));
            CHECK(predictive_prob(s, {0, 1}, k, m) == doctest::Approx(uniform));
        }
    }
    const Word word{{0, 1, 2}, "", std::nullopt};
    CHECK(word_log_likelihood(word, 0, m) == doctest::Approx(4.0 * std::log(uniform)));
}

TEST_CASE("unigram layer hand example") {
    // One symbol, counts n_a=3, n=4 (one EOS), alpha0=1: (3+0.5)/(4+1) = 0.7.
    ModelPosterior m = ModelPosterior::untrained(Alphabet({"a"}), 1);
    m.alpha0 = 1.0;
    m.alpha1 = 1e-300;   // effectively exposes the unigram layer
    m.alpha2 = 1e-300;
    m.tables[0].unigram = make_row({3.0, 1.0});
    m.tables[0].bigram.clear();
    m.tables[0].trigram.clear();
    CHECK(predictive_prob(0, {m.bos(), m.bos()}, 0, m) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("absent trigram context backs off to the bigram layer exactly") {
    const ModelPosterior m = toy_model();
    // (a, b) has no stored trigram row for cluster 0 but b has no bigram row
    // either; (b, a) hits the stored a bigram row.
    for (std::int32_t s = 0; s < m.emit_dim(); ++s) {
        const double tri = predictive_prob(s, {1, 0}, 0, m);
        // recompute the bigram value by the published formula
        const ClusterTable& t = m.tables[0];
        const double base = m.alpha0 / 3.0;
        const double uni = (t.unigram.counts[static_cast<std::size_t>(s)] + base) /
                           (t.unigram.total + m.alpha0);
        const double big = (t.bigram.at(0).counts[static_cast<std::size_t>(s)] +
                            m.alpha1 * uni) /
                           (t.bigram.at(0).total + m.alpha1);
        CHECK(tri == doctest::Approx(big).epsilon(1e-15));
    }
}

TEST_CASE("stored contexts are normalized within 1e-9") {
    const ModelPosterior m = random_model(11, {"a", "b", "c", "d"}, 3);
    for (int k = 0; k < m.k_max; ++k) {
        for (std::int32_t u = 0; u < m.ctx_dim(); ++u) {
            for (std::int32_t v = 0; v < m.ctx_dim(); ++v) {
                double total = 0.0;
                for (std::int32_t s = 0; s < m.emit_dim(); ++s) {
                    total += predictive_prob(s, {u, v}, k, m);
                }
                CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("large alpha2 pushes trigram toward its bigram backoff") {
    ModelPosterior m = toy_model();
    m.alpha2 = 1e9;
    for (std::int32_t s = 0; s < m.emit_dim(); ++s) {
        const double tri = predictive_prob(s, {2, 2}, 0, m);
        ModelPosterior no_tri = m;
        no_tri.tables[0].trigram.clear();
        const double big = predictive_prob(s, {2, 2}, 0, no_tri);
        CHECK(tri == doctest::Approx(big).epsilon(1e-6));
    }
}

TEST_CASE("cluster weights from sticks") {
    ModelPosterior m = ModelPosterior::untrained(Alphabet({"a"}), 4);
    const std::vector<double> w = cluster_weights(m);   // all Beta(1,1)
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(w[2] == doctest::Approx(0.125));
    CHECK(w[3] == doctest::Approx(0.125));
    double total = 0.0;
    for (double x : w) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const ModelPosterior single = ModelPosterior::untrained(Alphabet({"a"}), 1);
    CHECK(cluster_weights(single) == std::vector<double>{1.0});
}

TEST_CASE("responsibilities follow Bayes rule on the log scores") {
    const ModelPosterior m = toy_model();
    const Word word{{0, 1}, "", std::nullopt};
    const std::vector<double> w = cluster_weights(m);
    const double l0 = word_log_likelihood(word, 0, m);
    const double l1 = word_log_likelihood(word, 1, m);
    const double u0 = w[0] * std::exp(l0);
    const double u1 = w[1] * std::exp(l1);
    const std::vector<double> r = responsibilities(word, m);
    CHECK(r[0] == doctest::Approx(u0 / (u0 + u1)).epsilon(1e-12));
    CHECK(r[0] + r[1] == doctest::Approx(1.0).epsilon(1e-12));

    const ModelPosterior single = ModelPosterior::untrained(Alphabet({"a", "b"}), 1);
    CHECK(responsibilities(word, single) == std::vector<double>{1.0});
}

TEST_CASE("identical tables give symmetric responsibilities") {
    ModelPosterior m = toy_model();
    m.tables[1] = m.tables[0];
    m.stick_a = {1.0};
    m.stick_b = {1.0};
    const Word word{{0, 0, 1}, "", std::nullopt};
    CHECK(word_log_likelihood(word, 0, m) == word_log_likelihood(word, 1, m));
    const std::vector<double> r = responsibilities(word, m);
    CHECK(r[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("map assignment breaks ties toward the lower index") {
    ModelPosterior m = ModelPosterior::untrained(Alphabet({"a", "b"}), 3);
    Lexicon lex;
    lex.alphabet = m.alphabet;
    lex.words.push_back(Word{{0, 1}, "w0", std::nullopt});
    lex.words.push_back(Word{{1}, "w1", std::nullopt});
    // untrained: likelihoods equal, weights (1/2,1/4,1/4) -> cluster 0 wins;
    // force exact ties by equalizing the sticks through a 2-cluster model
    ModelPosterior flat = ModelPosterior::untrained(m.alphabet, 2);
    flat.stick_a = {1.0};
    flat.stick_b = {1.0};
    const MapAssignment map = map_assignment(lex, flat);
    CHECK(map.cluster_of == std::vector<int>{0, 0});
    CHECK(map.sizes[0] + map.sizes[1] == 2);
}

TEST_CASE("predictive cache rows match the recursive formula") {
    const ModelPosterior m = random_model(23, {"a", "b", "c"}, 2);
    const PredictiveCache cache(m);
    for (int k = 0; k < m.k_max; ++k) {
        for (std::int32_t u = 0; u < m.ctx_dim(); ++u) {
            for (std::int32_t v = 0; v < m.ctx_dim(); ++v) {
                const double* row = cache.row(k, {u, v});
                for (std::int32_t s = 0; s < m.emit_dim(); ++s) {
                    const double p = predictive_prob(s, {u, v}, k, m);
                    CHECK(row[s] == doctest::Approx(p).epsilon(1e-13));
                }
            }
        }
    }
}

TEST_CASE("checkpoint json round trip preserves predictive probabilities") {
    const ModelPosterior m = random_model(5, {"a", "b", "c"}, 3);
    const ModelPosterior back = model_from_json(model_to_json(m));
    CHECK(back.alphabet == m.alphabet);
    CHECK(back.k_max == m.k_max);
    CHECK(back.alpha2 == m.alpha2);
    for (int k = 0; k < m.k_max; ++k) {
        for (std::int32_t u = 0; u < m.ctx_dim(); ++u) {
            for (std::int32_t v = 0; v < m.ctx_dim(); ++v) {
                for (std::int32_t s = 0; s < m.emit_dim(); ++s) {
                    const double p = predictive_prob(s, {u, v}, k, m);
                    const double q = predictive_prob(s, {u, v}, k, back);
                    CHECK(q == doctest::Approx(p).epsilon(1e-15));
                }
            }
        }
    }
}

TEST_CASE("checkpoint file round trip") {
    const ModelPosterior m = toy_model();
    const std::string path =
        (std::filesystem::temp_directory_path() / "sublex_roundtrip.json").string();
    save_model(m, path);
    const ModelPosterior back = load_model(path);
    std::filesystem::remove(path);
    CHECK(model_to_json(back) == model_to_json(m));
}

TEST_CASE("model json rejects wrong schema") {
    CHECK_THROWS_AS(model_from_json("{}"), Error);
    CHECK_THROWS_AS(model_from_json("not json"), Error);
}

TEST_CASE("unknown ids raise") {
    const ModelPosterior m = toy_model();
    CHECK_THROWS_AS(predictive_prob(5, {0, 0}, 0, m), Error);
    CHECK_THROWS_AS(predictive_prob(0, {7, 0}, 0, m), Error);
    CHECK_THROWS_AS(predictive_prob(0, {0, 0}, 9, m), Error);
    const Word bad{{0, 9}, "", std::nullopt};
    CHECK_THROWS_AS(word_log_likelihood(bad, 0, m), Error);
}
