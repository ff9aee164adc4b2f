#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sublex/error.hpp"
#include "sublex/phonomodel.hpp"

namespace sublex {

namespace {

using nlohmann::json;

constexpr const char* kSchema = "sublex-model/1";

json row_to_json(const CountRow& row, const Alphabet& alphabet) {
    // Sparse map: emission token -> count. Doubles round-trip exactly.
    json counts = json::object();
    for (std::size_t s = 0; s < row.counts.size(); ++s) {
        if (row.counts[s] != 0.0) {
            counts[alphabet.emission_token(static_cast<std::int32_t>(s))] = row.counts[s];
        }
    }
    return counts;
}

CountRow row_from_json(const json& counts, const Alphabet& alphabet) {
    CountRow row;
    row.counts.assign(static_cast<std::size_t>(alphabet.size() + 1), 0.0);
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        const std::string& tok = it.key();
        const std::int32_t s = (tok == Alphabet::kEosToken)
                                   ? alphabet.size()
                                   : alphabet.id(tok);
        row.counts[static_cast<std::size_t>(s)] = it.value().get<double>();
    }
    // Total recomputed in index order so it matches the in-memory construction.
    for (double c : row.counts) row.total += c;
    return row;
}

} // namespace

std::string model_to_json(const ModelPosterior& model) {
    json doc;
    doc["schema"] = kSchema;
    doc["alphabet"] = model.alphabet.symbols();
    doc["k_max"] = model.k_max;
    doc["stick_a"] = model.stick_a;
    doc["stick_b"] = model.stick_b;
    doc["concentrations"] = {
        {"alpha0", model.alpha0},
        {"alpha1", model.alpha1},
        {"alpha2", model.alpha2},
        {"alpha_cluster", model.alpha_cluster},
        {"gamma_shape", model.gamma_shape},
        {"gamma_scale", model.gamma_scale},
    };
    json clusters = json::array();
    for (const ClusterTable& table : model.tables) {
        json cluster;
        // Canonical order: sorted by packed context key, so the output does
        // not depend on hash-table iteration order.
        std::vector<std::uint32_t> trigram_keys;
        trigram_keys.reserve(table.trigram.size());
        for (const auto& [key, row] : table.trigram) trigram_keys.push_back(key);
        std::sort(trigram_keys.begin(), trigram_keys.end());
        json trigram = json::array();
        for (std::uint32_t key : trigram_keys) {
            const CountRow& row = table.trigram.at(key);
            const std::int32_t dim = model.ctx_dim();
            const std::int32_t prev2 = static_cast<std::int32_t>(key / static_cast<std::uint32_t>(dim));
            const std::int32_t prev1 = static_cast<std::int32_t>(key % static_cast<std::uint32_t>(dim));
            trigram.push_back({
                {"context", {model.alphabet.context_token(prev2),
                             model.alphabet.context_token(prev1)}},
                {"counts", row_to_json(row, model.alphabet)},
            });
        }
        std::vector<std::int32_t> bigram_keys;
        bigram_keys.reserve(table.bigram.size());
        for (const auto& [prev1, row] : table.bigram) bigram_keys.push_back(prev1);
        std::sort(bigram_keys.begin(), bigram_keys.end());
        json bigram = json::array();
        for (std::int32_t prev1 : bigram_keys) {
            bigram.push_back({
                {"context", {model.alphabet.context_token(prev1)}},
                {"counts", row_to_json(table.bigram.at(prev1), model.alphabet)},
            });
        }
        cluster["trigram"] = std::move(trigram);
        cluster["bigram"] = std::move(bigram);
        cluster["unigram"] = table.unigram.counts.empty()
                                 ? json::object()
                                 : row_to_json(table.unigram, model.alphabet);
        clusters.push_back(std::move(cluster));
    }
    doc["clusters"] = std::move(clusters);
    doc["metadata"] = {
        {"elbo", model.meta.final_elbo},
        {"iterations", model.meta.iterations},
        {"seed", model.meta.seed},
        {"converged", model.meta.converged},
        {"restart_index", model.meta.restart_index},
    };
    return doc.dump(2);
}

ModelPosterior model_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad model JSON: ") + e.what());
    }
    if (!doc.contains("schema") || doc["schema"] != kSchema) {
        raise(ErrorCode::IncompatibleModel, "missing or unsupported model schema tag");
    }
    ModelPosterior model;
    try {
        model.alphabet = Alphabet(doc.at("alphabet").get<std::vector<std::string>>());
        model.k_max = doc.at("k_max").get<int>();
        model.stick_a = doc.at("stick_a").get<std::vector<double>>();
        model.stick_b = doc.at("stick_b").get<std::vector<double>>();
        const json& conc = doc.at("concentrations");
        model.alpha0 = conc.at("alpha0").get<double>();
        model.alpha1 = conc.at("alpha1").get<double>();
        model.alpha2 = conc.at("alpha2").get<double>();
        model.alpha_cluster = conc.at("alpha_cluster").get<double>();
        model.gamma_shape = conc.at("gamma_shape").get<double>();
        model.gamma_scale = conc.at("gamma_scale").get<double>();
        const json& clusters = doc.at("clusters");
        if (model.k_max < 1 || static_cast<int>(clusters.size()) != model.k_max ||
            static_cast<int>(model.stick_a.size()) != model.k_max - 1 ||
            static_cast<int>(model.stick_b.size()) != model.k_max - 1) {
            raise(ErrorCode::IncompatibleModel, "inconsistent cluster/stick shapes");
        }
        for (const json& cluster : clusters) {
            ClusterTable table;
            for (const json& entry : cluster.at("trigram")) {
                const auto ctx_tokens = entry.at("context").get<std::vector<std::string>>();
                if (ctx_tokens.size() != 2) {
                    raise(ErrorCode::ParseError, "trigram context must have 2 tokens");
                }
                auto ctx_id = [&](const std::string& tok) {
                    return tok == Alphabet::kBosToken ? model.alphabet.size()
                                                      : model.alphabet.id(tok);
                };
                const ContextKey ctx{ctx_id(ctx_tokens[0]), ctx_id(ctx_tokens[1])};
                table.trigram.emplace(pack_context(ctx, model.ctx_dim()),
                                      row_from_json(entry.at("counts"), model.alphabet));
            }
            for (const json& entry : cluster.at("bigram")) {
                const auto ctx_tokens = entry.at("context").get<std::vector<std::string>>();
                if (ctx_tokens.size() != 1) {
                    raise(ErrorCode::ParseError, "bigram context must have 1 token");
                }
                const std::int32_t prev1 = ctx_tokens[0] == Alphabet::kBosToken
                                               ? model.alphabet.size()
                                               : model.alphabet.id(ctx_tokens[0]);
                table.bigram.emplace(prev1, row_from_json(entry.at("counts"), model.alphabet));
            }
            const json& uni = cluster.at("unigram");
            if (!uni.empty()) table.unigram = row_from_json(uni, model.alphabet);
            model.tables.push_back(std::move(table));
        }
        const json& meta = doc.at("metadata");
        model.meta.final_elbo = meta.at("elbo").get<double>();
        model.meta.iterations = meta.at("iterations").get<int>();
        model.meta.seed = meta.at("seed").get<std::uint64_t>();
        model.meta.converged = meta.at("converged").get<bool>();
        model.meta.restart_index = meta.value("restart_index", 0);
    } catch (const json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad model JSON: ") + e.what());
    }
    return model;
}

void save_model(const ModelPosterior& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open file for writing: " + path);
    out << model_to_json(model) << '\n';
    if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

ModelPosterior load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace sublex
