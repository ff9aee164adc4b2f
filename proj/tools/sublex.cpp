#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sublex/corpus.hpp"
#include "sublex/inference.hpp"
#include "sublex/phonomodel.hpp"
#include "sublex/represent.hpp"
#include "sublex/stats.hpp"
#include "sublex/synth.hpp"

namespace {

using nlohmann::json;
using namespace sublex;

// Exit code for assign runs where some rows failed but others succeeded.
constexpr int kPartialFailure = 21;

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SUBLEX_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void write_text(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open file for writing: " + path);
    out << content;
    if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        raise(ErrorCode::ParseError, "CSV is missing column: " + name);
    }
};

Csv load_csv(const std::string& path) {
    std::istringstream in(read_text(path));
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (first) {
            csv.header = std::move(fields);
            first = false;
        } else {
            csv.rows.push_back(std::move(fields));
        }
    }
    if (first) raise(ErrorCode::ParseError, "empty CSV: " + path);
    return csv;
}

// MAP assignments keyed by word id, from an `assign` output CSV.
std::map<std::string, int> load_assignments(const std::string& path) {
    const Csv csv = load_csv(path);
    const int id_col = csv.column("id");
    const int map_col = csv.column("map");
    std::map<std::string, int> out;
    for (const auto& row : csv.rows) {
        const std::string& cell = row[static_cast<std::size_t>(map_col)];
        if (cell.empty() || cell == "NA") continue;
        out[row[static_cast<std::size_t>(id_col)]] = std::stoi(cell);
    }
    if (out.empty()) raise(ErrorCode::ParseError, "no usable assignment rows in " + path);
    return out;
}

std::vector<double> parse_simplex(const std::string& text) {
    std::vector<double> probs;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) probs.push_back(std::stod(tok));
    return probs;
}

std::string format_prob(double p, bool full_precision) {
    std::ostringstream out;
    if (full_precision) {
        out << std::setprecision(17) << p;
    } else {
        out << std::fixed << std::setprecision(6) << p;
    }
    return out.str();
}

void print_contingency(const ContingencyTable& table, std::ostream& out) {
    out << "contingency (counts):\n";
    out << std::left << std::setw(16) << "";
    for (int c : table.cluster_ids) out << std::right << std::setw(10) << ("c" + std::to_string(c));
    out << std::right << std::setw(10) << "total" << '\n';
    for (std::size_t r = 0; r < table.class_names.size(); ++r) {
        out << std::left << std::setw(16) << table.class_names[r];
        for (std::size_t c = 0; c < table.cluster_ids.size(); ++c) {
            out << std::right << std::setw(10) << table.counts[r][c];
        }
        out << std::right << std::setw(10) << table.row_totals[r] << '\n';
    }
    out << "contingency (row proportions):\n";
    for (std::size_t r = 0; r < table.class_names.size(); ++r) {
        out << std::left << std::setw(16) << table.class_names[r];
        for (std::size_t c = 0; c < table.cluster_ids.size(); ++c) {
            out << std::right << std::setw(10) << std::fixed << std::setprecision(4)
                << static_cast<double>(table.counts[r][c]) /
                       static_cast<double>(table.row_totals[r]);
        }
        out << '\n';
    }
    out.unsetf(std::ios::fixed);
}

struct TrainArgs {
    std::string input, output, summary;
    bool compact = false;
    std::int64_t min_freq = 0;
    int threads = 0;
    TrainConfig config;
};

int cmd_train(const TrainArgs& args) {
    LexiconFormat format;
    format.compact = args.compact;
    Lexicon lexicon = load_lexicon(args.input, format);
    if (args.min_freq > 0) lexicon = filter_min_frequency(lexicon, args.min_freq);

    TrainConfig config = args.config;
    config.parallel_width = resolve_threads(args.threads);
    const TrainResult result = train(lexicon, config);
    save_model(result.model, args.output);

    const MapAssignment map = map_assignment(lexicon, result.model);
    const std::vector<double> weights = cluster_weights(result.model);

    json summary;
    summary["input"] = args.input;
    summary["n_words"] = lexicon.size();
    summary["k_max"] = config.k_max;
    summary["seed"] = config.seed;
    summary["n_restarts"] = config.n_restarts;
    summary["best_restart"] = result.restart_index;
    summary["final_elbo"] = result.model.meta.final_elbo;
    summary["converged"] = result.converged;
    summary["iterations"] = result.model.meta.iterations;
    summary["cluster_sizes"] = map.sizes;
    summary["cluster_weights"] = weights;
    summary["restart_elbos"] = result.restart_elbos;
    if (!args.summary.empty()) write_text(args.summary, summary.dump(2) + "\n");

    std::cout << "words: " << lexicon.size() << '\n';
    std::cout << "final ELBO: " << std::setprecision(10) << result.model.meta.final_elbo
              << (result.converged ? " (converged)" : " (iteration cap)") << '\n';
    std::cout << "best restart: " << result.restart_index << " of " << config.n_restarts << '\n';
    std::cout << "cluster sizes (MAP):";
    for (std::int64_t n : map.sizes) std::cout << ' ' << n;
    std::cout << '\n';
    std::cout << "model written to " << args.output << '\n';
    return 0;
}

struct AssignArgs {
    std::string input, model, output;
    bool compact = false;
    bool full_precision = false;
};

int cmd_assign(const AssignArgs& args) {
    const ModelPosterior model = load_model(args.model);
    LexiconFormat format;
    format.compact = args.compact;
    const Lexicon lexicon = load_lexicon(args.input, format);

    const bool same_alphabet = lexicon.alphabet == model.alphabet;
    std::ostringstream out;
    out << "id";
    for (int k = 0; k < model.k_max; ++k) out << ",p_" << k;
    out << ",map,note\n";
    std::size_t failed = 0;
    for (std::size_t i = 0; i < lexicon.words.size(); ++i) {
        const Word& src = lexicon.words[i];
        const std::string id = src.external_id.empty() ? std::to_string(i) : src.external_id;
        Word word = src;
        bool ok = true;
        if (!same_alphabet) {
            word.symbol_ids.clear();
            for (std::int32_t s : src.symbol_ids) {
                const std::string& tok = lexicon.alphabet.token(s);
                if (!model.alphabet.has(tok)) {
                    ok = false;
                    break;
                }
                word.symbol_ids.push_back(model.alphabet.id(tok));
            }
        }
        if (!ok) {
            ++failed;
            out << id;
            for (int k = 0; k < model.k_max; ++k) out << ',';
            out << ",NA,unknown_symbol\n";
            continue;
        }
        const std::vector<double> resp = responsibilities(word, model);
        int best = 0;
        for (int k = 1; k < model.k_max; ++k) {
            if (resp[static_cast<std::size_t>(k)] > resp[static_cast<std::size_t>(best)]) best = k;
        }
        out << id;
        for (double p : resp) out << ',' << format_prob(p, args.full_precision);
        out << ',' << best << ",\n";
    }
    if (failed == lexicon.words.size()) {
        raise(ErrorCode::IncompatibleModel, "no word in the lexicon fits the model alphabet");
    }
    write_text(args.output, out.str());
    return failed > 0 ? kPartialFailure : 0;
}

struct RepresentArgs {
    std::string model, input, output;
    std::string n_range = "1..3";
    std::int64_t min_freq = 10;
    int cluster = 0;
    bool token_positions = false;
    bool compact = false;
    std::string pattern, classes, query;
};

int cmd_represent(const RepresentArgs& args) {
    const ModelPosterior model = load_model(args.model);

    if (!args.query.empty()) {
        std::vector<std::string> tokens;
        std::istringstream in(args.query);
        std::string tok;
        while (in >> tok) tokens.push_back(tok);
        const Substring sub = Substring::parse(tokens, model.alphabet);
        std::ostringstream out;
        out << "item";
        for (int k = 0; k < model.k_max; ++k) out << ",score_cluster_" << k;
        out << '\n' << sub.to_string(model.alphabet);
        out << std::setprecision(12);
        for (int k = 0; k < model.k_max; ++k) {
            out << ',' << representativeness(sub, k, model);
        }
        out << '\n';
        write_text(args.output, out.str());
        return 0;
    }

    if (!args.pattern.empty()) {
        if (args.classes.empty()) {
            raise(ErrorCode::InvalidArgument, "--pattern requires --classes");
        }
        const auto classes = load_classes(args.classes);
        const PatternQuery query = PatternQuery::parse(read_text(args.pattern), classes,
                                                       model.alphabet);
        const PatternConditional cond = pattern_conditional(query, model);
        std::ostringstream out;
        out << "filler";
        for (int k = 0; k < model.k_max; ++k) {
            out << ",p_cluster_" << k << ",score_cluster_" << k;
        }
        out << '\n' << std::setprecision(12);
        for (std::size_t f = 0; f < cond.fillers.size(); ++f) {
            out << model.alphabet.token(cond.fillers[f]);
            for (int k = 0; k < model.k_max; ++k) {
                out << ',' << cond.conditional[static_cast<std::size_t>(k)][f]
                    << ',' << cond.scores[static_cast<std::size_t>(k)][f];
            }
            out << '\n';
        }
        write_text(args.output, out.str());
        return 0;
    }

    if (args.input.empty()) {
        raise(ErrorCode::InvalidArgument, "ranking mode requires --input");
    }
    const auto dots = args.n_range.find("..");
    int n_lo, n_hi;
    if (dots == std::string::npos) {
        n_lo = n_hi = std::stoi(args.n_range);
    } else {
        n_lo = std::stoi(args.n_range.substr(0, dots));
        n_hi = std::stoi(args.n_range.substr(dots + 2));
    }
    LexiconFormat format;
    format.compact = args.compact;
    const Lexicon lexicon = load_lexicon(args.input, format);
    const RepresentativenessReport report = rank_ngrams(
        model, lexicon, n_lo, n_hi, args.min_freq, args.cluster, args.token_positions);
    write_text(args.output, report_to_csv(report));
    return 0;
}

struct EvalArgs {
    std::string mode;
    std::string assignments, labels, groups, predictions, output;
    std::string null_probs;
    std::int64_t n_perms = 100000;
    std::int64_t n_boot = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

int eval_vmeasure(const EvalArgs& args) {
    const std::map<std::string, int> map = load_assignments(args.assignments);
    const LabelTable label_table = load_labels(args.labels);
    std::vector<std::string> labels;
    std::vector<int> clusters;
    for (const auto& [id, cluster] : map) {
        auto it = label_table.find(id);
        if (it == label_table.end()) {
            raise(ErrorCode::MissingAssignment, "no label for word id: " + id);
        }
        labels.push_back(it->second);
        clusters.push_back(cluster);
    }
    const ContingencyTable table = ContingencyTable::build(labels, clusters);
    const VMeasureResult vm = v_measure(table);
    const PermutationTestResult perm =
        permutation_test(labels, clusters, args.n_perms, args.seed);

    print_contingency(table, std::cout);
    std::cout << std::setprecision(6);
    std::cout << "homogeneity: " << vm.homogeneity << '\n';
    std::cout << "completeness: " << vm.completeness << '\n';
    std::cout << "v_measure: " << vm.v << '\n';
    std::cout << "permutation raw p: " << perm.raw_p
              << "  conservative p: " << perm.conservative_p
              << "  (n=" << perm.n_permutations << ")\n";

    json report;
    report["n_items"] = labels.size();
    report["homogeneity"] = vm.homogeneity;
    report["completeness"] = vm.completeness;
    report["v_measure"] = vm.v;
    report["permutation"] = {
        {"raw_p", perm.raw_p},
        {"conservative_p", perm.conservative_p},
        {"n_permutations", perm.n_permutations},
        {"null_mean", perm.null_mean},
        {"null_sd", perm.null_sd},
        {"seed", perm.seed},
    };
    json counts = json::array();
    for (std::size_t r = 0; r < table.class_names.size(); ++r) {
        counts.push_back({{"class", table.class_names[r]},
                          {"counts", table.counts[r]},
                          {"total", table.row_totals[r]}});
    }
    report["contingency"] = std::move(counts);
    report["cluster_ids"] = table.cluster_ids;
    if (!args.output.empty()) write_text(args.output, report.dump(2) + "\n");
    return 0;
}

int eval_groups(const EvalArgs& args) {
    const std::map<std::string, int> map = load_assignments(args.assignments);
    const LabelTable group_of = load_labels(args.groups);
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& [id, group] : group_of) groups[group].push_back(id);
    for (auto& [group, ids] : groups) std::sort(ids.begin(), ids.end());

    int n_clusters = 0;
    for (const auto& [id, cluster] : map) n_clusters = std::max(n_clusters, cluster + 1);
    std::vector<double> null_probs;
    if (!args.null_probs.empty()) {
        null_probs = parse_simplex(args.null_probs);
    } else {
        // Default null: the overall MAP proportions.
        null_probs.assign(static_cast<std::size_t>(n_clusters), 0.0);
        for (const auto& [id, cluster] : map) {
            null_probs[static_cast<std::size_t>(cluster)] += 1.0;
        }
        for (double& p : null_probs) p /= static_cast<double>(map.size());
    }
    if (static_cast<int>(null_probs.size()) > n_clusters) {
        n_clusters = static_cast<int>(null_probs.size());
    }

    const std::map<std::string, int> assignments(map.begin(), map.end());
    const std::vector<GroupProportionRow> rows = group_proportion_analysis(
        groups, assignments, n_clusters, null_probs, 200, args.seed);

    static const char* kStars[] = {"", "*", "**", "***"};
    std::ostringstream out;
    out << "group,n";
    for (int k = 0; k < n_clusters; ++k) out << ",prop_" << k;
    out << ",p_value,significance\n" << std::setprecision(8);
    for (const GroupProportionRow& row : rows) {
        out << row.group << ',' << row.n;
        for (double p : row.proportions) out << ',' << p;
        out << ',' << row.p_value << ',' << kStars[row.stars] << '\n';
    }
    write_text(args.output, out.str());
    return 0;
}

int eval_binary(const EvalArgs& args) {
    // CSV columns: id, truth, then exactly two prediction columns.
    const Csv csv = load_csv(args.predictions);
    if (csv.header.size() < 4) {
        raise(ErrorCode::ParseError, "binary eval needs columns id,truth,<a>,<b>");
    }
    const int truth_col = csv.column("truth");
    std::vector<int> pred_cols;
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
        if (csv.header[i] != "id" && csv.header[i] != "truth") {
            pred_cols.push_back(static_cast<int>(i));
        }
    }
    if (pred_cols.size() != 2) {
        raise(ErrorCode::ParseError, "binary eval needs exactly two prediction columns");
    }
    std::vector<bool> a_correct, b_correct;
    std::vector<std::pair<bool, bool>> paired;
    for (const auto& row : csv.rows) {
        const std::string& truth = row[static_cast<std::size_t>(truth_col)];
        const bool a = row[static_cast<std::size_t>(pred_cols[0])] == truth;
        const bool b = row[static_cast<std::size_t>(pred_cols[1])] == truth;
        a_correct.push_back(a);
        b_correct.push_back(b);
        paired.emplace_back(a, b);
    }
    const BootstrapResult boot_a =
        bootstrap_accuracy(a_correct, args.n_boot, args.level, args.seed);
    const BootstrapResult boot_b =
        bootstrap_accuracy(b_correct, args.n_boot, args.level, args.seed);
    const double p = mcnemar_exact(paired);

    std::cout << std::setprecision(6);
    std::cout << csv.header[static_cast<std::size_t>(pred_cols[0])] << ": accuracy "
              << boot_a.accuracy << " [" << boot_a.ci_low << ", " << boot_a.ci_high << "]\n";
    std::cout << csv.header[static_cast<std::size_t>(pred_cols[1])] << ": accuracy "
              << boot_b.accuracy << " [" << boot_b.ci_low << ", " << boot_b.ci_high << "]\n";
    std::cout << "McNemar exact p: " << std::setprecision(10) << p << '\n';

    json report;
    report[csv.header[static_cast<std::size_t>(pred_cols[0])]] = {
        {"accuracy", boot_a.accuracy}, {"ci_low", boot_a.ci_low}, {"ci_high", boot_a.ci_high}};
    report[csv.header[static_cast<std::size_t>(pred_cols[1])]] = {
        {"accuracy", boot_b.accuracy}, {"ci_low", boot_b.ci_low}, {"ci_high", boot_b.ci_high}};
    report["mcnemar_p"] = p;
    report["n_boot"] = args.n_boot;
    report["level"] = args.level;
    report["seed"] = args.seed;
    if (!args.output.empty()) write_text(args.output, report.dump(2) + "\n");
    return 0;
}

struct SynthArgs {
    std::string spec, output, labels;
    std::int64_t n_words = 1000;
    std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args) {
    const SourceSpec spec = SourceSpec::load(args.spec);
    const SynthResult result = generate_corpus(spec, args.n_words, args.seed);
    save_lexicon(result.lexicon, args.output);
    if (!args.labels.empty()) save_labels(result.labels, args.labels);

    std::cout << "generated " << result.n_generated << " words ("
              << result.n_duplicates << " duplicates dropped)\n";
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
        std::cout << spec.sources[i].name << ": " << result.source_counts[i] << " ("
                  << std::setprecision(4)
                  << static_cast<double>(result.source_counts[i]) /
                         static_cast<double>(result.n_generated)
                  << ")\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sublexicon discovery and analysis"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "fit a sublexicon mixture");
    train_cmd->add_option("--input", train_args.input, "lexicon file")->required();
    train_cmd->add_option("--output", train_args.output, "model checkpoint path")->required();
    train_cmd->add_option("--summary", train_args.summary, "run summary JSON path");
    train_cmd->add_flag("--compact", train_args.compact, "one-character-per-segment input");
    train_cmd->add_option("--min-freq", train_args.min_freq, "drop words below this frequency");
    train_cmd->add_option("--k-max", train_args.config.k_max, "truncation level");
    train_cmd->add_option("--restarts", train_args.config.n_restarts, "random restarts");
    train_cmd->add_option("--seed", train_args.config.seed, "base seed");
    train_cmd->add_option("--max-iters", train_args.config.max_iterations, "sweep cap");
    train_cmd->add_option("--tolerance", train_args.config.elbo_tolerance,
                          "absolute ELBO convergence tolerance");
    train_cmd->add_option("--gamma-shape", train_args.config.gamma_shape,
                          "concentration prior shape");
    train_cmd->add_option("--gamma-scale", train_args.config.gamma_scale,
                          "concentration prior scale");
    train_cmd->add_flag("--maximal-path", train_args.config.maximal_path,
                        "propagate full counts to backoff layers");
    train_cmd->add_option("--threads", train_args.threads, "restart parallelism");

    AssignArgs assign_args;
    CLI::App* assign_cmd = app.add_subcommand("assign", "per-word cluster probabilities");
    assign_cmd->add_option("--input", assign_args.input, "lexicon file")->required();
    assign_cmd->add_option("--model", assign_args.model, "model checkpoint")->required();
    assign_cmd->add_option("--output", assign_args.output, "CSV path (default stdout)");
    assign_cmd->add_flag("--compact", assign_args.compact, "one-character-per-segment input");
    assign_cmd->add_flag("--full-precision", assign_args.full_precision,
                         "print probabilities with 17 significant digits");

    RepresentArgs rep_args;
    CLI::App* rep_cmd = app.add_subcommand("represent", "representativeness analyses");
    rep_cmd->add_option("--model", rep_args.model, "model checkpoint")->required();
    rep_cmd->add_option("--input", rep_args.input, "lexicon for n-gram ranking");
    rep_cmd->add_option("--output", rep_args.output, "CSV path (default stdout)");
    rep_cmd->add_option("--n", rep_args.n_range, "n-gram length range, e.g. 1..3");
    rep_cmd->add_option("--min-freq", rep_args.min_freq, "minimum word types containing the n-gram");
    rep_cmd->add_option("--cluster", rep_args.cluster, "cluster whose ranking is requested");
    rep_cmd->add_flag("--token-positions", rep_args.token_positions,
                      "count occurrence positions instead of word types");
    rep_cmd->add_flag("--compact", rep_args.compact, "one-character-per-segment input");
    rep_cmd->add_option("--pattern", rep_args.pattern, "pattern query JSON file");
    rep_cmd->add_option("--classes", rep_args.classes, "symbol class definition JSON file");
    rep_cmd->add_option("--query", rep_args.query, "single substring, space-separated tokens");

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "clustering evaluation");
    eval_cmd->add_option("mode", eval_args.mode, "vmeasure | groups | binary")->required();
    eval_cmd->add_option("--assignments", eval_args.assignments, "assign output CSV");
    eval_cmd->add_option("--labels", eval_args.labels, "label table TSV");
    eval_cmd->add_option("--groups", eval_args.groups, "word-id-to-group TSV");
    eval_cmd->add_option("--predictions", eval_args.predictions,
                         "CSV with id,truth and two prediction columns");
    eval_cmd->add_option("--output", eval_args.output, "report path");
    eval_cmd->add_option("--null", eval_args.null_probs, "comma-separated null simplex");
    eval_cmd->add_option("--permutations", eval_args.n_perms, "permutation count");
    eval_cmd->add_option("--bootstrap", eval_args.n_boot, "bootstrap sample count");
    eval_cmd->add_option("--level", eval_args.level, "confidence level");
    eval_cmd->add_option("--seed", eval_args.seed, "resampling seed");

    SynthArgs synth_args;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic lexicon");
    synth_cmd->add_option("--spec", synth_args.spec, "source spec JSON")->required();
    synth_cmd->add_option("--output", synth_args.output, "lexicon output path")->required();
    synth_cmd->add_option("--labels", synth_args.labels, "true-source label output path");
    synth_cmd->add_option("--n", synth_args.n_words, "number of words to draw");
    synth_cmd->add_option("--seed", synth_args.seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorCode::InvalidArgument);
    }

    try {
        if (*train_cmd) return cmd_train(train_args);
        if (*assign_cmd) return cmd_assign(assign_args);
        if (*rep_cmd) return cmd_represent(rep_args);
        if (*synth_cmd) return cmd_synth(synth_args);
        if (*eval_cmd) {
            if (eval_args.mode == "vmeasure") return eval_vmeasure(eval_args);
            if (eval_args.mode == "groups") return eval_groups(eval_args);
            if (eval_args.mode == "binary") return eval_binary(eval_args);
            raise(ErrorCode::InvalidArgument, "unknown eval mode: " + eval_args.mode);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorCode::NumericalFailure);
    }
    return 0;
}
