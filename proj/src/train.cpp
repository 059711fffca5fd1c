#include "ag/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

#include "json.hpp"

#include "ag/adam.hpp"
#include "ag/analysis.hpp"
#include "ag/checkpoint.hpp"
#include "ag/errors.hpp"
#include "ag/objective.hpp"

namespace ag {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::string format_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw io_error("write failed for '" + path + "'");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw parse_error(where + ": unknown key '" + it.key() + "'");
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

std::size_t get_size(const json& obj, const char* key, std::size_t fallback,
                     const std::string& where) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (v->is_number_unsigned()) return v->get<std::size_t>();
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0) return v->get<std::size_t>();
    throw parse_error(where + ": '" + key + "' must be a non-negative integer");
}

std::uint64_t get_u64(const json& obj, const char* key, std::uint64_t fallback,
                      const std::string& where) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0) return v->get<std::uint64_t>();
    throw parse_error(where + ": '" + key + "' must be a non-negative integer");
}

double get_double(const json& obj, const char* key, double fallback, const std::string& where) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) throw parse_error(where + ": '" + key + "' must be a number");
    return v->get<double>();
}

std::string get_string(const json& obj, const char* key, std::string fallback,
                       const std::string& where) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) throw parse_error(where + ": '" + key + "' must be a string");
    return v->get<std::string>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
    const json* v = find(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) throw parse_error(where + ": '" + key + "' must be a boolean");
    return v->get<bool>();
}

ordered_json config_to_json(const RunConfig& c) {
    ordered_json arch = {
        {"layers", c.arch.layers},       {"heads", c.arch.heads},
        {"d_model", c.arch.d_model},     {"d_k", c.arch.d_k},
        {"seq_len", c.arch.seq_len},     {"ffn_hidden", c.arch.ffn_hidden},
    };
    ordered_json layers = ordered_json::array();
    for (std::uint8_t m : c.guiding.layer_mask) layers.push_back(m != 0 ? 1 : 0);
    ordered_json guiding = {
        {"guide", to_string(c.guiding.guide_kind)},
        {"alpha", c.guiding.alpha},
        {"beta", c.guiding.beta},
        {"tau", c.guiding.tau},
        {"pattern_weight", c.guiding.pattern_weight},
        {"layers", layers},
        {"pdg_raw_rows", c.guiding.pdg_raw_rows},
    };
    ordered_json data = {
        {"train", c.data.train_path},   {"dev", c.data.dev_path},
        {"test", c.data.test_path},     {"n", c.data.n},
        {"n_dev", c.data.n_dev},        {"n_test", c.data.n_test},
        {"claims", c.data.claims},      {"candidates", c.data.candidates},
        {"vocab_size", c.data.vocab_size},
        {"data_seed", c.data.data_seed},
        {"pmi_window", c.data.pmi_window},
        {"prior_file", c.data.prior_file},
    };
    return ordered_json{
        {"task", to_string(c.task)},
        {"arch", arch},
        {"guiding", guiding},
        {"data", data},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"seed", c.seed},
        {"fraction", c.fraction},
        {"out_dir", c.out_dir},
    };
}

std::string mask_string(const std::vector<std::uint8_t>& mask) {
    std::string s;
    for (std::uint8_t m : mask) s += m != 0 ? '1' : '0';
    return s;
}

}  // namespace

void RunConfig::validate() const {
    require(epochs >= 1, "config: epochs must be >= 1");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(fraction > 0.0 && fraction <= 1.0, "config: fraction must be in (0, 1]");
    require(learning_rate > 0.0 && std::isfinite(learning_rate),
            "config: learning_rate must be > 0");
    require(arch.layers > 0 && arch.heads > 0 && arch.d_model > 0 && arch.d_k > 0 &&
                arch.seq_len > 0 && arch.ffn_hidden > 0,
            "config: architecture dimensions must be positive");
    require(arch.d_k * arch.heads == arch.d_model,
            "config: d_k * heads must equal d_model");
    guiding.validate(arch.layers);
    if (!data.synthetic()) {
        require(!data.dev_path.empty(), "config: TSV data needs a dev path");
    }
    if (guiding.guide_kind == GuideKind::prior_file) {
        require(!data.prior_file.empty(), "config: prior-file guide needs data.prior_file");
    }
}

RunConfig RunConfig::normalized() const {
    RunConfig c = *this;
    const GuidingConfig& g = c.guiding;
    const bool active = (guide_uses_mdg(g.guide_kind) && g.alpha != 0.0) ||
                        (guide_uses_pdg(g.guide_kind) && g.beta != 0.0) ||
                        (guide_uses_pattern(g.guide_kind) && g.pattern_weight != 0.0);
    if (!active) c.guiding.guide_kind = GuideKind::none;
    return c;
}

RunConfig run_config_from_json_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw parse_error(origin + ": " + e.what());
    }
    if (!root.is_object()) throw parse_error(origin + ": config must be a JSON object");

    RunConfig c;
    try {
        reject_unknown(root,
                       {"task", "arch", "guiding", "data", "epochs", "batch_size",
                        "learning_rate", "seed", "fraction", "out_dir"},
                       origin);
        c.task = parse_task_kind(get_string(root, "task", "nli", origin));
        if (const json* arch = find(root, "arch")) {
            const std::string where = origin + ".arch";
            if (!arch->is_object()) throw parse_error(where + ": must be an object");
            reject_unknown(*arch, {"layers", "heads", "d_model", "d_k", "seq_len", "ffn_hidden"},
                           where);
            c.arch.layers = get_size(*arch, "layers", c.arch.layers, where);
            c.arch.heads = get_size(*arch, "heads", c.arch.heads, where);
            c.arch.d_model = get_size(*arch, "d_model", c.arch.d_model, where);
            c.arch.d_k = get_size(*arch, "d_k", c.arch.d_k, where);
            c.arch.seq_len = get_size(*arch, "seq_len", c.arch.seq_len, where);
            c.arch.ffn_hidden = get_size(*arch, "ffn_hidden", c.arch.ffn_hidden, where);
        }
        if (const json* guiding = find(root, "guiding")) {
            const std::string where = origin + ".guiding";
            if (!guiding->is_object()) throw parse_error(where + ": must be an object");
            reject_unknown(*guiding,
                           {"guide", "alpha", "beta", "tau", "pattern_weight", "layers",
                            "pdg_raw_rows"},
                           where);
            c.guiding.guide_kind =
                parse_guide_kind(get_string(*guiding, "guide", "none", where));
            c.guiding.alpha = get_double(*guiding, "alpha", 0.0, where);
            c.guiding.beta = get_double(*guiding, "beta", 0.0, where);
            c.guiding.tau = get_double(*guiding, "tau", 1.0, where);
            c.guiding.pattern_weight = get_double(*guiding, "pattern_weight", 1.0, where);
            c.guiding.pdg_raw_rows = get_bool(*guiding, "pdg_raw_rows", false, where);
            if (const json* layers = find(*guiding, "layers")) {
                if (!layers->is_array()) throw parse_error(where + ".layers: must be an array");
                for (const json& v : *layers) {
                    if (!v.is_number_integer() && !v.is_number_unsigned() && !v.is_boolean()) {
                        throw parse_error(where + ".layers: entries must be 0/1");
                    }
                    c.guiding.layer_mask.push_back(v.get<int>() != 0 ? 1 : 0);
                }
            }
        }
        if (const json* data = find(root, "data")) {
            const std::string where = origin + ".data";
            if (!data->is_object()) throw parse_error(where + ": must be an object");
            reject_unknown(*data,
                           {"train", "dev", "test", "n", "n_dev", "n_test", "claims",
                            "candidates", "vocab_size", "data_seed", "pmi_window",
                            "prior_file"},
                           where);
            c.data.train_path = get_string(*data, "train", "", where);
            c.data.dev_path = get_string(*data, "dev", "", where);
            c.data.test_path = get_string(*data, "test", "", where);
            c.data.n = get_size(*data, "n", c.data.n, where);
            c.data.n_dev = get_size(*data, "n_dev", c.data.n_dev, where);
            c.data.n_test = get_size(*data, "n_test", c.data.n_test, where);
            c.data.claims = get_size(*data, "claims", c.data.claims, where);
            c.data.candidates = get_size(*data, "candidates", c.data.candidates, where);
            c.data.vocab_size = get_size(*data, "vocab_size", c.data.vocab_size, where);
            c.data.data_seed = get_u64(*data, "data_seed", c.data.data_seed, where);
            c.data.pmi_window = get_size(*data, "pmi_window", c.data.pmi_window, where);
            c.data.prior_file = get_string(*data, "prior_file", "", where);
        }
        c.epochs = get_size(root, "epochs", c.epochs, origin);
        c.batch_size = get_size(root, "batch_size", c.batch_size, origin);
        c.learning_rate = get_double(root, "learning_rate", c.learning_rate, origin);
        c.seed = get_u64(root, "seed", c.seed, origin);
        c.fraction = get_double(root, "fraction", c.fraction, origin);
        c.out_dir = get_string(root, "out_dir", "", origin);
    } catch (const json::exception& e) {
        throw parse_error(origin + ": " + e.what());
    }
    if (c.guiding.layer_mask.empty()) {
        c.guiding.layer_mask.assign(c.arch.layers, 1);
    }
    return c;
}

RunConfig run_config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return run_config_from_json_text(text, path);
}

std::string run_config_to_json(const RunConfig& config) {
    return config_to_json(config).dump(2) + "\n";
}

std::string TrainReport::report_json() const {
    ordered_json j;
    // The snapshot identifies the experiment, not its surroundings: out_dir
    // is dropped so runs differing only in output location stay
    // byte-identical.
    RunConfig snapshot = config;
    snapshot.out_dir.clear();
    j["config"] = config_to_json(snapshot);
    ordered_json epoch_rows = ordered_json::array();
    for (const EpochRecord& rec : epochs) {
        epoch_rows.push_back(ordered_json{
            {"task_loss", rec.task_loss},
            {"mdg_loss", rec.mdg_loss},
            {"pdg_loss", rec.pdg_loss},
            {"pattern_loss", rec.pattern_loss},
            {"total_loss", rec.total_loss},
            {"dev_metric", rec.dev_metric},
        });
    }
    j["epochs"] = epoch_rows;
    ordered_json final_j;
    final_j["dev_metric"] = final_dev_metric;
    final_j["test_metric"] = final_test_metric;
    if (config.task == TaskKind::nli) {
        final_j["test"] = ordered_json{
            {"accuracy", test_classification.accuracy},
            {"precision", test_classification.precision},
            {"recall", test_classification.recall},
            {"f1", test_classification.f1},
        };
    } else {
        ordered_json recalls;
        for (const auto& [k, value] : test_ranking.recall_at_k) {
            recalls[std::to_string(k)] = value;
        }
        final_j["test"] = ordered_json{{"mrr", test_ranking.mrr}, {"recall_at_k", recalls}};
    }
    final_j["head_diversity"] = head_diversity_mean;
    final_j["decorrelation_score"] = decorrelation_mean;
    j["final"] = final_j;
    return j.dump(2) + "\n";
}

double TrainReport::mean_epoch_seconds() const {
    if (epochs.empty()) return 0.0;
    double sum = 0.0;
    for (const EpochRecord& rec : epochs) sum += rec.seconds;
    return sum / static_cast<double>(epochs.size());
}

Dataset load_dataset(const RunConfig& config) {
    Dataset out;
    const DataConfig& d = config.data;
    const std::size_t L = config.arch.seq_len;
    if (!d.synthetic()) {
        require(!d.dev_path.empty(), "config: TSV data needs a dev path");
        const std::vector<RawPair> train_rows = read_tsv_rows(d.train_path, config.task);
        std::vector<std::string> corpus;
        corpus.reserve(train_rows.size() * 2);
        for (const RawPair& row : train_rows) {
            corpus.push_back(row.first);
            corpus.push_back(row.second);
        }
        out.vocab = build_vocab(corpus);
        out.train = examples_from_rows(train_rows, out.vocab, L);
        out.dev = load_tsv_pairs(d.dev_path, out.vocab, L, config.task);
        const std::string& test_path = d.test_path.empty() ? d.dev_path : d.test_path;
        out.test = load_tsv_pairs(test_path, out.vocab, L, config.task);
    } else if (config.task == TaskKind::nli) {
        out.vocab = synthetic_vocabulary(d.vocab_size);
        out.train = generate_synthetic_nli(d.n, d.vocab_size, L, d.data_seed);
        out.dev = generate_synthetic_nli(d.n_dev, d.vocab_size, L, d.data_seed + 1);
        out.test = generate_synthetic_nli(d.n_test, d.vocab_size, L, d.data_seed + 2);
    } else {
        out.vocab = synthetic_vocabulary(d.vocab_size);
        const std::size_t eval_claims = std::max<std::size_t>(std::size_t{1}, d.claims / 5);
        out.train = generate_synthetic_ranking(d.claims, d.candidates, d.vocab_size, L,
                                               d.data_seed);
        out.dev = generate_synthetic_ranking(eval_claims, d.candidates, d.vocab_size, L,
                                             d.data_seed + 1);
        out.test = generate_synthetic_ranking(eval_claims, d.candidates, d.vocab_size, L,
                                              d.data_seed + 2);
    }
    require(!out.train.empty() && !out.dev.empty() && !out.test.empty(),
            "config: every split must be non-empty");
    if (config.fraction < 1.0) {
        out.train = subsample(out.train, config.fraction, d.data_seed + 101);
    }
    for (const std::vector<Example>* split : {&out.train, &out.dev, &out.test}) {
        for (const Example& e : *split) validate_example(e, out.vocab.size(), L);
    }
    return out;
}

namespace {

double dev_metric_of(const ModelParameters& params, const std::vector<Example>& examples,
                     TaskKind task) {
    if (task == TaskKind::nli) {
        const std::vector<int> predictions = predict_classes(params, examples);
        std::vector<int> labels;
        labels.reserve(examples.size());
        for (const Example& e : examples) labels.push_back(e.label);
        return classification_metrics(predictions, labels, params.arch.classes).accuracy;
    }
    const std::vector<double> scores = predict_positive_scores(params, examples);
    std::vector<std::size_t> groups;
    std::vector<int> relevance;
    groups.reserve(examples.size());
    relevance.reserve(examples.size());
    for (const Example& e : examples) {
        groups.push_back(e.group_id);
        relevance.push_back(e.label);
    }
    return ranking_report(groups, relevance, scores, {}).mrr;
}

}  // namespace

TrainReport run_training(const RunConfig& raw_config) {
    const RunConfig config = raw_config.normalized();
    config.validate();
    const Dataset data = load_dataset(config);

    ArchitectureConfig arch = config.arch;
    arch.classes = config.task == TaskKind::nli ? 3 : 2;
    arch.vocab_size = data.vocab.size();
    arch.validate();

    const GuidingConfig& guiding = config.guiding;
    const GuideResources resources =
        prepare_guide_resources(guiding.guide_kind, data.train, config.data.pmi_window,
                                config.data.prior_file, arch.seq_len);

    Rng rng(config.seed);
    ModelParameters params = ModelParameters::random_init(arch, rng);
    ModelParameters grads = ModelParameters::zeros(arch);
    std::vector<Matrix*> param_tensors = params.tensors();
    const std::vector<const Matrix*> grad_tensors = std::as_const(grads).tensors();
    AdamState adam = adam_init(std::as_const(params).tensors());
    AdamConfig adam_config;
    adam_config.lr = config.learning_rate;

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    BatchWorkspace workspace;
    std::vector<const Example*> batch;
    batch.reserve(config.batch_size);

    TrainReport report;
    report.config = config;
    report.epochs.reserve(config.epochs);
    const double inv_n = 1.0 / static_cast<double>(data.train.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        rng.shuffle(order);
        EpochRecord rec;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&data.train[order[i]]);
            grads.set_zero();
            const BatchLoss loss = batch_total_loss(params, batch, config.task, guiding,
                                                    resources, workspace, &grads);
            adam_step(param_tensors, grad_tensors, adam, adam_config);
            const double w = static_cast<double>(batch.size());
            rec.task_loss += loss.task * w;
            rec.mdg_loss += loss.mdg * w;
            rec.pdg_loss += loss.pdg * w;
            rec.pattern_loss += loss.pattern * w;
            rec.total_loss += loss.total * w;
        }
        rec.task_loss *= inv_n;
        rec.mdg_loss *= inv_n;
        rec.pdg_loss *= inv_n;
        rec.pattern_loss *= inv_n;
        rec.total_loss *= inv_n;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
        rec.dev_metric = dev_metric_of(params, data.dev, config.task);
        report.epochs.push_back(rec);
    }
    report.final_dev_metric = report.epochs.back().dev_metric;

    if (config.task == TaskKind::nli) {
        const std::vector<int> predictions = predict_classes(params, data.test);
        std::vector<int> labels;
        labels.reserve(data.test.size());
        for (const Example& e : data.test) labels.push_back(e.label);
        report.test_classification = classification_metrics(predictions, labels, arch.classes);
        report.final_test_metric = report.test_classification.accuracy;
    } else {
        const std::vector<double> scores = predict_positive_scores(params, data.test);
        std::vector<std::size_t> groups;
        std::vector<int> relevance;
        for (const Example& e : data.test) {
            groups.push_back(e.group_id);
            relevance.push_back(e.label);
        }
        report.test_ranking = ranking_report(groups, relevance, scores, {1, 3, 5, 20});
        report.final_test_metric = report.test_ranking.mrr;
    }

    const std::size_t sample_n = std::min<std::size_t>(32, data.test.size());
    const std::vector<Example> sample(data.test.begin(),
                                      data.test.begin() + static_cast<std::ptrdiff_t>(sample_n));
    const AttentionStats stats = attention_statistics(params, sample);
    report.head_diversity_mean = stats.head_diversity_mean;
    report.decorrelation_mean = stats.decorrelation_mean;

    if (!config.out_dir.empty()) {
        ensure_dir(config.out_dir);
        write_text(config.out_dir + "/report.json", report.report_json());
        std::string timing = "epoch,seconds\n";
        for (std::size_t i = 0; i < report.epochs.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%zu,%.3f\n", i, report.epochs[i].seconds);
            timing += buf;
        }
        write_text(config.out_dir + "/timing.csv", timing);
        save_checkpoint(config.out_dir + "/model.ckpt", params, data.vocab.id_to_token());
    }
    return report;
}

namespace {

// Sweeps explore the guided configurations; a base config left at guide
// "none" means "use the combined mdg+pdg guide".
GuideKind sweep_guide_kind(const RunConfig& base) {
    return base.guiding.guide_kind == GuideKind::none ? GuideKind::mdg_pdg
                                                      : base.guiding.guide_kind;
}

}  // namespace

GridResult run_grid(const RunConfig& base, const std::vector<double>& alphas,
                    const std::vector<double>& betas) {
    require(!alphas.empty() && !betas.empty(), "run_grid: empty value lists");
    GridResult result;
    result.alphas = alphas;
    result.betas = betas;
    for (double alpha : alphas) {
        for (double beta : betas) {
            RunConfig cfg = base;
            cfg.guiding.guide_kind = sweep_guide_kind(base);
            cfg.guiding.alpha = alpha;
            cfg.guiding.beta = beta;
            if (!base.out_dir.empty()) {
                cfg.out_dir =
                    base.out_dir + "/grid_a" + format_g(alpha) + "_b" + format_g(beta);
            }
            result.reports.push_back(run_training(cfg));
        }
    }

    const auto cell_key = [&](std::size_t i) {
        const RunConfig& c = result.reports[i].config;
        return std::make_pair(-result.reports[i].final_dev_metric,
                              c.guiding.alpha + c.guiding.beta);
    };
    result.best_index = 0;
    for (std::size_t i = 1; i < result.reports.size(); ++i) {
        if (cell_key(i) < cell_key(result.best_index)) result.best_index = i;
    }

    if (!base.out_dir.empty()) {
        std::string csv = "alpha,beta,dev_metric,test_metric,best\n";
        for (std::size_t i = 0; i < result.reports.size(); ++i) {
            const TrainReport& r = result.reports[i];
            csv += format_g(r.config.guiding.alpha) + "," + format_g(r.config.guiding.beta) +
                   "," + format_metric(r.final_dev_metric) + "," +
                   format_metric(r.final_test_metric) + "," +
                   (i == result.best_index ? "1" : "0") + "\n";
        }
        write_text(base.out_dir + "/grid.csv", csv);
    }
    return result;
}

std::vector<TrainReport> run_layer_sweep(const RunConfig& base) {
    require(base.arch.layers >= 1, "run_layer_sweep: no layers");
    std::vector<TrainReport> reports;
    reports.reserve(base.arch.layers + 1);
    for (std::size_t layer = 0; layer <= base.arch.layers; ++layer) {
        const bool all = layer == base.arch.layers;
        RunConfig cfg = base;
        cfg.guiding.guide_kind = sweep_guide_kind(base);
        cfg.guiding.layer_mask.assign(base.arch.layers, all ? 1 : 0);
        if (!all) cfg.guiding.layer_mask[layer] = 1;
        if (!base.out_dir.empty()) {
            cfg.out_dir = base.out_dir + "/layer_" + (all ? "all" : std::to_string(layer));
        }
        reports.push_back(run_training(cfg));
    }

    if (!base.out_dir.empty()) {
        std::string csv = "layers,mask,dev_metric,test_metric\n";
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const bool all = i + 1 == reports.size();
            csv += (all ? std::string("all") : std::to_string(i)) + "," +
                   mask_string(reports[i].config.guiding.layer_mask) + "," +
                   format_metric(reports[i].final_dev_metric) + "," +
                   format_metric(reports[i].final_test_metric) + "\n";
        }
        write_text(base.out_dir + "/layer_sweep.csv", csv);
    }
    return reports;
}

std::vector<SizeSweepCell> run_size_sweep(const RunConfig& base,
                                          const std::vector<double>& fractions) {
    require(!fractions.empty(), "run_size_sweep: empty fraction list");
    std::vector<SizeSweepCell> cells;
    cells.reserve(fractions.size());
    for (double fraction : fractions) {
        require(fraction > 0.0 && fraction <= 1.0,
                "run_size_sweep: fractions must be in (0, 1]");
        SizeSweepCell cell;
        cell.fraction = fraction;

        RunConfig guided = base;
        guided.guiding.guide_kind = sweep_guide_kind(base);
        guided.fraction = fraction;
        if (!base.out_dir.empty()) {
            guided.out_dir = base.out_dir + "/size_" + format_g(fraction) + "_guided";
        }
        cell.guided = run_training(guided);

        RunConfig unguided = base;
        unguided.guiding.guide_kind = GuideKind::none;
        unguided.guiding.alpha = 0.0;
        unguided.guiding.beta = 0.0;
        unguided.guiding.pattern_weight = 0.0;
        unguided.fraction = fraction;
        if (!base.out_dir.empty()) {
            unguided.out_dir = base.out_dir + "/size_" + format_g(fraction) + "_unguided";
        }
        cell.unguided = run_training(unguided);
        cells.push_back(std::move(cell));
    }

    if (!base.out_dir.empty()) {
        std::string csv = "fraction,guided_dev,guided_test,unguided_dev,unguided_test\n";
        for (const SizeSweepCell& cell : cells) {
            csv += format_g(cell.fraction) + "," + format_metric(cell.guided.final_dev_metric) +
                   "," + format_metric(cell.guided.final_test_metric) + "," +
                   format_metric(cell.unguided.final_dev_metric) + "," +
                   format_metric(cell.unguided.final_test_metric) + "\n";
        }
        write_text(base.out_dir + "/size_sweep.csv", csv);
    }
    return cells;
}

std::string evaluate_checkpoint(const std::string& checkpoint_path, const std::string& data_path,
                                TaskKind task) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const Vocabulary vocab = vocabulary_from_tokens(ckpt.vocab_tokens);
    const ArchitectureConfig& arch = ckpt.params.arch;
    if (task == TaskKind::ranking && arch.classes != 2) {
        throw std::invalid_argument("checkpoint has " + std::to_string(arch.classes) +
                                    " classes; the ranking task needs 2");
    }
    if (task == TaskKind::nli && arch.classes != 3) {
        throw std::invalid_argument("checkpoint has " + std::to_string(arch.classes) +
                                    " classes; the nli task needs 3");
    }
    const std::vector<Example> examples = load_tsv_pairs(data_path, vocab, arch.seq_len, task);
    require(!examples.empty(), "evaluate: data file has no examples");

    ordered_json j;
    j["task"] = to_string(task);
    j["examples"] = examples.size();
    if (task == TaskKind::nli) {
        const std::vector<int> predictions = predict_classes(ckpt.params, examples);
        std::vector<int> labels;
        for (const Example& e : examples) labels.push_back(e.label);
        const ClassificationReport report =
            classification_metrics(predictions, labels, arch.classes);
        j["metrics"] = ordered_json{
            {"accuracy", report.accuracy},
            {"precision", report.precision},
            {"recall", report.recall},
            {"f1", report.f1},
        };
    } else {
        const std::vector<double> scores = predict_positive_scores(ckpt.params, examples);
        std::vector<std::size_t> groups;
        std::vector<int> relevance;
        for (const Example& e : examples) {
            groups.push_back(e.group_id);
            relevance.push_back(e.label);
        }
        const RankingReport report = ranking_report(groups, relevance, scores, {1, 3, 5, 20});
        ordered_json recalls;
        for (const auto& [k, value] : report.recall_at_k) recalls[std::to_string(k)] = value;
        j["metrics"] = ordered_json{{"mrr", report.mrr}, {"recall_at_k", recalls}};
    }
    return j.dump(2) + "\n";
}

void run_analyze(const std::string& checkpoint_path, const std::string& data_path, TaskKind task,
                 std::size_t heatmap_index, std::size_t pca_samples,
                 const std::string& out_dir) {
    require(!out_dir.empty(), "analyze: output directory required");
    require(pca_samples >= 1, "analyze: need at least one PCA sample");
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const Vocabulary vocab = vocabulary_from_tokens(ckpt.vocab_tokens);
    const ArchitectureConfig& arch = ckpt.params.arch;
    const std::vector<Example> examples = load_tsv_pairs(data_path, vocab, arch.seq_len, task);
    require(heatmap_index < examples.size(), "analyze: heatmap example index out of range");

    ensure_dir(out_dir);
    EncoderCache cache;
    const Example& target = examples[heatmap_index];
    encoder_forward(ckpt.params, target.ids, target.mask, cache);
    std::vector<std::string> tokens;
    tokens.reserve(arch.seq_len);
    for (int id : target.ids) tokens.push_back(vocab.token_of(static_cast<std::size_t>(id)));
    export_heatmap(attention_from_cache(cache, arch), tokens, out_dir + "/heatmap.csv");

    const std::size_t n = std::min(pca_samples, examples.size());
    const std::vector<std::uint8_t> all_layers(arch.layers, 1);
    std::vector<AttentionMatrix> matrices;
    matrices.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        encoder_forward(ckpt.params, examples[i].ids, examples[i].mask, cache);
        matrices.push_back(
            build_attention_matrix(attention_from_cache(cache, arch), all_layers,
                                   examples[i].mask));
    }
    pca_heads(matrices, out_dir + "/pca.csv");
}

}  // namespace ag
