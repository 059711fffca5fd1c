#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ag/data.hpp"
#include "ag/errors.hpp"
#include "ag/train.hpp"

namespace {

// Flag values shared by the training-style subcommands. A flag is applied to
// the config only when the subcommand actually saw it on the command line.
struct SharedFlags {
    std::string config_path;
    std::string out_dir;
    std::string data_path;
    std::string task;
    std::string guide;
    std::string layers;
    std::uint64_t seed = 0;
    double fraction = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    double tau = 1.0;
    std::size_t epochs = 0;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--data", f.data_path, "training TSV (dev defaults to the same file)");
    cmd->add_option("--task", f.task, "task kind: nli or ranking");
    cmd->add_option("--guide", f.guide,
                    "guide kind: mdg+pdg, mdg, pdg, none, first, next, prev, delim, period, "
                    "pmi, prior-file");
    cmd->add_option("--layers", f.layers, "layer mask, e.g. 10 or 'all'");
    cmd->add_option("--seed", f.seed, "training seed");
    cmd->add_option("--fraction", f.fraction, "training-set fraction in (0, 1]");
    cmd->add_option("--alpha", f.alpha, "map-discrimination weight");
    cmd->add_option("--beta", f.beta, "pattern-decorrelation weight");
    cmd->add_option("--tau", f.tau, "discrimination temperature");
    cmd->add_option("--epochs", f.epochs, "training epochs");
}

std::vector<std::uint8_t> parse_layer_mask(const std::string& text, std::size_t layers) {
    if (text == "all") return std::vector<std::uint8_t>(layers, 1);
    std::vector<std::uint8_t> mask;
    for (char c : text) {
        if (c == ',') continue;
        if (c != '0' && c != '1') {
            throw std::invalid_argument("--layers must be a string of 0/1 digits or 'all'");
        }
        mask.push_back(c == '1' ? 1 : 0);
    }
    if (mask.size() != layers) {
        throw std::invalid_argument("--layers needs one digit per layer (" +
                                    std::to_string(layers) + ")");
    }
    return mask;
}

ag::RunConfig build_config(const CLI::App* cmd, const SharedFlags& f) {
    ag::RunConfig cfg;
    if (!f.config_path.empty()) cfg = ag::run_config_from_json_file(f.config_path);
    if (cmd->count("--task") > 0) cfg.task = ag::parse_task_kind(f.task);
    if (cmd->count("--seed") > 0) cfg.seed = f.seed;
    if (cmd->count("--out") > 0) cfg.out_dir = f.out_dir;
    if (cmd->count("--data") > 0) {
        cfg.data.train_path = f.data_path;
        if (cfg.data.dev_path.empty()) cfg.data.dev_path = f.data_path;
    }
    if (cmd->count("--fraction") > 0) cfg.fraction = f.fraction;
    if (cmd->count("--alpha") > 0) cfg.guiding.alpha = f.alpha;
    if (cmd->count("--beta") > 0) cfg.guiding.beta = f.beta;
    if (cmd->count("--tau") > 0) cfg.guiding.tau = f.tau;
    if (cmd->count("--guide") > 0) cfg.guiding.guide_kind = ag::parse_guide_kind(f.guide);
    if (cmd->count("--epochs") > 0) cfg.epochs = f.epochs;
    if (cmd->count("--layers") > 0) {
        cfg.guiding.layer_mask = parse_layer_mask(f.layers, cfg.arch.layers);
    }
    if (cfg.guiding.layer_mask.empty()) cfg.guiding.layer_mask.assign(cfg.arch.layers, 1);
    return cfg;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"attention-guided transformer training harness"};
    SharedFlags train_f, grid_f, layer_f, size_f;

    CLI::App* train_cmd = app.add_subcommand("train", "train one model and report metrics");
    add_shared_flags(train_cmd, train_f);

    CLI::App* grid_cmd = app.add_subcommand("grid", "sweep the alpha/beta weight grid");
    add_shared_flags(grid_cmd, grid_f);
    std::vector<double> alphas(std::begin(ag::kGridValues), std::end(ag::kGridValues));
    std::vector<double> betas = alphas;
    grid_cmd->add_option("--alphas", alphas, "alpha values to sweep");
    grid_cmd->add_option("--betas", betas, "beta values to sweep");

    CLI::App* layer_cmd =
        app.add_subcommand("layer-sweep", "guide each layer alone, then all layers");
    add_shared_flags(layer_cmd, layer_f);

    CLI::App* size_cmd =
        app.add_subcommand("size-sweep", "paired guided/unguided runs per training fraction");
    add_shared_flags(size_cmd, size_f);
    std::vector<double> fractions = {0.2, 0.4, 0.6, 0.8, 1.0};
    size_cmd->add_option("--fractions", fractions, "training fractions to sweep");

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a TSV file");
    std::string eval_ckpt, eval_data, eval_task = "nli", eval_out;
    eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "evaluation TSV")->required();
    eval_cmd->add_option("--task", eval_task, "task kind: nli or ranking");
    eval_cmd->add_option("--out", eval_out, "also write the metrics JSON here");

    CLI::App* analyze_cmd =
        app.add_subcommand("analyze", "export attention heatmap and head-PCA CSVs");
    std::string an_ckpt, an_data, an_task = "nli", an_out;
    std::size_t an_index = 0, an_samples = 8;
    analyze_cmd->add_option("--ckpt", an_ckpt, "checkpoint file")->required();
    analyze_cmd->add_option("--data", an_data, "examples TSV")->required();
    analyze_cmd->add_option("--task", an_task, "task kind: nli or ranking");
    analyze_cmd->add_option("--index", an_index, "example index for the heatmap");
    analyze_cmd->add_option("--samples", an_samples, "examples projected by PCA");
    analyze_cmd->add_option("--out", an_out, "output directory")->required();

    CLI::App* gen_cmd = app.add_subcommand("gen-data", "write a synthetic TSV dataset");
    std::string gen_task = "nli", gen_out;
    std::size_t gen_n = 3000, gen_claims = 200, gen_candidates = 5;
    std::size_t gen_vocab = 120, gen_seq_len = 32;
    std::uint64_t gen_seed = 7;
    gen_cmd->add_option("--task", gen_task, "task kind: nli or ranking");
    gen_cmd->add_option("--n", gen_n, "examples (nli)");
    gen_cmd->add_option("--claims", gen_claims, "claims (ranking)");
    gen_cmd->add_option("--candidates", gen_candidates, "candidates per claim (ranking)");
    gen_cmd->add_option("--vocab", gen_vocab, "synthetic vocabulary size");
    gen_cmd->add_option("--seq-len", gen_seq_len, "sequence length budget");
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--out", gen_out, "output TSV path")->required();

    app.require_subcommand(1);

    train_cmd->callback([&] {
        const ag::TrainReport report = ag::run_training(build_config(train_cmd, train_f));
        std::cout << report.report_json();
    });
    grid_cmd->callback([&] {
        const ag::GridResult result = ag::run_grid(build_config(grid_cmd, grid_f), alphas, betas);
        std::cout << "alpha\tbeta\tdev_metric\ttest_metric\tbest\n";
        for (std::size_t i = 0; i < result.reports.size(); ++i) {
            const ag::TrainReport& r = result.reports[i];
            std::cout << r.config.guiding.alpha << '\t' << r.config.guiding.beta << '\t'
                      << r.final_dev_metric << '\t' << r.final_test_metric << '\t'
                      << (i == result.best_index ? 1 : 0) << '\n';
        }
    });
    layer_cmd->callback([&] {
        const std::vector<ag::TrainReport> reports =
            ag::run_layer_sweep(build_config(layer_cmd, layer_f));
        std::cout << "layers\tdev_metric\ttest_metric\n";
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const bool all = i + 1 == reports.size();
            std::cout << (all ? std::string("all") : std::to_string(i)) << '\t'
                      << reports[i].final_dev_metric << '\t' << reports[i].final_test_metric
                      << '\n';
        }
    });
    size_cmd->callback([&] {
        const std::vector<ag::SizeSweepCell> cells =
            ag::run_size_sweep(build_config(size_cmd, size_f), fractions);
        std::cout << "fraction\tguided_test\tunguided_test\n";
        for (const ag::SizeSweepCell& cell : cells) {
            std::cout << cell.fraction << '\t' << cell.guided.final_test_metric << '\t'
                      << cell.unguided.final_test_metric << '\n';
        }
    });
    eval_cmd->callback([&] {
        const std::string report =
            ag::evaluate_checkpoint(eval_ckpt, eval_data, ag::parse_task_kind(eval_task));
        std::cout << report;
        if (!eval_out.empty()) {
            std::ofstream out(eval_out, std::ios::binary);
            if (!out) throw ag::io_error("cannot open '" + eval_out + "' for writing");
            out << report;
        }
    });
    analyze_cmd->callback([&] {
        ag::run_analyze(an_ckpt, an_data, ag::parse_task_kind(an_task), an_index, an_samples,
                        an_out);
        std::cout << "wrote " << an_out << "/heatmap.csv and " << an_out << "/pca.csv\n";
    });
    gen_cmd->callback([&] {
        const ag::TaskKind task = ag::parse_task_kind(gen_task);
        const ag::Vocabulary vocab = ag::synthetic_vocabulary(gen_vocab);
        const std::vector<ag::Example> examples =
            task == ag::TaskKind::nli
                ? ag::generate_synthetic_nli(gen_n, gen_vocab, gen_seq_len, gen_seed)
                : ag::generate_synthetic_ranking(gen_claims, gen_candidates, gen_vocab,
                                                 gen_seq_len, gen_seed);
        ag::write_examples_tsv(gen_out, examples, vocab, task);
        std::cout << "wrote " << examples.size() << " examples to " << gen_out << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ag::numerical_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ag::parse_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ag::io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
