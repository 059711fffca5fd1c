#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ag/data.hpp"
#include "ag/encoder.hpp"
#include "ag/guiding.hpp"
#include "ag/metrics.hpp"

namespace ag {

struct DataConfig {
    // TSV mode when train_path is set; dev_path is then required and
    // test_path falls back to dev_path.
    std::string train_path, dev_path, test_path;

    // Synthetic mode parameters.
    std::size_t n = 3000, n_dev = 600, n_test = 600;  // nli split sizes
    std::size_t claims = 200, candidates = 5;         // ranking train size
    std::size_t vocab_size = 120;
    std::uint64_t data_seed = 7;

    std::size_t pmi_window = 2;
    std::string prior_file;

    bool synthetic() const { return train_path.empty(); }
};

struct RunConfig {
    TaskKind task = TaskKind::nli;
    ArchitectureConfig arch;  // classes and vocab_size are derived at run time
    GuidingConfig guiding;
    DataConfig data;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    double fraction = 1.0;
    std::string out_dir;

    void validate() const;

    // A run whose guide has no active loss term is the unguided run; the
    // normalized config records guide "none" so equivalent configurations
    // produce identical reports.
    RunConfig normalized() const;
};

// JSON object mirroring RunConfig; unknown keys are rejected with the
// offending key named. Missing keys keep their defaults.
RunConfig run_config_from_json_text(const std::string& text, const std::string& origin);
RunConfig run_config_from_json_file(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

struct EpochRecord {
    double task_loss = 0.0;
    double mdg_loss = 0.0;
    double pdg_loss = 0.0;
    double pattern_loss = 0.0;
    double total_loss = 0.0;
    double dev_metric = 0.0;  // accuracy (nli) or MRR (ranking)
    double seconds = 0.0;     // wall clock; kept out of the report JSON
};

struct TrainReport {
    RunConfig config;
    std::vector<EpochRecord> epochs;
    double final_dev_metric = 0.0;
    double final_test_metric = 0.0;
    ClassificationReport test_classification;  // nli task
    RankingReport test_ranking;                // ranking task
    double head_diversity_mean = 0.0;     // over the held-out analysis sample
    double decorrelation_mean = 0.0;

    // Deterministic serialization: timing is excluded (it goes to
    // timing.csv) so identical runs give byte-identical JSON.
    std::string report_json() const;
    double mean_epoch_seconds() const;
};

struct Dataset {
    Vocabulary vocab;
    std::vector<Example> train, dev, test;
};

// Generates or reads the configured splits and applies the train fraction.
Dataset load_dataset(const RunConfig& config);

// Mini-batch Adam over seeded shuffles, per-epoch dev evaluation, final test
// metrics and attention statistics. Writes report.json, timing.csv, and
// model.ckpt into config.out_dir when it is set.
TrainReport run_training(const RunConfig& config);

inline constexpr double kGridValues[] = {0.1, 0.01, 0.001, 0.0001, 0.0};

struct GridResult {
    std::vector<double> alphas, betas;
    std::vector<TrainReport> reports;  // alpha-major order
    std::size_t best_index = 0;        // best dev metric, ties to smaller alpha+beta
};

GridResult run_grid(const RunConfig& base, const std::vector<double>& alphas,
                    const std::vector<double>& betas);

// One run per layer with a one-hot layer mask, plus one all-layers run
// (reports.back()). All runs share the base seed.
std::vector<TrainReport> run_layer_sweep(const RunConfig& base);

struct SizeSweepCell {
    double fraction = 1.0;
    TrainReport guided;
    TrainReport unguided;
};

// Guided and unguided runs per fraction; both runs of a cell see the same
// seeded subsample.
std::vector<SizeSweepCell> run_size_sweep(const RunConfig& base,
                                          const std::vector<double>& fractions);

// Loads a checkpoint and a TSV file and returns the metrics report as JSON.
std::string evaluate_checkpoint(const std::string& checkpoint_path, const std::string& data_path,
                                TaskKind task);

// Writes heatmap.csv (mean attention map of one example) and pca.csv (2-D
// head coordinates over the first pca_samples examples) into out_dir.
void run_analyze(const std::string& checkpoint_path, const std::string& data_path, TaskKind task,
                 std::size_t heatmap_index, std::size_t pca_samples, const std::string& out_dir);

}  // namespace ag
