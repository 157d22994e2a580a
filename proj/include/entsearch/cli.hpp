#pragma once

#include "entsearch/analysis.hpp"
#include "entsearch/data.hpp"
#include "entsearch/model.hpp"
#include "entsearch/search.hpp"
#include "entsearch/train.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace entsearch::cli {

// Process exit codes shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

// Configuration problem (bad field, inconsistent combination, invocation
// conflict); messages carry the offending field path.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DatasetKind { Builtin, Csv, Synthetic };

// Everything one run needs, with every field defaulted so a minimal config
// file stays short. Flags override file fields after parsing.
struct RunConfig {
    DatasetKind dataset_kind = DatasetKind::Builtin;
    std::string builtin = "iris";
    std::string csv_path;
    std::string schema_path;
    data::SynthConfig synth;
    std::optional<std::uint64_t> synth_seed; // default derives from the top seed

    bool hybrid = false;
    std::vector<int> encoder_dims;

    int n_qubits = 4;
    int depth = 2;
    int k = 4;
    std::optional<std::vector<int>> genotype; // explicit layout for evaluate

    search::Sampler sampler = search::Sampler::Tpe;
    search::TpeConfig tpe; // seed field is ignored; derived from the top seed
    std::optional<std::vector<int>> initial_genotype;

    train::TrainConfig train;

    std::array<double, 3> fractions{0.6, 0.2, 0.2};
    int eval_runs = 10;
    std::uint64_t seed = 42;
    std::string output_dir = "runs/out";
};

// Throws ConfigError naming the field path on any malformed or inconsistent
// field.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Fully-defaulted round-trippable form: parse(effective_config(c)) == c and
// re-serializing is byte-stable.
nlohmann::json effective_config(const RunConfig& config);

// Directory holding the bundled CSVs: $ENTSEARCH_DATA_DIR when set, else the
// compiled-in default, else ./data.
std::string data_dir();

data::Dataset load_dataset(const RunConfig& config);

// Dataset + split + (for hybrid mode) standardization, shared by the
// commands and reusable in-process.
struct Pipeline {
    RunConfig config;
    data::Dataset dataset; // hybrid: already standardized with train-row stats
    std::optional<data::ScaleStats> scaling;
    data::Split split;
};

Pipeline build_pipeline(const RunConfig& config);

struct RunOutcome {
    train::TrainResult result;
    model::ModelParams params; // best-epoch snapshot
    double test_loss = 0.0;
    double test_acc = 0.0;
};

// One seeded training run of the given layout on the pipeline's split.
RunOutcome run_training(const Pipeline& pipeline, const layout::Genotype& genotype,
                        std::uint64_t run_seed);

// Per-trial objective used by search/sweep: best validation loss of one
// training run seeded by (search seed, trial index).
search::Objective make_objective(const Pipeline& pipeline, std::uint64_t search_seed);

// Subcommand bodies. Each writes its artifacts under config.output_dir and
// throws (ConfigError/data::DataError/std::runtime_error) on failure; the
// binary maps exception types to exit codes.
void cmd_search(const RunConfig& config, bool resume);
void cmd_evaluate(const RunConfig& config, const layout::Genotype& genotype);
void cmd_baseline(int n_qubits, const std::string& variant, const std::string& out_path);
void cmd_sweep(const RunConfig& config, const std::vector<int>& k_values);
void cmd_synth_data(const data::SynthConfig& synth, std::uint64_t seed,
                    const std::string& out_prefix);
void cmd_export_features(const RunConfig& config, const std::string& checkpoint_path,
                         model::FeatureStage stage, const std::string& out_csv);
void cmd_analyze_history(const std::string& history_path, const std::string& out_csv);
void cmd_analyze_metrics(const std::vector<std::string>& metric_files, const std::string& column,
                         const std::string& out_dir);

// One column of a metrics CSV written by cmd_evaluate.
std::vector<double> read_metric_column(const std::string& path, const std::string& column);

} // namespace entsearch::cli
