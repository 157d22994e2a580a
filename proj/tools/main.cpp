#include "entsearch/cli.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace cli = entsearch::cli;
namespace layout = entsearch::layout;

namespace {

// Flag overrides applied on top of the config file.
struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<std::string> sampler;
    std::optional<int> eval_runs;
    std::optional<int> k;

    void apply(cli::RunConfig& config) const {
        if (output_dir)
            config.output_dir = *output_dir;
        if (seed)
            config.seed = *seed;
        if (trials)
            config.tpe.n_trials = *trials;
        if (eval_runs)
            config.eval_runs = *eval_runs;
        if (k)
            config.k = *k;
        if (sampler) {
            if (*sampler == "tpe")
                config.sampler = entsearch::search::Sampler::Tpe;
            else if (*sampler == "random")
                config.sampler = entsearch::search::Sampler::Random;
            else
                throw cli::ConfigError("--sampler: expected 'tpe' or 'random', got '" + *sampler +
                                       "'");
        }
    }
};

void add_override_flags(CLI::App* cmd, Overrides& over) {
    cmd->add_option("--output-dir", over.output_dir, "Override output_dir from the config");
    cmd->add_option("--seed", over.seed, "Override the top-level seed");
    cmd->add_option("--trials", over.trials, "Override search.n_trials");
    cmd->add_option("--sampler", over.sampler, "Override search.sampler (tpe|random)");
    cmd->add_option("--runs", over.eval_runs, "Override eval_runs");
    cmd->add_option("--k", over.k, "Override ansatz.k");
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return cli::kExitOk;
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kExitConfig;
    } catch (const entsearch::data::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return cli::kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entanglement-layout search for variational quantum classifiers"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides over;

    auto* search_cmd =
        app.add_subcommand("search", "Run the SMBO layout search and write history/best files");
    search_cmd->add_option("--config", config_path, "Run configuration JSON")->required();
    bool resume = false;
    search_cmd->add_flag("--resume", resume, "Continue an existing history file");
    add_override_flags(search_cmd, over);

    auto* evaluate_cmd =
        app.add_subcommand("evaluate", "Train one layout over seeded runs and report metrics");
    evaluate_cmd->add_option("--config", config_path, "Run configuration JSON")->required();
    std::string genotype_path;
    std::string ring_variant;
    evaluate_cmd->add_option("--genotype", genotype_path, "Genotype JSON file to evaluate");
    evaluate_cmd->add_option("--ring", ring_variant, "Evaluate a ring baseline (ring1|ring2)");
    add_override_flags(evaluate_cmd, over);

    auto* baseline_cmd = app.add_subcommand("baseline", "Emit a ring baseline genotype file");
    int baseline_qubits = 4;
    std::string baseline_variant = "ring1";
    std::string baseline_out;
    baseline_cmd->add_option("--n-qubits", baseline_qubits, "Qubit count")->required();
    baseline_cmd->add_option("--variant", baseline_variant, "ring1|ring2")->required();
    baseline_cmd->add_option("--out", baseline_out, "Output genotype JSON path");

    auto* sweep_cmd = app.add_subcommand("sweep", "Search across several entanglement levels");
    sweep_cmd->add_option("--config", config_path, "Run configuration JSON")->required();
    std::vector<int> sweep_ks;
    sweep_cmd->add_option("--k-values", sweep_ks, "Entanglement levels to sweep")
        ->required()
        ->delimiter(',');
    add_override_flags(sweep_cmd, over);

    auto* synth_cmd = app.add_subcommand("synth-data", "Generate the synthetic dataset as CSV");
    entsearch::data::SynthConfig synth;
    std::uint64_t synth_seed = 0;
    std::string synth_out = "synthetic";
    synth_cmd->add_option("--samples", synth.n_samples, "Sample count");
    synth_cmd->add_option("--features", synth.n_features, "Feature count");
    synth_cmd->add_option("--classes", synth.n_classes, "Class count");
    synth_cmd->add_option("--class-sep", synth.class_sep, "Hypercube scale");
    synth_cmd->add_option("--noise-std", synth.noise_std, "Gaussian noise level");
    synth_cmd->add_option("--seed", synth_seed, "Generator seed");
    synth_cmd->add_option("--out", synth_out, "Output path prefix (.csv/.schema.json added)");

    auto* export_cmd =
        app.add_subcommand("export-features", "Export pre-/post-ansatz feature matrices");
    export_cmd->add_option("--config", config_path, "Run configuration JSON")->required();
    std::string checkpoint_path;
    std::string stage = "post";
    std::string export_out = "features.csv";
    export_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint JSON")->required();
    export_cmd->add_option("--stage", stage, "pre|post")->required();
    export_cmd->add_option("--out", export_out, "Output CSV path");

    auto* analyze_cmd =
        app.add_subcommand("analyze", "Summarize metric CSVs or a search history");
    std::vector<std::string> metric_files;
    std::string history_file;
    std::string column = "test_acc";
    std::string analyze_out = "analysis";
    analyze_cmd->add_option("--metrics", metric_files, "Metrics CSVs (repeatable)");
    analyze_cmd->add_option("--history", history_file, "Search history JSON-lines file");
    analyze_cmd->add_option("--column", column, "Metrics column to compare");
    analyze_cmd->add_option("--out", analyze_out, "Output directory (or CSV for --history)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitConfig;
    }

    return run_guarded([&] {
        if (search_cmd->parsed()) {
            cli::RunConfig config = cli::load_run_config(config_path);
            over.apply(config);
            cli::cmd_search(config, resume);
        } else if (evaluate_cmd->parsed()) {
            cli::RunConfig config = cli::load_run_config(config_path);
            over.apply(config);
            layout::Genotype genotype;
            if (!genotype_path.empty()) {
                const auto [g, n] = layout::load_genotype(genotype_path);
                if (n != config.n_qubits)
                    throw cli::ConfigError("--genotype: file is for " + std::to_string(n) +
                                           " qubits, config uses " +
                                           std::to_string(config.n_qubits));
                genotype = g;
            } else if (!ring_variant.empty()) {
                if (ring_variant != "ring1" && ring_variant != "ring2")
                    throw cli::ConfigError("--ring: expected 'ring1' or 'ring2'");
                genotype = layout::ring_genotype(config.n_qubits, ring_variant == "ring1" ? 1 : 2);
            } else if (config.genotype) {
                genotype.entries = *config.genotype;
            } else {
                throw cli::ConfigError(
                    "evaluate needs --genotype, --ring, or ansatz.genotype in the config");
            }
            config.k = genotype.k();
            cli::cmd_evaluate(config, genotype);
        } else if (baseline_cmd->parsed()) {
            cli::cmd_baseline(baseline_qubits, baseline_variant, baseline_out);
        } else if (sweep_cmd->parsed()) {
            cli::RunConfig config = cli::load_run_config(config_path);
            over.apply(config);
            cli::cmd_sweep(config, sweep_ks);
        } else if (synth_cmd->parsed()) {
            cli::cmd_synth_data(synth, synth_seed, synth_out);
        } else if (export_cmd->parsed()) {
            const cli::RunConfig config = cli::load_run_config(config_path);
            if (stage != "pre" && stage != "post")
                throw cli::ConfigError("--stage: expected 'pre' or 'post', got '" + stage + "'");
            cli::cmd_export_features(config, checkpoint_path,
                                     stage == "pre" ? entsearch::model::FeatureStage::Pre
                                                    : entsearch::model::FeatureStage::Post,
                                     export_out);
        } else if (analyze_cmd->parsed()) {
            if (!history_file.empty() && metric_files.empty())
                cli::cmd_analyze_history(history_file, analyze_out);
            else if (!metric_files.empty() && history_file.empty())
                cli::cmd_analyze_metrics(metric_files, column, analyze_out);
            else
                throw cli::ConfigError("analyze needs either --history or --metrics, not both");
        }
    });
}
