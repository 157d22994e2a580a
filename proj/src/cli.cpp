#include "entsearch/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

namespace entsearch::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

const json* find(const json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <typename T>
T get_as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        fail(path, e.what());
    }
}

// Overwrites dst only when the key is present, so struct defaults survive.
template <typename T>
void read_field(const json& obj, const char* key, const std::string& prefix, T& dst) {
    if (const json* v = find(obj, key))
        dst = get_as<T>(*v, prefix + key);
}

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object())
        fail(prefix.empty() ? "config" : prefix, "expected a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            fail(prefix + key, "unknown field");
    }
}

void parse_dataset(const json& j, RunConfig& config) {
    check_keys(j, "dataset.", {"builtin", "csv", "schema", "synthetic"});
    const json* builtin = find(j, "builtin");
    const json* csv = find(j, "csv");
    const json* synthetic = find(j, "synthetic");
    if ((builtin != nullptr) + (csv != nullptr) + (synthetic != nullptr) != 1)
        fail("dataset", "give exactly one of builtin, csv, synthetic");

    if (builtin) {
        config.dataset_kind = DatasetKind::Builtin;
        config.builtin = get_as<std::string>(*builtin, "dataset.builtin");
        if (config.builtin != "iris" && config.builtin != "wine" &&
            config.builtin != "breast_cancer")
            fail("dataset.builtin", "unknown dataset '" + config.builtin +
                                        "' (iris, wine, breast_cancer)");
    } else if (csv) {
        config.dataset_kind = DatasetKind::Csv;
        config.csv_path = get_as<std::string>(*csv, "dataset.csv");
        const json* schema = find(j, "schema");
        if (!schema)
            fail("dataset.schema", "csv datasets need a schema file");
        config.schema_path = get_as<std::string>(*schema, "dataset.schema");
    } else {
        config.dataset_kind = DatasetKind::Synthetic;
        check_keys(*synthetic, "dataset.synthetic.",
                   {"n_samples", "n_features", "n_classes", "class_sep", "noise_std", "seed"});
        read_field(*synthetic, "n_samples", "dataset.synthetic.", config.synth.n_samples);
        read_field(*synthetic, "n_features", "dataset.synthetic.", config.synth.n_features);
        read_field(*synthetic, "n_classes", "dataset.synthetic.", config.synth.n_classes);
        read_field(*synthetic, "class_sep", "dataset.synthetic.", config.synth.class_sep);
        read_field(*synthetic, "noise_std", "dataset.synthetic.", config.synth.noise_std);
        if (const json* s = find(*synthetic, "seed"))
            config.synth_seed = get_as<std::uint64_t>(*s, "dataset.synthetic.seed");
    }
}

} // namespace

RunConfig parse_config(const json& j) {
    check_keys(j, "", {"dataset", "mode", "encoder_dims", "ansatz", "search", "train", "split",
                       "eval_runs", "seed", "output_dir"});
    RunConfig config;
    if (const json* dataset = find(j, "dataset"))
        parse_dataset(*dataset, config);

    if (const json* mode = find(j, "mode")) {
        const auto text = get_as<std::string>(*mode, "mode");
        if (text == "hybrid")
            config.hybrid = true;
        else if (text == "stand-alone")
            config.hybrid = false;
        else
            fail("mode", "expected 'stand-alone' or 'hybrid', got '" + text + "'");
    }
    read_field(j, "encoder_dims", "", config.encoder_dims);

    if (const json* ansatz = find(j, "ansatz")) {
        check_keys(*ansatz, "ansatz.", {"n_qubits", "depth", "k", "genotype"});
        read_field(*ansatz, "n_qubits", "ansatz.", config.n_qubits);
        read_field(*ansatz, "depth", "ansatz.", config.depth);
        read_field(*ansatz, "k", "ansatz.", config.k);
        if (const json* g = find(*ansatz, "genotype")) {
            config.genotype = get_as<std::vector<int>>(*g, "ansatz.genotype");
            if (!find(*ansatz, "k"))
                config.k = static_cast<int>(config.genotype->size());
        }
    }

    if (const json* search_obj = find(j, "search")) {
        check_keys(*search_obj, "search.",
                   {"sampler", "n_trials", "n_startup_trials", "n_ei_candidates", "gamma_fraction",
                    "gamma_cap", "prior_weight", "initial_genotype"});
        if (const json* sampler = find(*search_obj, "sampler")) {
            const auto text = get_as<std::string>(*sampler, "search.sampler");
            if (text == "tpe")
                config.sampler = search::Sampler::Tpe;
            else if (text == "random")
                config.sampler = search::Sampler::Random;
            else
                fail("search.sampler", "expected 'tpe' or 'random', got '" + text + "'");
        }
        read_field(*search_obj, "n_trials", "search.", config.tpe.n_trials);
        read_field(*search_obj, "n_startup_trials", "search.", config.tpe.n_startup_trials);
        read_field(*search_obj, "n_ei_candidates", "search.", config.tpe.n_ei_candidates);
        read_field(*search_obj, "gamma_fraction", "search.", config.tpe.gamma_fraction);
        read_field(*search_obj, "gamma_cap", "search.", config.tpe.gamma_cap);
        read_field(*search_obj, "prior_weight", "search.", config.tpe.prior_weight);
        if (const json* init = find(*search_obj, "initial_genotype"))
            config.initial_genotype = get_as<std::vector<int>>(*init, "search.initial_genotype");
    }

    if (const json* train_obj = find(j, "train")) {
        check_keys(*train_obj, "train.",
                   {"optimizer", "lr", "beta1", "beta2", "eps", "momentum", "lr_decay",
                    "lr_decay_period", "max_epochs", "early_stop_patience", "batch_size"});
        if (const json* optimizer = find(*train_obj, "optimizer")) {
            const auto text = get_as<std::string>(*optimizer, "train.optimizer");
            if (text == "adam")
                config.train.optimizer = train::Optimizer::Adam;
            else if (text == "sgd")
                config.train.optimizer = train::Optimizer::Sgd;
            else
                fail("train.optimizer", "expected 'adam' or 'sgd', got '" + text + "'");
        }
        read_field(*train_obj, "lr", "train.", config.train.lr);
        read_field(*train_obj, "beta1", "train.", config.train.beta1);
        read_field(*train_obj, "beta2", "train.", config.train.beta2);
        read_field(*train_obj, "eps", "train.", config.train.eps);
        read_field(*train_obj, "momentum", "train.", config.train.momentum);
        read_field(*train_obj, "lr_decay", "train.", config.train.lr_decay);
        read_field(*train_obj, "lr_decay_period", "train.", config.train.lr_decay_period);
        read_field(*train_obj, "max_epochs", "train.", config.train.max_epochs);
        read_field(*train_obj, "early_stop_patience", "train.", config.train.early_stop_patience);
        read_field(*train_obj, "batch_size", "train.", config.train.batch_size);
    }

    if (const json* split = find(j, "split")) {
        check_keys(*split, "split.", {"fractions"});
        if (const json* fr = find(*split, "fractions")) {
            const auto values = get_as<std::vector<double>>(*fr, "split.fractions");
            if (values.size() != 3)
                fail("split.fractions", "expected 3 entries (train, validation, test)");
            std::copy(values.begin(), values.end(), config.fractions.begin());
        }
    }

    read_field(j, "eval_runs", "", config.eval_runs);
    read_field(j, "seed", "", config.seed);
    read_field(j, "output_dir", "", config.output_dir);

    // Cross-field validation that needs no dataset access.
    if (config.n_qubits < 2 || config.n_qubits > sim::kMaxQubits)
        fail("ansatz.n_qubits",
             "must lie in [2, " + std::to_string(sim::kMaxQubits) + "]");
    if (config.depth < 1)
        fail("ansatz.depth", "must be >= 1");
    const int n_edges = layout::edge_count(config.n_qubits);
    if (config.k < 0 || config.k > n_edges)
        fail("ansatz.k", "must lie in [0, " + std::to_string(n_edges) + "]");
    if (config.eval_runs < 1)
        fail("eval_runs", "must be >= 1");
    if (config.output_dir.empty())
        fail("output_dir", "must not be empty");
    if (config.hybrid) {
        if (config.encoder_dims.size() != 4)
            fail("encoder_dims", "hybrid mode needs [p, h1, h2, q]");
        if (config.encoder_dims.back() != config.n_qubits)
            fail("encoder_dims", "last entry must equal ansatz.n_qubits");
        for (int d : config.encoder_dims)
            if (d < 1)
                fail("encoder_dims", "entries must be positive");
    } else if (!config.encoder_dims.empty()) {
        fail("encoder_dims", "only meaningful in hybrid mode");
    }
    const auto validate_entries = [&](const std::vector<int>& entries, const char* path) {
        layout::Genotype g{entries};
        try {
            layout::validate_genotype(g, config.n_qubits);
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
        if (static_cast<int>(entries.size()) != config.k)
            fail(path, "length " + std::to_string(entries.size()) + " differs from ansatz.k=" +
                           std::to_string(config.k));
    };
    if (config.genotype)
        validate_entries(*config.genotype, "ansatz.genotype");
    if (config.initial_genotype)
        validate_entries(*config.initial_genotype, "search.initial_genotype");
    try {
        config.tpe.validate();
    } catch (const std::invalid_argument& e) {
        fail("search", e.what());
    }
    try {
        config.train.validate();
    } catch (const std::invalid_argument& e) {
        fail("train", e.what());
    }
    if (config.dataset_kind == DatasetKind::Synthetic) {
        if (config.synth.n_samples < 1 || config.synth.n_features < 1 || config.synth.n_classes < 1)
            fail("dataset.synthetic", "dimensions must be positive");
        if (config.synth.class_sep < 0.0)
            fail("dataset.synthetic.class_sep", "must be non-negative");
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

json effective_config(const RunConfig& config) {
    json j;
    switch (config.dataset_kind) {
    case DatasetKind::Builtin:
        j["dataset"]["builtin"] = config.builtin;
        break;
    case DatasetKind::Csv:
        j["dataset"]["csv"] = config.csv_path;
        j["dataset"]["schema"] = config.schema_path;
        break;
    case DatasetKind::Synthetic:
        j["dataset"]["synthetic"] = {{"n_samples", config.synth.n_samples},
                                     {"n_features", config.synth.n_features},
                                     {"n_classes", config.synth.n_classes},
                                     {"class_sep", config.synth.class_sep},
                                     {"noise_std", config.synth.noise_std}};
        if (config.synth_seed)
            j["dataset"]["synthetic"]["seed"] = *config.synth_seed;
        break;
    }
    j["mode"] = config.hybrid ? "hybrid" : "stand-alone";
    if (config.hybrid)
        j["encoder_dims"] = config.encoder_dims;
    j["ansatz"] = {{"n_qubits", config.n_qubits}, {"depth", config.depth}, {"k", config.k}};
    if (config.genotype)
        j["ansatz"]["genotype"] = *config.genotype;
    j["search"] = {{"sampler", config.sampler == search::Sampler::Tpe ? "tpe" : "random"},
                   {"n_trials", config.tpe.n_trials},
                   {"n_startup_trials", config.tpe.n_startup_trials},
                   {"n_ei_candidates", config.tpe.n_ei_candidates},
                   {"gamma_fraction", config.tpe.gamma_fraction},
                   {"gamma_cap", config.tpe.gamma_cap},
                   {"prior_weight", config.tpe.prior_weight}};
    if (config.initial_genotype)
        j["search"]["initial_genotype"] = *config.initial_genotype;
    j["train"] = {{"optimizer", config.train.optimizer == train::Optimizer::Adam ? "adam" : "sgd"},
                  {"lr", config.train.lr},
                  {"beta1", config.train.beta1},
                  {"beta2", config.train.beta2},
                  {"eps", config.train.eps},
                  {"momentum", config.train.momentum},
                  {"lr_decay", config.train.lr_decay},
                  {"lr_decay_period", config.train.lr_decay_period},
                  {"max_epochs", config.train.max_epochs},
                  {"early_stop_patience", config.train.early_stop_patience},
                  {"batch_size", config.train.batch_size}};
    j["split"]["fractions"] = config.fractions;
    j["eval_runs"] = config.eval_runs;
    j["seed"] = config.seed;
    j["output_dir"] = config.output_dir;
    return j;
}

std::string data_dir() {
    if (const char* env = std::getenv("ENTSEARCH_DATA_DIR"); env != nullptr && *env != '\0')
        return env;
#ifdef ENTSEARCH_DATA_DIR
    return ENTSEARCH_DATA_DIR;
#else
    return "data";
#endif
}

data::Dataset load_dataset(const RunConfig& config) {
    switch (config.dataset_kind) {
    case DatasetKind::Builtin: {
        const fs::path dir = data_dir();
        const std::string csv = (dir / (config.builtin + ".csv")).string();
        const std::string schema = (dir / (config.builtin + ".schema.json")).string();
        data::Dataset set = data::load_csv(csv, data::load_schema(schema));
        set.name = config.builtin;
        return set;
    }
    case DatasetKind::Csv:
        return data::load_csv(config.csv_path, data::load_schema(config.schema_path));
    case DatasetKind::Synthetic:
    default: {
        const std::uint64_t seed =
            config.synth_seed ? *config.synth_seed : derive_seed(config.seed, "dataset");
        return data::generate_synthetic(config.synth, seed);
    }
    }
}

Pipeline build_pipeline(const RunConfig& config) {
    Pipeline pipeline;
    pipeline.config = config;
    pipeline.dataset = load_dataset(config);

    const int n_features = pipeline.dataset.n_features();
    if (config.hybrid) {
        if (config.encoder_dims.front() != n_features)
            throw ConfigError("encoder_dims: first entry " +
                              std::to_string(config.encoder_dims.front()) +
                              " must equal the dataset's " + std::to_string(n_features) +
                              " features");
    } else if (n_features != config.n_qubits) {
        throw ConfigError("ansatz.n_qubits: stand-alone mode binds one feature per qubit; "
                          "dataset has " +
                          std::to_string(n_features) + " features, ansatz " +
                          std::to_string(config.n_qubits) + " qubits");
    }

    pipeline.split =
        data::stratified_split(pipeline.dataset, config.fractions, derive_seed(config.seed, "split"));
    if (config.hybrid)
        pipeline.scaling = data::standardize(pipeline.dataset.X, pipeline.split.train);
    return pipeline;
}

RunOutcome run_training(const Pipeline& pipeline, const layout::Genotype& genotype,
                        std::uint64_t run_seed) {
    const RunConfig& config = pipeline.config;
    model::AnsatzSpec spec{config.n_qubits, config.depth, genotype};
    Rng rng(run_seed);
    const std::optional<std::vector<int>> encoder_dims =
        config.hybrid ? std::optional(config.encoder_dims) : std::nullopt;
    model::ModelParams params =
        model::init_params(spec, pipeline.dataset.n_classes, encoder_dims, rng);

    train::TrainConfig tcfg = config.train;
    tcfg.seed = run_seed;

    RunOutcome outcome;
    outcome.result = train::train_model(params, spec, pipeline.dataset, pipeline.split, tcfg);
    outcome.params = std::move(params);
    model::unflatten(outcome.result.best_params, outcome.params);
    std::tie(outcome.test_loss, outcome.test_acc) =
        train::evaluate(outcome.params, spec, pipeline.dataset, pipeline.split.test);
    return outcome;
}

search::Objective make_objective(const Pipeline& pipeline, std::uint64_t search_seed) {
    return [&pipeline, search_seed](const layout::Genotype& genotype, int trial_index) {
        const std::uint64_t run_seed =
            derive_seed(search_seed, "objective", static_cast<std::uint64_t>(trial_index));
        return run_training(pipeline, genotype, run_seed).result.best_val_loss;
    };
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_effective_config(const RunConfig& config) {
    write_text((fs::path(config.output_dir) / "config.json").string(),
               effective_config(config).dump(2) + "\n");
}

std::string describe_genotype(const layout::Genotype& genotype, int n_qubits) {
    const layout::EdgeSet edges = layout::enumerate_edges(n_qubits);
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < genotype.entries.size(); ++i) {
        const auto& e = edges.edges[static_cast<std::size_t>(genotype.entries[i])];
        out << (i ? " " : "") << genotype.entries[i] << ":(" << e.src << ">" << e.dst << ")";
    }
    out << ']';
    return out.str();
}

} // namespace

void cmd_search(const RunConfig& config, bool resume) {
    Pipeline pipeline = build_pipeline(config);
    fs::create_directories(config.output_dir);
    const std::string history_path = (fs::path(config.output_dir) / "history.jsonl").string();
    if (fs::exists(history_path) && !resume)
        throw ConfigError(history_path +
                          " already exists; pass --resume to continue it or remove the file");
    write_effective_config(config);

    const std::uint64_t search_seed = derive_seed(config.seed, "search");
    search::TpeConfig tpe = config.tpe;
    tpe.seed = search_seed;

    layout::Genotype warm;
    const layout::Genotype* warm_ptr = nullptr;
    if (config.initial_genotype) {
        warm.entries = *config.initial_genotype;
        warm_ptr = &warm;
    }

    const search::SearchSpace space{config.n_qubits, config.k};
    const search::History history = search::smbo_search(
        space, make_objective(pipeline, search_seed), config.sampler, tpe, history_path, warm_ptr);

    const search::Trial& best = search::best_trial(history);
    json best_json = layout::genotype_to_json(best.genotype, config.n_qubits);
    best_json["objective"] = best.objective;
    best_json["trial"] = best.index;
    write_text((fs::path(config.output_dir) / "best.json").string(), best_json.dump(2) + "\n");

    std::ostringstream log;
    log.precision(17);
    for (const search::Trial& trial : history.trials) {
        log << "trial " << trial.index << " objective ";
        if (trial.pruned())
            log << "pruned";
        else
            log << trial.objective;
        log << " seconds " << std::fixed << std::setprecision(3) << trial.seconds
            << std::defaultfloat << std::setprecision(17) << " genotype "
            << describe_genotype(trial.genotype, config.n_qubits) << '\n';
    }
    log << "best trial " << best.index << " objective " << best.objective << " genotype "
        << describe_genotype(best.genotype, config.n_qubits) << '\n';
    write_text((fs::path(config.output_dir) / "log.txt").string(), log.str());

    std::cout << "search finished: best trial " << best.index << " objective " << best.objective
              << " genotype " << describe_genotype(best.genotype, config.n_qubits) << '\n'
              << "history: " << history_path << '\n';
}

void cmd_evaluate(const RunConfig& config, const layout::Genotype& genotype) {
    layout::validate_genotype(genotype, config.n_qubits);
    Pipeline pipeline = build_pipeline(config);
    fs::create_directories(config.output_dir);
    write_effective_config(config);

    std::ofstream metrics((fs::path(config.output_dir) / "metrics.csv").string());
    if (!metrics)
        throw std::runtime_error("cannot write metrics.csv under " + config.output_dir);
    metrics << "run,val_loss,val_acc,test_loss,test_acc\n";
    metrics.precision(17);

    std::vector<double> val_losses, val_accs, test_losses, test_accs;
    std::optional<RunOutcome> best_outcome;
    for (int r = 0; r < config.eval_runs; ++r) {
        const std::uint64_t run_seed = derive_seed(config.seed, "eval", static_cast<std::uint64_t>(r));
        RunOutcome outcome = run_training(pipeline, genotype, run_seed);
        const auto [val_loss, val_acc] = [&] {
            model::AnsatzSpec spec{config.n_qubits, config.depth, genotype};
            return train::evaluate(outcome.params, spec, pipeline.dataset,
                                   pipeline.split.validation);
        }();
        metrics << r << ',' << val_loss << ',' << val_acc << ',' << outcome.test_loss << ','
                << outcome.test_acc << '\n';
        val_losses.push_back(val_loss);
        val_accs.push_back(val_acc);
        test_losses.push_back(outcome.test_loss);
        test_accs.push_back(outcome.test_acc);
        if (!best_outcome || outcome.result.best_val_loss < best_outcome->result.best_val_loss)
            best_outcome = std::move(outcome);
    }
    metrics.close();

    json summary;
    summary["genotype"] = layout::genotype_to_json(genotype, config.n_qubits);
    summary["runs"] = config.eval_runs;
    const auto put = [&](const char* name, const std::vector<double>& values) {
        const analysis::RunSummary s = analysis::aggregate_runs(values, name);
        summary[name] = {{"mean", s.mean}, {"std", s.stddev}};
    };
    put("val_loss", val_losses);
    put("val_acc", val_accs);
    put("test_loss", test_losses);
    put("test_acc", test_accs);
    write_text((fs::path(config.output_dir) / "summary.json").string(), summary.dump(2) + "\n");

    model::Checkpoint checkpoint{{config.n_qubits, config.depth, genotype},
                                 best_outcome->params,
                                 pipeline.scaling};
    model::save_checkpoint(checkpoint, (fs::path(config.output_dir) / "checkpoint.json").string());
    train::write_curves_csv(best_outcome->result,
                            (fs::path(config.output_dir) / "curves.csv").string());

    std::cout << "evaluated " << describe_genotype(genotype, config.n_qubits) << " over "
              << config.eval_runs << " runs: test_acc " << summary["test_acc"]["mean"] << " +- "
              << summary["test_acc"]["std"] << ", val_loss " << summary["val_loss"]["mean"]
              << '\n';
}

void cmd_baseline(int n_qubits, const std::string& variant, const std::string& out_path) {
    int stride = 0;
    if (variant == "ring1")
        stride = 1;
    else if (variant == "ring2")
        stride = 2;
    else
        throw ConfigError("variant: expected 'ring1' or 'ring2', got '" + variant + "'");
    layout::Genotype genotype;
    try {
        genotype = layout::ring_genotype(n_qubits, stride);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("baseline: ") + e.what());
    }
    if (!out_path.empty()) {
        if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty())
            fs::create_directories(parent);
        layout::save_genotype(genotype, n_qubits, out_path);
    }
    std::cout << layout::genotype_to_json(genotype, n_qubits).dump() << '\n';
}

void cmd_sweep(const RunConfig& config, const std::vector<int>& k_values) {
    if (k_values.empty())
        throw ConfigError("k: sweep needs at least one entanglement level");
    const int n_edges = layout::edge_count(config.n_qubits);
    for (int k : k_values)
        if (k < 0 || k > n_edges)
            throw ConfigError("k: level " + std::to_string(k) + " outside [0, " +
                              std::to_string(n_edges) + "]");

    Pipeline pipeline = build_pipeline(config);
    fs::create_directories(config.output_dir);
    write_effective_config(config);

    const std::uint64_t search_seed = derive_seed(config.seed, "sweep");
    search::TpeConfig tpe = config.tpe;
    tpe.seed = search_seed;
    const auto entries = search::k_sweep(
        k_values, config.n_qubits, config.sampler, tpe,
        [&](int) { return make_objective(pipeline, search_seed); }, config.eval_runs,
        config.output_dir);

    std::ofstream csv((fs::path(config.output_dir) / "sweep.csv").string());
    if (!csv)
        throw std::runtime_error("cannot write sweep.csv under " + config.output_dir);
    csv << "k,best_objective,best_trial,repeat_mean,repeat_std\n";
    csv.precision(17);
    std::cout << "k sweep on " << pipeline.dataset.name << ":\n";
    for (const auto& entry : entries) {
        const analysis::RunSummary repeat =
            analysis::aggregate_runs(entry.repeat_losses, "repeat_loss");
        csv << entry.k << ',' << entry.best.objective << ',' << entry.best.index << ','
            << repeat.mean << ',' << repeat.stddev << '\n';
        std::cout << "  k=" << entry.k << " best objective " << entry.best.objective
                  << " (trial " << entry.best.index << "), re-trained " << repeat.run_count
                  << "x: " << repeat.mean << " +- " << repeat.stddev << '\n';
    }
}

void cmd_synth_data(const data::SynthConfig& synth, std::uint64_t seed,
                    const std::string& out_prefix) {
    const data::Dataset set = data::generate_synthetic(synth, seed);
    if (const fs::path parent = fs::path(out_prefix).parent_path(); !parent.empty())
        fs::create_directories(parent);

    const std::string csv_path = out_prefix + ".csv";
    std::ofstream csv(csv_path);
    if (!csv)
        throw std::runtime_error("cannot write " + csv_path);
    for (int jf = 0; jf < set.n_features(); ++jf)
        csv << 'f' << jf << ',';
    csv << "label\n";
    csv.precision(17);
    for (int i = 0; i < set.n_samples(); ++i) {
        for (double v : set.X[static_cast<std::size_t>(i)])
            csv << v << ',';
        csv << set.y[static_cast<std::size_t>(i)] << '\n';
    }

    json schema;
    schema["has_header"] = true;
    schema["label_column"] = "label";
    for (int c = 0; c < set.n_classes; ++c)
        schema["label_map"][std::to_string(c)] = c;
    write_text(out_prefix + ".schema.json", schema.dump(2) + "\n");
    std::cout << "wrote " << csv_path << " (" << set.n_samples() << " rows) and " << out_prefix
              << ".schema.json\n";
}

void cmd_export_features(const RunConfig& config, const std::string& checkpoint_path,
                         model::FeatureStage stage, const std::string& out_csv) {
    const model::Checkpoint checkpoint = model::load_checkpoint(checkpoint_path);
    data::Dataset set = load_dataset(config);
    if (checkpoint.scaling)
        data::apply_scaling(set.X, *checkpoint.scaling);

    const int n_features = set.n_features();
    const int expected = checkpoint.params.encoder ? checkpoint.params.encoder->dims.front()
                                                   : checkpoint.spec.n_qubits;
    if (n_features != expected)
        throw data::DataError("checkpoint expects " + std::to_string(expected) +
                              " input features, dataset has " + std::to_string(n_features));

    const auto rows =
        model::extract_features(checkpoint.params, checkpoint.spec, set.X, stage);
    if (const fs::path parent = fs::path(out_csv).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream out(out_csv);
    if (!out)
        throw std::runtime_error("cannot write " + out_csv);
    for (std::size_t jf = 0; jf < rows.front().size(); ++jf)
        out << "feat_" << jf << ',';
    out << "label\n";
    out.precision(17);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (double v : rows[i])
            out << v << ',';
        out << set.y[i] << '\n';
    }
    std::cout << "wrote " << out_csv << " (" << rows.size() << " rows, " << rows.front().size()
              << " features, stage " << (stage == model::FeatureStage::Pre ? "pre" : "post")
              << ")\n";
}

void cmd_analyze_history(const std::string& history_path, const std::string& out_csv) {
    const search::History history = search::load_history(history_path);
    if (history.trials.empty())
        throw data::DataError(history_path + ": history holds no trials");

    if (const fs::path parent = fs::path(out_csv).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream out(out_csv);
    if (!out)
        throw std::runtime_error("cannot write " + out_csv);
    out << "trial,objective,best_so_far\n";
    out.precision(17);
    double best = std::numeric_limits<double>::infinity();
    for (const search::Trial& trial : history.trials) {
        best = std::min(best, trial.objective);
        out << trial.index << ',';
        if (trial.pruned())
            out << "inf";
        else
            out << trial.objective;
        out << ',';
        if (std::isfinite(best))
            out << best;
        else
            out << "inf";
        out << '\n';
    }
    std::cout << "wrote " << out_csv << " (" << history.trials.size() << " trials, best ";
    if (std::isfinite(best))
        std::cout << best;
    else
        std::cout << "none";
    std::cout << ")\n";
}

std::vector<double> read_metric_column(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in)
        throw data::DataError("cannot open metrics file " + path);
    std::string line;
    if (!std::getline(in, line) || line.empty())
        throw data::DataError(path + ": empty metrics file");
    int target = -1;
    {
        std::stringstream header(line);
        std::string name;
        for (int idx = 0; std::getline(header, name, ','); ++idx)
            if (name == column)
                target = idx;
    }
    if (target < 0)
        throw data::DataError(path + ": no column named '" + column + "'");

    std::vector<double> values;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::stringstream row(line);
        std::string cell;
        for (int idx = 0; idx <= target; ++idx)
            if (!std::getline(row, cell, ','))
                throw data::DataError(path + " row " + std::to_string(line_no) +
                                      ": too few columns");
        try {
            values.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw data::DataError(path + " row " + std::to_string(line_no) +
                                  ": cannot parse '" + cell + "'");
        }
    }
    if (values.empty())
        throw data::DataError(path + ": no data rows");
    return values;
}

void cmd_analyze_metrics(const std::vector<std::string>& metric_files, const std::string& column,
                         const std::string& out_dir) {
    if (metric_files.empty())
        throw ConfigError("metrics: give at least one metrics CSV");
    fs::create_directories(out_dir);

    std::vector<analysis::RunSummary> summaries;
    for (const std::string& path : metric_files) {
        // Evaluation runs all emit "metrics.csv", so a generic stem would
        // collide across rows; the run directory is the distinctive name.
        std::string name = fs::path(path).stem().string();
        if (name == "metrics" && fs::path(path).has_parent_path())
            name = fs::path(path).parent_path().filename().string();
        summaries.push_back(analysis::aggregate_runs(read_metric_column(path, column), name));
    }

    const auto rows = analysis::comparison_table(summaries, {});
    analysis::write_table_csv(rows, (fs::path(out_dir) / "table.csv").string());
    const std::string text = analysis::format_table_text(rows);
    write_text((fs::path(out_dir) / "table.txt").string(), text);
    std::cout << text;

    if (metric_files.size() == 2) {
        const auto& a = summaries[0].values;
        const auto& b = summaries[1].values;
        const auto pooled = analysis::t_test(a, b, analysis::TTestVariant::Pooled);
        const auto welch = analysis::t_test(a, b, analysis::TTestVariant::Welch);
        const double perm = analysis::permutation_test_p(a, b, 100000, 0);
        std::ofstream out((fs::path(out_dir) / "ttest.csv").string());
        if (!out)
            throw std::runtime_error("cannot write ttest.csv under " + out_dir);
        out << "variant,t,df,p\n";
        out.precision(17);
        out << "pooled," << pooled.t << ',' << pooled.df << ',' << pooled.p << '\n';
        out << "welch," << welch.t << ',' << welch.df << ',' << welch.p << '\n';
        out << "permutation,,," << perm << '\n';
        std::cout << "t test (" << column << "): pooled p=" << pooled.p << ", welch p=" << welch.p
                  << ", permutation p=" << perm << '\n';
    }
}

} // namespace entsearch::cli
