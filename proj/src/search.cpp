#include "entsearch/search.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace entsearch::search {

using nlohmann::json;

bool Trial::pruned() const {
    return !std::isfinite(objective);
}

void TpeConfig::validate() const {
    if (n_trials < 1 || n_startup_trials < 1)
        throw std::invalid_argument("trial counts must be >= 1");
    if (n_ei_candidates < 1)
        throw std::invalid_argument("n_ei_candidates must be >= 1");
    if (gamma_fraction <= 0.0 || gamma_fraction > 1.0)
        throw std::invalid_argument("gamma fraction must lie in (0, 1]");
    if (gamma_cap < 1)
        throw std::invalid_argument("gamma cap must be >= 1");
    if (prior_weight <= 0.0)
        throw std::invalid_argument("prior weight must be positive");
}

int gamma_count(const TpeConfig& config, int n_completed) {
    const int raw = static_cast<int>(
        std::ceil(config.gamma_fraction * static_cast<double>(n_completed)));
    return std::clamp(std::min(raw, config.gamma_cap), 1, n_completed - 1);
}

std::pair<std::vector<const Trial*>, std::vector<const Trial*>>
split_history(const History& history, const TpeConfig& config) {
    std::vector<const Trial*> completed;
    for (const Trial& trial : history.trials)
        if (!trial.pruned())
            completed.push_back(&trial);
    if (completed.size() < 2)
        throw std::invalid_argument("splitting needs at least 2 completed trials, have " +
                                    std::to_string(completed.size()));

    std::sort(completed.begin(), completed.end(), [](const Trial* lhs, const Trial* rhs) {
        if (lhs->objective != rhs->objective)
            return lhs->objective < rhs->objective;
        return lhs->index < rhs->index;
    });
    const auto n_good =
        static_cast<std::size_t>(gamma_count(config, static_cast<int>(completed.size())));
    std::vector<const Trial*> good(completed.begin(),
                                   completed.begin() + static_cast<std::ptrdiff_t>(n_good));
    std::vector<const Trial*> rest(completed.begin() + static_cast<std::ptrdiff_t>(n_good),
                                   completed.end());
    return {std::move(good), std::move(rest)};
}

PositionDensity fit_density(std::span<const Trial* const> trials, int n_edges, int k,
                            double prior_weight) {
    PositionDensity density;
    density.probs.assign(static_cast<std::size_t>(k),
                         std::vector<double>(static_cast<std::size_t>(n_edges), 0.0));
    for (const Trial* trial : trials)
        if (trial->genotype.k() != k)
            throw std::invalid_argument("trial genotype length " +
                                        std::to_string(trial->genotype.k()) +
                                        " differs from space k=" + std::to_string(k));

    const double normalizer = prior_weight + static_cast<double>(trials.size());
    const double prior = prior_weight / static_cast<double>(n_edges);
    for (int pos = 0; pos < k; ++pos) {
        auto& row = density.probs[static_cast<std::size_t>(pos)];
        for (const Trial* trial : trials)
            row[static_cast<std::size_t>(trial->genotype.entries[static_cast<std::size_t>(pos)])] +=
                1.0;
        for (double& p : row)
            p = (prior + p) / normalizer;
    }
    return density;
}

layout::Genotype random_suggest(const SearchSpace& space, Rng& rng) {
    return layout::random_genotype(space.n_qubits, space.k, rng);
}

namespace {

// CDF-walk categorical draw over masked, renormalized probabilities.
int draw_masked(const std::vector<double>& probs, const std::vector<bool>& used, Rng& rng) {
    double total = 0.0;
    for (std::size_t e = 0; e < probs.size(); ++e)
        if (!used[e])
            total += probs[e];
    const double u = rng.next_double() * total;
    double cumulative = 0.0;
    int last_free = -1;
    for (std::size_t e = 0; e < probs.size(); ++e) {
        if (used[e])
            continue;
        last_free = static_cast<int>(e);
        cumulative += probs[e];
        if (u < cumulative)
            return last_free;
    }
    return last_free; // rounding fell off the end: take the final unmasked edge
}

} // namespace

layout::Genotype tpe_suggest(const History& history, const TpeConfig& config, Rng& rng) {
    config.validate();
    const auto [good, rest] = split_history(history, config);
    const int n_edges = layout::edge_count(history.space.n_qubits);
    const int k = history.space.k;
    const PositionDensity l = fit_density(good, n_edges, k, config.prior_weight);
    const PositionDensity g = fit_density(rest, n_edges, k, config.prior_weight);

    std::set<std::vector<int>> evaluated;
    for (const Trial& trial : history.trials)
        evaluated.insert(trial.genotype.entries);

    // A repeat suggestion of a deterministic objective is a wasted trial, so
    // when the top-ranked candidate was already evaluated the best fresh
    // candidate from the same batch wins instead. Only when the whole batch
    // is repeats do we resample, and after ten batches the repeat stands.
    layout::Genotype winner;
    for (int attempt = 0; attempt <= 10; ++attempt) {
        double best_score = -std::numeric_limits<double>::infinity();
        double fresh_score = -std::numeric_limits<double>::infinity();
        layout::Genotype best, fresh;
        for (int candidate = 0; candidate < config.n_ei_candidates; ++candidate) {
            layout::Genotype genotype;
            genotype.entries.reserve(static_cast<std::size_t>(k));
            std::vector<bool> used(static_cast<std::size_t>(n_edges), false);
            double score = 0.0;
            for (int pos = 0; pos < k; ++pos) {
                const int edge = draw_masked(l.probs[static_cast<std::size_t>(pos)], used, rng);
                used[static_cast<std::size_t>(edge)] = true;
                genotype.entries.push_back(edge);
                // EI ranking uses the unmasked density values, in log space.
                score += std::log(l.at(pos, edge)) - std::log(g.at(pos, edge));
            }
            const bool is_fresh = !evaluated.contains(genotype.entries);
            if (is_fresh && score > fresh_score) {
                fresh_score = score;
                fresh = genotype;
            }
            if (score > best_score) {
                best_score = score;
                best = std::move(genotype);
            }
        }
        if (!fresh.entries.empty())
            return fresh;
        winner = std::move(best);
    }
    return winner; // the whole space nearby is evaluated: accept the repeat
}

void append_history_line(const Trial& trial, const SearchSpace& space, const std::string& path) {
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw std::runtime_error("cannot append to history file " + path);
    json j = layout::genotype_to_json(trial.genotype, space.n_qubits);
    j["index"] = trial.index;
    // +infinity has no JSON literal; a pruned trial stores null.
    if (trial.pruned())
        j["objective"] = nullptr;
    else
        j["objective"] = trial.objective;
    out << j.dump() << '\n';
}

History load_history(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open history file " + path);
    History history;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        Trial trial;
        int n_qubits = 0;
        trial.genotype = layout::genotype_from_json(j, n_qubits);
        trial.index = j.at("index").get<int>();
        trial.objective = j.at("objective").is_null()
                              ? std::numeric_limits<double>::infinity()
                              : j.at("objective").get<double>();
        if (history.trials.empty()) {
            history.space = {n_qubits, trial.genotype.k()};
        } else if (n_qubits != history.space.n_qubits ||
                   trial.genotype.k() != history.space.k) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": search-space descriptor changed mid-file");
        }
        if (trial.index != static_cast<int>(history.trials.size()))
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": trial index " + std::to_string(trial.index) +
                                     " breaks the 0,1,2,... sequence");
        history.trials.push_back(std::move(trial));
    }
    return history;
}

History smbo_search(const SearchSpace& space, const Objective& objective, Sampler sampler,
                    const TpeConfig& config, const std::string& history_path,
                    const layout::Genotype* warm_start) {
    config.validate();
    if (space.k > layout::edge_count(space.n_qubits))
        throw std::invalid_argument("k exceeds the edge count");
    if (warm_start != nullptr) {
        layout::validate_genotype(*warm_start, space.n_qubits);
        if (warm_start->k() != space.k)
            throw std::invalid_argument("warm-start genotype has k=" +
                                        std::to_string(warm_start->k()) + ", space needs k=" +
                                        std::to_string(space.k));
    }

    History history;
    history.space = space;
    if (!history_path.empty() && std::filesystem::exists(history_path)) {
        history = load_history(history_path);
        if (history.trials.empty())
            history.space = space;
        else if (history.space.n_qubits != space.n_qubits || history.space.k != space.k)
            throw std::runtime_error("history file " + history_path +
                                     " was produced for a different search space");
    }

    for (int t = static_cast<int>(history.trials.size()); t < config.n_trials; ++t) {
        Rng rng(derive_seed(config.seed, "suggest", static_cast<std::uint64_t>(t)));
        int completed = 0;
        for (const Trial& trial : history.trials)
            if (!trial.pruned())
                ++completed;

        Trial trial;
        trial.index = t;
        if (t == 0 && warm_start != nullptr)
            trial.genotype = *warm_start;
        else if (sampler == Sampler::Random || t < config.n_startup_trials || completed < 2)
            trial.genotype = random_suggest(space, rng);
        else
            trial.genotype = tpe_suggest(history, config, rng);

        const auto start = std::chrono::steady_clock::now();
        try {
            trial.objective = objective(trial.genotype, t);
            if (!std::isfinite(trial.objective) || trial.objective < 0.0)
                trial.objective = std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
            trial.objective = std::numeric_limits<double>::infinity();
        }
        trial.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (!history_path.empty())
            append_history_line(trial, space, history_path);
        history.trials.push_back(std::move(trial));
    }
    return history;
}

const Trial& best_trial(const History& history) {
    const Trial* best = nullptr;
    for (const Trial& trial : history.trials) {
        if (trial.pruned())
            continue;
        if (best == nullptr || trial.objective < best->objective)
            best = &trial;
    }
    if (best == nullptr)
        throw std::runtime_error("history has no completed trial");
    return *best;
}

std::vector<KSweepEntry> k_sweep(std::span<const int> k_values, int n_qubits, Sampler sampler,
                                 const TpeConfig& config,
                                 const std::function<Objective(int)>& make_objective,
                                 int n_repeats, const std::string& history_dir) {
    if (k_values.empty())
        throw std::invalid_argument("k sweep needs at least one level");
    std::vector<KSweepEntry> entries;
    for (int k : k_values) {
        const SearchSpace space{n_qubits, k};
        const Objective objective = make_objective(k);
        TpeConfig level_config = config;
        level_config.seed = derive_seed(config.seed, "level", static_cast<std::uint64_t>(k));
        std::string path;
        if (!history_dir.empty())
            path = (std::filesystem::path(history_dir) / ("sweep_k" + std::to_string(k) + ".jsonl"))
                       .string();
        const History history = smbo_search(space, objective, sampler, level_config, path);

        KSweepEntry entry;
        entry.k = k;
        entry.best = best_trial(history);
        // Dispersion of the winning genotype under fresh training seeds;
        // indices continue past the search so the seed stream never overlaps.
        for (int r = 0; r < n_repeats; ++r)
            entry.repeat_losses.push_back(
                objective(entry.best.genotype, config.n_trials + r));
        entries.push_back(std::move(entry));
    }
    return entries;
}

} // namespace entsearch::search
