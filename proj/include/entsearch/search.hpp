#pragma once

#include "entsearch/layout.hpp"
#include "entsearch/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace entsearch::search {

struct SearchSpace {
    int n_qubits = 0;
    int k = 0;
};

struct Trial {
    int index = 0;
    layout::Genotype genotype;
    double objective = 0.0; // +infinity marks a pruned (failed) trial
    double seconds = 0.0;   // wall time; logged, never persisted (reruns must be byte-identical)

    bool pruned() const;
};

struct History {
    SearchSpace space;
    std::vector<Trial> trials;
};

struct TpeConfig {
    int n_startup_trials = 20;
    int n_trials = 300;
    int n_ei_candidates = 1000;
    double gamma_fraction = 0.1; // gamma(n) = min(ceil(fraction*n), cap), clamped to [1, n-1]
    int gamma_cap = 25;
    double prior_weight = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

int gamma_count(const TpeConfig& config, int n_completed);

enum class Sampler { Tpe, Random };

// Trainer callback: the trial index feeds the per-trial seed derivation so
// both samplers face identically distributed training noise.
using Objective = std::function<double(const layout::Genotype& genotype, int trial_index)>;

// Lowest-objective gamma(n) completed trials (ties broken by earlier index)
// versus the rest. Pruned trials are excluded before splitting. Throws on
// fewer than 2 completed trials.
std::pair<std::vector<const Trial*>, std::vector<const Trial*>>
split_history(const History& history, const TpeConfig& config);

// Per-position smoothed categorical over the E edge choices:
// p(edge e at position i) proportional to prior_weight/E + count.
struct PositionDensity {
    std::vector<std::vector<double>> probs; // k positions x E edges

    double at(int position, int edge) const {
        return probs[static_cast<std::size_t>(position)][static_cast<std::size_t>(edge)];
    }
};

PositionDensity fit_density(std::span<const Trial* const> trials, int n_edges, int k,
                            double prior_weight);

// Draws n_ei_candidates genotypes position-by-position from the good-trial
// density (within-genotype duplicates masked out and renormalized) and
// returns the one maximizing prod_i l_i / g_i. A winner that repeats an
// already-evaluated genotype triggers a full resample, up to 10 times.
layout::Genotype tpe_suggest(const History& history, const TpeConfig& config, Rng& rng);

layout::Genotype random_suggest(const SearchSpace& space, Rng& rng);

// JSON-lines persistence; one {"genotype":..., "index":..., "k":...,
// "n_qubits":..., "objective":...} object per line. A pruned trial's
// objective serializes as null.
void append_history_line(const Trial& trial, const SearchSpace& space, const std::string& path);
History load_history(const std::string& path);

// The SMBO loop: n_startup_trials uniform suggestions, then sampler-driven
// ones; every result is appended to history_path (when non-empty) as soon as
// it completes, and an existing file is picked up so an interrupted search
// resumes exactly where it stopped. Objective exceptions record a pruned
// trial. Per-trial suggestion randomness derives from (seed, trial index)
// alone, so a resumed search replays the uninterrupted trajectory.
// warm_start, when given, becomes trial 0 instead of a random draw.
History smbo_search(const SearchSpace& space, const Objective& objective, Sampler sampler,
                    const TpeConfig& config, const std::string& history_path = "",
                    const layout::Genotype* warm_start = nullptr);

const Trial& best_trial(const History& history);

struct KSweepEntry {
    int k = 0;
    Trial best;
    std::vector<double> repeat_losses; // best genotype re-trained with fresh seeds
};

// One smbo_search per entanglement level; the best genotype of each level is
// re-evaluated n_repeats times (trial indices past the search range, so each
// repeat gets a fresh derived seed). history_dir, when non-empty, receives
// one sweep_k<k>.jsonl file per level.
std::vector<KSweepEntry> k_sweep(std::span<const int> k_values, int n_qubits, Sampler sampler,
                                 const TpeConfig& config,
                                 const std::function<Objective(int)>& make_objective,
                                 int n_repeats, const std::string& history_dir = "");

} // namespace entsearch::search
