#pragma once

#include "entsearch/data.hpp"
#include "entsearch/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace entsearch::train {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double lr = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.9;
    double lr_decay = 0.97;     // multiplicative factor
    int lr_decay_period = 2;    // epochs between decays
    int max_epochs = 50;
    int early_stop_patience = 0; // 0 disables early stopping
    int batch_size = 0;          // 0 means full batch
    std::uint64_t seed = 0;

    // Throws std::invalid_argument when lr < 0, momentum outside [0, 1),
    // decay outside (0, 1], or non-positive epoch counts. lr = 0 is allowed
    // as the degenerate no-op optimizer.
    void validate() const;
};

struct EpochRow {
    int epoch = 0; // 0 is the untrained starting point
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> curves;
    double best_val_loss = 0.0;
    int best_epoch = 0;
    std::vector<double> best_params; // flat, snapshot from the best epoch
    int epochs_run = 0;
};

// -log softmax(logits)[label], stabilized by max subtraction.
double softmax_cross_entropy(std::span<const double> logits, int label);

std::vector<double> softmax(std::span<const double> logits);

// Writes dLoss/dlogits = softmax - one_hot into d_logits; returns the loss.
double softmax_cross_entropy_grad(std::span<const double> logits, int label,
                                  std::span<double> d_logits);

// First-moment/second-moment adaptive step. step() applies one update with
// the supplied learning rate (the loop owns the decay schedule).
class Adam {
  public:
    Adam(std::size_t n_params, double beta1, double beta2, double eps);

    void step(std::span<double> params, std::span<const double> grad, double lr);

  private:
    double beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    int t_ = 0;
};

class SgdMomentum {
  public:
    SgdMomentum(std::size_t n_params, double momentum);

    void step(std::span<double> params, std::span<const double> grad, double lr);

  private:
    double momentum_;
    std::vector<double> velocity_;
};

// Mean loss over rows written as a gradient into grad (same flat layout as
// the parameter vector); returns the mean loss.
using BatchGradFn = std::function<double(std::span<const double> flat_params,
                                         std::span<const int> rows, std::span<double> grad)>;
// (mean loss, accuracy) over rows.
using EvalFn = std::function<std::pair<double, double>(std::span<const double> flat_params,
                                                       std::span<const int> rows)>;

// Shared epoch loop: epoch-0 metrics row, per-epoch lr decay, optional
// minibatch shuffling (seeded), early stopping on validation loss, and a
// parameter snapshot from the best validation epoch.
TrainResult train_loop(std::vector<double> params, const BatchGradFn& batch_grad,
                       const EvalFn& eval, const data::Split& split, const TrainConfig& config);

// Quantum classifier (stand-alone or hybrid) on the dataset split.
TrainResult train_model(const model::ModelParams& params, const model::AnsatzSpec& spec,
                        const data::Dataset& dataset, const data::Split& split,
                        const TrainConfig& config);

std::pair<double, double> evaluate(const model::ModelParams& params,
                                   const model::AnsatzSpec& spec, const data::Dataset& dataset,
                                   std::span<const int> rows);

// Plain dense network on the same split, used for classical comparisons.
TrainResult train_classical(const model::Mlp& net, const data::Dataset& dataset,
                            const data::Split& split, const TrainConfig& config);

std::pair<double, double> evaluate_classical(const model::Mlp& net, const data::Dataset& dataset,
                                             std::span<const int> rows);

// CSV with header epoch,train_loss,val_loss,val_acc.
void write_curves_csv(const TrainResult& result, const std::string& path);

} // namespace entsearch::train
