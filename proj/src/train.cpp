#include "entsearch/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace entsearch::train {

void TrainConfig::validate() const {
    if (lr < 0.0)
        throw std::invalid_argument("learning rate must be non-negative");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("momentum must lie in [0, 1)");
    if (lr_decay <= 0.0 || lr_decay > 1.0)
        throw std::invalid_argument("lr decay factor must lie in (0, 1]");
    if (lr_decay_period < 1)
        throw std::invalid_argument("lr decay period must be >= 1 epoch");
    if (max_epochs < 1)
        throw std::invalid_argument("max_epochs must be >= 1");
    if (early_stop_patience < 0 || batch_size < 0)
        throw std::invalid_argument("patience and batch size must be non-negative");
}

double softmax_cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("label " + std::to_string(label) + " outside " +
                                    std::to_string(logits.size()) + " classes");
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits)
        sum += std::exp(v - top);
    return std::log(sum) - (logits[static_cast<std::size_t>(label)] - top);
}

std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - top);
        sum += probs[i];
    }
    for (double& p : probs)
        p /= sum;
    return probs;
}

double softmax_cross_entropy_grad(std::span<const double> logits, int label,
                                  std::span<double> d_logits) {
    const double loss = softmax_cross_entropy(logits, label);
    const std::vector<double> probs = softmax(logits);
    for (std::size_t i = 0; i < logits.size(); ++i)
        d_logits[i] = probs[i];
    d_logits[static_cast<std::size_t>(label)] -= 1.0;
    return loss;
}

Adam::Adam(std::size_t n_params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
}

SgdMomentum::SgdMomentum(std::size_t n_params, double momentum)
    : momentum_(momentum), velocity_(n_params, 0.0) {}

void SgdMomentum::step(std::span<double> params, std::span<const double> grad, double lr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] - lr * grad[i];
        params[i] += velocity_[i];
    }
}

TrainResult train_loop(std::vector<double> params, const BatchGradFn& batch_grad,
                       const EvalFn& eval, const data::Split& split, const TrainConfig& config) {
    config.validate();
    if (split.train.empty() || split.validation.empty())
        throw std::invalid_argument("training needs non-empty train and validation partitions");

    Adam adam(params.size(), config.beta1, config.beta2, config.eps);
    SgdMomentum sgd(params.size(), config.momentum);
    const auto apply_step = [&](std::span<const double> grad, double lr) {
        if (config.optimizer == Optimizer::Adam)
            adam.step(params, grad, lr);
        else
            sgd.step(params, grad, lr);
    };

    TrainResult result;
    const auto record = [&](int epoch, double train_loss) {
        const auto [val_loss, val_acc] = eval(params, split.validation);
        result.curves.push_back({epoch, train_loss, val_loss, val_acc});
        if (result.curves.size() == 1 || val_loss < result.best_val_loss) {
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
            result.best_params = params;
        }
    };
    record(0, eval(params, split.train).first);

    std::vector<int> order = split.train;
    std::vector<double> grad(params.size());
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double lr =
            config.lr * std::pow(config.lr_decay, (epoch - 1) / config.lr_decay_period);

        double epoch_loss = 0.0;
        if (config.batch_size == 0 || config.batch_size >= static_cast<int>(order.size())) {
            std::fill(grad.begin(), grad.end(), 0.0);
            epoch_loss = batch_grad(params, order, grad);
            apply_step(grad, lr);
        } else {
            Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                const auto j = rng.next_below(static_cast<std::uint64_t>(i) + 1);
                std::swap(order[i], order[static_cast<std::size_t>(j)]);
            }
            int n_batches = 0;
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t len =
                    std::min(static_cast<std::size_t>(config.batch_size), order.size() - start);
                std::fill(grad.begin(), grad.end(), 0.0);
                epoch_loss += batch_grad(params, std::span<const int>(order).subspan(start, len), grad);
                apply_step(grad, lr);
                ++n_batches;
            }
            epoch_loss /= n_batches;
        }

        record(epoch, epoch_loss);
        result.epochs_run = epoch;
        if (config.early_stop_patience > 0 &&
            epoch - result.best_epoch >= config.early_stop_patience)
            break;
    }
    return result;
}

namespace {

// Shared quantum-model closures over a prebuilt circuit.
struct ModelBindings {
    const model::AnsatzSpec& spec;
    const data::Dataset& dataset;
    model::ModelParams work; // scratch copy, refreshed from the flat vector
    sim::Circuit circuit;

    ModelBindings(const model::ModelParams& params, const model::AnsatzSpec& spec_,
                  const data::Dataset& dataset_)
        : spec(spec_), dataset(dataset_), work(params),
          circuit(model::build_circuit(spec_, spec_.n_qubits)) {}

    double batch_grad(std::span<const double> flat, std::span<const int> rows,
                      std::span<double> grad) {
        model::unflatten(flat, work);
        const int n_classes = work.n_classes();
        std::vector<double> d_logits(static_cast<std::size_t>(n_classes));
        double loss = 0.0;
        for (int row : rows) {
            const auto trace =
                model::forward_trace(work, circuit, dataset.X[static_cast<std::size_t>(row)]);
            loss += softmax_cross_entropy_grad(trace.logits,
                                               dataset.y[static_cast<std::size_t>(row)], d_logits);
            for (double& d : d_logits)
                d /= static_cast<double>(rows.size());
            model::backward(work, circuit, trace, d_logits, grad);
        }
        return loss / static_cast<double>(rows.size());
    }

    std::pair<double, double> eval(std::span<const double> flat, std::span<const int> rows) {
        model::unflatten(flat, work);
        double loss = 0.0;
        int correct = 0;
        for (int row : rows) {
            const auto trace =
                model::forward_trace(work, circuit, dataset.X[static_cast<std::size_t>(row)]);
            const int label = dataset.y[static_cast<std::size_t>(row)];
            loss += softmax_cross_entropy(trace.logits, label);
            const auto top = std::max_element(trace.logits.begin(), trace.logits.end());
            if (static_cast<int>(top - trace.logits.begin()) == label)
                ++correct;
        }
        return {loss / static_cast<double>(rows.size()),
                static_cast<double>(correct) / static_cast<double>(rows.size())};
    }
};

} // namespace

TrainResult train_model(const model::ModelParams& params, const model::AnsatzSpec& spec,
                        const data::Dataset& dataset, const data::Split& split,
                        const TrainConfig& config) {
    auto bindings = std::make_shared<ModelBindings>(params, spec, dataset);
    return train_loop(
        model::flatten(params),
        [bindings](std::span<const double> flat, std::span<const int> rows,
                   std::span<double> grad) { return bindings->batch_grad(flat, rows, grad); },
        [bindings](std::span<const double> flat, std::span<const int> rows) {
            return bindings->eval(flat, rows);
        },
        split, config);
}

std::pair<double, double> evaluate(const model::ModelParams& params,
                                   const model::AnsatzSpec& spec, const data::Dataset& dataset,
                                   std::span<const int> rows) {
    if (rows.empty())
        throw std::invalid_argument("evaluation subset is empty");
    ModelBindings bindings(params, spec, dataset);
    return bindings.eval(model::flatten(params), rows);
}

namespace {

struct ClassicalBindings {
    const data::Dataset& dataset;
    model::Mlp work;

    double batch_grad(std::span<const double> flat, std::span<const int> rows,
                      std::span<double> grad) {
        model::mlp_unflatten(flat, work);
        const std::size_t n_out = work.biases.back().size();
        std::vector<double> d_logits(n_out);
        double loss = 0.0;
        for (int row : rows) {
            const auto acts = model::mlp_forward(work, dataset.X[static_cast<std::size_t>(row)]);
            loss += softmax_cross_entropy_grad(acts.back(),
                                               dataset.y[static_cast<std::size_t>(row)], d_logits);
            for (double& d : d_logits)
                d /= static_cast<double>(rows.size());
            model::mlp_backward(work, acts, d_logits, grad);
        }
        return loss / static_cast<double>(rows.size());
    }

    std::pair<double, double> eval(std::span<const double> flat, std::span<const int> rows) {
        model::mlp_unflatten(flat, work);
        double loss = 0.0;
        int correct = 0;
        for (int row : rows) {
            const auto acts = model::mlp_forward(work, dataset.X[static_cast<std::size_t>(row)]);
            const auto& logits = acts.back();
            const int label = dataset.y[static_cast<std::size_t>(row)];
            loss += softmax_cross_entropy(logits, label);
            const auto top = std::max_element(logits.begin(), logits.end());
            if (static_cast<int>(top - logits.begin()) == label)
                ++correct;
        }
        return {loss / static_cast<double>(rows.size()),
                static_cast<double>(correct) / static_cast<double>(rows.size())};
    }
};

} // namespace

TrainResult train_classical(const model::Mlp& net, const data::Dataset& dataset,
                            const data::Split& split, const TrainConfig& config) {
    auto bindings = std::make_shared<ClassicalBindings>(ClassicalBindings{dataset, net});
    return train_loop(
        model::mlp_flatten(net),
        [bindings](std::span<const double> flat, std::span<const int> rows,
                   std::span<double> grad) { return bindings->batch_grad(flat, rows, grad); },
        [bindings](std::span<const double> flat, std::span<const int> rows) {
            return bindings->eval(flat, rows);
        },
        split, config);
}

std::pair<double, double> evaluate_classical(const model::Mlp& net, const data::Dataset& dataset,
                                             std::span<const int> rows) {
    if (rows.empty())
        throw std::invalid_argument("evaluation subset is empty");
    ClassicalBindings bindings{dataset, net};
    return bindings.eval(model::mlp_flatten(net), rows);
}

void write_curves_csv(const TrainResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write curves file " + path);
    out << "epoch,train_loss,val_loss,val_acc\n";
    out.precision(17);
    for (const auto& row : result.curves)
        out << row.epoch << ',' << row.train_loss << ',' << row.val_loss << ',' << row.val_acc
            << '\n';
}

} // namespace entsearch::train
