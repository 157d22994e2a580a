#pragma once

#include "entsearch/data.hpp"
#include "entsearch/layout.hpp"
#include "entsearch/rng.hpp"
#include "entsearch/sim.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace entsearch::model {

// Layered ansatz template: every layer re-uploads the data rotations, applies
// the genotype's CNOT sequence, then applies that layer's trainable
// rotations. The same genotype is reused in every layer.
struct AnsatzSpec {
    int n_qubits = 0;
    int depth = 1;
    layout::Genotype genotype;
};

// Builds depth layers of [RY(x_i) on every qubit, decoded CNOTs, RY(w_{l,i})
// on every qubit]. Feature slot i is qubit i's angle; weight slots are
// layer-major (l * n_qubits + i). Requires n_features == n_qubits.
sim::Circuit build_circuit(const AnsatzSpec& spec, int n_features);

// Small dense network: affine layers with tanh on hidden layers; the hybrid
// encoder variant also applies tanh to the last layer and scales by
// output_scale so the outputs are valid rotation angles.
struct Mlp {
    std::vector<int> dims;                     // [in, hidden..., out]
    std::vector<std::vector<double>> weights;  // layer l: dims[l+1] x dims[l], row-major
    std::vector<std::vector<double>> biases;   // layer l: dims[l+1]
    bool tanh_output = false;
    double output_scale = 1.0;

    int n_layers() const { return static_cast<int>(weights.size()); }
};

// Feature-compressing encoder: exactly 3 affine layers, tanh everywhere,
// output scaled by pi so every angle lands in (-pi, pi).
Mlp make_encoder(const std::vector<int>& dims);

// Comparison network: tanh hidden layers, linear logits output.
Mlp make_classical_net(const std::vector<int>& dims);

int mlp_param_count(const Mlp& mlp);

// Flat layout: layers in order, each as [W row-major, b] — the same layout
// mlp_backward accumulates into.
std::vector<double> mlp_flatten(const Mlp& mlp);
void mlp_unflatten(std::span<const double> flat, Mlp& mlp);

// Activations per layer: out[0] is the input copy, out[l+1] the output of
// affine layer l (after activation and scaling). The last entry is the
// network output.
std::vector<std::vector<double>> mlp_forward(const Mlp& mlp, std::span<const double> x);

// Encoder convenience wrapper: returns just the angle vector.
std::vector<double> encode(const Mlp& encoder, std::span<const double> x);

// Backpropagates d_out (gradient w.r.t. the network output) through the
// activations returned by mlp_forward. Weight/bias gradients are accumulated
// into grad, laid out layer-by-layer as [W row-major, b]; returns the
// gradient w.r.t. the input.
std::vector<double> mlp_backward(const Mlp& mlp,
                                 const std::vector<std::vector<double>>& activations,
                                 std::span<const double> d_out, std::span<double> grad);

// All trainable scalars of the classifier. The flat order used by the
// optimizers is: quantum_weights, head_weights (class-major), head_bias, then
// encoder layers ([W, b] per layer).
struct ModelParams {
    std::vector<double> quantum_weights;  // depth x n_qubits, layer-major
    std::vector<double> head_weights;     // n_classes x n_qubits, row-major
    std::vector<double> head_bias;        // n_classes
    std::optional<Mlp> encoder;

    int n_classes() const { return static_cast<int>(head_bias.size()); }
};

int param_count(const ModelParams& params);

std::vector<double> flatten(const ModelParams& params);
void unflatten(std::span<const double> flat, ModelParams& params);

// Quantum angles uniform on [0, 2pi); head and encoder weights and biases
// uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)]. Draw order is pinned:
// quantum, head weights, head bias, encoder layers in order.
ModelParams init_params(const AnsatzSpec& spec, int n_classes,
                        const std::optional<std::vector<int>>& encoder_dims, Rng& rng);

// logits = head_weights . (<Z_1>,...,<Z_n>) + head_bias, with x passed
// through the encoder first when one is present.
std::vector<double> forward(const ModelParams& params, const AnsatzSpec& spec,
                            std::span<const double> x);

// Everything backward() needs from one forward pass.
struct ForwardTrace {
    std::vector<std::vector<double>> encoder_acts; // empty for stand-alone
    std::vector<double> angles;                    // circuit feature bindings
    std::vector<double> z;                         // per-qubit <Z_i>
    std::vector<double> logits;
};

// Hot-path overload: the caller builds the circuit once per spec.
ForwardTrace forward_trace(const ModelParams& params, const sim::Circuit& circuit,
                           std::span<const double> x);

// Accumulates dLoss/d(every parameter) into grad (flat layout) given
// dLoss/dlogits. One adjoint sweep for the quantum block, ordinary backprop
// for head and encoder.
void backward(const ModelParams& params, const sim::Circuit& circuit,
              const ForwardTrace& trace, std::span<const double> d_logits,
              std::span<double> grad);

enum class FeatureStage { Pre, Post };

// stage=pre: encoder outputs (hybrid) or the raw feature rows (stand-alone);
// stage=post: per-qubit <Z_i> rows. One row per dataset row.
std::vector<std::vector<double>> extract_features(const ModelParams& params,
                                                  const AnsatzSpec& spec,
                                                  const std::vector<std::vector<double>>& X,
                                                  FeatureStage stage);

// Model checkpoint: ansatz spec, every parameter array, and the feature
// scaling fitted on the training rows (absent for stand-alone runs).
struct Checkpoint {
    AnsatzSpec spec;
    ModelParams params;
    std::optional<data::ScaleStats> scaling;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace entsearch::model
