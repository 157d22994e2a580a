#include "entsearch/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace entsearch::model {

using nlohmann::json;

sim::Circuit build_circuit(const AnsatzSpec& spec, int n_features) {
    if (spec.depth < 1)
        throw std::invalid_argument("ansatz depth must be >= 1");
    if (n_features != spec.n_qubits)
        throw std::invalid_argument("ansatz binds one feature per qubit: " +
                                    std::to_string(n_features) + " features vs " +
                                    std::to_string(spec.n_qubits) + " qubits");
    const layout::EdgeSet edges = layout::enumerate_edges(spec.n_qubits);
    const auto entanglers = layout::decode(spec.genotype, edges);

    sim::Circuit circuit;
    circuit.n_qubits = spec.n_qubits;
    circuit.n_weights = spec.depth * spec.n_qubits;
    for (int layer = 0; layer < spec.depth; ++layer) {
        for (int q = 0; q < spec.n_qubits; ++q)
            circuit.ops.push_back(sim::GateOp::ry_feature(q, q));
        circuit.ops.insert(circuit.ops.end(), entanglers.begin(), entanglers.end());
        for (int q = 0; q < spec.n_qubits; ++q)
            circuit.ops.push_back(sim::GateOp::ry_weight(q, layer * spec.n_qubits + q));
    }
    circuit.validate();
    return circuit;
}

namespace {

void check_mlp_dims(const std::vector<int>& dims, int min_layers) {
    if (static_cast<int>(dims.size()) < min_layers + 1)
        throw std::invalid_argument("network needs at least " + std::to_string(min_layers) +
                                    " affine layers");
    for (int d : dims)
        if (d < 1)
            throw std::invalid_argument("network layer width must be positive");
}

Mlp make_mlp(const std::vector<int>& dims) {
    Mlp mlp;
    mlp.dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        mlp.weights.emplace_back(static_cast<std::size_t>(dims[l + 1]) *
                                     static_cast<std::size_t>(dims[l]),
                                 0.0);
        mlp.biases.emplace_back(static_cast<std::size_t>(dims[l + 1]), 0.0);
    }
    return mlp;
}

} // namespace

Mlp make_encoder(const std::vector<int>& dims) {
    check_mlp_dims(dims, 3);
    if (dims.size() != 4)
        throw std::invalid_argument("encoder has exactly 3 affine layers: [p, h1, h2, q]");
    Mlp mlp = make_mlp(dims);
    mlp.tanh_output = true;
    mlp.output_scale = std::numbers::pi;
    return mlp;
}

Mlp make_classical_net(const std::vector<int>& dims) {
    check_mlp_dims(dims, 1);
    Mlp mlp = make_mlp(dims);
    mlp.tanh_output = false;
    mlp.output_scale = 1.0;
    return mlp;
}

int mlp_param_count(const Mlp& mlp) {
    int total = 0;
    for (int l = 0; l < mlp.n_layers(); ++l)
        total += static_cast<int>(mlp.weights[static_cast<std::size_t>(l)].size() +
                                  mlp.biases[static_cast<std::size_t>(l)].size());
    return total;
}

std::vector<double> mlp_flatten(const Mlp& mlp) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(mlp_param_count(mlp)));
    for (int l = 0; l < mlp.n_layers(); ++l) {
        const auto& W = mlp.weights[static_cast<std::size_t>(l)];
        const auto& b = mlp.biases[static_cast<std::size_t>(l)];
        flat.insert(flat.end(), W.begin(), W.end());
        flat.insert(flat.end(), b.begin(), b.end());
    }
    return flat;
}

void mlp_unflatten(std::span<const double> flat, Mlp& mlp) {
    if (static_cast<int>(flat.size()) != mlp_param_count(mlp))
        throw std::invalid_argument("flat vector has " + std::to_string(flat.size()) +
                                    " values, network has " + std::to_string(mlp_param_count(mlp)));
    std::size_t offset = 0;
    for (int l = 0; l < mlp.n_layers(); ++l)
        for (auto* dst : {&mlp.weights[static_cast<std::size_t>(l)],
                          &mlp.biases[static_cast<std::size_t>(l)]}) {
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst->size(),
                        dst->begin());
            offset += dst->size();
        }
}

std::vector<std::vector<double>> mlp_forward(const Mlp& mlp, std::span<const double> x) {
    if (static_cast<int>(x.size()) != mlp.dims.front())
        throw std::invalid_argument("network input has " + std::to_string(x.size()) +
                                    " values, expected " + std::to_string(mlp.dims.front()));
    std::vector<std::vector<double>> acts;
    acts.reserve(static_cast<std::size_t>(mlp.n_layers()) + 1);
    acts.emplace_back(x.begin(), x.end());
    for (int l = 0; l < mlp.n_layers(); ++l) {
        const auto& W = mlp.weights[static_cast<std::size_t>(l)];
        const auto& b = mlp.biases[static_cast<std::size_t>(l)];
        const auto& in = acts.back();
        const std::size_t n_out = b.size();
        const std::size_t n_in = in.size();
        std::vector<double> out(n_out);
        const bool squash = l + 1 < mlp.n_layers() || mlp.tanh_output;
        const double scale = l + 1 == mlp.n_layers() ? mlp.output_scale : 1.0;
        for (std::size_t i = 0; i < n_out; ++i) {
            double a = b[i];
            for (std::size_t j = 0; j < n_in; ++j)
                a += W[i * n_in + j] * in[j];
            out[i] = scale * (squash ? std::tanh(a) : a);
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

std::vector<double> encode(const Mlp& encoder, std::span<const double> x) {
    return mlp_forward(encoder, x).back();
}

std::vector<double> mlp_backward(const Mlp& mlp,
                                 const std::vector<std::vector<double>>& activations,
                                 std::span<const double> d_out, std::span<double> grad) {
    if (static_cast<int>(grad.size()) != mlp_param_count(mlp))
        throw std::invalid_argument("gradient buffer size mismatch");
    std::vector<double> d_h(d_out.begin(), d_out.end());
    std::size_t offset = grad.size();
    for (int l = mlp.n_layers() - 1; l >= 0; --l) {
        const auto& W = mlp.weights[static_cast<std::size_t>(l)];
        const auto& b = mlp.biases[static_cast<std::size_t>(l)];
        const auto& in = activations[static_cast<std::size_t>(l)];
        const auto& out = activations[static_cast<std::size_t>(l) + 1];
        const std::size_t n_out = b.size();
        const std::size_t n_in = in.size();
        offset -= W.size() + b.size();

        const bool squash = l + 1 < mlp.n_layers() || mlp.tanh_output;
        const double scale = l + 1 == mlp.n_layers() ? mlp.output_scale : 1.0;
        std::vector<double> d_a(n_out);
        for (std::size_t i = 0; i < n_out; ++i) {
            if (squash) {
                const double t = out[i] / scale; // tanh value
                d_a[i] = d_h[i] * scale * (1.0 - t * t);
            } else {
                d_a[i] = d_h[i] * scale;
            }
        }
        std::vector<double> d_in(n_in, 0.0);
        for (std::size_t i = 0; i < n_out; ++i) {
            grad[offset + W.size() + i] += d_a[i]; // bias
            for (std::size_t j = 0; j < n_in; ++j) {
                grad[offset + i * n_in + j] += d_a[i] * in[j];
                d_in[j] += d_a[i] * W[i * n_in + j];
            }
        }
        d_h = std::move(d_in);
    }
    return d_h;
}

int param_count(const ModelParams& params) {
    int total = static_cast<int>(params.quantum_weights.size() + params.head_weights.size() +
                                 params.head_bias.size());
    if (params.encoder)
        total += mlp_param_count(*params.encoder);
    return total;
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(param_count(params)));
    flat.insert(flat.end(), params.quantum_weights.begin(), params.quantum_weights.end());
    flat.insert(flat.end(), params.head_weights.begin(), params.head_weights.end());
    flat.insert(flat.end(), params.head_bias.begin(), params.head_bias.end());
    if (params.encoder)
        for (int l = 0; l < params.encoder->n_layers(); ++l) {
            const auto& W = params.encoder->weights[static_cast<std::size_t>(l)];
            const auto& b = params.encoder->biases[static_cast<std::size_t>(l)];
            flat.insert(flat.end(), W.begin(), W.end());
            flat.insert(flat.end(), b.begin(), b.end());
        }
    return flat;
}

void unflatten(std::span<const double> flat, ModelParams& params) {
    if (static_cast<int>(flat.size()) != param_count(params))
        throw std::invalid_argument("flat vector has " + std::to_string(flat.size()) +
                                    " values, model has " + std::to_string(param_count(params)));
    std::size_t offset = 0;
    const auto take = [&](std::vector<double>& dst) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
        offset += dst.size();
    };
    take(params.quantum_weights);
    take(params.head_weights);
    take(params.head_bias);
    if (params.encoder)
        for (int l = 0; l < params.encoder->n_layers(); ++l) {
            take(params.encoder->weights[static_cast<std::size_t>(l)]);
            take(params.encoder->biases[static_cast<std::size_t>(l)]);
        }
}

namespace {

void init_mlp(Mlp& mlp, Rng& rng) {
    for (int l = 0; l < mlp.n_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(mlp.dims[static_cast<std::size_t>(l)]));
        for (double& w : mlp.weights[static_cast<std::size_t>(l)])
            w = rng.next_uniform(-bound, bound);
        for (double& b : mlp.biases[static_cast<std::size_t>(l)])
            b = rng.next_uniform(-bound, bound);
    }
}

} // namespace

ModelParams init_params(const AnsatzSpec& spec, int n_classes,
                        const std::optional<std::vector<int>>& encoder_dims, Rng& rng) {
    if (n_classes < 2)
        throw std::invalid_argument("classifier needs at least 2 classes");
    layout::validate_genotype(spec.genotype, spec.n_qubits);
    if (encoder_dims && encoder_dims->back() != spec.n_qubits)
        throw std::invalid_argument("encoder output width " + std::to_string(encoder_dims->back()) +
                                    " must equal qubit count " + std::to_string(spec.n_qubits));

    ModelParams params;
    params.quantum_weights.resize(static_cast<std::size_t>(spec.depth) *
                                  static_cast<std::size_t>(spec.n_qubits));
    for (double& w : params.quantum_weights)
        w = rng.next_uniform(0.0, 2.0 * std::numbers::pi);

    const double head_bound = 1.0 / std::sqrt(static_cast<double>(spec.n_qubits));
    params.head_weights.resize(static_cast<std::size_t>(n_classes) *
                               static_cast<std::size_t>(spec.n_qubits));
    for (double& w : params.head_weights)
        w = rng.next_uniform(-head_bound, head_bound);
    params.head_bias.resize(static_cast<std::size_t>(n_classes));
    for (double& b : params.head_bias)
        b = rng.next_uniform(-head_bound, head_bound);

    if (encoder_dims) {
        params.encoder = make_encoder(*encoder_dims);
        init_mlp(*params.encoder, rng);
    }
    return params;
}

ForwardTrace forward_trace(const ModelParams& params, const sim::Circuit& circuit,
                           std::span<const double> x) {
    ForwardTrace trace;
    if (params.encoder) {
        trace.encoder_acts = mlp_forward(*params.encoder, x);
        trace.angles = trace.encoder_acts.back();
    } else {
        if (static_cast<int>(x.size()) != circuit.n_qubits)
            throw std::invalid_argument("stand-alone model expects " +
                                        std::to_string(circuit.n_qubits) + " features, got " +
                                        std::to_string(x.size()));
        trace.angles.assign(x.begin(), x.end());
    }

    const sim::StateVector psi = sim::run_circuit(circuit, trace.angles, params.quantum_weights);
    trace.z.resize(static_cast<std::size_t>(circuit.n_qubits));
    for (int q = 0; q < circuit.n_qubits; ++q)
        trace.z[static_cast<std::size_t>(q)] = sim::expect_z(psi, q);

    const int n_classes = params.n_classes();
    const std::size_t n_qubits = static_cast<std::size_t>(circuit.n_qubits);
    if (params.head_weights.size() != static_cast<std::size_t>(n_classes) * n_qubits)
        throw std::invalid_argument("head weight shape does not match qubit/class counts");
    trace.logits.resize(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        double v = params.head_bias[static_cast<std::size_t>(c)];
        for (std::size_t q = 0; q < n_qubits; ++q)
            v += params.head_weights[static_cast<std::size_t>(c) * n_qubits + q] * trace.z[q];
        trace.logits[static_cast<std::size_t>(c)] = v;
    }
    return trace;
}

std::vector<double> forward(const ModelParams& params, const AnsatzSpec& spec,
                            std::span<const double> x) {
    const sim::Circuit circuit = build_circuit(spec, spec.n_qubits);
    return forward_trace(params, circuit, x).logits;
}

void backward(const ModelParams& params, const sim::Circuit& circuit,
              const ForwardTrace& trace, std::span<const double> d_logits,
              std::span<double> grad) {
    if (static_cast<int>(grad.size()) != param_count(params))
        throw std::invalid_argument("gradient buffer size mismatch");
    const int n_classes = params.n_classes();
    const std::size_t n_qubits = static_cast<std::size_t>(circuit.n_qubits);
    const std::size_t head_w_off = params.quantum_weights.size();
    const std::size_t head_b_off = head_w_off + params.head_weights.size();
    const std::size_t encoder_off = head_b_off + params.head_bias.size();

    std::vector<double> dz(n_qubits, 0.0);
    for (int c = 0; c < n_classes; ++c) {
        const double dl = d_logits[static_cast<std::size_t>(c)];
        grad[head_b_off + static_cast<std::size_t>(c)] += dl;
        for (std::size_t q = 0; q < n_qubits; ++q) {
            grad[head_w_off + static_cast<std::size_t>(c) * n_qubits + q] += dl * trace.z[q];
            dz[q] += dl * params.head_weights[static_cast<std::size_t>(c) * n_qubits + q];
        }
    }

    const sim::WeightedGrad wg =
        sim::grad_weighted(circuit, trace.angles, params.quantum_weights, dz);
    for (std::size_t w = 0; w < params.quantum_weights.size(); ++w)
        grad[w] += wg.d_weights[w];

    if (params.encoder)
        mlp_backward(*params.encoder, trace.encoder_acts, wg.d_features,
                     grad.subspan(encoder_off));
}

std::vector<std::vector<double>> extract_features(const ModelParams& params,
                                                  const AnsatzSpec& spec,
                                                  const std::vector<std::vector<double>>& X,
                                                  FeatureStage stage) {
    std::vector<std::vector<double>> rows;
    rows.reserve(X.size());
    if (stage == FeatureStage::Pre) {
        for (const auto& x : X)
            rows.push_back(params.encoder ? encode(*params.encoder, x) : x);
        return rows;
    }
    const sim::Circuit circuit = build_circuit(spec, spec.n_qubits);
    for (const auto& x : X)
        rows.push_back(forward_trace(params, circuit, x).z);
    return rows;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    json j;
    j["spec"] = layout::genotype_to_json(checkpoint.spec.genotype, checkpoint.spec.n_qubits);
    j["spec"]["depth"] = checkpoint.spec.depth;
    j["n_classes"] = checkpoint.params.n_classes();
    j["quantum_weights"] = checkpoint.params.quantum_weights;
    j["head_weights"] = checkpoint.params.head_weights;
    j["head_bias"] = checkpoint.params.head_bias;
    if (checkpoint.params.encoder) {
        const Mlp& enc = *checkpoint.params.encoder;
        j["encoder"] = {{"dims", enc.dims}, {"weights", enc.weights}, {"biases", enc.biases}};
    }
    if (checkpoint.scaling) {
        std::vector<int> flags(checkpoint.scaling->zero_variance.begin(),
                               checkpoint.scaling->zero_variance.end());
        j["scaling"] = {{"mean", checkpoint.scaling->mean},
                        {"stddev", checkpoint.scaling->stddev},
                        {"zero_variance", flags}};
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write checkpoint file " + path);
    out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open checkpoint file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("checkpoint " + path + ": " + e.what());
    }

    Checkpoint checkpoint;
    checkpoint.spec.genotype = layout::genotype_from_json(j.at("spec"), checkpoint.spec.n_qubits);
    checkpoint.spec.depth = j.at("spec").at("depth").get<int>();
    checkpoint.params.quantum_weights = j.at("quantum_weights").get<std::vector<double>>();
    checkpoint.params.head_weights = j.at("head_weights").get<std::vector<double>>();
    checkpoint.params.head_bias = j.at("head_bias").get<std::vector<double>>();
    if (j.contains("encoder")) {
        Mlp enc = make_encoder(j.at("encoder").at("dims").get<std::vector<int>>());
        enc.weights = j.at("encoder").at("weights").get<std::vector<std::vector<double>>>();
        enc.biases = j.at("encoder").at("biases").get<std::vector<std::vector<double>>>();
        checkpoint.params.encoder = std::move(enc);
    }
    if (j.contains("scaling")) {
        data::ScaleStats stats;
        stats.mean = j.at("scaling").at("mean").get<std::vector<double>>();
        stats.stddev = j.at("scaling").at("stddev").get<std::vector<double>>();
        const auto flags = j.at("scaling").at("zero_variance").get<std::vector<int>>();
        stats.zero_variance.assign(flags.begin(), flags.end());
        checkpoint.scaling = std::move(stats);
    }

    const std::size_t expect_q = static_cast<std::size_t>(checkpoint.spec.depth) *
                                 static_cast<std::size_t>(checkpoint.spec.n_qubits);
    if (checkpoint.params.quantum_weights.size() != expect_q)
        throw std::runtime_error("checkpoint " + path + ": quantum weight count " +
                                 std::to_string(checkpoint.params.quantum_weights.size()) +
                                 " does not match depth x qubits " + std::to_string(expect_q));
    return checkpoint;
}

} // namespace entsearch::model
