#include "entsearch/model.hpp"

#include "entsearch/layout.hpp"
#include "entsearch/rng.hpp"
#include "entsearch/sim.hpp"
#include "entsearch/train.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

namespace model = entsearch::model;
namespace layout = entsearch::layout;
namespace sim = entsearch::sim;
namespace train = entsearch::train;
using entsearch::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

model::AnsatzSpec iris_spec() {
    model::AnsatzSpec spec;
    spec.n_qubits = 4;
    spec.depth = 2;
    spec.genotype = layout::ring_genotype(4, 1);
    return spec;
}

// Mean batch loss as a plain function of the flat parameter vector, for
// finite-difference checks of backward().
double batch_loss(const model::ModelParams& proto, const sim::Circuit& circuit,
                  std::span<const double> flat, const std::vector<std::vector<double>>& X,
                  const std::vector<int>& y) {
    model::ModelParams params = proto;
    model::unflatten(flat, params);
    double acc = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const auto trace = model::forward_trace(params, circuit, X[i]);
        acc += train::softmax_cross_entropy(trace.logits, y[i]);
    }
    return acc / static_cast<double>(X.size());
}

} // namespace

TEST_CASE("parameter counts match the hand-computed model sizes") {
    // Stand-alone 4-qubit, depth-2 classifier on 3 classes:
    // 8 rotation weights + 12 head weights + 3 biases = 23.
    Rng rng(1);
    const auto params = model::init_params(iris_spec(), 3, std::nullopt, rng);
    CHECK(model::param_count(params) == 23);
    CHECK(params.quantum_weights.size() == 8);
    CHECK(params.head_weights.size() == 12);
    CHECK(params.head_bias.size() == 3);

    // Comparison dense net 4 -> 7 -> 3: 35 + 24 = 59.
    const auto net = model::make_classical_net({4, 7, 3});
    CHECK(model::mlp_param_count(net) == 59);

    // Compressing encoder 13 -> 8 -> 6 -> 4: 112 + 54 + 28 = 194.
    const auto encoder = model::make_encoder({13, 8, 6, 4});
    CHECK(model::mlp_param_count(encoder) == 194);

    // Hybrid total = encoder + quantum + head.
    auto hybrid_spec = iris_spec();
    Rng rng2(2);
    const auto hybrid =
        model::init_params(hybrid_spec, 3, std::vector<int>{13, 8, 6, 4}, rng2);
    CHECK(model::param_count(hybrid) == 194 + 23);
}

TEST_CASE("circuit template repeats re-upload, entangle, rotate per layer") {
    const auto spec = iris_spec();
    const auto circuit = model::build_circuit(spec, 4);
    circuit.validate();
    CHECK(circuit.n_qubits == 4);
    CHECK(circuit.n_weights == 8);
    CHECK(circuit.count_rotations() == 16); // (4 feature + 4 weight) x 2 layers
    CHECK(circuit.count_cnots() == 8);      // k=4 ring twice

    // Per-layer op order: 4 feature rotations, k cnots, 4 weight rotations.
    const int per_layer = 4 + 4 + 4;
    for (int layer = 0; layer < 2; ++layer) {
        const auto base = static_cast<std::size_t>(layer * per_layer);
        for (int q = 0; q < 4; ++q) {
            const auto& op = circuit.ops[base + static_cast<std::size_t>(q)];
            CHECK(op.kind == sim::GateOp::Kind::RotationY);
            CHECK(op.slot.kind == sim::SlotKind::Feature);
            CHECK(op.qubit == q);
            CHECK(op.slot.index == q);
        }
        for (int c = 0; c < 4; ++c)
            CHECK(circuit.ops[base + 4 + static_cast<std::size_t>(c)].kind ==
                  sim::GateOp::Kind::ControlledNot);
        for (int q = 0; q < 4; ++q) {
            const auto& op = circuit.ops[base + 8 + static_cast<std::size_t>(q)];
            CHECK(op.slot.kind == sim::SlotKind::Weight);
            CHECK(op.qubit == q);
            CHECK(op.slot.index == layer * 4 + q);
        }
    }

    CHECK_THROWS_AS(model::build_circuit(spec, 3), std::invalid_argument);
    auto flat = spec;
    flat.depth = 0;
    CHECK_THROWS_AS(model::build_circuit(flat, 4), std::invalid_argument);
}

TEST_CASE("zero angles leave the state untouched so logits reduce to the head") {
    model::AnsatzSpec spec;
    spec.n_qubits = 3;
    spec.depth = 2;
    spec.genotype = layout::Genotype{}; // k = 0
    model::ModelParams params;
    params.quantum_weights.assign(6, 0.0);
    params.head_weights = {0.5, -0.25, 1.0, 0.0, 2.0, -1.0};
    params.head_bias = {0.125, -0.5};
    const std::vector<double> x{0.0, 0.0, 0.0};
    const auto logits = model::forward(params, spec, x);
    // All <Z_i> = 1: logits = row sums of the head + bias.
    CHECK(logits[0] == doctest::Approx(0.5 - 0.25 + 1.0 + 0.125));
    CHECK(logits[1] == doctest::Approx(0.0 + 2.0 - 1.0 - 0.5));
}

TEST_CASE("forward trace agrees with the dense unitary oracle") {
    Rng rng(33);
    const auto spec = iris_spec();
    const auto circuit = model::build_circuit(spec, 4);
    auto params = model::init_params(spec, 3, std::nullopt, rng);
    const std::vector<double> x{0.3, -1.2, 2.5, 0.7};

    const auto trace = model::forward_trace(params, circuit, x);
    const auto unitary = sim::circuit_unitary(circuit, x, params.quantum_weights);
    sim::StateVector state;
    state.n_qubits = 4;
    state.amps.assign(16, sim::cx{0.0, 0.0});
    for (std::size_t r = 0; r < 16; ++r)
        state.amps[r] = unitary.at(r, 0);
    for (int q = 0; q < 4; ++q)
        CHECK(trace.z[static_cast<std::size_t>(q)] ==
              doctest::Approx(sim::expect_z(state, q)).epsilon(1e-10));

    for (int c = 0; c < 3; ++c) {
        double want = params.head_bias[static_cast<std::size_t>(c)];
        for (int q = 0; q < 4; ++q)
            want += params.head_weights[static_cast<std::size_t>(c * 4 + q)] *
                    trace.z[static_cast<std::size_t>(q)];
        CHECK(trace.logits[static_cast<std::size_t>(c)] == doctest::Approx(want));
    }
}

TEST_CASE("rotation angles are 2-pi periodic end to end") {
    Rng rng(44);
    const auto spec = iris_spec();
    auto params = model::init_params(spec, 3, std::nullopt, rng);
    const std::vector<double> x{1.0, -0.5, 0.25, 2.0};
    const auto base = model::forward(params, spec, x);
    params.quantum_weights[3] += 2.0 * kPi;
    params.quantum_weights[7] -= 2.0 * kPi;
    const auto shifted = model::forward(params, spec, x);
    for (std::size_t c = 0; c < base.size(); ++c)
        CHECK(base[c] == doctest::Approx(shifted[c]).epsilon(1e-10));
}

TEST_CASE("initialization respects the documented ranges") {
    Rng rng(2718);
    const auto params =
        model::init_params(iris_spec(), 3, std::vector<int>{13, 8, 6, 4}, rng);
    for (double w : params.quantum_weights) {
        CHECK(w >= 0.0);
        CHECK(w < 2.0 * kPi);
    }
    const double head_bound = 1.0 / std::sqrt(4.0);
    for (double w : params.head_weights)
        CHECK(std::abs(w) <= head_bound);
    for (double b : params.head_bias)
        CHECK(std::abs(b) <= head_bound);
    REQUIRE(params.encoder.has_value());
    const auto& enc = *params.encoder;
    for (int l = 0; l < enc.n_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(enc.dims[static_cast<std::size_t>(l)]));
        for (double w : enc.weights[static_cast<std::size_t>(l)])
            CHECK(std::abs(w) <= bound);
        for (double b : enc.biases[static_cast<std::size_t>(l)])
            CHECK(std::abs(b) <= bound);
    }

    // Same seed, same draw; different seed, different draw.
    Rng rng_a(5), rng_b(5), rng_c(6);
    const auto a = model::init_params(iris_spec(), 3, std::nullopt, rng_a);
    const auto b = model::init_params(iris_spec(), 3, std::nullopt, rng_b);
    const auto c = model::init_params(iris_spec(), 3, std::nullopt, rng_c);
    CHECK(model::flatten(a) == model::flatten(b));
    CHECK(model::flatten(a) != model::flatten(c));
}

TEST_CASE("encoder outputs are valid rotation angles") {
    Rng rng(9);
    auto encoder = model::make_encoder({13, 8, 6, 4});
    // Give the encoder large weights so tanh saturation is actually probed.
    for (auto& layer : encoder.weights)
        for (auto& w : layer)
            w = rng.next_uniform(-3.0, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> x(13);
        for (auto& v : x)
            v = rng.next_uniform(-10.0, 10.0);
        const auto angles = model::encode(encoder, x);
        REQUIRE(angles.size() == 4);
        for (double a : angles) {
            CHECK(a > -kPi);
            CHECK(a < kPi);
        }
    }
    CHECK_THROWS_AS(model::make_encoder({13, 8, 4}), std::invalid_argument);
}

TEST_CASE("mlp forward matches a hand-computed two-layer network") {
    model::Mlp net = model::make_classical_net({2, 2, 1});
    net.weights[0] = {1.0, -1.0, 0.5, 0.5};
    net.biases[0] = {0.0, 1.0};
    net.weights[1] = {2.0, -2.0};
    net.biases[1] = {0.25};
    const std::vector<double> x{0.5, -0.5};
    const auto acts = model::mlp_forward(net, x);
    const double h0 = std::tanh(1.0 * 0.5 + -1.0 * -0.5 + 0.0);
    const double h1 = std::tanh(0.5 * 0.5 + 0.5 * -0.5 + 1.0);
    CHECK(acts.back()[0] == doctest::Approx(2.0 * h0 - 2.0 * h1 + 0.25));
}

TEST_CASE("flatten and unflatten are mutual inverses") {
    Rng rng(77);
    auto params = model::init_params(iris_spec(), 3, std::vector<int>{13, 8, 6, 4}, rng);
    const auto flat = model::flatten(params);
    REQUIRE(static_cast<int>(flat.size()) == model::param_count(params));

    auto params2 = params;
    for (auto& w : params2.quantum_weights)
        w = 0.0;
    model::unflatten(flat, params2);
    CHECK(model::flatten(params2) == flat);

    // Quantum block leads the flat layout.
    CHECK(flat[0] == params.quantum_weights[0]);
    CHECK(flat[8] == params.head_weights[0]);
    CHECK(flat[20] == params.head_bias[0]);
    CHECK(flat[23] == (*params.encoder).weights[0][0]);
}

TEST_CASE("analytic gradients match finite differences for the quantum model") {
    Rng rng(101);
    const auto spec = iris_spec();
    const auto circuit = model::build_circuit(spec, 4);
    const auto params = model::init_params(spec, 3, std::nullopt, rng);

    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> x(4);
        for (auto& v : x)
            v = rng.next_uniform(-2.0, 2.0);
        X.push_back(x);
        y.push_back(static_cast<int>(rng.next_below(3)));
    }

    auto flat = model::flatten(params);
    std::vector<double> grad(flat.size(), 0.0);
    model::ModelParams work = params;
    for (std::size_t i = 0; i < X.size(); ++i) {
        model::unflatten(flat, work);
        const auto trace = model::forward_trace(work, circuit, X[i]);
        std::vector<double> d_logits(3);
        train::softmax_cross_entropy_grad(trace.logits, y[i], d_logits);
        for (auto& d : d_logits)
            d /= static_cast<double>(X.size());
        model::backward(work, circuit, trace, d_logits, grad);
    }

    const double h = 1e-4;
    for (std::size_t p = 0; p < flat.size(); ++p) {
        auto plus = flat, minus = flat;
        plus[p] += h;
        minus[p] -= h;
        const double fd = (batch_loss(params, circuit, plus, X, y) -
                           batch_loss(params, circuit, minus, X, y)) /
                          (2.0 * h);
        CHECK(grad[p] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("analytic gradients match finite differences through the encoder") {
    Rng rng(202);
    model::AnsatzSpec spec;
    spec.n_qubits = 3;
    spec.depth = 2;
    spec.genotype = layout::Genotype{{0, 5}};
    const auto circuit = model::build_circuit(spec, 3);
    const auto params = model::init_params(spec, 2, std::vector<int>{7, 5, 4, 3}, rng);

    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> x(7);
        for (auto& v : x)
            v = rng.next_uniform(-1.5, 1.5);
        X.push_back(x);
        y.push_back(static_cast<int>(rng.next_below(2)));
    }

    auto flat = model::flatten(params);
    std::vector<double> grad(flat.size(), 0.0);
    model::ModelParams work = params;
    for (std::size_t i = 0; i < X.size(); ++i) {
        model::unflatten(flat, work);
        const auto trace = model::forward_trace(work, circuit, X[i]);
        std::vector<double> d_logits(2);
        train::softmax_cross_entropy_grad(trace.logits, y[i], d_logits);
        for (auto& d : d_logits)
            d /= static_cast<double>(X.size());
        model::backward(work, circuit, trace, d_logits, grad);
    }

    const double h = 1e-4;
    for (std::size_t p = 0; p < flat.size(); ++p) {
        auto plus = flat, minus = flat;
        plus[p] += h;
        minus[p] -= h;
        const double fd = (batch_loss(params, circuit, plus, X, y) -
                           batch_loss(params, circuit, minus, X, y)) /
                          (2.0 * h);
        CHECK(grad[p] == doctest::Approx(fd).epsilon(2e-4).scale(1.0));
    }
}

TEST_CASE("feature extraction returns the documented stages") {
    Rng rng(303);
    const auto spec = iris_spec();
    const auto params = model::init_params(spec, 3, std::nullopt, rng);
    std::vector<std::vector<double>> X{{0.1, 0.2, 0.3, 0.4}, {1.0, -1.0, 0.5, -0.5}};

    const auto pre = model::extract_features(params, spec, X, model::FeatureStage::Pre);
    CHECK(pre == X); // stand-alone: raw features pass through

    const auto post = model::extract_features(params, spec, X, model::FeatureStage::Post);
    REQUIRE(post.size() == 2);
    for (const auto& row : post) {
        REQUIRE(row.size() == 4);
        for (double z : row) {
            CHECK(z >= -1.0);
            CHECK(z <= 1.0);
        }
    }
}

TEST_CASE("checkpoints round-trip every parameter bit-exactly") {
    Rng rng(404);
    model::Checkpoint ckpt;
    ckpt.spec = iris_spec();
    ckpt.params = model::init_params(ckpt.spec, 3, std::vector<int>{13, 8, 6, 4}, rng);
    entsearch::data::ScaleStats stats;
    stats.mean = {1.0, 2.0, 3.0, 4.5e-17};
    stats.stddev = {0.5, 1.0, 2.0, 1.0};
    stats.zero_variance = {false, false, false, true};
    ckpt.scaling = stats;

    const std::string path = "test_checkpoint_roundtrip.json";
    model::save_checkpoint(ckpt, path);
    const auto loaded = model::load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(loaded.spec.n_qubits == 4);
    CHECK(loaded.spec.depth == 2);
    CHECK(loaded.spec.genotype == ckpt.spec.genotype);
    CHECK(model::flatten(loaded.params) == model::flatten(ckpt.params));
    REQUIRE(loaded.scaling.has_value());
    CHECK(loaded.scaling->mean == stats.mean);
    CHECK(loaded.scaling->stddev == stats.stddev);
    CHECK(loaded.scaling->zero_variance == stats.zero_variance);
    REQUIRE(loaded.params.encoder.has_value());
    CHECK(loaded.params.encoder->dims == std::vector<int>{13, 8, 6, 4});
    CHECK(loaded.params.encoder->tanh_output);
    CHECK(loaded.params.encoder->output_scale == doctest::Approx(kPi));
}
