#include "entsearch/sim.hpp"

#include "entsearch/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace sim = entsearch::sim;
using entsearch::Rng;
using sim::Circuit;
using sim::GateOp;
using sim::StateVector;

namespace {

constexpr double kPi = std::numbers::pi;

// Random circuit over RY/CNOT. Weight slots get fresh indices when
// fresh_weights is set (each trainable angle appears exactly once, as the
// parameter-shift rule requires); otherwise indices are drawn with reuse so
// the accumulation path over repeated slots is exercised too.
Circuit random_circuit(Rng& rng, int n_qubits, int n_ops, bool fresh_weights,
                       std::vector<double>& features, std::vector<double>& weights) {
    Circuit c;
    c.n_qubits = n_qubits;
    features.assign(static_cast<std::size_t>(n_qubits), 0.0);
    for (auto& f : features)
        f = rng.next_uniform(-kPi, kPi);
    weights.clear();
    int n_weights = fresh_weights ? 0 : 3;
    if (!fresh_weights)
        for (int i = 0; i < n_weights; ++i)
            weights.push_back(rng.next_uniform(0.0, 2.0 * kPi));
    for (int i = 0; i < n_ops; ++i) {
        const bool do_cnot = n_qubits >= 2 && rng.next_below(2) == 0;
        if (do_cnot) {
            const int control = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_qubits)));
            int target = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_qubits - 1)));
            if (target >= control)
                ++target;
            c.ops.push_back(GateOp::cnot(control, target));
            continue;
        }
        const int qubit = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_qubits)));
        switch (rng.next_below(3)) {
        case 0:
            c.ops.push_back(GateOp::ry_feature(qubit, static_cast<int>(rng.next_below(
                                                          static_cast<std::uint64_t>(n_qubits)))));
            break;
        case 1:
            if (fresh_weights) {
                c.ops.push_back(GateOp::ry_weight(qubit, static_cast<int>(weights.size())));
                weights.push_back(rng.next_uniform(0.0, 2.0 * kPi));
            } else {
                c.ops.push_back(GateOp::ry_weight(
                    qubit, static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_weights)))));
            }
            break;
        default:
            c.ops.push_back(GateOp::ry_const(qubit, rng.next_uniform(-kPi, kPi)));
            break;
        }
    }
    c.n_weights = static_cast<int>(weights.size());
    c.validate();
    return c;
}

double expect_z_direct(const StateVector& state, int qubit) {
    double acc = 0.0;
    for (std::size_t b = 0; b < state.dim(); ++b) {
        const double w = (b >> qubit) & 1u ? -1.0 : 1.0;
        acc += w * std::norm(state.amps[b]);
    }
    return acc;
}

} // namespace

TEST_CASE("zero state is |0...0>") {
    const auto state = sim::init_zero(3);
    REQUIRE(state.dim() == 8);
    CHECK(state.amps[0] == sim::cx{1.0, 0.0});
    for (std::size_t i = 1; i < 8; ++i)
        CHECK(state.amps[i] == sim::cx{0.0, 0.0});
    CHECK(sim::norm_sq(state) == doctest::Approx(1.0));
}

TEST_CASE("ry rotation matches its matrix convention on one qubit") {
    // RY(theta)|0> = cos(theta/2)|0> + sin(theta/2)|1>
    auto state = sim::init_zero(1);
    sim::apply_ry(state, 0, kPi / 2.0);
    CHECK(state.amps[0].real() == doctest::Approx(std::cos(kPi / 4.0)));
    CHECK(state.amps[1].real() == doctest::Approx(std::sin(kPi / 4.0)));

    // RY(theta)|1> = -sin(theta/2)|0> + cos(theta/2)|1>: the sign pins the
    // convention (upper-right entry is -sin).
    auto one = sim::init_zero(1);
    sim::apply_ry(one, 0, kPi); // |0> -> |1>
    CHECK(one.amps[1].real() == doctest::Approx(1.0));
    sim::apply_ry(one, 0, kPi / 3.0);
    CHECK(one.amps[0].real() == doctest::Approx(-std::sin(kPi / 6.0)));
    CHECK(one.amps[1].real() == doctest::Approx(std::cos(kPi / 6.0)));
}

TEST_CASE("qubit index is the bit position of the amplitude index") {
    // Flipping qubit 0 moves |00> to index 1; flipping qubit 1 moves it to 2.
    auto state = sim::init_zero(2);
    sim::apply_ry(state, 0, kPi);
    CHECK(std::abs(state.amps[1]) == doctest::Approx(1.0));

    auto other = sim::init_zero(2);
    sim::apply_ry(other, 1, kPi);
    CHECK(std::abs(other.amps[2]) == doctest::Approx(1.0));
}

TEST_CASE("cnot flips the target only where the control bit is set") {
    // Prepare |01> (qubit 0 set), cnot(0 -> 1) must give |11> = index 3.
    auto state = sim::init_zero(2);
    sim::apply_ry(state, 0, kPi);
    sim::apply_cnot(state, 0, 1);
    CHECK(std::abs(state.amps[3]) == doctest::Approx(1.0));

    // Control clear: |10> with cnot(0 -> 1) stays |10>.
    auto idle = sim::init_zero(2);
    sim::apply_ry(idle, 1, kPi);
    sim::apply_cnot(idle, 0, 1);
    CHECK(std::abs(idle.amps[2]) == doctest::Approx(1.0));
}

TEST_CASE("cnot entangles a superposed control") {
    auto state = sim::init_zero(2);
    sim::apply_ry(state, 0, kPi / 2.0);
    sim::apply_cnot(state, 0, 1);
    // (|00> + |11>)/sqrt(2)
    CHECK(std::abs(state.amps[0]) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(state.amps[3]) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(std::abs(state.amps[1]) == doctest::Approx(0.0));
    CHECK(std::abs(state.amps[2]) == doctest::Approx(0.0));
    CHECK(sim::expect_z(state, 0) == doctest::Approx(0.0));
    CHECK(sim::expect_z_product(state) == doctest::Approx(1.0));
}

TEST_CASE("expect_z matches direct summation on random states") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        std::vector<double> features, weights;
        const auto circuit = random_circuit(rng, n, 12, false, features, weights);
        const auto state = sim::run_circuit(circuit, features, weights);
        CHECK(sim::norm_sq(state) == doctest::Approx(1.0).epsilon(1e-12));
        for (int q = 0; q < n; ++q)
            CHECK(sim::expect_z(state, q) == doctest::Approx(expect_z_direct(state, q)));
    }
}

TEST_CASE("strided gate application agrees with the dense unitary oracle") {
    Rng rng(1234);
    int checked = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_below(5));
        const int ops = 1 + static_cast<int>(rng.next_below(25));
        std::vector<double> features, weights;
        const auto circuit = random_circuit(rng, n, ops, false, features, weights);

        const auto state = sim::run_circuit(circuit, features, weights);
        const auto unitary = sim::circuit_unitary(circuit, features, weights);

        // Column 0 of the unitary is the state prepared from |0...0>.
        REQUIRE(unitary.dim == state.dim());
        for (std::size_t r = 0; r < state.dim(); ++r) {
            CHECK(state.amps[r].real() == doctest::Approx(unitary.at(r, 0).real()).epsilon(1e-10));
            CHECK(state.amps[r].imag() == doctest::Approx(unitary.at(r, 0).imag()).epsilon(1e-10));
        }

        // And the oracle must itself be unitary: U U^dagger = I.
        sim::Matrix product;
        product.dim = unitary.dim;
        product.a.assign(unitary.dim * unitary.dim, sim::cx{0.0, 0.0});
        for (std::size_t r = 0; r < unitary.dim; ++r)
            for (std::size_t c = 0; c < unitary.dim; ++c) {
                sim::cx acc{0.0, 0.0};
                for (std::size_t m = 0; m < unitary.dim; ++m)
                    acc += unitary.at(r, m) * std::conj(unitary.at(c, m));
                product.at(r, c) = acc;
            }
        for (std::size_t r = 0; r < unitary.dim; ++r)
            for (std::size_t c = 0; c < unitary.dim; ++c) {
                const double want = r == c ? 1.0 : 0.0;
                CHECK(std::abs(product.at(r, c) - sim::cx{want, 0.0}) < 1e-10);
            }
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("matmul composes with gate application order") {
    Rng rng(55);
    std::vector<double> f1, w1, f2, w2;
    const auto a = random_circuit(rng, 3, 8, false, f1, w1);
    const auto b = random_circuit(rng, 3, 8, false, f2, w2);

    Circuit combined;
    combined.n_qubits = 3;
    combined.ops = a.ops;
    // Rebind b's ops as constants so the combined circuit needs no slot merge.
    auto freeze = [](const Circuit& c, std::span<const double> features,
                     std::span<const double> weights) {
        Circuit out;
        out.n_qubits = c.n_qubits;
        for (const auto& op : c.ops) {
            if (op.kind == GateOp::Kind::ControlledNot) {
                out.ops.push_back(op);
                continue;
            }
            double angle = op.slot.value;
            if (op.slot.kind == sim::SlotKind::Feature)
                angle = features[static_cast<std::size_t>(op.slot.index)];
            else if (op.slot.kind == sim::SlotKind::Weight)
                angle = weights[static_cast<std::size_t>(op.slot.index)];
            out.ops.push_back(GateOp::ry_const(op.qubit, angle));
        }
        return out;
    };
    const auto fa = freeze(a, f1, w1);
    const auto fb = freeze(b, f2, w2);
    Circuit seq;
    seq.n_qubits = 3;
    seq.ops = fa.ops;
    seq.ops.insert(seq.ops.end(), fb.ops.begin(), fb.ops.end());

    const auto ua = sim::circuit_unitary(fa, {}, {});
    const auto ub = sim::circuit_unitary(fb, {}, {});
    const auto useq = sim::circuit_unitary(seq, {}, {});
    const auto uprod = sim::matmul(ub, ua); // b applied after a
    REQUIRE(useq.dim == uprod.dim);
    for (std::size_t i = 0; i < useq.a.size(); ++i)
        CHECK(std::abs(useq.a[i] - uprod.a[i]) < 1e-10);
}

TEST_CASE("adjoint jacobian matches the parameter-shift rule") {
    Rng rng(77);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        std::vector<double> features, weights;
        const auto circuit = random_circuit(rng, n, 14, true, features, weights);
        const auto jac = sim::grad_expectations(circuit, features, weights);
        REQUIRE(jac.n_obs == n);
        REQUIRE(jac.n_weights == static_cast<int>(weights.size()));

        for (int w = 0; w < jac.n_weights; ++w) {
            auto plus = weights, minus = weights;
            plus[static_cast<std::size_t>(w)] += kPi / 2.0;
            minus[static_cast<std::size_t>(w)] -= kPi / 2.0;
            const auto sp = sim::run_circuit(circuit, features, plus);
            const auto sm = sim::run_circuit(circuit, features, minus);
            for (int q = 0; q < n; ++q) {
                const double shift = (sim::expect_z(sp, q) - sim::expect_z(sm, q)) / 2.0;
                CHECK(jac.wrt_weight(q, w) == doctest::Approx(shift).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("adjoint jacobian matches finite differences with repeated slots") {
    // Re-uploading circuits bind one feature to several rotations; the column
    // must hold the total derivative.
    Rng rng(78);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        std::vector<double> features, weights;
        const auto circuit = random_circuit(rng, n, 16, false, features, weights);
        const auto jac = sim::grad_expectations(circuit, features, weights);

        const double h = 1e-5;
        for (int w = 0; w < jac.n_weights; ++w) {
            auto plus = weights, minus = weights;
            plus[static_cast<std::size_t>(w)] += h;
            minus[static_cast<std::size_t>(w)] -= h;
            const auto sp = sim::run_circuit(circuit, features, plus);
            const auto sm = sim::run_circuit(circuit, features, minus);
            for (int q = 0; q < n; ++q) {
                const double fd = (sim::expect_z(sp, q) - sim::expect_z(sm, q)) / (2.0 * h);
                CHECK(jac.wrt_weight(q, w) == doctest::Approx(fd).epsilon(1e-5));
            }
        }
        for (int f = 0; f < n; ++f) {
            auto plus = features, minus = features;
            plus[static_cast<std::size_t>(f)] += h;
            minus[static_cast<std::size_t>(f)] -= h;
            const auto sp = sim::run_circuit(circuit, plus, weights);
            const auto sm = sim::run_circuit(circuit, minus, weights);
            for (int q = 0; q < n; ++q) {
                const double fd = (sim::expect_z(sp, q) - sim::expect_z(sm, q)) / (2.0 * h);
                CHECK(jac.wrt_feature(q, f) == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("weighted gradient equals the coefficient-weighted jacobian rows") {
    Rng rng(79);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_below(4));
        std::vector<double> features, weights;
        const auto circuit = random_circuit(rng, n, 16, false, features, weights);
        std::vector<double> coeffs(static_cast<std::size_t>(n));
        for (auto& c : coeffs)
            c = rng.next_uniform(-2.0, 2.0);

        const auto jac = sim::grad_expectations(circuit, features, weights);
        const auto grad = sim::grad_weighted(circuit, features, weights, coeffs);
        REQUIRE(static_cast<int>(grad.d_weights.size()) == jac.n_weights);
        REQUIRE(static_cast<int>(grad.d_features.size()) == n);

        for (int w = 0; w < jac.n_weights; ++w) {
            double want = 0.0;
            for (int q = 0; q < n; ++q)
                want += coeffs[static_cast<std::size_t>(q)] * jac.wrt_weight(q, w);
            CHECK(grad.d_weights[static_cast<std::size_t>(w)] ==
                  doctest::Approx(want).epsilon(1e-10));
        }
        for (int f = 0; f < n; ++f) {
            double want = 0.0;
            for (int q = 0; q < n; ++q)
                want += coeffs[static_cast<std::size_t>(q)] * jac.wrt_feature(q, f);
            CHECK(grad.d_features[static_cast<std::size_t>(f)] ==
                  doctest::Approx(want).epsilon(1e-10));
        }
    }
}

TEST_CASE("circuit validation rejects malformed programs") {
    Circuit c;
    c.n_qubits = 2;
    c.ops.push_back(GateOp::cnot(0, 0));
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    c.ops.clear();
    c.ops.push_back(GateOp::cnot(0, 2));
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    c.ops.clear();
    c.ops.push_back(GateOp::ry_weight(0, 3));
    c.n_weights = 2;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);

    c.ops.clear();
    c.ops.push_back(GateOp::ry_feature(5, 0));
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("run_circuit rejects undersized binding spans") {
    Circuit c;
    c.n_qubits = 2;
    c.ops.push_back(GateOp::ry_feature(0, 1));
    c.ops.push_back(GateOp::ry_weight(1, 0));
    c.n_weights = 1;
    c.validate();
    const std::vector<double> one{0.5};
    const std::vector<double> two{0.5, 0.25};
    CHECK_THROWS_AS(sim::run_circuit(c, one, one), std::out_of_range);
    CHECK_THROWS_AS(sim::run_circuit(c, two, {}), std::out_of_range);
    CHECK_NOTHROW(sim::run_circuit(c, two, one));
}

TEST_CASE("gate counters see through op kinds") {
    Circuit c;
    c.n_qubits = 3;
    c.ops.push_back(GateOp::ry_feature(0, 0));
    c.ops.push_back(GateOp::cnot(0, 1));
    c.ops.push_back(GateOp::ry_weight(1, 0));
    c.ops.push_back(GateOp::cnot(1, 2));
    c.ops.push_back(GateOp::ry_const(2, 0.1));
    c.n_weights = 1;
    CHECK(c.count_rotations() == 3);
    CHECK(c.count_cnots() == 2);
}
