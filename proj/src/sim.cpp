#include "entsearch/sim.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace entsearch::sim {

GateOp GateOp::ry_feature(int qubit, int feature_index) {
    return {Kind::RotationY, qubit, 0, 0, {SlotKind::Feature, feature_index, 0.0}};
}

GateOp GateOp::ry_weight(int qubit, int weight_index) {
    return {Kind::RotationY, qubit, 0, 0, {SlotKind::Weight, weight_index, 0.0}};
}

GateOp GateOp::ry_const(int qubit, double angle) {
    return {Kind::RotationY, qubit, 0, 0, {SlotKind::Constant, 0, angle}};
}

GateOp GateOp::cnot(int control, int target) {
    return {Kind::ControlledNot, 0, control, target, {}};
}

void Circuit::validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw std::invalid_argument("circuit: n_qubits must be in [1, " +
                                    std::to_string(kMaxQubits) + "]");
    for (const GateOp& op : ops) {
        if (op.kind == GateOp::Kind::RotationY) {
            if (op.qubit < 0 || op.qubit >= n_qubits)
                throw std::invalid_argument("circuit: rotation qubit out of range");
            if (op.slot.kind == SlotKind::Feature &&
                (op.slot.index < 0 || op.slot.index >= n_qubits))
                throw std::invalid_argument("circuit: feature index out of range");
            if (op.slot.kind == SlotKind::Weight &&
                (op.slot.index < 0 || op.slot.index >= n_weights))
                throw std::invalid_argument("circuit: weight index out of range");
        } else {
            if (op.control < 0 || op.control >= n_qubits || op.target < 0 ||
                op.target >= n_qubits)
                throw std::invalid_argument("circuit: cnot wire out of range");
            if (op.control == op.target)
                throw std::invalid_argument("circuit: cnot control equals target");
        }
    }
}

int Circuit::count_rotations() const {
    int n = 0;
    for (const GateOp& op : ops)
        if (op.kind == GateOp::Kind::RotationY)
            ++n;
    return n;
}

int Circuit::count_cnots() const {
    return static_cast<int>(ops.size()) - count_rotations();
}

StateVector init_zero(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw std::invalid_argument("init_zero: n_qubits must be in [1, " +
                                    std::to_string(kMaxQubits) + "]");
    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.assign(std::size_t{1} << n_qubits, cx{0.0, 0.0});
    s.amps[0] = cx{1.0, 0.0};
    return s;
}

namespace {

void check_qubit(const StateVector& state, int qubit, const char* who) {
    if (qubit < 0 || qubit >= state.n_qubits)
        throw std::out_of_range(std::string(who) + ": qubit index out of range");
}

} // namespace

void apply_ry(StateVector& state, int qubit, double theta) {
    check_qubit(state, qubit, "apply_ry");
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const std::size_t bit = std::size_t{1} << qubit;
    const std::size_t dim = state.dim();
    for (std::size_t base = 0; base < dim; base += 2 * bit) {
        for (std::size_t low = 0; low < bit; ++low) {
            const std::size_t i0 = base + low;
            const std::size_t i1 = i0 + bit;
            const cx a0 = state.amps[i0];
            const cx a1 = state.amps[i1];
            state.amps[i0] = c * a0 - s * a1;
            state.amps[i1] = s * a0 + c * a1;
        }
    }
}

void apply_cnot(StateVector& state, int control, int target) {
    check_qubit(state, control, "apply_cnot");
    check_qubit(state, target, "apply_cnot");
    if (control == target)
        throw std::invalid_argument("apply_cnot: control equals target");
    const std::size_t cbit = std::size_t{1} << control;
    const std::size_t tbit = std::size_t{1} << target;
    const std::size_t dim = state.dim();
    for (std::size_t i = 0; i < dim; ++i) {
        // Visit each swapped pair once via its target-clear member.
        if ((i & cbit) && !(i & tbit))
            std::swap(state.amps[i], state.amps[i | tbit]);
    }
}

double norm_sq(const StateVector& state) {
    double n = 0.0;
    for (const cx& a : state.amps)
        n += std::norm(a);
    return n;
}

double expect_z(const StateVector& state, int qubit) {
    check_qubit(state, qubit, "expect_z");
    const std::size_t bit = std::size_t{1} << qubit;
    double v = 0.0;
    for (std::size_t i = 0; i < state.dim(); ++i)
        v += (i & bit) ? -std::norm(state.amps[i]) : std::norm(state.amps[i]);
    return v;
}

double expect_z_product(const StateVector& state) {
    double v = 0.0;
    for (std::size_t i = 0; i < state.dim(); ++i) {
        const bool odd = std::popcount(i) & 1;
        v += odd ? -std::norm(state.amps[i]) : std::norm(state.amps[i]);
    }
    return v;
}

namespace {

double resolve_angle(const GateOp& op, std::span<const double> features,
                     std::span<const double> weights) {
    switch (op.slot.kind) {
    case SlotKind::Feature:
        if (op.slot.index < 0 ||
            static_cast<std::size_t>(op.slot.index) >= features.size())
            throw std::out_of_range("run_circuit: unbound feature slot " +
                                    std::to_string(op.slot.index));
        return features[op.slot.index];
    case SlotKind::Weight:
        if (op.slot.index < 0 ||
            static_cast<std::size_t>(op.slot.index) >= weights.size())
            throw std::out_of_range("run_circuit: unbound weight slot " +
                                    std::to_string(op.slot.index));
        return weights[op.slot.index];
    case SlotKind::Constant:
        return op.slot.value;
    }
    return 0.0;
}

void apply_op(StateVector& state, const GateOp& op, double angle) {
    if (op.kind == GateOp::Kind::RotationY)
        apply_ry(state, op.qubit, angle);
    else
        apply_cnot(state, op.control, op.target);
}

// Pauli-Y on one qubit: (a0, a1) -> (-i a1, i a0).
void apply_pauli_y(StateVector& state, int qubit) {
    const std::size_t bit = std::size_t{1} << qubit;
    const std::size_t dim = state.dim();
    const cx mi{0.0, -1.0};
    const cx pi{0.0, 1.0};
    for (std::size_t base = 0; base < dim; base += 2 * bit) {
        for (std::size_t low = 0; low < bit; ++low) {
            const std::size_t i0 = base + low;
            const std::size_t i1 = i0 + bit;
            const cx a0 = state.amps[i0];
            const cx a1 = state.amps[i1];
            state.amps[i0] = mi * a1;
            state.amps[i1] = pi * a0;
        }
    }
}

cx inner(const StateVector& bra, const StateVector& ket) {
    cx v{0.0, 0.0};
    for (std::size_t i = 0; i < bra.dim(); ++i)
        v += std::conj(bra.amps[i]) * ket.amps[i];
    return v;
}

} // namespace

StateVector run_circuit(const Circuit& circuit, std::span<const double> features,
                        std::span<const double> weights) {
    circuit.validate();
    StateVector state = init_zero(circuit.n_qubits);
    for (const GateOp& op : circuit.ops)
        apply_op(state, op, op.kind == GateOp::Kind::RotationY
                                ? resolve_angle(op, features, weights)
                                : 0.0);
    return state;
}

Matrix matmul(const Matrix& lhs, const Matrix& rhs) {
    Matrix out;
    out.dim = lhs.dim;
    out.a.assign(out.dim * out.dim, cx{0.0, 0.0});
    for (std::size_t r = 0; r < out.dim; ++r)
        for (std::size_t k = 0; k < out.dim; ++k) {
            const cx v = lhs.at(r, k);
            if (v == cx{0.0, 0.0})
                continue;
            for (std::size_t c = 0; c < out.dim; ++c)
                out.at(r, c) += v * rhs.at(k, c);
        }
    return out;
}

namespace {

Matrix identity(std::size_t dim) {
    Matrix m;
    m.dim = dim;
    m.a.assign(dim * dim, cx{0.0, 0.0});
    for (std::size_t i = 0; i < dim; ++i)
        m.at(i, i) = cx{1.0, 0.0};
    return m;
}

// kron(high, low): the second factor indexes the least significant bits, so a
// single-qubit factor placed at position q acts on bit q of the index.
Matrix kron(const Matrix& high, const Matrix& low) {
    Matrix out;
    out.dim = high.dim * low.dim;
    out.a.assign(out.dim * out.dim, cx{0.0, 0.0});
    for (std::size_t rh = 0; rh < high.dim; ++rh)
        for (std::size_t ch = 0; ch < high.dim; ++ch) {
            const cx v = high.at(rh, ch);
            if (v == cx{0.0, 0.0})
                continue;
            for (std::size_t rl = 0; rl < low.dim; ++rl)
                for (std::size_t cl = 0; cl < low.dim; ++cl)
                    out.at(rh * low.dim + rl, ch * low.dim + cl) =
                        v * low.at(rl, cl);
        }
    return out;
}

Matrix single(cx m00, cx m01, cx m10, cx m11) {
    Matrix m;
    m.dim = 2;
    m.a = {m00, m01, m10, m11};
    return m;
}

// Embeds 2x2 factors at the given qubit positions (identity elsewhere) into
// the full 2^n-dimensional operator.
Matrix embed(int n_qubits, const std::vector<std::pair<int, Matrix>>& factors) {
    Matrix out = identity(1);
    for (int q = 0; q < n_qubits; ++q) {
        const Matrix* f = nullptr;
        for (const auto& [wire, mat] : factors)
            if (wire == q)
                f = &mat;
        out = kron(f ? *f : identity(2), out);
    }
    return out;
}

} // namespace

Matrix circuit_unitary(const Circuit& circuit, std::span<const double> features,
                       std::span<const double> weights) {
    circuit.validate();
    if (circuit.n_qubits > 5)
        throw std::invalid_argument("circuit_unitary: capped at 5 qubits");
    const Matrix proj0 = single({1, 0}, {0, 0}, {0, 0}, {0, 0});
    const Matrix proj1 = single({0, 0}, {0, 0}, {0, 0}, {1, 0});
    const Matrix pauli_x = single({0, 0}, {1, 0}, {1, 0}, {0, 0});

    Matrix u = identity(std::size_t{1} << circuit.n_qubits);
    for (const GateOp& op : circuit.ops) {
        Matrix g;
        if (op.kind == GateOp::Kind::RotationY) {
            const double theta = resolve_angle(op, features, weights);
            const double c = std::cos(0.5 * theta);
            const double s = std::sin(0.5 * theta);
            g = embed(circuit.n_qubits,
                      {{op.qubit, single({c, 0}, {-s, 0}, {s, 0}, {c, 0})}});
        } else {
            const Matrix off = embed(circuit.n_qubits, {{op.control, proj1},
                                                        {op.target, pauli_x}});
            g = embed(circuit.n_qubits, {{op.control, proj0}});
            for (std::size_t i = 0; i < g.a.size(); ++i)
                g.a[i] += off.a[i];
        }
        u = matmul(g, u);
    }
    return u;
}

namespace {

// Reverse sweep shared by grad_expectations and grad_weighted. For each
// observable O the derivative of <O> w.r.t. a rotation angle theta_j is
// Im(<lambda_j | Y_q psi_j>) with psi_j the state after gate j and
// lambda_j = G_{j+1}^dag ... G_m^dag O psi_m.
struct AdjointAccumulator {
    const Circuit& circuit;
    std::span<const double> features;
    std::span<const double> weights;

    // per-observable gradient rows, filled with per-parameter sums
    std::vector<std::vector<double>> rows_w;
    std::vector<std::vector<double>> rows_f;

    void run(std::vector<StateVector>& phis) {
        StateVector psi = run_circuit(circuit, features, weights);
        const int n_obs = static_cast<int>(phis.size());
        rows_w.assign(n_obs, std::vector<double>(circuit.n_weights, 0.0));
        rows_f.assign(n_obs, std::vector<double>(circuit.n_qubits, 0.0));

        StateVector mu = psi;
        for (auto it = circuit.ops.rbegin(); it != circuit.ops.rend(); ++it) {
            const GateOp& op = *it;
            if (op.kind == GateOp::Kind::RotationY) {
                const double theta = resolve_angle(op, features, weights);
                if (op.slot.kind != SlotKind::Constant) {
                    mu.amps = psi.amps;
                    apply_pauli_y(mu, op.qubit);
                    for (int o = 0; o < n_obs; ++o) {
                        const double g = std::imag(inner(phis[o], mu));
                        if (op.slot.kind == SlotKind::Weight)
                            rows_w[o][op.slot.index] += g;
                        else
                            rows_f[o][op.slot.index] += g;
                    }
                }
                apply_ry(psi, op.qubit, -theta);
                for (int o = 0; o < n_obs; ++o)
                    apply_ry(phis[o], op.qubit, -theta);
            } else {
                apply_cnot(psi, op.control, op.target);
                for (int o = 0; o < n_obs; ++o)
                    apply_cnot(phis[o], op.control, op.target);
            }
        }
    }
};

} // namespace

Jacobian grad_expectations(const Circuit& circuit,
                           std::span<const double> features,
                           std::span<const double> weights) {
    StateVector final_state = run_circuit(circuit, features, weights);
    std::vector<StateVector> phis(circuit.n_qubits, final_state);
    for (int q = 0; q < circuit.n_qubits; ++q) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t i = 0; i < phis[q].dim(); ++i)
            if (i & bit)
                phis[q].amps[i] = -phis[q].amps[i];
    }

    AdjointAccumulator acc{circuit, features, weights, {}, {}};
    acc.run(phis);

    Jacobian jac;
    jac.n_obs = circuit.n_qubits;
    jac.n_weights = circuit.n_weights;
    jac.n_features = circuit.n_qubits;
    jac.d.assign(static_cast<std::size_t>(jac.n_obs) *
                     (jac.n_weights + jac.n_features),
                 0.0);
    for (int o = 0; o < jac.n_obs; ++o) {
        for (int w = 0; w < jac.n_weights; ++w)
            jac.d[static_cast<std::size_t>(o) * (jac.n_weights + jac.n_features) +
                  w] = acc.rows_w[o][w];
        for (int f = 0; f < jac.n_features; ++f)
            jac.d[static_cast<std::size_t>(o) * (jac.n_weights + jac.n_features) +
                  jac.n_weights + f] = acc.rows_f[o][f];
    }
    return jac;
}

WeightedGrad grad_weighted(const Circuit& circuit,
                           std::span<const double> features,
                           std::span<const double> weights,
                           std::span<const double> coeffs) {
    if (coeffs.size() != static_cast<std::size_t>(circuit.n_qubits))
        throw std::invalid_argument("grad_weighted: one coefficient per qubit");
    StateVector final_state = run_circuit(circuit, features, weights);

    // O = sum_i coeffs[i] Z_i is diagonal; apply it elementwise.
    std::vector<StateVector> phis(1, final_state);
    for (std::size_t i = 0; i < phis[0].dim(); ++i) {
        double d = 0.0;
        for (int q = 0; q < circuit.n_qubits; ++q)
            d += (i >> q) & 1 ? -coeffs[q] : coeffs[q];
        phis[0].amps[i] *= d;
    }

    AdjointAccumulator acc{circuit, features, weights, {}, {}};
    acc.run(phis);

    WeightedGrad g;
    g.d_weights = std::move(acc.rows_w[0]);
    g.d_features = std::move(acc.rows_f[0]);
    return g;
}

} // namespace entsearch::sim
