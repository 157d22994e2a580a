#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace entsearch::sim {

using cx = std::complex<double>;

// Dense statevector over n qubits. Bit ordering is little-endian throughout
// the project: qubit i is bit i of the amplitude index, so for two qubits the
// basis order is |00>, |01>(qubit 0 set), |10>(qubit 1 set), |11>.
struct StateVector {
    int n_qubits = 0;
    std::vector<cx> amps;

    std::size_t dim() const { return amps.size(); }
};

constexpr int kMaxQubits = 12;

enum class SlotKind { Feature, Weight, Constant };

// Angle binding for a rotation gate: a data feature, a trainable weight, or a
// fixed constant.
struct ParamSlot {
    SlotKind kind = SlotKind::Constant;
    int index = 0;
    double value = 0.0;
};

struct GateOp {
    enum class Kind { RotationY, ControlledNot };

    Kind kind = Kind::RotationY;
    int qubit = 0;   // rotation target
    int control = 0; // cnot only
    int target = 0;  // cnot only
    ParamSlot slot;  // rotations only

    static GateOp ry_feature(int qubit, int feature_index);
    static GateOp ry_weight(int qubit, int weight_index);
    static GateOp ry_const(int qubit, double angle);
    static GateOp cnot(int control, int target);
};

struct Circuit {
    int n_qubits = 0;
    std::vector<GateOp> ops;
    int n_weights = 0; // size of the trainable weight vector the ops refer to

    // Throws std::invalid_argument on a malformed circuit (indices out of
    // range, cnot with equal wires, slot index outside its declared span).
    void validate() const;

    int count_rotations() const;
    int count_cnots() const;
};

StateVector init_zero(int n_qubits);

// RY(theta) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]. This sign
// convention is pinned by tests; the matrix oracle below must match it.
void apply_ry(StateVector& state, int qubit, double theta);

void apply_cnot(StateVector& state, int control, int target);

double norm_sq(const StateVector& state);

// <Z_q>: +1 weight for amplitudes with bit q clear, -1 for set.
double expect_z(const StateVector& state, int qubit);

// Global parity <Z x Z x ... x Z> = sum_b (-1)^popcount(b) |amp_b|^2.
double expect_z_product(const StateVector& state);

// Applies the circuit to |0...0> with the given parameter bindings.
// Throws std::out_of_range if a slot refers past the end of either span.
StateVector run_circuit(const Circuit& circuit, std::span<const double> features,
                        std::span<const double> weights);

// Row-major dim x dim complex matrix.
struct Matrix {
    std::size_t dim = 0;
    std::vector<cx> a;

    cx& at(std::size_t r, std::size_t c) { return a[r * dim + c]; }
    const cx& at(std::size_t r, std::size_t c) const { return a[r * dim + c]; }
};

Matrix matmul(const Matrix& lhs, const Matrix& rhs);

// Full unitary of the circuit built from explicit tensor products of gate
// matrices, multiplied in application order. Independent of the strided
// statevector path; capped at 5 qubits.
Matrix circuit_unitary(const Circuit& circuit, std::span<const double> features,
                       std::span<const double> weights);

// d<Z_i>/d(parameter) for every qubit observable Z_i and every bound
// parameter. Columns are ordered weights first (0..n_weights-1) then features
// (0..n_qubits-1); a parameter bound to several rotation slots gets the sum of
// the per-occurrence derivatives. Computed by reverse (adjoint) sweep.
struct Jacobian {
    int n_obs = 0;
    int n_weights = 0;
    int n_features = 0;
    std::vector<double> d; // row-major n_obs x (n_weights + n_features)

    double wrt_weight(int obs, int w) const {
        return d[static_cast<std::size_t>(obs) * (n_weights + n_features) + w];
    }
    double wrt_feature(int obs, int f) const {
        return d[static_cast<std::size_t>(obs) * (n_weights + n_features) +
                 n_weights + f];
    }
};

Jacobian grad_expectations(const Circuit& circuit,
                           std::span<const double> features,
                           std::span<const double> weights);

// Gradient of sum_i coeffs[i] * <Z_i> in a single reverse sweep; the training
// loop uses this with coeffs = dLoss/d<Z_i>.
struct WeightedGrad {
    std::vector<double> d_features;
    std::vector<double> d_weights;
};

WeightedGrad grad_weighted(const Circuit& circuit,
                           std::span<const double> features,
                           std::span<const double> weights,
                           std::span<const double> coeffs);

} // namespace entsearch::sim
