#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "entsearch/rng.hpp"
#include "entsearch/sim.hpp"

#include <string>
#include <utility>
#include <vector>

namespace entsearch::layout {

using BigInt = boost::multiprecision::cpp_int;

struct Edge {
    int src = 0;
    int dst = 0;

    bool operator==(const Edge&) const = default;
};

// All directed qubit pairs in canonical order: ascending by (src, dst) with
// the diagonal skipped. Genotype entries index into this list.
struct EdgeSet {
    int n_qubits = 0;
    std::vector<Edge> edges;

    int size() const { return static_cast<int>(edges.size()); }
};

// Ordered vector of k distinct edge indices; the order of entries is the
// order of the cnot gates, so two permutations of the same edges are
// different layouts.
struct Genotype {
    std::vector<int> entries;

    int k() const { return static_cast<int>(entries.size()); }

    bool operator==(const Genotype&) const = default;
};

using AdjacencyMatrix = std::vector<std::vector<int>>;

EdgeSet enumerate_edges(int n_qubits);

// Number of directed edges on n qubits: n(n-1).
int edge_count(int n_qubits);

// Throws std::invalid_argument if the genotype has a duplicate entry or an
// entry outside the edge set.
void validate_genotype(const Genotype& genotype, int n_qubits);

std::vector<sim::GateOp> decode(const Genotype& genotype, const EdgeSet& edges);

AdjacencyMatrix to_adjacency(const Genotype& genotype, int n_qubits);

// Exact count of ordered distinct-index vectors of every length:
// sum_{k=0}^{E} E!/(E-k)!.
BigInt full_space_size(int n_qubits);

// Exact count for one entanglement level: E!/(E-k)!.
BigInt reduced_space_size(int n_qubits, int k);

// Uniform over all E!/(E-k)! ordered distinct-index vectors.
Genotype random_genotype(int n_qubits, int k, Rng& rng);

// Canonical index of the directed edge (src, dst).
int edge_index(int n_qubits, int src, int dst);

// Conventional strongly-entangling cycle: qubit i controls qubit
// (i + stride) mod n for every i. stride=1 and stride=2 are the two
// hand-designed reference layouts. Throws when the stride makes any edge a
// self-loop (e.g. stride 2 with n = 2).
Genotype ring_genotype(int n_qubits, int stride);

// JSON form used by genotype files and history lines:
//   {"genotype": [entries...], "n_qubits": N, "k": K}
nlohmann::json genotype_to_json(const Genotype& genotype, int n_qubits);
Genotype genotype_from_json(const nlohmann::json& j, int& n_qubits);

void save_genotype(const Genotype& genotype, int n_qubits, const std::string& path);
std::pair<Genotype, int> load_genotype(const std::string& path);

} // namespace entsearch::layout
