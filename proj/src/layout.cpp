#include "entsearch/layout.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace entsearch::layout {

EdgeSet enumerate_edges(int n_qubits) {
    if (n_qubits < 2)
        throw std::invalid_argument("edge set needs at least 2 qubits");
    EdgeSet set;
    set.n_qubits = n_qubits;
    set.edges.reserve(static_cast<std::size_t>(n_qubits) * (n_qubits - 1));
    for (int src = 0; src < n_qubits; ++src)
        for (int dst = 0; dst < n_qubits; ++dst)
            if (src != dst)
                set.edges.push_back({src, dst});
    return set;
}

int edge_count(int n_qubits) {
    return n_qubits * (n_qubits - 1);
}

void validate_genotype(const Genotype& genotype, int n_qubits) {
    const int n_edges = edge_count(n_qubits);
    std::vector<bool> seen(static_cast<std::size_t>(n_edges), false);
    for (int entry : genotype.entries) {
        if (entry < 0 || entry >= n_edges)
            throw std::invalid_argument("genotype entry " + std::to_string(entry) +
                                        " outside edge set of size " + std::to_string(n_edges));
        if (seen[static_cast<std::size_t>(entry)])
            throw std::invalid_argument("genotype entry " + std::to_string(entry) + " repeated");
        seen[static_cast<std::size_t>(entry)] = true;
    }
}

std::vector<sim::GateOp> decode(const Genotype& genotype, const EdgeSet& edges) {
    validate_genotype(genotype, edges.n_qubits);
    std::vector<sim::GateOp> ops;
    ops.reserve(genotype.entries.size());
    for (int entry : genotype.entries) {
        const Edge& e = edges.edges[static_cast<std::size_t>(entry)];
        ops.push_back(sim::GateOp::cnot(e.src, e.dst));
    }
    return ops;
}

AdjacencyMatrix to_adjacency(const Genotype& genotype, int n_qubits) {
    validate_genotype(genotype, n_qubits);
    const EdgeSet edges = enumerate_edges(n_qubits);
    AdjacencyMatrix adj(static_cast<std::size_t>(n_qubits),
                        std::vector<int>(static_cast<std::size_t>(n_qubits), 0));
    for (int entry : genotype.entries) {
        const Edge& e = edges.edges[static_cast<std::size_t>(entry)];
        adj[static_cast<std::size_t>(e.src)][static_cast<std::size_t>(e.dst)] = 1;
    }
    return adj;
}

BigInt reduced_space_size(int n_qubits, int k) {
    const int n_edges = edge_count(n_qubits);
    if (k < 0 || k > n_edges)
        throw std::invalid_argument("entanglement level " + std::to_string(k) +
                                    " outside [0, " + std::to_string(n_edges) + "]");
    // Falling factorial E * (E-1) * ... * (E-k+1).
    BigInt size = 1;
    for (int i = 0; i < k; ++i)
        size *= n_edges - i;
    return size;
}

BigInt full_space_size(int n_qubits) {
    const int n_edges = edge_count(n_qubits);
    BigInt total = 0;
    for (int k = 0; k <= n_edges; ++k)
        total += reduced_space_size(n_qubits, k);
    return total;
}

Genotype random_genotype(int n_qubits, int k, Rng& rng) {
    const int n_edges = edge_count(n_qubits);
    if (k < 0 || k > n_edges)
        throw std::invalid_argument("entanglement level " + std::to_string(k) +
                                    " outside [0, " + std::to_string(n_edges) + "]");
    // Partial Fisher-Yates: the first k slots of the index pool become a
    // uniform ordered sample without replacement.
    std::vector<int> pool(static_cast<std::size_t>(n_edges));
    for (int i = 0; i < n_edges; ++i)
        pool[static_cast<std::size_t>(i)] = i;
    Genotype genotype;
    genotype.entries.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_edges - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        genotype.entries.push_back(pool[static_cast<std::size_t>(i)]);
    }
    return genotype;
}

int edge_index(int n_qubits, int src, int dst) {
    if (src == dst || src < 0 || dst < 0 || src >= n_qubits || dst >= n_qubits)
        throw std::invalid_argument("no edge (" + std::to_string(src) + ", " +
                                    std::to_string(dst) + ") on " + std::to_string(n_qubits) +
                                    " qubits");
    return src * (n_qubits - 1) + (dst < src ? dst : dst - 1);
}

Genotype ring_genotype(int n_qubits, int stride) {
    if (n_qubits < 2)
        throw std::invalid_argument("ring layout needs at least 2 qubits");
    if (stride % n_qubits == 0)
        throw std::invalid_argument("stride " + std::to_string(stride) + " is a self-loop on " +
                                    std::to_string(n_qubits) + " qubits");
    Genotype genotype;
    genotype.entries.reserve(static_cast<std::size_t>(n_qubits));
    for (int i = 0; i < n_qubits; ++i)
        genotype.entries.push_back(edge_index(n_qubits, i, (i + stride) % n_qubits));
    validate_genotype(genotype, n_qubits);
    return genotype;
}

nlohmann::json genotype_to_json(const Genotype& genotype, int n_qubits) {
    validate_genotype(genotype, n_qubits);
    nlohmann::json j;
    j["genotype"] = genotype.entries;
    j["n_qubits"] = n_qubits;
    j["k"] = genotype.k();
    return j;
}

Genotype genotype_from_json(const nlohmann::json& j, int& n_qubits) {
    Genotype genotype;
    genotype.entries = j.at("genotype").get<std::vector<int>>();
    n_qubits = j.at("n_qubits").get<int>();
    if (j.contains("k") && j.at("k").get<int>() != genotype.k())
        throw std::invalid_argument("genotype k field " + j.at("k").dump() +
                                    " disagrees with entry count " + std::to_string(genotype.k()));
    validate_genotype(genotype, n_qubits);
    return genotype;
}

void save_genotype(const Genotype& genotype, int n_qubits, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write genotype file " + path);
    out << genotype_to_json(genotype, n_qubits).dump(2) << '\n';
}

std::pair<Genotype, int> load_genotype(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open genotype file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("genotype file " + path + ": " + e.what());
    }
    int n_qubits = 0;
    Genotype genotype = genotype_from_json(j, n_qubits);
    return {std::move(genotype), n_qubits};
}

} // namespace entsearch::layout
