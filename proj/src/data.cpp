#include "entsearch/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace entsearch::data {

using nlohmann::json;

Dataset generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
    if (config.n_samples < 1 || config.n_features < 1 || config.n_classes < 1)
        throw DataError("synthetic config dimensions must be positive");
    if (config.n_classes > (1 << config.n_features))
        throw DataError("more classes than hypercube vertices: " +
                        std::to_string(config.n_classes) + " > 2^" +
                        std::to_string(config.n_features));
    if (config.class_sep < 0.0)
        throw DataError("class_sep must be non-negative");

    // Vertex c of the hypercube has coordinate j equal to bit j of c; spread
    // the centroids by walking vertices in Gray-code order so consecutive
    // classes differ in one coordinate regardless of n_classes.
    Dataset set;
    set.name = "synthetic";
    set.n_classes = config.n_classes;
    Rng rng(derive_seed(seed, "synthetic"));
    for (int c = 0; c < config.n_classes; ++c) {
        const int per_class = config.n_samples / config.n_classes +
                              (c < config.n_samples % config.n_classes ? 1 : 0);
        const unsigned vertex = static_cast<unsigned>(c) ^ (static_cast<unsigned>(c) >> 1);
        for (int s = 0; s < per_class; ++s) {
            std::vector<double> row(static_cast<std::size_t>(config.n_features));
            for (int j = 0; j < config.n_features; ++j) {
                const double center = ((vertex >> j) & 1u) ? config.class_sep : -config.class_sep;
                row[static_cast<std::size_t>(j)] = center + config.noise_std * rng.next_gaussian();
            }
            set.X.push_back(std::move(row));
            set.y.push_back(c);
        }
    }
    return set;
}

CsvSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open schema file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("schema " + path + ": " + e.what());
    }
    if (!j.contains("label_column") || !j.contains("label_map"))
        throw DataError("schema " + path + ": needs label_column and label_map");
    CsvSchema schema;
    schema.has_header = j.value("has_header", true);
    schema.label_column = j.at("label_column").is_string()
                              ? j.at("label_column").get<std::string>()
                              : std::to_string(j.at("label_column").get<int>());
    for (const auto& [key, value] : j.at("label_map").items())
        schema.label_map[key] = value.get<int>();
    return schema;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream stream(line);
    while (std::getline(stream, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, int row, int col) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first != last && (*first == ' ' || *first == '\t'))
        ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value))
        throw DataError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                        ": cannot parse '" + cell + "' as a number");
    return value;
}

} // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open dataset file " + path);

    std::string line;
    int line_no = 0;
    int label_index = -1;
    int n_columns = -1;

    if (schema.has_header) {
        if (!std::getline(in, line))
            throw DataError(path + ": empty file");
        ++line_no;
        const auto header = split_line(line);
        n_columns = static_cast<int>(header.size());
        for (int i = 0; i < n_columns; ++i)
            if (header[static_cast<std::size_t>(i)] == schema.label_column)
                label_index = i;
        if (label_index < 0)
            throw DataError(path + ": label column '" + schema.label_column + "' missing from header");
    } else {
        label_index = std::stoi(schema.label_column);
    }

    Dataset set;
    set.name = path;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto cells = split_line(line);
        if (n_columns < 0)
            n_columns = static_cast<int>(cells.size());
        if (static_cast<int>(cells.size()) != n_columns)
            throw DataError("row " + std::to_string(line_no) + ": expected " +
                            std::to_string(n_columns) + " columns, found " +
                            std::to_string(cells.size()));
        if (label_index >= n_columns)
            throw DataError(path + ": label column index " + std::to_string(label_index) +
                            " outside " + std::to_string(n_columns) + " columns");

        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(n_columns) - 1);
        for (int col = 0; col < n_columns; ++col) {
            const std::string& cell = cells[static_cast<std::size_t>(col)];
            if (col == label_index) {
                const auto it = schema.label_map.find(cell);
                if (it == schema.label_map.end())
                    throw DataError("row " + std::to_string(line_no) + ", column " +
                                    std::to_string(col + 1) + ": unknown label '" + cell + "'");
                set.y.push_back(it->second);
            } else {
                row.push_back(parse_cell(cell, line_no, col));
            }
        }
        set.X.push_back(std::move(row));
    }
    if (set.X.empty())
        throw DataError(path + ": no data rows");

    set.n_classes = 1 + *std::max_element(set.y.begin(), set.y.end());
    std::vector<int> counts(static_cast<std::size_t>(set.n_classes), 0);
    for (int label : set.y)
        ++counts[static_cast<std::size_t>(label)];
    for (int c = 0; c < set.n_classes; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw DataError(path + ": class " + std::to_string(c) + " has no samples");
    return set;
}

ScaleStats fit_scaling(const std::vector<std::vector<double>>& X, std::span<const int> fit_rows) {
    if (fit_rows.empty())
        throw DataError("standardization needs at least one fit row");
    const std::size_t n_features = X.front().size();
    ScaleStats stats;
    stats.mean.assign(n_features, 0.0);
    stats.stddev.assign(n_features, 0.0);
    stats.zero_variance.assign(n_features, false);

    for (int row : fit_rows)
        for (std::size_t j = 0; j < n_features; ++j)
            stats.mean[j] += X[static_cast<std::size_t>(row)][j];
    for (std::size_t j = 0; j < n_features; ++j)
        stats.mean[j] /= static_cast<double>(fit_rows.size());

    for (int row : fit_rows)
        for (std::size_t j = 0; j < n_features; ++j) {
            const double d = X[static_cast<std::size_t>(row)][j] - stats.mean[j];
            stats.stddev[j] += d * d;
        }
    for (std::size_t j = 0; j < n_features; ++j) {
        stats.stddev[j] = std::sqrt(stats.stddev[j] / static_cast<double>(fit_rows.size()));
        if (stats.stddev[j] == 0.0) {
            stats.zero_variance[j] = true;
            stats.stddev[j] = 1.0; // pass through centered
        }
    }
    return stats;
}

void apply_scaling(std::vector<std::vector<double>>& X, const ScaleStats& stats) {
    for (auto& row : X) {
        if (row.size() != stats.mean.size())
            throw DataError("scaling stats fitted on " + std::to_string(stats.mean.size()) +
                            " features, row has " + std::to_string(row.size()));
        for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = (row[j] - stats.mean[j]) / stats.stddev[j];
    }
}

ScaleStats standardize(std::vector<std::vector<double>>& X, std::span<const int> fit_rows) {
    const ScaleStats stats = fit_scaling(X, fit_rows);
    apply_scaling(X, stats);
    return stats;
}

Split stratified_split(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed) {
    double total = 0.0;
    for (double f : fractions) {
        if (f <= 0.0)
            throw DataError("split fractions must all be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError("split fractions must sum to 1");

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(dataset.n_classes));
    for (int i = 0; i < dataset.n_samples(); ++i)
        by_class[static_cast<std::size_t>(dataset.y[static_cast<std::size_t>(i)])].push_back(i);

    Split split;
    split.fractions = fractions;
    split.seed = seed;
    std::vector<int>* parts[3] = {&split.train, &split.validation, &split.test};

    for (int c = 0; c < dataset.n_classes; ++c) {
        auto& rows = by_class[static_cast<std::size_t>(c)];
        const int n = static_cast<int>(rows.size());
        if (n < 3)
            throw DataError("class " + std::to_string(c) + " has " + std::to_string(n) +
                            " samples, fewer than the 3 partitions");
        Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(c)));
        for (int i = n - 1; i > 0; --i) {
            const auto j = rng.next_below(static_cast<std::uint64_t>(i) + 1);
            std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
        }

        // Largest-remainder allocation of n rows over the three partitions.
        int counts[3];
        double remainders[3];
        int assigned = 0;
        for (int p = 0; p < 3; ++p) {
            const double ideal = fractions[static_cast<std::size_t>(p)] * n;
            counts[p] = static_cast<int>(std::floor(ideal));
            remainders[p] = ideal - counts[p];
            assigned += counts[p];
        }
        while (assigned < n) {
            int best = 0;
            for (int p = 1; p < 3; ++p)
                if (remainders[p] > remainders[best])
                    best = p;
            ++counts[best];
            remainders[best] = -1.0;
            ++assigned;
        }
        for (int p = 0; p < 3; ++p)
            if (counts[p] == 0)
                throw DataError("class " + std::to_string(c) + " too small for partition " +
                                std::to_string(p) + " under the given fractions");

        int cursor = 0;
        for (int p = 0; p < 3; ++p)
            for (int i = 0; i < counts[p]; ++i)
                parts[p]->push_back(rows[static_cast<std::size_t>(cursor++)]);
    }
    for (auto* part : parts)
        std::sort(part->begin(), part->end());
    return split;
}

void save_split(const Split& split, const std::string& path) {
    json j;
    j["train"] = split.train;
    j["validation"] = split.validation;
    j["test"] = split.test;
    j["fractions"] = split.fractions;
    j["seed"] = split.seed;
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write split file " + path);
    out << j.dump(2) << '\n';
}

Split load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open split file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("split " + path + ": " + e.what());
    }
    Split split;
    split.train = j.at("train").get<std::vector<int>>();
    split.validation = j.at("validation").get<std::vector<int>>();
    split.test = j.at("test").get<std::vector<int>>();
    const auto fr = j.at("fractions").get<std::vector<double>>();
    if (fr.size() != 3)
        throw DataError("split " + path + ": fractions must have 3 entries");
    std::copy(fr.begin(), fr.end(), split.fractions.begin());
    split.seed = j.at("seed").get<std::uint64_t>();
    return split;
}

} // namespace entsearch::data
