#include "entsearch/analysis.hpp"

#include "entsearch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace entsearch::analysis {

RunSummary aggregate_runs(std::span<const double> values, std::string metric) {
    if (values.empty())
        throw std::invalid_argument("cannot summarize zero runs");
    RunSummary summary;
    summary.metric = std::move(metric);
    summary.values.assign(values.begin(), values.end());
    summary.run_count = static_cast<int>(values.size());
    for (double v : values)
        summary.mean += v;
    summary.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - summary.mean) * (v - summary.mean);
        summary.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return summary;
}

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0; // sample variance, n-1 denominator
    double n = 0.0;
};

Moments moments(std::span<const double> sample) {
    if (sample.size() < 2)
        throw std::invalid_argument("t test needs at least 2 values per sample");
    Moments m;
    m.n = static_cast<double>(sample.size());
    for (double v : sample)
        m.mean += v;
    m.mean /= m.n;
    for (double v : sample)
        m.var += (v - m.mean) * (v - m.mean);
    m.var /= m.n - 1.0;
    return m;
}

// Continued fraction for I_x(a, b), modified Lentz iteration.
double beta_cf(double a, double b, double x) {
    constexpr double kTol = 1e-10;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny)
        d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny)
            d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny)
            c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny)
            d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny)
            c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kTol)
            return h;
    }
    throw std::runtime_error("incomplete beta continued fraction failed to converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0)
        throw std::invalid_argument("incomplete beta parameters must be positive");
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // The continued fraction converges fast only below the distribution bulk;
    // use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (df <= 0.0)
        throw std::invalid_argument("degrees of freedom must be positive");
    if (t == 0.0)
        return 0.5;
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant) {
    const Moments ma = moments(a);
    const Moments mb = moments(b);
    const double diff = ma.mean - mb.mean;

    TTestResult result;
    result.variant = variant;
    double denom = 0.0;
    if (variant == TTestVariant::Pooled) {
        result.df = ma.n + mb.n - 2.0;
        const double pooled = ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / result.df;
        denom = std::sqrt(pooled * (1.0 / ma.n + 1.0 / mb.n));
    } else {
        const double va = ma.var / ma.n;
        const double vb = mb.var / mb.n;
        denom = std::sqrt(va + vb);
        result.df = denom == 0.0 ? ma.n + mb.n - 2.0
                                 : (va + vb) * (va + vb) /
                                       (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    }

    if (denom == 0.0) {
        // Both samples constant: identical means give the null verdict
        // exactly, any difference is infinitely significant.
        result.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        result.p = diff == 0.0 ? 1.0 : 0.0;
        return result;
    }
    result.t = diff / denom;
    result.p = regularized_incomplete_beta(0.5 * result.df, 0.5,
                                           result.df / (result.df + result.t * result.t));
    return result;
}

double permutation_test_p(std::span<const double> a, std::span<const double> b, int n_draws,
                          std::uint64_t seed) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("permutation test needs at least 2 values per sample");
    if (n_draws < 1)
        throw std::invalid_argument("permutation test needs at least 1 draw");

    std::vector<double> pool(a.begin(), a.end());
    pool.insert(pool.end(), b.begin(), b.end());
    const std::size_t n_a = a.size();
    const double scale_a = 1.0 / static_cast<double>(n_a);
    const double scale_b = 1.0 / static_cast<double>(pool.size() - n_a);

    double observed = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i)
        observed += i < n_a ? pool[i] * scale_a : -pool[i] * scale_b;
    observed = std::abs(observed);

    Rng rng(derive_seed(seed, "permutation"));
    int hits = 0;
    std::vector<double> shuffled = pool;
    for (int draw = 0; draw < n_draws; ++draw) {
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            const auto j = rng.next_below(static_cast<std::uint64_t>(i) + 1);
            std::swap(shuffled[i], shuffled[static_cast<std::size_t>(j)]);
        }
        double diff = 0.0;
        for (std::size_t i = 0; i < shuffled.size(); ++i)
            diff += i < n_a ? shuffled[i] * scale_a : -shuffled[i] * scale_b;
        // Tiny slack so relabelings equal to the observed one (up to
        // floating-point summation order) count as hits.
        if (std::abs(diff) >= observed - 1e-12)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n_draws);
}

std::vector<TableRow> comparison_table(const std::vector<RunSummary>& searched,
                                       const std::vector<RunSummary>& baselines) {
    std::vector<TableRow> rows;
    rows.reserve(searched.size() + baselines.size());
    for (const auto& s : searched)
        rows.push_back({s.metric, s.mean, s.stddev, s.run_count, false});
    for (const auto& s : baselines)
        rows.push_back({s.metric, s.mean, s.stddev, s.run_count, true});
    std::stable_sort(rows.begin(), rows.end(),
                     [](const TableRow& lhs, const TableRow& rhs) { return lhs.mean > rhs.mean; });
    return rows;
}

std::string format_table_text(const std::vector<TableRow>& rows) {
    std::size_t name_width = 4;
    for (const auto& row : rows)
        name_width = std::max(name_width, row.name.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << "name" << std::right
        << std::setw(12) << "mean" << std::setw(12) << "std" << std::setw(6) << "runs"
        << "  kind\n";
    for (const auto& row : rows) {
        out << std::left << std::setw(static_cast<int>(name_width) + 2) << row.name << std::right
            << std::fixed << std::setprecision(4) << std::setw(12) << row.mean << std::setw(12)
            << row.stddev << std::setw(6) << row.runs << "  "
            << (row.baseline ? "baseline" : "searched") << '\n';
        out.unsetf(std::ios::fixed);
        out << std::setprecision(6);
    }
    return out.str();
}

void write_table_csv(const std::vector<TableRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write table file " + path);
    out << "name,mean,std,runs,kind\n";
    out.precision(17);
    for (const auto& row : rows)
        out << row.name << ',' << row.mean << ',' << row.stddev << ',' << row.runs << ','
            << (row.baseline ? "baseline" : "searched") << '\n';
}

std::vector<TableRow> read_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open table file " + path);
    std::string line;
    if (!std::getline(in, line) || line != "name,mean,std,runs,kind")
        throw std::runtime_error(path + ": not a comparison table (bad header)");
    std::vector<TableRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::stringstream stream(line);
        TableRow row;
        std::string field;
        std::getline(stream, row.name, ',');
        std::getline(stream, field, ',');
        row.mean = std::stod(field);
        std::getline(stream, field, ',');
        row.stddev = std::stod(field);
        std::getline(stream, field, ',');
        row.runs = std::stoi(field);
        std::getline(stream, field, ',');
        row.baseline = field == "baseline";
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace entsearch::analysis
