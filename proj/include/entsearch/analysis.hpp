#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace entsearch::analysis {

struct RunSummary {
    std::string metric;
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0; // sample (n-1) standard deviation; 0 for a single run
    int run_count = 0;
};

RunSummary aggregate_runs(std::span<const double> values, std::string metric);

enum class TTestVariant { Pooled, Welch };

struct TTestResult {
    TTestVariant variant = TTestVariant::Pooled;
    double t = 0.0;
    double df = 0.0;
    double p = 0.0; // two-sided
};

// Two-sample t test. Pooled: common-variance estimate, df = n_a + n_b - 2.
// Welch: per-sample variances with Welch-Satterthwaite df. Throws
// std::invalid_argument unless both samples have >= 2 values.
TTestResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant);

// I_x(a, b) by continued fraction (modified Lentz), absolute tolerance 1e-10.
double regularized_incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Monte Carlo two-sided permutation test on the difference of means:
// fraction of relabelings whose |mean difference| reaches the observed one.
double permutation_test_p(std::span<const double> a, std::span<const double> b, int n_draws,
                          std::uint64_t seed);

struct TableRow {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
    int runs = 0;
    bool baseline = false;
};

// Merge searched and baseline summaries into one table sorted by mean
// (descending, stable on ties so insertion order decides).
std::vector<TableRow> comparison_table(const std::vector<RunSummary>& searched,
                                       const std::vector<RunSummary>& baselines);

std::string format_table_text(const std::vector<TableRow>& rows);

void write_table_csv(const std::vector<TableRow>& rows, const std::string& path);
std::vector<TableRow> read_table_csv(const std::string& path);

} // namespace entsearch::analysis
