#pragma once

#include <optional>
#include <span>
#include <string>

namespace ecoecho::stats {

/// Normality verdicts use p >= alpha as "normal" (p = 0.060 is normal, 0.019 is not).
inline constexpr double kNormalityAlpha = 0.05;

/// Largest number of non-zero differences for which the Wilcoxon p-value is
/// computed exactly; above it the tie-corrected normal approximation is used.
inline constexpr int kWilcoxonExactMaxN = 12;

inline constexpr int kShapiroMinN = 3;
inline constexpr int kShapiroMaxN = 50;

struct NormalityResult {
    double w = 0.0;
    double p = 0.0;
    bool normal = false;
};

bool normality_verdict(double p) noexcept;

/// Shapiro-Wilk W test using Royston's coefficient approximation and his
/// normalizing transformation of W for the p-value (exact for n = 3).
/// Throws SampleTooSmall (n < 3), SampleTooLarge (n > 50), ZeroVariance.
NormalityResult shapiro_wilk(std::span<const double> sample);

enum class PairedTest { PairedT, WilcoxonSignedRank };

std::string_view to_string(PairedTest t) noexcept;

/// Signs of the pre/post changes over all n pairs. `positive` counts
/// participants whose post score is higher than pre.
struct RankCounts {
    int positive = 0;
    int negative = 0;
    int ties = 0;
};

/// Differences throughout are d = pre - post, so a post-test increase gives
/// negative t, Z and Cohen's d.
struct PairedTestReport {
    int n = 0;
    double mean_pre = 0.0;
    double sd_pre = 0.0;
    double mean_post = 0.0;
    double sd_post = 0.0;
    PairedTest test = PairedTest::PairedT;
    double statistic = 0.0;  // t, or W+ (exact) / Z (approximate) for Wilcoxon
    double p_two_sided = 1.0;

    // paired t only
    std::optional<int> df;
    std::optional<double> mean_difference;
    std::optional<double> ci95_low;
    std::optional<double> ci95_high;
    std::optional<double> cohen_d;

    // Wilcoxon only
    std::optional<RankCounts> rank_counts;
    std::optional<int> effective_n;
    std::optional<double> w_plus;   // rank sum of pre > post differences
    std::optional<double> w_minus;  // rank sum of pre < post differences
    std::optional<double> z;        // approximate method only
    bool exact = false;

    std::optional<NormalityResult> normality_pre;
    std::optional<NormalityResult> normality_post;
    std::string rationale;
};

/// Throws LengthMismatch, SampleTooSmall (n < 2), DegenerateVariance (sd(d) = 0).
PairedTestReport paired_t_test(std::span<const double> pre, std::span<const double> post);

/// Zero differences are dropped before ranking; |d| ranked with average ranks
/// for ties. Throws LengthMismatch, TooFewNonZero (< 5 non-zero differences).
PairedTestReport wilcoxon_signed_rank(std::span<const double> pre, std::span<const double> post);

/// Exact two-sided p for an observed W+ given the doubled (integer) ranks of the
/// non-zero differences: counts every sign assignment by dynamic programming
/// over achievable rank sums.
double wilcoxon_exact_p(std::span<const int> doubled_ranks, int doubled_w_plus);

struct Correlation {
    double r = 0.0;
    double p = 1.0;
    int n = 0;
};

/// Pearson r with p from the t transform (df = n - 2).
/// Throws LengthMismatch, SampleTooSmall (n < 3), ZeroVariance.
Correlation pearson(std::span<const double> x, std::span<const double> y);

/// Runs Shapiro-Wilk on both samples; paired t when both are normal,
/// otherwise Wilcoxon. Both normality results are embedded in the report.
PairedTestReport choose_paired_test(std::span<const double> pre, std::span<const double> post);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> x);

} // namespace ecoecho::stats
