#include "ecoecho/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ecoecho/error.hpp"

namespace ecoecho::stats {

namespace {

namespace bm = boost::math;

constexpr double kPi = 3.14159265358979323846;

// c[0] + c[1] x + ... + c[k-1] x^(k-1)
template <std::size_t K>
double poly(const double (&c)[K], double x) {
    double r = 0.0;
    for (std::size_t i = K; i-- > 0;) r = r * x + c[i];
    return r;
}

double normal_upper_tail(double x, double mu, double sigma) {
    return bm::cdf(bm::complement(bm::normal_distribution<double>(mu, sigma), x));
}

double t_two_sided(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return 2.0 * bm::cdf(bm::complement(bm::students_t_distribution<double>(df), std::fabs(t)));
}

bool nearly_equal(double a, double b) {
    return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

void require_same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        fail(ErrorCode::LengthMismatch, "paired samples differ in length (" +
                                            std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()) + ")");
}

void fill_descriptives(PairedTestReport& r, std::span<const double> pre,
                       std::span<const double> post) {
    r.n = static_cast<int>(pre.size());
    r.mean_pre = mean(pre);
    r.mean_post = mean(post);
    r.sd_pre = pre.size() > 1 ? stddev(pre) : 0.0;
    r.sd_post = post.size() > 1 ? stddev(post) : 0.0;
}

// Royston's approximation of the Shapiro-Wilk coefficients for the lower half
// of the order statistics (a[0] multiplies x(n) - x(1)).
std::vector<double> shapiro_coefficients(std::size_t n) {
    const std::size_t half = n / 2;
    std::vector<double> a(half);
    if (n == 3) {
        a[0] = std::sqrt(0.5);
        return a;
    }
    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};

    const double an = static_cast<double>(n);
    const bm::normal_distribution<double> unit;
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        m[i] = bm::quantile(unit, (static_cast<double>(i + 1) - 0.375) / (an + 0.25));
        summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, rsn) - m[0] / ssumm2;

    std::size_t first_scaled = 1;
    double fac = 0.0;
    if (n > 5) {
        first_scaled = 2;
        const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                        (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
        a[1] = a2;
    } else {
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
    return a;
}

struct SignedRanks {
    std::vector<int> doubled;  // 2 x average rank of |d|, for each non-zero d
    std::vector<bool> positive;
    double tie_term = 0.0;  // sum over tie groups of t^3 - t
};

SignedRanks rank_nonzero(const std::vector<double>& nonzero) {
    const std::size_t n = nonzero.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(nonzero[a]) < std::fabs(nonzero[b]);
    });
    SignedRanks out;
    out.doubled.assign(n, 0);
    out.positive.assign(n, false);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n &&
               nearly_equal(std::fabs(nonzero[order[j + 1]]), std::fabs(nonzero[order[i]])))
            ++j;
        // ranks i+1 .. j+1 share the average (i + j + 2) / 2
        const int doubled = static_cast<int>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k) out.doubled[order[k]] = doubled;
        const double t = static_cast<double>(j - i + 1);
        out.tie_term += t * t * t - t;
        i = j + 1;
    }
    for (std::size_t i = 0; i < n; ++i) out.positive[i] = nonzero[i] > 0.0;
    return out;
}

} // namespace

bool normality_verdict(double p) noexcept { return p >= kNormalityAlpha; }

std::string_view to_string(PairedTest t) noexcept {
    return t == PairedTest::PairedT ? "paired_t" : "wilcoxon_signed_rank";
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

NormalityResult shapiro_wilk(std::span<const double> sample) {
    const std::size_t n = sample.size();
    if (n < kShapiroMinN)
        fail(ErrorCode::SampleTooSmall, "Shapiro-Wilk needs at least 3 values, got " + std::to_string(n));
    if (n > kShapiroMaxN)
        fail(ErrorCode::SampleTooLarge, "Shapiro-Wilk supports at most 50 values, got " + std::to_string(n));

    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (range < 1e-19 || nearly_equal(x.back(), x.front()))
        fail(ErrorCode::ZeroVariance, "Shapiro-Wilk sample has zero variance");

    const auto a = shapiro_coefficients(n);
    const std::size_t half = n / 2;
    std::vector<double> coef(n, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
        coef[i] = -a[i];
        coef[n - 1 - i] = a[i];
    }

    // W as the squared correlation between the coefficients and the range-scaled data.
    double sx = 0.0;
    for (double v : x) sx += v / range;
    sx /= static_cast<double>(n);
    const double sa = mean(coef);
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double asa = coef[i] - sa;
        const double xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    const double w = 1.0 - w1;

    double p = 0.0;
    if (n == 3) {
        constexpr double pi6 = 6.0 / kPi;
        constexpr double stqr = kPi / 3.0;
        p = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    } else {
        static constexpr double g[] = {-2.273, 0.459};
        static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
        static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
        static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
        static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
        const double an = static_cast<double>(n);
        double y = std::log(w1);
        double m = 0.0, s = 1.0;
        if (n <= 11) {
            const double gamma = poly(g, an);
            if (y >= gamma) {
                p = 1e-99;
                return {w, p, normality_verdict(p)};
            }
            y = -std::log(gamma - y);
            m = poly(c3, an);
            s = std::exp(poly(c4, an));
        } else {
            const double xx = std::log(an);
            m = poly(c5, xx);
            s = std::exp(poly(c6, xx));
        }
        p = normal_upper_tail(y, m, s);
    }
    p = std::clamp(p, 0.0, 1.0);
    return {w, p, normality_verdict(p)};
}

PairedTestReport paired_t_test(std::span<const double> pre, std::span<const double> post) {
    require_same_length(pre, post);
    if (pre.size() < 2) fail(ErrorCode::SampleTooSmall, "paired t-test needs at least 2 pairs");

    std::vector<double> d(pre.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = pre[i] - post[i];
    const double md = mean(d);
    const double sd = stddev(d);
    // x vs x + c leaves rounding-level spread in d; treat it as constant.
    if (!(sd > 1e-12 * std::max(1.0, std::fabs(md))))
        fail(ErrorCode::DegenerateVariance, "all paired differences are equal; t is undefined");

    PairedTestReport r;
    fill_descriptives(r, pre, post);
    r.test = PairedTest::PairedT;
    const double n = static_cast<double>(d.size());
    const double se = sd / std::sqrt(n);
    const int df = static_cast<int>(d.size()) - 1;
    r.statistic = md / se;
    r.df = df;
    r.p_two_sided = std::clamp(t_two_sided(r.statistic, df), 0.0, 1.0);
    const double q = bm::quantile(bm::students_t_distribution<double>(df), 0.975);
    r.mean_difference = md;
    r.ci95_low = md - q * se;
    r.ci95_high = md + q * se;
    r.cohen_d = md / sd;
    return r;
}

double wilcoxon_exact_p(std::span<const int> doubled_ranks, int doubled_w_plus) {
    const int total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0);
    // counts[s] = number of sign assignments whose positive doubled-rank sum is s
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int r : doubled_ranks) {
        for (int s = reach; s >= 0; --s)
            if (counts[s] != 0.0) counts[s + r] += counts[s];
        reach += r;
    }
    const double all = std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= total; ++s) {
        if (s <= doubled_w_plus) lower += counts[s];
        if (s >= doubled_w_plus) upper += counts[s];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

PairedTestReport wilcoxon_signed_rank(std::span<const double> pre, std::span<const double> post) {
    require_same_length(pre, post);

    RankCounts counts;
    std::vector<double> nonzero;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        const double d = pre[i] - post[i];
        if (nearly_equal(pre[i], post[i])) {
            ++counts.ties;
            continue;
        }
        (d < 0 ? counts.positive : counts.negative) += 1;
        nonzero.push_back(d);
    }
    if (nonzero.size() < 5)
        fail(ErrorCode::TooFewNonZero, "Wilcoxon signed-rank needs at least 5 non-zero differences, got " +
                                           std::to_string(nonzero.size()));

    const SignedRanks ranks = rank_nonzero(nonzero);
    int doubled_plus = 0, doubled_minus = 0;
    for (std::size_t i = 0; i < nonzero.size(); ++i)
        (ranks.positive[i] ? doubled_plus : doubled_minus) += ranks.doubled[i];

    PairedTestReport r;
    fill_descriptives(r, pre, post);
    r.test = PairedTest::WilcoxonSignedRank;
    r.rank_counts = counts;
    const int n = static_cast<int>(nonzero.size());
    r.effective_n = n;
    r.w_plus = doubled_plus / 2.0;
    r.w_minus = doubled_minus / 2.0;

    if (n <= kWilcoxonExactMaxN) {
        r.exact = true;
        r.statistic = *r.w_plus;
        r.p_two_sided = wilcoxon_exact_p(ranks.doubled, doubled_plus);
    } else {
        const double nn = n;
        const double expected = nn * (nn + 1.0) / 4.0;
        const double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - ranks.tie_term / 48.0;
        const double z = (*r.w_plus - expected) / std::sqrt(variance);
        r.exact = false;
        r.z = z;
        r.statistic = z;
        r.p_two_sided = std::min(1.0, 2.0 * normal_upper_tail(std::fabs(z), 0.0, 1.0));
    }
    return r;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y);
    if (x.size() < 3) fail(ErrorCode::SampleTooSmall, "Pearson correlation needs at least 3 pairs");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) fail(ErrorCode::ZeroVariance, "Pearson input has zero variance");

    Correlation c;
    c.n = static_cast<int>(x.size());
    c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = c.n - 2;
    const double one_minus = 1.0 - c.r * c.r;
    if (one_minus <= 0.0) {
        c.p = 0.0;
    } else {
        c.p = std::clamp(t_two_sided(c.r * std::sqrt(df / one_minus), df), 0.0, 1.0);
    }
    return c;
}

PairedTestReport choose_paired_test(std::span<const double> pre, std::span<const double> post) {
    require_same_length(pre, post);
    const NormalityResult np = shapiro_wilk(pre);
    const NormalityResult nq = shapiro_wilk(post);
    PairedTestReport r;
    std::string why;
    if (np.normal && nq.normal) {
        r = paired_t_test(pre, post);
        why = "both samples pass Shapiro-Wilk (p >= 0.05): paired t-test";
    } else {
        r = wilcoxon_signed_rank(pre, post);
        why = std::string(np.normal ? "" : "pre") + (!np.normal && !nq.normal ? " and " : "") +
              (nq.normal ? "" : "post") + " sample fails Shapiro-Wilk (p < 0.05): Wilcoxon signed-rank";
    }
    r.normality_pre = np;
    r.normality_post = nq;
    r.rationale = why;
    return r;
}

} // namespace ecoecho::stats
