#pragma once

// Paired significance testing and rank correlation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "labeltrust/errors.hpp"

namespace labeltrust {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

// Exact distribution of the signed-rank sum under H0. Ranks are doubled so
// tie-averaged half-integer ranks become integers; returns counts[s] = number
// of sign assignments with doubled rank sum s (total 2^m).
inline std::vector<double> signed_rank_distribution(const std::vector<double>& ranks) {
    int total = 0;
    std::vector<int> doubled;
    doubled.reserve(ranks.size());
    for (double r : ranks) {
        const int d = static_cast<int>(std::lround(2.0 * r));
        doubled.push_back(d);
        total += d;
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int d : doubled) {
        for (int s = reach; s >= 0; --s) {
            if (counts[static_cast<std::size_t>(s)] > 0.0)
                counts[static_cast<std::size_t>(s + d)] += counts[static_cast<std::size_t>(s)];
        }
        reach += d;
    }
    return counts;
}

}  // namespace detail

enum class Alternative { TwoSided, Greater, Less };

struct WilcoxonResult {
    double statistic = 0.0;  // min(W+, W-)
    double p_value = 1.0;
    bool significant = false;
    int wins = 0;    // pairs with a[i] < b[i]
    int draws = 0;   // exact equality
    int losses = 0;  // pairs with a[i] > b[i]
    int effective_n = 0;  // non-zero differences
    bool exact = false;
};

/// Wilcoxon signed-rank test on paired samples. Differences d = a - b; zero
/// differences are dropped, tied |d| share average ranks. Exact two-sided
/// p-value by enumerating the sign distribution for up to 20 non-zero
/// differences, normal approximation with tie and continuity corrections
/// beyond that. Significant <=> p < 1 - alpha. Alternative::Greater tests for
/// d > 0 (a above b), Alternative::Less for d < 0.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                           const std::vector<double>& b, double alpha = 0.95,
                                           Alternative alternative = Alternative::TwoSided) {
    if (a.size() != b.size()) throw DataError("wilcoxon: length mismatch");
    if (a.empty()) throw DataError("wilcoxon: empty samples");

    WilcoxonResult result;
    std::vector<double> diffs, abs_diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (a[i] < b[i]) result.wins++;
        else if (a[i] > b[i]) result.losses++;
        else result.draws++;
        if (d != 0.0) {
            diffs.push_back(d);
            abs_diffs.push_back(std::abs(d));
        }
    }
    result.effective_n = static_cast<int>(diffs.size());
    if (diffs.empty()) {
        result.p_value = 1.0;
        return result;  // all differences zero: no decision
    }

    const std::vector<double> ranks = detail::average_ranks(abs_diffs);
    double w_pos = 0.0, w_neg = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i)
        (diffs[i] > 0.0 ? w_pos : w_neg) += ranks[i];
    result.statistic = std::min(w_pos, w_neg);

    const int m = result.effective_n;
    if (m <= 20) {
        result.exact = true;
        const std::vector<double> counts = detail::signed_rank_distribution(ranks);
        const double total = std::ldexp(1.0, m);  // 2^m
        auto cdf_leq = [&](double w) {
            const int limit = static_cast<int>(std::floor(2.0 * w + 0.5));
            double acc = 0.0;
            for (int s = 0; s <= limit && s < static_cast<int>(counts.size()); ++s)
                acc += counts[static_cast<std::size_t>(s)];
            return acc / total;
        };
        switch (alternative) {
            case Alternative::TwoSided:
                result.p_value = std::min(1.0, 2.0 * std::min(cdf_leq(w_pos), cdf_leq(w_neg)));
                break;
            case Alternative::Greater:  // evidence for d > 0 is a small W-
                result.p_value = cdf_leq(w_neg);
                break;
            case Alternative::Less:
                result.p_value = cdf_leq(w_pos);
                break;
        }
    } else {
        const double mu = m * (m + 1) / 4.0;
        double tie_term = 0.0;
        {
            std::vector<double> sorted = abs_diffs;
            std::sort(sorted.begin(), sorted.end());
            std::size_t i = 0;
            while (i < sorted.size()) {
                std::size_t j = i;
                while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
                const double t = static_cast<double>(j - i + 1);
                tie_term += t * t * t - t;
                i = j + 1;
            }
        }
        const double var = m * (m + 1) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
        const double sd = std::sqrt(var);
        auto upper_tail = [&](double w) {  // P(W >= w), continuity corrected
            return 1.0 - normal_cdf((w - 0.5 - mu) / sd);
        };
        auto lower_tail = [&](double w) {  // P(W <= w)
            return normal_cdf((w + 0.5 - mu) / sd);
        };
        switch (alternative) {
            case Alternative::TwoSided: {
                const double tail = std::min(lower_tail(result.statistic), 1.0);
                result.p_value = std::min(1.0, 2.0 * tail);
                break;
            }
            case Alternative::Greater:
                result.p_value = std::min(1.0, upper_tail(w_pos));
                break;
            case Alternative::Less:
                result.p_value = std::min(1.0, upper_tail(w_neg));
                break;
        }
    }
    result.significant = result.p_value < (1.0 - alpha);
    return result;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DataError("spearman: length mismatch");
    if (a.size() < 2) throw DataError("spearman: need at least 2 points");
    const std::vector<double> ra = detail::average_ranks(a);
    const std::vector<double> rb = detail::average_ranks(b);
    const double n = static_cast<double>(a.size());
    double mean = (n + 1.0) / 2.0;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - mean) * (rb[i] - mean);
        var_a += (ra[i] - mean) * (ra[i] - mean);
        var_b += (rb[i] - mean) * (rb[i] - mean);
    }
    if (var_a == 0.0 || var_b == 0.0)
        throw NumericError("spearman: constant input has no rank correlation");
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace labeltrust
