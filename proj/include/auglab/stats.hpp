#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace auglab {

// One-sample Kolmogorov-Smirnov statistic against Uniform(0,1).
inline double ks_statistic_uniform(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = samples[i];  // F(x) = x on [0,1]
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(cdf - lo, hi - cdf));
    }
    return d;
}

// Asymptotic critical value at significance 0.01: c(0.01) = 1.62762.
inline double ks_critical_001(std::size_t n) {
    return 1.62762 / std::sqrt(static_cast<double>(n));
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

inline Moments sample_moments(const std::vector<double>& samples) {
    double sum = 0.0;
    for (double v : samples) sum += v;
    const double mean = sum / static_cast<double>(samples.size());
    double sq = 0.0;
    for (double v : samples) sq += (v - mean) * (v - mean);
    Moments m;
    m.mean = mean;
    m.variance = sq / static_cast<double>(samples.size());
    return m;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace auglab
