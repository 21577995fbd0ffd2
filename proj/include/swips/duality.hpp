#pragma once

#include "ctmc.hpp"
#include "model.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace swips {

// Product of single-site factors times reservoir weights rho^k for absorbed walkers.
inline double duality_function(const DualConfiguration& xi, const Configuration& eta, const ModelParams& params)
{
    if (xi.size() != eta.size()) {
        throw Error(ErrorKind::validation, "dual and forward configurations differ in size");
    }
    double value = 1.0;
    for (std::size_t x = 0; x < xi.bulk.size(); ++x) {
        for (std::size_t layer = 0; layer < 2; ++layer) {
            const auto k = xi.bulk[x][layer];
            if (k == 0) {
                continue;
            }
            const double d = single_site_dual(k, eta.eta[x][layer], params.sigma);
            if (d == 0.0) {
                return 0.0;
            }
            value *= d;
        }
    }
    for (int layer = 0; layer < 2; ++layer) {
        if (xi.left[layer] > 0) {
            value *= std::pow(params.reservoir.at(0, layer), static_cast<double>(xi.left[layer]));
        }
        if (xi.right[layer] > 0) {
            value *= std::pow(params.reservoir.at(1, layer), static_cast<double>(xi.right[layer]));
        }
    }
    return value;
}

struct DualityPairing {
    Configuration eta;
    DualConfiguration xi;
    double horizon = 1.0;
    std::size_t replicas = 10000;
};

struct SampleSummary {
    double mean = 0.0;
    double se = 0.0;
    double median_of_means = 0.0;
    double median_of_means_se = 0.0;
};

struct DualityReport {
    SampleSummary lhs;  // forward side E_eta[D(xi, eta_t)]
    SampleSummary rhs;  // dual side E_xi[D(xi_t, eta)]
    double diff = 0.0;
    double se = 0.0;
    bool used_median_of_means = false;
    bool pass = false;
};

inline SampleSummary summarize(const std::vector<double>& values, std::size_t groups = 20)
{
    SampleSummary s;
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - s.mean) * (v - s.mean);
    }
    s.se = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;

    groups = std::max<std::size_t>(1, std::min(groups, values.size()));
    const std::size_t per_group = values.size() / groups;
    std::vector<double> group_means(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t i = g * per_group; i < (g + 1) * per_group; ++i) {
            group_means[g] += values[i];
        }
        group_means[g] /= static_cast<double>(per_group);
    }
    std::vector<double> sorted = group_means;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = groups / 2;
    s.median_of_means = groups % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    if (groups > 1) {
        double gm = 0.0;
        for (double v : group_means) {
            gm += v;
        }
        gm /= static_cast<double>(groups);
        double gss = 0.0;
        for (double v : group_means) {
            gss += (v - gm) * (v - gm);
        }
        const double group_sd = std::sqrt(gss / static_cast<double>(groups - 1));
        // asymptotic efficiency of the median of Gaussian group means
        s.median_of_means_se = std::sqrt(std::numbers::pi / 2.0) * group_sd / std::sqrt(static_cast<double>(groups));
    }
    return s;
}

// Paired Monte Carlo estimate of both sides of the duality relation.
inline DualityReport check_self_duality(const DualityPairing& pairing, const ModelParams& params, RngStream& rng)
{
    validate(params);
    if (pairing.eta.size() != params.n_sites || pairing.xi.size() != params.n_sites) {
        throw Error(ErrorKind::validation, "pairing size does not match n_sites");
    }
    if (!pairing.eta.admissible(params.sigma)) {
        throw Error(ErrorKind::validation, "forward configuration not admissible");
    }
    const std::size_t r = pairing.replicas;
    std::vector<double> forward(r), backward(r);
    const RngStream forward_root = rng.split(0);
    const RngStream dual_root = rng.split(1);
    parallel_for(r, [&](std::size_t i) {
        RngStream stream = forward_root.split(i);
        const auto eta_t = evolve(params, pairing.eta, pairing.horizon, stream);
        forward[i] = duality_function(pairing.xi, eta_t, params);
    });
    parallel_for(r, [&](std::size_t i) {
        RngStream stream = dual_root.split(i);
        const auto xi_t = evolve_dual(params, pairing.xi, pairing.horizon, stream);
        backward[i] = duality_function(xi_t, pairing.eta, params);
    });
    DualityReport report;
    report.lhs = summarize(forward);
    report.rhs = summarize(backward);
    const double se_mean = std::hypot(report.lhs.se, report.rhs.se);
    const double se_mom = std::hypot(report.lhs.median_of_means_se, report.rhs.median_of_means_se);
    report.used_median_of_means = se_mom < se_mean;
    if (report.used_median_of_means) {
        report.diff = report.lhs.median_of_means - report.rhs.median_of_means;
        report.se = se_mom;
    } else {
        report.diff = report.lhs.mean - report.rhs.mean;
        report.se = se_mean;
    }
    report.pass = std::isfinite(report.diff) && std::abs(report.diff) <= 4.0 * report.se;
    return report;
}

} // namespace swips
