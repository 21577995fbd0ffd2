#pragma once

#include "error.hpp"
#include "rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace swips {

enum class Mode { bulk_torus, boundary_driven };

inline const char* to_string(Mode mode)
{
    return mode == Mode::bulk_torus ? "bulk-torus" : "boundary-driven";
}

// Reservoir densities in the fixed order (L0, L1, R0, R1).
struct ReservoirDensities {
    double rho_L0 = 0.0;
    double rho_L1 = 0.0;
    double rho_R0 = 0.0;
    double rho_R1 = 0.0;

    std::array<double, 4> as_array() const { return {rho_L0, rho_L1, rho_R0, rho_R1}; }

    static ReservoirDensities from_array(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }

    // side 0 = left, 1 = right
    double at(int side, int layer) const { return as_array()[2 * side + layer]; }
};

struct ModelParams {
    int sigma = 0;
    double epsilon = 1.0;
    double gamma = 1.0;
    // When set, the switching rate is upsilon / N^2 and gamma is ignored.
    std::optional<double> upsilon;
    int n_sites = 2;
    ReservoirDensities reservoir;
    Mode mode = Mode::boundary_driven;

    double switch_rate() const
    {
        if (upsilon) {
            return *upsilon / (static_cast<double>(n_sites) * static_cast<double>(n_sites));
        }
        return gamma;
    }
};

inline ModelParams validate(const ModelParams& params)
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::validation, what); };
    if (params.sigma < -1 || params.sigma > 1) {
        fail("sigma must be -1, 0 or 1");
    }
    if (!(params.epsilon >= 0.0 && params.epsilon <= 1.0)) {
        fail("epsilon must lie in [0,1]");
    }
    if (params.upsilon) {
        if (!(*params.upsilon > 0.0 && std::isfinite(*params.upsilon))) {
            fail("upsilon must be > 0");
        }
    } else if (!(params.gamma > 0.0 && std::isfinite(params.gamma))) {
        fail("gamma must be > 0");
    }
    if (params.n_sites < 2) {
        fail("n_sites must be >= 2");
    }
    for (double rho : params.reservoir.as_array()) {
        if (!(rho >= 0.0 && std::isfinite(rho))) {
            fail("reservoir densities must be >= 0");
        }
        if (params.sigma == -1 && rho > 1.0) {
            fail("exclusion density > 1");
        }
    }
    return params;
}

struct Configuration {
    // eta[x] = (layer-0 count, layer-1 count), x = 0..N-1
    std::vector<std::array<std::int64_t, 2>> eta;

    Configuration() = default;
    explicit Configuration(int n_sites) : eta(static_cast<std::size_t>(n_sites), {0, 0}) {}

    int size() const { return static_cast<int>(eta.size()); }

    std::int64_t total() const
    {
        std::int64_t sum = 0;
        for (const auto& site : eta) {
            sum += site[0] + site[1];
        }
        return sum;
    }

    bool admissible(int sigma) const
    {
        for (const auto& site : eta) {
            for (auto n : site) {
                if (n < 0 || (sigma == -1 && n > 1)) {
                    return false;
                }
            }
        }
        return true;
    }
};

// Dual particles on the bulk sites plus absorbed counts at the two reservoir sites.
struct DualConfiguration {
    std::vector<std::array<std::int64_t, 2>> bulk;
    std::array<std::int64_t, 2> left{0, 0};
    std::array<std::int64_t, 2> right{0, 0};

    DualConfiguration() = default;
    explicit DualConfiguration(int n_sites) : bulk(static_cast<std::size_t>(n_sites), {0, 0}) {}

    int size() const { return static_cast<int>(bulk.size()); }

    std::int64_t in_bulk() const
    {
        std::int64_t sum = 0;
        for (const auto& site : bulk) {
            sum += site[0] + site[1];
        }
        return sum;
    }

    std::int64_t total() const { return in_bulk() + left[0] + left[1] + right[0] + right[1]; }
};

namespace detail {

inline double falling_factorial(std::int64_t n, std::int64_t k)
{
    if (n <= 20) {
        std::uint64_t prod = 1;
        for (std::int64_t j = n - k + 1; j <= n; ++j) {
            prod *= static_cast<std::uint64_t>(j);
        }
        return static_cast<double>(prod);
    }
    return std::exp(std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0));
}

} // namespace detail

// d(k,n) = n!/(n-k)! / w(k) for k <= n, with w(k) = k! for inclusion and 1 otherwise.
inline double single_site_dual(std::int64_t k, std::int64_t n, int sigma)
{
    if (k < 0 || n < 0 || k > n) {
        return 0.0;
    }
    if (k == 0) {
        return 1.0;
    }
    if (sigma != 1) {
        return detail::falling_factorial(n, k);
    }
    if (n <= 20) {
        // binomial coefficient, exact in 64-bit for n <= 20
        std::uint64_t c = 1;
        for (std::int64_t j = 1; j <= k; ++j) {
            c = c * static_cast<std::uint64_t>(n - k + j) / static_cast<std::uint64_t>(j);
        }
        return static_cast<double>(c);
    }
    return std::exp(std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0) -
                    std::lgamma(static_cast<double>(k) + 1.0));
}

// One draw from the reversible single-site marginal with density parameter theta.
inline std::int64_t sample_equilibrium_marginal(int sigma, double theta, RngStream& rng)
{
    if (!(theta >= 0.0) || !std::isfinite(theta) || (sigma == -1 && theta > 1.0)) {
        throw Error(ErrorKind::domain, "theta outside the admissible range");
    }
    switch (sigma) {
    case -1:
        return rng.uniform() < theta ? 1 : 0;
    case 0: {
        if (theta == 0.0) {
            return 0;
        }
        std::poisson_distribution<std::int64_t> poisson(theta);
        return poisson(rng);
    }
    case 1: {
        if (theta == 0.0) {
            return 0;
        }
        std::geometric_distribution<std::int64_t> geometric(1.0 / (1.0 + theta));
        return geometric(rng);
    }
    default:
        throw Error(ErrorKind::domain, "sigma must be -1, 0 or 1");
    }
}

// Product-measure configuration with site-dependent densities per layer.
template <class DensityFn>
Configuration sample_product_configuration(int sigma, int n_sites, DensityFn&& density, RngStream& rng)
{
    Configuration config(n_sites);
    for (int x = 0; x < n_sites; ++x) {
        for (int layer = 0; layer < 2; ++layer) {
            config.eta[static_cast<std::size_t>(x)][static_cast<std::size_t>(layer)] =
                sample_equilibrium_marginal(sigma, density(x, layer), rng);
        }
    }
    return config;
}

struct RunConfig {
    ModelParams params;
    std::uint64_t seed = 0;
};

// Flat key=value text; '#' starts a comment.
inline RunConfig parse_config(const std::string& text)
{
    std::map<std::string, std::string> entries;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        auto trim = [](std::string s) {
            const auto first = s.find_first_not_of(" \t\r");
            if (first == std::string::npos) {
                return std::string();
            }
            const auto last = s.find_last_not_of(" \t\r");
            return s.substr(first, last - first + 1);
        };
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::validation, "config line " + std::to_string(lineno) + " is not key=value");
        }
        entries[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    RunConfig run;
    auto number = [&](const std::string& key, const std::string& value) {
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) {
                throw std::invalid_argument(value);
            }
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorKind::validation, "config key '" + key + "' is not a number");
        }
    };
    if (entries.count("gamma") && entries.count("upsilon")) {
        throw Error(ErrorKind::validation, "exactly one of gamma, upsilon may be given");
    }
    for (const auto& [key, value] : entries) {
        if (key == "sigma") {
            run.params.sigma = static_cast<int>(number(key, value));
        } else if (key == "epsilon") {
            run.params.epsilon = number(key, value);
        } else if (key == "gamma") {
            run.params.gamma = number(key, value);
        } else if (key == "upsilon") {
            run.params.upsilon = number(key, value);
        } else if (key == "n_sites") {
            run.params.n_sites = static_cast<int>(number(key, value));
        } else if (key == "rho_L0") {
            run.params.reservoir.rho_L0 = number(key, value);
        } else if (key == "rho_L1") {
            run.params.reservoir.rho_L1 = number(key, value);
        } else if (key == "rho_R0") {
            run.params.reservoir.rho_R0 = number(key, value);
        } else if (key == "rho_R1") {
            run.params.reservoir.rho_R1 = number(key, value);
        } else if (key == "mode") {
            if (value == "bulk-torus") {
                run.params.mode = Mode::bulk_torus;
            } else if (value == "boundary-driven") {
                run.params.mode = Mode::boundary_driven;
            } else {
                throw Error(ErrorKind::validation, "unknown mode '" + value + "'");
            }
        } else if (key == "seed") {
            run.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else {
            throw Error(ErrorKind::validation, "unknown config key '" + key + "'");
        }
    }
    return run;
}

inline std::string to_config_text(const RunConfig& run)
{
    std::ostringstream out;
    out.precision(17);
    const auto& p = run.params;
    out << "sigma=" << p.sigma << '\n' << "epsilon=" << p.epsilon << '\n';
    if (p.upsilon) {
        out << "upsilon=" << *p.upsilon << '\n';
    } else {
        out << "gamma=" << p.gamma << '\n';
    }
    out << "n_sites=" << p.n_sites << '\n'
        << "rho_L0=" << p.reservoir.rho_L0 << '\n'
        << "rho_L1=" << p.reservoir.rho_L1 << '\n'
        << "rho_R0=" << p.reservoir.rho_R0 << '\n'
        << "rho_R1=" << p.reservoir.rho_R1 << '\n'
        << "mode=" << to_string(p.mode) << '\n'
        << "seed=" << run.seed << '\n';
    return out.str();
}

} // namespace swips
