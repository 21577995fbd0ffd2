#pragma once

#include "error.hpp"
#include "model.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace swips {

enum class EventKind { hop0, hop1, switch_layer, inject, absorb };

inline const char* to_string(EventKind kind)
{
    switch (kind) {
    case EventKind::hop0: return "hop0";
    case EventKind::hop1: return "hop1";
    case EventKind::switch_layer: return "switch";
    case EventKind::inject: return "inject";
    case EventKind::absorb: return "absorb";
    }
    return "?";
}

// One transition of the generator. For hops `target` is the destination site;
// for switches `layer` is the layer left; for reservoir events `side` is 0 (L) or 1 (R).
struct Transition {
    EventKind kind = EventKind::hop0;
    int site = 0;
    int target = 0;
    int layer = 0;
    int side = 0;
    double rate = 0.0;
};

// How the two end sites talk to the outside world.
enum class BoundaryRule {
    none,        // closed system (torus)
    reservoirs,  // forward boundary-driven dynamics
    absorbing    // dual dynamics: walkers leave into absorbing L/R sites
};

class Fenwick {
public:
    Fenwick() = default;
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0)
    {
        top_bit_ = 1;
        while (top_bit_ * 2 <= n) {
            top_bit_ *= 2;
        }
    }

    void add(std::size_t index, double delta)
    {
        for (std::size_t i = index + 1; i < tree_.size(); i += i & (~i + 1)) {
            tree_[i] += delta;
        }
    }

    void rebuild(const std::vector<double>& values)
    {
        std::fill(tree_.begin(), tree_.end(), 0.0);
        for (std::size_t i = 1; i < tree_.size(); ++i) {
            tree_[i] += values[i - 1];
            const std::size_t parent = i + (i & (~i + 1));
            if (parent < tree_.size()) {
                tree_[parent] += tree_[i];
            }
        }
    }

    // Smallest index whose inclusive prefix sum exceeds `target`; `target` becomes the offset inside it.
    std::size_t find(double& target) const
    {
        std::size_t pos = 0;
        for (std::size_t step = top_bit_; step > 0; step >>= 1) {
            if (pos + step < tree_.size() && tree_[pos + step] <= target) {
                pos += step;
                target -= tree_[pos];
            }
        }
        return std::min(pos, tree_.size() - 2);
    }

private:
    std::vector<double> tree_;
    std::size_t top_bit_ = 1;
};

// Rates of all transitions out of the current configuration, grouped per category and site.
class EventTable {
public:
    static constexpr int categories = 5;
    static constexpr std::size_t linear_scan_limit = 64;

    EventTable() = default;

    EventTable(const ModelParams& params, BoundaryRule rule, std::int64_t occupancy_cap = 1'000'000)
        : n_(params.n_sites), sigma_(params.sigma), epsilon_(params.epsilon), gamma_(params.switch_rate()),
          rule_(rule), cap_(occupancy_cap)
    {
        for (int side = 0; side < 2; ++side) {
            for (int layer = 0; layer < 2; ++layer) {
                const double rho = params.reservoir.at(side, layer);
                inject_coef_[side][layer] = rule == BoundaryRule::reservoirs ? rho : 0.0;
                removal_factor_[side][layer] = rule == BoundaryRule::reservoirs ? 1.0 + sigma_ * rho : 1.0;
            }
        }
        const auto n = static_cast<std::size_t>(n_);
        site_rate_[0].assign(n, 0.0);
        site_rate_[1].assign(n, 0.0);
        site_rate_[2].assign(n, 0.0);
        site_rate_[3].assign(2, 0.0);
        site_rate_[4].assign(2, 0.0);
        use_tree_ = n > linear_scan_limit;
        if (use_tree_) {
            for (int c = 0; c < 3; ++c) {
                tree_[c] = Fenwick(n);
            }
        }
    }

    int n_sites() const { return n_; }
    int sigma() const { return sigma_; }
    BoundaryRule rule() const { return rule_; }
    bool periodic() const { return rule_ == BoundaryRule::none; }
    std::int64_t occupancy_cap() const { return cap_; }

    double total() const
    {
        return subtotal_[0] + subtotal_[1] + subtotal_[2] + subtotal_[3] + subtotal_[4];
    }
    double subtotal(EventKind kind) const { return subtotal_[static_cast<int>(kind)]; }

    // Neighbour of x in direction +1/-1, or -1 if the bond leaves the lattice.
    int neighbour(int x, int dir) const
    {
        if (periodic()) {
            if (n_ == 2 && dir < 0) {
                return -1;  // a two-site ring has a single bond
            }
            return (x + dir + n_) % n_;
        }
        const int y = x + dir;
        return (y < 0 || y >= n_) ? -1 : y;
    }

    // Sites carrying reservoir slots: slot 0 = left end, slot 1 = right end.
    int slot_site(int slot) const { return slot == 0 ? 0 : n_ - 1; }
    bool has_reservoirs() const { return rule_ != BoundaryRule::none; }

    double hop_rate(const std::vector<std::array<std::int64_t, 2>>& eta, int x, int y, int layer) const
    {
        if (y < 0) {
            return 0.0;
        }
        const double speed = layer == 0 ? 1.0 : epsilon_;
        const auto& from = eta[static_cast<std::size_t>(x)];
        const auto& to = eta[static_cast<std::size_t>(y)];
        return speed * static_cast<double>(from[layer]) * (1.0 + sigma_ * static_cast<double>(to[layer]));
    }

    double switch_rate(const std::array<std::int64_t, 2>& site, int from_layer) const
    {
        return gamma_ * static_cast<double>(site[from_layer]) *
               (1.0 + sigma_ * static_cast<double>(site[1 - from_layer]));
    }

    double inject_rate(const std::array<std::int64_t, 2>& site, int side, int layer) const
    {
        return inject_coef_[side][layer] * (1.0 + sigma_ * static_cast<double>(site[layer]));
    }

    double absorb_rate(const std::array<std::int64_t, 2>& site, int side, int layer) const
    {
        return static_cast<double>(site[layer]) * removal_factor_[side][layer];
    }

    // Recompute every category at site x from the configuration.
    void refresh(const std::vector<std::array<std::int64_t, 2>>& eta, int x)
    {
        if (x < 0) {
            return;
        }
        const int right = neighbour(x, +1), left = neighbour(x, -1);
        set(0, x, hop_rate(eta, x, right, 0) + hop_rate(eta, x, left, 0));
        if (epsilon_ > 0.0) {
            set(1, x, hop_rate(eta, x, right, 1) + hop_rate(eta, x, left, 1));
        }
        const auto& site = eta[static_cast<std::size_t>(x)];
        set(2, x, switch_rate(site, 0) + switch_rate(site, 1));
        if (has_reservoirs()) {
            for (int slot = 0; slot < 2; ++slot) {
                if (slot_site(slot) == x) {
                    set(3, slot, inject_rate(site, slot, 0) + inject_rate(site, slot, 1));
                    set(4, slot, absorb_rate(site, slot, 0) + absorb_rate(site, slot, 1));
                }
            }
        }
    }

    void rebuild(const std::vector<std::array<std::int64_t, 2>>& eta)
    {
        for (auto& rates : site_rate_) {
            std::fill(rates.begin(), rates.end(), 0.0);
        }
        subtotal_.fill(0.0);
        nonzero_.fill(0);
        for (int x = 0; x < n_; ++x) {
            refresh(eta, x);
        }
        resum();
    }

    // Relative gap between the maintained total and a from-scratch recomputation.
    double drift(const std::vector<std::array<std::int64_t, 2>>& eta) const
    {
        EventTable fresh = *this;
        fresh.rebuild(eta);
        const double exact = fresh.total();
        const double gap = std::abs(total() - exact);
        return exact > 0.0 ? gap / exact : gap;
    }

    // Re-sum subtotals and trees from the stored per-site rates.
    void resum()
    {
        for (int c = 0; c < categories; ++c) {
            double sum = 0.0;
            for (double r : site_rate_[c]) {
                sum += r;
            }
            subtotal_[c] = sum;
        }
        if (use_tree_) {
            for (int c = 0; c < 3; ++c) {
                tree_[c].rebuild(site_rate_[c]);
            }
        }
    }

    // Sample a transition with probability rate/total; `u` is uniform on [0, total).
    Transition select(const std::vector<std::array<std::int64_t, 2>>& eta, double u) const
    {
        int category = 0;
        while (category < categories - 1 && (u >= subtotal_[category] || subtotal_[category] <= 0.0)) {
            u -= subtotal_[category];
            ++category;
        }
        if (subtotal_[category] <= 0.0) {
            // rounding pushed u past the end; take the last non-empty category
            category = categories - 1;
            while (category > 0 && subtotal_[category] <= 0.0) {
                --category;
            }
            u = 0.5 * subtotal_[category];
        }
        const int slot = pick_site(category, u);
        double rest = u;
        return resolve(eta, static_cast<EventKind>(category), slot, rest);
    }

    // Every transition with positive rate, in a fixed order.
    std::vector<Transition> transitions(const std::vector<std::array<std::int64_t, 2>>& eta) const
    {
        std::vector<Transition> out;
        for (int x = 0; x < n_; ++x) {
            for (int layer = 0; layer < 2; ++layer) {
                if (layer == 1 && epsilon_ == 0.0) {
                    continue;
                }
                for (int dir : {+1, -1}) {
                    const int y = neighbour(x, dir);
                    const double r = hop_rate(eta, x, y, layer);
                    if (y >= 0 && r > 0.0) {
                        out.push_back({layer == 0 ? EventKind::hop0 : EventKind::hop1, x, y, layer, 0, r});
                    }
                }
            }
            for (int layer = 0; layer < 2; ++layer) {
                const double r = switch_rate(eta[static_cast<std::size_t>(x)], layer);
                if (r > 0.0) {
                    out.push_back({EventKind::switch_layer, x, x, layer, 0, r});
                }
            }
        }
        if (has_reservoirs()) {
            for (int side = 0; side < 2; ++side) {
                const int x = slot_site(side);
                const auto& site = eta[static_cast<std::size_t>(x)];
                for (int layer = 0; layer < 2; ++layer) {
                    if (double r = inject_rate(site, side, layer); r > 0.0) {
                        out.push_back({EventKind::inject, x, x, layer, side, r});
                    }
                }
                for (int layer = 0; layer < 2; ++layer) {
                    if (double r = absorb_rate(site, side, layer); r > 0.0) {
                        out.push_back({EventKind::absorb, x, x, layer, side, r});
                    }
                }
            }
        }
        return out;
    }

private:
    void set(int category, int index, double rate)
    {
        double& slot = site_rate_[category][static_cast<std::size_t>(index)];
        const double delta = rate - slot;
        if (delta == 0.0) {
            return;
        }
        nonzero_[category] += (rate > 0.0 ? 1 : 0) - (slot > 0.0 ? 1 : 0);
        slot = rate;
        // an empty category is reset exactly so rounding residue can never be selected
        subtotal_[category] = nonzero_[category] == 0 ? 0.0 : subtotal_[category] + delta;
        if (use_tree_ && category < 3) {
            tree_[category].add(static_cast<std::size_t>(index), delta);
        }
    }

    int pick_site(int category, double& u) const
    {
        const auto& rates = site_rate_[category];
        const auto count = static_cast<int>(rates.size());
        if (use_tree_ && category < 3) {
            int x = static_cast<int>(tree_[category].find(u));
            if (rates[static_cast<std::size_t>(x)] <= 0.0) {
                // tree rounding landed on an empty site; move to the nearest occupied one
                int lo = x, hi = x;
                while (true) {
                    if (--lo >= 0 && rates[static_cast<std::size_t>(lo)] > 0.0) {
                        x = lo;
                        break;
                    }
                    if (++hi < count && rates[static_cast<std::size_t>(hi)] > 0.0) {
                        x = hi;
                        break;
                    }
                    if (lo < 0 && hi >= count) {
                        throw std::logic_error("event table lost all rates");
                    }
                }
                u = 0.5 * rates[static_cast<std::size_t>(x)];
                return x;
            }
            return x;
        }
        int last_positive = -1;
        for (int x = 0; x < count; ++x) {
            const double r = rates[static_cast<std::size_t>(x)];
            if (r <= 0.0) {
                continue;
            }
            last_positive = x;
            if (u < r) {
                return x;
            }
            u -= r;
        }
        if (last_positive < 0) {
            throw std::logic_error("event table lost all rates");
        }
        u = 0.5 * rates[static_cast<std::size_t>(last_positive)];
        return last_positive;
    }

    Transition resolve(const std::vector<std::array<std::int64_t, 2>>& eta, EventKind kind, int index,
                       double& u) const;

    int n_ = 0;
    int sigma_ = 0;
    double epsilon_ = 1.0;
    double gamma_ = 1.0;
    BoundaryRule rule_ = BoundaryRule::none;
    std::int64_t cap_ = 1'000'000;
    std::array<std::array<double, 2>, 2> inject_coef_{};
    std::array<std::array<double, 2>, 2> removal_factor_{};
    std::array<std::vector<double>, categories> site_rate_;
    std::array<double, categories> subtotal_{};
    std::array<std::size_t, categories> nonzero_{};
    std::array<Fenwick, 3> tree_;
    bool use_tree_ = false;
};

inline Transition EventTable::resolve(const std::vector<std::array<std::int64_t, 2>>& eta, EventKind kind,
                                      int index, double& u) const
{
    const double site_total = site_rate_[static_cast<int>(kind)][static_cast<std::size_t>(index)];
    u = std::clamp(u, 0.0, std::nextafter(site_total, 0.0));
    Transition t;
    t.kind = kind;
    switch (kind) {
    case EventKind::hop0:
    case EventKind::hop1: {
        const int layer = kind == EventKind::hop0 ? 0 : 1;
        const int right = neighbour(index, +1);
        const double r_right = hop_rate(eta, index, right, layer);
        const int left = neighbour(index, -1);
        const bool go_right = left < 0 || (right >= 0 && u < r_right);
        t.site = index;
        t.layer = layer;
        t.target = go_right ? right : left;
        t.rate = go_right ? r_right : hop_rate(eta, index, left, layer);
        return t;
    }
    case EventKind::switch_layer: {
        const auto& site = eta[static_cast<std::size_t>(index)];
        const double r0 = switch_rate(site, 0);
        const int layer = (u < r0 || switch_rate(site, 1) <= 0.0) && r0 > 0.0 ? 0 : 1;
        t.site = t.target = index;
        t.layer = layer;
        t.rate = switch_rate(site, layer);
        return t;
    }
    case EventKind::inject:
    case EventKind::absorb: {
        const int x = slot_site(index);
        const auto& site = eta[static_cast<std::size_t>(x)];
        auto rate_of = [&](int layer) {
            return kind == EventKind::inject ? inject_rate(site, index, layer) : absorb_rate(site, index, layer);
        };
        const double r0 = rate_of(0);
        const int layer = (u < r0 || rate_of(1) <= 0.0) && r0 > 0.0 ? 0 : 1;
        t.site = t.target = x;
        t.side = index;
        t.layer = layer;
        t.rate = rate_of(layer);
        return t;
    }
    }
    return t;
}

// Configuration plus its event table, advanced one transition at a time.
class Engine {
public:
    static constexpr std::uint64_t drift_check_interval = 1'000'000;

    Engine(const ModelParams& params, std::vector<std::array<std::int64_t, 2>> occupation, BoundaryRule rule,
           std::int64_t occupancy_cap = 1'000'000)
        : eta_(std::move(occupation)), table_(params, rule, occupancy_cap)
    {
        if (static_cast<int>(eta_.size()) != params.n_sites) {
            throw Error(ErrorKind::validation, "configuration size does not match n_sites");
        }
        for (const auto& site : eta_) {
            for (auto v : site) {
                if (v < 0 || (params.sigma == -1 && v > 1)) {
                    throw Error(ErrorKind::validation, "configuration not admissible for sigma");
                }
            }
        }
        table_.rebuild(eta_);
    }

    const std::vector<std::array<std::int64_t, 2>>& occupation() const { return eta_; }
    const EventTable& table() const { return table_; }
    double total_rate() const { return table_.total(); }
    std::uint64_t events() const { return events_; }
    double max_drift() const { return max_drift_; }
    const std::array<std::array<std::int64_t, 2>, 2>& absorbed() const { return absorbed_; }

    // Holding time and the transition that ends it; does not change the state.
    std::pair<double, Transition> propose(RngStream& rng) const
    {
        const double total = table_.total();
        if (!(total > 0.0)) {
            throw Error(ErrorKind::halted, "total rate is zero");
        }
        const double elapsed = rng.exponential(total);
        const Transition t = table_.select(eta_, rng.uniform() * total);
        return {elapsed, t};
    }

    void apply(const Transition& t)
    {
        auto& from = eta_[static_cast<std::size_t>(t.site)];
        switch (t.kind) {
        case EventKind::hop0:
        case EventKind::hop1: {
            auto& to = eta_[static_cast<std::size_t>(t.target)];
            --from[t.layer];
            ++to[t.layer];
            check(to[t.layer], t.target);
            touch(t.site);
            touch(t.target);
            break;
        }
        case EventKind::switch_layer:
            --from[t.layer];
            ++from[1 - t.layer];
            check(from[1 - t.layer], t.site);
            touch(t.site);
            break;
        case EventKind::inject:
            ++from[t.layer];
            check(from[t.layer], t.site);
            touch(t.site);
            break;
        case EventKind::absorb:
            --from[t.layer];
            if (table_.rule() == BoundaryRule::absorbing) {
                ++absorbed_[t.side][t.layer];
            }
            touch(t.site);
            break;
        }
        if (from[0] < 0 || from[1] < 0) {
            throw std::logic_error("negative occupation after transition");
        }
        if (++events_ % drift_check_interval == 0) {
            const double d = table_.drift(eta_);
            max_drift_ = std::max(max_drift_, d);
            if (d > 1e-9) {
                throw std::logic_error("event table total drifted from recomputation");
            }
            table_.rebuild(eta_);
        }
    }

    double step(RngStream& rng)
    {
        const auto [elapsed, t] = propose(rng);
        apply(t);
        return elapsed;
    }

private:
    void touch(int x)
    {
        table_.refresh(eta_, x);
        table_.refresh(eta_, table_.neighbour(x, +1));
        table_.refresh(eta_, table_.neighbour(x, -1));
    }

    void check(std::int64_t value, int x) const
    {
        if (table_.sigma() == -1 && value > 1) {
            throw std::logic_error("exclusion violated at site " + std::to_string(x + 1));
        }
        if (value > table_.occupancy_cap()) {
            throw Error(ErrorKind::nontermination, "occupancy cap " + std::to_string(table_.occupancy_cap()) +
                                                       " exceeded at site " + std::to_string(x + 1) +
                                                       " after " + std::to_string(events_) + " events");
        }
    }

    std::vector<std::array<std::int64_t, 2>> eta_;
    EventTable table_;
    std::uint64_t events_ = 0;
    double max_drift_ = 0.0;
    std::array<std::array<std::int64_t, 2>, 2> absorbed_{};
};

inline BoundaryRule forward_rule(const ModelParams& params)
{
    return params.mode == Mode::bulk_torus ? BoundaryRule::none : BoundaryRule::reservoirs;
}

inline EventTable build_events(const Configuration& config, const ModelParams& params)
{
    const auto p = validate(params);
    if (!config.admissible(p.sigma) || config.size() != p.n_sites) {
        throw Error(ErrorKind::validation, "configuration not admissible");
    }
    EventTable table(p, forward_rule(p));
    table.rebuild(config.eta);
    return table;
}

// Exact single transition; the table is updated in place.
inline double gillespie_step(Configuration& config, EventTable& table, RngStream& rng)
{
    const double total = table.total();
    if (!(total > 0.0)) {
        throw Error(ErrorKind::halted, "total rate is zero");
    }
    const double elapsed = rng.exponential(total);
    const Transition t = table.select(config.eta, rng.uniform() * total);
    auto& from = config.eta[static_cast<std::size_t>(t.site)];
    switch (t.kind) {
    case EventKind::hop0:
    case EventKind::hop1:
        --from[t.layer];
        ++config.eta[static_cast<std::size_t>(t.target)][t.layer];
        break;
    case EventKind::switch_layer:
        --from[t.layer];
        ++from[1 - t.layer];
        break;
    case EventKind::inject: ++from[t.layer]; break;
    case EventKind::absorb: --from[t.layer]; break;
    }
    for (int x : {t.site, t.target}) {
        table.refresh(config.eta, x);
        table.refresh(config.eta, table.neighbour(x, +1));
        table.refresh(config.eta, table.neighbour(x, -1));
    }
    return elapsed;
}

inline double default_burn_in(const ModelParams& params)
{
    double slowest = std::min(1.0, params.switch_rate());
    if (params.epsilon > 0.0) {
        slowest = std::min(slowest, params.epsilon);
    }
    const double n = params.n_sites;
    return 10.0 * n * n / slowest;
}

struct SitePair {
    int x = 0, layer_x = 0, y = 0, layer_y = 0;
};

struct SimulationOptions {
    std::size_t batches = 32;
    std::vector<SitePair> pairs;
    std::int64_t occupancy_cap = 1'000'000;
};

struct TrajectoryStats {
    std::vector<std::array<double, 2>> theta;     // time-averaged occupation per (x, layer)
    std::vector<std::array<double, 2>> theta_se;  // batch-means standard error
    // Net rightward crossings per unit time. Boundary-driven: edge k joins site k-1 and k
    // (site 0 = L, site N+1 = R), k = 0..N. Torus: edge k joins k and k+1 mod N.
    std::vector<std::array<double, 2>> current;
    std::vector<std::array<double, 2>> current_se;
    std::vector<double> pair_mean;
    std::vector<std::array<double, 2>> kurtosis;
    std::vector<std::array<std::int64_t, 2>> min_occupation;
    std::vector<std::array<std::int64_t, 2>> max_occupation;
    double elapsed = 0.0;
    std::uint64_t events = 0;
    bool heavy_tail_warning = false;
    double max_rate_drift = 0.0;
};

namespace detail {

inline double batch_se(const std::vector<double>& batch_means)
{
    const auto b = static_cast<double>(batch_means.size());
    if (b < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : batch_means) {
        mean += v;
    }
    mean /= b;
    double ss = 0.0;
    for (double v : batch_means) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / (b - 1.0) / b);
}

// Event-time-weighted integrals of occupations over [start, end], split into equal batches.
class TimeAverager {
public:
    TimeAverager(const std::vector<std::array<std::int64_t, 2>>& eta, int n_edges, double start, double end,
                 std::size_t batches, std::vector<SitePair> pairs)
        : n_(static_cast<int>(eta.size())), start_(start), end_(end), batches_(std::max<std::size_t>(batches, 1)),
          pairs_(std::move(pairs))
    {
        const auto cells = static_cast<std::size_t>(2 * n_);
        occ_integral_.assign(batches_ * cells, 0.0);
        moments_.assign(cells * 4, 0.0);
        crossings_.assign(batches_ * static_cast<std::size_t>(2 * n_edges), 0.0);
        n_edges_ = n_edges;
        last_.assign(cells, start);
        pair_integral_.assign(pairs_.size(), 0.0);
        pair_last_.assign(pairs_.size(), start);
        pairs_of_cell_.assign(cells, {});
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            pairs_of_cell_[cell(pairs_[k].x, pairs_[k].layer_x)].push_back(k);
            if (cell(pairs_[k].y, pairs_[k].layer_y) != cell(pairs_[k].x, pairs_[k].layer_x)) {
                pairs_of_cell_[cell(pairs_[k].y, pairs_[k].layer_y)].push_back(k);
            }
        }
        min_.assign(static_cast<std::size_t>(n_), {std::numeric_limits<std::int64_t>::max(),
                                                   std::numeric_limits<std::int64_t>::max()});
        max_.assign(static_cast<std::size_t>(n_), {0, 0});
        observe_all(eta);
        batch_end_ = boundary(1);
    }

    double batch_length() const { return (end_ - start_) / static_cast<double>(batches_); }
    double boundary(std::size_t k) const
    {
        return k >= batches_ ? end_ : start_ + batch_length() * static_cast<double>(k);
    }

    // Bring every accumulator up to time t (t within [start, end]).
    void advance(const std::vector<std::array<std::int64_t, 2>>& eta, double t)
    {
        while (batch_ < batches_ && t >= batch_end_) {
            flush_all(eta, batch_end_);
            ++batch_;
            batch_end_ = boundary(batch_ + 1);
        }
    }

    // Called at time t before (x, layer) changes value.
    void before_change(const std::vector<std::array<std::int64_t, 2>>& eta, int x, int layer, double t)
    {
        const std::size_t c = cell(x, layer);
        for (std::size_t k : pairs_of_cell_[c]) {
            flush_pair(eta, k, t);
        }
        flush_cell(eta, c, t);
    }

    void after_change(const std::vector<std::array<std::int64_t, 2>>& eta, int x)
    {
        const auto& site = eta[static_cast<std::size_t>(x)];
        for (int layer = 0; layer < 2; ++layer) {
            min_[static_cast<std::size_t>(x)][layer] = std::min(min_[static_cast<std::size_t>(x)][layer], site[layer]);
            max_[static_cast<std::size_t>(x)][layer] = std::max(max_[static_cast<std::size_t>(x)][layer], site[layer]);
        }
    }

    void crossing(int edge, int layer, double sign)
    {
        if (batch_ < batches_) {
            crossings_[(batch_ * static_cast<std::size_t>(n_edges_) + static_cast<std::size_t>(edge)) * 2 +
                       static_cast<std::size_t>(layer)] += sign;
        }
    }

    void finish(const std::vector<std::array<std::int64_t, 2>>& eta, TrajectoryStats& stats)
    {
        advance(eta, end_);
        const double total = end_ - start_;
        const double per_batch = batch_length();
        const auto n = static_cast<std::size_t>(n_);
        stats.theta.assign(n, {0.0, 0.0});
        stats.theta_se.assign(n, {0.0, 0.0});
        stats.kurtosis.assign(n, {0.0, 0.0});
        std::vector<double> means(batches_);
        for (std::size_t x = 0; x < n; ++x) {
            for (int layer = 0; layer < 2; ++layer) {
                const std::size_t c = cell(static_cast<int>(x), layer);
                double sum = 0.0;
                for (std::size_t b = 0; b < batches_; ++b) {
                    means[b] = occ_integral_[b * 2 * n + c] / per_batch;
                    sum += occ_integral_[b * 2 * n + c];
                }
                stats.theta[x][layer] = sum / total;
                stats.theta_se[x][layer] = batch_se(means);
                const double m1 = moments_[c * 4] / total, m2 = moments_[c * 4 + 1] / total;
                const double m3 = moments_[c * 4 + 2] / total, m4 = moments_[c * 4 + 3] / total;
                const double var = m2 - m1 * m1;
                const double central4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 * m1 * m1 * m1;
                stats.kurtosis[x][layer] = var > 0.0 ? central4 / (var * var) : 0.0;
            }
        }
        const auto edges = static_cast<std::size_t>(n_edges_);
        stats.current.assign(edges, {0.0, 0.0});
        stats.current_se.assign(edges, {0.0, 0.0});
        for (std::size_t e = 0; e < edges; ++e) {
            for (int layer = 0; layer < 2; ++layer) {
                double sum = 0.0;
                for (std::size_t b = 0; b < batches_; ++b) {
                    const double count = crossings_[(b * edges + e) * 2 + static_cast<std::size_t>(layer)];
                    means[b] = count / per_batch;
                    sum += count;
                }
                stats.current[e][layer] = sum / total;
                stats.current_se[e][layer] = batch_se(means);
            }
        }
        stats.pair_mean.assign(pairs_.size(), 0.0);
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            stats.pair_mean[k] = pair_integral_[k] / total;
        }
        stats.min_occupation = min_;
        stats.max_occupation = max_;
    }

private:
    std::size_t cell(int x, int layer) const { return static_cast<std::size_t>(2 * x + layer); }

    void observe_all(const std::vector<std::array<std::int64_t, 2>>& eta)
    {
        for (int x = 0; x < n_; ++x) {
            after_change(eta, x);
        }
    }

    void flush_cell(const std::vector<std::array<std::int64_t, 2>>& eta, std::size_t c, double t)
    {
        const double dt = t - last_[c];
        if (dt > 0.0) {
            const auto v = static_cast<double>(eta[c / 2][c % 2]);
            const std::size_t b = std::min(batch_, batches_ - 1);
            occ_integral_[b * static_cast<std::size_t>(2 * n_) + c] += v * dt;
            const double v2 = v * v;
            moments_[c * 4] += v * dt;
            moments_[c * 4 + 1] += v2 * dt;
            moments_[c * 4 + 2] += v2 * v * dt;
            moments_[c * 4 + 3] += v2 * v2 * dt;
        }
        last_[c] = t;
    }

    void flush_pair(const std::vector<std::array<std::int64_t, 2>>& eta, std::size_t k, double t)
    {
        const auto& p = pairs_[k];
        const double dt = t - pair_last_[k];
        if (dt > 0.0) {
            pair_integral_[k] += static_cast<double>(eta[static_cast<std::size_t>(p.x)][p.layer_x]) *
                                 static_cast<double>(eta[static_cast<std::size_t>(p.y)][p.layer_y]) * dt;
        }
        pair_last_[k] = t;
    }

    void flush_all(const std::vector<std::array<std::int64_t, 2>>& eta, double t)
    {
        for (std::size_t c = 0; c < last_.size(); ++c) {
            flush_cell(eta, c, t);
        }
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            flush_pair(eta, k, t);
        }
    }

    int n_;
    int n_edges_ = 0;
    double start_, end_;
    std::size_t batches_;
    std::size_t batch_ = 0;
    double batch_end_ = 0.0;
    std::vector<SitePair> pairs_;
    std::vector<double> occ_integral_;
    std::vector<double> moments_;
    std::vector<double> crossings_;
    std::vector<double> last_;
    std::vector<double> pair_integral_;
    std::vector<double> pair_last_;
    std::vector<std::vector<std::size_t>> pairs_of_cell_;
    std::vector<std::array<std::int64_t, 2>> min_, max_;
};

} // namespace detail

// Stationary observables over [burn_in, t_end] with exact sojourn weighting.
inline TrajectoryStats simulate(const ModelParams& params, const Configuration& initial, double t_end,
                                double burn_in, RngStream& rng, const SimulationOptions& options = {})
{
    const auto p = validate(params);
    if (!(t_end > burn_in) || !(burn_in >= 0.0)) {
        throw Error(ErrorKind::validation, "need t_end > burn_in >= 0");
    }
    Engine engine(p, initial.eta, forward_rule(p), options.occupancy_cap);
    const bool periodic = p.mode == Mode::bulk_torus;
    const int n = p.n_sites;
    const int n_edges = periodic ? n : n + 1;

    double t = 0.0;
    // burn-in phase
    while (true) {
        if (!(engine.total_rate() > 0.0)) {
            throw Error(ErrorKind::halted, "absorbing state reached before burn-in ended");
        }
        const auto [elapsed, tr] = engine.propose(rng);
        if (t + elapsed > burn_in) {
            break;  // memorylessness: discard the overshooting holding time
        }
        t += elapsed;
        engine.apply(tr);
    }
    t = burn_in;

    detail::TimeAverager avg(engine.occupation(), n_edges, burn_in, t_end, options.batches, options.pairs);
    const std::uint64_t events_at_start = engine.events();
    while (engine.total_rate() > 0.0) {
        const auto [elapsed, tr] = engine.propose(rng);
        if (t + elapsed > t_end) {
            break;
        }
        t += elapsed;
        const auto& eta = engine.occupation();
        avg.advance(eta, t);
        avg.before_change(eta, tr.site, tr.kind == EventKind::switch_layer ? 0 : tr.layer, t);
        if (tr.kind == EventKind::switch_layer) {
            avg.before_change(eta, tr.site, 1, t);
        } else if (tr.kind == EventKind::hop0 || tr.kind == EventKind::hop1) {
            avg.before_change(eta, tr.target, tr.layer, t);
        }
        // current tallies
        switch (tr.kind) {
        case EventKind::hop0:
        case EventKind::hop1: {
            const bool rightward = tr.target == engine.table().neighbour(tr.site, +1);
            if (periodic) {
                avg.crossing(rightward ? tr.site : tr.target, tr.layer, rightward ? 1.0 : -1.0);
            } else {
                avg.crossing(rightward ? tr.site + 1 : tr.site, tr.layer, rightward ? 1.0 : -1.0);
            }
            break;
        }
        case EventKind::inject:
            avg.crossing(tr.side == 0 ? 0 : n, tr.layer, tr.side == 0 ? 1.0 : -1.0);
            break;
        case EventKind::absorb:
            avg.crossing(tr.side == 0 ? 0 : n, tr.layer, tr.side == 0 ? -1.0 : 1.0);
            break;
        case EventKind::switch_layer: break;
        }
        engine.apply(tr);
        avg.after_change(engine.occupation(), tr.site);
        if (tr.target != tr.site) {
            avg.after_change(engine.occupation(), tr.target);
        }
    }

    TrajectoryStats stats;
    avg.finish(engine.occupation(), stats);
    stats.elapsed = t_end - burn_in;
    stats.events = engine.events() - events_at_start;
    stats.max_rate_drift = engine.max_drift();
    if (p.sigma == 1) {
        for (const auto& k : stats.kurtosis) {
            if (k[0] > 10.0 || k[1] > 10.0) {
                stats.heavy_tail_warning = true;
            }
        }
    }
    return stats;
}

// Forward configuration at time `horizon`.
inline Configuration evolve(const ModelParams& params, const Configuration& initial, double horizon,
                            RngStream& rng, std::int64_t occupancy_cap = 1'000'000)
{
    Engine engine(params, initial.eta, forward_rule(params), occupancy_cap);
    double t = 0.0;
    while (engine.total_rate() > 0.0) {
        const auto [elapsed, tr] = engine.propose(rng);
        if (t + elapsed > horizon) {
            break;
        }
        t += elapsed;
        engine.apply(tr);
    }
    Configuration out;
    out.eta = engine.occupation();
    return out;
}

namespace detail {

inline void validate_dual(const ModelParams& params, const DualConfiguration& xi)
{
    ModelParams relaxed = params;
    relaxed.n_sites = std::max(2, params.n_sites);
    validate(relaxed);
    if (params.n_sites < 1 || xi.size() != params.n_sites) {
        throw Error(ErrorKind::validation, "dual configuration size does not match n_sites");
    }
}

inline DualConfiguration run_dual(const ModelParams& params, const DualConfiguration& initial, double horizon,
                                  RngStream& rng, std::uint64_t max_events)
{
    validate_dual(params, initial);
    const bool closed = params.mode == Mode::bulk_torus;
    Engine engine(params, initial.bulk, closed ? BoundaryRule::none : BoundaryRule::absorbing);
    double t = 0.0;
    while (engine.total_rate() > 0.0) {
        const auto [elapsed, tr] = engine.propose(rng);
        if (t + elapsed > horizon) {
            break;
        }
        t += elapsed;
        engine.apply(tr);
        if (engine.events() >= max_events) {
            throw Error(ErrorKind::nontermination, "dual process exceeded " + std::to_string(max_events) + " events");
        }
    }
    DualConfiguration out;
    out.bulk = engine.occupation();
    for (int layer = 0; layer < 2; ++layer) {
        out.left[layer] = initial.left[layer] + engine.absorbed()[0][layer];
        out.right[layer] = initial.right[layer] + engine.absorbed()[1][layer];
    }
    return out;
}

} // namespace detail

// Dual walkers until every one is absorbed at L or R.
inline DualConfiguration simulate_dual(const ModelParams& params, const DualConfiguration& initial, RngStream& rng,
                                       std::uint64_t max_events = 1'000'000'000)
{
    if (params.mode == Mode::bulk_torus) {
        throw Error(ErrorKind::validation, "absorption needs boundary-driven mode");
    }
    if (initial.in_bulk() < 1) {
        throw Error(ErrorKind::validation, "dual configuration has no bulk particle");
    }
    return detail::run_dual(params, initial, std::numeric_limits<double>::infinity(), rng, max_events);
}

// Dual configuration at time `horizon` (absorbing reservoirs, or the same closed dynamics on the torus).
inline DualConfiguration evolve_dual(const ModelParams& params, const DualConfiguration& initial, double horizon,
                                     RngStream& rng, std::uint64_t max_events = 1'000'000'000)
{
    return detail::run_dual(params, initial, horizon, rng, max_events);
}

} // namespace swips
