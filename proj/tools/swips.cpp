// Batch front end for the switching interacting particle engine.

#include "output.hpp"

#include <swips/ctmc.hpp>
#include <swips/duality.hpp>
#include <swips/macro.hpp>
#include <swips/stationary.hpp>
#include <swips/verify.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace swips;
using namespace swips::cli;
using nlohmann::json;

namespace {

enum ExitCode { ok = 0, invalid = 2, guard = 3, failed = 4 };

struct ModelFlags {
    std::string config;
    std::optional<int> sigma;
    std::optional<int> n_sites;
    std::optional<double> epsilon;
    std::optional<double> gamma;
    std::optional<double> upsilon;
    std::string rho;
    std::string mode;
    std::optional<std::uint64_t> seed;
};

struct OutputFlags {
    std::string dir = ".";
    std::string name;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag)
{
    std::vector<double> values;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw Error(ErrorKind::validation, flag + ": '" + item + "' is not a number");
        }
    }
    return values;
}

ReservoirDensities parse_rho(const std::string& text)
{
    const auto v = parse_list(text, "--rho");
    if (v.size() != 4) {
        throw Error(ErrorKind::validation, "--rho needs four values L0,L1,R0,R1");
    }
    return ReservoirDensities::from_array({v[0], v[1], v[2], v[3]});
}

// start:stop:step, inclusive of stop up to rounding; values are start + i*step
std::vector<double> parse_grid(const std::string& text)
{
    std::vector<double> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ':')) {
        parts.push_back(parse_list(item, "grid")[0]);
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
        throw Error(ErrorKind::validation, "grid must be start:stop:step with step > 0");
    }
    std::vector<double> grid;
    for (long i = 0;; ++i) {
        const double v = parts[0] + static_cast<double>(i) * parts[2];
        if (v > parts[1] + 1e-9 * parts[2]) {
            break;
        }
        grid.push_back(v);
    }
    return grid;
}

void add_model_flags(CLI::App* cmd, ModelFlags& f, bool lattice)
{
    cmd->add_option("--config", f.config, "key=value file; flags override its entries");
    if (lattice) {
        cmd->add_option("--sigma", f.sigma, "-1 exclusion, 0 independent, 1 inclusion");
        cmd->add_option("--n", f.n_sites, "number of sites");
        cmd->add_option("--gamma", f.gamma, "microscopic switching rate");
        cmd->add_option("--mode", f.mode, "boundary-driven or bulk-torus");
        cmd->add_option("--seed", f.seed, "random seed");
    }
    cmd->add_option("--epsilon", f.epsilon, "slow-layer hop rate");
    cmd->add_option("--upsilon", f.upsilon, lattice ? "switching rate scaled as upsilon/N^2" : "switching rate");
    cmd->add_option("--rho", f.rho, "reservoir densities L0,L1,R0,R1");
}

void add_output_flags(CLI::App* cmd, OutputFlags& o)
{
    cmd->add_option("--out", o.dir, "output directory");
    cmd->add_option("--name", o.name, "artifact file stem (default: subcommand)");
}

RunConfig resolve(const ModelFlags& f)
{
    RunConfig run;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) {
            throw Error(ErrorKind::validation, "cannot read config " + f.config);
        }
        std::stringstream text;
        text << in.rdbuf();
        run = parse_config(text.str());
    }
    auto& p = run.params;
    if (f.sigma) {
        p.sigma = *f.sigma;
    }
    if (f.n_sites) {
        p.n_sites = *f.n_sites;
    }
    if (f.epsilon) {
        p.epsilon = *f.epsilon;
    }
    if (f.gamma) {
        p.gamma = *f.gamma;
        p.upsilon.reset();
    }
    if (f.upsilon) {
        p.upsilon = *f.upsilon;
    }
    if (!f.rho.empty()) {
        p.reservoir = parse_rho(f.rho);
    }
    if (!f.mode.empty()) {
        if (f.mode == "bulk-torus") {
            p.mode = Mode::bulk_torus;
        } else if (f.mode == "boundary-driven") {
            p.mode = Mode::boundary_driven;
        } else {
            throw Error(ErrorKind::validation, "unknown mode '" + f.mode + "'");
        }
    }
    if (f.seed) {
        run.seed = *f.seed;
    }
    return run;
}

MacroParams resolve_macro(const ModelFlags& f)
{
    const auto run = resolve(f);
    MacroParams mp;
    mp.epsilon = run.params.epsilon;
    mp.upsilon = run.params.upsilon.value_or(1.0);
    mp.reservoir = run.params.reservoir;
    return validate(mp);
}

json reservoir_json(const ReservoirDensities& r)
{
    return {{"rho_L0", r.rho_L0}, {"rho_L1", r.rho_L1}, {"rho_R0", r.rho_R0}, {"rho_R1", r.rho_R1}};
}

json params_json(const ModelParams& p)
{
    json j = {{"sigma", p.sigma},
              {"epsilon", p.epsilon},
              {"n_sites", p.n_sites},
              {"mode", to_string(p.mode)},
              {"switch_rate", p.switch_rate()},
              {"reservoir", reservoir_json(p.reservoir)}};
    if (p.upsilon) {
        j["upsilon"] = *p.upsilon;
    } else {
        j["gamma"] = p.gamma;
    }
    return j;
}

json params_json(const MacroParams& mp)
{
    return {{"epsilon", mp.epsilon}, {"upsilon", mp.upsilon}, {"reservoir", reservoir_json(mp.reservoir)}};
}

CsvWriter::Cell num(double v) { return CsvWriter::Cell{v}; }
CsvWriter::Cell integer(long long v) { return CsvWriter::Cell{v}; }
CsvWriter::Cell text(std::string s) { return CsvWriter::Cell{std::move(s)}; }
CsvWriter::Cell maybe(const std::optional<double>& v) { return v ? num(*v) : CsvWriter::Cell{}; }

struct Context {
    std::string subcommand;
    std::vector<std::string> argv;
    OutputFlags output;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    std::string started_utc = utc_timestamp();

    Manifest manifest() const { return Manifest(subcommand, argv, started, started_utc); }
    fs::path dir() const { return output.dir; }
    std::string stem() const { return output.name.empty() ? subcommand : output.name; }
    fs::path file(const std::string& suffix) const { return dir() / (stem() + suffix); }
};

void emit_plot(Manifest& manifest, const fs::path& csv, const std::string& title,
               const std::string& xlabel, const std::vector<std::pair<int, std::string>>& series, bool log_x = false)
{
    const auto path = fs::path(csv).replace_extension(".gp");
    write_text(path, plot_script(csv.filename().string(), title, xlabel, series, log_x));
    manifest.add(path);
}

void finish(Manifest& manifest, const Context& ctx)
{
    const auto path = manifest.write(ctx.dir(), ctx.stem());
    std::cout << "manifest: " << path.string() << "\n";
}

// ---- subcommands ----

int cmd_simulate(const Context& ctx, const ModelFlags& flags, double t_end, std::optional<double> burn_in,
                 std::size_t batches)
{
    const auto run = resolve(flags);
    const auto p = validate(run.params);
    const double warmup = burn_in.value_or(default_burn_in(p));
    RngStream rng(run.seed, 0);
    SimulationOptions options;
    options.batches = batches;
    const auto stats = simulate(p, Configuration(p.n_sites), t_end, warmup, rng, options);

    Manifest manifest = ctx.manifest();
    manifest.parameters() = params_json(p);
    manifest.parameters()["t_end"] = t_end;
    manifest.parameters()["burn_in"] = warmup;
    manifest.parameters()["batches"] = batches;
    manifest.set_seed(run.seed);
    const auto theta_path = ctx.file("_theta.csv");
    const auto current_path = ctx.file("_current.csv");
    {
        CsvWriter theta(theta_path, {"x", "layer", "theta", "theta_se"});
        for (std::size_t x = 0; x < stats.theta.size(); ++x) {
            for (int layer = 0; layer < 2; ++layer) {
                theta.row({integer(static_cast<long long>(x) + 1), integer(layer), num(stats.theta[x][layer]),
                           num(stats.theta_se[x][layer])});
            }
        }
        CsvWriter current(current_path, {"edge", "layer", "current", "current_se"});
        for (std::size_t k = 0; k < stats.current.size(); ++k) {
            for (int layer = 0; layer < 2; ++layer) {
                current.row({integer(static_cast<long long>(k)), integer(layer), num(stats.current[k][layer]),
                             num(stats.current_se[k][layer])});
            }
        }
    }
    manifest.add(theta_path);
    manifest.add(current_path);
    write_text(ctx.file("_theta.gp"),
               "set datafile separator ','\nset xlabel 'site'\nset ylabel 'theta'\n"
               "plot '" + theta_path.filename().string() + "' using ($2==0?$1:1/0):3:4 with yerrorbars title 'layer 0', \\\n"
               "     '' using ($2==1?$1:1/0):3:4 with yerrorbars title 'layer 1'\npause -1\n");
    manifest.add(ctx.file("_theta.gp"));

    std::printf("%4s %6s %22s %12s\n", "x", "layer", "theta", "se");
    for (std::size_t x = 0; x < stats.theta.size(); ++x) {
        for (int layer = 0; layer < 2; ++layer) {
            std::printf("%4zu %6d %22.15g %12.4g\n", x + 1, layer, stats.theta[x][layer], stats.theta_se[x][layer]);
        }
    }
    std::printf("events %llu over time %g; max rate drift %.3g%s\n", static_cast<unsigned long long>(stats.events),
                stats.elapsed, stats.max_rate_drift, stats.heavy_tail_warning ? "; WARNING heavy tails" : "");
    finish(manifest, ctx);
    return ok;
}

int cmd_profile(const Context& ctx, const ModelFlags& flags)
{
    const auto p = validate(resolve(flags).params);
    const auto prof = micro_profile(p);
    Manifest manifest = ctx.manifest();
    manifest.parameters() = params_json(p);
    const auto csv = ctx.file(".csv");
    {
        CsvWriter out(csv, {"x", "theta0", "theta1", "J0", "J1"});
        for (std::size_t i = 0; i < prof.theta0.size(); ++i) {
            const bool edge = i < prof.current0.size();
            out.row({integer(static_cast<long long>(i) + 1), num(prof.theta0[i]), num(prof.theta1[i]),
                     edge ? num(prof.current0[i]) : CsvWriter::Cell{}, edge ? num(prof.current1[i]) : CsvWriter::Cell{}});
        }
    }
    manifest.add(csv);
    const json summary = {{"J_total", prof.current_total}, {"params", params_json(p)}};
    write_text(ctx.file(".json"), summary.dump(2) + "\n");
    manifest.add(ctx.file(".json"));
    emit_plot(manifest, csv, "stationary microscopic profile", "site", {{2, "theta0"}, {3, "theta1"}});
    std::printf("J_total = %.17g\n", prof.current_total);
    finish(manifest, ctx);
    return ok;
}

int cmd_current(const Context& ctx, const ModelFlags& flags)
{
    const auto p = validate(resolve(flags).params);
    const auto prof = micro_profile(p);
    Manifest manifest = ctx.manifest();
    manifest.parameters() = params_json(p);
    const auto csv = ctx.file(".csv");
    {
        CsvWriter out(csv, {"edge", "J0", "J1", "J"});
        for (std::size_t k = 0; k < prof.current0.size(); ++k) {
            out.row({integer(static_cast<long long>(k) + 1), num(prof.current0[k]), num(prof.current1[k]),
                     num(prof.current0[k] + prof.current1[k])});
        }
    }
    manifest.add(csv);
    json summary = {{"J_total", prof.current_total}, {"params", params_json(p)}};
    if (p.upsilon) {
        MacroParams mp{p.epsilon, *p.upsilon, p.reservoir};
        const double scaled = prof.current_total * p.n_sites;
        const double limit = macro_current(mp, 0.5).total;
        summary["N_times_J_total"] = scaled;
        summary["macro_J"] = limit;
        std::printf("N*J = %.17g (macro limit %.17g)\n", scaled, limit);
    }
    write_text(ctx.file(".json"), summary.dump(2) + "\n");
    manifest.add(ctx.file(".json"));
    emit_plot(manifest, csv, "microscopic currents", "edge", {{2, "J0"}, {3, "J1"}, {4, "J"}});
    std::printf("J_total = %.17g\n", prof.current_total);
    finish(manifest, ctx);
    return ok;
}

int cmd_macro(const Context& ctx, const ModelFlags& flags, int points)
{
    if (points < 1) {
        throw Error(ErrorKind::validation, "--points must be >= 1");
    }
    const auto mp = resolve_macro(flags);
    Manifest manifest = ctx.manifest();
    manifest.parameters() = params_json(mp);
    manifest.parameters()["points"] = points;
    const auto csv = ctx.file(".csv");
    {
        CsvWriter out(csv, {"y", "rho0", "rho1", "J0", "J1", "J"});
        for (int k = 0; k <= points; ++k) {
            const double y = static_cast<double>(k) / points;
            const auto r = macro_profile(mp, y);
            const auto j = macro_current(mp, y);
            out.row({num(y), num(r.bottom), num(r.top), num(j.bottom), num(j.top), num(j.total)});
        }
    }
    manifest.add(csv);
    emit_plot(manifest, csv, "macroscopic stationary profile", "y", {{2, "rho0"}, {3, "rho1"}});
    std::printf("J = %.17g\n", macro_current(mp, 0.5).total);
    finish(manifest, ctx);
    return ok;
}

int cmd_uphill(const Context& ctx, const ModelFlags& flags, const std::string& grid_text)
{
    auto mp = resolve_macro(flags);
    const auto grid = parse_grid(grid_text);
    Manifest manifest = ctx.manifest();
    manifest.parameters() = params_json(mp);
    manifest.parameters().erase("epsilon");
    manifest.parameters()["eps_grid"] = grid_text;
    const auto csv = ctx.file(".csv");
    std::optional<double> critical;
    {
        CsvWriter out(csv, {"epsilon", "J", "gap", "verdict"});
        std::optional<Verdict> previous;
        for (double e : grid) {
            mp.epsilon = e;
            const auto v = uphill(validate(mp));
            critical = v.critical_epsilon;
            out.row({num(e), num(v.current), num(v.density_gap), text(to_string(v.verdict))});
            if (previous && *previous != v.verdict) {
                std::printf("verdict changes to %s at epsilon = %.17g\n", to_string(v.verdict), e);
            }
            previous = v.verdict;
        }
    }
    manifest.add(csv);
    const json summary = {{"critical_epsilon", critical ? json(*critical) : json(nullptr)},
                          {"params", manifest.parameters()}};
    write_text(ctx.file(".json"), summary.dump(2) + "\n");
    manifest.add(ctx.file(".json"));
    emit_plot(manifest, csv, "total current and density gap", "epsilon", {{2, "J"}, {3, "gap"}});
    if (critical) {
        std::printf("critical epsilon = %.17g\n", *critical);
    } else {
        std::printf("no critical epsilon (layer gaps share a sign)\n");
    }
    finish(manifest, ctx);
    return ok;
}

int cmd_layer(const Context& ctx, double upsilon, double wl, double wr, double c, std::optional<double> eps,
              const std::string& range)
{
    std::vector<double> grid;
    if (eps) {
        grid.push_back(*eps);
    }
    if (!range.empty()) {
        const auto parts = parse_list(range, "--eps-range");
        if (parts.size() != 3 || !(parts[0] > 0.0) || !(parts[1] >= parts[0]) || parts[2] < 1) {
            throw Error(ErrorKind::validation, "--eps-range must be lo,hi,count with 0 < lo <= hi");
        }
        const auto count = static_cast<int>(parts[2]);
        for (int k = 0; k < count; ++k) {
            const double w = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
            grid.push_back(std::exp(std::log(parts[0]) + w * (std::log(parts[1]) - std::log(parts[0]))));
        }
    }
    if (grid.empty()) {
        throw Error(ErrorKind::validation, "give --eps or --eps-range");
    }
    MacroParams mp{1.0, upsilon, ReservoirDensities::from_array({wl, 0.0, wr, 0.0})};
    Manifest manifest = ctx.manifest();
    manifest.parameters() = {{"upsilon", upsilon}, {"W_L", wl}, {"W_R", wr}, {"c", c}, {"epsilons", grid}};
    const auto csv = ctx.file(".csv");
    {
        CsvWriter out(csv, {"epsilon", "left_width", "left_ratio", "right_width", "right_ratio"});
        std::printf("%12s %22s %22s\n", "epsilon", "left ratio", "right ratio");
        for (double e : grid) {
            mp.epsilon = e;
            validate(mp);
            const auto layer = boundary_layer(mp, c);
            out.row({num(e), maybe(layer.left_width), maybe(layer.left_ratio), maybe(layer.right_width),
                     maybe(layer.right_ratio)});
            std::printf("%12.4g %22.15g %22.15g\n", e, layer.left_ratio.value_or(NAN), layer.right_ratio.value_or(NAN));
        }
    }
    manifest.add(csv);
    emit_plot(manifest, csv, "boundary-layer width / (sqrt(eps) log(1/eps))", "epsilon",
              {{3, "left"}, {5, "right"}}, true);
    std::printf("limit 1/sqrt(upsilon) = %.15g\n", 1.0 / std::sqrt(upsilon));
    finish(manifest, ctx);
    return ok;
}

std::vector<std::array<std::int64_t, 2>> parse_sites(const std::string& text, int n, const std::string& flag)
{
    std::vector<std::array<std::int64_t, 2>> sites;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) {
        const auto v = parse_list(item, flag);
        if (v.size() != 2 || v[0] < 0 || v[1] < 0 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) {
            throw Error(ErrorKind::validation, flag + ": each site is 'count0,count1' with counts >= 0");
        }
        sites.push_back({static_cast<std::int64_t>(v[0]), static_cast<std::int64_t>(v[1])});
    }
    if (static_cast<int>(sites.size()) != n) {
        throw Error(ErrorKind::validation, flag + " must list exactly n sites separated by ';'");
    }
    return sites;
}

std::array<std::int64_t, 2> parse_pair(const std::string& text, const std::string& flag)
{
    if (text.empty()) {
        return {0, 0};
    }
    const auto v = parse_list(text, flag);
    if (v.size() != 2 || v[0] < 0 || v[1] < 0) {
        throw Error(ErrorKind::validation, flag + " must be 'count0,count1'");
    }
    return {static_cast<std::int64_t>(v[0]), static_cast<std::int64_t>(v[1])};
}

int cmd_duality(const Context& ctx, const ModelFlags& flags, const std::string& eta, const std::string& xi,
                const std::string& xi_left, const std::string& xi_right, double horizon, std::size_t replicas)
{
    const auto run = resolve(flags);
    const auto p = validate(run.params);
    DualityPairing pairing;
    pairing.eta.eta = parse_sites(eta, p.n_sites, "--eta");
    pairing.xi.bulk = parse_sites(xi, p.n_sites, "--xi");
    pairing.xi.left = parse_pair(xi_left, "--xi-left");
    pairing.xi.right = parse_pair(xi_right, "--xi-right");
    pairing.horizon = horizon;
    pairing.replicas = replicas;
    if (p.mode == Mode::bulk_torus && pairing.xi.total() != pairing.xi.in_bulk()) {
        throw Error(ErrorKind::validation, "closed systems have no absorbed dual particles");
    }
    RngStream rng(run.seed, 0);
    const auto report = check_self_duality(pairing, p, rng);
    Manifest manifest = ctx.manifest();
    manifest.parameters() = params_json(p);
    manifest.parameters()["horizon"] = horizon;
    manifest.parameters()["replicas"] = replicas;
    manifest.parameters()["eta"] = eta;
    manifest.parameters()["xi"] = xi;
    manifest.set_seed(run.seed);
    const json j = {{"result", report.pass ? "PASS" : "FAIL"},
                    {"forward_mean", report.lhs.mean},
                    {"forward_se", report.lhs.se},
                    {"dual_mean", report.rhs.mean},
                    {"dual_se", report.rhs.se},
                    {"difference", report.diff},
                    {"gate_se", report.se},
                    {"median_of_means", report.used_median_of_means},
                    {"params", manifest.parameters()}};
    write_text(ctx.file(".json"), j.dump(2) + "\n");
    manifest.add(ctx.file(".json"));
    std::printf("%s: forward %.10g +- %.3g, dual %.10g +- %.3g (|diff| %.3g vs 4 SE %.3g)\n",
                report.pass ? "PASS" : "FAIL", report.lhs.mean, report.lhs.se, report.rhs.mean, report.rhs.se,
                std::abs(report.diff), 4 * report.se);
    finish(manifest, ctx);
    return report.pass ? ok : failed;
}

int cmd_verify(const Context& ctx)
{
    Manifest manifest = ctx.manifest();
    json results = json::array();
    bool all = true;
    for (const auto& check : checks::invariant_suite()) {
        checks::CheckOutcome out;
        out.detail.precision(6);
        try {
            check.run(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " exception: " << e.what();
        }
        all = all && out.pass;
        std::printf("[%s] %s: %s\n", out.pass ? "PASS" : "FAIL", check.name, out.detail.str().c_str());
        results.push_back({{"check", check.name}, {"pass", out.pass}, {"detail", out.detail.str()}});
    }
    write_text(ctx.file(".json"), json({{"pass", all}, {"checks", results}}).dump(2) + "\n");
    manifest.add(ctx.file(".json"));
    finish(manifest, ctx);
    return all ? ok : failed;
}

int dispatch(const std::vector<std::string>& args);

int cmd_replay(const std::string& manifest_path, const std::string& out_dir)
{
    std::ifstream in(manifest_path);
    if (!in) {
        throw Error(ErrorKind::validation, "cannot read manifest " + manifest_path);
    }
    json recorded;
    try {
        recorded = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, std::string("manifest is not valid JSON: ") + e.what());
    }
    auto args = recorded.at("argv").get<std::vector<std::string>>();
    const fs::path target = out_dir.empty() ? fs::path(manifest_path).parent_path() / "replay" : fs::path(out_dir);
    fs::create_directories(target);
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out" && i + 1 < args.size()) {
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
    }
    args.push_back("--out");
    args.push_back(target.string());
    const int code = dispatch(args);
    if (code != ok) {
        return code;
    }
    bool identical = true;
    for (const auto& a : recorded.at("artifacts")) {
        const auto file = a.at("file").get<std::string>();
        const auto fresh = target / file;
        const bool same = fs::exists(fresh) && file_digest(fresh) == a.at("fnv1a64").get<std::string>();
        std::printf("%s %s\n", same ? "identical" : "DIFFERS  ", file.c_str());
        identical = identical && same;
    }
    return identical ? ok : failed;
}

int dispatch(const std::vector<std::string>& args)
{
    CLI::App app{"swips: switching interacting particle systems", "swips"};
    app.require_subcommand(1);

    ModelFlags model;
    OutputFlags output;
    std::vector<CLI::App*> with_output;

    auto* sim = app.add_subcommand("simulate", "stationary Monte Carlo time averages");
    add_model_flags(sim, model, true);
    double t_end = 0.0;
    std::optional<double> burn_in;
    std::size_t batches = 32;
    sim->add_option("--t-end", t_end, "end time")->required();
    sim->add_option("--burn-in", burn_in, "discarded initial time (default 10 N^2 / slowest rate)");
    sim->add_option("--batches", batches, "batch count for standard errors");

    auto* profile = app.add_subcommand("profile", "exact microscopic profile and currents");
    add_model_flags(profile, model, true);
    auto* current = app.add_subcommand("current", "exact microscopic currents per edge");
    add_model_flags(current, model, true);

    auto* macro_cmd = app.add_subcommand("macro", "macroscopic stationary profile and currents");
    add_model_flags(macro_cmd, model, false);
    int points = 200;
    macro_cmd->add_option("--points", points, "grid intervals on [0,1]");

    auto* uphill_cmd = app.add_subcommand("uphill", "uphill-diffusion verdicts over an epsilon grid");
    add_model_flags(uphill_cmd, model, false);
    std::string eps_grid = "0.05:1:0.05";
    uphill_cmd->add_option("--eps-grid", eps_grid, "start:stop:step");

    auto* layer = app.add_subcommand("layer", "boundary-layer widths");
    double upsilon = 1.0, wl = 0.0, wr = 0.0, c = 1.0;
    std::optional<double> eps;
    std::string eps_range;
    layer->add_option("--upsilon", upsilon, "switching rate");
    layer->add_option("--wl", wl, "left layer jump |rho_L0 - rho_L1|");
    layer->add_option("--wr", wr, "right layer jump |rho_R0 - rho_R1|");
    layer->add_option("--c", c, "threshold constant");
    layer->add_option("--eps", eps, "single epsilon");
    layer->add_option("--eps-range", eps_range, "lo,hi,count (log-spaced)");

    auto* duality_cmd = app.add_subcommand("duality", "Monte Carlo check of the duality relation");
    add_model_flags(duality_cmd, model, true);
    std::string eta, xi, xi_left, xi_right;
    double horizon = 1.0;
    std::size_t replicas = 100'000;
    duality_cmd->add_option("--eta", eta, "forward configuration 'a,b;c,d;...' per site")->required();
    duality_cmd->add_option("--xi", xi, "dual configuration 'a,b;c,d;...' per site")->required();
    duality_cmd->add_option("--xi-left", xi_left, "dual particles absorbed at L per layer 'a,b'");
    duality_cmd->add_option("--xi-right", xi_right, "dual particles absorbed at R per layer 'a,b'");
    duality_cmd->add_option("--horizon", horizon, "time t");
    duality_cmd->add_option("--replicas", replicas, "replicas per side");

    auto* verify = app.add_subcommand("verify", "deterministic cross-oracle invariant suite");

    auto* replay = app.add_subcommand("replay", "re-run a manifest and compare artifacts");
    std::string manifest_path;
    replay->add_option("manifest", manifest_path, "manifest JSON")->required();

    for (auto* cmd : {sim, profile, current, macro_cmd, uphill_cmd, layer, duality_cmd, verify}) {
        add_output_flags(cmd, output);
    }
    replay->add_option("--out", output.dir, "directory for the replayed artifacts (default <manifest dir>/replay)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : invalid;
    }

    Context ctx;
    ctx.argv = args;
    ctx.output = output;
    try {
        if (*replay) {
            return cmd_replay(manifest_path, output.dir == "." ? std::string() : output.dir);
        }
        fs::create_directories(ctx.dir());
        if (*sim) {
            ctx.subcommand = "simulate";
            return cmd_simulate(ctx, model, t_end, burn_in, batches);
        }
        if (*profile) {
            ctx.subcommand = "profile";
            return cmd_profile(ctx, model);
        }
        if (*current) {
            ctx.subcommand = "current";
            return cmd_current(ctx, model);
        }
        if (*macro_cmd) {
            ctx.subcommand = "macro";
            return cmd_macro(ctx, model, points);
        }
        if (*uphill_cmd) {
            ctx.subcommand = "uphill";
            return cmd_uphill(ctx, model, eps_grid);
        }
        if (*layer) {
            ctx.subcommand = "layer";
            return cmd_layer(ctx, upsilon, wl, wr, c, eps, eps_range);
        }
        if (*duality_cmd) {
            ctx.subcommand = "duality";
            return cmd_duality(ctx, model, eta, xi, xi_left, xi_right, horizon, replicas);
        }
        ctx.subcommand = "verify";
        return cmd_verify(ctx);
    } catch (const Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        switch (e.kind()) {
        case ErrorKind::validation:
        case ErrorKind::domain: return invalid;
        default: return guard;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return invalid;
    }
}

} // namespace

int main(int argc, char** argv)
{
    return dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
