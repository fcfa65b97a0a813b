// Command-line driver: simulate, replay, sweep, gen-population, gen-prices.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lendsim/bundle.hpp"
#include "lendsim/config.hpp"
#include "lendsim/errors.hpp"
#include "lendsim/harness.hpp"

using namespace lendsim;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out = "out";
    std::optional<double> volMultiplier;
    bool fullScale = false;
    std::string date;
    std::string worstDrawdown;
    std::optional<double> threshold;
    std::string liqLtvGrid;
    std::string incGrid;
    std::size_t historyDays = 0;
    std::string startDate = "2020-01-01";
};

double parseNumber(const std::string& s, const std::string& flag) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", flag, s));
    return v;
}

// "a,b,c" or "start:stop:step" (inclusive).
std::vector<double> parseGrid(const std::string& spec, const std::string& flag) {
    std::vector<std::string> parts;
    const char sep = spec.find(':') != std::string::npos ? ':' : ',';
    std::size_t pos = 0;
    for (std::size_t at; (at = spec.find(sep, pos)) != std::string::npos; pos = at + 1)
        parts.push_back(spec.substr(pos, at - pos));
    parts.push_back(spec.substr(pos));

    std::vector<double> grid;
    if (sep == ',') {
        for (const auto& p : parts) grid.push_back(parseNumber(p, flag));
        return grid;
    }
    if (parts.size() != 3) throw ConfigError(flag + ": expected start:stop:step");
    const double start = parseNumber(parts[0], flag), stop = parseNumber(parts[1], flag),
                 step = parseNumber(parts[2], flag);
    if (!(step > 0.0) || stop < start) throw ConfigError(flag + ": need step > 0 and stop >= start");
    for (int k = 0;; ++k) {
        const double v = std::round((start + step * k) * 1e9) / 1e9;
        if (v > stop + 1e-9) break;
        grid.push_back(v);
    }
    return grid;
}

ConfigFile loadWithOverrides(const Options& o) {
    ConfigFile cfg = loadConfig(o.config);
    ScenarioConfig& sc = cfg.scenario;
    if (o.seed) sc.masterSeed = *o.seed;
    if (o.volMultiplier) sc.volMultiplier = *o.volMultiplier;
    if (o.fullScale) applyFullScale(sc);
    return cfg;
}

unsigned threadsFor(const Options& o) { return o.threads > 0 ? o.threads : defaultThreads(); }

void report(const EnsembleResult& r, const std::filesystem::path& out) {
    fmt::print("runs: {} completed, {} failed\n", r.stats.runsCompleted, r.stats.runsFailed);
    fmt::print("mean undercollateralized fraction: {}\n", r.stats.meanUndercollateralizedFraction);
    fmt::print("mean final LTV: {}\n", r.stats.meanFinalLtv);
    fmt::print("bundle: {}\n", out.string());
}

int cmdSimulate(const Options& o) {
    ConfigFile cfg = loadWithOverrides(o);
    const PreparedScenario prepared = prepare(cfg.scenario);
    const EnsembleResult result = runEnsemble(prepared, threadsFor(o));
    writeEnsembleBundle(o.out, cfg, result, "simulate", prepared.fixedGrid.get());
    report(result, o.out);
    return 0;
}

int cmdReplay(const Options& o) {
    ConfigFile cfg = loadWithOverrides(o);
    ScenarioConfig& sc = cfg.scenario;
    if (sc.historyPath.empty())
        throw ConfigError("replay requires price history: set prices.historyPath in the config");
    sc.priceSource = PriceSource::HistoricalReplay;
    if (!o.date.empty() || !o.worstDrawdown.empty()) {
        sc.replayDate = o.date;
        sc.replayWorstDrawdown = o.worstDrawdown;
    }
    if (sc.replayDate.empty() && sc.replayWorstDrawdown.empty())
        throw ConfigError("replay needs --date YYYY-MM-DD or --worst-drawdown ASSET");
    const PreparedScenario prepared = prepare(sc);
    const EnsembleResult result = runEnsemble(prepared, threadsFor(o));
    writeEnsembleBundle(o.out, cfg, result, "replay", prepared.fixedGrid.get());
    report(result, o.out);
    return 0;
}

int cmdSweep(const Options& o) {
    ConfigFile cfg = loadWithOverrides(o);
    if (o.threshold) cfg.sweep.threshold = *o.threshold;
    if (!o.liqLtvGrid.empty()) cfg.sweep.liqLtvGrid = parseGrid(o.liqLtvGrid, "--liq-ltv-grid");
    if (!o.incGrid.empty()) cfg.sweep.incGrid = parseGrid(o.incGrid, "--inc-grid");
    if (!(cfg.sweep.threshold > 0.0 && cfg.sweep.threshold <= 1.0))
        throw ConfigError("--threshold must lie in (0, 1]");
    const PreparedScenario prepared = prepare(cfg.scenario);
    const FrontierResult result = sweepFrontier(prepared, cfg.sweep, threadsFor(o));
    writeSweepBundle(o.out, cfg, result);
    fmt::print("cells: {}, frontier points: {}\n", result.surface.size(), result.frontier.size());
    for (const auto& c : result.frontier)
        fmt::print("  liqLtv {:.2f}: inc* {:.2f} (fraction {:.4f}, 1 - liqLtv = {:.2f})\n", c.liqLtv, c.inc,
                   c.undercollateralizedFraction, c.theoryInc());
    fmt::print("bundle: {}\n", o.out);
    return 0;
}

std::ofstream openOut(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

int cmdGenPopulation(const Options& o) {
    ConfigFile cfg = loadWithOverrides(o);
    const PreparedScenario prepared = prepare(cfg.scenario);
    const PriceGrid grid = gridForRun(prepared, 0);
    const auto users = populationForRun(prepared, grid, 0);
    const auto path = std::filesystem::path(o.out) / "population.csv";
    auto out = openOut(path);
    writePopulationCsv(users, cfg.scenario.assets, out);
    fmt::print("{} users written to {}\n", users.size(), path.string());
    return 0;
}

int cmdGenPrices(const Options& o) {
    ConfigFile cfg = loadWithOverrides(o);
    const ScenarioConfig& sc = cfg.scenario;
    if (o.historyDays > 0) {
        if (sc.priceSource != PriceSource::Synthetic)
            throw ConfigError("--history-days generates synthetic history; the config must use synthetic prices");
        sc.validate();
        auto rng = streamFor(sc.masterSeed, 0, Stream::Prices);
        std::vector<double> vols = sc.volTargets.empty() ? sc.hourlyVols : sc.volTargets;
        for (double& v : vols) v *= sc.volMultiplier;
        PriceGrid grid = syntheticGrid(sc.assets, sc.initialPrices, vols, sc.correlation, rng,
                                       o.historyDays * kMinutesPerDay);
        grid.startMinute = epochMinuteOfDate(o.startDate);
        const auto path = std::filesystem::path(o.out) / "history.csv";
        auto out = openOut(path);
        writeHistoryCsv(grid, out);
        fmt::print("{} days of history written to {}\n", o.historyDays, path.string());
        return 0;
    }
    const PreparedScenario prepared = prepare(sc);
    const PriceGrid grid = gridForRun(prepared, 0);
    const auto path = std::filesystem::path(o.out) / "prices.csv";
    auto out = openOut(path);
    writeGridCsv(grid, out);
    fmt::print("{} ticks written to {}\n", grid.ticks(), path.string());
    return 0;
}

void commonFlags(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--threads", o.threads, "Worker threads (default: available cores)");
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
    cmd->add_option("--vol-multiplier", o.volMultiplier, "Scale every asset's hourly volatility");
    cmd->add_flag("--full-scale", o.fullScale, "1000 users x 1000 runs");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agent-based stress testing for over-collateralized lending protocols"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    Options o;

    auto* simulate = app.add_subcommand("simulate", "Run an ensemble and write a result bundle");
    commonFlags(simulate, o);

    auto* replay = app.add_subcommand("replay", "Ensemble over one historical day");
    commonFlags(replay, o);
    auto* date = replay->add_option("--date", o.date, "UTC day YYYY-MM-DD");
    replay->add_option("--worst-drawdown", o.worstDrawdown, "Replay the worst drawdown day of ASSET")->excludes(date);

    auto* sweep = app.add_subcommand("sweep", "Sweep (liqLtv, inc) and locate the undercollateralization frontier");
    commonFlags(sweep, o);
    sweep->add_option("--threshold", o.threshold, "Undercollateralized fraction that marks the frontier");
    sweep->add_option("--liq-ltv-grid", o.liqLtvGrid, "start:stop:step or comma list");
    sweep->add_option("--inc-grid", o.incGrid, "start:stop:step or comma list");

    auto* genPop = app.add_subcommand("gen-population", "Write run 0's population as CSV");
    commonFlags(genPop, o);

    auto* genPrices = app.add_subcommand("gen-prices", "Write run 0's price grid, or multi-day synthetic history");
    commonFlags(genPrices, o);
    genPrices->add_option("--history-days", o.historyDays, "Write this many days in history format");
    genPrices->add_option("--start-date", o.startDate, "First day of generated history")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) return cmdSimulate(o);
        if (*replay) return cmdReplay(o);
        if (*sweep) return cmdSweep(o);
        if (*genPop) return cmdGenPopulation(o);
        if (*genPrices) return cmdGenPrices(o);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const InvalidInput& e) {
        fmt::print(stderr, "invalid input: {}\n", e.what());
        return 2;
    } catch (const InsufficientData& e) {
        fmt::print(stderr, "insufficient data: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 1;
}
