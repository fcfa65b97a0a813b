#include "lendsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

// Per-asset hourly targets implied by the scenario for a given grid, or
// empty when the grid should be used as is.
std::vector<double> volTargetsFor(const ScenarioConfig& config, const PriceGrid& grid) {
    if (!config.volTargets.empty()) {
        std::vector<double> targets = config.volTargets;
        for (double& v : targets) v *= config.volMultiplier;
        return targets;
    }
    if (config.volMultiplier == 1.0) return {};
    std::vector<double> targets(grid.assetCount(), 0.0);
    for (std::size_t a = 0; a < grid.assetCount(); ++a) {
        if (!grid.pegged[a]) targets[a] = config.volMultiplier * realizedHourlyVol(grid.prices[a]);
    }
    return targets;
}

PriceGrid applyVolTargets(const ScenarioConfig& config, PriceGrid grid) {
    const auto targets = volTargetsFor(config, grid);
    if (targets.empty()) return grid;
    return rescaleToVol(grid, targets);
}

struct RunFinal {
    bool ok = false;
    double fraction = 0.0;
    double finalLtv = 0.0;
    double slippageWeighted = 0.0;  // sum of sigma * a
    double seized = 0.0;
    std::string error;
};

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool tooManyFailures(std::size_t failed, std::size_t total) { return failed * 100 > total; }

}  // namespace

std::optional<AssetIndex> ScenarioConfig::indexOf(std::string_view symbol) const {
    for (std::size_t i = 0; i < assets.size(); ++i) {
        if (assets[i].symbol == symbol) return i;
    }
    return std::nullopt;
}

void ScenarioConfig::validate() const {
    const std::size_t n = assets.size();
    if (n < 2) throw InvalidInput("a scenario needs at least two assets");
    std::set<std::string> seen;
    for (const auto& a : assets) {
        a.validate();
        if (!seen.insert(a.symbol).second) throw InvalidInput("duplicate asset symbol " + a.symbol);
    }
    if (liquidity.size() != n) throw InvalidInput("liquidity matrix must cover every asset");
    liquidity.validate();
    population.validate(n);
    if (nRuns < 1) throw InvalidInput("nRuns must be >= 1");
    if (!(liquidation.tradingFee >= 0.0 && liquidation.tradingFee < 1.0))
        throw InvalidInput("tradingFee must lie in [0, 1)");
    if (!(volMultiplier >= 0.0) || !std::isfinite(volMultiplier)) throw InvalidInput("volMultiplier must be >= 0");
    if (!volTargets.empty() && volTargets.size() != n) throw InvalidInput("volTargets must cover every asset");
    for (double v : volTargets) {
        if (!(v >= 0.0)) throw InvalidInput("volTargets must be >= 0");
    }
    if (priceSource == PriceSource::Synthetic) {
        if (initialPrices.size() != n || hourlyVols.size() != n || correlation.size() != n)
            throw InvalidInput("synthetic prices need initialPrice, hourlyVol and a correlation row per asset");
        for (std::size_t i = 0; i < n; ++i) {
            if (assets[i].isNumerairePegged && initialPrices[i] != 1.0)
                throw InvalidInput("pegged asset " + assets[i].symbol + " must start at price 1");
        }
    } else if (historyPath.empty()) {
        throw InvalidInput("historical price sources need a historyPath");
    }
    if (!replayWorstDrawdown.empty() && !indexOf(replayWorstDrawdown))
        throw InvalidInput("worst-drawdown asset " + replayWorstDrawdown + " is not part of the scenario");
}

PreparedScenario prepare(const ScenarioConfig& config) {
    PreparedScenario out;
    out.config = config;
    try {
        config.validate();
        if (config.priceSource != PriceSource::Synthetic)
            out.history = std::make_shared<const PriceHistory>(loadHistory(config.historyPath));
        if (config.priceSource == PriceSource::HistoricalReplay) {
            if (config.replayDate.empty() && config.replayWorstDrawdown.empty())
                throw ConfigError("historical replay needs a replay date or a worst-drawdown asset");
            PriceGrid grid = !config.replayDate.empty()
                                 ? windowForDate(*out.history, config.assets, config.replayDate)
                                 : worstDrawdownWindow(*out.history, config.assets, config.replayWorstDrawdown);
            out.fixedGrid = std::make_shared<const PriceGrid>(applyVolTargets(config, std::move(grid)));
        }
        if (!config.populationPath.empty()) {
            std::ifstream in(config.populationPath);
            if (!in) throw InvalidInput("cannot open population file " + config.populationPath);
            out.fixedPopulation = std::make_shared<const std::vector<UserAccount>>(readPopulationCsv(in, config.assets));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return out;
}

std::string_view seriesName(Series s) {
    switch (s) {
        case Series::MeanLtv: return "mean_ltv";
        case Series::LiquidatedFunds: return "liquidated_funds";
        case Series::SeizedCollateral: return "seized_collateral";
        case Series::OutstandingDebtPct: return "outstanding_debt_pct";
        case Series::LiquidationEvents: return "liquidation_events";
        case Series::LiquidatorProfit: return "liquidator_profit";
        case Series::SlippageFees: return "slippage_fees";
        case Series::TradingFees: return "trading_fees";
        case Series::UndercollateralizedFraction: return "undercollateralized_fraction";
    }
    return "unknown";
}

bool isCumulative(Series s) {
    switch (s) {
        case Series::LiquidatedFunds:
        case Series::SeizedCollateral:
        case Series::LiquidatorProfit:
        case Series::SlippageFees:
        case Series::TradingFees: return true;
        default: return false;
    }
}

bool isFractional(Series s) {
    return s == Series::MeanLtv || s == Series::OutstandingDebtPct || s == Series::UndercollateralizedFraction;
}

std::mt19937_64 streamFor(std::uint64_t masterSeed, std::uint64_t runIndex, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(masterSeed), static_cast<std::uint32_t>(masterSeed >> 32),
                      static_cast<std::uint32_t>(runIndex), static_cast<std::uint32_t>(runIndex >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

PriceGrid gridForRun(const PreparedScenario& scenario, std::size_t runIndex) {
    if (scenario.fixedGrid) return *scenario.fixedGrid;
    const ScenarioConfig& c = scenario.config;
    auto rng = streamFor(c.masterSeed, runIndex, Stream::Prices);
    if (c.priceSource == PriceSource::Synthetic) {
        std::vector<double> vols = c.volTargets.empty() ? c.hourlyVols : c.volTargets;
        for (double& v : vols) v *= c.volMultiplier;
        return syntheticGrid(c.assets, c.initialPrices, vols, c.correlation, rng);
    }
    return applyVolTargets(c, sampleWindow(*scenario.history, c.assets, rng));
}

std::vector<UserAccount> populationForRun(const PreparedScenario& scenario, const PriceGrid& grid,
                                          std::size_t runIndex) {
    if (scenario.fixedPopulation) return *scenario.fixedPopulation;
    auto rng = streamFor(scenario.config.masterSeed, runIndex, Stream::Population);
    const auto prices = grid.at(0);
    return generatePopulation(scenario.config.population, scenario.config.assets, prices, rng);
}

RunMetrics simulateDay(const ScenarioConfig& config, const PriceGrid& grid, std::vector<UserAccount> users,
                       std::vector<LiquidationPlan>* planLog) {
    const std::size_t ticks = grid.ticks();
    if (ticks == 0) throw InvalidInput("price grid is empty");
    if (grid.assetCount() != config.assetCount()) throw InvalidInput("price grid does not match scenario assets");

    RunMetrics m;
    for (auto& s : m.series) s.assign(ticks, 0.0);

    auto describe = [&](std::span<const double> prices, std::vector<PortfolioPoint>& out) {
        out.clear();
        out.reserve(users.size());
        for (const auto& u : users) out.push_back({userLtv(u, prices), portfolioValue(u, prices)});
    };

    std::vector<double> prices = grid.at(0);
    double initialDebt = 0.0;
    for (const auto& u : users) initialDebt += totalLoanValue(u, prices);
    describe(prices, m.initialDistribution);

    PairLiquidity liquidity = config.liquidity;
    double liquidated = 0.0, seized = 0.0, profit = 0.0, slippage = 0.0, trading = 0.0, slippageWeighted = 0.0;
    for (std::size_t t = 0; t < ticks; ++t) {
        for (std::size_t a = 0; a < grid.assetCount(); ++a) prices[a] = grid.prices[a][t];
        const auto plans = liquidationTick(users, prices, config.assets, liquidity, config.liquidation,
                                           static_cast<int>(t));
        for (const auto& p : plans) {
            liquidated += p.repaidAmount;
            seized += p.seizeAmount;
            profit += p.profit;
            // Both swap fees are subtracted in the repay and again in the
            // profit; each series carries its own fee plus that residual.
            slippage += p.slippageFee * 2.0;
            trading += p.tradingFee * 2.0;
            slippageWeighted += p.slippageFee;
        }
        m.liquidations += plans.size();
        if (planLog) planLog->insert(planLog->end(), plans.begin(), plans.end());

        double ltvSum = 0.0, debt = 0.0;
        std::size_t finite = 0, under = 0;
        for (const auto& u : users) {
            const double ltv = userLtv(u, prices);
            if (std::isfinite(ltv)) {
                ltvSum += ltv;
                ++finite;
            }
            if (ltv >= 1.0) ++under;
            debt += totalLoanValue(u, prices);
        }
        m[Series::MeanLtv][t] = finite ? ltvSum / static_cast<double>(finite) : 0.0;
        m[Series::LiquidatedFunds][t] = liquidated;
        m[Series::SeizedCollateral][t] = seized;
        m[Series::OutstandingDebtPct][t] = initialDebt > 0.0 ? 100.0 * debt / initialDebt : 100.0;
        m[Series::LiquidationEvents][t] = static_cast<double>(plans.size());
        m[Series::LiquidatorProfit][t] = profit;
        m[Series::SlippageFees][t] = slippage;
        m[Series::TradingFees][t] = trading;
        m[Series::UndercollateralizedFraction][t] =
            users.empty() ? 0.0 : static_cast<double>(under) / static_cast<double>(users.size());
    }

    m.undercollateralizedFraction = m[Series::UndercollateralizedFraction].back();
    m.finalMeanLtv = m[Series::MeanLtv].back();
    m.meanSlippageFraction = seized > 0.0 ? slippageWeighted / seized : 0.0;
    describe(prices, m.finalDistribution);
    return m;
}

RunMetrics runOnce(const PreparedScenario& scenario, std::size_t runIndex) {
    const PriceGrid grid = gridForRun(scenario, runIndex);
    return simulateDay(scenario.config, grid, populationForRun(scenario, grid, runIndex));
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

EnsembleStats summarize(const std::vector<RunMetrics>& runs) {
    EnsembleStats stats;
    stats.runsCompleted = runs.size();
    if (runs.empty()) return stats;
    const std::size_t ticks = runs.front().series.front().size();
    std::vector<double> column(runs.size());
    for (std::size_t s = 0; s < kSeriesCount; ++s) {
        Band& band = stats.bands[s];
        band.mean.resize(ticks);
        band.lower.resize(ticks);
        band.upper.resize(ticks);
        for (std::size_t t = 0; t < ticks; ++t) {
            for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].series[s][t];
            const double mu = mean(column);
            band.mean[t] = mu;
            // Percentile bands can exclude the mean for very skewed samples;
            // widen them so the band always brackets it.
            band.lower[t] = std::min(quantile(column, 0.025), mu);
            band.upper[t] = std::max(quantile(column, 0.975), mu);
        }
    }
    std::vector<double> fraction, ltv, slip;
    for (const auto& r : runs) {
        fraction.push_back(r.undercollateralizedFraction);
        ltv.push_back(r.finalMeanLtv);
        slip.push_back(r.meanSlippageFraction);
    }
    stats.meanUndercollateralizedFraction = mean(fraction);
    stats.meanFinalLtv = mean(ltv);
    stats.meanSlippageFraction = mean(slip);
    return stats;
}

EnsembleResult runEnsemble(const PreparedScenario& scenario, unsigned threads) {
    const std::size_t n = scenario.config.nRuns;
    std::vector<std::optional<RunMetrics>> results(n);
    std::vector<std::string> errors(n);
    parallelFor(n, threads, [&](std::size_t i) {
        try {
            results[i] = runOnce(scenario, i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    EnsembleResult out;
    for (std::size_t i = 0; i < n; ++i) {
        if (results[i]) out.runs.push_back(std::move(*results[i]));
        else out.failures.push_back(fmt::format("run {}: {}", i, errors[i]));
    }
    if (tooManyFailures(out.failures.size(), n) || out.runs.empty())
        throw Error(fmt::format("{} of {} runs failed; first failure: {}", out.failures.size(), n,
                                out.failures.front()));
    out.stats = summarize(out.runs);
    out.stats.runsFailed = out.failures.size();
    return out;
}

std::vector<PortfolioPoint> aggregateFinalDistribution(const std::vector<RunMetrics>& runs) {
    std::vector<PortfolioPoint> out;
    for (const auto& r : runs) out.insert(out.end(), r.finalDistribution.begin(), r.finalDistribution.end());
    return out;
}

std::vector<PortfolioPoint> aggregateInitialDistribution(const std::vector<RunMetrics>& runs) {
    std::vector<PortfolioPoint> out;
    for (const auto& r : runs) out.insert(out.end(), r.initialDistribution.begin(), r.initialDistribution.end());
    return out;
}

SweepSpec SweepSpec::defaults() {
    SweepSpec spec;
    for (int k = 0; k <= 9; ++k) spec.liqLtvGrid.push_back(std::round((0.50 + 0.05 * k) * 1e6) / 1e6);
    for (int k = 0; k <= 24; ++k) spec.incGrid.push_back(std::round((0.01 + 0.02 * k) * 1e6) / 1e6);
    return spec;
}

ScenarioConfig cellScenario(const ScenarioConfig& base, double liqLtv, double inc, double maxLtvGap) {
    ScenarioConfig c = base;
    for (auto& a : c.assets) {
        a.liqLtv = liqLtv;
        a.maxLtv = std::max(0.0, liqLtv - maxLtvGap);
        a.liquidationIncentive = inc;
    }
    return c;
}

FrontierResult sweepFrontier(const PreparedScenario& base, const SweepSpec& spec, unsigned threads) {
    if (spec.liqLtvGrid.empty() || spec.incGrid.empty()) throw InvalidInput("sweep grids must not be empty");
    if (!(spec.threshold > 0.0 && spec.threshold <= 1.0)) throw InvalidInput("sweep threshold must lie in (0, 1]");
    if (!(spec.maxLtvGap >= 0.0)) throw InvalidInput("maxLtvGap must be >= 0");

    std::vector<double> incs = spec.incGrid;
    std::sort(incs.begin(), incs.end());

    std::vector<PreparedScenario> cells;
    for (double liq : spec.liqLtvGrid) {
        for (double inc : incs) {
            PreparedScenario cell = base;
            cell.config = cellScenario(base.config, liq, inc, spec.maxLtvGap);
            try {
                cell.config.validate();
            } catch (const InvalidInput& e) {
                throw ConfigError(fmt::format("sweep cell (liqLtv {}, inc {}): {}", liq, inc, e.what()));
            }
            cells.push_back(std::move(cell));
        }
    }

    const std::size_t runs = base.config.nRuns;
    std::vector<RunFinal> finals(cells.size() * runs);
    parallelFor(finals.size(), threads, [&](std::size_t job) {
        RunFinal& f = finals[job];
        try {
            const RunMetrics m = runOnce(cells[job / runs], job % runs);
            f.fraction = m.undercollateralizedFraction;
            f.finalLtv = m.finalMeanLtv;
            f.seized = m[Series::SeizedCollateral].back();
            f.slippageWeighted = m.meanSlippageFraction * f.seized;
            f.ok = true;
        } catch (const std::exception& e) {
            f.error = e.what();
        }
    });

    FrontierResult out;
    out.tradingFee = base.config.liquidation.tradingFee;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        SweepCell cell;
        cell.liqLtv = spec.liqLtvGrid[c / incs.size()];
        cell.inc = incs[c % incs.size()];
        std::vector<double> fraction, ltv;
        double slip = 0.0, seized = 0.0;
        std::string firstError;
        for (std::size_t r = 0; r < runs; ++r) {
            const RunFinal& f = finals[c * runs + r];
            if (!f.ok) {
                ++cell.failedRuns;
                if (firstError.empty()) firstError = f.error;
                continue;
            }
            fraction.push_back(f.fraction);
            ltv.push_back(f.finalLtv);
            slip += f.slippageWeighted;
            seized += f.seized;
        }
        cell.runs = fraction.size();
        if (tooManyFailures(cell.failedRuns, runs) || fraction.empty())
            throw Error(fmt::format("sweep cell (liqLtv {}, inc {}): {} of {} runs failed; first failure: {}",
                                    cell.liqLtv, cell.inc, cell.failedRuns, runs, firstError));
        cell.undercollateralizedFraction = mean(fraction);
        cell.finalMeanLtv = mean(ltv);
        cell.meanSlippageFraction = seized > 0.0 ? slip / seized : 0.0;
        out.surface.push_back(cell);
    }

    for (std::size_t l = 0; l < spec.liqLtvGrid.size(); ++l) {
        for (std::size_t k = 0; k < incs.size(); ++k) {
            const SweepCell& cell = out.surface[l * incs.size() + k];
            if (cell.undercollateralizedFraction > spec.threshold) {
                out.frontier.push_back(cell);
                break;
            }
        }
    }
    return out;
}

unsigned defaultThreads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace lendsim
