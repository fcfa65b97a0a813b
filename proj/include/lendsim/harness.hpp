#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lendsim/liquidation.hpp"
#include "lendsim/population.hpp"
#include "lendsim/prices.hpp"

namespace lendsim {

enum class PriceSource { Synthetic, Sampled, HistoricalReplay };

struct ScenarioConfig {
    std::vector<AssetParams> assets;
    PairLiquidity liquidity;
    PopulationConfig population;

    PriceSource priceSource = PriceSource::Synthetic;
    std::vector<double> initialPrices;  // synthetic grids start here
    std::vector<double> hourlyVols;     // synthetic baseline vols
    std::vector<std::vector<double>> correlation;
    std::vector<double> volTargets;  // absolute hourly targets; empty means baseline / realized
    double volMultiplier = 1.0;     // applied on top of the targets
    std::string historyPath;
    std::string replayDate;           // YYYY-MM-DD, historical replay only
    std::string replayWorstDrawdown;  // asset symbol, historical replay only
    std::string populationPath;       // fixed population for every run

    std::size_t nRuns = 50;
    std::uint64_t masterSeed = 0;
    LiquidationSettings liquidation;

    std::size_t assetCount() const { return assets.size(); }
    std::optional<AssetIndex> indexOf(std::string_view symbol) const;

    /// Throws InvalidInput describing the first inconsistency.
    void validate() const;
};

/// A scenario with its shared, read-only inputs resolved: loaded history,
/// the fixed replay grid and an optional fixed population.
struct PreparedScenario {
    ScenarioConfig config;
    std::shared_ptr<const PriceHistory> history;
    std::shared_ptr<const PriceGrid> fixedGrid;
    std::shared_ptr<const std::vector<UserAccount>> fixedPopulation;
};

/// Validates and loads everything a run needs. Input problems surface as
/// ConfigError.
PreparedScenario prepare(const ScenarioConfig& config);

enum class Series : std::size_t {
    MeanLtv,
    LiquidatedFunds,  // cumulative loan value repaid
    SeizedCollateral,  // cumulative collateral value seized
    OutstandingDebtPct,
    LiquidationEvents,  // per tick
    LiquidatorProfit,
    SlippageFees,
    TradingFees,
    UndercollateralizedFraction,
};
inline constexpr std::size_t kSeriesCount = 9;

std::string_view seriesName(Series s);
bool isCumulative(Series s);
/// Ratios that do not scale with portfolio size.
bool isFractional(Series s);

struct PortfolioPoint {
    double ltv = 0.0;
    double portfolio = 0.0;
};

struct RunMetrics {
    std::array<std::vector<double>, kSeriesCount> series;
    double undercollateralizedFraction = 0.0;
    double finalMeanLtv = 0.0;
    double meanSlippageFraction = 0.0;  // seize-weighted over executed plans
    std::size_t liquidations = 0;
    std::vector<PortfolioPoint> initialDistribution;
    std::vector<PortfolioPoint> finalDistribution;

    const std::vector<double>& operator[](Series s) const { return series[static_cast<std::size_t>(s)]; }
    std::vector<double>& operator[](Series s) { return series[static_cast<std::size_t>(s)]; }
};

enum class Stream : std::uint64_t { Prices = 1, Population = 2 };

/// Generator for one run's stream; a pure function of its arguments.
std::mt19937_64 streamFor(std::uint64_t masterSeed, std::uint64_t runIndex, Stream stream);

/// The price grid run `runIndex` would use.
PriceGrid gridForRun(const PreparedScenario& scenario, std::size_t runIndex);
std::vector<UserAccount> populationForRun(const PreparedScenario& scenario, const PriceGrid& grid,
                                          std::size_t runIndex);

/// One full day: population and grid from the run's streams, then
/// liquidations and metrics at every minute tick.
RunMetrics runOnce(const PreparedScenario& scenario, std::size_t runIndex);

/// Same, on an explicit grid and population.
RunMetrics simulateDay(const ScenarioConfig& config, const PriceGrid& grid, std::vector<UserAccount> users,
                       std::vector<LiquidationPlan>* planLog = nullptr);

struct Band {
    std::vector<double> mean;
    std::vector<double> lower;  // 2.5% empirical percentile
    std::vector<double> upper;  // 97.5% empirical percentile
};

struct EnsembleStats {
    std::array<Band, kSeriesCount> bands;
    std::size_t runsCompleted = 0;
    std::size_t runsFailed = 0;
    double meanUndercollateralizedFraction = 0.0;
    double meanFinalLtv = 0.0;
    double meanSlippageFraction = 0.0;

    const Band& operator[](Series s) const { return bands[static_cast<std::size_t>(s)]; }
};

struct EnsembleResult {
    EnsembleStats stats;
    std::vector<RunMetrics> runs;  // successful runs, in run-index order
    std::vector<std::string> failures;
};

/// Type-7 (linear interpolation) quantile of unsorted values.
double quantile(std::vector<double> values, double q);

EnsembleStats summarize(const std::vector<RunMetrics>& runs);

/// nRuns independent runs over a worker pool. Results do not depend on the
/// thread count. Throws Error when more than 1% of runs fail.
EnsembleResult runEnsemble(const PreparedScenario& scenario, unsigned threads);

/// Pooled per-user (LTV, net value) points across runs.
std::vector<PortfolioPoint> aggregateFinalDistribution(const std::vector<RunMetrics>& runs);
std::vector<PortfolioPoint> aggregateInitialDistribution(const std::vector<RunMetrics>& runs);

struct SweepSpec {
    std::vector<double> liqLtvGrid;
    std::vector<double> incGrid;
    double threshold = 0.01;
    double maxLtvGap = 0.05;  // cell maxLtv = liqLtv - gap

    static SweepSpec defaults();
};

struct SweepCell {
    double liqLtv = 0.0;
    double inc = 0.0;
    double undercollateralizedFraction = 0.0;
    double finalMeanLtv = 0.0;
    double meanSlippageFraction = 0.0;
    std::size_t runs = 0;
    std::size_t failedRuns = 0;

    double theoryInc() const { return 1.0 - liqLtv; }
};

struct FrontierResult {
    std::vector<SweepCell> surface;   // liqLtv-major, inc ascending
    std::vector<SweepCell> frontier;  // first cell above threshold per liqLtv column
    double tradingFee = 0.0;
};

/// Applies (liqLtv, inc) to every asset of the template.
ScenarioConfig cellScenario(const ScenarioConfig& base, double liqLtv, double inc, double maxLtvGap);

FrontierResult sweepFrontier(const PreparedScenario& base, const SweepSpec& spec, unsigned threads);

/// Runs f(i) for i in [0, n) over up to `threads` workers.
template <class F>
void parallelFor(std::size_t n, unsigned threads, F&& f);

unsigned defaultThreads();

}  // namespace lendsim

#include "lendsim/detail/parallel.hpp"
