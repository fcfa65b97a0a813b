#include <catch_amalgamated.hpp>

#include "lendsim/errors.hpp"
#include "lendsim/harness.hpp"
#include "oracles.hpp"

using namespace lendsim;
using Catch::Approx;

namespace {

// MATIC/USDC, long MATIC against USDC loans.
ScenarioConfig smallScenario(double vol = 0.02, std::size_t runs = 8, std::size_t users = 60) {
    ScenarioConfig c;
    AssetParams m;
    m.symbol = "MATIC";
    m.maxLtv = 0.75;
    m.liqLtv = 0.8;
    m.liquidationIncentive = 0.08;
    AssetParams u = m;
    u.symbol = "USDC";
    u.isNumerairePegged = true;
    c.assets = {m, u};
    c.liquidity = PairLiquidity::uniform(2, 2e7);
    c.population.nUsers = users;
    c.population.collateralAssets = {0};
    c.population.loanAssets = {1};
    c.initialPrices = {1.5, 1.0};
    c.hourlyVols = {vol, 0.0};
    c.correlation = {{1, 0}, {0, 1}};
    c.nRuns = runs;
    c.masterSeed = 11;
    return c;
}

bool sameSeries(const RunMetrics& a, const RunMetrics& b) {
    for (std::size_t s = 0; s < kSeriesCount; ++s) {
        if (a.series[s] != b.series[s]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("series metadata", "[harness]") {
    CHECK(seriesName(Series::MeanLtv) == "mean_ltv");
    CHECK(seriesName(Series::UndercollateralizedFraction) == "undercollateralized_fraction");
    CHECK(isCumulative(Series::LiquidatedFunds));
    CHECK_FALSE(isCumulative(Series::LiquidationEvents));
    CHECK(isFractional(Series::OutstandingDebtPct));
    CHECK_FALSE(isFractional(Series::SeizedCollateral));
}

TEST_CASE("scenario validation", "[harness]") {
    CHECK_NOTHROW(smallScenario().validate());
    auto c = smallScenario();
    c.assets.pop_back();
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = smallScenario();
    c.assets[1].symbol = "MATIC";
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = smallScenario();
    c.initialPrices[1] = 1.01;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = smallScenario();
    c.nRuns = 0;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = smallScenario();
    c.priceSource = PriceSource::Sampled;
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    c = smallScenario();
    c.replayWorstDrawdown = "DOGE";
    CHECK_THROWS_AS(c.validate(), InvalidInput);
    CHECK_THROWS_AS(prepare(c), ConfigError);
    c = smallScenario();
    c.priceSource = PriceSource::HistoricalReplay;
    c.historyPath = "/nonexistent.csv";
    CHECK_THROWS_AS(prepare(c), ConfigError);
}

TEST_CASE("run streams are reproducible and independent", "[harness]") {
    auto a = streamFor(7, 3, Stream::Prices), b = streamFor(7, 3, Stream::Prices);
    CHECK(a() == b());
    auto p = streamFor(7, 3, Stream::Prices), q = streamFor(7, 3, Stream::Population), r = streamFor(7, 4, Stream::Prices);
    const auto x = p();
    CHECK(x != q());
    CHECK(x != r());
    auto hi = streamFor(7ULL << 32, 3, Stream::Prices);
    auto lo = streamFor(7, 3, Stream::Prices);
    CHECK(hi() != lo());
}

TEST_CASE("flat prices liquidate nobody", "[harness]") {
    const auto prepared = prepare(smallScenario(0.0));
    const auto res = runEnsemble(prepared, 2);
    CHECK(res.failures.empty());
    for (const auto& run : res.runs) {
        CHECK(run.liquidations == 0);
        CHECK(run.undercollateralizedFraction == 0.0);
        CHECK(run[Series::OutstandingDebtPct].back() == Approx(100.0));
        CHECK(run[Series::MeanLtv].front() == run[Series::MeanLtv].back());
        REQUIRE(run.initialDistribution.size() == run.finalDistribution.size());
        for (std::size_t k = 0; k < run.initialDistribution.size(); ++k) {
            CHECK(run.initialDistribution[k].ltv == run.finalDistribution[k].ltv);
            CHECK(run.initialDistribution[k].portfolio == run.finalDistribution[k].portfolio);
        }
    }
    const auto init = aggregateInitialDistribution(res.runs);
    const auto fin = aggregateFinalDistribution(res.runs);
    CHECK(init.size() == 8 * 60);
    CHECK(fin.size() == init.size());
}

TEST_CASE("metrics follow the executed plans", "[harness]") {
    auto c = smallScenario(0.05);
    const auto prepared = prepare(c);
    const PriceGrid grid = gridForRun(prepared, 0);
    auto users = populationForRun(prepared, grid, 0);
    std::vector<LiquidationPlan> log;
    const auto m = simulateDay(c, grid, users, &log);
    REQUIRE(grid.ticks() == kMinutesPerDay);

    double repaid = 0, seized = 0, profit = 0, slip = 0, trade = 0, weighted = 0;
    std::vector<double> events(grid.ticks(), 0.0);
    for (const auto& p : log) {
        repaid += p.repaidAmount;
        seized += p.seizeAmount;
        profit += p.profit;
        slip += p.slippageFee;
        trade += p.tradingFee;
        weighted += p.slippageFraction * p.seizeAmount;
        events[static_cast<std::size_t>(p.tick)] += 1.0;
    }
    CHECK(m.liquidations == log.size());
    CHECK(m[Series::LiquidatedFunds].back() == Approx(repaid));
    CHECK(m[Series::SeizedCollateral].back() == Approx(seized));
    CHECK(m[Series::LiquidatorProfit].back() == Approx(profit));
    CHECK(m[Series::SlippageFees].back() == Approx(2 * slip));
    CHECK(m[Series::TradingFees].back() == Approx(2 * trade));
    CHECK(m[Series::LiquidationEvents] == events);
    // Seized value splits exactly into repayment, profit and booked fees.
    CHECK(seized - repaid == Approx(profit + 2 * slip + 2 * trade));
    if (seized > 0) CHECK(m.meanSlippageFraction == Approx(weighted / seized));

    // Independent recomputation of the final-tick fractional metrics.
    std::vector<UserAccount> after = users;
    for (const auto& p : log) {
        after[p.userId] = applyPlan(after[p.userId], p, grid.at(static_cast<std::size_t>(p.tick)), c.assets);
    }
    const auto last = grid.at(grid.ticks() - 1);
    double ltvSum = 0, debt0 = 0, debt1 = 0;
    std::size_t finite = 0, under = 0;
    for (std::size_t k = 0; k < after.size(); ++k) {
        double cv = 0, lv = 0;
        for (std::size_t i = 0; i < 2; ++i) {
            cv += after[k].collateralUnits[i] * last[i];
            lv += after[k].loanUnits[i] * last[i];
            debt0 += users[k].loanUnits[i] * grid.prices[i][0];
        }
        debt1 += lv;
        if (cv > 0) {
            ltvSum += oracle::ltv(lv, cv);
            ++finite;
        }
        if (cv == 0 ? lv > 0 : lv / cv >= 1.0) ++under;
    }
    CHECK(m.finalMeanLtv == Approx(finite ? ltvSum / finite : 0.0).epsilon(1e-12));
    CHECK(m[Series::OutstandingDebtPct].back() == Approx(100.0 * debt1 / debt0).epsilon(1e-12));
    CHECK(m.undercollateralizedFraction == Approx(static_cast<double>(under) / after.size()));
}

TEST_CASE("ensembles are deterministic and thread-count invariant", "[harness]") {
    const auto prepared = prepare(smallScenario(0.03, 6));
    const auto one = runEnsemble(prepared, 1);
    const auto four = runEnsemble(prepared, 4);
    const auto again = runEnsemble(prepared, 1);
    REQUIRE(one.runs.size() == 6);
    for (std::size_t r = 0; r < 6; ++r) {
        CHECK(sameSeries(one.runs[r], four.runs[r]));
        CHECK(sameSeries(one.runs[r], again.runs[r]));
    }
    CHECK(one.stats.meanUndercollateralizedFraction == four.stats.meanUndercollateralizedFraction);

    // Run i of a larger ensemble is run i of a smaller one.
    auto bigger = smallScenario(0.03, 9);
    const auto big = runEnsemble(prepare(bigger), 2);
    CHECK(sameSeries(big.runs[3], one.runs[3]));

    auto reseeded = smallScenario(0.03, 6);
    reseeded.masterSeed = 12;
    CHECK_FALSE(sameSeries(runEnsemble(prepare(reseeded), 1).runs[0], one.runs[0]));
}

TEST_CASE("bands", "[harness]") {
    const auto res = runEnsemble(prepare(smallScenario(0.04, 12)), 2);
    for (std::size_t s = 0; s < kSeriesCount; ++s) {
        const auto& band = res.stats.bands[s];
        for (std::size_t t = 0; t < band.mean.size(); ++t) {
            CHECK(band.lower[t] <= band.mean[t]);
            CHECK(band.mean[t] <= band.upper[t]);
        }
        if (isCumulative(static_cast<Series>(s))) {
            for (const auto& run : res.runs) {
                const auto& v = run.series[s];
                for (std::size_t t = 1; t < v.size(); ++t) CHECK(v[t] >= v[t - 1]);
            }
        }
    }
    // The mean band is the ensemble average of each tick.
    const auto& lf = res.stats[Series::LiquidatedFunds];
    double sum = 0;
    for (const auto& run : res.runs) sum += run[Series::LiquidatedFunds][700];
    CHECK(lf.mean[700] == Approx(sum / res.runs.size()));

    const auto single = runEnsemble(prepare(smallScenario(0.04, 1)), 1);
    for (const auto& band : single.stats.bands) {
        CHECK(band.lower == band.mean);
        CHECK(band.upper == band.mean);
    }
}

TEST_CASE("type-7 quantiles", "[harness]") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({5, 1, 4, 2, 3}, 0.025) == Approx(1.1));
    CHECK(quantile({7}, 0.975) == 7.0);
    CHECK_THROWS_AS(quantile({}, 0.5), InvalidInput);
}

TEST_CASE("sweep grids and frontier extraction", "[harness]") {
    const auto defaults = SweepSpec::defaults();
    CHECK(defaults.liqLtvGrid.size() == 10);
    CHECK(defaults.liqLtvGrid.front() == 0.5);
    CHECK(defaults.liqLtvGrid.back() == 0.95);
    CHECK(defaults.incGrid.size() == 25);
    CHECK(defaults.incGrid.back() == 0.49);

    const auto cell = cellScenario(smallScenario(), 0.7, 0.12, 0.05);
    for (const auto& a : cell.assets) {
        CHECK(a.liqLtv == 0.7);
        CHECK(a.maxLtv == Approx(0.65));
        CHECK(a.liquidationIncentive == 0.12);
    }

    const auto prepared = prepare(smallScenario(0.03, 4, 40));
    SweepSpec spec;
    spec.liqLtvGrid = {0.5};
    spec.incGrid = {0.05};
    const auto safe = sweepFrontier(prepared, spec, 2);
    REQUIRE(safe.surface.size() == 1);
    CHECK(safe.surface[0].undercollateralizedFraction == 0.0);
    CHECK(safe.surface[0].runs == 4);
    CHECK(safe.frontier.empty());

    // A huge incentive at a high threshold pushes users under water; the
    // frontier cell is the first inc over the threshold.
    spec.liqLtvGrid = {0.9};
    spec.incGrid = {0.4, 0.02, 0.3};
    const auto res = sweepFrontier(prepared, spec, 2);
    REQUIRE(res.surface.size() == 3);
    CHECK(res.surface[0].inc == 0.02);
    CHECK(res.surface[2].inc == 0.4);
    CHECK(res.surface[2].undercollateralizedFraction > 0.0);
    REQUIRE(res.frontier.size() == 1);
    for (const auto& c : res.surface) {
        if (c.inc < res.frontier[0].inc) CHECK(c.undercollateralizedFraction <= spec.threshold);
    }

    spec.threshold = 1.0;
    CHECK(sweepFrontier(prepared, spec, 2).frontier.empty());
    spec.threshold = 0.0;
    CHECK_THROWS_AS(sweepFrontier(prepared, spec, 1), InvalidInput);
    spec.threshold = 0.01;
    spec.incGrid.clear();
    CHECK_THROWS_AS(sweepFrontier(prepared, spec, 1), InvalidInput);
    spec.incGrid = {0.05};
    spec.liqLtvGrid = {1.2};
    CHECK_THROWS_AS(sweepFrontier(prepared, spec, 1), ConfigError);
}

TEST_CASE("sweep results do not depend on the thread count", "[harness]") {
    const auto prepared = prepare(smallScenario(0.05, 3, 30));
    SweepSpec spec;
    spec.liqLtvGrid = {0.7, 0.85};
    spec.incGrid = {0.1, 0.25};
    const auto a = sweepFrontier(prepared, spec, 1);
    const auto b = sweepFrontier(prepared, spec, 3);
    REQUIRE(a.surface.size() == b.surface.size());
    for (std::size_t k = 0; k < a.surface.size(); ++k) {
        CHECK(a.surface[k].undercollateralizedFraction == b.surface[k].undercollateralizedFraction);
        CHECK(a.surface[k].finalMeanLtv == b.surface[k].finalMeanLtv);
    }
}
