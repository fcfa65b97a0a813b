#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "lendsim/errors.hpp"
#include "lendsim/population.hpp"
#include "oracles.hpp"

using namespace lendsim;
using Catch::Approx;

namespace {

AssetParams asset(const std::string& sym, double maxLtv = 0.75, double liqLtv = 0.8) {
    AssetParams a;
    a.symbol = sym;
    a.maxLtv = maxLtv;
    a.liqLtv = liqLtv;
    a.liquidationIncentive = 0.08;
    return a;
}

std::vector<AssetParams> fourAssets() {
    return {asset("ETH"), asset("BTC", 0.7, 0.75), asset("MATIC", 0.6, 0.7), asset("USDC", 0.8, 0.85)};
}

}  // namespace

TEST_CASE("unwinding removes same-asset exposure", "[population]") {
    const auto out = unwind({{5.0, 3.0}, {2.0, 4.0}});
    CHECK(out.collateral == std::vector<double>{3.0, 0.0});
    CHECK(out.loans == std::vector<double>{0.0, 1.0});
}

TEST_CASE("rescaling hits the target value and LTV", "[population]") {
    const auto out = rescaleUser({{1.0, 0.0}, {0.0, 1.0}}, {5000.0, 0.6});
    CHECK(out.collateral[0] == Approx(12500.0));
    CHECK(out.loans[1] == Approx(7500.0));

    const auto mixed = rescaleUser({{0.3, 0.2, 0.0}, {0.0, 0.0, 0.1}}, {1250.0, 0.5});
    CHECK(mixed.totalCollateral() - mixed.totalLoans() == Approx(1250.0));
    CHECK(mixed.totalLoans() / mixed.totalCollateral() == Approx(0.5));
    CHECK(mixed.totalCollateral() == Approx(2500.0));
    CHECK(mixed.totalLoans() == Approx(1250.0));
    // Proportions are kept.
    CHECK(mixed.collateral[0] / mixed.collateral[1] == Approx(1.5));

    CHECK_THROWS_AS(rescaleUser({{1.0, 0.0}, {0.0, 0.0}}, {5000.0, 0.6}), InvalidInput);
    CHECK_THROWS_AS(rescaleUser({{1.0, 0.0}, {0.0, 1.0}}, {5000.0, 1.0}), InvalidInput);
}

TEST_CASE("target draws have the configured means and floor", "[population]") {
    PopulationConfig cfg;
    std::mt19937_64 rng(3);
    std::vector<double> portfolios, ltvs;
    for (int k = 0; k < 100000; ++k) {
        const auto t = drawTargets(cfg, rng, 1.0);
        portfolios.push_back(t.portfolio);
        ltvs.push_back(t.ltv);
        REQUIRE(t.ltv >= 0.45);
    }
    CHECK(std::abs(oracle::mean(portfolios) / 5000.0 - 1.0) < 0.02);

    // The clamp at minLtv raises the mean; compare against the clamped
    // lognormal's mean computed by quadrature.
    const double s = 0.25, mu = std::log(0.6) - 0.5 * s * s;
    double clampedMean = 0.0;
    const int steps = 200000;
    for (int k = 0; k < steps; ++k) {
        const double z = -10.0 + 20.0 * (k + 0.5) / steps;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        clampedMean += std::max(std::exp(mu + s * z), 0.45) * pdf * (20.0 / steps);
    }
    CHECK(std::abs(oracle::mean(ltvs) / clampedMean - 1.0) < 0.02);

    PopulationConfig fixed;
    fixed.ltvLogStd = 0.0;
    fixed.portfolioLogStd = 0.0;
    const auto t = drawTargets(fixed, rng, 1.0);
    CHECK(t.ltv == 0.6);
    CHECK(t.portfolio == 5000.0);
    CHECK(drawTargets(fixed, rng, 0.5).ltv == 0.5);

    // Floor and cap crossing: the cap wins by default, the floor on request.
    CHECK(drawTargets(cfg, rng, 0.3).ltv == 0.3);
    PopulationConfig hard = cfg;
    hard.minLtvOverridesCap = true;
    for (int k = 0; k < 100; ++k) CHECK(drawTargets(hard, rng, 0.3).ltv == 0.45);
    for (int k = 0; k < 100; ++k) {
        const double ltv = drawTargets(hard, rng, 0.7).ltv;
        CHECK(ltv >= 0.45);
        CHECK(ltv <= 0.7);
    }
}

TEST_CASE("allocation weights sum to one on each side", "[population]") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 100; ++k) {
        const auto a = allocate(rng, 4, {}, {});
        CHECK(a.totalCollateral() == Approx(1.0));
        CHECK(a.totalLoans() == Approx(1.0));
        for (double w : a.collateral) CHECK(w >= 0.0);
    }
    const std::vector<AssetIndex> coll{0}, loans{1};
    const auto longOnly = allocate(rng, 2, coll, loans);
    CHECK(longOnly.collateral == std::vector<double>{1.0, 0.0});
    CHECK(longOnly.loans == std::vector<double>{0.0, 1.0});
    CHECK_THROWS_AS(allocate(rng, 1, {}, {}), InvalidInput);
}

TEST_CASE("generated accounts hit their targets exactly", "[population]") {
    const auto assets = fourAssets();
    const std::vector<double> prices{2000.0, 30000.0, 0.5, 1.0};
    PopulationConfig cfg;
    cfg.nUsers = 500;
    std::mt19937_64 rng(5);
    const auto users = generatePopulation(cfg, assets, prices, rng);
    REQUIRE(users.size() == 500);

    // Replay the draws with an identical stream to recover the targets.
    std::mt19937_64 replay(5);
    for (const auto& u : users) {
        Allocation alloc;
        do {
            alloc = unwind(allocate(replay, 4, {}, {}));
        } while (!(alloc.totalCollateral() > 1e-12 && alloc.totalLoans() > 1e-12));
        const double cap = std::min(weightedThreshold(alloc.collateral, assets, false),
                                    weightedThreshold(alloc.collateral, assets, true) - 1e-9);
        const auto t = drawTargets(cfg, replay, cap);

        double c = 0.0, l = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            c += u.collateralUnits[i] * prices[i];
            l += u.loanUnits[i] * prices[i];
            CHECK(std::min(u.collateralUnits[i], u.loanUnits[i]) == 0.0);
        }
        CHECK(oracle::relErr(c - l, t.portfolio) < 1e-9);
        CHECK(oracle::relErr(l / c, t.ltv) < 1e-9);
        CHECK(portfolioValue(u, prices) == Approx(t.portfolio).epsilon(1e-9));
        CHECK_FALSE(isLiquidatable(u, prices, assets));
        CHECK(userLtv(u, prices) <= userMaxLtv(u, prices, assets) + 1e-12);
    }

    std::mt19937_64 again(5);
    CHECK(generatePopulation(cfg, assets, prices, again)[17].collateralUnits == users[17].collateralUnits);
}

TEST_CASE("long-only populations hold one collateral and one loan asset", "[population]") {
    const std::vector<AssetParams> assets{asset("MATIC"), asset("USDC")};
    PopulationConfig cfg;
    cfg.nUsers = 50;
    cfg.collateralAssets = {0};
    cfg.loanAssets = {1};
    std::mt19937_64 rng(6);
    const std::vector<double> prices{1.5, 1.0};
    for (const auto& u : generatePopulation(cfg, assets, prices, rng)) {
        CHECK(u.collateralUnits[1] == 0.0);
        CHECK(u.loanUnits[0] == 0.0);
        CHECK(u.collateralUnits[0] > 0.0);
        CHECK(u.loanUnits[1] > 0.0);
    }
}

TEST_CASE("a floor above the liquidation LTV starts users liquidatable", "[population]") {
    const std::vector<AssetParams> assets{asset("MATIC", 0.25, 0.3), asset("USDC", 0.25, 0.3)};
    PopulationConfig cfg;
    cfg.nUsers = 30;
    cfg.collateralAssets = {0};
    cfg.loanAssets = {1};
    cfg.minLtvOverridesCap = true;
    std::mt19937_64 rng(9);
    const std::vector<double> prices{1.0, 1.0};
    for (const auto& u : generatePopulation(cfg, assets, prices, rng)) {
        CHECK(userLtv(u, prices) == Approx(0.45).epsilon(1e-12));
        CHECK(isLiquidatable(u, prices, assets));
    }
    cfg.minLtvOverridesCap = false;
    for (const auto& u : generatePopulation(cfg, assets, prices, rng)) CHECK(userLtv(u, prices) < 0.25 + 1e-12);
}

TEST_CASE("impossible allocations fail after bounded redraws", "[population]") {
    const std::vector<AssetParams> assets{asset("MATIC"), asset("USDC")};
    PopulationConfig cfg;
    cfg.nUsers = 3;
    cfg.collateralAssets = {0};
    cfg.loanAssets = {0};
    std::mt19937_64 rng(7);
    const std::vector<double> prices{1.0, 1.0};
    CHECK_THROWS_AS(generatePopulation(cfg, assets, prices, rng), GenerationError);

    PopulationConfig bad;
    bad.meanLtv = 1.2;
    CHECK_THROWS_AS(generatePopulation(bad, assets, prices, rng), InvalidInput);
    bad = PopulationConfig{};
    bad.loanAssets = {5};
    CHECK_THROWS_AS(generatePopulation(bad, assets, prices, rng), InvalidInput);
}

TEST_CASE("population CSV round-trips", "[population]") {
    const auto assets = fourAssets();
    const std::vector<double> prices{2000.0, 30000.0, 0.5, 1.0};
    PopulationConfig cfg;
    cfg.nUsers = 20;
    std::mt19937_64 rng(8);
    const auto users = generatePopulation(cfg, assets, prices, rng);
    std::stringstream csv;
    writePopulationCsv(users, assets, csv);
    const auto back = readPopulationCsv(csv, assets);
    REQUIRE(back.size() == users.size());
    for (std::size_t k = 0; k < users.size(); ++k) {
        CHECK(back[k].collateralUnits == users[k].collateralUnits);
        CHECK(back[k].loanUnits == users[k].loanUnits);
    }

    std::istringstream noHeader("0,ETH,1,0\n");
    CHECK_THROWS_AS(readPopulationCsv(noHeader, assets), InvalidInput);
    std::istringstream badAsset("userId,asset,collateralUnits,loanUnits\n0,DOGE,1,0\n");
    CHECK_THROWS_WITH(readPopulationCsv(badAsset, assets), Catch::Matchers::ContainsSubstring("line 2"));
    std::istringstream negative("userId,asset,collateralUnits,loanUnits\n0,ETH,-1,0\n");
    CHECK_THROWS_AS(readPopulationCsv(negative, assets), InvalidInput);
}
