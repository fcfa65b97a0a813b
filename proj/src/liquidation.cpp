#include "lendsim/liquidation.hpp"

#include <algorithm>
#include <cmath>

#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

constexpr double kRelativeSlack = 1e-9;
constexpr double kDustFraction = 1e-12;
constexpr int kMaxRepeats = 10000;

// Seize amount that repays exactly `repayCap`, or the peak of the repay
// curve when the cap is out of reach for this pair.
double seizeForCap(double repayCap, AssetIndex j, AssetIndex i, double inc, const PairLiquidity& liquidity,
                   double tradingFee) {
    if (repayCap >= maxRepayable(j, i, inc, liquidity, tradingFee))
        return repayPeakSeize(j, i, inc, liquidity, tradingFee);
    return seizeForRepay(repayCap, j, i, inc, liquidity, tradingFee);
}

double reduceUnits(double units, double removed) {
    const double left = units - removed;
    if (left <= kDustFraction * units) return 0.0;
    return left;
}

}  // namespace

std::vector<std::size_t> findLiquidatable(std::span<const UserAccount> users, std::span<const double> prices,
                                          std::span<const AssetParams> assets, ThresholdDenominator denominator) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < users.size(); ++k) {
        if (isLiquidatable(users[k], prices, assets, denominator)) out.push_back(k);
    }
    return out;
}

std::optional<LiquidationPlan> bestPlan(const UserAccount& user, std::size_t userId, std::span<const double> prices,
                                        std::span<const AssetParams> assets, const PairLiquidity& liquidity,
                                        double tradingFee, int tick) {
    const std::size_t n = user.size();
    std::optional<LiquidationPlan> best;
    for (AssetIndex j = 0; j < n; ++j) {
        const double collateral = user.collateralUnits[j] * prices[j];
        if (!(collateral > 0.0)) continue;
        const double inc = assets[j].liquidationIncentive;
        for (AssetIndex i = 0; i < n; ++i) {
            if (i == j) continue;  // same-asset repayment carries no incentive
            const double loan = user.loanUnits[i] * prices[i];
            if (!(loan > 0.0)) continue;

            const double repayCap = assets[i].closeFactor * loan;
            double seize = std::min({optimalSeize(j, i, inc, liquidity, tradingFee).seize, collateral,
                                     seizeForCap(repayCap, j, i, inc, liquidity, tradingFee)});
            if (!(seize > 0.0)) continue;
            const double profit = liquidatorProfit(seize, j, i, inc, liquidity, tradingFee);
            if (!(profit > 0.0)) continue;
            if (best && !(profit > best->profit)) continue;

            LiquidationPlan plan;
            plan.userId = userId;
            plan.collateralAsset = j;
            plan.loanAsset = i;
            plan.seizeAmount = seize;
            plan.repaidAmount = repayForSeize(seize, j, i, inc, liquidity, tradingFee);
            plan.profit = profit;
            plan.slippageFraction = slippageFraction(seize, j, i, liquidity);
            plan.slippageFee = plan.slippageFraction * seize;
            plan.tradingFee = tradingFee * seize;
            plan.tick = tick;
            best = plan;
        }
    }
    return best;
}

UserAccount applyPlan(const UserAccount& user, const LiquidationPlan& plan, std::span<const double> prices,
                      std::span<const AssetParams> assets) {
    const std::size_t n = user.size();
    if (plan.collateralAsset >= n || plan.loanAsset >= n) throw InvalidInput("plan refers to an unknown asset");
    if (plan.seizeAmount < 0.0 || plan.repaidAmount < 0.0) throw InvalidInput("plan amounts must be >= 0");
    if (plan.seizeAmount == 0.0 && plan.repaidAmount == 0.0) return user;
    checkPrices(prices);

    const AssetIndex j = plan.collateralAsset;
    const AssetIndex i = plan.loanAsset;
    const double collateral = user.collateralUnits[j] * prices[j];
    const double loan = user.loanUnits[i] * prices[i];
    if (plan.seizeAmount > collateral * (1.0 + kRelativeSlack))
        throw StalePlan("plan seizes more collateral than the user holds at current prices");
    if (plan.repaidAmount > assets[i].closeFactor * loan * (1.0 + kRelativeSlack))
        throw StalePlan("plan repays more than the close factor allows at current prices");

    UserAccount out = user;
    out.collateralUnits[j] = reduceUnits(user.collateralUnits[j], plan.seizeAmount / prices[j]);
    out.loanUnits[i] = reduceUnits(user.loanUnits[i], plan.repaidAmount / prices[i]);
    return out;
}

std::vector<LiquidationPlan> liquidationTick(std::vector<UserAccount>& users, std::span<const double> prices,
                                             std::span<const AssetParams> assets, PairLiquidity& liquidity,
                                             const LiquidationSettings& settings, int tick) {
    std::vector<LiquidationPlan> plans;
    for (std::size_t k : findLiquidatable(users, prices, assets, settings.denominator)) {
        for (int round = 0; round < kMaxRepeats; ++round) {
            auto plan = bestPlan(users[k], k, prices, assets, liquidity, settings.tradingFee, tick);
            if (!plan) break;
            users[k] = applyPlan(users[k], *plan, prices, assets);
            if (settings.liquidityDepletion) {
                double& volume = liquidity.sellSideVolume[plan->collateralAsset][plan->loanAsset];
                volume = std::max(volume - plan->seizeAmount, 1.0);
            }
            plans.push_back(*plan);
            if (!settings.repeatWithinTick) break;
            if (!isLiquidatable(users[k], prices, assets, settings.denominator)) break;
        }
    }
    return plans;
}

}  // namespace lendsim
