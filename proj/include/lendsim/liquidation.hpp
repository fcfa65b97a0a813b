#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lendsim/execution.hpp"
#include "lendsim/protocol.hpp"

namespace lendsim {

/// One executed (or proposed) liquidator action. Amounts are numeraire
/// values at the prices of the tick it was computed for.
struct LiquidationPlan {
    std::size_t userId = 0;
    AssetIndex collateralAsset = 0;
    AssetIndex loanAsset = 0;
    double seizeAmount = 0.0;
    double repaidAmount = 0.0;
    double profit = 0.0;
    double slippageFraction = 0.0;
    double slippageFee = 0.0;  // sigma * a
    double tradingFee = 0.0;   // t * a
    int tick = 0;

    // Seized value not explained by profit + slippageFee + tradingFee:
    // repay and profit both subtract the swap fees, so (sigma + t) * a is
    // counted twice. a - p == profit + slippageFee + tradingFee + feeResidual().
    double feeResidual() const { return slippageFee + tradingFee; }
};

struct LiquidationSettings {
    double tradingFee = 0.003;
    ThresholdDenominator denominator = ThresholdDenominator::Collateral;
    bool repeatWithinTick = false;    // repeat until healthy instead of one plan per tick
    bool liquidityDepletion = false;  // executed swaps consume the pair's sell-side volume
};

/// Users with LTV above their liquidation LTV and outstanding loans,
/// excluding frozen accounts. Ascending ids.
std::vector<std::size_t> findLiquidatable(std::span<const UserAccount> users, std::span<const double> prices,
                                          std::span<const AssetParams> assets,
                                          ThresholdDenominator denominator = ThresholdDenominator::Collateral);

/// The liquidator's best single-pair action for one user: over every
/// (collateral j, loan i) pair with positive balances, seize
///   a* = min(optimal seize, collateral value of j, seize repaying closeFactor_i * l_i)
/// and keep the pair with the largest positive profit. Exact ties go to the
/// lowest (j, i). Returns nullopt when no pair is profitable.
std::optional<LiquidationPlan> bestPlan(const UserAccount& user, std::size_t userId, std::span<const double> prices,
                                        std::span<const AssetParams> assets, const PairLiquidity& liquidity,
                                        double tradingFee, int tick = 0);

/// Applies a plan at the given prices. Throws StalePlan if the plan no
/// longer satisfies the collateral or close-factor caps.
UserAccount applyPlan(const UserAccount& user, const LiquidationPlan& plan, std::span<const double> prices,
                      std::span<const AssetParams> assets);

/// One price tick of liquidations. Each liquidatable user gets at most one
/// plan unless settings.repeatWithinTick is set. Returned plans are ordered
/// by user id.
std::vector<LiquidationPlan> liquidationTick(std::vector<UserAccount>& users, std::span<const double> prices,
                                             std::span<const AssetParams> assets, PairLiquidity& liquidity,
                                             const LiquidationSettings& settings, int tick);

}  // namespace lendsim
