#pragma once

#include "lendsim/protocol.hpp"

namespace lendsim {

// Swap economics for a liquidator who seizes `seize` numeraire worth of
// collateral asset j and sells it into loan asset i to repay the loan.
//
// Fees: incentive `inc` (granted by the protocol on the collateral asset),
// slippage sigma(a) from the pair's liquidity, and a constant trading fee t.
//   repay  p(a) = (1 - inc - sigma(a) - t) * a
//   profit      = (inc - sigma(a) - t) * a
// With t = 0 these are exactly the textbook liquidator relations.

struct SwapQuote {
    AssetIndex pairFrom = 0;
    AssetIndex pairTo = 0;
    double seizeAmount = 0.0;
    double slippageFraction = 0.0;
    double tradingFeeFraction = 0.0;
    double repaidAmount = 0.0;
    double liquidatorProfit = 0.0;
};

double slippageFraction(double seize, AssetIndex from, AssetIndex to, const PairLiquidity& liquidity);

/// Loan value repaid by selling `seize` of the collateral. Same-asset
/// "swaps" repay one for one. Throws InfeasibleSwap once fees reach 1.
double repayForSeize(double seize, AssetIndex from, AssetIndex to, double incentive,
                     const PairLiquidity& liquidity, double tradingFee = 0.0);

/// Inverse of repayForSeize: the smallest seize amount that repays `repay`.
/// Uses the closed form for gamma == 1 and root finding otherwise.
/// Throws InfeasibleRepay when `repay` is beyond the reachable maximum.
double seizeForRepay(double repay, AssetIndex from, AssetIndex to, double incentive,
                     const PairLiquidity& liquidity, double tradingFee = 0.0);

/// Root-finding inverse valid for any slippage exponent.
double seizeForRepayNumeric(double repay, AssetIndex from, AssetIndex to, double incentive,
                            const PairLiquidity& liquidity, double tradingFee = 0.0);

/// Largest repay amount any seize can achieve for the pair:
/// (1 - inc - t)^2 / (4 s~) for gamma == 1; +inf without market impact.
double maxRepayable(AssetIndex from, AssetIndex to, double incentive, const PairLiquidity& liquidity,
                    double tradingFee = 0.0);

/// Seize amount at which repayForSeize peaks (and beyond which it falls).
double repayPeakSeize(AssetIndex from, AssetIndex to, double incentive, const PairLiquidity& liquidity,
                      double tradingFee = 0.0);

struct OptimalSeize {
    double seize = 0.0;  // +inf when market impact never binds
    double repay = 0.0;
};

/// Profit-maximizing seize amount: (inc - t) / (2 s~) for gamma == 1,
/// V * ((inc - t) / ((gamma + 1) s))^(1/gamma) in general.
OptimalSeize optimalSeize(AssetIndex from, AssetIndex to, double incentive, const PairLiquidity& liquidity,
                          double tradingFee = 0.0);

/// May be negative; callers reject non-positive plans.
double liquidatorProfit(double seize, AssetIndex from, AssetIndex to, double incentive,
                        const PairLiquidity& liquidity, double tradingFee = 0.0);

SwapQuote quoteSwap(double seize, AssetIndex from, AssetIndex to, double incentive,
                    const PairLiquidity& liquidity, double tradingFee = 0.0);

}  // namespace lendsim
