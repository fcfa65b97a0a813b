#include "lendsim/execution.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool isLinear(const PairLiquidity& liquidity) { return liquidity.slippageExponent == 1.0; }

void requireNonNegative(double amount, const char* what) {
    if (!(amount >= 0.0)) throw InvalidInput(std::string(what) + " must be >= 0");
}

// Net fraction of seized value that survives the incentive and trading fee.
double keptFraction(double incentive, double tradingFee) { return 1.0 - incentive - tradingFee; }

}  // namespace

double slippageFraction(double seize, AssetIndex from, AssetIndex to, const PairLiquidity& liquidity) {
    requireNonNegative(seize, "seize amount");
    if (from == to || seize == 0.0) return 0.0;
    if (isLinear(liquidity)) return liquidity.effectiveCoefficient(from, to) * seize;
    return liquidity.slippageCoefficient * std::pow(seize / liquidity.volume(from, to), liquidity.slippageExponent);
}

double repayForSeize(double seize, AssetIndex from, AssetIndex to, double incentive,
                     const PairLiquidity& liquidity, double tradingFee) {
    requireNonNegative(seize, "seize amount");
    if (from == to) return seize;
    const double fees = incentive + slippageFraction(seize, from, to, liquidity) + tradingFee;
    if (fees >= 1.0) throw InfeasibleSwap("total swap fees reach 100% of the seized amount");
    return (1.0 - fees) * seize;
}

double repayPeakSeize(AssetIndex from, AssetIndex to, double incentive, const PairLiquidity& liquidity,
                      double tradingFee) {
    const double kept = keptFraction(incentive, tradingFee);
    if (kept <= 0.0) return 0.0;
    if (from == to || liquidity.slippageCoefficient == 0.0) return kInf;
    if (isLinear(liquidity)) return kept / (2.0 * liquidity.effectiveCoefficient(from, to));
    const double gamma = liquidity.slippageExponent;
    return liquidity.volume(from, to) *
           std::pow(kept / ((gamma + 1.0) * liquidity.slippageCoefficient), 1.0 / gamma);
}

double maxRepayable(AssetIndex from, AssetIndex to, double incentive, const PairLiquidity& liquidity,
                    double tradingFee) {
    const double kept = keptFraction(incentive, tradingFee);
    if (kept <= 0.0) return 0.0;
    if (from == to || liquidity.slippageCoefficient == 0.0) return kInf;
    if (isLinear(liquidity)) return kept * kept / (4.0 * liquidity.effectiveCoefficient(from, to));
    const double peak = repayPeakSeize(from, to, incentive, liquidity, tradingFee);
    return (kept - slippageFraction(peak, from, to, liquidity)) * peak;
}

double seizeForRepay(double repay, AssetIndex from, AssetIndex to, double incentive,
                     const PairLiquidity& liquidity, double tradingFee) {
    requireNonNegative(repay, "repay amount");
    if (from == to) return repay;
    if (!isLinear(liquidity)) return seizeForRepayNumeric(repay, from, to, incentive, liquidity, tradingFee);

    const double kept = keptFraction(incentive, tradingFee);
    if (kept <= 0.0) throw InfeasibleSwap("incentive plus trading fee leave nothing to repay");
    const double coeff = liquidity.effectiveCoefficient(from, to);
    const double disc = 1.0 - 4.0 * coeff * repay / (kept * kept);
    if (disc < 0.0) throw InfeasibleRepay("repay amount exceeds the pair's maximum repayable value");
    // a = kept/(2 s~) * (1 - sqrt(disc)), rearranged to avoid cancellation
    // when s~ * p is small.
    return 2.0 * repay / (kept * (1.0 + std::sqrt(disc)));
}

double seizeForRepayNumeric(double repay, AssetIndex from, AssetIndex to, double incentive,
                            const PairLiquidity& liquidity, double tradingFee) {
    requireNonNegative(repay, "repay amount");
    if (repay == 0.0) return 0.0;
    if (from == to) return repay;
    const double kept = keptFraction(incentive, tradingFee);
    if (kept <= 0.0) throw InfeasibleSwap("incentive plus trading fee leave nothing to repay");
    if (liquidity.slippageCoefficient == 0.0) return repay / kept;

    const double hi = repayPeakSeize(from, to, incentive, liquidity, tradingFee);
    auto residual = [&](double a) {
        return (kept - slippageFraction(a, from, to, liquidity)) * a - repay;
    };
    const double lo = repay / kept;  // repayForSeize(a) <= kept * a
    const double fLo = residual(lo);
    if (fLo == 0.0) return lo;
    const double fHi = residual(hi);
    const double tol = 1e-12 * std::max(1.0, repay);
    if (fHi < 0.0) {
        if (fHi >= -tol) return hi;
        throw InfeasibleRepay("repay amount exceeds the pair's maximum repayable value");
    }
    if (lo >= hi) return hi;

    std::uintmax_t maxIter = 200;
    const auto bracket = boost::math::tools::toms748_solve(
        residual, lo, hi, fLo, fHi, boost::math::tools::eps_tolerance<double>(52), maxIter);
    const double a = std::abs(residual(bracket.first)) <= std::abs(residual(bracket.second)) ? bracket.first
                                                                                            : bracket.second;
    if (std::abs(residual(a)) > tol) throw InfeasibleRepay("root finder failed to reach tolerance");
    return a;
}

OptimalSeize optimalSeize(AssetIndex from, AssetIndex to, double incentive, const PairLiquidity& liquidity,
                          double tradingFee) {
    const double edge = incentive - tradingFee;
    if (edge <= 0.0) return {0.0, 0.0};
    if (from == to || liquidity.slippageCoefficient == 0.0) return {kInf, kInf};

    double seize;
    if (isLinear(liquidity)) {
        seize = edge / (2.0 * liquidity.effectiveCoefficient(from, to));
    } else {
        const double gamma = liquidity.slippageExponent;
        seize = liquidity.volume(from, to) *
                std::pow(edge / ((gamma + 1.0) * liquidity.slippageCoefficient), 1.0 / gamma);
    }
    const double fees = incentive + slippageFraction(seize, from, to, liquidity) + tradingFee;
    return {seize, (1.0 - fees) * seize};
}

double liquidatorProfit(double seize, AssetIndex from, AssetIndex to, double incentive,
                        const PairLiquidity& liquidity, double tradingFee) {
    requireNonNegative(seize, "seize amount");
    if (from == to) return 0.0;
    return (incentive - slippageFraction(seize, from, to, liquidity) - tradingFee) * seize;
}

SwapQuote quoteSwap(double seize, AssetIndex from, AssetIndex to, double incentive,
                    const PairLiquidity& liquidity, double tradingFee) {
    SwapQuote q;
    q.pairFrom = from;
    q.pairTo = to;
    q.seizeAmount = seize;
    q.slippageFraction = slippageFraction(seize, from, to, liquidity);
    q.tradingFeeFraction = from == to ? 0.0 : tradingFee;
    q.repaidAmount = repayForSeize(seize, from, to, incentive, liquidity, tradingFee);
    q.liquidatorProfit = liquidatorProfit(seize, from, to, incentive, liquidity, tradingFee);
    return q;
}

}  // namespace lendsim
