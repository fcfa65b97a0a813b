#include "lendsim/protocol.hpp"

#include <cmath>

#include "lendsim/errors.hpp"

namespace lendsim {

void AssetParams::validate() const {
    if (symbol.empty()) throw InvalidInput("asset symbol must not be empty");
    if (!(maxLtv >= 0.0 && maxLtv <= liqLtv && liqLtv < 1.0))
        throw InvalidInput("asset " + symbol + ": require 0 <= maxLtv <= liqLtv < 1");
    if (!(closeFactor > 0.0 && closeFactor <= 1.0))
        throw InvalidInput("asset " + symbol + ": closeFactor must lie in (0, 1]");
    if (!(liquidationIncentive >= 0.0 && liquidationIncentive < 1.0))
        throw InvalidInput("asset " + symbol + ": liquidationIncentive must lie in [0, 1)");
}

double PairLiquidity::effectiveCoefficient(AssetIndex from, AssetIndex to) const {
    if (from == to) return 0.0;
    return slippageCoefficient / sellSideVolume[from][to];
}

void PairLiquidity::validate() const {
    const std::size_t n = sellSideVolume.size();
    for (std::size_t j = 0; j < n; ++j) {
        if (sellSideVolume[j].size() != n) throw InvalidInput("liquidity matrix must be square");
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const double v = sellSideVolume[j][i];
            if (!(v > 0.0) || !std::isfinite(v))
                throw InvalidInput("sell-side volume must be finite and positive for every pair");
        }
    }
    if (!(slippageCoefficient >= 0.0) || !std::isfinite(slippageCoefficient))
        throw InvalidInput("slippageCoefficient must be finite and >= 0");
    if (!(slippageExponent > 0.0) || !std::isfinite(slippageExponent))
        throw InvalidInput("slippageExponent must be finite and > 0");
}

PairLiquidity PairLiquidity::uniform(std::size_t nAssets, double volume, double coefficient,
                                     double exponent) {
    PairLiquidity out;
    out.sellSideVolume.assign(nAssets, std::vector<double>(nAssets, volume));
    out.slippageCoefficient = coefficient;
    out.slippageExponent = exponent;
    return out;
}

void checkPrices(std::span<const double> prices) {
    for (double p : prices) {
        if (!(p > 0.0) || !std::isfinite(p)) throw InvalidInput("prices must be finite and positive");
    }
}

PositionValues markToMarket(const UserAccount& user, std::span<const double> prices) {
    checkPrices(prices);
    if (prices.size() != user.size()) throw InvalidInput("price vector does not match asset count");
    PositionValues out{std::vector<double>(user.size()), std::vector<double>(user.size())};
    for (std::size_t i = 0; i < user.size(); ++i) {
        out.collateral[i] = user.collateralUnits[i] * prices[i];
        out.loans[i] = user.loanUnits[i] * prices[i];
    }
    return out;
}

double totalCollateralValue(const UserAccount& user, std::span<const double> prices) {
    double sum = 0.0;
    for (std::size_t i = 0; i < user.size(); ++i) sum += user.collateralUnits[i] * prices[i];
    return sum;
}

double totalLoanValue(const UserAccount& user, std::span<const double> prices) {
    double sum = 0.0;
    for (std::size_t i = 0; i < user.size(); ++i) sum += user.loanUnits[i] * prices[i];
    return sum;
}

double portfolioValue(const UserAccount& user, std::span<const double> prices) {
    return totalCollateralValue(user, prices) - totalLoanValue(user, prices);
}

double userLtv(const UserAccount& user, std::span<const double> prices) {
    checkPrices(prices);
    if (prices.size() != user.size()) throw InvalidInput("price vector does not match asset count");
    const double c = totalCollateralValue(user, prices);
    const double l = totalLoanValue(user, prices);
    if (c > 0.0) return l / c;
    return l > 0.0 ? kInfiniteLtv : 0.0;
}

namespace {

double thresholdLtv(const UserAccount& user, std::span<const double> prices,
                    std::span<const AssetParams> assets, ThresholdDenominator denominator,
                    bool liquidation) {
    double weighted = 0.0;
    double collateral = 0.0;
    for (std::size_t i = 0; i < user.size(); ++i) {
        const double c = user.collateralUnits[i] * prices[i];
        weighted += c * (liquidation ? assets[i].liqLtv : assets[i].maxLtv);
        collateral += c;
    }
    double denom = collateral;
    if (denominator == ThresholdDenominator::NetPortfolio) denom = collateral - totalLoanValue(user, prices);
    if (denom > 0.0) return weighted / denom;
    // No usable denominator: nothing backs a threshold.
    return denominator == ThresholdDenominator::NetPortfolio && collateral > 0.0 ? kInfiniteLtv : 0.0;
}

}  // namespace

double userLiqLtv(const UserAccount& user, std::span<const double> prices,
                  std::span<const AssetParams> assets, ThresholdDenominator denominator) {
    return thresholdLtv(user, prices, assets, denominator, true);
}

double userMaxLtv(const UserAccount& user, std::span<const double> prices,
                  std::span<const AssetParams> assets, ThresholdDenominator denominator) {
    return thresholdLtv(user, prices, assets, denominator, false);
}

double weightedThreshold(std::span<const double> collateralValues, std::span<const AssetParams> assets,
                         bool liquidation) {
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < collateralValues.size(); ++i) {
        weighted += collateralValues[i] * (liquidation ? assets[i].liqLtv : assets[i].maxLtv);
        total += collateralValues[i];
    }
    return total > 0.0 ? weighted / total : 0.0;
}

bool isFrozen(const UserAccount& user, std::span<const double> prices) {
    return totalCollateralValue(user, prices) <= 0.0 && totalLoanValue(user, prices) > 0.0;
}

bool isUndercollateralized(const UserAccount& user, std::span<const double> prices) {
    return userLtv(user, prices) >= 1.0;
}

bool isLiquidatable(const UserAccount& user, std::span<const double> prices,
                    std::span<const AssetParams> assets, ThresholdDenominator denominator) {
    const double l = totalLoanValue(user, prices);
    if (!(l > 0.0)) return false;
    if (isFrozen(user, prices)) return false;
    return userLtv(user, prices) > userLiqLtv(user, prices, assets, denominator);
}

}  // namespace lendsim
