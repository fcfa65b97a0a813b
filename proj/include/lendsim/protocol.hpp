#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace lendsim {

using AssetIndex = std::size_t;

inline constexpr double kInfiniteLtv = std::numeric_limits<double>::infinity();

/// Per-asset risk parameters of the lending protocol.
struct AssetParams {
    std::string symbol;
    double maxLtv = 0.0;                // borrow cap when used as collateral
    double liqLtv = 0.0;                // liquidation threshold when used as collateral
    double closeFactor = 0.5;           // max fraction of a loan repayable per call
    double liquidationIncentive = 0.0;  // bonus granted on seized collateral
    bool isNumerairePegged = false;     // price fixed at exactly 1

    /// Throws InvalidInput when an invariant on the fields is broken.
    void validate() const;
};

/// Sell-side market depth for every ordered asset pair, plus the
/// polynomial slippage model sigma = s * (a / V)^gamma.
struct PairLiquidity {
    std::vector<std::vector<double>> sellSideVolume;  // [from][to], numeraire value
    double slippageCoefficient = 1.0;
    double slippageExponent = 1.0;

    std::size_t size() const { return sellSideVolume.size(); }
    double volume(AssetIndex from, AssetIndex to) const { return sellSideVolume[from][to]; }

    /// s / V_{from->to}; zero when from == to.
    double effectiveCoefficient(AssetIndex from, AssetIndex to) const;

    void validate() const;

    static PairLiquidity uniform(std::size_t nAssets, double volume,
                                 double coefficient = 1.0, double exponent = 1.0);
};

/// Token quantities held by one user. Numeraire values are derived by
/// marking to market, so price moves revalue the position.
struct UserAccount {
    std::vector<double> collateralUnits;
    std::vector<double> loanUnits;

    static UserAccount empty(std::size_t nAssets) {
        return {std::vector<double>(nAssets, 0.0), std::vector<double>(nAssets, 0.0)};
    }
    std::size_t size() const { return collateralUnits.size(); }
};

struct PositionValues {
    std::vector<double> collateral;
    std::vector<double> loans;
};

enum class ThresholdDenominator { Collateral, NetPortfolio };

/// Throws InvalidInput unless every price is finite and strictly positive.
void checkPrices(std::span<const double> prices);

PositionValues markToMarket(const UserAccount& user, std::span<const double> prices);

double totalCollateralValue(const UserAccount& user, std::span<const double> prices);
double totalLoanValue(const UserAccount& user, std::span<const double> prices);

/// Net value: sum of collateral minus sum of loans.
double portfolioValue(const UserAccount& user, std::span<const double> prices);

/// Loans over collateral. Zero collateral with loans gives kInfiniteLtv;
/// an empty account has LTV 0.
double userLtv(const UserAccount& user, std::span<const double> prices);

double userLiqLtv(const UserAccount& user, std::span<const double> prices,
                  std::span<const AssetParams> assets,
                  ThresholdDenominator denominator = ThresholdDenominator::Collateral);
double userMaxLtv(const UserAccount& user, std::span<const double> prices,
                  std::span<const AssetParams> assets,
                  ThresholdDenominator denominator = ThresholdDenominator::Collateral);

// Value-space variants used during population setup, before any
// token quantities exist.
double weightedThreshold(std::span<const double> collateralValues, std::span<const AssetParams> assets,
                         bool liquidation);

/// No collateral left but loans outstanding. Such accounts are counted as
/// undercollateralized and are never liquidated again.
bool isFrozen(const UserAccount& user, std::span<const double> prices);

bool isUndercollateralized(const UserAccount& user, std::span<const double> prices);

bool isLiquidatable(const UserAccount& user, std::span<const double> prices,
                    std::span<const AssetParams> assets,
                    ThresholdDenominator denominator = ThresholdDenominator::Collateral);

}  // namespace lendsim
