#pragma once

#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "lendsim/protocol.hpp"

namespace lendsim {

struct PopulationConfig {
    std::size_t nUsers = 1000;
    double meanPortfolio = 5000.0;  // arithmetic mean of the lognormal
    double portfolioLogStd = 1.0;
    double meanLtv = 0.6;           // arithmetic mean before clamping
    double ltvLogStd = 0.25;
    double minLtv = 0.45;
    // Let minLtv win over the borrow cap when they cross, so users can start
    // above maxLtv or even liquidatable.
    bool minLtvOverridesCap = false;
    // Assets eligible on each side; empty means every asset.
    std::vector<AssetIndex> collateralAssets;
    std::vector<AssetIndex> loanAssets;

    void validate(std::size_t nAssets) const;
};

struct UserTargets {
    double portfolio = 0.0;
    double ltv = 0.0;
};

/// Numeraire values per asset, before conversion to token units.
struct Allocation {
    std::vector<double> collateral;
    std::vector<double> loans;

    double totalCollateral() const;
    double totalLoans() const;
};

inline constexpr int kMaxRedraws = 100;

/// Lognormal portfolio size and LTV with the configured arithmetic means;
/// the LTV is clamped to [minLtv, ltvCap]. The cap wins if they cross unless
/// minLtvOverridesCap is set.
UserTargets drawTargets(const PopulationConfig& config, std::mt19937_64& rng, double ltvCap);

/// Flat-Dirichlet weights over the eligible assets of each side.
Allocation allocate(std::mt19937_64& rng, std::size_t nAssets, std::span<const AssetIndex> collateralAssets,
                    std::span<const AssetIndex> loanAssets);

/// Removes same-asset exposure: min(c_i, l_i) is taken off both sides.
Allocation unwind(Allocation raw);

/// Scales collateral by r_C = P / ((1 - LTV) * sum c) and loans by
/// r_L = r_C * LTV * sum c / sum l so that the account has exactly the
/// target net value P and loan-to-value LTV.
Allocation rescaleUser(const Allocation& unwound, const UserTargets& targets);

/// Builds nUsers passive accounts in token units at the given prices.
/// Every account starts strictly below its liquidation LTV unless
/// minLtvOverridesCap lets the floor push it higher.
std::vector<UserAccount> generatePopulation(const PopulationConfig& config, std::span<const AssetParams> assets,
                                            std::span<const double> initialPrices, std::mt19937_64& rng);

/// `userId,asset,collateralUnits,loanUnits`, one row per user and asset.
void writePopulationCsv(std::span<const UserAccount> users, std::span<const AssetParams> assets, std::ostream& out);
std::vector<UserAccount> readPopulationCsv(std::istream& in, std::span<const AssetParams> assets);

}  // namespace lendsim
