#include "lendsim/population.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

// Keeps the initial LTV strictly under the liquidation threshold.
constexpr double kLiqMargin = 1e-9;

double lognormalWithMean(double mean, double logStd, double z) {
    if (logStd == 0.0) return mean;
    return std::exp(std::log(mean) - 0.5 * logStd * logStd + logStd * z);
}

std::vector<double> flatDirichlet(std::mt19937_64& rng, std::size_t nAssets, std::span<const AssetIndex> eligible) {
    std::vector<double> w(nAssets, 0.0);
    std::exponential_distribution<double> expo(1.0);
    double sum = 0.0;
    for (AssetIndex a : eligible) {
        const double x = expo(rng);
        w[a] += x;
        sum += x;
    }
    if (sum > 0.0) {
        for (double& x : w) x /= sum;
    }
    return w;
}

std::vector<AssetIndex> allAssets(std::size_t n) {
    std::vector<AssetIndex> v(n);
    std::iota(v.begin(), v.end(), AssetIndex{0});
    return v;
}

}  // namespace

void PopulationConfig::validate(std::size_t nAssets) const {
    if (nUsers < 1) throw InvalidInput("nUsers must be >= 1");
    if (!(meanPortfolio > 0.0)) throw InvalidInput("meanPortfolio must be > 0");
    if (!(portfolioLogStd >= 0.0) || !(ltvLogStd >= 0.0)) throw InvalidInput("log std must be >= 0");
    if (!(meanLtv > 0.0 && meanLtv < 1.0)) throw InvalidInput("meanLtv must lie in (0, 1)");
    if (!(minLtv >= 0.0 && minLtv < 1.0)) throw InvalidInput("minLtv must lie in [0, 1)");
    for (const auto* side : {&collateralAssets, &loanAssets}) {
        for (AssetIndex a : *side) {
            if (a >= nAssets) throw InvalidInput("population refers to an unknown asset");
        }
    }
}

double Allocation::totalCollateral() const { return std::accumulate(collateral.begin(), collateral.end(), 0.0); }
double Allocation::totalLoans() const { return std::accumulate(loans.begin(), loans.end(), 0.0); }

UserTargets drawTargets(const PopulationConfig& config, std::mt19937_64& rng, double ltvCap) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double zPortfolio = normal(rng);
    const double zLtv = normal(rng);
    UserTargets t;
    t.portfolio = lognormalWithMean(config.meanPortfolio, config.portfolioLogStd, zPortfolio);
    const double ltv = lognormalWithMean(config.meanLtv, config.ltvLogStd, zLtv);
    t.ltv = config.minLtvOverridesCap ? std::max(std::min(ltv, ltvCap), config.minLtv)
                                      : std::min(std::max(ltv, config.minLtv), ltvCap);
    return t;
}

Allocation allocate(std::mt19937_64& rng, std::size_t nAssets, std::span<const AssetIndex> collateralAssets,
                    std::span<const AssetIndex> loanAssets) {
    if (nAssets < 2) throw InvalidInput("allocation needs at least two assets");
    const auto all = allAssets(nAssets);
    Allocation out;
    out.collateral = flatDirichlet(rng, nAssets, collateralAssets.empty() ? std::span<const AssetIndex>(all)
                                                                          : collateralAssets);
    out.loans = flatDirichlet(rng, nAssets, loanAssets.empty() ? std::span<const AssetIndex>(all) : loanAssets);
    return out;
}

Allocation unwind(Allocation raw) {
    for (std::size_t i = 0; i < raw.collateral.size(); ++i) {
        const double m = std::min(raw.collateral[i], raw.loans[i]);
        raw.collateral[i] -= m;
        raw.loans[i] -= m;
    }
    return raw;
}

Allocation rescaleUser(const Allocation& unwound, const UserTargets& targets) {
    const double sumC = unwound.totalCollateral();
    const double sumL = unwound.totalLoans();
    if (!(sumC > 0.0) || !(sumL > 0.0)) throw InvalidInput("rescaling needs positive collateral and loans");
    if (!(targets.ltv >= 0.0 && targets.ltv < 1.0)) throw InvalidInput("target LTV must lie in [0, 1)");
    if (!(targets.portfolio > 0.0)) throw InvalidInput("target portfolio must be > 0");

    const double rC = targets.portfolio / ((1.0 - targets.ltv) * sumC);
    const double rL = rC * targets.ltv * sumC / sumL;
    Allocation out = unwound;
    for (double& c : out.collateral) c *= rC;
    for (double& l : out.loans) l *= rL;
    return out;
}

std::vector<UserAccount> generatePopulation(const PopulationConfig& config, std::span<const AssetParams> assets,
                                            std::span<const double> initialPrices, std::mt19937_64& rng) {
    const std::size_t n = assets.size();
    config.validate(n);
    checkPrices(initialPrices);
    if (initialPrices.size() != n) throw InvalidInput("one initial price per asset required");

    std::vector<UserAccount> users;
    users.reserve(config.nUsers);
    for (std::size_t k = 0; k < config.nUsers; ++k) {
        Allocation alloc;
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt == kMaxRedraws)
                throw GenerationError(fmt::format("user {}: unwinding left an empty side {} times in a row", k,
                                                  kMaxRedraws));
            alloc = unwind(allocate(rng, n, config.collateralAssets, config.loanAssets));
            if (alloc.totalCollateral() > 1e-12 && alloc.totalLoans() > 1e-12) break;
        }

        const double cap = std::min(weightedThreshold(alloc.collateral, assets, false),
                                    weightedThreshold(alloc.collateral, assets, true) - kLiqMargin);
        if (!(cap > 0.0) && !(config.minLtvOverridesCap && config.minLtv > 0.0)) throw GenerationError("collateral assets allow no borrowing (maxLtv is zero)");
        const UserTargets targets = drawTargets(config, rng, cap);
        const Allocation values = rescaleUser(alloc, targets);

        UserAccount user = UserAccount::empty(n);
        for (std::size_t i = 0; i < n; ++i) {
            user.collateralUnits[i] = values.collateral[i] / initialPrices[i];
            user.loanUnits[i] = values.loans[i] / initialPrices[i];
        }
        users.push_back(std::move(user));
    }
    return users;
}

void writePopulationCsv(std::span<const UserAccount> users, std::span<const AssetParams> assets, std::ostream& out) {
    out << "userId,asset,collateralUnits,loanUnits\n";
    for (std::size_t k = 0; k < users.size(); ++k) {
        for (std::size_t i = 0; i < assets.size(); ++i)
            out << fmt::format("{},{},{},{}\n", k, assets[i].symbol, users[k].collateralUnits[i], users[k].loanUnits[i]);
    }
}

std::vector<UserAccount> readPopulationCsv(std::istream& in, std::span<const AssetParams> assets) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < assets.size(); ++i) index[assets[i].symbol] = i;

    std::string line;
    std::size_t lineNo = 1;
    if (!std::getline(in, line) || line.rfind("userId,asset,collateralUnits,loanUnits", 0) != 0)
        throw InvalidInput("population CSV: expected header 'userId,asset,collateralUnits,loanUnits'");

    std::vector<UserAccount> users;
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t pos = 0;
        for (std::size_t comma; (comma = line.find(',', pos)) != std::string::npos; pos = comma + 1)
            f.push_back(line.substr(pos, comma - pos));
        f.push_back(line.substr(pos));
        if (f.size() != 4) throw InvalidInput(fmt::format("population CSV line {}: expected 4 fields", lineNo));

        std::size_t id = 0;
        double c = 0.0, l = 0.0;
        auto parse = [&](const std::string& s, auto& v) {
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size())
                throw InvalidInput(fmt::format("population CSV line {}: cannot parse '{}'", lineNo, s));
        };
        parse(f[0], id);
        parse(f[2], c);
        parse(f[3], l);
        auto it = index.find(f[1]);
        if (it == index.end()) throw InvalidInput(fmt::format("population CSV line {}: unknown asset {}", lineNo, f[1]));
        if (c < 0.0 || l < 0.0) throw InvalidInput(fmt::format("population CSV line {}: negative units", lineNo));
        if (id > users.size()) throw InvalidInput(fmt::format("population CSV line {}: user ids must be dense", lineNo));
        if (id == users.size()) users.push_back(UserAccount::empty(assets.size()));
        users[id].collateralUnits[it->second] = c;
        users[id].loanUnits[it->second] = l;
    }
    if (users.empty()) throw InvalidInput("population CSV has no users");
    return users;
}

}  // namespace lendsim
