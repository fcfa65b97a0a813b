#include "lendsim/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lendsim/errors.hpp"

namespace lendsim {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Object reader that remembers which keys were consumed so leftovers can be
// rejected.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(fmt::format("{}: expected an object", label()));
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return node_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", join(path_, key)));
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_number_unsigned())
            throw ConfigError(fmt::format("{}: expected a non-negative integer", join(path_, key)));
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", join(path_, key)));
        return v.get<bool>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", join(path_, key)));
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array of numbers", join(path_, key)));
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(fmt::format("{}: expected an array of numbers", join(path_, key)));
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::string child(const std::string& key) const { return join(path_, key); }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!used_.count(key)) throw ConfigError(fmt::format("{}: unknown key", join(path_, key)));
        }
    }

private:
    template <class T>
    T require(const std::string& key, const std::optional<T>& fallback) const {
        if (!fallback) throw ConfigError(fmt::format("{}: required key is missing", join(path_, key)));
        return *fallback;
    }

    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

struct AssetEntry {
    AssetParams params;
    double initialPrice = 1.0;
    double hourlyVol = 0.0;
};

AssetIndex lookup(const std::map<std::string, AssetIndex>& index, const std::string& symbol, const std::string& where) {
    auto it = index.find(symbol);
    if (it == index.end()) throw ConfigError(fmt::format("{}: unknown asset '{}'", where, symbol));
    return it->second;
}

std::vector<AssetIndex> symbolList(Section& s, const std::string& key, const std::map<std::string, AssetIndex>& index) {
    if (!s.has(key)) return {};
    const json& v = s.raw(key);
    if (!v.is_array()) throw ConfigError(fmt::format("{}: expected an array of asset symbols", s.child(key)));
    std::vector<AssetIndex> out;
    for (const auto& x : v) {
        if (!x.is_string()) throw ConfigError(fmt::format("{}: expected an array of asset symbols", s.child(key)));
        out.push_back(lookup(index, x.get<std::string>(), s.child(key)));
    }
    return out;
}

// Per-symbol numbers given as an object {"ETH": 0.01, ...}.
std::map<std::string, double> symbolNumbers(Section& s, const std::string& key,
                                            const std::map<std::string, AssetIndex>& index) {
    const json& v = s.raw(key);
    if (!v.is_object()) throw ConfigError(fmt::format("{}: expected an object keyed by asset symbol", s.child(key)));
    std::map<std::string, double> out;
    for (const auto& [sym, x] : v.items()) {
        lookup(index, sym, s.child(key));
        if (!x.is_number()) throw ConfigError(fmt::format("{}.{}: expected a number", s.child(key), sym));
        out[sym] = x.get<double>();
    }
    return out;
}

std::string resolvePath(const std::string& p, const std::filesystem::path& baseDir) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_relative() && !baseDir.empty()) path = baseDir / path;
    return path.lexically_normal().string();
}

PriceSource parsePriceSource(const std::string& name, const std::string& where) {
    if (name == "synthetic") return PriceSource::Synthetic;
    if (name == "sampled") return PriceSource::Sampled;
    if (name == "historical-replay") return PriceSource::HistoricalReplay;
    throw ConfigError(fmt::format("{}: expected synthetic, sampled or historical-replay, got '{}'", where, name));
}

ThresholdDenominator parseDenominator(const std::string& name, const std::string& where) {
    if (name == "collateral") return ThresholdDenominator::Collateral;
    if (name == "netPortfolio") return ThresholdDenominator::NetPortfolio;
    throw ConfigError(fmt::format("{}: expected collateral or netPortfolio, got '{}'", where, name));
}

PairLiquidity parseLiquidity(const json* node, const std::vector<AssetEntry>& assets,
                             const std::map<std::string, AssetIndex>& index) {
    const std::size_t n = assets.size();
    const json empty = json::object();
    Section s(node ? *node : empty, "liquidity");

    const double base = s.number("defaultVolume", kDefaultPairVolume);
    std::map<std::string, double> byAsset;
    if (s.has("volumeByAsset")) byAsset = symbolNumbers(s, "volumeByAsset", index);

    std::vector<std::vector<double>> v(n, std::vector<double>(n, base));
    // A pair touching listed assets takes the smallest of their volumes.
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            std::optional<double> pair;
            for (AssetIndex a : {j, i}) {
                auto it = byAsset.find(assets[a].params.symbol);
                if (it != byAsset.end()) pair = std::min(pair.value_or(it->second), it->second);
            }
            if (i != j && pair) v[j][i] = *pair;
        }
    }
    if (s.has("sellSideVolume")) {
        const json& m = s.raw("sellSideVolume");
        const std::string where = s.child("sellSideVolume");
        if (!m.is_object()) throw ConfigError(fmt::format("{}: expected {{from: {{to: volume}}}}", where));
        for (const auto& [from, row] : m.items()) {
            const AssetIndex j = lookup(index, from, where);
            if (!row.is_object()) throw ConfigError(fmt::format("{}.{}: expected {{to: volume}}", where, from));
            for (const auto& [to, x] : row.items()) {
                const AssetIndex i = lookup(index, to, where + "." + from);
                if (!x.is_number()) throw ConfigError(fmt::format("{}.{}.{}: expected a number", where, from, to));
                v[j][i] = x.get<double>();
            }
        }
    }
    const double scale = s.number("volumeScale", 1.0);
    if (!(scale > 0.0)) throw ConfigError("liquidity.volumeScale: must be > 0");
    for (auto& row : v) {
        for (double& x : row) x *= scale;
    }
    // Same-asset "swaps" never trade.
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 0.0;

    PairLiquidity liq;
    liq.sellSideVolume = std::move(v);
    liq.slippageCoefficient = s.number("slippageCoefficient", 1.0);
    liq.slippageExponent = s.number("slippageExponent", 1.0);
    s.finish();
    return liq;
}

}  // namespace

std::string_view priceSourceName(PriceSource source) {
    switch (source) {
        case PriceSource::Synthetic: return "synthetic";
        case PriceSource::Sampled: return "sampled";
        case PriceSource::HistoricalReplay: return "historical-replay";
    }
    return "synthetic";
}

ConfigFile parseConfig(const json& doc, const std::filesystem::path& baseDir) {
    Section top(doc, "");
    ConfigFile out;
    ScenarioConfig& sc = out.scenario;

    if (!top.has("assets")) throw ConfigError("assets: required key is missing");
    const json& assetsNode = top.raw("assets");
    if (!assetsNode.is_array() || assetsNode.empty()) throw ConfigError("assets: expected a non-empty array");
    std::vector<AssetEntry> entries;
    std::map<std::string, AssetIndex> index;
    for (std::size_t k = 0; k < assetsNode.size(); ++k) {
        Section a(assetsNode[k], fmt::format("assets[{}]", k));
        AssetEntry e;
        e.params.symbol = a.text("symbol");
        e.params.maxLtv = a.number("maxLtv");
        e.params.liqLtv = a.number("liqLtv");
        e.params.closeFactor = a.number("closeFactor", 0.5);
        e.params.liquidationIncentive = a.number("liquidationIncentive");
        e.params.isNumerairePegged = a.flag("isNumerairePegged", false);
        e.initialPrice = a.number("initialPrice", 1.0);
        e.hourlyVol = a.number("hourlyVol", 0.0);
        a.finish();
        if (!index.emplace(e.params.symbol, k).second)
            throw ConfigError(fmt::format("assets[{}].symbol: duplicate symbol '{}'", k, e.params.symbol));
        entries.push_back(std::move(e));
    }
    const std::size_t n = entries.size();
    for (const auto& e : entries) {
        sc.assets.push_back(e.params);
        sc.initialPrices.push_back(e.initialPrice);
        sc.hourlyVols.push_back(e.hourlyVol);
    }

    sc.liquidity = parseLiquidity(top.has("liquidity") ? &top.raw("liquidity") : nullptr, entries, index);

    {
        const json empty = json::object();
        Section p(top.has("population") ? top.raw("population") : empty, "population");
        PopulationConfig& pc = sc.population;
        pc.nUsers = p.count("nUsers", kDeskUsers);
        pc.meanPortfolio = p.number("meanPortfolio", 5000.0);
        pc.portfolioLogStd = p.number("portfolioLogStd", 1.0);
        pc.meanLtv = p.number("meanLtv", 0.6);
        pc.ltvLogStd = p.number("ltvLogStd", 0.25);
        pc.minLtv = p.number("minLtv", 0.45);
        pc.minLtvOverridesCap = p.flag("minLtvOverridesCap", false);
        pc.collateralAssets = symbolList(p, "collateralAssets", index);
        pc.loanAssets = symbolList(p, "loanAssets", index);
        sc.populationPath = resolvePath(p.text("populationPath", ""), baseDir);
        p.finish();
    }

    {
        const json empty = json::object();
        Section p(top.has("prices") ? top.raw("prices") : empty, "prices");
        sc.priceSource = parsePriceSource(p.text("priceSource", "synthetic"), "prices.priceSource");
        if (p.has("correlation")) {
            const json& c = p.raw("correlation");
            const bool square = c.is_array() && c.size() == n &&
                                std::all_of(c.begin(), c.end(), [&](const json& r) { return r.is_array() && r.size() == n; });
            if (!square) throw ConfigError(fmt::format("prices.correlation: expected a {0}x{0} array in asset order", n));
            for (const auto& row : c) {
                std::vector<double> r;
                for (const auto& x : row) {
                    if (!x.is_number()) throw ConfigError("prices.correlation: expected numbers");
                    r.push_back(x.get<double>());
                }
                sc.correlation.push_back(std::move(r));
            }
        } else {
            sc.correlation.assign(n, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i) sc.correlation[i][i] = 1.0;
        }
        if (p.has("volTargets")) {
            const auto targets = symbolNumbers(p, "volTargets", index);
            sc.volTargets.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                auto it = targets.find(entries[i].params.symbol);
                if (it != targets.end()) sc.volTargets[i] = it->second;
                else if (!entries[i].params.isNumerairePegged)
                    throw ConfigError(fmt::format("prices.volTargets: missing target for {}", entries[i].params.symbol));
            }
        }
        sc.volMultiplier = p.number("volMultiplier", 1.0);
        sc.historyPath = resolvePath(p.text("historyPath", ""), baseDir);
        sc.replayDate = p.text("replayDate", "");
        sc.replayWorstDrawdown = p.text("replayWorstDrawdown", "");
        p.finish();
    }

    {
        const json empty = json::object();
        Section p(top.has("liquidation") ? top.raw("liquidation") : empty, "liquidation");
        LiquidationSettings& ls = sc.liquidation;
        ls.tradingFee = p.number("tradingFee", 0.003);
        ls.denominator = parseDenominator(p.text("ltvThresholdDenominator", "collateral"),
                                          "liquidation.ltvThresholdDenominator");
        ls.repeatWithinTick = p.flag("repeatWithinTick", false);
        ls.liquidityDepletion = p.flag("liquidityDepletion", false);
        p.finish();
    }

    sc.nRuns = top.count("nRuns", kDeskRuns);
    sc.masterSeed = top.count("masterSeed", 0);

    if (top.has("sweep")) {
        Section p(top.raw("sweep"), "sweep");
        if (p.has("liqLtvGrid")) out.sweep.liqLtvGrid = p.numbers("liqLtvGrid");
        if (p.has("incGrid")) out.sweep.incGrid = p.numbers("incGrid");
        out.sweep.threshold = p.number("threshold", out.sweep.threshold);
        out.sweep.maxLtvGap = p.number("maxLtvGap", out.sweep.maxLtvGap);
        p.finish();
        if (out.sweep.liqLtvGrid.empty() || out.sweep.incGrid.empty())
            throw ConfigError("sweep: grids must not be empty");
        if (!(out.sweep.threshold > 0.0 && out.sweep.threshold <= 1.0))
            throw ConfigError("sweep.threshold: must lie in (0, 1]");
    }
    top.finish();

    try {
        sc.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    return out;
}

ConfigFile parseConfigText(std::string_view text, const std::filesystem::path& baseDir) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    return parseConfig(doc, baseDir);
}

ConfigFile loadConfig(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseConfigText(buf.str(), std::filesystem::absolute(path).parent_path());
}

json configToJson(const ConfigFile& config) {
    const ScenarioConfig& sc = config.scenario;
    const std::size_t n = sc.assets.size();
    json doc;

    json assets = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        const AssetParams& a = sc.assets[i];
        assets.push_back({{"symbol", a.symbol},
                          {"maxLtv", a.maxLtv},
                          {"liqLtv", a.liqLtv},
                          {"closeFactor", a.closeFactor},
                          {"liquidationIncentive", a.liquidationIncentive},
                          {"isNumerairePegged", a.isNumerairePegged},
                          {"initialPrice", i < sc.initialPrices.size() ? sc.initialPrices[i] : 1.0},
                          {"hourlyVol", i < sc.hourlyVols.size() ? sc.hourlyVols[i] : 0.0}});
    }
    doc["assets"] = assets;

    json volumes = json::object();
    for (std::size_t j = 0; j < n; ++j) {
        json row = json::object();
        for (std::size_t i = 0; i < n; ++i) {
            if (i != j) row[sc.assets[i].symbol] = sc.liquidity.sellSideVolume[j][i];
        }
        volumes[sc.assets[j].symbol] = row;
    }
    doc["liquidity"] = {{"sellSideVolume", volumes},
                        {"slippageCoefficient", sc.liquidity.slippageCoefficient},
                        {"slippageExponent", sc.liquidity.slippageExponent}};

    auto symbols = [&](const std::vector<AssetIndex>& idx) {
        json out = json::array();
        for (AssetIndex a : idx) out.push_back(sc.assets[a].symbol);
        return out;
    };
    const PopulationConfig& pc = sc.population;
    doc["population"] = {{"nUsers", pc.nUsers},
                         {"meanPortfolio", pc.meanPortfolio},
                         {"portfolioLogStd", pc.portfolioLogStd},
                         {"meanLtv", pc.meanLtv},
                         {"ltvLogStd", pc.ltvLogStd},
                         {"minLtv", pc.minLtv},
                         {"minLtvOverridesCap", pc.minLtvOverridesCap},
                         {"collateralAssets", symbols(pc.collateralAssets)},
                         {"loanAssets", symbols(pc.loanAssets)},
                         {"populationPath", sc.populationPath}};

    json prices = {{"priceSource", priceSourceName(sc.priceSource)},
                   {"correlation", sc.correlation},
                   {"volMultiplier", sc.volMultiplier},
                   {"historyPath", sc.historyPath},
                   {"replayDate", sc.replayDate},
                   {"replayWorstDrawdown", sc.replayWorstDrawdown}};
    if (!sc.volTargets.empty()) {
        json targets = json::object();
        for (std::size_t i = 0; i < n; ++i) targets[sc.assets[i].symbol] = sc.volTargets[i];
        prices["volTargets"] = targets;
    }
    doc["prices"] = prices;

    doc["liquidation"] = {{"tradingFee", sc.liquidation.tradingFee},
                          {"ltvThresholdDenominator", sc.liquidation.denominator == ThresholdDenominator::Collateral
                                                          ? "collateral"
                                                          : "netPortfolio"},
                          {"repeatWithinTick", sc.liquidation.repeatWithinTick},
                          {"liquidityDepletion", sc.liquidation.liquidityDepletion}};
    doc["nRuns"] = sc.nRuns;
    doc["masterSeed"] = sc.masterSeed;
    doc["sweep"] = {{"liqLtvGrid", config.sweep.liqLtvGrid},
                    {"incGrid", config.sweep.incGrid},
                    {"threshold", config.sweep.threshold},
                    {"maxLtvGap", config.sweep.maxLtvGap}};
    return doc;
}

void applyFullScale(ScenarioConfig& scenario) {
    scenario.population.nUsers = kFullScaleUsers;
    scenario.nRuns = kFullScaleRuns;
}

}  // namespace lendsim
