#include "lendsim/bundle.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "lendsim/errors.hpp"

namespace lendsim {

using nlohmann::json;

namespace {

void writeFile(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
    if (!out) throw Error("write failed for " + path.string());
}

void makeDir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

json frontierCellJson(const SweepCell& c, double tradingFee) {
    return {{"liqLtv", c.liqLtv},
            {"inc", c.inc},
            {"fraction", c.undercollateralizedFraction},
            {"finalMeanLtv", c.finalMeanLtv},
            {"meanSlippage", c.meanSlippageFraction},
            {"theoryInc", c.theoryInc()},
            {"theoryIncNet", c.theoryInc() - c.meanSlippageFraction - tradingFee}};
}

}  // namespace

std::string bandCsv(const Band& band) {
    std::string out = "minute,mean,lower,upper\n";
    for (std::size_t t = 0; t < band.mean.size(); ++t)
        out += fmt::format("{},{},{},{}\n", t, band.mean[t], band.lower[t], band.upper[t]);
    return out;
}

std::string distributionCsv(const std::vector<RunMetrics>& runs, bool final) {
    std::string out = "run,userId,ltv,portfolio\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& points = final ? runs[r].finalDistribution : runs[r].initialDistribution;
        for (std::size_t k = 0; k < points.size(); ++k)
            out += fmt::format("{},{},{},{}\n", r, k, points[k].ltv, points[k].portfolio);
    }
    return out;
}

std::string frontierCsv(const FrontierResult& result) {
    std::string out = "liqLtv,inc,fraction,finalMeanLtv,theoryInc\n";
    for (const auto& c : result.frontier)
        out += fmt::format("{},{},{},{},{}\n", c.liqLtv, c.inc, c.undercollateralizedFraction, c.finalMeanLtv,
                           c.theoryInc());
    return out;
}

std::string surfaceCsv(const FrontierResult& result) {
    std::string out = "liqLtv,inc,fraction,finalMeanLtv,meanSlippage,theoryInc,theoryIncNet\n";
    for (const auto& c : result.surface)
        out += fmt::format("{},{},{},{},{},{},{}\n", c.liqLtv, c.inc, c.undercollateralizedFraction, c.finalMeanLtv,
                           c.meanSlippageFraction, c.theoryInc(),
                           c.theoryInc() - c.meanSlippageFraction - result.tradingFee);
    return out;
}

void writeEnsembleBundle(const std::filesystem::path& dir, const ConfigFile& config, const EnsembleResult& result,
                         std::string_view command, const PriceGrid* replayGrid) {
    makeDir(dir / "ticks");
    const EnsembleStats& s = result.stats;
    for (std::size_t k = 0; k < kSeriesCount; ++k) {
        const auto series = static_cast<Series>(k);
        writeFile(dir / "ticks" / fmt::format("{}.csv", seriesName(series)), bandCsv(s[series]));
    }
    writeFile(dir / "initial_distribution.csv", distributionCsv(result.runs, false));
    writeFile(dir / "final_distribution.csv", distributionCsv(result.runs, true));
    if (replayGrid) {
        std::ostringstream grid;
        writeGridCsv(*replayGrid, grid);
        writeFile(dir / "prices.csv", grid.str());
    }

    json finals = json::object();
    for (std::size_t k = 0; k < kSeriesCount; ++k) {
        const auto series = static_cast<Series>(k);
        const Band& b = s[series];
        finals[std::string(seriesName(series))] = {
            {"mean", b.mean.back()}, {"lower", b.lower.back()}, {"upper", b.upper.back()}};
    }
    json summary = {{"version", kVersion},
                    {"command", command},
                    {"seed", config.scenario.masterSeed},
                    {"runsCompleted", s.runsCompleted},
                    {"runsFailed", s.runsFailed},
                    {"failures", result.failures},
                    {"meanUndercollateralizedFraction", s.meanUndercollateralizedFraction},
                    {"meanFinalLtv", s.meanFinalLtv},
                    {"meanSlippageFraction", s.meanSlippageFraction},
                    {"finalTick", finals},
                    {"config", configToJson(config)}};
    writeFile(dir / "summary.json", summary.dump(2) + "\n");
}

void writeSweepBundle(const std::filesystem::path& dir, const ConfigFile& config, const FrontierResult& result) {
    makeDir(dir);
    writeFile(dir / "frontier.csv", frontierCsv(result));
    writeFile(dir / "surface.csv", surfaceCsv(result));
    json frontier = json::array();
    for (const auto& c : result.frontier) frontier.push_back(frontierCellJson(c, result.tradingFee));
    json summary = {{"version", kVersion},
                    {"command", "sweep"},
                    {"seed", config.scenario.masterSeed},
                    {"cells", result.surface.size()},
                    {"frontier", frontier},
                    {"config", configToJson(config)}};
    writeFile(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace lendsim
