#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lendsim/config.hpp"
#include "lendsim/harness.hpp"

namespace lendsim {

// Output directory layout:
//   summary.json                  finals, config echo, seed, version
//   ticks/<series>.csv            minute,mean,lower,upper
//   initial_distribution.csv      run,userId,ltv,portfolio
//   final_distribution.csv        run,userId,ltv,portfolio
//   prices.csv                    minute,asset,price (replay only)
//   frontier.csv                  liqLtv,inc,fraction,finalMeanLtv,theoryInc (sweep)
//   surface.csv                   liqLtv,inc,fraction,finalMeanLtv,meanSlippage,theoryInc,theoryIncNet (sweep)

std::string bandCsv(const Band& band);
std::string distributionCsv(const std::vector<RunMetrics>& runs, bool final);
std::string frontierCsv(const FrontierResult& result);
std::string surfaceCsv(const FrontierResult& result);

void writeEnsembleBundle(const std::filesystem::path& dir, const ConfigFile& config, const EnsembleResult& result,
                         std::string_view command, const PriceGrid* replayGrid = nullptr);
void writeSweepBundle(const std::filesystem::path& dir, const ConfigFile& config, const FrontierResult& result);

}  // namespace lendsim
