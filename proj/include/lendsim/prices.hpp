#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lendsim/protocol.hpp"

namespace lendsim {

inline constexpr std::size_t kMinutesPerDay = 1440;
inline constexpr std::size_t kMaxForwardFill = 5;

/// Aligned per-minute prices for every asset of a scenario.
struct PriceGrid {
    std::vector<std::string> symbols;
    std::vector<bool> pegged;
    std::int64_t startMinute = 0;  // epoch minute of tick 0; 0 for synthetic grids
    std::vector<std::vector<double>> prices;  // [asset][minute]

    std::size_t assetCount() const { return prices.size(); }
    std::size_t ticks() const { return prices.empty() ? 0 : prices.front().size(); }
    std::vector<double> at(std::size_t minute) const;

    /// Positive prices, equal lengths, pegged assets exactly 1.
    void validate() const;
};

struct MinuteSegment {
    std::int64_t startMinute = 0;
    std::vector<double> prices;

    std::int64_t endMinute() const { return startMinute + static_cast<std::int64_t>(prices.size()); }
};

struct LoadReport {
    std::size_t rows = 0;
    std::map<std::string, std::size_t> forwardFilledMinutes;
    std::vector<std::string> notes;
};

/// Dense minute series per asset, split into segments wherever a gap was
/// too long to forward-fill.
struct PriceHistory {
    std::map<std::string, std::vector<MinuteSegment>> series;
    LoadReport report;

    bool contains(const std::string& symbol) const { return series.count(symbol) != 0; }
};

/// Parses `timestamp,asset,price` CSV (UTC epoch seconds). Throws
/// InvalidInput naming the offending line.
PriceHistory parseHistory(std::istream& in);
PriceHistory loadHistory(const std::filesystem::path& path);

/// Inclusive range of eligible window start minutes.
struct StartRange {
    std::int64_t first = 0;
    std::int64_t last = 0;
    std::int64_t count() const { return last - first + 1; }
};

/// Start minutes of every full-day window where all non-pegged assets have
/// data inside a single segment.
std::vector<StartRange> eligibleWindows(const PriceHistory& history, std::span<const AssetParams> assets,
                                        std::size_t length = kMinutesPerDay);

PriceGrid windowAt(const PriceHistory& history, std::span<const AssetParams> assets, std::int64_t startMinute,
                   std::size_t length = kMinutesPerDay);

/// One uniformly drawn eligible window, common to all assets.
PriceGrid sampleWindow(const PriceHistory& history, std::span<const AssetParams> assets, std::mt19937_64& rng);

/// Eligible window of `symbol` with the lowest ratio of closing price to
/// window peak. Ties resolve to the earliest window.
PriceGrid worstDrawdownWindow(const PriceHistory& history, std::span<const AssetParams> assets,
                              const std::string& symbol);

/// The UTC calendar day `YYYY-MM-DD`.
PriceGrid windowForDate(const PriceHistory& history, std::span<const AssetParams> assets, const std::string& date);

std::int64_t epochMinuteOfDate(const std::string& date);

/// Population std of minute log-returns, times sqrt(60).
double realizedHourlyVol(std::span<const double> series);

/// Scales each asset's minute log-returns so its realized hourly vol hits
/// the target, anchoring the first price. Pegged assets are left alone.
PriceGrid rescaleToVol(const PriceGrid& grid, std::span<const double> hourlyTargets);

/// Correlated driftless log-normal minute paths with the given hourly vols.
/// The correlation matrix must be symmetric positive semi-definite.
PriceGrid syntheticGrid(std::span<const AssetParams> assets, std::span<const double> initialPrices,
                        std::span<const double> hourlyVols, const std::vector<std::vector<double>>& correlation,
                        std::mt19937_64& rng, std::size_t ticks = kMinutesPerDay);

/// Debug dump: `minute,asset,price`.
void writeGridCsv(const PriceGrid& grid, std::ostream& out);

/// History-format dump (`timestamp,asset,price`) of the non-pegged assets.
void writeHistoryCsv(const PriceGrid& grid, std::ostream& out);

}  // namespace lendsim
