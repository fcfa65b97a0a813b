#include "lendsim/prices.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> splitCsv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

[[noreturn]] void badRow(std::size_t lineNo, const std::string& why) {
    throw InvalidInput(fmt::format("price history line {}: {}", lineNo, why));
}

const std::vector<MinuteSegment>& seriesFor(const PriceHistory& history, const std::string& symbol) {
    auto it = history.series.find(symbol);
    if (it == history.series.end() || it->second.empty())
        throw InsufficientData("price history has no data for asset " + symbol);
    return it->second;
}

// Intersection of two sorted lists of disjoint inclusive ranges.
std::vector<StartRange> intersect(const std::vector<StartRange>& a, const std::vector<StartRange>& b) {
    std::vector<StartRange> out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const std::int64_t lo = std::max(a[i].first, b[j].first);
        const std::int64_t hi = std::min(a[i].last, b[j].last);
        if (lo <= hi) out.push_back({lo, hi});
        if (a[i].last < b[j].last) ++i;
        else ++j;
    }
    return out;
}

const MinuteSegment* segmentCovering(const std::vector<MinuteSegment>& segments, std::int64_t start,
                                     std::size_t length) {
    for (const auto& seg : segments) {
        if (seg.startMinute <= start && start + static_cast<std::int64_t>(length) <= seg.endMinute()) return &seg;
    }
    return nullptr;
}

std::vector<double> logReturns(std::span<const double> series) {
    std::vector<double> r(series.size() - 1);
    for (std::size_t t = 1; t < series.size(); ++t) r[t - 1] = std::log(series[t] / series[t - 1]);
    return r;
}

}  // namespace

std::vector<double> PriceGrid::at(std::size_t minute) const {
    std::vector<double> out(prices.size());
    for (std::size_t a = 0; a < prices.size(); ++a) out[a] = prices[a][minute];
    return out;
}

void PriceGrid::validate() const {
    if (symbols.size() != prices.size() || pegged.size() != prices.size())
        throw InvalidInput("price grid metadata does not match asset count");
    const std::size_t n = ticks();
    for (std::size_t a = 0; a < prices.size(); ++a) {
        if (prices[a].size() != n) throw InvalidInput("price grid series have unequal lengths");
        for (double p : prices[a]) {
            if (!(p > 0.0) || !std::isfinite(p)) throw InvalidInput("price grid contains a non-positive price");
            if (pegged[a] && p != 1.0) throw InvalidInput("pegged asset " + symbols[a] + " deviates from 1");
        }
    }
}

PriceHistory parseHistory(std::istream& in) {
    std::string line;
    std::size_t lineNo = 0;
    if (!std::getline(in, line)) throw InvalidInput("price history is empty");
    ++lineNo;
    {
        const auto header = splitCsv(line);
        if (header.size() != 3 || header[0] != "timestamp" || header[1] != "asset" || header[2] != "price")
            badRow(lineNo, "expected header 'timestamp,asset,price'");
    }

    // symbol -> (minute, price) in file order
    std::map<std::string, std::vector<std::pair<std::int64_t, double>>> raw;
    PriceHistory history;
    while (std::getline(in, line)) {
        ++lineNo;
        if (trim(line).empty()) continue;
        const auto fields = splitCsv(line);
        if (fields.size() != 3) badRow(lineNo, "expected 3 fields");
        std::int64_t ts = 0;
        if (auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), ts);
            ec != std::errc() || p != fields[0].data() + fields[0].size())
            badRow(lineNo, "unparseable timestamp '" + std::string(fields[0]) + "'");
        if (fields[1].empty()) badRow(lineNo, "empty asset symbol");
        double price = 0.0;
        if (auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), price);
            ec != std::errc() || p != fields[2].data() + fields[2].size())
            badRow(lineNo, "unparseable price '" + std::string(fields[2]) + "'");
        if (!(price > 0.0) || !std::isfinite(price)) badRow(lineNo, "price must be positive");

        const std::int64_t minute = ts >= 0 ? ts / 60 : -((-ts + 59) / 60);
        auto& rows = raw[std::string(fields[1])];
        if (!rows.empty() && minute < rows.back().first) badRow(lineNo, "timestamps must be ascending per asset");
        if (!rows.empty() && minute == rows.back().first) rows.back().second = price;
        else rows.emplace_back(minute, price);
        ++history.report.rows;
    }

    for (auto& [symbol, rows] : raw) {
        auto& segments = history.series[symbol];
        std::size_t filled = 0;
        for (const auto& [minute, price] : rows) {
            if (!segments.empty()) {
                MinuteSegment& seg = segments.back();
                const std::int64_t missing = minute - seg.endMinute();
                if (missing == 0) {
                    seg.prices.push_back(price);
                    continue;
                }
                if (missing <= static_cast<std::int64_t>(kMaxForwardFill)) {
                    history.report.notes.push_back(
                        fmt::format("{}: forward-filled {} minute(s) before epoch minute {}", symbol, missing, minute));
                    seg.prices.insert(seg.prices.end(), static_cast<std::size_t>(missing), seg.prices.back());
                    filled += static_cast<std::size_t>(missing);
                    seg.prices.push_back(price);
                    continue;
                }
                history.report.notes.push_back(
                    fmt::format("{}: {}-minute gap before epoch minute {} starts a new segment", symbol, missing, minute));
            }
            segments.push_back({minute, {price}});
        }
        history.report.forwardFilledMinutes[symbol] = filled;
    }
    return history;
}

PriceHistory loadHistory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open price history " + path.string());
    return parseHistory(in);
}

std::vector<StartRange> eligibleWindows(const PriceHistory& history, std::span<const AssetParams> assets,
                                        std::size_t length) {
    std::vector<StartRange> common;
    bool first = true;
    for (const auto& asset : assets) {
        if (asset.isNumerairePegged) continue;
        std::vector<StartRange> own;
        for (const auto& seg : seriesFor(history, asset.symbol)) {
            if (seg.prices.size() < length) continue;
            own.push_back({seg.startMinute, seg.endMinute() - static_cast<std::int64_t>(length)});
        }
        common = first ? own : intersect(common, own);
        first = false;
    }
    if (first) throw InsufficientData("scenario has no unpegged asset to take from history");
    return common;
}

PriceGrid windowAt(const PriceHistory& history, std::span<const AssetParams> assets, std::int64_t startMinute,
                   std::size_t length) {
    PriceGrid grid;
    grid.startMinute = startMinute;
    for (const auto& asset : assets) {
        grid.symbols.push_back(asset.symbol);
        grid.pegged.push_back(asset.isNumerairePegged);
        if (asset.isNumerairePegged) {
            grid.prices.emplace_back(length, 1.0);
            continue;
        }
        const MinuteSegment* seg = segmentCovering(seriesFor(history, asset.symbol), startMinute, length);
        if (!seg)
            throw InsufficientData(
                fmt::format("no continuous data for {} over minutes [{}, {})", asset.symbol, startMinute,
                            startMinute + static_cast<std::int64_t>(length)));
        const auto offset = static_cast<std::size_t>(startMinute - seg->startMinute);
        grid.prices.emplace_back(seg->prices.begin() + static_cast<std::ptrdiff_t>(offset),
                                 seg->prices.begin() + static_cast<std::ptrdiff_t>(offset + length));
    }
    return grid;
}

PriceGrid sampleWindow(const PriceHistory& history, std::span<const AssetParams> assets, std::mt19937_64& rng) {
    const auto ranges = eligibleWindows(history, assets);
    std::int64_t total = 0;
    for (const auto& r : ranges) total += r.count();
    if (total == 0) throw InsufficientData("no full-day window where every asset has data");

    std::int64_t pick = std::uniform_int_distribution<std::int64_t>(0, total - 1)(rng);
    for (const auto& r : ranges) {
        if (pick < r.count()) return windowAt(history, assets, r.first + pick);
        pick -= r.count();
    }
    throw InsufficientData("window selection out of range");
}

PriceGrid worstDrawdownWindow(const PriceHistory& history, std::span<const AssetParams> assets,
                              const std::string& symbol) {
    const auto ranges = eligibleWindows(history, assets);
    const auto& segments = seriesFor(history, symbol);
    const auto len = static_cast<std::int64_t>(kMinutesPerDay);

    bool found = false;
    double bestRatio = 0.0;
    std::int64_t bestStart = 0;
    for (const auto& r : ranges) {
        const MinuteSegment* seg = segmentCovering(segments, r.first, static_cast<std::size_t>(r.count() + len - 1));
        if (!seg) throw InsufficientData("asset " + symbol + " is not covered by the eligible windows");
        const auto base = r.first - seg->startMinute;
        std::deque<std::int64_t> peak;  // indices with decreasing prices
        for (std::int64_t t = 0; t < r.count() + len - 1; ++t) {
            const double p = seg->prices[static_cast<std::size_t>(base + t)];
            while (!peak.empty() && seg->prices[static_cast<std::size_t>(base + peak.back())] <= p) peak.pop_back();
            peak.push_back(t);
            const std::int64_t start = t - len + 1;
            if (start < 0) continue;
            while (peak.front() < start) peak.pop_front();
            const double ratio = p / seg->prices[static_cast<std::size_t>(base + peak.front())];
            if (!found || ratio < bestRatio) {
                found = true;
                bestRatio = ratio;
                bestStart = r.first + start;
            }
        }
    }
    if (!found) throw InsufficientData("no full-day window where every asset has data");
    return windowAt(history, assets, bestStart);
}

std::int64_t epochMinuteOfDate(const std::string& date) {
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream in(date);
    if (date.size() != 10 || !(in >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-')
        throw InvalidInput("date must be formatted YYYY-MM-DD: " + date);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw InvalidInput("not a calendar date: " + date);
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days) * static_cast<std::int64_t>(kMinutesPerDay);
}

PriceGrid windowForDate(const PriceHistory& history, std::span<const AssetParams> assets, const std::string& date) {
    try {
        return windowAt(history, assets, epochMinuteOfDate(date));
    } catch (const InsufficientData& e) {
        throw InsufficientData(fmt::format("{} is outside the loaded price history ({})", date, e.what()));
    }
}

double realizedHourlyVol(std::span<const double> series) {
    if (series.size() < 2) throw InvalidInput("realized volatility needs at least two ticks");
    const auto r = logReturns(series);
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= static_cast<double>(r.size());
    double var = 0.0;
    for (double x : r) var += (x - mean) * (x - mean);
    var /= static_cast<double>(r.size());
    return std::sqrt(var) * std::sqrt(60.0);
}

PriceGrid rescaleToVol(const PriceGrid& grid, std::span<const double> hourlyTargets) {
    if (hourlyTargets.size() != grid.assetCount()) throw InvalidInput("one volatility target per asset required");
    PriceGrid out = grid;
    for (std::size_t a = 0; a < grid.assetCount(); ++a) {
        if (grid.pegged[a]) continue;
        const double target = hourlyTargets[a];
        if (!(target >= 0.0) || !std::isfinite(target)) throw InvalidInput("volatility targets must be >= 0");
        const auto& src = grid.prices[a];
        const double realized = realizedHourlyVol(src);
        if (realized == 0.0) {
            if (target == 0.0) continue;
            throw InvalidInput("cannot rescale " + grid.symbols[a] + ": realized volatility is zero");
        }
        const double factor = target / realized;
        const auto r = logReturns(src);
        auto& dst = out.prices[a];
        double cumulative = 0.0;
        for (std::size_t t = 1; t < src.size(); ++t) {
            cumulative += factor * r[t - 1];
            dst[t] = src[0] * std::exp(cumulative);
        }
    }
    return out;
}

PriceGrid syntheticGrid(std::span<const AssetParams> assets, std::span<const double> initialPrices,
                        std::span<const double> hourlyVols, const std::vector<std::vector<double>>& correlation,
                        std::mt19937_64& rng, std::size_t ticks) {
    const std::size_t n = assets.size();
    if (initialPrices.size() != n || hourlyVols.size() != n || correlation.size() != n)
        throw InvalidInput("synthetic grid inputs must have one entry per asset");
    if (ticks == 0) throw InvalidInput("synthetic grid needs at least one tick");

    Eigen::MatrixXd corr(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (correlation[i].size() != n) throw InvalidInput("correlation matrix must be square");
        if (!(hourlyVols[i] >= 0.0) || !std::isfinite(hourlyVols[i])) throw InvalidInput("vols must be >= 0");
        if (!(initialPrices[i] > 0.0)) throw InvalidInput("initial prices must be positive");
        for (std::size_t j = 0; j < n; ++j) corr(i, j) = correlation[i][j];
    }
    if (!corr.isApprox(corr.transpose(), 1e-12)) throw InvalidInput("correlation matrix must be symmetric");

    // Semi-definite factor B = V sqrt(D) with B B^T = corr. Pivoted
    // Cholesky variants reject singular matrices such as perfect correlation.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success) throw InvalidInput("correlation matrix factorization failed");
    Eigen::VectorXd d = eig.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) < -1e-10) throw InvalidInput("correlation matrix is not positive semi-definite");
        d(i) = std::sqrt(std::max(d(i), 0.0));
    }
    const Eigen::MatrixXd factor = eig.eigenvectors() * d.asDiagonal();
    if ((factor * factor.transpose() - corr).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidInput("correlation matrix is not positive semi-definite");

    PriceGrid grid;
    for (std::size_t a = 0; a < n; ++a) {
        grid.symbols.push_back(assets[a].symbol);
        grid.pegged.push_back(assets[a].isNumerairePegged);
        grid.prices.emplace_back(ticks, assets[a].isNumerairePegged ? 1.0 : initialPrices[a]);
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(n);
    std::vector<double> logPrice(n);
    for (std::size_t a = 0; a < n; ++a) logPrice[a] = std::log(grid.prices[a][0]);
    const double perMinute = 1.0 / std::sqrt(60.0);
    for (std::size_t t = 1; t < ticks; ++t) {
        for (std::size_t a = 0; a < n; ++a) z(static_cast<Eigen::Index>(a)) = normal(rng);
        const Eigen::VectorXd shock = factor * z;
        for (std::size_t a = 0; a < n; ++a) {
            if (assets[a].isNumerairePegged || hourlyVols[a] == 0.0) continue;
            logPrice[a] += hourlyVols[a] * perMinute * shock(static_cast<Eigen::Index>(a));
            grid.prices[a][t] = std::exp(logPrice[a]);
        }
    }
    return grid;
}

void writeGridCsv(const PriceGrid& grid, std::ostream& out) {
    out << "minute,asset,price\n";
    for (std::size_t t = 0; t < grid.ticks(); ++t) {
        for (std::size_t a = 0; a < grid.assetCount(); ++a) out << fmt::format("{},{},{}\n", t, grid.symbols[a], grid.prices[a][t]);
    }
}

void writeHistoryCsv(const PriceGrid& grid, std::ostream& out) {
    out << "timestamp,asset,price\n";
    for (std::size_t t = 0; t < grid.ticks(); ++t) {
        const std::int64_t ts = (grid.startMinute + static_cast<std::int64_t>(t)) * 60;
        for (std::size_t a = 0; a < grid.assetCount(); ++a) {
            if (grid.pegged[a]) continue;
            out << fmt::format("{},{},{}\n", ts, grid.symbols[a], grid.prices[a][t]);
        }
    }
}

}  // namespace lendsim
