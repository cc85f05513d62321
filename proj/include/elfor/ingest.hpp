#pragma once

#include <charconv>
#include <compare>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "elfor/error.hpp"
#include "elfor/random.hpp"
#include "elfor/stats.hpp"

namespace elfor {

/// Province > district > village > station. A tuple identifies one station.
struct RegionKey {
  std::string province;
  std::string district;
  std::string village;
  std::string station_id;

  auto operator<=>(const RegionKey&) const = default;
  bool operator==(const RegionKey&) const = default;

  std::string to_string() const { return province + "/" + district + "/" + village + "/" + station_id; }
};

/// One polling station. Rates are derived from the counts at construction and
/// are NaN where undefined (t when N = 0, v when T = 0).
struct StationRecord {
  RegionKey region;
  Count eligible = 0;  // N
  Count turnout = 0;   // T, valid votes
  Count yes = 0;       // V
  double rel_turnout = std::numeric_limits<double>::quiet_NaN();
  double vote_share = std::numeric_limits<double>::quiet_NaN();

  bool has_turnout() const noexcept { return eligible > 0; }
  bool has_vote_share() const noexcept { return turnout > 0; }

  friend bool operator==(const StationRecord& a, const StationRecord& b) {
    return a.region == b.region && a.eligible == b.eligible && a.turnout == b.turnout && a.yes == b.yes;
  }
};

/// Builds a validated record; throws ValidationError unless 0 <= V <= T <= N.
inline StationRecord make_station(RegionKey region, Count eligible, Count turnout, Count yes) {
  if (yes < 0 || turnout < 0 || eligible < 0)
    throw ValidationError(region.to_string(), "negative count");
  if (turnout > eligible)
    throw ValidationError(region.to_string(), "turnout " + std::to_string(turnout) +
                                                  " exceeds electorate " + std::to_string(eligible));
  if (yes > turnout)
    throw ValidationError(region.to_string(), "yes votes " + std::to_string(yes) +
                                                  " exceed turnout " + std::to_string(turnout));
  StationRecord r{std::move(region), eligible, turnout, yes};
  if (eligible > 0) r.rel_turnout = static_cast<double>(turnout) / static_cast<double>(eligible);
  if (turnout > 0) r.vote_share = static_cast<double>(yes) / static_cast<double>(turnout);
  return r;
}

/// Header names of the seven columns the reader needs; other columns are ignored.
struct ColumnMapping {
  std::string province = "province";
  std::string district = "district";
  std::string village = "village";
  std::string station = "station";
  std::string eligible = "eligible";
  std::string turnout = "valid";
  std::string yes = "yes";
};

struct FormatConfig {
  char delimiter = ';';
  ColumnMapping columns;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline Count parse_count(std::string_view field, std::size_t row, std::string_view column) {
  field = trim(field);
  Count value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
    throw ParseError(row, "column '" + std::string(column) + "': not a count: '" + std::string(field) + "'");
  return value;
}

}  // namespace detail

/// Reads a delimiter-separated station file with a header row.
/// Rows keep their file order. Blank lines are skipped.
inline std::vector<StationRecord> parse_results(std::istream& in, const FormatConfig& format = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = detail::split(line, format.delimiter);
  auto find_column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    throw ParseError(1, "header lacks column '" + name + "'");
  };
  const auto& c = format.columns;
  const std::size_t ip = find_column(c.province), id = find_column(c.district),
                    iv = find_column(c.village), is = find_column(c.station),
                    in_ = find_column(c.eligible), it = find_column(c.turnout), iy = find_column(c.yes);

  std::vector<StationRecord> records;
  std::unordered_set<std::string> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, format.delimiter);
    if (fields.size() != header.size())
      throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(fields.size()));
    RegionKey key{std::string(detail::trim(fields[ip])), std::string(detail::trim(fields[id])),
                  std::string(detail::trim(fields[iv])), std::string(detail::trim(fields[is]))};
    const Count n = detail::parse_count(fields[in_], row, c.eligible);
    const Count t = detail::parse_count(fields[it], row, c.turnout);
    const Count v = detail::parse_count(fields[iy], row, c.yes);
    // The four labels may contain '/', so the uniqueness key uses an unambiguous separator.
    std::string uid = key.province + '\x1f' + key.district + '\x1f' + key.village + '\x1f' + key.station_id;
    if (!seen.insert(std::move(uid)).second) throw DuplicateKeyError(key.to_string());
    records.push_back(make_station(std::move(key), n, t, v));
  }
  return records;
}

/// Writes records in the layout `parse_results` reads with the same config.
inline void write_results(std::ostream& out, std::span<const StationRecord> records,
                          const FormatConfig& format = {}) {
  const char d = format.delimiter;
  const auto& c = format.columns;
  out << c.province << d << c.district << d << c.village << d << c.station << d << c.eligible << d
      << c.turnout << d << c.yes << '\n';
  for (const auto& r : records)
    out << r.region.province << d << r.region.district << d << r.region.village << d
        << r.region.station_id << d << r.eligible << d << r.turnout << d << r.yes << '\n';
}

struct ExclusionSummary {
  Count min_electorate = 0;
  std::size_t total_stations = 0;
  std::size_t excluded_stations = 0;
  double excluded_vote_fraction = 0.0;  // sum T over excluded / sum T over all
};

struct FilterResult {
  std::vector<StationRecord> retained;
  ExclusionSummary exclusion;
};

/// Keeps stations with N >= min_electorate.
inline FilterResult filter_stations(std::span<const StationRecord> records, Count min_electorate) {
  if (min_electorate < 0) throw InvalidArgument("min_electorate must be non-negative");
  FilterResult out;
  out.exclusion.min_electorate = min_electorate;
  out.exclusion.total_stations = records.size();
  Count total_votes = 0;
  Count excluded_votes = 0;
  for (const auto& r : records) {
    total_votes += r.turnout;
    if (r.eligible >= min_electorate) {
      out.retained.push_back(r);
    } else {
      ++out.exclusion.excluded_stations;
      excluded_votes += r.turnout;
    }
  }
  if (total_votes > 0)
    out.exclusion.excluded_vote_fraction = static_cast<double>(excluded_votes) / static_cast<double>(total_votes);
  return out;
}

struct DatasetSummary {
  std::size_t station_count = 0;
  std::size_t village_count = 0;
  std::size_t district_count = 0;
  std::size_t province_count = 0;
  std::size_t undefined_vote_share_count = 0;  // stations with T = 0
  stats::MeanSd eligible, turnout, yes, rel_turnout, vote_share;
  std::optional<ExclusionSummary> exclusion;
};

/// Table-style descriptive statistics, population standard deviations.
/// Rates that are undefined for a station are left out of that rate's statistic.
inline DatasetSummary summarize(std::span<const StationRecord> records) {
  if (records.empty()) throw InsufficientDataError("summarize: empty record list");
  DatasetSummary s;
  s.station_count = records.size();

  std::set<std::tuple<std::string_view, std::string_view, std::string_view>> villages;
  std::set<std::pair<std::string_view, std::string_view>> districts;
  std::set<std::string_view> provinces;
  std::vector<double> n, t, v, rt, vs;
  n.reserve(records.size());
  t.reserve(records.size());
  v.reserve(records.size());
  for (const auto& r : records) {
    const auto& k = r.region;
    villages.emplace(k.province, k.district, k.village);
    districts.emplace(k.province, k.district);
    provinces.emplace(k.province);
    n.push_back(static_cast<double>(r.eligible));
    t.push_back(static_cast<double>(r.turnout));
    v.push_back(static_cast<double>(r.yes));
    if (r.has_turnout()) rt.push_back(r.rel_turnout);
    if (r.has_vote_share())
      vs.push_back(r.vote_share);
    else
      ++s.undefined_vote_share_count;
  }
  s.village_count = villages.size();
  s.district_count = districts.size();
  s.province_count = provinces.size();
  s.eligible = stats::mean_sd(n);
  s.turnout = stats::mean_sd(t);
  s.yes = stats::mean_sd(v);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.rel_turnout = rt.empty() ? stats::MeanSd{nan, nan} : stats::mean_sd(rt);
  s.vote_share = vs.empty() ? stats::MeanSd{nan, nan} : stats::mean_sd(vs);
  return s;
}

/// Groups record indices by a key, groups ordered by first appearance.
template <class KeyFn>
std::vector<std::vector<std::size_t>> group_indices(std::span<const StationRecord> records, KeyFn key) {
  using Key = std::decay_t<decltype(key(records.front()))>;
  std::map<Key, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(key(records[i]), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

inline auto district_key(const StationRecord& r) { return std::pair{r.region.province, r.region.district}; }
inline auto village_key(const StationRecord& r) {
  return std::tuple{r.region.province, r.region.district, r.region.village};
}

}  // namespace elfor
