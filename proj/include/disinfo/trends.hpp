#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "disinfo/corpus.hpp"

namespace disinfo::trends {

enum class BinWidth : std::int64_t { hour = 3600, day = 86400 };

struct Bin {
  std::int64_t start;  // epoch seconds, aligned to the bin width
  std::uint64_t count;
  bool operator==(const Bin&) const = default;
};

struct TimeSeries {
  BinWidth width = BinWidth::day;
  std::vector<Bin> bins;  // contiguous, zero-count bins included

  std::uint64_t total() const;
};

// Every term must appear as a whole word (case-insensitive). Throws
// ValidationError on an empty term set.
bool thematic_match(std::string_view text, const std::vector<std::string>& terms);

// Counts matching tweets per bin over the corpus' full time span. An empty
// term set counts every tweet (the plain query series). Throws on an empty
// corpus.
TimeSeries count_series(const Corpus& corpus, const std::vector<std::string>& terms, BinWidth width);

// "bin_start,count" rows with ISO-8601 UTC timestamps, preceded by an
// optional '#'-comment header.
std::string to_csv(const TimeSeries& series, std::string_view comment = {});

// Whitespace-separated "<iso8601> <count>" rows for gnuplot
// (set xdata time; set timefmt "%Y-%m-%dT%H:%M:%SZ").
std::string to_gnuplot(const TimeSeries& series);

BinWidth parse_bin_width(std::string_view s);

}  // namespace disinfo::trends
