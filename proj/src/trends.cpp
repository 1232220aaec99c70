#include "disinfo/trends.hpp"

#include <algorithm>
#include <sstream>

#include "disinfo/error.hpp"
#include "disinfo/text.hpp"
#include "disinfo/timeutil.hpp"

namespace disinfo::trends {

std::uint64_t TimeSeries::total() const {
  std::uint64_t s = 0;
  for (const auto& b : bins) s += b.count;
  return s;
}

bool thematic_match(std::string_view body, const std::vector<std::string>& terms) {
  if (terms.empty()) throw ValidationError("thematic field needs at least one term");
  return text::contains_all_words(body, terms);
}

TimeSeries count_series(const Corpus& corpus, const std::vector<std::string>& terms, BinWidth width) {
  if (corpus.empty()) throw ValidationError("cannot build a time series from an empty corpus");
  const auto w = static_cast<std::int64_t>(width);
  const auto [lo, hi] = std::minmax_element(corpus.begin(), corpus.end(), [](const Tweet& a, const Tweet& b) {
    return a.timestamp < b.timestamp;
  });
  const std::int64_t first = lo->timestamp / w * w;
  const std::int64_t last = hi->timestamp / w * w;

  TimeSeries series;
  series.width = width;
  const auto nbins = static_cast<std::size_t>((last - first) / w + 1);
  series.bins.reserve(nbins);
  for (std::size_t i = 0; i < nbins; ++i) {
    series.bins.push_back({first + static_cast<std::int64_t>(i) * w, 0});
  }
  for (const auto& t : corpus) {
    if (!terms.empty() && !text::contains_all_words(t.text, terms)) continue;
    ++series.bins[static_cast<std::size_t>((t.timestamp - first) / w)].count;
  }
  return series;
}

std::string to_csv(const TimeSeries& series, std::string_view comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "bin_start,count\n";
  for (const auto& b : series.bins) out << timeutil::format_iso8601(b.start) << ',' << b.count << '\n';
  return out.str();
}

std::string to_gnuplot(const TimeSeries& series) {
  std::ostringstream out;
  out << "# bin_start count\n";
  for (const auto& b : series.bins) out << timeutil::format_iso8601(b.start) << ' ' << b.count << '\n';
  return out.str();
}

BinWidth parse_bin_width(std::string_view s) {
  if (s == "hour") return BinWidth::hour;
  if (s == "day") return BinWidth::day;
  throw ValidationError("bin width must be 'hour' or 'day', got '" + std::string(s) + "'");
}

}  // namespace disinfo::trends
