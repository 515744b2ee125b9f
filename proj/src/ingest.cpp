#include "qbeb/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "qbeb/errors.hpp"

namespace qbeb {

void IngestFormat::validate() const {
  if (kind == Kind::EventWindow && !(window_s > 0.0 && std::isfinite(window_s)))
    throw ConfigError("event window length must be > 0 seconds");
}

IngestFormat IngestFormat::parse(const std::string& kind, double window_s) {
  IngestFormat f;
  f.window_s = window_s;
  if (kind == "counts-lines" || kind == "counts") f.kind = Kind::CountsLines;
  else if (kind == "histogram-csv" || kind == "histogram") f.kind = Kind::HistogramCsv;
  else if (kind == "event-window" || kind == "events") f.kind = Kind::EventWindow;
  else throw ConfigError("unknown input format '" + kind + "'");
  f.validate();
  return f;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw FormatError("line " + std::to_string(line) + ": " + what);
}

std::uint64_t parse_uint(std::string_view s, std::size_t line, const char* field) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    bad_line(line, std::string("expected a nonnegative integer for ") + field + ", got '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s, std::size_t line, const char* field) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    bad_line(line, std::string("expected a number for ") + field + ", got '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return in;
}

CountHistogram ingest_histogram(std::istream& in) {
  CountHistogram h;
  std::string line;
  std::size_t no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      const auto f = split(t, ',');
      if (f.size() != 2 || trim(f[0]) != "y" || trim(f[1]) != "count")
        bad_line(no, "expected header 'y,count'");
      header = true;
      continue;
    }
    const auto f = split(t, ',');
    if (f.size() != 2) bad_line(no, "expected 2 comma-separated fields");
    const auto y = parse_uint(f[0], no, "y");
    const auto n = parse_uint(f[1], no, "count");
    if (h.count(y) != 0) bad_line(no, "duplicate y=" + std::to_string(y));
    if (n > 0) h.add(y, n);
  }
  return h;
}

CountHistogram ingest_events(std::istream& in, double window) {
  struct Entity {
    double origin;
    std::uint64_t count;
  };
  std::map<std::string, Entity, std::less<>> entities;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    // Trailing tabs are significant: they mark an empty event field.
    std::string_view raw(line);
    while (!raw.empty() && (raw.back() == '\r' || raw.back() == '\n')) raw.remove_suffix(1);
    const auto f = split(raw, '\t');
    if (no == 1 && trim(f[0]) == "entity_id") continue;
    if (f.size() != 3) bad_line(no, "expected 3 tab-separated fields");
    const auto id = trim(f[0]);
    if (id.empty()) bad_line(no, "empty entity_id");
    const double origin = parse_real(f[1], no, "origin_epoch_s");
    auto it = entities.find(id);
    if (it == entities.end()) it = entities.emplace(std::string(id), Entity{origin, 0}).first;
    else if (it->second.origin != origin) bad_line(no, "origin time differs from earlier rows of the same entity");
    if (trim(f[2]).empty()) continue;
    const double dt = parse_real(f[2], no, "event_epoch_s") - origin;
    if (dt >= 0.0 && dt <= window) ++it->second.count;
  }
  CountHistogram h;
  for (const auto& [id, e] : entities) h.add(e.count);
  return h;
}

}  // namespace

std::vector<Count> read_counts(std::istream& in) {
  std::vector<Count> ys;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    ys.push_back(parse_uint(line, no, "count"));
  }
  if (ys.empty()) throw FormatError("input contains no counts");
  return ys;
}

std::vector<Count> read_counts(const std::filesystem::path& path) {
  auto in = open(path);
  return read_counts(in);
}

CountHistogram ingest(std::istream& in, const IngestFormat& fmt) {
  fmt.validate();
  CountHistogram h;
  switch (fmt.kind) {
    case IngestFormat::Kind::CountsLines: h = CountHistogram(read_counts(in)); break;
    case IngestFormat::Kind::HistogramCsv: h = ingest_histogram(in); break;
    case IngestFormat::Kind::EventWindow: h = ingest_events(in, fmt.window_s); break;
  }
  if (h.empty()) throw FormatError("input contains no data rows");
  return h;
}

CountHistogram ingest(const std::filesystem::path& path, const IngestFormat& fmt) {
  auto in = open(path);
  return ingest(in, fmt);
}

std::vector<Count> stream_order(const CountHistogram& h, std::uint64_t seed) {
  std::vector<Count> ys;
  ys.reserve(h.total());
  for (const auto& [y, n] : h.entries()) ys.insert(ys.end(), n, y);
  std::mt19937_64 rng(seed);
  std::shuffle(ys.begin(), ys.end(), rng);
  return ys;
}

}  // namespace qbeb
