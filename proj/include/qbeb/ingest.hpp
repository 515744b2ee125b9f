#pragma once

// Input formats:
//   counts-lines    one nonnegative integer per line (blank lines ignored)
//   histogram-csv   header "y,count", then y,count rows
//   event-window    TSV entity_id, origin_epoch_s, event_epoch_s; an entity's
//                   count is the number of events with
//                   0 <= event - origin <= window. An empty event field
//                   declares an entity with no events. An optional header
//                   line starting with "entity_id" is skipped.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "qbeb/poisson_model.hpp"

namespace qbeb {

struct IngestFormat {
  enum class Kind { CountsLines, HistogramCsv, EventWindow };
  Kind kind = Kind::CountsLines;
  /// Window length in seconds for event-window input.
  double window_s = 30.0;

  void validate() const;
  static IngestFormat parse(const std::string& kind, double window_s = 30.0);
};

/// Counts in file order (counts-lines only).
std::vector<Count> read_counts(std::istream& in);
std::vector<Count> read_counts(const std::filesystem::path& path);

/// Errors are FormatError with the offending line number; an input without
/// data rows is an error.
CountHistogram ingest(std::istream& in, const IngestFormat& fmt);
CountHistogram ingest(const std::filesystem::path& path, const IngestFormat& fmt);

/// Expands a histogram into a stream order: y repeated n_y times, shuffled
/// with mt19937_64(seed).
std::vector<Count> stream_order(const CountHistogram& h, std::uint64_t seed);

}  // namespace qbeb
