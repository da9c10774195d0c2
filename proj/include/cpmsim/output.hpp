#pragma once

#include "cpmsim/simulation.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpmsim {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV writer: a `#` provenance comment, a header row, then data rows.
/// LF line endings and `.` decimals regardless of locale.
class CsvFile {
 public:
  CsvFile(std::string comment, std::vector<std::string> columns);

  void row(const std::vector<std::string>& cells);
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

std::string format_number(double v);
std::string format_seconds(SimTime t);

/// Provenance comment shared by every file of one run.
std::string provenance(std::uint64_t config_hash, std::uint64_t seed, PolicyVariant policy);

/// Writes one file per metric into `dir` (created if needed). Returns the
/// written paths in a fixed order.
std::vector<std::filesystem::path> write_run(const std::filesystem::path& dir,
                                             const RunResult& result);

/// sweep.csv and comparison.csv.
std::vector<std::filesystem::path> write_sweep(const std::filesystem::path& dir,
                                               const std::vector<SweepRow>& rows);

}  // namespace cpmsim
