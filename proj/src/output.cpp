#include "cpmsim/output.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace cpmsim {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6f}", v);
}

std::string format_seconds(SimTime t) {
  const auto ns = t.count();
  return fmt::format("{}{}.{:09d}", ns < 0 ? "-" : "", std::abs(ns) / 1'000'000'000,
                     std::abs(ns) % 1'000'000'000);
}

CsvFile::CsvFile(std::string comment, std::vector<std::string> columns)
    : columns_(columns.size()) {
  text_ = "# " + comment + "\n";
  row(columns);
}

void CsvFile::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw OutputError("csv: row width does not match the header");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) text_ += ',';
    text_ += cells[k];
  }
  text_ += '\n';
}

void CsvFile::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw OutputError("cannot open " + path.string() + " for writing");
  out.write(text_.data(), static_cast<std::streamsize>(text_.size()));
  if (!out) throw OutputError("write failed: " + path.string());
}

std::string provenance(std::uint64_t config_hash, std::uint64_t seed, PolicyVariant policy) {
  return fmt::format("config_hash={:016x} seed={} policy={}", config_hash, seed, to_string(policy));
}

namespace {

std::string str(std::uint64_t v) { return std::to_string(v); }

void curves(CsvFile& csv, const std::vector<Curve>& cs) {
  for (const auto& c : cs)
    for (const auto& p : c.points)
      csv.row({c.label, format_number(p.distance), format_number(p.value), str(p.samples)});
}

void histogram(CsvFile& csv, const std::map<int, std::uint64_t>& h) {
  std::uint64_t total = 0;
  for (const auto& [k, n] : h) total += n;
  for (const auto& [k, n] : h)
    csv.row({std::to_string(k), str(n), format_number(double(n) / double(total))});
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw OutputError("cannot create directory " + dir.string());
}

}  // namespace

std::vector<fs::path> write_run(const fs::path& dir, const RunResult& r) {
  ensure_dir(dir);
  const std::string tag = provenance(r.config_hash, r.seed, r.policy);
  const std::string policy(to_string(r.policy));
  const RunSummary& s = r.summary;
  std::vector<fs::path> written;
  auto save = [&](const CsvFile& csv, const char* name) {
    csv.save(dir / name);
    written.push_back(dir / name);
  };

  CsvFile cpm(tag, {"time_s", "sender", "objects", "object_ids", "size_bytes", "sensor_info",
                    "in_region", "policy"});
  for (const auto& c : r.cpms) {
    std::string ids;
    for (std::size_t k = 0; k < c.objects.size(); ++k)
      ids += (k ? ";" : "") + std::to_string(c.objects[k]);
    cpm.row({format_seconds(c.time), str(c.sender), str(c.objects.size()), ids,
             std::to_string(c.size_bytes), c.sensor_info ? "1" : "0",
             c.sender_in_region ? "1" : "0", policy});
  }
  save(cpm, "cpm_log.csv");

  CsvFile summary(tag, {"metric", "value"});
  summary.row({"vehicles", str(r.vehicles)});
  summary.row({"cpm_rate_hz", format_number(s.cpm_rate_hz)});
  summary.row({"objects_per_cpm", format_number(s.objects_per_cpm)});
  summary.row({"detected_per_check", format_number(s.detected_per_check)});
  summary.row({"cpm_count", str(s.cpm_count)});
  summary.row({"vehicle_seconds", format_number(s.vehicle_seconds)});
  summary.row({"dropped_objects", str(s.dropped_objects)});
  summary.row({"mean_cbr", format_number(s.mean_cbr)});
  for (const auto& c : s.pdr)
    summary.row({"pdr090_distance_" + c.label + "_m", format_number(s.pdr_distance(c.label))});
  save(summary, "cpm_stats.csv");

  CsvFile objects(tag, {"objects", "cpms", "probability"});
  histogram(objects, s.objects_histogram);
  save(objects, "objects_per_cpm.csv");

  CsvFile detected(tag, {"objects", "checks", "probability"});
  histogram(detected, s.detected_histogram);
  save(detected, "detected_objects.csv");

  CsvFile cbr(tag, {"mean_cbr", "samples"});
  cbr.row({format_number(s.mean_cbr), str(s.cbr_samples)});
  save(cbr, "cbr.csv");

  CsvFile pdr(tag, {"class", "distance_m", "pdr", "transmitters"});
  curves(pdr, s.pdr);
  save(pdr, "pdr.csv");

  CsvFile opr(tag, {"class", "distance_m", "opr", "pairs"});
  curves(opr, s.opr);
  save(opr, "opr.csv");

  CsvFile tbu(tag, {"class", "distance_m", "mean_s", "intervals"});
  curves(tbu, s.time_between_updates);
  save(tbu, "time_between_updates.csv");

  if (!r.frames.empty()) {
    CsvFile frames(tag, {"frame", "sender", "start_s", "airtime_s", "size_bytes"});
    for (const auto& f : r.frames)
      frames.row({str(f.id), str(f.sender), format_seconds(f.start), format_seconds(f.duration),
                  std::to_string(f.size_bytes)});
    save(frames, "frames.csv");
  }
  if (!r.receptions.empty()) {
    CsvFile rx(tag, {"frame", "sender", "receiver", "time_s", "outcome", "distance_m", "los",
                     "rx_power_dbm", "sinr_db"});
    for (const auto& e : r.receptions)
      rx.row({str(e.frame), str(e.sender), str(e.receiver), format_seconds(e.time),
              std::string(to_string(e.outcome)), format_number(e.distance), e.los ? "1" : "0",
              format_number(e.rx_power_dbm), format_number(e.sinr_db)});
    save(rx, "receptions.csv");
  }
  return written;
}

std::vector<fs::path> write_sweep(const fs::path& dir, const std::vector<SweepRow>& rows) {
  ensure_dir(dir);
  const std::string tag = fmt::format("sweep cells={}", rows.size());

  CsvFile table(tag, {"scenario", "policy", "seed", "config_hash", "status", "cpm_rate_hz",
                      "objects_per_cpm", "mean_cbr", "pdr090_distance_los_m",
                      "pdr090_distance_nlos_m", "error"});
  for (const auto& row : rows) {
    const auto& s = row.summary;
    std::string error = row.error;
    for (auto& ch : error)
      if (ch == ',' || ch == '\n') ch = ' ';
    table.row({row.cell.scenario, std::string(to_string(row.cell.policy)), str(row.cell.seed),
               fmt::format("{:016x}", config_hash(row.cell.config)), row.ok ? "ok" : "failed",
               format_number(s.cpm_rate_hz), format_number(s.objects_per_cpm),
               format_number(s.mean_cbr), format_number(s.pdr_distance("los")),
               format_number(s.pdr_distance("nlos")), error});
  }
  table.save(dir / "sweep.csv");

  CsvFile cmp(tag, {"scenario", "seed", "metric", "etsi", "look_ahead", "difference_pct"});
  for (const auto& c : compare(rows))
    cmp.row({c.scenario, c.seed ? str(*c.seed) : "mean", c.metric, format_number(c.etsi),
             format_number(c.look_ahead), format_number(c.difference_pct)});
  cmp.save(dir / "comparison.csv");
  return {dir / "sweep.csv", dir / "comparison.csv"};
}

}  // namespace cpmsim
