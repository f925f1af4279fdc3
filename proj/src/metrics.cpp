#include "dualforge/metrics.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dualforge/format.hpp"

namespace dualforge {

const char* const kMetricsCsvHeader =
    "round,stage,epoch_equiv,comms,time_ms,primal,dual,gap,gap_normalized,kappa,note";

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << kMetricsCsvHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << r.round << ',' << r.stage << ',' << fmt_double(r.epoch_equiv) << ',' << r.comms
        << ',' << fmt_double(r.time_ms) << ',' << fmt_double(r.primal) << ','
        << fmt_double(r.dual) << ',' << fmt_double(r.gap) << ','
        << fmt_double(r.gap_normalized) << ',' << fmt_double(r.kappa) << ',' << r.note
        << '\n';
  }
}

void write_metrics_jsonl(const std::vector<MetricsRow>& rows, std::ostream& out) {
  for (const MetricsRow& r : rows) {
    out << "{\"round\":" << r.round << ",\"stage\":" << r.stage
        << ",\"epoch_equiv\":" << fmt_double(r.epoch_equiv) << ",\"comms\":" << r.comms
        << ",\"time_ms\":" << fmt_double(r.time_ms) << ",\"primal\":" << fmt_double(r.primal)
        << ",\"dual\":" << fmt_double(r.dual) << ",\"gap\":" << fmt_double(r.gap)
        << ",\"gap_normalized\":" << fmt_double(r.gap_normalized)
        << ",\"kappa\":" << fmt_double(r.kappa) << ",\"note\":\"" << r.note << "\"}\n";
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsCsvHeader) throw std::runtime_error("metrics csv: schema mismatch");

  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 11) fields.emplace_back();  // empty trailing note
    if (fields.size() != 11) throw std::runtime_error("metrics csv: bad row: " + line);

    auto num = [&](const std::string& s) {
      double v = 0.0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc()) throw std::runtime_error("metrics csv: bad number: " + s);
      return v;
    };
    MetricsRow r;
    r.round = static_cast<std::size_t>(num(fields[0]));
    r.stage = static_cast<int>(num(fields[1]));
    r.epoch_equiv = num(fields[2]);
    r.comms = static_cast<std::size_t>(num(fields[3]));
    r.time_ms = num(fields[4]);
    r.primal = num(fields[5]);
    r.dual = num(fields[6]);
    r.gap = num(fields[7]);
    r.gap_normalized = num(fields[8]);
    r.kappa = num(fields[9]);
    r.note = fields[10];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dualforge
