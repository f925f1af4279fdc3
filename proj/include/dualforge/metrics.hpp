#ifndef DUALFORGE_METRICS_HPP
#define DUALFORGE_METRICS_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace dualforge {

// One row per certified sync. The CSV schema is stable:
//   round,stage,epoch_equiv,comms,time_ms,primal,dual,gap,gap_normalized,kappa,note
// time_ms is wall clock and excluded from determinism guarantees; every
// other column is a pure function of the run manifest.
struct MetricsRow {
  std::size_t round = 0;     // certified-state counter, cumulative across stages
  int stage = 0;             // 0 for plain runs, 1-based for accelerated stages
  double epoch_equiv = 0.0;  // cumulative sp
  std::size_t comms = 0;     // cumulative gather+broadcast pairs
  double time_ms = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double gap_normalized = 0.0;
  double kappa = 0.0;
  std::string note;
};

extern const char* const kMetricsCsvHeader;

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out);
void write_metrics_jsonl(const std::vector<MetricsRow>& rows, std::ostream& out);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

}  // namespace dualforge

#endif  // DUALFORGE_METRICS_HPP
