#ifndef DUALFORGE_DATAIO_HPP
#define DUALFORGE_DATAIO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dualforge {

// One sparse training example. Feature ids are 0-based and strictly
// ascending; zero values are never stored; the squared norm is cached.
struct Example {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  int label = 1;  // +1 or -1
  double squared_norm = 0.0;

  std::size_t nnz() const { return indices.size(); }
};

struct DatasetStats {
  double max_squared_norm = 0.0;  // R = max_i ||x_i||^2
  std::size_t nnz = 0;
  double sparsity = 0.0;  // nnz / (n*d)
};

struct Dataset {
  std::vector<Example> examples;
  std::size_t dim = 0;
  DatasetStats stats;

  std::size_t n() const { return examples.size(); }
};

DatasetStats compute_stats(const Dataset& data);

struct ParseOptions {
  std::size_t min_dim = 0;    // force the dimension to be at least this
  bool normalize = false;     // rescale every example to unit l2 norm
};

// LIBSVM text: "label idx:val idx:val ...", 1-based indices, one example per
// line. Labels must be -1, 0 or +1; 0 maps to -1. Lines starting with '#'
// are skipped; CRLF is tolerated. Errors carry the 1-based line number.
Dataset parse_libsvm(std::istream& in, const ParseOptions& opts = {});
Dataset parse_libsvm_file(const std::string& path, const ParseOptions& opts = {});

void write_libsvm(const Dataset& data, std::ostream& out);
void write_libsvm_file(const Dataset& data, const std::string& path);

// Rescales each example to unit l2 norm (zero-norm examples are left alone)
// and refreshes the cached norms and stats.
void normalize_unit_norm(Dataset& data);

// Disjoint, balanced index sets: indices are shuffled by a seeded stream and
// split contiguously, so sizes differ by at most one and the output is a
// pure function of (n, m, seed).
struct Partition {
  std::vector<std::vector<std::uint32_t>> assignments;

  std::size_t workers() const { return assignments.size(); }
  std::size_t size_of(std::size_t worker) const { return assignments[worker].size(); }
};

Partition make_partition(std::size_t n, std::size_t m, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n = 0;
  std::size_t d = 0;
  double density = 1.0;       // per-entry inclusion probability, (0, 1]
  std::uint64_t seed = 0;
  double label_noise = 0.0;   // flip probability, [0, 0.5)
};

// Sparse standard-normal features against a drawn ground-truth direction;
// labels are sign(x . w_true) flipped with probability label_noise.
Dataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace dualforge

#endif  // DUALFORGE_DATAIO_HPP
