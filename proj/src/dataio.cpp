#include "dualforge/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dualforge/format.hpp"
#include "dualforge/rng.hpp"

namespace dualforge {

namespace {

[[noreturn]] void parse_fail(std::size_t lineno, const std::string& what) {
  std::ostringstream oss;
  oss << "libsvm: line " << lineno << ": " << what;
  throw std::runtime_error(oss.str());
}

// from_chars over a whitespace-delimited token; returns the end pointer.
// from_chars itself rejects a leading '+', which LIBSVM labels carry.
const char* parse_double(const char* p, const char* end, double& out,
                         std::size_t lineno, const char* what) {
  if (p < end && *p == '+') ++p;
  auto res = std::from_chars(p, end, out);
  if (res.ec != std::errc()) parse_fail(lineno, std::string("unparsable ") + what);
  return res.ptr;
}

}  // namespace

DatasetStats compute_stats(const Dataset& data) {
  DatasetStats s;
  for (const Example& ex : data.examples) {
    s.nnz += ex.nnz();
    s.max_squared_norm = std::max(s.max_squared_norm, ex.squared_norm);
  }
  const double cells = static_cast<double>(data.n()) * static_cast<double>(data.dim);
  s.sparsity = cells > 0 ? static_cast<double>(s.nnz) / cells : 0.0;
  return s;
}

Dataset parse_libsvm(std::istream& in, const ParseOptions& opts) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  std::uint32_t max_index = 0;
  bool any_feature = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_ws = [&] { while (p < end && (*p == ' ' || *p == '\t')) ++p; };

    skip_ws();
    double raw_label = 0.0;
    p = parse_double(p, end, raw_label, lineno, "label");
    int label;
    if (raw_label == 1.0) label = 1;
    else if (raw_label == -1.0) label = -1;
    else if (raw_label == 0.0) label = -1;  // {0,1} convention maps 0 to -1
    else parse_fail(lineno, "label must be -1, 0 or +1");

    Example ex;
    ex.label = label;
    std::uint32_t prev_index = 0;
    bool first = true;
    for (;;) {
      skip_ws();
      if (p >= end) break;
      std::uint64_t idx1 = 0;
      auto res = std::from_chars(p, end, idx1);
      if (res.ec != std::errc() || res.ptr >= end || *res.ptr != ':')
        parse_fail(lineno, "malformed feature token");
      if (idx1 == 0 || idx1 > 0xffffffffULL) parse_fail(lineno, "feature index out of range");
      p = res.ptr + 1;
      double value = 0.0;
      p = parse_double(p, end, value, lineno, "feature value");
      if (p < end && *p != ' ' && *p != '\t') parse_fail(lineno, "malformed feature token");

      const auto idx0 = static_cast<std::uint32_t>(idx1 - 1);
      if (!first && idx0 <= prev_index) parse_fail(lineno, "feature indices not strictly ascending");
      prev_index = idx0;
      first = false;
      if (value == 0.0) continue;  // explicit zeros are not stored
      ex.indices.push_back(idx0);
      ex.values.push_back(value);
      ex.squared_norm += value * value;
      any_feature = true;
      max_index = std::max(max_index, idx0);
    }
    data.examples.push_back(std::move(ex));
  }

  data.dim = any_feature ? static_cast<std::size_t>(max_index) + 1 : 0;
  data.dim = std::max(data.dim, opts.min_dim);
  if (opts.normalize) normalize_unit_norm(data);
  data.stats = compute_stats(data);
  return data;
}

Dataset parse_libsvm_file(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return parse_libsvm(in, opts);
}

void write_libsvm(const Dataset& data, std::ostream& out) {
  for (const Example& ex : data.examples) {
    out << (ex.label > 0 ? "+1" : "-1");
    for (std::size_t k = 0; k < ex.nnz(); ++k)
      out << ' ' << (ex.indices[k] + 1) << ':' << fmt_double(ex.values[k]);
    out << '\n';
  }
}

void write_libsvm_file(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  write_libsvm(data, out);
}

void normalize_unit_norm(Dataset& data) {
  for (Example& ex : data.examples) {
    if (ex.squared_norm <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(ex.squared_norm);
    double sq = 0.0;
    for (double& v : ex.values) {
      v *= inv;
      sq += v * v;
    }
    ex.squared_norm = sq;
  }
  data.stats = compute_stats(data);
}

Partition make_partition(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("partition: need at least one worker");
  if (n < m) throw std::invalid_argument("partition: more workers than examples");

  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng = Rng::stream({seed, kStreamPartition});
  rng.partial_shuffle(order, n);

  Partition part;
  part.assignments.resize(m);
  const std::size_t base = n / m;
  const std::size_t extra = n % m;
  std::size_t pos = 0;
  for (std::size_t l = 0; l < m; ++l) {
    const std::size_t take = base + (l < extra ? 1 : 0);
    part.assignments[l].assign(order.begin() + pos, order.begin() + pos + take);
    pos += take;
  }
  return part;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("gen_synthetic: n and d must be positive");
  if (!(spec.density > 0.0 && spec.density <= 1.0))
    throw std::invalid_argument("gen_synthetic: density must be in (0, 1]");
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 0.5))
    throw std::invalid_argument("gen_synthetic: label_noise must be in [0, 0.5)");

  Rng rng = Rng::stream({spec.seed, kStreamSynthetic});
  std::vector<double> w_true(spec.d);
  for (double& v : w_true) v = rng.normal();

  Dataset data;
  data.dim = spec.d;
  data.examples.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Example ex;
    double margin = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      if (rng.uniform() >= spec.density) continue;
      double v = rng.normal();
      while (v == 0.0) v = rng.normal();  // stored values must be nonzero
      ex.indices.push_back(static_cast<std::uint32_t>(j));
      ex.values.push_back(v);
      ex.squared_norm += v * v;
      margin += v * w_true[j];
    }
    ex.label = margin >= 0.0 ? 1 : -1;
    if (rng.uniform() < spec.label_noise) ex.label = -ex.label;
    data.examples.push_back(std::move(ex));
  }
  data.stats = compute_stats(data);
  return data;
}

}  // namespace dualforge
