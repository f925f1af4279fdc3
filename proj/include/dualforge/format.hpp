#ifndef DUALFORGE_FORMAT_HPP
#define DUALFORGE_FORMAT_HPP

#include <charconv>
#include <string>

namespace dualforge {

// Shortest decimal that round-trips to the same double. Used everywhere a
// value crosses a text boundary (CSV, LIBSVM, SVG) so output is both
// deterministic and value-exact on re-parse.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace dualforge

#endif  // DUALFORGE_FORMAT_HPP
