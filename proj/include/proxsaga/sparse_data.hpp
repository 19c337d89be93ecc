#pragma once

// Row-major sparse datasets and LibSVM text I/O.

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "proxsaga/error.hpp"

namespace proxsaga {

using index_t = std::uint32_t;

/// Nonzeros of one row: parallel spans of column ids and values.
struct RowView {
  std::span<const index_t> cols;
  std::span<const double> vals;

  std::size_t size() const noexcept { return cols.size(); }
  bool empty() const noexcept { return cols.empty(); }

  double dot(std::span<const double> x) const noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) acc += vals[k] * x[cols[k]];
    return acc;
  }

  double squared_norm() const noexcept {
    double acc = 0.0;
    for (double v : vals) acc += v * v;
    return acc;
  }
};

/// Compressed sparse row matrix with 0-based, strictly increasing column ids per row.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<index_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }

  RowView row(std::size_t i) const noexcept {
    const std::size_t begin = row_offsets[i];
    const std::size_t len = row_offsets[i + 1] - begin;
    return {std::span<const index_t>(col_indices).subspan(begin, len),
            std::span<const double>(values).subspan(begin, len)};
  }

  /// Throws InvalidArgument if any structural invariant is violated.
  void validate() const {
    if (row_offsets.size() != n_rows + 1 || row_offsets.front() != 0 ||
        row_offsets.back() != values.size() ||
        col_indices.size() != values.size()) {
      throw InvalidArgument("CsrMatrix: inconsistent offsets or array sizes");
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1]) {
        throw InvalidArgument("CsrMatrix: row offsets not monotone at row " +
                              std::to_string(i));
      }
      for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        if (col_indices[k] >= n_cols) {
          throw InvalidArgument("CsrMatrix: column index out of range in row " +
                                std::to_string(i));
        }
        if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1]) {
          throw InvalidArgument("CsrMatrix: columns not strictly increasing in row " +
                                std::to_string(i));
        }
        if (!std::isfinite(values[k])) {
          throw InvalidArgument("CsrMatrix: non-finite value in row " +
                                std::to_string(i));
        }
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

/// Incremental row-by-row CSR construction.
class CsrBuilder {
 public:
  explicit CsrBuilder(std::size_t n_cols = 0) { m_.n_cols = n_cols; }

  void push(index_t col, double value) {
    m_.col_indices.push_back(col);
    m_.values.push_back(value);
    if (static_cast<std::size_t>(col) + 1 > m_.n_cols) m_.n_cols = col + 1;
  }

  void end_row() {
    m_.row_offsets.push_back(m_.values.size());
    ++m_.n_rows;
  }

  CsrMatrix finish() && {
    m_.validate();
    return std::move(m_);
  }

 private:
  CsrMatrix m_;
};

struct Dataset {
  CsrMatrix features;
  std::vector<double> labels;

  std::size_t n_samples() const noexcept { return features.n_rows; }
  std::size_t n_features() const noexcept { return features.n_cols; }

  void validate() const {
    features.validate();
    if (labels.size() != features.n_rows) {
      throw InvalidArgument("Dataset: labels length differs from row count");
    }
    for (double b : labels) {
      if (!std::isfinite(b)) throw InvalidArgument("Dataset: non-finite label");
    }
  }

  bool has_binary_labels() const noexcept {
    return std::all_of(labels.begin(), labels.end(),
                       [](double b) { return b == 1.0 || b == -1.0; });
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct LibsvmOptions {
  /// Feature dimension; inferred as the largest index seen when empty.
  std::optional<std::size_t> n_cols;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view token, std::size_t line) {
  // from_chars rejects a leading '+', which LibSVM labels commonly carry.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(ParseErrorKind::malformed_token, line,
                     "'" + std::string(token) + "' is not a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError(ParseErrorKind::non_finite_value, line, std::string(token));
  }
  return value;
}

inline std::uint64_t parse_index(std::string_view token, std::size_t line) {
  std::uint64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value == 0) {
    throw ParseError(ParseErrorKind::malformed_token, line,
                     "'" + std::string(token) + "' is not a 1-based index");
  }
  return value;
}

inline void format_double(std::ostream& os, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, ptr - buf);
}

}  // namespace detail

/// Reads LibSVM text: one sample per line, `label idx:val ...`, 1-based increasing indices.
/// Blank lines are skipped.
inline Dataset parse_libsvm(std::istream& in, const LibsvmOptions& options = {}) {
  CsrBuilder builder(options.n_cols.value_or(0));
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t max_index = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = detail::trim(line);
    if (rest.empty()) continue;

    auto next_token = [&rest]() {
      const auto end = rest.find_first_of(" \t");
      std::string_view tok = rest.substr(0, end);
      rest = end == std::string_view::npos ? std::string_view{}
                                           : detail::trim(rest.substr(end));
      return tok;
    };

    data.labels.push_back(detail::parse_double(next_token(), line_no));
    std::uint64_t previous = 0;
    while (!rest.empty()) {
      const std::string_view tok = next_token();
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(ParseErrorKind::malformed_token, line_no,
                         "expected idx:val, got '" + std::string(tok) + "'");
      }
      const std::uint64_t index = detail::parse_index(tok.substr(0, colon), line_no);
      const double value = detail::parse_double(tok.substr(colon + 1), line_no);
      if (index <= previous) {
        throw ParseError(ParseErrorKind::non_increasing_index, line_no,
                         "index " + std::to_string(index) + " after " +
                             std::to_string(previous));
      }
      if (index > std::numeric_limits<index_t>::max() ||
          (options.n_cols && index > *options.n_cols)) {
        throw ParseError(ParseErrorKind::dimension_overflow, line_no,
                         "index " + std::to_string(index) + " exceeds dimension");
      }
      previous = index;
      max_index = std::max(max_index, index);
      builder.push(static_cast<index_t>(index - 1), value);
    }
    builder.end_row();
  }
  if (in.bad()) throw ParseError(ParseErrorKind::io_failure, line_no, "read failed");
  if (data.labels.empty()) throw ParseError(ParseErrorKind::empty_input, 0, "");

  data.features = std::move(builder).finish();
  if (options.n_cols) data.features.n_cols = *options.n_cols;
  return data;
}

inline Dataset parse_libsvm(std::string_view text, const LibsvmOptions& options = {}) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, options);
}

/// Writes shortest round-trip representations so re-parsing is exact.
inline void write_libsvm(std::ostream& out, const Dataset& data) {
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    detail::format_double(out, data.labels[i]);
    const RowView row = data.features.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      out << ' ' << (static_cast<std::uint64_t>(row.cols[k]) + 1) << ':';
      detail::format_double(out, row.vals[k]);
    }
    out << '\n';
  }
}

/// Loads a LibSVM file; paths ending in ".gz" are decompressed with zlib.
inline Dataset load_libsvm(const std::string& path, const LibsvmOptions& options = {}) {
  if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) {
      throw ParseError(ParseErrorKind::io_failure, 0, "cannot open " + path);
    }
    std::string text;
    char buffer[1 << 16];
    int got = 0;
    while ((got = gzread(file, buffer, sizeof(buffer))) > 0) text.append(buffer, got);
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw ParseError(ParseErrorKind::io_failure, 0, "corrupt gzip " + path);
    std::istringstream in(std::move(text));
    return parse_libsvm(in, options);
  }
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::io_failure, 0, "cannot open " + path);
  return parse_libsvm(in, options);
}

inline void save_libsvm(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_libsvm(out, data);
}

}  // namespace proxsaga
