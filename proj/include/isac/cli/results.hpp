// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace isac::cli {

struct ResultRow {
  std::string scheme;
  std::string bin;  // speed bin "10-20", SNR "15" or "clean", or a variant/summary label
  double nmse_global = 0.0;
  double nmse_mean = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  /// Header `scheme,bin,nmse_global,nmse_mean,n,seed`; doubles in shortest round-trip form.
  std::string to_csv() const;
  static ResultTable parse_csv(const std::string& text);

  /// Line chart of nmse_global per scheme over the bins, in first-seen bin order.
  std::string to_svg(const std::string& title, const std::string& x_label) const;

  bool operator==(const ResultTable&) const = default;
};

}  // namespace isac::cli
