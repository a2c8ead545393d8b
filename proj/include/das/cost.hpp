#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace das {

struct CostRow {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

// Per-layer parameter and multiply-accumulate counts.
struct CostReport {
  std::vector<CostRow> rows;
  // Counting conventions that are not self-evident from the rows.
  std::vector<std::string> notes;

  void add(std::string name, std::uint64_t params, std::uint64_t macs) {
    rows.push_back({std::move(name), params, macs});
  }
  std::uint64_t total_params() const;
  std::uint64_t total_macs() const;

  // `name,params,macs` with a trailing `total` row; notes follow as `# ` lines.
  void write_csv(std::ostream& os) const;
};

}  // namespace das
