#pragma once

// Rate-distortion sweeps over (level, bpv) and the best level per budget.

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "bwr/coding.hpp"
#include "bwr/metrics.hpp"

namespace bwr {

struct RdRow {
  std::size_t level = 0;
  double bpv = 0.0;
  std::uint64_t budget_bits = 0;
  std::uint64_t bits_used = 0;
  DistanceReport distance;
};

struct RdTable {
  std::vector<RdRow> rows;
  /// Indices into rows: for each distinct payload budget (ascending), the
  /// row with the highest PSNR among rows that fit the budget.
  std::vector<std::size_t> recommended;
};

inline RdTable rd_curve(const Bitstream& bs, const TriangleMesh& reference, const std::vector<std::size_t>& levels,
                        const std::vector<double>& bpv_grid, const SamplingConfig& sampling = {}, unsigned threads = 0,
                        FillRule fill = FillRule::LowerBound) {
  RdTable t;
  for (std::size_t j : levels)
    for (double bpv : bpv_grid) {
      const Reconstruction rec = reconstruct_at_bpv(bs, bpv, j, &reference, sampling, threads, fill);
      t.rows.push_back({j, bpv, rec.budget_bits, rec.bits_used, *rec.distance});
    }
  std::vector<std::uint64_t> budgets;
  for (const RdRow& r : t.rows) budgets.push_back(r.bits_used);
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
  for (std::uint64_t b : budgets) {
    std::size_t best = t.rows.size();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (t.rows[i].bits_used > b) continue;
      if (best == t.rows.size() || t.rows[i].distance.psnr_db > t.rows[best].distance.psnr_db) best = i;
    }
    if (t.recommended.empty() || t.recommended.back() != best) t.recommended.push_back(best);
  }
  return t;
}

inline constexpr const char* kRdCsvHeader = "level,bpv,psnr_db,l2_error,mean_fwd,rms_fwd,max_fwd,mean_bwd,rms_bwd,max_bwd";

inline std::string rd_csv_line(const RdRow& r) {
  char buf[512];
  const DistanceReport& d = r.distance;
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.level, r.bpv, d.psnr_db,
                d.l2_error, d.forward.mean, d.forward.rms, d.forward.max, d.backward.mean, d.backward.rms, d.backward.max);
  return buf;
}

inline void write_rd_csv(std::ostream& os, const RdTable& t) {
  os << kRdCsvHeader << '\n';
  for (const RdRow& r : t.rows) os << rd_csv_line(r) << '\n';
}

}  // namespace bwr
