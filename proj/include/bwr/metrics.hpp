#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "bwr/bvh.hpp"
#include "bwr/error.hpp"
#include "bwr/mesh.hpp"
#include "bwr/parallel.hpp"

namespace bwr {

struct SamplingConfig {
  /// Samples per unit area; 0 selects 4 samples per smallest-face area.
  double samples_per_area = 0.0;
  /// Cap on area samples per mesh; the density is lowered to respect it.
  std::size_t max_samples = 1'000'000;
  std::uint64_t seed = 0x5EED;
  /// L2 error as the larger of the two directional RMS values instead of
  /// the RMS of both directions pooled.
  bool l2_from_max_directional = false;
  unsigned threads = 0;
};

struct DirectionalDistance {
  double mean = 0.0;
  double rms = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
  double sum_squares = 0.0;
};

struct DistanceReport {
  DirectionalDistance forward;   // samples on a, distances to b
  DirectionalDistance backward;  // samples on b, distances to a
  double hausdorff = 0.0;
  double l2_error = 0.0;
  double bbox_diagonal = 0.0;  // of b
  /// +inf when l2_error is zero.
  double psnr_db = 0.0;
  std::optional<double> bpv;
};

/// 20 log10(diagonal / l2_error) in dB.
inline double psnr(double bbox_diagonal, double l2_error) {
  if (!(bbox_diagonal > 0.0) || !(l2_error > 0.0)) throw ValidationError("psnr needs a positive diagonal and error");
  return 20.0 * std::log10(bbox_diagonal / l2_error);
}

namespace detail {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Used vertices plus area-proportional uniform samples inside each face.
/// Depends only on the mesh and the config, never on the other mesh.
inline std::vector<Vec3> sample_surface(const TriangleMesh& mesh, const SamplingConfig& cfg) {
  std::vector<Vec3> pts;
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    if (!mesh.topology().vertex_faces(v).empty()) pts.push_back(mesh.vertex(v));
  }
  double total_area = 0.0;
  double min_area = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const double a = mesh.face_area(f);
    total_area += a;
    if (a > 0.0) min_area = std::min(min_area, a);
  }
  if (!(total_area > 0.0)) return pts;
  double density = cfg.samples_per_area > 0.0 ? cfg.samples_per_area : 4.0 / min_area;
  if (density * total_area > static_cast<double>(cfg.max_samples)) {
    density = static_cast<double>(cfg.max_samples) / total_area;
  }
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const double expected = mesh.face_area(f) * density;
    auto n = static_cast<std::size_t>(expected);
    if (detail::unit_uniform(rng) < expected - static_cast<double>(n)) ++n;
    const auto [a, b, c] = mesh.triangle(f);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sqrt(detail::unit_uniform(rng));
      const double t = detail::unit_uniform(rng);
      pts.push_back((1.0 - s) * a + (s * (1.0 - t)) * b + (s * t) * c);
    }
  }
  return pts;
}

/// Distances from each point to the surface of `target`. Distances below
/// 1e-12 of the target's diagonal are round-off and count as zero.
inline DirectionalDistance point_to_surface(const std::vector<Vec3>& points, const FaceBvh& target, unsigned threads) {
  const double floor = 1e-12 * target.mesh().bbox().diagonal();
  std::vector<double> d(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    const double x = std::sqrt(target.closest_point(points[i]).distance2);
    d[i] = x < floor ? 0.0 : x;
  });
  DirectionalDistance out;
  detail::CompensatedSum sum, sum2;
  for (double x : d) {
    sum.add(x);
    sum2.add(x * x);
    out.max = std::max(out.max, x);
  }
  out.samples = d.size();
  if (out.samples > 0) {
    out.mean = sum.value() / static_cast<double>(out.samples);
    out.sum_squares = sum2.value();
    out.rms = std::sqrt(out.sum_squares / static_cast<double>(out.samples));
  }
  return out;
}

/// Two-sided sampled surface distance between `a` and `b`; PSNR uses the
/// bounding-box diagonal of `b`.
inline DistanceReport surface_distance(const TriangleMesh& a, const TriangleMesh& b, const SamplingConfig& cfg = {}) {
  if (a.face_count() == 0 || b.face_count() == 0) throw ValidationError("surface distance of an empty mesh");
  const FaceBvh bvh_a(a), bvh_b(b);
  DistanceReport r;
  r.forward = point_to_surface(sample_surface(a, cfg), bvh_b, cfg.threads);
  r.backward = point_to_surface(sample_surface(b, cfg), bvh_a, cfg.threads);
  r.hausdorff = std::max(r.forward.max, r.backward.max);
  if (cfg.l2_from_max_directional) {
    r.l2_error = std::max(r.forward.rms, r.backward.rms);
  } else {
    const double n = static_cast<double>(r.forward.samples + r.backward.samples);
    r.l2_error = n > 0 ? std::sqrt((r.forward.sum_squares + r.backward.sum_squares) / n) : 0.0;
  }
  r.bbox_diagonal = b.bbox().diagonal();
  r.psnr_db = r.l2_error > 0.0 ? psnr(r.bbox_diagonal, r.l2_error) : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace bwr
