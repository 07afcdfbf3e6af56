#pragma once

// Hierarchy container, little-endian:
//   "BWR1" u32 version
//   u32 J, u64 E0, u64 V0, u64 F0
//   f64 flat_epsilon, f64 crease_angle_deg, f64 tilt_angle_deg, f64 reference_diagonal
//   base mesh: V0 x 3 f64, F0 x 3 u32
//   per level j: E0*4^j f64 coefficients, E0*4^j u8 direction sources,
//                u64 residual count, count x (u32 index, 3 f64)
//   u32 CRC32 of everything above

#include <filesystem>
#include <string>

#include "bwr/binary_io.hpp"
#include "bwr/hierarchy.hpp"

namespace bwr {

inline constexpr std::uint32_t kHierarchyVersion = 1;

inline io::Bytes serialize_hierarchy(const MultiresHierarchy& h) {
  io::ByteWriter w;
  w.raw("BWR1");
  w.u32(kHierarchyVersion);
  w.u32(static_cast<std::uint32_t>(h.level_count()));
  w.u64(h.base.edge_count());
  w.u64(h.base.vertex_count());
  w.u64(h.base.face_count());
  w.f64(h.config.flat_epsilon);
  w.f64(h.config.crease_angle_deg);
  w.f64(h.config.tilt_angle_deg);
  w.f64(h.reference_diagonal);
  for (const Vec3& p : h.base.vertices()) {
    w.f64(p.x);
    w.f64(p.y);
    w.f64(p.z);
  }
  for (const Face& t : h.base.faces())
    for (Index i : t) w.u32(i);
  for (std::size_t j = 0; j < h.level_count(); ++j) {
    const LevelCoefficients& lv = h.levels[j];
    if (lv.w.size() != h.coefficient_count(j)) throw IncompatibleError("level size does not match the base mesh");
    for (double c : lv.w) w.f64(c);
    for (std::size_t i = 0; i < lv.w.size(); ++i) {
      w.u8(static_cast<std::uint8_t>(lv.source.empty() ? DirectionSource::NormalFallback : lv.source[i]));
    }
    w.u64(lv.residuals.size());
    for (const Residual& r : lv.residuals) {
      w.u32(r.index);
      w.f64(r.d.x);
      w.f64(r.d.y);
      w.f64(r.d.z);
    }
  }
  w.seal();
  return w.take();
}

inline MultiresHierarchy deserialize_hierarchy(const io::Bytes& bytes) {
  const std::size_t body = io::check_crc(bytes, "hierarchy");
  io::ByteReader r(bytes.data(), body);
  r.expect_magic("BWR1", "hierarchy");
  const std::uint32_t version = r.u32();
  if (version != kHierarchyVersion) {
    throw FormatError("hierarchy: unsupported version " + std::to_string(version));
  }
  MultiresHierarchy h;
  const std::uint32_t levels = r.u32();
  const std::uint64_t e0 = r.u64(), v0 = r.u64(), f0 = r.u64();
  if (levels > 16 || v0 > r.remaining() || f0 > r.remaining()) throw FormatError("hierarchy: implausible header");
  h.config.flat_epsilon = r.f64();
  h.config.crease_angle_deg = r.f64();
  h.config.tilt_angle_deg = r.f64();
  h.reference_diagonal = r.f64();
  std::vector<Vec3> v(v0);
  for (Vec3& p : v) p = {r.f64(), r.f64(), r.f64()};
  std::vector<Face> f(f0);
  for (Face& t : f) t = {r.u32(), r.u32(), r.u32()};
  try {
    h.base = TriangleMesh(std::move(v), std::move(f));
  } catch (const ValidationError& e) {
    throw FormatError(std::string("hierarchy: invalid base mesh: ") + e.what());
  }
  if (h.base.edge_count() != e0) throw FormatError("hierarchy: edge count does not match the base mesh");
  for (std::uint32_t j = 0; j < levels; ++j) {
    LevelCoefficients lv;
    const std::size_t m = h.coefficient_count(j);
    if (m > r.remaining()) throw FormatError("truncated data");
    lv.w.resize(m);
    for (double& c : lv.w) c = r.f64();
    lv.source.resize(m);
    for (auto& s : lv.source) {
      const std::uint8_t b = r.u8();
      if (b > static_cast<std::uint8_t>(DirectionSource::RetryEndpointB)) throw FormatError("hierarchy: bad direction source");
      s = static_cast<DirectionSource>(b);
    }
    const std::uint64_t nres = r.u64();
    if (nres > m) throw FormatError("hierarchy: too many residuals");
    lv.residuals.resize(nres);
    for (Residual& res : lv.residuals) {
      res.index = r.u32();
      res.d = {r.f64(), r.f64(), r.f64()};
    }
    h.levels.push_back(std::move(lv));
  }
  if (r.remaining() != 0) throw FormatError("hierarchy: trailing bytes");
  return h;
}

inline void save_hierarchy(const MultiresHierarchy& h, const std::filesystem::path& path) {
  io::write_file(path, serialize_hierarchy(h));
}

inline MultiresHierarchy load_hierarchy(const std::filesystem::path& path) {
  return deserialize_hierarchy(io::read_file(path));
}

}  // namespace bwr
