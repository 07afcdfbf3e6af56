// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "bwr/bwr.hpp"
#include "corpus.hpp"

using namespace bwr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Appends a formatted fragment to the detail string.
__attribute__((format(printf, 2, 3))) void note(Verdict& v, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  if (!v.detail.empty()) v.detail += "; ";
  v.detail += buf;
}

void require(Verdict& v, bool ok, const std::string& what) {
  if (!ok) {
    v.pass = false;
    note(v, "FAILED %s", what.c_str());
  }
}

// Pierce queries of level j, rebuilt from M^j and the stored sources.
std::vector<PierceQuery> level_queries(const TriangleMesh& coarse, const LevelCoefficients& level, const DirectionConfig& cfg) {
  const SubdivisionStep step = midpoint_subdivide(coarse);
  const auto dirs = compute_directions(step, cfg);
  const auto normals = vertex_normals(coarse);
  std::vector<PierceQuery> q(step.new_vertex_count());
  for (std::size_t e = 0; e < q.size(); ++e) {
    const Edge& pe = coarse.edge(e);
    const Vec3& na = normals[pe.a];
    const Vec3& nb = normals[pe.b];
    q[e] = {step.child().vertex(coarse.vertex_count() + e), detail::level_direction(dirs[e], level.source[e], na, nb),
            normalized(na + nb)};
  }
  return q;
}

Verdict criterion1() {
  Verdict v;
  const auto t0 = Clock::now();
  const TriangleMesh ref = shapes::icosphere(4);
  const RemeshResult r = bwr_remesh(shapes::octahedron_base(ref), ref, 5);
  for (std::size_t j = 1; j <= 5; ++j) {
    const TriangleMesh m = synthesize(r.hierarchy, j);
    const std::size_t ve = (std::size_t{1} << (2 * j + 2)) + 2, fe = 8 * (std::size_t{1} << (2 * j));
    require(v, m.vertex_count() == ve && m.face_count() == fe, "counts at J=" + std::to_string(j));
  }
  const double s = seconds_since(t0);
  note(v, "V_5=%zu F_5=%zu in %.2f s", r.mesh.vertex_count(), r.mesh.face_count(), s);
  require(v, s < 5.0, "runtime < 5 s");
  return v;
}

Verdict criterion2() {
  Verdict v;
  const TriangleMesh ref = shapes::icosphere(5);
  const double diag = ref.bbox().diagonal();
  RemeshConfig cfg;
  cfg.mode = PierceMode::FullSearch;
  const auto t0 = Clock::now();
  RemeshResult r;
  try {
    r = bwr_remesh(shapes::octahedron_base(ref), ref, 4, cfg);
  } catch (const PierceMissError& e) {
    require(v, false, std::string("pierce abort: ") + e.what());
    return v;
  }
  const double s = seconds_since(t0);
  // Independent check: every new vertex lies on some reference face's plane
  // within 1e-9 diag and inside that face.
  std::size_t total = 0, on = 0, retries = 0;
  TriangleMesh coarse = r.hierarchy.base;
  for (std::size_t j = 0; j < 4; ++j) {
    const TriangleMesh fine = synthesize(r.hierarchy, j + 1);
    for (std::size_t i = coarse.vertex_count(); i < fine.vertex_count(); ++i) {
      ++total;
      const Vec3 p = fine.vertex(i);
      for (std::size_t f = 0; f < ref.face_count(); ++f) {
        const auto t = ref.triangle(f);
        if (std::abs(dot(ref.face_normal(f), p - t[0])) > 1e-9 * diag) continue;
        const Barycentric b = barycentric(p, t);
        if (std::min({b.alpha, b.beta, b.gamma}) >= -1e-9) {
          ++on;
          break;
        }
      }
    }
    retries += r.stats[j].retries;
    coarse = fine;
  }
  note(v, "reference %zu faces, %zu/%zu new vertices on their hit plane, 0 aborts, %zu retries, full search %.2f s",
       ref.face_count(), on, total, retries, s);
  require(v, on == total, "incidence");
  require(v, s < 60.0, "runtime < 60 s");
  return v;
}

Verdict criterion3() {
  Verdict v;
  const auto t0 = Clock::now();
  std::size_t lines = 0;
  for (const auto& c : corpus_data::corpus()) {
    RemeshConfig fast_cfg, full_cfg;
    full_cfg.mode = PierceMode::FullSearch;
    const RemeshResult fast = bwr_remesh(c.base, c.reference, 3, fast_cfg);
    const RemeshResult full = bwr_remesh(c.base, c.reference, 3, full_cfg);
    const Piercer piercer(c.reference);
    TriangleMesh coarse = fast.hierarchy.base;
    bool same = true;
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& a = fast.hierarchy.levels[j];
      const auto& b = full.hierarchy.levels[j];
      same = same && a.source == b.source;
      for (std::size_t i = 0; i < a.w.size(); ++i) same = same && std::abs(a.w[i] - b.w[i]) <= 1e-12 * std::abs(b.w[i]);
      const auto q = level_queries(coarse, a, fast.hierarchy.config);
      const PierceBatch pa = pierce_all(q, piercer, PierceMode::Accelerated);
      const PierceBatch pf = pierce_all(q, piercer, PierceMode::FullSearch);
      same = same && pa.misses == pf.misses;
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (!pa.results[i] || !pf.results[i]) continue;
        same = same && pa.results[i]->face == pf.results[i]->face &&
               std::abs(pa.results[i]->w - pf.results[i]->w) <= 1e-12 * std::abs(pf.results[i]->w);
      }
      lines += q.size();
      coarse = synthesize(fast.hierarchy, j + 1);
    }
    require(v, same, c.name);
  }
  const double s = seconds_since(t0);
  note(v, "5 meshes x J=3, %zu lines compared in %.2f s", lines, s);
  require(v, s < 300.0, "runtime < 5 min");
  return v;
}

Verdict criterion4() {
  Verdict v;
  const auto path = std::filesystem::temp_directory_path() / "bwr_acceptance_c4.bwrh";
  for (const auto& c : corpus_data::corpus()) {
    const RemeshResult r = bwr_remesh(c.base, c.reference, 4);
    save_hierarchy(r.hierarchy, path);
    const MultiresHierarchy back = load_hierarchy(path);
    const TriangleMesh a = synthesize(r.hierarchy, 4), b = synthesize(back, 4);
    require(v, a.vertices() == r.mesh.vertices() && a.faces() == r.mesh.faces(), c.name + " synthesize");
    require(v, b.vertices() == r.mesh.vertices() && b.faces() == r.mesh.faces(), c.name + " after save/load");
  }
  std::filesystem::remove(path);
  note(v, "5 meshes at J=4, bitwise equal before and after save/load");
  return v;
}

// Upper bound on how far a tessellation of the unit sphere strays from it:
// 1 minus the smallest face-plane distance to the centre.
double sphere_deviation(const TriangleMesh& m) {
  double dev = 0;
  for (std::size_t f = 0; f < m.face_count(); ++f) dev = std::max(dev, 1.0 - std::abs(dot(m.face_normal(f), m.triangle(f)[0])));
  for (const Vec3& p : m.vertices()) dev = std::max(dev, std::abs(norm(p) - 1.0));
  return dev;
}

Verdict criterion5() {
  Verdict v;
  const TriangleMesh ico = shapes::icosphere(5);
  const TriangleMesh uv = shapes::uv_sphere(64, 128);
  const TriangleMesh base = shapes::octahedron_base(ico);
  const double tol = 2.0 * std::max(sphere_deviation(ico), sphere_deviation(uv));
  const RemeshResult a = bwr_remesh(base, ico, 4);
  const RemeshResult b = bwr_remesh(base, uv, 4);
  double worst = 0;
  for (std::size_t j = 0; j <= 4; ++j) {
    const TriangleMesh ma = synthesize(a.hierarchy, j), mb = synthesize(b.hierarchy, j);
    require(v, ma.faces() == mb.faces() && ma.vertex_count() == mb.vertex_count(), "adjacency at J=" + std::to_string(j));
    for (std::size_t i = 0; i < ma.vertex_count(); ++i) worst = std::max(worst, norm(ma.vertex(i) - mb.vertex(i)));
  }
  note(v, "faces identical at J=0..4; max position gap %.3g vs bound %.3g", worst, tol);
  require(v, worst <= tol, "positions within 2x tessellation deviation");
  return v;
}

Verdict criterion6() {
  Verdict v;
  const double a = psnr(55.08, 0.002883), b = psnr(36.47, 0.001435);
  note(v, "%.4f dB and %.4f dB", a, b);
  require(v, std::abs(a - 85.62) <= 0.01, "85.62");
  require(v, std::abs(b - 88.10) <= 0.01, "88.10");
  return v;
}

// The J=7 icosphere remesh shared by criteria 7 and 8.
struct Deep {
  TriangleMesh reference;
  RemeshResult remesh;
  Bitstream stream;
};

const Deep& deep() {
  static const Deep d = [] {
    Deep x;
    x.reference = shapes::icosphere(6);
    x.remesh = bwr_remesh(shapes::octahedron_base(x.reference), x.reference, 7);
    x.stream = encode_hierarchy(x.remesh.hierarchy);
    return x;
  }();
  return d;
}

Verdict criterion7() {
  Verdict v;
  const Deep& d = deep();
  const CoefficientImage img = map_to_image(d.remesh.hierarchy);
  const auto truth = unmap(img);
  const DecodedImage full = decode_all(d.stream);
  const auto got = full.quantized_levels();
  bool lossless = full.complete;
  for (std::size_t j = 0; j < truth.size(); ++j)
    for (std::size_t i = 0; i < truth[j].size(); ++i) lossless = lossless && got[j][i] == static_cast<double>(truth[j][i]);
  require(v, lossless, "lossless full decode");

  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  std::string errs;
  for (int k = 1; k <= 8; ++k) {
    const auto q = decode(d.stream, d.stream.payload_bits * k / 8).quantized_levels();
    double e = 0;
    for (std::size_t j = 0; j < truth.size(); ++j)
      for (std::size_t i = 0; i < truth[j].size(); ++i) e += std::pow(q[j][i] - static_cast<double>(truth[j][i]), 2);
    monotone = monotone && e <= prev;
    prev = e;
  }
  require(v, monotone, "coefficient L2 non-increasing over 8 budgets");

  const std::size_t V7 = refined_vertex_count(6, 12, 7);
  const Reconstruction r = reconstruct_at_bpv(d.stream, 0.25, 7);
  note(v, "%zu coefficients lossless, 8 budgets monotone, V_7=%zu, 0.25 bpv budget %llu bits, used %llu",
       img.layout->coefficient_count(), V7, static_cast<unsigned long long>(r.budget_bits),
       static_cast<unsigned long long>(r.bits_used));
  require(v, V7 == 65538 && r.budget_bits == 16384 && r.bits_used + 1 >= 16384 && r.bits_used <= 16384, "bpv accounting");
  return v;
}

Verdict criterion8() {
  Verdict v;
  const Deep& d = deep();
  const std::vector<double> grid = {0.125, 0.25, 0.5, 1.0, 2.0};
  const RdTable t = rd_curve(d.stream, d.reference, {6, 7}, grid);
  std::vector<double> p6, p7;
  for (const RdRow& r : t.rows) (r.level == 6 ? p6 : p7).push_back(r.distance.psnr_db);
  for (const auto* p : {&p6, &p7})
    for (std::size_t i = 1; i < p->size(); ++i)
      require(v, (*p)[i] >= (*p)[i - 1], "non-decreasing in bpv at level " + std::string(p == &p6 ? "6" : "7"));
  const double inf = std::numeric_limits<double>::infinity();
  const double full6 = reconstruct_at_bpv(d.stream, inf, 6, &d.reference).distance->psnr_db;
  const double full7 = reconstruct_at_bpv(d.stream, inf, 7, &d.reference).distance->psnr_db;
  note(v, "level 7 PSNR at 0.125/0.25/0.5/1/2 bpv: %.2f/%.2f/%.2f/%.2f/%.2f dB", p7[0], p7[1], p7[2], p7[3], p7[4]);
  note(v, "full budget level 6 %.2f dB, level 7 %.2f dB", full6, full7);
  require(v, full7 > full6, "level J beats level J-1 at full budget");
  const double low = p7[2] - p7[0], high = p7[4] - p7[2];
  note(v, "gain 0.125->0.5 = %.2f dB, 0.5->2 = %.2f dB (%.0f%%)", low, high, 100.0 * high / low);
  require(v, high < 0.1 * low, "plateau: gain 0.5->2 bpv < 10% of gain 0.125->0.5 bpv");
  return v;
}

Verdict criterion9() {
  Verdict v;
  const auto corpus = corpus_data::corpus();
  std::vector<MultiresHierarchy> hs;
  for (std::size_t i : {0, 2, 3}) hs.push_back(bwr_remesh(corpus[i].base, corpus[i].reference, 4).hierarchy);
  std::vector<TriangleMesh> models;
  for (const auto& h : hs) models.push_back(synthesize(h, 4));
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> w(3, 0.0);
    w[i] = 1.0;
    const TriangleMesh m = morph(hs, w, 4);
    require(v, m.vertices() == models[i].vertices() && m.faces() == models[i].faces(), "endpoint " + std::to_string(i));
  }
  double worst = 0;
  bool adjacency = true;
  for (const std::vector<double>& w : {std::vector<double>{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}) {
    const TriangleMesh m = morph(hs, w, 4);
    adjacency = adjacency && m.faces() == models[0].faces();
    for (std::size_t k = 0; k < m.vertex_count(); ++k) {
      Vec3 avg{};
      for (std::size_t i = 0; i < 3; ++i) avg += w[i] * models[i].vertex(k);
      worst = std::max(worst, norm(m.vertex(k) - avg));
    }
  }
  note(v, "3 endpoints exact, 3 blends within %.3g of per-vertex averages", worst);
  require(v, worst <= 1e-12, "blend equals per-vertex average");
  require(v, adjacency, "shared adjacency");
  return v;
}

Verdict criterion10() {
  Verdict v;
  struct Point {
    std::size_t m, f;
    double full, fast;
  };
  std::vector<Point> pts;
  for (int ref_level : {4, 5}) {
    const TriangleMesh ref = shapes::icosphere(ref_level);
    const Piercer piercer(ref);
    for (int coarse_level : {1, 2}) {
      const TriangleMesh coarse = shapes::octasphere(coarse_level);
      std::vector<PierceQuery> q;
      for (const Edge& e : coarse.edges()) {
        const Vec3 o = 0.5 * (coarse.vertex(e.a) + coarse.vertex(e.b));
        q.push_back({o, normalized(o), normalized(o)});
      }
      auto best_time = [&](PierceMode mode) {
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 5; ++rep) {
          const auto t0 = Clock::now();
          const PierceBatch b = pierce_all(q, piercer, mode, 1);
          best = std::min(best, seconds_since(t0));
          if (!b.misses.empty()) throw std::runtime_error("timing lines missed");
        }
        return best;
      };
      pts.push_back({q.size(), ref.face_count(), best_time(PierceMode::FullSearch), best_time(PierceMode::Accelerated)});
    }
  }
  // Least-squares fit t = k m f through the origin.
  double num = 0, den = 0;
  for (const Point& p : pts) {
    const double x = static_cast<double>(p.m) * static_cast<double>(p.f);
    num += x * p.full;
    den += x * x;
  }
  const double k = num / den;
  double worst = 0;
  for (const Point& p : pts) {
    const double dev = p.full / (k * static_cast<double>(p.m) * static_cast<double>(p.f)) - 1.0;
    worst = std::max(worst, std::abs(dev));
    note(v, "m=%zu f=%zu full %.4f s accel %.5f s", p.m, p.f, p.full, p.fast);
  }
  note(v, "max deviation from linear fit %.1f%%", 100.0 * worst);
  require(v, worst <= 0.30, "linear in m*f within 30%");
  const Point& big = pts.back();
  require(v, big.m == 192 && big.f == 20480 && big.fast < big.full, "accelerated faster at the largest point");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::function<Verdict()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                          criterion6, criterion7, criterion8, criterion9, criterion10};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i]();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += !v.pass;
    std::printf("criterion %zu: %s (%s)\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed ? 1 : 0;
}
