// bwr: remeshing, synthesis, morphing, coding and measurement from the shell.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 parse or validation error,
// 3 genus mismatch, 4 pierce abort, 5 incompatible hierarchies.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "bwr/bwr.hpp"

namespace {

using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitGenus = 3;
constexpr int kExitPierce = 4;
constexpr int kExitIncompatible = 5;

void emit(const json& j) { std::cout << j.dump() << '\n'; }

// JSON has no infinity; +inf PSNR is written as null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json directional(const bwr::DirectionalDistance& d) {
  return {{"mean", d.mean}, {"rms", d.rms}, {"max", d.max}, {"samples", d.samples}};
}

json distance_json(const bwr::DistanceReport& r) {
  json j = {{"forward", directional(r.forward)},
            {"backward", directional(r.backward)},
            {"hausdorff", r.hausdorff},
            {"l2_error", r.l2_error},
            {"bbox_diagonal", r.bbox_diagonal},
            {"psnr_db", number_or_null(r.psnr_db)}};
  if (r.bpv) j["bpv"] = *r.bpv;
  return j;
}

unsigned threads_from_env() {
  const char* s = std::getenv("BWR_THREADS");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end || v < 0) throw bwr::ValidationError(std::string("BWR_THREADS is not a non-negative integer: ") + s);
  return static_cast<unsigned>(v);
}

double parse_bpv(const std::string& s) {
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw bwr::ValidationError("bad bpv value: " + s);
  }
  if (used != s.size() || !(v >= 0)) throw bwr::ValidationError("bad bpv value: " + s);
  return v;
}

// Shape specs: name[:param...], e.g. icosphere:4, uvsphere:32:64, torus:1:0.4:48:24.
bwr::TriangleMesh generate(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) throw bwr::ValidationError("empty shape spec");
  const std::string& name = parts[0];
  auto num = [&](std::size_t i) {
    if (i >= parts.size()) throw bwr::ValidationError("shape " + name + " needs more parameters");
    try {
      return std::stod(parts[i]);
    } catch (const std::exception&) {
      throw bwr::ValidationError("bad shape parameter: " + parts[i]);
    }
  };
  auto count = [&](std::size_t n) {
    if (parts.size() != n + 1) throw bwr::ValidationError("shape " + name + " takes " + std::to_string(n) + " parameters");
  };
  using namespace bwr::shapes;
  if (name == "octahedron") return count(0), octahedron();
  if (name == "tetrahedron") return count(0), tetrahedron();
  if (name == "cube") return count(0), cube();
  if (name == "icosahedron") return count(0), icosahedron();
  if (name == "icosphere") return count(1), icosphere(static_cast<int>(num(1)));
  if (name == "octasphere") return count(1), octasphere(static_cast<int>(num(1)));
  if (name == "uvsphere") return count(2), uv_sphere(static_cast<int>(num(1)), static_cast<int>(num(2)));
  if (name == "torus") return count(4), torus(num(1), num(2), static_cast<int>(num(3)), static_cast<int>(num(4)));
  if (name == "bumpy") return count(3), bumpy_sphere(static_cast<int>(num(1)), num(2), num(3));
  if (name == "ellipsoid") {
    count(4);
    const double sx = num(2), sy = num(3), sz = num(4);
    return deform(icosphere(static_cast<int>(num(1))), [&](const bwr::Vec3& p) { return bwr::Vec3{sx * p.x, sy * p.y, sz * p.z}; });
  }
  throw bwr::ValidationError("unknown shape: " + name);
}

struct Options {
  unsigned threads = 0;
  // remesh
  std::string base, ref, out, mesh_out;
  std::size_t levels = 0;
  bool snap = false, full_search = false, fail_on_fold = false;
  bwr::DirectionConfig direction;
  double fold_floor = 5.0;
  // synth / morph / coding
  std::string hier, coef_from, stream, fill = "lower";
  std::optional<std::size_t> level;
  std::size_t from_level = 0;
  std::vector<std::string> hiers;
  std::vector<double> weights;
  std::optional<double> step;
  std::string bpv = "inf";
  // metro / rd
  std::string a, b, csv;
  double samples_per_area = 0.0;
  std::uint64_t seed = bwr::SamplingConfig{}.seed;
  bool max_directional = false;
  std::vector<std::size_t> rd_levels;
  std::vector<std::string> grid = {"0.125", "0.25", "0.5", "1", "2", "4"};
  // gen
  std::string shape, base_of;
};

bwr::SamplingConfig sampling(const Options& o) {
  bwr::SamplingConfig c;
  c.samples_per_area = o.samples_per_area;
  c.seed = o.seed;
  c.l2_from_max_directional = o.max_directional;
  c.threads = o.threads;
  return c;
}

bwr::FillRule fill_rule(const Options& o) {
  if (o.fill == "lower") return bwr::FillRule::LowerBound;
  if (o.fill == "mid") return bwr::FillRule::MidInterval;
  throw bwr::ValidationError("--fill must be lower or mid");
}

int cmd_remesh(const Options& o) {
  const bwr::TriangleMesh ref = bwr::load_mesh(o.ref);
  bwr::TriangleMesh base = bwr::load_mesh(o.base);
  if (o.snap) base = bwr::snap_base(base, ref);
  bwr::RemeshConfig cfg;
  cfg.direction = o.direction;
  cfg.mode = o.full_search ? bwr::PierceMode::FullSearch : bwr::PierceMode::Accelerated;
  cfg.fold_floor_deg = o.fold_floor;
  cfg.fail_on_fold = o.fail_on_fold;
  cfg.threads = o.threads;
  std::cerr << "remeshing " << base.face_count() << "-face base onto " << ref.face_count() << "-face reference, "
            << o.levels << " levels\n";
  const bwr::RemeshResult r = bwr::bwr_remesh(base, ref, o.levels, cfg);
  bwr::save_hierarchy(r.hierarchy, o.out);
  if (!o.mesh_out.empty()) bwr::save_mesh(r.mesh, o.mesh_out);
  double total = 0;
  std::size_t folds = 0;
  for (const bwr::LevelStats& s : r.stats) {
    total += s.seconds;
    folds += s.folds.zero_area_faces.size() + s.folds.sharp_edges.size();
    emit({{"coefficient_level", s.level},
          {"coefficients", r.hierarchy.coefficient_count(s.level)},
          {"mesh_level", s.level + 1},
          {"vertices", s.vertices},
          {"faces", s.faces},
          {"new_vertices", s.new_vertices},
          {"butterfly", s.butterfly},
          {"normal_fallback", s.normal_fallback},
          {"retries", s.retries},
          {"chose_positive", s.chose_positive},
          {"chose_negative", s.chose_negative},
          {"zero_area_faces", s.folds.zero_area_faces.size()},
          {"sharp_edges", s.folds.sharp_edges.size()},
          {"seconds", s.seconds}});
  }
  emit({{"command", "remesh"},
        {"levels", o.levels},
        {"base_vertices", base.vertex_count()},
        {"base_edges", base.edge_count()},
        {"vertices", r.mesh.vertex_count()},
        {"faces", r.mesh.face_count()},
        {"seconds", total},
        {"out", o.out}});
  if (folds) std::cerr << "warning: " << folds << " fold indicators reported\n";
  return 0;
}

std::size_t level_or_top(const Options& o, std::size_t top) {
  const std::size_t j = o.level.value_or(top);
  if (j > top) throw bwr::ValidationError("level " + std::to_string(j) + " exceeds stored " + std::to_string(top));
  return j;
}

int cmd_synth(const Options& o) {
  const bwr::MultiresHierarchy h = bwr::load_hierarchy(o.hier);
  const std::size_t j = level_or_top(o, h.level_count());
  bwr::TriangleMesh m;
  if (o.coef_from.empty()) {
    m = bwr::synthesize(h, j, {}, o.threads);
  } else {
    const bwr::MultiresHierarchy donor = bwr::load_hierarchy(o.coef_from);
    m = bwr::synthesize_mixed(h, donor, j, o.from_level, o.threads);
  }
  bwr::save_mesh(m, o.out);
  emit({{"command", "synth"}, {"level", j}, {"vertices", m.vertex_count()}, {"faces", m.face_count()}, {"out", o.out}});
  return 0;
}

int cmd_morph(const Options& o) {
  if (o.hiers.size() != o.weights.size()) throw bwr::ValidationError("--hiers and --weights differ in length");
  std::vector<bwr::MultiresHierarchy> hs;
  for (const std::string& p : o.hiers) hs.push_back(bwr::load_hierarchy(p));
  std::size_t top = std::numeric_limits<std::size_t>::max();
  for (const auto& h : hs) top = std::min(top, h.level_count());
  const std::size_t j = level_or_top(o, hs.empty() ? 0 : top);
  const bwr::TriangleMesh m = bwr::morph(hs, o.weights, j, o.threads);
  bwr::save_mesh(m, o.out);
  emit({{"command", "morph"}, {"level", j}, {"vertices", m.vertex_count()}, {"weights", o.weights}, {"out", o.out}});
  return 0;
}

int cmd_encode(const Options& o) {
  const bwr::MultiresHierarchy h = bwr::load_hierarchy(o.hier);
  const bwr::Bitstream bs = bwr::encode_hierarchy(h, o.step);
  bwr::save_bitstream(bs, o.out);
  emit({{"command", "encode"},
        {"levels", bs.levels},
        {"step", bs.step},
        {"planes", bs.planes},
        {"payload_bits", bs.payload_bits},
        {"overhead_bits", bwr::overhead_bits(bs)},
        {"retries", bs.retries.size()},
        {"out", o.out}});
  return 0;
}

int cmd_decode(const Options& o) {
  const bwr::Bitstream bs = bwr::load_bitstream(o.stream);
  const std::size_t j = level_or_top(o, bs.levels);
  std::optional<bwr::TriangleMesh> ref;
  if (!o.ref.empty()) ref = bwr::load_mesh(o.ref);
  const bwr::Reconstruction r =
      bwr::reconstruct_at_bpv(bs, parse_bpv(o.bpv), j, ref ? &*ref : nullptr, sampling(o), o.threads, fill_rule(o));
  bwr::save_mesh(r.mesh, o.out);
  json out = {{"command", "decode"},
              {"level", r.level},
              {"vertices", r.mesh.vertex_count()},
              {"budget_bits", r.budget_bits},
              {"bits_used", r.bits_used},
              {"achieved_bpv", r.achieved_bpv},
              {"out", o.out}};
  if (r.budget_bits == std::numeric_limits<std::uint64_t>::max()) out["budget_bits"] = nullptr;
  if (r.distance) out["distance"] = distance_json(*r.distance);
  emit(out);
  return 0;
}

int cmd_metro(const Options& o) {
  const bwr::DistanceReport r = bwr::surface_distance(bwr::load_mesh(o.a), bwr::load_mesh(o.b), sampling(o));
  json out = distance_json(r);
  out["command"] = "metro";
  emit(out);
  return 0;
}

int cmd_rd(const Options& o) {
  const bwr::Bitstream bs = bwr::load_bitstream(o.stream);
  const bwr::TriangleMesh ref = bwr::load_mesh(o.ref);
  std::vector<std::size_t> levels = o.rd_levels;
  if (levels.empty())
    for (std::size_t j = 0; j <= bs.levels; ++j) levels.push_back(j);
  std::vector<double> grid;
  for (const std::string& s : o.grid) grid.push_back(parse_bpv(s));
  const bwr::RdTable t = bwr::rd_curve(bs, ref, levels, grid, sampling(o), o.threads, fill_rule(o));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const bwr::RdRow& r = t.rows[i];
    emit({{"level", r.level},
          {"bpv", number_or_null(r.bpv)},
          {"bits_used", r.bits_used},
          {"psnr_db", number_or_null(r.distance.psnr_db)},
          {"l2_error", r.distance.l2_error},
          {"recommended", std::find(t.recommended.begin(), t.recommended.end(), i) != t.recommended.end()}});
  }
  if (!o.csv.empty()) {
    std::ofstream f(o.csv, std::ios::binary);
    if (!f) throw bwr::IoError("cannot write " + o.csv);
    bwr::write_rd_csv(f, t);
    if (!f.flush()) throw bwr::IoError("cannot write " + o.csv);
  }
  return 0;
}

int cmd_gen(const Options& o) {
  bwr::TriangleMesh m;
  if (!o.base_of.empty()) {
    if (!o.shape.empty()) throw bwr::ValidationError("--shape and --octahedron-base-of are exclusive");
    m = bwr::shapes::octahedron_base(bwr::load_mesh(o.base_of));
  } else {
    if (o.shape.empty()) throw bwr::ValidationError("gen needs --shape or --octahedron-base-of");
    m = generate(o.shape);
  }
  bwr::save_mesh(m, o.out);
  emit({{"command", "gen"}, {"vertices", m.vertex_count()}, {"faces", m.face_count()}, {"out", o.out}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Backward wavelet remeshing and progressive coding of triangle meshes"};
  app.require_subcommand(1);

  auto threads = [&](CLI::App* c) { c->add_option("--threads", o.threads, "worker threads (0 = all cores; env BWR_THREADS)"); };
  auto sampling_flags = [&](CLI::App* c) {
    c->add_option("--samples-per-area", o.samples_per_area, "area samples per unit area (0 = automatic)")->check(CLI::NonNegativeNumber);
    c->add_option("--seed", o.seed, "sampling seed");
    c->add_flag("--max-directional", o.max_directional, "L2 error from the larger directional RMS");
  };

  CLI::App* remesh = app.add_subcommand("remesh", "fit a semi-regular hierarchy to a reference mesh");
  remesh->add_option("--base", o.base, "base mesh (OFF/OBJ)")->required();
  remesh->add_option("--ref", o.ref, "reference mesh (OFF/OBJ)")->required();
  remesh->add_option("--levels", o.levels, "refinement levels J")->required();
  remesh->add_option("--out", o.out, "hierarchy file")->required();
  remesh->add_option("--mesh-out", o.mesh_out, "also write M^J");
  remesh->add_flag("--snap", o.snap, "snap base vertices to their nearest reference vertices");
  remesh->add_flag("--full-search", o.full_search, "test every reference face per line");
  remesh->add_option("--flat-eps", o.direction.flat_epsilon, "butterfly length floor relative to mean edge length");
  remesh->add_option("--crease-deg", o.direction.crease_angle_deg, "crease angle threshold");
  remesh->add_option("--tilt-deg", o.direction.tilt_angle_deg, "butterfly tilt threshold");
  remesh->add_option("--fold-floor", o.fold_floor, "dihedral angle floor for fold reports");
  remesh->add_flag("--fail-on-fold", o.fail_on_fold, "abort when a fold is detected");
  threads(remesh);

  CLI::App* synth = app.add_subcommand("synth", "synthesize a level of a hierarchy");
  synth->add_option("--hier", o.hier, "hierarchy file")->required();
  synth->add_option("--level", o.level, "level j (default: finest)");
  synth->add_option("--coef-from", o.coef_from, "take coefficients from this hierarchy");
  synth->add_option("--from-level", o.from_level, "first level taken from --coef-from");
  synth->add_option("--out", o.out, "output mesh")->required();
  threads(synth);

  CLI::App* morph = app.add_subcommand("morph", "weighted blend of hierarchies at one level");
  morph->add_option("--hiers", o.hiers, "hierarchy files")->required();
  morph->add_option("--weights", o.weights, "weights summing to 1")->required();
  morph->add_option("--level", o.level, "level j (default: finest common)");
  morph->add_option("--out", o.out, "output mesh")->required();
  threads(morph);

  CLI::App* encode = app.add_subcommand("encode", "bitplane-code a hierarchy");
  encode->add_option("--hier", o.hier, "hierarchy file")->required();
  encode->add_option("--out", o.out, "bitstream file")->required();
  encode->add_option("--step", o.step, "quantizer step (default: diagonal * 2^-16)");

  CLI::App* decode = app.add_subcommand("decode", "reconstruct a level from a bitstream prefix");
  decode->add_option("--stream", o.stream, "bitstream file")->required();
  decode->add_option("--bpv", o.bpv, "bits per vertex of the target level, or inf");
  decode->add_option("--level", o.level, "level j (default: finest)");
  decode->add_option("--ref", o.ref, "reference mesh for PSNR");
  decode->add_option("--out", o.out, "output mesh")->required();
  decode->add_option("--fill", o.fill, "estimate inside the known interval: lower or mid");
  sampling_flags(decode);
  threads(decode);

  CLI::App* metro = app.add_subcommand("metro", "two-sided sampled surface distance");
  metro->add_option("--a", o.a, "first mesh")->required();
  metro->add_option("--b", o.b, "second mesh (PSNR diagonal)")->required();
  sampling_flags(metro);
  threads(metro);

  CLI::App* rd = app.add_subcommand("rd", "rate-distortion table over levels and bpv");
  rd->add_option("--stream", o.stream, "bitstream file")->required();
  rd->add_option("--ref", o.ref, "reference mesh")->required();
  rd->add_option("--levels", o.rd_levels, "levels (default: all)");
  rd->add_option("--grid", o.grid, "bpv values");
  rd->add_option("--csv", o.csv, "write the CSV table here");
  rd->add_option("--fill", o.fill, "estimate inside the known interval: lower or mid");
  sampling_flags(rd);
  threads(rd);

  CLI::App* gen = app.add_subcommand("gen", "write a synthetic test mesh");
  gen->add_option("--shape", o.shape, "icosphere:N, octasphere:N, uvsphere:S:L, torus:R:r:U:V, bumpy:N:A:F, ellipsoid:N:X:Y:Z, ...");
  gen->add_option("--octahedron-base-of", o.base_of, "octahedron base snapped to this mesh's extreme vertices");
  gen->add_option("--out", o.out, "output mesh")->required();

  try {
    o.threads = threads_from_env();
    app.parse(argc, argv);
    if (remesh->parsed()) return cmd_remesh(o);
    if (synth->parsed()) return cmd_synth(o);
    if (morph->parsed()) return cmd_morph(o);
    if (encode->parsed()) return cmd_encode(o);
    if (decode->parsed()) return cmd_decode(o);
    if (metro->parsed()) return cmd_metro(o);
    if (rd->parsed()) return cmd_rd(o);
    if (gen->parsed()) return cmd_gen(o);
    return kExitValidation;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const bwr::GenusMismatchError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitGenus;
  } catch (const bwr::PierceMissError& e) {
    std::cerr << "error: " << e.what() << '\n';
    emit({{"error", "pierce_miss"}, {"level", e.level()}, {"vertex", e.vertex()}});
    return kExitPierce;
  } catch (const bwr::IncompatibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIncompatible;
  } catch (const bwr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}
