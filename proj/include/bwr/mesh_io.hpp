#pragma once

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bwr/error.hpp"
#include "bwr/mesh.hpp"

namespace bwr {

enum class MeshFormat { Off, Obj };

inline MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  throw ParseError("cannot infer mesh format from extension '" + ext + "' (expected .off or .obj)");
}

namespace detail {

// Splits on whitespace, dropping anything after '#'.
inline std::vector<std::string_view> tokens(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

inline long long parse_int(std::string_view tok, std::size_t line_no) {
  std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
  return v;
}

inline Index checked_index(long long v, std::size_t line_no) {
  if (v < 0 || v >= static_cast<long long>(kNoIndex)) {
    throw ValidationError("line " + std::to_string(line_no) + ": vertex index " + std::to_string(v) + " out of range");
  }
  return static_cast<Index>(v);
}

inline TriangleMesh read_off(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> toks;

  auto next_tokens = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      toks = tokens(line);
      if (!toks.empty()) return true;
    }
    return false;
  };

  if (!next_tokens()) throw ParseError("empty OFF file");
  if (toks[0].substr(0, 3) != "OFF" || toks[0].size() != 3) throw ParseError("missing OFF header");
  std::vector<std::string_view> counts(toks.begin() + 1, toks.end());
  if (counts.empty()) {
    if (!next_tokens()) throw ParseError("missing OFF counts line");
    counts = toks;
  }
  if (counts.size() < 2) throw ParseError("line " + std::to_string(line_no) + ": expected 'V F [E]'");
  const long long nv = parse_int(counts[0], line_no);
  const long long nf = parse_int(counts[1], line_no);
  if (nv < 0 || nf < 0) throw ParseError("negative element count in OFF header");

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    if (!next_tokens()) throw ParseError("unexpected end of file in vertex block");
    if (toks.size() < 3) throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
    vertices.push_back({parse_double(toks[0], line_no), parse_double(toks[1], line_no), parse_double(toks[2], line_no)});
  }
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(nf));
  for (long long i = 0; i < nf; ++i) {
    if (!next_tokens()) throw ParseError("unexpected end of file in face block");
    const long long n = parse_int(toks[0], line_no);
    if (n != 3) throw ParseError("line " + std::to_string(line_no) + ": only triangular faces are supported");
    if (toks.size() < 4) throw ParseError("line " + std::to_string(line_no) + ": face needs 3 indices");
    faces.push_back({checked_index(parse_int(toks[1], line_no), line_no), checked_index(parse_int(toks[2], line_no), line_no),
                     checked_index(parse_int(toks[3], line_no), line_no)});
  }
  return {std::move(vertices), std::move(faces)};
}

inline TriangleMesh read_obj(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = tokens(line);
    if (toks.empty()) continue;
    if (toks[0] == "v") {
      if (toks.size() < 4) throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
      vertices.push_back({parse_double(toks[1], line_no), parse_double(toks[2], line_no), parse_double(toks[3], line_no)});
    } else if (toks[0] == "f") {
      if (toks.size() != 4) throw ParseError("line " + std::to_string(line_no) + ": only triangular faces are supported");
      Face t{};
      for (int k = 0; k < 3; ++k) {
        std::string_view ref = toks[k + 1];
        ref = ref.substr(0, ref.find('/'));
        long long idx = parse_int(ref, line_no);
        if (idx < 0) idx += static_cast<long long>(vertices.size()) + 1;  // relative reference
        if (idx == 0) throw ParseError("line " + std::to_string(line_no) + ": OBJ indices are 1-based");
        t[k] = checked_index(idx - 1, line_no);
      }
      faces.push_back(t);
    }
    // vt, vn, g, o, s, usemtl, mtllib: ignored
  }
  return {std::move(vertices), std::move(faces)};
}

inline void write_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace detail

inline TriangleMesh read_mesh(std::istream& in, MeshFormat format) {
  return format == MeshFormat::Off ? detail::read_off(in) : detail::read_obj(in);
}

inline TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return read_mesh(in, format);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline TriangleMesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

/// OFF: "OFF\nV F E\n", vertices at 17 significant digits, then "3 a b c".
inline void write_mesh(std::ostream& out, const TriangleMesh& mesh, MeshFormat format) {
  if (format == MeshFormat::Off) {
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << ' ' << mesh.edge_count() << '\n';
    for (const Vec3& p : mesh.vertices()) {
      detail::write_number(out, p.x);
      out << ' ';
      detail::write_number(out, p.y);
      out << ' ';
      detail::write_number(out, p.z);
      out << '\n';
    }
    for (const Face& t : mesh.faces()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  } else {
    for (const Vec3& p : mesh.vertices()) {
      out << "v ";
      detail::write_number(out, p.x);
      out << ' ';
      detail::write_number(out, p.y);
      out << ' ';
      detail::write_number(out, p.z);
      out << '\n';
    }
    for (const Face& t : mesh.faces()) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_mesh(out, mesh, format);
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  save_mesh(mesh, path, format_from_path(path));
}

}  // namespace bwr
