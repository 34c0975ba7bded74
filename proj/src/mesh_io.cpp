// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "canonlift/error.hpp"
#include "canonlift/geometry.hpp"

namespace canonlift {

namespace {

double parse_double(std::string_view token, int line) {
  // std::from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::Parse, fmt::format("line {}: bad number '{}'", line, token));
  }
  return value;
}

long parse_face_index(std::string_view token, int line) {
  // "7", "7/2", "7//3", "7/2/3": only the position index matters.
  const auto slash = token.find('/');
  const auto head = token.substr(0, slash);
  long value = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc() || ptr != head.data() + head.size()) {
    throw Error(ErrorKind::Parse, fmt::format("line {}: bad face index '{}'", line, token));
  }
  if (value <= 0) {
    throw Error(ErrorKind::Parse,
                fmt::format("line {}: face index {} is not a positive 1-based index", line, value));
  }
  return value;
}

}  // namespace

Mesh parse_obj(const std::string& text) {
  std::vector<Vec3> verts;
  std::vector<TriIndex> tris;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::vector<std::string> tokens;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    tokens.clear();
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;

    if (tokens[0] == "v") {
      if (tokens.size() < 4) {
        throw Error(ErrorKind::Parse, fmt::format("line {}: vertex needs 3 coordinates", line_no));
      }
      verts.emplace_back(parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                         parse_double(tokens[3], line_no));
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) {
        throw Error(ErrorKind::Parse, fmt::format("line {}: face needs at least 3 indices", line_no));
      }
      std::vector<std::uint32_t> poly;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const long idx = parse_face_index(tokens[i], line_no);
        if (idx > static_cast<long>(UINT32_MAX)) {
          throw Error(ErrorKind::IndexOutOfRange, fmt::format("line {}: index {} too large", line_no, idx));
        }
        poly.push_back(static_cast<std::uint32_t>(idx - 1));
      }
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        tris.push_back({poly[0], poly[i], poly[i + 1]});
      }
    }
  }
  if (tris.empty()) throw Error(ErrorKind::EmptyMesh, "mesh has no faces");
  Mesh mesh(std::move(verts), std::move(tris));
  if (!mesh.has_nonzero_area()) {
    throw Error(ErrorKind::DegenerateGeometry, "every triangle has zero area");
  }
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open mesh '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, fmt::format("read failed for '{}'", path.string()));
  if (path.extension() != ".obj" && path.extension() != ".OBJ") {
    throw Error(ErrorKind::Parse, fmt::format("unsupported mesh format '{}'", path.string()));
  }
  return parse_obj(buf.str());
}

std::string format_obj(const Mesh& mesh) {
  std::string out;
  for (const auto& v : mesh.vertices()) {
    out += fmt::format("v {:.17g} {:.17g} {:.17g}\n", v.x(), v.y(), v.z());
  }
  for (const auto& t : mesh.triangles()) {
    out += fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
  }
  return out;
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write mesh '{}'", path.string()));
  out << format_obj(mesh);
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

std::string mesh_hash(const Mesh& mesh) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (const auto& v : mesh.vertices()) EVP_DigestUpdate(ctx, v.data(), 3 * sizeof(double));
  for (const auto& t : mesh.triangles()) EVP_DigestUpdate(ctx, t.data(), sizeof(t));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace canonlift
