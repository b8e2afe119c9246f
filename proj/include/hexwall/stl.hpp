#ifndef HEXWALL_STL_HPP
#define HEXWALL_STL_HPP

#include "hexwall/core.hpp"

#include <Eigen/Geometry>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace hexwall {

using Tri = std::array<int, 3>;

/// Indexed triangle surface (coordinates in mm).
struct TriSurface {
  std::vector<Vec3> vertices;
  std::vector<Tri> triangles;
  std::vector<Vec3> normals;  // optional, one per triangle when present

  std::size_t size() const { return triangles.size(); }

  Vec3 corner(std::size_t t, int k) const { return vertices[triangles[t][k]]; }

  double area(std::size_t t) const {
    return 0.5 * (corner(t, 1) - corner(t, 0)).cross(corner(t, 2) - corner(t, 0)).norm();
  }

  Vec3 unit_normal(std::size_t t) const {
    return (corner(t, 1) - corner(t, 0)).cross(corner(t, 2) - corner(t, 0)).normalized();
  }

  /// Throws GeometryError when an index is out of range or a triangle has zero area.
  void validate() const {
    const int n = static_cast<int>(vertices.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      for (int v : triangles[t])
        if (v < 0 || v >= n)
          throw GeometryError("triangle " + std::to_string(t) + " references vertex " +
                              std::to_string(v) + " outside [0," + std::to_string(n) + ")");
      if (!(area(t) > 0.0))
        throw GeometryError("triangle " + std::to_string(t) + " has zero area");
    }
  }

  /// Number of undirected edges used by exactly one triangle.
  std::size_t boundary_edge_count() const {
    std::map<std::pair<int, int>, int> uses;
    for (const auto& tri : triangles)
      for (int k = 0; k < 3; ++k) {
        int a = tri[k], b = tri[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++uses[{a, b}];
      }
    std::size_t open = 0;
    for (const auto& [edge, count] : uses)
      if (count == 1) ++open;
    return open;
  }

  /// Every edge shared by exactly two triangles.
  bool is_watertight() const {
    std::map<std::pair<int, int>, int> uses;
    for (const auto& tri : triangles)
      for (int k = 0; k < 3; ++k) {
        int a = tri[k], b = tri[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        ++uses[{a, b}];
      }
    for (const auto& [edge, count] : uses)
      if (count != 2) return false;
    return !uses.empty();
  }
};

/// Merges points closer than `tolerance` (first occurrence wins). Deterministic.
class VertexWelder {
 public:
  explicit VertexWelder(double tolerance) : tol_(tolerance) {}

  int insert(const Vec3& p) {
    const Key base = key_of(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(Key{base.x + dx, base.y + dy, base.z + dz});
          if (it == cells_.end()) continue;
          for (int idx : it->second)
            if ((points_[idx] - p).norm() <= tol_) return idx;
        }
    const int idx = static_cast<int>(points_.size());
    points_.push_back(p);
    cells_[base].push_back(idx);
    return idx;
  }

  std::vector<Vec3> take_points() { return std::move(points_); }

 private:
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
      h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
      h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
      return static_cast<std::size_t>(h);
    }
  };
  Key key_of(const Vec3& p) const {
    return Key{static_cast<std::int64_t>(std::floor(p.x() / tol_)),
               static_cast<std::int64_t>(std::floor(p.y() / tol_)),
               static_cast<std::int64_t>(std::floor(p.z() / tol_))};
  }

  double tol_;
  std::vector<Vec3> points_;
  std::unordered_map<Key, std::vector<int>, KeyHash> cells_;
};

struct StlLoadOptions {
  double merge_tolerance = 1e-6;  // mm
};

struct StlLoadStats {
  bool binary = false;
  std::size_t facets_read = 0;
  std::size_t dropped_degenerate = 0;
};

namespace detail {

struct RawFacet {
  Vec3 normal;
  std::array<Vec3, 3> v;
};

inline std::vector<RawFacet> parse_binary_stl(const std::string& buf) {
  std::uint32_t count = 0;
  std::memcpy(&count, buf.data() + 80, 4);
  std::vector<RawFacet> facets;
  facets.reserve(count);
  std::size_t off = 84;
  for (std::uint32_t f = 0; f < count; ++f, off += 50) {
    float vals[12];
    std::memcpy(vals, buf.data() + off, sizeof(vals));
    RawFacet rf;
    rf.normal = Vec3(vals[0], vals[1], vals[2]);
    for (int k = 0; k < 3; ++k) rf.v[k] = Vec3(vals[3 + 3 * k], vals[4 + 3 * k], vals[5 + 3 * k]);
    facets.push_back(rf);
  }
  return facets;
}

class AsciiTokenizer {
 public:
  explicit AsciiTokenizer(const std::string& buf) : buf_(buf) {}

  bool done() {
    skip_ws();
    return pos_ >= buf_.size();
  }
  std::size_t offset() const { return pos_; }

  std::string_view next() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < buf_.size() && !std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
    last_ = start;
    return std::string_view(buf_).substr(start, pos_ - start);
  }

  void expect(std::string_view word) {
    auto tok = next();
    if (tok != word)
      throw ParseError("expected '" + std::string(word) + "' but found '" + std::string(tok) + "'",
                       last_);
  }

  double number() {
    auto tok = next();
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      throw ParseError("malformed number '" + std::string(tok) + "'", last_);
    return v;
  }

  void skip_line() {
    while (pos_ < buf_.size() && buf_[pos_] != '\n') ++pos_;
  }

 private:
  void skip_ws() {
    while (pos_ < buf_.size() && std::isspace(static_cast<unsigned char>(buf_[pos_]))) ++pos_;
  }

  const std::string& buf_;
  std::size_t pos_ = 0;
  std::size_t last_ = 0;
};

inline std::vector<RawFacet> parse_ascii_stl(const std::string& buf) {
  AsciiTokenizer tk(buf);
  tk.expect("solid");
  tk.skip_line();
  std::vector<RawFacet> facets;
  while (true) {
    if (tk.done()) throw ParseError("missing 'endsolid'", tk.offset());
    const std::size_t at = tk.offset();
    auto tok = tk.next();
    if (tok == "endsolid") break;
    if (tok != "facet") throw ParseError("expected 'facet' or 'endsolid'", at);
    tk.expect("normal");
    RawFacet rf;
    for (int c = 0; c < 3; ++c) rf.normal[c] = tk.number();
    tk.expect("outer");
    tk.expect("loop");
    for (int k = 0; k < 3; ++k) {
      tk.expect("vertex");
      for (int c = 0; c < 3; ++c) rf.v[k][c] = tk.number();
    }
    tk.expect("endloop");
    tk.expect("endfacet");
    facets.push_back(rf);
  }
  return facets;
}

}  // namespace detail

/// Parses an in-memory STL buffer (binary or ASCII).
inline TriSurface parse_stl(const std::string& buf, const StlLoadOptions& opts = {},
                            StlLoadStats* stats = nullptr) {
  StlLoadStats local;
  std::vector<detail::RawFacet> facets;
  bool binary = false;
  if (buf.size() >= 84) {
    std::uint32_t count = 0;
    std::memcpy(&count, buf.data() + 80, 4);
    binary = (84 + 50ULL * count == buf.size());
  }
  const auto first = buf.find_first_not_of(" \t\r\n");
  const bool looks_ascii = first != std::string::npos && buf.compare(first, 5, "solid") == 0;
  if (binary) {
    facets = detail::parse_binary_stl(buf);
  } else if (looks_ascii) {
    facets = detail::parse_ascii_stl(buf);
  } else if (buf.size() < 84) {
    throw ParseError("truncated binary STL header", buf.size());
  } else {
    std::uint32_t count = 0;
    std::memcpy(&count, buf.data() + 80, 4);
    throw ParseError("binary STL facet count " + std::to_string(count) +
                         " inconsistent with file size " + std::to_string(buf.size()),
                     80);
  }
  local.binary = binary;
  local.facets_read = facets.size();
  if (facets.empty()) throw GeometryError("STL surface is empty (0 facets)");

  TriSurface surf;
  VertexWelder welder(opts.merge_tolerance);
  for (const auto& f : facets) {
    Tri tri{welder.insert(f.v[0]), welder.insert(f.v[1]), welder.insert(f.v[2])};
    const double twice_area = (f.v[1] - f.v[0]).cross(f.v[2] - f.v[0]).norm();
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || !(twice_area > 0.0)) {
      ++local.dropped_degenerate;
      continue;
    }
    surf.triangles.push_back(tri);
    surf.normals.push_back(f.normal);
  }
  surf.vertices = welder.take_points();
  if (surf.triangles.empty()) throw GeometryError("STL surface has no non-degenerate facets");
  if (stats) *stats = local;
  return surf;
}

inline TriSurface load_stl(const std::string& path, const StlLoadOptions& opts = {},
                           StlLoadStats* stats = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open STL file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_stl(ss.str(), opts, stats);
}

enum class StlFormat { Ascii, Binary };

/// ASCII output uses shortest round-trip decimals, so coordinates survive exactly.
/// Binary output stores float32, so it round-trips bit-exactly only at float precision.
inline std::string format_stl(const TriSurface& s, StlFormat fmt, const std::string& name = "hexwall") {
  std::string out;
  if (fmt == StlFormat::Binary) {
    out.assign(80, '\0');
    std::memcpy(out.data(), name.data(), std::min<std::size_t>(name.size(), 80));
    const auto count = static_cast<std::uint32_t>(s.triangles.size());
    out.append(reinterpret_cast<const char*>(&count), 4);
    for (std::size_t t = 0; t < s.triangles.size(); ++t) {
      const Vec3 n = s.unit_normal(t);
      float vals[12];
      for (int c = 0; c < 3; ++c) vals[c] = static_cast<float>(n[c]);
      for (int k = 0; k < 3; ++k)
        for (int c = 0; c < 3; ++c) vals[3 + 3 * k + c] = static_cast<float>(s.corner(t, k)[c]);
      out.append(reinterpret_cast<const char*>(vals), sizeof(vals));
      out.append(2, '\0');
    }
    return out;
  }
  std::ostringstream os;
  os << "solid " << name << "\n";
  for (std::size_t t = 0; t < s.triangles.size(); ++t) {
    const Vec3 n = s.unit_normal(t);
    os << "  facet normal " << format_double(n.x()) << ' ' << format_double(n.y()) << ' '
       << format_double(n.z()) << "\n    outer loop\n";
    for (int k = 0; k < 3; ++k) {
      const Vec3 p = s.corner(t, k);
      os << "      vertex " << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
         << format_double(p.z()) << "\n";
    }
    os << "    endloop\n  endfacet\n";
  }
  os << "endsolid " << name << "\n";
  return os.str();
}

inline void write_stl(const std::string& path, const TriSurface& s, StlFormat fmt = StlFormat::Ascii) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write STL file '" + path + "'");
  const std::string data = format_stl(s, fmt);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace hexwall

#endif  // HEXWALL_STL_HPP
