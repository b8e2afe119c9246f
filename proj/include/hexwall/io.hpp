#ifndef HEXWALL_IO_HPP
#define HEXWALL_IO_HPP

// Mesh exchange: VTK legacy ASCII unstructured grids and Abaqus-style INP
// input decks, both written with shortest round-trip decimals so identical
// meshes give identical files. JSON views of centerlines, profiles and stress
// statistics.

#include "hexwall/core.hpp"
#include "hexwall/fem.hpp"
#include "hexwall/geometry.hpp"
#include "hexwall/hexmesher.hpp"
#include "hexwall/tetfill.hpp"

#include "json.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace hexwall {

namespace vtk_cell {
inline constexpr int tet4 = 10;
inline constexpr int hex8 = 12;
inline constexpr int tet10 = 24;
inline constexpr int hex20 = 25;
}  // namespace vtk_cell

inline int vtk_cell_size(int type) {
  switch (type) {
    case vtk_cell::tet4: return 4;
    case vtk_cell::hex8: return 8;
    case vtk_cell::tet10: return 10;
    case vtk_cell::hex20: return 20;
    default: return -1;
  }
}

/// Mixed-element mesh with named node sets and optional point data.
struct UnstructuredMesh {
  std::vector<Vec3> points;
  std::vector<int> cell_types;
  std::vector<std::vector<int>> cells;
  std::map<std::string, std::vector<int>> node_sets;
  std::map<std::string, std::vector<double>> point_scalars;
  std::map<std::string, std::vector<Sym6>> point_tensors;

  template <class Cell>
  void add_cells(const std::vector<Cell>& cs, int type) {
    for (const auto& c : cs) {
      cell_types.push_back(type);
      cells.emplace_back(c.begin(), c.end());
    }
  }

  /// Corner-node views for the quality audit (quadratic cells use their corners).
  std::vector<Hex> hexes() const {
    std::vector<Hex> out;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (cell_types[k] == vtk_cell::hex8 || cell_types[k] == vtk_cell::hex20) {
        Hex h;
        std::copy_n(cells[k].begin(), 8, h.begin());
        out.push_back(h);
      }
    return out;
  }
  std::vector<Tet> tets() const {
    std::vector<Tet> out;
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (cell_types[k] == vtk_cell::tet4 || cell_types[k] == vtk_cell::tet10) {
        Tet t;
        std::copy_n(cells[k].begin(), 4, t.begin());
        out.push_back(t);
      }
    return out;
  }
  /// Nodes referenced by cells of the given types.
  std::size_t node_count(std::initializer_list<int> types) const {
    std::vector<char> used(points.size(), 0);
    for (std::size_t k = 0; k < cells.size(); ++k)
      if (std::find(types.begin(), types.end(), cell_types[k]) != types.end())
        for (int v : cells[k]) used[v] = 1;
    return static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
  }
};

inline UnstructuredMesh to_unstructured(const HexWallMesh& m) {
  UnstructuredMesh u;
  u.points = m.nodes;
  u.add_cells(m.hexes, vtk_cell::hex8);
  for (const char* s : {"INNER_SURFACE", "OUTER_SURFACE", "TOP_RING", "BOTTOM_RING"}) u.node_sets[s] = m.node_set(s);
  return u;
}

inline UnstructuredMesh to_unstructured(const Hex20Mesh& m) {
  UnstructuredMesh u;
  u.points = m.nodes;
  u.add_cells(m.elements, vtk_cell::hex20);
  u.node_sets["INNER_SURFACE"] = m.inner_surface;
  u.node_sets["OUTER_SURFACE"] = m.outer_surface;
  u.node_sets["TOP_RING"] = m.top_ring;
  u.node_sets["BOTTOM_RING"] = m.bottom_ring;
  return u;
}

inline UnstructuredMesh to_unstructured(const TetFillMesh& m) {
  UnstructuredMesh u;
  u.points = m.nodes;
  u.add_cells(m.tets, vtk_cell::tet4);
  for (const char* s : {"LUMEN_SURFACE", "WALL_INTERFACE", "TOP_CAP", "BOTTOM_CAP"}) u.node_sets[s] = m.node_set(s);
  return u;
}

inline UnstructuredMesh to_unstructured(const Tet10Mesh& m) {
  UnstructuredMesh u;
  u.points = m.nodes;
  u.add_cells(m.elements, vtk_cell::tet10);
  return u;
}

/// Wall hexahedra followed by thrombus tetrahedra over the merged node table
/// (wall node ids unchanged, see merge_wall_ilt).
inline UnstructuredMesh to_unstructured(const FeModel& m) {
  UnstructuredMesh u;
  u.points = m.nodes;
  u.add_cells(m.hexes, vtk_cell::hex8);
  u.add_cells(m.tets, vtk_cell::tet4);
  u.node_sets = m.node_sets;
  return u;
}

inline std::string format_vtk(const UnstructuredMesh& m, const std::string& title = "hexwall mesh") {
  std::string s;
  s.reserve(m.points.size() * 64 + m.cells.size() * 48);
  s += "# vtk DataFile Version 3.0\n" + title + "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  s += "POINTS " + std::to_string(m.points.size()) + " double\n";
  for (const auto& p : m.points) s += format_double(p.x()) + " " + format_double(p.y()) + " " + format_double(p.z()) + "\n";
  std::size_t size = 0;
  for (const auto& c : m.cells) size += c.size() + 1;
  s += "CELLS " + std::to_string(m.cells.size()) + " " + std::to_string(size) + "\n";
  for (const auto& c : m.cells) {
    s += std::to_string(c.size());
    for (int v : c) s += " " + std::to_string(v);
    s += "\n";
  }
  s += "CELL_TYPES " + std::to_string(m.cells.size()) + "\n";
  for (int t : m.cell_types) s += std::to_string(t) + "\n";
  if (!m.point_scalars.empty() || !m.point_tensors.empty()) {
    s += "POINT_DATA " + std::to_string(m.points.size()) + "\n";
    for (const auto& [name, vals] : m.point_scalars) {
      s += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
      for (double v : vals) s += format_double(v) + "\n";
    }
    for (const auto& [name, vals] : m.point_tensors) {
      s += "TENSORS " + name + " double\n";
      for (const auto& t : vals) {
        const double full[9] = {t[0], t[3], t[5], t[3], t[1], t[4], t[5], t[4], t[2]};
        for (int k = 0; k < 9; ++k) s += format_double(full[k]) + (k % 3 == 2 ? "\n" : " ");
      }
    }
  }
  return s;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot open '" + path + "' for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("io", "failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline void write_vtk(const std::string& path, const UnstructuredMesh& m, const std::string& title = "hexwall mesh") {
  write_text_file(path, format_vtk(m, title));
}

namespace detail {

class Tokenizer {
 public:
  explicit Tokenizer(const std::string& s) : s_(s) {}
  bool done() {
    skip();
    return pos_ >= s_.size();
  }
  /// Offset of the next token.
  std::size_t pos() {
    skip();
    return pos_;
  }
  std::string next() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of file", pos_);
    const std::size_t b = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return s_.substr(b, pos_ - b);
  }
  std::string line() {
    const std::size_t b = pos_;
    while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
    std::string l = s_.substr(b, pos_ - b);
    if (pos_ < s_.size()) ++pos_;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    return l;
  }
  double number() {
    const std::size_t at = pos();
    const std::string t = next();
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ParseError("expected a number, found '" + t + "'", at);
    }
  }
  long integer() {
    const std::size_t at = pos();
    const double v = number();
    if (v != std::floor(v)) throw ParseError("expected an integer", at);
    return static_cast<long>(v);
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Reads the POINTS / CELLS / CELL_TYPES sections (and scalar point data) of a
/// legacy ASCII unstructured grid.
inline UnstructuredMesh parse_vtk(const std::string& text) {
  UnstructuredMesh m;
  detail::Tokenizer tk(text);
  const std::string header = tk.line();
  if (header.rfind("# vtk DataFile", 0) != 0) throw ParseError("not a legacy VTK file", 0);
  tk.line();
  const std::size_t fmt_at = tk.pos();
  if (detail::upper(tk.line()).rfind("ASCII", 0) != 0) throw ParseError("only ASCII VTK files are supported", fmt_at);
  std::size_t n_points = 0;
  while (!tk.done()) {
    const std::size_t at = tk.pos();
    const std::string key = detail::upper(tk.next());
    if (key == "DATASET") {
      if (detail::upper(tk.next()) != "UNSTRUCTURED_GRID") throw ParseError("dataset is not an unstructured grid", at);
    } else if (key == "POINTS") {
      n_points = static_cast<std::size_t>(tk.integer());
      tk.next();
      m.points.resize(n_points);
      for (auto& p : m.points)
        for (int c = 0; c < 3; ++c) p[c] = tk.number();
    } else if (key == "CELLS") {
      const long n = tk.integer();
      tk.integer();
      m.cells.resize(static_cast<std::size_t>(n));
      for (auto& c : m.cells) {
        const long k = tk.integer();
        if (k < 1) throw ParseError("bad cell size", tk.pos());
        c.resize(static_cast<std::size_t>(k));
        for (auto& v : c) {
          const std::size_t vat = tk.pos();
          v = static_cast<int>(tk.integer());
          if (v < 0 || static_cast<std::size_t>(v) >= n_points) throw ParseError("cell references a missing point", vat);
        }
      }
    } else if (key == "CELL_TYPES") {
      const long n = tk.integer();
      if (static_cast<std::size_t>(n) != m.cells.size()) throw ParseError("CELL_TYPES count differs from CELLS", at);
      m.cell_types.resize(static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < m.cell_types.size(); ++k) {
        const std::size_t tat = tk.pos();
        m.cell_types[k] = static_cast<int>(tk.integer());
        const int want = vtk_cell_size(m.cell_types[k]);
        if (want < 0) throw ParseError("unsupported VTK cell type " + std::to_string(m.cell_types[k]), tat);
        if (static_cast<std::size_t>(want) != m.cells[k].size())
          throw ParseError("cell " + std::to_string(k) + " has the wrong node count for its type", tat);
      }
    } else if (key == "POINT_DATA") {
      tk.integer();
    } else if (key == "SCALARS") {
      const std::string name = tk.next();
      tk.line();
      if (detail::upper(tk.next()) != "LOOKUP_TABLE") throw ParseError("expected LOOKUP_TABLE", tk.pos());
      tk.next();
      auto& vals = m.point_scalars[name];
      vals.resize(n_points);
      for (auto& v : vals) v = tk.number();
    } else if (key == "TENSORS") {
      const std::string name = tk.next();
      tk.line();
      auto& vals = m.point_tensors[name];
      vals.resize(n_points);
      for (auto& t : vals) {
        double f[9];
        for (double& x : f) x = tk.number();
        t = {f[0], f[4], f[8], f[1], f[5], f[2]};
      }
    } else {
      throw ParseError("unsupported VTK section '" + key + "'", at);
    }
  }
  if (m.cells.size() != m.cell_types.size()) throw ParseError("missing CELL_TYPES section", text.size());
  return m;
}

inline UnstructuredMesh read_vtk(const std::string& path) { return parse_vtk(read_text_file(path)); }

namespace detail {
inline const char* inp_type(int vtk_type, bool hybrid) {
  switch (vtk_type) {
    case vtk_cell::hex8: return "C3D8";
    case vtk_cell::hex20: return hybrid ? "C3D20RH" : "C3D20R";
    case vtk_cell::tet4: return "C3D4";
    case vtk_cell::tet10: return hybrid ? "C3D10H" : "C3D10";
    default: throw Error("io", "cell type has no INP equivalent");
  }
}
inline int vtk_type_of_inp(const std::string& t) {
  if (t.rfind("C3D20", 0) == 0) return vtk_cell::hex20;
  if (t.rfind("C3D10", 0) == 0) return vtk_cell::tet10;
  if (t.rfind("C3D8", 0) == 0) return vtk_cell::hex8;
  if (t.rfind("C3D4", 0) == 0) return vtk_cell::tet4;
  return -1;
}
}  // namespace detail

/// INP deck with 1-based ids: nodes, one element block per cell type (element
/// sets WALL for hexahedra and ILT for tetrahedra), node sets. Quadratic
/// elements are emitted as the hybrid types.
inline std::string format_inp(const UnstructuredMesh& m, const std::string& heading = "hexwall mesh") {
  std::string s = "*HEADING\n" + heading + "\n*NODE\n";
  for (std::size_t v = 0; v < m.points.size(); ++v)
    s += std::to_string(v + 1) + ", " + format_double(m.points[v].x()) + ", " + format_double(m.points[v].y()) + ", " +
         format_double(m.points[v].z()) + "\n";
  std::vector<int> types = m.cell_types;
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  std::sort(types.begin(), types.end(), [](int a, int b) {
    const bool ha = a == vtk_cell::hex8 || a == vtk_cell::hex20, hb = b == vtk_cell::hex8 || b == vtk_cell::hex20;
    return ha != hb ? ha : a < b;
  });
  for (int t : types) {
    const bool hex = t == vtk_cell::hex8 || t == vtk_cell::hex20;
    s += std::string("*ELEMENT, TYPE=") + detail::inp_type(t, true) + ", ELSET=" + (hex ? "WALL" : "ILT") + "\n";
    for (std::size_t k = 0; k < m.cells.size(); ++k) {
      if (m.cell_types[k] != t) continue;
      s += std::to_string(k + 1);
      // At most 16 entries per data line; continuation lines end with a comma.
      int on_line = 1;
      for (std::size_t a = 0; a < m.cells[k].size(); ++a) {
        if (on_line == 16) {
          s += ",\n";
          on_line = 0;
          s += std::to_string(m.cells[k][a] + 1);
        } else {
          s += ", " + std::to_string(m.cells[k][a] + 1);
        }
        ++on_line;
      }
      s += "\n";
    }
  }
  for (const auto& [name, ids] : m.node_sets) {
    s += "*NSET, NSET=" + name + "\n";
    for (std::size_t k = 0; k < ids.size(); ++k)
      s += std::to_string(ids[k] + 1) + ((k + 1) % 16 == 0 || k + 1 == ids.size() ? "\n" : ", ");
  }
  return s;
}

inline void write_inp(const std::string& path, const UnstructuredMesh& m, const std::string& heading = "hexwall mesh") {
  write_text_file(path, format_inp(m, heading));
}

/// Reads *NODE, *ELEMENT and *NSET blocks (other keywords are skipped).
inline UnstructuredMesh parse_inp(const std::string& text) {
  UnstructuredMesh m;
  std::map<long, int> node_index;
  struct PendingCell {
    int type;
    std::vector<long> ids;
  };
  std::vector<PendingCell> pending;
  std::map<std::string, std::vector<long>> sets;
  enum class Block { None, Node, Element, Nset } block = Block::None;
  int elem_type = -1;
  std::string set_name;
  std::vector<long> carry;
  std::size_t pos = 0;
  auto fields = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
      const auto b = f.find_first_not_of(" \t\r");
      const auto e = f.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
    }
    return out;
  };
  auto param = [](const std::string& upper_line, const std::string& key) {
    const auto k = upper_line.find(key + "=");
    if (k == std::string::npos) return std::string();
    const auto b = k + key.size() + 1;
    const auto e = upper_line.find(',', b);
    std::string v = upper_line.substr(b, e == std::string::npos ? std::string::npos : e - b);
    v.erase(std::remove_if(v.begin(), v.end(), [](unsigned char c) { return std::isspace(c); }), v.end());
    return v;
  };
  auto to_long = [](const std::string& f, std::size_t at) {
    try {
      std::size_t used = 0;
      const long v = std::stol(f, &used);
      if (used != f.size()) throw std::invalid_argument(f);
      return v;
    } catch (const std::exception&) {
      throw ParseError("expected an integer, found '" + f + "'", at);
    }
  };
  while (pos < text.size()) {
    const std::size_t at = pos;
    std::size_t e = text.find('\n', pos);
    if (e == std::string::npos) e = text.size();
    std::string line = text.substr(pos, e - pos);
    pos = e + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("**", 0) == 0) continue;
    if (line[0] == '*') {
      if (!carry.empty()) throw ParseError("element definition cut short", at);
      const std::string up = detail::upper(line);
      if (up.rfind("*NODE", 0) == 0 && up.rfind("*NODE OUTPUT", 0) != 0) {
        block = Block::Node;
      } else if (up.rfind("*ELEMENT", 0) == 0) {
        block = Block::Element;
        const std::string t = param(up, "TYPE");
        elem_type = detail::vtk_type_of_inp(t);
        if (elem_type < 0) throw ParseError("unsupported element type '" + t + "'", at);
      } else if (up.rfind("*NSET", 0) == 0) {
        block = Block::Nset;
        set_name = param(up, "NSET");
        if (up.find("GENERATE") != std::string::npos) throw ParseError("NSET GENERATE is not supported", at);
        sets[set_name];
      } else {
        block = Block::None;
      }
      continue;
    }
    const auto f = fields(line);
    switch (block) {
      case Block::Node: {
        if (f.size() < 4) throw ParseError("node line needs an id and 3 coordinates", at);
        const long id = to_long(f[0], at);
        Vec3 p;
        for (int c = 0; c < 3; ++c) {
          try {
            p[c] = std::stod(f[1 + c]);
          } catch (const std::exception&) {
            throw ParseError("bad node coordinate '" + f[1 + c] + "'", at);
          }
        }
        if (!node_index.emplace(id, static_cast<int>(m.points.size())).second)
          throw ParseError("duplicate node id " + std::to_string(id), at);
        m.points.push_back(p);
        break;
      }
      case Block::Element: {
        for (const auto& x : f)
          if (!x.empty()) carry.push_back(to_long(x, at));
        const std::size_t need = static_cast<std::size_t>(vtk_cell_size(elem_type)) + 1;
        if (carry.size() > need) throw ParseError("too many nodes on element line", at);
        if (carry.size() == need) {
          pending.push_back({elem_type, std::vector<long>(carry.begin() + 1, carry.end())});
          carry.clear();
        }
        break;
      }
      case Block::Nset:
        for (const auto& x : f)
          if (!x.empty()) sets[set_name].push_back(to_long(x, at));
        break;
      case Block::None:
        break;
    }
  }
  if (!carry.empty()) throw ParseError("element definition cut short", text.size());
  auto lookup = [&](long id) {
    auto it = node_index.find(id);
    if (it == node_index.end()) throw ParseError("reference to undefined node " + std::to_string(id), text.size());
    return it->second;
  };
  for (const auto& c : pending) {
    m.cell_types.push_back(c.type);
    std::vector<int> cell;
    for (long id : c.ids) cell.push_back(lookup(id));
    m.cells.push_back(std::move(cell));
  }
  for (const auto& [name, ids] : sets) {
    auto& out = m.node_sets[name];
    for (long id : ids) out.push_back(lookup(id));
  }
  return m;
}

inline UnstructuredMesh read_inp(const std::string& path) { return parse_inp(read_text_file(path)); }

/// Dispatches on the file extension (.vtk or .inp).
inline UnstructuredMesh read_mesh(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : detail::upper(path.substr(dot + 1));
  if (ext == "VTK") return read_vtk(path);
  if (ext == "INP") return read_inp(path);
  throw Error("io", "unknown mesh format for '" + path + "' (expected .vtk or .inp)");
}

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline nlohmann::json to_json(const Centerline& cl) {
  nlohmann::json j;
  j["length_mm"] = cl.length();
  auto& pts = j["points"] = nlohmann::json::array();
  for (std::size_t k = 0; k < cl.size(); ++k)
    pts.push_back({{"point", vec_json(cl.points[k])},
                   {"tangent", vec_json(cl.tangents[k])},
                   {"normal", vec_json(cl.normals[k])},
                   {"binormal", vec_json(cl.binormals[k])}});
  return j;
}

inline nlohmann::json to_json(const std::vector<SliceProfile>& profiles) {
  auto j = nlohmann::json::array();
  for (const auto& p : profiles)
    j.push_back({{"center", vec_json(p.center)},
                 {"normal", vec_json(p.normal)},
                 {"binormal", vec_json(p.binormal)},
                 {"angles", p.angles},
                 {"radii", p.radii}});
  return j;
}

inline nlohmann::json to_json(const StressStats& s) {
  nlohmann::json j;
  j["nodes"] = s.count;
  j["peak_MPa"] = s.peak;
  j["p99_MPa"] = s.p99;
  j["median_MPa"] = s.median;
  j["percentile_curve_MPa"] = s.curve;
  j["percentile_convention"] = "linear interpolation between order statistics at rank (n-1)q/100";
  auto& pr = j["probes"] = nlohmann::json::array();
  for (const auto& p : s.probes)
    pr.push_back({{"point", vec_json(p.point)},
                  {"node", p.node},
                  {"distance_mm", p.distance},
                  {"max_principal_stress_MPa", p.value},
                  {"out_of_domain", p.out_of_domain}});
  return j;
}

inline nlohmann::json to_json(const SolveReport& r) {
  return {{"method", r.method},
          {"iterations", r.iterations},
          {"relative_residual", r.relative_residual},
          {"setup_seconds", r.setup_seconds},
          {"solve_seconds", r.solve_seconds},
          {"residual_history", r.residual_history}};
}

}  // namespace hexwall

#endif  // HEXWALL_IO_HPP
