#ifndef HEXWALL_QUALITY_HPP
#define HEXWALL_QUALITY_HPP

#include "hexwall/core.hpp"
#include "hexwall/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hexwall {

/// Acceptance limits. The skew cutoff is not published with the other limits,
/// so 0.95 is a configurable default.
struct QualityThresholds {
  double jacobian_min = 0.6;
  double quad_angle_min = 45.0, quad_angle_max = 135.0;
  double tri_angle_min = 30.0, tri_angle_max = 120.0;
  double skew_max = 0.95;

  void validate() const {
    if (!(jacobian_min > 0.0 && jacobian_min <= 1.0))
      throw ConfigError("quality thresholds: jacobian_min must be in (0, 1]");
    if (!(quad_angle_min < quad_angle_max)) throw ConfigError("quality thresholds: empty quad angle range");
    if (!(tri_angle_min < tri_angle_max)) throw ConfigError("quality thresholds: empty triangle angle range");
    if (!(skew_max > 0.0 && skew_max <= 1.0))
      throw ConfigError("quality thresholds: skew_max must be in (0, 1]");
  }
};

/// Element views consumed by the report; any mesh exposing nodes plus hexahedra
/// or tetrahedra can be audited.
struct HexPart {
  const std::vector<Vec3>* nodes = nullptr;
  const std::vector<Hex>* hexes = nullptr;
  std::size_t node_count = 0;
};
struct TetPart {
  const std::vector<Vec3>* nodes = nullptr;
  const std::vector<Tet>* tets = nullptr;
  std::size_t node_count = 0;
};

struct HexQuality {
  std::size_t elements = 0, nodes = 0;
  std::vector<double> jacobian, min_angle, max_angle;
  std::vector<char> degenerate;
  std::size_t jacobian_failures = 0, angle_failures = 0, degenerate_count = 0;
  double min_jacobian = std::numeric_limits<double>::infinity();
  double min_angle_deg = std::numeric_limits<double>::infinity();
  double max_angle_deg = -std::numeric_limits<double>::infinity();
  std::size_t worst_jacobian_element = 0, worst_angle_element = 0;
};

struct TetQuality {
  std::size_t elements = 0, nodes = 0;
  std::vector<double> skew, min_angle, max_angle;
  std::vector<char> degenerate;
  std::size_t skew_failures = 0, angle_failures = 0, degenerate_count = 0;
  double max_skew = -std::numeric_limits<double>::infinity();
  double min_angle_deg = std::numeric_limits<double>::infinity();
  double max_angle_deg = -std::numeric_limits<double>::infinity();
  std::size_t worst_skew_element = 0, worst_angle_element = 0;
};

struct QualityReport {
  QualityThresholds thresholds;
  std::optional<HexQuality> hex;
  std::optional<TetQuality> tet;

  double hex_angle_failure_fraction() const {
    return hex && hex->elements ? static_cast<double>(hex->angle_failures) / hex->elements : 0.0;
  }
};

namespace detail {
inline double angle_violation(double lo_deg, double hi_deg, double lo, double hi) {
  return std::max(lo - lo_deg, hi_deg - hi);
}
}  // namespace detail

inline HexQuality evaluate_hexes(const HexPart& part, const QualityThresholds& th) {
  HexQuality q;
  const auto& hexes = *part.hexes;
  const auto& nodes = *part.nodes;
  q.elements = hexes.size();
  q.nodes = part.node_count;
  q.jacobian.resize(q.elements);
  q.min_angle.resize(q.elements);
  q.max_angle.resize(q.elements);
  q.degenerate.resize(q.elements);
  parallel_for(q.elements, [&](std::size_t e) {
    std::array<Vec3, 8> p;
    for (int a = 0; a < 8; ++a) p[a] = nodes[hexes[e][a]];
    const auto sj = scaled_jacobian_hex(p);
    const auto ang = hex_face_angles(p);
    q.jacobian[e] = sj.value;
    q.min_angle[e] = ang.min_deg;
    q.max_angle[e] = ang.max_deg;
    q.degenerate[e] = sj.degenerate || ang.degenerate;
  });
  double worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < q.elements; ++e) {
    if (q.degenerate[e]) ++q.degenerate_count;
    if (q.jacobian[e] < th.jacobian_min || q.degenerate[e]) ++q.jacobian_failures;
    const bool angle_ok = !q.degenerate[e] && q.min_angle[e] >= th.quad_angle_min &&
                          q.max_angle[e] <= th.quad_angle_max;
    if (!angle_ok) ++q.angle_failures;
    if (q.jacobian[e] < q.min_jacobian) q.min_jacobian = q.jacobian[e], q.worst_jacobian_element = e;
    q.min_angle_deg = std::min(q.min_angle_deg, q.min_angle[e]);
    q.max_angle_deg = std::max(q.max_angle_deg, q.max_angle[e]);
    const double v = detail::angle_violation(q.min_angle[e], q.max_angle[e], th.quad_angle_min, th.quad_angle_max);
    if (v > worst_violation) worst_violation = v, q.worst_angle_element = e;
  }
  return q;
}

inline TetQuality evaluate_tets(const TetPart& part, const QualityThresholds& th) {
  TetQuality q;
  const auto& tets = *part.tets;
  const auto& nodes = *part.nodes;
  q.elements = tets.size();
  q.nodes = part.node_count;
  q.skew.resize(q.elements);
  q.min_angle.resize(q.elements);
  q.max_angle.resize(q.elements);
  q.degenerate.resize(q.elements);
  parallel_for(q.elements, [&](std::size_t e) {
    const std::array<Vec3, 4> p{nodes[tets[e][0]], nodes[tets[e][1]], nodes[tets[e][2]], nodes[tets[e][3]]};
    const auto sk = vol_skew_tet(p);
    const auto ang = tet_face_angles(p);
    q.skew[e] = sk.value;
    q.min_angle[e] = ang.min_deg;
    q.max_angle[e] = ang.max_deg;
    q.degenerate[e] = sk.degenerate || ang.degenerate;
  });
  double worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < q.elements; ++e) {
    if (q.degenerate[e]) ++q.degenerate_count;
    if (q.skew[e] > th.skew_max) ++q.skew_failures;
    const bool angle_ok = q.min_angle[e] >= th.tri_angle_min && q.max_angle[e] <= th.tri_angle_max;
    if (!angle_ok) ++q.angle_failures;
    if (q.skew[e] > q.max_skew) q.max_skew = q.skew[e], q.worst_skew_element = e;
    q.min_angle_deg = std::min(q.min_angle_deg, q.min_angle[e]);
    q.max_angle_deg = std::max(q.max_angle_deg, q.max_angle[e]);
    const double v = detail::angle_violation(q.min_angle[e], q.max_angle[e], th.tri_angle_min, th.tri_angle_max);
    if (v > worst_violation) worst_violation = v, q.worst_angle_element = e;
  }
  return q;
}

/// Hexahedra are checked for scaled Jacobian and face angles; tetrahedra for
/// volumetric skew and face angles.
inline QualityReport quality_report(const std::optional<HexPart>& hex, const std::optional<TetPart>& tet,
                                    const QualityThresholds& th = {}) {
  th.validate();
  QualityReport rep;
  rep.thresholds = th;
  if (hex && hex->hexes) rep.hex = evaluate_hexes(*hex, th);
  if (tet && tet->tets) rep.tet = evaluate_tets(*tet, th);
  return rep;
}

inline nlohmann::json to_json(const QualityReport& r, bool per_element = false) {
  using nlohmann::json;
  json j;
  j["thresholds"] = {{"jacobian_min", r.thresholds.jacobian_min},
                     {"quad_angle_range", {r.thresholds.quad_angle_min, r.thresholds.quad_angle_max}},
                     {"tri_angle_range", {r.thresholds.tri_angle_min, r.thresholds.tri_angle_max}},
                     {"skew_max", r.thresholds.skew_max}};
  if (r.hex) {
    const auto& h = *r.hex;
    j["hexahedral"] = {{"elements", h.elements},
                       {"nodes", h.nodes},
                       {"jacobian_failures", h.jacobian_failures},
                       {"angle_failures", h.angle_failures},
                       {"angle_failure_percent", 100.0 * r.hex_angle_failure_fraction()},
                       {"degenerate", h.degenerate_count},
                       {"min_jacobian", h.min_jacobian},
                       {"min_angle_deg", h.min_angle_deg},
                       {"max_angle_deg", h.max_angle_deg},
                       {"worst_jacobian_element", h.worst_jacobian_element},
                       {"worst_angle_element", h.worst_angle_element}};
    if (per_element) {
      j["hexahedral"]["jacobian"] = h.jacobian;
      j["hexahedral"]["min_angle"] = h.min_angle;
      j["hexahedral"]["max_angle"] = h.max_angle;
    }
  }
  if (r.tet) {
    const auto& t = *r.tet;
    j["tetrahedral"] = {{"elements", t.elements},
                        {"nodes", t.nodes},
                        {"skew_failures", t.skew_failures},
                        {"angle_failures", t.angle_failures},
                        {"degenerate", t.degenerate_count},
                        {"max_skew", t.max_skew},
                        {"min_angle_deg", t.min_angle_deg},
                        {"max_angle_deg", t.max_angle_deg},
                        {"worst_skew_element", t.worst_skew_element},
                        {"worst_angle_element", t.worst_angle_element}};
    if (per_element) {
      j["tetrahedral"]["skew"] = t.skew;
      j["tetrahedral"]["min_angle"] = t.min_angle;
      j["tetrahedral"]["max_angle"] = t.max_angle;
    }
  }
  return j;
}

/// Summary table: one row per measure, one column per part, N/A where a measure
/// does not apply to the part.
inline std::string format_table(const QualityReport& r) {
  auto num = [](double v, int prec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
  };
  const std::string na = "N/A";
  const bool h = r.hex.has_value(), t = r.tet.has_value();
  std::vector<std::array<std::string, 3>> rows = {
      {"", "Hexahedral wall", "Tetrahedral ILT"},
      {"No. of elements", h ? std::to_string(r.hex->elements) : na, t ? std::to_string(r.tet->elements) : na},
      {"No. of nodes", h ? std::to_string(r.hex->nodes) : na, t ? std::to_string(r.tet->nodes) : na},
      {"No. of elements failed to Jacobian", h ? std::to_string(r.hex->jacobian_failures) : na, na},
      {"Min. Jacobian", h ? num(r.hex->min_jacobian, 2) : na, na},
      {"No. of elements failed to volumetric skew", na, t ? std::to_string(r.tet->skew_failures) : na},
      {"Max. vol. skew", na, t ? num(r.tet->max_skew, 2) : na},
      {"No. of elements failed to min/max angle", h ? std::to_string(r.hex->angle_failures) : na,
       t ? std::to_string(r.tet->angle_failures) : na},
      {"Min. angle (deg)", h ? num(r.hex->min_angle_deg, 2) : na, t ? num(r.tet->min_angle_deg, 2) : na},
      {"Max. angle (deg)", h ? num(r.hex->max_angle_deg, 2) : na, t ? num(r.tet->max_angle_deg, 2) : na},
  };
  std::size_t w0 = 0, w1 = 0, w2 = 0;
  for (const auto& row : rows) {
    w0 = std::max(w0, row[0].size());
    w1 = std::max(w1, row[1].size());
    w2 = std::max(w2, row[2].size());
  }
  std::ostringstream os;
  for (const auto& row : rows)
    os << std::left << std::setw(static_cast<int>(w0)) << row[0] << "  " << std::right
       << std::setw(static_cast<int>(w1)) << row[1] << "  " << std::setw(static_cast<int>(w2)) << row[2]
       << "\n";
  if (h)
    os << "Hexahedra failing angle limits: " << num(100.0 * r.hex_angle_failure_fraction(), 3)
       << "% of " << r.hex->elements << "\n";
  return os.str();
}

}  // namespace hexwall

#endif  // HEXWALL_QUALITY_HPP
