#pragma once

// File formats: g2o pose graphs (rotations only), solution files, per-run
// JSON reports, trace and benchmark CSVs, and a static SVG convergence plot.
//
// Quaternions are read as (qx, qy, qz, qw) from g2o files, following g2o,
// and written as (qw, qx, qy, qz) in solution files.

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rotavg/error.hpp"
#include "rotavg/graph.hpp"
#include "rotavg/primal_dual.hpp"
#include "rotavg/so3.hpp"

namespace rotavg {

struct Dataset {
  std::string name;
  MeasurementGraph graph;
  std::string source_path;
  Index dropped_duplicate_edges = 0;
  bool dropped_translation_fields = false;  // some discarded translation was nonzero
  Index ignored_lines = 0;                  // lines with unrecognized tags
  std::vector<long long> original_ids;      // original id of each compact node
};

struct BenchRow {
  std::string dataset;
  Index n = 0;
  Index m = 0;
  double min_eig = 0.0;
  double cost = 0.0;
  double wall_time_s = 0.0;
  int iterations = 0;
  bool certified = false;
};

/// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace io_detail {

inline constexpr double kQuaternionTolerance = 1e-3;

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline double parse_number(std::string_view s, std::size_t line, const char* field) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_id(std::string_view s, std::size_t line) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0) {
    throw ParseError(line, "invalid node id '" + std::string(s) + "'");
  }
  return v;
}

/// Unit quaternion to rotation; near-unit input is normalized.
inline Rotation quaternion_rotation(double w, double x, double y, double z, std::size_t line) {
  Eigen::Quaterniond q(w, x, y, z);
  const double norm = q.norm();
  if (!(std::abs(norm - 1.0) <= kQuaternionTolerance)) {
    throw Error(ErrorCode::kData, "line " + std::to_string(line) + ": quaternion norm " +
                                      format_double(norm) + " is not close to 1");
  }
  q.normalize();
  return Rotation::unchecked(q.toRotationMatrix());
}

/// Quaternion (w, x, y, z) with w >= 0, ties broken towards positive x, y, z.
inline Eigen::Vector4d canonical_quaternion(const Matrix3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
  for (int i = 0; i < 4; ++i) {
    if (v[i] > 0.0) break;
    if (v[i] < 0.0) {
      v = -v;
      break;
    }
  }
  return v + Eigen::Vector4d::Zero();  // folds -0 into +0
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out.imbue(std::locale::classic());
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

}  // namespace io_detail

/// Reads VERTEX_SE3:QUAT and EDGE_SE3:QUAT lines. Translations and
/// information matrices are discarded; repeated edges keep the first
/// measurement; node ids are compacted in order of first appearance.
inline Dataset parse_g2o(std::istream& in, std::string source_path = "<stream>") {
  Dataset d;
  d.source_path = std::move(source_path);
  d.name = std::filesystem::path(d.source_path).stem().string();

  std::unordered_map<long long, Index> compact;
  const auto node = [&](long long id) {
    const auto [it, inserted] = compact.emplace(id, static_cast<Index>(compact.size()));
    if (inserted) d.original_ids.push_back(id);
    return it->second;
  };

  struct RawEdge {
    Index i, j;
    Rotation r;
  };
  std::vector<RawEdge> edges;
  std::set<std::pair<Index, Index>> seen;

  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = io_detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    const std::string_view tag = tokens[0];
    if (tag == "VERTEX_SE3:QUAT") {
      if (tokens.size() != 9) {
        throw ParseError(number, "VERTEX_SE3:QUAT expects 8 fields, got " +
                                     std::to_string(tokens.size() - 1));
      }
      node(io_detail::parse_id(tokens[1], number));
      for (int k = 2; k < 9; ++k) io_detail::parse_number(tokens[k], number, "vertex field");
    } else if (tag == "EDGE_SE3:QUAT") {
      if (tokens.size() != 31) {
        throw ParseError(number, "EDGE_SE3:QUAT expects 30 fields, got " +
                                     std::to_string(tokens.size() - 1));
      }
      const long long a = io_detail::parse_id(tokens[1], number);
      const long long b = io_detail::parse_id(tokens[2], number);
      double v[28];
      for (int k = 0; k < 28; ++k) v[k] = io_detail::parse_number(tokens[3 + k], number, "edge field");
      if (a == b) throw ParseError(number, "edge joins node " + std::to_string(a) + " to itself");
      const Index i = node(a);
      const Index j = node(b);
      const Rotation r = io_detail::quaternion_rotation(v[6], v[3], v[4], v[5], number);
      if (v[0] != 0.0 || v[1] != 0.0 || v[2] != 0.0) d.dropped_translation_fields = true;
      if (!seen.insert({std::min(i, j), std::max(i, j)}).second) {
        ++d.dropped_duplicate_edges;
        continue;
      }
      edges.push_back({i, j, r});
    } else {
      ++d.ignored_lines;
    }
  }
  if (edges.empty()) throw Error(ErrorCode::kEmptyDataset, d.source_path + ": no edges");

  d.graph = MeasurementGraph(static_cast<Index>(compact.size()));
  for (const RawEdge& e : edges) d.graph.add_edge(e.i, e.j, e.r);
  return d;
}

inline Dataset parse_g2o(const std::string& path) {
  std::ifstream in = io_detail::open_input(path);
  return parse_g2o(in, path);
}

/// Writes a graph as EDGE_SE3:QUAT lines with zero translation and identity
/// information. Vertex orientations, when given, are written as R_i^T.
inline void write_g2o(std::ostream& out, const MeasurementGraph& g,
                      const BlockVector* orientations = nullptr) {
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  if (orientations != nullptr) {
    for (Index i = 0; i < orientations->size(); ++i) {
      const Eigen::Quaterniond q(Matrix3(orientations->block(i).transpose()));
      out << "VERTEX_SE3:QUAT " << i << " 0 0 0 " << q.x() << ' ' << q.y() << ' ' << q.z()
          << ' ' << q.w() << '\n';
    }
  }
  for (const Edge& e : g.edges()) {
    const Eigen::Quaterniond q(e.measurement.matrix());
    out << "EDGE_SE3:QUAT " << e.i << ' ' << e.j << " 0 0 0 " << q.x() << ' ' << q.y() << ' '
        << q.z() << ' ' << q.w();
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) out << (r == c ? " 1" : " 0");
    }
    out << '\n';
  }
}

/// One line per node: `id qw qx qy qz`, 17 significant digits.
inline void write_solution(std::ostream& out, const BlockVector& r) {
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  for (Index i = 0; i < r.size(); ++i) {
    const Eigen::Vector4d q = io_detail::canonical_quaternion(r.block(i));
    out << i << ' ' << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
  }
}

inline void write_solution(const std::string& path, const BlockVector& r) {
  std::ofstream out = io_detail::open_output(path);
  write_solution(out, r);
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

inline BlockVector read_solution(std::istream& in) {
  std::map<long long, Rotation> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto tokens = io_detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens.size() != 5) throw ParseError(number, "expected `id qw qx qy qz`");
    const long long id = io_detail::parse_id(tokens[0], number);
    double q[4];
    for (int k = 0; k < 4; ++k) q[k] = io_detail::parse_number(tokens[1 + k], number, "quaternion");
    if (!rows.emplace(id, io_detail::quaternion_rotation(q[0], q[1], q[2], q[3], number)).second) {
      throw ParseError(number, "node " + std::to_string(id) + " listed twice");
    }
  }
  BlockVector r(static_cast<Index>(rows.size()));
  Index expected = 0;
  for (const auto& [id, rotation] : rows) {
    if (id != expected) {
      throw Error(ErrorCode::kData, "solution ids must be 0..n-1; missing " + std::to_string(expected));
    }
    r.block(expected++) = rotation.matrix();
  }
  return r;
}

inline BlockVector read_solution(const std::string& path) {
  std::ifstream in = io_detail::open_input(path);
  return read_solution(in);
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "iteration,min_abs_lambda,cost,wall_ms\n";
  for (const TraceRow& t : trace) {
    out << t.iteration << ',' << format_double(t.min_abs_lambda) << ',' << format_double(t.cost)
        << ',' << format_double(t.wall_ms) << '\n';
  }
}

inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (number == 1) {
      if (line != "iteration,min_abs_lambda,cost,wall_ms") {
        throw ParseError(number, "unexpected trace header");
      }
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 4) throw ParseError(number, "expected 4 comma-separated fields");
    TraceRow t;
    t.iteration = static_cast<int>(io_detail::parse_id(fields[0], number));
    t.min_abs_lambda = io_detail::parse_number(fields[1], number, "min_abs_lambda");
    t.cost = io_detail::parse_number(fields[2], number, "cost");
    t.wall_ms = io_detail::parse_number(fields[3], number, "wall_ms");
    rows.push_back(t);
  }
  return rows;
}

inline BenchRow bench_row(const std::string& dataset, const MeasurementGraph& g,
                          const SolveReport& r) {
  return {dataset,
          g.node_count(),
          g.edge_count(),
          r.certificate.min_eigenvalue,
          r.final_cost,
          r.wall_time,
          r.iterations,
          r.certified};
}

inline nlohmann::json to_json(const BenchRow& row, const SolveReport* report = nullptr) {
  nlohmann::json j = {{"dataset", row.dataset},       {"n", row.n},
                      {"m", row.m},                   {"min_eig", row.min_eig},
                      {"cost", row.cost},             {"wall_time_s", row.wall_time_s},
                      {"iterations", row.iterations}, {"certified", row.certified}};
  if (report != nullptr) {
    j["converged"] = report->converged;
    j["stationarity_residual"] = report->certificate.stationarity_residual;
    j["gauge_fallbacks"] = report->gauge_fallbacks;
    j["min_abs_lambda_history"] = report->min_eigenvalue_history;
  }
  return j;
}

inline void write_bench_header(std::ostream& out) {
  out << "dataset,n,m,min_eig,cost,wall_time_s,iterations,certified\n";
}

inline void write_bench_row(std::ostream& out, const BenchRow& r) {
  out << r.dataset << ',' << r.n << ',' << r.m << ',' << format_double(r.min_eig) << ','
      << format_double(r.cost) << ',' << format_double(r.wall_time_s) << ',' << r.iterations
      << ',' << (r.certified ? "true" : "false") << '\n';
}

/// Static SVG of log10(min |lambda|) against iteration.
inline std::string convergence_svg(const std::vector<TraceRow>& trace,
                                   const std::string& title = "min |lambda| per iteration") {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  // zeros cannot be drawn on a log axis; pin them to the smallest double
  std::vector<std::pair<double, double>> points;
  for (const TraceRow& t : trace) {
    const double v = std::max(t.min_abs_lambda, std::numeric_limits<double>::denorm_min());
    points.emplace_back(t.iteration, std::log10(v));
  }
  double lo = 0.0, hi = 1.0, first = 0.0, last = 1.0;
  if (!points.empty()) {
    lo = std::floor(std::min_element(points.begin(), points.end(),
                                     [](auto a, auto b) { return a.second < b.second; })->second);
    hi = std::ceil(std::max_element(points.begin(), points.end(),
                                    [](auto a, auto b) { return a.second < b.second; })->second);
    first = points.front().first;
    last = points.back().first;
  }
  if (hi <= lo) hi = lo + 1.0;
  if (last <= first) last = first + 1.0;
  const auto sx = [&](double x) { return kLeft + (x - first) / (last - first) * plot_w; };
  const auto sy = [&](double y) { return kTop + (hi - y) / (hi - lo) * plot_h; };

  std::ostringstream svg;
  svg.imbue(std::locale::classic());
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

  const int decades = static_cast<int>(hi - lo);
  const int stride = std::max(1, decades / 10);
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); e += stride) {
    const double y = sy(e);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + plot_w
        << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e"
        << e << "</text>\n";
  }
  const int span = static_cast<int>(last - first);
  const int xstride = std::max(1, span / 10);
  for (int i = static_cast<int>(first); i <= static_cast<int>(last); i += xstride) {
    svg << "<text x=\"" << sx(i) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << i << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">iteration</text>\n";
  svg << "<text transform=\"translate(16," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">min |lambda|</text>\n";

  if (!points.empty()) {
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : points) svg << sx(x) << ',' << sy(y) << ' ';
    svg << "\"/>\n";
    for (const auto& [x, y] : points) {
      svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace rotavg
