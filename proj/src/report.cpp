#include "marginlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "marginlab/detail/numio.hpp"
#include "marginlab/errors.hpp"

namespace marginlab {

namespace {

const char* const kColumns[] = {
    "cell_index", "repeat", "d", "n", "k", "gamma", "m", "alpha", "eta", "seed",
    "converged", "T", "train_loss", "w_star_norm", "margin_ratio", "A_min", "A_lin",
    "Z_frobenius", "z_lin_norm", "test_error", "test_stderr", "outcome", "wall_time_s"};
constexpr int kColumnCount = 23;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

const char* const kAxes[] = {"d", "n", "k", "gamma", "m", "alpha"};

double axis_value(const ExperimentResult& r, const std::string& axis) {
  if (axis == "d") return r.d;
  if (axis == "n") return r.n;
  if (axis == "k") return r.k;
  if (axis == "gamma") return r.gamma;
  if (axis == "m") return r.m;
  return r.alpha;
}

std::string format_tick(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Rgb {
  double r, g, b;
};

// Five-stop approximation of the usual perceptually uniform dark-to-yellow map.
Rgb colormap(double t) {
  static const Rgb stops[] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::min(1.0, std::max(0.0, t));
  const double pos = t * 4.0;
  const int lo = std::min(3, static_cast<int>(pos));
  const double f = pos - lo;
  const Rgb& a = stops[lo];
  const Rgb& b = stops[lo + 1];
  return {a.r + f * (b.r - a.r), a.g + f * (b.g - a.g), a.b + f * (b.b - a.b)};
}

std::string color_hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
  return buf;
}

// Cell-center coordinates for one axis: log-spaced when the values span a wide
// positive range (gamma always qualifies), otherwise proportional to value.
std::vector<double> axis_coords(const std::string& axis, const std::vector<double>& values) {
  bool positive = true;
  for (double v : values) positive = positive && v > 0.0;
  const bool log_scale = positive && (axis == "gamma" || values.back() / values.front() >= 8.0);
  std::vector<double> coords;
  coords.reserve(values.size());
  for (double v : values) coords.push_back(log_scale ? std::log10(v) : v);
  return coords;
}

// Cell boundaries: midpoints between neighbours, end cells mirrored.
std::vector<double> cell_edges(const std::vector<double>& coords) {
  const std::size_t n = coords.size();
  std::vector<double> edges(n + 1);
  for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (coords[i - 1] + coords[i]);
  edges[0] = coords[0] - (edges[1] - coords[0]);
  edges[n] = coords[n - 1] + (coords[n - 1] - edges[n - 1]);
  return edges;
}

struct ContourSegment {
  double x0, y0, x1, y1;
};

// Marching squares over the lattice of cell centers; quads touching an empty
// cell are skipped.
std::vector<ContourSegment> contour_segments(const std::vector<std::vector<double>>& grid,
                                             const std::vector<double>& xs,
                                             const std::vector<double>& ys, double level) {
  std::vector<ContourSegment> segments;
  const std::size_t ny = grid.size();
  if (ny == 0) return segments;
  const std::size_t nx = grid[0].size();
  auto interp = [level](double a, double b, double pa, double pb) {
    const double t = (level - a) / (b - a);
    return pa + t * (pb - pa);
  };
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const double v00 = grid[j][i], v10 = grid[j][i + 1];
      const double v01 = grid[j + 1][i], v11 = grid[j + 1][i + 1];
      if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) || !std::isfinite(v11)) {
        continue;
      }
      int mask = 0;
      if (v00 >= level) mask |= 1;
      if (v10 >= level) mask |= 2;
      if (v11 >= level) mask |= 4;
      if (v01 >= level) mask |= 8;
      if (mask == 0 || mask == 15) continue;
      // Crossing points on the four quad edges.
      double bx = 0, by = 0, rx = 0, ry = 0, tx = 0, ty = 0, lx = 0, ly = 0;
      const bool bottom = ((mask & 1) != 0) != ((mask & 2) != 0);
      const bool right = ((mask & 2) != 0) != ((mask & 4) != 0);
      const bool top = ((mask & 8) != 0) != ((mask & 4) != 0);
      const bool left = ((mask & 1) != 0) != ((mask & 8) != 0);
      if (bottom) { bx = interp(v00, v10, xs[i], xs[i + 1]); by = ys[j]; }
      if (right) { rx = xs[i + 1]; ry = interp(v10, v11, ys[j], ys[j + 1]); }
      if (top) { tx = interp(v01, v11, xs[i], xs[i + 1]); ty = ys[j + 1]; }
      if (left) { lx = xs[i]; ly = interp(v00, v01, ys[j], ys[j + 1]); }
      auto add = [&](double x0, double y0, double x1, double y1) {
        segments.push_back({x0, y0, x1, y1});
      };
      switch (mask) {
        case 1: case 14: add(lx, ly, bx, by); break;
        case 2: case 13: add(bx, by, rx, ry); break;
        case 4: case 11: add(rx, ry, tx, ty); break;
        case 8: case 7: add(tx, ty, lx, ly); break;
        case 3: case 12: add(lx, ly, rx, ry); break;
        case 6: case 9: add(bx, by, tx, ty); break;
        case 5: add(lx, ly, bx, by); add(rx, ry, tx, ty); break;
        case 10: add(bx, by, rx, ry); add(tx, ty, lx, ly); break;
        default: break;
      }
    }
  }
  return segments;
}

}  // namespace

std::string table_to_csv(const std::vector<ExperimentResult>& rows) {
  std::ostringstream out;
  for (int c = 0; c < kColumnCount; ++c) {
    if (c) out << ',';
    out << kColumns[c];
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.cell_index << ',' << r.repeat << ',' << r.d << ',' << r.n << ',' << r.k << ','
        << detail::double_to_string(r.gamma) << ',' << r.m << ','
        << detail::double_to_string(r.alpha) << ',' << detail::double_to_string(r.eta) << ','
        << r.seed << ',' << (r.converged ? "true" : "false") << ',' << r.T << ','
        << detail::double_to_string(r.train_loss) << ','
        << detail::double_to_string(r.w_star_norm) << ','
        << detail::double_to_string(r.margin_ratio) << ','
        << detail::double_to_string(r.A_min) << ',' << detail::double_to_string(r.A_lin) << ','
        << detail::double_to_string(r.Z_frobenius) << ','
        << detail::double_to_string(r.z_lin_norm) << ','
        << detail::double_to_string(r.test_error) << ','
        << detail::double_to_string(r.test_stderr) << ',' << to_string(r.outcome) << ','
        << detail::double_to_string(r.wall_time_s) << '\n';
  }
  return out.str();
}

std::vector<ExperimentResult> table_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("empty CSV");
  const auto header = split_csv_line(line);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = static_cast<int>(i);
  for (int c = 0; c < kColumnCount; ++c) {
    if (!index.count(kColumns[c])) throw ParameterError(std::string("missing CSV column: ") + kColumns[c]);
  }
  std::vector<ExperimentResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < header.size()) throw ParameterError("short CSV row");
    auto field = [&](const char* name) -> const std::string& {
      return fields[static_cast<std::size_t>(index.at(name))];
    };
    ExperimentResult r;
    r.cell_index = std::stoll(field("cell_index"));
    r.repeat = std::stoi(field("repeat"));
    r.d = std::stoi(field("d"));
    r.n = std::stoi(field("n"));
    r.k = std::stoi(field("k"));
    r.gamma = detail::string_to_double(field("gamma"));
    r.m = std::stoi(field("m"));
    r.alpha = detail::string_to_double(field("alpha"));
    r.eta = detail::string_to_double(field("eta"));
    r.seed = std::stoull(field("seed"));
    const std::string& conv = field("converged");
    if (conv != "true" && conv != "false") throw ParameterError("bad converged flag: " + conv);
    r.converged = conv == "true";
    r.T = std::stoll(field("T"));
    r.train_loss = detail::string_to_double(field("train_loss"));
    r.w_star_norm = detail::string_to_double(field("w_star_norm"));
    r.margin_ratio = detail::string_to_double(field("margin_ratio"));
    r.A_min = detail::string_to_double(field("A_min"));
    r.A_lin = detail::string_to_double(field("A_lin"));
    r.Z_frobenius = detail::string_to_double(field("Z_frobenius"));
    r.z_lin_norm = detail::string_to_double(field("z_lin_norm"));
    r.test_error = detail::string_to_double(field("test_error"));
    r.test_stderr = detail::string_to_double(field("test_stderr"));
    r.outcome = outcome_from_string(field("outcome"));
    r.wall_time_s = detail::string_to_double(field("wall_time_s"));
    rows.push_back(r);
  }
  return rows;
}

std::string heatmap_svg(const std::vector<ExperimentResult>& rows, double epsilon) {
  if (rows.empty()) throw ParameterError("no rows to plot");

  std::map<std::string, std::set<double>> distinct;
  for (const auto& axis : kAxes) {
    for (const auto& r : rows) distinct[axis].insert(axis_value(r, axis));
  }
  std::vector<std::string> swept;
  for (const auto& axis : kAxes) {
    if (distinct[axis].size() > 1) swept.push_back(axis);
  }
  if (swept.size() != 2) throw ParameterError("heatmap needs exactly two swept axes");

  // gamma goes horizontal when swept; otherwise the later axis in canonical
  // order takes the horizontal role.
  std::string x_axis = swept[1], y_axis = swept[0];
  if (swept[0] == "gamma") std::swap(x_axis, y_axis);

  const std::vector<double> x_values(distinct[x_axis].begin(), distinct[x_axis].end());
  const std::vector<double> y_values(distinct[y_axis].begin(), distinct[y_axis].end());
  const std::size_t nx = x_values.size(), ny = y_values.size();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> mean(ny, std::vector<double>(nx, nan));
  std::vector<std::vector<int>> count(ny, std::vector<int>(nx, 0));
  for (const auto& r : rows) {
    const auto xi = std::lower_bound(x_values.begin(), x_values.end(), axis_value(r, x_axis)) -
                    x_values.begin();
    const auto yi = std::lower_bound(y_values.begin(), y_values.end(), axis_value(r, y_axis)) -
                    y_values.begin();
    auto& c = count[static_cast<std::size_t>(yi)][static_cast<std::size_t>(xi)];
    auto& v = mean[static_cast<std::size_t>(yi)][static_cast<std::size_t>(xi)];
    if (c == 0) v = 0.0;
    v += r.test_error;
    ++c;
  }
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      if (count[j][i] > 0) mean[j][i] /= count[j][i];
    }
  }

  const auto x_coords = axis_coords(x_axis, x_values);
  const auto y_coords = axis_coords(y_axis, y_values);
  const auto x_edges = cell_edges(x_coords);
  const auto y_edges = cell_edges(y_coords);

  const double left = 90, top = 46, plot_w = 560, plot_h = 430;
  const double width = left + plot_w + 170, height = top + plot_h + 80;
  auto px = [&](double c) {
    return left + plot_w * (c - x_edges.front()) / (x_edges.back() - x_edges.front());
  };
  auto py = [&](double c) {  // larger values upward
    return top + plot_h * (y_edges.back() - c) / (y_edges.back() - y_edges.front());
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">mean test error over " << x_axis << " and " << y_axis
      << "</text>\n";

  const double vmax = 0.5;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double x0 = px(x_edges[i]), x1 = px(x_edges[i + 1]);
      const double y1 = py(y_edges[j]), y0 = py(y_edges[j + 1]);
      std::string fill = "#c8c8c8";
      if (count[j][i] > 0) fill = color_hex(colormap(mean[j][i] / vmax));
      svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0 << "\" height=\""
          << y1 - y0 << "\" fill=\"" << fill << "\"/>\n";
    }
  }

  struct Level {
    double value;
    const char* stroke;
    const char* dash;
    std::string label;
  };
  const Level levels[] = {{0.125, "#ff4040", "", "error = 1/8"},
                          {epsilon, "#00d0ff", "6,4", "error = epsilon"}};
  for (const auto& level : levels) {
    const auto segments = contour_segments(mean, x_coords, y_coords, level.value);
    for (const auto& s : segments) {
      svg << "<line x1=\"" << px(s.x0) << "\" y1=\"" << py(s.y0) << "\" x2=\"" << px(s.x1)
          << "\" y2=\"" << py(s.y1) << "\" stroke=\"" << level.stroke
          << "\" stroke-width=\"2.5\"";
      if (level.dash[0]) svg << " stroke-dasharray=\"" << level.dash << "\"";
      svg << "/>\n";
    }
  }

  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

  const std::size_t x_step = std::max<std::size_t>(1, (nx + 11) / 12);
  for (std::size_t i = 0; i < nx; i += x_step) {
    const double x = px(x_coords[i]);
    svg << "<line x1=\"" << x << "\" y1=\"" << top + plot_h << "\" x2=\"" << x << "\" y2=\""
        << top + plot_h + 6 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 22
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
        << format_tick(x_values[i]) << "</text>\n";
  }
  const std::size_t y_step = std::max<std::size_t>(1, (ny + 11) / 12);
  for (std::size_t j = 0; j < ny; j += y_step) {
    const double y = py(y_coords[j]);
    svg << "<line x1=\"" << left - 6 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left - 10 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">"
        << format_tick(y_values[j]) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 48
      << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">" << x_axis
      << "</text>\n";
  svg << "<text x=\"26\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\" transform=\"rotate(-90 26 "
      << top + plot_h / 2 << ")\">" << y_axis << "</text>\n";

  const double bar_x = left + plot_w + 40, bar_w = 22, bar_h = plot_h * 0.7, bar_y = top + 20;
  const int bar_steps = 40;
  for (int s = 0; s < bar_steps; ++s) {
    const double t0 = static_cast<double>(s) / bar_steps;
    const double y = bar_y + bar_h * (1.0 - static_cast<double>(s + 1) / bar_steps);
    svg << "<rect x=\"" << bar_x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
        << bar_h / bar_steps + 0.5 << "\" fill=\"" << color_hex(colormap(t0)) << "\"/>\n";
  }
  svg << "<rect x=\"" << bar_x << "\" y=\"" << bar_y << "\" width=\"" << bar_w << "\" height=\""
      << bar_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double frac : {0.0, 0.5, 1.0}) {
    const double y = bar_y + bar_h * (1.0 - frac);
    svg << "<text x=\"" << bar_x + bar_w + 6 << "\" y=\"" << y + 4
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << format_tick(vmax * frac)
        << "</text>\n";
  }
  double legend_y = bar_y + bar_h + 34;
  for (const auto& level : levels) {
    svg << "<line x1=\"" << bar_x << "\" y1=\"" << legend_y << "\" x2=\"" << bar_x + 34
        << "\" y2=\"" << legend_y << "\" stroke=\"" << level.stroke << "\" stroke-width=\"2.5\"";
    if (level.dash[0]) svg << " stroke-dasharray=\"" << level.dash << "\"";
    svg << "/>\n";
    svg << "<text x=\"" << bar_x + 40 << "\" y=\"" << legend_y + 4
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << level.label << "</text>\n";
    legend_y += 20;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string summary_text(const std::vector<ExperimentResult>& rows) {
  std::ostringstream out;
  if (rows.empty()) {
    out << "no rows\n";
    return out.str();
  }
  std::map<Outcome, int> outcomes;
  std::set<long long> cells;
  int converged = 0;
  double err_sum = 0.0, err_max = 0.0, wall = 0.0;
  std::vector<double> errors;
  errors.reserve(rows.size());
  for (const auto& r : rows) {
    ++outcomes[r.outcome];
    cells.insert(r.cell_index);
    if (r.converged) ++converged;
    err_sum += r.test_error;
    err_max = std::max(err_max, r.test_error);
    errors.push_back(r.test_error);
    wall += r.wall_time_s;
  }
  std::sort(errors.begin(), errors.end());
  const std::size_t nr = errors.size();
  const double median = nr % 2 ? errors[nr / 2] : 0.5 * (errors[nr / 2 - 1] + errors[nr / 2]);

  char line[160];
  std::snprintf(line, sizeof(line), "runs: %zu over %zu cells\n", rows.size(), cells.size());
  out << line;
  std::snprintf(line, sizeof(line), "converged: %d of %zu\n", converged, rows.size());
  out << line;
  for (Outcome o : {Outcome::Benign, Outcome::Harmful, Outcome::Interpolating, Outcome::NonInterpolating}) {
    if (outcomes.count(o)) {
      std::snprintf(line, sizeof(line), "%s: %d\n", to_string(o), outcomes[o]);
      out << line;
    }
  }
  std::snprintf(line, sizeof(line), "test error mean %.4f median %.4f max %.4f\n",
                err_sum / static_cast<double>(nr), median, err_max);
  out << line;
  std::snprintf(line, sizeof(line), "total wall time %.1fs\n", wall);
  out << line;
  return out.str();
}

}  // namespace marginlab
