#include "coadapt/analysis.hpp"
#include "coadapt/csv.hpp"
#include "coadapt/numfmt.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace coadapt {

namespace {

constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\""
        << fmt(h) << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0) {
    os_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
        << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
        << fmt(width) << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    os_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
        << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
        << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    os_ << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r)
        << "\" fill=\"" << fill << "\" fill-opacity=\"0.7\"/>\n";
  }
  void text(double x, double y, const std::string& s, const char* anchor = "middle",
            int size = 12) {
    os_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-family=\"sans-serif\""
        << " font-size=\"" << size << "\" text-anchor=\"" << anchor << "\">" << s
        << "</text>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    os_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) os_ << fmt(x) << ',' << fmt(y) << ' ';
    os_ << "\"/>\n";
  }
  std::string str() const { return os_.str() + "</svg>\n"; }
  double width() const { return w_; }
  double height() const { return h_; }

 private:
  double w_, h_;
  std::ostringstream os_;
};

// Plot area with a linear map from data to pixels.
struct Frame {
  double x0, y0, w, h;      // pixels
  double xlo, xhi, ylo, yhi;  // data
  double px(double x) const { return x0 + (x - xlo) / (xhi - xlo) * w; }
  double py(double y) const { return y0 + h - (y - ylo) / (yhi - ylo) * h; }
};

void axes(Svg& svg, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  svg.rect(f.x0, f.y0, f.w, f.h, "none", "#333333");
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.xlo + (f.xhi - f.xlo) * i / 4;
    const double yv = f.ylo + (f.yhi - f.ylo) * i / 4;
    svg.line(f.px(xv), f.y0 + f.h, f.px(xv), f.y0 + f.h + 4, "#333333");
    svg.text(f.px(xv), f.y0 + f.h + 16, fmt(xv), "middle", 10);
    svg.line(f.x0 - 4, f.py(yv), f.x0, f.py(yv), "#333333");
    svg.text(f.x0 - 6, f.py(yv) + 3, fmt(yv), "end", 10);
  }
  svg.text(f.x0 + f.w / 2, f.y0 + f.h + 32, xlabel);
  svg.text(14, f.y0 + f.h / 2, ylabel);
}

void marker_cross(Svg& svg, double x, double y, const std::string& color) {
  svg.line(x - 6, y - 6, x + 6, y + 6, color, 2.5);
  svg.line(x - 6, y + 6, x + 6, y - 6, color, 2.5);
}

class Writer {
 public:
  explicit Writer(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
    written_.push_back(path);
  }
  std::vector<std::filesystem::path> done() { return std::move(written_); }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
};

std::string vec_header(const char* prefix, int d) {
  std::string s;
  for (int i = 1; i <= d; ++i) s += std::string(",") + prefix + std::to_string(i);
  return s;
}

std::string vec_row(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += "," + format_double17(v[i]);
  return s;
}

// Scatter of per-trial median actions. 2-D human actions plot h_1 vs h_2;
// 1-D ones plot h_1 vs m_1.
std::string scatter_svg(const SummaryStats& s) {
  Svg svg(520, 520);
  const Frame f{70, 30, 420, 420, -1, 1, -1, 1};
  const bool h2 = s.d_H >= 2;
  axes(svg, f, "h_1", h2 ? "h_2" : "m_1");
  auto coords = [&](const Vector& h, const Vector& m) {
    return std::make_pair(f.px(h[0]), f.py(h2 ? h[1] : m[0]));
  };
  for (std::size_t k = 0; k < s.per_alpha.size(); ++k) {
    const auto* color = kPalette[k % std::size(kPalette)];
    for (const auto& t : s.per_alpha[k].per_trial) {
      const auto [x, y] = coords(t.h, t.m);
      svg.circle(x, y, 4, color);
    }
    svg.circle(f.x0 + 12, f.y0 + 14 + 16 * static_cast<double>(k), 4, color);
    svg.text(f.x0 + 22, f.y0 + 18 + 16 * static_cast<double>(k),
             "alpha=" + format_fixed(s.per_alpha[k].alpha), "start", 11);
  }
  const auto [nx, ny] = coords(s.equilibria.nash.h, s.equilibria.nash.m);
  const auto [sx, sy] = coords(s.equilibria.stackelberg.h, s.equilibria.stackelberg.m);
  marker_cross(svg, nx, ny, "#000000");
  svg.text(nx, ny - 10, "NE");
  marker_cross(svg, sx, sy, "#c00000");
  svg.text(sx, sy - 10, "SE");
  return svg.str();
}

std::string box_svg(const SummaryStats& s) {
  double lo = 0.0, hi = 0.0;
  for (const auto& a : s.per_alpha) {
    lo = std::min({lo, a.cost_H.q25, a.cost_M.q25});
    hi = std::max({hi, a.cost_H.q75, a.cost_M.q75});
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  const auto n = static_cast<double>(s.per_alpha.size());
  Svg svg(120 + 90 * n, 400);
  const Frame f{70, 30, 90 * n, 320, 0, n, lo - pad, hi + pad};
  axes(svg, f, "", "cost");
  for (std::size_t k = 0; k < s.per_alpha.size(); ++k) {
    const auto& a = s.per_alpha[k];
    const double c = f.px(static_cast<double>(k) + 0.5);
    auto box = [&](const Quartiles& q, double x, const char* color) {
      svg.rect(x, f.py(q.q75), 24, f.py(q.q25) - f.py(q.q75), color, "#333333");
      svg.line(x, f.py(q.q50), x + 24, f.py(q.q50), "#000000", 2);
    };
    box(a.cost_H, c - 28, "#9ecae1");
    box(a.cost_M, c + 4, "#fdae6b");
    svg.text(c, f.y0 + f.h + 16 + 14, format_fixed(a.alpha), "middle", 10);
  }
  svg.text(f.x0 + f.w - 4, f.y0 + 14, "H blue, M orange", "end", 11);
  return svg.str();
}

std::string hist_svg(const SummaryStats& s, bool human) {
  const auto& e = s.bin_edges;
  std::size_t peak = 1;
  for (const auto& a : s.per_alpha) {
    for (auto c : (human ? a.hist_h : a.hist_m).front()) peak = std::max(peak, c);
  }
  Svg svg(560, 360);
  const Frame f{70, 30, 460, 280, e.front(), e.back(), 0, static_cast<double>(peak)};
  axes(svg, f, human ? "h_1" : "m_1", "count");
  for (std::size_t k = 0; k < s.per_alpha.size(); ++k) {
    const auto& counts = (human ? s.per_alpha[k].hist_h : s.per_alpha[k].hist_m).front();
    std::vector<std::pair<double, double>> pts;
    for (std::size_t b = 0; b < counts.size(); ++b) {
      const double y = f.py(static_cast<double>(counts[b]));
      pts.emplace_back(f.px(e[b]), y);
      pts.emplace_back(f.px(e[b + 1]), y);
    }
    svg.polyline(pts, kPalette[k % std::size(kPalette)]);
  }
  return svg.str();
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const SummaryStats& stats,
                                              const std::filesystem::path& out_dir) {
  if (stats.per_alpha.empty()) throw std::invalid_argument("no summary data to plot");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw std::runtime_error("cannot create output directory " + out_dir.string());
  }

  Writer w(out_dir);
  std::ostringstream box;
  box << "alpha,trials,samples,H_q25,H_q50,H_q75,M_q25,M_q50,M_q75\n";
  for (const auto& a : stats.per_alpha) {
    const std::string tag = format_fixed(a.alpha);

    std::ostringstream med;
    med << "pubkey,trial_index" << vec_header("h_", stats.d_H) << vec_header("m_", stats.d_M)
        << ",cost_H,cost_M\n";
    for (const auto& t : a.per_trial) {
      med << csv_field(t.participant_key) << ',' << t.trial_index << vec_row(t.h) << vec_row(t.m)
          << ',' << format_double17(t.cost_H) << ',' << format_double17(t.cost_M) << '\n';
    }
    w.write("actions_median_" + tag + ".csv", med.str());

    for (const bool human : {true, false}) {
      const auto& hist = human ? a.hist_h : a.hist_m;
      std::ostringstream h;
      h << "bin_lo,bin_hi";
      for (std::size_t i = 1; i <= hist.size(); ++i) h << ",count_" << i;
      h << '\n';
      for (std::size_t b = 0; b + 1 < stats.bin_edges.size(); ++b) {
        h << format_double17(stats.bin_edges[b]) << ',' << format_double17(stats.bin_edges[b + 1]);
        for (const auto& dim : hist) h << ',' << dim[b];
        h << '\n';
      }
      w.write(std::string("hist_") + (human ? "H" : "M") + "_" + tag + ".csv", h.str());
    }

    box << tag << ',' << a.trials << ',' << a.samples << ',' << format_double17(a.cost_H.q25)
        << ',' << format_double17(a.cost_H.q50) << ',' << format_double17(a.cost_H.q75) << ','
        << format_double17(a.cost_M.q25) << ',' << format_double17(a.cost_M.q50) << ','
        << format_double17(a.cost_M.q75) << '\n';
  }
  w.write("costs_box.csv", box.str());

  std::ostringstream eq;
  eq << "kind" << vec_header("h_", stats.d_H) << vec_header("m_", stats.d_M) << '\n'
     << "NE" << vec_row(stats.equilibria.nash.h) << vec_row(stats.equilibria.nash.m) << '\n'
     << "SE" << vec_row(stats.equilibria.stackelberg.h) << vec_row(stats.equilibria.stackelberg.m)
     << '\n';
  w.write("equilibria.csv", eq.str());

  w.write("actions_median.svg", scatter_svg(stats));
  w.write("costs_box.svg", box_svg(stats));
  w.write("hist_H.svg", hist_svg(stats, true));
  w.write("hist_M.svg", hist_svg(stats, false));
  return w.done();
}

}  // namespace coadapt
