#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace wip::cli {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// white -> dark blue
std::string cell_colour(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - v * (255 - 8)));
  const int g = static_cast<int>(std::lround(255 - v * (255 - 48)));
  const int b = static_cast<int>(std::lround(255 - v * (255 - 107)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string heatmap(const nlohmann::json& confusion, const std::string& title) {
  const auto& labels = confusion.at("labels");
  const auto& counts = confusion.at("counts");
  const auto& norm = confusion.at("row_normalized");
  const std::size_t n = labels.size();
  if (n == 0 || counts.size() != n || norm.size() != n) {
    throw std::invalid_argument("confusion block has inconsistent sizes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i].size() != n || norm[i].size() != n) {
      throw std::invalid_argument("confusion block is not square");
    }
  }
  const int cell = 56, left = 120, top = 70;
  const int w = left + cell * static_cast<int>(n) + 20;
  const int h = top + cell * static_cast<int>(n) + 40;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = escape(labels[i].get<std::string>());
    const int y = top + cell * static_cast<int>(i);
    const int x = left + cell * static_cast<int>(i);
    s << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4
      << "\" text-anchor=\"end\">" << name << "</text>\n";
    s << "<text x=\"" << x + cell / 2 << "\" y=\"" << top - 8
      << "\" text-anchor=\"middle\" font-size=\"9\">" << name << "</text>\n";
    for (std::size_t j = 0; j < n; ++j) {
      const double v = norm[i][j].get<double>();
      const auto c = counts[i][j].get<long long>();
      const int cx = left + cell * static_cast<int>(j);
      s << "<rect x=\"" << cx << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << cell_colour(v) << "\" stroke=\"#cccccc\"/>\n";
      s << "<text x=\"" << cx + cell / 2 << "\" y=\"" << y + cell / 2 + 4
        << "\" text-anchor=\"middle\" fill=\"" << (v > 0.5 ? "white" : "black") << "\">"
        << fmt("%.2f", v) << "</text>\n";
      s << "<title>" << c << "</title>\n";
    }
  }
  s << "<text x=\"" << left + cell * static_cast<int>(n) / 2 << "\" y=\"" << h - 12
    << "\" text-anchor=\"middle\">predicted</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string window_curves(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw std::invalid_argument("window study has no rows");
  struct Pt {
    double x, mean, overall;
  };
  std::vector<Pt> pts;
  for (const auto& r : rows) {
    pts.push_back({r.at("window_frames").get<double>(), r.at("mean_class_accuracy").get<double>(),
                   r.at("overall_accuracy").get<double>()});
  }
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });
  double lo = 1.0;
  for (const auto& p : pts) lo = std::min({lo, p.mean, p.overall});
  lo = std::max(0.0, std::floor(lo * 10.0 - 0.5) / 10.0);
  const double x0 = pts.front().x, x1 = std::max(pts.back().x, x0 + 1);
  const int W = 560, H = 360, L = 60, R = 140, T = 40, B = 50;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return T + (1.0 - (y - lo) / (1.0 - lo)) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << (W - R + L) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << "accuracy vs window size</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (1.0 - lo) * k / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << fmt("%.1f", py(y) + 4)
      << "\" text-anchor=\"end\">" << fmt("%.2f", y) << "</text>\n";
  }
  for (const auto& p : pts) {
    s << "<text x=\"" << fmt("%.1f", px(p.x)) << "\" y=\"" << H - B + 16
      << "\" text-anchor=\"middle\">" << fmt("%.0f", p.x) << "</text>\n";
  }
  s << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 10
    << "\" text-anchor=\"middle\">window size (frames)</text>\n";
  const struct {
    const char* name;
    const char* colour;
    double Pt::*field;
  } series[] = {{"overall", "#1f77b4", &Pt::overall}, {"mean class", "#d62728", &Pt::mean}};
  int legend_y = T + 10;
  for (const auto& sr : series) {
    s << "<polyline fill=\"none\" stroke=\"" << sr.colour << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) s << fmt("%.1f", px(p.x)) << ',' << fmt("%.1f", py(p.*sr.field)) << ' ';
    s << "\"/>\n";
    for (const auto& p : pts) {
      s << "<circle cx=\"" << fmt("%.1f", px(p.x)) << "\" cy=\"" << fmt("%.1f", py(p.*sr.field))
        << "\" r=\"3\" fill=\"" << sr.colour << "\"/>\n";
    }
    s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << W - R + 30
      << "\" y2=\"" << legend_y << "\" stroke=\"" << sr.colour << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - R + 36 << "\" y=\"" << legend_y + 4 << "\">" << sr.name << "</text>\n";
    legend_y += 18;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

std::string render_report_svg(const nlohmann::json& report) {
  if (!report.is_object()) throw std::invalid_argument("report must be a JSON object");
  try {
    const std::string kind = report.value("kind", "");
    if (kind == "window_study") return window_curves(report.at("rows"));
    if (report.contains("confusion")) {
      std::string title = "confusion matrix";
      if (kind == "loso") title += " (pooled over held-out subjects)";
      return heatmap(report.at("confusion"), title);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed report: ") + e.what());
  }
  throw std::invalid_argument("report has neither a confusion matrix nor window-study rows");
}

}  // namespace wip::cli
