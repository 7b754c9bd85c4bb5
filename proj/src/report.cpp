#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wfmini/error.hpp"
#include "wfmini/metrics.hpp"
#include "wfmini/seed.hpp"

namespace wfmini {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::PreconditionFailed, "cannot write " + path.string());
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
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

// stable colour per task family: trailing digits/underscores are ignored so
// sim1 and sim2 share a hue
std::string colour(const std::string& task) {
  auto stem = task;
  while (!stem.empty() && (std::isdigit(static_cast<unsigned char>(stem.back())) || stem.back() == '_')) stem.pop_back();
  const auto h = fnv1a64(stem);
  char buf[32];
  std::snprintf(buf, sizeof buf, "hsl(%d,60%%,55%%)", static_cast<int>(h % 360));
  return buf;
}

constexpr double kPlotWidth = 800.0;
constexpr double kLeft = 70.0;
constexpr double kTop = 30.0;

}  // namespace

std::size_t write_utilization_csv(const std::vector<SlotTimeline>& tl, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "slot,task,start_s,end_s,value\n";
  std::size_t rows = 0;
  for (const auto& s : tl)
    for (const auto& iv : s.intervals) {
      out << s.label << ',' << csv_field(iv.task) << ',' << num(iv.start) << ',' << num(iv.end) << ",1\n";
      ++rows;
    }
  return rows;
}

std::size_t write_io_csv(const std::vector<IoSegment>& tl, bool reads, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "task,start_s,end_s,value\n";
  for (const auto& s : tl)
    out << csv_field(s.task) << ',' << num(s.start) << ',' << num(s.end) << ','
        << (reads ? s.read_bytes : s.write_bytes) << '\n';
  return tl.size();
}

std::size_t write_utilization_svg(const std::vector<SlotTimeline>& tl, double makespan,
                                  const std::filesystem::path& path) {
  const double band = 14.0;
  const double height = kTop + band * static_cast<double>(tl.size()) + 40.0;
  const double scale = makespan > 0 ? kPlotWidth / makespan : 0.0;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kPlotWidth + 20 << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"12\">Slot occupancy</text>\n";
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const auto& s = tl[i];
    const double y = kTop + band * static_cast<double>(i);
    svg << "<g class=\"band\" data-slot=\"" << s.slot << "\">";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + band - 3 << "\" text-anchor=\"end\">" << xml_escape(s.label)
        << "</text>";
    svg << "<rect x=\"" << kLeft << "\" y=\"" << y << "\" width=\"" << kPlotWidth << "\" height=\"" << band - 2
        << "\" fill=\"#f2f2f2\"/>";
    for (const auto& iv : s.intervals) {
      svg << "<rect x=\"" << kLeft + iv.start * scale << "\" y=\"" << y << "\" width=\""
          << std::max(0.5, (iv.end - iv.start) * scale) << "\" height=\"" << band - 2 << "\" fill=\""
          << colour(iv.task) << "\"><title>" << xml_escape(iv.task) << "</title></rect>";
    }
    svg << "</g>\n";
  }
  const double axis_y = kTop + band * static_cast<double>(tl.size()) + 14;
  svg << "<text x=\"" << kLeft << "\" y=\"" << axis_y << "\">0 s</text>";
  svg << "<text x=\"" << kLeft + kPlotWidth << "\" y=\"" << axis_y << "\" text-anchor=\"end\">" << num(makespan)
      << " s</text>\n</svg>\n";
  auto out = open_out(path);
  out << svg.str();
  return tl.size();
}

std::size_t write_io_svg(const std::vector<IoSegment>& tl, double makespan, const std::filesystem::path& path) {
  const double panel = 180.0;
  const double scale_x = makespan > 0 ? kPlotWidth / makespan : 0.0;
  std::uint64_t max_bytes = 1;
  for (const auto& s : tl) max_bytes = std::max({max_bytes, s.read_bytes, s.write_bytes});
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kPlotWidth + 20 << "\" height=\""
      << kTop + 2 * panel + 60 << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int p = 0; p < 2; ++p) {
    const bool reads = p == 0;
    const double y0 = kTop + panel * p + (p ? 20 : 0);
    svg << "<text x=\"" << kLeft << "\" y=\"" << y0 - 8 << "\" font-size=\"12\">" << (reads ? "Read" : "Write")
        << " bytes per task</text>\n";
    svg << "<rect x=\"" << kLeft << "\" y=\"" << y0 << "\" width=\"" << kPlotWidth << "\" height=\"" << panel - 20
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (const auto& s : tl) {
      const auto v = reads ? s.read_bytes : s.write_bytes;
      const double y = y0 + (panel - 20) * (1.0 - static_cast<double>(v) / static_cast<double>(max_bytes));
      svg << "<line x1=\"" << kLeft + s.start * scale_x << "\" x2=\"" << kLeft + std::max(s.end * scale_x, s.start * scale_x + 1)
          << "\" y1=\"" << y << "\" y2=\"" << y << "\" stroke=\"" << colour(s.task)
          << "\" stroke-width=\"3\"><title>" << xml_escape(s.task) << ": " << v << " bytes</title></line>\n";
    }
  }
  svg << "<text x=\"" << kLeft << "\" y=\"" << kTop + 2 * panel + 40 << "\">0 s</text>";
  svg << "<text x=\"" << kLeft + kPlotWidth << "\" y=\"" << kTop + 2 * panel + 40 << "\" text-anchor=\"end\">"
      << num(makespan) << " s</text>\n</svg>\n";
  auto out = open_out(path);
  out << svg.str();
  return tl.size();
}

}  // namespace wfmini
