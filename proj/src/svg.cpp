#include "taxisim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "taxisim/errors.hpp"

namespace taxisim {
namespace {

using nlohmann::json;

constexpr double kCanvasPx = 800.0;
constexpr double kMarginPx = 20.0;
constexpr double kLaneOffsetKm = 0.004;

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct Frame {
  double min_x = 0.0, min_y = 0.0, scale = 1.0, height = kCanvasPx;

  double px(double x) const { return kMarginPx + (x - min_x) * scale; }
  double py(double y) const { return height - kMarginPx - (y - min_y) * scale; }
};

Frame fit_frame(const json& roads) {
  double lo_x = 0, lo_y = 0, hi_x = 1, hi_y = 1;
  bool first = true;
  for (const auto& r : roads) {
    for (const auto& p : r.at("points")) {
      const double x = p[0].get<double>();
      const double y = p[1].get<double>();
      if (first) {
        lo_x = hi_x = x;
        lo_y = hi_y = y;
        first = false;
      }
      lo_x = std::min(lo_x, x);
      hi_x = std::max(hi_x, x);
      lo_y = std::min(lo_y, y);
      hi_y = std::max(hi_y, y);
    }
  }
  Frame f;
  f.min_x = lo_x;
  f.min_y = lo_y;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-6});
  f.scale = (kCanvasPx - 2 * kMarginPx) / span;
  f.height = (hi_y - lo_y) * f.scale + 2 * kMarginPx;
  return f;
}

std::string star(double cx, double cy, double r) {
  std::string pts;
  for (int i = 0; i < 10; ++i) {
    const double a = -1.5707963267948966 + i * 0.6283185307179586;
    const double rr = i % 2 == 0 ? r : r * 0.45;
    if (i) pts += ' ';
    pts += num(cx + rr * std::cos(a)) + "," + num(cy + rr * std::sin(a));
  }
  return pts;
}

}  // namespace

json snapshot_json(const World& world) {
  const RoadNetwork& net = world.network();
  json roads = json::array();
  for (const Road& r : net.roads) {
    if (r.id > r.twin) continue;  // one polyline per twin pair
    json pts = json::array();
    for (const auto& p : r.polyline) pts.push_back({p.x(), p.y()});
    roads.push_back({{"id", r.id}, {"major", r.is_major}, {"points", pts}});
  }

  json vehicles = json::array();
  for (VehicleId id : world.active_ids()) {
    const Vehicle& v = world.vehicle(id);
    const Road& road = net.road(v.road);
    const ProjectedPoint here = point_along(road.polyline, v.offset_km);
    const ProjectedPoint ahead = point_along(road.polyline, std::min(road.length_km, v.offset_km + 0.001));
    const ProjectedPoint behind = point_along(road.polyline, std::max(0.0, v.offset_km - 0.001));
    ProjectedPoint dir = ahead - behind;
    if (dir.norm() > 0) dir.normalize();
    // Lanes sit to the right of the direction of travel; lane 0 is the inner one.
    const ProjectedPoint right(dir.y(), -dir.x());
    const ProjectedPoint pos = here + right * (kLaneOffsetKm * (v.lane + 0.5));
    vehicles.push_back({{"id", id},
                        {"kind", to_string(v.kind)},
                        {"lane", v.lane},
                        {"x", pos.x()},
                        {"y", pos.y()},
                        {"heading", std::atan2(dir.y(), dir.x())}});
  }

  json out = {{"kind", "snapshot"}, {"t_s", world.now()}, {"roads", roads}, {"vehicles", vehicles}};
  const auto& decision = world.dispatch().decision;
  out["called_taxi"] = decision ? json(decision->called_taxi_id) : json(nullptr);
  if (world.crash_state().applied && world.config().crash) {
    const auto& c = *world.config().crash;
    const ProjectedPoint p = net.point_at({c.road, c.fraction});
    out["crash"] = {{"x", p.x()}, {"y", p.y()}};
  } else {
    out["crash"] = nullptr;
  }
  return out;
}

std::string render_map_svg(const json& snapshot) {
  const json& roads = snapshot.at("roads");
  const Frame f = fit_frame(roads);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kCanvasPx) << "\" height=\"" << num(f.height)
    << "\" viewBox=\"0 0 " << num(kCanvasPx) << " " << num(f.height) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (const auto& r : roads) {
    const bool major = r.at("major").get<bool>();
    s << "<polyline class=\"road" << (major ? " major" : "") << "\" fill=\"none\" stroke=\""
      << (major ? "#2ca02c" : "#9a9a9a") << "\" stroke-width=\"" << (major ? "3" : "1.5") << "\" points=\"";
    bool first = true;
    for (const auto& p : r.at("points")) {
      if (!first) s << ' ';
      first = false;
      s << num(f.px(p[0].get<double>())) << ',' << num(f.py(p[1].get<double>()));
    }
    s << "\"/>\n";
  }

  const json called = snapshot.value("called_taxi", json(nullptr));
  for (const auto& v : snapshot.at("vehicles")) {
    const std::string kind = v.at("kind").get<std::string>();
    const int lane = v.at("lane").get<int>();
    const bool is_called = !called.is_null() && v.at("id") == called;
    std::string cls = "vehicle " + kind;
    std::string colour = lane == 0 ? "#d62728" : "#1f77b4";
    double w = 6, h = 3;
    if (kind == "taxi") {
      colour = is_called ? "#ff69b4" : "#ffd700";
      if (is_called) cls += " called";
      w = 8;
      h = 4;
    } else if (kind == "crashed") {
      colour = "#000000";
    }
    const double x = f.px(v.at("x").get<double>());
    const double y = f.py(v.at("y").get<double>());
    const double deg = -v.at("heading").get<double>() * 57.29577951308232;
    s << "<rect class=\"" << cls << "\" x=\"" << num(x - w / 2) << "\" y=\"" << num(y - h / 2) << "\" width=\""
      << num(w) << "\" height=\"" << num(h) << "\" fill=\"" << colour << "\" transform=\"rotate(" << num(deg) << ' '
      << num(x) << ' ' << num(y) << ")\"/>\n";
  }

  if (const auto crash = snapshot.find("crash"); crash != snapshot.end() && !crash->is_null()) {
    const double x = f.px(crash->at("x").get<double>());
    const double y = f.py(crash->at("y").get<double>());
    s << "<polygon class=\"crash\" fill=\"#ffd700\" stroke=\"#000000\" stroke-width=\"0.8\" points=\""
      << star(x, y, 10) << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string render_histogram_svg(std::span<const PolicySummary> policies) {
  constexpr double kPanelW = 520, kPanelH = 260, kPad = 40;
  const double height = kPanelH * static_cast<double>(std::max<std::size_t>(policies.size(), 1));
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kPanelW) << "\" height=\"" << num(height)
    << "\" viewBox=\"0 0 " << num(kPanelW) << " " << num(height) << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  for (std::size_t p = 0; p < policies.size(); ++p) {
    const PolicySummary& ps = policies[p];
    const double top = kPanelH * static_cast<double>(p);
    const int max_count = std::max(1, *std::max_element(ps.histogram.begin(), ps.histogram.end()));
    const double plot_h = kPanelH - 2 * kPad;
    const double bar_w = (kPanelW - 2 * kPad) / static_cast<double>(ps.histogram.size());
    const double base = top + kPanelH - kPad;
    s << "<text x=\"" << num(kPad) << "\" y=\"" << num(top + 24) << "\" font-family=\"sans-serif\" font-size=\"14\">"
      << "called-taxi arrival order (" << to_string(ps.policy) << ", n=" << ps.completed
      << ", top-3 " << num(100.0 * ps.top3_rate) << "%)</text>\n";
    s << "<line x1=\"" << num(kPad) << "\" y1=\"" << num(base) << "\" x2=\"" << num(kPanelW - kPad) << "\" y2=\""
      << num(base) << "\" stroke=\"#000000\"/>\n";
    for (std::size_t i = 0; i < ps.histogram.size(); ++i) {
      const int count = ps.histogram[i];
      const double h = plot_h * count / max_count;
      const double x = kPad + bar_w * static_cast<double>(i);
      s << "<rect class=\"bar\" data-policy=\"" << to_string(ps.policy) << "\" data-rank=\"" << i + 1
        << "\" data-count=\"" << count << "\" x=\"" << num(x + 1) << "\" y=\"" << num(base - h) << "\" width=\""
        << num(bar_w - 2) << "\" height=\"" << num(h) << "\" fill=\"#4c72b0\"/>\n";
      s << "<text x=\"" << num(x + bar_w / 2) << "\" y=\"" << num(base + 14)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << i + 1 << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<PolicySummary> summaries_from_csv(const std::string& csv_text, int fleet_size) {
  std::istringstream in(csv_text);
  std::string line;
  std::getline(in, line);  // header
  std::vector<ExperimentResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() < 4) throw ConfigError("malformed results row: " + line);
    ExperimentResult r;
    r.seed = std::stoull(cells[0]);
    r.policy = parse_policy(cells[1]);
    r.called_taxi_id = std::stoi(cells[2]);
    r.called_taxi_rank = std::stoi(cells[3]);
    rows.push_back(r);
  }
  int fleet = fleet_size;
  for (const auto& r : rows) fleet = std::max(fleet, r.called_taxi_rank);
  return {summarize(DispatchPolicy::PeriodicReroute, rows, fleet), summarize(DispatchPolicy::StaticRoute, rows, fleet)};
}

void render_svg(const std::filesystem::path& input, const std::filesystem::path& output) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot open " + input.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::string svg;
  if (input.extension() == ".csv") {
    const auto policies = summaries_from_csv(text, 20);
    svg = render_histogram_svg(policies);
  } else {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + input.string() + ": " + e.what());
    }
    const std::string kind = doc.value("kind", "");
    if (kind == "snapshot") {
      svg = render_map_svg(doc);
    } else if (kind == "summary") {
      std::vector<PolicySummary> policies;
      for (const auto& p : doc.at("policies")) {
        PolicySummary ps;
        ps.policy = parse_policy(p.at("policy").get<std::string>());
        ps.histogram = p.at("rank_histogram").get<std::vector<int>>();
        ps.completed = p.at("completed").get<int>();
        ps.top3_rate = p.at("top3_rate").get<double>();
        policies.push_back(std::move(ps));
      }
      svg = render_histogram_svg(policies);
    } else {
      throw ConfigError("unrecognised render input " + input.string() + " (expected snapshot or summary)");
    }
  }
  std::ofstream out(output, std::ios::binary);
  if (!out) throw IoError("cannot write " + output.string());
  out << svg;
  if (!out) throw IoError("failed writing " + output.string());
}

}  // namespace taxisim
