#include "taxisim/geometry_map.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>

#include "taxisim/errors.hpp"

namespace taxisim {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kEdgeFraction = 0.1;

bool valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

// Union-find over endpoint indices.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Clusters points transitively within `tolerance` using a uniform hash grid.
std::vector<std::size_t> cluster_points(const std::vector<ProjectedPoint>& points, double tolerance) {
  DisjointSets sets(points.size());
  if (tolerance <= 0.0) {
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j)
        if (points[i] == points[j]) sets.unite(i, j);
  } else {
    std::map<std::pair<long long, long long>, std::vector<std::size_t>> grid;
    auto cell_of = [&](const ProjectedPoint& p) {
      return std::pair{static_cast<long long>(std::floor(p.x() / tolerance)),
                       static_cast<long long>(std::floor(p.y() / tolerance))};
    };
    for (std::size_t i = 0; i < points.size(); ++i) grid[cell_of(points[i])].push_back(i);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [cx, cy] = cell_of(points[i]);
      for (long long dx = -1; dx <= 1; ++dx) {
        for (long long dy = -1; dy <= 1; ++dy) {
          auto it = grid.find({cx + dx, cy + dy});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j > i && (points[i] - points[j]).norm() <= tolerance) sets.unite(i, j);
          }
        }
      }
    }
  }
  std::vector<std::size_t> root(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) root[i] = sets.find(i);
  return root;
}

}  // namespace

Projection::Projection(GeoPoint anchor) : anchor_(anchor) {
  if (!valid(anchor)) throw MapBoundsError("projection anchor outside valid lat/lon range");
  cos_lat0_ = std::cos(anchor.lat * kDegToRad);
  if (cos_lat0_ < 1e-9) throw MapBoundsError("projection anchor too close to a pole");
}

Projection Projection::fit(std::span<const GeoPolyline> records) {
  double lat_sum = 0.0;
  double lon_sum = 0.0;
  std::size_t n = 0;
  for (const auto& line : records) {
    for (const auto& p : line) {
      if (!valid(p)) {
        throw MapBoundsError("coordinate out of range: lat=" + std::to_string(p.lat) +
                             " lon=" + std::to_string(p.lon));
      }
      lat_sum += p.lat;
      lon_sum += p.lon;
      ++n;
    }
  }
  if (n == 0) return Projection(GeoPoint{0.0, 0.0});
  return Projection(GeoPoint{lat_sum / static_cast<double>(n), lon_sum / static_cast<double>(n)});
}

ProjectedPoint Projection::forward(const GeoPoint& p) const {
  return {kEarthRadiusKm * (p.lon - anchor_.lon) * kDegToRad * cos_lat0_,
          kEarthRadiusKm * (p.lat - anchor_.lat) * kDegToRad};
}

GeoPoint Projection::inverse(const ProjectedPoint& p) const {
  return {anchor_.lat + p.y() / kEarthRadiusKm / kDegToRad,
          anchor_.lon + p.x() / (kEarthRadiusKm * cos_lat0_) / kDegToRad};
}

std::vector<RoadPosition> RoadNetwork::source_points() const {
  std::vector<RoadPosition> out;
  for (const auto& r : roads)
    for (double f : r.source_points) out.push_back({r.id, f});
  return out;
}

std::vector<RoadPosition> RoadNetwork::sink_points() const {
  std::vector<RoadPosition> out;
  for (const auto& r : roads)
    for (double f : r.sink_points) out.push_back({r.id, f});
  return out;
}

ProjectedPoint RoadNetwork::point_at(const RoadPosition& pos) const {
  const Road& r = road(pos.road);
  return point_along(r.polyline, pos.fraction * r.length_km);
}

double polyline_length(const Polyline& line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += (line[i] - line[i - 1]).norm();
  return total;
}

ProjectedPoint point_along(const Polyline& line, double distance_km) {
  if (line.empty()) return ProjectedPoint::Zero();
  double remaining = std::max(0.0, distance_km);
  for (std::size_t i = 1; i < line.size(); ++i) {
    const ProjectedPoint seg = line[i] - line[i - 1];
    const double len = seg.norm();
    if (remaining <= len && len > 0.0) return line[i - 1] + seg * (remaining / len);
    remaining -= len;
  }
  return line.back();
}

RoadNetwork build_network(std::span<const Polyline> records, double snap_tolerance_km) {
  std::vector<ProjectedPoint> endpoints;
  std::vector<std::size_t> usable;
  endpoints.reserve(records.size() * 2);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const Polyline& line = records[k];
    if (line.size() < 2) continue;
    usable.push_back(k);
    endpoints.push_back(line.front());
    endpoints.push_back(line.back());
  }

  const std::vector<std::size_t> root = cluster_points(endpoints, snap_tolerance_km);

  // Cluster centres: the mean of every endpoint merged into the cluster.
  std::unordered_map<std::size_t, std::pair<ProjectedPoint, int>> centre;
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    auto& [sum, count] = centre.try_emplace(root[i], ProjectedPoint::Zero(), 0).first->second;
    sum += endpoints[i];
    ++count;
  }

  RoadNetwork net;
  std::unordered_map<std::size_t, IntersectionId> id_of_root;
  auto intersection_for = [&](std::size_t endpoint) {
    const std::size_t r = root[endpoint];
    auto [it, inserted] = id_of_root.try_emplace(r, static_cast<IntersectionId>(net.intersections.size()));
    if (inserted) {
      const auto& [sum, count] = centre.at(r);
      Intersection node;
      node.id = it->second;
      node.position = sum / static_cast<double>(count);
      net.intersections.push_back(std::move(node));
    }
    return it->second;
  };

  for (std::size_t u = 0; u < usable.size(); ++u) {
    const std::size_t a = 2 * u;
    const std::size_t b = 2 * u + 1;
    if (root[a] == root[b]) continue;  // both ends on one intersection
    const IntersectionId from = intersection_for(a);
    const IntersectionId to = intersection_for(b);

    Polyline line = records[usable[u]];
    line.front() = net.intersections[static_cast<std::size_t>(from)].position;
    line.back() = net.intersections[static_cast<std::size_t>(to)].position;
    const double length = polyline_length(line);
    if (!(length > 0.0)) continue;

    Road forward;
    forward.id = static_cast<RoadId>(net.roads.size());
    forward.twin = forward.id + 1;
    forward.from = from;
    forward.to = to;
    forward.polyline = line;
    forward.length_km = length;

    Road backward;
    backward.id = forward.id + 1;
    backward.twin = forward.id;
    backward.from = to;
    backward.to = from;
    backward.polyline.assign(line.rbegin(), line.rend());
    backward.length_km = length;

    net.roads.push_back(std::move(forward));
    net.roads.push_back(std::move(backward));
  }

  // Intersections are created lazily, so none is left without a road.
  for (const Road& r : net.roads) {
    net.intersections[static_cast<std::size_t>(r.from)].out_roads.push_back(r.id);
    net.intersections[static_cast<std::size_t>(r.to)].in_roads.push_back(r.id);
  }
  return net;
}

int mark_major_roads(RoadNetwork& network, double threshold_km) {
  for (Road& r : network.roads)
    if (r.length_km > threshold_km) r.is_major = true;

  // An intersection "touches another major road" relative to one road pair.
  auto touches_other_major = [&](IntersectionId node, const Road& self) {
    const Intersection& x = network.intersection(node);
    for (RoadId id : x.out_roads) {
      if (id == self.id || id == self.twin) continue;
      if (network.road(id).is_major) return true;
    }
    for (RoadId id : x.in_roads) {
      if (id == self.id || id == self.twin) continue;
      if (network.road(id).is_major) return true;
    }
    return false;
  };

  int passes = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<RoadId> promote;
    for (const Road& r : network.roads) {
      if (r.is_major || r.id > r.twin) continue;
      if (touches_other_major(r.from, r) && touches_other_major(r.to, r)) promote.push_back(r.id);
    }
    for (RoadId id : promote) {
      Road& r = network.road(id);
      r.is_major = true;
      network.road(r.twin).is_major = true;
      changed = true;
    }
    if (changed) ++passes;
  }
  return passes;
}

void place_source_sink_points(RoadNetwork& network, Rng& rng) {
  for (Road& r : network.roads) {
    r.source_points.clear();
    r.sink_points.clear();
  }
  if (network.intersections.empty()) return;

  // Map edges: a node with a single in-road and out-road.
  for (const Intersection& x : network.intersections) {
    if (x.in_roads.size() == 1 && x.out_roads.size() == 1) {
      network.road(x.out_roads.front()).source_points.push_back(kEdgeFraction);
      network.road(x.in_roads.front()).sink_points.push_back(1.0 - kEdgeFraction);
    }
  }

  // Breadth-first search over the undirected graph (one edge per twin pair);
  // every non-tree edge closes an area.
  const std::size_t n = network.intersections.size();
  std::vector<bool> discovered(n, false);
  std::vector<bool> edge_seen(network.roads.size() / 2, false);
  std::uniform_real_distribution<double> fraction(kEdgeFraction, 1.0 - kEdgeFraction);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  auto assign_points = [&](RoadId pair) {
    for (RoadId id : {pair, network.road(pair).twin}) {
      Road& r = network.road(id);
      r.source_points.push_back(fraction(rng));
      r.sink_points.push_back(fraction(rng));
    }
  };

  auto bfs_from = [&](std::size_t start) {
    std::deque<std::size_t> queue{start};
    discovered[start] = true;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (RoadId id : network.intersections[u].out_roads) {
        const std::size_t edge = static_cast<std::size_t>(id / 2);
        if (edge_seen[edge]) continue;
        edge_seen[edge] = true;
        const auto v = static_cast<std::size_t>(network.road(id).to);
        if (discovered[v]) {
          assign_points(id);
        } else {
          discovered[v] = true;
          queue.push_back(v);
        }
      }
    }
  };

  bfs_from(pick(rng));
  for (std::size_t i = 0; i < n; ++i)
    if (!discovered[i]) bfs_from(i);
}

std::vector<Polyline> synthetic_grid_records(int rows, int cols, double cell_km, Rng& rng) {
  if (rows < 2 || cols < 2) throw ConfigError("synthetic grid needs rows, cols >= 2");
  if (!(cell_km > 0.0)) throw ConfigError("synthetic grid cell size must be positive");
  std::uniform_real_distribution<double> jitter(-0.1 * cell_km, 0.1 * cell_km);
  std::vector<ProjectedPoint> nodes;
  nodes.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = c * cell_km + jitter(rng);
      const double y = r * cell_km + jitter(rng);
      nodes.emplace_back(x, y);
    }
  }
  auto at = [&](int r, int c) { return nodes[static_cast<std::size_t>(r * cols + c)]; };
  std::vector<Polyline> records;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) records.push_back({at(r, c), at(r, c + 1)});
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r + 1 < rows; ++r) records.push_back({at(r, c), at(r + 1, c)});
  return records;
}

RoadNetwork generate_synthetic_grid(int rows, int cols, double cell_km, Rng& rng,
                                    double major_threshold_km) {
  const auto records = synthetic_grid_records(rows, cols, cell_km, rng);
  // Jitter is at most 0.2 cell per axis between neighbours, far above this.
  RoadNetwork net = build_network(records, 1e-6);
  mark_major_roads(net, major_threshold_km);
  place_source_sink_points(net, rng);
  return net;
}

}  // namespace taxisim
