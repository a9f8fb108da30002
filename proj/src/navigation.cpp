#include "taxisim/navigation.hpp"

#include <algorithm>
#include <cassert>
#include <iostream>
#include <limits>
#include <queue>
#include <string>

#include "taxisim/errors.hpp"

namespace taxisim {

std::optional<double> get_traffic_time(const TrafficTimeRecord& record, double now_s,
                                       double global_time_limit_s) {
  if (!record.open()) {
    if (record.ending_position == record.starting_position) return std::nullopt;
    return (*record.ending_time - record.starting_time) /
           (record.ending_position - record.starting_position);
  }

  double position_diff = record.current_position - record.starting_position;
  const double time_diff = record.starting_time <= now_s
                               ? now_s - record.starting_time
                               : global_time_limit_s - (record.starting_time - now_s);
  if (position_diff == 0.0) {
    if (time_diff == 0.0) return std::nullopt;  // just entered
    // Stuck on the road: estimate between 2x and 10x the elapsed time.
    position_diff = std::min(0.5, std::max(0.1, 1.0 / time_diff));
  }
  return time_diff / position_diff;
}

double min_traffic_time(const Road& road) { return road.length_km / road.speed_limit_kmh * 3600.0; }

void RoadTrafficStats::prune(double now_s, double window_s) {
  const double cutoff = now_s - window_s;
  while (!closed.empty() && *closed.front().ending_time < cutoff) closed.pop_front();
}

double average_traffic_time(const RoadTrafficStats& stats, const Road& road, double now_s,
                            double global_time_limit_s) {
  const double floor = min_traffic_time(road);
  double sum = 0.0;
  std::size_t n = 0;
  auto accumulate = [&](const TrafficTimeRecord& r) {
    if (auto t = get_traffic_time(r, now_s, global_time_limit_s)) {
      sum += *t;
      ++n;
    }
  };
  for (const auto& r : stats.closed) accumulate(r);
  for (const auto& [vehicle, r] : stats.open) accumulate(r);
  if (n == 0) return floor;
  return std::max(sum / static_cast<double>(n), floor);
}

TrafficRecordStore::TrafficRecordStore(std::size_t road_count, double window_s, double global_time_limit_s)
    : roads_(road_count), window_s_(window_s), global_time_limit_s_(global_time_limit_s) {}

bool TrafficRecordStore::open_record(VehicleId vehicle, RoadId road, double fraction, double now_s) {
  auto& stats = roads_.at(static_cast<std::size_t>(road));
  TrafficTimeRecord rec;
  rec.vehicle = vehicle;
  rec.road = road;
  rec.starting_position = fraction;
  rec.current_position = fraction;
  rec.starting_time = now_s;
  const bool inserted = stats.open.emplace(vehicle, rec).second;
  if (!inserted) {
    assert(!"duplicate open traffic record");
    std::clog << "warning: duplicate traffic record for vehicle " << vehicle << " on road " << road
              << " ignored\n";
  }
  return inserted;
}

void TrafficRecordStore::update_record(VehicleId vehicle, RoadId road, double fraction) {
  auto& open = roads_.at(static_cast<std::size_t>(road)).open;
  if (auto it = open.find(vehicle); it != open.end()) {
    it->second.current_position = std::max(it->second.starting_position, std::min(1.0, fraction));
  }
}

void TrafficRecordStore::close_record(VehicleId vehicle, RoadId road, double fraction, double now_s) {
  auto& stats = roads_.at(static_cast<std::size_t>(road));
  auto it = stats.open.find(vehicle);
  if (it == stats.open.end()) return;
  TrafficTimeRecord rec = it->second;
  stats.open.erase(it);
  rec.current_position = std::max(rec.starting_position, std::min(1.0, fraction));
  rec.ending_position = rec.current_position;
  rec.ending_time = now_s;
  stats.closed.push_back(rec);
}

void TrafficRecordStore::prune(double now_s) {
  for (auto& s : roads_) s.prune(now_s, window_s_);
}

double TrafficRecordStore::average_traffic_time(const Road& road, double now_s) const {
  return taxisim::average_traffic_time(stats(road.id), road, now_s, global_time_limit_s_);
}

std::vector<double> TrafficRecordStore::snapshot_weights(const RoadNetwork& network, double now_s) const {
  std::vector<double> w(network.roads.size());
  for (const Road& r : network.roads) w[static_cast<std::size_t>(r.id)] = average_traffic_time(r, now_s);
  return w;
}

Route shortest_route(const RoadNetwork& network, std::span<const double> weights,
                     const RoadPosition& origin, const RoadPosition& destination) {
  const Road& first = network.road(origin.road);
  const Road& last = network.road(destination.road);
  auto weight = [&](RoadId id) { return weights[static_cast<std::size_t>(id)]; };

  if (origin.road == destination.road && destination.fraction >= origin.fraction) {
    return Route{{origin.road}, (destination.fraction - origin.fraction) * weight(origin.road)};
  }

  constexpr double kUnreached = std::numeric_limits<double>::infinity();
  const std::size_t n = network.intersections.size();
  std::vector<double> dist(n, kUnreached);
  std::vector<RoadId> via(n, -1);
  std::vector<bool> done(n, false);

  using Entry = std::pair<double, IntersectionId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  const auto start = static_cast<std::size_t>(first.to);
  dist[start] = (1.0 - origin.fraction) * weight(origin.road);
  queue.emplace(dist[start], first.to);

  const auto target = static_cast<std::size_t>(last.from);
  while (!queue.empty()) {
    const auto [d, node] = queue.top();
    queue.pop();
    const auto u = static_cast<std::size_t>(node);
    if (done[u] || d > dist[u]) continue;
    done[u] = true;
    if (u == target) break;
    for (RoadId id : network.out_roads(node)) {
      const auto v = static_cast<std::size_t>(network.road(id).to);
      if (done[v]) continue;
      const double candidate = d + weight(id);
      if (candidate < dist[v]) {
        dist[v] = candidate;
        via[v] = id;
        queue.emplace(candidate, static_cast<IntersectionId>(v));
      } else if (candidate == dist[v] && id < via[v]) {
        via[v] = id;
      }
    }
  }

  if (!done[target]) {
    throw NoRouteError("no route from road " + std::to_string(origin.road) + " to road " +
                       std::to_string(destination.road));
  }

  Route route;
  route.cost_s = dist[target] + destination.fraction * weight(destination.road);
  route.roads.push_back(destination.road);
  for (std::size_t node = target; node != start;) {
    const RoadId id = via[node];
    route.roads.push_back(id);
    node = static_cast<std::size_t>(network.road(id).from);
  }
  route.roads.push_back(origin.road);
  std::reverse(route.roads.begin(), route.roads.end());
  return route;
}

}  // namespace taxisim
