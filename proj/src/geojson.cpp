#include "taxisim/geojson.hpp"

#include <fstream>

#include "taxisim/errors.hpp"

namespace taxisim {
namespace {

GeoPolyline parse_coordinates(const nlohmann::json& coords) {
  GeoPolyline line;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw ConfigError("GeoJSON coordinate must be [lon, lat]");
    }
    line.push_back(GeoPoint{c[1].get<double>(), c[0].get<double>()});
  }
  return line;
}

}  // namespace

GeoJsonRecords parse_geojson(const nlohmann::json& doc) {
  GeoJsonRecords out;
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection") {
    throw ConfigError("GeoJSON input must be a FeatureCollection");
  }
  const auto features = doc.find("features");
  if (features == doc.end() || !features->is_array()) return out;

  std::size_t index = 0;
  for (const auto& feature : *features) {
    const auto geometry = feature.find("geometry");
    if (geometry == feature.end() || !geometry->is_object()) {
      out.warnings.push_back("feature " + std::to_string(index) + ": no geometry, skipped");
    } else if (const std::string type = geometry->value("type", ""); type != "LineString") {
      out.warnings.push_back("feature " + std::to_string(index) + ": geometry type '" + type +
                             "' ignored");
    } else {
      out.lines.push_back(parse_coordinates(geometry->at("coordinates")));
    }
    ++index;
  }
  return out;
}

GeoJsonRecords read_geojson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open GeoJSON file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed GeoJSON in " + path.string() + ": " + e.what());
  }
  return parse_geojson(doc);
}

RoadNetwork network_from_geojson(const GeoJsonRecords& records, double snap_tolerance_km,
                                 double major_threshold_km, Rng& rng) {
  const Projection projection = Projection::fit(records.lines);
  std::vector<Polyline> projected;
  projected.reserve(records.lines.size());
  for (const auto& line : records.lines) {
    Polyline p;
    p.reserve(line.size());
    for (const auto& g : line) p.push_back(projection.forward(g));
    projected.push_back(std::move(p));
  }
  RoadNetwork net = build_network(projected, snap_tolerance_km);
  mark_major_roads(net, major_threshold_km);
  place_source_sink_points(net, rng);
  return net;
}

nlohmann::json records_to_geojson(std::span<const Polyline> records, const Projection& projection) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& p : records[i]) {
      const GeoPoint g = projection.inverse(p);
      coords.push_back({g.lon, g.lat});
    }
    features.push_back({{"type", "Feature"},
                        {"properties", {{"record", i}}},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace taxisim
