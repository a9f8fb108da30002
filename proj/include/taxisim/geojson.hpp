#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taxisim/geometry_map.hpp"

namespace taxisim {

struct GeoJsonRecords {
  std::vector<GeoPolyline> lines;
  // Human-readable notes about skipped features.
  std::vector<std::string> warnings;
};

// Extracts LineString features from a FeatureCollection. Other geometry
// types are skipped with a warning.
GeoJsonRecords parse_geojson(const nlohmann::json& doc);
GeoJsonRecords read_geojson(const std::filesystem::path& path);

// Projects the records around their centroid and builds the full network
// (snapping, major roads, source/sink points).
RoadNetwork network_from_geojson(const GeoJsonRecords& records, double snap_tolerance_km,
                                 double major_threshold_km, Rng& rng);

// One LineString feature per record, coordinates as [lon, lat].
nlohmann::json records_to_geojson(std::span<const Polyline> records, const Projection& projection);

}  // namespace taxisim
