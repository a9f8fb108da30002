#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "taxisim/experiment.hpp"
#include "taxisim/traffic_flow.hpp"

namespace taxisim {

// Plain-data picture of a world: road geometry, vehicle glyph positions and
// the crash site. `kind` is "snapshot".
nlohmann::json snapshot_json(const World& world);

// Roads (major roads highlighted), vehicles coloured by lane, taxis, the
// called taxi and a crash star.
std::string render_map_svg(const nlohmann::json& snapshot);

// One bar chart of called-taxi arrival ranks per policy.
std::string render_histogram_svg(std::span<const PolicySummary> policies);

// Dispatches on the input: a snapshot JSON, a summary JSON or a results CSV.
// Throws IoError when the output cannot be written.
void render_svg(const std::filesystem::path& input, const std::filesystem::path& output);

// Rank histograms rebuilt from results.csv text.
std::vector<PolicySummary> summaries_from_csv(const std::string& csv_text, int fleet_size);

}  // namespace taxisim
