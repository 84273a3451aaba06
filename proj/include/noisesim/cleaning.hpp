#pragma once

#include "noisesim/core_model.hpp"

#include <json.hpp>

namespace noisesim {

struct CleaningConfig {
    double max_lateral = 7.2;        // m of lateral travel allowed ...
    double lateral_window = 15.0;    // ... within this much longitudinal travel, m
    int min_track_frames = 10;

    bool valid() const { return max_lateral > 0 && lateral_window > 0 && min_track_frames > 0; }
};

void to_json(nlohmann::json& j, const CleaningConfig& c);
void from_json(const nlohmann::json& j, CleaningConfig& c);

// All filters remove whole tracks and never touch coordinates.

/// Drops tracks whose every valid state is offroad. Tracks grazing the edge survive.
Scenario filter_offroad(const Scenario& scenario, const RoadMap& map);

/// Drops tracks that move more than `max_lateral` sideways within any
/// `lateral_window` of longitudinal travel (road-aligned coordinates).
Scenario filter_steep_lateral(const Scenario& scenario, const RoadMap& map, const CleaningConfig& config = {});

/// Drops tracks with fewer than `min_track_frames` valid frames.
Scenario filter_short(const Scenario& scenario, const CleaningConfig& config = {});

/// Scans pairs in listing order; when two tracks' centers come closer than
/// the longer of their lengths at a shared valid frame, the later-listed one
/// is removed. Removed tracks take no part in later comparisons.
Scenario resolve_overlaps(const Scenario& scenario);

/// offroad -> steep lateral -> short -> overlaps; result marked cleaned.
Scenario clean(const Scenario& scenario, const RoadMap& map, const CleaningConfig& config = {});

}  // namespace noisesim
