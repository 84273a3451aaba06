#include "noisesim/cleaning.hpp"

#include "json_fields.hpp"

#include "noisesim/error.hpp"

#include <algorithm>
#include <cmath>

namespace noisesim {

NOISESIM_JSON_FIELDS(CleaningConfig, max_lateral, lateral_window, min_track_frames)

namespace {

template <typename Keep>
Scenario keep_if(const Scenario& scenario, Keep keep) {
    Scenario out = scenario;
    out.tracks.clear();
    for (const auto& t : scenario.tracks)
        if (keep(t)) out.tracks.push_back(t);
    return out;
}

}  // namespace

Scenario filter_offroad(const Scenario& scenario, const RoadMap& map) {
    const RoadGeometry geo(map);
    return keep_if(scenario, [&](const AgentTrack& t) {
        return std::any_of(t.states.begin(), t.states.end(),
                           [&](const AgentState& s) { return s.valid && !geo.frame(s.xy()).offroad; });
    });
}

Scenario filter_steep_lateral(const Scenario& scenario, const RoadMap& map, const CleaningConfig& config) {
    if (!config.valid()) throw Error("bad-config", "invalid CleaningConfig");
    const RoadGeometry geo(map);
    return keep_if(scenario, [&](const AgentTrack& t) {
        std::vector<Eigen::Vector2d> road;  // (station, lateral)
        for (const auto& s : t.states) {
            if (!s.valid) continue;
            const auto p = geo.reference(s.xy());
            road.emplace_back(p.station, p.signed_offset);
        }
        for (std::size_t i = 0; i < road.size(); ++i)
            for (std::size_t j = i + 1; j < road.size(); ++j)
                if (std::abs(road[j].x() - road[i].x()) <= config.lateral_window &&
                    std::abs(road[j].y() - road[i].y()) > config.max_lateral)
                    return false;
        return true;
    });
}

Scenario filter_short(const Scenario& scenario, const CleaningConfig& config) {
    return keep_if(scenario, [&](const AgentTrack& t) { return t.valid_count() >= config.min_track_frames; });
}

Scenario resolve_overlaps(const Scenario& scenario) {
    const auto& tracks = scenario.tracks;
    std::vector<bool> removed(tracks.size(), false);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        if (removed[i]) continue;
        for (std::size_t j = i + 1; j < tracks.size(); ++j) {
            if (removed[j]) continue;
            const double threshold = std::max(tracks[i].length, tracks[j].length);
            const std::size_t frames = std::min(tracks[i].states.size(), tracks[j].states.size());
            for (std::size_t f = 0; f < frames; ++f) {
                const auto& a = tracks[i].states[f];
                const auto& b = tracks[j].states[f];
                if (a.valid && b.valid && std::hypot(a.x - b.x, a.y - b.y) < threshold) {
                    removed[j] = true;
                    break;
                }
            }
        }
    }
    Scenario out = scenario;
    out.tracks.clear();
    for (std::size_t i = 0; i < tracks.size(); ++i)
        if (!removed[i]) out.tracks.push_back(tracks[i]);
    return out;
}

Scenario clean(const Scenario& scenario, const RoadMap& map, const CleaningConfig& config) {
    Scenario out = resolve_overlaps(filter_short(filter_steep_lateral(filter_offroad(scenario, map), map, config), config));
    out.provenance = Provenance::cleaned;
    return out;
}

}  // namespace noisesim
