#include "noisesim/core_model.hpp"

#include "noisesim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace noisesim {

int AgentTrack::valid_count() const {
    return static_cast<int>(std::count_if(states.begin(), states.end(), [](const AgentState& s) { return s.valid; }));
}

const AgentTrack* Scenario::find(std::int64_t agent_id) const {
    for (const auto& t : tracks)
        if (t.agent_id == agent_id) return &t;
    return nullptr;
}

std::string_view to_string(SplitTag s) {
    switch (s) {
        case SplitTag::train: return "train";
        case SplitTag::val: return "val";
        case SplitTag::test: return "test";
    }
    return "train";
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::clean: return "clean";
        case Provenance::corrupted: return "corrupted";
        case Provenance::cleaned: return "cleaned";
    }
    return "clean";
}

SplitTag parse_split(std::string_view s) {
    if (s == "train") return SplitTag::train;
    if (s == "val") return SplitTag::val;
    if (s == "test") return SplitTag::test;
    throw Error("bad-split", std::string(s));
}

Provenance parse_provenance(std::string_view s) {
    if (s == "clean") return Provenance::clean;
    if (s == "corrupted") return Provenance::corrupted;
    if (s == "cleaned") return Provenance::cleaned;
    throw Error("bad-provenance", std::string(s));
}

std::string_view to_string(PolylineKind k) {
    switch (k) {
        case PolylineKind::centerline: return "centerline";
        case PolylineKind::boundary_solid: return "boundary_solid";
        case PolylineKind::boundary_dashed: return "boundary_dashed";
        case PolylineKind::road_edge: return "road_edge";
    }
    return "centerline";
}

PolylineKind parse_polyline_kind(std::string_view s) {
    if (s == "centerline") return PolylineKind::centerline;
    if (s == "boundary_solid") return PolylineKind::boundary_solid;
    if (s == "boundary_dashed") return PolylineKind::boundary_dashed;
    if (s == "road_edge") return PolylineKind::road_edge;
    throw Error("bad-polyline-kind", std::string(s));
}

double Polyline::arc_length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).head<2>().norm();
    return total;
}

std::vector<const Polyline*> RoadMap::of_kind(PolylineKind k) const {
    std::vector<const Polyline*> out;
    for (const auto& p : polylines)
        if (p.kind == k) out.push_back(&p);
    return out;
}

ValidationReport validate_map(const RoadMap& map) {
    ValidationReport report;
    if (map.of_kind(PolylineKind::centerline).empty()) report.push_back({"no-centerlines", {}, {}, map.map_id});
    if (const auto n = map.of_kind(PolylineKind::road_edge).size(); n != 2)
        report.push_back({"road-edge-count", {}, {}, "expected 2, found " + std::to_string(n)});
    for (std::size_t i = 0; i < map.polylines.size(); ++i) {
        const auto& pts = map.polylines[i].points;
        if (pts.size() < 2) report.push_back({"degenerate-polyline", {}, {}, "polyline " + std::to_string(i)});
        for (std::size_t j = 1; j < pts.size(); ++j) {
            if (pts[j] == pts[j - 1]) {
                report.push_back({"duplicate-point", {}, {}, "polyline " + std::to_string(i) + " point " + std::to_string(j)});
                break;
            }
        }
    }
    return report;
}

ValidationReport validate_scenario(const Scenario& scenario, const RoadMap& map) {
    ValidationReport report = validate_map(map);
    if (scenario.map_id != map.map_id)
        report.push_back({"map-mismatch", {}, {}, scenario.map_id + " vs " + map.map_id});
    if (scenario.tracks.size() > kMaxTracks)
        report.push_back({"track-count", {}, {}, std::to_string(scenario.tracks.size())});
    if (scenario.split == SplitTag::test && scenario.provenance != Provenance::clean)
        report.push_back({"test-provenance", {}, {}, std::string(to_string(scenario.provenance))});

    std::set<std::int64_t> ids;
    for (const auto& track : scenario.tracks) {
        const auto id = track.agent_id;
        if (!ids.insert(id).second) report.push_back({"duplicate-agent-id", id, {}, {}});
        if (!(track.length > 0.0) || !(track.width > 0.0)) report.push_back({"dimensions", id, {}, {}});
        if (track.states.size() != static_cast<std::size_t>(kNumFrames))
            report.push_back({"frame-count", id, {}, std::to_string(track.states.size())});

        int last_valid = -1;
        bool any_history = false;
        for (int f = 0; f < static_cast<int>(track.states.size()); ++f) {
            const auto& s = track.states[f];
            if (!s.valid) continue;
            if (f < kHistoryFrames) any_history = true;
            if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.z) || !std::isfinite(s.heading)) {
                report.push_back({"non-finite", id, f, {}});
                continue;
            }
            if (!heading_in_range(s.heading)) report.push_back({"heading-range", id, f, std::to_string(s.heading)});
            if (last_valid >= 0) {
                const auto& prev = track.states[last_valid];
                const double step = std::hypot(s.x - prev.x, s.y - prev.y);
                if (step > kMaxStepDisplacement * (f - last_valid))
                    report.push_back({"step-displacement", id, f, std::to_string(step)});
            }
            last_valid = f;
        }
        if (!any_history && scenario.provenance == Provenance::clean) report.push_back({"history-missing", id, {}, {}});
    }
    return report;
}

PolylineProjection project(const Polyline& polyline, const Eigen::Vector2d& p) {
    const auto& pts = polyline.points;
    if (pts.size() < 2) throw Error("degenerate-polyline");
    PolylineProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    double station0 = 0.0;
    const std::size_t last = pts.size() - 2;
    for (std::size_t i = 0; i <= last; ++i) {
        const Eigen::Vector2d a = pts[i].head<2>();
        const Eigen::Vector2d d = pts[i + 1].head<2>() - a;
        const double len2 = d.squaredNorm();
        const double len = std::sqrt(len2);
        double t = (p - a).dot(d) / len2;
        if (i > 0) t = std::max(t, 0.0);
        if (i < last) t = std::min(t, 1.0);
        const Eigen::Vector2d foot = a + t * d;
        const Eigen::Vector2d r = p - foot;
        const double dist = r.norm();
        if (dist < best.distance) {
            best.distance = dist;
            best.signed_offset = (d.x() * r.y() - d.y() * r.x()) / len;
            best.station = station0 + t * len;
            best.tangent_heading = std::atan2(d.y(), d.x());
        }
        station0 += len;
    }
    return best;
}

RoadGeometry::RoadGeometry(const RoadMap& map)
    : centerlines_(map.of_kind(PolylineKind::centerline)), edges_(map.of_kind(PolylineKind::road_edge)) {
    if (centerlines_.empty()) throw Error("no-centerlines", map.map_id);
    if (edges_.size() != 2) throw Error("road-edge-count", map.map_id);
    const Eigen::Vector2d ref = centerlines_.front()->points.front().head<2>();
    for (const auto* e : edges_) inside_sign_.push_back(project(*e, ref).signed_offset >= 0.0 ? 1.0 : -1.0);
}

RoadFrame RoadGeometry::frame(const Eigen::Vector2d& p) const {
    constexpr double tie_tolerance = 1e-9;
    RoadFrame out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centerlines_.size(); ++i) {
        const auto proj = project(*centerlines_[i], p);
        if (proj.distance < best - tie_tolerance) {
            best = proj.distance;
            out.lane_index = static_cast<int>(i);
            out.lateral_offset = proj.signed_offset;
            out.station = proj.station;
            out.lane_heading = proj.tangent_heading;
        }
    }
    bool inside = true;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const double side = project(*edges_[e], p).signed_offset * inside_sign_[e];
        if (side < 0.0) inside = false;
        nearest = std::min(nearest, std::abs(side));
    }
    out.offroad = !inside;
    out.edge_distance = inside ? nearest : -nearest;
    return out;
}

RoadFrame road_frame(const RoadMap& map, const Eigen::Vector2d& point) { return RoadGeometry(map).frame(point); }

Polyline densify_polyline(const Polyline& polyline, int k) {
    if (polyline.points.size() < 2) throw Error("degenerate-polyline");
    if (k < 0) throw Error("bad-argument", "k must be non-negative");
    Polyline out{polyline.kind, {}};
    out.points.reserve(polyline.points.size() + static_cast<std::size_t>(k) * (polyline.points.size() - 1));
    for (std::size_t i = 0; i + 1 < polyline.points.size(); ++i) {
        const auto& a = polyline.points[i];
        const auto& b = polyline.points[i + 1];
        out.points.push_back(a);
        for (int j = 1; j <= k; ++j) out.points.push_back(a + (b - a) * (static_cast<double>(j) / (k + 1)));
    }
    out.points.push_back(polyline.points.back());
    return out;
}

RoadMap densify_map(const RoadMap& map, int k) {
    RoadMap out = map;
    for (auto& p : out.polylines) p = densify_polyline(p, k);
    return out;
}

}  // namespace noisesim
