#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace noisesim {

inline constexpr int kNumFrames = 91;
inline constexpr int kCurrentFrame = 10;  // last history frame
inline constexpr int kHistoryFrames = kCurrentFrame + 1;
inline constexpr int kFutureFrames = kNumFrames - kHistoryFrames;
inline constexpr double kFrameDt = 0.1;
inline constexpr std::size_t kMaxTracks = 32;
inline constexpr double kMaxSpeed = 70.0;
inline constexpr double kMaxStepDisplacement = kMaxSpeed * kFrameDt;

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = a - two_pi * std::floor((a + std::numbers::pi) / two_pi);
    if (w >= std::numbers::pi) w -= two_pi;
    if (w < -std::numbers::pi) w += two_pi;
    return w;
}

inline bool heading_in_range(double h) { return h >= -std::numbers::pi && h < std::numbers::pi; }

struct AgentState {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double heading = 0.0;
    bool valid = false;

    Eigen::Vector2d xy() const { return {x, y}; }

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct AgentTrack {
    std::int64_t agent_id = 0;
    double length = 4.5;
    double width = 1.8;
    std::vector<AgentState> states;  // kNumFrames entries at 10 Hz

    int valid_count() const;
    friend bool operator==(const AgentTrack&, const AgentTrack&) = default;
};

enum class SplitTag { train, val, test };
enum class Provenance { clean, corrupted, cleaned };

std::string_view to_string(SplitTag s);
std::string_view to_string(Provenance p);
SplitTag parse_split(std::string_view s);
Provenance parse_provenance(std::string_view s);

struct Scenario {
    std::string scenario_id;
    std::vector<AgentTrack> tracks;
    std::string map_id;
    SplitTag split = SplitTag::train;
    Provenance provenance = Provenance::clean;

    const AgentTrack* find(std::int64_t agent_id) const;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

enum class PolylineKind { centerline, boundary_solid, boundary_dashed, road_edge };

std::string_view to_string(PolylineKind k);
PolylineKind parse_polyline_kind(std::string_view s);

struct Polyline {
    PolylineKind kind = PolylineKind::centerline;
    std::vector<Eigen::Vector3d> points;

    double arc_length() const;
    friend bool operator==(const Polyline& a, const Polyline& b) { return a.kind == b.kind && a.points == b.points; }
};

struct RoadMap {
    std::string map_id;
    std::vector<Polyline> polylines;
    double nominal_lane_width = 3.6;

    std::vector<const Polyline*> of_kind(PolylineKind k) const;
    friend bool operator==(const RoadMap&, const RoadMap&) = default;
};

struct Violation {
    std::string code;
    std::optional<std::int64_t> agent_id;
    std::optional<int> frame;
    std::string detail;

    friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

/// Structural checks on a map: centerline presence, two road edges, distinct
/// consecutive points.
ValidationReport validate_map(const RoadMap& map);

/// Every invariant violation of the scenario (and its map), in a stable order.
/// The no-history check only applies to clean scenarios; corruption may
/// legitimately leave late-starting fragments or fully dropped tracks.
ValidationReport validate_scenario(const Scenario& scenario, const RoadMap& map);

/// Projection of a point onto a polyline whose first and last segments are
/// extended as rays.
struct PolylineProjection {
    double distance = 0.0;        // perpendicular distance to the projected point
    double signed_offset = 0.0;   // left of travel direction is positive
    double station = 0.0;         // arc length at the projection (may be <0 or >length)
    double tangent_heading = 0.0; // direction of the segment projected onto
};

PolylineProjection project(const Polyline& polyline, const Eigen::Vector2d& p);

struct RoadFrame {
    int lane_index = 0;
    double lateral_offset = 0.0;
    double station = 0.0;
    bool offroad = false;
    double lane_heading = 0.0;
    /// Distance to the nearer road edge; positive inside the road, negative outside.
    double edge_distance = 0.0;
};

/// Precomputed map lookups. Construct once per map and reuse; cheap to copy.
class RoadGeometry {
public:
    explicit RoadGeometry(const RoadMap& map);

    RoadFrame frame(const Eigen::Vector2d& p) const;

    /// Station/lateral relative to the first centerline, a single road-aligned
    /// coordinate system spanning all lanes.
    PolylineProjection reference(const Eigen::Vector2d& p) const { return project(*centerlines_.front(), p); }

    std::size_t lane_count() const { return centerlines_.size(); }
    const Polyline& centerline(std::size_t i) const { return *centerlines_.at(i); }

private:
    std::vector<const Polyline*> centerlines_;
    std::vector<const Polyline*> edges_;
    std::vector<double> inside_sign_;  // sign of the road interior w.r.t. each edge
};

/// Lane assignment and offroad status of a planar point. z is ignored.
RoadFrame road_frame(const RoadMap& map, const Eigen::Vector2d& point);

/// Inserts k evenly spaced linear interpolants between consecutive points.
Polyline densify_polyline(const Polyline& polyline, int k = 10);

RoadMap densify_map(const RoadMap& map, int k = 10);

}  // namespace noisesim
