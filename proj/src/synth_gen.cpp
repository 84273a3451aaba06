#include "noisesim/synth_gen.hpp"

#include "json_fields.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace noisesim {

NOISESIM_JSON_FIELDS(IdmParams, v0, T, a, b, s0, delta)
NOISESIM_JSON_FIELDS(SynthConfig, lanes, length, lane_width, vehicle_count, desired_speed_min,
                                                desired_speed_max, initial_gap_min, initial_gap_max, lane_change_rate,
                                                wave_mode, wave_period, wave_amplitude, warmup, driver_spread, idm, seed)

namespace {

constexpr double kVehicleLength = 4.5;
constexpr double kVehicleWidth = 1.8;
constexpr double kSubstep = 0.01;
constexpr int kSubstepsPerFrame = 10;
constexpr double kLaneChangeDuration = 3.0;
constexpr double kMinLaneChangeSpeed = 5.0;
constexpr double kMinBumperGap = 0.5;

struct Vehicle {
    std::int64_t id = 0;
    int lane = 0;
    double x = 0.0;
    double v = 0.0;
    double desired = 0.0;
    IdmParams idm;
    bool scripted = false;  // lane leader following a speed profile
    double phase = 0.0;
    // lane-change state; elapsed < 0 means lane keeping
    double y_from = 0.0;
    double y_to = 0.0;
    double lc_elapsed = -1.0;
};

void validate(const SynthConfig& c) {
    const bool ok = c.lanes >= 1 && c.length > 0 && c.lane_width > 0 && c.vehicle_count >= 1 &&
                    c.vehicle_count <= static_cast<int>(kMaxTracks) && c.desired_speed_min > 0 &&
                    c.desired_speed_min <= c.desired_speed_max && c.initial_gap_min > 0 &&
                    c.initial_gap_min <= c.initial_gap_max && c.lane_change_rate >= 0 && c.lane_change_rate <= 1 &&
                    c.wave_period > 0 && c.wave_amplitude >= 0 && c.wave_amplitude < 1 && c.warmup >= 0 &&
                    c.driver_spread >= 0 && c.driver_spread < 1 && c.idm.valid();
    if (!ok) throw Error("bad-config", "invalid SynthConfig");
}

/// Index of the nearest vehicle strictly ahead of `x` in `lane`, or -1.
int leader_in_lane(const std::vector<Vehicle>& fleet, int lane, double x, std::size_t self) {
    int best = -1;
    for (std::size_t j = 0; j < fleet.size(); ++j) {
        if (j == self || fleet[j].lane != lane || fleet[j].x <= x) continue;
        if (best < 0 || fleet[j].x < fleet[best].x) best = static_cast<int>(j);
    }
    return best;
}

int follower_in_lane(const std::vector<Vehicle>& fleet, int lane, double x, std::size_t self) {
    int best = -1;
    for (std::size_t j = 0; j < fleet.size(); ++j) {
        if (j == self || fleet[j].lane != lane || fleet[j].x > x) continue;
        if (best < 0 || fleet[j].x > fleet[best].x) best = static_cast<int>(j);
    }
    return best;
}

}  // namespace

RoadMap build_freeway_map(int lanes, double length, double lane_width, const std::string& map_id) {
    if (lanes < 1 || !(length > 0) || !(lane_width > 0)) throw Error("bad-config", "invalid freeway geometry");
    constexpr double spacing = 10.0;
    auto line = [&](PolylineKind kind, double y) {
        Polyline p{kind, {}};
        const int n = static_cast<int>(std::floor(length / spacing + 1e-9));
        for (int i = 0; i <= n; ++i) p.points.emplace_back(i * spacing, y, 0.0);
        if (p.points.back().x() < length - 1e-9) p.points.emplace_back(length, y, 0.0);
        return p;
    };
    RoadMap map;
    map.map_id = map_id;
    map.nominal_lane_width = lane_width;
    for (int i = 0; i < lanes; ++i) map.polylines.push_back(line(PolylineKind::centerline, i * lane_width));
    map.polylines.push_back(line(PolylineKind::boundary_solid, -0.5 * lane_width));
    for (int i = 0; i + 1 < lanes; ++i) map.polylines.push_back(line(PolylineKind::boundary_dashed, (i + 0.5) * lane_width));
    map.polylines.push_back(line(PolylineKind::boundary_solid, (lanes - 0.5) * lane_width));
    map.polylines.push_back(line(PolylineKind::road_edge, -0.5 * lane_width));
    map.polylines.push_back(line(PolylineKind::road_edge, (lanes - 0.5) * lane_width));
    return map;
}

Scenario generate_scenario(const SynthConfig& config, const RoadMap& map, const std::string& scenario_id) {
    validate(config);
    const auto centerlines = map.of_kind(PolylineKind::centerline);
    if (centerlines.empty()) throw Error("no-centerlines", map.map_id);
    const int lanes = std::min<int>(config.lanes, static_cast<int>(centerlines.size()));
    std::vector<double> lane_y;
    for (int l = 0; l < lanes; ++l) lane_y.push_back(centerlines[l]->points.front().y());

    Rng rng(SeedBuilder(config.seed).add("synth").add(scenario_id).seed());

    const double horizon = config.warmup + (kNumFrames - 1) * kFrameDt;
    const double available = config.length - config.max_desired_speed() * horizon - 10.0;

    std::vector<Vehicle> fleet(static_cast<std::size_t>(config.vehicle_count));
    std::vector<std::vector<std::size_t>> per_lane(static_cast<std::size_t>(lanes));
    for (std::size_t k = 0; k < fleet.size(); ++k) per_lane[k % lanes].push_back(k);

    for (int l = 0; l < lanes; ++l) {
        const auto& members = per_lane[l];
        const auto n = static_cast<double>(members.size());
        if (members.empty()) continue;
        const double min_extent = n * kVehicleLength + (n - 1) * config.initial_gap_min;
        if (available <= 0 || min_extent > available) throw Error("overcrowded", "lane " + std::to_string(l));
        double gap_hi = config.initial_gap_max;
        if (n > 1) gap_hi = std::min(gap_hi, std::max(config.initial_gap_min, (available - n * kVehicleLength) / (n - 1)));

        std::vector<double> gaps;
        double extent = n * kVehicleLength;
        for (std::size_t i = 1; i < members.size(); ++i) {
            gaps.push_back(rng.uniform(config.initial_gap_min, gap_hi));
            extent += gaps.back();
        }
        double x = extent + rng.uniform() * std::max(0.0, available - extent);
        for (std::size_t i = 0; i < members.size(); ++i) {
            auto& veh = fleet[members[i]];
            veh.lane = l;
            veh.x = x;
            veh.desired = rng.uniform(config.desired_speed_min, config.desired_speed_max);
            veh.scripted = (i == 0);
            veh.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            veh.idm = config.idm;
            veh.idm.v0 = config.idm.v0 * (1.0 - config.driver_spread * rng.uniform());
            veh.idm.T = config.idm.T * (1.0 + config.driver_spread * rng.uniform(-1.0, 1.0));
            veh.y_from = veh.y_to = lane_y[l];
            if (i + 1 < members.size()) x -= kVehicleLength + gaps[i];
        }
    }

    // Listing order: lane by lane, front to back.
    std::vector<std::size_t> listing;
    for (const auto& members : per_lane) listing.insert(listing.end(), members.begin(), members.end());
    for (std::size_t r = 0; r < listing.size(); ++r) fleet[listing[r]].id = static_cast<std::int64_t>(r + 1);

    auto scripted_speed = [&](const Vehicle& veh, double t) {
        if (!config.wave_mode) return veh.desired;
        const double amp = config.wave_amplitude;
        return veh.desired * (1.0 - amp + amp * std::cos(2.0 * std::numbers::pi * t / config.wave_period + veh.phase));
    };
    for (auto& veh : fleet) veh.v = veh.scripted ? scripted_speed(veh, 0.0) : veh.desired;

    Scenario scenario;
    scenario.scenario_id = scenario_id;
    scenario.map_id = map.map_id;
    scenario.provenance = Provenance::clean;
    scenario.tracks.resize(fleet.size());
    for (std::size_t r = 0; r < listing.size(); ++r) {
        auto& track = scenario.tracks[r];
        track.agent_id = fleet[listing[r]].id;
        track.length = kVehicleLength;
        track.width = kVehicleWidth;
        track.states.reserve(kNumFrames);
    }

    const int warmup_steps = static_cast<int>(std::lround(config.warmup / kSubstep));
    const int total_steps = warmup_steps + (kNumFrames - 1) * kSubstepsPerFrame;
    const double lc_prob = config.lane_change_rate * kSubstep;

    auto record = [&] {
        for (std::size_t r = 0; r < listing.size(); ++r) {
            const auto& veh = fleet[listing[r]];
            double y = veh.y_to;
            double heading = 0.0;
            if (veh.lc_elapsed >= 0.0) {
                const double w = std::numbers::pi / kLaneChangeDuration;
                const double dy = veh.y_to - veh.y_from;
                y = veh.y_from + dy * 0.5 * (1.0 - std::cos(w * veh.lc_elapsed));
                const double vy = dy * 0.5 * w * std::sin(w * veh.lc_elapsed);
                heading = std::atan2(vy, std::max(veh.v, 1e-3));
            }
            scenario.tracks[r].states.push_back({veh.x, y, 0.0, wrap_angle(heading), true});
        }
    };

    std::vector<double> accel(fleet.size());
    for (int step = 0; step <= total_steps; ++step) {
        if (step >= warmup_steps && (step - warmup_steps) % kSubstepsPerFrame == 0) record();
        if (step == total_steps) break;
        const double t = step * kSubstep;

        for (std::size_t i = 0; i < fleet.size(); ++i) {
            auto& veh = fleet[i];
            const bool draw = rng.bernoulli(lc_prob);
            const bool go_left = rng.bernoulli(0.5);
            if (!draw || veh.scripted || veh.lc_elapsed >= 0.0 || veh.v < kMinLaneChangeSpeed || lanes < 2) continue;
            int target = veh.lane + (go_left ? 1 : -1);
            if (target < 0 || target >= lanes) target = veh.lane + (go_left ? -1 : 1);
            const int lead = leader_in_lane(fleet, target, veh.x, i);
            const int lag = follower_in_lane(fleet, target, veh.x, i);
            const double need_lead = veh.idm.s0 + veh.v * veh.idm.T;
            if (lead >= 0 && fleet[lead].x - veh.x - kVehicleLength < need_lead) continue;
            if (lag >= 0) {
                const auto& follower = fleet[lag];
                if (veh.x - follower.x - kVehicleLength < follower.idm.s0 + follower.v * follower.idm.T) continue;
            }
            veh.y_from = lane_y[veh.lane];
            veh.y_to = lane_y[target];
            veh.lane = target;
            veh.lc_elapsed = 0.0;
        }

        for (std::size_t i = 0; i < fleet.size(); ++i) {
            const auto& veh = fleet[i];
            if (veh.scripted) continue;
            const int lead = leader_in_lane(fleet, veh.lane, veh.x, i);
            std::optional<LeadVehicle> lv;
            if (lead >= 0) lv = LeadVehicle{fleet[lead].v, std::max(fleet[lead].x - veh.x - kVehicleLength, 1e-3)};
            accel[i] = idm_accel(veh.v, lv, veh.idm);
        }
        for (std::size_t i = 0; i < fleet.size(); ++i) {
            auto& veh = fleet[i];
            veh.v = veh.scripted ? scripted_speed(veh, t + kSubstep) : std::max(0.0, veh.v + accel[i] * kSubstep);
            veh.x += veh.v * kSubstep;
            if (veh.lc_elapsed >= 0.0) {
                veh.lc_elapsed += kSubstep;
                if (veh.lc_elapsed >= kLaneChangeDuration - 1e-9) veh.lc_elapsed = -1.0;
            }
        }
        // Hard floor on bumper gaps, front to back within each lane.
        for (std::size_t i = 0; i < fleet.size(); ++i) {
            auto& veh = fleet[i];
            const int lead = leader_in_lane(fleet, veh.lane, veh.x, i);
            if (lead < 0) continue;
            const auto& front = fleet[lead];
            if (front.x - veh.x - kVehicleLength < kMinBumperGap) {
                veh.x = front.x - kVehicleLength - kMinBumperGap;
                veh.v = std::min(veh.v, front.v);
            }
        }
    }
    return scenario;
}

}  // namespace noisesim
