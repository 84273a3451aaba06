#include "noisesim/sim_policies.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace noisesim {

namespace {

constexpr int kIdmSubsteps = 10;

/// Point at `station` along a polyline (end segments extended), shifted
/// `offset` to the left.
std::pair<Eigen::Vector2d, double> point_at_station(const Polyline& line, double station, double offset) {
    const auto& pts = line.points;
    double s0 = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Eigen::Vector2d a = pts[i].head<2>();
        const Eigen::Vector2d d = pts[i + 1].head<2>() - a;
        const double len = d.norm();
        if (station <= s0 + len || i + 2 == pts.size()) {
            const Eigen::Vector2d dir = d / len;
            const Eigen::Vector2d normal(-dir.y(), dir.x());
            return {a + dir * (station - s0) + normal * offset, std::atan2(dir.y(), dir.x())};
        }
        s0 += len;
    }
    throw Error("degenerate-polyline");
}

struct StartState {
    AgentState state;        // at the current frame
    Eigen::Vector2d velocity;
};

StartState start_state(const AgentTrack& track) {
    int last = -1;
    for (int f = 0; f < kHistoryFrames && f < static_cast<int>(track.states.size()); ++f)
        if (track.states[f].valid) last = f;
    if (last < 0) throw Error("missing-history", "agent " + std::to_string(track.agent_id));
    const Eigen::Vector2d vel = history_velocity(track);
    AgentState s = track.states[static_cast<std::size_t>(last)];
    if (last < kCurrentFrame) s = constant_speed_step(s, vel, (kCurrentFrame - last) * kFrameDt);
    return {s, vel};
}

std::vector<Scenario> replicate(Scenario sim, int k) { return std::vector<Scenario>(static_cast<std::size_t>(k), std::move(sim)); }

Scenario with_futures(const Scenario& scenario, const std::vector<std::vector<AgentState>>& futures) {
    Scenario out = scenario;
    for (std::size_t i = 0; i < out.tracks.size(); ++i) {
        auto& states = out.tracks[i].states;
        states.resize(kNumFrames);
        for (int f = kHistoryFrames; f < kNumFrames; ++f)
            states[static_cast<std::size_t>(f)] = futures[i][static_cast<std::size_t>(f - kHistoryFrames)];
    }
    return out;
}

Scenario simulate_constant_speed(const Scenario& scenario) {
    std::vector<std::vector<AgentState>> futures;
    for (const auto& t : scenario.tracks) {
        const auto start = start_state(t);
        std::vector<AgentState> fut;
        AgentState s = start.state;
        for (int f = kHistoryFrames; f < kNumFrames; ++f) {
            s = constant_speed_step(s, start.velocity, kFrameDt);
            fut.push_back(s);
        }
        futures.push_back(std::move(fut));
    }
    return with_futures(scenario, futures);
}

Scenario simulate_idm(const Scenario& scenario, const RoadMap& map, const IdmParams& params) {
    const RoadGeometry geo(map);
    struct Lane {
        int lane;
        double offset, station, speed, length;
    };
    std::vector<Lane> agents;
    for (const auto& t : scenario.tracks) {
        const auto start = start_state(t);
        const RoadFrame rf = geo.frame(start.state.xy());
        const Eigen::Vector2d dir(std::cos(rf.lane_heading), std::sin(rf.lane_heading));
        agents.push_back({rf.lane_index, rf.lateral_offset, rf.station, std::max(0.0, start.velocity.dot(dir)), t.length});
    }
    std::vector<std::vector<AgentState>> futures(agents.size());
    std::vector<double> accel(agents.size());
    const double dt = kFrameDt / kIdmSubsteps;
    for (int f = kHistoryFrames; f < kNumFrames; ++f) {
        for (int sub = 0; sub < kIdmSubsteps; ++sub) {
            for (std::size_t i = 0; i < agents.size(); ++i) {
                const auto& me = agents[i];
                int lead = -1;
                for (std::size_t j = 0; j < agents.size(); ++j) {
                    if (j == i || agents[j].lane != me.lane || agents[j].station <= me.station) continue;
                    if (lead < 0 || agents[j].station < agents[static_cast<std::size_t>(lead)].station) lead = static_cast<int>(j);
                }
                std::optional<LeadVehicle> lv;
                if (lead >= 0) {
                    const auto& other = agents[static_cast<std::size_t>(lead)];
                    const double gap = other.station - me.station - 0.5 * (other.length + me.length);
                    lv = LeadVehicle{other.speed, std::max(gap, 1e-3)};
                }
                accel[i] = idm_accel(me.speed, lv, params);
            }
            for (std::size_t i = 0; i < agents.size(); ++i) {
                agents[i].speed = std::max(0.0, agents[i].speed + accel[i] * dt);
                agents[i].station += agents[i].speed * dt;
            }
        }
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const auto& a = agents[i];
            const auto [p, heading] = point_at_station(geo.centerline(static_cast<std::size_t>(a.lane)), a.station, a.offset);
            futures[i].push_back({p.x(), p.y(), scenario.tracks[i].states[kCurrentFrame].z, wrap_angle(heading), true});
        }
    }
    return with_futures(scenario, futures);
}

Scenario simulate_replay(const Scenario& scenario) {
    for (const auto& t : scenario.tracks) start_state(t);
    return scenario;
}

Scenario simulate_learned(const Scenario& scenario, const RoadMap& map, const LearnedPolicy& policy, int rollout_index,
                          const RolloutOptions& options) {
    if (!policy.params || !policy.vocab) throw Error("bad-policy", "learned policy without parameters or vocab");
    const auto& params = *policy.params;
    const auto& vocab = *policy.vocab;
    if (params.arch.vocab_size != vocab.size()) throw Error("shape-mismatch", "policy/vocab size");
    const int p = vocab.period_frames();
    if (kFutureFrames % p != 0 || kCurrentFrame < kHistoryTokens * p) throw Error("bad-token-period");
    const RoadGeometry geo(map);
    const int unknown = params.arch.unknown_token();

    const std::size_t n = scenario.tracks.size();
    std::vector<std::vector<AgentState>> frames(n);  // full 91-frame working copy
    std::vector<AgentSnapshot> snaps(n);
    std::vector<Rng> rngs;
    rngs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = scenario.tracks[i];
        const auto start = start_state(t);
        frames[i].assign(t.states.begin(), t.states.begin() + kHistoryFrames);
        frames[i][kCurrentFrame] = start.state;
        frames[i][kCurrentFrame].valid = true;
        snaps[i].agent_id = t.agent_id;
        for (int k = 0; k < kHistoryTokens; ++k) {
            const int a = kCurrentFrame - (kHistoryTokens - k) * p;
            bool ok = true;
            for (int f = a; f <= a + p && ok; ++f) ok = frames[i][static_cast<std::size_t>(f)].valid;
            snaps[i].history[static_cast<std::size_t>(k)] =
                ok ? encode_delta(relative_delta(frames[i][static_cast<std::size_t>(a)], frames[i][static_cast<std::size_t>(a + p)]), vocab)
                   : unknown;
        }
        snaps[i].velocity = start.velocity;
        rngs.emplace_back(SeedBuilder(options.master_seed).add("rollout").add(static_cast<std::uint64_t>(rollout_index))
                              .add(static_cast<std::uint64_t>(t.agent_id)).seed());
    }

    std::vector<PolicyContext> contexts(n);
    for (int anchor = kCurrentFrame; anchor < kNumFrames - 1; anchor += p) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& cur = frames[i][static_cast<std::size_t>(anchor)];
            snaps[i].position = cur.xy();
            snaps[i].heading = cur.heading;
            if (anchor > kCurrentFrame) {
                const auto& prev = frames[i][static_cast<std::size_t>(anchor - p)];
                snaps[i].velocity = (cur.xy() - prev.xy()) / (p * kFrameDt);
            }
        }
        for (std::size_t i = 0; i < n; ++i) contexts[i] = build_context(snaps, i, geo);
        const Eigen::MatrixXd logits = policy_forward(params, make_batch(contexts));
        for (std::size_t i = 0; i < n; ++i) {
            const int tok = sample_token(logits.col(static_cast<Eigen::Index>(i)), options.temperature, rngs[i]);
            const auto seg = decode(frames[i][static_cast<std::size_t>(anchor)], std::span(&tok, 1), vocab);
            frames[i].insert(frames[i].end(), seg.begin() + 1, seg.end());
            for (int k = 0; k + 1 < kHistoryTokens; ++k) snaps[i].history[static_cast<std::size_t>(k)] = snaps[i].history[static_cast<std::size_t>(k + 1)];
            snaps[i].history[kHistoryTokens - 1] = tok;
        }
    }
    std::vector<std::vector<AgentState>> futures(n);
    for (std::size_t i = 0; i < n; ++i) futures[i].assign(frames[i].begin() + kHistoryFrames, frames[i].end());
    return with_futures(scenario, futures);
}

}  // namespace

AgentState constant_speed_step(const AgentState& state, const Eigen::Vector2d& velocity, double dt) {
    if (!(dt > 0.0)) throw Error("bad-argument", "dt must be positive");
    AgentState next = state;
    next.x += velocity.x() * dt;
    next.y += velocity.y() * dt;
    return next;
}

Eigen::Vector2d history_velocity(const AgentTrack& track) {
    int last = -1;
    int prev = -1;
    for (int f = 0; f < kHistoryFrames && f < static_cast<int>(track.states.size()); ++f) {
        if (!track.states[static_cast<std::size_t>(f)].valid) continue;
        prev = last;
        last = f;
    }
    if (prev < 0) return Eigen::Vector2d::Zero();
    return (track.states[static_cast<std::size_t>(last)].xy() - track.states[static_cast<std::size_t>(prev)].xy()) /
           ((last - prev) * kFrameDt);
}

std::vector<IdmParams> IdmGrid::points() const {
    std::vector<IdmParams> out;
    for (double pv0 : v0)
        for (double pT : T)
            for (double pa : a)
                for (double pb : b)
                    for (double ps0 : s0) out.push_back({pv0, pT, pa, pb, ps0, delta});
    return out;
}

namespace {

/// Positions per frame with invalid frames linearly interpolated; empty when
/// the track is too sparse or not valid at both ends.
std::vector<Eigen::Vector2d> bridged_positions(const AgentTrack& t) {
    if (static_cast<int>(t.states.size()) != kNumFrames || !t.states.front().valid || !t.states.back().valid) return {};
    if (t.valid_count() < kPairMinValidFraction * kNumFrames) return {};
    std::vector<Eigen::Vector2d> out(kNumFrames);
    int last = 0;
    out[0] = t.states[0].xy();
    for (int f = 1; f < kNumFrames; ++f) {
        if (!t.states[static_cast<std::size_t>(f)].valid) continue;
        const Eigen::Vector2d a = t.states[static_cast<std::size_t>(last)].xy(), b = t.states[static_cast<std::size_t>(f)].xy();
        for (int g = last + 1; g <= f; ++g) out[static_cast<std::size_t>(g)] = a + (b - a) * (double(g - last) / (f - last));
        last = f;
    }
    return out;
}

}  // namespace

std::vector<FollowingPair> find_following_pairs(const Scenario& scenario, const RoadMap& map) {
    const RoadGeometry geo(map);
    struct Lane {
        const AgentTrack* track;
        std::vector<RoadFrame> frames;
        std::vector<double> station;
    };
    std::vector<Lane> usable;
    for (const auto& t : scenario.tracks) {
        const auto pos = bridged_positions(t);
        if (pos.empty()) continue;
        Lane l{&t, {}, {}};
        for (const auto& p : pos) {
            l.frames.push_back(geo.frame(p));
            l.station.push_back(geo.reference(p).station);
        }
        usable.push_back(std::move(l));
    }
    std::vector<FollowingPair> pairs;
    for (const auto& f : usable) {
        const Lane* leader = nullptr;
        bool consistent = true;
        for (int fr = 0; fr < kNumFrames && consistent; ++fr) {
            const auto& me = f.frames[static_cast<std::size_t>(fr)];
            const Lane* best = nullptr;
            for (const auto& o : usable) {
                const auto& them = o.frames[static_cast<std::size_t>(fr)];
                if (o.track == f.track || them.lane_index != me.lane_index || them.station <= me.station) continue;
                if (!best || them.station < best->frames[static_cast<std::size_t>(fr)].station) best = &o;
            }
            if (!best || (leader && best != leader)) consistent = false;
            else leader = best;
            if (consistent && fr > 0 && me.lane_index != f.frames[0].lane_index) consistent = false;
        }
        if (consistent && leader) pairs.push_back({f.track, leader->track, f.station, leader->station});
    }
    return pairs;
}

IdmCalibration calibrate_idm(std::span<const Scenario> scenarios, const RoadMap& map, const IdmGrid& grid) {
    const RoadGeometry geo(map);
    struct Series {
        std::vector<double> follower, leader;  // stations per frame
        double gap_offset;                     // half lengths
    };
    std::vector<Series> series;
    for (const auto& sc : scenarios) {
        for (const auto& pair : find_following_pairs(sc, map)) {
            series.push_back({pair.follower_station, pair.leader_station, 0.5 * (pair.follower->length + pair.leader->length)});
        }
    }
    if (series.empty()) throw Error("no-pairs");
    const auto points = grid.points();
    if (points.empty()) throw Error("bad-argument", "empty IDM grid");

    IdmCalibration best;
    best.error = std::numeric_limits<double>::infinity();
    best.pairs = series.size();
    const double dt = kFrameDt / kIdmSubsteps;
    for (std::size_t g = 0; g < points.size(); ++g) {
        const auto& p = points[g];
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& s : series) {
            double pos = s.follower[1];
            double v = std::max(0.0, (s.follower[2] - s.follower[0]) / (2 * kFrameDt));
            for (int f = 1; f + 1 < kNumFrames; ++f) {
                if (f >= 2) {
                    const double observed = (s.follower[static_cast<std::size_t>(f + 1)] - s.follower[static_cast<std::size_t>(f - 1)]) / (2 * kFrameDt);
                    sum += (v - observed) * (v - observed);
                    ++count;
                }
                const double lead_v = (s.leader[static_cast<std::size_t>(f + 1)] - s.leader[static_cast<std::size_t>(f)]) / kFrameDt;
                for (int sub = 0; sub < kIdmSubsteps; ++sub) {
                    const double lead_pos = s.leader[static_cast<std::size_t>(f)] + lead_v * sub * dt;
                    const double gap = std::max(lead_pos - pos - s.gap_offset, 1e-3);
                    v = std::max(0.0, v + idm_accel(v, LeadVehicle{lead_v, gap}, p) * dt);
                    pos += v * dt;
                }
            }
        }
        const double err = sum / static_cast<double>(count);
        if (err < best.error) {
            best = {p, err, g, series.size()};
        }
    }
    return best;
}

std::string policy_name(const SimPolicy& policy) {
    struct Visitor {
        std::string operator()(const ConstantSpeedPolicy&) const { return "const"; }
        std::string operator()(const IdmPolicy&) const { return "idm"; }
        std::string operator()(const LearnedPolicy&) const { return "learned"; }
        std::string operator()(const ReplayPolicy&) const { return "replay"; }
    };
    return std::visit(Visitor{}, policy);
}

std::vector<Scenario> rollout(const Scenario& scenario, const RoadMap& map, const SimPolicy& policy,
                              const RolloutOptions& options) {
    if (options.k_rollouts < 1) throw Error("bad-argument", "k_rollouts must be positive");
    for (const auto& t : scenario.tracks)
        if (t.states.size() != static_cast<std::size_t>(kNumFrames)) throw Error("bad-scenario", "frame count");

    if (std::holds_alternative<ConstantSpeedPolicy>(policy)) return replicate(simulate_constant_speed(scenario), options.k_rollouts);
    if (const auto* idm = std::get_if<IdmPolicy>(&policy)) return replicate(simulate_idm(scenario, map, idm->params), options.k_rollouts);
    if (std::holds_alternative<ReplayPolicy>(policy)) return replicate(simulate_replay(scenario), options.k_rollouts);

    const auto& learned = std::get<LearnedPolicy>(policy);
    std::vector<Scenario> out;
    out.reserve(static_cast<std::size_t>(options.k_rollouts));
    for (int k = 0; k < options.k_rollouts; ++k) out.push_back(simulate_learned(scenario, map, learned, k, options));
    return out;
}

}  // namespace noisesim
