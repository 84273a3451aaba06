#include "noisesim/noise_model.hpp"

#include "json_fields.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>

namespace noisesim {

NOISESIM_JSON_FIELDS(NoiseConfig, jitter_sigma_xy, jitter_sigma_heading, dropout_rate,
                                                occlusion_rate, occlusion_mean_len, fragmentation_rate, seed)

bool NoiseConfig::valid() const {
    auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    return jitter_sigma_xy >= 0.0 && jitter_sigma_heading >= 0.0 && unit(dropout_rate) && unit(occlusion_rate) &&
           unit(fragmentation_rate) && occlusion_mean_len >= 1.0;
}

namespace {

void occlude(AgentTrack& track, Rng& rng, const NoiseConfig& c) {
    if (!rng.bernoulli(c.occlusion_rate)) return;
    const auto start = static_cast<std::int64_t>(rng.below(track.states.size()));
    const auto len = rng.geometric(1.0 / c.occlusion_mean_len);
    const auto end = std::min<std::int64_t>(start + len, static_cast<std::int64_t>(track.states.size()));
    for (auto f = start; f < end; ++f) track.states[static_cast<std::size_t>(f)].valid = false;
}

void drop(AgentTrack& track, Rng& rng, const NoiseConfig& c) {
    if (c.dropout_rate <= 0.0) return;
    for (auto& s : track.states)
        if (rng.bernoulli(c.dropout_rate)) s.valid = false;
}

void jitter(AgentTrack& track, Rng& rng, const NoiseConfig& c) {
    if (c.jitter_sigma_xy <= 0.0 && c.jitter_sigma_heading <= 0.0) return;
    for (auto& s : track.states) {
        if (!s.valid) continue;
        if (c.jitter_sigma_xy > 0.0) {
            s.x += c.jitter_sigma_xy * rng.normal();
            s.y += c.jitter_sigma_xy * rng.normal();
        }
        if (c.jitter_sigma_heading > 0.0) s.heading = wrap_angle(s.heading + c.jitter_sigma_heading * rng.normal());
    }
}

}  // namespace

Scenario corrupt(const Scenario& scenario, const NoiseConfig& config) {
    if (scenario.provenance != Provenance::clean) throw Error("double-corruption", scenario.scenario_id);
    if (!config.valid()) throw Error("bad-config", "invalid NoiseConfig");

    Scenario out = scenario;
    out.provenance = Provenance::corrupted;
    out.tracks.clear();

    std::int64_t next_id = 0;
    for (const auto& t : scenario.tracks) next_id = std::max(next_id, t.agent_id);
    ++next_id;
    std::size_t remaining_sources = scenario.tracks.size();

    for (const auto& source : scenario.tracks) {
        --remaining_sources;
        Rng rng(SeedBuilder(config.seed).add("corrupt").add(scenario.scenario_id).add(static_cast<std::uint64_t>(source.agent_id)).seed());

        std::vector<AgentTrack> pieces{source};
        const bool split = rng.bernoulli(config.fragmentation_rate);
        const auto cut = 1 + static_cast<std::size_t>(rng.below(source.states.size() > 1 ? source.states.size() - 1 : 1));
        // Room must remain for this track's two pieces and every untouched source after it.
        if (split && source.states.size() > 1 && out.tracks.size() + 2 + remaining_sources <= kMaxTracks) {
            AgentTrack tail = source;
            tail.agent_id = next_id++;
            for (std::size_t f = 0; f < cut; ++f) tail.states[f].valid = false;
            for (std::size_t f = cut; f < source.states.size(); ++f) pieces[0].states[f].valid = false;
            pieces.push_back(std::move(tail));
        }
        for (auto& piece : pieces) {
            occlude(piece, rng, config);
            drop(piece, rng, config);
            jitter(piece, rng, config);
            out.tracks.push_back(std::move(piece));
        }
    }
    return out;
}

}  // namespace noisesim
