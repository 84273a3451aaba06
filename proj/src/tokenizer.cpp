#include "noisesim/tokenizer.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace noisesim {

int token_period_frames(double token_period) {
    const double frames = token_period / kFrameDt;
    const long rounded = std::lround(frames);
    if (rounded < 1 || std::abs(frames - static_cast<double>(rounded)) > 1e-6)
        throw Error("bad-token-period", std::to_string(token_period));
    return static_cast<int>(rounded);
}

int TokenVocab::period_frames() const { return token_period_frames(token_period); }

std::uint64_t TokenVocab::hash() const {
    std::uint64_t h = fnv1a("vocab");
    auto feed = [&h](double v) { h = fnv1a(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h); };
    for (const auto& t : templates) {
        feed(t.dx);
        feed(t.dy);
        feed(t.dheading);
    }
    feed(coverage_radius);
    feed(heading_weight);
    feed(token_period);
    return h;
}

nlohmann::json to_json(const TokenVocab& vocab) {
    nlohmann::json templates = nlohmann::json::array();
    for (const auto& t : vocab.templates) templates.push_back({t.dx, t.dy, t.dheading});
    return {{"templates", std::move(templates)},
            {"epsilon", vocab.coverage_radius},
            {"w_h", vocab.heading_weight},
            {"token_period", vocab.token_period},
            {"seed", vocab.seed},
            {"requested_size", vocab.requested_size},
            {"epsilon_doublings", vocab.epsilon_doublings}};
}

TokenVocab vocab_from_json(const nlohmann::json& j) {
    TokenVocab v;
    for (const auto& t : j.at("templates")) v.templates.push_back({t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()});
    v.coverage_radius = j.at("epsilon").get<double>();
    v.heading_weight = j.at("w_h").get<double>();
    v.token_period = j.at("token_period").get<double>();
    v.seed = j.value("seed", std::uint64_t{0});
    v.requested_size = j.value("requested_size", v.size());
    v.epsilon_doublings = j.value("epsilon_doublings", 0);
    if (v.templates.empty()) throw Error("bad-vocab", "no templates");
    return v;
}

MotionDelta relative_delta(const AgentState& from, const AgentState& to) {
    const double c = std::cos(from.heading);
    const double s = std::sin(from.heading);
    const double wx = to.x - from.x;
    const double wy = to.y - from.y;
    return {c * wx + s * wy, -s * wx + c * wy, wrap_angle(to.heading - from.heading)};
}

AgentState apply_delta(const AgentState& from, const MotionDelta& delta) {
    const double c = std::cos(from.heading);
    const double s = std::sin(from.heading);
    return {from.x + c * delta.dx - s * delta.dy, from.y + s * delta.dx + c * delta.dy, from.z,
            wrap_angle(from.heading + delta.dheading), true};
}

std::vector<std::optional<MotionDelta>> track_deltas(const AgentTrack& track, int period_frames) {
    std::vector<std::optional<MotionDelta>> out;
    const int n = static_cast<int>(track.states.size());
    for (int a = 0; a + period_frames < n; a += period_frames) {
        bool ok = true;
        for (int f = a; f <= a + period_frames && ok; ++f) ok = track.states[f].valid;
        out.push_back(ok ? std::optional(relative_delta(track.states[a], track.states[a + period_frames])) : std::nullopt);
    }
    return out;
}

std::vector<MotionDelta> extract_deltas(std::span<const Scenario> scenarios, double token_period) {
    const int p = token_period_frames(token_period);
    std::vector<MotionDelta> out;
    for (const auto& sc : scenarios)
        for (const auto& t : sc.tracks)
            for (const auto& d : track_deltas(t, p))
                if (d) out.push_back(*d);
    return out;
}

TokenVocab build_vocab(std::span<const MotionDelta> deltas, int size, double epsilon, std::uint64_t seed,
                       double heading_weight, double token_period) {
    if (deltas.empty()) throw Error("no-deltas");
    if (size < 1 || !(epsilon > 0.0) || heading_weight < 0.0) throw Error("bad-argument", "vocab size/epsilon");
    token_period_frames(token_period);

    std::vector<std::size_t> order(deltas.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(SeedBuilder(seed).add("vocab").seed());
    rng.shuffle(order.begin(), order.end());

    TokenVocab vocab;
    vocab.heading_weight = heading_weight;
    vocab.token_period = token_period;
    vocab.seed = seed;
    vocab.requested_size = size;

    std::vector<std::size_t> chosen;
    for (;;) {
        chosen.clear();
        bool overflow = false;
        for (const auto idx : order) {
            const auto& d = deltas[idx];
            const bool covered = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
                return delta_distance(d, deltas[c], heading_weight) <= epsilon;
            });
            if (covered) continue;
            if (static_cast<int>(chosen.size()) == size) {
                overflow = true;
                break;
            }
            chosen.push_back(idx);
        }
        if (!overflow) break;
        epsilon *= 2.0;
        ++vocab.epsilon_doublings;
    }

    // Farthest-point top-up over the remaining slots.
    std::vector<double> nearest(deltas.size(), std::numeric_limits<double>::infinity());
    auto absorb = [&](std::size_t c) {
        for (std::size_t i = 0; i < deltas.size(); ++i)
            nearest[i] = std::min(nearest[i], delta_distance(deltas[i], deltas[c], heading_weight));
    };
    if (static_cast<int>(chosen.size()) < size) {
        for (const auto c : chosen) absorb(c);
        while (static_cast<int>(chosen.size()) < size) {
            std::size_t best = order.front();
            for (const auto idx : order)
                if (nearest[idx] > nearest[best]) best = idx;
            if (!(nearest[best] > 0.0)) break;
            chosen.push_back(best);
            absorb(best);
        }
    }

    vocab.coverage_radius = epsilon;
    for (const auto c : chosen) vocab.templates.push_back(deltas[c]);
    return vocab;
}

Token encode_delta(const MotionDelta& delta, const TokenVocab& vocab) {
    Token best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Token i = 0; i < vocab.size(); ++i) {
        const double d = delta_distance(delta, vocab.templates[static_cast<std::size_t>(i)], vocab.heading_weight);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<std::optional<Token>> encode(const AgentTrack& track, const TokenVocab& vocab) {
    std::vector<std::optional<Token>> out;
    for (const auto& d : track_deltas(track, vocab.period_frames()))
        out.push_back(d ? std::optional(encode_delta(*d, vocab)) : std::nullopt);
    return out;
}

std::vector<AgentState> decode(const AgentState& start, std::span<const Token> tokens, const TokenVocab& vocab) {
    const int p = vocab.period_frames();
    std::vector<AgentState> out;
    out.reserve(1 + tokens.size() * static_cast<std::size_t>(p));
    out.push_back(start);
    AgentState cur = start;
    for (const Token tok : tokens) {
        if (tok < 0 || tok >= vocab.size()) throw Error("bad-token", std::to_string(tok));
        const auto& delta = vocab.templates[static_cast<std::size_t>(tok)];
        const AgentState next = apply_delta(cur, delta);
        for (int j = 1; j < p; ++j) {
            const double w = static_cast<double>(j) / p;
            out.push_back({cur.x + w * (next.x - cur.x), cur.y + w * (next.y - cur.y), cur.z,
                           wrap_angle(cur.heading + w * delta.dheading), true});
        }
        out.push_back(next);
        cur = next;
    }
    return out;
}

}  // namespace noisesim
