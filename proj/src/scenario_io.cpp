#include "noisesim/scenario_io.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace noisesim {

namespace {

bool is_gzip(const fs::path& p) { return p.extension() == ".gz"; }

std::string describe(const ValidationReport& report) {
    std::ostringstream os;
    for (std::size_t i = 0; i < report.size() && i < 5; ++i) {
        const auto& v = report[i];
        os << (i ? "; " : "") << v.code;
        if (v.agent_id) os << " agent=" << *v.agent_id;
        if (v.frame) os << " frame=" << *v.frame;
    }
    if (report.size() > 5) os << "; ...";
    return os.str();
}

}  // namespace

json to_json(const Scenario& scenario) {
    json tracks = json::array();
    for (const auto& t : scenario.tracks) {
        json states = json::array();
        for (const auto& s : t.states) states.push_back(json::array({s.x, s.y, s.z, s.heading, s.valid}));
        tracks.push_back({{"agent_id", t.agent_id}, {"length", t.length}, {"width", t.width}, {"states", std::move(states)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"scenario_id", scenario.scenario_id},
            {"map_id", scenario.map_id},
            {"split", to_string(scenario.split)},
            {"provenance", to_string(scenario.provenance)},
            {"tracks", std::move(tracks)}};
}

Scenario scenario_from_json(const json& j) {
    if (j.value("schema_version", -1) != kSchemaVersion) throw Error("unsupported-schema");
    Scenario s;
    s.scenario_id = j.at("scenario_id").get<std::string>();
    s.map_id = j.at("map_id").get<std::string>();
    s.split = parse_split(j.at("split").get<std::string>());
    s.provenance = parse_provenance(j.at("provenance").get<std::string>());
    for (const auto& jt : j.at("tracks")) {
        AgentTrack t;
        t.agent_id = jt.at("agent_id").get<std::int64_t>();
        t.length = jt.at("length").get<double>();
        t.width = jt.at("width").get<double>();
        for (const auto& js : jt.at("states")) {
            if (!js.is_array() || js.size() != 5) throw Error("corrupt-corpus", "state must be [x,y,z,heading,valid]");
            t.states.push_back({js[0].get<double>(), js[1].get<double>(), js[2].get<double>(), js[3].get<double>(),
                                js[4].get<bool>()});
        }
        s.tracks.push_back(std::move(t));
    }
    return s;
}

json to_json(const RoadMap& map) {
    json polylines = json::array();
    for (const auto& p : map.polylines) {
        json pts = json::array();
        for (const auto& q : p.points) pts.push_back(json::array({q.x(), q.y(), q.z()}));
        polylines.push_back({{"kind", to_string(p.kind)}, {"points", std::move(pts)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"map_id", map.map_id},
            {"nominal_lane_width", map.nominal_lane_width},
            {"polylines", std::move(polylines)}};
}

RoadMap road_map_from_json(const json& j) {
    if (j.value("schema_version", -1) != kSchemaVersion) throw Error("unsupported-schema");
    RoadMap m;
    m.map_id = j.at("map_id").get<std::string>();
    m.nominal_lane_width = j.at("nominal_lane_width").get<double>();
    for (const auto& jp : j.at("polylines")) {
        Polyline p;
        p.kind = parse_polyline_kind(jp.at("kind").get<std::string>());
        for (const auto& q : jp.at("points")) p.points.emplace_back(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>());
        m.polylines.push_back(std::move(p));
    }
    return m;
}

json to_json(const CorpusManifest& manifest) {
    json entries = json::array();
    for (const auto& e : manifest.scenarios)
        entries.push_back({{"scenario_id", e.scenario_id},
                           {"file", e.file},
                           {"split", to_string(e.split)},
                           {"provenance", to_string(e.provenance)}});
    return {{"schema_version", manifest.schema_version},
            {"maps", manifest.map_files},
            {"scenarios", std::move(entries)},
            {"counts", manifest.counts}};
}

CorpusManifest manifest_from_json(const json& j) {
    CorpusManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) throw Error("unsupported-schema", std::to_string(m.schema_version));
    m.map_files = j.at("maps").get<std::vector<std::string>>();
    for (const auto& e : j.at("scenarios"))
        m.scenarios.push_back({e.at("scenario_id").get<std::string>(), e.at("file").get<std::string>(),
                               parse_split(e.at("split").get<std::string>()),
                               parse_provenance(e.at("provenance").get<std::string>())});
    m.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
    return m;
}

std::string read_text_file(const fs::path& path) {
    if (!fs::exists(path)) throw Error("io", "missing file " + path.string());
    if (is_gzip(path)) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f) throw Error("io", "cannot open " + path.string());
        std::string out;
        char buf[1 << 16];
        int n;
        while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
        const bool failed = n < 0;
        gzclose(f);
        if (failed) throw Error("io", "gzip read failed " + path.string());
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const fs::path& path, const std::string& contents) {
    if (is_gzip(path)) {
        gzFile f = gzopen(path.c_str(), "wb9");
        if (!f) throw Error("io", "cannot write " + path.string());
        const int n = contents.empty() ? 0 : gzwrite(f, contents.data(), static_cast<unsigned>(contents.size()));
        const int rc = gzclose(f);
        if ((!contents.empty() && n <= 0) || rc != Z_OK) throw Error("io", "gzip write failed " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path.string());
    out << contents;
    if (!out) throw Error("io", "write failed " + path.string());
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("corrupt-corpus", path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump() + "\n"); }

CorpusManifest write_corpus(const std::vector<Scenario>& scenarios, const std::vector<RoadMap>& maps,
                            const fs::path& directory, WriteOptions options) {
    std::map<std::string, const RoadMap*> by_id;
    for (const auto& m : maps) by_id[m.map_id] = &m;

    std::set<std::string> ids;
    for (const auto& s : scenarios) {
        if (!ids.insert(s.scenario_id).second) throw Error("validation-failed", "duplicate scenario_id " + s.scenario_id);
        const auto it = by_id.find(s.map_id);
        if (it == by_id.end()) throw Error("validation-failed", s.scenario_id + ": unknown map " + s.map_id);
        if (const auto report = validate_scenario(s, *it->second); !report.empty())
            throw Error("validation-failed", s.scenario_id + ": " + describe(report));
    }

    std::error_code ec;
    fs::create_directories(directory / "maps", ec);
    if (!ec) fs::create_directories(directory / "scenarios", ec);
    if (ec) throw Error("io", directory.string() + ": " + ec.message());

    CorpusManifest manifest;
    manifest.counts = {{"train", 0}, {"val", 0}, {"test", 0}};
    for (const auto& [id, m] : by_id) {
        const std::string rel = "maps/" + id + ".json";
        write_json_file(directory / rel, to_json(*m));
        manifest.map_files.push_back(rel);
    }
    for (const auto& s : scenarios) {
        const std::string rel = "scenarios/" + s.scenario_id + (options.gzip ? ".json.gz" : ".json");
        write_json_file(directory / rel, to_json(s));
        manifest.scenarios.push_back({s.scenario_id, rel, s.split, s.provenance});
        ++manifest.counts[std::string(to_string(s.split))];
    }
    write_json_file(directory / "manifest.json", to_json(manifest));
    return manifest;
}

CorpusReader::CorpusReader(fs::path directory, std::optional<SplitTag> split_filter)
    : root_(std::move(directory)), filter_(split_filter) {
    const auto mpath = root_ / "manifest.json";
    if (!fs::exists(mpath)) throw Error("corrupt-corpus", "missing " + mpath.string());
    manifest_ = manifest_from_json(read_json_file(mpath));
}

std::shared_ptr<const RoadMap> CorpusReader::map(const std::string& map_id) {
    if (auto it = maps_.find(map_id); it != maps_.end()) return it->second;
    const auto path = root_ / "maps" / (map_id + ".json");
    if (!fs::exists(path)) throw Error("corrupt-corpus", "missing map " + map_id);
    auto m = std::make_shared<const RoadMap>(road_map_from_json(read_json_file(path)));
    maps_.emplace(map_id, m);
    return m;
}

std::vector<ManifestEntry> CorpusReader::selected() const {
    std::vector<ManifestEntry> out;
    for (const auto& e : manifest_.scenarios)
        if (!filter_ || e.split == *filter_) out.push_back(e);
    return out;
}

std::optional<CorpusItem> CorpusReader::next() {
    while (cursor_ < manifest_.scenarios.size()) {
        const auto& e = manifest_.scenarios[cursor_++];
        if (filter_ && e.split != *filter_) continue;
        const auto path = root_ / e.file;
        if (!fs::exists(path)) throw Error("corrupt-corpus", "missing scenario file " + e.file);
        Scenario s = scenario_from_json(read_json_file(path));
        auto m = map(s.map_id);
        return CorpusItem{std::move(s), std::move(m)};
    }
    return std::nullopt;
}

std::vector<CorpusItem> read_corpus(const fs::path& directory, std::optional<SplitTag> split_filter) {
    CorpusReader reader(directory, split_filter);
    std::vector<CorpusItem> out;
    while (auto item = reader.next()) out.push_back(std::move(*item));
    return out;
}

std::map<std::string, SplitTag> assign_splits(const std::vector<std::string>& scenario_ids, std::array<double, 3> ratios,
                                              std::uint64_t seed) {
    if (scenario_ids.empty()) throw Error("empty-corpus");
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9 || *std::min_element(ratios.begin(), ratios.end()) < 0.0)
        throw Error("bad-ratios");

    const std::size_t n = scenario_ids.size();
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = ratios[k] * static_cast<double>(n);
        sizes[k] = static_cast<std::size_t>(std::floor(exact));
        remainder[k] = exact - std::floor(exact);
        assigned += sizes[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (int k = 0; assigned < n; k = (k + 1) % 3) {
        if (ratios[order[k]] > 0.0) {
            ++sizes[order[k]];
            ++assigned;
        }
    }

    // Sort first so the result does not depend on input order.
    std::vector<std::string> ids = scenario_ids;
    std::sort(ids.begin(), ids.end());
    Rng rng(SeedBuilder(seed).add("assign_splits").seed());
    rng.shuffle(ids.begin(), ids.end());

    std::map<std::string, SplitTag> out;
    std::size_t i = 0;
    constexpr std::array<SplitTag, 3> tags{SplitTag::train, SplitTag::val, SplitTag::test};
    for (int k = 0; k < 3; ++k)
        for (std::size_t c = 0; c < sizes[k]; ++c, ++i) out[ids[i]] = tags[k];
    return out;
}

}  // namespace noisesim
