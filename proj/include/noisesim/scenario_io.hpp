#pragma once

#include "noisesim/core_model.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace noisesim {

inline constexpr int kSchemaVersion = 1;

struct ManifestEntry {
    std::string scenario_id;
    std::string file;  // relative to corpus root
    SplitTag split = SplitTag::train;
    Provenance provenance = Provenance::clean;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
    int schema_version = kSchemaVersion;
    std::vector<std::string> map_files;
    std::vector<ManifestEntry> scenarios;
    std::map<std::string, std::size_t> counts;  // keys: train, val, test

    friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RoadMap& map);
RoadMap road_map_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& j);

/// Reads a whole file; `.gz` files are transparently decompressed.
std::string read_text_file(const std::filesystem::path& path);
/// Writes a whole file; `.gz` files are gzip-compressed (fixed header, no timestamp).
void write_text_file(const std::filesystem::path& path, const std::string& contents);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

struct WriteOptions {
    bool gzip = false;
};

/// Validates everything first; on any violation nothing is written.
CorpusManifest write_corpus(const std::vector<Scenario>& scenarios, const std::vector<RoadMap>& maps,
                            const std::filesystem::path& directory, WriteOptions options = {});

struct CorpusItem {
    Scenario scenario;
    std::shared_ptr<const RoadMap> map;
};

/// Streams scenarios in manifest order. Maps are loaded once and shared.
class CorpusReader {
public:
    explicit CorpusReader(std::filesystem::path directory, std::optional<SplitTag> split_filter = std::nullopt);

    const CorpusManifest& manifest() const { return manifest_; }
    /// Next matching scenario, or nullopt when exhausted.
    std::optional<CorpusItem> next();
    /// Entries that pass the filter, in manifest order.
    std::vector<ManifestEntry> selected() const;
    std::shared_ptr<const RoadMap> map(const std::string& map_id);

private:
    std::filesystem::path root_;
    std::optional<SplitTag> filter_;
    CorpusManifest manifest_;
    std::size_t cursor_ = 0;
    std::map<std::string, std::shared_ptr<const RoadMap>> maps_;
};

std::vector<CorpusItem> read_corpus(const std::filesystem::path& directory,
                                    std::optional<SplitTag> split_filter = std::nullopt);

/// Deterministic shuffled assignment; split sizes by largest remainder.
std::map<std::string, SplitTag> assign_splits(const std::vector<std::string>& scenario_ids,
                                              std::array<double, 3> ratios = {0.8, 0.1, 0.1},
                                              std::uint64_t seed = 0);

}  // namespace noisesim
