#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mfish/core/parallel.hpp"
#include "mfish/data/raster_io.hpp"
#include "mfish/data/sample.hpp"

namespace mfish::data {

/// Low-quality Vysis images removed before evaluation (ill-hybridisation,
/// wrong exposure, channel cross talk or misalignment, wrong probe label).
inline const std::vector<std::string>& default_exclusions()
{
    static const std::vector<std::string> ids{"V250253", "V260754", "V260856", "V290162", "V290362",
                                              "V270259", "V280162", "V290962", "V291562", "V1701XY",
                                              "V1702XY", "V1703XY", "V1402XX", "V190442"};
    return ids;
}

struct ManifestEntry {
    std::string id;
    std::array<std::filesystem::path, kNumChannels> channels; ///< empty path = not listed
    std::filesystem::path labels;
    ProbeSet probe_set = ProbeSet::vysis;
};

/// JSON manifest:
///   {"exclude": [ids], "expected_count": n,
///    "samples": [{"id": ..., "channels": {"aqua": path, ...}, "labels": path, "probe_set": "vysis"}]}
/// Relative paths resolve against the manifest's directory. A missing "exclude"
/// key means the default exclusion list.
struct DatasetManifest {
    std::vector<ManifestEntry> samples;
    std::vector<std::string> exclusion_list = default_exclusions();
    std::optional<std::size_t> expected_count; ///< curated size to assert, if given

    static DatasetManifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
    {
        DatasetManifest m;
        if (j.contains("exclude"))
            m.exclusion_list = j.at("exclude").get<std::vector<std::string>>();
        if (j.contains("expected_count"))
            m.expected_count = j.at("expected_count").get<std::size_t>();
        auto resolve = [&](const std::string& p) {
            std::filesystem::path path(p);
            return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
        };
        for (const auto& s : j.at("samples")) {
            ManifestEntry e;
            e.id = s.at("id").get<std::string>();
            const auto& ch = s.at("channels");
            for (int c = 0; c < kNumChannels; ++c) {
                const std::string key(kChannelNames[c]);
                if (ch.contains(key))
                    e.channels[c] = resolve(ch.at(key).get<std::string>());
            }
            if (s.contains("labels"))
                e.labels = resolve(s.at("labels").get<std::string>());
            if (s.contains("probe_set"))
                e.probe_set = probe_set_from_string(s.at("probe_set").get<std::string>());
            m.samples.push_back(std::move(e));
        }
        return m;
    }

    static DatasetManifest load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in)
            throw IoError("cannot open manifest: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
            return from_json(j, path.parent_path());
        } catch (const nlohmann::json::exception& e) {
            throw IoError("malformed manifest " + path.string() + ": " + e.what());
        }
    }

    nlohmann::json to_json() const
    {
        nlohmann::json samples_json = nlohmann::json::array();
        for (const auto& e : samples) {
            nlohmann::json ch = nlohmann::json::object();
            for (int c = 0; c < kNumChannels; ++c)
                if (!e.channels[c].empty())
                    ch[std::string(kChannelNames[c])] = e.channels[c].generic_string();
            samples_json.push_back({{"id", e.id},
                                    {"channels", ch},
                                    {"labels", e.labels.generic_string()},
                                    {"probe_set", std::string(to_string(e.probe_set))}});
        }
        nlohmann::json j{{"exclude", exclusion_list}, {"samples", samples_json}};
        if (expected_count)
            j["expected_count"] = *expected_count;
        return j;
    }

    void save(const std::filesystem::path& path) const
    {
        if (path.has_parent_path())
            std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out)
            throw IoError("cannot write manifest: " + path.string());
        out << to_json().dump(2) << '\n';
    }
};

/// Reads all seven rasters of one entry and validates the result.
inline MfishSample load_sample(const ManifestEntry& entry, const LabelCoding& coding)
{
    MfishSample s;
    s.id = entry.id;
    s.probe_set = entry.probe_set;
    for (int c = 0; c < kNumChannels; ++c)
        if (entry.channels[c].empty())
            throw IoError(entry.id + ": missing file for channel '" + std::string(kChannelNames[c]) + "'");
    if (entry.labels.empty())
        throw IoError(entry.id + ": missing label file");
    s.labels = read_labels(entry.labels);
    for (int c = 0; c < kNumChannels; ++c) {
        s.channels[c] = read_intensity(entry.channels[c]);
        if (!s.channels[c].same_size(s.labels))
            throw ValidationError(entry.id + ": channel '" + std::string(kChannelNames[c]) + "' is " +
                                  std::to_string(s.channels[c].width) + "x" + std::to_string(s.channels[c].height) +
                                  ", labels are " + std::to_string(s.labels.width) + "x" +
                                  std::to_string(s.labels.height));
    }
    s.validate(coding);
    return s;
}

/// Entries that survive curation: Vysis only, not excluded, sorted by id.
inline std::vector<ManifestEntry> curated_entries(const DatasetManifest& manifest)
{
    const std::set<std::string> excluded(manifest.exclusion_list.begin(), manifest.exclusion_list.end());
    std::vector<ManifestEntry> kept;
    for (const auto& e : manifest.samples) {
        if (excluded.count(e.id))
            continue;
        if (e.probe_set != ProbeSet::vysis) {
            spdlog::warn("skipping {}: only Vysis samples are processed", e.id);
            continue;
        }
        kept.push_back(e);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return kept;
}

/// Loads the curated subset of `manifest`.
inline std::vector<MfishSample> curate(const DatasetManifest& manifest, const LabelCoding& coding, int workers = 1)
{
    const auto entries = curated_entries(manifest);
    if (manifest.expected_count && entries.size() != *manifest.expected_count)
        throw ValidationError("curated set has " + std::to_string(entries.size()) + " samples, manifest expects " +
                              std::to_string(*manifest.expected_count));
    std::vector<MfishSample> out(entries.size());
    parallel_for(entries.size(), workers, [&](std::size_t i) { out[i] = load_sample(entries[i], coding); });
    return out;
}

} // namespace mfish::data
