#pragma once

#include "texrect/rectify.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace texrect {

inline constexpr const char* kVersion = "0.1.0";

enum class RunMode { nonstationary, patch_shuffle, latent_shuffle, guided, image_edit };

inline std::string mode_name(RunMode m) {
    switch (m) {
        case RunMode::nonstationary: return "nonstationary";
        case RunMode::patch_shuffle: return "patch-shuffle";
        case RunMode::latent_shuffle: return "latent-shuffle";
        case RunMode::guided: return "guided";
        case RunMode::image_edit: return "image-edit";
    }
    return "?";
}

inline RunMode parse_mode(const std::string& name) {
    if (name == "nonstationary") return RunMode::nonstationary;
    if (name == "patch-shuffle") return RunMode::patch_shuffle;
    if (name == "latent-shuffle") return RunMode::latent_shuffle;
    if (name == "guided") return RunMode::guided;
    if (name == "image-edit") return RunMode::image_edit;
    fail("unknown mode '" + name +
         "' (expected nonstationary, patch-shuffle, latent-shuffle, guided, image-edit)");
}

// Everything one batch run needs: mode, inputs, configuration, outputs.
struct RunManifest {
    RunMode mode = RunMode::nonstationary;
    std::string reference_path;
    std::string target_path;
    std::string mask_path;
    std::string out_dir = "out";
    bool save_intermediates = false;
    RectifyConfig cfg;
    int shuffle_block = 64;       // image-space patch shuffle, pixels
    int latent_block = 8;         // latent-space shuffle, cells
    float noise_amplitude = kDefaultGuidedNoiseAmplitude;
    std::string backend_kind = "stub";  // stub | remote
    std::string endpoint;               // remote URL; falls back to $TEXRECT_ENDPOINT
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s, const std::string& field) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        try {
            out.push_back(std::stoi(item));
        } catch (...) {
            fail(field + ": cannot parse integer '" + item + "'");
        }
    }
    require(!out.empty(), field + ": empty list");
    return out;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

inline int parse_int(const std::string& s, const std::string& field) {
    try {
        return std::stoi(s);
    } catch (...) {
        fail(field + ": cannot parse integer '" + s + "'");
    }
}

inline float parse_float(const std::string& s, const std::string& field) {
    try {
        return std::stof(s);
    } catch (...) {
        fail(field + ": cannot parse number '" + s + "'");
    }
}

}  // namespace detail

// One configuration knob per key; shared by the flat config file, the CLI
// overrides and the run record, so a saved record replays through the same
// code path.
inline void apply_config_key(RunManifest& m, const std::string& key, const std::string& value) {
    using detail::parse_float;
    using detail::parse_int;
    using detail::parse_int_list;
    if (key == "mode") {
        m.mode = parse_mode(value);
    } else if (key == "reference") {
        m.reference_path = value;
    } else if (key == "target") {
        m.target_path = value;
    } else if (key == "mask") {
        m.mask_path = value;
    } else if (key == "out") {
        m.out_dir = value;
    } else if (key == "save_intermediates") {
        m.save_intermediates = value == "1" || value == "true";
    } else if (key == "steps") {
        m.cfg.steps = parse_int(value, key);
    } else if (key == "p1") {
        m.cfg.p1 = parse_int(value, key);
    } else if (key == "p2") {
        m.cfg.p2 = parse_int(value, key);
    } else if (key == "s1") {
        m.cfg.s1 = parse_int(value, key);
    } else if (key == "s2") {
        m.cfg.s2 = parse_int(value, key);
    } else if (key == "sites") {
        m.cfg.sites = parse_int_list(value, key);
    } else if (key == "aug") {
        m.cfg.augmentations.transforms.clear();
        if (!value.empty() && value != "none") {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) {
                    m.cfg.augmentations.transforms.push_back(parse_transform(item));
                }
            }
        }
    } else if (key == "seed") {
        m.cfg.seed = static_cast<uint64_t>(std::stoull(value));
    } else if (key == "ir_eval") {
        m.cfg.ir_eval = parse_ir_eval(value);
    } else if (key == "offset") {
        if (value.empty() || value == "none") {
            m.cfg.injection_offset.reset();
        } else {
            m.cfg.injection_offset = parse_int(value, key);
        }
    } else if (key == "shuffle_block") {
        m.shuffle_block = parse_int(value, key);
    } else if (key == "latent_block") {
        m.latent_block = parse_int(value, key);
    } else if (key == "noise_amplitude") {
        m.noise_amplitude = parse_float(value, key);
    } else if (key == "backend") {
        m.backend_kind = value;
    } else if (key == "endpoint") {
        m.endpoint = value;
    } else if (key == "spill_dir") {
        m.cfg.cache.spill_dir = value;
    } else if (key == "cache_budget_mb") {
        m.cfg.cache.resident_budget_bytes =
            static_cast<size_t>(parse_int(value, key)) * 1024 * 1024;
    } else {
        fail("unknown config key '" + key + "'");
    }
}

inline std::map<std::string, std::string> config_map(const RunManifest& m) {
    std::map<std::string, std::string> out;
    out["mode"] = mode_name(m.mode);
    out["reference"] = m.reference_path;
    out["target"] = m.target_path;
    out["mask"] = m.mask_path;
    out["out"] = m.out_dir;
    out["save_intermediates"] = m.save_intermediates ? "1" : "0";
    out["steps"] = std::to_string(m.cfg.steps);
    out["p1"] = std::to_string(m.cfg.p1);
    out["p2"] = std::to_string(m.cfg.p2);
    out["s1"] = std::to_string(m.cfg.s1);
    out["s2"] = std::to_string(m.cfg.s2);
    out["sites"] = detail::join_ints(m.cfg.sites);
    std::string augs;
    for (size_t i = 0; i < m.cfg.augmentations.transforms.size(); ++i) {
        if (i) augs += ",";
        augs += transform_name(m.cfg.augmentations.transforms[i]);
    }
    out["aug"] = augs;
    out["seed"] = std::to_string(m.cfg.seed);
    out["ir_eval"] = ir_eval_name(m.cfg.ir_eval);
    out["offset"] =
        m.cfg.injection_offset ? std::to_string(*m.cfg.injection_offset) : std::string("none");
    out["shuffle_block"] = std::to_string(m.shuffle_block);
    out["latent_block"] = std::to_string(m.latent_block);
    out["noise_amplitude"] = std::to_string(m.noise_amplitude);
    out["backend"] = m.backend_kind;
    out["endpoint"] = m.endpoint;
    if (!m.cfg.cache.spill_dir.empty()) {
        out["spill_dir"] = m.cfg.cache.spill_dir;
    }
    if (m.cfg.cache.resident_budget_bytes != SIZE_MAX) {
        out["cache_budget_mb"] =
            std::to_string(m.cfg.cache.resident_budget_bytes / (1024 * 1024));
    }
    return out;
}

// Accepts either the flat key=value config format or a previously written
// run record (JSON with a "config" object).
inline void load_config_file(RunManifest& m, const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j = nlohmann::json::parse(text);
        for (const auto& [key, value] : j.at("config").items()) {
            apply_config_key(m, key, value.get<std::string>());
        }
        return;
    }
    std::stringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        size_t begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) {
            continue;
        }
        size_t eq = line.find('=');
        require(eq != std::string::npos, "config '" + path + "' line " + std::to_string(lineno) +
                                             ": expected key = value");
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_key(m, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

// Front-door validation: field bounds and mode-specific inputs, before any
// backend work starts. Site indices are checked later against the backend.
inline void validate_manifest(const RunManifest& m) {
    require(m.cfg.steps >= 1, "steps out of range: " + std::to_string(m.cfg.steps));
    auto check_bound = [&](int v, const std::string& field) {
        require(v >= 0 && v <= m.cfg.steps, field + " out of range: " + std::to_string(v) +
                                                " (steps=" + std::to_string(m.cfg.steps) + ")");
    };
    check_bound(m.cfg.p1, "p1");
    check_bound(m.cfg.p2, "p2");
    check_bound(m.cfg.s1, "s1");
    check_bound(m.cfg.s2, "s2");
    require(!m.reference_path.empty(), "reference image is required");
    require(std::filesystem::exists(m.reference_path),
            "reference: no such file '" + m.reference_path + "'");

    auto need_target = [&](const std::string& why) {
        require(!m.target_path.empty(), "target image is required for " + why);
        require(std::filesystem::exists(m.target_path),
                "target: no such file '" + m.target_path + "'");
    };
    switch (m.mode) {
        case RunMode::nonstationary:
        case RunMode::image_edit:
            need_target(mode_name(m.mode) + " mode");
            require(!m.mask_path.empty(),
                    "mask (placement) is required for " + mode_name(m.mode) + " mode");
            require(std::filesystem::exists(m.mask_path),
                    "mask: no such file '" + m.mask_path + "'");
            break;
        case RunMode::guided:
            need_target("guided mode (the target is the color layout)");
            require(m.noise_amplitude >= 0.0f, "noise_amplitude out of range");
            break;
        case RunMode::patch_shuffle:
            require(m.shuffle_block > 0, "shuffle_block out of range");
            require(m.target_path.empty(),
                    "target is synthesized in patch-shuffle mode; drop --target");
            break;
        case RunMode::latent_shuffle:
            require(m.latent_block > 0, "latent_block out of range");
            require(m.target_path.empty(),
                    "target is synthesized in latent-shuffle mode; drop --target");
            break;
    }
    require(m.backend_kind == "stub" || m.backend_kind == "remote",
            "backend must be 'stub' or 'remote', got '" + m.backend_kind + "'");
}

}  // namespace texrect
