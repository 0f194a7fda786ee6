#pragma once

#include "texrect/attention.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace texrect {

struct CacheOptions {
    std::string spill_dir;                 // empty = spill into a temp dir when needed
    size_t resident_budget_bytes = SIZE_MAX;  // entries beyond this go to disk
};

// Immutable store of recorded key/value features indexed by (site, step).
// Write-once: inserts are rejected after freeze() and duplicate keys are
// rejected always. Entries past the resident budget are spilled to disk and
// reloaded on demand.
class KVCache {
public:
    explicit KVCache(std::string pass_label, CacheOptions opts = {})
        : pass_label_(std::move(pass_label)), opts_(opts) {}

    const std::string& pass_label() const { return pass_label_; }
    size_t size() const { return entries_.size(); }
    bool frozen() const { return frozen_; }

    void insert(int site, int step, KVRecord kv) {
        require(!frozen_, "kv cache '" + pass_label_ + "': insert after recording pass completed");
        check_kv(kv, "kv cache '" + pass_label_ + "' (site " + std::to_string(site) + ", t " +
                         std::to_string(step) + ")");
        auto key = std::make_pair(site, step);
        require(entries_.find(key) == entries_.end(),
                "kv cache '" + pass_label_ + "': duplicate entry for site " +
                    std::to_string(site) + ", t " + std::to_string(step));
        auto wit = site_width_.find(site);
        if (wit == site_width_.end()) {
            site_width_[site] = kv.keys.cols;
        } else {
            require(wit->second == kv.keys.cols,
                    "kv cache '" + pass_label_ + "': inconsistent width at site " +
                        std::to_string(site));
        }

        Entry e;
        e.rows = kv.keys.rows;
        e.width = kv.keys.cols;
        e.heads = kv.heads;
        size_t sz = kv.bytes();
        if (resident_bytes_ + sz > opts_.resident_budget_bytes) {
            spill(site, step, kv, e);
        } else {
            e.resident = std::move(kv);
            resident_bytes_ += sz;
        }
        entries_.emplace(key, std::move(e));
    }

    void freeze() { frozen_ = true; }

    bool contains(int site, int step) const {
        return entries_.find(std::make_pair(site, step)) != entries_.end();
    }

    KVRecord get(int site, int step) const {
        auto it = entries_.find(std::make_pair(site, step));
        require(it != entries_.end(), "kv cache miss: pass '" + pass_label_ + "', site " +
                                          std::to_string(site) + ", t " + std::to_string(step));
        const Entry& e = it->second;
        if (e.resident) {
            return *e.resident;
        }
        return load_blob(e);
    }

    // Persist as one binary blob pair per entry plus a manifest. Internal
    // contract, versioned.
    void save(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        nlohmann::json manifest;
        manifest["version"] = 1;
        manifest["pass_label"] = pass_label_;
        manifest["entries"] = nlohmann::json::array();
        for (const auto& [key, e] : entries_) {
            KVRecord kv = get(key.first, key.second);
            std::string stem = "s" + std::to_string(key.first) + "_t" + std::to_string(key.second);
            write_f32(dir + "/" + stem + "_k.f32", kv.keys.data);
            write_f32(dir + "/" + stem + "_v.f32", kv.values.data);
            manifest["entries"].push_back({{"site", key.first},
                                           {"t", key.second},
                                           {"rows", e.rows},
                                           {"width", e.width},
                                           {"heads", e.heads},
                                           {"k", stem + "_k.f32"},
                                           {"v", stem + "_v.f32"}});
        }
        std::ofstream out(dir + "/manifest.json");
        require(out.good(), "kv cache save: cannot write manifest in " + dir);
        out << manifest.dump(2) << "\n";
    }

    static KVCache load(const std::string& dir, CacheOptions opts = {}) {
        std::ifstream in(dir + "/manifest.json");
        require(in.good(), "kv cache load: missing manifest in " + dir);
        nlohmann::json manifest = nlohmann::json::parse(in);
        require(manifest.at("version").get<int>() == 1,
                "kv cache load: unsupported manifest version in " + dir);
        KVCache cache(manifest.at("pass_label").get<std::string>(), opts);
        for (const auto& je : manifest.at("entries")) {
            int rows = je.at("rows").get<int>();
            int width = je.at("width").get<int>();
            KVRecord kv;
            kv.heads = je.at("heads").get<int>();
            kv.keys = FeatureMatrix(rows, width);
            kv.values = FeatureMatrix(rows, width);
            read_f32(dir + "/" + je.at("k").get<std::string>(), kv.keys.data);
            read_f32(dir + "/" + je.at("v").get<std::string>(), kv.values.data);
            cache.insert(je.at("site").get<int>(), je.at("t").get<int>(), std::move(kv));
        }
        cache.freeze();
        return cache;
    }

private:
    struct Entry {
        int rows = 0;
        int width = 0;
        int heads = 0;
        std::optional<KVRecord> resident;
        std::string k_path;
        std::string v_path;
    };

    void spill(int site, int step, const KVRecord& kv, Entry& e) {
        namespace fs = std::filesystem;
        if (spill_root_.empty()) {
            spill_root_ = opts_.spill_dir.empty()
                              ? (fs::temp_directory_path() /
                                 ("texrect-kv-" + pass_label_ + "-" +
                                  std::to_string(reinterpret_cast<uintptr_t>(this))))
                                    .string()
                              : opts_.spill_dir;
            fs::create_directories(spill_root_);
            std::cerr << "kv cache '" << pass_label_
                      << "': resident budget exceeded, offloading entries to " << spill_root_
                      << "\n";
        }
        std::string stem =
            spill_root_ + "/s" + std::to_string(site) + "_t" + std::to_string(step);
        e.k_path = stem + "_k.f32";
        e.v_path = stem + "_v.f32";
        write_f32(e.k_path, kv.keys.data);
        write_f32(e.v_path, kv.values.data);
    }

    KVRecord load_blob(const Entry& e) const {
        KVRecord kv;
        kv.heads = e.heads;
        kv.keys = FeatureMatrix(e.rows, e.width);
        kv.values = FeatureMatrix(e.rows, e.width);
        read_f32(e.k_path, kv.keys.data);
        read_f32(e.v_path, kv.values.data);
        return kv;
    }

    static void write_f32(const std::string& path, const std::vector<float>& data) {
        std::ofstream out(path, std::ios::binary);
        require(out.good(), "kv cache: cannot open '" + path + "' for writing");
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
        require(out.good(), "kv cache: short write to '" + path + "'");
    }

    static void read_f32(const std::string& path, std::vector<float>& data) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "kv cache: cannot open '" + path + "'");
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(float)));
        require(in.gcount() == static_cast<std::streamsize>(data.size() * sizeof(float)),
                "kv cache: short read from '" + path + "'");
    }

    std::string pass_label_;
    CacheOptions opts_;
    std::map<std::pair<int, int>, Entry> entries_;
    std::map<int, int> site_width_;
    size_t resident_bytes_ = 0;
    std::string spill_root_;
    bool frozen_ = false;
};

}  // namespace texrect
