#pragma once

#include "texrect/kv_cache.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace texrect {

enum class Phase { inversion, sampling };

// Source-step mapping for injected KV. reverse is t -> T-t (Eq.-5 style),
// same is t -> t, offset is t -> t+shift clamped to [0, T].
struct IndexMap {
    enum class Kind { reverse, same, offset };
    Kind kind = Kind::same;
    int shift = 0;

    int apply(int t, int total_steps) const {
        switch (kind) {
            case Kind::reverse:
                return total_steps - t;
            case Kind::same:
                return t;
            case Kind::offset:
                return std::clamp(t + shift, 0, total_steps);
        }
        return t;
    }
};

// Per-timestep routing rule: which sites inject, over which phase prefix, and
// from which caches.
struct InjectionPolicy {
    Phase phase = Phase::inversion;
    int phase_bound = 0;  // P for inversion, S for sampling
    int total_steps = 0;  // T
    std::vector<int> active_sites;
    IndexMap index_map;
    std::vector<const KVCache*> sources;  // concatenated in order, reference first

    bool site_active(int site) const {
        return std::find(active_sites.begin(), active_sites.end(), site) != active_sites.end();
    }

    // Inversion injects the first P steps (t < P); sampling runs the first S
    // steps plain (t > T-S means no injection).
    bool step_active(int t) const {
        if (phase == Phase::inversion) {
            return t < phase_bound;
        }
        return t <= total_steps - phase_bound;
    }
};

inline void validate_policy(const InjectionPolicy& policy) {
    require(policy.total_steps >= 1, "injection policy: total_steps must be >= 1");
    require(policy.phase_bound >= 0 && policy.phase_bound <= policy.total_steps,
            "injection policy: phase bound " + std::to_string(policy.phase_bound) +
                " outside [0," + std::to_string(policy.total_steps) + "]");
}

// Cached (K,V) for (site, index_map(t)), concatenated over all sources, or
// nothing when the step is outside the active phase or the site is inactive.
// A missing cache entry is a hard failure naming (pass_label, site, t).
inline std::optional<KVRecord> resolve_injection(const InjectionPolicy& policy, int site,
                                                 int t) {
    if (!policy.step_active(t) || !policy.site_active(site)) {
        return std::nullopt;
    }
    int source_step = policy.index_map.apply(t, policy.total_steps);
    require(source_step >= 0 && source_step <= policy.total_steps,
            "injection: mapped step " + std::to_string(source_step) + " outside [0," +
                std::to_string(policy.total_steps) + "]");
    require(!policy.sources.empty(), "injection: no KV sources configured");

    std::vector<KVRecord> parts;
    parts.reserve(policy.sources.size());
    for (const KVCache* cache : policy.sources) {
        require(cache->contains(site, source_step),
                "kv cache miss: pass '" + cache->pass_label() + "', site " +
                    std::to_string(site) + ", t " + std::to_string(t) + " (mapped to " +
                    std::to_string(source_step) + ")");
        parts.push_back(cache->get(site, source_step));
    }
    if (parts.size() == 1) {
        return std::move(parts[0]);
    }
    return concat_kv(parts);
}

}  // namespace texrect
