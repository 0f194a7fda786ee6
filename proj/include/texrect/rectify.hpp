#pragma once

#include "texrect/backend.hpp"
#include "texrect/injection.hpp"
#include "texrect/schedule.hpp"
#include "texrect/target_prep.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace texrect {

// Ordered latents z_0..z_T of one inversion; z_0 is the encoded input.
struct Trajectory {
    std::vector<LatentImage> latents;

    int levels() const { return static_cast<int>(latents.size()); }
    const LatentImage& at(int level) const { return latents[static_cast<size_t>(level)]; }
};

struct InversionRecord {
    Trajectory trajectory;
    KVCache cache;
};

// How structure-preserving inversion obtains the IR's KV at the mapped step:
// literal re-evaluates the predictor at (z^IR_mapped, current timestep);
// native_cache reuses the KV recorded during the IR's own inversion.
enum class IrEvalMode { literal, native_cache };

inline std::string ir_eval_name(IrEvalMode m) {
    return m == IrEvalMode::literal ? "literal" : "native-cache";
}

inline IrEvalMode parse_ir_eval(const std::string& name) {
    if (name == "literal") return IrEvalMode::literal;
    if (name == "native-cache") return IrEvalMode::native_cache;
    fail("unknown ir-eval mode '" + name + "' (expected literal or native-cache)");
}

struct RectifyConfig {
    int steps = 50;  // T
    int p1 = 20;
    int p2 = 5;
    int s1 = 20;
    int s2 = 5;
    std::vector<int> sites{10, 11, 12, 13, 14, 15};
    IrEvalMode ir_eval = IrEvalMode::literal;
    AugmentationSet augmentations;
    uint64_t seed = 0;
    std::optional<int> injection_offset;  // replaces the reverse map t -> T-t with t -> t+offset
    CacheOptions cache;
};

inline void validate_config(const RectifyConfig& cfg, const BackendInfo& info) {
    require(cfg.steps >= 1, "steps out of range: " + std::to_string(cfg.steps));
    auto check_bound = [&](int v, const std::string& field) {
        require(v >= 0 && v <= cfg.steps, field + " out of range: " + std::to_string(v) +
                                              " (steps=" + std::to_string(cfg.steps) + ")");
    };
    check_bound(cfg.p1, "p1");
    check_bound(cfg.p2, "p2");
    check_bound(cfg.s1, "s1");
    check_bound(cfg.s2, "s2");
    for (int site : cfg.sites) {
        require(site >= 0 && site < info.num_sites,
                "sites out of range: " + std::to_string(site) + " (backend has " +
                    std::to_string(info.num_sites) + " attention sites)");
    }
}

// Progress hook; fires once with start=true at the phase's initial level and
// once per step after. `level` is the latent's noise level, `injected_rows`
// the KV row count injected by the step that produced it (0 when plain).
struct StepEvent {
    int round = 0;  // 1 or 2; 0 for recording passes
    Phase phase = Phase::inversion;
    int level = 0;
    bool start = false;
    bool injected = false;
    int injected_rows = 0;
};

using StepObserver = std::function<void(const StepEvent&, const LatentImage&)>;
using LatentHook = std::function<LatentImage(const LatentImage&)>;

namespace detail {

inline void notify(const StepObserver& obs, const StepEvent& ev, const LatentImage& z) {
    if (obs) {
        obs(ev, z);
    }
}

inline IndexMap inversion_index_map(const std::optional<int>& offset) {
    if (offset.has_value()) {
        return IndexMap{IndexMap::Kind::offset, *offset};
    }
    return IndexMap{IndexMap::Kind::reverse, 0};
}

}  // namespace detail

// Standard DDIM inversion of an image, recording KV at the given sites for
// every level 0..T (the final level recorded with one extra evaluation, so
// reverse-order lookups at index T resolve). Empty `sites` produces a plain
// trajectory with an empty cache.
inline InversionRecord invert_and_record(NoiseBackend& backend, const NoiseSchedule& sched,
                                         const PixelImage& img, std::span<const int> sites,
                                         const std::string& pass_label,
                                         const CacheOptions& cache_opts = {}) {
    InversionRecord rec{Trajectory{}, KVCache(pass_label, cache_opts)};
    rec.trajectory.latents.reserve(static_cast<size_t>(sched.steps) + 1);
    rec.trajectory.latents.push_back(backend.encode(img));

    std::vector<TapDirective> dirs;
    dirs.reserve(sites.size());
    for (int t = 0; t < sched.steps; ++t) {
        dirs.clear();
        for (int site : sites) {
            dirs.push_back(record_at(site));
        }
        NoisePrediction pred =
            backend.predict_noise(rec.trajectory.at(t), sched.native_timestep(t), dirs);
        for (auto& [site, kv] : pred.captured) {
            rec.cache.insert(site, t, std::move(kv));
        }
        rec.trajectory.latents.push_back(
            invert_step(rec.trajectory.at(t), pred.epsilon, t, sched));
    }
    if (!sites.empty()) {
        dirs.clear();
        for (int site : sites) {
            dirs.push_back(record_at(site));
        }
        NoisePrediction pred = backend.predict_noise(rec.trajectory.at(sched.steps),
                                                     sched.record_timestep(sched.steps), dirs);
        for (auto& [site, kv] : pred.captured) {
            rec.cache.insert(site, sched.steps, std::move(kv));
        }
    }
    rec.cache.freeze();
    return rec;
}

// Inversion of the target with reverse-order KV injection from the IR for the
// first P steps, then standard inversion. Returns z_T.
inline LatentImage structure_preserving_invert(NoiseBackend& backend, const NoiseSchedule& sched,
                                               const PixelImage& target,
                                               const InversionRecord& ir, int P,
                                               std::span<const int> sites, IrEvalMode mode,
                                               const std::optional<int>& offset = std::nullopt,
                                               const StepObserver& obs = {}, int round = 1) {
    require(P >= 0 && P <= sched.steps,
            "P out of range: " + std::to_string(P) + " (steps=" + std::to_string(sched.steps) + ")");
    require(ir.trajectory.levels() == sched.steps + 1,
            "structure_preserving_invert: IR trajectory has " +
                std::to_string(ir.trajectory.levels()) + " levels, expected " +
                std::to_string(sched.steps + 1));

    IndexMap map = detail::inversion_index_map(offset);
    InjectionPolicy policy{Phase::inversion, P, sched.steps,
                           std::vector<int>(sites.begin(), sites.end()), map, {&ir.cache}};
    validate_policy(policy);

    LatentImage z = backend.encode(target);
    detail::notify(obs, {round, Phase::inversion, 0, true, false, 0}, z);

    std::vector<TapDirective> dirs;
    for (int t = 0; t < sched.steps; ++t) {
        dirs.clear();
        int injected_rows = 0;
        if (t < P && !sites.empty()) {
            if (mode == IrEvalMode::literal) {
                int src = map.apply(t, sched.steps);
                require(src >= 0 && src <= sched.steps,
                        "structure_preserving_invert: mapped step " + std::to_string(src) +
                            " outside the trajectory");
                std::vector<TapDirective> rec_dirs;
                for (int site : sites) {
                    rec_dirs.push_back(record_at(site));
                }
                NoisePrediction ir_pred = backend.predict_noise(
                    ir.trajectory.at(src), sched.native_timestep(t), rec_dirs);
                for (int site : sites) {
                    KVRecord kv = std::move(ir_pred.captured.at(site));
                    injected_rows = kv.keys.rows;
                    dirs.push_back(inject_at(site, std::move(kv)));
                }
            } else {
                for (int site : sites) {
                    std::optional<KVRecord> kv = resolve_injection(policy, site, t);
                    require(kv.has_value(), "structure_preserving_invert: policy yielded no KV");
                    injected_rows = kv->keys.rows;
                    dirs.push_back(inject_at(site, std::move(*kv)));
                }
            }
        }
        bool injected = !dirs.empty();
        NoisePrediction pred = backend.predict_noise(z, sched.native_timestep(t), dirs);
        z = invert_step(z, pred.epsilon, t, sched);
        detail::notify(obs, {round, Phase::inversion, t + 1, false, injected, injected_rows}, z);
    }
    return z;
}

// DDIM sampling from a start code: the first S steps plain (layout
// reconstruction), the remaining steps with reference KV injected at matching
// timesteps, concatenated over all references per the augmentation rule.
// Returns z_0.
inline LatentImage fine_texture_sample(NoiseBackend& backend, const NoiseSchedule& sched,
                                       const LatentImage& start,
                                       std::span<const InversionRecord* const> refs, int S,
                                       std::span<const int> sites,
                                       const StepObserver& obs = {}, int round = 1) {
    require(S >= 0 && S <= sched.steps,
            "S out of range: " + std::to_string(S) + " (steps=" + std::to_string(sched.steps) + ")");

    InjectionPolicy policy{Phase::sampling, S, sched.steps,
                           std::vector<int>(sites.begin(), sites.end()),
                           IndexMap{IndexMap::Kind::same, 0},
                           {}};
    for (const InversionRecord* ref : refs) {
        policy.sources.push_back(&ref->cache);
    }
    validate_policy(policy);

    LatentImage z = start;
    detail::notify(obs, {round, Phase::sampling, sched.steps, true, false, 0}, z);

    std::vector<TapDirective> dirs;
    for (int t = sched.steps; t >= 1; --t) {
        dirs.clear();
        int injected_rows = 0;
        if (!sites.empty() && !refs.empty() && policy.step_active(t)) {
            for (int site : sites) {
                std::optional<KVRecord> kv = resolve_injection(policy, site, t);
                require(kv.has_value(), "fine_texture_sample: policy yielded no KV");
                injected_rows = kv->keys.rows;
                dirs.push_back(inject_at(site, std::move(*kv)));
            }
        }
        bool injected = !dirs.empty();
        NoisePrediction pred = backend.predict_noise(z, sched.native_timestep(t - 1), dirs);
        z = sample_step(z, pred.epsilon, t, sched);
        detail::notify(obs, {round, Phase::sampling, t - 1, false, injected, injected_rows}, z);
    }
    return z;
}

namespace detail {

inline std::vector<InversionRecord> record_references(NoiseBackend& backend,
                                                      const NoiseSchedule& sched,
                                                      const PixelImage& reference,
                                                      const RectifyConfig& cfg) {
    std::vector<InversionRecord> refs;
    refs.push_back(
        invert_and_record(backend, sched, reference, cfg.sites, "ref-inversion", cfg.cache));
    std::vector<PixelImage> augmented = build_augmentations(reference, cfg.augmentations);
    for (size_t i = 0; i < augmented.size(); ++i) {
        refs.push_back(invert_and_record(backend, sched, augmented[i], cfg.sites,
                                         "ref-inversion-aug" + std::to_string(i), cfg.cache));
    }
    return refs;
}

inline InversionRecord record_ir(NoiseBackend& backend, const NoiseSchedule& sched,
                                 const PixelImage& ir_image, const RectifyConfig& cfg) {
    // literal mode re-evaluates the IR per injected step and only needs the
    // trajectory; recording all sites would hold KV nobody reads.
    std::span<const int> ir_sites =
        cfg.ir_eval == IrEvalMode::native_cache ? std::span<const int>(cfg.sites)
                                                : std::span<const int>();
    return invert_and_record(backend, sched, ir_image, ir_sites, "ir-inversion", cfg.cache);
}

inline std::vector<const InversionRecord*> ref_pointers(
    const std::vector<InversionRecord>& refs) {
    std::vector<const InversionRecord*> ptrs;
    ptrs.reserve(refs.size());
    for (const InversionRecord& r : refs) {
        ptrs.push_back(&r);
    }
    return ptrs;
}

}  // namespace detail

// One self-rectification round: structure-preserving inversion of the target
// guided by the IR, then fine texture sampling guided by the reference (and
// its augmentations), then decode.
inline PixelImage self_rectify(NoiseBackend& backend, const PixelImage& target,
                               const PixelImage& ir_image, const PixelImage& reference, int P,
                               int S, const RectifyConfig& cfg, const StepObserver& obs = {}) {
    const BackendInfo& info = backend.info();
    validate_config(cfg, info);
    NoiseSchedule sched = build_schedule(cfg.steps, info.native_alpha_bar);

    InversionRecord ir = detail::record_ir(backend, sched, ir_image, cfg);
    std::vector<InversionRecord> refs = detail::record_references(backend, sched, reference, cfg);
    std::vector<const InversionRecord*> ref_ptrs = detail::ref_pointers(refs);

    LatentImage z_t = structure_preserving_invert(backend, sched, target, ir, P, cfg.sites,
                                                  cfg.ir_eval, cfg.injection_offset, obs, 1);
    LatentImage z_0 = fine_texture_sample(backend, sched, z_t, ref_ptrs, S, cfg.sites, obs, 1);
    return backend.decode(z_0);
}

// Coarse-to-fine overall framework: two self-rectification rounds with
// (P1,S1) then (P2,S2). Round 2 refines round 1's output; the IR stays the
// initial user target in both rounds. Reference and IR inversions are
// computed once and reused. `round1_start` (when set) transforms round 1's
// start code before sampling, which carries the latent-shuffle mode.
inline PixelImage run_pipeline(NoiseBackend& backend, const PixelImage& reference,
                               const PixelImage& target, const RectifyConfig& cfg,
                               const StepObserver& obs = {},
                               const LatentHook& round1_start = {}) {
    const BackendInfo& info = backend.info();
    validate_config(cfg, info);
    require(reference.h == info.image_h && reference.w == info.image_w,
            "run_pipeline: reference dims do not match backend native size");
    require(target.h == info.image_h && target.w == info.image_w,
            "run_pipeline: target dims do not match backend native size");
    NoiseSchedule sched = build_schedule(cfg.steps, info.native_alpha_bar);

    InversionRecord ir = detail::record_ir(backend, sched, target, cfg);
    std::vector<InversionRecord> refs = detail::record_references(backend, sched, reference, cfg);
    std::vector<const InversionRecord*> ref_ptrs = detail::ref_pointers(refs);

    // round 1 (coarse)
    LatentImage z_t = structure_preserving_invert(backend, sched, target, ir, cfg.p1, cfg.sites,
                                                  cfg.ir_eval, cfg.injection_offset, obs, 1);
    if (round1_start) {
        z_t = round1_start(z_t);
    }
    LatentImage z_0 = fine_texture_sample(backend, sched, z_t, ref_ptrs, cfg.s1, cfg.sites, obs, 1);
    PixelImage coarse = backend.decode(z_0);

    // round 2 (fine); same initial target as inversion reference
    z_t = structure_preserving_invert(backend, sched, coarse, ir, cfg.p2, cfg.sites, cfg.ir_eval,
                                      cfg.injection_offset, obs, 2);
    z_0 = fine_texture_sample(backend, sched, z_t, ref_ptrs, cfg.s2, cfg.sites, obs, 2);
    return backend.decode(z_0);
}

}  // namespace texrect
