// Acceptance suite. Each criterion prints one PASS/FAIL/SKIP line and exits
// 0 / 1 / 77. Criteria needing the real pre-trained backbone run when
// TEXRECT_ENDPOINT points at a server speaking the wire protocol (criteria 4
// and 5 additionally need TEXRECT_WOOD_REF / TEXRECT_WOOD_TARGET); they skip
// otherwise rather than silently passing.

#include "texrect/texrect.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>

using namespace texrect;
using namespace texrect::testing;

namespace {

constexpr int kSkip = 77;

struct Outcome {
    bool pass = false;
    bool skip = false;
    std::string detail;
};

Outcome passed(const std::string& detail) { return {true, false, detail}; }
Outcome failed(const std::string& detail) { return {false, false, detail}; }
Outcome skipped(const std::string& detail) { return {false, true, detail}; }

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const char* env(const char* name) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? v : nullptr;
}

LatentImage random_latent(Rng& rng, int h, int w) {
    LatentImage z(h, w, 4);
    for (float& v : z.data) {
        v = static_cast<float>(rng.uniform(-1.5, 1.5));
    }
    return z;
}

// ---- criterion 1: scheduler algebra --------------------------------------

Outcome criterion_1() {
    auto start = std::chrono::steady_clock::now();
    auto native = scaled_linear_alpha_bar();
    NoiseSchedule sched = build_schedule(50, native);

    for (size_t i = 1; i < native.size(); ++i) {
        if (!(native[i] < native[i - 1])) {
            return failed("native alpha_bar not strictly decreasing at " + std::to_string(i));
        }
    }
    for (int k = 0; k < sched.steps; ++k) {
        if (!(sched.at(k + 1) < sched.at(k))) {
            return failed("sub-grid alpha_bar not strictly decreasing at level " +
                        std::to_string(k + 1));
        }
    }

    Rng rng(1234);
    double max_rel = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        int t = static_cast<int>(rng.index(static_cast<size_t>(sched.steps)));
        LatentImage z = random_latent(rng, 4, 4);
        LatentImage eps = random_latent(rng, 4, 4);
        LatentImage back = sample_step(invert_step(z, eps, t, sched), eps, t + 1, sched);
        for (size_t i = 0; i < z.data.size(); ++i) {
            double scale = std::max(1.0, std::abs(static_cast<double>(z.data[i])));
            max_rel = std::max(max_rel, std::abs(back.data[i] - z.data[i]) / scale);
        }
    }
    if (max_rel > 1e-5) {
        return failed("invert/sample inverse error " + std::to_string(max_rel) + " > 1e-5");
    }

    double max_lin = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int t = 1 + static_cast<int>(rng.index(static_cast<size_t>(sched.steps)));
        float a = static_cast<float>(rng.uniform(-2, 2));
        float b = static_cast<float>(rng.uniform(-2, 2));
        LatentImage z = random_latent(rng, 4, 4), w = random_latent(rng, 4, 4);
        LatentImage e1 = random_latent(rng, 4, 4), e2 = random_latent(rng, 4, 4);
        LatentImage mz(4, 4, 4), me(4, 4, 4);
        for (size_t i = 0; i < mz.data.size(); ++i) {
            mz.data[i] = a * z.data[i] + b * w.data[i];
            me.data[i] = a * e1.data[i] + b * e2.data[i];
        }
        LatentImage lhs = predict_x0(mz, me, t, sched);
        LatentImage r1 = predict_x0(z, e1, t, sched);
        LatentImage r2 = predict_x0(w, e2, t, sched);
        for (size_t i = 0; i < lhs.data.size(); ++i) {
            double want = a * static_cast<double>(r1.data[i]) + b * r2.data[i];
            double scale = std::max(1.0, std::abs(want));
            max_lin = std::max(max_lin, std::abs(lhs.data[i] - want) / scale);
        }
    }
    if (max_lin > 1e-5) {
        return failed("predict_x0 linearity error " + std::to_string(max_lin) + " > 1e-5");
    }

    double secs = elapsed_s(start);
    if (secs >= 1.0) {
        return failed("runtime " + std::to_string(secs) + " s >= 1 s");
    }
    return passed("max inverse err " + std::to_string(max_rel) + ", linearity err " +
                std::to_string(max_lin) + ", " + std::to_string(secs) + " s, no GPU");
}

// ---- criterion 2: attention mechanics on the stub ------------------------

Outcome criterion_2() {
    auto start = std::chrono::steady_clock::now();
    StubBackend backend;  // 2 sites, 8x8 latents
    const int T = 10;
    NoiseSchedule sched = build_schedule(T, backend.info().native_alpha_bar);
    std::vector<int> sites{0, 1};

    // self-injection equivalence, 1e-4 relative
    LatentImage z = backend.encode(make_texture(64, 3));
    std::vector<TapDirective> rec{record_at(0), record_at(1)};
    NoisePrediction recorded = backend.predict_noise(z, 640, rec);
    std::vector<TapDirective> inj;
    inj.push_back(inject_at(0, recorded.captured.at(0)));
    inj.push_back(inject_at(1, recorded.captured.at(1)));
    NoisePrediction injected = backend.predict_noise(z, 640, inj);
    NoisePrediction plain = backend.predict_noise(z, 640, {});
    for (size_t i = 0; i < plain.epsilon.data.size(); ++i) {
        double ref = plain.epsilon.data[i];
        if (std::abs(injected.epsilon.data[i] - ref) / std::max(1e-6, std::abs(ref)) > 1e-4) {
            return failed("self-injection deviates at element " + std::to_string(i));
        }
    }

    // softmax row normalization via all-ones values
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        FeatureMatrix q(6, 8), k(9, 8);
        for (float& v : q.data) v = static_cast<float>(rng.uniform(-3, 3));
        for (float& v : k.data) v = static_cast<float>(rng.uniform(-3, 3));
        FeatureMatrix ones(9, 8, 1.0f);
        FeatureMatrix out = attend(q, k, ones);
        for (float o : out.data) {
            if (std::abs(o - 1.0f) > 1e-5f) {
                return failed("softmax row sum off by " + std::to_string(std::abs(o - 1.0f)));
            }
        }
    }

    // concat + permutation invariance
    KVRecord a = recorded.captured.at(0);
    KVRecord b = recorded.captured.at(1);
    KVRecord cat = concat_kv(std::vector<KVRecord>{a, b});
    if (cat.keys.rows != a.keys.rows + b.keys.rows) {
        return failed("concat row count wrong");
    }
    {
        FeatureMatrix q(4, 16);
        for (float& v : q.data) v = static_cast<float>(rng.uniform(-1, 1));
        std::vector<int> perm(static_cast<size_t>(cat.keys.rows));
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        rng.shuffle(perm);
        FeatureMatrix kp(cat.keys.rows, 16), vp(cat.keys.rows, 16);
        for (int i = 0; i < cat.keys.rows; ++i) {
            std::copy(cat.keys.row(perm[static_cast<size_t>(i)]),
                      cat.keys.row(perm[static_cast<size_t>(i)]) + 16, kp.row(i));
            std::copy(cat.values.row(perm[static_cast<size_t>(i)]),
                      cat.values.row(perm[static_cast<size_t>(i)]) + 16, vp.row(i));
        }
        FeatureMatrix o1 = attend(q, cat.keys, cat.values);
        FeatureMatrix o2 = attend(q, kp, vp);
        for (size_t i = 0; i < o1.data.size(); ++i) {
            if (std::abs(o1.data[i] - o2.data[i]) > 1e-5f) {
                return failed("permutation invariance violated");
            }
        }
    }

    // exhaustive (P,S) over [0,10]^2, native-cache lookups on both phases
    PixelImage ref_img = make_texture(64, 1);
    PixelImage target = make_layout_target(64, 0);
    InversionRecord ir = invert_and_record(backend, sched, target, sites, "ir");
    InversionRecord ref = invert_and_record(backend, sched, ref_img, sites, "ref");
    std::vector<const InversionRecord*> refs{&ref};
    int runs = 0;
    for (int P = 0; P <= T; ++P) {
        for (int S = 0; S <= T; ++S) {
            try {
                LatentImage zt = structure_preserving_invert(backend, sched, target, ir, P,
                                                             sites, IrEvalMode::native_cache);
                LatentImage z0 = fine_texture_sample(backend, sched, zt, refs, S, sites);
                if (!all_finite(z0.data)) {
                    return failed("non-finite latent at P=" + std::to_string(P) +
                                ", S=" + std::to_string(S));
                }
            } catch (const error& e) {
                return failed("cache miss at P=" + std::to_string(P) + ", S=" +
                            std::to_string(S) + ": " + e.what());
            }
            ++runs;
        }
    }

    double secs = elapsed_s(start);
    if (secs >= 60.0) {
        return failed("runtime " + std::to_string(secs) + " s >= 60 s");
    }
    return passed("0 misses over " + std::to_string(runs) + " (P,S) pairs, " +
                std::to_string(secs) + " s, no model download");
}

// ---- real-backbone helpers ------------------------------------------------

std::unique_ptr<NoiseBackend> real_backend_or_null(std::string& why) {
    const char* endpoint = env("TEXRECT_ENDPOINT");
    if (endpoint == nullptr) {
        why = "real backbone unavailable in this environment: set TEXRECT_ENDPOINT to a "
              "server speaking the wire protocol over the released v1.4 weights";
        return nullptr;
    }
    try {
        return std::make_unique<RemoteBackend>(endpoint);
    } catch (const std::exception& e) {
        why = std::string("endpoint unreachable: ") + e.what();
        return nullptr;
    }
}

PixelImage load_or_synthesize(const char* env_name, const BackendInfo& info, int variant) {
    const char* path = env(env_name);
    if (path != nullptr) {
        return resize_bilinear(load_png(path), info.image_h, info.image_w);
    }
    return make_texture(info.image_h, variant);
}

PixelImage reconstruct(NoiseBackend& backend, const NoiseSchedule& sched,
                       const PixelImage& img) {
    InversionRecord rec = invert_and_record(backend, sched, img, {}, "recon");
    std::vector<const InversionRecord*> none;
    LatentImage z0 =
        fine_texture_sample(backend, sched, rec.trajectory.at(sched.steps), none, sched.steps, {});
    return backend.decode(z0);
}

double mean_luma(const PixelImage& img, int y0, int x0, int y1, int x1) {
    double acc = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            acc += (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
        }
    }
    return acc / (static_cast<double>(y1 - y0) * (x1 - x0));
}

// Pearson correlation between grid-downsampled luma layouts.
double layout_correlation(const PixelImage& a, const PixelImage& b, int grid = 16) {
    std::vector<double> va, vb;
    int bh = a.h / grid, bw = a.w / grid;
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            va.push_back(mean_luma(a, gy * bh, gx * bw, (gy + 1) * bh, (gx + 1) * bw));
            vb.push_back(mean_luma(b, gy * bh, gx * bw, (gy + 1) * bh, (gx + 1) * bw));
        }
    }
    double ma = 0, mb = 0;
    for (size_t i = 0; i < va.size(); ++i) {
        ma += va[i];
        mb += vb[i];
    }
    ma /= static_cast<double>(va.size());
    mb /= static_cast<double>(vb.size());
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < va.size(); ++i) {
        num += (va[i] - ma) * (vb[i] - mb);
        da += (va[i] - ma) * (va[i] - ma);
        db += (vb[i] - mb) * (vb[i] - mb);
    }
    return num / std::max(1e-12, std::sqrt(da * db));
}

// Mean over output patches of the minimum L2 distance to any reference patch
// (grayscale-free, raw RGB patches on a fixed grid).
double patch_feature_distance(const PixelImage& out, const PixelImage& ref, int patch = 16,
                              int stride = 16) {
    double total = 0.0;
    int count = 0;
    for (int oy = 0; oy + patch <= out.h; oy += stride) {
        for (int ox = 0; ox + patch <= out.w; ox += stride) {
            double best = std::numeric_limits<double>::max();
            for (int ry = 0; ry + patch <= ref.h; ry += stride) {
                for (int rx = 0; rx + patch <= ref.w; rx += stride) {
                    double d = 0.0;
                    for (int y = 0; y < patch; ++y) {
                        for (int x = 0; x < patch; ++x) {
                            for (int c = 0; c < 3; ++c) {
                                double diff = static_cast<double>(out.at(oy + y, ox + x, c)) -
                                              ref.at(ry + y, rx + x, c);
                                d += diff * diff;
                            }
                        }
                    }
                    best = std::min(best, d);
                }
            }
            total += std::sqrt(best);
            ++count;
        }
    }
    return total / std::max(1, count);
}

// ---- criterion 3: degenerate-pipeline reconstruction (real backbone) -----

Outcome criterion_3() {
    std::string why;
    auto backend = real_backend_or_null(why);
    if (!backend) {
        return skipped(why);
    }
    const BackendInfo& info = backend->info();
    const int T = 50;
    NoiseSchedule sched = build_schedule(T, info.native_alpha_bar);
    PixelImage target = load_or_synthesize("TEXRECT_WOOD_TARGET", info, 2);

    RectifyConfig cfg;
    cfg.steps = T;
    cfg.p1 = cfg.p2 = 0;
    cfg.s1 = cfg.s2 = T;
    if (info.num_sites <= 15) {
        cfg.sites.clear();
        for (int s = 0; s < info.num_sites; ++s) cfg.sites.push_back(s);
    }
    PixelImage reference = load_or_synthesize("TEXRECT_WOOD_REF", info, 1);
    PixelImage out = run_pipeline(*backend, reference, target, cfg);
    PixelImage recon = reconstruct(*backend, sched, target);
    double db = psnr(recon, out);
    if (db >= 25.0) {
        return passed("PSNR vs plain DDIM reconstruction " + std::to_string(db) + " dB >= 25 dB");
    }
    return failed("PSNR vs plain DDIM reconstruction " + std::to_string(db) + " dB < 25 dB");
}

// ---- criterion 4: structure preservation (real backbone + wood images) ---

Outcome criterion_4() {
    std::string why;
    auto backend = real_backend_or_null(why);
    if (!backend) {
        return skipped(why);
    }
    if (env("TEXRECT_WOOD_REF") == nullptr || env("TEXRECT_WOOD_TARGET") == nullptr) {
        return skipped("needs the wood example: set TEXRECT_WOOD_REF and TEXRECT_WOOD_TARGET");
    }
    const BackendInfo& info = backend->info();
    const int T = 50;
    NoiseSchedule sched = build_schedule(T, info.native_alpha_bar);
    PixelImage target = load_or_synthesize("TEXRECT_WOOD_TARGET", info, 2);

    std::vector<int> sites{10, 11, 12, 13, 14, 15};
    InversionRecord ir = invert_and_record(*backend, sched, target, {}, "ir");
    LatentImage z_p20 = structure_preserving_invert(*backend, sched, target, ir, 20, sites,
                                                    IrEvalMode::literal);
    LatentImage z_p0 = structure_preserving_invert(*backend, sched, target, ir, 0, sites,
                                                   IrEvalMode::literal);
    double corr20 = layout_correlation(backend->decode(z_p20), target);
    double corr0 = layout_correlation(backend->decode(z_p0), target);
    if (corr20 > corr0) {
        return passed("layout correlation P=20: " + std::to_string(corr20) + " > P=0: " +
                    std::to_string(corr0));
    }
    return failed("layout correlation P=20: " + std::to_string(corr20) + " <= P=0: " +
                std::to_string(corr0));
}

// ---- criterion 5: texture transfer trend (real backbone + wood images) ---

Outcome criterion_5() {
    std::string why;
    auto backend = real_backend_or_null(why);
    if (!backend) {
        return skipped(why);
    }
    if (env("TEXRECT_WOOD_REF") == nullptr || env("TEXRECT_WOOD_TARGET") == nullptr) {
        return skipped("needs the wood example: set TEXRECT_WOOD_REF and TEXRECT_WOOD_TARGET");
    }
    const BackendInfo& info = backend->info();
    PixelImage reference = load_or_synthesize("TEXRECT_WOOD_REF", info, 1);
    PixelImage target = load_or_synthesize("TEXRECT_WOOD_TARGET", info, 2);

    std::vector<int> s1_values{50, 20, 10, 0};
    std::vector<double> distances;
    for (int s1 : s1_values) {
        RectifyConfig cfg;
        cfg.steps = 50;
        cfg.p1 = cfg.p2 = 0;  // S-ablation protocol
        cfg.s1 = s1;
        cfg.s2 = 5;
        PixelImage out = run_pipeline(*backend, reference, target, cfg);
        distances.push_back(patch_feature_distance(out, reference));
    }
    std::string seq;
    for (size_t i = 0; i < distances.size(); ++i) {
        seq += (i ? ", " : "") + std::string("S1=") + std::to_string(s1_values[i]) + ": " +
               std::to_string(distances[i]);
    }
    for (size_t i = 1; i < distances.size(); ++i) {
        if (!(distances[i] < distances[i - 1])) {
            return failed("patch-feature distance not decreasing (" + seq + ")");
        }
    }
    return passed("monotone decreasing (" + seq + ")");
}

// ---- criterion 6: default end-to-end run budget (real backbone) ----------

Outcome criterion_6() {
    std::string why;
    auto backend = real_backend_or_null(why);
    if (!backend) {
        return skipped(why);
    }
    const char* ref_path = env("TEXRECT_WOOD_REF");
    const char* tgt_path = env("TEXRECT_WOOD_TARGET");
    if (ref_path == nullptr || tgt_path == nullptr) {
        return skipped("needs a 512x512 example: set TEXRECT_WOOD_REF and TEXRECT_WOOD_TARGET");
    }
    TempDir dir("accept6");
    MaskImage all(backend->info().image_h, backend->info().image_w, 255);
    save_mask_png(dir.path() + "/mask.png", all);

    RunManifest m;
    m.mode = RunMode::nonstationary;
    m.reference_path = ref_path;
    m.target_path = tgt_path;
    m.mask_path = dir.path() + "/mask.png";
    m.out_dir = dir.path() + "/run1";
    m.backend_kind = "remote";
    m.endpoint = env("TEXRECT_ENDPOINT");
    m.cfg = RectifyConfig{};  // defaults: T=50, P1=20, P2=5, S1=20, S2=5, sites 10..15

    auto start = std::chrono::steady_clock::now();
    RunResult first = execute_run(m);
    double secs = elapsed_s(start);
    const double budget = 3 * 180.0;  // 3x "about three minutes"
    if (secs > budget) {
        return failed("end-to-end " + std::to_string(secs) + " s > " + std::to_string(budget) +
                    " s");
    }

    RunManifest replay;
    load_config_file(replay, first.record_path);
    replay.out_dir = dir.path() + "/run2";
    RunResult second = execute_run(replay);
    std::ifstream f1(first.result_path, std::ios::binary), f2(second.result_path,
                                                              std::ios::binary);
    std::stringstream b1, b2;
    b1 << f1.rdbuf();
    b2 << f2.rdbuf();
    if (b1.str() != b2.str()) {
        return failed("replay from the run record is not bit-identical");
    }
    return passed("end-to-end " + std::to_string(secs) + " s <= " + std::to_string(budget) +
                " s, replay bit-identical");
}

// ---- criterion 7: augmentation row accounting ------------------------------

Outcome criterion_7() {
    // structural property, independent of the backbone weights; runs on the
    // stub here and on the remote backbone when configured
    std::unique_ptr<NoiseBackend> backend;
    std::string backend_note;
    if (env("TEXRECT_ENDPOINT") != nullptr) {
        std::string why;
        backend = real_backend_or_null(why);
        if (!backend) {
            return skipped(why);
        }
        backend_note = "remote backbone";
    } else {
        backend = std::make_unique<StubBackend>();
        backend_note = "stub backbone";
    }
    const BackendInfo& info = backend->info();
    const int T = 10;

    RectifyConfig cfg;
    cfg.steps = T;
    cfg.p1 = 4;
    cfg.p2 = 1;
    cfg.s1 = 4;
    cfg.s2 = 1;
    cfg.sites.clear();
    for (int s = 0; s < std::min(info.num_sites, 2); ++s) {
        cfg.sites.push_back(s);
    }
    cfg.augmentations.transforms = {Transform::rot45, Transform::rot_neg45, Transform::rot90};

    const int tokens = info.latent_h * info.latent_w;
    int checked = 0;
    bool rows_ok = true;
    int bad_rows = 0;
    StepObserver obs = [&](const StepEvent& ev, const LatentImage&) {
        if (!ev.start && ev.phase == Phase::sampling && ev.injected) {
            ++checked;
            if (ev.injected_rows != 4 * tokens) {
                rows_ok = false;
                bad_rows = ev.injected_rows;
            }
        }
    };

    PixelImage reference = make_texture(info.image_h, 1);
    PixelImage target = make_layout_target(info.image_h, 2);
    PixelImage out = run_pipeline(*backend, reference, target, cfg, obs);

    int expected = (T - cfg.s1) + (T - cfg.s2);
    if (!rows_ok) {
        return failed("injected rows " + std::to_string(bad_rows) + " != 4x" +
                    std::to_string(tokens));
    }
    if (checked != expected) {
        return failed("injected sampling steps " + std::to_string(checked) + " != " +
                    std::to_string(expected));
    }
    if (!all_finite(out.data)) {
        return failed("non-finite output");
    }
    return passed("rows quadruple (" + std::to_string(4 * tokens) + ") at all " +
                std::to_string(checked) + " injected sampling steps, completed on the " +
                backend_note);
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {1, "scheduler algebra", criterion_1},
        {2, "attention mechanics (stub)", criterion_2},
        {3, "degenerate-pipeline reconstruction (real backbone)", criterion_3},
        {4, "structure preservation (wood example)", criterion_4},
        {5, "texture transfer trend (wood example)", criterion_5},
        {6, "default end-to-end budget + reproducibility (real backbone)", criterion_6},
        {7, "augmentation KV row accounting", criterion_7},
    };

    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 7) {
            std::cerr << "usage: acceptance [1..7]\n";
            return 2;
        }
    }

    int worst = 0;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) {
            continue;
        }
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = failed(std::string("unexpected error: ") + e.what());
        }
        const char* verdict = o.pass ? "PASS" : (o.skip ? "SKIP" : "FAIL");
        std::cout << "[criterion " << c.id << "] " << c.name << ": " << verdict << " ("
                  << o.detail << ")" << std::endl;
        int code = o.pass ? 0 : (o.skip ? kSkip : 1);
        if (only != 0) {
            return code;
        }
        if (code == 1 || (code == kSkip && worst == 0)) {
            worst = code;
        }
    }
    return worst;
}
