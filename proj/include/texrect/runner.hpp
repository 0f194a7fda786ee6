#pragma once

#include "texrect/manifest.hpp"
#include "texrect/png_io.hpp"
#include "texrect/remote_backend.hpp"
#include "texrect/stub_backend.hpp"
#include "texrect/sweep.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

namespace texrect {

inline std::unique_ptr<NoiseBackend> make_backend(const RunManifest& m) {
    if (m.backend_kind == "stub") {
        return std::make_unique<StubBackend>();
    }
    std::string endpoint = m.endpoint;
    if (endpoint.empty()) {
        const char* env = std::getenv("TEXRECT_ENDPOINT");
        require(env != nullptr && *env != '\0',
                "remote backend selected but no endpoint given (use --endpoint or set "
                "TEXRECT_ENDPOINT)");
        endpoint = env;
    }
    return std::make_unique<RemoteBackend>(endpoint);
}

namespace detail {

struct IntermediateWriter {
    std::string dir;
    int cadence = 10;
    NoiseBackend* backend = nullptr;
    // frames per (round, phase), in emission order
    std::map<std::pair<int, int>, std::vector<PixelImage>> frames;

    void observe(const StepEvent& ev, const LatentImage& z) {
        if (ev.round == 0 || ev.level % cadence != 0) {
            return;
        }
        frames[{ev.round, ev.phase == Phase::inversion ? 0 : 1}].push_back(backend->decode(z));
    }

    void write_all() const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        for (const auto& [key, list] : frames) {
            std::string stem = "round" + std::to_string(key.first) +
                               (key.second == 0 ? "_inversion" : "_sampling");
            for (size_t i = 0; i < list.size(); ++i) {
                save_png(dir + "/" + stem + "_f" + std::to_string(i) + ".png", list[i]);
            }
            if (!list.empty()) {
                int ch = list[0].h;
                int cw = list[0].w;
                int n = static_cast<int>(list.size());
                PixelImage strip(ch, n * cw + (n - 1) * 2, 1.0f);
                for (int i = 0; i < n; ++i) {
                    for (int y = 0; y < ch; ++y) {
                        for (int x = 0; x < cw; ++x) {
                            for (int c = 0; c < 3; ++c) {
                                strip.at(y, i * (cw + 2) + x, c) = list[static_cast<size_t>(i)].at(y, x, c);
                            }
                        }
                    }
                }
                save_png(dir + "/" + stem + "_strip.png", strip);
            }
        }
    }
};

inline PixelImage load_resized(const std::string& path, const BackendInfo& info) {
    return resize_bilinear(load_png(path), info.image_h, info.image_w);
}

}  // namespace detail

struct RunResult {
    std::string result_path;
    std::string record_path;
};

// Execute one manifest end to end: input prep per mode, the two-round
// pipeline, final PNG, optional intermediate strips and a machine-readable
// run record that reproduces the run.
inline RunResult execute_run(const RunManifest& manifest) {
    namespace fs = std::filesystem;
    using clock = std::chrono::steady_clock;

    validate_manifest(manifest);
    auto t_start = clock::now();

    std::unique_ptr<NoiseBackend> backend = make_backend(manifest);
    const BackendInfo& info = backend->info();
    validate_config(manifest.cfg, info);

    PixelImage reference = detail::load_resized(manifest.reference_path, info);

    PixelImage target;
    LatentHook round1_hook;
    switch (manifest.mode) {
        case RunMode::nonstationary:
        case RunMode::image_edit: {
            target = detail::load_resized(manifest.target_path, info);
            MaskImage mask =
                resize_nearest(load_mask_png(manifest.mask_path), info.image_h, info.image_w);
            target = fill_background(target, mask, reference, manifest.cfg.seed);
            break;
        }
        case RunMode::patch_shuffle:
            target = patch_shuffle(reference,
                                   ShuffleSpec{manifest.shuffle_block, manifest.cfg.seed});
            break;
        case RunMode::latent_shuffle: {
            target = reference;
            int block = manifest.latent_block;
            uint64_t seed = manifest.cfg.seed;
            round1_hook = [block, seed](const LatentImage& z) {
                return latent_shuffle(z, ShuffleSpec{block, seed});
            };
            break;
        }
        case RunMode::guided:
            target = prepare_guided_layout(detail::load_resized(manifest.target_path, info),
                                           manifest.noise_amplitude, manifest.cfg.seed);
            break;
    }

    fs::create_directories(manifest.out_dir);

    detail::IntermediateWriter intermediates;
    intermediates.dir = manifest.out_dir + "/intermediates";
    intermediates.backend = backend.get();

    std::map<std::string, double> phase_ms;
    auto phase_start = clock::now();
    std::string current_phase;
    StepObserver observer = [&](const StepEvent& ev, const LatentImage& z) {
        std::string name = "round" + std::to_string(ev.round) +
                           (ev.phase == Phase::inversion ? "_inversion" : "_sampling");
        if (ev.start) {
            if (!current_phase.empty()) {
                phase_ms[current_phase] =
                    std::chrono::duration<double, std::milli>(clock::now() - phase_start).count();
            }
            current_phase = name;
            phase_start = clock::now();
        }
        if (manifest.save_intermediates) {
            intermediates.observe(ev, z);
        }
    };

    auto t_prep = clock::now();
    PixelImage result = run_pipeline(*backend, reference, target, manifest.cfg, observer,
                                     round1_hook);
    if (!current_phase.empty()) {
        phase_ms[current_phase] =
            std::chrono::duration<double, std::milli>(clock::now() - phase_start).count();
    }
    auto t_done = clock::now();

    RunResult out;
    out.result_path = manifest.out_dir + "/result.png";
    save_png(out.result_path, result);
    if (manifest.save_intermediates) {
        intermediates.write_all();
    }

    nlohmann::json record;
    record["tool"] = "texrect";
    record["version"] = kVersion;
    record["backend"] = {{"id", info.id},
                         {"image", {info.image_h, info.image_w}},
                         {"latent", {info.latent_h, info.latent_w, info.latent_channels}},
                         {"num_sites", info.num_sites}};
    record["config"] = config_map(manifest);
    record["timings_ms"] = {
        {"prep", std::chrono::duration<double, std::milli>(t_prep - t_start).count()},
        {"pipeline", std::chrono::duration<double, std::milli>(t_done - t_prep).count()},
        {"total", std::chrono::duration<double, std::milli>(t_done - t_start).count()}};
    for (const auto& [name, ms] : phase_ms) {
        record["timings_ms"][name] = ms;
    }
    record["outputs"] = {{"result", "result.png"}};
    out.record_path = manifest.out_dir + "/run_record.json";
    std::ofstream rec(out.record_path);
    require(rec.good(), "cannot write run record to " + out.record_path);
    rec << record.dump(2) << "\n";
    return out;
}

struct SweepCell {
    int v1 = 0;
    int v2 = 0;
    std::string label;
    bool ok = false;
    std::string error;
    std::string dir;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::string sheet_path;
    bool all_ok = true;
};

// Run every grid cell (sequentially unless jobs > 1), then assemble the
// labeled contact sheet; failed cells are reported and marked, not fatal.
inline SweepResult execute_sweep(const RunManifest& base, const SweepSpec& spec, int jobs = 1) {
    SweepResult result;
    for (int v1 : spec.first) {
        for (int v2 : spec.second) {
            SweepCell cell;
            cell.v1 = v1;
            cell.v2 = v2;
            cell.label = std::string(1, spec.axis) + "1_" + std::to_string(v1) + "_" +
                         std::string(1, spec.axis) + "2_" + std::to_string(v2);
            cell.dir = base.out_dir + "/cells/" + cell.label;
            result.cells.push_back(cell);
        }
    }

    std::mutex mu;
    size_t next = 0;
    auto worker = [&]() {
        for (;;) {
            size_t idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= result.cells.size()) {
                    return;
                }
                idx = next++;
            }
            SweepCell& cell = result.cells[idx];
            RunManifest m = base;
            m.out_dir = cell.dir;
            m.save_intermediates = false;
            if (spec.axis == 'P') {
                m.cfg.p1 = cell.v1;
                m.cfg.p2 = cell.v2;
            } else {
                m.cfg.s1 = cell.v1;
                m.cfg.s2 = cell.v2;
            }
            try {
                execute_run(m);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
        }
    };

    int n_threads = std::max(1, jobs);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
        for (std::thread& th : pool) {
            th.join();
        }
    }

    std::map<std::pair<int, int>, std::optional<PixelImage>> images;
    int cell_size = 0;
    for (const SweepCell& cell : result.cells) {
        if (cell.ok) {
            PixelImage img = load_png(cell.dir + "/result.png");
            cell_size = img.h;
            images[{cell.v1, cell.v2}] = std::move(img);
        } else {
            images[{cell.v1, cell.v2}] = std::nullopt;
            result.all_ok = false;
        }
    }
    if (cell_size == 0) {
        cell_size = 64;
    }
    std::filesystem::create_directories(base.out_dir);
    PixelImage sheet = assemble_contact_sheet(spec, cell_size, images);
    result.sheet_path = base.out_dir + "/sweep_sheet.png";
    save_png(result.sheet_path, sheet);
    return result;
}

}  // namespace texrect
