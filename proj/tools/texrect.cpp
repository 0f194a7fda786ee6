#include "texrect/texrect.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace texrect;

int main(int argc, char** argv) {
    CLI::App app{"texrect — exemplar-based texture rectification with a pre-trained latent "
                 "diffusion backbone"};

    std::string config_path, reference, target, mask, mode, sites, aug, ir_eval, sweep_spec;
    std::string out_dir, backend, endpoint, spill_dir;
    int p1 = -1, p2 = -1, s1 = -1, s2 = -1, steps = -1, offset = 0, jobs = 1;
    int shuffle_block = -1, latent_block = -1, cache_budget_mb = -1;
    long long seed = -1;
    double noise_amplitude = -1.0;
    bool save_intermediates = false;

    app.add_option("--config", config_path,
                   "flat key=value config file, or a previous run_record.json");
    app.add_option("--reference", reference, "reference texture PNG");
    app.add_option("--target", target, "crude target PNG (layout image in guided mode)");
    app.add_option("--mask", mask, "1-channel placement mask PNG, 255 = user-placed");
    app.add_option("--mode", mode,
                   "nonstationary | patch-shuffle | latent-shuffle | guided | image-edit");
    app.add_option("--p1", p1, "structure-injection bound, round 1");
    app.add_option("--p2", p2, "structure-injection bound, round 2");
    app.add_option("--s1", s1, "plain-sampling prefix, round 1");
    app.add_option("--s2", s2, "plain-sampling prefix, round 2");
    app.add_option("--steps", steps, "DDIM steps T");
    app.add_option("--sites", sites, "active self-attention sites, e.g. 10,11,12,13,14,15");
    app.add_option("--aug", aug, "reference augmentations, e.g. rot45,rot-45,rot90");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--save-intermediates", save_intermediates,
                 "write decoded latents every 10th step of each phase");
    app.add_option("--ir-eval", ir_eval, "literal | native-cache");
    auto* offset_opt = app.add_option(
        "--offset", offset, "replace the reverse inversion map t->T-t with t->t+offset");
    app.add_option("--sweep", sweep_spec, "ablation grid, e.g. S:50,20,10,0x10,5 or P:0,10x0,5");
    app.add_option("--jobs", jobs, "parallel sweep cells (default 1)");
    app.add_option("--backend", backend, "stub | remote");
    app.add_option("--endpoint", endpoint, "remote backend URL (or set TEXRECT_ENDPOINT)");
    app.add_option("--shuffle-block", shuffle_block, "patch-shuffle block size, pixels");
    app.add_option("--latent-block", latent_block, "latent-shuffle block size, cells");
    app.add_option("--noise-amplitude", noise_amplitude, "guided-mode noise amplitude");
    app.add_option("--spill-dir", spill_dir, "KV cache offload directory");
    app.add_option("--cache-budget-mb", cache_budget_mb, "resident KV cache budget");

    CLI11_PARSE(app, argc, argv);

    try {
        RunManifest manifest;
        if (!config_path.empty()) {
            load_config_file(manifest, config_path);
        }
        auto set = [&manifest](const std::string& key, const std::string& value) {
            apply_config_key(manifest, key, value);
        };
        if (!reference.empty()) set("reference", reference);
        if (!target.empty()) set("target", target);
        if (!mask.empty()) set("mask", mask);
        if (!mode.empty()) set("mode", mode);
        if (p1 >= 0) set("p1", std::to_string(p1));
        if (p2 >= 0) set("p2", std::to_string(p2));
        if (s1 >= 0) set("s1", std::to_string(s1));
        if (s2 >= 0) set("s2", std::to_string(s2));
        if (steps >= 0) set("steps", std::to_string(steps));
        if (!sites.empty()) set("sites", sites);
        if (!aug.empty()) set("aug", aug);
        if (seed >= 0) set("seed", std::to_string(seed));
        if (!out_dir.empty()) set("out", out_dir);
        if (save_intermediates) set("save_intermediates", "1");
        if (!ir_eval.empty()) set("ir_eval", ir_eval);
        if (offset_opt->count() > 0) set("offset", std::to_string(offset));
        if (!backend.empty()) set("backend", backend);
        if (!endpoint.empty()) set("endpoint", endpoint);
        if (shuffle_block >= 0) set("shuffle_block", std::to_string(shuffle_block));
        if (latent_block >= 0) set("latent_block", std::to_string(latent_block));
        if (noise_amplitude >= 0) set("noise_amplitude", std::to_string(noise_amplitude));
        if (!spill_dir.empty()) set("spill_dir", spill_dir);
        if (cache_budget_mb >= 0) set("cache_budget_mb", std::to_string(cache_budget_mb));

        if (!sweep_spec.empty()) {
            SweepSpec spec = parse_sweep_spec(sweep_spec);
            SweepResult res = execute_sweep(manifest, spec, jobs);
            for (const SweepCell& cell : res.cells) {
                if (cell.ok) {
                    std::cout << cell.label << ": ok (" << cell.dir << "/result.png)\n";
                } else {
                    std::cerr << cell.label << ": FAILED — " << cell.error << "\n";
                }
            }
            std::cout << "contact sheet: " << res.sheet_path << "\n";
            return res.all_ok ? 0 : 1;
        }

        RunResult res = execute_run(manifest);
        std::cout << "result: " << res.result_path << "\n";
        std::cout << "run record: " << res.record_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
