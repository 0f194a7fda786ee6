#pragma once

#include "texrect/backend.hpp"
#include "texrect/schedule.hpp"

#include <cmath>

namespace texrect {

struct StubConfig {
    int image_size = 64;  // latent is image_size/8
    int num_sites = 2;
    int heads = 2;
    int width = 16;  // token feature width; per-head dim = width/heads
    uint64_t seed = 0x7e05eed;
};

// Tiny randomly-initialized backbone with real self-attention internals, so
// the tap/inject mechanics run without model weights. The codec keeps
// low-frequency content (block means in, bilinear up out); the predictor is a
// stack of attention sites over latent tokens with a bounded output head,
// which keeps DDIM trajectories stable.
class StubBackend : public NoiseBackend {
public:
    explicit StubBackend(StubConfig cfg = {}) : cfg_(cfg) {
        require(cfg_.image_size > 0 && cfg_.image_size % kLatentDownsample == 0,
                "stub backend: image size must be a positive multiple of 8");
        require(cfg_.width % cfg_.heads == 0, "stub backend: width not divisible by heads");
        info_.id = "stub";
        info_.image_h = info_.image_w = cfg_.image_size;
        info_.latent_h = info_.latent_w = cfg_.image_size / kLatentDownsample;
        info_.latent_channels = 4;
        info_.num_sites = cfg_.num_sites;
        info_.feature_width = cfg_.width;
        info_.heads = cfg_.heads;
        info_.native_alpha_bar = scaled_linear_alpha_bar();
        init_weights();
    }

    const BackendInfo& info() const override { return info_; }

    LatentImage encode(const PixelImage& img) override {
        require(img.h == info_.image_h && img.w == info_.image_w,
                "encode: dimension mismatch, expected " + std::to_string(info_.image_h) + "x" +
                    std::to_string(info_.image_w) + ", got " + std::to_string(img.h) + "x" +
                    std::to_string(img.w));
        require(all_finite(img.data), "encode: non-finite pixel values");
        const int f = kLatentDownsample;
        LatentImage z(info_.latent_h, info_.latent_w, 4);
        for (int ly = 0; ly < z.h; ++ly) {
            for (int lx = 0; lx < z.w; ++lx) {
                float mean[3] = {0, 0, 0};
                float lum_sq = 0.0f;
                float lum_mean = 0.0f;
                for (int dy = 0; dy < f; ++dy) {
                    for (int dx = 0; dx < f; ++dx) {
                        float lum = 0.0f;
                        for (int c = 0; c < 3; ++c) {
                            float v = img.at(ly * f + dy, lx * f + dx, c);
                            mean[c] += v;
                            lum += v;
                        }
                        lum /= 3.0f;
                        lum_mean += lum;
                        lum_sq += lum * lum;
                    }
                }
                const float n = static_cast<float>(f * f);
                for (int c = 0; c < 3; ++c) {
                    z.at(ly, lx, c) = mean[c] / n * 2.0f - 1.0f;
                }
                lum_mean /= n;
                float var = std::max(0.0f, lum_sq / n - lum_mean * lum_mean);
                z.at(ly, lx, 3) = std::min(1.0f, std::sqrt(var) * 4.0f) * 2.0f - 1.0f;
            }
        }
        return z;
    }

    PixelImage decode(const LatentImage& z) override {
        check_latent_shape(info_, z, "decode");
        require(all_finite(z.data), "decode: non-finite latent values");
        const int f = kLatentDownsample;
        PixelImage img(info_.image_h, info_.image_w);
        for (int y = 0; y < img.h; ++y) {
            for (int x = 0; x < img.w; ++x) {
                // center-aligned bilinear over the latent grid
                float ly = (y + 0.5f) / f - 0.5f;
                float lx = (x + 0.5f) / f - 0.5f;
                int y0 = static_cast<int>(std::floor(ly));
                int x0 = static_cast<int>(std::floor(lx));
                float fy = ly - y0;
                float fx = lx - x0;
                int y0c = std::clamp(y0, 0, z.h - 1);
                int y1c = std::clamp(y0 + 1, 0, z.h - 1);
                int x0c = std::clamp(x0, 0, z.w - 1);
                int x1c = std::clamp(x0 + 1, 0, z.w - 1);
                for (int c = 0; c < 3; ++c) {
                    float top = z.at(y0c, x0c, c) * (1 - fx) + z.at(y0c, x1c, c) * fx;
                    float bot = z.at(y1c, x0c, c) * (1 - fx) + z.at(y1c, x1c, c) * fx;
                    float v = top * (1 - fy) + bot * fy;
                    img.at(y, x, c) = clamp01((v + 1.0f) * 0.5f);
                }
            }
        }
        return img;
    }

    NoisePrediction predict_noise(const LatentImage& z, int native_t,
                                  std::span<const TapDirective> directives) override {
        check_latent_shape(info_, z, "predict_noise");
        require(native_t >= 0 && native_t < static_cast<int>(info_.native_alpha_bar.size()),
                "predict_noise: native timestep " + std::to_string(native_t) +
                    " outside the training schedule");
        validate_directives(info_, directives);

        const int tokens = info_.latent_h * info_.latent_w;
        const int d = cfg_.width;

        // token features: channel lift + positional and timestep embeddings
        FeatureMatrix x(tokens, d);
        for (int i = 0; i < tokens; ++i) {
            float* xi = x.row(i);
            for (int j = 0; j < d; ++j) {
                float acc = pos_emb_.at(i, j) + time_emb(native_t, j);
                for (int c = 0; c < 4; ++c) {
                    acc += z.data[static_cast<size_t>(i) * 4 + c] * w_in_.at(c, j);
                }
                xi[j] = acc;
            }
        }

        NoisePrediction out;
        for (int site = 0; site < cfg_.num_sites; ++site) {
            const SiteWeights& sw = sites_[static_cast<size_t>(site)];
            FeatureMatrix q = matmul(x, sw.wq);
            KVRecord native;
            native.heads = cfg_.heads;
            native.keys = matmul(x, sw.wk);
            native.values = matmul(x, sw.wv);

            const TapDirective* dir = find_directive(directives, site);
            const KVRecord* kv = &native;
            if (dir != nullptr && dir->action == TapAction::inject) {
                kv = &*dir->injected_kv;
            }
            FeatureMatrix attn = attend_heads(q, *kv);
            for (size_t idx = 0; idx < x.data.size(); ++idx) {
                x.data[idx] += attn.data[idx];
            }
            if (dir != nullptr && dir->action == TapAction::record) {
                out.captured.emplace(site, std::move(native));
            }
        }

        out.epsilon = LatentImage(z.h, z.w, 4);
        for (int i = 0; i < tokens; ++i) {
            const float* xi = x.row(i);
            for (int c = 0; c < 4; ++c) {
                float acc = 0.0f;
                for (int j = 0; j < d; ++j) {
                    acc += xi[j] * w_out_.at(j, c);
                }
                out.epsilon.data[static_cast<size_t>(i) * 4 + c] = std::tanh(acc) * kEpsGain;
            }
        }
        return out;
    }

private:
    static constexpr float kEpsGain = 0.45f;

    struct SiteWeights {
        FeatureMatrix wq, wk, wv;
    };

    static const TapDirective* find_directive(std::span<const TapDirective> directives,
                                              int site) {
        for (const TapDirective& d : directives) {
            if (d.site == site) {
                return &d;
            }
        }
        return nullptr;
    }

    // Per-head attention over column blocks; identical code path whether the
    // KV is native or injected, so self-injection reproduces passthrough
    // bit-for-bit.
    FeatureMatrix attend_heads(const FeatureMatrix& q, const KVRecord& kv) const {
        const int hd = cfg_.width / cfg_.heads;
        FeatureMatrix out(q.rows, q.cols);
        for (int h = 0; h < cfg_.heads; ++h) {
            FeatureMatrix qh = col_slice(q, h * hd, hd);
            FeatureMatrix kh = col_slice(kv.keys, h * hd, hd);
            FeatureMatrix vh = col_slice(kv.values, h * hd, hd);
            FeatureMatrix oh = attend(qh, kh, vh);
            for (int i = 0; i < out.rows; ++i) {
                std::copy(oh.row(i), oh.row(i) + hd, out.row(i) + h * hd);
            }
        }
        return out;
    }

    static FeatureMatrix col_slice(const FeatureMatrix& m, int c0, int n) {
        FeatureMatrix out(m.rows, n);
        for (int i = 0; i < m.rows; ++i) {
            std::copy(m.row(i) + c0, m.row(i) + c0 + n, out.row(i));
        }
        return out;
    }

    static FeatureMatrix matmul(const FeatureMatrix& a, const FeatureMatrix& b) {
        FeatureMatrix out(a.rows, b.cols);
        for (int i = 0; i < a.rows; ++i) {
            const float* ai = a.row(i);
            float* oi = out.row(i);
            for (int k = 0; k < a.cols; ++k) {
                float av = ai[k];
                const float* bk = b.row(k);
                for (int j = 0; j < b.cols; ++j) {
                    oi[j] += av * bk[j];
                }
            }
        }
        return out;
    }

    float time_emb(int t, int j) const {
        float freq = std::pow(10000.0f, -static_cast<float>(j / 2 * 2) / cfg_.width);
        float arg = static_cast<float>(t) * freq;
        return 0.25f * ((j % 2 == 0) ? std::sin(arg) : std::cos(arg));
    }

    void init_weights() {
        Rng rng(cfg_.seed);
        auto fill = [&rng](FeatureMatrix& m, float scale) {
            for (float& v : m.data) {
                v = static_cast<float>(rng.uniform(-scale, scale));
            }
        };
        float scale = 1.0f / std::sqrt(static_cast<float>(cfg_.width));
        w_in_ = FeatureMatrix(4, cfg_.width);
        fill(w_in_, 0.5f);
        w_out_ = FeatureMatrix(cfg_.width, 4);
        fill(w_out_, scale);
        sites_.resize(static_cast<size_t>(cfg_.num_sites));
        for (SiteWeights& sw : sites_) {
            sw.wq = FeatureMatrix(cfg_.width, cfg_.width);
            sw.wk = FeatureMatrix(cfg_.width, cfg_.width);
            sw.wv = FeatureMatrix(cfg_.width, cfg_.width);
            fill(sw.wq, scale);
            fill(sw.wk, scale);
            fill(sw.wv, scale);
        }
        int tokens = info_.latent_h * info_.latent_w;
        pos_emb_ = FeatureMatrix(tokens, cfg_.width);
        for (int i = 0; i < tokens; ++i) {
            int y = i / info_.latent_w;
            int x = i % info_.latent_w;
            for (int j = 0; j < cfg_.width; ++j) {
                float fy = std::sin(0.7f * y * (j + 1));
                float fx = std::cos(0.9f * x * (j + 2));
                pos_emb_.at(i, j) = 0.2f * (fy + fx);
            }
        }
    }

    StubConfig cfg_;
    BackendInfo info_;
    FeatureMatrix w_in_, w_out_, pos_emb_;
    std::vector<SiteWeights> sites_;
};

}  // namespace texrect
