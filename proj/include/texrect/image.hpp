#pragma once

#include "texrect/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace texrect {

constexpr int kLatentDownsample = 8;

// H×W×3 color image, values in [0,1], interleaved RGB rows.
struct PixelImage {
    int h = 0;
    int w = 0;
    std::vector<float> data;  // h*w*3

    PixelImage() = default;
    PixelImage(int height, int width, float fill = 0.0f)
        : h(height), w(width), data(static_cast<size_t>(height) * width * 3, fill) {}

    float& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    float at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    bool same_shape(const PixelImage& o) const { return h == o.h && w == o.w; }
};

// (H/8)×(W/8)×C latent code, channel-interleaved.
struct LatentImage {
    int h = 0;
    int w = 0;
    int channels = 0;
    std::vector<float> data;  // h*w*channels

    LatentImage() = default;
    LatentImage(int height, int width, int chans, float fill = 0.0f)
        : h(height), w(width), channels(chans),
          data(static_cast<size_t>(height) * width * chans, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * w + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * w + x) * channels + c];
    }

    bool same_shape(const LatentImage& o) const {
        return h == o.h && w == o.w && channels == o.channels;
    }
};

// 1-channel placement mask, 255 = user-placed.
struct MaskImage {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> data;

    MaskImage() = default;
    MaskImage(int height, int width, uint8_t fill = 0)
        : h(height), w(width), data(static_cast<size_t>(height) * width, fill) {}

    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }
    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }

    bool placed(int y, int x) const { return at(y, x) >= 128; }
};

inline bool all_finite(const std::vector<float>& v) {
    for (float x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

inline void check_pixel_dims(const PixelImage& img, const std::string& what) {
    require(img.h > 0 && img.w > 0, what + ": empty image");
    require(img.h % kLatentDownsample == 0 && img.w % kLatentDownsample == 0,
            what + ": dims " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                " not multiples of " + std::to_string(kLatentDownsample));
}

// Bilinear sample with edge clamping; (y, x) in pixel coordinates.
inline void bilinear_rgb(const PixelImage& img, float y, float x, float out[3]) {
    float yc = std::min(std::max(y, 0.0f), static_cast<float>(img.h - 1));
    float xc = std::min(std::max(x, 0.0f), static_cast<float>(img.w - 1));
    int y0 = static_cast<int>(yc);
    int x0 = static_cast<int>(xc);
    int y1 = std::min(y0 + 1, img.h - 1);
    int x1 = std::min(x0 + 1, img.w - 1);
    float fy = yc - y0;
    float fx = xc - x0;
    for (int c = 0; c < 3; ++c) {
        float top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
        float bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
        out[c] = top * (1 - fy) + bot * fy;
    }
}

inline PixelImage resize_bilinear(const PixelImage& img, int out_h, int out_w) {
    require(out_h > 0 && out_w > 0, "resize: bad output dims");
    if (img.h == out_h && img.w == out_w) {
        return img;
    }
    PixelImage out(out_h, out_w);
    float sy = static_cast<float>(img.h) / out_h;
    float sx = static_cast<float>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            float rgb[3];
            bilinear_rgb(img, (y + 0.5f) * sy - 0.5f, (x + 0.5f) * sx - 0.5f, rgb);
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = rgb[c];
            }
        }
    }
    return out;
}

inline MaskImage resize_nearest(const MaskImage& m, int out_h, int out_w) {
    if (m.h == out_h && m.w == out_w) {
        return m;
    }
    MaskImage out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            int sy = std::min(m.h - 1, y * m.h / out_h);
            int sx = std::min(m.w - 1, x * m.w / out_w);
            out.at(y, x) = m.at(sy, sx);
        }
    }
    return out;
}

inline PixelImage flip_horizontal(const PixelImage& img) {
    PixelImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
            }
        }
    }
    return out;
}

inline PixelImage flip_vertical(const PixelImage& img) {
    PixelImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(img.h - 1 - y, x, c);
            }
        }
    }
    return out;
}

// Exact 90° counter-clockwise rotation; square images only.
inline PixelImage rotate90(const PixelImage& img) {
    require(img.h == img.w, "rotate90: image must be square");
    PixelImage out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(img.w - 1 - x, y, c) = img.at(y, x, c);
            }
        }
    }
    return out;
}

// Rotate by arbitrary angle (degrees, CCW) about the center, bilinear, then
// center-crop the largest axis-aligned square fully covered by source content
// and resize back to the input size. Square images only.
inline PixelImage rotate_crop_resize(const PixelImage& img, float degrees) {
    require(img.h == img.w, "rotate: image must be square");
    int s = img.h;
    double rad = degrees * 3.14159265358979323846 / 180.0;
    double cs = std::cos(rad);
    double sn = std::sin(rad);

    PixelImage rotated(s, s);
    double cy = (s - 1) / 2.0;
    double cx = (s - 1) / 2.0;
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            // inverse map into the source
            double dy = y - cy;
            double dx = x - cx;
            double srcy = cs * dy + sn * dx + cy;
            double srcx = -sn * dy + cs * dx + cx;
            float rgb[3];
            bilinear_rgb(img, static_cast<float>(srcy), static_cast<float>(srcx), rgb);
            for (int c = 0; c < 3; ++c) {
                rotated.at(y, x, c) = rgb[c];
            }
        }
    }

    int valid = static_cast<int>(std::floor(s / (std::abs(cs) + std::abs(sn))));
    valid = std::max(1, std::min(s, valid));
    int off = (s - valid) / 2;
    PixelImage crop(valid, valid);
    for (int y = 0; y < valid; ++y) {
        for (int x = 0; x < valid; ++x) {
            for (int c = 0; c < 3; ++c) {
                crop.at(y, x, c) = rotated.at(y + off, x + off, c);
            }
        }
    }
    return resize_bilinear(crop, s, s);
}

inline double mse(const PixelImage& a, const PixelImage& b) {
    require(a.same_shape(b), "mse: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

// Peak signal-to-noise ratio in dB for [0,1] images.
inline double psnr(const PixelImage& a, const PixelImage& b) {
    double m = mse(a, b);
    if (m <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / m);
}

}  // namespace texrect
