#pragma once

#include "texrect/image.hpp"

#include <string>
#include <vector>

namespace texrect {

enum class Transform { hflip, vflip, rot90, rot45, rot_neg45 };

inline std::string transform_name(Transform t) {
    switch (t) {
        case Transform::hflip: return "hflip";
        case Transform::vflip: return "vflip";
        case Transform::rot90: return "rot90";
        case Transform::rot45: return "rot45";
        case Transform::rot_neg45: return "rot-45";
    }
    return "?";
}

inline Transform parse_transform(const std::string& name) {
    if (name == "hflip") return Transform::hflip;
    if (name == "vflip") return Transform::vflip;
    if (name == "rot90") return Transform::rot90;
    if (name == "rot45") return Transform::rot45;
    if (name == "rot-45") return Transform::rot_neg45;
    fail("unknown augmentation '" + name + "' (expected hflip,vflip,rot90,rot45,rot-45)");
}

struct AugmentationSet {
    std::vector<Transform> transforms;
};

struct ShuffleSpec {
    int block = 0;  // pixels in image space, cells in latent space
    uint64_t seed = 0;
};

// Fill every non-placed canvas pixel with a pixel drawn i.i.d. uniformly from
// the source texture; user-placed regions (mask >= 128) stay untouched.
inline PixelImage fill_background(const PixelImage& canvas, const MaskImage& placed,
                                  const PixelImage& source, uint64_t seed) {
    require(canvas.h == placed.h && canvas.w == placed.w,
            "fill_background: canvas/mask shape mismatch");
    require(source.h > 0 && source.w > 0, "fill_background: empty source");
    PixelImage out = canvas;
    Rng rng(seed);
    size_t n_src = static_cast<size_t>(source.h) * source.w;
    for (int y = 0; y < canvas.h; ++y) {
        for (int x = 0; x < canvas.w; ++x) {
            if (placed.placed(y, x)) {
                continue;
            }
            size_t s = rng.index(n_src);
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = source.data[s * 3 + c];
            }
        }
    }
    return out;
}

namespace detail {

// Uniform random permutation of non-overlapping blocks; works for any
// channel-interleaved raster.
inline void shuffle_blocks(int h, int w, int channels, const std::vector<float>& src,
                           std::vector<float>& dst, int block, uint64_t seed,
                           const std::string& what) {
    require(block > 0, what + ": block size must be positive");
    require(h % block == 0 && w % block == 0,
            what + ": block size " + std::to_string(block) + " does not divide " +
                std::to_string(h) + "x" + std::to_string(w));
    int by = h / block;
    int bx = w / block;
    std::vector<int> perm(static_cast<size_t>(by) * bx);
    for (size_t i = 0; i < perm.size(); ++i) {
        perm[i] = static_cast<int>(i);
    }
    Rng rng(seed);
    rng.shuffle(perm);

    auto copy_block = [&](int sb, int db) {
        int sy = (sb / bx) * block;
        int sx = (sb % bx) * block;
        int dy = (db / bx) * block;
        int dx = (db % bx) * block;
        for (int y = 0; y < block; ++y) {
            const float* srow = src.data() + ((static_cast<size_t>(sy + y) * w + sx) * channels);
            float* drow = dst.data() + ((static_cast<size_t>(dy + y) * w + dx) * channels);
            std::copy(srow, srow + static_cast<size_t>(block) * channels, drow);
        }
    };
    for (size_t i = 0; i < perm.size(); ++i) {
        copy_block(perm[i], static_cast<int>(i));
    }
}

}  // namespace detail

inline PixelImage patch_shuffle(const PixelImage& reference, const ShuffleSpec& spec) {
    PixelImage out(reference.h, reference.w);
    detail::shuffle_blocks(reference.h, reference.w, 3, reference.data, out.data, spec.block,
                           spec.seed, "patch_shuffle");
    return out;
}

inline LatentImage latent_shuffle(const LatentImage& z, const ShuffleSpec& spec) {
    LatentImage out(z.h, z.w, z.channels);
    detail::shuffle_blocks(z.h, z.w, z.channels, z.data, out.data, spec.block, spec.seed,
                           "latent_shuffle");
    return out;
}

// Transformed reference copies for KV augmentation. ±45° rotations are
// resampled, center-cropped to the largest valid interior square and resized
// back; flips and 90° are exact pixel permutations.
inline std::vector<PixelImage> build_augmentations(const PixelImage& reference,
                                                   const AugmentationSet& set) {
    std::vector<PixelImage> out;
    out.reserve(set.transforms.size());
    for (Transform t : set.transforms) {
        switch (t) {
            case Transform::hflip:
                out.push_back(flip_horizontal(reference));
                break;
            case Transform::vflip:
                out.push_back(flip_vertical(reference));
                break;
            case Transform::rot90:
                out.push_back(rotate90(reference));
                break;
            case Transform::rot45:
                out.push_back(rotate_crop_resize(reference, 45.0f));
                break;
            case Transform::rot_neg45:
                out.push_back(rotate_crop_resize(reference, -45.0f));
                break;
        }
    }
    return out;
}

// Per-pixel uniform noise on a guided color layout, clamped to [0,1]. Keeps
// the encoder from collapsing flat regions to over-smooth latents.
inline constexpr float kDefaultGuidedNoiseAmplitude = 0.1f;

inline PixelImage prepare_guided_layout(const PixelImage& layout, float noise_amplitude,
                                        uint64_t seed) {
    require(noise_amplitude >= 0.0f, "prepare_guided_layout: amplitude must be >= 0");
    if (noise_amplitude == 0.0f) {
        return layout;
    }
    PixelImage out = layout;
    Rng rng(seed);
    for (float& v : out.data) {
        v = clamp01(v + static_cast<float>(rng.uniform(-noise_amplitude, noise_amplitude)));
    }
    return out;
}

}  // namespace texrect
