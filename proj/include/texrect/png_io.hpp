#pragma once

#include "texrect/image.hpp"

#include <png.h>

#include <cstring>
#include <string>
#include <vector>

namespace texrect {

// 8-bit RGB PNG in/out via libpng's simplified API. Gray, palette and alpha
// inputs are converted to RGB on read; alpha is composited over black.

inline PixelImage load_png(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        fail("failed to read PNG '" + path + "': " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<uint8_t> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail("failed to decode PNG '" + path + "': " + msg);
    }
    PixelImage img(static_cast<int>(png.height), static_cast<int>(png.width));
    for (size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = buf[i] / 255.0f;
    }
    return img;
}

inline MaskImage load_mask_png(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        fail("failed to read mask PNG '" + path + "': " + png.message);
    }
    png.format = PNG_FORMAT_GRAY;
    MaskImage mask(static_cast<int>(png.height), static_cast<int>(png.width));
    if (!png_image_finish_read(&png, nullptr, mask.data.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail("failed to decode mask PNG '" + path + "': " + msg);
    }
    return mask;
}

inline void save_png(const std::string& path, const PixelImage& img) {
    require(img.h > 0 && img.w > 0, "save_png: empty image");
    std::vector<uint8_t> buf(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = clamp01(img.data[i]);
        buf[i] = static_cast<uint8_t>(v * 255.0f + 0.5f);
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.w);
    png.height = static_cast<png_uint_32>(img.h);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr)) {
        fail("failed to write PNG '" + path + "': " + std::string(png.message));
    }
}

inline void save_mask_png(const std::string& path, const MaskImage& mask) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(mask.w);
    png.height = static_cast<png_uint_32>(mask.h);
    png.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, mask.data.data(), 0, nullptr)) {
        fail("failed to write mask PNG '" + path + "': " + std::string(png.message));
    }
}

}  // namespace texrect
