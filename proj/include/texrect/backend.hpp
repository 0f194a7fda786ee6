#pragma once

#include "texrect/attention.hpp"
#include "texrect/image.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace texrect {

// One self-attention layer, identified by its 0-based index in network depth
// order.
using AttentionSite = int;

enum class TapAction { record, inject, passthrough };

struct TapDirective {
    AttentionSite site = 0;
    TapAction action = TapAction::passthrough;
    std::optional<KVRecord> injected_kv;  // present iff action == inject
};

inline TapDirective record_at(AttentionSite site) {
    return TapDirective{site, TapAction::record, std::nullopt};
}

inline TapDirective inject_at(AttentionSite site, KVRecord kv) {
    return TapDirective{site, TapAction::inject, std::move(kv)};
}

struct NoisePrediction {
    LatentImage epsilon;
    std::map<AttentionSite, KVRecord> captured;  // exactly the record sites
};

struct BackendInfo {
    std::string id;
    int image_h = 0;
    int image_w = 0;
    int latent_h = 0;
    int latent_w = 0;
    int latent_channels = 0;
    int num_sites = 0;
    int feature_width = 0;  // key/value width at every site
    int heads = 1;
    std::vector<double> native_alpha_bar;
};

// Adapter over a pre-trained latent diffusion backbone: image<->latent codecs
// plus a noise predictor whose self-attention sites can be tapped (record) or
// overridden (inject). Conditioning is the empty-prompt unconditional
// embedding, no classifier-free guidance. One prediction in flight per
// instance; captured KV is immutable once returned.
class NoiseBackend {
public:
    virtual ~NoiseBackend() = default;

    virtual const BackendInfo& info() const = 0;
    virtual LatentImage encode(const PixelImage& img) = 0;
    virtual PixelImage decode(const LatentImage& z) = 0;
    virtual NoisePrediction predict_noise(const LatentImage& z, int native_t,
                                          std::span<const TapDirective> directives) = 0;
};

using BackendFactory = std::function<std::unique_ptr<NoiseBackend>()>;

inline void validate_directives(const BackendInfo& info,
                                std::span<const TapDirective> directives) {
    std::vector<bool> seen(static_cast<size_t>(info.num_sites), false);
    for (const TapDirective& d : directives) {
        require(d.site >= 0 && d.site < info.num_sites,
                "directive: site " + std::to_string(d.site) + " outside [0," +
                    std::to_string(info.num_sites) + ")");
        require(!seen[static_cast<size_t>(d.site)],
                "directive: duplicate directives for site " + std::to_string(d.site));
        seen[static_cast<size_t>(d.site)] = true;
        if (d.action == TapAction::inject) {
            require(d.injected_kv.has_value(),
                    "directive: inject at site " + std::to_string(d.site) + " without KV");
            check_kv(*d.injected_kv, "directive (site " + std::to_string(d.site) + ")");
            require(d.injected_kv->keys.cols == info.feature_width,
                    "directive: injected KV width " + std::to_string(d.injected_kv->keys.cols) +
                        " != site width " + std::to_string(info.feature_width));
            require(d.injected_kv->heads == info.heads,
                    "directive: injected KV head count mismatch");
        } else {
            require(!d.injected_kv.has_value(),
                    "directive: KV supplied for non-inject action at site " +
                        std::to_string(d.site));
        }
    }
}

inline void check_latent_shape(const BackendInfo& info, const LatentImage& z,
                               const std::string& what) {
    require(z.h == info.latent_h && z.w == info.latent_w && z.channels == info.latent_channels,
            what + ": latent shape " + std::to_string(z.h) + "x" + std::to_string(z.w) + "x" +
                std::to_string(z.channels) + " does not match backend " +
                std::to_string(info.latent_h) + "x" + std::to_string(info.latent_w) + "x" +
                std::to_string(info.latent_channels));
}

}  // namespace texrect
