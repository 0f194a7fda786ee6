#pragma once

#include "texrect/backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstring>
#include <mutex>
#include <string>
#include <vector>

namespace texrect {

// Wire protocol for serving a backbone out of process (e.g. real latent
// diffusion weights behind a Python inference stack):
//   GET  /v1/info           -> JSON BackendInfo
//   POST /v1/encode         -> frame{json:{h,w},            f32 image}  => frame{json:{h,w,c},    f32 latent}
//   POST /v1/decode         -> frame{json:{h,w,c},          f32 latent} => frame{json:{h,w},      f32 image}
//   POST /v1/predict_noise  -> frame{json:{t,z,directives}, f32 z ++ injected K,V per directive}
//                           => frame{json:{captured},       f32 eps ++ captured K,V in listed order}
// A frame is [u32 LE json length][json][f32 LE payload]; floats are
// little-endian host order on both ends.

namespace wire {

inline std::string pack_frame(const nlohmann::json& header,
                              const std::vector<const std::vector<float>*>& payloads) {
    std::string js = header.dump();
    uint32_t len = static_cast<uint32_t>(js.size());
    size_t total = 4 + js.size();
    for (const auto* p : payloads) {
        total += p->size() * sizeof(float);
    }
    std::string body;
    body.reserve(total);
    char lenbuf[4];
    std::memcpy(lenbuf, &len, 4);
    body.append(lenbuf, 4);
    body.append(js);
    for (const auto* p : payloads) {
        body.append(reinterpret_cast<const char*>(p->data()), p->size() * sizeof(float));
    }
    return body;
}

struct Frame {
    nlohmann::json header;
    const char* payload = nullptr;
    size_t payload_floats = 0;
};

inline Frame parse_frame(const std::string& body) {
    require(body.size() >= 4, "wire: truncated frame");
    uint32_t len = 0;
    std::memcpy(&len, body.data(), 4);
    require(body.size() >= 4 + static_cast<size_t>(len), "wire: truncated frame header");
    Frame f;
    f.header = nlohmann::json::parse(body.substr(4, len));
    size_t rest = body.size() - 4 - len;
    require(rest % sizeof(float) == 0, "wire: payload not float-aligned");
    f.payload = body.data() + 4 + len;
    f.payload_floats = rest / sizeof(float);
    return f;
}

// Sequential reader over a frame's float payload.
struct PayloadReader {
    const char* at;
    size_t remaining;

    explicit PayloadReader(const Frame& f) : at(f.payload), remaining(f.payload_floats) {}

    void read(std::vector<float>& out) {
        require(out.size() <= remaining, "wire: payload underrun");
        std::memcpy(out.data(), at, out.size() * sizeof(float));
        at += out.size() * sizeof(float);
        remaining -= out.size();
    }

    void done() const { require(remaining == 0, "wire: trailing payload bytes"); }
};

}  // namespace wire

// Client adapter speaking the wire protocol; lets the pipeline drive a real
// backbone served elsewhere while all orchestration stays local.
class RemoteBackend : public NoiseBackend {
public:
    explicit RemoteBackend(const std::string& endpoint) : client_(endpoint.c_str()) {
        client_.set_connection_timeout(10);
        client_.set_read_timeout(600);
        client_.set_write_timeout(600);
        auto res = client_.Get("/v1/info");
        require(res && res->status == 200,
                "remote backend: cannot fetch /v1/info from " + endpoint +
                    (res ? " (status " + std::to_string(res->status) + ")" : " (no response)"));
        nlohmann::json j = nlohmann::json::parse(res->body);
        info_.id = j.at("id").get<std::string>();
        info_.image_h = j.at("image_h").get<int>();
        info_.image_w = j.at("image_w").get<int>();
        info_.latent_h = j.at("latent_h").get<int>();
        info_.latent_w = j.at("latent_w").get<int>();
        info_.latent_channels = j.at("latent_channels").get<int>();
        info_.num_sites = j.at("num_sites").get<int>();
        info_.feature_width = j.at("feature_width").get<int>();
        info_.heads = j.at("heads").get<int>();
        info_.native_alpha_bar = j.at("native_alpha_bar").get<std::vector<double>>();
    }

    const BackendInfo& info() const override { return info_; }

    LatentImage encode(const PixelImage& img) override {
        nlohmann::json hdr = {{"h", img.h}, {"w", img.w}};
        std::string reply = post("/v1/encode", wire::pack_frame(hdr, {&img.data}));
        wire::Frame f = wire::parse_frame(reply);
        LatentImage z(f.header.at("h").get<int>(), f.header.at("w").get<int>(),
                      f.header.at("c").get<int>());
        wire::PayloadReader r(f);
        r.read(z.data);
        r.done();
        return z;
    }

    PixelImage decode(const LatentImage& z) override {
        nlohmann::json hdr = {{"h", z.h}, {"w", z.w}, {"c", z.channels}};
        std::string reply = post("/v1/decode", wire::pack_frame(hdr, {&z.data}));
        wire::Frame f = wire::parse_frame(reply);
        PixelImage img(f.header.at("h").get<int>(), f.header.at("w").get<int>());
        wire::PayloadReader r(f);
        r.read(img.data);
        r.done();
        return img;
    }

    NoisePrediction predict_noise(const LatentImage& z, int native_t,
                                  std::span<const TapDirective> directives) override {
        validate_directives(info_, directives);
        nlohmann::json jdirs = nlohmann::json::array();
        std::vector<const std::vector<float>*> payloads{&z.data};
        for (const TapDirective& d : directives) {
            nlohmann::json jd = {{"site", d.site}, {"action", action_name(d.action)}};
            if (d.action == TapAction::inject) {
                jd["rows"] = d.injected_kv->keys.rows;
                jd["width"] = d.injected_kv->keys.cols;
                jd["heads"] = d.injected_kv->heads;
                payloads.push_back(&d.injected_kv->keys.data);
                payloads.push_back(&d.injected_kv->values.data);
            }
            jdirs.push_back(jd);
        }
        nlohmann::json hdr = {{"t", native_t},
                              {"z", {{"h", z.h}, {"w", z.w}, {"c", z.channels}}},
                              {"directives", jdirs}};
        std::string reply = post("/v1/predict_noise", wire::pack_frame(hdr, payloads));
        wire::Frame f = wire::parse_frame(reply);

        NoisePrediction pred;
        pred.epsilon = LatentImage(z.h, z.w, z.channels);
        wire::PayloadReader r(f);
        r.read(pred.epsilon.data);
        for (const auto& jc : f.header.at("captured")) {
            KVRecord kv;
            int rows = jc.at("rows").get<int>();
            int width = jc.at("width").get<int>();
            kv.heads = jc.at("heads").get<int>();
            kv.keys = FeatureMatrix(rows, width);
            kv.values = FeatureMatrix(rows, width);
            r.read(kv.keys.data);
            r.read(kv.values.data);
            pred.captured.emplace(jc.at("site").get<int>(), std::move(kv));
        }
        r.done();
        return pred;
    }

private:
    static const char* action_name(TapAction a) {
        switch (a) {
            case TapAction::record: return "record";
            case TapAction::inject: return "inject";
            case TapAction::passthrough: return "passthrough";
        }
        return "?";
    }

    std::string post(const std::string& path, const std::string& body) {
        auto res = client_.Post(path.c_str(), body, "application/octet-stream");
        require(static_cast<bool>(res), "remote backend: no response from " + path);
        require(res->status == 200, "remote backend: " + path + " failed (status " +
                                        std::to_string(res->status) + "): " + res->body);
        return res->body;
    }

    httplib::Client client_;
    BackendInfo info_;
};

// Expose any local backend over the wire protocol. Predictions are serialized
// with a mutex: one in-flight call per backend instance.
inline void serve_backend(NoiseBackend& backend, httplib::Server& server) {
    static_assert(sizeof(float) == 4);
    auto mutex = std::make_shared<std::mutex>();

    server.Get("/v1/info", [&backend](const httplib::Request&, httplib::Response& res) {
        const BackendInfo& info = backend.info();
        nlohmann::json j = {{"id", info.id},
                            {"image_h", info.image_h},
                            {"image_w", info.image_w},
                            {"latent_h", info.latent_h},
                            {"latent_w", info.latent_w},
                            {"latent_channels", info.latent_channels},
                            {"num_sites", info.num_sites},
                            {"feature_width", info.feature_width},
                            {"heads", info.heads},
                            {"native_alpha_bar", info.native_alpha_bar}};
        res.set_content(j.dump(), "application/json");
    });

    auto guard = [mutex](auto fn) {
        return [mutex, fn](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard<std::mutex> lock(*mutex);
            try {
                fn(req, res);
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(e.what(), "text/plain");
            }
        };
    };

    server.Post("/v1/encode", guard([&backend](const httplib::Request& req,
                                               httplib::Response& res) {
        wire::Frame f = wire::parse_frame(req.body);
        PixelImage img(f.header.at("h").get<int>(), f.header.at("w").get<int>());
        wire::PayloadReader r(f);
        r.read(img.data);
        r.done();
        LatentImage z = backend.encode(img);
        nlohmann::json hdr = {{"h", z.h}, {"w", z.w}, {"c", z.channels}};
        res.set_content(wire::pack_frame(hdr, {&z.data}), "application/octet-stream");
    }));

    server.Post("/v1/decode", guard([&backend](const httplib::Request& req,
                                               httplib::Response& res) {
        wire::Frame f = wire::parse_frame(req.body);
        LatentImage z(f.header.at("h").get<int>(), f.header.at("w").get<int>(),
                      f.header.at("c").get<int>());
        wire::PayloadReader r(f);
        r.read(z.data);
        r.done();
        PixelImage img = backend.decode(z);
        nlohmann::json hdr = {{"h", img.h}, {"w", img.w}};
        res.set_content(wire::pack_frame(hdr, {&img.data}), "application/octet-stream");
    }));

    server.Post("/v1/predict_noise", guard([&backend](const httplib::Request& req,
                                                      httplib::Response& res) {
        wire::Frame f = wire::parse_frame(req.body);
        const auto& jz = f.header.at("z");
        LatentImage z(jz.at("h").get<int>(), jz.at("w").get<int>(), jz.at("c").get<int>());
        wire::PayloadReader r(f);
        r.read(z.data);

        std::vector<TapDirective> dirs;
        for (const auto& jd : f.header.at("directives")) {
            std::string action = jd.at("action").get<std::string>();
            int site = jd.at("site").get<int>();
            if (action == "record") {
                dirs.push_back(record_at(site));
            } else if (action == "passthrough") {
                dirs.push_back(TapDirective{site, TapAction::passthrough, std::nullopt});
            } else if (action == "inject") {
                KVRecord kv;
                int rows = jd.at("rows").get<int>();
                int width = jd.at("width").get<int>();
                kv.heads = jd.at("heads").get<int>();
                kv.keys = FeatureMatrix(rows, width);
                kv.values = FeatureMatrix(rows, width);
                r.read(kv.keys.data);
                r.read(kv.values.data);
                dirs.push_back(inject_at(site, std::move(kv)));
            } else {
                fail("wire: unknown directive action '" + action + "'");
            }
        }
        r.done();

        NoisePrediction pred = backend.predict_noise(z, f.header.at("t").get<int>(), dirs);
        nlohmann::json jcap = nlohmann::json::array();
        std::vector<const std::vector<float>*> payloads{&pred.epsilon.data};
        for (const auto& [site, kv] : pred.captured) {
            jcap.push_back({{"site", site},
                            {"rows", kv.keys.rows},
                            {"width", kv.keys.cols},
                            {"heads", kv.heads}});
            payloads.push_back(&kv.keys.data);
            payloads.push_back(&kv.values.data);
        }
        nlohmann::json hdr = {{"captured", jcap}};
        res.set_content(wire::pack_frame(hdr, payloads), "application/octet-stream");
    }));
}

}  // namespace texrect
