#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "texrect/rectify.hpp"
#include "texrect/remote_backend.hpp"
#include "texrect/stub_backend.hpp"

#include "test_support.hpp"

#include <thread>

using namespace texrect;
using namespace texrect::testing;

namespace {

// Loopback fixture: the stub backbone served over the wire protocol.
struct Loopback {
    StubBackend local;
    httplib::Server server;
    int port = 0;
    std::thread thread;

    Loopback() {
        serve_backend(local, server);
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~Loopback() {
        server.stop();
        thread.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("remote info matches the served backend") {
    Loopback loop;
    RemoteBackend remote(loop.endpoint());
    const BackendInfo& a = remote.info();
    const BackendInfo& b = loop.local.info();
    CHECK(a.id == b.id);
    CHECK(a.image_h == b.image_h);
    CHECK(a.latent_h == b.latent_h);
    CHECK(a.latent_channels == b.latent_channels);
    CHECK(a.num_sites == b.num_sites);
    CHECK(a.feature_width == b.feature_width);
    CHECK(a.heads == b.heads);
    CHECK(a.native_alpha_bar == b.native_alpha_bar);
}

TEST_CASE("remote encode/decode are bit-identical to the local backend") {
    Loopback loop;
    RemoteBackend remote(loop.endpoint());
    PixelImage img = make_texture(64, 1);
    LatentImage z_remote = remote.encode(img);
    LatentImage z_local = loop.local.encode(img);
    CHECK(z_remote.data == z_local.data);
    PixelImage d_remote = remote.decode(z_remote);
    PixelImage d_local = loop.local.decode(z_local);
    CHECK(d_remote.data == d_local.data);
}

TEST_CASE("remote predict_noise round-trips directives, captures and epsilon") {
    Loopback loop;
    RemoteBackend remote(loop.endpoint());
    LatentImage z = loop.local.encode(make_texture(64, 2));

    std::vector<TapDirective> rec{record_at(0), record_at(1)};
    NoisePrediction remote_pred = remote.predict_noise(z, 500, rec);
    NoisePrediction local_pred = loop.local.predict_noise(z, 500, rec);
    CHECK(remote_pred.epsilon.data == local_pred.epsilon.data);
    REQUIRE(remote_pred.captured.size() == 2);
    CHECK(remote_pred.captured.at(0).keys.data == local_pred.captured.at(0).keys.data);
    CHECK(remote_pred.captured.at(1).values.data == local_pred.captured.at(1).values.data);
    CHECK(remote_pred.captured.at(0).heads == local_pred.captured.at(0).heads);

    // inject through the wire, compare against local injection
    std::vector<TapDirective> inj;
    inj.push_back(inject_at(0, local_pred.captured.at(0)));
    inj.push_back(TapDirective{1, TapAction::passthrough, std::nullopt});
    NoisePrediction remote_inj = remote.predict_noise(z, 20, inj);
    std::vector<TapDirective> inj2;
    inj2.push_back(inject_at(0, local_pred.captured.at(0)));
    NoisePrediction local_inj = loop.local.predict_noise(z, 20, inj2);
    CHECK(remote_inj.epsilon.data == local_inj.epsilon.data);
    CHECK(remote_inj.captured.empty());
}

TEST_CASE("the full pipeline over the wire matches the local pipeline bit-for-bit") {
    Loopback loop;
    RemoteBackend remote(loop.endpoint());
    RectifyConfig cfg;
    cfg.steps = 4;
    cfg.p1 = 2;
    cfg.p2 = 0;
    cfg.s1 = 2;
    cfg.s2 = 1;
    cfg.sites = {0, 1};
    PixelImage ref = make_texture(64, 1);
    PixelImage target = make_texture(64, 3);
    PixelImage over_wire = run_pipeline(remote, ref, target, cfg);
    StubBackend local;
    PixelImage direct = run_pipeline(local, ref, target, cfg);
    CHECK(over_wire.data == direct.data);
}

TEST_CASE("server-side validation failures surface as client errors") {
    Loopback loop;
    RemoteBackend remote(loop.endpoint());
    CHECK_THROWS_WITH_AS(remote.encode(PixelImage(8, 8)),
                         doctest::Contains("dimension mismatch"), error);
    LatentImage z = loop.local.encode(make_texture(64, 0));
    CHECK_THROWS_WITH_AS(remote.predict_noise(z, 5000, {}),
                         doctest::Contains("training schedule"), error);
}

TEST_CASE("unreachable endpoints fail fast with a clear message") {
    CHECK_THROWS_WITH_AS(RemoteBackend("http://127.0.0.1:1"), doctest::Contains("/v1/info"),
                         error);
}
