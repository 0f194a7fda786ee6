// Serves the stub backbone over the wire protocol. Reference implementation
// for hooking up a real model server, and a local target for remote-backend
// testing:   texrect-stub-server --port 8731 &
//            texrect --backend remote --endpoint http://127.0.0.1:8731 ...

#include "texrect/remote_backend.hpp"
#include "texrect/stub_backend.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace texrect;

int main(int argc, char** argv) {
    CLI::App app{"texrect stub backbone server"};

    int port = 8731;
    StubConfig cfg;
    app.add_option("--port", port, "listen port");
    app.add_option("--image-size", cfg.image_size, "native image size (multiple of 8)");
    app.add_option("--sites", cfg.num_sites, "number of self-attention sites");
    app.add_option("--heads", cfg.heads, "attention heads");
    app.add_option("--width", cfg.width, "feature width");
    app.add_option("--seed", cfg.seed, "weight seed");

    CLI11_PARSE(app, argc, argv);

    try {
        StubBackend backend(cfg);
        httplib::Server server;
        serve_backend(backend, server);
        std::cout << "serving stub backbone on http://127.0.0.1:" << port << " ("
                  << backend.info().num_sites << " sites, "
                  << backend.info().latent_h << "x" << backend.info().latent_w
                  << " latents)" << std::endl;
        if (!server.listen("0.0.0.0", port)) {
            std::cerr << "error: cannot listen on port " << port << "\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
