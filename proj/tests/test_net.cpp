#include <catch2/catch_amalgamated.hpp>

#include "pgx/net.hpp"
#include "pgx/sources.hpp"

using namespace pgx;

namespace {

struct LoopbackRig {
    ModelBundle bundle;
    LatentCodec codec;
    TokenHashEncoder encoder{32};

    LoopbackRig() {
        GeneratorConfig g;
        g.image_size = 32;
        g.levels = 3;
        g.base_channels = 6;
        g.max_channels = 24;
        g.text_dim = 32;
        g.em_hidden = {32};
        DiscriminatorConfig d;
        d.layers = 2;
        d.base_channels = 4;
        d.text_channels = 4;
        d.text_dim = 32;
        bundle = ModelBundle(g, d, "token-hash-v1");
        CodecConfig c;
        c.image_size = 32;
        c.downscale_levels = 2;
        c.latent_channels = 8;
        c.base_channels = 8;
        codec = LatentCodec(c);
    }
};

Image test_image() { return generate_source_image(32, 77); }

} // namespace

TEST_CASE("loopback serve/client equals the local path bit-for-bit") {
    LoopbackRig rig;
    StreamServer server(rig.bundle, rig.codec, rig.encoder);
    server.start(0);

    const Image img = test_image();
    const std::string prompt = "denoise and foveate";
    const Image remote = request_enhance("127.0.0.1", server.port(), img, prompt, rig.codec);

    // local reference: same generator, same codec round trip
    const Image enhanced = bundle_infer_fn(rig.bundle, rig.encoder)(img, prompt);
    const Image local = codec_decode(rig.codec, codec_encode(rig.codec, enhanced));
    REQUIRE(remote.data == local.data);
    REQUIRE(std::isinf(psnr(remote, local)));

    server.stop();
}

TEST_CASE("malformed prompt yields an error frame and the connection survives") {
    LoopbackRig rig;
    StreamServer server(rig.bundle, rig.codec, rig.encoder);
    server.start(0);

    StreamClient client("127.0.0.1", server.port());
    const Image img = test_image();
    REQUIRE_THROWS_WITH(client.enhance(img, "sharpen", rig.codec),
                        Catch::Matchers::ContainsSubstring("sharpen"));
    // same connection still serves good requests
    const Image ok = client.enhance(img, "foveate", rig.codec);
    REQUIRE(ok.width == 32);

    server.stop();
}

TEST_CASE("non-request frames are answered with error frames") {
    LoopbackRig rig;
    StreamServer server(rig.bundle, rig.codec, rig.encoder);
    server.start(0);

    StreamClient client("127.0.0.1", server.port());
    Frame f;
    f.kind = FrameKind::Latent;
    f.payload = make_error_payload("nope");
    const Frame reply = client.roundtrip(f);
    REQUIRE(reply.kind == FrameKind::Error);

    server.stop();
}

TEST_CASE("latent reply byte count matches the wire contract") {
    LoopbackRig rig;
    StreamServer server(rig.bundle, rig.codec, rig.encoder);
    server.start(0);

    StreamClient client("127.0.0.1", server.port());
    Frame request;
    request.kind = FrameKind::Request;
    request.payload = make_request_payload(encode_png_rgb8(test_image()), "foveate");
    const Frame reply = client.roundtrip(request);
    REQUIRE(reply.kind == FrameKind::Latent);
    const auto c = rig.codec.cfg;
    const std::size_t expected =
        std::size_t(4) * c.latent_channels * c.latent_hw() * c.latent_hw() + 16;
    REQUIRE(serialize_frame(reply).size() == expected);

    server.stop();
}
