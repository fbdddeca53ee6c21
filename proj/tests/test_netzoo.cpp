#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "spcgan/netzoo.hpp"
#include "spcgan/phantom.hpp"

using namespace spcgan;
using namespace spcgan::nn;

namespace {
GeneratorConfig small_gen(Backbone b = Backbone::resnet9) {
    GeneratorConfig c;
    c.backbone = b;
    c.base_width = 8;
    c.n_res_blocks = 2;
    c.unet_depth = 3;
    return c;
}
}  // namespace

TEST_CASE("resnet generator maps 64x64 to 64x64 within [-1,1]") {
    auto net = build_generator(small_gen(), 42);
    auto s = generate_phantom(PhantomSpec{}, 1);
    Tensor out = forward(net, s.image);
    REQUIRE(out.shape == std::vector<int>{1, 64, 64});
    for (float v : out.data) {
        REQUIRE(v >= -1.f);
        REQUIRE(v <= 1.f);
    }
}

TEST_CASE("unet rejects inputs not divisible by 2^depth") {
    GeneratorConfig cfg;
    cfg.backbone = Backbone::unet;
    cfg.base_width = 8;
    cfg.unet_depth = 4;
    auto net = build_generator(cfg, 1);
    Tensor in({1, 40, 40});  // 40 % 16 != 0
    REQUIRE_THROWS_AS(forward(net, in), ShapeError);
    Tensor ok({1, 64, 64});
    REQUIRE(forward(net, ok).shape == std::vector<int>{1, 64, 64});
    // 48 = 16 * 3 satisfies the divisibility invariant and must work
    Tensor ok48({1, 48, 48});
    REQUIRE(forward(net, ok48).shape == std::vector<int>{1, 48, 48});
}

TEST_CASE("resnet rejects inputs not divisible by 4") {
    auto net = build_generator(small_gen(), 1);
    Tensor in({1, 30, 30});
    REQUIRE_THROWS_AS(forward(net, in), ShapeError);
}

TEST_CASE("same (cfg, seed) builds identical parameter vectors") {
    for (auto backbone : {Backbone::resnet9, Backbone::unet}) {
        auto a = build_generator(small_gen(backbone), 99);
        auto b = build_generator(small_gen(backbone), 99);
        REQUIRE(a->params.size() == b->params.size());
        for (size_t i = 0; i < a->params.size(); ++i)
            REQUIRE(a->params[i].var->v.data == b->params[i].var->v.data);
        auto c = build_generator(small_gen(backbone), 100);
        REQUIRE(a->params[0].var->v.data != c->params[0].var->v.data);
    }
    DiscriminatorConfig dc{DiscKind::patch_backward, 8, 3};
    auto d1 = build_discriminator(dc, 5);
    auto d2 = build_discriminator(dc, 5);
    for (size_t i = 0; i < d1->params.size(); ++i)
        REQUIRE(d1->params[i].var->v.data == d2->params[i].var->v.data);
}

TEST_CASE("pixelwise discriminator scores every pixel") {
    DiscriminatorConfig cfg{DiscKind::pixelwise_forward, 8, 3};
    auto net = build_discriminator(cfg, 3);
    Tensor in({1, 64, 64});
    auto out = forward(net, in);
    REQUIRE(out.shape == std::vector<int>{1, 64, 64});
}

TEST_CASE("patch discriminator reduces spatial dimensions") {
    DiscriminatorConfig cfg{DiscKind::patch_backward, 8, 3};
    auto net = build_discriminator(cfg, 3);
    Tensor in({1, 64, 64});
    auto out = forward(net, in);
    REQUIRE(out.dim(1) < 64);
    REQUIRE(out.dim(2) < 64);
    REQUIRE(out.dim(1) >= 1);
}

TEST_CASE("init_weights draws N(0, 0.02) conv weights and zero biases") {
    GeneratorConfig cfg;  // full width: ~2.8M parameters
    cfg.base_width = 32;
    auto net = build_generator(cfg, 1234);
    init_weights(net, 777);
    double sum = 0, sumsq = 0;
    int64_t n = 0;
    for (const auto& p : net->params) {
        bool is_weight = p.name.ends_with(".w");
        for (float v : p.var->v.data) {
            if (is_weight) {
                sum += v;
                sumsq += double(v) * double(v);
                ++n;
            } else {
                REQUIRE(v == 0.f);
            }
        }
    }
    REQUIRE(n >= 100000);
    double mean = sum / double(n);
    double sd = std::sqrt(sumsq / double(n) - mean * mean);
    REQUIRE(std::fabs(mean) < 3.0 * 0.02 / std::sqrt(double(n)));
    // chi-square concentration: at n >= 1e5 the sample sd lies in [0.019, 0.021]
    REQUIRE(sd >= 0.019);
    REQUIRE(sd <= 0.021);
}

TEST_CASE("zero input produces finite bounded output on a fresh generator") {
    auto net = build_generator(small_gen(), 11);
    Tensor in({1, 32, 32});
    auto out = forward(net, in);
    for (float v : out.data) {
        REQUIRE(std::isfinite(v));
        REQUIRE(std::fabs(v) <= 1.f);
    }
}

TEST_CASE("generator is nonlinear: forward(2x) != 2 forward(x)") {
    auto net = build_generator(small_gen(), 12);
    Rng rng(9);
    Tensor x({1, 16, 16});
    for (auto& v : x.data) v = float(rng.uniform(-0.4, 0.4));
    Tensor x2 = x;
    for (auto& v : x2.data) v *= 2.f;
    auto y1 = forward(net, x);
    auto y2 = forward(net, x2);
    double diff = 0;
    for (size_t i = 0; i < y1.data.size(); ++i)
        diff = std::max(diff, std::fabs(2.0 * double(y1[i]) - double(y2[i])));
    REQUIRE(diff > 1e-3);
}

TEST_CASE("every parameter receives a finite gradient from a finite loss") {
    for (auto backbone : {Backbone::resnet9, Backbone::unet}) {
        auto net = build_generator(small_gen(backbone), 21);
        Rng rng(10);
        Tensor x({1, 16, 16});
        for (auto& v : x.data) v = float(rng.uniform(-1, 1));
        zero_grad(net->param_vars());
        auto out = net->fn(constant(x));
        auto loss = mean_all(square(out));
        backward(loss);
        for (const auto& p : net->params) {
            REQUIRE_FALSE(p.var->g.data.empty());
            for (float g : p.var->g.data) REQUIRE(std::isfinite(g));
        }
    }
}

TEST_CASE("sampled parameter gradient matches central finite differences") {
    auto net = build_generator<double>(small_gen(), 31);
    Rng rng(14);
    TensorT<double> x({1, 16, 16});
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    zero_grad(net->param_vars());
    auto loss = mean_all(square(net->fn(constant(x))));
    backward(loss);
    Rng pick(15);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 25; ++trial) {
        size_t pi = pick.below(net->params.size());
        auto& p = net->params[pi].var;
        size_t k = pick.below(p->v.data.size());
        double orig = p->v[k];
        auto eval = [&](double v) {
            p->v[k] = v;
            double L = double(mean_all(square(net->fn(constant(x))))->v[0]);
            p->v[k] = orig;
            return L;
        };
        double h = 1e-5;
        double fd1 = (eval(orig + h) - eval(orig - h)) / (2 * h);
        double fd2 = (eval(orig + h / 2) - eval(orig - h / 2)) / h;
        if (std::fabs(fd1 - fd2) > 1e-3 * std::max({std::fabs(fd1), std::fabs(fd2), 1e-3}))
            continue;  // activation kink inside the interval; FD invalid there
        double an = p->g[k];
        REQUIRE(std::fabs(fd1 - an) <=
                1e-2 * std::max(std::fabs(fd1) + std::fabs(an), 1e-6));
        ++checked;
    }
    REQUIRE(checked >= 20);
}

TEST_CASE("checkpoint container round-trips and is byte-stable") {
    namespace fs = std::filesystem;
    auto net = build_generator(small_gen(), 5);
    json header = {{"purpose", "test"}, {"nets", {{"gab", net->cfg}}}};
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto& p : net->params) tensors.emplace_back("gab." + p.name, &p.var->v);

    auto dir = fs::temp_directory_path() / ("spcgan_ckpt_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto p1 = (dir / "a.spc").string(), p2 = (dir / "b.spc").string();
    write_tensor_container(p1, header, tensors);
    write_tensor_container(p2, header, tensors);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);

    std::map<std::string, Tensor> loaded;
    json h = read_tensor_container(p1, loaded);
    REQUIRE(h.at("purpose") == "test");
    auto net2 = build_generator(small_gen(), 999);
    load_params(net2, loaded, "gab.");
    for (size_t i = 0; i < net->params.size(); ++i)
        REQUIRE(net2->params[i].var->v.data == net->params[i].var->v.data);

    REQUIRE_THROWS_AS(read_tensor_container((dir / "missing.spc").string(), loaded), IoError);
    fs::remove_all(dir);
}
