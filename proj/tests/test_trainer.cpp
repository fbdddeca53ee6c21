#include <catch2/catch_amalgamated.hpp>

#include "spcgan/phantom.hpp"
#include "spcgan/trainer.hpp"

using namespace spcgan;

namespace {

TrainConfig tiny_cfg(Regime regime, int epochs, int width = 8) {
    TrainConfig cfg;
    cfg.regime = regime;
    cfg.generator.base_width = width;
    cfg.disc_base_width = width;
    cfg.epochs = epochs;
    cfg.decay_start_epoch = epochs / 2;
    cfg.val_every = std::max(1, epochs / 4);
    cfg.seed = 99;
    return cfg;
}

std::vector<PairedSample> phantoms(int n, uint64_t base) {
    PhantomSpec spec;
    std::vector<PairedSample> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_phantom(spec, base + uint64_t(i)));
    return out;
}

}  // namespace

TEST_CASE("lr schedule: constant then linear decay to zero") {
    TrainConfig cfg;
    cfg.epochs = 1500;
    cfg.decay_start_epoch = 750;
    cfg.lr = 2e-4f;
    REQUIRE(lr_at(0, cfg) == Catch::Approx(2e-4));
    REQUIRE(lr_at(750, cfg) == Catch::Approx(2e-4));
    REQUIRE(lr_at(1125, cfg) == Catch::Approx(1e-4));
    REQUIRE(lr_at(1500, cfg) == Catch::Approx(0.0).margin(1e-18));
    REQUIRE_THROWS_AS(lr_at(-1, cfg), ValidationError);
    REQUIRE_THROWS_AS(lr_at(1501, cfg), ValidationError);
}

TEST_CASE("lr schedule is non-increasing") {
    TrainConfig cfg;
    cfg.epochs = 777;
    cfg.decay_start_epoch = 123;
    double prev = std::numeric_limits<double>::infinity();
    for (int e = 0; e <= cfg.epochs; ++e) {
        double lr = lr_at(e, cfg);
        REQUIRE(lr <= prev + 1e-18);
        prev = lr;
    }
}

TEST_CASE("image pool holds exactly pool_size entries once warm") {
    nn::ImagePool pool(5, 123);
    Tensor t({1, 2, 2});
    for (int i = 0; i < 20; ++i) {
        t.fill(float(i));
        pool.query(t);
        if (i >= 5) REQUIRE(pool.size() == 5);
    }
    REQUIRE(pool.size() == 5);
    // deterministic given the seed
    nn::ImagePool p1(3, 7), p2(3, 7);
    std::vector<float> h1, h2;
    for (int i = 0; i < 30; ++i) {
        t.fill(float(i));
        h1.push_back(p1.query(t)[0]);
        h2.push_back(p2.query(t)[0]);
    }
    REQUIRE(h1 == h2);
}

TEST_CASE("zero-epoch training returns initialized weights and an empty log") {
    auto tr = phantoms(2, 10);
    auto [ckpt, log] = train(tr, {}, tiny_cfg(Regime::fcn, 0));
    REQUIRE(log.iters.empty());
    REQUIRE(log.vals.empty());
    REQUIRE(ckpt.val_fallback);
    REQUIRE(ckpt.tensors.count("gab.head.w") == 1);
    auto fresh = nn::build_generator(ckpt.cfg.generator, derive_seed(ckpt.cfg.seed, 0x6AB));
    REQUIRE(ckpt.tensors.at("gab.head.w").data == fresh->params[0].var->v.data);
}

TEST_CASE("fcn training on 12 phantoms reduces pixelwise loss at least 10x") {
    auto tr = phantoms(12, 100);
    auto va = phantoms(3, 300);
    auto cfg = tiny_cfg(Regime::fcn, 200);
    auto [ckpt, log] = train(tr, va, cfg);
    REQUIRE(log.iters.size() == 12 * 200);
    double first = log.iters.front().losses.pix;
    double last = log.iters.back().losses.pix;
    INFO("first " << first << " last " << last);
    REQUIRE(last * 10.0 <= first);
    // fcn regime trains no discriminators at all
    for (const auto& [name, _] : ckpt.net_cfgs) REQUIRE(name == "gab");
}

TEST_CASE("checkpoint selection picks the smallest validation loss") {
    auto tr = phantoms(4, 150);
    auto va = phantoms(2, 350);
    auto cfg = tiny_cfg(Regime::spcgan, 8);
    cfg.val_every = 2;
    auto [ckpt, log] = train(tr, va, cfg);
    REQUIRE_FALSE(log.vals.empty());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : log.vals) best = std::min(best, v.val_loss);
    REQUIRE(ckpt.val_loss == Catch::Approx(best));
    REQUIRE_FALSE(ckpt.val_fallback);
    // spcgan checkpoints carry all four nets
    REQUIRE(ckpt.net_cfgs.count("gab"));
    REQUIRE(ckpt.net_cfgs.count("gba"));
    REQUIRE(ckpt.net_cfgs.count("df"));
    REQUIRE(ckpt.net_cfgs.count("db"));
}

TEST_CASE("empty validation set falls back to the final epoch with a warning flag") {
    auto tr = phantoms(2, 170);
    auto [ckpt, log] = train(tr, {}, tiny_cfg(Regime::fcn, 3));
    REQUIRE(ckpt.val_fallback);
    REQUIRE(log.selection_fallback);
    REQUIRE(log.vals.empty());
}

TEST_CASE("with lambda_pix = 0 the spcgan objective reduces to the cycle-GAN total") {
    auto tr = phantoms(2, 180);
    auto cfg = tiny_cfg(Regime::spcgan, 1);
    cfg.weights.lambda_pix = 0.f;
    auto [ckpt, log] = train(tr, {}, cfg);
    for (const auto& row : log.iters) {
        REQUIRE(row.losses.total ==
                Catch::Approx(row.losses.adv_forward + row.losses.adv_backward +
                              10.0 * row.losses.cyc)
                    .margin(1e-6));
    }
}

TEST_CASE("training is reproducible for identical (data, cfg, seed)") {
    auto tr = phantoms(3, 200);
    auto va = phantoms(2, 400);
    auto cfg = tiny_cfg(Regime::spcgan, 4);
    cfg.val_every = 2;
    auto [ck1, log1] = train(tr, va, cfg);
    auto [ck2, log2] = train(tr, va, cfg);
    REQUIRE(std::fabs(ck1.val_loss - ck2.val_loss) <= 1e-6);
    REQUIRE(ck1.tensors.at("gab.head.w").data == ck2.tensors.at("gab.head.w").data);
    REQUIRE(log1.iters.size() == log2.iters.size());
    for (size_t i = 0; i < log1.iters.size(); ++i)
        REQUIRE(log1.iters[i].losses.total == Catch::Approx(log2.iters[i].losses.total));
}

TEST_CASE("training aborts with a diagnostic on non-finite loss") {
    auto tr = phantoms(2, 220);
    auto cfg = tiny_cfg(Regime::fcn, 2);
    cfg.lr = 1e18f;  // guaranteed blow-up
    try {
        train(tr, {}, cfg);
        // the blow-up may take an iteration or two, but must not pass silently
        FAIL("expected NumericFault");
    } catch (const NumericFault& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("iteration") != std::string::npos);
    }
}

TEST_CASE("log-form adversarial training runs") {
    auto tr = phantoms(2, 240);
    auto cfg = tiny_cfg(Regime::gan_pix, 2);
    cfg.weights.gan_form = GanForm::log_form;
    auto [ckpt, log] = train(tr, {}, cfg);
    REQUIRE(log.iters.size() == 4);
    for (const auto& row : log.iters) REQUIRE(std::isfinite(row.losses.total));
}

TEST_CASE("segment output has input dimensions and is binary") {
    auto tr = phantoms(2, 260);
    auto [ckpt, log] = train(tr, {}, tiny_cfg(Regime::fcn, 1));
    auto s = generate_phantom(PhantomSpec{}, 999);
    auto mask = segment(s.image, ckpt);
    REQUIRE(mask.height == s.image.height);
    REQUIRE(mask.width == s.image.width);
    mask.validate();
    // divisibility violations surface as shape errors
    GrayImage odd(30, 30, 0.1f);
    REQUIRE_THROWS_AS(segment(odd, ckpt), ShapeError);
}

TEST_CASE("a trained model segments its own training phantom well") {
    auto tr = phantoms(8, 280);
    auto va = phantoms(2, 480);
    auto cfg = tiny_cfg(Regime::fcn, 80, 8);
    cfg.val_every = 20;
    auto [ckpt, log] = train(tr, va, cfg);
    double d = dice(segment(tr[0].image, ckpt), tr[0].mask);
    INFO("train-sample dice " << d);
    REQUIRE(d >= 0.8);
}

TEST_CASE("checkpoint file round-trips through save/load") {
    namespace fs = std::filesystem;
    auto tr = phantoms(2, 290);
    auto [ckpt, log] = train(tr, {}, tiny_cfg(Regime::spcgan, 1));
    auto dir = fs::temp_directory_path() / ("spcgan_tr_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto path = (dir / "c.spc").string();
    ckpt.save(path);
    auto back = Checkpoint::load(path);
    REQUIRE(back.epoch == ckpt.epoch);
    REQUIRE(back.cfg.regime == Regime::spcgan);
    REQUIRE(back.tensors.size() == ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) REQUIRE(back.tensors.at(name).data == t.data);
    fs::remove_all(dir);
}
