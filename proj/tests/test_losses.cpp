#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "spcgan/losses.hpp"

using namespace spcgan;

namespace {
Tensor grid_of(float v, int h = 4, int w = 4) {
    Tensor t({1, h, w});
    t.fill(v);
    return t;
}
}  // namespace

TEST_CASE("log-form adversarial loss at D=0.5 equals 2 ln(0.5)") {
    auto half = grid_of(0.5f);
    double v = adversarial_loss(half, half, GanForm::log_form);
    REQUIRE(v == Catch::Approx(-1.386294).margin(1e-6));
}

TEST_CASE("least-squares adversarial loss at D=0.5 equals 0.5") {
    auto half = grid_of(0.5f);
    REQUIRE(adversarial_loss(half, half, GanForm::least_squares) ==
            Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("near-saturated log-form discriminator approaches the supremum") {
    // log(1-1e-6) + log(1-1e-6) = 2 log(1-1e-6) ~ -2e-6 by series expansion
    auto real = grid_of(1.f - 1e-6f);
    auto fake = grid_of(1e-6f);
    double expected = 2.0 * std::log1p(-double(1.f - (1.f - 1e-6f)));
    double v = adversarial_loss(real, fake, GanForm::log_form);
    REQUIRE(v == Catch::Approx(expected).margin(1e-8));
    REQUIRE(v == Catch::Approx(-2e-6).margin(1e-8));
}

TEST_CASE("log-form adversarial loss never exceeds its supremum of 0") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor real({1, 5, 5}), fake({1, 5, 5});
        for (auto& v : real.data) v = float(rng.uniform(1e-6, 1 - 1e-6));
        for (auto& v : fake.data) v = float(rng.uniform(1e-6, 1 - 1e-6));
        REQUIRE(adversarial_loss(real, fake, GanForm::log_form) <= 1e-9);
    }
}

TEST_CASE("log form rejects scores outside (0,1)") {
    auto bad = grid_of(0.f);
    auto ok = grid_of(0.5f);
    REQUIRE_THROWS_AS(adversarial_loss(bad, ok, GanForm::log_form), DomainError);
    REQUIRE_THROWS_AS(adversarial_loss(ok, grid_of(1.f), GanForm::log_form), DomainError);
    REQUIRE_THROWS_AS(adversarial_loss_gen(grid_of(1.f), GanForm::log_form), DomainError);
}

TEST_CASE("generator-side variants are symmetric to the fake term") {
    auto fake = grid_of(0.25f);
    REQUIRE(adversarial_loss_gen(fake, GanForm::least_squares) ==
            Catch::Approx(0.5625).margin(1e-12));  // (0.25-1)^2
    REQUIRE(adversarial_loss_gen(fake, GanForm::log_form) ==
            Catch::Approx(std::log(0.75)).margin(1e-9));
}

TEST_CASE("cycle loss basics") {
    auto a = grid_of(1.f);
    auto b = grid_of(-1.f);
    REQUIRE(cycle_loss(a, a) == 0.0);
    REQUIRE(cycle_loss(a, b) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("cycle loss matches an elementwise oracle on random grids") {
    Rng rng(5);
    Tensor a({1, 4, 4}), b({1, 4, 4});
    for (auto& v : a.data) v = float(rng.uniform(-1, 1));
    for (auto& v : b.data) v = float(rng.uniform(-1, 1));
    double expect = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        expect += std::fabs(double(a[i]) - double(b[i]));
    expect /= double(a.data.size());
    REQUIRE(cycle_loss(a, b) == Catch::Approx(expect).margin(1e-12));
    REQUIRE_THROWS_AS(cycle_loss(a, grid_of(0.f, 3, 3)), ShapeError);
}

TEST_CASE("pixelwise loss basics") {
    auto ones = grid_of(1.f);
    auto zeros = grid_of(0.f);
    REQUIRE(pixelwise_loss(ones, ones) == 0.0);
    REQUIRE(pixelwise_loss(ones, zeros) == Catch::Approx(1.0).margin(1e-12));
    // 0.5 vs arbitrary binary ground truth: every pixel contributes 0.25
    Tensor gt({1, 4, 4});
    Rng rng(2);
    for (auto& v : gt.data) v = rng.bernoulli(0.5) ? 1.f : 0.f;
    REQUIRE(pixelwise_loss(grid_of(0.5f), gt) == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("losses are symmetric-positive and scale quadratically") {
    Rng rng(6);
    Tensor a({1, 6, 6}), b({1, 6, 6});
    for (auto& v : a.data) v = float(rng.uniform(-1, 1));
    for (auto& v : b.data) v = float(rng.uniform(-1, 1));
    REQUIRE(cycle_loss(a, b) == Catch::Approx(cycle_loss(b, a)));
    REQUIRE(pixelwise_loss(a, b) == Catch::Approx(pixelwise_loss(b, a)));
    REQUIRE(cycle_loss(a, b) > 0.0);
    REQUIRE(pixelwise_loss(a, a) == 0.0);
    // scaling the residual by c multiplies the mse by c^2
    Tensor mid = a, far = a;
    for (size_t i = 0; i < a.data.size(); ++i) {
        float r = b[i] - a[i];
        mid[i] = a[i] + 0.5f * r;
        far[i] = b[i];
    }
    REQUIRE(pixelwise_loss(a, mid) * 4.0 == Catch::Approx(pixelwise_loss(a, far)).epsilon(1e-5));
}

TEST_CASE("total objective follows the report invariant") {
    LossWeights w;
    auto r0 = total_objective(0, 0, 0, 0, w, Regime::spcgan);
    REQUIRE(r0.total == 0.0);

    auto r = total_objective(-1.0, -1.0, 0.1, 0.01, w, Regime::spcgan);
    REQUIRE(r.total == Catch::Approx(-0.9).margin(1e-12));
    REQUIRE(r.total == Catch::Approx(r.adv_forward + r.adv_backward + 10.0 * r.cyc +
                                     10.0 * r.pix)
                           .margin(1e-6));

    auto fcn = total_objective(-1.0, -1.0, 0.1, 0.04, w, Regime::fcn);
    REQUIRE(fcn.adv_forward == 0.0);
    REQUIRE(fcn.cyc == 0.0);
    REQUIRE(fcn.total == Catch::Approx(0.4).margin(1e-12));

    auto gan = total_objective(-0.5, -1.0, 0.1, 0.04, w, Regime::gan_pix);
    REQUIRE(gan.adv_backward == 0.0);
    REQUIRE(gan.cyc == 0.0);
    REQUIRE(gan.total == Catch::Approx(-0.5 + 0.4).margin(1e-12));
}

TEST_CASE("non-finite loss parts raise a numeric fault") {
    LossWeights w;
    REQUIRE_THROWS_AS(
        total_objective(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0, w, Regime::spcgan),
        NumericFault);
    REQUIRE_THROWS_AS(
        total_objective(0, 0, std::numeric_limits<double>::infinity(), 0, w, Regime::spcgan),
        NumericFault);
}

TEST_CASE("loss gradients match central finite differences") {
    // perturb single pixels of double-precision copies of each loss input
    Rng rng(9);
    std::vector<double> a(16), b(16);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);

    auto as_tensor = [](const std::vector<double>& v) {
        Tensor t({1, 4, 4});
        for (size_t i = 0; i < v.size(); ++i) t[i] = float(v[i]);
        return t;
    };

    // cycle (L1): d/da_k = sign(a_k - b_k)/n
    for (size_t k : {size_t(1), size_t(8)}) {
        double fd = oracles::central_diff(
            [&](double v) {
                auto mod = a;
                mod[k] = v;
                return cycle_loss(as_tensor(mod), as_tensor(b));
            },
            a[k], 1e-4);
        double an = (a[k] > b[k] ? 1.0 : -1.0) / 16.0;
        REQUIRE(std::fabs(fd - an) <= 1e-2 * std::max(1.0, std::fabs(an)));
    }
    // pixelwise (MSE): d/da_k = 2 (a_k - b_k)/n
    for (size_t k : {size_t(2), size_t(9)}) {
        double fd = oracles::central_diff(
            [&](double v) {
                auto mod = a;
                mod[k] = v;
                return pixelwise_loss(as_tensor(mod), as_tensor(b));
            },
            a[k], 1e-4);
        double an = 2.0 * (a[k] - b[k]) / 16.0;
        REQUIRE(std::fabs(fd - an) <= 1e-2 * std::max(1.0, std::fabs(an)));
    }
    // adversarial least squares, d-side: d/dreal_k = 2 (real_k - 1)/n
    std::vector<double> r(16);
    for (auto& v : r) v = rng.uniform(0.1, 0.9);
    for (size_t k : {size_t(3), size_t(12)}) {
        double fd = oracles::central_diff(
            [&](double v) {
                auto mod = r;
                mod[k] = v;
                return adversarial_loss(as_tensor(mod), as_tensor(r), GanForm::least_squares);
            },
            r[k], 1e-4);
        double an = 2.0 * (r[k] - 1.0) / 16.0;
        REQUIRE(std::fabs(fd - an) <= 1e-2 * std::max(1.0, std::fabs(an)));
    }
    // adversarial log form, d-side: d/dreal_k = 1/(n real_k)
    for (size_t k : {size_t(4), size_t(13)}) {
        double fd = oracles::central_diff(
            [&](double v) {
                auto mod = r;
                mod[k] = v;
                return adversarial_loss(as_tensor(mod), as_tensor(r), GanForm::log_form);
            },
            r[k], 1e-5);
        double an = 1.0 / (16.0 * r[k]);
        REQUIRE(std::fabs(fd - an) <= 1e-2 * std::max(1.0, std::fabs(an)));
    }
}
