#pragma once

#include <cmath>
#include <string>

#include "spcgan/image.hpp"
#include "spcgan/tensor.hpp"

namespace spcgan {

enum class GanForm { log_form, least_squares };
enum class Regime { spcgan, gan_pix, fcn };

inline const char* to_string(GanForm f) {
    return f == GanForm::log_form ? "log" : "least_squares";
}
inline GanForm gan_form_from_string(const std::string& s) {
    if (s == "log") return GanForm::log_form;
    if (s == "least_squares") return GanForm::least_squares;
    throw ValidationError("unknown gan form: " + s);
}

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::spcgan: return "spcgan";
        case Regime::gan_pix: return "gan_pix";
        default: return "fcn";
    }
}
inline Regime regime_from_string(const std::string& s) {
    if (s == "spcgan") return Regime::spcgan;
    if (s == "gan_pix") return Regime::gan_pix;
    if (s == "fcn") return Regime::fcn;
    throw ValidationError("unknown regime: " + s);
}

struct LossWeights {
    float lambda_cyc = 10.f;
    float lambda_pix = 10.f;
    GanForm gan_form = GanForm::least_squares;

    void validate() const {
        if (!std::isfinite(lambda_cyc) || lambda_cyc < 0.f)
            throw ValidationError("LossWeights.lambda_cyc: must be finite and >= 0");
        if (!std::isfinite(lambda_pix) || lambda_pix < 0.f)
            throw ValidationError("LossWeights.lambda_pix: must be finite and >= 0");
    }
};

struct LossReport {
    double adv_forward = 0.0;
    double adv_backward = 0.0;
    double cyc = 0.0;
    double pix = 0.0;
    double total = 0.0;
};

// Discriminator-side adversarial value. Log form is the quantity D maximizes
// (mean log d_real + mean log(1 - d_fake), scores must be probabilities);
// least-squares form is the quantity D minimizes.
inline double adversarial_loss(const Tensor& d_real, const Tensor& d_fake, GanForm form) {
    require_same_shape(d_real, d_fake, "adversarial_loss");
    const size_t n = d_real.data.size();
    double acc = 0.0;
    if (form == GanForm::log_form) {
        for (size_t i = 0; i < n; ++i) {
            double r = d_real[i], f = 1.0 - double(d_fake[i]);
            if (!(r > 0.0) || !(f > 0.0))
                throw DomainError("adversarial_loss: log of non-positive argument");
            acc += std::log(r) / double(n) + std::log(f) / double(n);
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            double r = double(d_real[i]) - 1.0, f = double(d_fake[i]);
            acc += (r * r + f * f) / double(n);
        }
    }
    return acc;
}

// Generator-side variant, symmetric to the fake term above: log form is
// mean log(1 - d_fake), least-squares is mean (d_fake - 1)^2; both are
// minimized by the generator.
inline double adversarial_loss_gen(const Tensor& d_fake, GanForm form) {
    const size_t n = d_fake.data.size();
    double acc = 0.0;
    if (form == GanForm::log_form) {
        for (size_t i = 0; i < n; ++i) {
            double f = 1.0 - double(d_fake[i]);
            if (!(f > 0.0))
                throw DomainError("adversarial_loss_gen: log of non-positive argument");
            acc += std::log(f) / double(n);
        }
    } else {
        for (size_t i = 0; i < n; ++i) {
            double f = double(d_fake[i]) - 1.0;
            acc += f * f / double(n);
        }
    }
    return acc;
}

// Mean absolute per-pixel difference.
inline double cycle_loss(const Tensor& original, const Tensor& cycled) {
    require_same_shape(original, cycled, "cycle_loss");
    double acc = 0.0;
    for (size_t i = 0; i < original.data.size(); ++i)
        acc += std::fabs(double(original[i]) - double(cycled[i]));
    return acc / double(original.data.size());
}

inline double cycle_loss(const GrayImage& a, const GrayImage& b) {
    return cycle_loss(a.to_tensor(), b.to_tensor());
}

// Mean squared per-pixel difference.
inline double pixelwise_loss(const Tensor& pred, const Tensor& gt) {
    require_same_shape(pred, gt, "pixelwise_loss");
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        double d = double(pred[i]) - double(gt[i]);
        acc += d * d;
    }
    return acc / double(pred.data.size());
}

inline double pixelwise_loss(const Tensor& pred, const SegMask& gt) {
    Tensor t({1, gt.height, gt.width});
    t.data.assign(gt.pix.begin(), gt.pix.end());
    return pixelwise_loss(pred, t);
}

// Weighted total per regime: spcgan uses all terms, gan_pix drops the cycle
// and backward terms, fcn keeps only the pixel-wise term.
inline LossReport total_objective(double adv_forward, double adv_backward, double cyc, double pix,
                                  const LossWeights& w, Regime regime) {
    w.validate();
    for (double v : {adv_forward, adv_backward, cyc, pix})
        if (!std::isfinite(v)) throw NumericFault("total_objective: non-finite loss part");
    LossReport r;
    switch (regime) {
        case Regime::spcgan:
            r.adv_forward = adv_forward;
            r.adv_backward = adv_backward;
            r.cyc = cyc;
            r.pix = pix;
            break;
        case Regime::gan_pix:
            r.adv_forward = adv_forward;
            r.pix = pix;
            break;
        case Regime::fcn:
            r.pix = pix;
            break;
    }
    r.total = r.adv_forward + r.adv_backward + double(w.lambda_cyc) * r.cyc +
              double(w.lambda_pix) * r.pix;
    if (!std::isfinite(r.total)) throw NumericFault("total_objective: non-finite total");
    return r;
}

}  // namespace spcgan
