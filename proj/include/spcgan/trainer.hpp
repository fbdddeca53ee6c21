#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spcgan/evalstat.hpp"
#include "spcgan/losses.hpp"
#include "spcgan/netzoo.hpp"
#include "spcgan/phantom.hpp"

namespace spcgan {

enum class ValMetric { loss, dice };

inline const char* to_string(ValMetric m) { return m == ValMetric::loss ? "loss" : "dice"; }
inline ValMetric val_metric_from_string(const std::string& s) {
    if (s == "loss") return ValMetric::loss;
    if (s == "dice") return ValMetric::dice;
    throw ValidationError("unknown val metric: " + s);
}

struct TrainConfig {
    Regime regime = Regime::spcgan;
    GeneratorConfig generator;
    int disc_n_layers = 3;
    int disc_base_width = 0;  // 0: follow generator base_width
    LossWeights weights;
    int epochs = 1500;
    int batch_size = 1;
    float lr = 2e-4f;
    int decay_start_epoch = 750;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    AugConfig aug;
    uint64_t seed = 0;
    int pool_size = 50;
    int val_every = 5;
    ValMetric val_metric = ValMetric::loss;

    void validate() const {
        generator.validate();
        weights.validate();
        aug.validate();
        if (epochs < 0) throw ValidationError("TrainConfig.epochs: must be >= 0");
        if (decay_start_epoch > epochs)
            throw ValidationError("TrainConfig.decay_start_epoch: must be <= epochs");
        if (!(lr > 0.f)) throw ValidationError("TrainConfig.lr: must be > 0");
        if (batch_size != 1)
            throw ValidationError(
                "TrainConfig.batch_size: only 1 is supported (updates are defined per sample)");
        if (pool_size < 0) throw ValidationError("TrainConfig.pool_size: must be >= 0");
        if (val_every < 1) throw ValidationError("TrainConfig.val_every: must be >= 1");
        if (disc_n_layers < 1) throw ValidationError("TrainConfig.disc_n_layers: must be >= 1");
    }

    int disc_width() const { return disc_base_width > 0 ? disc_base_width : generator.base_width; }

    json to_json() const {
        return {{"regime", to_string(regime)},
                {"generator", generator.to_json()},
                {"disc_n_layers", disc_n_layers},
                {"disc_base_width", disc_base_width},
                {"lambda_cyc", weights.lambda_cyc},
                {"lambda_pix", weights.lambda_pix},
                {"gan_form", to_string(weights.gan_form)},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"lr", lr},
                {"decay_start_epoch", decay_start_epoch},
                {"beta1", beta1},
                {"beta2", beta2},
                {"aug",
                 {{"shear_range", aug.shear_range},
                  {"rotation_range_deg", aug.rotation_range_deg},
                  {"width_shift", aug.width_shift},
                  {"height_shift", aug.height_shift},
                  {"zoom_range", aug.zoom_range},
                  {"horizontal_flip", aug.horizontal_flip}}},
                {"seed", seed},
                {"pool_size", pool_size},
                {"val_every", val_every},
                {"val_metric", to_string(val_metric)}};
    }

    static TrainConfig from_json(const json& j) {
        TrainConfig c;
        c.regime = regime_from_string(j.at("regime").get<std::string>());
        c.generator = GeneratorConfig::from_json(j.at("generator"));
        c.disc_n_layers = j.at("disc_n_layers").get<int>();
        c.disc_base_width = j.at("disc_base_width").get<int>();
        c.weights.lambda_cyc = j.at("lambda_cyc").get<float>();
        c.weights.lambda_pix = j.at("lambda_pix").get<float>();
        c.weights.gan_form = gan_form_from_string(j.at("gan_form").get<std::string>());
        c.epochs = j.at("epochs").get<int>();
        c.batch_size = j.at("batch_size").get<int>();
        c.lr = j.at("lr").get<float>();
        c.decay_start_epoch = j.at("decay_start_epoch").get<int>();
        c.beta1 = j.at("beta1").get<float>();
        c.beta2 = j.at("beta2").get<float>();
        const auto& ja = j.at("aug");
        c.aug.shear_range = ja.at("shear_range").get<float>();
        c.aug.rotation_range_deg = ja.at("rotation_range_deg").get<float>();
        c.aug.width_shift = ja.at("width_shift").get<float>();
        c.aug.height_shift = ja.at("height_shift").get<float>();
        c.aug.zoom_range = ja.at("zoom_range").get<float>();
        c.aug.horizontal_flip = ja.at("horizontal_flip").get<bool>();
        c.seed = j.at("seed").get<uint64_t>();
        c.pool_size = j.at("pool_size").get<int>();
        c.val_every = j.at("val_every").get<int>();
        c.val_metric = val_metric_from_string(j.at("val_metric").get<std::string>());
        return c;
    }
};

// Constant lr up to decay_start_epoch, then linear to zero at cfg.epochs.
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch > cfg.epochs) throw ValidationError("lr_at: epoch out of range");
    if (epoch <= cfg.decay_start_epoch || cfg.epochs == cfg.decay_start_epoch)
        return double(cfg.lr);
    return double(cfg.lr) * double(cfg.epochs - epoch) /
           double(cfg.epochs - cfg.decay_start_epoch);
}

namespace nn {

struct Adam {
    std::vector<VarPtr> params;
    double beta1, beta2, eps = 1e-8;
    int64_t t = 0;
    std::vector<Tensor> m, v;

    Adam(std::vector<VarPtr> ps, double b1, double b2) : params(std::move(ps)), beta1(b1), beta2(b2) {
        for (const auto& p : params) {
            m.emplace_back(p->v.shape);
            v.emplace_back(p->v.shape);
        }
    }

    void zero_grad() { nn::zero_grad(params); }

    void step(double lr) {
        ++t;
        const float b1 = float(beta1), b2 = float(beta2);
        const float ib1 = 1.f - b1, ib2 = 1.f - b2;
        const float bc1 = float(1.0 - std::pow(beta1, double(t)));
        const float bc2 = float(1.0 - std::pow(beta2, double(t)));
        const float step_size = float(lr) / bc1;
        const float inv_sqrt_bc2 = 1.f / std::sqrt(bc2);
        const float e = float(eps);
        for (size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (p->g.data.empty()) continue;
            float* pv = p->v.data.data();
            const float* g = p->g.data.data();
            float* mi = m[i].data.data();
            float* vi = v[i].data.data();
            for (size_t k = 0; k < p->v.data.size(); ++k) {
                mi[k] = b1 * mi[k] + ib1 * g[k];
                vi[k] = b2 * vi[k] + ib2 * g[k] * g[k];
                pv[k] -= step_size * mi[k] / (std::sqrt(vi[k]) * inv_sqrt_bc2 + e);
            }
        }
    }
};

// Buffer of previously generated fakes for discriminator updates. With a
// full pool, each query returns either the new tensor (p = 0.5) or a random
// stored one which is replaced by the new tensor.
class ImagePool {
  public:
    ImagePool(int capacity, uint64_t seed) : capacity_(size_t(capacity)), rng_(seed) {}

    Tensor query(const Tensor& t) {
        if (capacity_ == 0) return t;
        if (buf_.size() < capacity_) {
            buf_.push_back(t);
            return t;
        }
        if (rng_.bernoulli(0.5)) {
            size_t idx = size_t(rng_.below(buf_.size()));
            Tensor out = buf_[idx];
            buf_[idx] = t;
            return out;
        }
        return t;
    }

    size_t size() const { return buf_.size(); }

  private:
    size_t capacity_;
    Rng rng_;
    std::vector<Tensor> buf_;
};

}  // namespace nn

struct Checkpoint {
    TrainConfig cfg;
    int epoch = 0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    bool val_fallback = false;  // selected final epoch because no validation ran
    std::map<std::string, json> net_cfgs;       // net name -> {arch, cfg, seed}
    std::map<std::string, Tensor> tensors;      // "<net>.<param>" -> values

    void save(const std::string& path) const {
        json header;
        header["format"] = "spcgan-checkpoint";
        header["version"] = 1;
        header["train_config"] = cfg.to_json();
        header["epoch"] = epoch;
        if (std::isfinite(val_loss))
            header["val_loss"] = val_loss;
        else
            header["val_loss"] = nullptr;
        header["val_fallback"] = val_fallback;
        header["nets"] = json::object();
        for (const auto& [name, j] : net_cfgs) header["nets"][name] = j;
        std::vector<std::pair<std::string, const Tensor*>> ts;
        for (const auto& [name, t] : tensors) ts.emplace_back(name, &t);
        nn::write_tensor_container(path, header, ts);
    }

    static Checkpoint load(const std::string& path) {
        Checkpoint ck;
        json header = nn::read_tensor_container(path, ck.tensors);
        if (header.value("format", "") != "spcgan-checkpoint" || header.value("version", 0) != 1)
            throw IoError("Checkpoint::load: not a v1 checkpoint: " + path);
        ck.cfg = TrainConfig::from_json(header.at("train_config"));
        ck.epoch = header.at("epoch").get<int>();
        ck.val_loss = header.at("val_loss").is_null()
                          ? std::numeric_limits<double>::quiet_NaN()
                          : header.at("val_loss").get<double>();
        ck.val_fallback = header.at("val_fallback").get<bool>();
        for (auto& [name, j] : header.at("nets").items()) ck.net_cfgs[name] = j;
        return ck;
    }
};

struct IterRow {
    int64_t iteration = 0;
    int epoch = 0;
    LossReport losses;
};
struct ValRow {
    int epoch = 0;
    double val_loss = 0.0;
    double val_dice = 0.0;
};

struct TrainLog {
    std::vector<IterRow> iters;
    std::vector<ValRow> vals;
    bool selection_fallback = false;

    void write_csv(const std::filesystem::path& dir) const {
        std::ofstream t(dir / "train_log.csv");
        if (!t) throw IoError("TrainLog: cannot write train_log.csv");
        t << "iteration,epoch,adv_forward,adv_backward,cyc,pix,total\n";
        for (const auto& r : iters)
            t << r.iteration << "," << r.epoch << "," << fmt_fixed(r.losses.adv_forward, 6) << ","
              << fmt_fixed(r.losses.adv_backward, 6) << "," << fmt_fixed(r.losses.cyc, 6) << ","
              << fmt_fixed(r.losses.pix, 6) << "," << fmt_fixed(r.losses.total, 6) << "\n";
        std::ofstream v(dir / "val_log.csv");
        if (!v) throw IoError("TrainLog: cannot write val_log.csv");
        v << "epoch,val_loss,val_dice\n";
        for (const auto& r : vals)
            v << r.epoch << "," << fmt_fixed(r.val_loss, 6) << "," << fmt_fixed(r.val_dice, 6)
              << "\n";
    }
};

template <typename T = float>
TensorT<T> mask_to_pm1(const SegMask& m) {
    TensorT<T> t({1, m.height, m.width});
    for (size_t i = 0; i < m.pix.size(); ++i) t[size_t(i)] = m.pix[i] > 0.5f ? T(1) : T(-1);
    return t;
}

namespace detail {

template <typename T>
void check_finite_term(const nn::VarPtrT<T>& v, const char* term, int64_t iteration) {
    if (!std::isfinite(double(v->v[0])))
        throw NumericFault(std::string("train: ") + term + " non-finite at iteration " +
                           std::to_string(iteration));
}

// generator-side adversarial term on raw scores
template <typename T>
nn::VarPtrT<T> adv_gen_term(const nn::VarPtrT<T>& d_fake, GanForm form) {
    using namespace nn;
    if (form == GanForm::least_squares) return mean_all(square(add_const(d_fake, T(-1))));
    // mean log(1 - sigmoid(d))
    return mean_all(vlog(add_const(scale(vsigmoid(d_fake), T(-1)), T(1))));
}

// discriminator objective to MINIMIZE on raw scores
template <typename T>
nn::VarPtrT<T> disc_min_term(const nn::VarPtrT<T>& d_real, const nn::VarPtrT<T>& d_fake,
                             GanForm form) {
    using namespace nn;
    if (form == GanForm::least_squares) {
        auto real = mean_all(square(add_const(d_real, T(-1))));
        auto fake = mean_all(square(d_fake));
        return linear_comb<T>({real, fake}, {T(1), T(1)});
    }
    auto real = mean_all(vlog(vsigmoid(d_real)));
    auto fake = mean_all(vlog(add_const(scale(vsigmoid(d_fake), T(-1)), T(1))));
    return linear_comb<T>({real, fake}, {T(-1), T(-1)});  // maximize the log objective
}

}  // namespace detail

// The nets a regime trains: spcgan uses all four, gan_pix drops the backward
// pair, fcn keeps only the forward generator.
template <typename T>
struct NetSetT {
    nn::NetHandleT<T> gab, gba, df, db;
};

using NetSet = NetSetT<float>;

template <typename T = float>
NetSetT<T> regime_nets(const TrainConfig& cfg) {
    NetSetT<T> nets;
    nets.gab = nn::build_generator<T>(cfg.generator, derive_seed(cfg.seed, 0x6AB));
    if (cfg.regime == Regime::spcgan)
        nets.gba = nn::build_generator<T>(cfg.generator, derive_seed(cfg.seed, 0x6BA));
    if (cfg.regime != Regime::fcn) {
        DiscriminatorConfig dfc{DiscKind::pixelwise_forward, cfg.disc_width(), cfg.disc_n_layers};
        nets.df = nn::build_discriminator<T>(dfc, derive_seed(cfg.seed, 0xDF));
    }
    if (cfg.regime == Regime::spcgan) {
        DiscriminatorConfig dbc{DiscKind::patch_backward, cfg.disc_width(), cfg.disc_n_layers};
        nets.db = nn::build_discriminator<T>(dbc, derive_seed(cfg.seed, 0xDB));
    }
    return nets;
}

namespace detail {

inline void snapshot_nets(const NetSet& nets, Checkpoint& ck) {
    ck.tensors.clear();
    ck.net_cfgs.clear();
    auto grab = [&](const char* name, const nn::NetHandle& net) {
        if (!net) return;
        ck.net_cfgs[name] = {{"arch", net->arch}, {"cfg", net->cfg}, {"seed", net->seed}};
        for (const auto& p : net->params)
            ck.tensors[std::string(name) + "." + p.name] = p.var->v;
    };
    grab("gab", nets.gab);
    grab("gba", nets.gba);
    grab("df", nets.df);
    grab("db", nets.db);
}

}  // namespace detail

// Generator forward passes for one (image, mask) pair; shared between the
// discriminator step (detached values) and the generator step (graph).
template <typename T>
struct ForwardPassT {
    nn::VarPtrT<T> fake_b;  // gab(x)
    nn::VarPtrT<T> fake_a;  // gba(y), spcgan only
};

using ForwardPass = ForwardPassT<float>;

template <typename T>
ForwardPassT<T> regime_forward(const NetSetT<T>& nets, const TrainConfig& cfg,
                            const nn::VarPtrT<T>& x, const nn::VarPtrT<T>& y) {
    ForwardPassT<T> fp;
    fp.fake_b = (*nets.gab)(x);
    if (cfg.regime == Regime::spcgan) fp.fake_a = (*nets.gba)(y);
    return fp;
}

// Regime objective for the generator step, built on top of an existing
// forward pass so discriminator scores reflect the post-update weights.
template <typename T>
struct ObjectivePartsT {
    nn::VarPtrT<T> adv_f, adv_b, cyc, pix;  // null when absent from the regime
    nn::VarPtrT<T> total;

    LossReport report(const LossWeights& w) const {
        LossReport r;
        r.adv_forward = adv_f ? double(adv_f->v[0]) : 0.0;
        r.adv_backward = adv_b ? double(adv_b->v[0]) : 0.0;
        r.cyc = cyc ? double(cyc->v[0]) : 0.0;
        r.pix = pix ? double(pix->v[0]) : 0.0;
        r.total = r.adv_forward + r.adv_backward + double(w.lambda_cyc) * r.cyc +
                  double(w.lambda_pix) * r.pix;
        return r;
    }
};

using ObjectiveParts = ObjectivePartsT<float>;

template <typename T>
ObjectivePartsT<T> regime_objective(const NetSetT<T>& nets, const TrainConfig& cfg,
                                   const nn::VarPtrT<T>& x, const nn::VarPtrT<T>& y,
                                   const ForwardPassT<T>& fp) {
    using namespace nn;
    ObjectivePartsT<T> parts;
    parts.pix = mse_loss(fp.fake_b, y);
    std::vector<VarPtrT<T>> terms{parts.pix};
    std::vector<T> coef{T(cfg.weights.lambda_pix)};
    if (cfg.regime != Regime::fcn) {
        parts.adv_f = spcgan::detail::adv_gen_term((*nets.df)(fp.fake_b), cfg.weights.gan_form);
        terms.push_back(parts.adv_f);
        coef.push_back(T(1));
    }
    if (cfg.regime == Regime::spcgan) {
        auto rec_a = (*nets.gba)(fp.fake_b);
        auto rec_b = (*nets.gab)(fp.fake_a);
        parts.adv_b = spcgan::detail::adv_gen_term((*nets.db)(fp.fake_a), cfg.weights.gan_form);
        parts.cyc = linear_comb<T>({l1_loss(rec_a, x), l1_loss(rec_b, y)}, {T(1), T(1)});
        terms.push_back(parts.adv_b);
        coef.push_back(T(1));
        terms.push_back(parts.cyc);
        coef.push_back(T(cfg.weights.lambda_cyc));
    }
    parts.total = linear_comb(terms, coef);
    return parts;
}

// Binarize a generator output at the internal threshold (0.0 on the [-1,1]
// scale, i.e. 0.5 in [0,1] units).
inline SegMask tensor_to_mask(const Tensor& t, float threshold = 0.f) {
    SegMask m(t.dim(1), t.dim(2));
    for (size_t i = 0; i < m.pix.size(); ++i) m.pix[i] = t[i] > threshold ? 1.f : 0.f;
    return m;
}

// Train one model per cfg.regime and return the selected checkpoint plus the
// full per-iteration log. Deterministic given (data, cfg, seed) on a fixed
// platform.
inline std::pair<Checkpoint, TrainLog> train(const std::vector<PairedSample>& train_set,
                                             const std::vector<PairedSample>& val_set,
                                             const TrainConfig& cfg, bool verbose = false) {
    cfg.validate();
    if (train_set.empty()) throw ValidationError("train: empty training set");

    auto nets = regime_nets(cfg);
    for (const auto& s : train_set) nets.gab->check_input(s.image.to_tensor());
    for (const auto& s : val_set) nets.gab->check_input(s.image.to_tensor());

    std::vector<nn::VarPtr> gen_params = nets.gab->param_vars();
    if (nets.gba)
        for (auto& p : nets.gba->param_vars()) gen_params.push_back(p);
    nn::Adam adam_g(gen_params, cfg.beta1, cfg.beta2);
    std::optional<nn::Adam> adam_df, adam_db;
    if (nets.df) adam_df.emplace(nets.df->param_vars(), cfg.beta1, cfg.beta2);
    if (nets.db) adam_db.emplace(nets.db->param_vars(), cfg.beta1, cfg.beta2);

    nn::ImagePool pool_masks(cfg.pool_size, derive_seed(cfg.seed, 0xB001));
    nn::ImagePool pool_images(cfg.pool_size, derive_seed(cfg.seed, 0xA001));

    TrainLog log;
    Checkpoint best;
    best.cfg = cfg;
    bool have_best = false;
    double best_metric = std::numeric_limits<double>::infinity();

    auto zero_all = [&]() {
        adam_g.zero_grad();
        if (adam_df) adam_df->zero_grad();
        if (adam_db) adam_db->zero_grad();
    };

    auto validate_now = [&](int epoch) {
        if (val_set.empty()) return;
        double loss_acc = 0.0, dice_acc = 0.0;
        for (const auto& s : val_set) {
            auto x = nn::constant(s.image.to_tensor());
            auto y = nn::constant(mask_to_pm1(s.mask));
            auto fp = regime_forward(nets, cfg, x, y);
            auto obj = regime_objective(nets, cfg, x, y, fp);
            loss_acc += double(obj.total->v[0]);
            dice_acc += dice(tensor_to_mask(fp.fake_b->v), s.mask);
        }
        ValRow row{epoch, loss_acc / double(val_set.size()), dice_acc / double(val_set.size())};
        log.vals.push_back(row);
        double metric = cfg.val_metric == ValMetric::loss ? row.val_loss : -row.val_dice;
        if (!have_best || metric < best_metric) {
            best_metric = metric;
            have_best = true;
            best.epoch = epoch;
            best.val_loss = row.val_loss;
            detail::snapshot_nets(nets, best);
        }
        if (verbose)
            std::cout << "[val] epoch " << epoch << " loss " << fmt_fixed(row.val_loss, 6)
                      << " dice " << fmt_fixed(row.val_dice, 4) << "\n";
    };

    int64_t iteration = 0;
    const GanForm form = cfg.weights.gan_form;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = lr_at(epoch, cfg);
        std::vector<size_t> order(train_set.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(cfg.seed, 0xE70000 + uint64_t(epoch)));
        shuffle_indices(order, shuffle_rng);

        for (size_t oi = 0; oi < order.size(); ++oi, ++iteration) {
            const PairedSample& raw = train_set[order[oi]];
            PairedSample s = augment(raw, cfg.aug, derive_seed(cfg.seed, 0xA0000000ULL + uint64_t(iteration)));
            if (s.mask.foreground_count() == 0) s = raw;  // transform pushed the lesion out

            auto x = nn::constant(s.image.to_tensor());
            auto y = nn::constant(mask_to_pm1(s.mask));

            // (1) forward
            auto fp = regime_forward(nets, cfg, x, y);

            // (2) discriminator step on real vs pooled fakes (detached)
            if (nets.df) {
                auto real_scores = (*nets.df)(y);
                auto fake_scores = (*nets.df)(nn::constant(pool_masks.query(fp.fake_b->v)));
                auto d_loss = detail::disc_min_term(real_scores, fake_scores, form);
                detail::check_finite_term(d_loss, "disc_forward loss", iteration);
                adam_df->zero_grad();
                nn::backward(d_loss);
                adam_df->step(lr);
            }
            if (nets.db) {
                auto real_scores = (*nets.db)(x);
                auto fake_scores = (*nets.db)(nn::constant(pool_images.query(fp.fake_a->v)));
                auto d_loss = detail::disc_min_term(real_scores, fake_scores, form);
                detail::check_finite_term(d_loss, "disc_backward loss", iteration);
                adam_db->zero_grad();
                nn::backward(d_loss);
                adam_db->step(lr);
            }

            // (3) generator step; D parameter grads are not consumed here,
            // so skip their accumulation (gradient still flows through D
            // into the generators)
            auto set_disc_rg = [&](bool rg) {
                for (auto* net : {nets.df.get(), nets.db.get()}) {
                    if (!net) continue;
                    for (auto& p : net->params) p.var->requires_grad = rg;
                }
            };
            set_disc_rg(false);
            auto obj = regime_objective(nets, cfg, x, y, fp);
            if (obj.adv_f) detail::check_finite_term(obj.adv_f, "adv_forward", iteration);
            if (obj.adv_b) detail::check_finite_term(obj.adv_b, "adv_backward", iteration);
            if (obj.cyc) detail::check_finite_term(obj.cyc, "cycle", iteration);
            detail::check_finite_term(obj.pix, "pixelwise", iteration);
            detail::check_finite_term(obj.total, "total", iteration);
            zero_all();
            nn::backward(obj.total);
            adam_g.step(lr);
            set_disc_rg(true);

            log.iters.push_back({iteration, epoch, obj.report(cfg.weights)});
        }

        if ((epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs) validate_now(epoch);
        if (verbose && !log.iters.empty()) {
            const auto& last = log.iters.back().losses;
            std::cout << "epoch " << epoch << " lr " << fmt_fixed(lr, 6) << " total "
                      << fmt_fixed(last.total, 6) << " pix " << fmt_fixed(last.pix, 6) << "\n";
        }
    }

    if (!have_best) {
        best.epoch = cfg.epochs > 0 ? cfg.epochs - 1 : 0;
        best.val_fallback = true;
        log.selection_fallback = true;
        detail::snapshot_nets(nets, best);
        if (cfg.epochs > 0)
            std::cerr << "train: warning: no validation performed, selecting final epoch\n";
    }
    return {std::move(best), std::move(log)};
}

// Rebuild the forward generator from a checkpoint.
inline nn::NetHandle generator_from_checkpoint(const Checkpoint& ckpt) {
    auto it = ckpt.net_cfgs.find("gab");
    if (it == ckpt.net_cfgs.end()) throw IoError("checkpoint has no forward generator");
    auto cfg = GeneratorConfig::from_json(it->second.at("cfg"));
    auto net = nn::build_generator(cfg, it->second.at("seed").get<uint64_t>());
    nn::load_params(net, ckpt.tensors, "gab.");
    return net;
}

// Apply the trained forward generator and binarize at the given threshold.
inline SegMask segment(const GrayImage& img, const Checkpoint& ckpt, float threshold = 0.f) {
    auto net = generator_from_checkpoint(ckpt);
    Tensor out = nn::forward(net, img);
    return tensor_to_mask(out, threshold);
}

}  // namespace spcgan
