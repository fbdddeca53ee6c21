#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spcgan/gac.hpp"
#include "spcgan/phantom.hpp"
#include "spcgan/sweep.hpp"
#include "spcgan/trainer.hpp"

namespace spcgan {

// JSON run configuration with strict schema validation: unknown keys are
// rejected so typos cannot silently fall back to defaults. Every command
// writes the fully resolved configuration next to its outputs.

namespace cfgdetail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!j.is_object()) throw ValidationError("config section " + where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ValidationError("config: unknown key '" + where + key + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
    if (!j.contains(key)) return def;
    return j.at(key).get<T>();
}

}  // namespace cfgdetail

struct DataSpec {
    int n_train = 40;
    int n_val = 10;
    int n_test = 20;
    float target_spacing = 0.1f;  // resample target; 0 keeps native spacing
    int roi = 0;                  // ROI crop size; 0 keeps canvas

    void validate() const {
        if (n_train < 1 || n_val < 0 || n_test < 1)
            throw ValidationError("data: n_train and n_test must be >= 1, n_val >= 0");
        if (target_spacing < 0.f) throw ValidationError("data.target_spacing: must be >= 0");
        if (roi < 0) throw ValidationError("data.roi: must be >= 0");
    }
};

struct EvalSpec {
    std::vector<std::string> methods;
    std::vector<std::pair<std::string, std::string>> pairs;
    double alpha = 0.05;
};

struct RunConfig {
    uint64_t seed = 1337;
    std::string out = "runs/out";
    PhantomSpec phantom;
    DataSpec data;
    TrainConfig train;
    gac::LevelSetParams levelset;
    gac::ParamGrid levelset_grid;
    EvalSpec eval;
    SweepSpec sweep;

    json resolved() const;
    static RunConfig from_json(const json& j);
    static RunConfig load(const std::string& path);
};

inline RunConfig RunConfig::from_json(const json& j) {
    using cfgdetail::check_keys;
    using cfgdetail::get_or;
    check_keys(j, {"seed", "out", "phantom", "data", "train", "levelset", "eval", "sweep"}, "");
    RunConfig c;
    c.seed = get_or<uint64_t>(j, "seed", 1337);
    c.out = get_or<std::string>(j, "out", "runs/out");

    if (j.contains("phantom")) {
        const json& p = j.at("phantom");
        check_keys(p,
                   {"canvas", "spacing", "lesion_radius", "boundary_blur_sigma",
                    "shadow_probability", "shadow_attenuation", "speckle_grain",
                    "lesion_contrast", "depth_attenuation", "malignant_fraction"},
                   "phantom.");
        if (p.contains("canvas")) {
            auto v = p.at("canvas").get<std::vector<int>>();
            if (v.size() != 2) throw ValidationError("phantom.canvas: expected [height, width]");
            c.phantom.canvas_height = v[0];
            c.phantom.canvas_width = v[1];
        }
        c.phantom.spacing = get_or<float>(p, "spacing", c.phantom.spacing);
        if (p.contains("lesion_radius")) {
            auto v = p.at("lesion_radius").get<std::vector<float>>();
            if (v.size() != 2) throw ValidationError("phantom.lesion_radius: expected [min, max]");
            c.phantom.lesion_radius_min = v[0];
            c.phantom.lesion_radius_max = v[1];
        }
        c.phantom.boundary_blur_sigma = get_or<float>(p, "boundary_blur_sigma", c.phantom.boundary_blur_sigma);
        c.phantom.shadow_probability = get_or<float>(p, "shadow_probability", c.phantom.shadow_probability);
        c.phantom.shadow_attenuation = get_or<float>(p, "shadow_attenuation", c.phantom.shadow_attenuation);
        c.phantom.speckle_grain = get_or<float>(p, "speckle_grain", c.phantom.speckle_grain);
        c.phantom.lesion_contrast = get_or<float>(p, "lesion_contrast", c.phantom.lesion_contrast);
        c.phantom.depth_attenuation = get_or<float>(p, "depth_attenuation", c.phantom.depth_attenuation);
        c.phantom.malignant_fraction = get_or<float>(p, "malignant_fraction", c.phantom.malignant_fraction);
        c.phantom.validate();
    }

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, {"n_train", "n_val", "n_test", "target_spacing", "roi"}, "data.");
        c.data.n_train = get_or<int>(d, "n_train", c.data.n_train);
        c.data.n_val = get_or<int>(d, "n_val", c.data.n_val);
        c.data.n_test = get_or<int>(d, "n_test", c.data.n_test);
        c.data.target_spacing = get_or<float>(d, "target_spacing", c.data.target_spacing);
        c.data.roi = get_or<int>(d, "roi", c.data.roi);
        c.data.validate();
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t,
                   {"regime", "backbone", "base_width", "n_res_blocks", "unet_depth",
                    "disc_n_layers", "disc_base_width", "lambda_cyc", "lambda_pix", "gan_form",
                    "epochs", "decay_start_epoch", "lr", "batch_size", "beta1", "beta2",
                    "pool_size", "val_every", "val_metric", "aug"},
                   "train.");
        c.train.regime = regime_from_string(get_or<std::string>(t, "regime", "spcgan"));
        c.train.generator.backbone =
            backbone_from_string(get_or<std::string>(t, "backbone", "resnet9"));
        c.train.generator.base_width = get_or<int>(t, "base_width", 64);
        c.train.generator.n_res_blocks = get_or<int>(t, "n_res_blocks", 9);
        c.train.generator.unet_depth = get_or<int>(t, "unet_depth", 4);
        c.train.disc_n_layers = get_or<int>(t, "disc_n_layers", 3);
        c.train.disc_base_width = get_or<int>(t, "disc_base_width", 0);
        c.train.weights.lambda_cyc = get_or<float>(t, "lambda_cyc", 10.f);
        c.train.weights.lambda_pix = get_or<float>(t, "lambda_pix", 10.f);
        c.train.weights.gan_form =
            gan_form_from_string(get_or<std::string>(t, "gan_form", "least_squares"));
        c.train.epochs = get_or<int>(t, "epochs", 1500);
        c.train.decay_start_epoch = get_or<int>(t, "decay_start_epoch", 750);
        c.train.lr = get_or<float>(t, "lr", 2e-4f);
        c.train.batch_size = get_or<int>(t, "batch_size", 1);
        c.train.beta1 = get_or<float>(t, "beta1", 0.5f);
        c.train.beta2 = get_or<float>(t, "beta2", 0.999f);
        c.train.pool_size = get_or<int>(t, "pool_size", 50);
        c.train.val_every = get_or<int>(t, "val_every", 5);
        c.train.val_metric = val_metric_from_string(get_or<std::string>(t, "val_metric", "loss"));
        if (t.contains("aug")) {
            const json& a = t.at("aug");
            check_keys(a,
                       {"shear_range", "rotation_range_deg", "width_shift", "height_shift",
                        "zoom_range", "horizontal_flip"},
                       "train.aug.");
            c.train.aug.shear_range = get_or<float>(a, "shear_range", 0.2f);
            c.train.aug.rotation_range_deg = get_or<float>(a, "rotation_range_deg", 10.f);
            c.train.aug.width_shift = get_or<float>(a, "width_shift", 0.1f);
            c.train.aug.height_shift = get_or<float>(a, "height_shift", 0.1f);
            c.train.aug.zoom_range = get_or<float>(a, "zoom_range", 0.1f);
            c.train.aug.horizontal_flip = get_or<bool>(a, "horizontal_flip", true);
        }
        c.train.seed = c.seed;
        c.train.validate();
    } else {
        c.train.seed = c.seed;
    }

    if (j.contains("levelset")) {
        const json& l = j.at("levelset");
        check_keys(l,
                   {"epsilon_grid", "alpha_grid", "steps_grid", "sigma_grid", "epsilon", "alpha",
                    "sigma", "dt", "steps", "init_radius"},
                   "levelset.");
        c.levelset.epsilon = get_or<double>(l, "epsilon", c.levelset.epsilon);
        c.levelset.alpha = get_or<double>(l, "alpha", c.levelset.alpha);
        c.levelset.sigma = get_or<double>(l, "sigma", c.levelset.sigma);
        c.levelset.dt = get_or<double>(l, "dt", c.levelset.dt);
        c.levelset.steps = get_or<int>(l, "steps", c.levelset.steps);
        c.levelset.init_radius = get_or<double>(l, "init_radius", c.levelset.init_radius);
        if (l.contains("epsilon_grid"))
            c.levelset_grid.epsilons = l.at("epsilon_grid").get<std::vector<double>>();
        if (l.contains("alpha_grid"))
            c.levelset_grid.alphas = l.at("alpha_grid").get<std::vector<double>>();
        if (l.contains("steps_grid"))
            c.levelset_grid.steps = l.at("steps_grid").get<std::vector<int>>();
        if (l.contains("sigma_grid"))
            c.levelset_grid.sigmas = l.at("sigma_grid").get<std::vector<double>>();
        c.levelset.validate();
        c.levelset_grid.validate();
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"methods", "pairs", "alpha"}, "eval.");
        if (e.contains("methods")) c.eval.methods = e.at("methods").get<std::vector<std::string>>();
        if (e.contains("pairs"))
            for (const auto& p : e.at("pairs")) {
                auto v = p.get<std::vector<std::string>>();
                if (v.size() != 2) throw ValidationError("eval.pairs: each pair needs exactly 2 methods");
                c.eval.pairs.emplace_back(v[0], v[1]);
            }
        c.eval.alpha = get_or<double>(e, "alpha", 0.05);
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_keys(s, {"sizes", "regimes", "seeds"}, "sweep.");
        if (s.contains("sizes")) c.sweep.training_sizes = s.at("sizes").get<std::vector<int>>();
        if (s.contains("regimes"))
            for (const auto& r : s.at("regimes").get<std::vector<std::string>>())
                c.sweep.regimes.push_back(regime_from_string(r));
        if (s.contains("seeds")) c.sweep.seeds = s.at("seeds").get<std::vector<uint64_t>>();
        c.sweep.backbone = c.train.generator.backbone;
    }
    return c;
}

inline json RunConfig::resolved() const {
    json j;
    j["seed"] = seed;
    j["out"] = out;
    j["phantom"] = {{"canvas", {phantom.canvas_height, phantom.canvas_width}},
                    {"spacing", phantom.spacing},
                    {"lesion_radius", {phantom.lesion_radius_min, phantom.lesion_radius_max}},
                    {"boundary_blur_sigma", phantom.boundary_blur_sigma},
                    {"shadow_probability", phantom.shadow_probability},
                    {"shadow_attenuation", phantom.shadow_attenuation},
                    {"speckle_grain", phantom.speckle_grain},
                    {"lesion_contrast", phantom.lesion_contrast},
                    {"depth_attenuation", phantom.depth_attenuation},
                    {"malignant_fraction", phantom.malignant_fraction}};
    j["data"] = {{"n_train", data.n_train},
                 {"n_val", data.n_val},
                 {"n_test", data.n_test},
                 {"target_spacing", data.target_spacing},
                 {"roi", data.roi}};
    j["train"] = train.to_json();
    j["levelset"] = {{"epsilon", levelset.epsilon},
                     {"alpha", levelset.alpha},
                     {"sigma", levelset.sigma},
                     {"dt", levelset.dt},
                     {"steps", levelset.steps},
                     {"init_radius", levelset.init_radius},
                     {"epsilon_grid", levelset_grid.epsilons},
                     {"alpha_grid", levelset_grid.alphas},
                     {"steps_grid", levelset_grid.steps},
                     {"sigma_grid", levelset_grid.sigmas}};
    json pairs = json::array();
    for (const auto& [a, b] : eval.pairs) pairs.push_back({a, b});
    j["eval"] = {{"methods", eval.methods}, {"pairs", pairs}, {"alpha", eval.alpha}};
    json regimes = json::array();
    for (auto r : sweep.regimes) regimes.push_back(to_string(r));
    j["sweep"] = {{"sizes", sweep.training_sizes}, {"regimes", regimes}, {"seeds", sweep.seeds}};
    return j;
}

inline RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config: invalid JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

inline void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& outdir) {
    std::ofstream out(outdir / "config.resolved.json");
    if (!out) throw IoError("cannot write resolved config to " + outdir.string());
    out << cfg.resolved().dump(2) << "\n";
}

}  // namespace spcgan
