// Command-line entry point for the phantom segmentation pipeline:
// data generation, training, inference, level-set baseline, evaluation,
// learning-curve sweeps and plot regeneration. One resolved-config artifact
// is written next to every run's outputs.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "spcgan/evalstat.hpp"
#include "spcgan/gac.hpp"
#include "spcgan/manifest.hpp"
#include "spcgan/pipeline.hpp"
#include "spcgan/runconfig.hpp"
#include "spcgan/sweep.hpp"
#include "spcgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace spcgan;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_override;
    uint64_t seed_override = 0;
    bool has_seed_override = false;
    bool force = false;
    int jobs = 1;
};

RunConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw ValidationError("--config is required");
    RunConfig cfg = RunConfig::load(g.config_path);
    if (g.has_seed_override) {
        cfg.seed = g.seed_override;
        cfg.train.seed = g.seed_override;
    }
    if (!g.out_override.empty()) cfg.out = g.out_override;
    return cfg;
}

fs::path prepare_outdir(const RunConfig& cfg, bool force) {
    fs::path out(cfg.out);
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw ValidationError("output directory " + out.string() +
                              " exists and is not empty (use --force to overwrite)");
    fs::create_directories(out);
    return out;
}

std::vector<PairedSample> load_manifest_samples(const std::string& dir_or_manifest) {
    fs::path p(dir_or_manifest);
    if (fs::is_directory(p)) p /= "manifest.json";
    auto manifest = load_manifest(p.string());
    return load_samples(manifest, p);
}

int cmd_gen_data(const GlobalOpts& g) {
    RunConfig cfg = load_config(g);
    fs::path out = prepare_outdir(cfg, g.force);
    struct Part {
        Split split;
        int count;
    } parts[] = {{Split::train, cfg.data.n_train},
                 {Split::val, cfg.data.n_val},
                 {Split::test, cfg.data.n_test}};
    for (const auto& part : parts) {
        auto samples = make_split(cfg, part.split, part.count);
        write_dataset(samples, out / to_string(part.split), part.split, cfg.seed);
        std::cout << "wrote " << samples.size() << " samples to "
                  << (out / to_string(part.split)).string() << "\n";
    }
    write_resolved_config(cfg, out);
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& data_dir) {
    RunConfig cfg = load_config(g);
    fs::path out = prepare_outdir(cfg, g.force);
    auto train_set = load_manifest_samples((fs::path(data_dir) / "train").string());
    std::vector<PairedSample> val_set;
    fs::path val_manifest = fs::path(data_dir) / "val" / "manifest.json";
    if (fs::exists(val_manifest)) val_set = load_manifest_samples((fs::path(data_dir) / "val").string());
    auto [ckpt, log] = train(train_set, val_set, cfg.train, /*verbose=*/true);
    ckpt.save((out / "checkpoint.spc").string());
    log.write_csv(out);
    write_resolved_config(cfg, out);
    std::cout << "checkpoint (epoch " << ckpt.epoch << ", val_loss "
              << (std::isfinite(ckpt.val_loss) ? fmt_fixed(ckpt.val_loss, 6) : "n/a")
              << ") -> " << (out / "checkpoint.spc").string() << "\n";
    return 0;
}

void write_mask_png(const SegMask& mask, const fs::path& path) {
    write_png16(path.string(), mask.height, mask.width, quantize_mask(mask));
}

SegMask read_mask_png(const fs::path& path) {
    int h = 0, w = 0;
    std::vector<uint16_t> q;
    read_png16(path.string(), h, w, q);
    SegMask m(h, w);
    for (size_t i = 0; i < q.size(); ++i) m.pix[i] = q[i] > 32767 ? 1.f : 0.f;
    return m;
}

int cmd_segment(const GlobalOpts& g, const std::string& ckpt_path, const std::string& data_dir,
                const std::string& image_path) {
    RunConfig cfg = load_config(g);
    fs::path out = prepare_outdir(cfg, g.force);
    if (!fs::exists(ckpt_path)) throw IoError("checkpoint not found: " + ckpt_path);
    Checkpoint ckpt = Checkpoint::load(ckpt_path);
    fs::create_directories(out / "masks");
    int count = 0;
    if (!image_path.empty()) {
        int h = 0, w = 0;
        std::vector<uint16_t> q;
        read_png16(image_path, h, w, q);
        GrayImage img(h, w, cfg.data.target_spacing > 0 ? cfg.data.target_spacing : 0.1f);
        for (size_t i = 0; i < q.size(); ++i)
            img.pix[i] = float(double(q[i]) / 65535.0 * 2.0 - 1.0);
        SegMask m = segment_padded(img, ckpt);
        write_mask_png(m, out / "masks" / (fs::path(image_path).stem().string() + ".png"));
        ++count;
    } else {
        for (const auto& s : load_manifest_samples(data_dir)) {
            SegMask m = segment_padded(s.image, ckpt);
            write_mask_png(m, out / "masks" / (s.id + ".png"));
            ++count;
        }
    }
    write_resolved_config(cfg, out);
    std::cout << "wrote " << count << " masks to " << (out / "masks").string() << "\n";
    return 0;
}

int cmd_levelset(const GlobalOpts& g, const std::string& train_dir, const std::string& test_dir) {
    RunConfig cfg = load_config(g);
    fs::path out = prepare_outdir(cfg, g.force);
    auto fit_set = load_manifest_samples(train_dir);
    auto params = gac::fit_params(fit_set, cfg.levelset_grid, cfg.levelset);
    json pj = {{"epsilon", params.epsilon}, {"alpha", params.alpha},   {"sigma", params.sigma},
               {"dt", params.dt},           {"steps", params.steps},   {"init_radius", params.init_radius}};
    {
        std::ofstream pf(out / "levelset_params.json");
        pf << pj.dump(2) << "\n";
    }
    fs::create_directories(out / "masks");
    int count = 0;
    for (const auto& s : load_manifest_samples(test_dir)) {
        write_mask_png(gac::segment_gac(s.image, params), out / "masks" / (s.id + ".png"));
        ++count;
    }
    write_resolved_config(cfg, out);
    std::cout << "fitted params (epsilon " << params.epsilon << ", alpha " << params.alpha
              << ", sigma " << params.sigma << ", steps " << params.steps << "); wrote " << count
              << " masks\n";
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& data_dir,
             const std::vector<std::string>& pred_specs) {
    RunConfig cfg = load_config(g);
    fs::path out = prepare_outdir(cfg, g.force);
    auto gt = load_manifest_samples(data_dir);

    std::map<std::string, fs::path> methods;
    for (const auto& spec : pred_specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw ValidationError("--pred expects NAME=DIR, got: " + spec);
        methods[spec.substr(0, eq)] = spec.substr(eq + 1);
    }
    if (methods.empty()) throw ValidationError("eval: at least one --pred NAME=DIR required");

    EvalReport report;
    std::map<std::string, std::map<std::string, double>> per_method;  // method -> id -> dsc
    for (const auto& [method, dir] : methods) {
        for (const auto& s : gt) {
            fs::path mp = dir / (s.id + ".png");
            if (!fs::exists(mp)) throw IoError("eval: missing mask " + mp.string());
            SegMask pred = read_mask_png(mp);
            bool empty_pair = false;
            double d = dice(pred, s.mask, &empty_pair);
            report.records.push_back({s.id, method, d, s.lesion_class, empty_pair});
            per_method[method][s.id] = d;
        }
    }
    report.group_stats = aggregate(report.records);
    for (const auto& [a, b] : cfg.eval.pairs) {
        if (!per_method.count(a) || !per_method.count(b))
            throw ValidationError("eval.pairs references unknown method " + a + " or " + b);
        std::vector<double> va, vb;
        for (const auto& s : gt) {
            va.push_back(per_method[a][s.id]);
            vb.push_back(per_method[b][s.id]);
        }
        TestRow row;
        row.method_a = a;
        row.method_b = b;
        row.alpha = cfg.eval.alpha;
        auto res = paired_ttest_one_sided(va, vb);
        row.t = res.t;
        row.p = res.p;
        row.reject = res.p < cfg.eval.alpha;
        report.tests.push_back(row);
    }
    emit_report(report, out);
    write_resolved_config(cfg, out);
    std::cout << "evaluated " << methods.size() << " methods on " << gt.size() << " samples -> "
              << out.string() << "\n";
    return 0;
}

int cmd_sweep(const GlobalOpts& g, const std::string& data_dir) {
    RunConfig cfg = load_config(g);
    fs::path out = prepare_outdir(cfg, g.force);
    auto pool = load_manifest_samples((fs::path(data_dir) / "train").string());
    auto val_set = load_manifest_samples((fs::path(data_dir) / "val").string());
    auto test_set = load_manifest_samples((fs::path(data_dir) / "test").string());

    std::vector<SweepRow> rows;
    if (g.jobs <= 1) {
        rows = run_sweep(pool, val_set, test_set, cfg.train, cfg.sweep, /*verbose=*/true);
    } else {
        // cells are independent; shard them across jobs and keep row order
        // deterministic by sorting afterwards (run_sweep sorts too)
        struct Cell {
            uint64_t seed;
            Regime regime;
            int size;
        };
        std::vector<Cell> cells;
        for (uint64_t s : cfg.sweep.seeds)
            for (Regime r : cfg.sweep.regimes)
                for (int sz : cfg.sweep.training_sizes) cells.push_back({s, r, sz});
        std::vector<SweepRow> results(cells.size());
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= cells.size()) return;
                SweepSpec one;
                one.training_sizes = {cells[i].size};
                one.regimes = {cells[i].regime};
                one.seeds = {cells[i].seed};
                one.backbone = cfg.sweep.backbone;
                auto r = run_sweep(pool, val_set, test_set, cfg.train, one);
                results[i] = r.at(0);
            }
        };
        std::vector<std::thread> threads;
        for (int t = 0; t < std::min<int>(g.jobs, int(cells.size())); ++t)
            threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        rows = std::move(results);
        std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
            return std::tie(a.size, a.regime, a.seed) < std::tie(b.size, b.regime, b.seed);
        });
    }

    EvalReport report;
    report.sweep = rows;
    // sweep.csv + one learning curve per regime; records/groups are empty
    std::string sw = "size,regime,seed,mean_dsc,std_dsc\n";
    for (const auto& r : rows)
        sw += std::to_string(r.size) + "," + r.regime + "," + std::to_string(r.seed) + "," +
              fmt_fixed(r.mean_dsc, 6) + "," + fmt_fixed(r.std_dsc, 6) + "\n";
    {
        std::ofstream f(out / "sweep.csv");
        if (!f) throw IoError("cannot write sweep.csv");
        f << sw;
    }
    std::map<std::string, std::vector<SweepRow>> by_regime;
    for (const auto& r : rows) by_regime[r.regime].push_back(r);
    for (const auto& [regime, rws] : by_regime) {
        std::ofstream f(out / ("curve_" + regime + ".svg"));
        f << detail::svg_learning_curve(regime, rws);
    }
    write_resolved_config(cfg, out);
    std::cout << "sweep wrote " << rows.size() << " rows -> " << (out / "sweep.csv").string()
              << "\n";
    return 0;
}

int cmd_plot(const std::string& report_dir) {
    fs::path dir(report_dir);
    fs::path records = dir / "records.csv";
    fs::path sweepcsv = dir / "sweep.csv";
    if (!fs::exists(records) && !fs::exists(sweepcsv))
        throw ValidationError("plot: no records.csv or sweep.csv in " + report_dir);
    int made = 0;
    if (fs::exists(records)) {
        std::ifstream in(records);
        std::string line;
        std::getline(in, line);  // header
        std::map<std::string, std::vector<double>> by_method;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string id, method, cls, dsc;
            std::getline(ss, id, ',');
            std::getline(ss, method, ',');
            std::getline(ss, cls, ',');
            std::getline(ss, dsc, ',');
            by_method[method].push_back(std::stod(dsc));
        }
        for (const auto& [method, vals] : by_method) {
            std::ofstream f(dir / ("boxplot_" + method + ".svg"));
            f << detail::svg_boxplot(method, vals);
            ++made;
        }
    }
    if (fs::exists(sweepcsv)) {
        std::ifstream in(sweepcsv);
        std::string line;
        std::getline(in, line);
        std::map<std::string, std::vector<SweepRow>> by_regime;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string size, regime, seed, mean, sd;
            std::getline(ss, size, ',');
            std::getline(ss, regime, ',');
            std::getline(ss, seed, ',');
            std::getline(ss, mean, ',');
            std::getline(ss, sd, ',');
            by_regime[regime].push_back(
                {std::stoi(size), regime, std::stoull(seed), std::stod(mean), std::stod(sd)});
        }
        for (const auto& [regime, rws] : by_regime) {
            std::ofstream f(dir / ("curve_" + regime + ".svg"));
            f << detail::svg_learning_curve(regime, rws);
            ++made;
        }
    }
    std::cout << "regenerated " << made << " plots in " << report_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-pixel-wise cycle-GAN phantom segmentation pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    auto* seed_opt = app.add_option("--seed", g.seed_override, "override config seed");
    app.add_option("--out", g.out_override, "override output directory");
    app.add_flag("--force", g.force, "overwrite non-empty output directories");
    app.add_option("--jobs", g.jobs, "parallel sweep cells")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-data", "generate phantom train/val/test datasets");
    std::string data_dir, ckpt_path, image_path, train_dir, test_dir, report_dir;
    std::vector<std::string> preds;
    auto* tr = app.add_subcommand("train", "train a segmentation model");
    tr->add_option("--data", data_dir, "gen-data output directory")->required();
    auto* seg = app.add_subcommand("segment", "run a trained model");
    seg->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    seg->add_option("--data", data_dir, "manifest directory to segment");
    seg->add_option("--image", image_path, "single 16-bit grayscale PNG to segment");
    auto* ls = app.add_subcommand("levelset", "fit and run the level-set baseline");
    ls->add_option("--data", train_dir, "manifest directory for parameter fitting")->required();
    ls->add_option("--test", test_dir, "manifest directory to segment")->required();
    auto* ev = app.add_subcommand("eval", "compute DSC records, statistics and tests");
    ev->add_option("--data", data_dir, "manifest directory with ground truth")->required();
    ev->add_option("--pred", preds, "method masks as NAME=DIR (repeatable)");
    auto* sw = app.add_subcommand("sweep", "learning-curve sweep over training sizes");
    sw->add_option("--data", data_dir, "gen-data output directory")->required();
    auto* pl = app.add_subcommand("plot", "regenerate figures from report CSVs");
    pl->add_option("--report", report_dir, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }
    g.has_seed_override = seed_opt->count() > 0;

    try {
        if (gen->parsed()) return cmd_gen_data(g);
        if (tr->parsed()) return cmd_train(g, data_dir);
        if (seg->parsed()) {
            if (ckpt_path.empty() || (data_dir.empty() && image_path.empty()))
                throw ValidationError("segment: --ckpt plus --data or --image required");
            return cmd_segment(g, ckpt_path, data_dir, image_path);
        }
        if (ls->parsed()) return cmd_levelset(g, train_dir, test_dir);
        if (ev->parsed()) return cmd_eval(g, data_dir, preds);
        if (sw->parsed()) return cmd_sweep(g, data_dir);
        if (pl->parsed()) return cmd_plot(report_dir);
        throw ValidationError("no subcommand");
    } catch (const NumericFault& e) {
        std::cerr << "numeric fault: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
