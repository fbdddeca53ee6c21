#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spcgan/manifest.hpp"

using namespace spcgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliFixture {
    fs::path root;
    CliFixture() {
        root = fs::temp_directory_path() / ("spcgan_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~CliFixture() { fs::remove_all(root); }

    fs::path write_config(const json& extra, const std::string& name = "config.json") {
        json cfg = {{"seed", 2024},
                    {"out", (root / "out").string()},
                    {"phantom", {{"canvas", {32, 32}}, {"lesion_radius", {5.0, 9.0}}}},
                    {"data", {{"n_train", 4}, {"n_val", 2}, {"n_test", 3}}},
                    {"train",
                     {{"regime", "fcn"},
                      {"base_width", 8},
                      {"epochs", 2},
                      {"decay_start_epoch", 1},
                      {"val_every", 1}}},
                    {"levelset",
                     {{"epsilon_grid", {1.0}},
                      {"alpha_grid", {15.0}},
                      {"steps_grid", {40}},
                      {"sigma_grid", {2.0}},
                      {"init_radius", 5.0}}},
                    {"eval", {{"pairs", {{"fcn", "levelset"}}}}}};
        for (auto& [k, v] : extra.items()) cfg[k] = v;
        fs::path p = root / name;
        std::ofstream f(p);
        f << cfg.dump(2);
        return p;
    }

    int run(const std::string& args, std::string* output = nullptr) const {
        fs::path log = root / "cmd.log";
        std::string cmd = std::string(SPCGAN_CLI_PATH) + " " + args + " > " + log.string() +
                          " 2>&1";
        int status = std::system(cmd.c_str());
        if (output) {
            std::ifstream in(log);
            output->assign((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
        }
        if (WIFEXITED(status)) return WEXITSTATUS(status);
        return -1;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("gen-data creates three disjoint manifests and is seed-reproducible") {
    CliFixture fx;
    auto cfg = fx.write_config({});
    auto data1 = (fx.root / "data1").string();
    REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + data1) == 0);
    std::set<std::string> ids;
    size_t total = 0;
    for (const char* split : {"train", "val", "test"}) {
        auto m = load_manifest(data1 + "/" + split + "/manifest.json");
        for (const auto& e : m.samples) ids.insert(e.id);
        total += m.samples.size();
    }
    REQUIRE(total == 4 + 2 + 3);
    REQUIRE(ids.size() == total);  // disjoint ids across splits
    REQUIRE(fs::exists(fs::path(data1) / "config.resolved.json"));

    // same seed => byte-identical manifests and rasters
    auto data2 = (fx.root / "data2").string();
    REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + data2) == 0);
    REQUIRE(slurp(data1 + "/train/manifest.json") == slurp(data2 + "/train/manifest.json"));
    REQUIRE(slurp(data1 + "/train/images/train_0.png") ==
            slurp(data2 + "/train/images/train_0.png"));

    // refusing to overwrite without --force
    std::string out;
    REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + data1, &out) == 2);
    REQUIRE(out.find("--force") != std::string::npos);
    REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + data1 + " --force") == 0);
}

TEST_CASE("train/segment/levelset/eval pipeline runs end to end") {
    CliFixture fx;
    auto cfg = fx.write_config({});
    auto data = (fx.root / "data").string();
    REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + data) == 0);

    auto run_dir = (fx.root / "run").string();
    REQUIRE(fx.run("train --config " + cfg.string() + " --out " + run_dir + " --data " + data) ==
            0);
    REQUIRE(fs::exists(fs::path(run_dir) / "checkpoint.spc"));
    REQUIRE(fs::exists(fs::path(run_dir) / "train_log.csv"));
    REQUIRE(fs::exists(fs::path(run_dir) / "val_log.csv"));

    auto seg_dir = (fx.root / "seg").string();
    REQUIRE(fx.run("segment --config " + cfg.string() + " --out " + seg_dir + " --ckpt " +
                   run_dir + "/checkpoint.spc --data " + data + "/test") == 0);
    for (int i = 0; i < 3; ++i)
        REQUIRE(fs::exists(fs::path(seg_dir) / "masks" / ("test_" + std::to_string(i) + ".png")));

    auto ls_dir = (fx.root / "ls").string();
    REQUIRE(fx.run("levelset --config " + cfg.string() + " --out " + ls_dir + " --data " + data +
                   "/train --test " + data + "/test") == 0);
    REQUIRE(fs::exists(fs::path(ls_dir) / "levelset_params.json"));
    REQUIRE(fs::exists(fs::path(ls_dir) / "masks" / "test_0.png"));

    auto eval_dir = (fx.root / "eval").string();
    std::string eval_cmd = "eval --config " + cfg.string() + " --out " + eval_dir + " --data " +
                           data + "/test --pred fcn=" + seg_dir + "/masks --pred levelset=" +
                           ls_dir + "/masks";
    REQUIRE(fx.run(eval_cmd) == 0);
    REQUIRE(fs::exists(fs::path(eval_dir) / "records.csv"));
    REQUIRE(fs::exists(fs::path(eval_dir) / "groups.csv"));
    REQUIRE(fs::exists(fs::path(eval_dir) / "tests.csv"));
    auto records = slurp(fs::path(eval_dir) / "records.csv");
    REQUIRE(std::count(records.begin(), records.end(), '\n') == 1 + 2 * 3);  // header + 2x3 rows
    auto tests_csv = slurp(fs::path(eval_dir) / "tests.csv");
    REQUIRE(std::count(tests_csv.begin(), tests_csv.end(), '\n') == 2);  // header + requested pair

    // re-running eval reproduces byte-identical CSVs
    auto eval2 = (fx.root / "eval2").string();
    REQUIRE(fx.run("eval --config " + cfg.string() + " --out " + eval2 + " --data " + data +
                   "/test --pred fcn=" + seg_dir + "/masks --pred levelset=" + ls_dir +
                   "/masks") == 0);
    REQUIRE(slurp(fs::path(eval_dir) / "records.csv") == slurp(fs::path(eval2) / "records.csv"));

    // plot regeneration from the report directory
    REQUIRE(fx.run("plot --report " + eval_dir) == 0);
    REQUIRE(fs::exists(fs::path(eval_dir) / "boxplot_fcn.svg"));
}

TEST_CASE("single-image segmentation writes one mask") {
    CliFixture fx;
    auto cfg = fx.write_config({});
    auto data = (fx.root / "data").string();
    REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + data) == 0);
    auto run_dir = (fx.root / "run").string();
    REQUIRE(fx.run("train --config " + cfg.string() + " --out " + run_dir + " --data " + data) ==
            0);
    auto seg_dir = (fx.root / "seg1").string();
    REQUIRE(fx.run("segment --config " + cfg.string() + " --out " + seg_dir + " --ckpt " +
                   run_dir + "/checkpoint.spc --image " + data + "/test/images/test_1.png") == 0);
    REQUIRE(fs::exists(fs::path(seg_dir) / "masks" / "test_1.png"));
}

TEST_CASE("usage and config errors exit with code 2") {
    CliFixture fx;
    std::string out;

    SECTION("bad backbone name") {
        auto cfg = fx.write_config({{"train", {{"backbone", "resnext"}, {"regime", "fcn"}}}});
        REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + (fx.root / "x").string(),
                       &out) == 2);
        REQUIRE(out.find("backbone") != std::string::npos);
    }
    SECTION("unknown config key") {
        auto cfg = fx.write_config({{"trian", json::object()}});
        REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + (fx.root / "x").string(),
                       &out) == 2);
        REQUIRE(out.find("unknown key") != std::string::npos);
    }
    SECTION("invalid split sizes") {
        auto cfg = fx.write_config({{"data", {{"n_train", 0}, {"n_val", 1}, {"n_test", 1}}}});
        REQUIRE(fx.run("gen-data --config " + cfg.string() + " --out " + (fx.root / "x").string(),
                       &out) == 2);
    }
    SECTION("missing checkpoint") {
        auto cfg = fx.write_config({});
        REQUIRE(fx.run("segment --config " + cfg.string() + " --out " + (fx.root / "x").string() +
                           " --ckpt /nonexistent.spc --image foo.png",
                       &out) == 2);
    }
    SECTION("plot on a directory without reports") {
        fs::create_directories(fx.root / "empty");
        REQUIRE(fx.run("plot --report " + (fx.root / "empty").string(), &out) == 2);
    }
    SECTION("missing config") {
        REQUIRE(fx.run("gen-data", &out) == 2);
    }
}
