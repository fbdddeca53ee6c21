#pragma once

#include <string>
#include <vector>

#include "spcgan/evalstat.hpp"
#include "spcgan/trainer.hpp"

namespace spcgan {

struct SweepSpec {
    std::vector<int> training_sizes;
    std::vector<Regime> regimes;
    Backbone backbone = Backbone::resnet9;
    std::vector<uint64_t> seeds;

    void validate(size_t pool_size) const {
        if (training_sizes.empty() || regimes.empty() || seeds.empty())
            throw ValidationError("SweepSpec: sizes, regimes and seeds must be non-empty");
        for (int s : training_sizes)
            if (s <= 0 || size_t(s) > pool_size)
                throw ValidationError("SweepSpec: size " + std::to_string(s) +
                                      " outside [1, pool=" + std::to_string(pool_size) + "]");
    }
};

// Prefix-nested subset selection: one permutation per sweep seed, the size-k
// cell trains on its first k entries, so smaller subsets are contained in
// larger ones and curves are comparable across sizes.
inline std::vector<size_t> sweep_subset_indices(size_t pool_size, uint64_t seed, size_t k) {
    std::vector<size_t> perm(pool_size);
    for (size_t i = 0; i < pool_size; ++i) perm[i] = i;
    Rng rng(derive_seed(seed, 0x57EE9));
    shuffle_indices(perm, rng);
    perm.resize(k);
    return perm;
}

// One full train/eval per (size, regime, seed) cell against a fixed test set.
inline std::vector<SweepRow> run_sweep(const std::vector<PairedSample>& pool,
                                       const std::vector<PairedSample>& val_set,
                                       const std::vector<PairedSample>& test_set,
                                       const TrainConfig& base_cfg, const SweepSpec& spec,
                                       bool verbose = false) {
    spec.validate(pool.size());
    if (test_set.empty()) throw ValidationError("run_sweep: empty test set");

    std::vector<SweepRow> rows;
    for (uint64_t seed : spec.seeds) {
        for (Regime regime : spec.regimes) {
            for (int size : spec.training_sizes) {
                TrainConfig cfg = base_cfg;
                cfg.regime = regime;
                cfg.generator.backbone = spec.backbone;
                cfg.seed = seed;
                auto subset_ix = sweep_subset_indices(pool.size(), seed, size_t(size));
                std::vector<PairedSample> subset;
                subset.reserve(subset_ix.size());
                for (size_t i : subset_ix) subset.push_back(pool[i]);

                std::string cell = "(size=" + std::to_string(size) +
                                   ", regime=" + std::string(to_string(regime)) +
                                   ", seed=" + std::to_string(seed) + ")";
                if (verbose) std::cout << "[sweep] training cell " << cell << "\n";
                Checkpoint ckpt;
                try {
                    auto [ck, log] = train(subset, val_set, cfg);
                    ckpt = std::move(ck);
                } catch (const Error& e) {
                    throw Error("sweep cell " + cell + ": " + e.what());
                }

                std::vector<double> dscs;
                dscs.reserve(test_set.size());
                for (const auto& s : test_set)
                    dscs.push_back(dice(segment(s.image, ckpt), s.mask));
                double mean = 0.0;
                for (double v : dscs) mean += v;
                mean /= double(dscs.size());
                double sd = 0.0;
                if (dscs.size() > 1) {
                    double acc = 0.0;
                    for (double v : dscs) acc += (v - mean) * (v - mean);
                    sd = std::sqrt(acc / double(dscs.size() - 1));
                }
                rows.push_back({size, to_string(regime), seed, mean, sd});
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.size, a.regime, a.seed) < std::tie(b.size, b.regime, b.seed);
    });
    return rows;
}

}  // namespace spcgan
