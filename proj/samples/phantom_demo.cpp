// Generates a handful of phantoms and writes them as 16-bit PNGs so the
// texture (speckle, fuzzy boundary, posterior shadow, depth falloff) can be
// inspected by eye.

#include <cstdio>
#include <filesystem>

#include "spcgan/manifest.hpp"
#include "spcgan/phantom.hpp"

using namespace spcgan;

int main(int argc, char** argv) {
    std::filesystem::path out = argc > 1 ? argv[1] : "phantom_demo_out";
    std::filesystem::create_directories(out);
    PhantomSpec spec;
    spec.canvas_height = spec.canvas_width = 128;
    spec.lesion_radius_min = 16;
    spec.lesion_radius_max = 32;
    spec.shadow_probability = 0.5f;
    std::vector<PairedSample> samples;
    for (uint64_t seed = 0; seed < 6; ++seed) samples.push_back(generate_phantom(spec, seed));
    auto manifest = write_dataset(samples, out, Split::test, 0);
    std::printf("wrote %zu phantoms under %s\n", manifest.samples.size(), out.string().c_str());
    for (const auto& s : samples)
        std::printf("  %s  class=%s  lesion px=%lld\n", s.id.c_str(), to_string(s.lesion_class),
                    (long long)s.mask.foreground_count());
    return 0;
}
