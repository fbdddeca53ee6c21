#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spcgan/autodiff.hpp"
#include "spcgan/image.hpp"

namespace spcgan {

using json = nlohmann::json;

enum class Backbone { resnet9, unet };

inline const char* to_string(Backbone b) { return b == Backbone::resnet9 ? "resnet9" : "unet"; }
inline Backbone backbone_from_string(const std::string& s) {
    if (s == "resnet9") return Backbone::resnet9;
    if (s == "unet") return Backbone::unet;
    throw ValidationError("unknown backbone: " + s);
}

struct GeneratorConfig {
    Backbone backbone = Backbone::resnet9;
    int in_channels = 1;
    int out_channels = 1;
    int base_width = 64;
    int n_res_blocks = 9;  // resnet9 only
    int unet_depth = 4;    // unet only

    void validate() const {
        if (base_width < 1) throw ValidationError("GeneratorConfig.base_width: must be >= 1");
        if (n_res_blocks < 1) throw ValidationError("GeneratorConfig.n_res_blocks: must be >= 1");
        if (unet_depth < 1) throw ValidationError("GeneratorConfig.unet_depth: must be >= 1");
        if (in_channels != 1 || out_channels != 1)
            throw ValidationError("GeneratorConfig: single-channel in/out only");
    }

    json to_json() const {
        return {{"backbone", to_string(backbone)}, {"in_channels", in_channels},
                {"out_channels", out_channels},    {"base_width", base_width},
                {"n_res_blocks", n_res_blocks},    {"unet_depth", unet_depth}};
    }
    static GeneratorConfig from_json(const json& j) {
        GeneratorConfig c;
        c.backbone = backbone_from_string(j.at("backbone").get<std::string>());
        c.in_channels = j.at("in_channels").get<int>();
        c.out_channels = j.at("out_channels").get<int>();
        c.base_width = j.at("base_width").get<int>();
        c.n_res_blocks = j.at("n_res_blocks").get<int>();
        c.unet_depth = j.at("unet_depth").get<int>();
        return c;
    }
};

enum class DiscKind { pixelwise_forward, patch_backward };

inline const char* to_string(DiscKind k) {
    return k == DiscKind::pixelwise_forward ? "pixelwise_forward" : "patch_backward";
}
inline DiscKind disc_kind_from_string(const std::string& s) {
    if (s == "pixelwise_forward") return DiscKind::pixelwise_forward;
    if (s == "patch_backward") return DiscKind::patch_backward;
    throw ValidationError("unknown discriminator kind: " + s);
}

struct DiscriminatorConfig {
    DiscKind kind = DiscKind::pixelwise_forward;
    int base_width = 64;
    int n_layers = 3;

    void validate() const {
        if (base_width < 1) throw ValidationError("DiscriminatorConfig.base_width: must be >= 1");
        if (n_layers < 1) throw ValidationError("DiscriminatorConfig.n_layers: must be >= 1");
    }

    json to_json() const {
        return {{"kind", to_string(kind)}, {"base_width", base_width}, {"n_layers", n_layers}};
    }
    static DiscriminatorConfig from_json(const json& j) {
        DiscriminatorConfig c;
        c.kind = disc_kind_from_string(j.at("kind").get<std::string>());
        c.base_width = j.at("base_width").get<int>();
        c.n_layers = j.at("n_layers").get<int>();
        return c;
    }
};

namespace nn {

template <typename T>
struct ParameterT {
    std::string name;
    VarPtrT<T> var;
};

// A built network: persistent parameter leaves plus a graph-building closure.
template <typename T>
struct NetT {
    std::string arch;
    json cfg;
    uint64_t seed = 0;
    int divisor = 1;  // input dims must be divisible by this
    std::vector<ParameterT<T>> params;
    std::function<VarPtrT<T>(const VarPtrT<T>&)> fn;

    int64_t parameter_count() const {
        int64_t n = 0;
        for (const auto& p : params) n += p.var->v.numel();
        return n;
    }

    void check_input(const TensorT<T>& t) const {
        if (t.rank() != 3) throw ShapeError(arch + ": input must be (C,H,W)");
        if (t.dim(1) % divisor != 0 || t.dim(2) % divisor != 0)
            throw ShapeError(arch + ": input " + std::to_string(t.dim(1)) + "x" +
                             std::to_string(t.dim(2)) + " not divisible by " +
                             std::to_string(divisor));
    }

    VarPtrT<T> operator()(const VarPtrT<T>& x) const {
        check_input(x->v);
        return fn(x);
    }

    std::vector<VarPtrT<T>> param_vars() const {
        std::vector<VarPtrT<T>> out;
        out.reserve(params.size());
        for (const auto& p : params) out.push_back(p.var);
        return out;
    }
};

template <typename T>
using NetHandleT = std::shared_ptr<NetT<T>>;

using Net = NetT<float>;
using NetHandle = NetHandleT<float>;

namespace detail {

template <typename T>
struct ConvP {
    VarPtrT<T> w, b;
};

template <typename T>
ConvP<T> add_conv(NetT<T>& net, const std::string& name, int oc, int ic, int k) {
    ConvP<T> p{leaf(TensorT<T>({oc, ic, k, k})), leaf(TensorT<T>({oc}))};
    net.params.push_back({name + ".w", p.w});
    net.params.push_back({name + ".b", p.b});
    return p;
}

template <typename T>
ConvP<T> add_convT(NetT<T>& net, const std::string& name, int ic, int oc, int k) {
    ConvP<T> p{leaf(TensorT<T>({ic, oc, k, k})), leaf(TensorT<T>({oc}))};
    net.params.push_back({name + ".w", p.w});
    net.params.push_back({name + ".b", p.b});
    return p;
}

}  // namespace detail

// Gaussian N(0, 0.02) for every convolutional weight, zero biases. The draw
// order is the parameter registration order, so (cfg, seed) fully determines
// the parameter vector.
template <typename T>
void init_weights(const NetHandleT<T>& net, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x11717));
    for (auto& p : net->params) {
        if (p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".w") == 0) {
            for (T& v : p.var->v.data) v = T(rng.normal(0.0, 0.02));
        } else {
            p.var->v.fill(T(0));
        }
        if (!p.var->g.data.empty()) p.var->g.fill(T(0));
    }
}

template <typename T = float>
NetHandleT<T> build_resnet_generator(const GeneratorConfig& cfg, uint64_t seed) {
    auto net = std::make_shared<NetT<T>>();
    net->arch = "resnet9";
    net->cfg = cfg.to_json();
    net->seed = seed;
    net->divisor = 4;  // two stride-2 stages
    const int w = cfg.base_width;

    auto head = detail::add_conv(*net, "head", w, cfg.in_channels, 7);
    auto down1 = detail::add_conv(*net, "down1", 2 * w, w, 3);
    auto down2 = detail::add_conv(*net, "down2", 4 * w, 2 * w, 3);
    std::vector<std::pair<detail::ConvP<T>, detail::ConvP<T>>> blocks;
    for (int i = 0; i < cfg.n_res_blocks; ++i) {
        auto c1 = detail::add_conv(*net, "res" + std::to_string(i) + ".conv1", 4 * w, 4 * w, 3);
        auto c2 = detail::add_conv(*net, "res" + std::to_string(i) + ".conv2", 4 * w, 4 * w, 3);
        blocks.emplace_back(c1, c2);
    }
    auto up1 = detail::add_convT(*net, "up1", 4 * w, 2 * w, 3);
    auto up2 = detail::add_convT(*net, "up2", 2 * w, w, 3);
    auto tail = detail::add_conv(*net, "tail", cfg.out_channels, w, 7);

    net->fn = [=](const VarPtrT<T>& x) {
        auto h = instance_norm_relu(conv2d_reflect(x, head.w, head.b));
        h = instance_norm_relu(conv2d(h, down1.w, down1.b, 2, 1));
        h = instance_norm_relu(conv2d(h, down2.w, down2.b, 2, 1));
        for (const auto& [c1, c2] : blocks) {
            auto r = instance_norm_relu(conv2d_reflect(h, c1.w, c1.b));
            r = instance_norm(conv2d_reflect(r, c2.w, c2.b));
            h = add(h, r);
        }
        h = instance_norm_relu(conv_transpose2d(h, up1.w, up1.b, 2, 1, 1));
        h = instance_norm_relu(conv_transpose2d(h, up2.w, up2.b, 2, 1, 1));
        return vtanh(conv2d_reflect(h, tail.w, tail.b));
    };
    init_weights(net, seed);
    return net;
}

template <typename T = float>
NetHandleT<T> build_unet_generator(const GeneratorConfig& cfg, uint64_t seed) {
    auto net = std::make_shared<NetT<T>>();
    net->arch = "unet";
    net->cfg = cfg.to_json();
    net->seed = seed;
    const int D = cfg.unet_depth, w = cfg.base_width;
    net->divisor = 1 << D;

    auto ch = [&](int level) {  // channels after the down conv at each level
        return level == 0 ? cfg.in_channels : std::min(w << (level - 1), 8 * w);
    };
    std::vector<detail::ConvP<T>> downs, ups;
    for (int i = 0; i < D; ++i)
        downs.push_back(detail::add_conv(*net, "down" + std::to_string(i), ch(i + 1), ch(i), 4));
    for (int i = 0; i < D; ++i) {
        int in_ch = (i == D - 1) ? ch(i + 1) : 2 * ch(i + 1);
        int out_ch = (i == 0) ? cfg.out_channels : ch(i);
        ups.push_back(detail::add_convT(*net, "up" + std::to_string(i), in_ch, out_ch, 4));
    }

    // pix2pix-style skip blocks: block(i, x) = cat(x, up_i(block(i+1, down_i(x))))
    net->fn = [=](const VarPtrT<T>& x) {
        std::function<VarPtrT<T>(int, const VarPtrT<T>&)> block =
            [&](int i, const VarPtrT<T>& in) -> VarPtrT<T> {
            VarPtrT<T> d = conv2d(i == 0 ? in : leaky_relu(in, T(0.2)), downs[size_t(i)].w,
                                  downs[size_t(i)].b, 2, 1);
            if (i > 0 && i < D - 1) d = instance_norm(d);
            VarPtrT<T> u;
            if (i == D - 1) {
                u = conv_transpose2d(relu(d), ups[size_t(i)].w, ups[size_t(i)].b, 2, 1, 0);
            } else {
                auto sub = block(i + 1, d);
                u = conv_transpose2d(relu(sub), ups[size_t(i)].w, ups[size_t(i)].b, 2, 1, 0);
            }
            if (i == 0) return vtanh(u);
            u = instance_norm(u);
            return concat_channels(in, u);
        };
        return block(0, x);
    };
    init_weights(net, seed);
    return net;
}

template <typename T = float>
NetHandleT<T> build_generator(const GeneratorConfig& cfg, uint64_t seed) {
    cfg.validate();
    return cfg.backbone == Backbone::resnet9 ? build_resnet_generator<T>(cfg, seed)
                                             : build_unet_generator<T>(cfg, seed);
}

// Stride-1 trunk with dilated convolutions; per-pixel scores at input
// resolution. Returns raw scores; the log-form loss squashes them.
template <typename T = float>
NetHandleT<T> build_pixelwise_discriminator(const DiscriminatorConfig& cfg, uint64_t seed) {
    auto net = std::make_shared<NetT<T>>();
    net->arch = "pixelwise_forward";
    net->cfg = cfg.to_json();
    net->seed = seed;
    net->divisor = 1;
    const int w = cfg.base_width;

    std::vector<detail::ConvP<T>> convs;
    std::vector<int> dils, chans{1};
    for (int i = 0; i < cfg.n_layers; ++i) {
        int oc = w;  // constant-width trunk keeps the stride-1 layers cheap
        convs.push_back(detail::add_conv(*net, "conv" + std::to_string(i), oc, chans.back(), 3));
        chans.push_back(oc);
        dils.push_back(1 << std::min(i, 3));
    }
    auto out = detail::add_conv(*net, "out", 1, chans.back(), 3);

    net->fn = [=](const VarPtrT<T>& x) {
        VarPtrT<T> h = x;
        for (size_t i = 0; i < convs.size(); ++i) {
            int d = dils[i];
            h = conv2d(h, convs[i].w, convs[i].b, 1, d, d);
            if (i > 0) h = instance_norm(h);
            h = leaky_relu(h, T(0.2));
        }
        return conv2d(h, out.w, out.b, 1, 1);
    };
    init_weights(net, seed);
    return net;
}

// 70x70-receptive-field patch discriminator (three stride-2 layers at the
// default n_layers = 3). Spatially reduced raw score map.
template <typename T = float>
NetHandleT<T> build_patch_discriminator(const DiscriminatorConfig& cfg, uint64_t seed) {
    auto net = std::make_shared<NetT<T>>();
    net->arch = "patch_backward";
    net->cfg = cfg.to_json();
    net->seed = seed;
    net->divisor = 1;
    const int w = cfg.base_width;

    std::vector<detail::ConvP<T>> convs;
    std::vector<int> strides, chans{1};
    for (int i = 0; i < cfg.n_layers; ++i) {
        int oc = std::min(w << i, 8 * w);
        convs.push_back(detail::add_conv(*net, "conv" + std::to_string(i), oc, chans.back(), 4));
        chans.push_back(oc);
        strides.push_back(2);
    }
    int oc = std::min(w << cfg.n_layers, 8 * w);
    convs.push_back(
        detail::add_conv(*net, "conv" + std::to_string(cfg.n_layers), oc, chans.back(), 4));
    chans.push_back(oc);
    strides.push_back(1);
    auto out = detail::add_conv(*net, "out", 1, chans.back(), 4);

    net->fn = [=](const VarPtrT<T>& x) {
        VarPtrT<T> h = x;
        for (size_t i = 0; i < convs.size(); ++i) {
            h = conv2d(h, convs[i].w, convs[i].b, strides[i], 1);
            if (i > 0) h = instance_norm(h);
            h = leaky_relu(h, T(0.2));
        }
        return conv2d(h, out.w, out.b, 1, 1);
    };
    init_weights(net, seed);
    return net;
}

template <typename T = float>
NetHandleT<T> build_discriminator(const DiscriminatorConfig& cfg, uint64_t seed) {
    cfg.validate();
    return cfg.kind == DiscKind::pixelwise_forward ? build_pixelwise_discriminator<T>(cfg, seed)
                                                   : build_patch_discriminator<T>(cfg, seed);
}

// Inference entry point: runs the net on an image-shaped tensor and checks
// the result is finite.
template <typename T>
TensorT<T> forward(const NetHandleT<T>& net, const TensorT<T>& input) {
    net->check_input(input);
    VarPtrT<T> out = net->fn(constant(input));
    if (!out->v.all_finite()) throw NumericFault(net->arch + ": non-finite output");
    return out->v;
}

inline Tensor forward(const NetHandle& net, const GrayImage& img) {
    return forward(net, img.to_tensor());
}

// ---------------------------------------------------------------------------
// Versioned binary tensor container (checkpoints)
// ---------------------------------------------------------------------------

constexpr char kContainerMagic[8] = {'S', 'P', 'C', 'G', 'A', 'N', 'v', '1'};

inline void write_tensor_container(
    const std::string& path, const json& header,
    const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_tensor_container: cannot write " + path);
    out.write(kContainerMagic, 8);
    std::string hdr = header.dump();
    uint64_t hlen = hdr.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hdr.data(), std::streamsize(hdr.size()));
    uint32_t n = uint32_t(tensors.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    for (const auto& [name, t] : tensors) {
        uint32_t nl = uint32_t(name.size());
        out.write(reinterpret_cast<const char*>(&nl), 4);
        out.write(name.data(), nl);
        uint32_t rank = uint32_t(t->shape.size());
        out.write(reinterpret_cast<const char*>(&rank), 4);
        for (int d : t->shape) {
            uint32_t dv = uint32_t(d);
            out.write(reinterpret_cast<const char*>(&dv), 4);
        }
        uint64_t len = uint64_t(t->data.size());
        out.write(reinterpret_cast<const char*>(&len), 8);
        out.write(reinterpret_cast<const char*>(t->data.data()), std::streamsize(len * 4));
    }
    if (!out) throw IoError("write_tensor_container: write failed for " + path);
}

inline json read_tensor_container(const std::string& path, std::map<std::string, Tensor>& tensors) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_tensor_container: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kContainerMagic, 8) != 0)
        throw IoError("read_tensor_container: bad magic/version in " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hdr(hlen, '\0');
    in.read(hdr.data(), std::streamsize(hlen));
    json header = json::parse(hdr);
    uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t nl = 0;
        in.read(reinterpret_cast<char*>(&nl), 4);
        std::string name(nl, '\0');
        in.read(name.data(), nl);
        uint32_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), 4);
        std::vector<int> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) {
            uint32_t dv = 0;
            in.read(reinterpret_cast<char*>(&dv), 4);
            shape[d] = int(dv);
        }
        uint64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 8);
        Tensor t(shape);
        if (uint64_t(t.numel()) != len)
            throw IoError("read_tensor_container: length mismatch for " + name);
        in.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(len * 4));
        tensors.emplace(name, std::move(t));
    }
    if (!in) throw IoError("read_tensor_container: truncated file " + path);
    return header;
}

template <typename T>
void load_params(const NetHandleT<T>& net, const std::map<std::string, Tensor>& tensors,
                 const std::string& prefix) {
    for (auto& p : net->params) {
        auto it = tensors.find(prefix + p.name);
        if (it == tensors.end()) throw IoError("load_params: missing tensor " + prefix + p.name);
        if (it->second.shape != p.var->v.shape)
            throw IoError("load_params: shape mismatch for " + prefix + p.name);
        p.var->v = it->second.template cast<T>();
    }
}

}  // namespace nn

}  // namespace spcgan
