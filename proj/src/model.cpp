#include "wisppn/model.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "wisppn/common.hpp"
#include "wisppn/kernels.hpp"

namespace wisppn::model {

namespace {

constexpr std::array<std::uint8_t, 4> kCkptMagic = {0x57, 0x53, 0x50, 0x4e};  // "WSPN"
constexpr std::uint8_t kCkptVersion = 0x01;

ConvBn make_conv_bn(const std::string& name, int c_in, int c_out, int k, int stride, int pad) {
    ConvBn cb;
    cb.w = {name + ".w", Tensor({c_out, c_in, k, k}), {}};
    cb.b = {name + ".b", Tensor({c_out}), {}};
    cb.gamma = {name + ".bn.gamma", Tensor::full({c_out}, 1.0), {}};
    cb.beta = {name + ".bn.beta", Tensor({c_out}), {}};
    cb.running_mean = Tensor({c_out});
    cb.running_var = Tensor::full({c_out}, 1.0);
    cb.stride = stride;
    cb.pad = pad;
    return cb;
}

ResidualUnit make_unit(const std::string& name, int c_in, int c_out, int stride) {
    ResidualUnit u;
    u.c1 = make_conv_bn(name + ".c1", c_in, c_out, 3, stride, 1);
    u.c2 = make_conv_bn(name + ".c2", c_out, c_out, 3, 1, 1);
    if (stride != 1 || c_in != c_out)
        u.proj = make_conv_bn(name + ".proj", c_in, c_out, 1, stride, 0);
    return u;
}

Stage make_stage(const std::string& name, int c_in, int c_out, int stride) {
    Stage s;
    s.u1 = make_unit(name + ".u1", c_in, c_out, stride);
    s.u2 = make_unit(name + ".u2", c_out, c_out, 1);
    return s;
}

void visit_conv_bn_params(ConvBn& cb, const std::function<void(Param&)>& fn) {
    fn(cb.w);
    fn(cb.b);
    fn(cb.gamma);
    fn(cb.beta);
}

void visit_unit_params(ResidualUnit& u, const std::function<void(Param&)>& fn) {
    visit_conv_bn_params(u.c1, fn);
    visit_conv_bn_params(u.c2, fn);
    if (u.proj) visit_conv_bn_params(*u.proj, fn);
}

void visit_params(ModelParams& p, const std::function<void(Param&)>& fn) {
    for (Stage* s : {&p.s1, &p.s2, &p.s3, &p.s4}) {
        visit_unit_params(s->u1, fn);
        visit_unit_params(s->u2, fn);
    }
    visit_conv_bn_params(p.dec1, fn);
    fn(p.dec2_w);
    fn(p.dec2_b);
}

void visit_conv_bn_buffers(ConvBn& cb, const std::string& name,
                           const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(name + ".bn.rmean", cb.running_mean);
    fn(name + ".bn.rvar", cb.running_var);
}

void visit_buffers(ModelParams& p,
                   const std::function<void(const std::string&, Tensor&)>& fn) {
    const std::array<std::pair<const char*, Stage*>, 4> stages = {
        std::pair{"s1", &p.s1}, std::pair{"s2", &p.s2}, std::pair{"s3", &p.s3},
        std::pair{"s4", &p.s4}};
    for (auto [sname, s] : stages) {
        for (auto [uname, u] : {std::pair{".u1", &s->u1}, std::pair{".u2", &s->u2}}) {
            const std::string base = std::string(sname) + uname;
            visit_conv_bn_buffers(u->c1, base + ".c1", fn);
            visit_conv_bn_buffers(u->c2, base + ".c2", fn);
            if (u->proj) visit_conv_bn_buffers(*u->proj, base + ".proj", fn);
        }
    }
    visit_conv_bn_buffers(p.dec1, "dec1", fn);
    fn("input.mean", p.input_mean);
    fn("input.std", p.input_std);
}

ModelParams make_skeleton() {
    ModelParams p;
    p.s1 = make_stage("s1", kWindowChannels, 150, 1);
    p.s2 = make_stage("s2", 150, 150, 2);
    p.s3 = make_stage("s3", 150, 300, 2);
    p.s4 = make_stage("s4", 300, 300, 2);
    p.dec1 = make_conv_bn("dec1", kFeatureChannels, kDecoderMidChannels, 3, 1, 1);
    p.dec2_w = {"dec2.w", Tensor({2, kDecoderMidChannels, 1, 1}), {}};
    p.dec2_b = {"dec2.b", Tensor({2}), {}};
    p.input_mean = Tensor({kWindowChannels});
    p.input_std = Tensor::full({kWindowChannels}, 1.0);
    return p;
}

}  // namespace

ModelParams init_params(std::uint64_t seed) {
    ModelParams p = make_skeleton();
    Rng rng(seed);
    visit_params(p, [&rng](Param& prm) {
        // Convolution weights are rank 4; He-initialize from fan-in.
        if (prm.value.rank() == 4) {
            const int fan_in = prm.value.dim(1) * prm.value.dim(2) * prm.value.dim(3);
            const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (std::size_t i = 0; i < prm.value.numel(); ++i)
                prm.value[i] = rng.normal(0.0, stddev);
        }
    });
    return p;
}

std::vector<Param*> collect_params(ModelParams& p) {
    std::vector<Param*> out;
    visit_params(p, [&out](Param& prm) { out.push_back(&prm); });
    return out;
}

std::size_t parameter_count(ModelParams& p) {
    std::size_t n = 0;
    visit_params(p, [&n](Param& prm) { n += prm.value.numel(); });
    return n;
}

void visit_state(ModelParams& p,
                 const std::function<void(const std::string&, Tensor&)>& fn) {
    visit_params(p, [&fn](Param& prm) { fn(prm.name, prm.value); });
    visit_buffers(p, fn);
}

Tensor encoder_forward(const CsiWindow& w) {
    if (w.data.rank() != 3 || w.data.dim(0) != kWindowChannels || w.data.dim(1) != kTxAntennas ||
        w.data.dim(2) != kRxAntennas)
        throw DimensionError("encoder expects a 150x3x3 window, got " + w.data.shape_str());
    Tensor out({kWindowChannels, kEncoderSize, kEncoderSize});
    kernels::bilinear_forward(w.data.data(), out.data(), kWindowChannels, kTxAntennas,
                              kRxAntennas, kEncoderSize, kEncoderSize);
    return out;
}

namespace {

Tensor standardize(const CsiWindow& w, const ModelParams& p) {
    Tensor out(w.data.shape());
    const double* in = w.data.data();
    double* o = out.data();
    const std::size_t plane = static_cast<std::size_t>(kTxAntennas) * kRxAntennas;
    for (int c = 0; c < kWindowChannels; ++c) {
        const double mu = p.input_mean[static_cast<std::size_t>(c)];
        const double sd = p.input_std[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < plane; ++i)
            o[c * plane + i] = (in[c * plane + i] - mu) / sd;
    }
    return out;
}

}  // namespace

Tensor encode_input(const CsiWindow& w, const ModelParams& p) {
    CsiWindow std_w;
    std_w.frame_timestamp_us = w.frame_timestamp_us;
    std_w.data = standardize(w, p);
    return encoder_forward(std_w);
}

Tensor encode_batch(const std::vector<const CsiWindow*>& windows, const ModelParams& p) {
    if (windows.empty()) throw DimensionError("encode_batch needs at least one window");
    const int n = static_cast<int>(windows.size());
    Tensor out({n, kWindowChannels, kEncoderSize, kEncoderSize});
    const std::size_t stride = out.numel() / static_cast<std::size_t>(n);
    for (int i = 0; i < n; ++i) {
        Tensor one = encode_input(*windows[static_cast<std::size_t>(i)], p);
        double* dst = out.data() + static_cast<std::size_t>(i) * stride;
        const double* src = one.data();
        for (std::size_t k = 0; k < stride; ++k) dst[k] = src[k];
    }
    return out;
}

namespace {

ag::Var conv_bn(ag::Graph& g, const ag::Var& x, ConvBn& cb, bool train, ModelParams& mp) {
    ag::Var c = ag::conv2d(g, x, g.param(cb.w), g.param(cb.b), cb.stride, cb.pad);
    return ag::batch_norm2d(g, c, g.param(cb.gamma), g.param(cb.beta), cb.running_mean,
                            cb.running_var, train, mp.bn_momentum, mp.bn_eps);
}

ag::Var residual_unit(ag::Graph& g, const ag::Var& x, ResidualUnit& u, bool train,
                      ModelParams& mp) {
    ag::Var h = ag::relu_(g, conv_bn(g, x, u.c1, train, mp));
    ag::Var h2 = conv_bn(g, h, u.c2, train, mp);
    ag::Var shortcut = u.proj ? conv_bn(g, x, *u.proj, train, mp) : x;
    return ag::relu_(g, ag::add_(g, h2, shortcut));
}

ag::Var run_stage(ag::Graph& g, const ag::Var& x, Stage& s, bool train, ModelParams& mp) {
    return residual_unit(g, residual_unit(g, x, s.u1, train, mp), s.u2, train, mp);
}

}  // namespace

ag::Var extractor(ag::Graph& g, const ag::Var& x, ModelParams& p, bool train,
                  ShapeTrace* trace) {
    const Tensor& xv = x.value();
    const int cdim = xv.rank() == 4 ? 1 : 0;
    if ((xv.rank() != 3 && xv.rank() != 4) || xv.dim(cdim) != kWindowChannels)
        throw DimensionError("extractor expects " + std::to_string(kWindowChannels) +
                             " input channels, got " + xv.shape_str());
    ag::Var h = x;
    Stage* stages[4] = {&p.s1, &p.s2, &p.s3, &p.s4};
    for (int i = 0; i < 4; ++i) {
        h = run_stage(g, h, *stages[i], train, p);
        if (trace) trace->stage_out[static_cast<std::size_t>(i)] = h.shape();
    }
    if (trace) trace->feature_out = h.shape();
    return h;
}

ag::Var decoder(ag::Graph& g, const ag::Var& f, ModelParams& p, bool train) {
    const Tensor& fv = f.value();
    const int cdim = fv.rank() == 4 ? 1 : 0;
    if ((fv.rank() != 3 && fv.rank() != 4) || fv.dim(cdim) != kFeatureChannels)
        throw DimensionError("decoder expects " + std::to_string(kFeatureChannels) +
                             " feature channels, got " + fv.shape_str());
    ag::Var h = ag::relu_(g, conv_bn(g, f, p.dec1, train, p));
    return ag::conv2d(g, h, g.param(p.dec2_w), g.param(p.dec2_b), 1, 0);
}

ag::Var network(ag::Graph& g, const ag::Var& encoded, ModelParams& p, bool train,
                ShapeTrace* trace) {
    ag::Var f = extractor(g, encoded, p, train, trace);
    ag::Var out = decoder(g, f, p, train);
    if (trace) trace->decoder_out = out.shape();
    return out;
}

PPam forward(const CsiWindow& w, ModelParams& p, bool train, ShapeTrace* trace) {
    ag::Graph g(false);
    ag::Var x = g.leaf(encode_input(w, p));
    ag::Var out = network(g, x, p, train, trace);
    return ppam_from_tensor(out.value());
}

std::string checkpoint_bytes(ModelParams& p) {
    struct Entry {
        std::string name;
        Tensor* t;
    };
    std::vector<Entry> entries;
    visit_state(p, [&entries](const std::string& name, Tensor& t) {
        entries.push_back({name, &t});
    });
    Tensor momentum = Tensor::scalar(p.bn_momentum);
    Tensor eps = Tensor::scalar(p.bn_eps);
    entries.push_back({"meta.bn_momentum", &momentum});
    entries.push_back({"meta.bn_eps", &eps});

    // Manifest first so offsets are known before the payload is written.
    std::size_t manifest_bytes = 5 + 4;  // magic, version, tensor count
    for (const Entry& e : entries)
        manifest_bytes += 2 + e.name.size() + 1 + 4 * e.t->shape().size() + 8;

    std::string out;
    for (std::uint8_t b : kCkptMagic) le::put_u8(out, b);
    le::put_u8(out, kCkptVersion);
    le::put_u32(out, static_cast<std::uint32_t>(entries.size()));
    std::size_t offset = manifest_bytes;
    for (const Entry& e : entries) {
        le::put_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out += e.name;
        le::put_u8(out, static_cast<std::uint8_t>(e.t->shape().size()));
        for (int d : e.t->shape()) le::put_u32(out, static_cast<std::uint32_t>(d));
        le::put_u64(out, offset);
        offset += e.t->numel() * 8;
    }
    for (const Entry& e : entries) {
        if constexpr (std::endian::native == std::endian::little) {
            out.append(reinterpret_cast<const char*>(e.t->data()), e.t->numel() * 8);
        } else {
            for (std::size_t i = 0; i < e.t->numel(); ++i) le::put_f64(out, (*e.t)[i]);
        }
    }
    return out;
}

void save_checkpoint(ModelParams& p, const std::string& path) {
    write_file(path, checkpoint_bytes(p));
}

ModelParams load_checkpoint_bytes(const std::string& bytes) {
    try {
        le::Reader r(bytes.data(), bytes.size());
        for (std::size_t i = 0; i < kCkptMagic.size(); ++i)
            if (r.u8() != kCkptMagic[i])
                throw IntegrityError("bad checkpoint magic (expected \"WSPN\")");
        const std::uint8_t version = r.u8();
        if (version != kCkptVersion)
            throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
        const std::uint32_t count = r.u32();

        struct ManifestEntry {
            std::vector<int> shape;
            std::uint64_t offset;
        };
        std::map<std::string, ManifestEntry> manifest;
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint16_t name_len = r.u16();
            const std::string name = r.bytes(name_len);
            const std::uint8_t rank = r.u8();
            ManifestEntry e;
            for (int d = 0; d < rank; ++d) e.shape.push_back(static_cast<int>(r.u32()));
            e.offset = r.u64();
            if (!manifest.emplace(name, std::move(e)).second)
                throw IntegrityError("duplicate tensor name in checkpoint: " + name);
        }

        ModelParams p = make_skeleton();
        auto read_tensor = [&bytes, &manifest](const std::string& name, Tensor& t) {
            auto it = manifest.find(name);
            if (it == manifest.end())
                throw IntegrityError("checkpoint is missing tensor: " + name);
            const ManifestEntry& e = it->second;
            if (e.shape != t.shape())
                throw IntegrityError("checkpoint tensor " + name + " has shape " +
                                     Tensor::shape_str(e.shape) + ", expected " + t.shape_str());
            const std::size_t need = t.numel() * 8;
            if (e.offset + need > bytes.size())
                throw TruncationError("checkpoint truncated: tensor " + name + " ends at byte " +
                                      std::to_string(e.offset + need) + " but file has " +
                                      std::to_string(bytes.size()));
            le::Reader dr(bytes.data() + e.offset, need);
            for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dr.f64();
            manifest.erase(it);
        };

        visit_state(p, read_tensor);
        Tensor momentum = Tensor::scalar(0.0), eps = Tensor::scalar(0.0);
        read_tensor("meta.bn_momentum", momentum);
        read_tensor("meta.bn_eps", eps);
        p.bn_momentum = momentum[0];
        p.bn_eps = eps[0];

        if (!manifest.empty())
            throw IntegrityError("checkpoint has unexpected tensor: " + manifest.begin()->first);
        return p;
    } catch (const TruncationError& e) {
        throw IntegrityError(std::string("corrupt checkpoint: ") + e.what());
    }
}

ModelParams load_checkpoint(const std::string& path) {
    return load_checkpoint_bytes(read_file(path));
}

}  // namespace wisppn::model
