#pragma once

#include <map>
#include <string>

#include "crossbid/core/io.hpp"
#include "crossbid/nn/adam.hpp"
#include "crossbid/nn/mlp.hpp"

namespace crossbid::nn {

/// Versioned parameter checkpoint holding named nets plus optional optimizer
/// state and string metadata. Exact byte layout (all little-endian):
///
///   bytes 0..3   magic "CBCK"
///   u32          format version (currently 1)
///   u32          net count N
///   N x:
///     str        name                        (str = u32 length + bytes)
///     u32        width count W; W x i64 layer widths
///     u32        act count A;  A x str activation names
///     f64s       flat parameters             (f64s = u64 count + doubles)
///     u32        has_optimizer (0/1); if 1:
///       f64s m, f64s v, i64 t, f64 lr, f64 clip_norm, f64 beta1, f64 beta2, f64 eps
///   u32          meta count K; K x (str key, str value)
class Checkpoint {
public:
    struct Entry {
        MlpSpec spec;
        Vec theta;
        bool has_adam = false;
        Vec m, v;
        long t = 0;
        OptimizerConfig opt;
    };

    void add(const std::string& name, const Mlp& net) {
        Entry e;
        e.spec = net.spec();
        e.theta = net.theta();
        items_[name] = std::move(e);
    }

    void add(const std::string& name, const Mlp& net, const Adam& adam) {
        Entry e;
        e.spec = net.spec();
        e.theta = net.theta();
        e.has_adam = true;
        e.m = adam.m();
        e.v = adam.v();
        e.t = adam.step_count();
        e.opt = adam.config();
        items_[name] = std::move(e);
    }

    bool has(const std::string& name) const { return items_.count(name) > 0; }

    const Entry& entry(const std::string& name) const {
        auto it = items_.find(name);
        CB_REQUIRE(it != items_.end(), "checkpoint: missing net '", name, "'");
        return it->second;
    }

    Mlp restore(const std::string& name) const {
        const Entry& e = entry(name);
        Mlp net(e.spec);
        net.set_theta(e.theta);
        return net;
    }

    /// Restores a net and, when present, its optimizer state.
    void restore(const std::string& name, Mlp& net, Adam* adam) const {
        const Entry& e = entry(name);
        net = Mlp(e.spec);
        net.set_theta(e.theta);
        if (adam) {
            *adam = Adam(e.has_adam ? e.opt : adam->config(), net.num_params());
            if (e.has_adam) adam->restore(e.m, e.v, e.t);
        }
    }

    std::map<std::string, std::string>& meta() { return meta_; }
    const std::map<std::string, std::string>& meta() const { return meta_; }

    void save(const std::string& path) const {
        BinWriter w(path);
        w.raw("CBCK", 4);
        w.u32(kVersion);
        w.u32(static_cast<std::uint32_t>(items_.size()));
        for (const auto& [name, e] : items_) {
            w.str(name);
            w.u32(static_cast<std::uint32_t>(e.spec.widths.size()));
            for (int x : e.spec.widths) w.i64(x);
            w.u32(static_cast<std::uint32_t>(e.spec.acts.size()));
            for (Act a : e.spec.acts) w.str(act_name(a));
            w.f64s(std::vector<double>(e.theta.data(), e.theta.data() + e.theta.size()));
            w.u32(e.has_adam ? 1 : 0);
            if (e.has_adam) {
                w.f64s(std::vector<double>(e.m.data(), e.m.data() + e.m.size()));
                w.f64s(std::vector<double>(e.v.data(), e.v.data() + e.v.size()));
                w.i64(e.t);
                w.f64(e.opt.lr);
                w.f64(e.opt.clip_norm);
                w.f64(e.opt.beta1);
                w.f64(e.opt.beta2);
                w.f64(e.opt.eps);
            }
        }
        w.u32(static_cast<std::uint32_t>(meta_.size()));
        for (const auto& [k, v] : meta_) {
            w.str(k);
            w.str(v);
        }
        w.close();
    }

    static Checkpoint load(const std::string& path) {
        BinReader r(path);
        char magic[4];
        r.raw(magic, 4);
        CB_REQUIRE(std::string(magic, 4) == "CBCK", "not a checkpoint file: ", path);
        const std::uint32_t version = r.u32();
        CB_REQUIRE(version == kVersion, "checkpoint version mismatch in ", path,
                   ": file has v", version, ", reader supports v", kVersion);
        Checkpoint ck;
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string name = r.str();
            Entry e;
            const std::uint32_t nw = r.u32();
            e.spec.widths.resize(nw);
            for (auto& x : e.spec.widths) x = static_cast<int>(r.i64());
            const std::uint32_t na = r.u32();
            e.spec.acts.resize(na);
            for (auto& a : e.spec.acts) a = act_from_name(r.str());
            e.spec.validate();
            auto th = r.f64s();
            e.theta = Eigen::Map<const Vec>(th.data(), static_cast<Eigen::Index>(th.size()));
            if (r.u32() == 1) {
                e.has_adam = true;
                auto m = r.f64s();
                auto v = r.f64s();
                e.m = Eigen::Map<const Vec>(m.data(), static_cast<Eigen::Index>(m.size()));
                e.v = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
                e.t = static_cast<long>(r.i64());
                e.opt.lr = r.f64();
                e.opt.clip_norm = r.f64();
                e.opt.beta1 = r.f64();
                e.opt.beta2 = r.f64();
                e.opt.eps = r.f64();
            }
            ck.items_[name] = std::move(e);
        }
        const std::uint32_t nm = r.u32();
        for (std::uint32_t i = 0; i < nm; ++i) {
            std::string k = r.str();
            ck.meta_[k] = r.str();
        }
        return ck;
    }

private:
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, Entry> items_;
    std::map<std::string, std::string> meta_;
};

} // namespace crossbid::nn
