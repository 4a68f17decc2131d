#include "idte/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace idte {

AdamState AdamState::for_params(const ModelParams& params, AdamHyper hyper) {
    AdamState s;
    s.hyper = hyper;
    for (const auto& [name, t] : params.tensors) {
        s.m.emplace(name, Tensor(t.shape(), 0.0));
        s.v.emplace(name, Tensor(t.shape(), 0.0));
    }
    return s;
}

void adam_step_inplace(ModelParams& params, const GradientMap& grads, AdamState& state) {
    for (const auto& [name, g] : grads) {
        if (!params.contains(name)) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
        if (g.shape() != params.at(name).shape())
            throw ContractError("adam_step: gradient shape " + shape_str(g.shape()) + " does not match parameter '" + name +
                                "' " + shape_str(params.at(name).shape()));
    }
    for (const auto& [name, p] : params.tensors) {
        auto mi = state.m.find(name);
        auto vi = state.v.find(name);
        if (mi == state.m.end() || vi == state.v.end() || mi->second.shape() != p.shape() || vi->second.shape() != p.shape())
            throw ContractError("adam_step: optimizer state does not mirror parameter '" + name + "'");
    }

    const auto& h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);

    for (auto& [name, p] : params.tensors) {
        auto gi = grads.find(name);
        auto pd = p.data();
        auto md = state.m.at(name).data();
        auto vd = state.v.at(name).data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            const double g = gi == grads.end() ? 0.0 : gi->second.data()[i];
            md[i] = h.beta1 * md[i] + (1.0 - h.beta1) * g;
            vd[i] = h.beta2 * vd[i] + (1.0 - h.beta2) * g * g;
            const double mhat = md[i] / bc1;
            const double vhat = vd[i] / bc2;
            pd[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
        }
    }
    params.version += 1;
}

AdamResult adam_step(const ModelParams& params, const GradientMap& grads, const AdamState& state) {
    AdamResult r{params, state};
    adam_step_inplace(r.params, grads, r.state);
    return r;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor t({fan_in, fan_out}, 0.0);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw IoError("checkpoint truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    out.write("IDTE", 4);
    put_le<std::uint8_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        if (name.size() > 0xFFFF) throw ContractError("checkpoint: parameter name too long");
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Shape& shape = t.shape();
        if (shape.size() > 0xFF) throw ContractError("checkpoint: rank too large");
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
        for (auto d : shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (double v : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw IoError("checkpoint: write failed");
}

ModelParams read_checkpoint(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "IDTE", 4) != 0) throw IoError("checkpoint: bad magic");
    const auto version = get_le<std::uint8_t>(in);
    if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = get_le<std::uint32_t>(in);
    ModelParams params;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = get_le<std::uint16_t>(in);
        std::string name(len, '\0');
        if (len && !in.read(name.data(), len)) throw IoError("checkpoint truncated");
        const auto rank = get_le<std::uint8_t>(in);
        Shape shape;
        for (std::uint8_t r = 0; r < rank; ++r) shape.push_back(get_le<std::uint32_t>(in));
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<double> data(n);
        for (auto& v : data) v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
        if (!params.tensors.emplace(name, Tensor(shape, std::move(data))).second)
            throw IoError("checkpoint: duplicate tensor '" + name + "'");
    }
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_checkpoint(out, params);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace idte
