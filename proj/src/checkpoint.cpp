#include "vcformer/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vcformer {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) {
            throw DataError("checkpoint: truncated at byte " + std::to_string(pos));
        }
    }
    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>(
            (static_cast<unsigned char>(buf[pos])) |
            (static_cast<unsigned char>(buf[pos + 1]) << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i]))
                 << (8 * i);
        pos += 8;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string out;
    out += "VCFM";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.config_json.size()));
    out += ckpt.config_json;
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        if (name.size() > 0xffff) {
            throw DataError("checkpoint: tensor name too long: " + name);
        }
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put_u64(out, e);
        out.push_back(static_cast<char>(tensor.dtype() == DType::F32 ? 0 : 1));
        if (tensor.dtype() == DType::F32) {
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                auto f = static_cast<float>(tensor[i]);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(out, bits);
            }
        } else {
            for (std::size_t i = 0; i < tensor.size(); ++i) {
                double d = tensor[i];
                std::uint64_t bits;
                std::memcpy(&bits, &d, 8);
                put_u64(out, bits);
            }
        }
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw DataError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("checkpoint: cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(file)),
                    std::istreambuf_iterator<char>());
    Reader r{buf};
    if (r.bytes(4) != "VCFM") {
        throw DataError("checkpoint: bad magic in '" + path + "'");
    }
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported format version " +
                        std::to_string(version));
    }
    Checkpoint ckpt;
    std::uint32_t config_len = r.u32();
    ckpt.config_json = r.bytes(config_len);
    std::uint32_t count = r.u32();
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len = r.u16();
        std::string name = r.bytes(name_len);
        std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (std::uint32_t a = 0; a < rank; ++a) {
            shape[a] = static_cast<std::size_t>(r.u64());
            numel *= shape[a];
        }
        unsigned char tag = static_cast<unsigned char>(r.bytes(1)[0]);
        if (tag > 1) {
            throw DataError("checkpoint: unknown dtype tag " + std::to_string(tag) +
                            " for tensor '" + name + "'");
        }
        std::vector<double> data(numel);
        if (tag == 0) {
            for (std::size_t c = 0; c < numel; ++c) {
                std::uint32_t bits = r.u32();
                float f;
                std::memcpy(&f, &bits, 4);
                data[c] = static_cast<double>(f);
            }
        } else {
            for (std::size_t c = 0; c < numel; ++c) {
                std::uint64_t bits = r.u64();
                double d;
                std::memcpy(&d, &bits, 8);
                data[c] = d;
            }
        }
        ckpt.tensors.emplace_back(
            name, Tensor(std::move(shape), std::move(data),
                         tag == 0 ? DType::F32 : DType::F64));
    }
    if (r.pos != buf.size()) {
        throw DataError("checkpoint: " + std::to_string(buf.size() - r.pos) +
                        " trailing bytes in '" + path + "'");
    }
    return ckpt;
}

Checkpoint make_checkpoint(const ModelParams& params, const Tensor& norm_mean,
                           const Tensor& norm_std, const std::string& config_json) {
    Checkpoint ckpt;
    ckpt.config_json = config_json;
    ckpt.tensors = named_tensors(params);
    ckpt.tensors.emplace_back("norm.mean", norm_mean);
    ckpt.tensors.emplace_back("norm.std", norm_std);
    return ckpt;
}

void load_into_model(const Checkpoint& ckpt, ModelParams& params) {
    params.for_each([&](const std::string& name, Tensor& t) {
        const Tensor* stored = ckpt.find(name);
        if (!stored) {
            throw DataError("checkpoint: missing tensor '" + name + "'");
        }
        if (!stored->same_shape(t)) {
            throw DataError("checkpoint: tensor '" + name + "' has shape " +
                            stored->shape_str() + ", model expects " + t.shape_str());
        }
        t = *stored;
    });
}

} // namespace vcformer
