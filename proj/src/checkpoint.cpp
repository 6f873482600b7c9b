#include "vsal/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>

#include "vsal/error.hpp"

namespace vsal {

namespace {

constexpr char kMagic[4] = {'V', 'N', 'T', '1'};
constexpr const char* kMetaName = "__meta";

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back(v >> 8);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void append_record(std::vector<std::uint8_t>& out, const std::string& name,
                   const Shape& shape, const std::vector<float>& data) {
    if (name.size() > 0xffff) throw ValueError("save_checkpoint: record name too long");
    if (shape.size() > 0xff) throw ValueError("save_checkpoint: rank exceeds format limit");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) {
        if (d > 0xffffffffull) throw ValueError("save_checkpoint: dimension overflow");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (float v : data) put_f32(out, v);
}

// Metadata packed as 16-bit halves so each value is exact in f32.
std::vector<float> pack_meta(const CheckpointMeta& m) {
    return {
        static_cast<float>(m.step & 0xffff),
        static_cast<float>(m.step >> 16),
        static_cast<float>(m.seed & 0xffff),
        static_cast<float>((m.seed >> 16) & 0xffff),
        static_cast<float>((m.seed >> 32) & 0xffff),
        static_cast<float>((m.seed >> 48) & 0xffff),
        static_cast<float>(m.config_hash & 0xffff),
        static_cast<float>(m.config_hash >> 16),
    };
}

CheckpointMeta unpack_meta(const std::vector<float>& v) {
    CheckpointMeta m;
    if (v.size() != 8) return m;
    auto u16 = [&](int i) { return static_cast<std::uint64_t>(v[i]); };
    m.step = static_cast<std::uint32_t>(u16(0) | (u16(1) << 16));
    m.seed = u16(2) | (u16(3) << 16) | (u16(4) << 32) | (u16(5) << 48);
    m.config_hash = static_cast<std::uint32_t>(u16(6) | (u16(7) << 16));
    return m;
}

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), fp_(std::fopen(path.c_str(), "rb")) {
        if (!fp_) throw IoError("load_checkpoint: cannot open " + path);
    }

    std::vector<std::uint8_t> bytes(std::size_t n) {
        std::vector<std::uint8_t> buf(n);
        if (std::fread(buf.data(), 1, n, fp_.get()) != n) {
            throw IoError("load_checkpoint: truncated payload in " + path_);
        }
        return buf;
    }

    std::uint16_t u16() {
        const auto b = bytes(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        const auto b = bytes(4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint8_t u8() { return bytes(1)[0]; }

private:
    std::string path_;
    FilePtr fp_;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size() + 1));  // +1 for __meta
    append_record(out, kMetaName, {8}, pack_meta(ckpt.meta));
    for (const auto& [name, tensor] : ckpt.tensors) {
        if (!tensor) throw ValueError("save_checkpoint: null tensor for record " + name);
        append_record(out, name, tensor->shape, tensor->data);
    }

    const std::string tmp = path + ".tmp";
    {
        FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw IoError("save_checkpoint: cannot open " + tmp + " for writing");
        if (std::fwrite(out.data(), 1, out.size(), fp.get()) != out.size()) {
            throw IoError("save_checkpoint: short write to " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("save_checkpoint: rename to " + path + " failed: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    const auto magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) {
        throw IoError("load_checkpoint: bad magic in " + path);
    }
    const std::uint32_t count = r.u32();

    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        const auto name_bytes = r.bytes(name_len);
        const std::string name(name_bytes.begin(), name_bytes.end());
        const std::uint8_t rank = r.u8();
        Shape shape(rank);
        std::size_t numel = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            shape[d] = r.u32();
            if (shape[d] == 0) throw IoError("load_checkpoint: zero dimension in record " + name);
            if (numel > (1ull << 32) / shape[d]) {
                throw IoError("load_checkpoint: dimension overflow in record " + name);
            }
            numel *= shape[d];
        }
        const auto payload = r.bytes(numel * 4);
        std::vector<float> data(numel);
        std::memcpy(data.data(), payload.data(), numel * 4);

        if (name == kMetaName) {
            ckpt.meta = unpack_meta(data);
        } else {
            ckpt.tensors.emplace_back(name, make_tensor<float>(shape, std::move(data)));
        }
    }
    return ckpt;
}

std::uint64_t checkpoint_payload_hash(const Checkpoint& ckpt) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, tensor] : ckpt.tensors) {
        mix(name.data(), name.size());
        mix(tensor->data.data(), tensor->data.size() * sizeof(float));
    }
    return h;
}

std::uint32_t fnv1a32(const std::string& s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

}  // namespace vsal
