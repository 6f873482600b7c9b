#include "vsal/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "vsal/error.hpp"

namespace vsal::img {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

void u16_le(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

}  // namespace

ImageU8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("read_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("read_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("read_png: failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Canonicalize to 8-bit gray or RGB without alpha.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    png_read_update_info(png, info);

    ImageU8 out;
    out.height = png_get_image_height(png, info);
    out.width = png_get_image_width(png, info);
    out.channels = png_get_channels(png, info);
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("read_png: unsupported channel count in " + path);
    }
    out.pixels.resize(out.height * out.width * out.channels);
    std::vector<png_bytep> rows(out.height);
    for (std::size_t y = 0; y < out.height; ++y) {
        rows[y] = out.pixels.data() + y * out.width * out.channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::string& path, const ImageU8& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw ValueError("write_png: channels must be 1 or 3");
    }
    if (image.pixels.size() != image.height * image.width * image.channels) {
        throw ValueError("write_png: pixel buffer does not match dimensions");
    }
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("write_png: cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("write_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("write_png: failed to encode " + path);
    }

    png_init_io(png, fp.get());
    // fixed settings keep regeneration byte-identical
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(image.height);
    for (std::size_t y = 0; y < image.height; ++y) {
        rows[y] = const_cast<png_bytep>(image.pixels.data() + y * image.width * image.channels);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Waveform read_wav(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("read_wav: cannot open " + path);

    auto read_bytes = [&](std::size_t n) {
        std::vector<std::uint8_t> buf(n);
        if (std::fread(buf.data(), 1, n, fp.get()) != n) {
            throw IoError("read_wav: truncated file " + path);
        }
        return buf;
    };
    auto get_u32 = [](const std::vector<std::uint8_t>& b, std::size_t off) {
        return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
               (static_cast<std::uint32_t>(b[off + 2]) << 16) |
               (static_cast<std::uint32_t>(b[off + 3]) << 24);
    };
    auto get_u16 = [](const std::vector<std::uint8_t>& b, std::size_t off) {
        return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[off]) |
                                          (static_cast<std::uint16_t>(b[off + 1]) << 8));
    };

    const auto riff = read_bytes(12);
    if (std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0) {
        throw IoError("read_wav: not a RIFF/WAVE file: " + path);
    }

    Waveform out;
    bool got_fmt = false;
    while (true) {
        std::uint8_t hdr[8];
        if (std::fread(hdr, 1, 8, fp.get()) != 8) break;
        const std::uint32_t chunk_size = static_cast<std::uint32_t>(hdr[4]) | (hdr[5] << 8) |
                                         (hdr[6] << 16) | (static_cast<std::uint32_t>(hdr[7]) << 24);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            const auto fmt = read_bytes(chunk_size);
            if (get_u16(fmt, 0) != 1 || get_u16(fmt, 2) != 1 || get_u16(fmt, 14) != 16) {
                throw IoError("read_wav: only PCM16 mono is supported: " + path);
            }
            out.sample_rate = static_cast<int>(get_u32(fmt, 4));
            got_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            const auto data = read_bytes(chunk_size);
            out.samples.resize(chunk_size / 2);
            for (std::size_t i = 0; i < out.samples.size(); ++i) {
                const std::int16_t s = static_cast<std::int16_t>(
                    static_cast<std::uint16_t>(data[2 * i]) |
                    (static_cast<std::uint16_t>(data[2 * i + 1]) << 8));
                out.samples[i] = static_cast<float>(s) / 32768.0f;
            }
        } else {
            if (std::fseek(fp.get(), static_cast<long>(chunk_size), SEEK_CUR) != 0) break;
        }
    }
    if (!got_fmt || out.samples.empty()) throw IoError("read_wav: missing fmt/data chunks: " + path);
    return out;
}

void write_wav(const std::string& path, const Waveform& wav) {
    if (wav.samples.empty()) throw ValueError("write_wav: empty waveform");
    std::vector<std::uint8_t> buf;
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(wav.samples.size() * 2);
    buf.reserve(44 + data_bytes);

    buf.insert(buf.end(), {'R', 'I', 'F', 'F'});
    u32_le(buf, 36 + data_bytes);
    buf.insert(buf.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    u32_le(buf, 16);
    u16_le(buf, 1);  // PCM
    u16_le(buf, 1);  // mono
    u32_le(buf, static_cast<std::uint32_t>(wav.sample_rate));
    u32_le(buf, static_cast<std::uint32_t>(wav.sample_rate) * 2);
    u16_le(buf, 2);   // block align
    u16_le(buf, 16);  // bits per sample
    buf.insert(buf.end(), {'d', 'a', 't', 'a'});
    u32_le(buf, data_bytes);
    for (float s : wav.samples) {
        const float clamped = s < -1.0f ? -1.0f : (s > 1.0f ? 1.0f : s);
        const auto q = static_cast<std::int16_t>(std::lrint(clamped * 32767.0f));
        u16_le(buf, static_cast<std::uint16_t>(q));
    }

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("write_wav: cannot open " + path + " for writing");
    if (std::fwrite(buf.data(), 1, buf.size(), fp.get()) != buf.size()) {
        throw IoError("write_wav: short write to " + path);
    }
}

}  // namespace vsal::img
