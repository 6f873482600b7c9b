#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsal/fusion.hpp"  // Waveform

namespace vsal::img {

// Interleaved row-major 8-bit image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    std::size_t height = 0, width = 0, channels = 1;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& image);

// PCM16 mono WAV.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& wav);

}  // namespace vsal::img
