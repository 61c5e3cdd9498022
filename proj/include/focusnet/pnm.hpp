#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace focusnet {

// Binary portable anymap, 8-bit only: P5 (grayscale) and P6 (RGB).
struct PnmImage {
    int width = 0;
    int height = 0;
    int channels = 1;                  // 1 for P5, 3 for P6
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

PnmImage read_pnm(const std::string& path);
void write_pnm(const PnmImage& img, const std::string& path);

}  // namespace focusnet
