#pragma once

#include <string>

#include "depthpl/types.hpp"

// File formats. The in-memory encode/decode functions are strict: any
// deviation from the exact header layout written by the encoders raises
// FormatError. The path-based wrappers raise DataError for unreadable files.
namespace depthpl {

/// "Pf\n<w> <h>\n-1.0\n", little-endian float32 rows bottom to top.
std::string encode_pfm(const DepthMap& depth);
DepthMap decode_pfm(const std::string& bytes);

/// Binary P6, maxval 255; intensities clamped to [0,1] and rounded half
/// away from zero. Three-channel images only.
std::string encode_ppm(const Image& image);
Image decode_ppm(const std::string& bytes);

/// Binary P5 with bytes 0 and 255.
std::string encode_pgm_mask(const PixelMask& mask);
PixelMask decode_pgm_mask(const std::string& bytes);

/// ASCII PLY with float x, y, z and 9 significant digits.
std::string encode_ply(const PointCloud& cloud);
PointCloud decode_ply(const std::string& bytes);

void write_pfm(const std::string& path, const DepthMap& depth);
DepthMap read_pfm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);
Image read_ppm(const std::string& path);
void write_pgm_mask(const std::string& path, const PixelMask& mask);
PixelMask read_pgm_mask(const std::string& path);
void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace depthpl
