#pragma once

#include <filesystem>
#include <string>

#include "lfcal/lightfield.hpp"

namespace lfcal {

/// Binary PGM (P5, one channel) or PPM (P6, three channels), 8 bit.
/// Samples map linearly: byte / maxval. Throws ParseError.
Image decode_pnm(const std::string& bytes);
/// Samples are clamped to [0, 1] and rounded to 8 bit with maxval 255.
std::string encode_pnm(const Image& img);

Image read_image(const std::filesystem::path& path);
/// Written through a temporary file renamed into place.
void write_image(const Image& img, const std::filesystem::path& path);

}  // namespace lfcal
