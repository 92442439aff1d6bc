#include "lfcal/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lfcal/dataio.hpp"
#include "lfcal/errors.hpp"

namespace lfcal {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) throw ParseError("truncated PNM header");
    return bytes_.substr(start, pos_ - start);
  }

  int integer(const char* field) {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ParseError(std::string("PNM header: bad ") + field + " '" + t + "'");
    }
    return std::stoi(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() const { return pos_ + 1; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_pnm(const std::string& bytes) {
  HeaderReader reader(bytes);
  const std::string magic = reader.token();
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw ParseError("unsupported image format '" + magic + "' (expected P5 or P6)");
  }
  const int width = reader.integer("width");
  const int height = reader.integer("height");
  const int maxval = reader.integer("maxval");
  if (width < 1 || height < 1) throw ParseError("PNM header: empty image");
  if (maxval < 1 || maxval > 255) {
    throw ParseError("PNM header: only 8-bit images are supported");
  }
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  const std::size_t start = reader.raster_start();
  if (bytes.size() < start + count) throw ParseError("PNM raster is truncated");

  Image img(width, height, channels);
  for (std::size_t k = 0; k < count; ++k) {
    img.samples()[k] = static_cast<unsigned char>(bytes[start + k]) / static_cast<double>(maxval);
  }
  return img;
}

std::string encode_pnm(const Image& img) {
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") +
                    std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.samples().size());
  for (double s : img.samples()) {
    const double v = std::clamp(std::isfinite(s) ? s : 0.0, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  return out;
}

Image read_image(const std::filesystem::path& path) {
  try {
    return decode_pnm(read_file(path));
  } catch (const ParseError& e) {
    throw e.in_file(path.string());
  }
}

void write_image(const Image& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pnm(img));
}

}  // namespace lfcal
