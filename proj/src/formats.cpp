#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mvde/data.hpp"

namespace mvde {

namespace {

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string(), "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

/// Pulls the next whitespace-delimited header token, rejecting comments.
std::string next_token(const std::vector<char>& bytes, std::size_t& pos,
                       const std::string& path) {
  while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
  if (pos < bytes.size() && bytes[pos] == '#') {
    throw IngestionError(path, "PFM header comments are not supported");
  }
  std::string tok;
  while (pos < bytes.size() && !is_space(bytes[pos])) tok += bytes[pos++];
  if (tok.empty()) throw IngestionError(path, "truncated PFM header");
  return tok;
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) |
         (v << 24);
}

}  // namespace

Field read_pfm(const std::filesystem::path& path) {
  const std::string name = path.string();
  const std::vector<char> bytes = slurp(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos, name);
  if (magic == "PF") {
    throw IngestionError(name, "colour PFM (PF) is not supported");
  }
  if (magic != "Pf") throw IngestionError(name, "not a PFM file");
  int width = 0;
  int height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(next_token(bytes, pos, name));
    height = std::stoi(next_token(bytes, pos, name));
    scale = std::stod(next_token(bytes, pos, name));
  } catch (const std::logic_error&) {
    throw IngestionError(name, "malformed PFM header");
  }
  if (width <= 0 || height <= 0 || scale == 0.0 || !std::isfinite(scale)) {
    throw IngestionError(name, "invalid PFM dimensions or scale");
  }
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw IngestionError(name, "truncated PFM header");
  }
  ++pos;  // single whitespace byte before the raster
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < count * 4) {
    throw IngestionError(name, "truncated PFM payload");
  }
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  Field out(width, height);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      std::uint32_t raw;
      std::memcpy(&raw, &bytes[pos], 4);
      pos += 4;
      if (swap) raw = byteswap32(raw);
      out(x, y) = static_cast<double>(std::bit_cast<float>(raw));
    }
  }
  return out;
}

void write_pfm(const Field& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string(), "cannot open for writing");
  out << "Pf\n" << field.width() << ' ' << field.height() << "\n-1.0\n";
  const bool swap = std::endian::native != std::endian::little;
  for (int y = field.height() - 1; y >= 0; --y) {
    for (int x = 0; x < field.width(); ++x) {
      std::uint32_t raw = std::bit_cast<std::uint32_t>(static_cast<float>(field(x, y)));
      if (swap) raw = byteswap32(raw);
      out.write(reinterpret_cast<const char*>(&raw), 4);
    }
  }
  if (!out) throw IngestionError(path.string(), "write failed");
}

void write_pgm(const Field& field, const std::filesystem::path& path, int bits) {
  if (bits != 8 && bits != 16) throw ParameterError("PGM depth must be 8 or 16");
  const auto [lo_it, hi_it] =
      std::minmax_element(field.samples().begin(), field.samples().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const int maxval = bits == 8 ? 255 : 65535;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path.string(), "cannot open for writing");
  std::ostringstream header;
  header.precision(9);
  header << "P5\n# min-max normalised: " << lo << " -> 0, " << hi << " -> "
         << maxval << "\n"
         << field.width() << ' ' << field.height() << '\n'
         << maxval << '\n';
  out << header.str();
  const double span = hi > lo ? hi - lo : 1.0;
  for (double v : field.samples()) {
    const auto q = static_cast<unsigned>(std::lround((v - lo) / span * maxval));
    if (bits == 8) {
      out.put(static_cast<char>(q));
    } else {
      out.put(static_cast<char>(q >> 8));
      out.put(static_cast<char>(q & 0xff));
    }
  }
  if (!out) throw IngestionError(path.string(), "write failed");
}

Field read_png_luminance(const std::filesystem::path& path) {
  const std::string name = path.string();
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, name.c_str())) {
    throw IngestionError(name, std::string("cannot read PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IngestionError(name, "cannot decode PNG: " + msg);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  Field out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const png_byte* px = &buffer[3 * i];
    out[i] = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
  }
  return out;
}

void write_png_gray(const Field& field, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(field.width());
  image.height = static_cast<png_uint_32>(field.height());
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    buffer[i] = static_cast<png_byte>(
        std::lround(std::clamp(field[i], 0.0, 1.0) * 255.0));
  }
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(),
                               0, nullptr)) {
    throw IngestionError(path.string(),
                         std::string("cannot write PNG: ") + image.message);
  }
}

}  // namespace mvde
