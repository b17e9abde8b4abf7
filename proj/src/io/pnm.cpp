#include "gait/io/pnm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "gait/error.hpp"

namespace gait::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  return os;
}

std::size_t header_number(std::istream& is, const std::filesystem::path& path) {
  // skip whitespace and comments
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (c != EOF && std::isspace(c)) {
      is.get();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  if (!(is >> v)) throw InputError("malformed netpbm header in " + path.string());
  return v;
}

void check_size(std::size_t w, std::size_t h, const std::filesystem::path& path) {
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw InputError("bad image size in " + path.string());
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1 || img.data.size() != img.width * img.height) throw DimensionError("write_pgm: not a gray image");
  auto os = open_out(path);
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), std::streamsize(img.data.size()));
}

void write_ppm(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 3 || img.data.size() != 3 * img.width * img.height) {
    throw DimensionError("write_ppm: not an RGB image");
  }
  auto os = open_out(path);
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), std::streamsize(img.data.size()));
}

void write_pbm(const std::filesystem::path& path, const Bitmap& bm) {
  if (bm.bits.size() != bm.width * bm.height) throw DimensionError("write_pbm: size mismatch");
  auto os = open_out(path);
  os << "P4\n" << bm.width << ' ' << bm.height << '\n';
  const std::size_t row_bytes = (bm.width + 7) / 8;
  std::vector<char> row(row_bytes);
  for (std::size_t y = 0; y < bm.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (std::size_t x = 0; x < bm.width; ++x) {
      if (bm.bits[y * bm.width + x]) row[x / 8] |= char(0x80 >> (x % 8));
    }
    os.write(row.data(), std::streamsize(row_bytes));
  }
}

Image8 read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  std::string magic(2, '\0');
  is.read(magic.data(), 2);
  if (magic != "P5" && magic != "P6") throw InputError("not a binary PGM/PPM: " + path.string());
  Image8 img;
  img.channels = magic == "P5" ? 1 : 3;
  img.width = header_number(is, path);
  img.height = header_number(is, path);
  check_size(img.width, img.height, path);
  if (header_number(is, path) != 255) throw InputError("only maxval 255 is supported: " + path.string());
  is.get();
  img.data.resize(img.channels * img.width * img.height);
  is.read(reinterpret_cast<char*>(img.data.data()), std::streamsize(img.data.size()));
  if (is.gcount() != std::streamsize(img.data.size())) throw InputError("truncated image " + path.string());
  return img;
}

Bitmap read_pbm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  std::string magic(2, '\0');
  is.read(magic.data(), 2);
  if (magic != "P4") throw InputError("not a binary PBM: " + path.string());
  Bitmap bm;
  bm.width = header_number(is, path);
  bm.height = header_number(is, path);
  check_size(bm.width, bm.height, path);
  is.get();
  const std::size_t row_bytes = (bm.width + 7) / 8;
  std::vector<unsigned char> row(row_bytes);
  bm.bits.resize(bm.width * bm.height);
  for (std::size_t y = 0; y < bm.height; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), std::streamsize(row_bytes));
    if (is.gcount() != std::streamsize(row_bytes)) throw InputError("truncated bitmap " + path.string());
    for (std::size_t x = 0; x < bm.width; ++x) bm.bits[y * bm.width + x] = (row[x / 8] >> (7 - x % 8)) & 1;
  }
  return bm;
}

}  // namespace gait::io
