#include "slhoi/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "slhoi/errors.hpp"

namespace slhoi {

Image read_ppm(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw DataError("cannot open image " + file.string());
  std::string magic;
  is >> magic;
  if (magic != "P6") throw DataError("unsupported image format (want P6 ppm): " + file.string());
  auto skip_ws_comments = [&is]() {
    while (true) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
  };
  int w = 0, h = 0, maxval = 0;
  skip_ws_comments();
  is >> w;
  skip_ws_comments();
  is >> h;
  skip_ws_comments();
  is >> maxval;
  if (!is || w <= 0 || h <= 0 || maxval != 255)
    throw DataError("bad ppm header in " + file.string());
  is.get();  // single whitespace after maxval
  Image img(h, w);
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size())
    throw DataError("truncated pixel data in " + file.string());
  for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.0;
  return img;
}

void write_ppm(const std::filesystem::path& file, const Image& img) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot write image " + file.string());
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw DataError("short write to " + file.string());
}

void normalize(Image& img, const std::array<double, 3>& mean, const std::array<double, 3>& std) {
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    img.pixels[i] = (img.pixels[i] - mean[c]) / std[c];
  }
}

}  // namespace slhoi
