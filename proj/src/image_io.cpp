#include "xcos/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>

namespace xcos {

using detail::check;

ImageRecord read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  check(png_image_begin_read_from_file(&image, path.string().c_str()) != 0,
        "cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;

  ImageRecord rec;
  rec.height = static_cast<int>(image.height);
  rec.width = static_cast<int>(image.width);
  rec.pixels.resize(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, rec.pixels.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    detail::fail("cannot decode PNG " + path.string() + ": " + message);
  }
  return rec;
}

void write_png(const std::filesystem::path& path, const ImageRecord& img) {
  check(img.pixels.size() == img.pixel_count(), "image buffer does not match its dimensions");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  check(png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0,
                                nullptr) != 0,
        "cannot write PNG " + path.string() + ": " + image.message);
}

namespace {

void put_u32_le(std::ostream& out, uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                                  static_cast<unsigned char>((v >> 8) & 0xff),
                                  static_cast<unsigned char>((v >> 16) & 0xff),
                                  static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t get_u32_le(std::istream& in, const std::string& what) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  xcos::detail::check(in.gcount() == 4, "truncated file while reading " + what);
  return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
         (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

}  // namespace

ImageRecord read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open raw image " + path.string());
  ImageRecord rec;
  rec.width = static_cast<int>(get_u32_le(in, "raw image width"));
  rec.height = static_cast<int>(get_u32_le(in, "raw image height"));
  check(rec.width > 0 && rec.height > 0, "raw image " + path.string() + " has empty dimensions");
  rec.pixels.resize(rec.pixel_count());
  in.read(reinterpret_cast<char*>(rec.pixels.data()),
          static_cast<std::streamsize>(rec.pixels.size()));
  check(in.gcount() == static_cast<std::streamsize>(rec.pixels.size()),
        "raw image " + path.string() + " is truncated");
  return rec;
}

void write_raw(const std::filesystem::path& path, const ImageRecord& img) {
  check(img.pixels.size() == img.pixel_count(), "image buffer does not match its dimensions");
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write raw image " + path.string());
  put_u32_le(out, static_cast<uint32_t>(img.width));
  put_u32_le(out, static_cast<uint32_t>(img.height));
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  check(out.good(), "failed writing raw image " + path.string());
}

ImageRecord read_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  if (ext == ".rgb") return read_raw(path);
  detail::fail("unsupported image extension '" + ext + "' for " + path.string() +
               " (supported: .png, .rgb)");
}

void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<uint8_t>& gray) {
  check(static_cast<size_t>(height) * width == gray.size(),
        "PGM buffer does not match its dimensions");
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot write PGM " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()),
            static_cast<std::streamsize>(gray.size()));
  check(out.good(), "failed writing PGM " + path.string());
}

}  // namespace xcos
