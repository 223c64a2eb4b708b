#pragma once

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <png.h>

#include "fplfix/core.hpp"

namespace fplfix {

namespace detail {

// PGM token reader: skips whitespace and '#' comment lines.
inline std::string next_pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      while ((c = in.get()) != EOF && !std::isspace(c) && c != '#') {
        tok.push_back(static_cast<char>(c));
      }
      if (c == '#') in.unget();
      break;
    }
  }
  if (tok.empty()) throw FormatError("truncated PGM header");
  return tok;
}

inline int parse_pnm_int(std::istream& in, const char* what) {
  const std::string tok = next_pnm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string("bad PGM ") + what + ": '" + tok + "'");
  }
}

inline GrayImage load_pgm(std::istream& in, const std::string& path) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  const bool ascii = magic[1] == '2';
  if (magic[0] != 'P' || (magic[1] != '2' && magic[1] != '5')) {
    throw FormatError("not a PGM file: " + path);
  }
  const int w = parse_pnm_int(in, "width");
  const int h = parse_pnm_int(in, "height");
  const int maxval = parse_pnm_int(in, "maxval");
  if (w <= 0 || h <= 0) throw FormatError("bad PGM dimensions in " + path);
  if (maxval <= 0 || maxval > 255) {
    throw FormatError("only 8-bit PGM supported: " + path);
  }
  GrayImage img(w, h);
  if (ascii) {
    for (auto& px : img.data) {
      const int v = parse_pnm_int(in, "pixel");
      if (v < 0 || v > maxval) throw FormatError("PGM pixel out of range in " + path);
      px = static_cast<std::uint8_t>(v);
    }
  } else {
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
      throw IoError("truncated PGM payload: " + path);
    }
  }
  return img;
}

struct PngCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline GrayImage load_png(const std::string& path) {
  std::unique_ptr<std::FILE, PngCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  GrayImage img;
  std::string error;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed (corrupt or truncated): " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("only 8-bit grayscale PNG supported: " + path);
  }
  img = GrayImage(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + std::size_t{y} * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace detail

// Loads an 8-bit grayscale image; PGM (P2/P5) and grayscale PNG only.
// Anything else (color, 16-bit, unknown magic) is rejected.
inline GrayImage load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2) throw FormatError("image file too short: " + path);
  in.seekg(0);
  if (magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5')) {
    return detail::load_pgm(in, path);
  }
  if (magic[0] == '\x89' && magic[1] == 'P') {
    in.close();
    return detail::load_png(path);
  }
  throw FormatError("unsupported image format: " + path);
}

// Binary (P5) PGM writer; the toolkit's native output format.
inline void save_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("failed writing image: " + path);
}

}  // namespace fplfix
