#include "toolgym/raster.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include "toolgym/error.hpp"

namespace toolgym {

namespace {

void require_inside(const ImageBuffer& img, const BBox& box) {
  if (!img.contains(box)) {
    throw Error(ErrorKind::OutOfBounds,
                "box (" + std::to_string(box.x1) + "," + std::to_string(box.y1) + "," +
                    std::to_string(box.x2) + "," + std::to_string(box.y2) +
                    ") not within " + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()));
  }
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, Color fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidDimension,
                "image dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

ImageBuffer create_canvas(int width, int height, Color fill) { return ImageBuffer(width, height, fill); }

ImageBuffer fill_rect(const ImageBuffer& img, const BBox& box, Color color) {
  require_inside(img, box);
  ImageBuffer out = img;
  for (int y = box.y1; y < box.y2; ++y) {
    for (int x = box.x1; x < box.x2; ++x) out.set(x, y, color);
  }
  return out;
}

std::vector<Pixel> bresenham(Pixel a, Pixel b) {
  std::vector<Pixel> out;
  const int dx = std::abs(b.x - a.x);
  const int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Pixel p = a;
  while (true) {
    out.push_back(p);
    if (p == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
  }
  return out;
}

ImageBuffer draw_polyline(const ImageBuffer& img, std::span<const Pixel> points, Color color,
                          int thickness) {
  if (points.size() < 2) {
    throw Error(ErrorKind::DegeneratePath, "polyline needs at least 2 points");
  }
  if (thickness < 1) {
    throw Error(ErrorKind::InvalidArgument, "thickness must be >= 1");
  }
  for (const Pixel& p : points) {
    if (!img.contains(p.x, p.y)) {
      throw Error(ErrorKind::OutOfBounds,
                  "point (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside image");
    }
  }
  ImageBuffer out = img;
  const int lo = -(thickness - 1) / 2;
  const int hi = thickness / 2;
  for (std::size_t i = 1; i < points.size(); ++i) {
    for (const Pixel& p : bresenham(points[i - 1], points[i])) {
      for (int oy = lo; oy <= hi; ++oy) {
        for (int ox = lo; ox <= hi; ++ox) {
          if (out.contains(p.x + ox, p.y + oy)) out.set(p.x + ox, p.y + oy, color);
        }
      }
    }
  }
  return out;
}

ImageBuffer composite(const ImageBuffer& base, const ImageBuffer& patch, const BBox& box) {
  require_inside(base, box);
  ImageBuffer out = base;
  const int bw = box.width();
  const int bh = box.height();
  for (int dy = 0; dy < bh; ++dy) {
    const int sy = static_cast<int>(static_cast<long>(dy) * patch.height() / bh);
    for (int dx = 0; dx < bw; ++dx) {
      const int sx = static_cast<int>(static_cast<long>(dx) * patch.width() / bw);
      out.set(box.x1 + dx, box.y1 + dy, patch.at(sx, sy));
    }
  }
  return out;
}

ImageBuffer crop_region(const ImageBuffer& img, const BBox& box, int upscale) {
  require_inside(img, box);
  if (upscale < 1) throw Error(ErrorKind::InvalidArgument, "upscale must be >= 1");
  ImageBuffer out(box.width() * upscale, box.height() * upscale, colors::kBlack);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out.set(x, y, img.at(box.x1 + x / upscale, box.y1 + y / upscale));
    }
  }
  return out;
}

double pixel_diff(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorKind::ShapeMismatch, "images differ in size");
  }
  const auto pa = a.bytes();
  const auto pb = b.bytes();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    total += static_cast<std::uint64_t>(std::abs(int{pa[i]} - int{pb[i]}));
  }
  return static_cast<double>(total) / static_cast<double>(pa.size());
}

// ---------------------------------------------------------------------------
// Bitmap font

namespace {

struct Glyph {
  char ch;
  std::array<std::uint8_t, kGlyphHeight> rows;  // low 5 bits, MSB = leftmost column
};

constexpr Glyph kGlyphs[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
    {'!', {0x04, 0x04, 0x04, 0x04, 0x04, 0x00, 0x04}},
    {'$', {0x04, 0x0F, 0x14, 0x0E, 0x05, 0x1E, 0x04}},
    {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
};

const Glyph* find_glyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const Glyph& g : kGlyphs) {
    if (g.ch == up) return &g;
  }
  return nullptr;
}

constexpr int kAdvance = 6;  // 5 columns + 1 spacing

}  // namespace

int text_width(std::string_view text, int scale) {
  if (text.empty()) return 0;
  return (static_cast<int>(text.size()) * kAdvance - 1) * scale;
}

void draw_text(ImageBuffer& img, int x, int y, std::string_view text, Color color, int scale) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const Glyph* g = find_glyph(text[i]);
    if (g == nullptr) continue;
    const int gx = x + static_cast<int>(i) * kAdvance * scale;
    for (int row = 0; row < kGlyphHeight; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (((g->rows[row] >> (4 - col)) & 1U) == 0) continue;
        for (int sy = 0; sy < scale; ++sy) {
          for (int sx = 0; sx < scale; ++sx) {
            const int px = gx + col * scale + sx;
            const int py = y + row * scale + sy;
            if (img.contains(px, py)) img.set(px, py, color);
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// PNG

namespace {

void png_error_fn(png_structp, png_const_charp msg) { throw Error(ErrorKind::BadValue, msg); }
void png_warning_fn(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->data.size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, cursor->data.data() + cursor->offset, length);
  cursor->offset += length;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                            png_warning_fn);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, png_write_to_vector, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 1);
    png_set_filter(png, 0, PNG_FILTER_SUB);
    png_write_info(png, info);
    const auto bytes = img.bytes();
    const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
    for (int y = 0; y < img.height(); ++y) {
      png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * stride));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageBuffer decode_png(std::span<const std::uint8_t> data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) {
    throw Error(ErrorKind::BadValue, "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                           png_warning_fn);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{data, 0};
  try {
    png_set_read_fn(png, &cursor, png_read_from_span);
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
    if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
    if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    ImageBuffer img(width, height, colors::kBlack);
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    auto bytes = img.bytes();
    for (int y = 0; y < height; ++y) {
      png_read_row(png, bytes.data() + static_cast<std::size_t>(y) * stride, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
}

void write_png(const ImageBuffer& img, const std::filesystem::path& path) {
  const auto data = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Unavailable, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

ImageBuffer read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Unavailable, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(data);
}

}  // namespace toolgym
