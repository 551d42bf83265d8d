#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace toolgym {

struct Color {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Color&, const Color&) = default;
};

namespace colors {
inline constexpr Color kBlack{0, 0, 0};
inline constexpr Color kWhite{255, 255, 255};
inline constexpr Color kRed{255, 0, 0};
}  // namespace colors

// Absolute pixel coordinate, origin top-left.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

// Half-open pixel rectangle [x1, x2) x [y1, y2).
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long area() const { return static_cast<long>(width()) * height(); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Owned RGB8 raster, row-major.
class ImageBuffer {
 public:
  ImageBuffer(int width, int height, Color fill);

  int width() const { return width_; }
  int height() const { return height_; }

  Color at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }

  void set(int x, int y, Color c) {
    const std::size_t i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(const BBox& box) const {
    return box.x1 >= 0 && box.y1 >= 0 && box.x1 < box.x2 && box.y1 < box.y2 &&
           box.x2 <= width_ && box.y2 <= height_;
  }

  std::span<const std::uint8_t> bytes() const { return pixels_; }
  std::span<std::uint8_t> bytes() { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

ImageBuffer create_canvas(int width, int height, Color fill);

ImageBuffer fill_rect(const ImageBuffer& img, const BBox& box, Color color);

// Bresenham segments between consecutive points, each pixel stamped with a
// thickness x thickness square brush. Brush pixels falling outside the image
// are dropped; the points themselves must be inside.
ImageBuffer draw_polyline(const ImageBuffer& img, std::span<const Pixel> points, Color color,
                          int thickness);

// Nearest-neighbor scale of `patch` to the box, written into a copy of base.
ImageBuffer composite(const ImageBuffer& base, const ImageBuffer& patch, const BBox& box);

inline constexpr int kDefaultCropUpscale = 2;

ImageBuffer crop_region(const ImageBuffer& img, const BBox& box, int upscale = kDefaultCropUpscale);

// Mean absolute per-channel difference.
double pixel_diff(const ImageBuffer& a, const ImageBuffer& b);

// Pixels visited by a Bresenham walk from a to b, endpoints included.
std::vector<Pixel> bresenham(Pixel a, Pixel b);

// 5x7 bitmap text. Supports A-Z, a-z (rendered uppercase), 0-9, space and
// a few punctuation marks; unknown characters render as blanks.
void draw_text(ImageBuffer& img, int x, int y, std::string_view text, Color color, int scale);
int text_width(std::string_view text, int scale);
inline constexpr int kGlyphHeight = 7;

// 8-bit RGB PNG, no alpha.
std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
ImageBuffer decode_png(std::span<const std::uint8_t> data);
void write_png(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_png(const std::filesystem::path& path);

}  // namespace toolgym
