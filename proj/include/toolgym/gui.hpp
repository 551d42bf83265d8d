#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "toolgym/raster.hpp"

namespace toolgym::gui {

struct TextAnnotation {
  std::string text;
  BBox box;

  friend bool operator==(const TextAnnotation&, const TextAnnotation&) = default;
};

using TextLayer = std::vector<TextAnnotation>;

// Re-express a layer in the coordinates of crop_region(img, box, upscale).
// Annotations not intersecting the box are dropped, the rest are clipped.
TextLayer crop_layer(const TextLayer& layer, const BBox& box, int upscale);

// Synthetic screen: four panels, each holding a title and a labeled button.
// The question asks for the button label of one panel.
struct GuiFixture {
  ImageBuffer image{1, 1, colors::kWhite};
  TextLayer layer;
  std::string question;
  std::string answer;
  BBox target_panel;
  std::string target_panel_name;  // "top-left", ...
};

GuiFixture make_fixture(std::uint64_t seed);

// Case-insensitive comparison with whitespace runs collapsed.
bool check_answer(const GuiFixture& fixture, std::string_view answer);

}  // namespace toolgym::gui
