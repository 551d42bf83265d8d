#include "toolgym/gui.hpp"

#include <algorithm>
#include <cctype>

#include "toolgym/rng.hpp"

namespace toolgym::gui {

namespace {

constexpr int kWidth = 480;
constexpr int kHeight = 320;
constexpr int kTextScale = 2;

const char* const kButtonLabels[] = {
    "BUY NOW",  "ADD TO CART", "SIGN IN",   "CHECKOUT", "SUBSCRIBE", "LEARN MORE",
    "DOWNLOAD", "CONTACT US",  "BOOK NOW",  "REGISTER", "SHARE",     "SAVE 20%",
    "LOG OUT",  "APPLY",       "SEND",      "RETRY",    "UPGRADE",   "VIEW CART",
};

const char* const kPanelTitles[] = {"NEWS", "SHOP", "PROFILE", "SETTINGS", "DEALS", "HELP",
                                    "ORDERS", "MUSIC", "EVENTS", "TRAVEL"};

const char* const kPanelNames[] = {"top-left", "top-right", "bottom-left", "bottom-right"};

std::string normalize(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

TextAnnotation place_text(ImageBuffer& img, int x, int y, std::string_view text, Color color) {
  draw_text(img, x, y, text, color, kTextScale);
  return {std::string(text), BBox{x, y, x + text_width(text, kTextScale), y + kGlyphHeight * kTextScale}};
}

}  // namespace

TextLayer crop_layer(const TextLayer& layer, const BBox& box, int upscale) {
  TextLayer out;
  for (const TextAnnotation& a : layer) {
    const BBox clipped{std::max(a.box.x1, box.x1), std::max(a.box.y1, box.y1),
                       std::min(a.box.x2, box.x2), std::min(a.box.y2, box.y2)};
    if (clipped.x1 >= clipped.x2 || clipped.y1 >= clipped.y2) continue;
    out.push_back({a.text, BBox{(clipped.x1 - box.x1) * upscale, (clipped.y1 - box.y1) * upscale,
                                (clipped.x2 - box.x1) * upscale, (clipped.y2 - box.y1) * upscale}});
  }
  return out;
}

GuiFixture make_fixture(std::uint64_t seed) {
  Rng rng(seed);
  GuiFixture fx;
  fx.image = create_canvas(kWidth, kHeight, Color{236, 238, 242});
  fx.image = fill_rect(fx.image, BBox{0, 0, kWidth, 32}, Color{40, 60, 110});
  fx.layer.push_back(place_text(fx.image, 12, 9, "DASHBOARD", Color{250, 250, 250}));

  std::vector<int> labels(std::size(kButtonLabels));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i);
  rng.shuffle(labels);
  std::vector<int> titles(std::size(kPanelTitles));
  for (std::size_t i = 0; i < titles.size(); ++i) titles[i] = static_cast<int>(i);
  rng.shuffle(titles);

  const int panel_w = kWidth / 2;
  const int panel_h = (kHeight - 32) / 2;
  std::vector<BBox> panels;
  for (int p = 0; p < 4; ++p) {
    const BBox panel{(p % 2) * panel_w, 32 + (p / 2) * panel_h, (p % 2 + 1) * panel_w,
                     32 + (p / 2 + 1) * panel_h};
    panels.push_back(panel);
    const BBox inner{panel.x1 + 6, panel.y1 + 6, panel.x2 - 6, panel.y2 - 6};
    fx.image = fill_rect(fx.image, inner, Color{252, 252, 252});
    fx.layer.push_back(place_text(fx.image, inner.x1 + 10, inner.y1 + 10,
                                  kPanelTitles[titles[static_cast<std::size_t>(p)]],
                                  Color{60, 60, 60}));

    const std::string_view label = kButtonLabels[labels[static_cast<std::size_t>(p)]];
    const Color button{static_cast<std::uint8_t>(rng.range(30, 200)),
                       static_cast<std::uint8_t>(rng.range(80, 200)),
                       static_cast<std::uint8_t>(rng.range(120, 230))};
    const int bw = text_width(label, kTextScale) + 20;
    const int bx = inner.x1 + 10 + rng.range(0, std::max(0, inner.width() - bw - 20));
    const int by = inner.y1 + 60 + rng.range(0, 40);
    fx.image = fill_rect(fx.image, BBox{bx, by, bx + bw, by + 30}, button);
    fx.layer.push_back(place_text(fx.image, bx + 10, by + 8, label, Color{255, 255, 255}));
  }

  const int target = static_cast<int>(rng.below(4));
  fx.target_panel = panels[static_cast<std::size_t>(target)];
  fx.target_panel_name = kPanelNames[target];
  fx.answer = kButtonLabels[labels[static_cast<std::size_t>(target)]];
  fx.question = "What is the label of the button in the " + fx.target_panel_name +
                " panel of this screen?";
  return fx;
}

bool check_answer(const GuiFixture& fixture, std::string_view answer) {
  return normalize(answer) == normalize(fixture.answer);
}

}  // namespace toolgym::gui
