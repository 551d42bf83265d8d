#include "toolgym/jigsaw.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "toolgym/error.hpp"
#include "toolgym/rng.hpp"

namespace toolgym::jigsaw {

namespace {

std::uint8_t channel(Rng& rng) { return static_cast<std::uint8_t>(rng.range(16, 255)); }

ImageBuffer patch_of(const ImageBuffer& src, PatchPos p) {
  const int pw = src.width() / 3;
  const int ph = src.height() / 3;
  return crop_region(src, BBox{p.col * pw, p.row * ph, (p.col + 1) * pw, (p.row + 1) * ph}, 1);
}

}  // namespace

char to_char(Label label) { return label == Label::A ? 'A' : 'B'; }

Label parse_label(std::string_view text) {
  std::string norm;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      norm += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
  }
  if (norm == "A") return Label::A;
  if (norm == "B") return Label::B;
  throw Error(ErrorKind::InvalidAnswer, "expected A or B, got '" + std::string(text) + "'");
}

ImageBuffer synth_source(int width, int height, std::uint64_t seed) {
  if (width < 3 || height < 3 || width % 3 != 0 || height % 3 != 0) {
    throw Error(ErrorKind::InvalidDimension,
                "source dimensions must be positive multiples of 3, got " + std::to_string(width) +
                    "x" + std::to_string(height));
  }
  Rng rng(seed);
  const int blue = rng.range(40, 215);
  ImageBuffer img(width, height, colors::kWhite);
  // Red tracks x and green tracks y, so patches from different grid positions
  // always differ at their top-left corner.
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto r = static_cast<std::uint8_t>(1 + (x * 254) / std::max(1, width - 1));
      const auto g = static_cast<std::uint8_t>(1 + (y * 254) / std::max(1, height - 1));
      img.set(x, y, {r, g, static_cast<std::uint8_t>(blue)});
    }
  }

  const int shapes = rng.range(4, 9);
  const int min_dim = std::min(width, height);
  for (int s = 0; s < shapes; ++s) {
    const Color c{channel(rng), channel(rng), channel(rng)};
    const int cx = rng.range(0, width - 1);
    const int cy = rng.range(0, height - 1);
    const int radius = rng.range(std::max(1, min_dim / 20), std::max(1, min_dim / 6));
    if (rng.coin()) {
      const BBox box{std::max(0, cx - radius), std::max(0, cy - radius),
                     std::min(width, cx + radius + 1), std::min(height, cy + radius + 1)};
      img = fill_rect(img, box, c);
    } else {
      for (int y = std::max(0, cy - radius); y < std::min(height, cy + radius + 1); ++y) {
        for (int x = std::max(0, cx - radius); x < std::min(width, cx + radius + 1); ++x) {
          const int dx = x - cx;
          const int dy = y - cy;
          if (dx * dx + dy * dy <= radius * radius) img.set(x, y, c);
        }
      }
    }
  }
  return img;
}

JigsawInstance generate_puzzle(const ImageBuffer& src, std::uint64_t seed) {
  if (src.width() % 3 != 0 || src.height() % 3 != 0) {
    throw Error(ErrorKind::InvalidDimension, "source dimensions must be multiples of 3");
  }
  const int pw = src.width() / 3;
  const int ph = src.height() / 3;
  Rng rng(seed);

  JigsawInstance inst;
  inst.subgrid_origin = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
  const int quadrant = static_cast<int>(rng.below(4));
  inst.removed = {inst.subgrid_origin.row + quadrant / 2, inst.subgrid_origin.col + quadrant % 2};

  inst.original = crop_region(src,
                              BBox{inst.subgrid_origin.col * pw, inst.subgrid_origin.row * ph,
                                   (inst.subgrid_origin.col + 2) * pw,
                                   (inst.subgrid_origin.row + 2) * ph},
                              1);
  inst.slot = BBox{(quadrant % 2) * pw, (quadrant / 2) * ph, (quadrant % 2 + 1) * pw,
                   (quadrant / 2 + 1) * ph};
  inst.base = fill_rect(inst.original, inst.slot, colors::kBlack);

  const ImageBuffer correct = patch_of(src, inst.removed);
  std::vector<PatchPos> outside;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const bool in_base = r >= inst.subgrid_origin.row && r < inst.subgrid_origin.row + 2 &&
                           c >= inst.subgrid_origin.col && c < inst.subgrid_origin.col + 2;
      if (!in_base && !(patch_of(src, {r, c}) == correct)) outside.push_back({r, c});
    }
  }
  if (outside.empty()) {
    throw Error(ErrorKind::InvalidArgument, "source has no patch distinct from the answer");
  }
  inst.distractor = outside[rng.below(outside.size())];
  const ImageBuffer wrong = patch_of(src, inst.distractor);

  inst.answer = rng.coin() ? Label::A : Label::B;
  inst.candidate_a = inst.answer == Label::A ? correct : wrong;
  inst.candidate_b = inst.answer == Label::A ? wrong : correct;
  return inst;
}

bool check_jigsaw(const JigsawInstance& instance, std::string_view answer) {
  return parse_label(answer) == instance.answer;
}

JigsawInstance make_instance(std::uint64_t seed, int source_size) {
  const ImageBuffer src = synth_source(source_size, source_size, Rng::derive(seed, 1));
  return generate_puzzle(src, Rng::derive(seed, 2));
}

}  // namespace toolgym::jigsaw
