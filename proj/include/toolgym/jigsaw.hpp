#pragma once

#include <cstdint>
#include <string_view>

#include "toolgym/raster.hpp"

namespace toolgym::jigsaw {

enum class Label { A, B };

char to_char(Label label);
// "A" or "B", case-insensitive, whitespace ignored; anything else throws InvalidAnswer.
Label parse_label(std::string_view text);

struct PatchPos {
  int row = 0;  // in the 3x3 source grid
  int col = 0;

  friend bool operator==(const PatchPos&, const PatchPos&) = default;
};

struct JigsawInstance {
  ImageBuffer base{1, 1, colors::kBlack};       // 2x2 patch grid with one slot blacked out
  BBox slot;                                    // missing region, in base coordinates
  ImageBuffer candidate_a{1, 1, colors::kBlack};
  ImageBuffer candidate_b{1, 1, colors::kBlack};
  Label answer = Label::A;
  ImageBuffer original{1, 1, colors::kBlack};   // base before blackout
  PatchPos subgrid_origin;                      // top-left patch of the base in the 3x3 grid
  PatchPos removed;
  PatchPos distractor;

  const ImageBuffer& candidate(Label l) const { return l == Label::A ? candidate_a : candidate_b; }
};

// Dimensions must be multiples of 3. Gradient background with filled shapes;
// every channel is >= 1 so no pixel is pure black.
ImageBuffer synth_source(int width, int height, std::uint64_t seed);

JigsawInstance generate_puzzle(const ImageBuffer& src, std::uint64_t seed);

bool check_jigsaw(const JigsawInstance& instance, std::string_view answer);

inline constexpr int kDefaultSourceSize = 300;

JigsawInstance make_instance(std::uint64_t seed, int source_size = kDefaultSourceSize);

}  // namespace toolgym::jigsaw
