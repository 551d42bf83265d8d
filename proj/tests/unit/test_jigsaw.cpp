#include <doctest.h>

#include "oracles.hpp"
#include "toolgym/error.hpp"
#include "toolgym/jigsaw.hpp"

using namespace toolgym;
using namespace toolgym::jigsaw;

TEST_CASE("synth_source") {
  const ImageBuffer a = synth_source(300, 300, 1);
  CHECK(a == synth_source(300, 300, 1));
  CHECK(oracle::count_color(a, colors::kBlack) == 0);
  CHECK_FALSE(a == synth_source(300, 300, 2));
  CHECK_THROWS_WITH_AS(synth_source(301, 300, 1), doctest::Contains("InvalidDimension"), Error);
}

TEST_CASE("generate_puzzle structure") {
  const ImageBuffer src = synth_source(300, 300, 4);
  const JigsawInstance p = generate_puzzle(src, 4);
  CHECK(p.base.width() == 200);
  CHECK(p.base.height() == 200);
  CHECK(p.slot.width() == 100);
  CHECK(p.slot.height() == 100);
  CHECK(p.slot.x1 % 100 == 0);
  CHECK(p.slot.y1 % 100 == 0);
  CHECK(oracle::count_color(crop_region(p.base, p.slot, 1), colors::kBlack) == 100 * 100);
  // the original base is the 2x2 sub-grid of the source
  CHECK(p.original == crop_region(src, {p.subgrid_origin.col * 100, p.subgrid_origin.row * 100,
                                        p.subgrid_origin.col * 100 + 200, p.subgrid_origin.row * 100 + 200},
                                  1));
  CHECK(pixel_diff(composite(p.base, p.candidate(p.answer), p.slot), p.original) == 0.0);
  const Label wrong = p.answer == Label::A ? Label::B : Label::A;
  CHECK(pixel_diff(composite(p.base, p.candidate(wrong), p.slot), p.original) > 0.0);
  CHECK_THROWS_WITH_AS(generate_puzzle(create_canvas(100, 99, colors::kWhite), 1),
                       doctest::Contains("InvalidDimension"), Error);
}

TEST_CASE("distractor is one of the five patches outside the base") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const JigsawInstance p = make_instance(seed);
    CHECK(p.removed.row >= p.subgrid_origin.row);
    CHECK(p.removed.row <= p.subgrid_origin.row + 1);
    CHECK(p.removed.col >= p.subgrid_origin.col);
    CHECK(p.removed.col <= p.subgrid_origin.col + 1);
    const bool in_base = p.distractor.row >= p.subgrid_origin.row && p.distractor.row <= p.subgrid_origin.row + 1 &&
                         p.distractor.col >= p.subgrid_origin.col && p.distractor.col <= p.subgrid_origin.col + 1;
    CHECK_FALSE(in_base);
    CHECK_FALSE(p.candidate_a == p.candidate_b);
  }
}

TEST_CASE("answer position is balanced") {
  int a = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) a += make_instance(seed, 30).answer == Label::A ? 1 : 0;
  CHECK(a >= 450);
  CHECK(a <= 550);
}

TEST_CASE("check_jigsaw") {
  const JigsawInstance p = make_instance(3);
  const std::string right(1, to_char(p.answer));
  const std::string wrong = right == "A" ? "B" : "A";
  CHECK(check_jigsaw(p, right));
  CHECK(check_jigsaw(p, " " + std::string(1, static_cast<char>(right[0] + 32)) + " "));
  CHECK_FALSE(check_jigsaw(p, wrong));
  CHECK_THROWS_WITH_AS(check_jigsaw(p, "C"), doctest::Contains("InvalidAnswer"), Error);
}
