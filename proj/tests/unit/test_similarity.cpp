#include <doctest.h>

#include <random>

#include "garmentsynth/error.hpp"
#include "garmentsynth/similarity.hpp"
#include "oracles.hpp"

using namespace garmentsynth;

namespace {

const World& world() {
  static const World w = World::builtin();
  return w;
}

}  // namespace

TEST_CASE("embed_ap features") {
  const auto& lex = world().lexicon;
  const APTree t = parse_prompt("navy blue jacket with long sleeves and hood", lex);
  const TextEmbedding a = embed_ap(t.aps[0], lex);
  CHECK(a.color.b == doctest::Approx((0.35 + 1.0) / 2));
  CHECK(a.color.r == 0.0);
  CHECK(a.part == PartId::kBody);
  CHECK_FALSE(a.length_target);
  const TextEmbedding b = embed_ap(t.aps[1], lex);
  CHECK(b.color == kNeutralGray);
  CHECK(b.length_target == 1.0);
  CHECK(b.part == PartId::kSleeves);
  const TextEmbedding c = embed_ap(t.aps[2], lex);
  CHECK(c.color == kNeutralGray);
  CHECK_FALSE(c.length_target);
  CHECK(c.part == PartId::kHood);
}

TEST_CASE("embed_part coverage and color") {
  Mask m(kCanvasSize, kCanvasSize);
  for (int x = 0; x < 8; ++x) m.set(x, 0, true);
  Image red(kCanvasSize, kCanvasSize, {1, 0, 0});
  ImageEmbedding e = embed_part(red, m, PartId::kBody);
  CHECK(e.mean_color.r == doctest::Approx(1.0));
  CHECK(e.mean_color.g == doctest::Approx(0.0));
  CHECK(e.coverage == doctest::Approx(1.0).epsilon(1e-9));

  const Image white(kCanvasSize, kCanvasSize);
  e = embed_part(white, m, PartId::kBody);
  CHECK(e.coverage < 0.01);

  Image half = white;
  for (int x = 0; x < 4; ++x) half.set_pixel(static_cast<std::size_t>(x), {1, 0, 0});
  e = embed_part(half, m, PartId::kBody);
  CHECK(e.coverage == doctest::Approx(0.5).epsilon(0.01));
  // The color summarizes the colored pixels only.
  CHECK(e.mean_color.r == doctest::Approx(1.0));
  CHECK(e.mean_color.g < 0.01);

  CHECK_THROWS_AS(embed_part(red, Mask(kCanvasSize, kCanvasSize), PartId::kBody), Error);
}

TEST_CASE("sim examples") {
  const ImageEmbedding v{{1, 0, 0}, 1.0, PartId::kSleeves};
  TextEmbedding w{{1, 0, 0}, 1.0, PartId::kSleeves};
  CHECK(sim(v, w) >= 0.99);
  const ImageEmbedding black{{0, 0, 0}, 1.0, PartId::kSleeves};
  const TextEmbedding white_target{{1, 1, 1}, std::nullopt, PartId::kSleeves};
  CHECK(sim(black, white_target) == doctest::Approx(std::exp(-3.0 / 0.5)));
  w.part = PartId::kCollar;
  CHECK(sim(v, w) == 0.0);
}

TEST_CASE("sim decreases with color distance and stays in [0, 1]") {
  const TextEmbedding w{{0.2, 0.4, 0.6}, 0.5, PartId::kBody};
  double prev = 2.0;
  for (int k = 0; k <= 20; ++k) {
    const double d = 0.04 * k;
    const double s = sim({{0.2 + d, 0.4, 0.6}, 0.5, PartId::kBody}, w);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("lexicon colors are separated by a score gap of at least 0.5") {
  const auto& colors = world().lexicon.colors;
  for (const auto& a : colors) {
    for (const auto& b : colors) {
      if (a.name == b.name) continue;
      const double s = sim({a.rgb, 1.0, PartId::kBody}, {b.rgb, std::nullopt, PartId::kBody});
      CAPTURE(a.name);
      CAPTURE(b.name);
      CHECK(1.0 - s >= 0.5);
    }
  }
}

TEST_CASE("sim_full examples") {
  const auto& lex = world().lexicon;
  const APTree t = parse_prompt("red jacket with short blue sleeves and green collar", lex);
  const GarmentScene s{"jacket",
                       {{PartId::kBody, {1, 0, 0}}, {PartId::kSleeves, {0, 0, 1}, Length::kShort},
                        {PartId::kCollar, {0, 0.7, 0}}}};
  const Image img = render(s, world().templates);
  CHECK(sim_full(img, t, world()) >= 0.99);
  const Image white(kCanvasSize, kCanvasSize);
  for (const char* p : {"red jacket with short blue sleeves", "jacket with sleeves", "hoodie", "dress with belt"}) {
    CHECK(sim_full(white, parse_prompt(p, lex), world()) <= 0.1);
  }
  const APTree one = parse_prompt("red jacket", lex);
  const auto& m = world().templates.at("jacket").mask(PartId::kBody);
  CHECK(sim_full(img, one, world()) == sim(embed_part(img, m, PartId::kBody), embed_ap(one.aps[0], lex)));
  CHECK_THROWS_AS(sim_full(img, APTree{"x", {}, "cape"}, world()), Error);
}

TEST_CASE("grad_sim_image is zero outside the mask and stationary at the target") {
  const Mask& m = world().templates.at("jacket").mask(PartId::kCollar);
  Image img(kCanvasSize, kCanvasSize);
  for (std::size_t i : m.indices()) img.set_pixel(i, {0, 0.7, 0});
  const TextEmbedding w{{0, 0.7, 0}, std::nullopt, PartId::kCollar};
  const Image g = grad_sim_image(img, m, PartId::kCollar, w);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = g.data()[3 * i + c];
      if (!m[i]) CHECK(v == 0.0);
      max_abs = std::max(max_abs, std::abs(v));
    }
  }
  CHECK(max_abs < 1e-6);
}

TEST_CASE("grad_sim_image matches central differences on random fixtures") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& t = world().templates.at("coat");
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto& [part, mask] = t.parts[trial % t.parts.size()];
    TextEmbedding w{{u(rng), u(rng), u(rng)}, std::nullopt, part};
    if (trial % 3 == 0) w.length_target = 0.5;
    if (trial % 3 == 1) w.length_target = 1.0;
    Image img(kCanvasSize, kCanvasSize);
    for (std::size_t i : mask.indices()) {
      // Mix of background-like and colored pixels so the coverage term is active.
      if (u(rng) < 0.3) img.set_pixel(i, {0.9 + 0.1 * u(rng), 0.9 + 0.1 * u(rng), 0.9 + 0.1 * u(rng)});
      else img.set_pixel(i, {u(rng), u(rng), u(rng)});
    }
    const Image g = grad_sim_image(img, mask, part, w);
    const auto idx = mask.indices();
    std::vector<double> x, analytic;
    for (std::size_t i : idx) {
      for (int c = 0; c < 3; ++c) {
        x.push_back(img.data()[3 * i + c]);
        analytic.push_back(g.data()[3 * i + c]);
      }
    }
    auto f = [&](const std::vector<double>& v) {
      Image probe = img;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        for (int c = 0; c < 3; ++c) probe.data()[3 * idx[k] + c] = v[3 * k + c];
      }
      return sim(embed_part(probe, mask, part), w);
    };
    const auto numeric = oracle::central_difference(f, x, 1e-4);
    CAPTURE(trial);
    CHECK(oracle::relative_error(analytic, numeric) <= 1e-4);
    ++checked;
  }
  CHECK(checked == 100);
}
