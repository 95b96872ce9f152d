#include <doctest.h>

#include <map>
#include <set>

#include "crg/errors.hpp"
#include "crg/synthdata.hpp"

using namespace crg;
using namespace crg::synthdata;

TEST_CASE("gen_scene is deterministic and covers every class") {
    SceneSpec spec;
    spec.seed = 5;
    const auto a = gen_scene(spec);
    const auto b = gen_scene(spec);
    CHECK(a.image == b.image);
    CHECK(a.gt == b.gt);
    CHECK(a.image.channels() == 3);
    CHECK(a.gt.height() == 64);
    std::set<int> seen(a.gt.labels().begin(), a.gt.labels().end());
    CHECK(seen == std::set<int>{1, 2, 3, 4});
    for (double v : a.image.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    spec.seed = 6;
    CHECK_FALSE(gen_scene(spec).gt == a.gt);
}

TEST_CASE("noise-free pixels share their class color") {
    SceneSpec spec;
    spec.noise_sigma = 0.0;
    spec.seed = 2;
    const auto s = gen_scene(spec);
    for (int r = 0; r < s.image.height(); ++r) {
        for (int c = 0; c < s.image.width(); ++c) {
            const auto color = class_color(s.gt.at(r, c), spec.k);
            for (int ch = 0; ch < 3; ++ch) CHECK(s.image.at(r, c, ch) == color[ch]);
        }
    }
}

TEST_CASE("class colors are distinct") {
    for (int k = 2; k <= 8; ++k) {
        std::set<std::array<double, 3>> colors;
        for (int c = 1; c <= k; ++c) colors.insert(class_color(c, k));
        CHECK(colors.size() == static_cast<std::size_t>(k));
    }
}

TEST_CASE("small two-class scenes") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SceneSpec spec{16, 16, 2, 2, 0.1, seed, false};
        const auto s = gen_scene(spec);
        std::set<int> seen(s.gt.labels().begin(), s.gt.labels().end());
        CHECK(seen == std::set<int>{1, 2});
    }
}

TEST_CASE("background can be ignored") {
    SceneSpec spec;
    spec.background_ignore = true;
    const auto s = gen_scene(spec);
    std::set<int> seen(s.gt.labels().begin(), s.gt.labels().end());
    CHECK(seen.count(0) == 1);
    CHECK(seen.count(1) == 0);
}

TEST_CASE("spec validation") {
    auto bad = [](auto mutate) {
        SceneSpec spec;
        mutate(spec);
        return spec;
    };
    CHECK_THROWS_AS(gen_scene(bad([](SceneSpec& s) { s.k = 1; })), ConfigError);
    CHECK_THROWS_AS(gen_scene(bad([](SceneSpec& s) { s.n_regions = 2; })), ConfigError);
    CHECK_THROWS_AS(gen_scene(bad([](SceneSpec& s) { s.noise_sigma = -0.1; })), ConfigError);
    CHECK_THROWS_AS(gen_scene(bad([](SceneSpec& s) { s.height = 4; })), ConfigError);
}

TEST_CASE("sample_points") {
    SceneSpec spec;
    spec.seed = 9;
    const auto s = gen_scene(spec);
    const auto y = sample_points(s.gt, 5, 1);
    CHECK(y == sample_points(s.gt, 5, 1));
    std::map<int, int> per_class;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y.labels()[i] != 0) {
            CHECK(y.labels()[i] == s.gt.labels()[i]);
            ++per_class[y.labels()[i]];
        }
    }
    for (int c = 1; c <= 4; ++c) CHECK(per_class[c] == 5);
    CHECK(y.labeled_count() <= 20);
    CHECK(static_cast<double>(y.labeled_count()) / (64.0 * 64.0) < 0.01);

    grid::LabelMatrix tiny(2, 2, {1, 1, 1, 2});
    const auto all = sample_points(tiny, 10, 3);
    CHECK(all == tiny);
    CHECK_THROWS(sample_points(tiny, 0, 3));
}
