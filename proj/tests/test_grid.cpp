#include <doctest.h>

#include <random>

#include "crg/errors.hpp"
#include "crg/grid.hpp"

using namespace crg;
using namespace crg::grid;

namespace {

Raster counting_raster(int h, int w, int c) {
    Raster r(h, w, c);
    for (std::size_t i = 0; i < r.data().size(); ++i) {
        r.data()[i] = static_cast<double>(i);
    }
    return r;
}

}  // namespace

TEST_CASE("raster rejects mismatched data length") {
    CHECK_THROWS_AS(Raster(2, 2, 3, std::vector<double>(11)), ShapeError);
    Raster r(2, 3, 2);
    r.at(1, 2, 1) = 7.0;
    CHECK(r.data()[(1 * 3 + 2) * 2 + 1] == 7.0);
}

TEST_CASE("one_hot encodes labels and zeros") {
    SUBCASE("single pixel class 2") {
        auto r = one_hot(LabelMatrix(1, 1, {2}), 3);
        CHECK(r.data() == std::vector<double>{0, 1, 0});
    }
    SUBCASE("unlabeled pixel") {
        auto r = one_hot(LabelMatrix(1, 1, {0}), 3);
        CHECK(r.data() == std::vector<double>{0, 0, 0});
    }
    SUBCASE("two rows") {
        auto r = one_hot(LabelMatrix(2, 1, {1, 3}), 3);
        CHECK(r.data() == std::vector<double>{1, 0, 0, 0, 0, 1});
    }
    CHECK_THROWS_AS(one_hot(LabelMatrix(1, 1, {4}), 3), DomainError);
}

TEST_CASE("one_hot followed by argmax recovers labeled pixels") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 5);
        LabelMatrix m(7, 5);
        for (int& v : m.labels()) {
            v = static_cast<int>(rng() % (k + 1));
        }
        const auto back = argmax_labels(one_hot(m, k));
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m.labels()[i] > 0) {
                CHECK(back.labels()[i] == m.labels()[i]);
            }
        }
    }
}

TEST_CASE("crop") {
    const auto r = counting_raster(4, 4, 1);
    CHECK(crop(r, {0, 0, 4}) == r);
    const auto inner = crop(r, {1, 1, 2});
    CHECK(inner.data() == std::vector<double>{5, 6, 9, 10});
    CHECK(crop(inner, {0, 0, 2}) == inner);
    CHECK_THROWS_AS(crop(r, {3, 3, 2}), GeometryError);
    CHECK_THROWS_AS(crop(r, {-1, 0, 2}), GeometryError);

    const auto rgb = counting_raster(5, 5, 3);
    const auto c = crop(rgb, {2, 1, 3});
    CHECK(c.channels() == 3);
    CHECK(c.at(0, 0, 2) == rgb.at(2, 1, 2));
    CHECK(c.at(2, 2, 0) == rgb.at(4, 3, 0));
}

TEST_CASE("tile_positions") {
    auto origins = [](const std::vector<PatchSpec>& tiles) {
        std::vector<std::pair<int, int>> out;
        for (const auto& t : tiles) {
            out.emplace_back(t.row, t.col);
        }
        return out;
    };
    CHECK(origins(tile_positions(128, 128, 128, 40)) == std::vector<std::pair<int, int>>{{0, 0}});
    CHECK(origins(tile_positions(168, 168, 128, 40)) ==
          std::vector<std::pair<int, int>>{{0, 0}, {0, 40}, {40, 0}, {40, 40}});
    CHECK(origins(tile_positions(150, 150, 128, 40)) ==
          std::vector<std::pair<int, int>>{{0, 0}, {0, 22}, {22, 0}, {22, 22}});
    CHECK_THROWS_AS(tile_positions(100, 200, 128, 40), GeometryError);
    CHECK_THROWS_AS(tile_positions(128, 128, 64, 0), GeometryError);
}

TEST_CASE("tile_positions covers every pixel") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const int h = 1 + static_cast<int>(rng() % 60);
        const int w = 1 + static_cast<int>(rng() % 60);
        const int patch = 1 + static_cast<int>(rng() % std::min(h, w));
        const int stride = 1 + static_cast<int>(rng() % 50);
        std::vector<int> hits(static_cast<std::size_t>(h) * w, 0);
        for (const auto& t : tile_positions(h, w, patch, stride)) {
            REQUIRE(t.row + t.size <= h);
            REQUIRE(t.col + t.size <= w);
            for (int r = t.row; r < t.row + t.size; ++r) {
                for (int c = t.col; c < t.col + t.size; ++c) {
                    ++hits[static_cast<std::size_t>(r) * w + c];
                }
            }
        }
        CHECK(std::count(hits.begin(), hits.end(), 0) == 0);
    }
}

TEST_CASE("stitch averages overlaps") {
    SUBCASE("single full tile") {
        Raster p(2, 2, 2, {0.1, 0.9, 0.5, 0.5, 0.3, 0.7, 1.0, 0.0});
        std::vector<std::pair<PatchSpec, Raster>> tiles{{{0, 0, 2}, p}};
        const auto out = stitch(tiles, 2, 2, 2);
        for (std::size_t i = 0; i < p.data().size(); ++i) {
            CHECK(out.data()[i] == doctest::Approx(p.data()[i]).epsilon(1e-15));
        }
    }
    SUBCASE("two tiles with different overlap values") {
        // 1x... use a 2x3 image covered by two 2x2 tiles overlapping in column 1.
        Raster a(2, 2, 2), b(2, 2, 2);
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                a.at(r, c, 0) = 0.2;
                a.at(r, c, 1) = 0.8;
                b.at(r, c, 0) = 0.6;
                b.at(r, c, 1) = 0.4;
            }
        }
        std::vector<std::pair<PatchSpec, Raster>> tiles{{{0, 0, 2}, a}, {{0, 1, 2}, b}};
        const auto out = stitch(tiles, 2, 3, 2);
        CHECK(out.at(0, 1, 0) == doctest::Approx(0.4));
        CHECK(out.at(1, 1, 1) == doctest::Approx(0.6));
        CHECK(out.at(0, 0, 0) == doctest::Approx(0.2));
        CHECK(out.at(0, 2, 0) == doctest::Approx(0.6));
        CHECK(is_probability_map(out));

        std::vector<std::pair<PatchSpec, Raster>> same{{{0, 0, 2}, a}, {{0, 1, 2}, a}};
        const auto eq = stitch(same, 2, 3, 2);
        CHECK(eq.at(1, 1, 0) == doctest::Approx(0.2));
    }
    SUBCASE("uncovered pixel") {
        std::vector<std::pair<PatchSpec, Raster>> tiles{{{0, 0, 2}, Raster(2, 2, 2, std::vector<double>(8, 0.5))}};
        CHECK_THROWS_AS(stitch(tiles, 2, 3, 2), CoverageError);
    }
}

TEST_CASE("stitch of random valid tiles is a valid probability map") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int h = 10 + static_cast<int>(rng() % 20), w = 10 + static_cast<int>(rng() % 20), k = 3;
        const int patch = 6, stride = 1 + static_cast<int>(rng() % 5);
        std::vector<std::pair<PatchSpec, Raster>> tiles;
        for (const auto& spec : tile_positions(h, w, patch, stride)) {
            Raster t(patch, patch, k);
            for (int r = 0; r < patch; ++r) {
                for (int c = 0; c < patch; ++c) {
                    double total = 0.0;
                    for (double& v : t.pixel(r, c)) {
                        v = u(rng);
                        total += v;
                    }
                    for (double& v : t.pixel(r, c)) {
                        v /= total;
                    }
                }
            }
            tiles.emplace_back(spec, std::move(t));
        }
        CHECK(is_probability_map(stitch(tiles, h, w, k)));
    }
}

TEST_CASE("argmax ties go to the lowest class") {
    Raster p(1, 3, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.2, 0.4, 0.4, 0.1, 0.1, 0.8});
    CHECK(argmax_labels(p).labels() == std::vector<int>{1, 2, 3});
}
