// Copyright 2026 The Oak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oak/coords/geodesy.hpp"
#include "oak/coords/trilateration.hpp"
#include "oak/coords/vivaldi.hpp"
#include "test_oracles.hpp"

namespace oak::coords {
namespace {

VivaldiCoordinate at(double x, double y, double z, double h = 0.0, double err = 1.0) {
    return VivaldiCoordinate{{x, y, z}, h, err};
}

TEST(DistEuc, Identity) { EXPECT_DOUBLE_EQ(dist_euc(at(1, 2, 3), at(1, 2, 3)), 0.0); }

TEST(DistEuc, PythagoreanTriple) { EXPECT_DOUBLE_EQ(dist_euc(at(0, 0, 0), at(3, 4, 0)), 5.0); }

TEST(DistEuc, HeightsAddToNorm) { EXPECT_DOUBLE_EQ(dist_euc(at(0, 0, 0, 1), at(3, 4, 0, 2)), 8.0); }

TEST(DistEuc, DimensionMismatch) {
    VivaldiCoordinate two{{0, 0}, 0, 1};
    EXPECT_THROW(dist_euc(two, at(0, 0, 0)), DimensionMismatchError);
}

TEST(DistGc, Identity) {
    core::GeoPoint p(48.1374, 11.5755);
    EXPECT_DOUBLE_EQ(dist_gc(p, p), 0.0);
}

TEST(DistGc, QuarterGreatCircle) {
    EXPECT_NEAR(dist_gc(core::GeoPoint(0, 0), core::GeoPoint(0, 90)), std::numbers::pi * 6371.0 / 2.0, 1e-9);
    EXPECT_NEAR(dist_gc(core::GeoPoint(0, 0), core::GeoPoint(0, 90)), 10007.54, 0.01);
}

TEST(DistGc, MunichBerlinMatchesIndependentOracle) {
    core::GeoPoint munich(48.1374, 11.5755), berlin(52.52, 13.405);
    const double oracle = testing_oracles::great_circle_km(48.1374, 11.5755, 52.52, 13.405);
    EXPECT_NEAR(dist_gc(munich, berlin), oracle, 1e-6);
    EXPECT_NEAR(oracle, 504.0, 2.0);
}

TEST(DistProperty, SymmetricAndTriangle) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-179.0, 179.0), pos(-200, 200), h(0, 20);
    for (int i = 0; i < 2000; ++i) {
        core::GeoPoint a(lat(rng), lon(rng)), b(lat(rng), lon(rng)), c(lat(rng), lon(rng));
        EXPECT_NEAR(dist_gc(a, b), dist_gc(b, a), 1e-9);
        EXPECT_LE(dist_gc(a, c), dist_gc(a, b) + dist_gc(b, c) + 1e-6);
        EXPECT_NEAR(dist_gc(a, b), testing_oracles::great_circle_km(a.latitude(), a.longitude(), b.latitude(), b.longitude()),
                    1e-6);

        auto x = at(pos(rng), pos(rng), pos(rng), h(rng));
        auto y = at(pos(rng), pos(rng), pos(rng), h(rng));
        auto z = at(pos(rng), pos(rng), pos(rng), h(rng));
        EXPECT_DOUBLE_EQ(dist_euc(x, y), dist_euc(y, x));
        EXPECT_GE(dist_euc(x, y), 0.0);
        EXPECT_LE(dist_euc(x, z), dist_euc(x, y) + dist_euc(y, z) + 1e-9);
    }
}

TEST(VivaldiUpdate, ExactPredictionKeepsPositionAndShrinksError) {
    auto self = at(0, 0, 0);
    RttSample s{at(10, 0, 0), 10.0, 2};
    auto next = vivaldi_update(self, s, {}, 1);
    EXPECT_EQ(next.position, self.position);
    EXPECT_LT(next.error_estimate, self.error_estimate);
}

TEST(VivaldiUpdate, HandEvaluatedStep) {
    // w = 1/(1+1) = 0.5, delta = 0.25 * 0.5 = 0.125, force = 0.125 * (20 - 10) = 1.25,
    // direction = (self - peer)/|self - peer| = (-1, 0, 0).
    auto next = vivaldi_update(at(0, 0, 0), RttSample{at(10, 0, 0), 20.0, 2}, {}, 1);
    EXPECT_NEAR(next.position[0], -1.25, 1e-12);
    EXPECT_NEAR(next.position[1], 0.0, 1e-12);
    EXPECT_NEAR(next.position[2], 0.0, 1e-12);
    // error: alpha = 0.125, relative = 0.5 -> 0.125*0.5 + 1*(1-0.125) = 0.9375
    EXPECT_NEAR(next.error_estimate, 0.9375, 1e-12);
}

TEST(VivaldiUpdate, CoincidentNodesSeparateDeterministically) {
    auto a = vivaldi_update(at(0, 0, 0), RttSample{at(0, 0, 0), 10.0, 9}, {}, 4);
    auto b = vivaldi_update(at(0, 0, 0), RttSample{at(0, 0, 0), 10.0, 9}, {}, 4);
    EXPECT_EQ(a, b);
    EXPECT_GT(position_norm(a.position, {0, 0, 0}), 0.0);
    auto c = vivaldi_update(at(0, 0, 0), RttSample{at(0, 0, 0), 10.0, 10}, {}, 4);
    EXPECT_NE(a.position, c.position);
}

TEST(VivaldiUpdate, ErrorStaysInUnitInterval) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> pos(-100, 100), rtt(0.1, 500), err(0.01, 1.0);
    auto self = at(0, 0, 0);
    for (int i = 0; i < 5000; ++i) {
        self = vivaldi_update(self, RttSample{at(pos(rng), pos(rng), pos(rng), 0, err(rng)), rtt(rng), 1}, {}, 0);
        ASSERT_TRUE(self.valid()) << self;
    }
}

TEST(VivaldiProperty, MeanAbsoluteErrorNonIncreasingAfterWarmup) {
    // Measure the network-wide mean |predicted - measured| in blocks of rounds;
    // after 20 warm-up rounds successive block means must not increase beyond
    // statistical noise (5%).
    auto net = testing_oracles::PlantedNetwork::uniform(50, 150.0, 31);
    std::vector<VivaldiCoordinate> coords(50, VivaldiCoordinate::origin());
    std::mt19937_64 rng(32);
    auto mean_abs = [&] {
        double s = 0;
        int n = 0;
        for (int i = 0; i < 50; ++i) {
            for (int j = i + 1; j < 50; ++j) {
                s += std::abs(dist_euc(coords[i], coords[j]) - net.rtt(i, j));
                ++n;
            }
        }
        return s / n;
    };
    std::vector<double> block_means;
    for (int round = 0; round < 200; ++round) {
        testing_oracles::vivaldi_round(net, coords, rng);
        if (round >= 20 && (round - 20) % 20 == 19) block_means.push_back(mean_abs());
    }
    for (std::size_t i = 1; i < block_means.size(); ++i) {
        EXPECT_LE(block_means[i], block_means[i - 1] * 1.05 + 0.05) << "block " << i;
    }
}

TEST(Trilaterate, RecoversPlantedPoint) {
    const std::vector<std::vector<double>> anchors = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}, {0, 0, 10}};
    const std::vector<double> planted = {2, 3, 4};
    std::vector<RttSample> samples;
    for (const auto& a : anchors) {
        samples.push_back(RttSample{VivaldiCoordinate{a, 0.0, 0.5}, position_norm(a, planted), 0});
    }
    auto est = trilaterate(samples);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(est.position[i], planted[i], 1e-3);
    EXPECT_TRUE(est.valid());
}

TEST(Trilaterate, ZeroRadiusAtRepeatedAnchor) {
    std::vector<RttSample> samples(3, RttSample{at(5, -2, 7), 0.0, 0});
    auto est = trilaterate(samples);
    EXPECT_NEAR(est.position[0], 5, 1e-9);
    EXPECT_NEAR(est.position[1], -2, 1e-9);
    EXPECT_NEAR(est.position[2], 7, 1e-9);
}

TEST(Trilaterate, TooFewAnchors) {
    std::vector<RttSample> samples(2, RttSample{at(0, 0, 0), 1.0, 0});
    EXPECT_THROW(trilaterate(samples), InsufficientAnchorsError);
}

TEST(Trilaterate, CollinearInconsistentAnchorsAreDegenerate) {
    // Three anchors on a line with radii that no point can satisfy and that
    // leave a flat valley around the axis.
    TrilaterationOptions opt;
    opt.max_iterations = 3;
    std::vector<RttSample> samples = {{at(0, 0, 0), 50, 0}, {at(1, 0, 0), 1, 0}, {at(2, 0, 0), 50, 0}};
    EXPECT_THROW(trilaterate(samples, opt), DegenerateGeometryError);
}

TEST(Trilaterate, AnchorHeightsAreSubtracted) {
    const std::vector<double> planted = {12, -7, 30};
    std::vector<RttSample> samples;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pos(-100, 100), h(1, 10);
    for (int i = 0; i < 6; ++i) {
        auto a = at(pos(rng), pos(rng), pos(rng), h(rng), 0.2);
        samples.push_back(RttSample{a, position_norm(a.position, planted) + a.height, 0});
    }
    auto est = trilaterate(samples);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(est.position[i], planted[i], 1e-3);
}

TEST(Trilaterate, ShallowAnchorLayerPicksTheRightSide) {
    // Four anchors in a thin slab with the user well below it: the fit has a
    // mirrored basin above the slab.
    const std::vector<double> planted = {26.407, 47.097, 34.362};
    std::vector<RttSample> samples;
    for (const auto& a : {at(37.2, 74.7, 45.4, 1.88), at(12.7, 74.8, 61.6, 4.45), at(37.6, 63.9, 51.8, 3.51), at(59.9, 48.1, 62.1, 0.92)}) {
        samples.push_back(RttSample{a, position_norm(a.position, planted) + a.height, 0});
    }
    auto est = trilaterate(samples);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(est.position[i], planted[i], 1e-3);
}

TEST(Trilaterate, FitsTheHeightWhenAsked) {
    const std::vector<double> planted = {12, -7, 30};
    const double planted_h = 6.0;
    std::vector<RttSample> samples;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(-100, 100), h(1, 10);
    for (int i = 0; i < 8; ++i) {
        auto a = at(pos(rng), pos(rng), pos(rng), h(rng), 0.2);
        samples.push_back(RttSample{a, position_norm(a.position, planted) + a.height + planted_h, 0});
    }
    TrilaterationOptions opt;
    opt.fit_height = true;
    opt.max_iterations = 5000;
    auto est = trilaterate(samples, opt);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(est.position[i], planted[i], 1e-2);
    EXPECT_NEAR(est.height, planted_h, 1e-2);

    // Without the fit the same data leaves a residual.
    const auto plain = trilaterate_detailed(samples, {});
    EXPECT_GT(plain.rms_residual_ms, 0.1);
}

TEST(Trilaterate, FittedHeightNeedsAnExtraAnchor) {
    std::vector<RttSample> samples = {{at(0, 0, 0), 5, 0}, {at(10, 0, 0), 5, 0}, {at(0, 10, 0), 5, 0}};
    TrilaterationOptions opt;
    opt.fit_height = true;
    EXPECT_THROW(trilaterate(samples, opt), InsufficientAnchorsError);
}

}  // namespace
}  // namespace oak::coords
