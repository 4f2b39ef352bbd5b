// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "nearfield/fieldsplit.hpp"
#include "nearfield/rng.hpp"

using namespace nearfield;

namespace
{
    RVector<double> vec(std::initializer_list<double> v)
    {
        RVector<double> r(Eigen::Index(v.size()));
        Eigen::Index i = 0;
        for (double x : v)
            r(i++) = x;
        return r;
    }

    const auto N = FieldLabel::Near;
    const auto F = FieldLabel::Far;
}

TEST_CASE("field_stat basics")
{
    ArrayConfig<double> cfg;
    const int G = 4 * cfg.n_antennas;
    const auto grid = cos_grid(G, -1.0, 1.0);
    const double R = rayleigh_distance(cfg);

    // far channel exactly at a grid angle
    const auto u = position_at(cfg, std::acos(grid(700)), 100 * R);
    CHECK(std::abs(field_stat(cfg, far_channel(cfg, u), G) - 1.0) < 1e-9);

    ArrayConfig<double> one;
    one.n_antennas = 1;
    CHECK(field_stat(one, near_channel(one, UserPos<double>{3, 1}), 2) == doctest::Approx(1.0));

    const auto v = position_at(cfg, 1.4, 0.05 * R);
    CHECK(field_stat(cfg, near_channel(cfg, v), G) < 0.6);

    CHECK_THROWS_AS(field_stat(cfg, near_channel(cfg, v), 1), Error);
    CHECK_THROWS_AS(field_stat(one, near_channel(cfg, v), 4), Error);
}

TEST_CASE("field_stat is scale and phase invariant")
{
    ArrayConfig<double> cfg;
    cfg.n_antennas = 64;
    const auto dict = steering_dictionary(cfg, 256);
    SplitMix64 rng(2);
    for (int i = 0; i < 50; ++i)
    {
        const auto h = near_channel(cfg, UserPos<double>{rng.uniform(1, 200), rng.uniform(0, 30)}).entries;
        const std::complex<double> c = std::polar(std::exp(rng.uniform(-20, 20)), rng.uniform(0, 6.28));
        const double a = field_stats(dict, CMatrix<double>(h))(0);
        const double b = field_stats(dict, CMatrix<double>(h * c))(0);
        CHECK(std::abs(a - b) < 1e-12);
    }
}

TEST_CASE("grid refinement is monotone on nested grids")
{
    ArrayConfig<double> cfg;
    cfg.n_antennas = 64;
    SplitMix64 rng(3);
    for (int i = 0; i < 20; ++i)
    {
        const auto h = near_channel(cfg, UserPos<double>{rng.uniform(1, 200), rng.uniform(0, 30)});
        double prev = 0;
        for (int g : {5, 9, 17, 33, 65, 129, 257})
        {
            const double s = field_stat(cfg, h, g);
            CHECK(s >= prev - 1e-15);
            prev = s;
        }
    }
}

TEST_CASE("classify")
{
    ArrayConfig<double> cfg;
    const double R = rayleigh_distance(cfg);
    const auto cc = ClassifierConfig<double>::for_array(cfg.n_antennas);
    CHECK(cc.angle_grid_size == 1024);
    const auto grid = cos_grid(cc.angle_grid_size, -1.0, 1.0);

    SplitMix64 rng(4);
    std::vector<UserPos<double>> far, mixed;
    std::vector<FieldLabel> truth;
    for (int i = 0; i < 20; ++i)
    {
        const double a = std::acos(rng.uniform(-0.8, 0.8));
        far.push_back(position_at(cfg, std::acos(grid(100 + 40 * i)), 200 * R));
        const bool near = i % 2 == 0;
        mixed.push_back(position_at(cfg, a, near ? 0.05 * R : 100 * R));
        truth.push_back(label_field(cfg, mixed.back()));
        CHECK(truth.back() == (near ? N : F));
    }
    const auto Hf = channel_matrix(cfg, far, ChannelModel::FarPlanar);
    for (double t : {0.5, 0.9, 0.99, 1.0 - 1.1e-6})
    {
        auto c = cc;
        c.threshold = t;
        for (auto l : classify(cfg, Hf, c))
            CHECK(l == F);
    }

    const auto Hm = channel_matrix(cfg, mixed);
    const auto stats = field_stats(steering_dictionary(cfg, cc.angle_grid_size), Hm.H);
    const auto cal = calibrate_threshold(stats, truth);
    auto c = cc;
    c.threshold = cal.threshold;
    CHECK(classify(cfg, Hm, c) == truth);
    CHECK(classify(cfg, CMatrix<double>(Hm.H * std::complex<double>(-3e4, 2e4)), c) == truth);

    auto bad = cc;
    bad.threshold = 1.0;
    CHECK_THROWS_AS(classify(cfg, Hm, bad), Error);
    bad = cc;
    bad.angle_grid_size = 1;
    CHECK_THROWS_AS(classify(cfg, Hm, bad), Error);
}

TEST_CASE("calibrate_threshold")
{
    const auto a = calibrate_threshold(vec({0.3, 0.9}), {N, F});
    CHECK(a.threshold == doctest::Approx(0.6));
    CHECK(a.balanced_accuracy == 1.0);

    const auto b = calibrate_threshold(vec({0.5, 0.5, 0.5}), {N, F, F});
    CHECK(b.balanced_accuracy == 0.5);

    // lowest threshold wins ties
    const auto c = calibrate_threshold(vec({0.1, 0.2, 0.8, 0.9}), {N, N, F, F});
    CHECK(c.threshold == doctest::Approx(0.5));

    try
    {
        calibrate_threshold(vec({0.1, 0.2}), {F, F});
        FAIL("expected SingleClass");
    }
    catch (const Error &e)
    {
        CHECK(e.code() == Errc::SingleClass);
    }
    CHECK_THROWS_AS(calibrate_threshold(vec({0.1}), {F, N}), Error);
}

TEST_CASE("confusion")
{
    const std::vector<FieldLabel> t{N, N, F, F};
    CHECK(confusion(t, t).accuracy == 1.0);
    CHECK(confusion({F, F, N, N}, t).accuracy == 0.0);
    const auto h = confusion({N, F, N, F}, t);
    CHECK(h.accuracy == 0.5);
    CHECK(h.precision_near == 0.5);
    CHECK(h.recall_near == 0.5);
    CHECK(h.balanced_accuracy == 0.5);
    // empty denominators are 0
    const auto z = confusion({F, F}, {F, F});
    CHECK(z.precision_near == 0.0);
    CHECK(z.recall_near == 0.0);
    CHECK_THROWS_AS(confusion({F}, t), Error);
}

TEST_CASE("population separation")
{
    ArrayConfig<double> cfg;
    const double R = rayleigh_distance(cfg);
    const auto dict = steering_dictionary(cfg, 4 * cfg.n_antennas);
    SplitMix64 rng(5);
    std::vector<UserPos<double>> near, far;
    const auto sector = service_sector(cfg);
    for (int i = 0; i < 500; ++i)
    {
        near.push_back(position_at(cfg, std::acos(rng.uniform(sector.cos_min, sector.cos_max)), rng.uniform(2.0, 0.1 * R)));
        far.push_back(position_at(cfg, std::acos(rng.uniform(sector.cos_min, sector.cos_max)), rng.uniform(10 * R, 20 * R)));
    }
    const double mn = field_stats(dict, channel_matrix(cfg, near).H).mean();
    const double mf = field_stats(dict, channel_matrix(cfg, far).H).mean();
    CHECK(mf - mn >= 0.3);
}

TEST_CASE("perturb_csi")
{
    ArrayConfig<double> cfg;
    cfg.n_antennas = 128;
    const auto H = channel_matrix(cfg, sample_users(3, UserBox<double>{}, 1), ChannelModel::NearSpherical,
                                  PathGain::Normalized)
                       .H;
    const auto a = perturb_csi(H, 10.0, 7);
    CHECK(a == perturb_csi(H, 10.0, 7));
    CHECK(a != perturb_csi(H, 10.0, 8));
    for (int k = 0; k < 3; ++k)
    {
        const double noise = (a.col(k) - H.col(k)).squaredNorm() / 128.0;
        CHECK(noise == doctest::Approx(0.1).epsilon(0.3));
    }
}
