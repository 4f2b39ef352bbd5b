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

#ifndef NEARFIELD_GEOMETRY_HPP
#define NEARFIELD_GEOMETRY_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "nearfield/error.hpp"
#include "nearfield/rng.hpp"

namespace nearfield
{
    inline constexpr double speed_of_light = 299792458.0;

    template <typename T>
    using CVector = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;
    template <typename T>
    using CMatrix = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;
    template <typename T>
    using RVector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

    /// Uniform linear array in the vertical plane through the BS and the users.
    /// The array axis is tilted by `tilt_rad` from vertical toward the users
    /// (positive x); 0 is a vertical array.
    template <typename T = double>
    struct ArrayConfig
    {
        int n_antennas = 256;
        T carrier_hz = T(30e9);
        T spacing_m = T(speed_of_light / 30e9 / 2.0);
        T bs_height_m = T(15);
        T tilt_rad = T(5.0 * std::numbers::pi / 180.0);

        T wavelength() const { return T(speed_of_light) / carrier_hz; }

        // Half-wavelength spaced array.
        static ArrayConfig half_wavelength(int n, T carrier_hz, T bs_height_m, T tilt_rad)
        {
            ArrayConfig c;
            c.n_antennas = n;
            c.carrier_hz = carrier_hz;
            c.spacing_m = T(speed_of_light) / carrier_hz / T(2);
            c.bs_height_m = bs_height_m;
            c.tilt_rad = tilt_rad;
            return c;
        }

        void validate() const
        {
            require(n_antennas >= 1, Errc::InvalidArgument, "n_antennas must be >= 1");
            require(carrier_hz > T(0), Errc::InvalidArgument, "carrier_hz must be > 0");
            require(spacing_m > T(0), Errc::InvalidArgument, "spacing_m must be > 0");
            require(bs_height_m >= T(0), Errc::InvalidArgument, "bs_height_m must be >= 0");
            require(std::abs(tilt_rad) <= T(std::numbers::pi / 2), Errc::InvalidArgument, "|tilt_rad| must be <= pi/2");
        }

        bool operator==(const ArrayConfig &) const = default;
    };

    template <typename T = double>
    struct UserPos
    {
        T x_m = T(0); // horizontal ground distance from the array center
        T h_m = T(0); // altitude

        bool operator==(const UserPos &) const = default;
    };

    enum class FieldLabel : std::uint8_t
    {
        Far = 0,
        Near = 1
    };

    enum class ChannelModel
    {
        NearSpherical,
        FarPlanar
    };

    enum class PathGain
    {
        FreeSpace,  // beta = (lambda / (4 pi r))^2
        Normalized  // beta = 1
    };

    template <typename T = double>
    struct ChannelVec
    {
        CVector<T> entries;
        ChannelModel model = ChannelModel::NearSpherical;
        UserPos<T> user;
        T path_gain = T(1);
    };

    // H = [h_1 ... h_K], one column per user.
    template <typename T = double>
    struct ChannelMatrix
    {
        ArrayConfig<T> cfg;
        CMatrix<T> H;
        std::vector<ChannelModel> models;
        std::vector<UserPos<T>> users;
        std::vector<T> path_gains;

        Eigen::Index n_antennas() const { return H.rows(); }
        Eigen::Index n_users() const { return H.cols(); }

        ChannelVec<T> column(Eigen::Index k) const
        {
            return {H.col(k), models[k], users[k], path_gains[k]};
        }
    };

    /// Rectangular sampling box for user positions.
    template <typename T = double>
    struct UserBox
    {
        T x_min = T(0), x_max = T(200);
        T h_min = T(0), h_max = T(30);
    };

    /// Offsets of each element from the array center along the axis:
    /// (n - (N-1)/2) * spacing.
    template <typename T>
    RVector<T> antenna_offsets(const ArrayConfig<T> &cfg)
    {
        RVector<T> d(cfg.n_antennas);
        const T mid = T(cfg.n_antennas - 1) / T(2);
        for (int n = 0; n < cfg.n_antennas; ++n)
            d(n) = (T(n) - mid) * cfg.spacing_m;
        return d;
    }

    /// Element positions (x, h), one column per antenna.
    template <typename T>
    Eigen::Matrix<T, 2, Eigen::Dynamic> antenna_positions(const ArrayConfig<T> &cfg)
    {
        cfg.validate();
        const RVector<T> d = antenna_offsets(cfg);
        Eigen::Matrix<T, 2, Eigen::Dynamic> p(2, cfg.n_antennas);
        p.row(0) = (d * std::sin(cfg.tilt_rad)).transpose();
        p.row(1) = (d * std::cos(cfg.tilt_rad)).transpose().array() + cfg.bs_height_m;
        return p;
    }

    /// 2 D^2 / lambda with aperture D = (N - 1) * spacing.
    template <typename T>
    T rayleigh_distance(const ArrayConfig<T> &cfg)
    {
        cfg.validate();
        const T aperture = T(cfg.n_antennas - 1) * cfg.spacing_m;
        return T(2) * aperture * aperture / cfg.wavelength();
    }

    template <typename T>
    T center_distance(const ArrayConfig<T> &cfg, const UserPos<T> &u)
    {
        return std::hypot(u.x_m, u.h_m - cfg.bs_height_m);
    }

    /// cos of the angle between the array axis and the center-to-user direction.
    template <typename T>
    T cos_axis_angle(const ArrayConfig<T> &cfg, const UserPos<T> &u)
    {
        const T r = center_distance(cfg, u);
        require(r > T(0), Errc::CoincidentUser, "user at the array center");
        return (u.x_m * std::sin(cfg.tilt_rad) + (u.h_m - cfg.bs_height_m) * std::cos(cfg.tilt_rad)) / r;
    }

    /// Inverse of (cos_axis_angle, center_distance): the point at axis angle
    /// `angle_rad` in [0, pi] and distance r, on the users' side of the array.
    template <typename T>
    UserPos<T> position_at(const ArrayConfig<T> &cfg, T angle_rad, T r)
    {
        const T ct = std::cos(cfg.tilt_rad), st = std::sin(cfg.tilt_rad);
        const T ca = std::cos(angle_rad), sa = std::sin(angle_rad);
        // axis = (st, ct), normal toward the users = (ct, -st)
        return {r * (ca * st + sa * ct), cfg.bs_height_m + r * (ca * ct - sa * st)};
    }

    template <typename T>
    T path_gain(const ArrayConfig<T> &cfg, T r, PathGain mode)
    {
        if (mode == PathGain::Normalized)
            return T(1);
        const T a = cfg.wavelength() / (T(4) * T(std::numbers::pi) * r);
        return a * a;
    }

    namespace detail
    {
        // exp(-j 2 pi cycles) with the integer part of `cycles` removed first.
        template <typename T>
        std::complex<T> unit_phasor(T magnitude, T cycles)
        {
            const T frac = cycles - std::floor(cycles);
            return std::polar(magnitude, T(-2) * T(std::numbers::pi) * frac);
        }
    }

    /// Exact spherical-wave LoS channel with uniform amplitude sqrt(beta).
    template <typename T>
    ChannelVec<T> near_channel(const ArrayConfig<T> &cfg, const UserPos<T> &u, PathGain mode = PathGain::FreeSpace)
    {
        const auto p = antenna_positions(cfg);
        const T r = center_distance(cfg, u);
        require(r > T(0), Errc::CoincidentUser, "user at the array center");
        const T beta = path_gain(cfg, r, mode);
        const T amp = std::sqrt(beta);
        const T lambda = cfg.wavelength();

        ChannelVec<T> h;
        h.entries.resize(cfg.n_antennas);
        for (int n = 0; n < cfg.n_antennas; ++n)
        {
            const T rn = std::hypot(u.x_m - p(0, n), u.h_m - p(1, n));
            require(rn > T(0), Errc::CoincidentUser, "user coincides with an antenna");
            h.entries(n) = detail::unit_phasor(amp, rn / lambda);
        }
        h.model = ChannelModel::NearSpherical;
        h.user = u;
        h.path_gain = beta;
        return h;
    }

    /// Planar-wave approximation: phase r - delta_n cos(psi), same beta.
    template <typename T>
    ChannelVec<T> far_channel(const ArrayConfig<T> &cfg, const UserPos<T> &u, PathGain mode = PathGain::FreeSpace)
    {
        cfg.validate();
        const T r = center_distance(cfg, u);
        require(r > T(0), Errc::CoincidentUser, "user at the array center");
        const auto p = antenna_positions(cfg);
        for (int n = 0; n < cfg.n_antennas; ++n)
            require(u.x_m != p(0, n) || u.h_m != p(1, n), Errc::CoincidentUser, "user coincides with an antenna");

        const T c = cos_axis_angle(cfg, u);
        const T beta = path_gain(cfg, r, mode);
        const T amp = std::sqrt(beta);
        const T lambda = cfg.wavelength();
        const RVector<T> d = antenna_offsets(cfg);

        ChannelVec<T> h;
        h.entries.resize(cfg.n_antennas);
        for (int n = 0; n < cfg.n_antennas; ++n)
            h.entries(n) = detail::unit_phasor(amp, (r - d(n) * c) / lambda);
        h.model = ChannelModel::FarPlanar;
        h.user = u;
        h.path_gain = beta;
        return h;
    }

    template <typename T>
    ChannelMatrix<T> channel_matrix(const ArrayConfig<T> &cfg, const std::vector<UserPos<T>> &users,
                                    ChannelModel model = ChannelModel::NearSpherical,
                                    PathGain mode = PathGain::FreeSpace)
    {
        ChannelMatrix<T> m;
        m.cfg = cfg;
        m.H.resize(cfg.n_antennas, static_cast<Eigen::Index>(users.size()));
        for (std::size_t k = 0; k < users.size(); ++k)
        {
            auto h = model == ChannelModel::NearSpherical ? near_channel(cfg, users[k], mode)
                                                          : far_channel(cfg, users[k], mode);
            m.H.col(static_cast<Eigen::Index>(k)) = h.entries;
            m.models.push_back(h.model);
            m.users.push_back(h.user);
            m.path_gains.push_back(h.path_gain);
        }
        return m;
    }

    /// K i.i.d. uniform positions in `box`. User k draws from sub_seed(seed, k),
    /// so any prefix of the list is stable under changes of K.
    template <typename T = double>
    std::vector<UserPos<T>> sample_users(std::size_t count, const UserBox<T> &box, std::uint64_t seed)
    {
        require(box.x_max > box.x_min && box.h_max > box.h_min, Errc::InvalidArgument, "degenerate sampling box");
        std::vector<UserPos<T>> out;
        out.reserve(count);
        for (std::size_t k = 0; k < count; ++k)
        {
            SplitMix64 g(sub_seed(seed, k));
            const double x = g.uniform(double(box.x_min), double(box.x_max));
            const double h = g.uniform(double(box.h_min), double(box.h_max));
            out.push_back({T(x), T(h)});
        }
        return out;
    }

    /// Ground truth: Near iff the center distance is strictly below the
    /// Rayleigh distance.
    template <typename T>
    FieldLabel label_field(const ArrayConfig<T> &cfg, const UserPos<T> &u)
    {
        return center_distance(cfg, u) < rayleigh_distance(cfg) ? FieldLabel::Near : FieldLabel::Far;
    }

    template <typename T>
    std::vector<FieldLabel> label_fields(const ArrayConfig<T> &cfg, const std::vector<UserPos<T>> &users)
    {
        std::vector<FieldLabel> out;
        out.reserve(users.size());
        for (const auto &u : users)
            out.push_back(label_field(cfg, u));
        return out;
    }
}

#endif
