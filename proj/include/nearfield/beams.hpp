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

#ifndef NEARFIELD_BEAMS_HPP
#define NEARFIELD_BEAMS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nearfield/geometry.hpp"

namespace nearfield
{
    enum class BeamKind
    {
        Focus,
        Steer
    };

    template <typename T = double>
    struct Beam
    {
        CVector<T> entries; // unit norm
        BeamKind kind = BeamKind::Steer;
        T angle_rad = T(0);                                  // axis angle of the beam
        T r_m = std::numeric_limits<T>::infinity();          // focal distance, inf for Steer
    };

    /// Range of cos(axis angle) covered by a deployment.
    template <typename T = double>
    struct ServiceSector
    {
        T cos_min = T(-1);
        T cos_max = T(1);
    };

    enum class CodebookKind
    {
        Polar,
        Angular
    };

    template <typename T = double>
    struct CodebookEntry
    {
        T angle_rad;
        T r_m; // inf for the far-field (steering) entry
    };

    /// Codewords stored as the columns of a dense N x C matrix.
    template <typename T = double>
    struct Codebook
    {
        CMatrix<T> beams;
        std::vector<CodebookEntry<T>> grid;
        CodebookKind kind = CodebookKind::Angular;

        Eigen::Index size() const { return beams.cols(); }
    };

    /// n points in [lo, hi], endpoints included; the midpoint when n == 1.
    template <typename T>
    RVector<T> cos_grid(int n, T lo, T hi)
    {
        RVector<T> g(n);
        if (n == 1)
        {
            g(0) = (lo + hi) / T(2);
            return g;
        }
        for (int i = 0; i < n; ++i)
            g(i) = lo + (hi - lo) * T(i) / T(n - 1);
        return g;
    }

    /// Sector subtended by a user box as seen from the array center.
    template <typename T>
    ServiceSector<T> service_sector(const ArrayConfig<T> &cfg, const UserBox<T> &box = {})
    {
        // elevation of the four corners; atan2 is extremal at corners of a box
        // lying in x >= 0
        T e_lo = std::numeric_limits<T>::infinity(), e_hi = -e_lo;
        for (T x : {box.x_min, box.x_max})
            for (T h : {box.h_min, box.h_max})
            {
                const T e = std::atan2(h - cfg.bs_height_m, x);
                e_lo = std::min(e_lo, e);
                e_hi = std::max(e_hi, e);
            }
        // cos(axis angle) = sin(elevation + tilt)
        const T a = e_lo + cfg.tilt_rad, b = e_hi + cfg.tilt_rad;
        const T half_pi = T(std::numbers::pi / 2);
        ServiceSector<T> s;
        s.cos_min = std::min(std::sin(a), std::sin(b));
        s.cos_max = (a <= half_pi && half_pi <= b) ? T(1) : std::max(std::sin(a), std::sin(b));
        if (a <= -half_pi && -half_pi <= b)
            s.cos_min = T(-1);
        return s;
    }

    /// Beam focused on `point`: proportional to near_channel(point), with the
    /// center distance removed from the phase reference so that it tends to
    /// steer_vector as the focal distance grows.
    template <typename T>
    Beam<T> focus_vector(const ArrayConfig<T> &cfg, const UserPos<T> &point)
    {
        const auto p = antenna_positions(cfg);
        const T rc = center_distance(cfg, point);
        require(rc > T(0), Errc::CoincidentUser, "focal point at the array center");
        const T lambda = cfg.wavelength();
        const T amp = T(1) / std::sqrt(T(cfg.n_antennas));

        Beam<T> b;
        b.entries.resize(cfg.n_antennas);
        for (int n = 0; n < cfg.n_antennas; ++n)
        {
            const T rn = std::hypot(point.x_m - p(0, n), point.h_m - p(1, n));
            require(rn > T(0), Errc::CoincidentUser, "focal point coincides with an antenna");
            b.entries(n) = detail::unit_phasor(amp, (rn - rc) / lambda);
        }
        b.kind = BeamKind::Focus;
        b.angle_rad = std::acos(std::clamp(cos_axis_angle(cfg, point), T(-1), T(1)));
        b.r_m = rc;
        return b;
    }

    namespace detail
    {
        template <typename T>
        CVector<T> steer_entries(const ArrayConfig<T> &cfg, T cos_angle)
        {
            const RVector<T> d = antenna_offsets(cfg);
            const T amp = T(1) / std::sqrt(T(cfg.n_antennas));
            const T lambda = cfg.wavelength();
            CVector<T> v(cfg.n_antennas);
            for (int n = 0; n < cfg.n_antennas; ++n)
                v(n) = unit_phasor(amp, -d(n) * cos_angle / lambda);
            return v;
        }
    }

    /// Linear-phase beam toward axis angle `angle_rad`.
    template <typename T>
    Beam<T> steer_vector(const ArrayConfig<T> &cfg, T angle_rad)
    {
        cfg.validate();
        Beam<T> b;
        b.entries = detail::steer_entries(cfg, std::cos(angle_rad));
        b.kind = BeamKind::Steer;
        b.angle_rad = angle_rad;
        return b;
    }

    /// |b^H h| / ||h||.
    template <typename T>
    T array_gain(const CVector<T> &beam, const CVector<T> &h)
    {
        require(beam.size() == h.size(), Errc::DimensionMismatch, "beam and channel lengths differ");
        const T nh = h.norm();
        require(nh > T(0), Errc::ZeroChannel, "zero channel");
        return std::abs(beam.dot(h)) / nh;
    }

    template <typename T>
    T array_gain(const Beam<T> &beam, const ChannelVec<T> &h)
    {
        return array_gain(beam.entries, h.entries);
    }

    /// Far-field (SDMA) codebook: steering beams uniform in cos(angle).
    template <typename T>
    Codebook<T> angular_codebook(const ArrayConfig<T> &cfg, int n_angles, const ServiceSector<T> &sector)
    {
        require(n_angles >= 1, Errc::InvalidGrid, "n_angles must be >= 1");
        cfg.validate();
        const RVector<T> cs = cos_grid(n_angles, sector.cos_min, sector.cos_max);
        Codebook<T> cb;
        cb.kind = CodebookKind::Angular;
        cb.beams.resize(cfg.n_antennas, n_angles);
        for (int a = 0; a < n_angles; ++a)
        {
            cb.beams.col(a) = detail::steer_entries(cfg, cs(a));
            cb.grid.push_back({std::acos(cs(a)), std::numeric_limits<T>::infinity()});
        }
        return cb;
    }

    /// Near-field (LDMA) codebook. Inverse distance is sampled uniformly on
    /// [0, 1/r_min] with n_dist_slots points: slot 0 is the far-field steering
    /// entry, slot s >= 1 focuses at r_min * (n_dist_slots - 1) / s.
    template <typename T>
    Codebook<T> polar_codebook(const ArrayConfig<T> &cfg, int n_angles, int n_dist_slots, T r_min,
                               const ServiceSector<T> &sector)
    {
        require(n_angles >= 1 && n_dist_slots >= 1, Errc::InvalidGrid, "grid counts must be >= 1");
        require(r_min > T(0) && r_min < rayleigh_distance(cfg), Errc::InvalidGrid,
                "r_min must lie in (0, Rayleigh distance)");
        const RVector<T> cs = cos_grid(n_angles, sector.cos_min, sector.cos_max);
        Codebook<T> cb;
        cb.kind = CodebookKind::Polar;
        cb.beams.resize(cfg.n_antennas, Eigen::Index(n_angles) * n_dist_slots);
        Eigen::Index col = 0;
        for (int s = 0; s < n_dist_slots; ++s)
        {
            const T r = s == 0 ? std::numeric_limits<T>::infinity() : r_min * T(n_dist_slots - 1) / T(s);
            for (int a = 0; a < n_angles; ++a, ++col)
            {
                const T angle = std::acos(cs(a));
                if (s == 0)
                    cb.beams.col(col) = detail::steer_entries(cfg, cs(a));
                else
                    cb.beams.col(col) = focus_vector(cfg, position_at(cfg, angle, r)).entries;
                cb.grid.push_back({angle, r});
            }
        }
        return cb;
    }

    template <typename T>
    Codebook<T> polar_codebook(const ArrayConfig<T> &cfg, int n_angles, int n_dist_slots, T r_min)
    {
        return polar_codebook(cfg, n_angles, n_dist_slots, r_min, service_sector(cfg));
    }

    /// Gains |B^H h_k| / ||h_k|| for every codeword (rows) and user (columns).
    template <typename T>
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> codebook_gains(const Codebook<T> &cb, const CMatrix<T> &H)
    {
        require(cb.beams.rows() == H.rows(), Errc::DimensionMismatch, "codebook and channel lengths differ");
        Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> g = (cb.beams.adjoint() * H).cwiseAbs();
        for (Eigen::Index k = 0; k < H.cols(); ++k)
        {
            const T nh = H.col(k).norm();
            require(nh > T(0), Errc::ZeroChannel, "zero channel");
            g.col(k) /= nh;
        }
        return g;
    }

    struct GainMapPoint
    {
        double angle_rad;
        double r_m;
        double gain;
    };

    /// Gain of `beam` on the exact near-field channel over an (angle, distance)
    /// grid; angle-major order.
    template <typename T>
    std::vector<GainMapPoint> gain_map(const ArrayConfig<T> &cfg, const CVector<T> &beam,
                                       const std::vector<T> &angles, const std::vector<T> &distances)
    {
        std::vector<GainMapPoint> out;
        out.reserve(angles.size() * distances.size());
        for (T a : angles)
            for (T r : distances)
            {
                const auto h = near_channel(cfg, position_at(cfg, a, r), PathGain::Normalized);
                out.push_back({double(a), double(r), double(array_gain(beam, h.entries))});
            }
        return out;
    }
}

#endif
