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

#ifndef NEARFIELD_FIELDSPLIT_HPP
#define NEARFIELD_FIELDSPLIT_HPP

#include <algorithm>
#include <vector>

#include "nearfield/beams.hpp"

namespace nearfield
{
    // Near/far classification from the channel alone. The statistic is the
    // best normalized correlation with any far-field steering vector; a
    // spherical wavefront spreads over several angles and scores lower.

    template <typename T = double>
    struct ClassifierConfig
    {
        int angle_grid_size = 1024; // 4N for the default array
        T threshold = T(0.97);

        void validate() const
        {
            require(angle_grid_size >= 2, Errc::InvalidArgument, "angle grid needs >= 2 points");
            require(threshold > T(0) && threshold < T(1), Errc::InvalidArgument, "threshold must be in (0, 1)");
        }

        static ClassifierConfig for_array(int n_antennas, T threshold = T(0.97))
        {
            return {std::max(2, 4 * n_antennas), threshold};
        }
    };

    /// Steering vectors on the endpoint-inclusive grid of `grid_size` points
    /// uniform in cos(angle) over [-1, 1]. Grids of size m(G-1)+1 contain the
    /// grid of size G.
    template <typename T>
    CMatrix<T> steering_dictionary(const ArrayConfig<T> &cfg, int grid_size)
    {
        require(grid_size >= 2, Errc::InvalidArgument, "angle grid needs >= 2 points");
        cfg.validate();
        const RVector<T> cs = cos_grid(grid_size, T(-1), T(1));
        CMatrix<T> s(cfg.n_antennas, grid_size);
        for (int i = 0; i < grid_size; ++i)
            s.col(i) = detail::steer_entries(cfg, cs(i));
        return s;
    }

    /// Statistic for every column of H against a precomputed dictionary.
    template <typename T>
    RVector<T> field_stats(const CMatrix<T> &dictionary, const CMatrix<T> &H)
    {
        require(dictionary.rows() == H.rows(), Errc::DimensionMismatch, "channel length does not match the array");
        const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> g = (dictionary.adjoint() * H).cwiseAbs();
        RVector<T> out(H.cols());
        for (Eigen::Index k = 0; k < H.cols(); ++k)
        {
            const T nh = H.col(k).norm();
            require(nh > T(0), Errc::ZeroChannel, "zero channel");
            out(k) = std::min(T(1), g.col(k).maxCoeff() / nh);
        }
        return out;
    }

    template <typename T>
    T field_stat(const ArrayConfig<T> &cfg, const CVector<T> &h, int grid_size)
    {
        require(h.size() == cfg.n_antennas, Errc::DimensionMismatch, "channel length does not match the array");
        return field_stats(steering_dictionary(cfg, grid_size), CMatrix<T>(h))(0);
    }

    template <typename T>
    T field_stat(const ArrayConfig<T> &cfg, const ChannelVec<T> &h, int grid_size)
    {
        return field_stat(cfg, h.entries, grid_size);
    }

    /// Far iff the statistic reaches the threshold.
    template <typename T>
    std::vector<FieldLabel> classify_stats(const RVector<T> &stats, T threshold)
    {
        std::vector<FieldLabel> out;
        out.reserve(std::size_t(stats.size()));
        for (Eigen::Index k = 0; k < stats.size(); ++k)
            out.push_back(stats(k) >= threshold ? FieldLabel::Far : FieldLabel::Near);
        return out;
    }

    template <typename T>
    std::vector<FieldLabel> classify(const ArrayConfig<T> &cfg, const CMatrix<T> &H, const ClassifierConfig<T> &cc)
    {
        cc.validate();
        return classify_stats(field_stats(steering_dictionary(cfg, cc.angle_grid_size), H), cc.threshold);
    }

    template <typename T>
    std::vector<FieldLabel> classify(const ArrayConfig<T> &cfg, const ChannelMatrix<T> &H, const ClassifierConfig<T> &cc)
    {
        return classify(cfg, H.H, cc);
    }

    struct ConfusionMetrics
    {
        std::size_t true_near = 0, false_near = 0, true_far = 0, false_far = 0;
        double accuracy = 0;
        double balanced_accuracy = 0;
        double precision_near = 0, recall_near = 0;
        double precision_far = 0, recall_far = 0;
    };

    inline ConfusionMetrics confusion(const std::vector<FieldLabel> &pred, const std::vector<FieldLabel> &truth)
    {
        require(pred.size() == truth.size(), Errc::LengthMismatch, "prediction and truth lengths differ");
        ConfusionMetrics m;
        for (std::size_t i = 0; i < pred.size(); ++i)
        {
            const bool pn = pred[i] == FieldLabel::Near, tn = truth[i] == FieldLabel::Near;
            if (pn && tn)
                ++m.true_near;
            else if (pn)
                ++m.false_near;
            else if (!tn)
                ++m.true_far;
            else
                ++m.false_far;
        }
        auto rate = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : double(num) / double(den); };
        m.accuracy = rate(m.true_near + m.true_far, pred.size());
        m.precision_near = rate(m.true_near, m.true_near + m.false_near);
        m.recall_near = rate(m.true_near, m.true_near + m.false_far);
        m.precision_far = rate(m.true_far, m.true_far + m.false_far);
        m.recall_far = rate(m.true_far, m.true_far + m.false_near);
        m.balanced_accuracy = 0.5 * (m.recall_near + m.recall_far);
        return m;
    }

    template <typename T = double>
    struct Calibration
    {
        T threshold;
        double balanced_accuracy;
    };

    /// Threshold with the best balanced accuracy. Candidates are the smallest
    /// statistic, the midpoints of adjacent distinct statistics and the
    /// midpoint between the largest and 1; the lowest wins ties.
    template <typename T>
    Calibration<T> calibrate_threshold(const RVector<T> &stats, const std::vector<FieldLabel> &labels)
    {
        require(std::size_t(stats.size()) == labels.size(), Errc::LengthMismatch, "stats and labels lengths differ");
        const bool has_near = std::count(labels.begin(), labels.end(), FieldLabel::Near) > 0;
        const bool has_far = std::count(labels.begin(), labels.end(), FieldLabel::Far) > 0;
        require(has_near && has_far, Errc::SingleClass, "calibration needs both classes");

        std::vector<T> u(stats.data(), stats.data() + stats.size());
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());

        std::vector<T> cand;
        cand.push_back(u.front());
        for (std::size_t i = 0; i + 1 < u.size(); ++i)
            cand.push_back(T(0.5) * (u[i] + u[i + 1]));
        cand.push_back(T(0.5) * (u.back() + T(1)));

        Calibration<T> best{T(0), -1.0};
        for (T t : cand)
        {
            if (!(t > T(0) && t < T(1)))
                continue;
            const double ba = confusion(classify_stats(stats, t), labels).balanced_accuracy;
            if (ba > best.balanced_accuracy)
                best = {t, ba};
        }
        require(best.balanced_accuracy >= 0.0, Errc::InvalidArgument, "no admissible threshold in (0, 1)");
        return best;
    }

    /// Adds i.i.d. complex Gaussian noise to each column at the given per-entry
    /// CSI SNR (column mean power over noise variance).
    template <typename T>
    CMatrix<T> perturb_csi(const CMatrix<T> &H, double csi_snr_db, std::uint64_t seed)
    {
        CMatrix<T> out = H;
        for (Eigen::Index k = 0; k < H.cols(); ++k)
        {
            SplitMix64 g(sub_seed(seed, std::uint64_t(k)));
            const double power = double(H.col(k).squaredNorm()) / double(H.rows());
            const double sd = std::sqrt(power / std::pow(10.0, csi_snr_db / 10.0) / 2.0);
            for (Eigen::Index n = 0; n < H.rows(); ++n)
            {
                const double re = g.normal(), im = g.normal();
                out(n, k) += std::complex<T>(T(sd * re), T(sd * im));
            }
        }
        return out;
    }
}

#endif
