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

#include "nearfield/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace nearfield
{
    SchemeSet make_codebooks(const ArrayConfig<double> &cfg, const CodebookParams &p, const UserBox<double> &box)
    {
        const auto sector = service_sector(cfg, box);
        return {angular_codebook(cfg, p.n_angles, sector),
                polar_codebook(cfg, p.n_angles, p.n_dist_slots, p.r_min_m, sector)};
    }

    std::vector<SweepRow> sweep_snr(const Dataset &d, const SweepParams &p, const UserBox<double> &box)
    {
        require(!d.records.empty(), Errc::InvalidArgument, "sweep needs at least one record");
        const auto books = make_codebooks(d.cfg, p.codebook, box);
        const double nan = std::numeric_limits<double>::quiet_NaN();

        std::vector<SweepRow> rows;
        for (double snr : p.snr_db)
        {
            std::vector<double> acc(sweep_schemes.size(), 0.0);
            for (const auto &rec : d.records)
            {
                PrecodeProblem<double> prob;
                prob.H = rec.H.cast<std::complex<double>>();
                prob.total_power = 1.0;
                prob.noise_var = std::pow(10.0, -snr / 10.0);
                const auto k = prob.n_users();
                const auto eq = equal_powers(k, prob.total_power);

                acc[0] += sum_se(prob, mrt(prob, eq));
                try
                {
                    auto z = zf(prob, eq);
                    z.powers = waterfill(RVector<double>((prob.H.adjoint() * z.directions).diagonal().cwiseAbs2()),
                                         prob.total_power, prob.noise_var);
                    acc[1] += sum_se(prob, z);
                }
                catch (const Error &e)
                {
                    if (e.code() != Errc::RankDeficient)
                        throw;
                    acc[1] = nan;
                }
                acc[2] += sum_se(prob, codebook_precoder(prob, books.angular, p.codebook.power_rule));
                acc[3] += sum_se(prob, codebook_precoder(prob, books.polar, p.codebook.power_rule));
                acc[4] += oracle_lambda(prob, p.oracle_budget).se;
            }
            for (std::size_t s = 0; s < sweep_schemes.size(); ++s)
                rows.push_back({snr, sweep_schemes[s], acc[s] / double(d.records.size())});
        }
        return rows;
    }

    namespace
    {
        UserPos<double> on_elevation(const ArrayConfig<double> &cfg, double elevation, double r)
        {
            return {r * std::cos(elevation), cfg.bs_height_m + r * std::sin(elevation)};
        }

        std::pair<double, double> ldma_pair(const ArrayConfig<double> &cfg, const LdmaParams &p,
                                            const SchemeSet &books, double gap, double elevation)
        {
            const std::vector<UserPos<double>> users = {on_elevation(cfg, elevation, p.near_m),
                                                        on_elevation(cfg, elevation, p.near_m + gap)};
            PrecodeProblem<double> prob;
            prob.H = channel_matrix(cfg, users, ChannelModel::NearSpherical, p.path_gain).H;
            prob.total_power = 1.0;
            prob.noise_var = std::pow(10.0, -p.snr_db / 10.0);
            return {sum_se(prob, codebook_precoder(prob, books.polar, p.codebook.power_rule)),
                    sum_se(prob, codebook_precoder(prob, books.angular, p.codebook.power_rule))};
        }

        double draw_elevation(const LdmaParams &p, std::uint64_t seed, std::size_t s)
        {
            SplitMix64 g(sub_seed(seed, s));
            const double deg = std::numbers::pi / 180.0;
            return g.uniform(p.elevation_min_deg * deg, p.elevation_max_deg * deg);
        }
    }

    std::vector<double> ldma_advantage(const ArrayConfig<double> &cfg, const LdmaParams &p, double gap_m,
                                       std::uint64_t seed, const UserBox<double> &box)
    {
        const auto books = make_codebooks(cfg, p.codebook, box);
        std::vector<double> out;
        for (std::size_t s = 0; s < p.seeds; ++s)
        {
            const auto [l, a] = ldma_pair(cfg, p, books, gap_m, draw_elevation(p, seed, s));
            out.push_back(l - a);
        }
        return out;
    }

    std::vector<LdmaRow> ldma_vs_sdma(const ArrayConfig<double> &cfg, const LdmaParams &p, std::uint64_t seed,
                                      const UserBox<double> &box)
    {
        require(p.seeds >= 1, Errc::InvalidArgument, "seeds must be >= 1");
        require(p.near_m > 0.0, Errc::InvalidArgument, "near_m must be > 0");
        const auto books = make_codebooks(cfg, p.codebook, box);
        std::vector<LdmaRow> rows;
        for (double gap : p.gaps_m)
        {
            require(gap >= 0.0, Errc::InvalidArgument, "gaps must be >= 0");
            double sl = 0.0, sa = 0.0;
            for (std::size_t s = 0; s < p.seeds; ++s)
            {
                const auto [l, a] = ldma_pair(cfg, p, books, gap, draw_elevation(p, seed, s));
                sl += l;
                sa += a;
            }
            rows.push_back({gap, sl / double(p.seeds), sa / double(p.seeds)});
        }
        return rows;
    }

    Population make_population(const ArrayConfig<double> &cfg, std::size_t near_count, std::size_t far_count,
                               const PopulationParams &p, const UserBox<double> &box, std::uint64_t seed)
    {
        const double rd = rayleigh_distance(cfg);
        require(p.near_max_frac > 0.0 && p.far_max_frac >= p.far_min_frac && p.far_min_frac > 0.0,
                Errc::InvalidArgument, "invalid population distance fractions");
        const double near_max = p.near_max_frac * rd;
        require(near_max > p.near_min_m, Errc::InvalidArgument, "near band is empty");

        Population pop;
        // near: box positions restricted to the near band, by rejection
        SplitMix64 g(sub_seed(seed, 0));
        std::size_t attempts = 0;
        while (pop.users.size() < near_count)
        {
            require(++attempts < 1000 * (near_count + 1000), Errc::InvalidArgument,
                    "user box does not intersect the near band");
            const UserPos<double> u{g.uniform(box.x_min, box.x_max), g.uniform(box.h_min, box.h_max)};
            const double r = center_distance(cfg, u);
            if (r >= p.near_min_m && r <= near_max)
                pop.users.push_back(u);
        }
        // far: elevations spanned by the box, distances in the far band
        double e_lo = std::numeric_limits<double>::infinity(), e_hi = -e_lo;
        for (double x : {box.x_min, box.x_max})
            for (double h : {box.h_min, box.h_max})
            {
                const double e = std::atan2(h - cfg.bs_height_m, x);
                e_lo = std::min(e_lo, e);
                e_hi = std::max(e_hi, e);
            }
        SplitMix64 f(sub_seed(seed, 1));
        for (std::size_t i = 0; i < far_count; ++i)
        {
            const double e = f.uniform(e_lo, e_hi);
            const double r = f.uniform(p.far_min_frac * rd, p.far_max_frac * rd);
            pop.users.push_back({r * std::cos(e), cfg.bs_height_m + r * std::sin(e)});
        }
        pop.labels = label_fields(cfg, pop.users);
        pop.H = channel_matrix(cfg, pop.users, ChannelModel::NearSpherical, PathGain::Normalized).H;
        return pop;
    }

    std::vector<ClassifyRow> classify_sweep(const ArrayConfig<double> &cfg, const ClassifyParams &p,
                                            const UserBox<double> &box, std::uint64_t seed)
    {
        require(p.val_near + p.val_far > 0, Errc::InvalidArgument, "validation split is empty");
        require(p.test_near + p.test_far > 0, Errc::InvalidArgument, "test split is empty");
        require(p.trials >= 1, Errc::InvalidArgument, "trials must be >= 1");
        const int grid = p.angle_grid_size > 0 ? p.angle_grid_size : std::max(2, 4 * cfg.n_antennas);
        const auto dict = steering_dictionary(cfg, grid);
        const auto val = make_population(cfg, p.val_near, p.val_far, p.population, box, sub_seed(seed, 1));
        const auto test = make_population(cfg, p.test_near, p.test_far, p.population, box, sub_seed(seed, 2));

        std::vector<double> snrs;
        if (p.noiseless)
            snrs.push_back(std::numeric_limits<double>::infinity());
        snrs.insert(snrs.end(), p.csi_snr_db.begin(), p.csi_snr_db.end());

        std::vector<ClassifyRow> rows;
        for (std::size_t s = 0; s < snrs.size(); ++s)
        {
            const double snr = snrs[s];
            const std::size_t trials = std::isinf(snr) ? 1 : p.trials;
            ClassifyRow row{snr, 0, 0, 0, 0, 0};
            for (std::size_t t = 0; t < trials; ++t)
            {
                const std::uint64_t noise_seed = sub_seed(sub_seed(seed, 100 + s), t);
                const CMatrix<double> hv = std::isinf(snr) ? val.H : perturb_csi(val.H, snr, sub_seed(noise_seed, 0));
                const CMatrix<double> ht = std::isinf(snr) ? test.H : perturb_csi(test.H, snr, sub_seed(noise_seed, 1));
                const auto cal = calibrate_threshold(field_stats(dict, hv), val.labels);
                const auto m = confusion(classify_stats(field_stats(dict, ht), cal.threshold), test.labels);
                row.accuracy += m.accuracy;
                row.precision_near += m.precision_near;
                row.recall_near += m.recall_near;
                row.balanced_accuracy += m.balanced_accuracy;
                row.threshold += cal.threshold;
            }
            const double n = double(trials);
            row.accuracy /= n;
            row.precision_near /= n;
            row.recall_near /= n;
            row.balanced_accuracy /= n;
            row.threshold /= n;
            rows.push_back(row);
        }
        return rows;
    }

    std::string format_number(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return buf;
    }

    std::string sweep_csv(const std::vector<SweepRow> &rows)
    {
        std::ostringstream os;
        os << "snr_db,scheme,sum_se\n";
        for (const auto &r : rows)
            os << format_number(r.snr_db) << ',' << r.scheme << ',' << format_number(r.sum_se) << '\n';
        return os.str();
    }

    std::string ldma_csv(const std::vector<LdmaRow> &rows)
    {
        std::ostringstream os;
        os << "delta_r_m,se_ldma,se_sdma\n";
        for (const auto &r : rows)
            os << format_number(r.delta_r_m) << ',' << format_number(r.se_ldma) << ',' << format_number(r.se_sdma)
               << '\n';
        return os.str();
    }

    std::string classify_csv(const std::vector<ClassifyRow> &rows)
    {
        std::ostringstream os;
        os << "csi_snr_db,accuracy,precision_near,recall_near\n";
        for (const auto &r : rows)
            os << format_number(r.csi_snr_db) << ',' << format_number(r.accuracy) << ','
               << format_number(r.precision_near) << ',' << format_number(r.recall_near) << '\n';
        return os.str();
    }

    std::string gainmap_csv(const std::vector<GainMapPoint> &rows)
    {
        std::ostringstream os;
        os << "angle_rad,r_m,gain\n";
        for (const auto &r : rows)
            os << format_number(r.angle_rad) << ',' << format_number(r.r_m) << ',' << format_number(r.gain) << '\n';
        return os.str();
    }
}
