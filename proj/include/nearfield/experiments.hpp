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

#ifndef NEARFIELD_EXPERIMENTS_HPP
#define NEARFIELD_EXPERIMENTS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nearfield/datastore.hpp"

namespace nearfield
{
    // Case-study experiments shared by the command-line tool and the test
    // suites. Everything is deterministic in the seeds passed in.

    struct CodebookParams
    {
        int n_angles = 256;
        int n_dist_slots = 8;
        double r_min_m = 10.0;
        PowerRule power_rule = PowerRule::Equal;
    };

    struct SchemeSet
    {
        Codebook<double> angular;
        Codebook<double> polar;
    };

    SchemeSet make_codebooks(const ArrayConfig<double> &cfg, const CodebookParams &p, const UserBox<double> &box);

    // ---- SNR sweep ----------------------------------------------------------

    inline const std::vector<std::string> sweep_schemes = {"MRT", "ZF", "SDMA", "LDMA", "OracleStructure"};

    struct SweepRow
    {
        double snr_db;
        std::string scheme;
        double sum_se; // NaN when the scheme is infeasible on some record
    };

    struct SweepParams
    {
        std::vector<double> snr_db = {-10, -5, 0, 5, 10, 15, 20};
        std::size_t oracle_budget = 4000;
        CodebookParams codebook;
    };

    /// Mean sum SE per (SNR, scheme) over the records of `d`; rows are SNR-major
    /// in `sweep_schemes` order. MRT and the codebooks use equal power (or the
    /// codebook rule), ZF is water-filled.
    std::vector<SweepRow> sweep_snr(const Dataset &d, const SweepParams &p, const UserBox<double> &box);

    // ---- LDMA vs SDMA -------------------------------------------------------

    struct LdmaParams
    {
        std::vector<double> gaps_m = {0, 20, 40, 60, 80, 100, 120, 140, 160, 180};
        double near_m = 20.0;
        std::size_t seeds = 100;
        double snr_db = 30.0;
        double elevation_min_deg = -4.0; // keeps the 200 m user inside the user box
        double elevation_max_deg = 4.0;
        PathGain path_gain = PathGain::Normalized;
        CodebookParams codebook;
    };

    struct LdmaRow
    {
        double delta_r_m;
        double se_ldma;
        double se_sdma;
    };

    /// Two users on one ray from the array center at near_m and near_m + gap.
    /// Per seed s the elevation is drawn from sub_seed(seed, s); rows are means
    /// over seeds.
    std::vector<LdmaRow> ldma_vs_sdma(const ArrayConfig<double> &cfg, const LdmaParams &p, std::uint64_t seed,
                                      const UserBox<double> &box = {});

    /// Per-seed values of se_ldma - se_sdma for one gap.
    std::vector<double> ldma_advantage(const ArrayConfig<double> &cfg, const LdmaParams &p, double gap_m,
                                       std::uint64_t seed, const UserBox<double> &box = {});

    // ---- Field classification -----------------------------------------------

    struct PopulationParams
    {
        double near_max_frac = 0.1;  // near users: box positions within this x Rayleigh distance
        double near_min_m = 1.0;
        double far_min_frac = 10.0;  // far users: this range of x Rayleigh distance,
        double far_max_frac = 20.0;  // at elevations of the user box
    };

    struct Population
    {
        std::vector<UserPos<double>> users;
        std::vector<FieldLabel> labels;
        CMatrix<double> H;
    };

    Population make_population(const ArrayConfig<double> &cfg, std::size_t near_count, std::size_t far_count,
                               const PopulationParams &p, const UserBox<double> &box, std::uint64_t seed);

    struct ClassifyRow
    {
        double csi_snr_db; // +inf for noiseless CSI
        double accuracy;
        double precision_near;
        double recall_near;
        double balanced_accuracy;
        double threshold;
    };

    struct ClassifyParams
    {
        std::vector<double> csi_snr_db = {30, 20, 10, 5, 0};
        bool noiseless = true;
        std::size_t val_near = 500, val_far = 500;
        std::size_t test_near = 500, test_far = 500;
        int angle_grid_size = 0; // 0 -> 4N
        std::size_t trials = 1;
        PopulationParams population;
    };

    /// Calibrates on a validation population and reports on a test population
    /// for each CSI SNR, averaging over `trials` noise draws.
    std::vector<ClassifyRow> classify_sweep(const ArrayConfig<double> &cfg, const ClassifyParams &p,
                                            const UserBox<double> &box, std::uint64_t seed);

    // ---- CSV -----------------------------------------------------------------

    std::string format_number(double v);
    std::string sweep_csv(const std::vector<SweepRow> &rows);
    std::string ldma_csv(const std::vector<LdmaRow> &rows);
    std::string classify_csv(const std::vector<ClassifyRow> &rows);
    std::string gainmap_csv(const std::vector<GainMapPoint> &rows);
}

#endif
