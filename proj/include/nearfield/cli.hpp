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

#ifndef NEARFIELD_CLI_HPP
#define NEARFIELD_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nearfield/experiments.hpp"

namespace nearfield::cli
{
    enum ExitCode : int
    {
        exit_ok = 0,
        exit_config = 2,
        exit_runtime = 3
    };

    /// Raised for anything wrong with the command line or the config file.
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct GenConfig
    {
        std::size_t train = 8000, val = 1000, test = 1000;
        double snr_db = 10.0;
        bool with_oracle = true;
        std::size_t oracle_budget = 20000;
    };

    struct GainmapConfig
    {
        BeamKind kind = BeamKind::Focus;
        double angle_rad = 1.5707963267948966;
        double r_m = 50.0;
        double angle_min_rad = 1.2, angle_max_rad = 1.9;
        int angle_count = 71;
        double r_min_m = 5.0, r_max_m = 400.0;
        int r_count = 80;
    };

    struct ScoreConfig
    {
        std::string dataset;     // base path, without .json/.bin
        std::string predictions; // prediction .bin file
    };

    /// Parsed and validated run configuration. Every section is optional and
    /// falls back to the defaults above; unknown keys are rejected.
    struct RunConfig
    {
        ArrayConfig<double> array;
        PathGain path_gain = PathGain::Normalized; // snr_db is then the per-antenna receive SNR
        std::uint32_t k_users = 4;
        UserBox<double> box;
        std::uint64_t seed = 0;
        std::string out_dir = "out";
        unsigned workers = 1;

        GenConfig gen;
        std::size_t sweep_records = 20;
        SweepParams sweep;
        LdmaParams ldma;
        ClassifyParams classify;
        GainmapConfig gainmap;
        ScoreConfig score;
    };

    RunConfig parse_config(const std::string &json_text);
    RunConfig load_config(const std::filesystem::path &path);

    /// Entry point of the `nearfield` tool; returns the process exit code.
    int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

    // Commands; each writes its outputs under cfg.out_dir.
    void cmd_gen(const RunConfig &cfg, std::ostream &out);
    void cmd_sweep_snr(const RunConfig &cfg, std::ostream &out);
    void cmd_ldma_vs_sdma(const RunConfig &cfg, std::ostream &out);
    void cmd_classify(const RunConfig &cfg, std::ostream &out);
    void cmd_gainmap(const RunConfig &cfg, std::ostream &out);
    void cmd_score(const RunConfig &cfg, std::ostream &out);
}

#endif
