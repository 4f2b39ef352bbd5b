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

#ifndef NEARFIELD_DATASTORE_HPP
#define NEARFIELD_DATASTORE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nearfield/fieldsplit.hpp"
#include "nearfield/precoding.hpp"

namespace nearfield
{
    inline constexpr std::uint32_t dataset_format_version = 1;

    struct OracleTarget
    {
        Eigen::VectorXd lambda;
        Eigen::VectorXd powers;
        double se = 0.0;
        bool budget_exhausted = false;

        bool operator==(const OracleTarget &o) const
        {
            return lambda == o.lambda && powers == o.powers && se == o.se && budget_exhausted == o.budget_exhausted;
        }
    };

    struct DatasetRecord
    {
        std::uint64_t record_id = 0;
        std::vector<UserPos<double>> users;
        std::vector<FieldLabel> labels;
        Eigen::MatrixXcf H; // N x K, stored at single precision
        std::optional<OracleTarget> oracle;
        bool oracle_failed = false;

        bool operator==(const DatasetRecord &o) const
        {
            return record_id == o.record_id && users == o.users && labels == o.labels && H == o.H &&
                   oracle == o.oracle && oracle_failed == o.oracle_failed;
        }
    };

    struct Dataset
    {
        ArrayConfig<double> cfg;
        std::uint32_t k_users = 0;
        std::uint64_t seed = 0;
        double snr_db = 0.0; // transmit SNR P / sigma^2
        bool with_oracle = false;
        PathGain path_gain = PathGain::FreeSpace;
        std::vector<DatasetRecord> records;

        bool operator==(const Dataset &) const = default;
    };

    struct GenerateSpec
    {
        ArrayConfig<double> cfg;
        std::uint32_t k_users = 4;
        UserBox<double> box;
        std::size_t count = 1;
        std::uint64_t seed = 0;
        double snr_db = 10.0;
        bool with_oracle = false;
        std::size_t oracle_budget = 20000;
        PathGain path_gain = PathGain::FreeSpace;
        std::uint64_t first_record_id = 0;
        unsigned workers = 1;
    };

    /// Records are generated independently from sub_seed(seed, record_id), so
    /// the output does not depend on `workers`.
    Dataset generate(const GenerateSpec &spec);

    /// Problem of a stored record: P = 1, sigma^2 = 10^(-snr_db/10), H widened
    /// to double.
    PrecodeProblem<double> problem_for(const Dataset &d, const DatasetRecord &r);

    std::vector<std::uint8_t> encode_blob(const Dataset &d);
    std::string encode_manifest(const Dataset &d, const std::string &blob_sha256);
    Dataset decode(const std::string &manifest, std::span<const std::uint8_t> blob);

    /// Writes `<base>.json` and `<base>.bin`, each via a temporary file and rename.
    void write(const Dataset &d, const std::filesystem::path &base);
    Dataset read(const std::filesystem::path &base);

    enum class Task : std::uint8_t
    {
        Classify = 0,
        Precode = 1
    };

    struct PredictionRecord
    {
        std::uint64_t record_id = 0;
        Task task = Task::Classify;
        std::vector<FieldLabel> labels;  // Classify
        Eigen::VectorXd lambda, powers;  // Precode

        bool operator==(const PredictionRecord &o) const
        {
            return record_id == o.record_id && task == o.task && labels == o.labels && lambda == o.lambda &&
                   powers == o.powers;
        }
    };

    struct PredictionSet
    {
        std::uint32_t n_antennas = 0;
        std::uint32_t k_users = 0;
        std::vector<PredictionRecord> records;

        bool operator==(const PredictionSet &) const = default;
    };

    std::vector<std::uint8_t> encode_predictions(const PredictionSet &p);
    PredictionSet decode_predictions(std::span<const std::uint8_t> bytes);
    void write_predictions(const PredictionSet &p, const std::filesystem::path &path);
    PredictionSet read_predictions(const std::filesystem::path &path);

    /// Predictions equal to the stored oracle targets (Precode) or the
    /// ground-truth labels (Classify).
    PredictionSet reference_predictions(const Dataset &d, Task task);

    struct ScoreReport
    {
        Task task = Task::Classify;
        std::size_t scored = 0;
        std::size_t infeasible = 0;      // rejected Precode predictions
        std::size_t missing_oracle = 0;  // records without a usable oracle target
        ConfusionMetrics metrics;        // Classify
        double mean_se_ratio = 0.0;      // Precode: mean of SE(pred) / SE(oracle)
        double mean_se_pred = 0.0;
        double mean_se_oracle = 0.0;
    };

    inline constexpr double simplex_tolerance = 1e-6;

    ScoreReport score(const Dataset &d, const PredictionSet &p);

    std::string sha256_hex(std::span<const std::uint8_t> bytes);

    /// Writes `bytes` to `path` through a sibling temporary file and rename.
    void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);
    std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
}

#endif
