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


#ifndef NEARFIELD_TESTS_SUPPORT_HPP
#define NEARFIELD_TESTS_SUPPORT_HPP

#include <limits>

#include "nearfield/datastore.hpp"
#include "nearfield/rng.hpp"

// Hand-rolled generators shared by the unit and acceptance tests.
namespace nearfield::testing
{
    inline CMatrix<double> gaussian(int n, int k, SplitMix64 &rng)
    {
        CMatrix<double> h(n, k);
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < n; ++i)
                h(i, j) = {rng.normal() / std::sqrt(2.0), rng.normal() / std::sqrt(2.0)};
        return h;
    }

    // Random dataset with arbitrary bit patterns in the float fields,
    // including signed zeros, subnormals and infinities.
    inline Dataset random_dataset(SplitMix64 &rng)
    {
        auto any_double = [&] {
            switch (rng.next() % 6)
            {
            case 0: return -0.0;
            case 1: return std::numeric_limits<double>::denorm_min();
            case 2: return std::numeric_limits<double>::infinity();
            default: return rng.uniform(-1e3, 1e3);
            }
        };
        Dataset d;
        d.cfg.n_antennas = 1 + int(rng.next() % 6);
        d.cfg.carrier_hz = rng.uniform(1e9, 1e11);
        d.cfg.spacing_m = rng.uniform(1e-3, 1.0);
        d.cfg.bs_height_m = rng.uniform(0, 50);
        d.cfg.tilt_rad = rng.uniform(-1, 1);
        d.k_users = 1 + std::uint32_t(rng.next() % 4);
        d.seed = rng.next();
        d.snr_db = rng.uniform(-20, 40);
        d.with_oracle = rng.next() % 2;
        d.path_gain = rng.next() % 2 ? PathGain::FreeSpace : PathGain::Normalized;
        const std::size_t count = rng.next() % 5;
        for (std::size_t i = 0; i < count; ++i)
        {
            DatasetRecord r;
            r.record_id = rng.next();
            for (std::uint32_t k = 0; k < d.k_users; ++k)
            {
                r.users.push_back({any_double(), any_double()});
                r.labels.push_back(rng.next() % 2 ? FieldLabel::Near : FieldLabel::Far);
            }
            r.H.resize(d.cfg.n_antennas, d.k_users);
            for (Eigen::Index c = 0; c < r.H.cols(); ++c)
                for (Eigen::Index n = 0; n < r.H.rows(); ++n)
                    r.H(n, c) = {float(any_double()), float(rng.normal())};
            const auto o = rng.next() % 3;
            if (o == 1)
            {
                OracleTarget t;
                t.lambda = Eigen::VectorXd::NullaryExpr(d.k_users, [&] { return any_double(); });
                t.powers = Eigen::VectorXd::NullaryExpr(d.k_users, [&] { return any_double(); });
                t.se = any_double();
                t.budget_exhausted = rng.next() % 2;
                r.oracle = t;
            }
            r.oracle_failed = o == 2;
            d.records.push_back(std::move(r));
        }
        return d;
    }

}

#endif
