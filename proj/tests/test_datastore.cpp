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

#include <filesystem>
#include <functional>
#include <limits>

#include "nearfield/datastore.hpp"
#include "nearfield/rng.hpp"
#include "support.hpp"

#include <json.hpp>

using namespace nearfield;
using nearfield::testing::random_dataset;

namespace
{
    std::filesystem::path scratch(const char *name)
    {
        auto p = std::filesystem::temp_directory_path() / "nearfield_test_datastore";
        std::filesystem::create_directories(p);
        return p / name;
    }

    std::string manifest_for(const Dataset &d, std::span<const std::uint8_t> blob)
    {
        return encode_manifest(d, sha256_hex(blob));
    }

    Errc code_of(const std::function<void()> &f)
    {
        try
        {
            f();
        }
        catch (const Error &e)
        {
            return e.code();
        }
        FAIL("no error raised");
        return Errc::InvalidArgument;
    }

    GenerateSpec small_spec()
    {
        GenerateSpec s;
        s.cfg.n_antennas = 8;
        s.k_users = 2;
        s.count = 6;
        s.seed = 99;
        s.snr_db = 10;
        s.with_oracle = true;
        s.oracle_budget = 800;
        s.path_gain = PathGain::Normalized;
        return s;
    }
}

TEST_CASE("round trip, 100 random datasets")
{
    SplitMix64 rng(2024);
    for (int i = 0; i < 100; ++i)
    {
        const auto d = random_dataset(rng);
        const auto blob = encode_blob(d);
        const auto back = decode(manifest_for(d, blob), blob);
        CHECK(back == d);
        CHECK(encode_blob(back) == blob);
    }
}

TEST_CASE("write and read on disk")
{
    const auto d = generate(small_spec());
    const auto base = scratch("rt");
    write(d, base);
    const auto e = read(base);
    CHECK(e == d);
    write(e, scratch("rt2"));
    CHECK(read_file(scratch("rt.bin")) == read_file(scratch("rt2.bin")));
    CHECK(read_file(scratch("rt.json")) == read_file(scratch("rt2.json")));
    CHECK_FALSE(std::filesystem::exists(scratch("rt.bin.tmp")));
}

TEST_CASE("generation determinism and worker invariance")
{
    auto s = small_spec();
    s.count = 13;
    const auto a = encode_blob(generate(s));
    CHECK(a == encode_blob(generate(s)));
    for (unsigned w : {2u, 3u, 8u, 64u})
    {
        s.workers = w;
        CHECK(encode_blob(generate(s)) == a);
    }
    s.seed = 100;
    CHECK(encode_blob(generate(s)) != a);
}

TEST_CASE("generated records")
{
    const auto d = generate(small_spec());
    REQUIRE(d.records.size() == 6);
    for (const auto &r : d.records)
    {
        REQUIRE(r.oracle);
        CHECK_FALSE(r.oracle_failed);
        // oracle SE reproducible from (H, lambda, p, sigma^2)
        const auto prob = problem_for(d, r);
        const double se = sum_se(prob, structure_solution(prob, r.oracle->lambda, r.oracle->powers));
        CHECK(std::abs(se - r.oracle->se) < 1e-6);
        CHECK(r.labels == label_fields(d.cfg, r.users));
    }

    auto s = small_spec();
    s.k_users = 1;
    s.count = 1;
    s.path_gain = PathGain::FreeSpace;
    const auto one = generate(s);
    const auto &r = one.records[0];
    const double h2 = r.H.cast<std::complex<double>>().squaredNorm();
    CHECK(std::abs(r.oracle->se - std::log2(1 + h2 / std::pow(10.0, -1.0))) < 1e-6);

    s.count = 0;
    CHECK(code_of([&] { generate(s); }) == Errc::InvalidArgument);
}

TEST_CASE("default-array records in the default box are all Near")
{
    GenerateSpec s;
    s.count = 200;
    s.k_users = 4;
    for (const auto &r : generate(s).records)
        for (auto l : r.labels)
            CHECK(l == FieldLabel::Near);
}

TEST_CASE("decode errors")
{
    const auto d = generate(small_spec());
    const auto blob = encode_blob(d);
    const auto manifest = manifest_for(d, blob);

    // truncated blob, manifest hash updated so the parser itself sees the cut
    for (std::size_t cut : {std::size_t(3), std::size_t(10), std::size_t(30), blob.size() / 2, blob.size() - 1})
    {
        const std::vector<std::uint8_t> t(blob.begin(), blob.begin() + std::ptrdiff_t(cut));
        try
        {
            decode(manifest_for(d, t), t);
            FAIL("truncated blob accepted");
        }
        catch (const Error &e)
        {
            CHECK(e.code() == Errc::FormatError);
            CHECK(e.offset() <= cut);
        }
    }

    // stale hash
    auto flipped = blob;
    flipped.back() ^= 1;
    CHECK(code_of([&] { decode(manifest, flipped); }) == Errc::FormatError);

    // version bumped in the blob
    auto v2 = blob;
    v2[4] = 2;
    CHECK(code_of([&] { decode(manifest_for(d, v2), v2); }) == Errc::VersionMismatch);

    // version bumped in the manifest
    auto m = nlohmann::json::parse(manifest);
    m["format_version"] = 2;
    CHECK(code_of([&] { decode(m.dump(), blob); }) == Errc::VersionMismatch);

    // trailing bytes
    auto longer = blob;
    longer.push_back(0);
    try
    {
        decode(manifest_for(d, longer), longer);
        FAIL("trailing bytes accepted");
    }
    catch (const Error &e)
    {
        CHECK(e.code() == Errc::FormatError);
        CHECK(e.offset() == blob.size());
    }

    // bad magic
    auto magic = blob;
    magic[0] = 'X';
    CHECK(code_of([&] { decode(manifest_for(d, magic), magic); }) == Errc::FormatError);

    CHECK(code_of([&] { decode("{not json", blob); }) == Errc::FormatError);
    CHECK_THROWS(read(scratch("does_not_exist")));
}

TEST_CASE("predictions round trip")
{
    SplitMix64 rng(5);
    for (int i = 0; i < 100; ++i)
    {
        PredictionSet p;
        p.n_antennas = 1 + std::uint32_t(rng.next() % 300);
        p.k_users = 1 + std::uint32_t(rng.next() % 5);
        const auto count = rng.next() % 6;
        for (std::uint64_t j = 0; j < count; ++j)
        {
            PredictionRecord r;
            r.record_id = rng.next();
            r.task = rng.next() % 2 ? Task::Classify : Task::Precode;
            if (r.task == Task::Classify)
                for (std::uint32_t k = 0; k < p.k_users; ++k)
                    r.labels.push_back(rng.next() % 2 ? FieldLabel::Near : FieldLabel::Far);
            else
            {
                r.lambda = Eigen::VectorXd::NullaryExpr(p.k_users, [&] { return rng.uniform(); });
                r.powers = Eigen::VectorXd::NullaryExpr(p.k_users, [&] { return rng.uniform(); });
            }
            p.records.push_back(std::move(r));
        }
        const auto bytes = encode_predictions(p);
        CHECK(decode_predictions(bytes) == p);
        if (bytes.size() > 24)
        {
            const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
            CHECK(code_of([&] { decode_predictions(cut); }) == Errc::FormatError);
        }
    }
    const auto path = scratch("pred.bin");
    PredictionSet p{8, 2, {}};
    write_predictions(p, path);
    CHECK(read_predictions(path) == p);
}

TEST_CASE("score")
{
    const auto d = generate(small_spec());

    const auto oracle = score(d, reference_predictions(d, Task::Precode));
    CHECK(oracle.scored == d.records.size());
    CHECK(std::abs(oracle.mean_se_ratio - 1.0) < 1e-9);
    CHECK(oracle.mean_se_oracle > 0);

    auto equal = reference_predictions(d, Task::Precode);
    for (auto &r : equal.records)
        r.lambda = r.powers = Eigen::VectorXd::Constant(2, 0.5);
    CHECK(score(d, equal).mean_se_ratio <= 1.0 + 1e-12);

    const auto labels = score(d, reference_predictions(d, Task::Classify));
    CHECK(labels.metrics.accuracy == 1.0);

    auto bad = reference_predictions(d, Task::Precode);
    bad.records[0].lambda(0) += 1e-3;
    bad.records[1].powers(1) = -0.1;
    const auto rep = score(d, bad);
    CHECK(rep.infeasible == 2);
    CHECK(rep.scored == d.records.size() - 2);

    auto ids = reference_predictions(d, Task::Classify);
    ids.records[2].record_id += 1000;
    CHECK(code_of([&] { score(d, ids); }) == Errc::IdMismatch);
    ids.records.pop_back();
    CHECK(code_of([&] { score(d, ids); }) == Errc::IdMismatch);

    auto no_oracle = small_spec();
    no_oracle.with_oracle = false;
    const auto dn = generate(no_oracle);
    CHECK(code_of([&] { reference_predictions(dn, Task::Precode); }) == Errc::MissingOracle);
    auto pn = reference_predictions(d, Task::Precode);
    CHECK(score(dn, pn).missing_oracle == dn.records.size());
}

TEST_CASE("sha256")
{
    const std::vector<std::uint8_t> abc{'a', 'b', 'c'};
    CHECK(sha256_hex(abc) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex({}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
