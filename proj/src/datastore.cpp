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

#include "nearfield/datastore.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace nearfield
{
    namespace
    {
        constexpr char dataset_magic[4] = {'N', 'F', 'L', 'D'};
        constexpr char prediction_magic[4] = {'N', 'F', 'L', 'P'};

        enum OracleFlag : std::uint8_t
        {
            oracle_present = 1,
            oracle_exhausted = 2,
            oracle_error = 4
        };

        class ByteWriter
        {
        public:
            void bytes(const char *p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
            void u8(std::uint8_t v) { out_.push_back(v); }
            void u32(std::uint32_t v)
            {
                for (int i = 0; i < 4; ++i)
                    out_.push_back(std::uint8_t(v >> (8 * i)));
            }
            void u64(std::uint64_t v)
            {
                for (int i = 0; i < 8; ++i)
                    out_.push_back(std::uint8_t(v >> (8 * i)));
            }
            void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
            void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

            std::vector<std::uint8_t> take() { return std::move(out_); }

        private:
            std::vector<std::uint8_t> out_;
        };

        class ByteReader
        {
        public:
            explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

            std::size_t offset() const { return pos_; }
            bool done() const { return pos_ == in_.size(); }

            void expect_magic(const char (&magic)[4])
            {
                need(4);
                if (std::memcmp(in_.data() + pos_, magic, 4) != 0)
                    throw Error(Errc::FormatError, "bad magic", pos_);
                pos_ += 4;
            }
            std::uint8_t u8()
            {
                need(1);
                return in_[pos_++];
            }
            std::uint32_t u32()
            {
                need(4);
                std::uint32_t v = 0;
                for (int i = 0; i < 4; ++i)
                    v |= std::uint32_t(in_[pos_ + i]) << (8 * i);
                pos_ += 4;
                return v;
            }
            std::uint64_t u64()
            {
                need(8);
                std::uint64_t v = 0;
                for (int i = 0; i < 8; ++i)
                    v |= std::uint64_t(in_[pos_ + i]) << (8 * i);
                pos_ += 8;
                return v;
            }
            float f32() { return std::bit_cast<float>(u32()); }
            double f64() { return std::bit_cast<double>(u64()); }

            // Fails early when a declared count cannot possibly fit.
            void need(std::size_t n) const
            {
                if (n > in_.size() - pos_)
                    throw Error(Errc::FormatError, "unexpected end of data", pos_);
            }

        private:
            std::span<const std::uint8_t> in_;
            std::size_t pos_ = 0;
        };

        FieldLabel decode_label(ByteReader &r)
        {
            const std::size_t at = r.offset();
            const std::uint8_t v = r.u8();
            if (v > 1)
                throw Error(Errc::FormatError, "label byte out of range", at);
            return FieldLabel(v);
        }

        Eigen::VectorXd read_vec(ByteReader &r, std::uint32_t k)
        {
            Eigen::VectorXd v(k);
            for (std::uint32_t i = 0; i < k; ++i)
                v(i) = r.f64();
            return v;
        }

        void write_vec(ByteWriter &w, const Eigen::VectorXd &v)
        {
            for (Eigen::Index i = 0; i < v.size(); ++i)
                w.f64(v(i));
        }

        DatasetRecord make_record(const GenerateSpec &spec, std::uint64_t record_id)
        {
            DatasetRecord rec;
            rec.record_id = record_id;
            rec.users = sample_users(spec.k_users, spec.box, sub_seed(spec.seed, record_id));
            rec.labels = label_fields(spec.cfg, rec.users);
            const auto ch = channel_matrix(spec.cfg, rec.users, ChannelModel::NearSpherical, spec.path_gain);
            rec.H = ch.H.cast<std::complex<float>>();
            if (spec.with_oracle)
            {
                PrecodeProblem<double> prob;
                prob.H = rec.H.cast<std::complex<double>>();
                prob.total_power = 1.0;
                prob.noise_var = std::pow(10.0, -spec.snr_db / 10.0);
                try
                {
                    const auto o = oracle_lambda(prob, spec.oracle_budget);
                    rec.oracle = OracleTarget{o.lambda, o.powers, o.se, o.budget_exhausted};
                }
                catch (const Error &)
                {
                    rec.oracle_failed = true;
                }
            }
            return rec;
        }
    }

    Dataset generate(const GenerateSpec &spec)
    {
        spec.cfg.validate();
        require(spec.count >= 1, Errc::InvalidArgument, "count must be >= 1");
        require(spec.k_users >= 1, Errc::InvalidArgument, "k_users must be >= 1");
        require(spec.with_oracle == false || spec.oracle_budget >= 1, Errc::InvalidArgument, "oracle budget must be >= 1");

        Dataset d;
        d.cfg = spec.cfg;
        d.k_users = spec.k_users;
        d.seed = spec.seed;
        d.snr_db = spec.snr_db;
        d.with_oracle = spec.with_oracle;
        d.path_gain = spec.path_gain;
        d.records.resize(spec.count);

        const unsigned workers = std::max(1u, std::min<unsigned>(spec.workers, unsigned(spec.count)));
        auto job = [&](unsigned w) {
            for (std::size_t i = w; i < spec.count; i += workers)
                d.records[i] = make_record(spec, spec.first_record_id + i);
        };
        if (workers == 1)
            job(0);
        else
        {
            std::vector<std::exception_ptr> errors(workers);
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w)
                pool.emplace_back([&, w] {
                    try
                    {
                        job(w);
                    }
                    catch (...)
                    {
                        errors[w] = std::current_exception();
                    }
                });
            for (auto &t : pool)
                t.join();
            for (auto &e : errors)
                if (e)
                    std::rethrow_exception(e);
        }
        return d;
    }

    PrecodeProblem<double> problem_for(const Dataset &d, const DatasetRecord &r)
    {
        PrecodeProblem<double> prob;
        prob.H = r.H.cast<std::complex<double>>();
        prob.total_power = 1.0;
        prob.noise_var = std::pow(10.0, -d.snr_db / 10.0);
        return prob;
    }

    std::vector<std::uint8_t> encode_blob(const Dataset &d)
    {
        const std::uint32_t n = std::uint32_t(d.cfg.n_antennas), k = d.k_users;
        ByteWriter w;
        w.bytes(dataset_magic, 4);
        w.u32(dataset_format_version);
        w.u32(n);
        w.u32(k);
        w.u64(d.records.size());
        for (const auto &rec : d.records)
        {
            require(rec.users.size() == k && rec.labels.size() == k && rec.H.rows() == Eigen::Index(n) &&
                        rec.H.cols() == Eigen::Index(k),
                    Errc::DimensionMismatch, "record dimensions do not match the dataset");
            w.u64(rec.record_id);
            for (const auto &u : rec.users)
            {
                w.f64(u.x_m);
                w.f64(u.h_m);
            }
            for (auto l : rec.labels)
                w.u8(std::uint8_t(l));
            for (Eigen::Index c = 0; c < rec.H.cols(); ++c)
                for (Eigen::Index r = 0; r < rec.H.rows(); ++r)
                {
                    w.f32(rec.H(r, c).real());
                    w.f32(rec.H(r, c).imag());
                }
            std::uint8_t flag = 0;
            if (rec.oracle)
                flag |= oracle_present | (rec.oracle->budget_exhausted ? oracle_exhausted : 0);
            if (rec.oracle_failed)
                flag |= oracle_error;
            w.u8(flag);
            if (rec.oracle)
            {
                require(rec.oracle->lambda.size() == Eigen::Index(k) && rec.oracle->powers.size() == Eigen::Index(k),
                        Errc::DimensionMismatch, "oracle dimensions do not match the dataset");
                write_vec(w, rec.oracle->lambda);
                write_vec(w, rec.oracle->powers);
                w.f64(rec.oracle->se);
            }
        }
        return w.take();
    }

    std::string encode_manifest(const Dataset &d, const std::string &blob_sha256)
    {
        nlohmann::json j;
        j["format_version"] = dataset_format_version;
        j["cfg"] = {{"n_antennas", d.cfg.n_antennas},
                    {"carrier_hz", d.cfg.carrier_hz},
                    {"spacing_m", d.cfg.spacing_m},
                    {"bs_height_m", d.cfg.bs_height_m},
                    {"tilt_rad", d.cfg.tilt_rad}};
        j["k_users"] = d.k_users;
        j["count"] = d.records.size();
        j["seed"] = d.seed;
        j["snr_db"] = d.snr_db;
        j["with_oracle"] = d.with_oracle;
        j["path_gain"] = d.path_gain == PathGain::FreeSpace ? "free_space" : "normalized";
        j["blob_sha256"] = blob_sha256;
        return j.dump(2) + "\n";
    }

    Dataset decode(const std::string &manifest, std::span<const std::uint8_t> blob)
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(manifest);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw Error(Errc::FormatError, std::string("manifest: ") + e.what(), e.byte);
        }

        Dataset d;
        std::uint64_t count = 0;
        std::string sha;
        try
        {
            if (j.at("format_version").get<std::uint32_t>() != dataset_format_version)
                throw Error(Errc::VersionMismatch, "manifest format_version is not 1");
            const auto &c = j.at("cfg");
            d.cfg.n_antennas = c.at("n_antennas").get<int>();
            d.cfg.carrier_hz = c.at("carrier_hz").get<double>();
            d.cfg.spacing_m = c.at("spacing_m").get<double>();
            d.cfg.bs_height_m = c.at("bs_height_m").get<double>();
            d.cfg.tilt_rad = c.at("tilt_rad").get<double>();
            d.k_users = j.at("k_users").get<std::uint32_t>();
            count = j.at("count").get<std::uint64_t>();
            d.seed = j.at("seed").get<std::uint64_t>();
            d.snr_db = j.at("snr_db").get<double>();
            d.with_oracle = j.at("with_oracle").get<bool>();
            const auto pg = j.at("path_gain").get<std::string>();
            if (pg != "free_space" && pg != "normalized")
                throw Error(Errc::FormatError, "manifest: unknown path_gain '" + pg + "'");
            d.path_gain = pg == "free_space" ? PathGain::FreeSpace : PathGain::Normalized;
            sha = j.at("blob_sha256").get<std::string>();
        }
        catch (const nlohmann::json::exception &e)
        {
            throw Error(Errc::FormatError, std::string("manifest: ") + e.what());
        }
        d.cfg.validate();
        if (sha != sha256_hex(blob))
            throw Error(Errc::FormatError, "blob sha256 does not match the manifest", 0);

        ByteReader r(blob);
        r.expect_magic(dataset_magic);
        const std::size_t version_at = r.offset();
        if (r.u32() != dataset_format_version)
            throw Error(Errc::VersionMismatch, "blob version is not 1", version_at);
        const std::size_t dims_at = r.offset();
        const std::uint32_t n = r.u32(), k = r.u32();
        const std::uint64_t blob_count = r.u64();
        if (n != std::uint32_t(d.cfg.n_antennas) || k != d.k_users || blob_count != count)
            throw Error(Errc::FormatError, "blob header disagrees with the manifest", dims_at);

        // smallest possible record: id, users, labels, H, flag
        const std::size_t min_record = 8 + 16 * std::size_t(k) + k + 8 * std::size_t(n) * k + 1;
        r.need(std::size_t(std::min<std::uint64_t>(count, blob.size())) * min_record);
        d.records.reserve(std::size_t(count));
        for (std::uint64_t i = 0; i < count; ++i)
        {
            DatasetRecord rec;
            rec.record_id = r.u64();
            rec.users.resize(k);
            for (auto &u : rec.users)
            {
                u.x_m = r.f64();
                u.h_m = r.f64();
            }
            rec.labels.resize(k);
            for (auto &l : rec.labels)
                l = decode_label(r);
            rec.H.resize(n, k);
            for (std::uint32_t c = 0; c < k; ++c)
                for (std::uint32_t row = 0; row < n; ++row)
                {
                    const float re = r.f32();
                    const float im = r.f32();
                    rec.H(row, c) = {re, im};
                }
            const std::size_t flag_at = r.offset();
            const std::uint8_t flag = r.u8();
            if (flag & ~std::uint8_t(oracle_present | oracle_exhausted | oracle_error) ||
                ((flag & oracle_exhausted) && !(flag & oracle_present)))
                throw Error(Errc::FormatError, "invalid oracle flag", flag_at);
            rec.oracle_failed = flag & oracle_error;
            if (flag & oracle_present)
            {
                OracleTarget o;
                o.lambda = read_vec(r, k);
                o.powers = read_vec(r, k);
                o.se = r.f64();
                o.budget_exhausted = flag & oracle_exhausted;
                rec.oracle = std::move(o);
            }
            d.records.push_back(std::move(rec));
        }
        if (!r.done())
            throw Error(Errc::FormatError, "trailing bytes after the last record", r.offset());
        return d;
    }

    std::string sha256_hex(std::span<const std::uint8_t> bytes)
    {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("EVP_Digest failed");
        std::ostringstream os;
        for (unsigned int i = 0; i < len; ++i)
            os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
        return os.str();
    }

    void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes)
    {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os)
                throw std::runtime_error("cannot open " + tmp.string() + " for writing");
            os.write(reinterpret_cast<const char *>(bytes.data()), std::streamsize(bytes.size()));
            if (!os)
                throw std::runtime_error("write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

    std::vector<std::uint8_t> read_file(const std::filesystem::path &path)
    {
        std::ifstream is(path, std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot open " + path.string());
        return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    }

    namespace
    {
        std::filesystem::path with_suffix(const std::filesystem::path &base, const char *ext)
        {
            auto p = base;
            p += ext;
            return p;
        }
    }

    void write(const Dataset &d, const std::filesystem::path &base)
    {
        const auto blob = encode_blob(d);
        const auto manifest = encode_manifest(d, sha256_hex(blob));
        write_file_atomic(with_suffix(base, ".bin"), blob);
        write_file_atomic(with_suffix(base, ".json"),
                          std::span(reinterpret_cast<const std::uint8_t *>(manifest.data()), manifest.size()));
    }

    Dataset read(const std::filesystem::path &base)
    {
        const auto manifest = read_file(with_suffix(base, ".json"));
        const auto blob = read_file(with_suffix(base, ".bin"));
        return decode(std::string(manifest.begin(), manifest.end()), blob);
    }

    std::vector<std::uint8_t> encode_predictions(const PredictionSet &p)
    {
        ByteWriter w;
        w.bytes(prediction_magic, 4);
        w.u32(dataset_format_version);
        w.u32(p.n_antennas);
        w.u32(p.k_users);
        w.u64(p.records.size());
        for (const auto &rec : p.records)
        {
            w.u64(rec.record_id);
            w.u8(std::uint8_t(rec.task));
            if (rec.task == Task::Classify)
            {
                require(rec.labels.size() == p.k_users, Errc::DimensionMismatch, "label count");
                for (auto l : rec.labels)
                    w.u8(std::uint8_t(l));
            }
            else
            {
                require(rec.lambda.size() == Eigen::Index(p.k_users) && rec.powers.size() == Eigen::Index(p.k_users),
                        Errc::DimensionMismatch, "prediction vector length");
                write_vec(w, rec.lambda);
                write_vec(w, rec.powers);
            }
        }
        return w.take();
    }

    PredictionSet decode_predictions(std::span<const std::uint8_t> bytes)
    {
        ByteReader r(bytes);
        r.expect_magic(prediction_magic);
        const std::size_t version_at = r.offset();
        if (r.u32() != dataset_format_version)
            throw Error(Errc::VersionMismatch, "prediction file version is not 1", version_at);
        PredictionSet p;
        p.n_antennas = r.u32();
        p.k_users = r.u32();
        const std::uint64_t count = r.u64();
        r.need(std::size_t(std::min<std::uint64_t>(count, bytes.size())) * (9 + std::size_t(p.k_users)));
        p.records.reserve(std::size_t(count));
        for (std::uint64_t i = 0; i < count; ++i)
        {
            PredictionRecord rec;
            rec.record_id = r.u64();
            const std::size_t task_at = r.offset();
            const std::uint8_t task = r.u8();
            if (task > 1)
                throw Error(Errc::FormatError, "unknown task tag", task_at);
            rec.task = Task(task);
            if (rec.task == Task::Classify)
            {
                rec.labels.resize(p.k_users);
                for (auto &l : rec.labels)
                    l = decode_label(r);
            }
            else
            {
                rec.lambda = read_vec(r, p.k_users);
                rec.powers = read_vec(r, p.k_users);
            }
            p.records.push_back(std::move(rec));
        }
        if (!r.done())
            throw Error(Errc::FormatError, "trailing bytes after the last record", r.offset());
        return p;
    }

    void write_predictions(const PredictionSet &p, const std::filesystem::path &path)
    {
        write_file_atomic(path, encode_predictions(p));
    }

    PredictionSet read_predictions(const std::filesystem::path &path)
    {
        return decode_predictions(read_file(path));
    }

    PredictionSet reference_predictions(const Dataset &d, Task task)
    {
        PredictionSet p;
        p.n_antennas = std::uint32_t(d.cfg.n_antennas);
        p.k_users = d.k_users;
        for (const auto &rec : d.records)
        {
            PredictionRecord pr;
            pr.record_id = rec.record_id;
            pr.task = task;
            if (task == Task::Classify)
                pr.labels = rec.labels;
            else
            {
                require(rec.oracle.has_value(), Errc::MissingOracle, "record has no oracle target");
                pr.lambda = rec.oracle->lambda;
                pr.powers = rec.oracle->powers;
            }
            p.records.push_back(std::move(pr));
        }
        return p;
    }

    namespace
    {
        bool on_simplex(const Eigen::VectorXd &v, double total)
        {
            return v.allFinite() && (v.array() >= 0.0).all() && std::abs(v.sum() - total) <= simplex_tolerance;
        }
    }

    ScoreReport score(const Dataset &d, const PredictionSet &p)
    {
        require(p.records.size() == d.records.size(), Errc::IdMismatch, "prediction and dataset record counts differ");
        require(p.n_antennas == std::uint32_t(d.cfg.n_antennas) && p.k_users == d.k_users, Errc::DimensionMismatch,
                "prediction dimensions do not match the dataset");
        ScoreReport rep;
        if (p.records.empty())
            return rep;
        rep.task = p.records.front().task;

        std::vector<FieldLabel> pred, truth;
        double ratio_sum = 0.0, pred_sum = 0.0, oracle_sum = 0.0;
        for (std::size_t i = 0; i < d.records.size(); ++i)
        {
            const auto &rec = d.records[i];
            const auto &pr = p.records[i];
            require(pr.record_id == rec.record_id, Errc::IdMismatch, "record ids do not align");
            require(pr.task == rep.task, Errc::InvalidArgument, "mixed tasks in one prediction file");
            if (rep.task == Task::Classify)
            {
                pred.insert(pred.end(), pr.labels.begin(), pr.labels.end());
                truth.insert(truth.end(), rec.labels.begin(), rec.labels.end());
                ++rep.scored;
                continue;
            }
            const auto prob = problem_for(d, rec);
            if (!on_simplex(pr.lambda, prob.total_power) || !on_simplex(pr.powers, prob.total_power))
            {
                ++rep.infeasible;
                continue;
            }
            if (!rec.oracle || !(rec.oracle->se > 0.0))
            {
                ++rep.missing_oracle;
                continue;
            }
            const PrecodeSolution<double> sol{structure_precoder(prob, pr.lambda), pr.powers, pr.lambda};
            const double se = sum_se(prob, sol);
            ratio_sum += se / rec.oracle->se;
            pred_sum += se;
            oracle_sum += rec.oracle->se;
            ++rep.scored;
        }
        if (rep.task == Task::Classify)
            rep.metrics = confusion(pred, truth);
        else if (rep.scored > 0)
        {
            rep.mean_se_ratio = ratio_sum / double(rep.scored);
            rep.mean_se_pred = pred_sum / double(rep.scored);
            rep.mean_se_oracle = oracle_sum / double(rep.scored);
        }
        return rep;
    }
}
