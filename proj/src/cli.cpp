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

#include "nearfield/cli.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace nearfield::cli
{
    using nlohmann::json;

    namespace
    {
        // Typed, strict access to one JSON object of the config.
        class Section
        {
        public:
            Section(const json &j, std::string path, std::initializer_list<const char *> keys)
                : j_(j), path_(std::move(path))
            {
                if (!j_.is_object())
                    fail("must be an object");
                const std::set<std::string> allowed(keys.begin(), keys.end());
                for (const auto &[k, v] : j_.items())
                    if (!allowed.count(k))
                        throw ConfigError("unknown key '" + where(k) + "'");
            }

            bool has(const char *key) const { return j_.contains(key); }

            const json &raw(const char *key) const { return j_.at(key); }

            Section sub(const char *key, std::initializer_list<const char *> keys) const
            {
                return Section(j_.at(key), where(key), keys);
            }

            double number(const char *key, double fallback) const
            {
                if (!has(key))
                    return fallback;
                const auto &v = j_.at(key);
                if (!v.is_number())
                    throw ConfigError("'" + where(key) + "' must be a number");
                const double d = v.get<double>();
                if (!std::isfinite(d))
                    throw ConfigError("'" + where(key) + "' must be finite");
                return d;
            }

            std::uint64_t count(const char *key, std::uint64_t fallback) const
            {
                if (!has(key))
                    return fallback;
                const auto &v = j_.at(key);
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                    throw ConfigError("'" + where(key) + "' must be a non-negative integer");
                return v.get<std::uint64_t>();
            }

            bool flag(const char *key, bool fallback) const
            {
                if (!has(key))
                    return fallback;
                if (!j_.at(key).is_boolean())
                    throw ConfigError("'" + where(key) + "' must be a boolean");
                return j_.at(key).get<bool>();
            }

            std::string text(const char *key, const std::string &fallback) const
            {
                if (!has(key))
                    return fallback;
                if (!j_.at(key).is_string())
                    throw ConfigError("'" + where(key) + "' must be a string");
                return j_.at(key).get<std::string>();
            }

            std::vector<double> numbers(const char *key, const std::vector<double> &fallback) const
            {
                if (!has(key))
                    return fallback;
                const auto &v = j_.at(key);
                if (!v.is_array())
                    throw ConfigError("'" + where(key) + "' must be an array of numbers");
                std::vector<double> out;
                for (const auto &e : v)
                {
                    if (!e.is_number())
                        throw ConfigError("'" + where(key) + "' must be an array of numbers");
                    out.push_back(e.get<double>());
                }
                return out;
            }

            std::pair<double, double> range(const char *key, std::pair<double, double> fallback) const
            {
                if (!has(key))
                    return fallback;
                const auto v = numbers(key, {});
                if (v.size() != 2 || !(v[1] > v[0]))
                    throw ConfigError("'" + where(key) + "' must be [lo, hi] with hi > lo");
                return {v[0], v[1]};
            }

            [[noreturn]] void fail(const std::string &msg) const
            {
                throw ConfigError("'" + (path_.empty() ? std::string("<root>") : path_) + "' " + msg);
            }

            std::string where(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

        private:
            const json &j_;
            std::string path_;
        };

        void check(bool ok, const std::string &msg)
        {
            if (!ok)
                throw ConfigError(msg);
        }

        CodebookParams parse_codebook(const Section &s, const char *key, CodebookParams cb)
        {
            if (!s.has(key))
                return cb;
            const auto c = s.sub(key, {"n_angles", "n_dist_slots", "r_min_m", "power_rule"});
            cb.n_angles = int(c.count("n_angles", std::uint64_t(cb.n_angles)));
            cb.n_dist_slots = int(c.count("n_dist_slots", std::uint64_t(cb.n_dist_slots)));
            cb.r_min_m = c.number("r_min_m", cb.r_min_m);
            const auto rule = c.text("power_rule", cb.power_rule == PowerRule::Equal ? "equal" : "waterfill");
            check(rule == "equal" || rule == "waterfill", "'" + c.where("power_rule") + "' must be equal|waterfill");
            cb.power_rule = rule == "equal" ? PowerRule::Equal : PowerRule::Waterfill;
            check(cb.n_angles >= 1 && cb.n_dist_slots >= 1, "codebook counts must be >= 1");
            check(cb.r_min_m > 0.0, "codebook r_min_m must be > 0");
            return cb;
        }

        std::filesystem::path out_path(const RunConfig &cfg, const char *name)
        {
            std::filesystem::create_directories(cfg.out_dir);
            return std::filesystem::path(cfg.out_dir) / name;
        }

        void write_text(const std::filesystem::path &p, const std::string &s)
        {
            write_file_atomic(p, std::span(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
        }
    }

    RunConfig parse_config(const std::string &text)
    {
        json j;
        try
        {
            j = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }

        RunConfig rc;
        const Section root(j, "", {"array", "users", "seed", "out_dir", "workers", "gen", "sweep_snr", "ldma_vs_sdma",
                                   "classify", "gainmap", "score"});
        rc.seed = root.count("seed", 0);
        rc.out_dir = root.text("out_dir", rc.out_dir);
        rc.workers = unsigned(root.count("workers", 1));
        check(rc.workers >= 1, "'workers' must be >= 1");

        if (root.has("array"))
        {
            const auto a = root.sub("array", {"n_antennas", "carrier_hz", "spacing_m", "bs_height_m", "tilt_rad",
                                              "path_gain"});
            rc.array.n_antennas = int(a.count("n_antennas", std::uint64_t(rc.array.n_antennas)));
            rc.array.carrier_hz = a.number("carrier_hz", rc.array.carrier_hz);
            check(rc.array.carrier_hz > 0.0, "'array.carrier_hz' must be > 0");
            rc.array.spacing_m = a.number("spacing_m", speed_of_light / rc.array.carrier_hz / 2.0);
            rc.array.bs_height_m = a.number("bs_height_m", rc.array.bs_height_m);
            rc.array.tilt_rad = a.number("tilt_rad", rc.array.tilt_rad);
            const auto pg = a.text("path_gain", "normalized");
            check(pg == "free_space" || pg == "normalized", "'array.path_gain' must be free_space|normalized");
            rc.path_gain = pg == "free_space" ? PathGain::FreeSpace : PathGain::Normalized;
        }
        try
        {
            rc.array.validate();
        }
        catch (const Error &e)
        {
            throw ConfigError(std::string("array: ") + e.what());
        }

        if (root.has("users"))
        {
            const auto u = root.sub("users", {"k", "x_range", "h_range"});
            rc.k_users = std::uint32_t(u.count("k", rc.k_users));
            const auto [x0, x1] = u.range("x_range", {rc.box.x_min, rc.box.x_max});
            const auto [h0, h1] = u.range("h_range", {rc.box.h_min, rc.box.h_max});
            rc.box = {x0, x1, h0, h1};
        }
        check(rc.k_users >= 1, "'users.k' must be >= 1");
        check(rc.box.x_min >= 0.0, "'users.x_range' must start at >= 0");

        if (root.has("gen"))
        {
            const auto g = root.sub("gen", {"train", "val", "test", "snr_db", "with_oracle", "oracle_budget"});
            rc.gen.train = g.count("train", rc.gen.train);
            rc.gen.val = g.count("val", rc.gen.val);
            rc.gen.test = g.count("test", rc.gen.test);
            rc.gen.snr_db = g.number("snr_db", rc.gen.snr_db);
            rc.gen.with_oracle = g.flag("with_oracle", rc.gen.with_oracle);
            rc.gen.oracle_budget = g.count("oracle_budget", rc.gen.oracle_budget);
        }
        check(rc.gen.train >= 1 && rc.gen.val >= 1 && rc.gen.test >= 1, "every gen split count must be >= 1");
        check(rc.gen.oracle_budget >= 1, "'gen.oracle_budget' must be >= 1");

        if (root.has("sweep_snr"))
        {
            const auto s = root.sub("sweep_snr", {"snr_db", "records", "oracle_budget", "codebook"});
            rc.sweep.snr_db = s.numbers("snr_db", rc.sweep.snr_db);
            rc.sweep_records = s.count("records", rc.sweep_records);
            rc.sweep.oracle_budget = s.count("oracle_budget", rc.sweep.oracle_budget);
            rc.sweep.codebook = parse_codebook(s, "codebook", rc.sweep.codebook);
        }
        check(!rc.sweep.snr_db.empty(), "'sweep_snr.snr_db' must not be empty");
        check(rc.sweep_records >= 1, "'sweep_snr.records' must be >= 1");
        check(rc.sweep.oracle_budget >= 1, "'sweep_snr.oracle_budget' must be >= 1");

        if (root.has("ldma_vs_sdma"))
        {
            const auto l = root.sub("ldma_vs_sdma", {"gaps_m", "near_m", "seeds", "snr_db", "elevation_deg",
                                                     "path_gain", "codebook"});
            rc.ldma.gaps_m = l.numbers("gaps_m", rc.ldma.gaps_m);
            rc.ldma.near_m = l.number("near_m", rc.ldma.near_m);
            rc.ldma.seeds = l.count("seeds", rc.ldma.seeds);
            rc.ldma.snr_db = l.number("snr_db", rc.ldma.snr_db);
            const auto [e0, e1] = l.range("elevation_deg", {rc.ldma.elevation_min_deg, rc.ldma.elevation_max_deg});
            rc.ldma.elevation_min_deg = e0;
            rc.ldma.elevation_max_deg = e1;
            const auto pg = l.text("path_gain", "normalized");
            check(pg == "free_space" || pg == "normalized", "'ldma_vs_sdma.path_gain' must be free_space|normalized");
            rc.ldma.path_gain = pg == "free_space" ? PathGain::FreeSpace : PathGain::Normalized;
            rc.ldma.codebook = parse_codebook(l, "codebook", rc.ldma.codebook);
        }
        check(!rc.ldma.gaps_m.empty(), "'ldma_vs_sdma.gaps_m' must not be empty");
        for (double g : rc.ldma.gaps_m)
            check(g >= 0.0, "'ldma_vs_sdma.gaps_m' entries must be >= 0");
        check(rc.ldma.near_m > 0.0, "'ldma_vs_sdma.near_m' must be > 0");
        check(rc.ldma.seeds >= 1, "'ldma_vs_sdma.seeds' must be >= 1");

        if (root.has("classify"))
        {
            const auto c = root.sub("classify", {"csi_snr_db", "noiseless", "val", "test", "angle_grid_size", "trials",
                                                 "near_max_frac", "far_min_frac", "far_max_frac"});
            rc.classify.csi_snr_db = c.numbers("csi_snr_db", rc.classify.csi_snr_db);
            rc.classify.noiseless = c.flag("noiseless", rc.classify.noiseless);
            if (c.has("val"))
            {
                const auto v = c.sub("val", {"near", "far"});
                rc.classify.val_near = v.count("near", rc.classify.val_near);
                rc.classify.val_far = v.count("far", rc.classify.val_far);
            }
            if (c.has("test"))
            {
                const auto t = c.sub("test", {"near", "far"});
                rc.classify.test_near = t.count("near", rc.classify.test_near);
                rc.classify.test_far = t.count("far", rc.classify.test_far);
            }
            rc.classify.angle_grid_size = int(c.count("angle_grid_size", 0));
            rc.classify.trials = c.count("trials", rc.classify.trials);
            rc.classify.population.near_max_frac = c.number("near_max_frac", rc.classify.population.near_max_frac);
            rc.classify.population.far_min_frac = c.number("far_min_frac", rc.classify.population.far_min_frac);
            rc.classify.population.far_max_frac = c.number("far_max_frac", rc.classify.population.far_max_frac);
        }
        check(rc.classify.test_near + rc.classify.test_far >= 1, "'classify.test' split is empty");
        check(rc.classify.val_near >= 1 && rc.classify.val_far >= 1, "'classify.val' needs both near and far users");
        check(rc.classify.trials >= 1, "'classify.trials' must be >= 1");
        check(rc.classify.angle_grid_size == 0 || rc.classify.angle_grid_size >= 2,
              "'classify.angle_grid_size' must be 0 (auto) or >= 2");
        check(rc.classify.noiseless || !rc.classify.csi_snr_db.empty(), "'classify' has no CSI SNR points");

        if (root.has("gainmap"))
        {
            const auto g = root.sub("gainmap", {"beam", "angles", "distances"});
            auto &gm = rc.gainmap;
            if (g.has("beam"))
            {
                const auto b = g.sub("beam", {"kind", "angle_rad", "r_m"});
                const auto kind = b.text("kind", "focus");
                check(kind == "focus" || kind == "steer", "'gainmap.beam.kind' must be focus|steer");
                gm.kind = kind == "focus" ? BeamKind::Focus : BeamKind::Steer;
                gm.angle_rad = b.number("angle_rad", gm.angle_rad);
                gm.r_m = b.number("r_m", gm.r_m);
            }
            if (g.has("angles"))
            {
                const auto a = g.sub("angles", {"min_rad", "max_rad", "count"});
                gm.angle_min_rad = a.number("min_rad", gm.angle_min_rad);
                gm.angle_max_rad = a.number("max_rad", gm.angle_max_rad);
                gm.angle_count = int(a.count("count", std::uint64_t(gm.angle_count)));
            }
            if (g.has("distances"))
            {
                const auto d = g.sub("distances", {"min_m", "max_m", "count"});
                gm.r_min_m = d.number("min_m", gm.r_min_m);
                gm.r_max_m = d.number("max_m", gm.r_max_m);
                gm.r_count = int(d.count("count", std::uint64_t(gm.r_count)));
            }
        }
        {
            const auto &gm = rc.gainmap;
            check(gm.angle_count >= 1 && gm.r_count >= 1, "gainmap grid counts must be >= 1");
            check(gm.angle_min_rad >= 0.0 && gm.angle_max_rad <= std::numbers::pi && gm.angle_min_rad <= gm.angle_max_rad,
                  "gainmap angles must satisfy 0 <= min_rad <= max_rad <= pi");
            check(gm.r_min_m > 0.0 && gm.r_min_m <= gm.r_max_m, "gainmap distances must satisfy 0 < min_m <= max_m");
            check(gm.kind == BeamKind::Steer || gm.r_m > 0.0, "'gainmap.beam.r_m' must be > 0");
        }

        if (root.has("score"))
        {
            const auto s = root.sub("score", {"dataset", "predictions"});
            rc.score.dataset = s.text("dataset", "");
            rc.score.predictions = s.text("predictions", "");
        }
        return rc;
    }

    RunConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream is(path);
        if (!is)
            throw ConfigError("cannot read config " + path.string());
        std::stringstream ss;
        ss << is.rdbuf();
        return parse_config(ss.str());
    }

    void cmd_gen(const RunConfig &cfg, std::ostream &out)
    {
        const std::pair<const char *, std::size_t> splits[] = {
            {"train", cfg.gen.train}, {"val", cfg.gen.val}, {"test", cfg.gen.test}};
        std::uint64_t first_id = 0;
        for (const auto &[name, count] : splits)
        {
            GenerateSpec spec;
            spec.cfg = cfg.array;
            spec.k_users = cfg.k_users;
            spec.box = cfg.box;
            spec.count = count;
            spec.seed = cfg.seed;
            spec.snr_db = cfg.gen.snr_db;
            spec.with_oracle = cfg.gen.with_oracle;
            spec.oracle_budget = cfg.gen.oracle_budget;
            spec.path_gain = cfg.path_gain;
            spec.first_record_id = first_id; // record ids are unique across splits
            spec.workers = cfg.workers;
            first_id += count;
            write(generate(spec), out_path(cfg, name));
            out << "wrote " << (std::filesystem::path(cfg.out_dir) / name).string() << ".{json,bin} (" << count
                << " records)\n";
        }
    }

    void cmd_sweep_snr(const RunConfig &cfg, std::ostream &out)
    {
        GenerateSpec spec;
        spec.cfg = cfg.array;
        spec.k_users = cfg.k_users;
        spec.box = cfg.box;
        spec.count = cfg.sweep_records;
        spec.seed = cfg.seed;
        spec.path_gain = cfg.path_gain;
        spec.workers = cfg.workers;
        const auto rows = sweep_snr(generate(spec), cfg.sweep, cfg.box);
        const auto csv = sweep_csv(rows);
        write_text(out_path(cfg, "sweep_snr.csv"), csv);
        out << csv;
    }

    void cmd_ldma_vs_sdma(const RunConfig &cfg, std::ostream &out)
    {
        const auto csv = ldma_csv(ldma_vs_sdma(cfg.array, cfg.ldma, cfg.seed, cfg.box));
        write_text(out_path(cfg, "ldma_vs_sdma.csv"), csv);
        out << csv;
    }

    void cmd_classify(const RunConfig &cfg, std::ostream &out)
    {
        const auto csv = classify_csv(classify_sweep(cfg.array, cfg.classify, cfg.box, cfg.seed));
        write_text(out_path(cfg, "classify.csv"), csv);
        out << csv;
    }

    void cmd_gainmap(const RunConfig &cfg, std::ostream &out)
    {
        const auto &g = cfg.gainmap;
        const Beam<double> beam = g.kind == BeamKind::Focus ? focus_vector(cfg.array, position_at(cfg.array, g.angle_rad, g.r_m))
                                                            : steer_vector(cfg.array, g.angle_rad);
        auto lin = [](double lo, double hi, int n) {
            std::vector<double> v;
            for (int i = 0; i < n; ++i)
                v.push_back(n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1));
            return v;
        };
        const auto csv = gainmap_csv(gain_map(cfg.array, beam.entries, lin(g.angle_min_rad, g.angle_max_rad, g.angle_count),
                                              lin(g.r_min_m, g.r_max_m, g.r_count)));
        write_text(out_path(cfg, "gainmap.csv"), csv);
        out << csv;
    }

    void cmd_score(const RunConfig &cfg, std::ostream &out)
    {
        if (cfg.score.dataset.empty() || cfg.score.predictions.empty())
            throw ConfigError("score needs 'score.dataset' and 'score.predictions'");
        const auto d = read(cfg.score.dataset);
        const auto p = read_predictions(cfg.score.predictions);
        const auto r = score(d, p);
        json j;
        j["task"] = r.task == Task::Classify ? "classify" : "precode";
        j["scored"] = r.scored;
        j["infeasible"] = r.infeasible;
        j["missing_oracle"] = r.missing_oracle;
        if (r.task == Task::Classify)
            j["metrics"] = {{"accuracy", r.metrics.accuracy},
                            {"balanced_accuracy", r.metrics.balanced_accuracy},
                            {"precision_near", r.metrics.precision_near},
                            {"recall_near", r.metrics.recall_near},
                            {"precision_far", r.metrics.precision_far},
                            {"recall_far", r.metrics.recall_far}};
        else
            j["metrics"] = {{"mean_se_ratio", r.mean_se_ratio},
                            {"mean_se_pred", r.mean_se_pred},
                            {"mean_se_oracle", r.mean_se_oracle}};
        const auto text = j.dump(2) + "\n";
        write_text(out_path(cfg, "score.json"), text);
        out << text;
    }

    int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
    {
        CLI::App app{"Near-field XL-MIMO channel, beamfocusing and precoding toolkit", "nearfield"};
        app.require_subcommand(1);
        std::string config_path;
        std::optional<std::uint64_t> seed;
        std::optional<std::string> out_dir;

        struct Verb
        {
            const char *name;
            const char *help;
            void (*fn)(const RunConfig &, std::ostream &);
        };
        const Verb verbs[] = {
            {"gen", "generate train/val/test datasets", cmd_gen},
            {"sweep-snr", "sum SE of every scheme over an SNR grid", cmd_sweep_snr},
            {"ldma-vs-sdma", "polar vs angular codebook for two same-angle users", cmd_ldma_vs_sdma},
            {"classify", "near/far classification accuracy over CSI SNR", cmd_classify},
            {"gainmap", "beam gain over an angle/distance grid", cmd_gainmap},
            {"score", "score a prediction file against a dataset", cmd_score},
        };
        for (const auto &v : verbs)
        {
            auto *sub = app.add_subcommand(v.name, v.help);
            sub->add_option("--config", config_path, "run configuration (JSON)")->required();
            sub->add_option("--seed", seed, "override the config seed");
            sub->add_option("--out", out_dir, "override the output directory");
        }

        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i)
            args.emplace_back(argv[i]);
        try
        {
            app.parse(args);
        }
        catch (const CLI::CallForHelp &)
        {
            out << app.help();
            return exit_ok;
        }
        catch (const CLI::ParseError &e)
        {
            err << "error: " << e.what() << "\n";
            return exit_config;
        }

        const Verb *chosen = nullptr;
        for (const auto &v : verbs)
            if (app.got_subcommand(v.name))
                chosen = &v;

        try
        {
            RunConfig cfg = load_config(config_path);
            if (seed)
                cfg.seed = *seed;
            if (out_dir)
                cfg.out_dir = *out_dir;
            chosen->fn(cfg, out);
            return exit_ok;
        }
        catch (const ConfigError &e)
        {
            err << "config error: " << e.what() << "\n";
            return exit_config;
        }
        catch (const Error &e)
        {
            const bool validation = e.code() == Errc::InvalidArgument || e.code() == Errc::InvalidGrid;
            err << (validation ? "config error: " : "error: ") << e.what() << "\n";
            return validation ? exit_config : exit_runtime;
        }
        catch (const std::exception &e)
        {
            err << "error: " << e.what() << "\n";
            return exit_runtime;
        }
    }
}
