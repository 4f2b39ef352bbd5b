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

#ifndef NEARFIELD_PRECODING_HPP
#define NEARFIELD_PRECODING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <tuple>
#include <vector>

#include "nearfield/beams.hpp"

namespace nearfield
{
    template <typename T = double>
    struct PrecodeProblem
    {
        CMatrix<T> H;          // N x K
        T total_power = T(1);  // P
        T noise_var = T(1);    // sigma^2

        Eigen::Index n_antennas() const { return H.rows(); }
        Eigen::Index n_users() const { return H.cols(); }

        void validate() const
        {
            require(total_power > T(0), Errc::InvalidArgument, "total power must be > 0");
            require(noise_var > T(0), Errc::InvalidArgument, "noise variance must be > 0");
            require(H.cols() >= 1 && H.rows() >= 1, Errc::InvalidArgument, "need at least one user and antenna");
        }
    };

    /// Unit-norm beam directions W, powers p and dual weights lambda.
    template <typename T = double>
    struct PrecodeSolution
    {
        CMatrix<T> directions;
        RVector<T> powers;
        RVector<T> duals;
    };

    inline constexpr double power_slack = 1e-9;

    template <typename T>
    void check_simplex(const RVector<T> &v, Eigen::Index k, T budget, const char *what)
    {
        require(v.size() == k, Errc::DimensionMismatch, what);
        require((v.array() >= T(0)).all() && v.allFinite(), Errc::InvalidArgument, what);
        require(v.sum() <= budget + T(power_slack), Errc::InvalidArgument, what);
    }

    /// Throws unless `sol` satisfies the PrecodeSolution invariants for `prob`.
    template <typename T>
    void check_solution(const PrecodeProblem<T> &prob, const PrecodeSolution<T> &sol)
    {
        const Eigen::Index k = prob.n_users();
        require(sol.directions.rows() == prob.n_antennas() && sol.directions.cols() == k,
                Errc::DimensionMismatch, "directions shape");
        for (Eigen::Index i = 0; i < k; ++i)
            require(std::abs(sol.directions.col(i).norm() - T(1)) <= T(1e-10), Errc::InvalidArgument,
                    "direction not unit norm");
        check_simplex(sol.powers, k, prob.total_power, "powers infeasible");
        check_simplex(sol.duals, k, prob.total_power, "duals infeasible");
    }

    template <typename T>
    RVector<T> equal_powers(Eigen::Index k, T total_power)
    {
        return RVector<T>::Constant(k, total_power / T(k));
    }

    /// Maximum ratio transmission: w_k = h_k / ||h_k||.
    template <typename T>
    PrecodeSolution<T> mrt(const PrecodeProblem<T> &prob, const RVector<T> &p)
    {
        prob.validate();
        check_simplex(p, prob.n_users(), prob.total_power, "powers infeasible");
        PrecodeSolution<T> sol;
        sol.directions = prob.H;
        for (Eigen::Index k = 0; k < prob.n_users(); ++k)
        {
            const T n = prob.H.col(k).norm();
            require(n > T(0), Errc::ZeroChannel, "zero channel");
            sol.directions.col(k) /= n;
        }
        sol.powers = p;
        sol.duals = RVector<T>::Zero(prob.n_users());
        return sol;
    }

    inline constexpr double zf_condition_limit = 1e12;

    /// Zero forcing: normalized columns of H (H^H H)^{-1}.
    template <typename T>
    PrecodeSolution<T> zf(const PrecodeProblem<T> &prob, const RVector<T> &p)
    {
        prob.validate();
        check_simplex(p, prob.n_users(), prob.total_power, "powers infeasible");
        require(prob.n_users() <= prob.n_antennas(), Errc::RankDeficient, "more users than antennas");

        const CMatrix<T> gram = prob.H.adjoint() * prob.H;
        Eigen::SelfAdjointEigenSolver<CMatrix<T>> es(gram, Eigen::EigenvaluesOnly);
        const T lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
        require(lo > T(0) && hi / lo <= T(zf_condition_limit), Errc::RankDeficient, "H^H H is numerically singular");

        Eigen::LLT<CMatrix<T>> llt(gram);
        require(llt.info() == Eigen::Success, Errc::RankDeficient, "Cholesky failed");
        PrecodeSolution<T> sol;
        sol.directions = prob.H * llt.solve(CMatrix<T>::Identity(gram.rows(), gram.cols()));
        sol.directions.colwise().normalize();
        sol.powers = p;
        sol.duals = RVector<T>::Zero(prob.n_users());
        return sol;
    }

    /// Directions of the optimal-structure precoder
    ///   w_k ~ (I + sum_i lambda_i / sigma^2 h_i h_i^H)^{-1} h_k.
    /// Uses (I + H L H^H / s2) H = H (I + L G / s2), G = H^H H, so only a
    /// K x K system is solved.
    template <typename T>
    CMatrix<T> structure_precoder(const PrecodeProblem<T> &prob, const RVector<T> &lambda)
    {
        prob.validate();
        const Eigen::Index k = prob.n_users();
        require(lambda.size() == k, Errc::DimensionMismatch, "lambda length");
        require((lambda.array() >= T(0)).all() && lambda.allFinite(), Errc::InvalidArgument, "lambda must be >= 0");

        const CMatrix<T> gram = prob.H.adjoint() * prob.H;
        CMatrix<T> m = (lambda.template cast<std::complex<T>>() / prob.noise_var).asDiagonal() * gram;
        m.diagonal().array() += T(1);
        CMatrix<T> w = prob.H * m.partialPivLu().inverse();
        for (Eigen::Index i = 0; i < k; ++i)
        {
            const T n = w.col(i).norm();
            require(n > T(0), Errc::ZeroChannel, "zero channel");
            w.col(i) /= n;
        }
        return w;
    }

    template <typename T>
    PrecodeSolution<T> structure_solution(const PrecodeProblem<T> &prob, const RVector<T> &lambda, const RVector<T> &p)
    {
        check_simplex(p, prob.n_users(), prob.total_power, "powers infeasible");
        return {structure_precoder(prob, lambda), p, lambda};
    }

    namespace detail
    {
        template <typename T>
        RVector<T> sinr_from(const CMatrix<T> &H, const CMatrix<T> &W, const RVector<T> &p, T noise_var)
        {
            const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> q = (H.adjoint() * W).cwiseAbs2();
            const Eigen::Index k = H.cols();
            RVector<T> s(k);
            for (Eigen::Index i = 0; i < k; ++i)
            {
                T interference = T(0);
                for (Eigen::Index j = 0; j < k; ++j)
                    if (j != i)
                        interference += p(j) * q(i, j);
                s(i) = p(i) * q(i, i) / (interference + noise_var);
            }
            return s;
        }

        template <typename T>
        T sum_log2(const RVector<T> &sinr)
        {
            T se = 0;
            for (Eigen::Index i = 0; i < sinr.size(); ++i)
                se += std::log2(T(1) + sinr(i));
            return se;
        }
    }

    /// SINR_k = P_k |h_k^H w_k|^2 / (sum_{j != k} P_j |h_k^H w_j|^2 + sigma^2).
    template <typename T>
    RVector<T> sinr(const PrecodeProblem<T> &prob, const PrecodeSolution<T> &sol)
    {
        require(sol.directions.rows() == prob.n_antennas() && sol.directions.cols() == prob.n_users() &&
                    sol.powers.size() == prob.n_users(),
                Errc::DimensionMismatch, "solution does not match problem");
        return detail::sinr_from(prob.H, sol.directions, sol.powers, prob.noise_var);
    }

    /// Sum spectral efficiency in bits/s/Hz.
    template <typename T>
    T sum_se(const PrecodeProblem<T> &prob, const PrecodeSolution<T> &sol)
    {
        return detail::sum_log2(sinr(prob, sol));
    }

    /// p_k = max(0, mu - sigma^2 / g_k) with sum p_k = P.
    template <typename T>
    RVector<T> waterfill(const RVector<T> &gains, T total_power, T noise_var = T(1))
    {
        require(gains.size() >= 1, Errc::InvalidArgument, "empty gains");
        require((gains.array() > T(0)).all(), Errc::InvalidArgument, "gains must be > 0");
        require(total_power > T(0) && noise_var > T(0), Errc::InvalidArgument, "power and noise must be > 0");

        const RVector<T> floor = noise_var * gains.cwiseInverse();
        auto filled = [&](T mu) { return (mu - floor.array()).max(T(0)).sum(); };
        T lo = floor.minCoeff(), hi = floor.minCoeff() + total_power;
        while (hi - lo > T(1e-10) * std::max(T(1), std::abs(hi)))
        {
            const T mid = T(0.5) * (lo + hi);
            (filled(mid) < total_power ? lo : hi) = mid;
        }
        RVector<T> p = (T(0.5) * (lo + hi) - floor.array()).max(T(0)).matrix();
        const T s = p.sum();
        if (s > T(0))
            p *= total_power / s;
        else
            p(Eigen::Index(std::min_element(floor.data(), floor.data() + floor.size()) - floor.data())) = total_power;
        return p;
    }

    enum class PowerRule
    {
        Equal,
        Waterfill
    };

    /// Greedy beam selection from a codebook: repeatedly give the (user,
    /// codeword) pair with the highest gain, never reusing a codeword. Ties go
    /// to the lower codeword index, then the lower user index.
    template <typename T>
    PrecodeSolution<T> codebook_precoder(const PrecodeProblem<T> &prob, const Codebook<T> &cb, PowerRule rule)
    {
        prob.validate();
        require(cb.size() >= 1, Errc::InvalidArgument, "empty codebook");
        const Eigen::Index k = prob.n_users();
        require(k <= cb.size(), Errc::InsufficientCodebook, "more users than codewords");
        const auto g = codebook_gains(cb, prob.H);

        std::vector<std::tuple<T, Eigen::Index, Eigen::Index>> cand; // (gain, codeword, user)
        cand.reserve(std::size_t(g.size()));
        for (Eigen::Index u = 0; u < k; ++u)
            for (Eigen::Index j = 0; j < g.rows(); ++j)
                cand.emplace_back(g(j, u), j, u);
        std::sort(cand.begin(), cand.end(), [](const auto &a, const auto &b) {
            if (std::get<0>(a) != std::get<0>(b))
                return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b))
                return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        });

        std::vector<Eigen::Index> choice(std::size_t(k), -1);
        std::vector<bool> used(std::size_t(cb.size()), false);
        Eigen::Index left = k;
        for (const auto &[gain, j, u] : cand)
        {
            if (choice[std::size_t(u)] >= 0 || used[std::size_t(j)])
                continue;
            choice[std::size_t(u)] = j;
            used[std::size_t(j)] = true;
            if (--left == 0)
                break;
        }

        PrecodeSolution<T> sol;
        sol.directions.resize(prob.n_antennas(), k);
        for (Eigen::Index u = 0; u < k; ++u)
            sol.directions.col(u) = cb.beams.col(choice[std::size_t(u)]).normalized();
        if (rule == PowerRule::Equal)
            sol.powers = equal_powers(k, prob.total_power);
        else
        {
            RVector<T> eff = (prob.H.adjoint() * sol.directions).diagonal().cwiseAbs2();
            eff = eff.cwiseMax(std::numeric_limits<T>::min());
            sol.powers = waterfill(eff, prob.total_power, prob.noise_var);
        }
        sol.duals = RVector<T>::Zero(k);
        return sol;
    }

    template <typename T = double>
    struct OracleResult
    {
        RVector<T> lambda;
        RVector<T> powers;
        T se = T(0);
        T grid_se = T(0);          // best value of the simplex grid stage alone
        std::size_t evaluations = 0;
        bool budget_exhausted = false;
    };

    inline constexpr int oracle_grid_resolution = 64;

    namespace detail
    {
        // Move coordinate i of a point on the unit simplex to t and rescale the
        // rest so the sum stays 1.
        template <typename T>
        RVector<T> simplex_move(const RVector<T> &x, Eigen::Index i, T t)
        {
            RVector<T> y = x;
            const T rest = T(1) - x(i);
            const Eigen::Index k = x.size();
            if (rest > T(1e-15))
                y *= (T(1) - t) / rest;
            else
                y.setConstant((T(1) - t) / T(k - 1));
            y(i) = t;
            y = y.cwiseMax(T(0));
            return y / y.sum();
        }
    }

    /// Derivative-free search for the best (lambda, p) on
    /// {lambda >= 0, sum lambda = P} x {p >= 0, sum p = P}: an exhaustive
    /// simplex grid for K <= 2, then coordinate-wise golden-section sweeps with
    /// a shrinking bracket. Ties keep the point found first; the grid is
    /// visited center-out, so symmetric problems resolve to the equal split.
    template <typename T>
    OracleResult<T> oracle_lambda(const PrecodeProblem<T> &prob, std::size_t budget)
    {
        prob.validate();
        require(budget >= 1, Errc::InvalidArgument, "budget must be >= 1");
        const Eigen::Index k = prob.n_users();
        const T P = prob.total_power;

        OracleResult<T> res;
        auto evaluate = [&](const RVector<T> &lam, const RVector<T> &pw) -> T {
            ++res.evaluations;
            const CMatrix<T> w = structure_precoder(prob, RVector<T>(lam * P));
            return detail::sum_log2(detail::sinr_from(prob.H, w, RVector<T>(pw * P), prob.noise_var));
        };
        auto budget_left = [&] { return res.evaluations < budget; };
        auto better = [](T cand, T cur) { return cand > cur + T(1e-12) * std::max(T(1), std::abs(cur)); };

        RVector<T> lam = RVector<T>::Constant(k, T(1) / T(k));
        RVector<T> pw = lam;
        T best = evaluate(lam, pw);

        if (k == 2)
        {
            const int res_n = oracle_grid_resolution;
            std::vector<std::pair<int, int>> pts;
            for (int a = 0; a <= res_n; ++a)
                for (int b = 0; b <= res_n; ++b)
                    pts.emplace_back(a, b);
            std::stable_sort(pts.begin(), pts.end(), [&](auto x, auto y) {
                return std::abs(2 * x.first - res_n) + std::abs(2 * x.second - res_n) <
                       std::abs(2 * y.first - res_n) + std::abs(2 * y.second - res_n);
            });
            for (auto [a, b] : pts)
            {
                if (a * 2 == res_n && b * 2 == res_n)
                    continue; // the equal split, already evaluated
                if (!budget_left())
                {
                    res.budget_exhausted = true;
                    break;
                }
                RVector<T> l(2), q(2);
                l << T(a) / res_n, T(res_n - a) / res_n;
                q << T(b) / res_n, T(res_n - b) / res_n;
                const T v = evaluate(l, q);
                if (better(v, best))
                {
                    best = v;
                    lam = l;
                    pw = q;
                }
            }
        }
        res.grid_se = best;

        if (k >= 2 && !res.budget_exhausted)
        {
            const T phi = T(0.5) * (std::sqrt(T(5)) - T(1));
            T width = k == 2 ? T(2) / T(oracle_grid_resolution) : T(0.5);
            while (width > T(1e-7) && !res.budget_exhausted)
            {
                for (int which = 0; which < 2 && !res.budget_exhausted; ++which)
                    for (Eigen::Index i = 0; i < k && !res.budget_exhausted; ++i)
                    {
                        RVector<T> &x = which == 0 ? lam : pw;
                        auto f = [&](T t) {
                            const RVector<T> y = detail::simplex_move(x, i, t);
                            return which == 0 ? evaluate(y, pw) : evaluate(lam, y);
                        };
                        T a = std::max(T(0), x(i) - width), b = std::min(T(1), x(i) + width);
                        T c = b - phi * (b - a), d = a + phi * (b - a);
                        T fc = f(c), fd = f(d);
                        while (b - a > T(1e-3) * width && budget_left())
                        {
                            if (fc >= fd)
                            {
                                b = d;
                                d = c;
                                fd = fc;
                                c = b - phi * (b - a);
                                fc = f(c);
                            }
                            else
                            {
                                a = c;
                                c = d;
                                fc = fd;
                                d = a + phi * (b - a);
                                fd = f(d);
                            }
                        }
                        if (!budget_left())
                            res.budget_exhausted = true;
                        const T t = fc >= fd ? c : d;
                        const T ft = std::max(fc, fd);
                        if (better(ft, best))
                        {
                            best = ft;
                            x = detail::simplex_move(x, i, t);
                        }
                    }
                width *= T(0.5);
            }
        }

        res.lambda = lam * P;
        res.powers = pw * P;
        res.se = best;
        return res;
    }
}

#endif
