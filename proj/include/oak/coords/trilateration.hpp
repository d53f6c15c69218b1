// Copyright 2026 The Oak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "oak/coords/vivaldi.hpp"
#include "oak/errors.hpp"

namespace oak::coords {

struct TrilaterationOptions {
    std::size_t max_iterations = 500;
    double gradient_tolerance = 1e-6;
    /// Height assigned to the estimated point. Users sit at the edge of the
    /// embedding, so their access delay is folded into the anchors' heights.
    double estimate_height_ms = 0.0;
    /// Solve for the height as well (non-negative), starting from
    /// estimate_height_ms. Needs one anchor more than the dimensionality.
    bool fit_height = false;
};

struct TrilaterationResult {
    VivaldiCoordinate estimate;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    double rms_residual_ms = 0.0;
    bool converged = false;
};

namespace detail {

struct LeastSquares {
    std::span<const RttSample> samples;
    double estimate_height;
    bool fit_height = false;  // x carries the height as its last entry

    static double norm_to(const std::vector<double>& x, const std::vector<double>& a) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (x[i] - a[i]) * (x[i] - a[i]);
        return std::sqrt(s);
    }
    double height(const std::vector<double>& x) const { return fit_height ? x.back() : estimate_height; }

    double cost(const std::vector<double>& x) const {
        double c = 0.0;
        for (const auto& s : samples) {
            const double r = norm_to(x, s.peer_coordinate.position) + s.peer_coordinate.height + height(x) - s.measured_rtt_ms;
            c += r * r;
        }
        return c;
    }

    /// Fills J^T J and J^T r; returns the cost.
    double normal_equations(const std::vector<double>& x, std::vector<double>& jtj, std::vector<double>& jtr) const {
        const std::size_t n = x.size();
        std::fill(jtj.begin(), jtj.end(), 0.0);
        std::fill(jtr.begin(), jtr.end(), 0.0);
        std::vector<double> row(n, 0.0);
        double c = 0.0;
        for (const auto& s : samples) {
            const auto& a = s.peer_coordinate.position;
            const double dist = norm_to(x, a);
            const double r = dist + s.peer_coordinate.height + height(x) - s.measured_rtt_ms;
            c += r * r;
            if (dist < 1e-12) continue;  // non-differentiable at the anchor; treat as flat
            for (std::size_t i = 0; i < a.size(); ++i) row[i] = (x[i] - a[i]) / dist;
            if (fit_height) row[n - 1] = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                jtr[i] += row[i] * r;
                for (std::size_t j = 0; j < n; ++j) jtj[i * n + j] += row[i] * row[j];
            }
        }
        return c;
    }
};

/// Solves (A + mu I) x = b for a small dense system; false if singular.
inline bool solve_damped(std::vector<double> a, std::vector<double> b, double mu, std::vector<double>& x) {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += mu;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (std::abs(a[pivot * n + col]) < 1e-300) return false;
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
        x[i] = s / a[i * n + i];
    }
    return true;
}

struct Descent {
    std::vector<double> x;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;
    double cost = 0.0;
    bool converged = false;
};

/// Damped Gauss-Newton: each step is the Levenberg-damped Newton direction,
/// halved until the cost stops increasing.
inline Descent descend(const LeastSquares& problem, std::vector<double> x, const TrilaterationOptions& opt) {
    const std::size_t d = x.size();
    std::vector<double> jtj(d * d), jtr(d), step(d), trial(d);
    Descent out;
    double cost = problem.normal_equations(x, jtj, jtr);
    double mu = 1e-6;
    std::size_t it = 0;
    for (;; ++it) {
        double g = 0.0;
        for (double v : jtr) g += 4.0 * v * v;  // gradient of the sum of squares is 2 J^T r
        g = std::sqrt(g);
        out.gradient_norm = g;
        if (g <= opt.gradient_tolerance || cost <= 1e-24) {
            out.converged = true;
            break;
        }
        if (it >= opt.max_iterations) break;

        std::vector<double> neg(d);
        for (std::size_t i = 0; i < d; ++i) neg[i] = -jtr[i];
        double scale = 0.0;
        for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, jtj[i * d + i]);
        if (!solve_damped(jtj, neg, mu * std::max(scale, 1.0), step)) {
            mu *= 10.0;
            continue;
        }
        double factor = 1.0;
        bool improved = false;
        for (int halvings = 0; halvings < 40; ++halvings) {
            for (std::size_t i = 0; i < d; ++i) trial[i] = x[i] + factor * step[i];
            if (problem.fit_height) trial[d - 1] = std::max(trial[d - 1], 0.0);
            const double c = problem.cost(trial);
            if (c < cost) {
                x = trial;
                improved = true;
                break;
            }
            factor *= 0.5;
        }
        if (!improved) {
            // No descent along this direction at machine precision: stationary.
            out.converged = cost <= 1e-18 || g <= std::sqrt(opt.gradient_tolerance);
            break;
        }
        mu = factor == 1.0 ? std::max(mu * 0.3, 1e-12) : std::min(mu * 4.0, 1e6);
        cost = problem.normal_equations(x, jtj, jtr);
    }
    out.x = std::move(x);
    out.iterations = it;
    out.cost = cost;
    return out;
}

/// True if all anchor positions lie on a single line (or coincide).
/// Closed-form start: subtracting the first sphere equation from the others
/// leaves a linear system in the position. Needs d + 1 anchors.
inline std::optional<std::vector<double>> linearized(std::span<const RttSample> samples, double estimate_height) {
    const std::size_t d = samples[0].peer_coordinate.dimensions();
    if (samples.size() < d + 1) return std::nullopt;
    auto radius = [&](const RttSample& s) {
        return std::max(0.0, s.measured_rtt_ms - s.peer_coordinate.height - estimate_height);
    };
    const auto& a0 = samples[0].peer_coordinate.position;
    const double r0 = radius(samples[0]);
    double n0 = 0.0;
    for (double v : a0) n0 += v * v;
    std::vector<double> ata(d * d, 0.0), atb(d, 0.0), row(d);
    for (std::size_t k = 1; k < samples.size(); ++k) {
        const auto& a = samples[k].peer_coordinate.position;
        const double r = radius(samples[k]);
        double n = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            row[i] = 2.0 * (a[i] - a0[i]);
            n += a[i] * a[i];
        }
        const double b = n - n0 - r * r + r0 * r0;
        for (std::size_t i = 0; i < d; ++i) {
            atb[i] += row[i] * b;
            for (std::size_t j = 0; j < d; ++j) ata[i * d + j] += row[i] * row[j];
        }
    }
    std::vector<double> x;
    if (!solve_damped(ata, atb, 0.0, x)) return std::nullopt;
    for (double v : x) {
        if (!std::isfinite(v)) return std::nullopt;
    }
    return x;
}

/// Reflection of x across the least-squares plane through the anchors; with
/// nearly coplanar anchors the fit has a second basin there.
inline std::optional<std::vector<double>> mirrored(std::span<const RttSample> samples, const std::vector<double>& x) {
    const std::size_t d = samples[0].peer_coordinate.dimensions();
    if (d != 3 || samples.size() < 3) return std::nullopt;
    std::vector<double> c(3, 0.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < 3; ++i) c[i] += s.peer_coordinate.position[i] / static_cast<double>(samples.size());
    }
    // Normal = eigenvector of the smallest eigenvalue of the scatter matrix,
    // found by inverse iteration.
    std::vector<double> m(9, 0.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                m[i * 3 + j] += (s.peer_coordinate.position[i] - c[i]) * (s.peer_coordinate.position[j] - c[j]);
            }
        }
    }
    std::vector<double> nrm = {0.577, 0.578, 0.579};
    for (int it = 0; it < 50; ++it) {
        std::vector<double> next;
        if (!solve_damped(m, nrm, 1e-9 * (m[0] + m[4] + m[8] + 1.0), next)) return std::nullopt;
        const double len = std::sqrt(next[0] * next[0] + next[1] * next[1] + next[2] * next[2]);
        if (!(len > 0.0) || !std::isfinite(len)) return std::nullopt;
        for (auto& v : next) v /= len;
        nrm = next;
    }
    double off = 0.0;
    for (std::size_t i = 0; i < 3; ++i) off += (x[i] - c[i]) * nrm[i];
    std::vector<double> out(x.begin(), x.begin() + 3);
    for (std::size_t i = 0; i < 3; ++i) out[i] -= 2.0 * off * nrm[i];
    return out;
}

inline bool collinear(std::span<const RttSample> samples) {
    const auto& p0 = samples[0].peer_coordinate.position;
    std::size_t far = 0;
    double best = 0.0;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double dd = position_norm(p0, samples[i].peer_coordinate.position);
        if (dd > best) best = dd, far = i;
    }
    if (best < 1e-9) return true;
    const auto& p1 = samples[far].peer_coordinate.position;
    const std::size_t d = p0.size();
    std::vector<double> dir(d);
    for (std::size_t i = 0; i < d; ++i) dir[i] = (p1[i] - p0[i]) / best;
    for (const auto& s : samples) {
        const auto& q = s.peer_coordinate.position;
        double along = 0.0;
        for (std::size_t i = 0; i < d; ++i) along += (q[i] - p0[i]) * dir[i];
        double off = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double r = q[i] - p0[i] - along * dir[i];
            off += r * r;
        }
        if (std::sqrt(off) > 1e-9 * std::max(best, 1.0)) return false;
    }
    return true;
}

}  // namespace detail

/// Estimates the coordinate whose predicted RTTs to the anchors best match the
/// measured ones (least squares). Starts at the anchor centroid and at the
/// linearized solution, then tries anchor-adjacent and mirrored starts when
/// the fit stays poor.
inline TrilaterationResult trilaterate_detailed(std::span<const RttSample> samples,
                                                const TrilaterationOptions& opt = {}) {
    if (samples.size() < 3) {
        throw InsufficientAnchorsError("need at least 3 anchors, got " + std::to_string(samples.size()));
    }
    const std::size_t d = samples[0].peer_coordinate.dimensions();
    double mean_rtt = 0.0;
    for (const auto& s : samples) {
        if (s.peer_coordinate.dimensions() != d) throw DimensionMismatchError("anchors differ in dimensionality");
        if (!(s.measured_rtt_ms >= 0.0)) throw InvalidArgumentError("negative rtt");
        mean_rtt += s.measured_rtt_ms;
    }
    mean_rtt /= static_cast<double>(samples.size());

    if (opt.fit_height && samples.size() < d + 1) {
        throw InsufficientAnchorsError("fitting the height needs at least " + std::to_string(d + 1) + " anchors");
    }
    const detail::LeastSquares problem{samples, opt.estimate_height_ms, opt.fit_height};
    const auto with_height = [&](std::vector<double> x) {
        if (opt.fit_height) x.push_back(opt.estimate_height_ms);
        return x;
    };
    std::vector<double> centroid(d, 0.0);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < d; ++i) centroid[i] += s.peer_coordinate.position[i];
    }
    for (auto& c : centroid) c /= static_cast<double>(samples.size());

    auto best = detail::descend(problem, with_height(centroid), opt);
    const auto rms = [&](const detail::Descent& r) {
        return std::sqrt(r.cost / static_cast<double>(samples.size()));
    };
    const auto try_start = [&](const std::vector<double>& start) {
        auto alt = detail::descend(problem, with_height(start), opt);
        if (alt.cost < best.cost) best = std::move(alt);
    };
    if (auto lin = detail::linearized(samples, opt.estimate_height_ms)) try_start(*lin);
    if (rms(best) > 1e-3 * std::max(mean_rtt, 1.0)) {
        for (const auto& s : samples) {
            std::vector<double> start(d);
            for (std::size_t i = 0; i < d; ++i) {
                start[i] = 0.9 * s.peer_coordinate.position[i] + 0.1 * centroid[i] + 1e-3 * static_cast<double>(i + 1);
            }
            try_start(start);
        }
        if (auto m = detail::mirrored(samples, best.x)) try_start(*m);
    }

    if (!best.converged && detail::collinear(samples)) {
        throw DegenerateGeometryError("anchors are collinear and the fit did not converge");
    }

    TrilaterationResult out;
    out.iterations = best.iterations;
    out.gradient_norm = best.gradient_norm;
    out.converged = best.converged;
    out.rms_residual_ms = rms(best);
    out.estimate.height = problem.height(best.x);
    if (opt.fit_height) best.x.pop_back();
    out.estimate.position = std::move(best.x);
    const double normalized = mean_rtt > 0.0 ? out.rms_residual_ms / mean_rtt : (out.rms_residual_ms > 0 ? 1.0 : 0.0);
    out.estimate.error_estimate = std::clamp(normalized, 1e-6, 1.0);
    return out;
}

inline VivaldiCoordinate trilaterate(std::span<const RttSample> samples, const TrilaterationOptions& opt = {}) {
    return trilaterate_detailed(samples, opt).estimate;
}

}  // namespace oak::coords
