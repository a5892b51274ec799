#pragma once

// Moment-preserving mixture reduction with the Runnalls upper-bound
// Kullback-Leibler merge cost.

#include "cnr/gaussian_mixture.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cnr {

/// Moment-preserving merge of two same-sign components.
template <typename Scalar, int Dim>
[[nodiscard]] GaussianComponent<Scalar, Dim> merge_components(const GaussianComponent<Scalar, Dim>& a,
                                                              const GaussianComponent<Scalar, Dim>& b)
{
    const Scalar w = a.weight + b.weight;
    const Scalar fa = a.weight / w;
    const Scalar fb = b.weight / w;
    GaussianComponent<Scalar, Dim> out;
    out.weight = w;
    out.mean = fa * a.mean + fb * b.mean;
    const Eigen::Matrix<Scalar, Dim, 1> d = a.mean - b.mean;
    Eigen::Matrix<Scalar, Dim, Dim> cov = fa * a.covariance + fb * b.covariance + (fa * fb) * d * d.transpose();
    out.covariance = Scalar(0.5) * (cov + cov.transpose());
    return out;
}

/// Runnalls cost B(i,j) = 0.5 [ w log|P| - w_i log|P_i| - w_j log|P_j| ]
/// using absolute weights.
template <typename Scalar, int Dim>
[[nodiscard]] Scalar runnalls_cost(const GaussianComponent<Scalar, Dim>& a, Scalar a_logdet,
                                   const GaussianComponent<Scalar, Dim>& b, Scalar b_logdet)
{
    const auto merged = merge_components(a, b);
    const Scalar wa = std::abs(a.weight);
    const Scalar wb = std::abs(b.weight);
    return Scalar(0.5) * ((wa + wb) * log_det_spd(merged.covariance) - wa * a_logdet - wb * b_logdet);
}

/// Greedily merges the cheapest same-sign pair until at most max_components
/// remain. Zero-weight components are dropped first.
template <typename Scalar, int Dim>
[[nodiscard]] GaussianMixture<Scalar, Dim> condense(const GaussianMixture<Scalar, Dim>& gm, std::size_t max_components)
{
    if (max_components < 1) throw std::invalid_argument("condense: max_components must be at least 1");
    using Component = GaussianComponent<Scalar, Dim>;

    std::vector<Component> items;
    items.reserve(gm.size());
    for (const auto& c : gm)
        if (c.weight != Scalar(0)) items.push_back(c);
    if (items.size() <= max_components) {
        if (items.empty() && gm.is_belief()) return gm;
        return GaussianMixture<Scalar, Dim>(std::move(items), gm.kind());
    }

    const std::size_t n = items.size();
    std::vector<Scalar> logdet(n);
    for (std::size_t i = 0; i < n; ++i) logdet[i] = log_det_spd(items[i].covariance);
    std::vector<bool> alive(n, true);

    constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
    // Upper-triangular cost table stored densely; cost(i,j) read with i<j.
    std::vector<Scalar> cost(n * n, kInf);
    auto same_sign = [&](std::size_t i, std::size_t j) {
        return (items[i].weight > Scalar(0)) == (items[j].weight > Scalar(0));
    };
    auto at = [&](std::size_t i, std::size_t j) -> Scalar& { return i < j ? cost[i * n + j] : cost[j * n + i]; };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (same_sign(i, j)) cost[i * n + j] = runnalls_cost(items[i], logdet[i], items[j], logdet[j]);

    // Row minima over partners j != i.
    std::vector<Scalar> best_cost(n, kInf);
    std::vector<std::size_t> best_partner(n, n);
    auto refresh_row = [&](std::size_t i) {
        best_cost[i] = kInf;
        best_partner[i] = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !alive[j]) continue;
            const Scalar c = at(i, j);
            if (c < best_cost[i]) {
                best_cost[i] = c;
                best_partner[i] = j;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) refresh_row(i);

    std::size_t count = n;
    while (count > max_components) {
        std::size_t bi = n;
        Scalar bc = kInf;
        for (std::size_t i = 0; i < n; ++i)
            if (alive[i] && best_cost[i] < bc) {
                bc = best_cost[i];
                bi = i;
            }
        if (bi == n) break; // only opposite-sign components left
        const std::size_t bj = best_partner[bi];
        const std::size_t keep = std::min(bi, bj);
        const std::size_t drop = std::max(bi, bj);
        items[keep] = merge_components(items[keep], items[drop]);
        logdet[keep] = log_det_spd(items[keep].covariance);
        alive[drop] = false;
        --count;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == keep || !alive[j]) continue;
            at(keep, j) = same_sign(keep, j) ? runnalls_cost(items[keep], logdet[keep], items[j], logdet[j]) : kInf;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            if (i == keep || best_partner[i] == keep || best_partner[i] == drop) {
                refresh_row(i);
            } else if (at(i, keep) < best_cost[i]) {
                best_cost[i] = at(i, keep);
                best_partner[i] = keep;
            }
        }
    }

    std::vector<Component> out;
    out.reserve(count);
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i]) out.push_back(std::move(items[i]));

    // Mixed signs with max_components == 1: keep the dominant magnitude.
    if (out.size() > max_components) {
        std::sort(out.begin(), out.end(),
                  [](const Component& a, const Component& b) { return std::abs(a.weight) > std::abs(b.weight); });
        out.resize(max_components);
    }
    return GaussianMixture<Scalar, Dim>(std::move(out), gm.kind());
}

} // namespace cnr
