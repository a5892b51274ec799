#pragma once

// Exact value iteration for two-state POMDPs: every alpha vector is a line
// over P(state 0), so the upper envelope can be pruned exactly.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cnr::oracle {

struct TwoStatePOMDP {
    std::vector<Eigen::Matrix2d> T; ///< T[a](s, s')
    std::vector<Eigen::MatrixXd> Z; ///< Z[a](s', o)
    Eigen::MatrixXd R;              ///< R(s, a)
    double discount = 0.95;
};

inline int horizon_for(double discount, double tolerance = 1e-4)
{
    return static_cast<int>(std::ceil(std::log(tolerance) / std::log(discount))) + 1;
}

inline double line_value(const Eigen::Vector2d& a, double p) { return p * a(0) + (1.0 - p) * a(1); }

/// Lines on the upper envelope over [0, 1]. Line (a0, a1) is
/// y = c + m p with c = a1, m = a0 - a1.
inline std::vector<Eigen::Vector2d> upper_envelope(std::vector<Eigen::Vector2d> lines)
{
    if (lines.size() <= 1) return lines;
    auto slope = [](const Eigen::Vector2d& a) { return a(0) - a(1); };
    std::sort(lines.begin(), lines.end(), [&](const auto& a, const auto& b) {
        if (slope(a) != slope(b)) return slope(a) < slope(b);
        return a(1) < b(1);
    });
    std::vector<Eigen::Vector2d> hull;
    for (const auto& c : lines) {
        if (!hull.empty() && std::abs(slope(hull.back()) - slope(c)) < 1e-14) hull.pop_back(); // same slope, c higher
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull.back();
            // b is never on top if c overtakes a no later than b does.
            if ((a(1) - c(1)) * (slope(b) - slope(a)) <= (a(1) - b(1)) * (slope(c) - slope(a))) hull.pop_back();
            else break;
        }
        hull.push_back(c);
    }
    std::vector<Eigen::Vector2d> out;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const double lo = i == 0 ? -1e300 : (hull[i - 1](1) - hull[i](1)) / (slope(hull[i]) - slope(hull[i - 1]));
        const double hi = i + 1 == hull.size() ? 1e300 : (hull[i](1) - hull[i + 1](1)) / (slope(hull[i + 1]) - slope(hull[i]));
        if (std::max(lo, 0.0) <= std::min(hi, 1.0)) out.push_back(hull[i]);
    }
    return out;
}

/// Horizon-H value function starting from zero.
inline std::vector<Eigen::Vector2d> exact_value_iteration(const TwoStatePOMDP& m, int horizon)
{
    std::vector<Eigen::Vector2d> gamma{Eigen::Vector2d::Zero()};
    const auto actions = static_cast<std::size_t>(m.R.cols());
    for (int t = 0; t < horizon; ++t) {
        std::vector<Eigen::Vector2d> next;
        for (std::size_t a = 0; a < actions; ++a) {
            std::vector<Eigen::Vector2d> acc{m.R.col(static_cast<Eigen::Index>(a))};
            for (Eigen::Index o = 0; o < m.Z[a].cols(); ++o) {
                std::vector<Eigen::Vector2d> proj;
                for (const auto& alpha : gamma)
                    proj.push_back(m.discount * m.T[a] * m.Z[a].col(o).cwiseProduct(alpha));
                proj = upper_envelope(proj);
                std::vector<Eigen::Vector2d> sum;
                for (const auto& x : acc)
                    for (const auto& y : proj) sum.push_back(x + y);
                acc = upper_envelope(sum);
            }
            next.insert(next.end(), acc.begin(), acc.end());
        }
        gamma = upper_envelope(next);
    }
    return gamma;
}

inline double envelope_value(const std::vector<Eigen::Vector2d>& gamma, double p)
{
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& a : gamma) v = std::max(v, line_value(a, p));
    return v;
}

} // namespace cnr::oracle
