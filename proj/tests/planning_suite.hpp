#pragma once

// Generators shared by the planner unit tests and the acceptance binary.

#include "cnr/cpomdp.hpp"
#include "two_state_vi.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace cnr::oracle {

inline GaussianComponent<double, 4> random_component4(std::mt19937_64& rng, double weight, double spread)
{
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    GaussianComponent<double, 4> c;
    c.weight = weight;
    for (int k = 0; k < 4; ++k) c.mean(k) = spread * n(rng);
    Eigen::Matrix4d a;
    for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 4; ++k) a(r, k) = n(rng);
    const Eigen::HouseholderQR<Eigen::Matrix4d> qr(a);
    const Eigen::Matrix4d rot = qr.householderQ();
    Eigen::Vector4d sd;
    for (int k = 0; k < 4; ++k) sd(k) = u(rng);
    c.covariance = rot * sd.cwiseAbs2().asDiagonal() * rot.transpose();
    c.covariance = 0.5 * (c.covariance + c.covariance.transpose()).eval();
    return c;
}

/// A mostly positive alpha and an overlapping belief.
struct ValuePair {
    AlphaElement<4> alpha;
    GaussianMixture4 belief;
};

inline ValuePair random_value_pair(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> count(1, 3);
    std::uniform_real_distribution<double> w(0.5, 2.0);
    std::vector<GaussianComponent<double, 4>> a;
    const int na = count(rng);
    for (int i = 0; i < na; ++i) a.push_back(random_component4(rng, w(rng), 0.5));
    a.push_back(random_component4(rng, -0.2 * w(rng), 0.5));
    std::vector<GaussianComponent<double, 4>> b;
    const int nb = count(rng);
    for (int i = 0; i < nb; ++i) b.push_back(random_component4(rng, w(rng), 0.5));
    return {{FactoredAction{0, -1}, GaussianMixture4(std::move(a), MixtureKind::SignedFunction)},
            GaussianMixture4(std::move(b)).normalized()};
}

/// Mean of alpha over belief samples.
inline double monte_carlo_value(const ValuePair& p, std::size_t samples, std::uint64_t seed)
{
    const auto xs = sample(p.belief, samples, seed);
    double sum = 0.0;
    for (const auto& x : xs) sum += evaluate(p.alpha.value, x);
    return sum / static_cast<double>(samples);
}

/// Random alpha set with repeated actions.
inline AlphaSet<4> random_alpha_set(std::mt19937_64& rng, int moves, int queries, std::size_t size)
{
    std::uniform_int_distribution<int> m(0, moves - 1);
    std::uniform_int_distribution<int> q(-1, queries - 1);
    std::uniform_real_distribution<double> w(-1.0, 2.0);
    AlphaSet<4> out;
    for (std::size_t i = 0; i < size; ++i) {
        std::vector<GaussianComponent<double, 4>> comps{random_component4(rng, w(rng), 1.5),
                                                        random_component4(rng, w(rng), 1.5)};
        out.push_back({FactoredAction{m(rng), q(rng)}, GaussianMixture4(std::move(comps), MixtureKind::SignedFunction)});
    }
    return out;
}

// Two narrow wells at -5 and +5 seen through a logistic sensor that is 85%
// accurate at the wells. Moves: bet left, bet right, listen.
struct TwoWell {
    ContinuousPOMDP<1> model;
    TwoStatePOMDP discrete;
    std::vector<GaussianMixture1> beliefs;
    std::vector<double> left_probability;
};

inline constexpr double kWellSpread = 0.05;

inline GaussianMixture1 two_well_belief(double p_left)
{
    std::vector<GaussianComponent<double, 1>> comps;
    auto add = [&](double w, double mu) {
        if (w <= 0.0) return;
        GaussianComponent<double, 1> c;
        c.weight = w;
        c.mean << mu;
        c.covariance << kWellSpread * kWellSpread;
        comps.push_back(c);
    };
    add(p_left, -5.0);
    add(1.0 - p_left, 5.0);
    return GaussianMixture1(std::move(comps));
}

inline TwoWell make_two_well(double discount, int belief_points = 21)
{
    constexpr double kHit = 1.0;
    constexpr double kMiss = -0.5;
    constexpr double kBumpVar = 0.09;
    // Reward bump weight so that <bump, well> equals one.
    const double unit = std::sqrt(2.0 * std::numbers::pi * (kBumpVar + kWellSpread * kWellSpread));
    auto bump = [&](double mu, double value) {
        GaussianComponent<double, 1> c;
        c.weight = value * unit;
        c.mean << mu;
        c.covariance << kBumpVar;
        return c;
    };

    TwoWell tw;
    const double slope = std::log(0.85 / 0.15) / 10.0;
    Eigen::VectorXd wl(1), wr(1);
    wl << -slope;
    wr << slope;
    ObservationFactor sensor;
    sensor.name = "side";
    sensor.model = SoftmaxModel({{"Left", wl, 0.0}, {"Right", wr, 0.0}});
    sensor.outcomes = {{0}, {1}};
    tw.model.sensors.push_back(sensor);

    auto move = [&](const char* name, std::vector<GaussianComponent<double, 1>> reward) {
        MoveModel<1> m;
        m.name = name;
        m.A << 1.0;
        m.delta << 0.0;
        m.Q << 0.0;
        m.reward = GaussianMixture1(std::move(reward), MixtureKind::SignedFunction);
        tw.model.moves.push_back(std::move(m));
    };
    move("bet-left", {bump(-5.0, kHit), bump(5.0, kMiss)});
    move("bet-right", {bump(5.0, kHit), bump(-5.0, kMiss)});
    move("listen", {});
    tw.model.discount = discount;

    // State 0 = left well.
    Eigen::MatrixXd z(2, 2);
    z << sensor.model.class_probability(0, Eigen::VectorXd::Constant(1, -5.0)),
        sensor.model.class_probability(1, Eigen::VectorXd::Constant(1, -5.0)),
        sensor.model.class_probability(0, Eigen::VectorXd::Constant(1, 5.0)),
        sensor.model.class_probability(1, Eigen::VectorXd::Constant(1, 5.0));
    tw.discrete.T.assign(3, Eigen::Matrix2d::Identity());
    tw.discrete.Z.assign(3, z);
    tw.discrete.R.resize(2, 3);
    tw.discrete.R << kHit, kMiss, 0.0, kMiss, kHit, 0.0;
    tw.discrete.discount = discount;

    for (int i = 0; i < belief_points; ++i) {
        const double p = static_cast<double>(i) / (belief_points - 1);
        tw.left_probability.push_back(p);
        tw.beliefs.push_back(two_well_belief(p));
    }
    return tw;
}

} // namespace cnr::oracle
