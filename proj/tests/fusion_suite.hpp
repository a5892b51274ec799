#pragma once

// Randomized fusion cases checked against a dense-grid Bayes oracle. Shared by
// the unit tests and the acceptance binary.

#include "cnr/fusion.hpp"
#include "oracles.hpp"

#include <cstdint>
#include <random>

namespace cnr::oracle {

struct FusionCaseReport {
    int dim = 1;
    double evidence = 0.0;
    double mean_error = 0.0; ///< max axis error in prior standard deviations
    double cov_error = 0.0;  ///< relative Frobenius error
    double l1 = 0.0;
    std::size_t components = 0;

    [[nodiscard]] bool pass() const { return mean_error <= 0.05 && cov_error <= 0.10 && l1 <= 0.05; }
};

/// Per-component precomputation so the oracle density does not go through
/// the library's evaluate().
class DirectDensity {
public:
    template <int Dim>
    explicit DirectDensity(const GaussianMixture<double, Dim>& gm)
    {
        for (const auto& c : gm) {
            const Eigen::MatrixXd cov = c.covariance;
            terms_.push_back({c.weight / std::sqrt(std::pow(2.0 * std::numbers::pi, double(cov.rows())) * cov.determinant()),
                              Eigen::VectorXd(c.mean), cov.inverse()});
        }
    }
    [[nodiscard]] double operator()(const Eigen::VectorXd& x) const { return at(x.data()); }
    [[nodiscard]] double operator()(const Eigen::Vector2d& x) const { return at(x.data()); }
    [[nodiscard]] double operator()(double x) const { return at(&x); }

private:
    struct Term {
        double scale;
        Eigen::VectorXd mean;
        Eigen::MatrixXd precision;
    };
    std::vector<Term> terms_;

    // Plain loops: this runs at every grid point, so no temporaries.
    [[nodiscard]] double at(const double* x) const
    {
        double s = 0.0;
        double d[8];
        for (const auto& t : terms_) {
            const Eigen::Index n = t.mean.size();
            for (Eigen::Index i = 0; i < n; ++i) d[i] = x[i] - t.mean(i);
            double q = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) q += d[i] * t.precision(i, j) * d[j];
            s += t.scale * std::exp(-0.5 * q);
        }
        return s;
    }
};

inline GaussianMixtureX random_prior(std::mt19937_64& rng, int dim)
{
    std::uniform_int_distribution<int> count(1, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    const int k = count(rng);
    std::vector<GaussianComponent<double, Eigen::Dynamic>> comps;
    for (int i = 0; i < k; ++i) {
        GaussianComponent<double, Eigen::Dynamic> c;
        c.weight = 0.2 + u(rng);
        c.mean = Eigen::VectorXd(dim);
        for (int j = 0; j < dim; ++j) c.mean(j) = 1.2 * n(rng);
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dim, dim);
        for (int j = 0; j < dim; ++j) d(j, j) = std::pow(0.5 + u(rng), 2);
        if (dim == 2) {
            const Eigen::Matrix2d r = Eigen::Rotation2Dd(3.14159 * u(rng)).toRotationMatrix();
            d = r * d * r.transpose();
        }
        c.covariance = d;
        comps.push_back(c);
    }
    return GaussianMixtureX(std::move(comps)).normalized();
}

/// Normalized mixture with full random covariances, for condensation checks.
inline GaussianMixtureX random_dense_mixture(std::mt19937_64& rng, int dim, int count)
{
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_real_distribution<double> pw(0.05, 1.0);
    std::vector<GaussianComponent<double>> comps;
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd mean(dim);
        for (int d = 0; d < dim; ++d) mean(d) = u(rng);
        Eigen::MatrixXd a(dim, dim);
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) a(r, c) = 0.5 * u(rng);
        const Eigen::MatrixXd cov = a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(dim, dim);
        comps.push_back({pw(rng), mean, cov});
    }
    return GaussianMixtureX(std::move(comps)).normalized();
}

inline SoftmaxModel random_softmax(std::mt19937_64& rng, int dim)
{
    std::uniform_int_distribution<int> count(2, 4);
    std::normal_distribution<double> n(0.0, 1.0);
    const int m = count(rng);
    std::vector<SoftmaxClass> classes;
    for (int i = 0; i < m; ++i) {
        Eigen::VectorXd w(dim);
        for (int j = 0; j < dim; ++j) w(j) = 1.5 * n(rng);
        classes.push_back({"c" + std::to_string(i), w, n(rng)});
    }
    return SoftmaxModel(std::move(classes));
}

/// Draws (prior, model, class) with evidence of at least 2% and compares the
/// fused posterior to grid Bayes over a +-8 sigma box. The 1-D grid step is
/// 1e-3; in 2-D the box is split into 1200 steps per axis.
inline FusionCaseReport run_fusion_case(std::uint64_t seed, int dim, const FusionOptions& opts = {})
{
    std::mt19937_64 rng(seed);
    GaussianMixtureX prior;
    SoftmaxModel model;
    int cls = 0;
    double evidence = 0.0;
    for (;;) {
        prior = random_prior(rng, dim);
        model = random_softmax(rng, dim);
        cls = std::uniform_int_distribution<int>(0, int(model.class_count()) - 1)(rng);
        evidence = observation_probability(prior, model, {cls});
        if (evidence >= 0.02) break;
    }

    const auto [mu0, cov0] = moments(prior);
    const Eigen::VectorXd sd = cov0.diagonal().cwiseSqrt();
    const Eigen::VectorXd lo = mu0 - 8.0 * sd;
    const Eigen::VectorXd hi = mu0 + 8.0 * sd;

    const auto post = fuse_semantic(prior, model, cls, opts);
    const auto [mu1, cov1] = moments(post);
    const DirectDensity prior_pdf(prior);
    const DirectDensity post_pdf(post);
    const std::vector<int> classes{cls};
    auto lik = [&](const auto& x) { return softmax_set_probability(model, classes, x); };

    FusionCaseReport r;
    r.dim = dim;
    r.evidence = evidence;
    r.components = post.size();
    Eigen::VectorXd gmean;
    Eigen::MatrixXd gcov;
    if (dim == 1) {
        const auto g = grid_bayes_1d([&](double x) { return prior_pdf(x); },
                                     [&](double x) { return lik(Eigen::Matrix<double, 1, 1>::Constant(x)); }, lo(0), hi(0), 1e-3);
        gmean = Eigen::VectorXd::Constant(1, g.mean);
        gcov = Eigen::MatrixXd::Constant(1, 1, g.var);
        for (std::size_t i = 0; i < g.x.size(); ++i)
            r.l1 += std::abs(post_pdf(g.x[i]) - g.density[i]) * g.step;
    } else {
        // Square cells: the step follows the wider axis.
        const double step = (hi - lo).maxCoeff() / 1200.0;
        const auto g = grid_bayes_2d([&](const Eigen::Vector2d& x) { return prior_pdf(x); },
                                     [&](const Eigen::Vector2d& x) { return lik(x); }, lo, hi, step);
        gmean = g.mean;
        gcov = g.cov;
        for (std::size_t iy = 0; iy < g.ny; ++iy)
            for (std::size_t ix = 0; ix < g.nx; ++ix)
                r.l1 += std::abs(post_pdf(g.point(ix, iy)) - g.density[iy * g.nx + ix]) * step * step;
    }
    r.mean_error = ((mu1 - gmean).array() / sd.array()).abs().maxCoeff();
    r.cov_error = (cov1 - gcov).norm() / gcov.norm();
    return r;
}

} // namespace cnr::oracle
