#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cnr {

/// Belief mixtures are normalized densities with positive weights. Signed
/// mixtures represent rewards and value functions and may carry negative
/// weights.
enum class MixtureKind { Belief, SignedFunction };

inline const char* to_string(MixtureKind kind)
{
    return kind == MixtureKind::Belief ? "belief" : "signed-function";
}

inline constexpr double kCovarianceFloor = 1e-9;

template <typename Scalar, int Dim = Eigen::Dynamic>
struct GaussianComponent {
    using Vector = Eigen::Matrix<Scalar, Dim, 1>;
    using Matrix = Eigen::Matrix<Scalar, Dim, Dim>;

    Scalar weight{0};
    Vector mean;
    Matrix covariance;

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

/// Weighted sum of Gaussian densities.
///
/// Instances are immutable once built; every operation below returns a new
/// mixture. The dimension is a template parameter so the 4-D planning code
/// runs on fixed-size Eigen types while tests can use dynamic sizes.
template <typename Scalar, int Dim = Eigen::Dynamic>
class GaussianMixture {
public:
    using Component = GaussianComponent<Scalar, Dim>;
    using Vector = typename Component::Vector;
    using Matrix = typename Component::Matrix;

    GaussianMixture() = default;

    explicit GaussianMixture(std::vector<Component> components, MixtureKind kind = MixtureKind::Belief)
        : components_(std::move(components)), kind_(kind)
    {
        validate();
    }

    [[nodiscard]] MixtureKind kind() const { return kind_; }
    [[nodiscard]] bool is_belief() const { return kind_ == MixtureKind::Belief; }
    [[nodiscard]] std::size_t size() const { return components_.size(); }
    [[nodiscard]] bool empty() const { return components_.empty(); }
    [[nodiscard]] Eigen::Index dim() const { return components_.empty() ? Dim : components_.front().dim(); }
    [[nodiscard]] const std::vector<Component>& components() const { return components_; }
    [[nodiscard]] const Component& operator[](std::size_t i) const { return components_[i]; }
    [[nodiscard]] auto begin() const { return components_.begin(); }
    [[nodiscard]] auto end() const { return components_.end(); }

    [[nodiscard]] Scalar total_weight() const
    {
        Scalar sum{0};
        for (const auto& c : components_) sum += c.weight;
        return sum;
    }

    /// Belief mixture rescaled so the weights sum to one.
    [[nodiscard]] GaussianMixture normalized() const
    {
        const Scalar total = total_weight();
        if (!(total > Scalar(0))) throw std::domain_error("cannot normalize a mixture with non-positive total weight");
        std::vector<Component> out = components_;
        for (auto& c : out) c.weight /= total;
        return GaussianMixture(std::move(out), kind_);
    }

    [[nodiscard]] GaussianMixture scaled(Scalar factor) const
    {
        std::vector<Component> out = components_;
        for (auto& c : out) c.weight *= factor;
        return GaussianMixture(std::move(out), MixtureKind::SignedFunction);
    }

    [[nodiscard]] GaussianMixture as_signed() const { return GaussianMixture(components_, MixtureKind::SignedFunction); }

private:
    void validate() const
    {
        if (kind_ == MixtureKind::Belief && components_.empty())
            throw std::invalid_argument("belief mixture must have at least one component");
        const Eigen::Index n = components_.empty() ? 0 : components_.front().dim();
        for (const auto& c : components_) {
            if (c.mean.size() != n || c.covariance.rows() != n || c.covariance.cols() != n)
                throw std::invalid_argument("mixture component dimension mismatch");
            if (!c.covariance.isApprox(c.covariance.transpose(), Scalar(1e-9)) &&
                (c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12))
                throw std::invalid_argument("mixture component covariance is not symmetric");
            if (!std::isfinite(static_cast<double>(c.weight)) || !c.mean.allFinite() || !c.covariance.allFinite())
                throw std::invalid_argument("mixture component has non-finite entries");
            if (kind_ == MixtureKind::Belief) {
                if (!(c.weight > Scalar(0))) throw std::invalid_argument("belief mixture weights must be positive");
                Eigen::LLT<Matrix> llt(c.covariance);
                if (llt.info() != Eigen::Success)
                    throw std::invalid_argument("belief component covariance is not positive definite");
            }
        }
    }

    std::vector<Component> components_;
    MixtureKind kind_ = MixtureKind::Belief;
};

using GaussianMixtureX = GaussianMixture<double, Eigen::Dynamic>;
using GaussianMixture1 = GaussianMixture<double, 1>;
using GaussianMixture2 = GaussianMixture<double, 2>;
using GaussianMixture4 = GaussianMixture<double, 4>;

// ---- Gaussian primitives ----

template <typename Derived>
[[nodiscard]] typename Derived::Scalar log_det_spd(const Eigen::MatrixBase<Derived>& spd)
{
    using Scalar = typename Derived::Scalar;
    Eigen::LLT<typename Derived::PlainObject> llt(spd);
    if (llt.info() != Eigen::Success) throw std::domain_error("matrix is not positive definite");
    return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

/// log N(x; mean, cov).
template <typename DX, typename DM, typename DC>
[[nodiscard]] typename DX::Scalar log_gaussian_density(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DM>& mean,
                                                       const Eigen::MatrixBase<DC>& cov)
{
    using Scalar = typename DX::Scalar;
    Eigen::LLT<typename DC::PlainObject> llt(cov);
    if (llt.info() != Eigen::Success) throw std::domain_error("covariance is not positive definite");
    const typename DX::PlainObject diff = x - mean;
    const typename DX::PlainObject white = llt.matrixL().solve(diff);
    const Scalar maha = white.squaredNorm();
    const Scalar logdet = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
    const auto n = static_cast<Scalar>(x.size());
    return Scalar(-0.5) * (n * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) + logdet + maha);
}

/// Closed-form integral of the product of two Gaussian densities,
/// i.e. N(mean_a; mean_b, cov_a + cov_b).
template <typename Scalar, int Dim>
[[nodiscard]] Scalar gaussian_product_integral(const GaussianComponent<Scalar, Dim>& a,
                                               const GaussianComponent<Scalar, Dim>& b)
{
    return std::exp(log_gaussian_density(a.mean, b.mean, (a.covariance + b.covariance).eval()));
}

/// Clamps eigenvalues of a symmetric matrix from below.
template <typename Scalar, int Dim>
[[nodiscard]] Eigen::Matrix<Scalar, Dim, Dim> floor_covariance(const Eigen::Matrix<Scalar, Dim, Dim>& cov,
                                                               Scalar floor = Scalar(kCovarianceFloor))
{
    using Matrix = Eigen::Matrix<Scalar, Dim, Dim>;
    const Matrix sym = Scalar(0.5) * (cov + cov.transpose());
    const Matrix shifted = sym - floor * Matrix::Identity(sym.rows(), sym.cols());
    if (Eigen::LLT<Matrix>(shifted).info() == Eigen::Success) return sym;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const typename Eigen::SelfAdjointEigenSolver<Matrix>::RealVectorType clamped = eig.eigenvalues().cwiseMax(floor);
    Matrix out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    return Scalar(0.5) * (out + out.transpose());
}

// ---- Mixture operations ----

template <typename Scalar, int Dim, typename Derived>
[[nodiscard]] Scalar evaluate(const GaussianMixture<Scalar, Dim>& gm, const Eigen::MatrixBase<Derived>& x)
{
    if (!gm.empty() && x.size() != gm.dim()) throw std::invalid_argument("evaluate: state dimension mismatch");
    Scalar sum{0};
    for (const auto& c : gm) {
        if (c.weight == Scalar(0)) continue;
        sum += c.weight * std::exp(log_gaussian_density(x, c.mean, c.covariance));
    }
    return sum;
}

/// Pushes every component through x' = A x + delta + noise(Q).
template <typename Scalar, int Dim>
[[nodiscard]] GaussianMixture<Scalar, Dim> predict(const GaussianMixture<Scalar, Dim>& gm,
                                                   const Eigen::Matrix<Scalar, Dim, Dim>& transition,
                                                   const Eigen::Matrix<Scalar, Dim, 1>& delta,
                                                   const Eigen::Matrix<Scalar, Dim, Dim>& process_noise)
{
    const Eigen::Index n = gm.dim();
    if (transition.rows() != n || transition.cols() != n || delta.size() != n || process_noise.rows() != n ||
        process_noise.cols() != n)
        throw std::invalid_argument("predict: dimension mismatch");
    if ((process_noise - process_noise.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12))
        throw std::invalid_argument("predict: process noise is not symmetric");
    std::vector<typename GaussianMixture<Scalar, Dim>::Component> out;
    out.reserve(gm.size());
    for (const auto& c : gm) {
        typename GaussianMixture<Scalar, Dim>::Component p;
        p.weight = c.weight;
        p.mean = transition * c.mean + delta;
        Eigen::Matrix<Scalar, Dim, Dim> cov = transition * c.covariance * transition.transpose() + process_noise;
        p.covariance = Scalar(0.5) * (cov + cov.transpose());
        out.push_back(std::move(p));
    }
    return GaussianMixture<Scalar, Dim>(std::move(out), gm.kind());
}

/// Exact mixture mean and covariance by the law of total covariance.
template <typename Scalar, int Dim>
[[nodiscard]] std::pair<Eigen::Matrix<Scalar, Dim, 1>, Eigen::Matrix<Scalar, Dim, Dim>>
moments(const GaussianMixture<Scalar, Dim>& gm)
{
    if (!gm.is_belief()) throw std::invalid_argument("moments: signed-function mixtures have no moments");
    const Eigen::Index n = gm.dim();
    const Scalar total = gm.total_weight();
    Eigen::Matrix<Scalar, Dim, 1> mean = Eigen::Matrix<Scalar, Dim, 1>::Zero(n);
    for (const auto& c : gm) mean += c.weight * c.mean;
    mean /= total;
    Eigen::Matrix<Scalar, Dim, Dim> cov = Eigen::Matrix<Scalar, Dim, Dim>::Zero(n, n);
    for (const auto& c : gm) {
        const Eigen::Matrix<Scalar, Dim, 1> d = c.mean - mean;
        cov += c.weight * (c.covariance + d * d.transpose());
    }
    cov /= total;
    return {mean, Scalar(0.5) * (cov + cov.transpose())};
}

/// Draws n samples; deterministic for a fixed seed.
template <typename Scalar, int Dim>
[[nodiscard]] std::vector<Eigen::Matrix<Scalar, Dim, 1>> sample(const GaussianMixture<Scalar, Dim>& gm, std::size_t n,
                                                                std::uint64_t seed)
{
    if (!gm.is_belief()) throw std::invalid_argument("sample: signed-function mixtures cannot be sampled");
    if (n == 0) throw std::invalid_argument("sample: count must be positive");
    std::mt19937_64 rng(seed);
    std::vector<double> weights;
    std::vector<Eigen::Matrix<Scalar, Dim, Dim>> factors;
    for (const auto& c : gm) {
        weights.push_back(static_cast<double>(c.weight));
        Eigen::LLT<Eigen::Matrix<Scalar, Dim, Dim>> llt(c.covariance);
        factors.push_back(llt.matrixL());
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::Matrix<Scalar, Dim, 1>> out;
    out.reserve(n);
    const Eigen::Index d = gm.dim();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick(rng);
        Eigen::Matrix<Scalar, Dim, 1> z(d);
        for (Eigen::Index j = 0; j < d; ++j) z(j) = static_cast<Scalar>(normal(rng));
        out.push_back(gm[k].mean + factors[k] * z);
    }
    return out;
}

/// Concatenation of two mixtures of the same kind.
template <typename Scalar, int Dim>
[[nodiscard]] GaussianMixture<Scalar, Dim> join(const GaussianMixture<Scalar, Dim>& a,
                                                const GaussianMixture<Scalar, Dim>& b)
{
    std::vector<typename GaussianMixture<Scalar, Dim>::Component> out = a.components();
    out.insert(out.end(), b.begin(), b.end());
    const MixtureKind kind =
        (a.is_belief() && b.is_belief()) ? MixtureKind::Belief : MixtureKind::SignedFunction;
    return GaussianMixture<Scalar, Dim>(std::move(out), kind);
}

/// Integral of the product of two mixtures; bilinear in the weights.
template <typename Scalar, int Dim>
[[nodiscard]] Scalar inner_product(const GaussianMixture<Scalar, Dim>& a, const GaussianMixture<Scalar, Dim>& b)
{
    if (!a.empty() && !b.empty() && a.dim() != b.dim()) throw std::invalid_argument("inner_product: dimension mismatch");
    Scalar sum{0};
    for (const auto& ca : a) {
        if (ca.weight == Scalar(0)) continue;
        for (const auto& cb : b) {
            if (cb.weight == Scalar(0)) continue;
            sum += ca.weight * cb.weight * gaussian_product_integral(ca, cb);
        }
    }
    return sum;
}

template <typename Scalar, int Dim>
[[nodiscard]] GaussianMixture<Scalar, Dim> single_gaussian(const Eigen::Matrix<Scalar, Dim, 1>& mean,
                                                           const Eigen::Matrix<Scalar, Dim, Dim>& cov,
                                                           Scalar weight = Scalar(1),
                                                           MixtureKind kind = MixtureKind::Belief)
{
    return GaussianMixture<Scalar, Dim>({{weight, mean, cov}}, kind);
}

/// Converts between fixed and dynamic dimension representations.
template <int To, typename Scalar, int From>
[[nodiscard]] GaussianMixture<Scalar, To> resize_cast(const GaussianMixture<Scalar, From>& gm)
{
    std::vector<GaussianComponent<Scalar, To>> out;
    out.reserve(gm.size());
    for (const auto& c : gm) out.push_back({c.weight, c.mean, c.covariance});
    return GaussianMixture<Scalar, To>(std::move(out), gm.kind());
}

} // namespace cnr
