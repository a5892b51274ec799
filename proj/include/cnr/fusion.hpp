#pragma once

// Bayesian fusion of Gaussian-mixture beliefs with softmax likelihoods.
//
// Each component is multiplied by the likelihood of a set of softmax classes
// and replaced by moment-matched Gaussians. The likelihood only varies along
// the span of the class weight differences, so the moments are integrated on
// a deterministic grid in that (usually 1-D or 2-D) subspace and lifted back
// by Gaussian conditioning. Components whose likelihood changes sharply
// across their support are first split into narrower pieces with a
// Gauss-Hermite discretization of the mean, which lets the posterior carve
// out the holes left by negative information.

#include "cnr/condense.hpp"
#include "cnr/gaussian_mixture.hpp"
#include "cnr/quadrature.hpp"
#include "cnr/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cnr {

/// Raised when the observation is incompatible with the prior (all
/// posterior mass underflows). Callers keep the prior.
class DegenerateUpdate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FusionOptions {
    double range = 8.0;           ///< grid half width in local standard deviations
    double gaussian_step = 0.25;  ///< largest grid spacing in standard deviations
    double slope_step = 1.0;      ///< largest logit change between neighbouring grid nodes
    int max_points_per_axis = 257;
    double split_slope = 2.0;     ///< split a piece when its logit spread per std exceeds this
    int split_depth = 12;
    int split_points = 7;         ///< Gauss-Hermite nodes per split axis
    double child_scale = 0.5;     ///< child std relative to the parent along split axes
    double flat_tolerance = 1e-4; ///< relative likelihood variation treated as constant
    std::size_t max_pieces = 2048; ///< split budget per update, shared by weight
    std::size_t max_components = 0; ///< 0 keeps every posterior component
    double prune_ratio = 1e-12;   ///< drop components lighter than this fraction of the total

    /// Settings for test-grade accuracy on isolated updates.
    [[nodiscard]] static FusionOptions accurate(std::size_t cap = 0)
    {
        FusionOptions o;
        o.max_components = cap;
        return o;
    }

    /// Settings for the per-tick belief filter.
    [[nodiscard]] static FusionOptions runtime(std::size_t cap)
    {
        FusionOptions o;
        o.range = 6.0;
        o.gaussian_step = 0.5;
        o.slope_step = 2.5;
        o.max_points_per_axis = 25;
        o.split_slope = 3.0;
        o.split_depth = 1;
        o.split_points = 5;
        o.flat_tolerance = 1e-3;
        o.max_pieces = 64;
        o.max_components = cap;
        o.prune_ratio = 1e-9;
        return o;
    }

    /// Settings for alpha-function projections inside the planner.
    [[nodiscard]] static FusionOptions planning(std::size_t cap)
    {
        FusionOptions o;
        o.range = 5.0;
        o.gaussian_step = 0.6;
        o.slope_step = 3.0;
        o.max_points_per_axis = 13;
        o.split_depth = 0;
        o.max_components = cap;
        o.prune_ratio = 1e-9;
        return o;
    }
};

namespace detail {

using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

/// Likelihood of a class set as a function of the logit vector.
class ClassSetLikelihood {
public:
    ClassSetLikelihood(std::size_t class_count, const std::vector<int>& classes) : in_set_(class_count, 0)
    {
        for (int i : classes) {
            if (i < 0 || static_cast<std::size_t>(i) >= class_count)
                throw std::out_of_range("fusion: class index out of range");
            in_set_[static_cast<std::size_t>(i)] = 1;
        }
    }

    template <typename Derived>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<Derived>& z) const
    {
        const double top = z.maxCoeff();
        double num = 0.0;
        double den = 0.0;
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            const double e = std::exp(z(j) - top);
            den += e;
            if (in_set_[static_cast<std::size_t>(j)]) num += e;
        }
        return num / den;
    }

private:
    std::vector<char> in_set_;
};

struct LocalMoments {
    double mass = 0.0;
    SmallVec mean;
    SmallMat cov;
};

/// E[l], E[tau | l] and Cov[tau | l] for tau ~ N(0, I_r) and
/// l(tau) = likelihood(base + grad * tau), on a truncated uniform grid.
inline LocalMoments integrate_standard_normal(const SmallVec& base, const SmallMat& grad,
                                              const ClassSetLikelihood& likelihood, const FusionOptions& opts)
{
    const Eigen::Index r = grad.cols();
    std::vector<std::vector<double>> nodes(static_cast<std::size_t>(r));
    std::vector<std::vector<double>> weights(static_cast<std::size_t>(r));
    for (Eigen::Index i = 0; i < r; ++i) {
        const double slope = grad.col(i).maxCoeff() - grad.col(i).minCoeff();
        double h = opts.gaussian_step;
        if (slope > 0.0) h = std::min(h, opts.slope_step / slope);
        int half = static_cast<int>(std::ceil(opts.range / h));
        half = std::min(half, std::max(1, (opts.max_points_per_axis - 1) / 2));
        h = opts.range / half;
        auto& nd = nodes[static_cast<std::size_t>(i)];
        auto& wt = weights[static_cast<std::size_t>(i)];
        double total = 0.0;
        for (int k = -half; k <= half; ++k) {
            const double t = k * h;
            nd.push_back(t);
            wt.push_back(std::exp(-0.5 * t * t));
            total += wt.back();
        }
        for (double& w : wt) w /= total;
    }

    LocalMoments out;
    out.mean = SmallVec::Zero(r);
    out.cov = SmallMat::Zero(r, r);
    double s0 = 0.0;
    SmallVec s1 = SmallVec::Zero(r);
    SmallMat s2 = SmallMat::Zero(r, r);
    std::vector<std::size_t> idx(static_cast<std::size_t>(r), 0);
    SmallVec tau(r);
    SmallVec z(base.size());
    constexpr double kNegligible = 1e-18;
    while (true) {
        double w = 1.0;
        for (Eigen::Index i = 0; i < r; ++i) {
            const auto a = static_cast<std::size_t>(i);
            tau(i) = nodes[a][idx[a]];
            w *= weights[a][idx[a]];
        }
        if (w > kNegligible) {
            z.noalias() = base + grad * tau;
            const double lw = w * likelihood(z);
            s0 += lw;
            s1.noalias() += lw * tau;
            s2.noalias() += lw * tau * tau.transpose();
        }
        Eigen::Index i = 0;
        for (; i < r; ++i) {
            const auto a = static_cast<std::size_t>(i);
            if (++idx[a] < nodes[a].size()) break;
            idx[a] = 0;
        }
        if (i == r) break;
    }
    out.mass = s0;
    if (s0 > 0.0) {
        out.mean = s1 / s0;
        out.cov = s2 / s0 - out.mean * out.mean.transpose();
        out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    }
    return out;
}

/// One Gaussian piece in the likelihood subspace: centre and per-axis std.
struct SubspacePiece {
    double weight = 0.0;
    SmallVec mean;
    SmallMat cov;
};

inline const HermiteRule& cached_hermite(int points)
{
    static const std::vector<HermiteRule> table = [] {
        std::vector<HermiteRule> t;
        for (int k = 0; k <= 16; ++k) t.push_back(gauss_hermite(std::max(k, 1)));
        return t;
    }();
    if (points < 1 || points > 16) throw std::invalid_argument("fusion: split_points must be in [1, 16]");
    return table[static_cast<std::size_t>(points)];
}

struct PendingPiece {
    SmallVec center;
    SmallVec stds;
    double weight = 0.0;
    int depth = 0;
    double score = 0.0; ///< weight times likelihood variation; splits go to the largest first
    std::vector<Eigen::Index> axes;
};

/// Decides whether a piece is worth splitting. Returns false for pieces whose
/// likelihood is already well resolved; drops pieces with zero likelihood.
inline bool rate_piece(PendingPiece& p, const SmallVec& logits0, const SmallMat& gradient,
                       const ClassSetLikelihood& likelihood, const FusionOptions& opts, bool& empty)
{
    empty = false;
    const Eigen::Index r = gradient.cols();
    const SmallMat local = gradient * p.stds.asDiagonal();
    // Split along the steepest axis only, so refinement concentrates where
    // the likelihood actually bends.
    p.axes.clear();
    Eigen::Index steepest = 0;
    double top = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
        const double slope = local.col(i).maxCoeff() - local.col(i).minCoeff();
        if (slope > top) {
            top = slope;
            steepest = i;
        }
    }
    if (p.depth >= opts.split_depth || top <= opts.split_slope) return false;
    p.axes.push_back(steepest);

    // Probe the likelihood over +-3 std to skip flat pieces.
    const SmallVec base = logits0 + gradient * p.center;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    constexpr int kProbe = 7;
    SmallVec tau(r);
    SmallVec z(base.size());
    while (true) {
        for (Eigen::Index i = 0; i < r; ++i) tau(i) = -3.0 + idx[static_cast<std::size_t>(i)];
        z.noalias() = base + local * tau;
        const double l = likelihood(z);
        lo = std::min(lo, l);
        hi = std::max(hi, l);
        Eigen::Index i = 0;
        for (; i < r; ++i) {
            if (++idx[static_cast<std::size_t>(i)] < kProbe) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
        if (i == r) break;
    }
    if (hi <= 0.0) {
        empty = true;
        return false;
    }
    if (hi - lo <= opts.flat_tolerance * hi) return false;
    p.score = p.weight * (hi - lo);
    return true;
}

/// Refines the standard-normal subspace density into pieces, best first,
/// until every piece is resolved or the piece budget is spent, then moment
/// matches each piece against the likelihood.
inline void fuse_subspace(const SmallVec& logits0, const SmallMat& gradient, const ClassSetLikelihood& likelihood,
                          const FusionOptions& opts, std::size_t budget, std::vector<SubspacePiece>& out)
{
    const Eigen::Index r = gradient.cols();
    std::vector<PendingPiece> leaves;
    std::vector<PendingPiece> heap;
    auto by_score = [](const PendingPiece& a, const PendingPiece& b) { return a.score < b.score; };
    auto admit = [&](PendingPiece p) {
        bool empty = false;
        if (rate_piece(p, logits0, gradient, likelihood, opts, empty)) {
            heap.push_back(std::move(p));
            std::push_heap(heap.begin(), heap.end(), by_score);
        } else if (!empty) {
            leaves.push_back(std::move(p));
        }
    };
    admit({SmallVec::Zero(r), SmallVec::Ones(r), 1.0, 0, 0.0, {}});

    const HermiteRule& rule = cached_hermite(opts.split_points);
    const double rho = opts.child_scale;
    const double spread = std::sqrt(1.0 - rho * rho);
    const std::size_t k = rule.nodes.size();
    while (!heap.empty()) {
        std::size_t children = 1;
        for (std::size_t a = 0; a < heap.front().axes.size(); ++a) children *= k;
        if (leaves.size() + heap.size() - 1 + children > budget) break;
        std::pop_heap(heap.begin(), heap.end(), by_score);
        const PendingPiece parent = std::move(heap.back());
        heap.pop_back();

        std::vector<std::size_t> idx(parent.axes.size(), 0);
        while (true) {
            PendingPiece child{parent.center, parent.stds, parent.weight, parent.depth + 1, 0.0, {}};
            for (std::size_t a = 0; a < parent.axes.size(); ++a) {
                const Eigen::Index i = parent.axes[a];
                child.center(i) += parent.stds(i) * spread * rule.nodes[idx[a]];
                child.stds(i) = parent.stds(i) * rho;
                child.weight *= rule.weights[idx[a]];
            }
            admit(std::move(child));
            std::size_t a = 0;
            for (; a < parent.axes.size(); ++a) {
                if (++idx[a] < k) break;
                idx[a] = 0;
            }
            if (a == parent.axes.size()) break;
        }
    }
    for (auto& p : heap) leaves.push_back(std::move(p));

    for (const auto& p : leaves) {
        const SmallVec base = logits0 + gradient * p.center;
        const SmallMat local = gradient * p.stds.asDiagonal();
        const LocalMoments m = integrate_standard_normal(base, local, likelihood, opts);
        if (!(m.mass > 0.0)) continue;
        SubspacePiece piece;
        piece.weight = p.weight * m.mass;
        piece.mean = p.center + p.stds.cwiseProduct(m.mean);
        piece.cov = p.stds.asDiagonal() * m.cov * p.stds.asDiagonal();
        out.push_back(std::move(piece));
    }
}

} // namespace detail

/// Multiplies every component by the probability of the class set and
/// returns the unnormalized product. Works for belief and signed mixtures.
template <int Dim>
[[nodiscard]] GaussianMixture<double, Dim> multiply_likelihood(const GaussianMixture<double, Dim>& gm,
                                                               const SoftmaxModel& model,
                                                               const std::vector<int>& classes,
                                                               const FusionOptions& opts = {})
{
    using Matrix = Eigen::Matrix<double, Dim, Dim>;
    using Vector = Eigen::Matrix<double, Dim, 1>;
    using detail::SmallMat;
    using detail::SmallVec;

    if (gm.empty()) return gm;
    const Eigen::Index n = gm.dim();
    if (model.state_dim() != n) throw std::invalid_argument("fusion: likelihood and belief dimensions differ");
    const detail::ClassSetLikelihood likelihood(model.class_count(), classes);
    const Eigen::Index m = static_cast<Eigen::Index>(model.class_count());

    // The split budget is shared across components by weight magnitude.
    double magnitude_in = 0.0;
    for (const auto& c : gm) magnitude_in += std::abs(c.weight);

    std::vector<GaussianComponent<double, Dim>> out;
    std::vector<detail::SubspacePiece> pieces;
    for (const auto& comp : gm) {
        if (comp.weight == 0.0) continue;
        Eigen::LLT<Matrix> llt(comp.covariance);
        if (llt.info() != Eigen::Success) throw std::domain_error("fusion: component covariance is not positive definite");
        const Matrix chol = llt.matrixL();
        const Eigen::MatrixXd wl = model.weights() * chol;
        const Eigen::VectorXd logits = model.weights() * comp.mean + model.biases();

        Eigen::MatrixXd diffs(m - 1, n);
        for (Eigen::Index j = 1; j < m; ++j) diffs.row(j - 1) = wl.row(j) - wl.row(0);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs, Eigen::ComputeFullV);
        const Eigen::VectorXd sv = svd.singularValues();
        const double tol = std::max(1e-9, 1e-10 * (sv.size() ? sv(0) : 0.0));
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv(rank) > tol) ++rank;

        if (rank == 0) {
            const double l = likelihood(logits);
            if (l > 0.0) out.push_back({comp.weight * l, comp.mean, comp.covariance});
            continue;
        }
        if (rank > 8) throw std::invalid_argument("fusion: likelihood subspace too large");

        const Eigen::MatrixXd basis = svd.matrixV().leftCols(rank);
        const SmallMat gradient = wl * basis;
        pieces.clear();
        const auto budget = static_cast<std::size_t>(
            std::max(1.0, std::floor(static_cast<double>(opts.max_pieces) * std::abs(comp.weight) / magnitude_in)));
        detail::fuse_subspace(SmallVec(logits), gradient, likelihood, opts, budget, pieces);
        const Eigen::MatrixXd lift = chol * basis; // n x r
        for (const auto& p : pieces) {
            GaussianComponent<double, Dim> c;
            c.weight = comp.weight * p.weight;
            if (c.weight == 0.0) continue;
            c.mean = comp.mean + Vector(lift * p.mean);
            const Eigen::MatrixXd delta = p.cov - Eigen::MatrixXd::Identity(rank, rank);
            const Matrix cov = comp.covariance + Matrix(lift * delta * lift.transpose());
            c.covariance = floor_covariance<double, Dim>(cov);
            out.push_back(std::move(c));
        }
    }

    double magnitude = 0.0;
    for (const auto& c : out) magnitude += std::abs(c.weight);
    if (magnitude > 0.0 && opts.prune_ratio > 0.0) {
        const double cut = opts.prune_ratio * magnitude;
        std::erase_if(out, [cut](const auto& c) { return std::abs(c.weight) < cut; });
    }
    if (gm.is_belief() && out.empty()) throw DegenerateUpdate("fusion: observation has zero likelihood under the prior");
    GaussianMixture<double, Dim> product(std::move(out), gm.kind());
    if (opts.max_components > 0) product = condense(product, opts.max_components);
    return product;
}

/// Posterior of a belief after observing that the true class lies in the
/// given set. Throws DegenerateUpdate when the evidence underflows.
template <int Dim>
[[nodiscard]] GaussianMixture<double, Dim> fuse_semantic(const GaussianMixture<double, Dim>& prior,
                                                         const SoftmaxModel& model, const std::vector<int>& classes,
                                                         const FusionOptions& opts = {})
{
    if (!prior.is_belief()) throw std::invalid_argument("fuse_semantic: prior must be a belief mixture");
    const double prior_mass = prior.total_weight();
    GaussianMixture<double, Dim> product = multiply_likelihood(prior, model, classes, opts);
    const double evidence = product.total_weight();
    if (!(evidence > 1e-12 * prior_mass)) throw DegenerateUpdate("fusion: observation evidence below 1e-12");
    return product.normalized();
}

template <int Dim>
[[nodiscard]] GaussianMixture<double, Dim> fuse_semantic(const GaussianMixture<double, Dim>& prior,
                                                         const SoftmaxModel& model, int observed_class,
                                                         const FusionOptions& opts = {})
{
    return fuse_semantic(prior, model, std::vector<int>{observed_class}, opts);
}

/// Evidence P(class set) = integral of likelihood times belief.
template <int Dim>
[[nodiscard]] double observation_probability(const GaussianMixture<double, Dim>& belief, const SoftmaxModel& model,
                                             const std::vector<int>& classes, const FusionOptions& opts = {})
{
    FusionOptions o = opts;
    o.max_components = 0;
    return multiply_likelihood(belief, model, classes, o).total_weight() / belief.total_weight();
}

enum class DetectionOutcome { Detection, NoDetection };

/// Viewcone update on the joint [cop x, cop y, robber x, robber y] belief:
/// the box is centred on the cop, so the likelihood acts on the robber-cop
/// displacement.
template <int Dim>
[[nodiscard]] GaussianMixture<double, Dim> fuse_detection(const GaussianMixture<double, Dim>& prior,
                                                          const SoftmaxModel& box_model, DetectionOutcome outcome,
                                                          const FusionOptions& opts = {})
{
    if (prior.dim() != 4) throw std::invalid_argument("fuse_detection: expects a 4-D joint belief");
    const SoftmaxModel lifted = box_model.state_dim() == 4 ? box_model : box_model.on_difference(4, 0, 2);
    const std::vector<int> detect = lifted.classes_with_label("Detection");
    const std::vector<int> classes = outcome == DetectionOutcome::Detection ? detect : lifted.complement(detect);
    return fuse_semantic(prior, lifted, classes, opts);
}

} // namespace cnr
