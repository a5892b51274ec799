#pragma once

// Continuous-state POMDP with Gaussian-mixture value functions.
//
// Alpha functions are signed mixtures. A backup multiplies each alpha by the
// likelihood of every joint observation (moment matched, so the result stays
// a mixture), scores each move against the predicted belief with closed-form
// Gaussian products, and maps the winning terms back through the transition.

#include "cnr/condense.hpp"
#include "cnr/fusion.hpp"
#include "cnr/gaussian_mixture.hpp"
#include "cnr/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnr {

template <int Dim>
struct MoveModel {
    using Matrix = Eigen::Matrix<double, Dim, Dim>;
    using Vector = Eigen::Matrix<double, Dim, 1>;

    std::string name;
    Matrix A;
    Vector delta;
    Matrix Q;
    GaussianMixture<double, Dim> reward; ///< signed; R(s, move)
};

/// One observed variable: a softmax model with its classes grouped into
/// outcomes (e.g. {Detection} and the NoDetection classes).
struct ObservationFactor {
    std::string name;
    SoftmaxModel model;
    std::vector<std::vector<int>> outcomes;
};

template <int Dim>
struct ContinuousPOMDP {
    std::vector<MoveModel<Dim>> moves;
    std::vector<ObservationFactor> sensors; ///< observed after every action
    std::vector<ObservationFactor> queries; ///< one is chosen with each move when any exist
    double discount = 0.95;
};

/// Move index plus query index (-1 when the model has no queries).
struct FactoredAction {
    int move = 0;
    int query = -1;
    friend auto operator<=>(const FactoredAction&, const FactoredAction&) = default;
};

template <int Dim>
struct AlphaElement {
    FactoredAction action;
    GaussianMixture<double, Dim> value; ///< signed function of the state
};

template <int Dim>
using AlphaSet = std::vector<AlphaElement<Dim>>;

/// Integral of alpha times belief, in closed form over component pairs.
template <int Dim>
[[nodiscard]] double policy_value(const AlphaElement<Dim>& alpha, const GaussianMixture<double, Dim>& belief)
{
    if (!alpha.value.empty() && !belief.empty() && alpha.value.dim() != belief.dim())
        throw std::invalid_argument("policy_value: alpha and belief dimensions differ");
    return inner_product(alpha.value, belief);
}

/// max over the set; -inf for an empty set.
template <int Dim>
[[nodiscard]] double set_value(const AlphaSet<Dim>& gamma, const GaussianMixture<double, Dim>& belief,
                               std::size_t* best = nullptr)
{
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gamma.size(); ++j) {
        const double x = policy_value(gamma[j], belief);
        if (x > v) {
            v = x;
            if (best) *best = j;
        }
    }
    return v;
}

/// Unique actions ranked by the value of their best alpha, descending; ties
/// fall back to action order.
template <int Dim>
[[nodiscard]] std::vector<FactoredAction> select_top_n(const AlphaSet<Dim>& gamma,
                                                       const GaussianMixture<double, Dim>& belief, std::size_t n)
{
    if (n < 1) throw std::invalid_argument("select_top_n: N must be at least 1");
    std::vector<std::pair<FactoredAction, double>> best;
    for (const auto& a : gamma) {
        const double v = policy_value(a, belief);
        auto it = std::find_if(best.begin(), best.end(), [&](const auto& p) { return p.first == a.action; });
        if (it == best.end()) best.emplace_back(a.action, v);
        else it->second = std::max(it->second, v);
    }
    std::stable_sort(best.begin(), best.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    std::vector<FactoredAction> out;
    for (std::size_t i = 0; i < best.size() && i < n; ++i) out.push_back(best[i].first);
    return out;
}

/// Query indices ranked by their best alpha value (unique, descending).
template <int Dim>
[[nodiscard]] std::vector<std::pair<int, double>> rank_queries(const AlphaSet<Dim>& gamma,
                                                               const GaussianMixture<double, Dim>& belief)
{
    std::vector<std::pair<int, double>> best;
    for (const auto& a : gamma) {
        if (a.action.query < 0) continue;
        const double v = policy_value(a, belief);
        auto it = std::find_if(best.begin(), best.end(), [&](const auto& p) { return p.first == a.action.query; });
        if (it == best.end()) best.emplace_back(a.action.query, v);
        else it->second = std::max(it->second, v);
    }
    std::stable_sort(best.begin(), best.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    return best;
}

/// Backward transition: the function s -> integral N(s'; A s + delta, Q) h(s') ds'.
template <int Dim>
[[nodiscard]] GaussianMixture<double, Dim> transition_adjoint(const GaussianMixture<double, Dim>& h,
                                                              const MoveModel<Dim>& move)
{
    using Matrix = Eigen::Matrix<double, Dim, Dim>;
    if (h.empty()) return h;
    const Eigen::FullPivLU<Matrix> lu(move.A);
    if (!lu.isInvertible()) throw std::invalid_argument("transition_adjoint: transition matrix must be invertible");
    const Matrix inv = lu.inverse();
    const double jac = 1.0 / std::abs(lu.determinant());
    std::vector<GaussianComponent<double, Dim>> out;
    out.reserve(h.size());
    for (const auto& c : h) {
        GaussianComponent<double, Dim> a;
        a.weight = c.weight * jac;
        a.mean = inv * (c.mean - move.delta);
        const Matrix cov = inv * (c.covariance + move.Q) * inv.transpose();
        a.covariance = floor_covariance<double, Dim>(cov);
        out.push_back(std::move(a));
    }
    return GaussianMixture<double, Dim>(std::move(out), MixtureKind::SignedFunction);
}

/// Each joint observation as one class set per factor.
[[nodiscard]] inline std::vector<std::vector<const std::vector<int>*>>
joint_outcomes(const std::vector<const ObservationFactor*>& factors)
{
    std::vector<std::vector<const std::vector<int>*>> out{{}};
    for (const auto* f : factors) {
        std::vector<std::vector<const std::vector<int>*>> next;
        for (const auto& prefix : out)
            for (const auto& o : f->outcomes) {
                auto p = prefix;
                p.push_back(&o);
                next.push_back(std::move(p));
            }
        out = std::move(next);
    }
    return out;
}

struct SolverOptions {
    int iterations = 10;
    std::size_t alpha_cap = 20;
    FusionOptions projection = FusionOptions::planning(0);
};

/// Per-iteration cache of alpha-times-observation products for one alpha set.
template <int Dim>
class BackupContext {
public:
    using Mixture = GaussianMixture<double, Dim>;

    struct Result {
        AlphaElement<Dim> alpha;
        double value = 0.0; ///< value of the uncondensed backup at the belief
    };

    BackupContext(const ContinuousPOMDP<Dim>& model, const AlphaSet<Dim>& gamma, const FusionOptions& projection)
        : model_(model)
    {
        if (gamma.empty()) throw std::invalid_argument("bellman_backup: alpha set is empty");
        if (model.moves.empty()) throw std::invalid_argument("bellman_backup: model has no moves");
        for (const auto& f : model.sensors) check_factor(f);
        for (const auto& f : model.queries) check_factor(f);
        FusionOptions opts = projection;
        opts.max_components = 0;

        if (model.queries.empty()) slots_.push_back(-1);
        for (std::size_t q = 0; q < model.queries.size(); ++q) slots_.push_back(static_cast<int>(q));

        std::vector<const ObservationFactor*> sensors;
        for (const auto& f : model.sensors) sensors.push_back(&f);
        const auto sensor_outcomes = joint_outcomes(sensors);

        // Sensor products are shared by every query.
        std::vector<std::vector<Mixture>> sensed(sensor_outcomes.size());
        for (std::size_t o = 0; o < sensor_outcomes.size(); ++o)
            for (const auto& a : gamma) {
                Mixture h = a.value;
                for (std::size_t f = 0; f < sensors.size(); ++f)
                    h = multiply_likelihood(h, sensors[f]->model, *sensor_outcomes[o][f], opts);
                sensed[o].push_back(std::move(h));
            }

        products_.resize(slots_.size());
        for (std::size_t s = 0; s < slots_.size(); ++s) {
            const int q = slots_[s];
            for (std::size_t o = 0; o < sensor_outcomes.size(); ++o) {
                if (q < 0) {
                    products_[s].push_back(sensed[o]);
                    continue;
                }
                const auto& factor = model.queries[static_cast<std::size_t>(q)];
                for (const auto& answer : factor.outcomes) {
                    std::vector<Mixture> row;
                    for (const auto& h : sensed[o]) row.push_back(multiply_likelihood(h, factor.model, answer, opts));
                    products_[s].push_back(std::move(row));
                }
            }
        }
        // Moves with equal A and Q predict beliefs that differ only in the mean.
        for (std::size_t m = 0; m < model.moves.size(); ++m) {
            auto it = std::find_if(groups_.begin(), groups_.end(), [&](const auto& g) {
                const auto& r = model.moves[g.front()];
                return r.A == model.moves[m].A && r.Q == model.moves[m].Q;
            });
            if (it == groups_.end()) groups_.push_back({m});
            else it->push_back(m);
        }
        actions_.reserve(gamma.size());
        for (const auto& a : gamma) actions_.push_back(a.action);
    }

    [[nodiscard]] Result backup(const Mixture& belief, std::size_t alpha_cap) const
    {
        const double gamma = model_.discount;
        const std::size_t n_moves = model_.moves.size();
        // future[m][s] and the winning alpha per outcome, filled group by group.
        std::vector<std::vector<double>> future(n_moves, std::vector<double>(slots_.size(), 0.0));
        std::vector<std::vector<std::vector<std::size_t>>> choice(n_moves, std::vector<std::vector<std::size_t>>(slots_.size()));
        std::vector<double> values;
        std::vector<double> top;
        for (const auto& group : groups_) {
            const auto& ref = model_.moves[group.front()];
            const Mixture predicted = predict(belief, ref.A, ref.delta, ref.Q);
            std::vector<Vector> shifts;
            for (std::size_t m : group) shifts.push_back(model_.moves[m].delta - ref.delta);
            values.resize(group.size());
            top.resize(group.size());
            for (std::size_t s = 0; s < slots_.size(); ++s) {
                for (std::size_t m : group) choice[m][s].assign(products_[s].size(), 0);
                for (std::size_t o = 0; o < products_[s].size(); ++o) {
                    std::fill(top.begin(), top.end(), -std::numeric_limits<double>::infinity());
                    for (std::size_t j = 0; j < products_[s][o].size(); ++j) {
                        shifted_inner_products(products_[s][o][j], predicted, shifts, values);
                        for (std::size_t g = 0; g < group.size(); ++g)
                            if (values[g] > top[g]) {
                                top[g] = values[g];
                                choice[group[g]][s][o] = j;
                            }
                    }
                    for (std::size_t g = 0; g < group.size(); ++g) future[group[g]][s] += top[g];
                }
            }
        }

        double best_value = -std::numeric_limits<double>::infinity();
        std::size_t best_move = 0;
        std::size_t best_slot = 0;
        for (std::size_t m = 0; m < n_moves; ++m) {
            const double immediate = inner_product(model_.moves[m].reward, belief);
            for (std::size_t s = 0; s < slots_.size(); ++s) {
                const double total = immediate + gamma * future[m][s];
                if (total > best_value) {
                    best_value = total;
                    best_move = m;
                    best_slot = s;
                }
            }
        }
        const auto& best_choice = choice[best_move][best_slot];

        const auto& mv = model_.moves[best_move];
        std::vector<GaussianComponent<double, Dim>> comps(mv.reward.begin(), mv.reward.end());
        if (gamma != 0.0)
            for (std::size_t o = 0; o < best_choice.size(); ++o) {
                const Mixture back = transition_adjoint(products_[best_slot][o][best_choice[o]], mv);
                for (auto c : back) {
                    c.weight *= gamma;
                    comps.push_back(std::move(c));
                }
            }
        Mixture value(std::move(comps), MixtureKind::SignedFunction);
        if (alpha_cap > 0 && value.size() > alpha_cap) value = condense(value, alpha_cap);
        return {{FactoredAction{static_cast<int>(best_move), slots_[best_slot]}, std::move(value)}, best_value};
    }

private:
    using Vector = Eigen::Matrix<double, Dim, 1>;
    using Matrix = Eigen::Matrix<double, Dim, Dim>;

    /// <h, p shifted by each offset>; one factorization per component pair.
    static void shifted_inner_products(const Mixture& h, const Mixture& p, const std::vector<Vector>& shifts,
                                       std::vector<double>& out)
    {
        std::fill(out.begin(), out.end(), 0.0);
        if (h.empty() || p.empty()) return;
        const double log_norm = 0.5 * static_cast<double>(p.dim()) * std::log(2.0 * std::numbers::pi);
        for (const auto& a : h)
            for (const auto& b : p) {
                const Matrix sum = a.covariance + b.covariance;
                const Eigen::LLT<Matrix> llt(sum);
                const Matrix L = llt.matrixL();
                const double half_logdet = L.diagonal().array().log().sum();
                const double scale = a.weight * b.weight;
                const Vector base = a.mean - b.mean;
                for (std::size_t k = 0; k < shifts.size(); ++k) {
                    const Vector q = L.template triangularView<Eigen::Lower>().solve(Vector(base - shifts[k]));
                    out[k] += scale * std::exp(-0.5 * q.squaredNorm() - half_logdet - log_norm);
                }
            }
    }

    static void check_factor(const ObservationFactor& f)
    {
        if (f.outcomes.empty()) throw std::invalid_argument("observation factor '" + f.name + "' has no outcomes");
    }

    const ContinuousPOMDP<Dim>& model_;
    std::vector<int> slots_;
    std::vector<std::vector<std::vector<Mixture>>> products_; ///< [slot][joint outcome][alpha]
    std::vector<FactoredAction> actions_;
    std::vector<std::vector<std::size_t>> groups_; ///< moves sharing A and Q
};

/// One point-based backup of the set at a belief.
template <int Dim>
[[nodiscard]] AlphaElement<Dim> bellman_backup(const AlphaSet<Dim>& gamma, const GaussianMixture<double, Dim>& belief,
                                               const ContinuousPOMDP<Dim>& model, const SolverOptions& opts = {})
{
    return BackupContext<Dim>(model, gamma, opts.projection).backup(belief, opts.alpha_cap).alpha;
}

/// The zero function tagged with the first action.
template <int Dim>
[[nodiscard]] AlphaElement<Dim> zero_alpha(const ContinuousPOMDP<Dim>& model)
{
    return {FactoredAction{0, model.queries.empty() ? -1 : 0},
            GaussianMixture<double, Dim>({}, MixtureKind::SignedFunction)};
}

struct SolveReport {
    std::vector<double> mean_value; ///< mean belief-point value after each iteration
    std::vector<std::size_t> alpha_count;
};

/// Point-based value iteration from the zero function. A backup that comes
/// out below the previous set's value at its belief point (after
/// condensation) is replaced by the previous best alpha, so belief-point
/// values never decrease. Alphas that are best nowhere in the set are pruned.
template <int Dim>
[[nodiscard]] AlphaSet<Dim> solve_policy(const ContinuousPOMDP<Dim>& model,
                                         const std::vector<GaussianMixture<double, Dim>>& beliefs,
                                         const SolverOptions& opts = {}, SolveReport* report = nullptr)
{
    if (beliefs.empty()) throw std::invalid_argument("solve_policy: belief set is empty");
    if (opts.iterations < 1) throw std::invalid_argument("solve_policy: need at least one iteration");
    for (const auto& mv : model.moves) {
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, Dim, Dim>> eig(mv.Q);
        if (eig.eigenvalues().minCoeff() < -1e-12)
            throw std::invalid_argument("solve_policy: move noise must be positive semidefinite");
    }

    AlphaSet<Dim> gamma{zero_alpha(model)};
    for (int it = 0; it < opts.iterations; ++it) {
        const BackupContext<Dim> ctx(model, gamma, opts.projection);
        AlphaSet<Dim> next;
        std::vector<std::size_t> kept_old;
        for (const auto& b : beliefs) {
            std::size_t old_best = 0;
            const double old_value = set_value(gamma, b, &old_best);
            auto r = ctx.backup(b, opts.alpha_cap);
            if (policy_value(r.alpha, b) >= old_value) {
                next.push_back(std::move(r.alpha));
            } else if (std::find(kept_old.begin(), kept_old.end(), old_best) == kept_old.end()) {
                kept_old.push_back(old_best);
                next.push_back(gamma[old_best]);
            }
        }
        // Keep only alphas that win somewhere in the set.
        std::vector<char> used(next.size(), 0);
        for (const auto& b : beliefs) {
            std::size_t j = 0;
            (void)set_value(next, b, &j);
            used[j] = 1;
        }
        AlphaSet<Dim> pruned;
        for (std::size_t j = 0; j < next.size(); ++j)
            if (used[j]) pruned.push_back(std::move(next[j]));
        gamma = std::move(pruned);
        if (report) {
            double mean = 0.0;
            for (const auto& b : beliefs) mean += set_value(gamma, b);
            report->mean_value.push_back(mean / static_cast<double>(beliefs.size()));
            report->alpha_count.push_back(gamma.size());
        }
    }
    return gamma;
}

} // namespace cnr
