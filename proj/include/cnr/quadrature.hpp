#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace cnr {

/// Nodes and weights of a K-point Gauss-Hermite rule for the standard
/// normal density (Golub-Welsch). Weights sum to one.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

[[nodiscard]] inline HermiteRule gauss_hermite(int points)
{
    HermiteRule rule;
    if (points <= 1) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
    for (int k = 1; k < points; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    for (int k = 0; k < points; ++k) {
        rule.nodes.push_back(eig.eigenvalues()(k));
        const double v = eig.eigenvectors()(0, k);
        rule.weights.push_back(v * v);
    }
    // Exact symmetry.
    for (int k = 0; k < points / 2; ++k) {
        const double node = 0.5 * (rule.nodes[points - 1 - k] - rule.nodes[k]);
        const double weight = 0.5 * (rule.weights[k] + rule.weights[points - 1 - k]);
        rule.nodes[k] = -node;
        rule.nodes[points - 1 - k] = node;
        rule.weights[k] = rule.weights[points - 1 - k] = weight;
    }
    if (points % 2 == 1) rule.nodes[points / 2] = 0.0;
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

} // namespace cnr
