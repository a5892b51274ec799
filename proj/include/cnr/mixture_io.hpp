#pragma once

#include "cnr/gaussian_mixture.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace cnr {

/// Mixture record: {"kind", "components": [{"weight", "mean", "covariance"}]}
/// with the covariance flattened row-major.
template <typename Scalar, int Dim>
[[nodiscard]] nlohmann::json mixture_to_json(const GaussianMixture<Scalar, Dim>& gm)
{
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : gm) {
        std::vector<double> mean(c.mean.data(), c.mean.data() + c.mean.size());
        std::vector<double> cov;
        cov.reserve(static_cast<std::size_t>(c.covariance.size()));
        for (Eigen::Index r = 0; r < c.covariance.rows(); ++r)
            for (Eigen::Index k = 0; k < c.covariance.cols(); ++k) cov.push_back(c.covariance(r, k));
        comps.push_back({{"weight", c.weight}, {"mean", mean}, {"covariance", cov}});
    }
    return {{"kind", to_string(gm.kind())}, {"components", comps}};
}

template <typename Scalar, int Dim>
[[nodiscard]] GaussianMixture<Scalar, Dim> mixture_from_json(const nlohmann::json& j)
{
    const std::string kind_name = j.at("kind").get<std::string>();
    MixtureKind kind;
    if (kind_name == "belief") kind = MixtureKind::Belief;
    else if (kind_name == "signed-function") kind = MixtureKind::SignedFunction;
    else throw std::invalid_argument("unknown mixture kind '" + kind_name + "'");

    std::vector<GaussianComponent<Scalar, Dim>> comps;
    for (const auto& jc : j.at("components")) {
        const auto mean = jc.at("mean").get<std::vector<double>>();
        const auto cov = jc.at("covariance").get<std::vector<double>>();
        const auto n = static_cast<Eigen::Index>(mean.size());
        if (cov.size() != mean.size() * mean.size()) throw std::invalid_argument("mixture record: covariance size mismatch");
        if (Dim != Eigen::Dynamic && n != Dim) throw std::invalid_argument("mixture record: dimension mismatch");
        GaussianComponent<Scalar, Dim> c;
        c.weight = jc.at("weight").get<double>();
        c.mean.resize(n);
        c.covariance.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            c.mean(r) = mean[static_cast<std::size_t>(r)];
            for (Eigen::Index k = 0; k < n; ++k) c.covariance(r, k) = cov[static_cast<std::size_t>(r * n + k)];
        }
        comps.push_back(std::move(c));
    }
    return GaussianMixture<Scalar, Dim>(std::move(comps), kind);
}

} // namespace cnr
