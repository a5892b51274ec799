#include "cnr/dpomdp.hpp"

#include "cnr/hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cnr {

namespace {

constexpr int kDiscretePolicyVersion = 1;

double l1(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().sum(); }

double min_distance(const Eigen::VectorXd& b, const std::vector<Eigen::VectorXd>& set)
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& x : set) d = std::min(d, l1(b, x));
    return d;
}

} // namespace

void validate(const DiscretePOMDP& m)
{
    const Eigen::Index n = m.states();
    if (n < 1) throw std::invalid_argument("discrete POMDP has no states");
    if (m.T.size() != m.Z.size() || static_cast<Eigen::Index>(m.T.size()) != m.R.cols())
        throw std::invalid_argument("discrete POMDP: T, Z and R disagree on the action count");
    if (!(m.discount >= 0.0 && m.discount < 1.0)) throw std::invalid_argument("discrete POMDP: discount must be in [0, 1)");
    for (std::size_t a = 0; a < m.T.size(); ++a) {
        if (m.T[a].rows() != n || m.T[a].cols() != n || m.Z[a].rows() != n)
            throw std::invalid_argument("discrete POMDP: matrix shape mismatch");
        for (Eigen::Index s = 0; s < n; ++s) {
            if (std::abs(m.T[a].row(s).sum() - 1.0) > 1e-9)
                throw std::invalid_argument("discrete POMDP: transition row does not sum to 1");
            if (std::abs(m.Z[a].row(s).sum() - 1.0) > 1e-9)
                throw std::invalid_argument("discrete POMDP: observation row does not sum to 1");
        }
    }
}

Eigen::MatrixXd room_transition(const MapConfig& map, double stay_prob)
{
    if (!(stay_prob >= 0.0 && stay_prob <= 1.0)) throw std::invalid_argument("stay probability must be in [0, 1]");
    const auto n = static_cast<Eigen::Index>(map.rooms.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const auto nb = map.neighbours(static_cast<std::size_t>(s));
        if (nb.empty()) {
            t(s, s) = 1.0;
            continue;
        }
        t(s, s) = stay_prob;
        for (std::size_t k : nb) t(s, static_cast<Eigen::Index>(k)) += (1.0 - stay_prob) / static_cast<double>(nb.size());
    }
    return t;
}

RoomPOMDP build_room_model(const MapConfig& map, const RoomPOMDPConfig& config)
{
    const auto n = static_cast<int>(map.rooms.size());
    if (n < 1) throw std::invalid_argument("build_room_model: map has no rooms");
    for (int r = 1; r < n; ++r)
        if (room_path(map, 0, static_cast<std::size_t>(r)).empty())
            throw std::invalid_argument("build_room_model: room graph is disconnected");

    RoomPOMDP out;
    out.config = config;
    for (const auto& r : map.rooms) out.room_ids.push_back(r.id);
    const Eigen::MatrixXd t = room_transition(map, config.stay_prob);
    auto& m = out.pomdp;
    m.discount = config.discount;
    m.R.resize(n, n * n);
    for (int search = 0; search < n; ++search)
        for (int query = 0; query < n; ++query) {
            const int a = search * n + query;
            Eigen::MatrixXd z(n, kRoomObservations);
            for (int s = 0; s < n; ++s) {
                const double det = s == search ? config.detect_prob : config.false_alarm;
                const double yes = s == query ? config.answer_accuracy : 1.0 - config.answer_accuracy;
                z(s, 0) = det * yes;
                z(s, 1) = det * (1.0 - yes);
                z(s, 2) = (1.0 - det) * yes;
                z(s, 3) = (1.0 - det) * (1.0 - yes);
                m.R(s, a) = s == search ? config.correct_reward : config.wrong_reward;
            }
            m.T.push_back(t);
            m.Z.push_back(std::move(z));
        }
    validate(m);
    return out;
}

double policy_value(const DiscretePolicy& alphas, const Eigen::VectorXd& belief)
{
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& a : alphas) {
        if (a.value.size() != belief.size()) throw std::invalid_argument("policy_value: alpha and belief sizes differ");
        v = std::max(v, a.value.dot(belief));
    }
    return v;
}

std::vector<std::pair<int, double>> rank_actions(const DiscretePolicy& alphas, const Eigen::VectorXd& belief)
{
    std::vector<std::pair<int, double>> best;
    for (const auto& a : alphas) {
        if (a.value.size() != belief.size()) throw std::invalid_argument("select_top_n: alpha and belief sizes differ");
        const double v = a.value.dot(belief);
        auto it = std::find_if(best.begin(), best.end(), [&](const auto& p) { return p.first == a.action; });
        if (it == best.end()) best.emplace_back(a.action, v);
        else it->second = std::max(it->second, v);
    }
    std::stable_sort(best.begin(), best.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    return best;
}

std::vector<int> select_top_n(const DiscretePolicy& alphas, const Eigen::VectorXd& belief, std::size_t n)
{
    if (n < 1) throw std::invalid_argument("select_top_n: N must be at least 1");
    const auto ranked = rank_actions(alphas, belief);
    std::vector<int> out;
    for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.push_back(ranked[i].first);
    return out;
}

Eigen::VectorXd observation_distribution(const DiscretePOMDP& m, const Eigen::VectorXd& belief, int action)
{
    const auto a = static_cast<std::size_t>(action);
    return m.Z[a].transpose() * (m.T[a].transpose() * belief);
}

Eigen::VectorXd belief_update(const DiscretePOMDP& m, const Eigen::VectorXd& belief, int action, int obs)
{
    const auto a = static_cast<std::size_t>(action);
    Eigen::VectorXd next = (m.T[a].transpose() * belief).cwiseProduct(m.Z[a].col(obs));
    const double total = next.sum();
    if (!(total > 0.0)) throw std::invalid_argument("belief_update: observation has zero probability");
    return next / total;
}

std::vector<Eigen::VectorXd> expand_beliefs(const DiscretePOMDP& m, const std::vector<Eigen::VectorXd>& seeds,
                                            std::size_t count, std::uint64_t seed)
{
    if (count < seeds.size()) throw std::invalid_argument("expand_beliefs: count is below the seed count");
    std::vector<Eigen::VectorXd> out = seeds;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (out.size() < count) {
        const std::size_t before = out.size();
        const std::size_t frontier = out.size();
        for (std::size_t i = 0; i < frontier && out.size() < count; ++i) {
            Eigen::VectorXd best;
            double best_d = 0.0;
            for (std::size_t a = 0; a < m.actions(); ++a) {
                const Eigen::VectorXd po = observation_distribution(m, out[i], static_cast<int>(a));
                double u = unit(rng) * po.sum();
                int o = 0;
                while (o + 1 < po.size() && u >= po(o)) u -= po(o++);
                if (!(po(o) > 0.0)) continue;
                const Eigen::VectorXd next = belief_update(m, out[i], static_cast<int>(a), o);
                const double d = min_distance(next, out);
                if (d > best_d) {
                    best_d = d;
                    best = next;
                }
            }
            if (best_d > 1e-9) out.push_back(best);
        }
        if (out.size() == before) break;
    }
    return out;
}

DiscretePolicy prune_dominated(const DiscretePolicy& alphas, double tolerance)
{
    DiscretePolicy out;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < alphas.size() && !dominated; ++j) {
            if (i == j) continue;
            const Eigen::VectorXd diff = alphas[j].value - alphas[i].value;
            if (diff.minCoeff() >= -tolerance) {
                // Exact duplicates: keep the first copy only.
                dominated = diff.maxCoeff() > tolerance || j < i;
            }
        }
        if (!dominated) out.push_back(alphas[i]);
    }
    return out;
}

DiscretePolicy solve_pbvi(const DiscretePOMDP& m, const std::vector<Eigen::VectorXd>& beliefs, const PbviOptions& opts,
                          PbviReport* report)
{
    validate(m);
    if (beliefs.empty()) throw std::invalid_argument("solve_pbvi: belief set is empty");
    if (opts.iterations < 1) throw std::invalid_argument("solve_pbvi: need at least one iteration");
    for (const auto& b : beliefs)
        if (b.size() != m.states() || std::abs(b.sum() - 1.0) > 1e-9 || b.minCoeff() < 0.0)
            throw std::invalid_argument("solve_pbvi: beliefs must be normalized distributions over the states");

    const Eigen::Index n = m.states();
    const double floor = m.R.minCoeff() / (1.0 - m.discount);
    DiscretePolicy gamma{{0, Eigen::VectorXd::Constant(n, floor)}};
    const std::size_t actions = m.actions();

    for (int it = 0; it < opts.iterations; ++it) {
        // gao[a][o][j] = T_a (Z_a(:, o) .* alpha_j)
        std::vector<std::vector<std::vector<Eigen::VectorXd>>> gao(actions);
        for (std::size_t a = 0; a < actions; ++a) {
            gao[a].resize(static_cast<std::size_t>(m.Z[a].cols()));
            for (Eigen::Index o = 0; o < m.Z[a].cols(); ++o)
                for (const auto& alpha : gamma)
                    gao[a][static_cast<std::size_t>(o)].push_back(m.T[a] * m.Z[a].col(o).cwiseProduct(alpha.value));
        }
        DiscretePolicy next;
        for (const auto& b : beliefs) {
            double best_v = -std::numeric_limits<double>::infinity();
            DiscreteAlpha best;
            for (std::size_t a = 0; a < actions; ++a) {
                Eigen::VectorXd g = m.R.col(static_cast<Eigen::Index>(a));
                for (const auto& per_o : gao[a]) {
                    std::size_t arg = 0;
                    double top = -std::numeric_limits<double>::infinity();
                    for (std::size_t j = 0; j < per_o.size(); ++j) {
                        const double v = per_o[j].dot(b);
                        if (v > top) {
                            top = v;
                            arg = j;
                        }
                    }
                    g += m.discount * per_o[arg];
                }
                const double v = g.dot(b);
                if (v > best_v) {
                    best_v = v;
                    best = {static_cast<int>(a), std::move(g)};
                }
            }
            if (best_v < policy_value(gamma, b)) {
                // Keep the old best alpha so the value at b never drops.
                std::size_t j = 0;
                for (std::size_t k = 1; k < gamma.size(); ++k)
                    if (gamma[k].value.dot(b) > gamma[j].value.dot(b)) j = k;
                best = gamma[j];
            }
            next.push_back(std::move(best));
        }
        gamma = prune_dominated(next);
        if (report) {
            double mean = 0.0;
            for (const auto& b : beliefs) mean += policy_value(gamma, b);
            report->mean_value.push_back(mean / static_cast<double>(beliefs.size()));
        }
    }
    return gamma;
}

std::uint64_t model_hash(const DiscretePOMDP& m)
{
    std::ostringstream os;
    os.precision(17);
    auto dump = [&](const Eigen::MatrixXd& x) {
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) os << x(r, c) << ',';
        os << ';';
    };
    for (const auto& t : m.T) dump(t);
    for (const auto& z : m.Z) dump(z);
    dump(m.R);
    os << m.discount;
    return fnv1a(os.str());
}

nlohmann::json discrete_policy_to_json(const DiscretePolicy& p, std::uint64_t hash)
{
    nlohmann::json alphas = nlohmann::json::array();
    for (const auto& a : p)
        alphas.push_back({{"action", a.action}, {"value", std::vector<double>(a.value.data(), a.value.data() + a.value.size())}});
    return {{"version", kDiscretePolicyVersion}, {"kind", "room-level"}, {"model_hash", hash_hex(hash)}, {"alphas", alphas}};
}

DiscretePolicy discrete_policy_from_json(const nlohmann::json& j, std::uint64_t* hash)
{
    const int version = j.at("version").get<int>();
    if (version != kDiscretePolicyVersion)
        throw std::runtime_error("room-level policy format version " + std::to_string(version) + " is not supported");
    if (hash) *hash = std::stoull(j.at("model_hash").get<std::string>(), nullptr, 16);
    DiscretePolicy p;
    for (const auto& a : j.at("alphas")) {
        const auto v = a.at("value").get<std::vector<double>>();
        p.push_back({a.at("action").get<int>(), Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))});
    }
    return p;
}

} // namespace cnr
