#pragma once

// Room-level discrete POMDP: the robber's room is the state, an action is a
// room to search paired with a room to ask about. Solved with point-based
// value iteration.

#include "cnr/map_config.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cnr {

struct DiscretePOMDP {
    std::vector<Eigen::MatrixXd> T; ///< T[a](s, s')
    std::vector<Eigen::MatrixXd> Z; ///< Z[a](s', o)
    Eigen::MatrixXd R;              ///< R(s, a)
    double discount = 0.9;

    [[nodiscard]] Eigen::Index states() const { return R.rows(); }
    [[nodiscard]] std::size_t actions() const { return T.size(); }
};

/// Throws std::invalid_argument on shape errors or rows not summing to one.
void validate(const DiscretePOMDP& m);

struct RoomPOMDPConfig {
    double stay_prob = 0.6;
    double detect_prob = 0.3;
    double false_alarm = 0.0; ///< P(Detection | robber elsewhere)
    double answer_accuracy = 0.9;
    double correct_reward = 10.0;
    double wrong_reward = -2.0;
    double discount = 0.9;
};

struct RoomAction {
    int search = 0;
    int query = 0;
    friend bool operator==(const RoomAction&, const RoomAction&) = default;
};

/// Observation index: detection * 2 + answer, with Detection = 0 and Yes = 0.
inline constexpr int kRoomObservations = 4;

struct RoomPOMDP {
    DiscretePOMDP pomdp;
    std::vector<std::string> room_ids;
    RoomPOMDPConfig config;

    [[nodiscard]] int room_count() const { return static_cast<int>(room_ids.size()); }
    [[nodiscard]] RoomAction action(int a) const { return {a / room_count(), a % room_count()}; }
    [[nodiscard]] int index(RoomAction a) const { return a.search * room_count() + a.query; }
};

/// Robber room transition: stay with stay_prob, else uniform over neighbours.
[[nodiscard]] Eigen::MatrixXd room_transition(const MapConfig& map, double stay_prob);

/// Throws std::invalid_argument for a disconnected room graph.
[[nodiscard]] RoomPOMDP build_room_model(const MapConfig& map, const RoomPOMDPConfig& config = {});

struct DiscreteAlpha {
    int action = 0;
    Eigen::VectorXd value;
};
using DiscretePolicy = std::vector<DiscreteAlpha>;

[[nodiscard]] double policy_value(const DiscretePolicy& alphas, const Eigen::VectorXd& belief);

/// Unique actions by their best alpha's value, descending; ties by action index.
[[nodiscard]] std::vector<int> select_top_n(const DiscretePolicy& alphas, const Eigen::VectorXd& belief, std::size_t n);
/// (action, value) for every action present, best first.
[[nodiscard]] std::vector<std::pair<int, double>> rank_actions(const DiscretePolicy& alphas, const Eigen::VectorXd& belief);

/// P(o | b, a) for every observation.
[[nodiscard]] Eigen::VectorXd observation_distribution(const DiscretePOMDP& m, const Eigen::VectorXd& belief, int action);
/// Bayes update after taking `action` and seeing `obs`; throws on a zero-probability observation.
[[nodiscard]] Eigen::VectorXd belief_update(const DiscretePOMDP& m, const Eigen::VectorXd& belief, int action, int obs);

/// Grows the seed set to `count` beliefs: each pass simulates every action
/// one step from every belief (observations drawn under `seed`) and keeps
/// the successor farthest (L1) from the set. Stops early if nothing new is
/// reachable.
[[nodiscard]] std::vector<Eigen::VectorXd> expand_beliefs(const DiscretePOMDP& m, const std::vector<Eigen::VectorXd>& seeds,
                                                          std::size_t count, std::uint64_t seed);

/// Removes alphas that another alpha dominates at every state.
[[nodiscard]] DiscretePolicy prune_dominated(const DiscretePolicy& alphas, double tolerance = 1e-12);

struct PbviOptions {
    int iterations = 60;
};

struct PbviReport {
    std::vector<double> mean_value;
};

/// Point-based value iteration from the constant lower bound min R / (1 - discount).
[[nodiscard]] DiscretePolicy solve_pbvi(const DiscretePOMDP& m, const std::vector<Eigen::VectorXd>& beliefs,
                                        const PbviOptions& opts = {}, PbviReport* report = nullptr);

[[nodiscard]] std::uint64_t model_hash(const DiscretePOMDP& m);
[[nodiscard]] nlohmann::json discrete_policy_to_json(const DiscretePolicy& p, std::uint64_t hash);
/// Throws std::runtime_error on a version mismatch.
[[nodiscard]] DiscretePolicy discrete_policy_from_json(const nlohmann::json& j, std::uint64_t* hash = nullptr);

} // namespace cnr
