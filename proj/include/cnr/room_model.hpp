#pragma once

// Per-room continuous search model: the cop moves on a 0.5 m lattice while
// the robber diffuses, the viewcone reports every step and one object
// question rides along with each move.

#include "cnr/belief.hpp"
#include "cnr/cpomdp.hpp"
#include "cnr/hash.hpp"
#include "cnr/map_config.hpp"
#include "cnr/semantic.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cnr {

struct RoomModelConfig {
    double step = 0.5;             ///< cop move length (m)
    double cop_noise = 0.01;       ///< cop variance added per move (m^2)
    double robber_noise = 0.05;    ///< robber variance added per move (m^2)
    double capture_radius = 1.0;
    double discount = 0.95;
    double viewcone_half_width = 0.5;
    double viewcone_steepness = kViewconeSteepness;
};

/// Move directions in model order.
inline constexpr const char* kMoveNames[] = {"east", "west", "north", "south", "stay"};
inline constexpr int kMoveCount = 5;

/// Unit direction of a move (zero for stay).
[[nodiscard]] Eigen::Vector2d move_direction(int move);

struct RoomModel {
    std::size_t room = 0;
    std::string room_id;
    RoomModelConfig config;
    std::vector<SemanticStatement> questions; ///< query index -> statement asked
    ContinuousPOMDP<4> pomdp;
};

/// Reward for one move: a single 4-D bump over states where the cop, after
/// moving by `move_delta`, is within about `capture_radius` of the robber.
/// The bump is broad (std `spread` per axis) along the common position and
/// centred at `centre`.
[[nodiscard]] GaussianMixture4 build_reward(const Eigen::Vector2d& move_delta, double capture_radius,
                                            const Eigen::Vector2d& centre, const Eigen::Vector2d& spread);

[[nodiscard]] RoomModel build_room_model(const MapConfig& map, const Codebook& codebook, std::size_t room,
                                         const RoomModelConfig& config = {});

/// Belief points from short random-action rollouts starting uniform over the
/// room with a random cop position.
[[nodiscard]] std::vector<GaussianMixture4> generate_belief_set(const RoomModel& model, const MapConfig& map,
                                                                std::size_t count, std::uint64_t seed,
                                                                std::size_t max_components = 4);

struct RoomPolicy {
    std::string room_id;
    std::uint64_t model_hash = 0;
    std::vector<SemanticStatement> questions;
    AlphaSet<4> alphas;
};

[[nodiscard]] RoomPolicy solve_room_policy(const RoomModel& model, const std::vector<GaussianMixture4>& beliefs,
                                           const SolverOptions& opts = {}, SolveReport* report = nullptr);

/// FNV-1a over a canonical dump of the model parameters.
[[nodiscard]] std::uint64_t model_hash(const RoomModel& model);

inline constexpr int kPolicyFormatVersion = 1;

[[nodiscard]] nlohmann::json policy_to_json(const RoomPolicy& policy);
/// Throws std::runtime_error on a version mismatch.
[[nodiscard]] RoomPolicy policy_from_json(const nlohmann::json& j);

} // namespace cnr
