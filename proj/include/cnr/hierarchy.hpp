#pragma once

// Runtime controller: the room-level policy picks a room to search and a
// room to ask about, the searched room's continuous policy drives the cop
// once it is there, and the queried room's policy supplies object questions.

#include "cnr/belief.hpp"
#include "cnr/dpomdp.hpp"
#include "cnr/room_model.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cnr {

/// Everything solved for one map.
struct PolicyBundle {
    RoomPOMDP room_model;
    DiscretePolicy room_policy;
    std::vector<std::optional<RoomPolicy>> room_policies; ///< by map room index
    std::vector<RoomModel> room_models;                   ///< by map room index; may be empty
};

struct BundleSolveOptions {
    std::size_t room_beliefs = 60; ///< discrete belief points
    int room_iterations = 60;
    std::size_t beliefs_per_room = 100;
    SolverOptions solver;
    std::uint64_t seed = 1;
    RoomPOMDPConfig room_config;
    RoomModelConfig model_config;
    std::vector<std::string> rooms; ///< room ids to solve continuous policies for; empty means all
    std::function<void(const std::string&)> progress; ///< called as each stage starts
};

/// Throws std::invalid_argument for unknown room ids.
[[nodiscard]] PolicyBundle solve_bundle(const MapConfig& map, const Codebook& codebook,
                                        const BundleSolveOptions& opts = {});

inline constexpr int kBundleFormatVersion = 1;

[[nodiscard]] nlohmann::json bundle_to_json(const PolicyBundle& bundle);
/// Rebuilds the models from the map and checks every stored hash; throws
/// std::runtime_error on a version or hash mismatch.
[[nodiscard]] PolicyBundle bundle_from_json(const nlohmann::json& j, const MapConfig& map, const Codebook& codebook,
                                            const RoomPOMDPConfig& room_config = {},
                                            const RoomModelConfig& model_config = {});

enum class QuestionLayer { Room, Object };
/// How the N-question budget is split between the layers.
enum class Interleave { RoomFirst, ObjectFirst, RoomOnly };

[[nodiscard]] const char* to_string(Interleave i);
[[nodiscard]] Interleave interleave_from_string(const std::string& s);

struct RankedQuestion {
    SemanticStatement statement;
    QuestionLayer layer = QuestionLayer::Room;
    double value = 0.0; ///< within-layer score
    friend bool operator==(const RankedQuestion&, const RankedQuestion&) = default;
};

enum class NavigationKind { GotoRoom, Move };

/// How the searched room's policy turns into a move: the action tag of the
/// best alpha, or a one-step lookahead (reward plus discounted value of the
/// predicted belief) over the room's value function.
enum class MoveSelection { BestAlpha, Lookahead };

[[nodiscard]] const char* to_string(MoveSelection m);
[[nodiscard]] MoveSelection move_selection_from_string(const std::string& s);

struct CompositeDirective {
    NavigationKind navigation = NavigationKind::Move;
    std::size_t search_room = 0;
    std::size_t goto_room = 0; ///< next room on the path; GotoRoom only
    int move = 4;              ///< index into kMoveNames; Move only
    std::size_t query_room = 0;
    SemanticStatement room_question;
    std::optional<SemanticStatement> object_question;
    std::vector<RankedQuestion> extra_questions;
    std::vector<std::string> notes;
};

struct HierarchyOptions {
    std::size_t questions = 3; ///< N
    Interleave interleave = Interleave::RoomFirst;
    /// Charged per room-graph edge between the cop and a candidate search
    /// room. Tuned on map 1: a full wrong-search penalty per edge pins the
    /// cop to its current room once the belief flattens.
    double travel_cost = 0.5;
    double step = 0.5;
    MoveSelection moves = MoveSelection::Lookahead;
};

[[nodiscard]] CompositeDirective step_policy(const HybridBelief& belief, const Eigen::Vector2d& cop,
                                             const MapConfig& map, const PolicyBundle& policies,
                                             const HierarchyOptions& opts = {});

/// Where the cop ends up after one tick of the directive. Walls are never
/// crossed; a blocked move leaves the cop in place.
[[nodiscard]] Eigen::Vector2d apply_navigation(const MapConfig& map, const Eigen::Vector2d& cop,
                                               const CompositeDirective& d, double step = 0.5);

/// Fuses an answer to an issued question; Null leaves the belief as is.
[[nodiscard]] HybridBelief handle_response(const HybridBelief& belief, const SemanticStatement& question, Answer answer,
                                           const Codebook& codebook, const BeliefSettings& settings = {});

[[nodiscard]] nlohmann::json directive_to_json(const CompositeDirective& d, const MapConfig& map);

} // namespace cnr
