#pragma once

// The cop's hybrid belief: a Gaussian mixture over [cop x, cop y, robber x,
// robber y] plus the per-room distribution derived from it.

#include "cnr/fusion.hpp"
#include "cnr/gaussian_mixture.hpp"
#include "cnr/map_config.hpp"
#include "cnr/semantic.hpp"

#include <json.hpp>

#include <string>

namespace cnr {

inline constexpr Eigen::Index kRobberOffset = 2;
/// Variance kept on the cop dimensions once the pose is known (m^2).
inline constexpr double kCopPoseVariance = 1e-4;

struct HybridBelief {
    GaussianMixture4 continuous;
    Eigen::VectorXd rooms; ///< mass per map room, sums to one
    int step = 0;
};

/// Mass per room from a hard assignment of each mixand's robber mean; means
/// outside every room go to the nearest room.
[[nodiscard]] Eigen::VectorXd discretize_belief(const GaussianMixture4& belief, const MapConfig& map);

/// Room index each mixand is assigned to.
[[nodiscard]] std::vector<std::size_t> assign_mixands(const GaussianMixture4& belief, const MapConfig& map);

/// Mixands assigned to the room, renormalized; a broad single Gaussian over
/// the room when none are.
[[nodiscard]] GaussianMixture4 condition_to_room(const GaussianMixture4& belief, const MapConfig& map, std::size_t room);

/// Roughly uniform mixture over one room for the robber, with the cop at a
/// known pose. Tiles have side at most `cell` metres.
[[nodiscard]] GaussianMixture4 room_prior(const MapConfig& map, std::size_t room, const Eigen::Vector2d& cop,
                                          double cell = 3.0);
/// Belief dispersed equally between rooms.
[[nodiscard]] HybridBelief initial_belief(const MapConfig& map, const Eigen::Vector2d& cop, double cell = 3.0);

/// Conditions every mixand on an exact cop position and resets the cop block
/// to a tight Gaussian there.
[[nodiscard]] GaussianMixture4 anchor_cop(const GaussianMixture4& belief, const Eigen::Vector2d& cop,
                                          double variance = kCopPoseVariance);

[[nodiscard]] HybridBelief make_hybrid(GaussianMixture4 continuous, const MapConfig& map, int step);

enum class EventSource { Viewcone, PullAnswer, PushStatement };
enum class Answer { Yes, No, Null };

[[nodiscard]] const char* to_string(EventSource s);
[[nodiscard]] const char* to_string(Answer a);
[[nodiscard]] EventSource event_source_from_string(const std::string& s);
[[nodiscard]] Answer answer_from_string(const std::string& s);

struct ObservationEvent {
    EventSource source = EventSource::Viewcone;
    int step = 0;
    DetectionOutcome detection = DetectionOutcome::NoDetection; ///< viewcone only
    Eigen::Vector2d cop = Eigen::Vector2d::Zero();              ///< viewcone only
    SemanticStatement statement;                                ///< question asked, or pushed statement
    Answer answer = Answer::Null;                               ///< pull answers only
    int question_id = -1;
};

[[nodiscard]] nlohmann::json event_to_json(const ObservationEvent& e);
[[nodiscard]] ObservationEvent event_from_json(const nlohmann::json& j);

struct EventOutcome {
    HybridBelief belief;
    bool fused = false;
    std::string note; ///< why the event was skipped, rejected or degenerate
};

struct BeliefSettings {
    double viewcone_half_width = 0.5;
    double viewcone_steepness = kViewconeSteepness;
    FusionOptions fusion = FusionOptions::runtime(20);
};

/// Fuses one event. Null answers leave the belief alone; unknown anchors are
/// rejected and degenerate updates keep the prior, both with a note.
[[nodiscard]] EventOutcome apply_event(const HybridBelief& belief, const ObservationEvent& event,
                                       const Codebook& codebook, const BeliefSettings& settings = {});

/// Fuses "the statement holds" (or its negation when `holds` is false).
[[nodiscard]] GaussianMixture4 fuse_statement(const GaussianMixture4& belief, const Codebook& codebook,
                                              const SemanticStatement& s, bool holds, const FusionOptions& opts);

} // namespace cnr
