#pragma once

// Cops and robbers world: robber motion, a simulated human sensor, the
// per-tick episode loop and batch experiments over input conditions.

#include "cnr/belief.hpp"
#include "cnr/hierarchy.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cnr {

enum class Condition { NoHuman, PushOnly, PullOnly, Both };

[[nodiscard]] const char* to_string(Condition c);
[[nodiscard]] Condition condition_from_string(const std::string& s);
[[nodiscard]] inline bool allows_push(Condition c) { return c == Condition::PushOnly || c == Condition::Both; }
[[nodiscard]] inline bool allows_pull(Condition c) { return c == Condition::PullOnly || c == Condition::Both; }
inline constexpr Condition kAllConditions[] = {Condition::NoHuman, Condition::PushOnly, Condition::PullOnly,
                                               Condition::Both};

// ---------------------------------------------------------------- robber

enum class RobberMode { RandomWalk, Scripted };

struct RobberModel {
    RobberMode mode = RobberMode::RandomWalk;
    double variance = 0.05; ///< per-axis step variance (m^2)
    std::vector<Eigen::Vector2d> waypoints;
    double speed = 0.3; ///< scripted metres per step
    int max_tries = 32; ///< random-walk proposals before staying put
};

struct RobberState {
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    std::size_t waypoint = 0;
};

/// Throws std::invalid_argument for waypoints outside the map or bad numbers.
void validate_robber_model(const MapConfig& map, const RobberModel& model);

/// Random walk: Gaussian proposals, redrawn while they would cut through a
/// wall. Scripted: straight toward the next waypoint, then hold at the last.
[[nodiscard]] RobberState robber_step(const RobberState& state, const MapConfig& map, const RobberModel& model,
                                      std::mt19937_64& rng);

// ---------------------------------------------------------------- human

enum class QuestionChoice { Head, Uniform };

struct SimulatedHuman {
    double answer_prob = 0.8;          ///< chance of answering in a tick with questions
    double push_rate = 0.25;           ///< chance of volunteering a statement per tick
    double room_statement_share = 2.0 / 3.0; ///< rooms vs objects, when a camera sees the room
    double negated_share = 0.5;        ///< object statements phrased as "is not"
    QuestionChoice choice = QuestionChoice::Uniform;
};

void validate_human(const SimulatedHuman& h);

/// Null with probability 1 - answer_prob, else Yes with the statement's
/// likelihood at the robber's true position.
[[nodiscard]] Answer simulated_answer(const SimulatedHuman& human, const Codebook& codebook,
                                      const SemanticStatement& question, const Eigen::Vector2d& robber,
                                      std::mt19937_64& rng);

/// A truthful volunteered statement, or nothing this tick.
[[nodiscard]] std::optional<SemanticStatement> simulated_push(const SimulatedHuman& human, const Codebook& codebook,
                                                              const Eigen::Vector2d& robber, std::mt19937_64& rng);

// ---------------------------------------------------------------- episode

struct EpisodeConfig {
    Condition condition = Condition::Both;
    std::uint64_t seed = 0;
    std::optional<std::string> cop_room;    ///< cop starts at the room centroid; default the map's cop start
    std::optional<std::string> robber_room; ///< default: a spawn room drawn from the seed
    std::optional<Eigen::Vector2d> robber_start;
    int max_steps = 200;
    double capture_radius = 1.0;
    double validation_prob = 0.95;
    double cop_step = 0.5;
    double belief_robber_noise = 0.05; ///< random-walk variance the filter assumes
    bool simulated_human = true; ///< false: answers and statements come from outside
    SimulatedHuman human;
    RobberModel robber;
    HierarchyOptions hierarchy;
    BeliefSettings belief;
};

[[nodiscard]] nlohmann::json episode_config_to_json(const EpisodeConfig& c);
/// Missing fields keep their defaults.
[[nodiscard]] EpisodeConfig episode_config_from_json(const nlohmann::json& j);

struct IssuedQuestion {
    int id = 0;
    SemanticStatement statement;
    QuestionLayer layer = QuestionLayer::Room;
};

enum class RunStatus { Running, Captured, Expired };
[[nodiscard]] const char* to_string(RunStatus s);

struct StepRecord {
    int step = 0;
    Eigen::Vector2d cop_before = Eigen::Vector2d::Zero();
    Eigen::Vector2d cop = Eigen::Vector2d::Zero(); ///< after the move
    Eigen::Vector2d robber = Eigen::Vector2d::Zero();
    std::vector<ObservationEvent> fused; ///< events fused this tick, in order
    std::vector<std::string> notes;
    HybridBelief belief; ///< after fusion, before the cop moves
    nlohmann::json directive;
    DetectionOutcome detection = DetectionOutcome::NoDetection;
    std::vector<IssuedQuestion> questions;
    bool in_range = false;
    bool captured = false;
};

struct EpisodeLog {
    std::string map;
    EpisodeConfig config;
    HybridBelief initial;
    Eigen::Vector2d robber_start = Eigen::Vector2d::Zero();
    std::vector<StepRecord> steps;
    std::optional<int> catch_step;
    std::vector<ObservationEvent> unfused; ///< accepted but the episode ended first
    int pull_events = 0;
    int push_events = 0;
};

/// One JSON document per line: a header, one record per tick, a summary.
[[nodiscard]] std::string to_jsonl(const EpisodeLog& log);

class InputRejected : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tick-by-tick episode. With a simulated human the runner produces its own
/// answers and statements; otherwise they arrive through submit_*.
class EpisodeRunner {
public:
    /// Throws std::invalid_argument for unknown rooms, bad configs or a
    /// bundle that does not match the map.
    EpisodeRunner(const MapConfig& map, const Codebook& codebook, const PolicyBundle& policies, EpisodeConfig config);

    [[nodiscard]] RunStatus status() const { return status_; }
    [[nodiscard]] bool finished() const { return status_ != RunStatus::Running; }
    [[nodiscard]] int tick_index() const { return step_; }
    [[nodiscard]] const HybridBelief& belief() const { return belief_; }
    [[nodiscard]] const Eigen::Vector2d& cop() const { return cop_; }
    [[nodiscard]] const Eigen::Vector2d& robber() const { return robber_.position; }
    [[nodiscard]] const std::vector<IssuedQuestion>& pending_questions() const { return pending_; }
    [[nodiscard]] const EpisodeLog& log() const { return log_; }
    [[nodiscard]] const EpisodeConfig& config() const { return config_; }

    /// Advances one tick; throws std::logic_error once finished.
    const StepRecord& tick();

    /// Throws InputRejected for unknown, expired or already answered ids.
    void submit_answer(int question_id, Answer answer);
    /// Throws InputRejected when the condition forbids pushes or the anchor
    /// is unknown.
    void submit_statement(const SemanticStatement& statement);

private:
    const MapConfig& map_;
    const Codebook& codebook_;
    const PolicyBundle& policies_;
    EpisodeConfig config_;

    std::mt19937_64 robber_rng_, human_rng_, sensor_rng_, capture_rng_;
    HybridBelief belief_;
    Eigen::Vector2d cop_;
    RobberState robber_;
    int step_ = 0;
    int next_question_id_ = 0;
    RunStatus status_ = RunStatus::Running;
    std::vector<IssuedQuestion> pending_;
    std::vector<int> answered_;
    std::vector<ObservationEvent> queued_viewcone_, queued_answers_, queued_pushes_;
    EpisodeLog log_;
};

[[nodiscard]] EpisodeLog run_episode(const MapConfig& map, const Codebook& codebook, const PolicyBundle& policies,
                                     const EpisodeConfig& config);

/// Largest absolute difference between the recorded belief snapshots and
/// those rebuilt by re-fusing the recorded events from the log text.
[[nodiscard]] double replay_log(const std::string& jsonl, const MapConfig& map, const Codebook& codebook);

// ---------------------------------------------------------------- batch

struct ConditionSummary {
    Condition condition = Condition::NoHuman;
    std::vector<int> steps; ///< catch step, or max_steps when never caught, per run
    int captured = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

struct BatchSummary {
    std::vector<ConditionSummary> rows;
    [[nodiscard]] const ConditionSummary& at(Condition c) const;
};

/// Linear-interpolated quantile of a non-empty sample.
[[nodiscard]] double quantile(std::vector<double> values, double q);

/// Runs seed base_seed + i for run i under every condition, so conditions
/// are compared on the same robber starts.
[[nodiscard]] BatchSummary run_batch(const MapConfig& map, const Codebook& codebook, const PolicyBundle& policies,
                                     const std::vector<Condition>& conditions, int runs_per_condition,
                                     std::uint64_t base_seed, const EpisodeConfig& base = {});

[[nodiscard]] nlohmann::json batch_to_json(const BatchSummary& s);

} // namespace cnr
