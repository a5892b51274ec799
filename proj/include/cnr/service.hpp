#pragma once

// Live sessions over the episode runner: snapshots for display, human input
// from outside, pause/resume and a wall-clock tick. The HTTP front end lives
// in http_server.hpp.

#include "cnr/sim.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cnr {

inline constexpr int kWireVersion = 1;

/// A map with everything a session needs to run on it.
struct SolvedMap {
    MapConfig map;
    Codebook codebook;
    PolicyBundle policies;

    SolvedMap(MapConfig m, PolicyBundle p) : map(std::move(m)), codebook(map), policies(std::move(p)) {}
};

/// Robber-position density on a lattice over the map's bounding box, cells
/// outside every room zeroed, normalized to sum to one.
struct Heatmap {
    Eigen::Vector2d origin = Eigen::Vector2d::Zero(); ///< lower-left corner of cell (0, 0)
    double cell = 0.1;
    std::size_t nx = 0, ny = 0;
    std::vector<double> values; ///< row-major, y rows from the bottom
};

[[nodiscard]] Heatmap belief_heatmap(const GaussianMixture4& belief, const MapConfig& map, double cell = 0.1);
[[nodiscard]] nlohmann::json heatmap_to_json(const Heatmap& h);

enum class SessionStatus { Running, Paused, Captured, Expired };
[[nodiscard]] const char* to_string(SessionStatus s);

struct SessionOptions {
    EpisodeConfig episode;
    double heatmap_cell = 0.1;
    bool show_robber = false;
    std::chrono::milliseconds tick_period{1000};
};

/// Throws std::invalid_argument on bad values; missing fields keep defaults.
[[nodiscard]] SessionOptions session_options_from_json(const nlohmann::json& j);

class UnknownSession : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class Session {
public:
    Session(std::string id, std::shared_ptr<const SolvedMap> map, SessionOptions options);

    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] SessionStatus status() const;
    [[nodiscard]] const SessionOptions& options() const { return options_; }

    void pause();
    /// Throws InputRejected once the episode has ended.
    void resume();
    /// Advances one tick whether paused or not; throws InputRejected once
    /// the episode has ended.
    void tick();
    /// Ticks when running and the period has elapsed since the last tick.
    bool tick_if_due(std::chrono::steady_clock::time_point now);

    void submit_answer(int question_id, Answer answer);
    void submit_statement(const SemanticStatement& statement);

    /// Latest published state message; pause and resume update its status
    /// in place.
    [[nodiscard]] nlohmann::json snapshot() const;
    /// State messages from index `from` on; one per tick, starting at tick 0.
    [[nodiscard]] std::vector<nlohmann::json> messages(std::size_t from) const;
    /// Blocks until a message past `from` exists, the session ends or closes,
    /// or the timeout passes. Returns the messages from `from` on.
    [[nodiscard]] std::vector<nlohmann::json> wait_messages(std::size_t from, std::chrono::milliseconds timeout) const;
    /// No further messages will be published.
    [[nodiscard]] bool done() const;
    void close();

    [[nodiscard]] std::string log_jsonl() const;

private:
    void publish_locked();
    void set_published_status(SessionStatus s);

    std::string id_;
    std::shared_ptr<const SolvedMap> map_;
    SessionOptions options_;

    mutable std::mutex run_mutex_; // runner, status and inputs
    EpisodeRunner runner_;
    bool paused_ = true;
    std::chrono::steady_clock::time_point last_tick_;

    mutable std::mutex publish_mutex_; // published messages only
    mutable std::condition_variable published_;
    std::vector<nlohmann::json> messages_;
    bool closed_ = false;
    bool ended_ = false;
};

class SessionManager {
public:
    SessionManager() = default;
    ~SessionManager();
    SessionManager(const SessionManager&) = delete;
    SessionManager& operator=(const SessionManager&) = delete;

    /// Registers a solved map under its name; throws std::invalid_argument
    /// when the policies do not belong to the map.
    void add_map(std::shared_ptr<const SolvedMap> map);
    [[nodiscard]] std::vector<std::string> map_names() const;

    /// Starts paused at tick 0. Throws std::invalid_argument for an unknown
    /// map or a bad configuration.
    std::string create_session(const std::string& map, const SessionOptions& options = {});
    /// Throws UnknownSession.
    [[nodiscard]] std::shared_ptr<Session> session(const std::string& id) const;
    [[nodiscard]] std::vector<std::string> session_ids() const;
    void close_session(const std::string& id);

    /// One pass of the live clock: ticks every running session that is due.
    void advance_due(std::chrono::steady_clock::time_point now);
    /// Background thread calling advance_due every `resolution`.
    void start_clock(std::chrono::milliseconds resolution = std::chrono::milliseconds(10));
    void stop_clock();

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const SolvedMap>> maps_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    int next_id_ = 1;

    std::mutex clock_mutex_;
    std::condition_variable clock_cv_;
    bool clock_stop_ = false;
    std::thread clock_;
};

} // namespace cnr
