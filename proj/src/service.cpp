#include "cnr/service.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cnr {

namespace {

using nlohmann::json;

json point(const Eigen::Vector2d& p) { return json::array({p.x(), p.y()}); }

} // namespace

Heatmap belief_heatmap(const GaussianMixture4& belief, const MapConfig& map, double cell)
{
    if (!(cell > 0.0)) throw std::invalid_argument("heatmap cell size must be positive");
    Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector2d hi = -lo;
    for (const auto& r : map.rooms) {
        const auto [a, b] = polygon_bounds(r.polygon);
        lo = lo.cwiseMin(a);
        hi = hi.cwiseMax(b);
    }
    Heatmap h;
    h.origin = lo;
    h.cell = cell;
    h.nx = static_cast<std::size_t>(std::ceil((hi.x() - lo.x()) / cell - 1e-9));
    h.ny = static_cast<std::size_t>(std::ceil((hi.y() - lo.y()) / cell - 1e-9));
    h.values.assign(h.nx * h.ny, 0.0);

    // Robber marginals, precomputed once per component.
    struct Marginal {
        double scale;
        Eigen::Vector2d mean;
        Eigen::Matrix2d precision;
    };
    std::vector<Marginal> ms;
    for (const auto& c : belief) {
        const Eigen::Matrix2d s = c.covariance.bottomRightCorner<2, 2>();
        ms.push_back({c.weight / (2.0 * std::numbers::pi * std::sqrt(s.determinant())), c.mean.tail<2>(), s.inverse()});
    }
    double total = 0.0;
    std::size_t inside = 0;
    for (std::size_t iy = 0; iy < h.ny; ++iy)
        for (std::size_t ix = 0; ix < h.nx; ++ix) {
            const Eigen::Vector2d p = lo + cell * Eigen::Vector2d(ix + 0.5, iy + 0.5);
            if (!room_containing(map, p)) continue;
            ++inside;
            double v = 0.0;
            for (const auto& m : ms) {
                const Eigen::Vector2d d = p - m.mean;
                v += m.scale * std::exp(-0.5 * d.dot(m.precision * d));
            }
            h.values[iy * h.nx + ix] = v;
            total += v;
        }
    if (total > 0.0 && std::isfinite(total)) {
        for (double& v : h.values) v /= total;
    } else if (inside > 0) {
        // All mass has drifted off the lattice: show ignorance, not nothing.
        for (std::size_t iy = 0; iy < h.ny; ++iy)
            for (std::size_t ix = 0; ix < h.nx; ++ix)
                if (room_containing(map, lo + cell * Eigen::Vector2d(ix + 0.5, iy + 0.5)))
                    h.values[iy * h.nx + ix] = 1.0 / static_cast<double>(inside);
    }
    return h;
}

json heatmap_to_json(const Heatmap& h)
{
    return {{"origin", point(h.origin)}, {"cell", h.cell}, {"nx", h.nx}, {"ny", h.ny}, {"values", h.values}};
}

const char* to_string(SessionStatus s)
{
    switch (s) {
    case SessionStatus::Running: return "running";
    case SessionStatus::Paused: return "paused";
    case SessionStatus::Captured: return "captured";
    case SessionStatus::Expired: return "expired";
    }
    return "";
}

SessionOptions session_options_from_json(const json& j)
{
    SessionOptions o;
    if (!j.is_object()) throw std::invalid_argument("session options must be a JSON object");
    if (j.contains("episode")) o.episode = episode_config_from_json(j.at("episode"));
    o.heatmap_cell = j.value("heatmap_cell", o.heatmap_cell);
    o.show_robber = j.value("show_robber", o.show_robber);
    o.tick_period = std::chrono::milliseconds(j.value("tick_period_ms", static_cast<long>(o.tick_period.count())));
    if (!(o.heatmap_cell > 0.0)) throw std::invalid_argument("heatmap_cell must be positive");
    if (o.tick_period.count() < 0) throw std::invalid_argument("tick_period_ms must be non-negative");
    return o;
}

// ---------------------------------------------------------------- session

Session::Session(std::string id, std::shared_ptr<const SolvedMap> map, SessionOptions options)
    : id_(std::move(id)), map_(std::move(map)), options_(std::move(options)),
      runner_(map_->map, map_->codebook, map_->policies, options_.episode)
{
    if (!(options_.heatmap_cell > 0.0)) throw std::invalid_argument("heatmap_cell must be positive");
    std::lock_guard lock(run_mutex_);
    publish_locked();
}

SessionStatus Session::status() const
{
    std::lock_guard lock(run_mutex_);
    switch (runner_.status()) {
    case RunStatus::Captured: return SessionStatus::Captured;
    case RunStatus::Expired: return SessionStatus::Expired;
    case RunStatus::Running: break;
    }
    return paused_ ? SessionStatus::Paused : SessionStatus::Running;
}

void Session::pause()
{
    std::lock_guard lock(run_mutex_);
    if (runner_.finished()) return;
    paused_ = true;
    set_published_status(SessionStatus::Paused);
}

void Session::resume()
{
    std::lock_guard lock(run_mutex_);
    if (runner_.finished()) throw InputRejected("episode has finished");
    paused_ = false;
    last_tick_ = std::chrono::steady_clock::now();
    set_published_status(SessionStatus::Running);
}

void Session::set_published_status(SessionStatus s)
{
    std::lock_guard lock(publish_mutex_);
    messages_.back()["status"] = to_string(s);
}

void Session::tick()
{
    std::lock_guard lock(run_mutex_);
    if (runner_.finished()) throw InputRejected("episode has finished");
    (void)runner_.tick();
    last_tick_ = std::chrono::steady_clock::now();
    publish_locked();
}

bool Session::tick_if_due(std::chrono::steady_clock::time_point now)
{
    std::lock_guard lock(run_mutex_);
    if (paused_ || runner_.finished() || now - last_tick_ < options_.tick_period) return false;
    (void)runner_.tick();
    last_tick_ = now;
    publish_locked();
    return true;
}

void Session::submit_answer(int question_id, Answer answer)
{
    std::lock_guard lock(run_mutex_);
    runner_.submit_answer(question_id, answer);
}

void Session::submit_statement(const SemanticStatement& statement)
{
    std::lock_guard lock(run_mutex_);
    runner_.submit_statement(statement);
}

void Session::publish_locked()
{
    // Built from the runner under run_mutex_, so a message never mixes
    // states from either side of a tick.
    SessionStatus status = paused_ ? SessionStatus::Paused : SessionStatus::Running;
    if (runner_.status() == RunStatus::Captured) status = SessionStatus::Captured;
    if (runner_.status() == RunStatus::Expired) status = SessionStatus::Expired;

    json questions = json::array();
    for (const auto& q : runner_.pending_questions())
        questions.push_back({{"id", q.id},
                             {"text", map_->codebook.question_text(q.statement)},
                             {"statement", statement_to_json(q.statement)},
                             {"layer", q.layer == QuestionLayer::Room ? "room" : "object"}});
    const HybridBelief& b = runner_.belief();
    json rooms = json::object();
    for (std::size_t r = 0; r < map_->map.rooms.size(); ++r)
        rooms[map_->map.rooms[r].id] = b.rooms(static_cast<Eigen::Index>(r));
    json msg{{"type", "state"},
             {"version", kWireVersion},
             {"session", id_},
             {"tick", runner_.tick_index()},
             {"status", to_string(status)},
             {"condition", to_string(runner_.config().condition)},
             {"cop", point(runner_.cop())},
             {"robber", options_.show_robber || status == SessionStatus::Captured ? point(runner_.robber()) : json(nullptr)},
             {"rooms", rooms},
             {"heatmap", heatmap_to_json(belief_heatmap(b.continuous, map_->map, options_.heatmap_cell))},
             {"questions", questions}};
    if (!runner_.log().steps.empty()) {
        const StepRecord& last = runner_.log().steps.back();
        msg["directive"] = last.directive;
        msg["notes"] = last.notes;
    }

    std::lock_guard lock(publish_mutex_);
    messages_.push_back(std::move(msg));
    ended_ = runner_.finished();
    published_.notify_all();
}

json Session::snapshot() const
{
    std::lock_guard lock(publish_mutex_);
    return messages_.back();
}

std::vector<json> Session::messages(std::size_t from) const
{
    std::lock_guard lock(publish_mutex_);
    if (from >= messages_.size()) return {};
    return {messages_.begin() + static_cast<std::ptrdiff_t>(from), messages_.end()};
}

std::vector<json> Session::wait_messages(std::size_t from, std::chrono::milliseconds timeout) const
{
    std::unique_lock lock(publish_mutex_);
    published_.wait_for(lock, timeout, [&] { return messages_.size() > from || ended_ || closed_; });
    if (from >= messages_.size()) return {};
    return {messages_.begin() + static_cast<std::ptrdiff_t>(from), messages_.end()};
}

bool Session::done() const
{
    std::lock_guard lock(publish_mutex_);
    return ended_ || closed_;
}

void Session::close()
{
    {
        std::lock_guard lock(run_mutex_);
        paused_ = true;
    }
    std::lock_guard lock(publish_mutex_);
    closed_ = true;
    published_.notify_all();
}

std::string Session::log_jsonl() const
{
    std::lock_guard lock(run_mutex_);
    return to_jsonl(runner_.log());
}

// ---------------------------------------------------------------- manager

SessionManager::~SessionManager()
{
    stop_clock();
    std::lock_guard lock(mutex_);
    for (auto& [id, s] : sessions_) s->close();
}

void SessionManager::add_map(std::shared_ptr<const SolvedMap> map)
{
    if (!map) throw std::invalid_argument("add_map: null map");
    const auto& ids = map->policies.room_model.room_ids;
    if (ids.size() != map->map.rooms.size()) throw std::invalid_argument("policies were solved for a different map");
    for (std::size_t r = 0; r < ids.size(); ++r)
        if (ids[r] != map->map.rooms[r].id) throw std::invalid_argument("policies were solved for a different map");
    if (map->policies.room_policy.empty()) throw std::invalid_argument("map '" + map->map.name + "' has no room-level policy");
    std::lock_guard lock(mutex_);
    maps_[map->map.name] = std::move(map);
}

std::vector<std::string> SessionManager::map_names() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, m] : maps_) out.push_back(name);
    return out;
}

std::string SessionManager::create_session(const std::string& map, const SessionOptions& options)
{
    std::shared_ptr<const SolvedMap> m;
    std::string id;
    {
        std::lock_guard lock(mutex_);
        const auto it = maps_.find(map);
        if (it == maps_.end()) {
            std::string known;
            for (const auto& [name, x] : maps_) known += (known.empty() ? "" : ", ") + name;
            throw std::invalid_argument("unknown map '" + map + "' (known: " + (known.empty() ? "none" : known) + ")");
        }
        m = it->second;
        id = "s" + std::to_string(next_id_++);
    }
    auto s = std::make_shared<Session>(id, std::move(m), options);
    std::lock_guard lock(mutex_);
    sessions_[id] = std::move(s);
    return id;
}

std::shared_ptr<Session> SessionManager::session(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
    return it->second;
}

std::vector<std::string> SessionManager::session_ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

void SessionManager::close_session(const std::string& id)
{
    std::shared_ptr<Session> s;
    {
        std::lock_guard lock(mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
        s = it->second;
        sessions_.erase(it);
    }
    s->close();
}

void SessionManager::advance_due(std::chrono::steady_clock::time_point now)
{
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mutex_);
        for (const auto& [id, s] : sessions_) all.push_back(s);
    }
    for (const auto& s : all) (void)s->tick_if_due(now);
}

void SessionManager::start_clock(std::chrono::milliseconds resolution)
{
    std::lock_guard lock(clock_mutex_);
    if (clock_.joinable()) return;
    clock_stop_ = false;
    clock_ = std::thread([this, resolution] {
        std::unique_lock lock(clock_mutex_);
        while (!clock_stop_) {
            lock.unlock();
            advance_due(std::chrono::steady_clock::now());
            lock.lock();
            clock_cv_.wait_for(lock, resolution, [&] { return clock_stop_; });
        }
    });
}

void SessionManager::stop_clock()
{
    {
        std::lock_guard lock(clock_mutex_);
        clock_stop_ = true;
    }
    clock_cv_.notify_all();
    if (clock_.joinable()) clock_.join();
}

} // namespace cnr
