#include "cnr/sim.hpp"

#include "cnr/mixture_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cnr {

namespace {

using nlohmann::json;

json point(const Eigen::Vector2d& p) { return json::array({p.x(), p.y()}); }
Eigen::Vector2d point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

Eigen::Vector2d sample_in_room(const MapConfig& map, std::size_t room, std::mt19937_64& rng)
{
    const auto& poly = map.rooms[room].polygon;
    const auto [lo, hi] = polygon_bounds(poly);
    for (int i = 0; i < 10000; ++i) {
        const Eigen::Vector2d p(lo.x() + unit(rng) * (hi.x() - lo.x()), lo.y() + unit(rng) * (hi.y() - lo.y()));
        if (polygon_contains(poly, p) && boundary_distance(poly, p) > 0.1) return p;
    }
    return polygon_centroid(poly);
}

// The filter's motion model: the robber diffuses, the cop is shifted by its
// known move and re-anchored. Walls stop a real walker, so a component's
// robber spread is capped at half the extent of the room holding its mean;
// otherwise long searches end with room-sized blobs that no sensor thins out.
GaussianMixture4 diffuse(const GaussianMixture4& b, const MapConfig& map, double noise)
{
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q(2, 2) = q(3, 3) = noise;
    GaussianMixture4 out = predict<double, 4>(b, Eigen::Matrix4d::Identity(), Eigen::Vector4d::Zero(), q);
    std::vector<GaussianComponent<double, 4>> comps(out.begin(), out.end());
    for (auto& c : comps) {
        const auto [lo, hi] = polygon_bounds(map.rooms[nearest_room(map, c.mean.tail<2>())].polygon);
        const Eigen::Vector2d cap = (0.5 * (hi - lo)).array().square();
        Eigen::Vector4d s = Eigen::Vector4d::Ones();
        for (int a = 0; a < 2; ++a)
            if (c.covariance(2 + a, 2 + a) > cap(a)) s(2 + a) = std::sqrt(cap(a) / c.covariance(2 + a, 2 + a));
        if ((s.array() < 1.0).any()) c.covariance = s.asDiagonal() * c.covariance * s.asDiagonal();
    }
    return GaussianMixture4(std::move(comps));
}

GaussianMixture4 shift_cop(const GaussianMixture4& b, const Eigen::Vector2d& from, const Eigen::Vector2d& to)
{
    Eigen::Vector4d delta = Eigen::Vector4d::Zero();
    delta.head<2>() = to - from;
    return anchor_cop(predict<double, 4>(b, Eigen::Matrix4d::Identity(), delta, Eigen::Matrix4d::Zero()), to);
}

json belief_json(const HybridBelief& b)
{
    return {{"continuous", mixture_to_json(b.continuous)},
            {"rooms", std::vector<double>(b.rooms.data(), b.rooms.data() + b.rooms.size())}};
}

json question_json(const IssuedQuestion& q)
{
    return {{"id", q.id},
            {"statement", statement_to_json(q.statement)},
            {"layer", q.layer == QuestionLayer::Room ? "room" : "object"}};
}

double max_difference(const GaussianMixture4& a, const GaussianMixture4& b)
{
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i].weight - b[i].weight));
        d = std::max(d, (a[i].mean - b[i].mean).cwiseAbs().maxCoeff());
        d = std::max(d, (a[i].covariance - b[i].covariance).cwiseAbs().maxCoeff());
    }
    return d;
}

} // namespace

const char* to_string(Condition c)
{
    switch (c) {
    case Condition::NoHuman: return "no-human";
    case Condition::PushOnly: return "push-only";
    case Condition::PullOnly: return "pull-only";
    case Condition::Both: return "both";
    }
    return "";
}

Condition condition_from_string(const std::string& s)
{
    for (Condition c : kAllConditions)
        if (s == to_string(c)) return c;
    throw std::invalid_argument("unknown condition '" + s + "' (expected no-human, push-only, pull-only or both)");
}

const char* to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Captured: return "captured";
    case RunStatus::Expired: return "expired";
    }
    return "";
}

// ---------------------------------------------------------------- robber

void validate_robber_model(const MapConfig& map, const RobberModel& model)
{
    if (!(model.variance >= 0.0)) throw std::invalid_argument("robber step variance must be non-negative");
    if (model.mode == RobberMode::Scripted) {
        if (!(model.speed > 0.0)) throw std::invalid_argument("scripted robber speed must be positive");
        for (const auto& w : model.waypoints)
            if (!room_containing(map, w))
                throw std::invalid_argument("waypoint (" + std::to_string(w.x()) + ", " + std::to_string(w.y()) +
                                            ") is outside the map");
    }
}

RobberState robber_step(const RobberState& state, const MapConfig& map, const RobberModel& model, std::mt19937_64& rng)
{
    RobberState next = state;
    if (model.mode == RobberMode::Scripted) {
        if (state.waypoint >= model.waypoints.size()) return next;
        const Eigen::Vector2d target = model.waypoints[state.waypoint];
        const Eigen::Vector2d d = target - state.position;
        Eigen::Vector2d to = target;
        if (d.norm() > model.speed) to = state.position + model.speed * d.normalized();
        else ++next.waypoint;
        next.position = clip_move(map, state.position, to);
        return next;
    }
    if (model.variance <= 0.0) return next;
    std::normal_distribution<double> n(0.0, std::sqrt(model.variance));
    for (int i = 0; i < model.max_tries; ++i) {
        const Eigen::Vector2d to = state.position + Eigen::Vector2d(n(rng), n(rng));
        if (move_is_legal(map, state.position, to)) {
            next.position = to;
            return next;
        }
    }
    return next;
}

// ---------------------------------------------------------------- human

void validate_human(const SimulatedHuman& h)
{
    if (!in_unit(h.answer_prob) || !in_unit(h.push_rate) || !in_unit(h.room_statement_share) ||
        !in_unit(h.negated_share))
        throw std::invalid_argument("simulated human probabilities must lie in [0, 1]");
}

Answer simulated_answer(const SimulatedHuman& human, const Codebook& codebook, const SemanticStatement& question,
                        const Eigen::Vector2d& robber, std::mt19937_64& rng)
{
    if (unit(rng) >= human.answer_prob) return Answer::Null;
    return unit(rng) < codebook.likelihood(question, robber) ? Answer::Yes : Answer::No;
}

std::optional<SemanticStatement> simulated_push(const SimulatedHuman& human, const Codebook& codebook,
                                                const Eigen::Vector2d& robber, std::mt19937_64& rng)
{
    if (unit(rng) >= human.push_rate) return std::nullopt;
    const MapConfig& map = codebook.map();
    const std::size_t room = nearest_room(map, robber);
    const auto objects = map.objects_in(room);
    const bool camera = map.rooms[room].camera;
    const double u = unit(rng);
    if (camera && (objects.empty() || u < human.room_statement_share))
        return SemanticStatement{Polarity::Is, map.rooms[room].id, Relation::Inside};
    if (objects.empty()) return std::nullopt;

    // Describe the robber against one object, sampling the relation the way a
    // calibrated observer would.
    const std::string& anchor = map.objects[objects[pick(rng, objects.size())]].id;
    constexpr Relation rels[] = {Relation::Left, Relation::Right, Relation::Front, Relation::Behind};
    double p[4];
    double total = 0.0;
    for (int i = 0; i < 4; ++i) total += p[i] = codebook.likelihood({Polarity::Is, anchor, rels[i]}, robber);
    double r = unit(rng) * total;
    int chosen = 0;
    while (chosen < 3 && r >= p[chosen]) r -= p[chosen++];
    if (unit(rng) < human.negated_share) {
        int least = chosen == 0 ? 1 : 0;
        for (int i = 0; i < 4; ++i)
            if (i != chosen && p[i] < p[least]) least = i;
        return SemanticStatement{Polarity::IsNot, anchor, rels[least]};
    }
    return SemanticStatement{Polarity::Is, anchor, rels[chosen]};
}

// ---------------------------------------------------------------- config

json episode_config_to_json(const EpisodeConfig& c)
{
    json j{{"condition", to_string(c.condition)},
           {"seed", c.seed},
           {"max_steps", c.max_steps},
           {"capture_radius", c.capture_radius},
           {"validation_prob", c.validation_prob},
           {"cop_step", c.cop_step},
           {"belief_robber_noise", c.belief_robber_noise},
           {"simulated_human", c.simulated_human}};
    j["cop_room"] = c.cop_room ? json(*c.cop_room) : json(nullptr);
    j["robber_room"] = c.robber_room ? json(*c.robber_room) : json(nullptr);
    j["robber_start"] = c.robber_start ? point(*c.robber_start) : json(nullptr);
    j["human"] = {{"answer_prob", c.human.answer_prob},
                  {"push_rate", c.human.push_rate},
                  {"room_statement_share", c.human.room_statement_share},
                  {"negated_share", c.human.negated_share},
                  {"choice", c.human.choice == QuestionChoice::Head ? "head" : "uniform"}};
    json waypoints = json::array();
    for (const auto& w : c.robber.waypoints) waypoints.push_back(point(w));
    j["robber"] = {{"mode", c.robber.mode == RobberMode::Scripted ? "scripted" : "random-walk"},
                   {"variance", c.robber.variance},
                   {"waypoints", waypoints},
                   {"speed", c.robber.speed},
                   {"max_tries", c.robber.max_tries}};
    j["hierarchy"] = {{"questions", c.hierarchy.questions},
                      {"interleave", to_string(c.hierarchy.interleave)},
                      {"travel_cost", c.hierarchy.travel_cost},
                      {"step", c.hierarchy.step}};
    j["belief"] = {{"viewcone_half_width", c.belief.viewcone_half_width},
                   {"viewcone_steepness", c.belief.viewcone_steepness},
                   {"max_components", c.belief.fusion.max_components}};
    return j;
}

EpisodeConfig episode_config_from_json(const json& j)
{
    EpisodeConfig c;
    auto get = [&](const json& obj, const char* key, auto& field) {
        if (obj.contains(key) && !obj.at(key).is_null()) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("condition")) c.condition = condition_from_string(j.at("condition").get<std::string>());
    get(j, "seed", c.seed);
    get(j, "max_steps", c.max_steps);
    get(j, "capture_radius", c.capture_radius);
    get(j, "validation_prob", c.validation_prob);
    get(j, "cop_step", c.cop_step);
    get(j, "belief_robber_noise", c.belief_robber_noise);
    get(j, "simulated_human", c.simulated_human);
    if (j.contains("cop_room") && !j["cop_room"].is_null()) c.cop_room = j["cop_room"].get<std::string>();
    if (j.contains("robber_room") && !j["robber_room"].is_null()) c.robber_room = j["robber_room"].get<std::string>();
    if (j.contains("robber_start") && !j["robber_start"].is_null()) c.robber_start = point_from(j["robber_start"]);
    if (j.contains("human")) {
        const json& h = j["human"];
        get(h, "answer_prob", c.human.answer_prob);
        get(h, "push_rate", c.human.push_rate);
        get(h, "room_statement_share", c.human.room_statement_share);
        get(h, "negated_share", c.human.negated_share);
        if (h.contains("choice")) {
            const auto s = h["choice"].get<std::string>();
            if (s != "head" && s != "uniform") throw std::invalid_argument("unknown question choice '" + s + "'");
            c.human.choice = s == "head" ? QuestionChoice::Head : QuestionChoice::Uniform;
        }
    }
    if (j.contains("robber")) {
        const json& r = j["robber"];
        if (r.contains("mode")) {
            const auto s = r["mode"].get<std::string>();
            if (s != "scripted" && s != "random-walk") throw std::invalid_argument("unknown robber mode '" + s + "'");
            c.robber.mode = s == "scripted" ? RobberMode::Scripted : RobberMode::RandomWalk;
        }
        get(r, "variance", c.robber.variance);
        get(r, "speed", c.robber.speed);
        get(r, "max_tries", c.robber.max_tries);
        if (r.contains("waypoints"))
            for (const auto& w : r["waypoints"]) c.robber.waypoints.push_back(point_from(w));
    }
    if (j.contains("hierarchy")) {
        const json& h = j["hierarchy"];
        get(h, "questions", c.hierarchy.questions);
        get(h, "travel_cost", c.hierarchy.travel_cost);
        get(h, "step", c.hierarchy.step);
        if (h.contains("interleave")) c.hierarchy.interleave = interleave_from_string(h["interleave"].get<std::string>());
    }
    if (j.contains("belief")) {
        const json& b = j["belief"];
        get(b, "viewcone_half_width", c.belief.viewcone_half_width);
        get(b, "viewcone_steepness", c.belief.viewcone_steepness);
        std::size_t cap = c.belief.fusion.max_components;
        get(b, "max_components", cap);
        c.belief.fusion = FusionOptions::runtime(cap);
    }
    return c;
}

// ---------------------------------------------------------------- runner

EpisodeRunner::EpisodeRunner(const MapConfig& map, const Codebook& codebook, const PolicyBundle& policies,
                             EpisodeConfig config)
    : map_(map), codebook_(codebook), policies_(policies), config_(std::move(config)),
      robber_rng_(stream(config_.seed, 1)), human_rng_(stream(config_.seed, 2)), sensor_rng_(stream(config_.seed, 3)),
      capture_rng_(stream(config_.seed, 4))
{
    if (config_.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    if (!in_unit(config_.validation_prob)) throw std::invalid_argument("validation_prob must lie in [0, 1]");
    if (!(config_.capture_radius > 0.0)) throw std::invalid_argument("capture_radius must be positive");
    validate_human(config_.human);
    validate_robber_model(map_, config_.robber);
    if (policies_.room_model.room_ids.size() != map_.rooms.size())
        throw std::invalid_argument("policies were solved for a different map");
    for (std::size_t r = 0; r < map_.rooms.size(); ++r)
        if (policies_.room_model.room_ids[r] != map_.rooms[r].id)
            throw std::invalid_argument("policies were solved for a different map");

    auto room_of = [&](const std::string& id) {
        const auto r = map_.room_index(id);
        if (!r) throw std::invalid_argument("unknown room '" + id + "'");
        return *r;
    };
    cop_ = config_.cop_room ? polygon_centroid(map_.rooms[room_of(*config_.cop_room)].polygon) : map_.cop_start;

    // The start room is drawn even when unused so the robber's stream does
    // not depend on how the start was given.
    const std::size_t drawn = map_.robber_spawns.empty()
                                  ? pick(robber_rng_, map_.rooms.size())
                                  : room_of(map_.robber_spawns[pick(robber_rng_, map_.robber_spawns.size())]);
    if (config_.robber_start) {
        if (!room_containing(map_, *config_.robber_start))
            throw std::invalid_argument("robber start is outside the map");
        robber_.position = *config_.robber_start;
    } else {
        robber_.position = sample_in_room(map_, config_.robber_room ? room_of(*config_.robber_room) : drawn, robber_rng_);
    }

    belief_ = initial_belief(map_, cop_);
    log_.map = map_.name;
    log_.config = config_;
    log_.initial = belief_;
    log_.robber_start = robber_.position;
}

const StepRecord& EpisodeRunner::tick()
{
    if (finished()) throw std::logic_error("episode already finished");
    StepRecord rec;
    rec.step = ++step_;

    // Predict, then fuse what arrived since the last tick.
    belief_ = make_hybrid(diffuse(belief_.continuous, map_, config_.belief_robber_noise), map_, step_);
    std::stable_sort(queued_answers_.begin(), queued_answers_.end(),
                     [](const auto& a, const auto& b) { return a.question_id < b.question_id; });
    for (auto* queue : {&queued_viewcone_, &queued_answers_, &queued_pushes_}) {
        for (const auto& e : *queue) {
            EventOutcome out = apply_event(belief_, e, codebook_, config_.belief);
            if (out.fused) belief_ = std::move(out.belief);
            if (!out.note.empty()) rec.notes.push_back(std::string(to_string(e.source)) + ": " + out.note);
            rec.fused.push_back(e);
            if (e.source == EventSource::PullAnswer) ++log_.pull_events;
            if (e.source == EventSource::PushStatement) ++log_.push_events;
        }
        queue->clear();
    }
    belief_.step = step_;
    rec.belief = belief_;

    const CompositeDirective d = step_policy(belief_, cop_, map_, policies_, config_.hierarchy);
    rec.directive = directive_to_json(d, map_);
    for (const auto& n : d.notes) rec.notes.push_back("policy: " + n);

    rec.cop_before = cop_;
    const Eigen::Vector2d moved = apply_navigation(map_, cop_, d, config_.cop_step);
    belief_ = make_hybrid(shift_cop(belief_.continuous, cop_, moved), map_, step_);
    cop_ = moved;
    rec.cop = cop_;

    robber_ = robber_step(robber_, map_, config_.robber, robber_rng_);
    rec.robber = robber_.position;

    rec.in_range = (robber_.position - cop_).norm() <= config_.capture_radius;
    if (rec.in_range) rec.captured = unit(capture_rng_) < config_.validation_prob;

    pending_.clear();
    answered_.clear();
    if (rec.captured) {
        status_ = RunStatus::Captured;
        log_.catch_step = step_;
    } else {
        const SoftmaxModel box = build_box_detection_model(config_.belief.viewcone_half_width,
                                                           config_.belief.viewcone_steepness);
        const double p_detect = box.set_probability(box.classes_with_label("Detection"), robber_.position - cop_);
        rec.detection = unit(sensor_rng_) < p_detect ? DetectionOutcome::Detection : DetectionOutcome::NoDetection;
        ObservationEvent v;
        v.source = EventSource::Viewcone;
        v.step = step_;
        v.detection = rec.detection;
        v.cop = cop_;
        queued_viewcone_.push_back(v);

        if (allows_pull(config_.condition))
            for (const auto& q : d.extra_questions) pending_.push_back({next_question_id_++, q.statement, q.layer});
        rec.questions = pending_;
        if (config_.simulated_human) {
            if (!pending_.empty()) {
                const std::size_t i =
                    config_.human.choice == QuestionChoice::Head ? 0 : pick(human_rng_, pending_.size());
                const Answer a = simulated_answer(config_.human, codebook_, pending_[i].statement, robber_.position,
                                                  human_rng_);
                if (a != Answer::Null) submit_answer(pending_[i].id, a);
            }
            if (allows_push(config_.condition))
                if (auto s = simulated_push(config_.human, codebook_, robber_.position, human_rng_))
                    submit_statement(*s);
        }
        if (step_ >= config_.max_steps) status_ = RunStatus::Expired;
    }
    if (finished()) {
        pending_.clear();
        for (auto* queue : {&queued_viewcone_, &queued_answers_, &queued_pushes_})
            log_.unfused.insert(log_.unfused.end(), queue->begin(), queue->end());
    }
    log_.steps.push_back(std::move(rec));
    return log_.steps.back();
}

void EpisodeRunner::submit_answer(int question_id, Answer answer)
{
    if (finished()) throw InputRejected("episode has finished");
    const auto it = std::find_if(pending_.begin(), pending_.end(), [&](const auto& q) { return q.id == question_id; });
    if (it == pending_.end()) throw InputRejected("question " + std::to_string(question_id) + " is unknown or expired");
    if (std::find(answered_.begin(), answered_.end(), question_id) != answered_.end())
        throw InputRejected("question " + std::to_string(question_id) + " was already answered");
    if (answer == Answer::Null) throw InputRejected("an answer must be yes or no");
    answered_.push_back(question_id);
    ObservationEvent e;
    e.source = EventSource::PullAnswer;
    e.step = step_;
    e.statement = it->statement;
    e.answer = answer;
    e.question_id = question_id;
    queued_answers_.push_back(e);
}

void EpisodeRunner::submit_statement(const SemanticStatement& statement)
{
    if (finished()) throw InputRejected("episode has finished");
    if (!allows_push(config_.condition))
        throw InputRejected(std::string("condition ") + to_string(config_.condition) + " does not accept statements");
    if (!codebook_.valid(statement))
        throw InputRejected("statement about '" + statement.anchor + "' is not in the codebook");
    ObservationEvent e;
    e.source = EventSource::PushStatement;
    e.step = step_;
    e.statement = statement;
    queued_pushes_.push_back(e);
}

EpisodeLog run_episode(const MapConfig& map, const Codebook& codebook, const PolicyBundle& policies,
                       const EpisodeConfig& config)
{
    EpisodeRunner runner(map, codebook, policies, config);
    while (!runner.finished()) (void)runner.tick();
    return runner.log();
}

// ---------------------------------------------------------------- log

std::string to_jsonl(const EpisodeLog& log)
{
    std::ostringstream os;
    json header{{"kind", "header"},
                {"version", 1},
                {"map", log.map},
                {"condition", to_string(log.config.condition)},
                {"seed", log.config.seed},
                {"config", episode_config_to_json(log.config)},
                {"robber_start", point(log.robber_start)},
                {"initial_belief", belief_json(log.initial)}};
    os << header.dump() << '\n';
    for (const auto& r : log.steps) {
        json fused = json::array();
        for (const auto& e : r.fused) fused.push_back(event_to_json(e));
        json questions = json::array();
        for (const auto& q : r.questions) questions.push_back(question_json(q));
        json rec{{"kind", "step"},
                 {"step", r.step},
                 {"cop_before", point(r.cop_before)},
                 {"cop", point(r.cop)},
                 {"robber", point(r.robber)},
                 {"fused", fused},
                 {"notes", r.notes},
                 {"belief", belief_json(r.belief)},
                 {"directive", r.directive},
                 {"detection", r.detection == DetectionOutcome::Detection ? "detection" : "no-detection"},
                 {"questions", questions},
                 {"in_range", r.in_range},
                 {"captured", r.captured}};
        os << rec.dump() << '\n';
    }
    json unfused = json::array();
    for (const auto& e : log.unfused) unfused.push_back(event_to_json(e));
    json summary{{"kind", "summary"},
                 {"steps", log.steps.size()},
                 {"catch_step", log.catch_step ? json(*log.catch_step) : json(nullptr)},
                 {"pull_events", log.pull_events},
                 {"push_events", log.push_events},
                 {"unfused", unfused}};
    os << summary.dump() << '\n';
    return os.str();
}

double replay_log(const std::string& jsonl, const MapConfig& map, const Codebook& codebook)
{
    std::istringstream in(jsonl);
    std::string line;
    EpisodeConfig config;
    GaussianMixture4 belief;
    bool have_header = false;
    double worst = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "header") {
            config = episode_config_from_json(j.at("config"));
            belief = mixture_from_json<double, 4>(j.at("initial_belief").at("continuous"));
            have_header = true;
        } else if (kind == "step") {
            if (!have_header) throw std::invalid_argument("log has no header");
            HybridBelief b = make_hybrid(diffuse(belief, map, config.belief_robber_noise), map, j.at("step").get<int>());
            for (const auto& ej : j.at("fused")) {
                EventOutcome out = apply_event(b, event_from_json(ej), codebook, config.belief);
                if (out.fused) b = std::move(out.belief);
            }
            const auto recorded = mixture_from_json<double, 4>(j.at("belief").at("continuous"));
            worst = std::max(worst, max_difference(b.continuous, recorded));
            const auto rooms = j.at("belief").at("rooms").get<std::vector<double>>();
            for (std::size_t r = 0; r < rooms.size() && r < static_cast<std::size_t>(b.rooms.size()); ++r)
                worst = std::max(worst, std::abs(rooms[r] - b.rooms(static_cast<Eigen::Index>(r))));
            belief = shift_cop(b.continuous, point_from(j.at("cop_before")), point_from(j.at("cop")));
        }
    }
    if (!have_header) throw std::invalid_argument("log has no header");
    return worst;
}

// ---------------------------------------------------------------- batch

const ConditionSummary& BatchSummary::at(Condition c) const
{
    for (const auto& r : rows)
        if (r.condition == c) return r;
    throw std::out_of_range(std::string("no rows for condition ") + to_string(c));
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BatchSummary run_batch(const MapConfig& map, const Codebook& codebook, const PolicyBundle& policies,
                       const std::vector<Condition>& conditions, int runs_per_condition, std::uint64_t base_seed,
                       const EpisodeConfig& base)
{
    if (runs_per_condition < 1) throw std::invalid_argument("run_batch: need at least one run per condition");
    BatchSummary s;
    for (Condition c : conditions) {
        ConditionSummary row;
        row.condition = c;
        for (int i = 0; i < runs_per_condition; ++i) {
            EpisodeConfig cfg = base;
            cfg.condition = c;
            cfg.seed = base_seed + static_cast<std::uint64_t>(i);
            const EpisodeLog log = run_episode(map, codebook, policies, cfg);
            row.steps.push_back(log.catch_step.value_or(cfg.max_steps));
            if (log.catch_step) ++row.captured;
        }
        const std::vector<double> v(row.steps.begin(), row.steps.end());
        row.median = quantile(v, 0.5);
        row.q1 = quantile(v, 0.25);
        row.q3 = quantile(v, 0.75);
        s.rows.push_back(std::move(row));
    }
    return s;
}

json batch_to_json(const BatchSummary& s)
{
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"condition", to_string(r.condition)},
                        {"runs", r.steps.size()},
                        {"captured", r.captured},
                        {"median", r.median},
                        {"q1", r.q1},
                        {"q3", r.q3},
                        {"steps", r.steps}});
    return {{"conditions", rows}};
}

} // namespace cnr
