#include "cnr/belief.hpp"

#include <cmath>

namespace cnr {

std::vector<std::size_t> assign_mixands(const GaussianMixture4& belief, const MapConfig& map)
{
    std::vector<std::size_t> out;
    out.reserve(belief.size());
    for (const auto& c : belief) out.push_back(nearest_room(map, c.mean.segment<2>(kRobberOffset)));
    return out;
}

Eigen::VectorXd discretize_belief(const GaussianMixture4& belief, const MapConfig& map)
{
    if (!belief.is_belief()) throw std::invalid_argument("discretize_belief: expects a belief mixture");
    Eigen::VectorXd rooms = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.rooms.size()));
    const auto owner = assign_mixands(belief, map);
    for (std::size_t i = 0; i < owner.size(); ++i) rooms(static_cast<Eigen::Index>(owner[i])) += belief[i].weight;
    const double total = rooms.sum();
    if (total > 0.0) rooms /= total;
    return rooms;
}

GaussianMixture4 condition_to_room(const GaussianMixture4& belief, const MapConfig& map, std::size_t room)
{
    if (room >= map.rooms.size()) throw std::out_of_range("condition_to_room: room index out of range");
    const auto owner = assign_mixands(belief, map);
    std::vector<GaussianComponent<double, 4>> kept;
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] == room) kept.push_back(belief[i]);
    if (!kept.empty()) return GaussianMixture4(std::move(kept)).normalized();

    Eigen::Vector2d cop = Eigen::Vector2d::Zero();
    double total = 0.0;
    for (const auto& c : belief) {
        cop += c.weight * c.mean.head<2>();
        total += c.weight;
    }
    if (total > 0.0) cop /= total;
    const auto& poly = map.rooms[room].polygon;
    const auto [lo, hi] = polygon_bounds(poly);
    const Eigen::Vector2d half = 0.5 * (hi - lo);
    Eigen::Vector4d mean;
    mean << cop, polygon_centroid(poly);
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    cov.topLeftCorner<2, 2>() = belief.empty() ? Eigen::Matrix2d(kCopPoseVariance * Eigen::Matrix2d::Identity())
                                               : Eigen::Matrix2d(belief[0].covariance.topLeftCorner<2, 2>());
    cov.bottomRightCorner<2, 2>() = half.cwiseAbs2().asDiagonal();
    return single_gaussian<double, 4>(mean, cov);
}

GaussianMixture4 room_prior(const MapConfig& map, std::size_t room, const Eigen::Vector2d& cop, double cell)
{
    const auto& poly = map.rooms.at(room).polygon;
    const auto [lo, hi] = polygon_bounds(poly);
    const Eigen::Vector2d size = hi - lo;
    const int nx = std::max(1, static_cast<int>(std::ceil(size.x() / cell - 1e-9)));
    const int ny = std::max(1, static_cast<int>(std::ceil(size.y() / cell - 1e-9)));
    const Eigen::Vector2d tile(size.x() / nx, size.y() / ny);
    std::vector<GaussianComponent<double, 4>> comps;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const Eigen::Vector2d centre = lo + Eigen::Vector2d((ix + 0.5) * tile.x(), (iy + 0.5) * tile.y());
            if (!polygon_contains(poly, centre)) continue;
            GaussianComponent<double, 4> c;
            c.weight = 1.0;
            c.mean << cop, centre;
            c.covariance.setZero();
            c.covariance.topLeftCorner<2, 2>() = kCopPoseVariance * Eigen::Matrix2d::Identity();
            c.covariance.bottomRightCorner<2, 2>() = (0.5 * tile).cwiseAbs2().asDiagonal();
            comps.push_back(c);
        }
    if (comps.empty()) return condition_to_room(GaussianMixture4(), map, room);
    return GaussianMixture4(std::move(comps)).normalized();
}

HybridBelief initial_belief(const MapConfig& map, const Eigen::Vector2d& cop, double cell)
{
    std::vector<GaussianComponent<double, 4>> all;
    const double share = 1.0 / static_cast<double>(map.rooms.size());
    for (std::size_t r = 0; r < map.rooms.size(); ++r)
        for (auto c : room_prior(map, r, cop, cell)) {
            c.weight *= share;
            all.push_back(std::move(c));
        }
    return make_hybrid(GaussianMixture4(std::move(all)), map, 0);
}

GaussianMixture4 anchor_cop(const GaussianMixture4& belief, const Eigen::Vector2d& cop, double variance)
{
    std::vector<GaussianComponent<double, 4>> out;
    out.reserve(belief.size());
    for (const auto& c : belief) {
        const Eigen::Matrix2d scc = c.covariance.topLeftCorner<2, 2>();
        const Eigen::Matrix2d src = c.covariance.bottomLeftCorner<2, 2>();
        const Eigen::Matrix2d srr = c.covariance.bottomRightCorner<2, 2>();
        const Eigen::LLT<Eigen::Matrix2d> llt(scc);
        const Eigen::Vector2d innovation = cop - c.mean.head<2>();
        const Eigen::Matrix2d gain = llt.solve(src.transpose()).transpose();
        GaussianComponent<double, 4> a;
        a.weight = c.weight * std::exp(log_gaussian_density(cop, c.mean.head<2>(), scc));
        a.mean << cop, c.mean.segment<2>(kRobberOffset) + gain * innovation;
        a.covariance.setZero();
        a.covariance.topLeftCorner<2, 2>() = variance * Eigen::Matrix2d::Identity();
        a.covariance.bottomRightCorner<2, 2>() = floor_covariance<double, 2>(srr - gain * src.transpose());
        out.push_back(a);
    }
    double total = 0.0;
    for (const auto& c : out) total += c.weight;
    if (!(total > 0.0)) {
        // The pose is far outside every cop block: keep the robber marginal.
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].weight = belief[i].weight;
            out[i].mean.segment<2>(kRobberOffset) = belief[i].mean.segment<2>(kRobberOffset);
            out[i].covariance.bottomRightCorner<2, 2>() = belief[i].covariance.bottomRightCorner<2, 2>();
        }
    }
    return GaussianMixture4(std::move(out), belief.kind()).normalized();
}

HybridBelief make_hybrid(GaussianMixture4 continuous, const MapConfig& map, int step)
{
    HybridBelief b;
    b.rooms = discretize_belief(continuous, map);
    b.continuous = std::move(continuous);
    b.step = step;
    return b;
}

const char* to_string(EventSource s)
{
    switch (s) {
    case EventSource::Viewcone: return "viewcone";
    case EventSource::PullAnswer: return "pull-answer";
    case EventSource::PushStatement: return "push-statement";
    }
    return "";
}

const char* to_string(Answer a)
{
    switch (a) {
    case Answer::Yes: return "yes";
    case Answer::No: return "no";
    case Answer::Null: return "null";
    }
    return "";
}

EventSource event_source_from_string(const std::string& s)
{
    for (EventSource e : {EventSource::Viewcone, EventSource::PullAnswer, EventSource::PushStatement})
        if (s == to_string(e)) return e;
    throw std::invalid_argument("unknown event source '" + s + "'");
}

Answer answer_from_string(const std::string& s)
{
    for (Answer a : {Answer::Yes, Answer::No, Answer::Null})
        if (s == to_string(a)) return a;
    throw std::invalid_argument("unknown answer '" + s + "'");
}

nlohmann::json event_to_json(const ObservationEvent& e)
{
    nlohmann::json j{{"source", to_string(e.source)}, {"step", e.step}};
    if (e.source == EventSource::Viewcone) {
        j["detection"] = e.detection == DetectionOutcome::Detection ? "detection" : "no-detection";
        j["cop"] = {e.cop.x(), e.cop.y()};
    } else {
        j["statement"] = statement_to_json(e.statement);
    }
    if (e.source == EventSource::PullAnswer) {
        j["answer"] = to_string(e.answer);
        j["question_id"] = e.question_id;
    }
    return j;
}

ObservationEvent event_from_json(const nlohmann::json& j)
{
    ObservationEvent e;
    e.source = event_source_from_string(j.at("source").get<std::string>());
    e.step = j.at("step").get<int>();
    if (e.source == EventSource::Viewcone) {
        e.detection = j.at("detection").get<std::string>() == "detection" ? DetectionOutcome::Detection
                                                                          : DetectionOutcome::NoDetection;
        e.cop = {j.at("cop")[0].get<double>(), j.at("cop")[1].get<double>()};
    } else {
        e.statement = statement_from_json(j.at("statement"));
    }
    if (e.source == EventSource::PullAnswer) {
        e.answer = answer_from_string(j.at("answer").get<std::string>());
        e.question_id = j.value("question_id", -1);
    }
    return e;
}

GaussianMixture4 fuse_statement(const GaussianMixture4& belief, const Codebook& codebook, const SemanticStatement& s,
                                bool holds, const FusionOptions& opts)
{
    const GroundedStatement g = codebook.ground(s);
    const SoftmaxModel lifted = g.model->embedded(4, kRobberOffset);
    const std::vector<int> classes = holds ? g.classes : lifted.complement(g.classes);
    return fuse_semantic(belief, lifted, classes, opts);
}

EventOutcome apply_event(const HybridBelief& belief, const ObservationEvent& event, const Codebook& codebook,
                         const BeliefSettings& settings)
{
    EventOutcome out{belief, false, {}};
    GaussianMixture4 next;
    try {
        switch (event.source) {
        case EventSource::Viewcone: {
            const SoftmaxModel box = build_box_detection_model(settings.viewcone_half_width, settings.viewcone_steepness);
            next = fuse_detection(belief.continuous, box, event.detection, settings.fusion);
            break;
        }
        case EventSource::PullAnswer:
            if (event.answer == Answer::Null) {
                out.note = "no response";
                return out;
            }
            next = fuse_statement(belief.continuous, codebook, event.statement, event.answer == Answer::Yes, settings.fusion);
            break;
        case EventSource::PushStatement:
            next = fuse_statement(belief.continuous, codebook, event.statement, true, settings.fusion);
            break;
        }
    } catch (const UnknownAnchor& e) {
        out.note = std::string("rejected: ") + e.what();
        return out;
    } catch (const DegenerateUpdate& e) {
        out.note = std::string("degenerate update, prior kept: ") + e.what();
        return out;
    }
    out.belief = make_hybrid(std::move(next), codebook.map(), belief.step);
    out.fused = true;
    return out;
}

} // namespace cnr
