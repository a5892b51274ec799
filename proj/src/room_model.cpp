#include "cnr/room_model.hpp"

#include "cnr/condense.hpp"
#include "cnr/mixture_io.hpp"

#include <array>
#include <cstdio>
#include <random>
#include <sstream>

namespace cnr {

namespace {

constexpr std::array<Relation, 4> kQueryRelations{Relation::Left, Relation::Right, Relation::Front, Relation::Behind};

const std::array<Eigen::Vector2d, 5>& move_steps()
{
    static const std::array<Eigen::Vector2d, 5> steps{Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0),
                                                      Eigen::Vector2d(0, 1), Eigen::Vector2d(0, -1),
                                                      Eigen::Vector2d(0, 0)};
    return steps;
}

void dump(std::ostringstream& os, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g,", v);
    os << buf;
}

template <typename Derived>
void dump(std::ostringstream& os, const Eigen::MatrixBase<Derived>& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) dump(os, m(r, c));
    os << ';';
}

void dump(std::ostringstream& os, const SoftmaxModel& m)
{
    for (const auto& l : m.labels()) os << l << ',';
    dump(os, m.weights());
    dump(os, m.biases());
}

} // namespace

Eigen::Vector2d move_direction(int move)
{
    if (move < 0 || move >= kMoveCount) throw std::out_of_range("move index " + std::to_string(move));
    return move_steps()[static_cast<std::size_t>(move)];
}

GaussianMixture4 build_reward(const Eigen::Vector2d& move_delta, double capture_radius, const Eigen::Vector2d& centre,
                              const Eigen::Vector2d& spread)
{
    if (!(capture_radius > 0.0)) throw std::invalid_argument("build_reward: capture radius must be positive");
    // Relative coordinate v = cop - robber ~ N(-delta, (r/2)^2), common
    // coordinate (cop + robber) / 2 ~ N(centre, spread^2).
    const double rel = 0.25 * capture_radius * capture_radius;
    Eigen::Vector4d mean;
    mean << centre - 0.5 * move_delta, centre + 0.5 * move_delta;
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    for (int k = 0; k < 2; ++k) {
        const double common = spread(k) * spread(k);
        cov(k, k) = cov(k + 2, k + 2) = common + 0.25 * rel;
        cov(k, k + 2) = cov(k + 2, k) = common - 0.25 * rel;
    }
    return single_gaussian<double, 4>(mean, cov, 1.0, MixtureKind::SignedFunction);
}

RoomModel build_room_model(const MapConfig& map, const Codebook& codebook, std::size_t room,
                           const RoomModelConfig& config)
{
    if (room >= map.rooms.size()) throw std::out_of_range("build_room_model: room index out of range");
    RoomModel m;
    m.room = room;
    m.room_id = map.rooms[room].id;
    m.config = config;

    const auto [lo, hi] = polygon_bounds(map.rooms[room].polygon);
    const Eigen::Vector2d centre = polygon_centroid(map.rooms[room].polygon);
    const Eigen::Vector2d spread = 0.5 * (hi - lo);

    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q.diagonal() << config.cop_noise, config.cop_noise, config.robber_noise, config.robber_noise;
    for (std::size_t k = 0; k < move_steps().size(); ++k) {
        MoveModel<4> mv;
        mv.name = kMoveNames[k];
        mv.A = Eigen::Matrix4d::Identity();
        const Eigen::Vector2d d = config.step * move_steps()[k];
        mv.delta << d, 0.0, 0.0;
        mv.Q = q;
        mv.reward = build_reward(d, config.capture_radius, centre, spread);
        m.pomdp.moves.push_back(std::move(mv));
    }

    ObservationFactor cone;
    cone.name = "viewcone";
    cone.model = build_box_detection_model(config.viewcone_half_width, config.viewcone_steepness).on_difference(4, 0, 2);
    const auto detect = cone.model.classes_with_label("Detection");
    cone.outcomes = {detect, cone.model.complement(detect)};
    m.pomdp.sensors.push_back(std::move(cone));

    for (std::size_t o : map.objects_in(room)) {
        for (Relation rel : kQueryRelations) {
            const SemanticStatement s{Polarity::Is, map.objects[o].id, rel};
            const GroundedStatement g = codebook.ground(s);
            ObservationFactor f;
            f.name = codebook.question_text(s);
            f.model = g.model->embedded(4, kRobberOffset);
            f.outcomes = {g.classes, f.model.complement(g.classes)};
            m.pomdp.queries.push_back(std::move(f));
            m.questions.push_back(s);
        }
    }
    m.pomdp.discount = config.discount;
    return m;
}

std::vector<GaussianMixture4> generate_belief_set(const RoomModel& model, const MapConfig& map, std::size_t count,
                                                  std::uint64_t seed, std::size_t max_components)
{
    if (count == 0) throw std::invalid_argument("generate_belief_set: count must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& poly = map.rooms[model.room].polygon;
    const auto [lo, hi] = polygon_bounds(poly);
    const auto& pomdp = model.pomdp;
    const FusionOptions fusion = FusionOptions::runtime(max_components * 4);
    constexpr int kRolloutLength = 8;

    std::vector<GaussianMixture4> out;
    while (out.size() < count) {
        Eigen::Vector2d cop;
        do cop = lo + (hi - lo).cwiseProduct(Eigen::Vector2d(unit(rng), unit(rng)));
        while (!polygon_contains(poly, cop));
        GaussianMixture4 belief = room_prior(map, model.room, cop);
        if (belief.size() > max_components) belief = condense(belief, max_components);
        Eigen::Vector4d truth = sample(belief, 1, rng())[0];
        truth.head<2>() = cop;
        out.push_back(belief);

        for (int t = 0; t < kRolloutLength && out.size() < count; ++t) {
            const auto& mv = pomdp.moves[static_cast<std::size_t>(rng() % pomdp.moves.size())];
            truth += mv.delta;
            for (int k = 0; k < 4; ++k) truth(k) += std::sqrt(mv.Q(k, k)) * normal(rng);
            belief = predict(belief, mv.A, mv.delta, mv.Q);
            try {
                for (const auto& f : pomdp.sensors) {
                    const double p = f.model.set_probability(f.outcomes[0], truth);
                    const auto& classes = unit(rng) < p ? f.outcomes[0] : f.outcomes[1];
                    belief = fuse_semantic(belief, f.model, classes, fusion);
                }
                if (!pomdp.queries.empty() && unit(rng) < 0.5) {
                    const auto& f = pomdp.queries[static_cast<std::size_t>(rng() % pomdp.queries.size())];
                    const double p = f.model.set_probability(f.outcomes[0], truth);
                    const auto& classes = unit(rng) < p ? f.outcomes[0] : f.outcomes[1];
                    belief = fuse_semantic(belief, f.model, classes, fusion);
                }
            } catch (const DegenerateUpdate&) {
                break;
            }
            belief = anchor_cop(belief, truth.head<2>());
            if (belief.size() > max_components) belief = condense(belief, max_components);
            out.push_back(belief);
        }
    }
    return out;
}

RoomPolicy solve_room_policy(const RoomModel& model, const std::vector<GaussianMixture4>& beliefs,
                             const SolverOptions& opts, SolveReport* report)
{
    RoomPolicy p;
    p.room_id = model.room_id;
    p.model_hash = model_hash(model);
    p.questions = model.questions;
    p.alphas = solve_policy(model.pomdp, beliefs, opts, report);
    return p;
}

std::uint64_t model_hash(const RoomModel& model)
{
    std::ostringstream os;
    os << model.room_id << '|';
    for (const auto& mv : model.pomdp.moves) {
        os << mv.name << ':';
        dump(os, mv.A);
        dump(os, mv.delta);
        dump(os, mv.Q);
        for (const auto& c : mv.reward) {
            dump(os, c.weight);
            dump(os, c.mean);
            dump(os, c.covariance);
        }
    }
    for (const auto& f : model.pomdp.sensors) dump(os, f.model);
    for (std::size_t q = 0; q < model.pomdp.queries.size(); ++q) {
        os << statement_to_json(model.questions[q]).dump();
        dump(os, model.pomdp.queries[q].model);
    }
    dump(os, model.pomdp.discount);
    return fnv1a(os.str());
}

nlohmann::json policy_to_json(const RoomPolicy& policy)
{
    nlohmann::json alphas = nlohmann::json::array();
    for (const auto& a : policy.alphas)
        alphas.push_back({{"move", a.action.move}, {"query", a.action.query}, {"value", mixture_to_json(a.value)}});
    nlohmann::json questions = nlohmann::json::array();
    for (const auto& q : policy.questions) questions.push_back(statement_to_json(q));
    return {{"version", kPolicyFormatVersion},
            {"room", policy.room_id},
            {"model_hash", hash_hex(policy.model_hash)},
            {"questions", questions},
            {"alphas", alphas}};
}

RoomPolicy policy_from_json(const nlohmann::json& j)
{
    const int version = j.at("version").get<int>();
    if (version != kPolicyFormatVersion)
        throw std::runtime_error("policy format version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kPolicyFormatVersion) + ")");
    RoomPolicy p;
    p.room_id = j.at("room").get<std::string>();
    p.model_hash = std::stoull(j.at("model_hash").get<std::string>(), nullptr, 16);
    for (const auto& q : j.at("questions")) p.questions.push_back(statement_from_json(q));
    for (const auto& a : j.at("alphas"))
        p.alphas.push_back({FactoredAction{a.at("move").get<int>(), a.at("query").get<int>()},
                            mixture_from_json<double, 4>(a.at("value"))});
    return p;
}

} // namespace cnr
