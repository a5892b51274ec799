#include "cnr/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cnr {

namespace {

std::vector<Eigen::VectorXd> room_seeds(Eigen::Index n)
{
    std::vector<Eigen::VectorXd> s{Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
    for (Eigen::Index i = 0; i < n; ++i) s.push_back(Eigen::VectorXd::Unit(n, i));
    return s;
}

Eigen::Vector2d robber_mean(const GaussianMixture4& b)
{
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    double w = 0.0;
    for (const auto& c : b) {
        m += c.weight * c.mean.segment<2>(kRobberOffset);
        w += c.weight;
    }
    return w > 0.0 ? Eigen::Vector2d(m / w) : m;
}

bool stays_in(const MapConfig& map, const Eigen::Vector2d& from, const Eigen::Vector2d& to, std::size_t room)
{
    return move_is_legal(map, from, to) && polygon_contains(map.rooms[room].polygon, to);
}

// Greedy fallback: the in-room move that gets closest to where the robber
// probably is.
int greedy_move(const MapConfig& map, const Eigen::Vector2d& cop, std::size_t room, const Eigen::Vector2d& goal,
                double step)
{
    int best = kMoveCount - 1;
    double best_d = (goal - cop).norm();
    for (int m = 0; m + 1 < kMoveCount; ++m) {
        const Eigen::Vector2d to = cop + step * move_direction(m);
        if (!stays_in(map, cop, to, room)) continue;
        const double d = (goal - to).norm();
        if (d < best_d - 1e-12) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

const RoomPolicy* policy_for(const PolicyBundle& b, std::size_t room)
{
    return room < b.room_policies.size() && b.room_policies[room] ? &*b.room_policies[room] : nullptr;
}

// Q(a) = R(b, a) + discount * V(b'), with b' the belief after move a and
// before any observation. Only moves that keep the cop in the room count.
int lookahead_move(const RoomModel& model, const RoomPolicy& policy, const GaussianMixture4& belief,
                   const MapConfig& map, const Eigen::Vector2d& cop, std::size_t room)
{
    int best = kMoveCount - 1;
    double best_q = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < kMoveCount; ++m) {
        const auto& mv = model.pomdp.moves[static_cast<std::size_t>(m)];
        const Eigen::Vector2d to = cop + mv.delta.head<2>();
        if (m != kMoveCount - 1 && !stays_in(map, cop, to, room)) continue;
        const GaussianMixture4 next = anchor_cop(predict<double, 4>(belief, mv.A, mv.delta, mv.Q), to);
        const double q = inner_product(mv.reward, belief) + model.pomdp.discount * set_value(policy.alphas, next);
        if (q > best_q) {
            best_q = q;
            best = m;
        }
    }
    return best;
}

SemanticStatement room_statement(const MapConfig& map, std::size_t room)
{
    return {Polarity::Is, map.rooms[room].id, Relation::Inside};
}

} // namespace

PolicyBundle solve_bundle(const MapConfig& map, const Codebook& codebook, const BundleSolveOptions& opts)
{
    for (const auto& id : opts.rooms)
        if (!map.room_index(id)) throw std::invalid_argument("solve: unknown room '" + id + "'");
    const auto say = [&](const std::string& s) {
        if (opts.progress) opts.progress(s);
    };
    PolicyBundle b;
    say("room level");
    b.room_model = build_room_model(map, opts.room_config);
    const auto seeds = room_seeds(b.room_model.room_count());
    const auto points =
        expand_beliefs(b.room_model.pomdp, seeds, std::max(opts.room_beliefs, seeds.size()), opts.seed);
    b.room_policy = solve_pbvi(b.room_model.pomdp, points, {opts.room_iterations});
    b.room_policies.resize(map.rooms.size());
    for (std::size_t r = 0; r < map.rooms.size(); ++r) {
        b.room_models.push_back(build_room_model(map, codebook, r, opts.model_config));
        const auto& id = map.rooms[r].id;
        if (!opts.rooms.empty() && std::find(opts.rooms.begin(), opts.rooms.end(), id) == opts.rooms.end()) continue;
        say("room " + id);
        const auto beliefs = generate_belief_set(b.room_models[r], map, opts.beliefs_per_room, opts.seed + 1000 * (r + 1));
        b.room_policies[r] = solve_room_policy(b.room_models[r], beliefs, opts.solver);
    }
    return b;
}

nlohmann::json bundle_to_json(const PolicyBundle& bundle)
{
    nlohmann::json rooms = nlohmann::json::array();
    for (const auto& p : bundle.room_policies)
        if (p) rooms.push_back(policy_to_json(*p));
    return {{"version", kBundleFormatVersion},
            {"rooms_order", bundle.room_model.room_ids},
            {"room_level", discrete_policy_to_json(bundle.room_policy, model_hash(bundle.room_model.pomdp))},
            {"rooms", rooms}};
}

PolicyBundle bundle_from_json(const nlohmann::json& j, const MapConfig& map, const Codebook& codebook,
                              const RoomPOMDPConfig& room_config, const RoomModelConfig& model_config)
{
    const int version = j.at("version").get<int>();
    if (version != kBundleFormatVersion)
        throw std::runtime_error("policy bundle version " + std::to_string(version) + " is not supported");
    PolicyBundle b;
    b.room_model = build_room_model(map, room_config);
    std::uint64_t hash = 0;
    b.room_policy = discrete_policy_from_json(j.at("room_level"), &hash);
    if (hash != model_hash(b.room_model.pomdp))
        throw std::runtime_error("room-level policy was solved for a different model; re-run solve");
    b.room_policies.resize(map.rooms.size());
    for (std::size_t r = 0; r < map.rooms.size(); ++r) b.room_models.push_back(build_room_model(map, codebook, r, model_config));
    for (const auto& pj : j.at("rooms")) {
        RoomPolicy p = policy_from_json(pj);
        const auto r = map.room_index(p.room_id);
        if (!r) throw std::runtime_error("policy for unknown room '" + p.room_id + "'");
        if (p.model_hash != model_hash(b.room_models[*r]))
            throw std::runtime_error("policy for room '" + p.room_id + "' was solved for a different model");
        b.room_policies[*r] = std::move(p);
    }
    return b;
}

const char* to_string(Interleave i)
{
    switch (i) {
    case Interleave::RoomFirst: return "room-first";
    case Interleave::ObjectFirst: return "object-first";
    case Interleave::RoomOnly: return "room-only";
    }
    return "";
}

const char* to_string(MoveSelection m)
{
    return m == MoveSelection::BestAlpha ? "best-alpha" : "lookahead";
}

MoveSelection move_selection_from_string(const std::string& s)
{
    for (MoveSelection m : {MoveSelection::BestAlpha, MoveSelection::Lookahead})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown move selection '" + s + "'");
}

Interleave interleave_from_string(const std::string& s)
{
    for (Interleave i : {Interleave::RoomFirst, Interleave::ObjectFirst, Interleave::RoomOnly})
        if (s == to_string(i)) return i;
    throw std::invalid_argument("unknown interleave '" + s + "'");
}

CompositeDirective step_policy(const HybridBelief& belief, const Eigen::Vector2d& cop, const MapConfig& map,
                               const PolicyBundle& policies, const HierarchyOptions& opts)
{
    const RoomPOMDP& rm = policies.room_model;
    const auto n = map.rooms.size();
    if (static_cast<std::size_t>(rm.room_count()) != n || static_cast<std::size_t>(belief.rooms.size()) != n)
        throw std::invalid_argument("step_policy: room count differs between map, belief and room-level model");
    if (policies.room_policy.empty()) throw std::invalid_argument("step_policy: room-level policy is empty");
    if (opts.questions < 1) throw std::invalid_argument("step_policy: N must be at least 1");

    CompositeDirective d;
    const std::size_t cop_room = nearest_room(map, cop);
    if (!(opts.travel_cost >= 0.0)) throw std::invalid_argument("step_policy: travel cost must be non-negative");
    const double travel = opts.travel_cost;

    // Room layer, with travel charged per edge.
    auto ranked = rank_actions(policies.room_policy, belief.rooms);
    for (auto& [a, v] : ranked) {
        const auto path = room_path(map, cop_room, static_cast<std::size_t>(rm.action(a).search));
        v -= travel * static_cast<double>(path.size() - 1);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    const RoomAction best = rm.action(ranked.front().first);
    d.search_room = static_cast<std::size_t>(best.search);
    d.query_room = static_cast<std::size_t>(best.query);
    d.room_question = room_statement(map, d.query_room);

    std::vector<RankedQuestion> room_qs;
    for (const auto& [a, v] : ranked) {
        const auto q = static_cast<std::size_t>(rm.action(a).query);
        const auto s = room_statement(map, q);
        if (std::none_of(room_qs.begin(), room_qs.end(), [&](const auto& x) { return x.statement == s; }))
            room_qs.push_back({s, QuestionLayer::Room, v});
    }

    // Navigation.
    if (cop_room != d.search_room) {
        const auto path = room_path(map, cop_room, d.search_room);
        d.navigation = NavigationKind::GotoRoom;
        d.goto_room = path.at(1);
    } else {
        d.navigation = NavigationKind::Move;
        const GaussianMixture4 cond = condition_to_room(belief.continuous, map, d.search_room);
        const RoomPolicy* policy = policy_for(policies, d.search_room);
        const RoomModel* model = d.search_room < policies.room_models.size() ? &policies.room_models[d.search_room]
                                                                             : nullptr;
        if (policy && !policy->alphas.empty() && model && opts.moves == MoveSelection::Lookahead) {
            d.move = lookahead_move(*model, *policy, cond, map, cop, d.search_room);
        } else if (policy && !policy->alphas.empty()) {
            d.move = kMoveCount - 1;
            for (const auto& a : select_top_n(policy->alphas, cond, policy->alphas.size())) {
                const Eigen::Vector2d to = cop + opts.step * move_direction(a.move);
                if (a.move == kMoveCount - 1 || stays_in(map, cop, to, d.search_room)) {
                    d.move = a.move;
                    break;
                }
            }
        } else {
            d.notes.push_back("no policy for room '" + map.rooms[d.search_room].id + "'; moving greedily");
            d.move = greedy_move(map, cop, d.search_room, robber_mean(cond), opts.step);
        }
    }

    // Object layer, on the belief conditioned to the queried room.
    std::vector<RankedQuestion> object_qs;
    if (opts.interleave != Interleave::RoomOnly) {
        const RoomPolicy* policy = policy_for(policies, d.query_room);
        if (!policy) {
            d.notes.push_back("no policy for room '" + map.rooms[d.query_room].id + "'; room questions only");
        } else {
            const GaussianMixture4 cond = condition_to_room(belief.continuous, map, d.query_room);
            for (const auto& [q, v] : rank_queries(policy->alphas, cond))
                object_qs.push_back({policy->questions.at(static_cast<std::size_t>(q)), QuestionLayer::Object, v});
            if (!object_qs.empty()) d.object_question = object_qs.front().statement;
        }
    }

    const auto& first = opts.interleave == Interleave::ObjectFirst ? object_qs : room_qs;
    const auto& second = opts.interleave == Interleave::ObjectFirst ? room_qs : object_qs;
    for (std::size_t i = 0; d.extra_questions.size() < opts.questions && (i < first.size() || i < second.size()); ++i) {
        if (i < first.size()) d.extra_questions.push_back(first[i]);
        if (i < second.size() && d.extra_questions.size() < opts.questions) d.extra_questions.push_back(second[i]);
    }
    return d;
}

Eigen::Vector2d apply_navigation(const MapConfig& map, const Eigen::Vector2d& cop, const CompositeDirective& d,
                                 double step)
{
    if (d.navigation == NavigationKind::Move) return clip_move(map, cop, cop + step * move_direction(d.move));

    const std::size_t here = nearest_room(map, cop);
    const Door* door = map.door_between(here, d.goto_room);
    if (!door) return cop;
    const Eigen::Vector2d to_door = door->center - cop;
    const double dist = to_door.norm();
    if (dist > step) return clip_move(map, cop, cop + step * to_door / dist);

    // Close enough: step through into the next room.
    Eigen::Vector2d in = polygon_centroid(map.rooms[d.goto_room].polygon) - door->center;
    in.normalize();
    const Eigen::Vector2d through = door->center + std::max(step - dist, 0.25) * in;
    if (move_is_legal(map, cop, through)) return through;
    return clip_move(map, cop, door->center);
}

HybridBelief handle_response(const HybridBelief& belief, const SemanticStatement& question, Answer answer,
                             const Codebook& codebook, const BeliefSettings& settings)
{
    if (answer == Answer::Null) return belief;
    ObservationEvent e;
    e.source = EventSource::PullAnswer;
    e.step = belief.step;
    e.statement = question;
    e.answer = answer;
    return apply_event(belief, e, codebook, settings).belief;
}

nlohmann::json directive_to_json(const CompositeDirective& d, const MapConfig& map)
{
    nlohmann::json j{{"search_room", map.rooms.at(d.search_room).id},
                     {"query_room", map.rooms.at(d.query_room).id},
                     {"room_question", statement_to_json(d.room_question)}};
    if (d.navigation == NavigationKind::GotoRoom) j["navigation"] = {{"goto", map.rooms.at(d.goto_room).id}};
    else j["navigation"] = {{"move", kMoveNames[d.move]}};
    j["object_question"] = d.object_question ? statement_to_json(*d.object_question) : nlohmann::json(nullptr);
    nlohmann::json qs = nlohmann::json::array();
    for (const auto& q : d.extra_questions)
        qs.push_back({{"statement", statement_to_json(q.statement)},
                      {"layer", q.layer == QuestionLayer::Room ? "room" : "object"},
                      {"value", q.value}});
    j["questions"] = qs;
    if (!d.notes.empty()) j["notes"] = d.notes;
    return j;
}

} // namespace cnr
