#include "cnr/cpomdp.hpp"
#include "cnr/room_model.hpp"

#include "oracles.hpp"
#include "planning_suite.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace cnr;

namespace {

GaussianMixture1 normal1(double mu, double var, double w = 1.0, MixtureKind kind = MixtureKind::Belief)
{
    Eigen::Matrix<double, 1, 1> m, c;
    m << mu;
    c << var;
    return single_gaussian<double, 1>(m, c, w, kind);
}

} // namespace

TEST_CASE("policy value of two standard normals is 1/(2 sqrt(pi))")
{
    const AlphaElement<1> alpha{{0, -1}, normal1(0.0, 1.0, 1.0, MixtureKind::SignedFunction)};
    CHECK(policy_value(alpha, normal1(0.0, 1.0)) == doctest::Approx(0.5 / std::sqrt(std::numbers::pi)).epsilon(1e-9));
}

TEST_CASE("policy value agrees with Monte Carlo")
{
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto pair = oracle::random_value_pair(seed);
        const double exact = policy_value(pair.alpha, pair.belief);
        const double mc = oracle::monte_carlo_value(pair, 1'000'000, seed + 100);
        CHECK(std::abs(mc - exact) <= 0.01 * std::abs(exact));
    }
}

TEST_CASE("policy value rejects mismatched dimensions")
{
    const AlphaElement<Eigen::Dynamic> alpha{
        {0, -1},
        GaussianMixtureX({{1.0, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)}}, MixtureKind::SignedFunction)};
    const GaussianMixtureX b({{1.0, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)}});
    CHECK_THROWS_AS((void)policy_value(alpha, b), std::invalid_argument);
}

TEST_CASE("transition adjoint matches prediction")
{
    std::mt19937_64 rng(5);
    const auto pair = oracle::random_value_pair(21);
    MoveModel<4> mv;
    mv.A = Eigen::Matrix4d::Identity();
    mv.A(0, 1) = 0.3;
    mv.A(2, 2) = 1.2;
    mv.delta << 0.5, -0.25, 0.1, 0.0;
    mv.Q = 0.05 * Eigen::Matrix4d::Identity();
    const double lhs = inner_product(transition_adjoint(pair.alpha.value, mv), pair.belief);
    const double rhs = inner_product(pair.alpha.value, predict(pair.belief, mv.A, mv.delta, mv.Q));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("select_top_n matches brute force and stays sorted and unique")
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const auto gamma = oracle::random_alpha_set(rng, 5, 3, 12);
        const auto belief = oracle::random_value_pair(1000 + static_cast<std::uint64_t>(trial)).belief;
        std::size_t best = 0;
        (void)set_value(gamma, belief, &best);
        const auto top1 = select_top_n(gamma, belief, 1);
        REQUIRE(top1.size() == 1);
        CHECK(top1[0] == gamma[best].action);

        const auto all = select_top_n(gamma, belief, 100);
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t k = i + 1; k < all.size(); ++k) CHECK(all[i] != all[k]);
        std::vector<double> v;
        for (const auto& a : all) {
            double m = -1e300;
            for (const auto& g : gamma)
                if (g.action == a) m = std::max(m, policy_value(g, belief));
            v.push_back(m);
        }
        for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i - 1] >= v[i]);
    }
}

TEST_CASE("select_top_n with duplicate-action alphas is stable")
{
    std::mt19937_64 rng(3);
    auto gamma = oracle::random_alpha_set(rng, 2, 1, 6);
    const auto belief = oracle::random_value_pair(4).belief;
    const auto before = select_top_n(gamma, belief, 3);
    gamma.push_back(gamma.front());
    gamma.push_back(gamma.back());
    CHECK(select_top_n(gamma, belief, 3) == before);
    CHECK_THROWS_AS((void)select_top_n(gamma, belief, 0), std::invalid_argument);
}

TEST_CASE("zero discount backs up the immediate reward")
{
    auto tw = oracle::make_two_well(0.0);
    SolverOptions o;
    o.iterations = 2;
    const auto gamma = solve_policy(tw.model, tw.beliefs, o);
    for (const auto& a : gamma) {
        const auto& reward = tw.model.moves[static_cast<std::size_t>(a.action.move)].reward;
        REQUIRE(a.value.size() == reward.size());
        for (std::size_t i = 0; i < reward.size(); ++i) CHECK(a.value[i].weight == doctest::Approx(reward[i].weight));
    }
    // Certain left: bet left.
    CHECK(select_top_n(gamma, tw.beliefs.back(), 1)[0].move == 0);
    CHECK(select_top_n(gamma, tw.beliefs.front(), 1)[0].move == 1);
}

TEST_CASE("zero reward gives a zero value function")
{
    auto tw = oracle::make_two_well(0.9);
    for (auto& m : tw.model.moves) m.reward = GaussianMixture1({}, MixtureKind::SignedFunction);
    SolverOptions o;
    o.iterations = 5;
    const auto gamma = solve_policy(tw.model, tw.beliefs, o);
    for (const auto& b : tw.beliefs) CHECK(std::abs(set_value(gamma, b)) < 1e-12);
}

TEST_CASE("two-well continuous solution matches the exact discrete one")
{
    const double discount = 0.9;
    const auto tw = oracle::make_two_well(discount);
    const int horizon = oracle::horizon_for(discount);
    const auto exact = oracle::exact_value_iteration(tw.discrete, horizon);
    SolverOptions o;
    o.iterations = horizon;
    const auto gamma = solve_policy(tw.model, tw.beliefs, o);
    for (std::size_t i = 0; i < tw.beliefs.size(); ++i) {
        const double want = oracle::envelope_value(exact, tw.left_probability[i]);
        const double got = set_value(gamma, tw.beliefs[i]);
        CAPTURE(tw.left_probability[i]);
        CHECK(std::abs(got - want) <= 0.02 * std::abs(want));
    }
}

TEST_CASE("belief-point values never decrease across iterations")
{
    const auto map = load_map(CNR_DATA_DIR "/maps/map1.json");
    const Codebook cb(map);
    const auto model = build_room_model(map, cb, *map.room_index("study"));
    const auto beliefs = generate_belief_set(model, map, 12, 9);
    SolverOptions o;
    o.iterations = 4;
    SolveReport report;
    const auto policy = solve_room_policy(model, beliefs, o, &report);
    REQUIRE(report.mean_value.size() == 4);
    for (std::size_t i = 1; i < report.mean_value.size(); ++i)
        CHECK(report.mean_value[i] >= report.mean_value[i - 1] - 1e-3);
    CHECK(report.mean_value.back() > 0.0);
    for (const auto& a : policy.alphas) CHECK(a.value.size() <= o.alpha_cap);
}

TEST_CASE("room model shape")
{
    const auto map = load_map(CNR_DATA_DIR "/maps/map1.json");
    const Codebook cb(map);
    const auto model = build_room_model(map, cb, *map.room_index("kitchen"));
    CHECK(model.pomdp.moves.size() == 5);
    CHECK(model.pomdp.sensors.size() == 1);
    CHECK(model.pomdp.queries.size() == 4 * map.objects_in(*map.room_index("kitchen")).size());
    CHECK(joint_outcomes({&model.pomdp.sensors[0], &model.pomdp.queries[0]}).size() == 4);

    // The east reward peaks where the cop is half a metre west of the robber.
    const auto& east = model.pomdp.moves[0].reward;
    Eigen::Vector4d s;
    s << 2.0, 1.0, 2.5, 1.0;
    Eigen::Vector4d far;
    far << 2.0, 1.0, 1.5, 1.0;
    CHECK(evaluate(east, s) > evaluate(east, far));
}

TEST_CASE("policy serialization round trip and version check")
{
    const auto map = load_map(CNR_DATA_DIR "/maps/map1.json");
    const Codebook cb(map);
    const auto model = build_room_model(map, cb, *map.room_index("library"));
    const auto beliefs = generate_belief_set(model, map, 6, 1);
    SolverOptions o;
    o.iterations = 2;
    const auto policy = solve_room_policy(model, beliefs, o);
    const auto j = policy_to_json(policy);
    const auto back = policy_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.model_hash == model_hash(model));
    CHECK(back.room_id == "library");
    REQUIRE(back.alphas.size() == policy.alphas.size());
    for (const auto& b : beliefs) CHECK(set_value(back.alphas, b) == doctest::Approx(set_value(policy.alphas, b)).epsilon(1e-12));

    auto bad = j;
    bad["version"] = kPolicyFormatVersion + 1;
    CHECK_THROWS_AS((void)policy_from_json(bad), std::runtime_error);

    RoomModelConfig other;
    other.discount = 0.9;
    CHECK(model_hash(build_room_model(map, cb, model.room, other)) != model_hash(model));
}

TEST_CASE("solver input errors")
{
    auto tw = oracle::make_two_well(0.9);
    CHECK_THROWS_AS((void)solve_policy(tw.model, std::vector<GaussianMixture1>{}), std::invalid_argument);
    tw.model.moves[0].Q << -1.0;
    CHECK_THROWS_AS((void)solve_policy(tw.model, tw.beliefs), std::invalid_argument);
}

namespace {

// Cop-only 1-D model: west, east, stay by half a metre, reward bump at 0.
ContinuousPOMDP<1> line_model(double discount)
{
    ContinuousPOMDP<1> m;
    for (double d : {-0.5, 0.5, 0.0}) {
        MoveModel<1> mv;
        mv.name = d < 0 ? "west" : d > 0 ? "east" : "stay";
        mv.A << 1.0;
        mv.delta << d;
        mv.Q << 0.01;
        mv.reward = normal1(-d, 0.25, 1.0, MixtureKind::SignedFunction);
        m.moves.push_back(mv);
    }
    m.discount = discount;
    return m;
}

// Best first move by exhaustive three-step lookahead on a grid.
int lookahead_first_move(const ContinuousPOMDP<1>& m, double x0)
{
    const double step = 0.01;
    const int n = 1001; // [-5, 5]
    auto idx = [&](double x) { return static_cast<int>(std::lround((x + 5.0) / step)); };
    double best = -1e300;
    int arg = -1;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                std::vector<double> p(n, 0.0);
                p[static_cast<std::size_t>(idx(x0))] = 1.0;
                double total = 0.0;
                double disc = 1.0;
                for (int mv : {a, b, c}) {
                    const auto& move = m.moves[static_cast<std::size_t>(mv)];
                    std::vector<double> q(n, 0.0);
                    for (int i = 0; i < n; ++i) {
                        if (p[static_cast<std::size_t>(i)] == 0.0) continue;
                        const double x = -5.0 + i * step;
                        total += disc * p[static_cast<std::size_t>(i)] * evaluate(move.reward, Eigen::Matrix<double, 1, 1>(x));
                        for (int k = 0; k < n; ++k) {
                            const double y = -5.0 + k * step;
                            q[static_cast<std::size_t>(k)] += p[static_cast<std::size_t>(i)] *
                                                              oracle::normal_pdf(y, x + move.delta(0), move.Q(0, 0)) * step;
                        }
                    }
                    p = q;
                    disc *= m.discount;
                }
                if (total > best + 1e-12) {
                    best = total;
                    arg = a;
                }
            }
    return arg;
}

} // namespace

TEST_CASE("1-D toy policy heads for the reward region like a lookahead")
{
    const auto m = line_model(0.9);
    std::vector<GaussianMixture1> beliefs;
    for (double x = -3.0; x <= 3.0 + 1e-9; x += 0.25) beliefs.push_back(normal1(x, 0.01));
    SolverOptions o;
    o.iterations = 12;
    const auto gamma = solve_policy(m, beliefs, o);

    GaussianMixture1 b = normal1(2.0, 0.01);
    int steps = 0;
    while (std::abs(moments(b).first(0)) >= 0.5 && steps < 10) {
        const int move = select_top_n(gamma, b, 1)[0].move;
        CHECK(move == 0);
        CHECK(move == lookahead_first_move(m, moments(b).first(0)));
        const auto& mv = m.moves[static_cast<std::size_t>(move)];
        b = predict(b, mv.A, mv.delta, mv.Q);
        ++steps;
    }
    CHECK(steps == 4);
}

TEST_CASE("backup of the zero function is the best immediate reward")
{
    const auto m = line_model(0.9);
    const AlphaSet<1> zero{zero_alpha(m)};
    const auto b = normal1(1.0, 0.05);
    const auto a = bellman_backup(zero, b, m);
    CHECK(a.action.move == 0);
    CHECK(policy_value(a, b) == doctest::Approx(inner_product(m.moves[0].reward, b)));
}

TEST_CASE("uninformative observations do not branch the backup")
{
    auto m = line_model(0.8);
    ObservationFactor flat;
    flat.name = "flat";
    flat.model = SoftmaxModel({{"A", Eigen::VectorXd::Zero(1), 0.0}, {"B", Eigen::VectorXd::Zero(1), 0.0}});
    flat.outcomes = {{0}, {1}};
    m.sensors.push_back(flat);
    const AlphaSet<1> gamma{{{2, -1}, normal1(0.3, 0.5, 2.0, MixtureKind::SignedFunction)}};
    const auto b = normal1(1.0, 0.2);
    SolverOptions o;
    o.alpha_cap = 0;
    const auto a = bellman_backup(gamma, b, m, o);
    double want = -1e300;
    for (const auto& mv : m.moves)
        want = std::max(want, inner_product(mv.reward, b) +
                                  m.discount * policy_value(gamma[0], predict(b, mv.A, mv.delta, mv.Q)));
    CHECK(policy_value(a, b) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("reward geometry")
{
    const Eigen::Vector2d centre(2.0, 2.0);
    const Eigen::Vector2d spread(2.0, 2.0);
    const auto stay = build_reward(Eigen::Vector2d::Zero(), 1.0, centre, spread);
    const auto east = build_reward(Eigen::Vector2d(0.5, 0.0), 1.0, centre, spread);
    auto state = [](double cx, double cy, double rx, double ry) { return Eigen::Vector4d(cx, cy, rx, ry); };
    const double peak = evaluate(stay, state(2, 2, 2, 2));
    CHECK(evaluate(stay, state(2, 2, 2.3, 2)) < peak);
    CHECK(evaluate(stay, state(2, 2, 7, 2)) < 1e-4 * peak);
    // East pays most when the robber is one step east of the cop.
    CHECK(evaluate(east, state(1.75, 2, 2.25, 2)) > evaluate(east, state(2, 2, 2, 2)));
    CHECK_THROWS_AS((void)build_reward(Eigen::Vector2d::Zero(), 0.0, centre, spread), std::invalid_argument);
}

TEST_CASE("policy value is bilinear")
{
    const auto pair = oracle::random_value_pair(31);
    auto scaled = pair.alpha;
    std::vector<GaussianComponent<double, 4>> comps(scaled.value.begin(), scaled.value.end());
    for (auto& c : comps) c.weight *= 2.0;
    scaled.value = GaussianMixture4(comps, MixtureKind::SignedFunction);
    CHECK(policy_value(scaled, pair.belief) == doctest::Approx(2.0 * policy_value(pair.alpha, pair.belief)));
    for (auto& c : comps) c.weight = 0.0;
    scaled.value = GaussianMixture4(comps, MixtureKind::SignedFunction);
    CHECK(policy_value(scaled, pair.belief) == 0.0);
}
