#include "cnr/sim.hpp"

#include "map_fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cnr;

namespace {

const MapConfig& chain3()
{
    static const MapConfig m = fixture::chain_map(3, true);
    return m;
}

const Codebook& codebook3()
{
    static const Codebook c(chain3());
    return c;
}

const PolicyBundle& bundle3()
{
    static const PolicyBundle b = [] {
        BundleSolveOptions o;
        o.room_beliefs = 20;
        o.room_iterations = 30;
        o.beliefs_per_room = 12;
        o.solver.iterations = 3;
        o.solver.alpha_cap = 8;
        return solve_bundle(chain3(), codebook3(), o);
    }();
    return b;
}

EpisodeConfig short_config(Condition c, std::uint64_t seed)
{
    EpisodeConfig cfg;
    cfg.condition = c;
    cfg.seed = seed;
    cfg.max_steps = 25;
    return cfg;
}

} // namespace

TEST_CASE("robber random walk")
{
    const Eigen::Vector2d centre(6.0, 2.0);

    SUBCASE("zero variance stays put")
    {
        RobberModel m;
        m.variance = 0.0;
        std::mt19937_64 rng(1);
        const auto s = robber_step({centre, 0}, chain3(), m, rng);
        CHECK(s.position == centre);
    }

    SUBCASE("never leaves the map")
    {
        RobberModel m;
        m.variance = 0.5;
        std::mt19937_64 rng(2);
        RobberState s{centre, 0};
        for (int i = 0; i < 10000; ++i) {
            const auto next = robber_step(s, chain3(), m, rng);
            REQUIRE(room_containing(chain3(), next.position));
            REQUIRE(move_is_legal(chain3(), s.position, next.position));
            s = next;
        }
    }

    SUBCASE("step variance away from walls")
    {
        RobberModel m;
        std::mt19937_64 rng(3);
        const int n = 100000;
        Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sq = Eigen::Vector2d::Zero();
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector2d d = robber_step({centre, 0}, chain3(), m, rng).position - centre;
            sum += d;
            sq += d.cwiseProduct(d);
        }
        const Eigen::Vector2d var = sq / n - (sum / n).cwiseProduct(sum / n);
        CHECK(std::abs(var.x() / m.variance - 1.0) < 0.05);
        CHECK(std::abs(var.y() / m.variance - 1.0) < 0.05);
    }
}

TEST_CASE("scripted robber follows waypoints")
{
    RobberModel m;
    m.mode = RobberMode::Scripted;
    m.waypoints = {{3.0, 2.0}, {6.0, 2.0}};
    m.speed = 0.5;
    validate_robber_model(chain3(), m);
    std::mt19937_64 rng(4);
    RobberState s{{1.0, 2.0}, 0};
    for (int i = 0; i < 40; ++i) s = robber_step(s, chain3(), m, rng);
    CHECK((s.position - Eigen::Vector2d(6.0, 2.0)).norm() < 1e-12);
    CHECK(s.waypoint == 2);

    m.waypoints.push_back({20.0, 2.0});
    CHECK_THROWS_AS(validate_robber_model(chain3(), m), std::invalid_argument);
    RobberModel bad;
    bad.variance = -1.0;
    CHECK_THROWS_AS(validate_robber_model(chain3(), bad), std::invalid_argument);
}

TEST_CASE("simulated answers")
{
    const SemanticStatement q{Polarity::Is, "box0", Relation::Front};
    const Eigen::Vector2d robber(2.5, 2.5); // between front and a side
    const double p = codebook3().likelihood(q, robber);
    REQUIRE(p > 0.05);
    REQUIRE(p < 0.95);

    SimulatedHuman silent;
    silent.answer_prob = 0.0;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) CHECK(simulated_answer(silent, codebook3(), q, robber, rng) == Answer::Null);

    SimulatedHuman always;
    always.answer_prob = 1.0;
    const int n = 10000;
    int yes = 0;
    for (int i = 0; i < n; ++i) {
        const Answer a = simulated_answer(always, codebook3(), q, robber, rng);
        REQUIRE(a != Answer::Null);
        yes += a == Answer::Yes;
    }
    const double se = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(static_cast<double>(yes) / n - p) < 3.0 * se);

    std::mt19937_64 a(9), b(9);
    for (int i = 0; i < 50; ++i)
        CHECK(simulated_answer(SimulatedHuman{}, codebook3(), q, robber, a) ==
              simulated_answer(SimulatedHuman{}, codebook3(), q, robber, b));

    SimulatedHuman bad;
    bad.push_rate = 1.5;
    CHECK_THROWS_AS(validate_human(bad), std::invalid_argument);
}

TEST_CASE("volunteered statements are valid and truthful more often than not")
{
    SimulatedHuman h;
    h.push_rate = 1.0;
    std::mt19937_64 rng(6);
    const Eigen::Vector2d robber(6.0, 1.0);
    int n = 0;
    double mean_likelihood = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const auto s = simulated_push(h, codebook3(), robber, rng);
        if (!s) continue;
        REQUIRE(codebook3().valid(*s));
        mean_likelihood += codebook3().likelihood(*s, robber);
        ++n;
    }
    REQUIRE(n > 0);
    CHECK(mean_likelihood / n > 0.5);

    h.push_rate = 0.0;
    for (int i = 0; i < 100; ++i) CHECK(!simulated_push(h, codebook3(), robber, rng));
}

TEST_CASE("a still robber next to the cop is caught on the first tick")
{
    EpisodeConfig cfg = short_config(Condition::NoHuman, 1);
    cfg.robber.variance = 0.0;
    cfg.robber_start = chain3().cop_start + Eigen::Vector2d(0.2, 0.0);
    cfg.validation_prob = 1.0;
    const auto log = run_episode(chain3(), codebook3(), bundle3(), cfg);
    REQUIRE(log.catch_step);
    CHECK(*log.catch_step == 1);
    CHECK(log.steps.size() == 1);
    CHECK(log.steps.back().captured);
}

TEST_CASE("failed validation keeps the episode going")
{
    EpisodeConfig cfg = short_config(Condition::NoHuman, 1);
    cfg.robber.variance = 0.0;
    cfg.robber_start = chain3().cop_start + Eigen::Vector2d(0.2, 0.0);
    cfg.validation_prob = 0.0;
    cfg.max_steps = 5;
    const auto log = run_episode(chain3(), codebook3(), bundle3(), cfg);
    CHECK(!log.catch_step);
    CHECK(log.steps.size() == 5);
    CHECK(log.steps.front().in_range);
}

TEST_CASE("conditions gate the human channels")
{
    for (Condition c : kAllConditions) {
        CAPTURE(to_string(c));
        EpisodeConfig cfg = short_config(c, 3);
        cfg.human.push_rate = 0.5;
        const auto log = run_episode(chain3(), codebook3(), bundle3(), cfg);
        CHECK((log.pull_events > 0) == allows_pull(c));
        CHECK((log.push_events > 0) == allows_push(c));
        for (const auto& r : log.steps) {
            if (r.captured) continue;
            if (allows_pull(c)) CHECK(r.questions.size() == cfg.hierarchy.questions);
            else CHECK(r.questions.empty());
        }
    }
}

TEST_CASE("same seed, same log")
{
    const EpisodeConfig cfg = short_config(Condition::Both, 11);
    const std::string a = to_jsonl(run_episode(chain3(), codebook3(), bundle3(), cfg));
    const std::string b = to_jsonl(run_episode(chain3(), codebook3(), bundle3(), cfg));
    CHECK(a == b);
    EpisodeConfig other = cfg;
    other.seed = 12;
    CHECK(to_jsonl(run_episode(chain3(), codebook3(), bundle3(), other)) != a);
}

TEST_CASE("replaying a log rebuilds every snapshot")
{
    const auto log = run_episode(chain3(), codebook3(), bundle3(), short_config(Condition::Both, 21));
    const std::string text = to_jsonl(log);
    CHECK(replay_log(text, chain3(), codebook3()) <= 1e-9);

    // Lines are JSON objects with a header first and a summary last.
    std::istringstream in(text);
    std::string first, line, last;
    std::getline(in, first);
    while (std::getline(in, line)) last = line;
    CHECK(nlohmann::json::parse(first).at("kind") == "header");
    CHECK(nlohmann::json::parse(last).at("kind") == "summary");

    CHECK_THROWS_AS((void)replay_log("", chain3(), codebook3()), std::invalid_argument);
}

TEST_CASE("external input is validated")
{
    EpisodeConfig cfg = short_config(Condition::Both, 5);
    cfg.simulated_human = false;
    EpisodeRunner run(chain3(), codebook3(), bundle3(), cfg);
    CHECK_THROWS_AS(run.submit_answer(0, Answer::Yes), InputRejected); // nothing asked yet
    (void)run.tick();
    REQUIRE(!run.finished());
    REQUIRE(!run.pending_questions().empty());
    const int id = run.pending_questions().front().id;
    CHECK_THROWS_AS(run.submit_answer(id, Answer::Null), InputRejected);
    run.submit_answer(id, Answer::No);
    CHECK_THROWS_AS(run.submit_answer(id, Answer::Yes), InputRejected);
    CHECK_THROWS_AS(run.submit_answer(id + 100, Answer::Yes), InputRejected);
    CHECK_THROWS_AS(run.submit_statement({Polarity::Is, "nowhere", Relation::Inside}), InputRejected);
    run.submit_statement({Polarity::Is, "r1", Relation::Inside});

    // The answer and the statement are fused on the next tick, in that order;
    // the earlier question has expired by then.
    const auto& rec = run.tick();
    REQUIRE(rec.fused.size() == 3);
    CHECK(rec.fused[0].source == EventSource::Viewcone);
    CHECK(rec.fused[1].source == EventSource::PullAnswer);
    CHECK(rec.fused[1].question_id == id);
    CHECK(rec.fused[2].source == EventSource::PushStatement);
    CHECK_THROWS_AS(run.submit_answer(id, Answer::Yes), InputRejected);

    EpisodeConfig pull = short_config(Condition::PullOnly, 5);
    pull.simulated_human = false;
    EpisodeRunner p(chain3(), codebook3(), bundle3(), pull);
    CHECK_THROWS_AS(p.submit_statement({Polarity::Is, "r1", Relation::Inside}), InputRejected);
}

TEST_CASE("bad episode configs are rejected")
{
    EpisodeConfig cfg = short_config(Condition::Both, 1);
    cfg.cop_room = "attic";
    CHECK_THROWS_AS(EpisodeRunner(chain3(), codebook3(), bundle3(), cfg), std::invalid_argument);
    cfg = short_config(Condition::Both, 1);
    cfg.robber_start = Eigen::Vector2d(-5.0, 0.0);
    CHECK_THROWS_AS(EpisodeRunner(chain3(), codebook3(), bundle3(), cfg), std::invalid_argument);
    cfg = short_config(Condition::Both, 1);
    cfg.max_steps = 0;
    CHECK_THROWS_AS(EpisodeRunner(chain3(), codebook3(), bundle3(), cfg), std::invalid_argument);

    const MapConfig other = fixture::chain_map(2);
    const Codebook cb(other);
    CHECK_THROWS_AS(EpisodeRunner(other, cb, bundle3(), short_config(Condition::Both, 1)), std::invalid_argument);

    CHECK_THROWS_AS((void)condition_from_string("sometimes"), std::invalid_argument);
    for (Condition c : kAllConditions) CHECK(condition_from_string(to_string(c)) == c);
}

TEST_CASE("episode config survives a JSON round trip")
{
    EpisodeConfig cfg = short_config(Condition::PushOnly, 77);
    cfg.cop_room = "r1";
    cfg.robber_start = Eigen::Vector2d(9.0, 1.0);
    cfg.human.answer_prob = 0.6;
    cfg.hierarchy.questions = 5;
    cfg.hierarchy.interleave = Interleave::ObjectFirst;
    const auto j = episode_config_to_json(cfg);
    CHECK(episode_config_to_json(episode_config_from_json(j)) == j);
    CHECK(episode_config_to_json(episode_config_from_json(nlohmann::json::object())) ==
          episode_config_to_json(EpisodeConfig{}));
}

TEST_CASE("ticking a finished episode throws")
{
    EpisodeConfig cfg = short_config(Condition::NoHuman, 2);
    cfg.max_steps = 2;
    EpisodeRunner run(chain3(), codebook3(), bundle3(), cfg);
    while (!run.finished()) (void)run.tick();
    CHECK(run.tick_index() <= 2);
    CHECK_THROWS_AS((void)run.tick(), std::logic_error);
    CHECK_THROWS_AS(run.submit_answer(0, Answer::Yes), InputRejected);
}

TEST_CASE("quantiles interpolate between order statistics")
{
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == doctest::Approx(2.0));
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({5.0}, 0.75) == doctest::Approx(5.0));
    CHECK_THROWS_AS((void)quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("batches pair runs across conditions")
{
    EpisodeConfig base;
    base.max_steps = 15;
    const auto s = run_batch(chain3(), codebook3(), bundle3(), {Condition::NoHuman, Condition::Both}, 3, 40, base);
    REQUIRE(s.rows.size() == 2);
    for (const auto& row : s.rows) {
        REQUIRE(row.steps.size() == 3);
        for (int i = 0; i < 3; ++i) {
            EpisodeConfig cfg = base;
            cfg.condition = row.condition;
            cfg.seed = 40 + static_cast<std::uint64_t>(i);
            const auto log = run_episode(chain3(), codebook3(), bundle3(), cfg);
            CHECK(row.steps[static_cast<std::size_t>(i)] == log.catch_step.value_or(base.max_steps));
        }
        const std::vector<double> v(row.steps.begin(), row.steps.end());
        CHECK(row.median == doctest::Approx(quantile(v, 0.5)));
        CHECK(row.q1 <= row.median);
        CHECK(row.median <= row.q3);
    }
    CHECK_THROWS_AS((void)s.at(Condition::PullOnly), std::out_of_range);
    CHECK(batch_to_json(s).at("conditions").size() == 2);
    CHECK_THROWS_AS((void)run_batch(chain3(), codebook3(), bundle3(), {Condition::Both}, 0, 1), std::invalid_argument);
}
