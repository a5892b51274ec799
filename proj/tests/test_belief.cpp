#include "cnr/belief.hpp"
#include "cnr/condense.hpp"

#include "belief_suite.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace cnr;

namespace {

const MapConfig& map1()
{
    static const MapConfig m = load_map(CNR_DATA_DIR "/maps/map1.json");
    return m;
}

const Codebook& codebook1()
{
    static const Codebook c(map1());
    return c;
}

GaussianComponent<double, 4> component(double w, const Eigen::Vector2d& cop, const Eigen::Vector2d& robber,
                                       double var)
{
    return oracle::belief_component(w, cop, robber, var);
}

double room_mass(const HybridBelief& b, const std::string& id)
{
    return b.rooms(static_cast<Eigen::Index>(*map1().room_index(id)));
}

} // namespace

TEST_CASE("discretization: hand cases")
{
    const Eigen::Vector2d cop(1.0, 4.0);
    // Library (0..4, 5..9) and study (4..8, 5..9).
    const GaussianMixture4 b({component(0.3, cop, {1.0, 6.0}, 0.1), component(0.2, cop, {2.0, 8.0}, 0.1),
                              component(0.5, cop, {6.0, 7.0}, 0.1)});
    const auto rooms = discretize_belief(b, map1());
    CHECK(rooms(*map1().room_index("library")) == doctest::Approx(0.5));
    CHECK(rooms(*map1().room_index("study")) == doctest::Approx(0.5));
    CHECK(rooms.sum() == doctest::Approx(1.0));

    const GaussianMixture4 one({component(0.7, cop, {7.0, 0.0}, 0.1), component(0.3, cop, {8.0, 1.0}, 2.0)});
    CHECK(discretize_belief(one, map1())(*map1().room_index("dining")) == doctest::Approx(1.0));

    // A mean past the outer wall goes to the closest room.
    const GaussianMixture4 out({component(1.0, cop, {-0.5, 7.0}, 0.1)});
    CHECK(assign_mixands(out, map1()).front() == *map1().room_index("library"));
}

TEST_CASE("discretization: sums to one, ignores order, survives condensation")
{
    const auto r = oracle::discretization_sweep(map1(), 10000, 200, 2024);
    CHECK(!r.negative);
    CHECK(r.worst_sum <= 1e-9);
    CHECK(r.worst_perm <= 1e-12);
    CHECK(r.worst_shift <= 1e-3);
}

TEST_CASE("conditioning to a room")
{
    const Eigen::Vector2d cop(1.0, 4.0);
    const std::size_t library = *map1().room_index("library");
    const std::size_t kitchen = *map1().room_index("kitchen");

    const GaussianMixture4 inside({component(0.4, cop, {1.0, 6.0}, 0.1), component(0.6, cop, {3.0, 8.0}, 0.1)});
    const auto same = condition_to_room(inside, map1(), library);
    REQUIRE(same.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(same[i].weight == doctest::Approx(inside[i].weight));
        CHECK(same[i].mean == inside[i].mean);
    }

    const auto broad = condition_to_room(inside, map1(), kitchen);
    REQUIRE(broad.size() == 1);
    CHECK((broad[0].mean.tail<2>() - polygon_centroid(map1().rooms[kitchen].polygon)).norm() < 1e-9);

    const GaussianMixture4 mixed({component(0.2, cop, {1.0, 6.0}, 0.1), component(0.8, cop, {2.0, 1.0}, 0.1)});
    const auto part = condition_to_room(mixed, map1(), library);
    REQUIRE(part.size() == 1);
    CHECK(part.total_weight() == doctest::Approx(1.0));
}

TEST_CASE("room priors and the initial belief")
{
    const Eigen::Vector2d cop = map1().cop_start;
    for (std::size_t r = 0; r < map1().rooms.size(); ++r) {
        const auto prior = room_prior(map1(), r, cop);
        CHECK(prior.total_weight() == doctest::Approx(1.0));
        for (const auto& c : prior) {
            CHECK(polygon_contains(map1().rooms[r].polygon, c.mean.tail<2>()));
            CHECK((c.mean.head<2>() - cop).norm() < 1e-12);
        }
        // Covers the room: the mixture mean is the centroid of a rectangle.
        CHECK((moments(prior).first.tail<2>() - polygon_centroid(map1().rooms[r].polygon)).norm() < 1e-6);
    }
    const auto b = initial_belief(map1(), cop);
    const double share = 1.0 / static_cast<double>(map1().rooms.size());
    for (Eigen::Index r = 0; r < b.rooms.size(); ++r) CHECK(b.rooms(r) == doctest::Approx(share));
    CHECK(b.step == 0);
}

TEST_CASE("anchoring the cop")
{
    Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
    cov(0, 2) = cov(2, 0) = 0.5; // robber x correlates with cop x
    const GaussianMixture4 gm({{1.0, Eigen::Vector4d(0.0, 0.0, 3.0, 3.0), cov}});
    const auto a = anchor_cop(gm, {1.0, 0.0});
    CHECK((a[0].mean.head<2>() - Eigen::Vector2d(1.0, 0.0)).norm() < 1e-12);
    // Gaussian conditioning: robber x shifts by 0.5 * 1 / 1 and loses 0.25 of its variance.
    CHECK(a[0].mean(2) == doctest::Approx(3.5));
    CHECK(a[0].covariance(2, 2) == doctest::Approx(0.75));
    CHECK(a[0].covariance(0, 0) == doctest::Approx(kCopPoseVariance));
    CHECK(a[0].covariance(0, 2) == doctest::Approx(0.0));
}

TEST_CASE("events")
{
    const auto b = initial_belief(map1(), map1().cop_start);

    SUBCASE("null answers change nothing")
    {
        ObservationEvent e;
        e.source = EventSource::PullAnswer;
        e.statement = {Polarity::Is, "study", Relation::Inside};
        e.answer = Answer::Null;
        const auto out = apply_event(b, e, codebook1());
        CHECK(!out.fused);
        CHECK(out.belief.rooms == b.rooms);
    }

    SUBCASE("negated room statement lowers that room")
    {
        ObservationEvent e;
        e.source = EventSource::PushStatement;
        e.statement = {Polarity::IsNot, "study", Relation::Inside};
        const auto out = apply_event(b, e, codebook1());
        REQUIRE(out.fused);
        CHECK(room_mass(out.belief, "study") < room_mass(b, "study"));
        CHECK(out.belief.rooms.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(out.belief.continuous.size() <= BeliefSettings{}.fusion.max_components);
    }

    SUBCASE("unknown anchors are rejected with a note")
    {
        ObservationEvent e;
        e.source = EventSource::PushStatement;
        e.statement = {Polarity::Is, "attic", Relation::Inside};
        const auto out = apply_event(b, e, codebook1());
        CHECK(!out.fused);
        CHECK(!out.note.empty());
    }

    SUBCASE("records round-trip")
    {
        ObservationEvent e;
        e.source = EventSource::PullAnswer;
        e.step = 7;
        e.statement = {Polarity::Is, map1().objects.front().id, Relation::Behind};
        e.answer = Answer::No;
        e.question_id = 12;
        const auto back = event_from_json(event_to_json(e));
        CHECK(back.source == e.source);
        CHECK(back.step == 7);
        CHECK(back.statement == e.statement);
        CHECK(back.answer == Answer::No);
        CHECK(back.question_id == 12);
        CHECK_THROWS((void)answer_from_string("maybe"));
        CHECK_THROWS((void)event_source_from_string("radio"));
    }
}

TEST_CASE("repeated no-detections empty the viewcone")
{
    const auto r = oracle::negative_information(5);
    MESSAGE("in-box ratio " << r.ratio << ", grid " << r.grid_ratio);
    CHECK(r.all_fused);
    CHECK(r.ratio < 0.05);
    CHECK(r.grid_ratio < 0.05);
}
