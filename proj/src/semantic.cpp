#include "cnr/semantic.hpp"

#include <array>

namespace cnr {

namespace {

constexpr std::array<Relation, 4> kSpatial{Relation::Left, Relation::Right, Relation::Front, Relation::Behind};

const char* relation_phrase(Relation r)
{
    switch (r) {
    case Relation::Left: return "to the left of the";
    case Relation::Right: return "to the right of the";
    case Relation::Front: return "in front of the";
    case Relation::Behind: return "behind the";
    case Relation::Near: return "near the";
    case Relation::Inside: return "in";
    }
    return "";
}

} // namespace

const char* to_string(Polarity p) { return p == Polarity::Is ? "is" : "is-not"; }

const char* to_string(Relation r)
{
    switch (r) {
    case Relation::Left: return "Left";
    case Relation::Right: return "Right";
    case Relation::Front: return "Front";
    case Relation::Behind: return "Behind";
    case Relation::Near: return "Near";
    case Relation::Inside: return "Inside";
    }
    return "";
}

Polarity polarity_from_string(const std::string& s)
{
    if (s == "is") return Polarity::Is;
    if (s == "is-not") return Polarity::IsNot;
    throw std::invalid_argument("unknown polarity '" + s + "'");
}

Relation relation_from_string(const std::string& s)
{
    for (Relation r : {Relation::Left, Relation::Right, Relation::Front, Relation::Behind, Relation::Near, Relation::Inside})
        if (s == to_string(r)) return r;
    throw std::invalid_argument("unknown relation '" + s + "'");
}

nlohmann::json statement_to_json(const SemanticStatement& s)
{
    return {{"polarity", to_string(s.polarity)}, {"anchor", s.anchor}, {"relation", to_string(s.relation)}};
}

SemanticStatement statement_from_json(const nlohmann::json& j)
{
    return {polarity_from_string(j.at("polarity").get<std::string>()), j.at("anchor").get<std::string>(),
            relation_from_string(j.at("relation").get<std::string>())};
}

Codebook::Codebook(const MapConfig& map, double steepness) : map_(map)
{
    for (const auto& r : map_.rooms) room_models_.push_back(build_room_membership_model(r.polygon, steepness));
    for (const auto& o : map_.objects) {
        relation_models_.push_back(build_object_relation_model(o.pose, o.footprint, steepness));
        near_models_.push_back(build_near_model(o.pose, o.footprint, 0.5, steepness));
    }
}

bool Codebook::valid(const SemanticStatement& s) const
{
    if (s.relation == Relation::Inside) return map_.room_index(s.anchor).has_value();
    return map_.object_index(s.anchor).has_value();
}

GroundedStatement Codebook::ground(const SemanticStatement& s) const
{
    GroundedStatement g;
    if (s.relation == Relation::Inside) {
        const auto r = map_.room_index(s.anchor);
        if (!r) {
            if (map_.object_index(s.anchor)) throw std::invalid_argument("Inside applies to rooms, not objects");
            throw UnknownAnchor("unknown room '" + s.anchor + "'");
        }
        g.model = &room_models_[*r];
        g.classes = g.model->classes_with_label("Inside");
    } else {
        const auto o = map_.object_index(s.anchor);
        if (!o) {
            if (map_.room_index(s.anchor)) throw std::invalid_argument(std::string(to_string(s.relation)) + " applies to objects, not rooms");
            throw UnknownAnchor("unknown object '" + s.anchor + "'");
        }
        if (s.relation == Relation::Near) {
            g.model = &near_models_[*o];
            g.classes = g.model->classes_with_label("Near");
        } else {
            g.model = &relation_models_[*o];
            g.classes = g.model->classes_with_label(to_string(s.relation));
        }
    }
    if (s.polarity == Polarity::IsNot) g.classes = g.model->complement(g.classes);
    return g;
}

double Codebook::likelihood(const SemanticStatement& s, const Eigen::Vector2d& robber) const
{
    const GroundedStatement g = ground(s);
    return g.model->set_probability(g.classes, robber);
}

double statement_likelihood(const Codebook& codebook, const SemanticStatement& s, const Eigen::Vector2d& robber)
{
    return codebook.likelihood(s, robber);
}

std::vector<SemanticStatement> Codebook::statements() const
{
    std::vector<SemanticStatement> out;
    for (Polarity p : {Polarity::Is, Polarity::IsNot}) {
        for (const auto& r : map_.rooms) out.push_back({p, r.id, Relation::Inside});
        for (const auto& o : map_.objects) {
            for (Relation rel : kSpatial) out.push_back({p, o.id, rel});
            out.push_back({p, o.id, Relation::Near});
        }
    }
    return out;
}

std::string Codebook::anchor_label(const SemanticStatement& s) const
{
    if (s.relation == Relation::Inside) {
        if (auto r = map_.room_index(s.anchor)) return map_.rooms[*r].label;
    } else if (auto o = map_.object_index(s.anchor)) {
        return map_.objects[*o].label;
    }
    return s.anchor;
}

std::string Codebook::question_text(const SemanticStatement& s) const
{
    return std::string("Is the robber ") + relation_phrase(s.relation) + " " + anchor_label(s) + "?";
}

std::string Codebook::statement_text(const SemanticStatement& s) const
{
    return std::string("The robber ") + (s.polarity == Polarity::Is ? "is " : "is not ") + relation_phrase(s.relation) +
           " " + anchor_label(s) + ".";
}

} // namespace cnr
