#pragma once

#include "cnr/map_config.hpp"
#include "cnr/softmax.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnr {

enum class Polarity { Is, IsNot };
enum class Relation { Left, Right, Front, Behind, Near, Inside };

[[nodiscard]] const char* to_string(Polarity p);
[[nodiscard]] const char* to_string(Relation r);
[[nodiscard]] Polarity polarity_from_string(const std::string& s);
[[nodiscard]] Relation relation_from_string(const std::string& s);

/// "The robber is / is not <relation> <anchor>". Inside pairs with room
/// anchors; the spatial relations and Near pair with object anchors.
struct SemanticStatement {
    Polarity polarity = Polarity::Is;
    std::string anchor;
    Relation relation = Relation::Inside;

    friend bool operator==(const SemanticStatement&, const SemanticStatement&) = default;
    friend auto operator<=>(const SemanticStatement&, const SemanticStatement&) = default;
};

[[nodiscard]] nlohmann::json statement_to_json(const SemanticStatement& s);
[[nodiscard]] SemanticStatement statement_from_json(const nlohmann::json& j);

class UnknownAnchor : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A statement resolved to a softmax model over the 2-D robber position and
/// the classes that make it true.
struct GroundedStatement {
    const SoftmaxModel* model = nullptr;
    std::vector<int> classes;
};

/// The shared vocabulary of statements for one map, with the likelihood
/// model behind each anchor.
class Codebook {
public:
    Codebook() = default;
    explicit Codebook(const MapConfig& map, double steepness = kDefaultSteepness);

    [[nodiscard]] const MapConfig& map() const { return map_; }
    /// True when the anchor exists and the relation suits its kind.
    [[nodiscard]] bool valid(const SemanticStatement& s) const;
    /// Throws UnknownAnchor for unknown anchors and std::invalid_argument for
    /// relation/anchor kinds that do not combine.
    [[nodiscard]] GroundedStatement ground(const SemanticStatement& s) const;
    /// P(statement | robber at p).
    [[nodiscard]] double likelihood(const SemanticStatement& s, const Eigen::Vector2d& robber) const;
    /// Every valid statement, rooms first, in map order.
    [[nodiscard]] std::vector<SemanticStatement> statements() const;

    [[nodiscard]] const SoftmaxModel& room_model(std::size_t room) const { return room_models_.at(room); }
    [[nodiscard]] const SoftmaxModel& relation_model(std::size_t object) const { return relation_models_.at(object); }

    /// Human-readable text, e.g. "Is the robber in Kitchen?" or
    /// "The robber is not in front of the Fern."
    [[nodiscard]] std::string question_text(const SemanticStatement& s) const;
    [[nodiscard]] std::string statement_text(const SemanticStatement& s) const;

private:
    [[nodiscard]] std::string anchor_label(const SemanticStatement& s) const;

    MapConfig map_;
    std::vector<SoftmaxModel> room_models_;
    std::vector<SoftmaxModel> relation_models_;
    std::vector<SoftmaxModel> near_models_;
};

/// Free-function form of Codebook::likelihood.
[[nodiscard]] double statement_likelihood(const Codebook& codebook, const SemanticStatement& s,
                                          const Eigen::Vector2d& robber);

} // namespace cnr
