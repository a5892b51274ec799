#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cnr {

/// One softmax class: logit = w . s + b.
struct SoftmaxClass {
    std::string label;
    Eigen::VectorXd w;
    double b = 0.0;
};

/// Multinomial logistic likelihood P(D = i | s) over a continuous state.
///
/// Several raw classes may share a label; a label then names the union of
/// those classes (used for the convex "Inside/Outside" membership models,
/// where Outside is one class per polygon edge).
class SoftmaxModel {
public:
    SoftmaxModel() = default;
    SoftmaxModel(std::vector<SoftmaxClass> classes);

    [[nodiscard]] Eigen::Index state_dim() const { return weights_.cols(); }
    [[nodiscard]] std::size_t class_count() const { return labels_.size(); }
    [[nodiscard]] const std::string& label(std::size_t i) const { return labels_.at(i); }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    [[nodiscard]] const Eigen::MatrixXd& weights() const { return weights_; }
    [[nodiscard]] const Eigen::VectorXd& biases() const { return biases_; }

    /// Raw class indices carrying the label; throws if the label is unknown.
    [[nodiscard]] std::vector<int> classes_with_label(const std::string& label) const;
    /// Indices not in the given set.
    [[nodiscard]] std::vector<int> complement(const std::vector<int>& classes) const;

    [[nodiscard]] Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::VectorXd>& s) const;
    [[nodiscard]] double class_probability(std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& s) const;
    [[nodiscard]] double label_probability(const std::string& label, const Eigen::Ref<const Eigen::VectorXd>& s) const;
    [[nodiscard]] double set_probability(const std::vector<int>& classes,
                                         const Eigen::Ref<const Eigen::VectorXd>& s) const;

    /// Same model acting on the sub-vector s[offset .. offset+dim) of a
    /// larger state.
    [[nodiscard]] SoftmaxModel embedded(Eigen::Index total_dim, Eigen::Index offset) const;
    /// Same model acting on s[to .. to+dim) - s[from .. from+dim).
    [[nodiscard]] SoftmaxModel on_difference(Eigen::Index total_dim, Eigen::Index from, Eigen::Index to) const;

private:
    std::vector<std::string> labels_;
    Eigen::MatrixXd weights_; // class_count x state_dim
    Eigen::VectorXd biases_;
};

/// Numerically safe softmax of a logit vector.
[[nodiscard]] Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// Default boundary steepness (1/m): class probability moves 0.1 -> 0.9 over
/// 0.3 m across a boundary between two classes.
[[nodiscard]] double steepness_for_transition(double width_m);
inline const double kDefaultSteepness = steepness_for_transition(0.3);

struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0; ///< radians, front of the object
};

struct HalfExtents {
    double along = 0.5;  ///< half length in the heading direction (m)
    double across = 0.5; ///< half width perpendicular to heading (m)
};

/// Five-class {At, Left, Right, Front, Behind} model over a 2-D position.
/// Boundaries run through the footprint edges in the object's frame; Left is
/// 90 degrees counter-clockwise from the heading.
[[nodiscard]] SoftmaxModel build_object_relation_model(const Pose2& pose, const HalfExtents& footprint,
                                                       double steepness = kDefaultSteepness);

/// Inside/Outside model over a 2-D position for a convex polygon: one Inside
/// class plus one Outside class per edge.
[[nodiscard]] SoftmaxModel build_room_membership_model(const std::vector<Eigen::Vector2d>& polygon,
                                                       double steepness = kDefaultSteepness);

/// Near/NotNear model: membership in the footprint inflated by margin.
[[nodiscard]] SoftmaxModel build_near_model(const Pose2& pose, const HalfExtents& footprint, double margin,
                                            double steepness = kDefaultSteepness);

/// The camera box edge is sharper than a spoken boundary: 0.1 -> 0.9 over 0.1 m.
inline const double kViewconeSteepness = steepness_for_transition(0.1);

/// Viewcone approximation: Detection/NoDetection for a square box of the
/// given half width centred on the origin of a 2-D displacement.
[[nodiscard]] SoftmaxModel build_box_detection_model(double half_width, double steepness = kViewconeSteepness);

} // namespace cnr
