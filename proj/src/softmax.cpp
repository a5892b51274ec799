#include "cnr/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cnr {

SoftmaxModel::SoftmaxModel(std::vector<SoftmaxClass> classes)
{
    if (classes.size() < 2) throw std::invalid_argument("softmax model needs at least two classes");
    const Eigen::Index n = classes.front().w.size();
    if (n == 0) throw std::invalid_argument("softmax model needs a positive state dimension");
    weights_.resize(static_cast<Eigen::Index>(classes.size()), n);
    biases_.resize(static_cast<Eigen::Index>(classes.size()));
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].w.size() != n) throw std::invalid_argument("softmax class weight dimension mismatch");
        weights_.row(static_cast<Eigen::Index>(i)) = classes[i].w.transpose();
        biases_(static_cast<Eigen::Index>(i)) = classes[i].b;
        labels_.push_back(std::move(classes[i].label));
    }
}

std::vector<int> SoftmaxModel::classes_with_label(const std::string& label) const
{
    std::vector<int> out;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) out.push_back(static_cast<int>(i));
    if (out.empty()) throw std::invalid_argument("softmax model has no class labelled '" + label + "'");
    return out;
}

std::vector<int> SoftmaxModel::complement(const std::vector<int>& classes) const
{
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(labels_.size()); ++i)
        if (std::find(classes.begin(), classes.end(), i) == classes.end()) out.push_back(i);
    return out;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits)
{
    const double top = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - top).exp();
    return e / e.sum();
}

Eigen::VectorXd SoftmaxModel::probabilities(const Eigen::Ref<const Eigen::VectorXd>& s) const
{
    if (s.size() != state_dim()) throw std::invalid_argument("softmax: state dimension mismatch");
    return softmax(weights_ * s + biases_);
}

double SoftmaxModel::class_probability(std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& s) const
{
    if (i >= class_count()) throw std::out_of_range("softmax: class index out of range");
    return probabilities(s)(static_cast<Eigen::Index>(i));
}

double SoftmaxModel::label_probability(const std::string& label, const Eigen::Ref<const Eigen::VectorXd>& s) const
{
    return set_probability(classes_with_label(label), s);
}

double SoftmaxModel::set_probability(const std::vector<int>& classes, const Eigen::Ref<const Eigen::VectorXd>& s) const
{
    const Eigen::VectorXd p = probabilities(s);
    double sum = 0.0;
    for (int i : classes) {
        if (i < 0 || i >= p.size()) throw std::out_of_range("softmax: class index out of range");
        sum += p(i);
    }
    return std::clamp(sum, 0.0, 1.0); // a few ulps over 1 when the set is nearly everything
}

SoftmaxModel SoftmaxModel::embedded(Eigen::Index total_dim, Eigen::Index offset) const
{
    if (offset < 0 || offset + state_dim() > total_dim) throw std::invalid_argument("softmax embed: bad offset");
    std::vector<SoftmaxClass> out;
    for (std::size_t i = 0; i < class_count(); ++i) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(total_dim);
        w.segment(offset, state_dim()) = weights_.row(static_cast<Eigen::Index>(i)).transpose();
        out.push_back({labels_[i], w, biases_(static_cast<Eigen::Index>(i))});
    }
    return SoftmaxModel(std::move(out));
}

SoftmaxModel SoftmaxModel::on_difference(Eigen::Index total_dim, Eigen::Index from, Eigen::Index to) const
{
    const Eigen::Index n = state_dim();
    if (from < 0 || to < 0 || from + n > total_dim || to + n > total_dim)
        throw std::invalid_argument("softmax difference embed: bad offsets");
    std::vector<SoftmaxClass> out;
    for (std::size_t i = 0; i < class_count(); ++i) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(total_dim);
        const Eigen::VectorXd row = weights_.row(static_cast<Eigen::Index>(i)).transpose();
        w.segment(to, n) += row;
        w.segment(from, n) -= row;
        out.push_back({labels_[i], w, biases_(static_cast<Eigen::Index>(i))});
    }
    return SoftmaxModel(std::move(out));
}

double steepness_for_transition(double width_m)
{
    // logistic(k d) crosses 0.1 and 0.9 at d = -/+ ln(9)/k.
    return 2.0 * std::log(9.0) / width_m;
}

SoftmaxModel build_object_relation_model(const Pose2& pose, const HalfExtents& footprint, double steepness)
{
    if (!(footprint.along > 0.0) || !(footprint.across > 0.0))
        throw std::invalid_argument("object footprint must have positive half extents");
    if (!(steepness > 0.0)) throw std::invalid_argument("steepness must be positive");
    const Eigen::Vector2d center(pose.x, pose.y);
    const Eigen::Vector2d front(std::cos(pose.heading), std::sin(pose.heading));
    const Eigen::Vector2d left(-front.y(), front.x());
    const double k = steepness;

    // Class logit minus At logit = k (signed distance past the matching edge).
    auto edge_class = [&](std::string label, const Eigen::Vector2d& normal, double half) {
        return SoftmaxClass{std::move(label), k * normal, -k * (normal.dot(center) + half)};
    };
    std::vector<SoftmaxClass> classes;
    classes.push_back({"At", Eigen::Vector2d::Zero(), 0.0});
    classes.push_back(edge_class("Left", left, footprint.across));
    classes.push_back(edge_class("Right", -left, footprint.across));
    classes.push_back(edge_class("Front", front, footprint.along));
    classes.push_back(edge_class("Behind", -front, footprint.along));
    return SoftmaxModel(std::move(classes));
}

namespace {

double signed_area(const std::vector<Eigen::Vector2d>& poly)
{
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

} // namespace

SoftmaxModel build_room_membership_model(const std::vector<Eigen::Vector2d>& polygon, double steepness)
{
    if (polygon.size() < 3) throw std::invalid_argument("room polygon needs at least three vertices");
    if (!(steepness > 0.0)) throw std::invalid_argument("steepness must be positive");
    const double area = signed_area(polygon);
    if (std::abs(area) < 1e-12) throw std::invalid_argument("room polygon is degenerate");
    const double orient = area > 0 ? 1.0 : -1.0;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d e1 = polygon[(i + 1) % n] - polygon[i];
        const Eigen::Vector2d e2 = polygon[(i + 2) % n] - polygon[(i + 1) % n];
        const double cross = e1.x() * e2.y() - e1.y() * e2.x();
        if (orient * cross < -1e-12) throw std::invalid_argument("room polygon is not convex");
    }

    std::vector<SoftmaxClass> classes;
    classes.push_back({"Inside", Eigen::Vector2d::Zero(), 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d edge = polygon[(i + 1) % n] - polygon[i];
        const double len = edge.norm();
        if (len < 1e-12) continue;
        // Outward normal for the polygon's orientation.
        const Eigen::Vector2d normal = orient * Eigen::Vector2d(edge.y(), -edge.x()) / len;
        classes.push_back({"Outside", steepness * normal, -steepness * normal.dot(polygon[i])});
    }
    return SoftmaxModel(std::move(classes));
}

SoftmaxModel build_near_model(const Pose2& pose, const HalfExtents& footprint, double margin, double steepness)
{
    if (!(footprint.along > 0.0) || !(footprint.across > 0.0))
        throw std::invalid_argument("object footprint must have positive half extents");
    if (margin < 0.0) throw std::invalid_argument("near margin must be non-negative");
    const Eigen::Vector2d c(pose.x, pose.y);
    const Eigen::Vector2d f(std::cos(pose.heading), std::sin(pose.heading));
    const Eigen::Vector2d l(-f.y(), f.x());
    const double a = footprint.along + margin;
    const double b = footprint.across + margin;
    const std::vector<Eigen::Vector2d> box{c - a * f - b * l, c + a * f - b * l, c + a * f + b * l, c - a * f + b * l};
    SoftmaxModel inside = build_room_membership_model(box, steepness);
    std::vector<SoftmaxClass> classes;
    for (std::size_t i = 0; i < inside.class_count(); ++i)
        classes.push_back({i == 0 ? "Near" : "NotNear", inside.weights().row(static_cast<Eigen::Index>(i)).transpose(),
                           inside.biases()(static_cast<Eigen::Index>(i))});
    return SoftmaxModel(std::move(classes));
}

SoftmaxModel build_box_detection_model(double half_width, double steepness)
{
    if (!(half_width > 0.0)) throw std::invalid_argument("viewcone half width must be positive");
    const double h = half_width;
    const std::vector<Eigen::Vector2d> box{{-h, -h}, {h, -h}, {h, h}, {-h, h}};
    SoftmaxModel inside = build_room_membership_model(box, steepness);
    std::vector<SoftmaxClass> classes;
    for (std::size_t i = 0; i < inside.class_count(); ++i)
        classes.push_back({i == 0 ? "Detection" : "NoDetection",
                           inside.weights().row(static_cast<Eigen::Index>(i)).transpose(),
                           inside.biases()(static_cast<Eigen::Index>(i))});
    return SoftmaxModel(std::move(classes));
}

} // namespace cnr
