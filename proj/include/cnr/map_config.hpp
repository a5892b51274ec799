#pragma once

#include "cnr/softmax.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace cnr {

struct Room {
    std::string id;
    std::string label;
    std::vector<Eigen::Vector2d> polygon; ///< convex, either orientation
    std::vector<std::string> adjacent;
    bool camera = false; ///< a security camera lets the human see into this room
};

/// Opening in the wall shared by two rooms.
struct Door {
    std::string a;
    std::string b;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double half_width = 0.5;
};

struct MapObject {
    std::string id;
    std::string label;
    std::string room;
    Pose2 pose;
    HalfExtents footprint;
};

struct MapConfig {
    std::string name;
    std::vector<Room> rooms;
    std::vector<Door> doors;
    std::vector<MapObject> objects;
    Eigen::Vector2d cop_start = Eigen::Vector2d::Zero();
    std::vector<std::string> robber_spawns; ///< rooms the robber may start in

    [[nodiscard]] std::optional<std::size_t> room_index(const std::string& id) const;
    [[nodiscard]] std::optional<std::size_t> object_index(const std::string& id) const;
    /// Indices of the objects placed in a room.
    [[nodiscard]] std::vector<std::size_t> objects_in(std::size_t room) const;
    [[nodiscard]] const Door* door_between(std::size_t a, std::size_t b) const;
    [[nodiscard]] std::vector<std::size_t> neighbours(std::size_t room) const;
};

/// Throws std::invalid_argument describing the first violated invariant:
/// convex non-overlapping rooms, symmetric connected adjacency with a door
/// on every shared wall, objects inside their rooms, cop start inside the map.
void validate_map(const MapConfig& map);

[[nodiscard]] MapConfig map_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json map_to_json(const MapConfig& map);
/// Reads and validates a map file.
[[nodiscard]] MapConfig load_map(const std::string& path);

// Geometry on convex polygons.
[[nodiscard]] bool is_convex(const std::vector<Eigen::Vector2d>& polygon);
[[nodiscard]] bool polygon_contains(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p,
                                    double tolerance = 1e-9);
/// Distance from p to the polygon boundary (zero on the boundary).
[[nodiscard]] double boundary_distance(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p);
[[nodiscard]] Eigen::Vector2d polygon_centroid(const std::vector<Eigen::Vector2d>& polygon);
[[nodiscard]] double polygon_area(const std::vector<Eigen::Vector2d>& polygon);
/// Axis-aligned bounds as (min corner, max corner).
[[nodiscard]] std::pair<Eigen::Vector2d, Eigen::Vector2d> polygon_bounds(const std::vector<Eigen::Vector2d>& polygon);

/// First room containing p, if any.
[[nodiscard]] std::optional<std::size_t> room_containing(const MapConfig& map, const Eigen::Vector2d& p);
/// Room containing p, else the room with the nearest boundary.
[[nodiscard]] std::size_t nearest_room(const MapConfig& map, const Eigen::Vector2d& p);
/// Breadth-first shortest room path, both ends included. Empty if unreachable.
[[nodiscard]] std::vector<std::size_t> room_path(const MapConfig& map, std::size_t from, std::size_t to);

/// True when the straight move stays inside the rooms and changes room only
/// through a door.
[[nodiscard]] bool move_is_legal(const MapConfig& map, const Eigen::Vector2d& from, const Eigen::Vector2d& to);
/// The move if legal, otherwise the start point.
[[nodiscard]] Eigen::Vector2d clip_move(const MapConfig& map, const Eigen::Vector2d& from, const Eigen::Vector2d& to);

} // namespace cnr
