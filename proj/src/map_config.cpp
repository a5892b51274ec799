#include "cnr/map_config.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cnr {

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p)
{
    const Eigen::Vector2d ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

// Separating-axis test; polygons that only share an edge do not overlap.
bool polygons_overlap(const std::vector<Eigen::Vector2d>& a, const std::vector<Eigen::Vector2d>& b)
{
    constexpr double kTouch = 1e-9;
    for (const auto* poly : {&a, &b}) {
        for (std::size_t i = 0; i < poly->size(); ++i) {
            const Eigen::Vector2d e = (*poly)[(i + 1) % poly->size()] - (*poly)[i];
            const Eigen::Vector2d axis(-e.y(), e.x());
            double amin = std::numeric_limits<double>::infinity(), amax = -amin;
            double bmin = amin, bmax = -amin;
            for (const auto& p : a) {
                amin = std::min(amin, axis.dot(p));
                amax = std::max(amax, axis.dot(p));
            }
            for (const auto& p : b) {
                bmin = std::min(bmin, axis.dot(p));
                bmax = std::max(bmax, axis.dot(p));
            }
            const double scale = axis.norm();
            if (amax <= bmin + kTouch * scale || bmax <= amin + kTouch * scale) return false;
        }
    }
    return true;
}

Eigen::Vector2d read_point(const nlohmann::json& j)
{
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("map: expected a 2-element point");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace

std::optional<std::size_t> MapConfig::room_index(const std::string& id) const
{
    for (std::size_t i = 0; i < rooms.size(); ++i)
        if (rooms[i].id == id) return i;
    return std::nullopt;
}

std::optional<std::size_t> MapConfig::object_index(const std::string& id) const
{
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (objects[i].id == id) return i;
    return std::nullopt;
}

std::vector<std::size_t> MapConfig::objects_in(std::size_t room) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (objects[i].room == rooms.at(room).id) out.push_back(i);
    return out;
}

const Door* MapConfig::door_between(std::size_t a, std::size_t b) const
{
    const std::string& ia = rooms.at(a).id;
    const std::string& ib = rooms.at(b).id;
    for (const auto& d : doors)
        if ((d.a == ia && d.b == ib) || (d.a == ib && d.b == ia)) return &d;
    return nullptr;
}

std::vector<std::size_t> MapConfig::neighbours(std::size_t room) const
{
    std::vector<std::size_t> out;
    for (const auto& id : rooms.at(room).adjacent)
        if (auto k = room_index(id)) out.push_back(*k);
    return out;
}

bool is_convex(const std::vector<Eigen::Vector2d>& polygon)
{
    const std::size_t n = polygon.size();
    if (n < 3) return false;
    int sign = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d e0 = polygon[(i + 1) % n] - polygon[i];
        const Eigen::Vector2d e1 = polygon[(i + 2) % n] - polygon[(i + 1) % n];
        const double c = cross(e0, e1);
        if (std::abs(c) < 1e-12) continue;
        const int s = c > 0 ? 1 : -1;
        if (sign == 0) sign = s;
        else if (s != sign) return false;
    }
    return sign != 0;
}

double polygon_area(const std::vector<Eigen::Vector2d>& polygon)
{
    double a = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) a += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
    return 0.5 * std::abs(a);
}

Eigen::Vector2d polygon_centroid(const std::vector<Eigen::Vector2d>& polygon)
{
    double a = 0.0;
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const auto& p = polygon[i];
        const auto& q = polygon[(i + 1) % polygon.size()];
        const double w = cross(p, q);
        a += w;
        c += w * (p + q);
    }
    if (std::abs(a) < 1e-15) {
        for (const auto& p : polygon) c += p;
        return c / static_cast<double>(polygon.size());
    }
    return c / (3.0 * a);
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> polygon_bounds(const std::vector<Eigen::Vector2d>& polygon)
{
    Eigen::Vector2d lo = polygon.front();
    Eigen::Vector2d hi = polygon.front();
    for (const auto& p : polygon) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return {lo, hi};
}

bool polygon_contains(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p, double tolerance)
{
    const std::size_t n = polygon.size();
    const double orient = cross(polygon[1] - polygon[0], polygon[2] - polygon[1]) >= 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d e = polygon[(i + 1) % n] - polygon[i];
        if (orient * cross(e, p - polygon[i]) < -tolerance * e.norm()) return false;
    }
    return true;
}

double boundary_distance(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p)
{
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < polygon.size(); ++i)
        d = std::min(d, segment_distance(polygon[i], polygon[(i + 1) % polygon.size()], p));
    return d;
}

std::optional<std::size_t> room_containing(const MapConfig& map, const Eigen::Vector2d& p)
{
    for (std::size_t i = 0; i < map.rooms.size(); ++i)
        if (polygon_contains(map.rooms[i].polygon, p)) return i;
    return std::nullopt;
}

std::size_t nearest_room(const MapConfig& map, const Eigen::Vector2d& p)
{
    if (auto r = room_containing(map, p)) return *r;
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < map.rooms.size(); ++i) {
        const double d = boundary_distance(map.rooms[i].polygon, p);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> room_path(const MapConfig& map, std::size_t from, std::size_t to)
{
    const std::size_t n = map.rooms.size();
    if (from >= n || to >= n) throw std::out_of_range("room_path: room index out of range");
    std::vector<std::size_t> parent(n, n);
    std::deque<std::size_t> queue{from};
    parent[from] = from;
    while (!queue.empty()) {
        const std::size_t r = queue.front();
        queue.pop_front();
        if (r == to) break;
        for (std::size_t k : map.neighbours(r))
            if (parent[k] == n) {
                parent[k] = r;
                queue.push_back(k);
            }
    }
    if (parent[to] == n) return {};
    std::vector<std::size_t> path{to};
    while (path.back() != from) path.push_back(parent[path.back()]);
    std::reverse(path.begin(), path.end());
    return path;
}

bool move_is_legal(const MapConfig& map, const Eigen::Vector2d& from, const Eigen::Vector2d& to)
{
    auto current = room_containing(map, from);
    if (!current) return false;
    const double length = (to - from).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(length / 0.05)));
    Eigen::Vector2d last = from;
    for (int i = 1; i <= steps; ++i) {
        const Eigen::Vector2d p = from + (to - from) * (static_cast<double>(i) / steps);
        if (polygon_contains(map.rooms[*current].polygon, p)) {
            last = p;
            continue;
        }
        const auto next = room_containing(map, p);
        if (!next) return false;
        const Door* door = map.door_between(*current, *next);
        if (!door) return false;
        // Bisect for the point where the path leaves the current room.
        Eigen::Vector2d inside = last;
        Eigen::Vector2d outside = p;
        for (int k = 0; k < 30; ++k) {
            const Eigen::Vector2d mid = 0.5 * (inside + outside);
            if (polygon_contains(map.rooms[*current].polygon, mid)) inside = mid;
            else outside = mid;
        }
        if ((inside - door->center).norm() > door->half_width) return false;
        current = next;
        last = p;
    }
    return true;
}

Eigen::Vector2d clip_move(const MapConfig& map, const Eigen::Vector2d& from, const Eigen::Vector2d& to)
{
    return move_is_legal(map, from, to) ? to : from;
}

void validate_map(const MapConfig& map)
{
    auto fail = [&](const std::string& what) { throw std::invalid_argument("map '" + map.name + "': " + what); };
    if (map.rooms.empty()) fail("no rooms");
    for (std::size_t i = 0; i < map.rooms.size(); ++i) {
        const Room& r = map.rooms[i];
        if (!is_convex(r.polygon)) fail("room '" + r.id + "' is not a convex polygon");
        for (std::size_t j = 0; j < i; ++j) {
            if (map.rooms[j].id == r.id) fail("duplicate room id '" + r.id + "'");
            if (polygons_overlap(r.polygon, map.rooms[j].polygon))
                fail("rooms '" + r.id + "' and '" + map.rooms[j].id + "' overlap");
        }
    }
    for (std::size_t i = 0; i < map.rooms.size(); ++i)
        for (const auto& id : map.rooms[i].adjacent) {
            const auto k = map.room_index(id);
            if (!k) fail("room '" + map.rooms[i].id + "' lists unknown neighbour '" + id + "'");
            const auto& back = map.rooms[*k].adjacent;
            if (std::find(back.begin(), back.end(), map.rooms[i].id) == back.end())
                fail("adjacency between '" + map.rooms[i].id + "' and '" + id + "' is not symmetric");
            const Door* door = map.door_between(i, *k);
            if (!door) fail("no door between '" + map.rooms[i].id + "' and '" + id + "'");
            if (boundary_distance(map.rooms[i].polygon, door->center) > 1e-6 ||
                boundary_distance(map.rooms[*k].polygon, door->center) > 1e-6)
                fail("door between '" + map.rooms[i].id + "' and '" + id + "' is not on their shared wall");
        }
    for (const auto& d : map.doors) {
        const auto a = map.room_index(d.a);
        const auto b = map.room_index(d.b);
        if (!a || !b) fail("door references an unknown room");
        const auto& adj = map.rooms[*a].adjacent;
        if (std::find(adj.begin(), adj.end(), d.b) == adj.end()) fail("door joins rooms that are not adjacent");
        if (!(d.half_width > 0.0)) fail("door half width must be positive");
    }
    for (std::size_t i = 0; i < map.rooms.size(); ++i)
        if (room_path(map, 0, i).empty()) fail("room graph is disconnected at '" + map.rooms[i].id + "'");
    for (std::size_t i = 0; i < map.objects.size(); ++i) {
        const MapObject& o = map.objects[i];
        for (std::size_t j = 0; j < i; ++j)
            if (map.objects[j].id == o.id) fail("duplicate object id '" + o.id + "'");
        if (map.room_index(o.id)) fail("object id '" + o.id + "' collides with a room id");
        const auto r = map.room_index(o.room);
        if (!r) fail("object '" + o.id + "' names unknown room '" + o.room + "'");
        if (!polygon_contains(map.rooms[*r].polygon, {o.pose.x, o.pose.y}))
            fail("object '" + o.id + "' lies outside its room");
        if (!(o.footprint.along > 0.0 && o.footprint.across > 0.0)) fail("object '" + o.id + "' has a degenerate footprint");
    }
    if (!room_containing(map, map.cop_start)) fail("cop start lies outside every room");
    for (const auto& s : map.robber_spawns)
        if (!map.room_index(s)) fail("unknown robber spawn room '" + s + "'");
}

MapConfig map_from_json(const nlohmann::json& j)
{
    MapConfig m;
    m.name = j.value("name", "");
    for (const auto& r : j.at("rooms")) {
        Room room;
        room.id = r.at("id").get<std::string>();
        room.label = r.value("label", room.id);
        for (const auto& p : r.at("polygon")) room.polygon.push_back(read_point(p));
        room.adjacent = r.value("adjacent", std::vector<std::string>{});
        room.camera = r.value("camera", false);
        m.rooms.push_back(std::move(room));
    }
    for (const auto& d : j.value("doors", nlohmann::json::array())) {
        const auto ids = d.at("rooms").get<std::vector<std::string>>();
        if (ids.size() != 2) throw std::invalid_argument("map: a door joins exactly two rooms");
        m.doors.push_back({ids[0], ids[1], read_point(d.at("center")), d.value("half_width", 0.5)});
    }
    for (const auto& o : j.value("objects", nlohmann::json::array())) {
        MapObject obj;
        obj.id = o.at("id").get<std::string>();
        obj.label = o.value("label", obj.id);
        obj.room = o.at("room").get<std::string>();
        const auto pose = o.at("pose").get<std::vector<double>>();
        if (pose.size() != 3) throw std::invalid_argument("map: object pose is [x, y, heading]");
        obj.pose = {pose[0], pose[1], pose[2]};
        const auto fp = o.value("footprint", std::vector<double>{0.5, 0.5});
        if (fp.size() != 2) throw std::invalid_argument("map: object footprint is [along, across]");
        obj.footprint = {fp[0], fp[1]};
        m.objects.push_back(std::move(obj));
    }
    m.cop_start = read_point(j.at("cop_start"));
    m.robber_spawns = j.value("robber_spawns", std::vector<std::string>{});
    return m;
}

nlohmann::json map_to_json(const MapConfig& map)
{
    nlohmann::json j;
    j["name"] = map.name;
    j["rooms"] = nlohmann::json::array();
    for (const auto& r : map.rooms) {
        nlohmann::json poly = nlohmann::json::array();
        for (const auto& p : r.polygon) poly.push_back({p.x(), p.y()});
        j["rooms"].push_back({{"id", r.id}, {"label", r.label}, {"polygon", poly}, {"adjacent", r.adjacent}, {"camera", r.camera}});
    }
    j["doors"] = nlohmann::json::array();
    for (const auto& d : map.doors)
        j["doors"].push_back({{"rooms", {d.a, d.b}}, {"center", {d.center.x(), d.center.y()}}, {"half_width", d.half_width}});
    j["objects"] = nlohmann::json::array();
    for (const auto& o : map.objects)
        j["objects"].push_back({{"id", o.id},
                                {"label", o.label},
                                {"room", o.room},
                                {"pose", {o.pose.x, o.pose.y, o.pose.heading}},
                                {"footprint", {o.footprint.along, o.footprint.across}}});
    j["cop_start"] = {map.cop_start.x(), map.cop_start.y()};
    j["robber_spawns"] = map.robber_spawns;
    return j;
}

MapConfig load_map(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open map file '" + path + "'");
    MapConfig m = map_from_json(nlohmann::json::parse(in));
    validate_map(m);
    return m;
}

} // namespace cnr
