#pragma once

#include "cnr/map_config.hpp"

#include <string>

namespace cnr::fixture {

/// Rooms r0..r(n-1), each 4 m square, in a row along x with a door in each
/// shared wall. One object per room when `objects` is set.
inline MapConfig chain_map(int n, bool objects = false)
{
    MapConfig m;
    m.name = "chain";
    for (int i = 0; i < n; ++i) {
        Room r;
        r.id = "r" + std::to_string(i);
        r.label = "Room " + std::to_string(i);
        const double x0 = 4.0 * i;
        r.polygon = {{x0, 0.0}, {x0 + 4.0, 0.0}, {x0 + 4.0, 4.0}, {x0, 4.0}};
        if (i > 0) r.adjacent.push_back("r" + std::to_string(i - 1));
        if (i + 1 < n) r.adjacent.push_back("r" + std::to_string(i + 1));
        m.rooms.push_back(r);
        if (i + 1 < n) m.doors.push_back({r.id, "r" + std::to_string(i + 1), {x0 + 4.0, 2.0}, 0.5});
        if (objects) {
            MapObject o;
            o.id = "box" + std::to_string(i);
            o.label = "Box " + std::to_string(i);
            o.room = r.id;
            o.pose = {x0 + 2.0, 3.0, -1.5707963267948966};
            o.footprint = {0.3, 0.3};
            m.objects.push_back(o);
        }
    }
    m.cop_start = {2.0, 2.0};
    m.robber_spawns = {"r" + std::to_string(n - 1)};
    validate_map(m);
    return m;
}

} // namespace cnr::fixture
