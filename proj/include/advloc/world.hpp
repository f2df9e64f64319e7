#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advloc/common.hpp"

namespace advloc::world {

enum class StreetAxis { EastWest, NorthSouth };

// Axis-aligned street segment spanning the full map extent.
// `center` is the centerline coordinate (y for east-west, x for north-south).
struct Street {
    int id = 0;
    StreetAxis axis = StreetAxis::EastWest;
    double center = 0.0;
    double half_width = 25.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(Vec2 p) const {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
    bool intersects(const Rect& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

struct BuildingBox {
    Rect footprint;
    double height = 0.0;
    uint64_t texture_seed = 0;
};

struct Intersection {
    int id = 0;
    int col = 0;  // index of the north-south street
    int row = 0;  // index of the east-west street
    Vec2 pos;
    int street_ns = 0;
    int street_ew = 0;
};

struct Billboard {
    Vec3 center;
    double width = 6.0;
    double height = 3.0;
    Vec2 normal;  // unit, horizontal; the front face looks along this
    int cells = 16;
};

struct CityModel {
    double extent_x = 0.0;
    double extent_y = 0.0;
    double sidewalk_width = 5.0;
    std::vector<Street> streets;
    std::vector<BuildingBox> buildings;
    std::vector<Intersection> intersections;
    Billboard billboard;
};

struct GridRef {
    int col = 0;
    int row = 0;
};

struct CityConfig {
    double extent_x = 600.0;
    double extent_y = 600.0;
    int streets_ew = 4;
    int streets_ns = 4;
    double street_width = 50.0;
    double sidewalk_width = 5.0;
    double street_jitter_frac = 0.15;

    double building_min_height = 8.0;
    double building_max_height = 35.0;
    double building_margin = 2.0;   // gap between sidewalk edge and facade
    double lot_target = 45.0;       // target lot edge length for subdivision
    double empty_lot_prob = 0.08;

    // Scenario: drive from A through the turn intersection B toward C.
    GridRef route_from{1, 0};
    GridRef route_turn{1, 2};
    GridRef route_to{2, 2};

    double billboard_width = 6.0;
    double billboard_height = 3.0;
    double billboard_center_z = 3.5;
    double billboard_setback = 15.0;  // meters before the stop line
};

struct Route {
    std::vector<Vec2> waypoints;
    std::vector<int> waypoint_ids;
    int target_intersection = 0;
    Vec2 approach_axis;  // unit direction of the final straight segment A->B
};

CityModel generate_city(uint64_t seed, const CityConfig& config);

Route make_route(const CityModel& city, int from_id, int turn_id, int to_id);

const Intersection& intersection_at(const CityModel& city, int col, int row);

// Road surface rectangle (without sidewalks).
Rect street_rect(const Street& s);
// Road plus both sidewalk strips.
Rect street_rect_with_sidewalks(const Street& s, double sidewalk_width);

bool on_any_street(const CityModel& city, Vec2 p);
// True if p lies on a sidewalk strip (next to a road, not on any road).
bool on_sidewalk(const CityModel& city, Vec2 p);

// Throws if a generated model violates its geometric invariants.
void validate_city(const CityModel& city);

nlohmann::json city_to_json(const CityModel& city);
CityModel city_from_json(const nlohmann::json& j);
void save_city(const CityModel& city, const std::string& path);
CityModel load_city(const std::string& path);

nlohmann::json city_config_to_json(const CityConfig& config);
CityConfig city_config_from_json(const nlohmann::json& j);

}  // namespace advloc::world
