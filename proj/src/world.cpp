#include "advloc/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace advloc::world {

namespace {

// Split [lo, hi] into roughly target-sized pieces with jittered cut points.
std::vector<std::pair<double, double>> subdivide_1d(double lo, double hi,
                                                    double target, Rng& rng) {
    std::vector<std::pair<double, double>> out;
    double span = hi - lo;
    if (span <= 0.0) return out;
    int n = std::max(1, static_cast<int>(std::round(span / target)));
    std::vector<double> cuts(n + 1);
    for (int i = 0; i <= n; ++i) cuts[i] = lo + span * i / n;
    double max_jitter = 0.15 * span / n;
    for (int i = 1; i < n; ++i) cuts[i] += rng.uniform(-max_jitter, max_jitter);
    for (int i = 0; i < n; ++i) out.emplace_back(cuts[i], cuts[i + 1]);
    return out;
}

std::vector<double> street_centers(int count, double extent, double road_width,
                                   double sidewalk, double jitter_frac, Rng& rng) {
    std::vector<double> centers(count);
    double slot = extent / count;
    double play = std::max(0.0, (slot - road_width - 2.0 * sidewalk) / 2.0);
    for (int i = 0; i < count; ++i) {
        double base = slot * (i + 0.5);
        centers[i] = base + rng.uniform(-1.0, 1.0) * jitter_frac * play;
    }
    return centers;
}

// Free intervals between sidewalk outer edges, clipped to [0, extent].
std::vector<std::pair<double, double>> free_intervals(
    const std::vector<double>& centers, double extent, double offset) {
    std::vector<std::pair<double, double>> out;
    double cursor = 0.0;
    for (double c : centers) {
        double lo = c - offset;
        if (lo - cursor > 1.0) out.emplace_back(cursor, lo);
        cursor = c + offset;
    }
    if (extent - cursor > 1.0) out.emplace_back(cursor, extent);
    return out;
}

const Street& connecting_street(const CityModel& city, const Intersection& a,
                                const Intersection& b) {
    if (a.col == b.col && a.row != b.row) return city.streets[a.street_ns];
    if (a.row == b.row && a.col != b.col) return city.streets[a.street_ew];
    throw RouteError("intersections " + std::to_string(a.id) + " and " +
                     std::to_string(b.id) + " do not share a street");
}

}  // namespace

Rect street_rect(const Street& s) {
    if (s.axis == StreetAxis::EastWest)
        return {s.lo, s.center - s.half_width, s.hi, s.center + s.half_width};
    return {s.center - s.half_width, s.lo, s.center + s.half_width, s.hi};
}

Rect street_rect_with_sidewalks(const Street& s, double sidewalk_width) {
    Rect r = street_rect(s);
    if (s.axis == StreetAxis::EastWest) {
        r.y0 -= sidewalk_width;
        r.y1 += sidewalk_width;
    } else {
        r.x0 -= sidewalk_width;
        r.x1 += sidewalk_width;
    }
    return r;
}

bool on_any_street(const CityModel& city, Vec2 p) {
    for (const Street& s : city.streets)
        if (street_rect(s).contains(p)) return true;
    return false;
}

bool on_sidewalk(const CityModel& city, Vec2 p) {
    if (on_any_street(city, p)) return false;
    for (const Street& s : city.streets)
        if (street_rect_with_sidewalks(s, city.sidewalk_width).contains(p))
            return true;
    return false;
}

CityModel generate_city(uint64_t seed, const CityConfig& config) {
    if (config.streets_ew < 2 || config.streets_ns < 2)
        throw ConfigError("generate_city: need at least 2 streets per axis");
    if (config.street_width <= 0.0)
        throw ConfigError("generate_city: street width must be positive");
    if (config.extent_x <= 0.0 || config.extent_y <= 0.0)
        throw ConfigError("generate_city: extent must be positive");
    double occupied = config.street_width + 2.0 * config.sidewalk_width;
    if (config.extent_x / config.streets_ns < occupied + 10.0 ||
        config.extent_y / config.streets_ew < occupied + 10.0)
        throw ConfigError("generate_city: extent too small for the street grid");

    Rng rng(hash_combine(seed, 0x43495459ull));  // city stream

    CityModel city;
    city.extent_x = config.extent_x;
    city.extent_y = config.extent_y;
    city.sidewalk_width = config.sidewalk_width;

    double hw = config.street_width / 2.0;
    std::vector<double> ew_centers =
        street_centers(config.streets_ew, config.extent_y, config.street_width,
                       config.sidewalk_width, config.street_jitter_frac, rng);
    std::vector<double> ns_centers =
        street_centers(config.streets_ns, config.extent_x, config.street_width,
                       config.sidewalk_width, config.street_jitter_frac, rng);

    int next_street_id = 0;
    std::vector<int> ew_ids, ns_ids;
    for (double c : ew_centers) {
        city.streets.push_back({next_street_id, StreetAxis::EastWest, c, hw, 0.0,
                                config.extent_x});
        ew_ids.push_back(next_street_id++);
    }
    for (double c : ns_centers) {
        city.streets.push_back({next_street_id, StreetAxis::NorthSouth, c, hw,
                                0.0, config.extent_y});
        ns_ids.push_back(next_street_id++);
    }

    for (int row = 0; row < config.streets_ew; ++row) {
        for (int col = 0; col < config.streets_ns; ++col) {
            Intersection it;
            it.id = row * config.streets_ns + col;
            it.col = col;
            it.row = row;
            it.pos = {ns_centers[col], ew_centers[row]};
            it.street_ns = ns_ids[col];
            it.street_ew = ew_ids[row];
            city.intersections.push_back(it);
        }
    }

    // Buildings fill the blocks between sidewalk edges.
    double offset = hw + config.sidewalk_width;
    auto x_blocks = free_intervals(ns_centers, config.extent_x, offset);
    auto y_blocks = free_intervals(ew_centers, config.extent_y, offset);
    for (const auto& [ya, yb] : y_blocks) {
        for (const auto& [xa, xb] : x_blocks) {
            double m = config.building_margin;
            if (xb - xa <= 2.0 * m + 6.0 || yb - ya <= 2.0 * m + 6.0) continue;
            auto lots_x = subdivide_1d(xa + m, xb - m, config.lot_target, rng);
            auto lots_y = subdivide_1d(ya + m, yb - m, config.lot_target, rng);
            for (const auto& [ly0, ly1] : lots_y) {
                for (const auto& [lx0, lx1] : lots_x) {
                    if (rng.uniform() < config.empty_lot_prob) continue;
                    double fw = rng.uniform(0.6, 0.92);
                    double fh = rng.uniform(0.6, 0.92);
                    double w = (lx1 - lx0) * fw;
                    double h = (ly1 - ly0) * fh;
                    double cx = rng.uniform(lx0 + w / 2.0, lx1 - w / 2.0);
                    double cy = rng.uniform(ly0 + h / 2.0, ly1 - h / 2.0);
                    BuildingBox b;
                    b.footprint = {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0,
                                   cy + h / 2.0};
                    b.height = rng.uniform(config.building_min_height,
                                           config.building_max_height);
                    b.texture_seed = rng.next_u64();
                    city.buildings.push_back(b);
                }
            }
        }
    }

    // Billboard on the sidewalk of the approach street, right of the driving
    // direction, facing the oncoming vehicle.
    auto grid_ok = [&](GridRef g) {
        return g.col >= 0 && g.col < config.streets_ns && g.row >= 0 &&
               g.row < config.streets_ew;
    };
    if (!grid_ok(config.route_from) || !grid_ok(config.route_turn) ||
        !grid_ok(config.route_to))
        throw ConfigError("generate_city: route grid reference out of range");

    const Intersection& a = intersection_at(city, config.route_from.col,
                                            config.route_from.row);
    const Intersection& b = intersection_at(city, config.route_turn.col,
                                            config.route_turn.row);
    const Street& approach = connecting_street(city, a, b);
    const Street& crossing = city.streets[approach.axis == StreetAxis::NorthSouth
                                              ? b.street_ew
                                              : b.street_ns];
    Vec2 dir = (b.pos - a.pos).normalized();
    Vec2 right = dir.perp_right();
    Vec2 stop_line = b.pos - dir * crossing.half_width;
    Vec2 base = stop_line - dir * config.billboard_setback;
    Vec2 lateral = right * (approach.half_width + config.sidewalk_width / 2.0);
    city.billboard.center = {base.x + lateral.x, base.y + lateral.y,
                             config.billboard_center_z};
    city.billboard.width = config.billboard_width;
    city.billboard.height = config.billboard_height;
    city.billboard.normal = dir * -1.0;
    city.billboard.cells = 16;

    return city;
}

const Intersection& intersection_at(const CityModel& city, int col, int row) {
    for (const Intersection& it : city.intersections)
        if (it.col == col && it.row == row) return it;
    throw RouteError("no intersection at grid (" + std::to_string(col) + "," +
                     std::to_string(row) + ")");
}

Route make_route(const CityModel& city, int from_id, int turn_id, int to_id) {
    auto find = [&](int id) -> const Intersection& {
        for (const Intersection& it : city.intersections)
            if (it.id == id) return it;
        throw RouteError("unknown intersection id " + std::to_string(id));
    };
    const Intersection& a = find(from_id);
    const Intersection& b = find(turn_id);
    const Intersection& c = find(to_id);
    if (from_id == turn_id || turn_id == to_id)
        throw RouteError("route waypoints must be distinct");

    connecting_street(city, a, b);
    connecting_street(city, b, c);

    Route route;
    route.waypoints = {a.pos, b.pos, c.pos};
    route.waypoint_ids = {a.id, b.id, c.id};
    route.target_intersection = b.id;
    route.approach_axis = (b.pos - a.pos).normalized();
    return route;
}

void validate_city(const CityModel& city) {
    for (const BuildingBox& b : city.buildings) {
        for (const Street& s : city.streets) {
            if (b.footprint.intersects(street_rect(s)))
                throw ConfigError("building overlaps street " +
                                  std::to_string(s.id));
        }
    }
    for (const Intersection& it : city.intersections) {
        int covering = 0;
        for (const Street& s : city.streets)
            if (street_rect(s).contains(it.pos)) ++covering;
        if (covering != 2)
            throw ConfigError("intersection " + std::to_string(it.id) +
                              " lies on " + std::to_string(covering) +
                              " streets");
    }
    Vec2 bb{city.billboard.center.x, city.billboard.center.y};
    if (!on_sidewalk(city, bb))
        throw ConfigError("billboard is not on a sidewalk");
    double n = city.billboard.normal.norm();
    if (std::abs(n - 1.0) > 1e-9)
        throw ConfigError("billboard normal is not unit length");
}

// ---------------------------------------------------------------------------
// JSON serialization. nlohmann::json keeps keys sorted, which gives the
// canonical key order the cache format requires.

nlohmann::json city_to_json(const CityModel& city) {
    nlohmann::json j;
    j["extent_x"] = city.extent_x;
    j["extent_y"] = city.extent_y;
    j["sidewalk_width"] = city.sidewalk_width;
    j["streets"] = nlohmann::json::array();
    for (const Street& s : city.streets) {
        j["streets"].push_back({{"id", s.id},
                                {"axis", s.axis == StreetAxis::EastWest ? "ew" : "ns"},
                                {"center", s.center},
                                {"half_width", s.half_width},
                                {"lo", s.lo},
                                {"hi", s.hi}});
    }
    j["buildings"] = nlohmann::json::array();
    for (const BuildingBox& b : city.buildings) {
        j["buildings"].push_back({{"x0", b.footprint.x0},
                                  {"y0", b.footprint.y0},
                                  {"x1", b.footprint.x1},
                                  {"y1", b.footprint.y1},
                                  {"height", b.height},
                                  {"texture_seed", b.texture_seed}});
    }
    j["intersections"] = nlohmann::json::array();
    for (const Intersection& it : city.intersections) {
        j["intersections"].push_back({{"id", it.id},
                                      {"col", it.col},
                                      {"row", it.row},
                                      {"x", it.pos.x},
                                      {"y", it.pos.y},
                                      {"street_ns", it.street_ns},
                                      {"street_ew", it.street_ew}});
    }
    const Billboard& bb = city.billboard;
    j["billboard"] = {{"x", bb.center.x},     {"y", bb.center.y},
                      {"z", bb.center.z},     {"width", bb.width},
                      {"height", bb.height},  {"normal_x", bb.normal.x},
                      {"normal_y", bb.normal.y}, {"cells", bb.cells}};
    return j;
}

CityModel city_from_json(const nlohmann::json& j) {
    CityModel city;
    city.extent_x = j.at("extent_x").get<double>();
    city.extent_y = j.at("extent_y").get<double>();
    city.sidewalk_width = j.at("sidewalk_width").get<double>();
    for (const auto& js : j.at("streets")) {
        Street s;
        s.id = js.at("id").get<int>();
        s.axis = js.at("axis").get<std::string>() == "ew" ? StreetAxis::EastWest
                                                          : StreetAxis::NorthSouth;
        s.center = js.at("center").get<double>();
        s.half_width = js.at("half_width").get<double>();
        s.lo = js.at("lo").get<double>();
        s.hi = js.at("hi").get<double>();
        city.streets.push_back(s);
    }
    for (const auto& jb : j.at("buildings")) {
        BuildingBox b;
        b.footprint = {jb.at("x0").get<double>(), jb.at("y0").get<double>(),
                       jb.at("x1").get<double>(), jb.at("y1").get<double>()};
        b.height = jb.at("height").get<double>();
        b.texture_seed = jb.at("texture_seed").get<uint64_t>();
        city.buildings.push_back(b);
    }
    for (const auto& ji : j.at("intersections")) {
        Intersection it;
        it.id = ji.at("id").get<int>();
        it.col = ji.at("col").get<int>();
        it.row = ji.at("row").get<int>();
        it.pos = {ji.at("x").get<double>(), ji.at("y").get<double>()};
        it.street_ns = ji.at("street_ns").get<int>();
        it.street_ew = ji.at("street_ew").get<int>();
        city.intersections.push_back(it);
    }
    const auto& jb = j.at("billboard");
    city.billboard.center = {jb.at("x").get<double>(), jb.at("y").get<double>(),
                             jb.at("z").get<double>()};
    city.billboard.width = jb.at("width").get<double>();
    city.billboard.height = jb.at("height").get<double>();
    city.billboard.normal = {jb.at("normal_x").get<double>(),
                             jb.at("normal_y").get<double>()};
    city.billboard.cells = jb.at("cells").get<int>();
    return city;
}

void save_city(const CityModel& city, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("save_city: cannot open " + path);
    f << city_to_json(city).dump(2) << "\n";
}

CityModel load_city(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_city: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return city_from_json(j);
}

nlohmann::json city_config_to_json(const CityConfig& c) {
    return {{"extent_x", c.extent_x},
            {"extent_y", c.extent_y},
            {"streets_ew", c.streets_ew},
            {"streets_ns", c.streets_ns},
            {"street_width", c.street_width},
            {"sidewalk_width", c.sidewalk_width},
            {"street_jitter_frac", c.street_jitter_frac},
            {"building_min_height", c.building_min_height},
            {"building_max_height", c.building_max_height},
            {"building_margin", c.building_margin},
            {"lot_target", c.lot_target},
            {"empty_lot_prob", c.empty_lot_prob},
            {"route_from", {c.route_from.col, c.route_from.row}},
            {"route_turn", {c.route_turn.col, c.route_turn.row}},
            {"route_to", {c.route_to.col, c.route_to.row}},
            {"billboard_width", c.billboard_width},
            {"billboard_height", c.billboard_height},
            {"billboard_center_z", c.billboard_center_z},
            {"billboard_setback", c.billboard_setback}};
}

CityConfig city_config_from_json(const nlohmann::json& j) {
    CityConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("extent_x", c.extent_x);
    get("extent_y", c.extent_y);
    get("streets_ew", c.streets_ew);
    get("streets_ns", c.streets_ns);
    get("street_width", c.street_width);
    get("sidewalk_width", c.sidewalk_width);
    get("street_jitter_frac", c.street_jitter_frac);
    get("building_min_height", c.building_min_height);
    get("building_max_height", c.building_max_height);
    get("building_margin", c.building_margin);
    get("lot_target", c.lot_target);
    get("empty_lot_prob", c.empty_lot_prob);
    auto get_ref = [&](const char* key, GridRef& ref) {
        if (j.contains(key)) {
            ref.col = j.at(key).at(0).get<int>();
            ref.row = j.at(key).at(1).get<int>();
        }
    };
    get_ref("route_from", c.route_from);
    get_ref("route_turn", c.route_turn);
    get_ref("route_to", c.route_to);
    get("billboard_width", c.billboard_width);
    get("billboard_height", c.billboard_height);
    get("billboard_center_z", c.billboard_center_z);
    get("billboard_setback", c.billboard_setback);
    return c;
}

}  // namespace advloc::world
