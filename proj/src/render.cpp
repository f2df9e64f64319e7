#include "advloc/render.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "advloc/csvio.hpp"

namespace advloc::render {

namespace {

uint64_t hash2i(uint64_t seed, int64_t a, int64_t b) {
    return hash_combine(seed, hash_combine(static_cast<uint64_t>(a) * 0x9e3779b97f4a7c15ull,
                                           static_cast<uint64_t>(b)));
}

uint8_t clamp_u8(double v) {
    return static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
}

Rgb scale(Rgb c, double f) {
    return {clamp_u8(c.r * f), clamp_u8(c.g * f), clamp_u8(c.b * f)};
}

constexpr Rgb kAsphalt{58, 56, 60};
constexpr Rgb kSidewalk{168, 162, 150};
constexpr Rgb kCurb{82, 80, 78};
constexpr Rgb kCenterLine{190, 168, 66};
constexpr Rgb kLaneLine{168, 168, 168};
constexpr Rgb kTerrain{96, 118, 72};
constexpr Rgb kRoof{70, 70, 72};
constexpr Rgb kBillboardBack{45, 45, 48};
constexpr Rgb kSkyTop{96, 148, 216};
constexpr Rgb kSkyHorizon{205, 222, 238};

Rgb terrain_color(double x, double y) {
    uint64_t h = hash2i(0x5445525241494eull, static_cast<int64_t>(std::floor(x / 3.0)),
                        static_cast<int64_t>(std::floor(y / 3.0)));
    int d = static_cast<int>(h % 17) - 8;
    return {clamp_u8(kTerrain.r + d), clamp_u8(kTerrain.g + d), clamp_u8(kTerrain.b + d)};
}

Rgb asphalt_color(double along, double lateral) {
    uint64_t h = hash2i(0x41535048ull, static_cast<int64_t>(std::floor(along / 2.0)),
                        static_cast<int64_t>(std::floor(lateral / 2.0)));
    int d = static_cast<int>(h % 9) - 4;
    return {clamp_u8(kAsphalt.r + d), clamp_u8(kAsphalt.g + d), clamp_u8(kAsphalt.b + d)};
}

// Procedural facade: per-building base color, floor slabs, window grid.
Rgb facade_color(uint64_t seed, double u, double v, double brightness) {
    uint64_t h0 = hash_u64(seed);
    Rgb base{static_cast<uint8_t>(100 + (h0 & 0xff) % 100),
             static_cast<uint8_t>(100 + ((h0 >> 8) & 0xff) % 100),
             static_cast<uint8_t>(100 + ((h0 >> 16) & 0xff) % 100)};
    double floor_h = 3.0;
    double cell_w = 2.5 + ((h0 >> 24) % 100) / 100.0;

    double fv = v - floor_h * std::floor(v / floor_h);
    if (fv < 0.3) return scale(base, 0.55 * brightness);

    double fu = u - cell_w * std::floor(u / cell_w);
    int64_t iu = static_cast<int64_t>(std::floor(u / cell_w));
    int64_t iv = static_cast<int64_t>(std::floor(v / floor_h));
    bool in_window = fu > 0.35 * cell_w && fu < 0.85 * cell_w && fv > 0.8 && fv < 2.5;
    if (in_window) {
        bool lit = hash2i(seed, iu, iv) % 100 < 18;
        Rgb glass = lit ? Rgb{215, 205, 130} : Rgb{42, 58, 80};
        return scale(glass, brightness);
    }
    return scale(base, brightness);
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Rgb color;
};

}  // namespace

Rgb sky_color(int row, int image_height) {
    double t = image_height > 1 ? static_cast<double>(row) / (image_height - 1) : 0.0;
    auto mix = [t](uint8_t a, uint8_t b) {
        return clamp_u8(std::round(a + (b - a) * t));
    };
    return {mix(kSkyTop.r, kSkyHorizon.r), mix(kSkyTop.g, kSkyHorizon.g),
            mix(kSkyTop.b, kSkyHorizon.b)};
}

Scene::Scene(const world::CityModel& city) : city_(city) {
    const Vec2 n = city_.billboard.normal;
    bb_tangent_ = {-n.y, n.x, 0.0};  // viewer-right when facing the front
}

struct RayCaster {
    const Scene& scene;
    const Patch& patch;

    // Returns the nearest surface hit along the ray; billboard front-face
    // hits also report the patch cell so the conversion table can log them.
    bool trace(Vec3 origin, Vec3 dir, Rgb& color, int* cell_x, int* cell_y) const {
        const world::CityModel& city = scene.city_;
        Hit best;
        bool billboard_front = false;
        int bcx = 0, bcy = 0;

        for (const world::BuildingBox& b : city.buildings) {
            double t;
            int axis, sign;
            if (!intersect_box(origin, dir, b, t, axis, sign) || t >= best.t) continue;
            Vec3 p = origin + dir * t;
            best.t = t;
            billboard_front = false;
            if (axis == 2) {
                best.color = kRoof;
            } else {
                double bright = axis == 0 ? (sign > 0 ? 1.0 : 0.86)
                                          : (sign > 0 ? 0.94 : 0.79);
                double u = axis == 0 ? p.y : p.x;
                best.color = facade_color(b.texture_seed, u, p.z, bright);
            }
        }

        if (dir.z < -1e-12 && origin.z > 0.0) {
            double t = -origin.z / dir.z;
            if (t < best.t) {
                Vec3 p = origin + dir * t;
                best.t = t;
                best.color = ground_color({p.x, p.y});
                billboard_front = false;
            }
        }

        double t, a, bz;
        bool front;
        if (intersect_billboard(origin, dir, t, a, bz, front) && t < best.t) {
            best.t = t;
            const world::Billboard& bb = city.billboard;
            if (front) {
                int cells = bb.cells;
                int cx = static_cast<int>(std::floor((a + bb.width / 2.0) / bb.width * cells));
                int cy = static_cast<int>(
                    std::floor((bb.height / 2.0 - bz) / bb.height * cells));
                cx = std::clamp(cx, 0, cells - 1);
                cy = std::clamp(cy, 0, cells - 1);
                best.color = patch.at(cx, cy);
                billboard_front = true;
                bcx = cx;
                bcy = cy;
            } else {
                best.color = kBillboardBack;
                billboard_front = false;
            }
        }

        if (!std::isfinite(best.t)) return false;
        color = best.color;
        if (billboard_front && cell_x) {
            *cell_x = bcx;
            *cell_y = bcy;
        } else if (cell_x) {
            *cell_x = -1;
        }
        return true;
    }

    static bool intersect_box(Vec3 o, Vec3 d, const world::BuildingBox& b,
                              double& t_out, int& axis_out, int& sign_out) {
        double lo[3] = {b.footprint.x0, b.footprint.y0, 0.0};
        double hi[3] = {b.footprint.x1, b.footprint.y1, b.height};
        double ov[3] = {o.x, o.y, o.z};
        double dv[3] = {d.x, d.y, d.z};
        double t0 = 1e-9, t1 = std::numeric_limits<double>::infinity();
        int axis = -1, sign = 0;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(dv[a]) < 1e-15) {
                if (ov[a] < lo[a] || ov[a] > hi[a]) return false;
                continue;
            }
            double inv = 1.0 / dv[a];
            double ta = (lo[a] - ov[a]) * inv;
            double tb = (hi[a] - ov[a]) * inv;
            int s = dv[a] > 0.0 ? -1 : 1;  // normal sign of the entry face
            if (ta > tb) std::swap(ta, tb);
            if (ta > t0) {
                t0 = ta;
                axis = a;
                sign = s;
            }
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
        if (axis < 0) return false;  // origin inside the box
        t_out = t0;
        axis_out = axis;
        sign_out = sign;
        return true;
    }

    bool intersect_billboard(Vec3 o, Vec3 d, double& t_out, double& a_out,
                             double& bz_out, bool& front_out) const {
        const world::Billboard& bb = scene.city_.billboard;
        Vec3 n{bb.normal.x, bb.normal.y, 0.0};
        double denom = d.dot(n);
        if (std::abs(denom) < 1e-12) return false;
        Vec3 to_plane = Vec3{bb.center.x, bb.center.y, bb.center.z} - o;
        double t = to_plane.dot(n) / denom;
        if (t < 1e-9) return false;
        Vec3 p = o + d * t;
        Vec3 rel = p - Vec3{bb.center.x, bb.center.y, bb.center.z};
        double a = rel.dot(scene.bb_tangent_);
        double bz = rel.z;
        if (std::abs(a) > bb.width / 2.0 || std::abs(bz) > bb.height / 2.0)
            return false;
        t_out = t;
        a_out = a;
        bz_out = bz;
        front_out = denom < 0.0;
        return true;
    }

    Rgb ground_color(Vec2 p) const {
        const world::CityModel& city = scene.city_;
        int covering = 0;
        const world::Street* hit = nullptr;
        for (const world::Street& s : city.streets) {
            if (world::street_rect(s).contains(p)) {
                ++covering;
                if (!hit) hit = &s;
            }
        }
        if (covering >= 2) {
            // Intersection area: plain asphalt, no markings.
            return asphalt_color(p.x, p.y);
        }
        if (covering == 1) {
            double along = hit->axis == world::StreetAxis::EastWest ? p.x : p.y;
            double lateral = hit->axis == world::StreetAxis::EastWest
                                 ? p.y - hit->center
                                 : p.x - hit->center;
            double along_mod12 = along - 12.0 * std::floor(along / 12.0);
            if (std::abs(lateral) < 0.25 && along_mod12 < 7.0) return kCenterLine;
            double along_mod8 = along - 8.0 * std::floor(along / 8.0);
            if (std::abs(std::abs(lateral) - hit->half_width / 2.0) < 0.18 &&
                along_mod8 < 4.0)
                return kLaneLine;
            return asphalt_color(along, lateral);
        }
        for (const world::Street& s : city.streets) {
            if (world::street_rect_with_sidewalks(s, city.sidewalk_width).contains(p)) {
                double lateral = s.axis == world::StreetAxis::EastWest
                                     ? p.y - s.center
                                     : p.x - s.center;
                if (std::abs(lateral) - s.half_width < 0.35) return kCurb;
                return kSidewalk;
            }
        }
        return terrain_color(p.x, p.y);
    }
};

namespace {

struct CameraBasis {
    Vec3 fwd, right, up;
    double tan_half;
};

CameraBasis camera_basis(const CameraConfig& cam) {
    double cy = std::cos(cam.yaw), sy = std::sin(cam.yaw);
    double cp = std::cos(cam.pitch), sp = std::sin(cam.pitch);
    CameraBasis b;
    b.fwd = {cy * cp, sy * cp, sp};
    b.right = {sy, -cy, 0.0};
    b.up = {-cy * sp, -sy * sp, cp};
    b.tan_half = std::tan(cam.horizontal_fov / 2.0);
    return b;
}

Vec3 pixel_ray(const CameraBasis& b, const CameraConfig& cam, int px, int py) {
    double ndc_x = 2.0 * (px + 0.5) / cam.width - 1.0;
    double ndc_y = 1.0 - 2.0 * (py + 0.5) / cam.height;
    double tv = b.tan_half * cam.height / cam.width;
    Vec3 d = b.fwd + b.right * (ndc_x * b.tan_half) + b.up * (ndc_y * tv);
    return d.normalized();
}

void check_camera(const Scene& scene, const CameraConfig& cam) {
    for (const world::BuildingBox& b : scene.city().buildings) {
        if (b.footprint.contains({cam.position.x, cam.position.y}) &&
            cam.position.z >= 0.0 && cam.position.z <= b.height)
            throw RenderError("camera is inside a building volume");
    }
}

Image render_impl(const Scene& scene, const CameraConfig& cam, const Patch& patch,
                  ConversionTable* table) {
    check_camera(scene, cam);
    Image img(cam.width, cam.height);
    CameraBasis basis = camera_basis(cam);
    RayCaster caster{scene, patch};
    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            Vec3 dir = pixel_ray(basis, cam, px, py);
            Rgb color;
            int cx = -1, cy = -1;
            if (caster.trace(cam.position, dir, color, &cx, &cy)) {
                img.at(px, py) = color;
                if (table && cx >= 0) {
                    table->entries.push_back({static_cast<uint16_t>(px),
                                              static_cast<uint16_t>(py),
                                              static_cast<uint8_t>(cx),
                                              static_cast<uint8_t>(cy)});
                }
            } else {
                img.at(px, py) = sky_color(py, cam.height);
            }
        }
    }
    return img;
}

}  // namespace

Image render_view(const Scene& scene, const CameraConfig& camera, const Patch* patch) {
    static const Patch kBlack = Patch::black();
    return render_impl(scene, camera, patch ? *patch : kBlack, nullptr);
}

Image render_view(const world::CityModel& city, const CameraConfig& camera,
                  const Patch* patch) {
    return render_view(Scene(city), camera, patch);
}

std::pair<Image, ConversionTable> build_conversion_table(const Scene& scene,
                                                         const CameraConfig& camera) {
    ConversionTable table;
    Image base = render_impl(scene, camera, Patch::black(), &table);
    table.base_image_id = image_content_hash(base);
    return {std::move(base), std::move(table)};
}

std::pair<Image, ConversionTable> build_conversion_table(
    const world::CityModel& city, const CameraConfig& camera) {
    return build_conversion_table(Scene(city), camera);
}

Image composite_patch(const Image& base, const ConversionTable& table,
                      const Patch& patch) {
    if (image_content_hash(base) != table.base_image_id)
        throw CalibrationError("conversion table was not calibrated against this image");
    Image out = base;
    for (const TableEntry& e : table.entries)
        out.at(e.pixel_x, e.pixel_y) = patch.at(e.cell_x, e.cell_y);
    return out;
}

Patch Patch::random(uint64_t seed) {
    Rng rng(hash_combine(seed, 0x50415443ull));
    Patch p;
    for (Rgb& c : p.cells) {
        c.r = static_cast<uint8_t>(rng.uniform_int(0, 255));
        c.g = static_cast<uint8_t>(rng.uniform_int(0, 255));
        c.b = static_cast<uint8_t>(rng.uniform_int(0, 255));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Dataset generation.

std::vector<SampledPose> sample_dataset_poses(const world::CityModel& city,
                                              const DatasetSampler& sampler,
                                              uint64_t seed) {
    if (sampler.count < 10)
        throw ConfigError("sample_dataset_poses: count must be at least 10");
    if (city.streets.empty())
        throw ConfigError("sample_dataset_poses: city has no streets");
    if (sampler.z_min > sampler.z_max || sampler.yaw_jitter_deg < 0.0)
        throw ConfigError("sample_dataset_poses: invalid jitter bounds");

    Rng rng(hash_combine(seed, 0x504f5345ull));
    std::vector<SampledPose> out;
    out.reserve(sampler.count);

    auto forward_clearance = [&](Vec2 p, Vec2 f) {
        double best = std::numeric_limits<double>::infinity();
        auto axis_dist = [&](double coord, double d, double lo, double hi) {
            if (d > 1e-12) best = std::min(best, (hi - coord) / d);
            else if (d < -1e-12) best = std::min(best, (lo - coord) / d);
        };
        axis_dist(p.x, f.x, 0.0, city.extent_x);
        axis_dist(p.y, f.y, 0.0, city.extent_y);
        return best;
    };

    const double jitter = deg_to_rad(sampler.yaw_jitter_deg);
    for (int i = 0; i < sampler.count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const world::Street& s =
                city.streets[rng.uniform_int(0, static_cast<int64_t>(city.streets.size()) - 1)];
            double along = rng.uniform(s.lo, s.hi);
            double max_lat = std::max(0.0, s.half_width - sampler.lane_margin);
            double lateral = rng.uniform(-max_lat, max_lat);
            Vec2 p = s.axis == world::StreetAxis::EastWest
                         ? Vec2{along, s.center + lateral}
                         : Vec2{s.center + lateral, along};
            int cardinal = static_cast<int>(rng.uniform_int(0, 3));
            double yaw = wrap_angle(cardinal * kPi / 2.0 + rng.uniform(-jitter, jitter));
            Vec2 f{std::cos(yaw), std::sin(yaw)};
            if (forward_clearance(p, f) < sampler.min_view_distance) continue;
            SampledPose sp;
            sp.pose = {p.x, p.y, yaw};
            sp.camera_z = rng.uniform(sampler.z_min, sampler.z_max);
            out.push_back(sp);
            placed = true;
        }
        if (!placed)
            throw ConfigError("sample_dataset_poses: cannot place pose " +
                              std::to_string(i) + " (min_view_distance too large?)");
    }
    return out;
}

std::vector<Split> assign_split(size_t count, double train_ratio, uint64_t seed) {
    std::vector<size_t> order(count);
    for (size_t i = 0; i < count; ++i) order[i] = i;
    Rng rng(hash_combine(seed, 0x53504c49ull));
    for (size_t i = count; i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    size_t n_train = static_cast<size_t>(std::llround(train_ratio * count));
    std::vector<Split> split(count, Split::Test);
    for (size_t k = 0; k < n_train && k < count; ++k) split[order[k]] = Split::Train;
    return split;
}

Dataset render_dataset(const world::CityModel& city, const DatasetSampler& sampler,
                       uint64_t seed) {
    auto poses = sample_dataset_poses(city, sampler, seed);
    Dataset ds;
    ds.split = assign_split(poses.size(), sampler.train_ratio, seed);
    ds.samples.resize(poses.size());
    Scene scene(city);
    const double pitch = deg_to_rad(sampler.pitch_deg);
    parallel_for_strided(poses.size(), sampler.threads, [&](size_t i, int) {
        CameraConfig cam = camera_at(poses[i].pose, poses[i].camera_z, pitch);
        ds.samples[i].image = render_view(scene, cam);
        ds.samples[i].pose = poses[i].pose;
        ds.samples[i].camera_z = poses[i].camera_z;
    });
    return ds;
}

void render_dataset_to_dir(const world::CityModel& city,
                           const DatasetSampler& sampler, uint64_t seed,
                           const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto poses = sample_dataset_poses(city, sampler, seed);
    auto split = assign_split(poses.size(), sampler.train_ratio, seed);
    Scene scene(city);
    const double pitch = deg_to_rad(sampler.pitch_deg);

    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw IoError("render_dataset_to_dir: cannot write manifest");
    manifest << "image_path,x,y,theta_deg,camera_z,split\n";

    const size_t chunk = 64;
    std::vector<Image> buffer(chunk);
    for (size_t start = 0; start < poses.size(); start += chunk) {
        size_t n = std::min(chunk, poses.size() - start);
        parallel_for_strided(n, sampler.threads, [&](size_t k, int) {
            CameraConfig cam =
                camera_at(poses[start + k].pose, poses[start + k].camera_z, pitch);
            buffer[k] = render_view(scene, cam);
        });
        for (size_t k = 0; k < n; ++k) {
            size_t i = start + k;
            char name[32];
            std::snprintf(name, sizeof(name), "img_%05zu.png", i);
            save_png(buffer[k], (fs::path(dir) / name).string());
            manifest << name << ',' << csv::fmt(poses[i].pose.x) << ','
                     << csv::fmt(poses[i].pose.y) << ','
                     << csv::fmt(rad_to_deg(poses[i].pose.theta)) << ','
                     << csv::fmt(poses[i].camera_z) << ','
                     << (split[i] == Split::Train ? "train" : "test") << '\n';
        }
    }
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(dir) / "manifest.csv");
    if (!manifest) throw IoError("load_dataset: no manifest in " + dir);
    std::string line;
    std::getline(manifest, line);  // header
    Dataset ds;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        auto fields = csv::split(line);
        if (fields.size() != 6) throw IoError("load_dataset: bad manifest row");
        Sample s;
        s.image = load_png((fs::path(dir) / fields[0]).string());
        s.pose.x = std::stod(fields[1]);
        s.pose.y = std::stod(fields[2]);
        s.pose.theta = wrap_angle(deg_to_rad(std::stod(fields[3])));
        s.camera_z = std::stod(fields[4]);
        ds.samples.push_back(std::move(s));
        ds.split.push_back(fields[5] == "train" ? Split::Train : Split::Test);
    }
    return ds;
}

nlohmann::json sampler_to_json(const DatasetSampler& s) {
    return {{"count", s.count},
            {"train_ratio", s.train_ratio},
            {"yaw_jitter_deg", s.yaw_jitter_deg},
            {"z_min", s.z_min},
            {"z_max", s.z_max},
            {"pitch_deg", s.pitch_deg},
            {"lane_margin", s.lane_margin},
            {"min_view_distance", s.min_view_distance}};
}

DatasetSampler sampler_from_json(const nlohmann::json& j) {
    DatasetSampler s;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("count", s.count);
    get("train_ratio", s.train_ratio);
    get("yaw_jitter_deg", s.yaw_jitter_deg);
    get("z_min", s.z_min);
    get("z_max", s.z_max);
    get("pitch_deg", s.pitch_deg);
    get("lane_margin", s.lane_margin);
    get("min_view_distance", s.min_view_distance);
    return s;
}

void save_patch(const Patch& patch, const std::string& png_path,
                const nlohmann::json& sidecar) {
    Image img(Patch::kCells, Patch::kCells);
    for (int cy = 0; cy < Patch::kCells; ++cy)
        for (int cx = 0; cx < Patch::kCells; ++cx) img.at(cx, cy) = patch.at(cx, cy);
    save_png(img, png_path);
    std::filesystem::path meta(png_path);
    meta.replace_extension(".json");
    std::ofstream f(meta);
    if (!f) throw IoError("save_patch: cannot write " + meta.string());
    f << sidecar.dump(2) << "\n";
}

Patch load_patch(const std::string& png_path) {
    Image img = load_png(png_path);
    if (img.width != Patch::kCells || img.height != Patch::kCells)
        throw ShapeError("load_patch: expected a 16x16 image");
    Patch p;
    for (int cy = 0; cy < Patch::kCells; ++cy)
        for (int cx = 0; cx < Patch::kCells; ++cx) p.at(cx, cy) = img.at(cx, cy);
    return p;
}

}  // namespace advloc::render
