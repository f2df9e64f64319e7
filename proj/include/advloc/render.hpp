#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "advloc/common.hpp"
#include "advloc/image.hpp"
#include "advloc/world.hpp"

namespace advloc::render {

struct CameraConfig {
    Vec3 position;
    double yaw = 0.0;
    double pitch = deg_to_rad(7.0);
    double horizontal_fov = deg_to_rad(120.0);
    int width = 224;
    int height = 224;
};

inline CameraConfig camera_at(const Pose& pose, double z,
                              double pitch = deg_to_rad(7.0)) {
    CameraConfig cam;
    cam.position = {pose.x, pose.y, z};
    cam.yaw = pose.theta;
    cam.pitch = pitch;
    return cam;
}

// 16x16 billboard pattern. Row 0 is the top of the billboard as seen by an
// observer facing its front.
struct Patch {
    static constexpr int kCells = 16;
    std::array<Rgb, kCells * kCells> cells{};

    Rgb& at(int cx, int cy) { return cells[static_cast<size_t>(cy) * kCells + cx]; }
    const Rgb& at(int cx, int cy) const {
        return cells[static_cast<size_t>(cy) * kCells + cx];
    }
    bool operator==(const Patch&) const = default;

    static Patch uniform(Rgb c) {
        Patch p;
        p.cells.fill(c);
        return p;
    }
    static Patch black() { return uniform({0, 0, 0}); }
    static Patch white() { return uniform({255, 255, 255}); }
    static Patch random(uint64_t seed);
};

struct TableEntry {
    uint16_t pixel_x = 0;
    uint16_t pixel_y = 0;
    uint8_t cell_x = 0;
    uint8_t cell_y = 0;
};

// Per-image map from billboard-covered pixels to patch cells, calibrated
// against one black-billboard base render.
struct ConversionTable {
    std::vector<TableEntry> entries;
    uint64_t base_image_id = 0;
};

// Immutable raycasting scene assembled from a CityModel.
class Scene {
public:
    explicit Scene(const world::CityModel& city);

    const world::CityModel& city() const { return city_; }

private:
    friend struct RayCaster;
    world::CityModel city_;
    Vec3 bb_tangent_;  // unit, points toward the viewer's right on the front face
};

Image render_view(const Scene& scene, const CameraConfig& camera,
                  const Patch* patch = nullptr);
Image render_view(const world::CityModel& city, const CameraConfig& camera,
                  const Patch* patch = nullptr);

std::pair<Image, ConversionTable> build_conversion_table(const Scene& scene,
                                                         const CameraConfig& camera);
std::pair<Image, ConversionTable> build_conversion_table(
    const world::CityModel& city, const CameraConfig& camera);

Image composite_patch(const Image& base, const ConversionTable& table,
                      const Patch& patch);

// Screen-space sky gradient; exposed so tests can reproduce it per row.
Rgb sky_color(int row, int image_height);

// ---------------------------------------------------------------------------
// Dataset generation.

enum class Split : uint8_t { Train, Test };

struct DatasetSampler {
    int count = 5000;
    double train_ratio = 0.9;
    double yaw_jitter_deg = 10.0;
    double z_min = 0.4;
    double z_max = 1.0;
    double pitch_deg = 7.0;
    double lane_margin = 2.0;          // keep poses this far from road edges
    double min_view_distance = 100.0;  // reject poses facing out of the map
    int threads = 0;
};

struct Sample {
    Image image;
    Pose pose;
    double camera_z = 0.0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<Split> split;

    size_t count(Split s) const {
        size_t n = 0;
        for (Split v : split)
            if (v == s) ++n;
        return n;
    }
    std::vector<size_t> indices(Split s) const {
        std::vector<size_t> out;
        for (size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) out.push_back(i);
        return out;
    }
};

struct SampledPose {
    Pose pose;
    double camera_z = 0.0;
};

std::vector<SampledPose> sample_dataset_poses(const world::CityModel& city,
                                              const DatasetSampler& sampler,
                                              uint64_t seed);
std::vector<Split> assign_split(size_t count, double train_ratio, uint64_t seed);

Dataset render_dataset(const world::CityModel& city, const DatasetSampler& sampler,
                       uint64_t seed);

// Streams the dataset to <dir>/img_XXXXX.png plus <dir>/manifest.csv with
// columns (image_path, x, y, theta_deg, split).
void render_dataset_to_dir(const world::CityModel& city,
                           const DatasetSampler& sampler, uint64_t seed,
                           const std::string& dir);
Dataset load_dataset(const std::string& dir);

nlohmann::json sampler_to_json(const DatasetSampler& s);
DatasetSampler sampler_from_json(const nlohmann::json& j);

// Patch artifact IO: 16x16 PNG plus a JSON sidecar next to it.
void save_patch(const Patch& patch, const std::string& png_path,
                const nlohmann::json& sidecar);
Patch load_patch(const std::string& png_path);

}  // namespace advloc::render
