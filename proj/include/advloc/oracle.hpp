#pragma once

#include <span>
#include <vector>

#include "advloc/common.hpp"
#include "advloc/image.hpp"

namespace advloc {

// Forward-only model surface. The attack and navigation modules are written
// against this interface, so they never see parameters or gradients.
struct PositionOracle {
    virtual ~PositionOracle() = default;

    virtual Vec2 predict_position(const Image& image) const = 0;

    virtual std::vector<Vec2> predict_positions(std::span<const Image> images) const {
        std::vector<Vec2> out;
        out.reserve(images.size());
        for (const Image& img : images) out.push_back(predict_position(img));
        return out;
    }
};

struct PoseOracle : PositionOracle {
    virtual Pose predict_pose(const Image& image) const = 0;

    Vec2 predict_position(const Image& image) const override {
        Pose p = predict_pose(image);
        return {p.x, p.y};
    }
};

}  // namespace advloc
