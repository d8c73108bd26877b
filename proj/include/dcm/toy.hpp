#ifndef DCM_TOY_HPP
#define DCM_TOY_HPP

#include <cstdint>

#include "dcm/mesh.hpp"

namespace dcm {

enum ToyClass : Index { kToyFloor = 0, kToyWall = 1, kToyBox = 2 };
inline constexpr Index kToyClasses = 3;

/// Procedural room: a floor welded to two walls, plus boxes resting on the
/// floor as separate closed-top shells. Every object draws its base color
/// independently of its class, so classes must be told apart by shape.
struct ToySceneConfig {
    double size_x = 2.5;
    double size_y = 2.5;
    double wall_height = 1.0;
    double spacing = 0.08;  // target grid edge length
    Index min_boxes = 1;
    Index max_boxes = 3;
    double box_min = 0.3;  // side and height range of a box
    double box_max = 0.6;
    double color_noise = 0.05;

    void validate() const;
};

/// Labeled mesh with colors and normals; deterministic in (config, seed).
Mesh make_toy_scene(const ToySceneConfig& config, std::uint64_t seed);

}  // namespace dcm

#endif  // DCM_TOY_HPP
