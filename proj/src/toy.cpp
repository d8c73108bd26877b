#include "dcm/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

namespace dcm {

void ToySceneConfig::validate() const {
    if (!(size_x > 0.0 && size_y > 0.0 && wall_height > 0.0)) throw ConfigError("toy scene sizes must be positive");
    if (!(spacing > 0.0)) throw ConfigError("toy spacing must be positive");
    if (min_boxes < 0 || max_boxes < min_boxes) throw ConfigError("toy box count range is empty");
    if (!(box_min > 0.0 && box_max >= box_min)) throw ConfigError("toy box size range is empty");
    if (box_max + 0.3 > std::min(size_x, size_y)) throw ConfigError("toy boxes do not fit the floor");
}

namespace {

class Builder {
public:
    explicit Builder(std::mt19937_64& rng, double noise) : rng_(rng), noise_(noise) {}

    /// Grid patch o + s u + t v with the face normal along u x v; vertices
    /// that coincide with earlier ones are welded.
    void patch(const Vec3& o, const Vec3& u, const Vec3& v, Index nu, Index nv, Index label, const Vec3& color) {
        std::vector<Index> ids((nu + 1) * (nv + 1));
        for (Index j = 0; j <= nv; ++j) {
            for (Index i = 0; i <= nu; ++i) {
                const Vec3 p = o + (static_cast<double>(i) / nu) * u + (static_cast<double>(j) / nv) * v;
                ids[j * (nu + 1) + i] = vertex(p, label, color);
            }
        }
        for (Index j = 0; j < nv; ++j) {
            for (Index i = 0; i < nu; ++i) {
                const Index a = ids[j * (nu + 1) + i], b = ids[j * (nu + 1) + i + 1];
                const Index c = ids[(j + 1) * (nu + 1) + i + 1], d = ids[(j + 1) * (nu + 1) + i];
                faces_.push_back({a, b, c});
                faces_.push_back({a, c, d});
            }
        }
    }

    Mesh finish() const {
        Mesh m;
        const Index n = static_cast<Index>(positions_.size());
        m.positions.resize(n, 3);
        Points colors(n, 3);
        Labels labels(n);
        for (Index i = 0; i < n; ++i) {
            m.positions.row(i) = positions_[i];
            colors.row(i) = colors_[i];
            labels[i] = labels_[i];
        }
        m.faces.resize(static_cast<Index>(faces_.size()), 3);
        for (std::size_t f = 0; f < faces_.size(); ++f)
            m.faces.row(static_cast<Index>(f)) << faces_[f][0], faces_[f][1], faces_[f][2];
        m.colors = std::move(colors);
        m.labels = std::move(labels);
        return compute_vertex_normals(m);
    }

private:
    Index vertex(const Vec3& p, Index label, const Vec3& color) {
        const std::array<long long, 3> key{std::llround(p.x() * 1e6), std::llround(p.y() * 1e6), std::llround(p.z() * 1e6)};
        auto [it, fresh] = index_.try_emplace(key, static_cast<Index>(positions_.size()));
        if (fresh) {
            std::normal_distribution<double> jitter(0.0, noise_);
            Vec3 c = color;
            for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k] + jitter(rng_), 0.0, 1.0);
            positions_.push_back(p);
            colors_.push_back(c);
            labels_.push_back(label);
        }
        return it->second;
    }

    std::mt19937_64& rng_;
    double noise_;
    std::map<std::array<long long, 3>, Index> index_;
    std::vector<Vec3> positions_, colors_;
    std::vector<Index> labels_;
    std::vector<std::array<Index, 3>> faces_;
};

Index cells(double length, double spacing) { return std::max<Index>(2, static_cast<Index>(std::lround(length / spacing))); }

struct Box {
    double x, y, w, d, h;
};

}  // namespace

Mesh make_toy_scene(const ToySceneConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto random_color = [&] { return Vec3(0.15 + 0.7 * unit(rng), 0.15 + 0.7 * unit(rng), 0.15 + 0.7 * unit(rng)); };
    Builder b(rng, config.color_noise);

    const double sx = config.size_x, sy = config.size_y, wh = config.wall_height, s = config.spacing;
    const Index nx = cells(sx, s), ny = cells(sy, s), nz = cells(wh, s);
    const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
    b.patch(Vec3::Zero(), sx * ex, sy * ey, nx, ny, kToyFloor, random_color());
    const Vec3 wall_color = random_color();
    b.patch(Vec3::Zero(), sy * ey, wh * ez, ny, nz, kToyWall, wall_color);   // x = 0, facing +x
    b.patch(sy * ey, sx * ex, wh * ez, nx, nz, kToyWall, wall_color);        // y = sy, facing -y

    const double margin = 0.15, gap = 0.1;
    const Index count = std::uniform_int_distribution<Index>(config.min_boxes, config.max_boxes)(rng);
    std::vector<Box> boxes;
    for (Index k = 0; k < count; ++k) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            Box c;
            c.w = config.box_min + (config.box_max - config.box_min) * unit(rng);
            c.d = config.box_min + (config.box_max - config.box_min) * unit(rng);
            c.h = config.box_min + (config.box_max - config.box_min) * unit(rng);
            c.x = margin + (sx - c.w - 2 * margin) * unit(rng);
            c.y = margin + (sy - c.d - 2 * margin) * unit(rng);
            const bool clear = std::none_of(boxes.begin(), boxes.end(), [&](const Box& o) {
                return c.x < o.x + o.w + gap && o.x < c.x + c.w + gap && c.y < o.y + o.d + gap && o.y < c.y + c.d + gap;
            });
            if (!clear) continue;
            boxes.push_back(c);
            break;
        }
    }
    for (const Box& c : boxes) {
        const Index nw = cells(c.w, s), nd = cells(c.d, s), nh = cells(c.h, s);
        const Vec3 o(c.x, c.y, 0.0), color = random_color();
        b.patch(o + c.h * ez, c.w * ex, c.d * ey, nw, nd, kToyBox, color);         // top
        b.patch(o, c.w * ex, c.h * ez, nw, nh, kToyBox, color);                    // -y side
        b.patch(o + c.d * ey, c.h * ez, c.w * ex, nh, nw, kToyBox, color);         // +y side
        b.patch(o, c.h * ez, c.d * ey, nh, nd, kToyBox, color);                    // -x side
        b.patch(o + c.w * ex, c.d * ey, c.h * ez, nd, nh, kToyBox, color);         // +x side
    }
    return b.finish();
}

}  // namespace dcm
