#ifndef DCM_TESTS_SUPPORT_HPP
#define DCM_TESTS_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dcm/mesh.hpp"

namespace dcm::test {

/// nx*ny grid of vertices in the z=height(x,y) surface, two triangles per cell.
template <typename Height>
Mesh grid_mesh(Index nx, Index ny, double spacing, Height height) {
    Mesh m;
    m.positions.resize(nx * ny, 3);
    for (Index j = 0; j < ny; ++j) {
        for (Index i = 0; i < nx; ++i) {
            const double x = i * spacing, y = j * spacing;
            m.positions.row(j * nx + i) << x, y, height(x, y);
        }
    }
    m.faces.resize(2 * (nx - 1) * (ny - 1), 3);
    Index f = 0;
    for (Index j = 0; j + 1 < ny; ++j) {
        for (Index i = 0; i + 1 < nx; ++i) {
            const Index a = j * nx + i, b = a + 1, c = a + nx, d = c + 1;
            m.faces.row(f++) << a, b, d;
            m.faces.row(f++) << a, d, c;
        }
    }
    return m;
}

inline Mesh flat_grid(Index nx, Index ny, double spacing) {
    return grid_mesh(nx, ny, spacing, [](double, double) { return 0.0; });
}

/// Jittered, bumpy grid: generic (non-coplanar) geometry.
inline Mesh bumpy_grid(Index nx, Index ny, double spacing, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> jitter(-0.2 * spacing, 0.2 * spacing);
    Mesh m = grid_mesh(nx, ny, spacing, [](double x, double y) { return 0.3 * std::sin(3 * x) * std::cos(2 * y); });
    for (Index i = 0; i < m.vertex_count(); ++i) {
        m.positions(i, 0) += jitter(rng);
        m.positions(i, 1) += jitter(rng);
        m.positions(i, 2) += jitter(rng);
    }
    return m;
}

/// Random points in the unit cube joined by random non-degenerate triangles.
inline Mesh random_soup(Index vertices, Index faces, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<Index> pick(0, vertices - 1);
    Mesh m;
    m.positions.resize(vertices, 3);
    for (Index i = 0; i < vertices; ++i) m.positions.row(i) << u(rng), u(rng), u(rng);
    m.faces.resize(faces, 3);
    for (Index f = 0; f < faces; ++f) {
        Index a = pick(rng), b = pick(rng), c = pick(rng);
        while (b == a) b = pick(rng);
        while (c == a || c == b) c = pick(rng);
        m.faces.row(f) << a, b, c;
    }
    return m;
}

/// Adds random colors, computed normals and random labels in [-1, classes).
inline Mesh with_attributes(Mesh m, Index classes, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<Index> label(-1, classes - 1);
    Points colors(m.vertex_count(), 3);
    Labels labels(m.vertex_count());
    for (Index i = 0; i < m.vertex_count(); ++i) {
        colors.row(i) << u(rng), u(rng), u(rng);
        labels(i) = label(rng);
    }
    m.colors = colors;
    m.labels = labels;
    return compute_vertex_normals(m);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("dcm_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace dcm::test

#endif  // DCM_TESTS_SUPPORT_HPP
