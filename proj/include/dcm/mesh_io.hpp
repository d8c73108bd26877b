#ifndef DCM_MESH_IO_HPP
#define DCM_MESH_IO_HPP

#include <filesystem>

#include "dcm/mesh.hpp"

namespace dcm {

enum class MeshFormat { Ply, Off };
enum class PlyEncoding { Ascii, BinaryLittleEndian };

/// Picks the format from the file extension (.ply / .off).
MeshFormat format_from_path(const std::filesystem::path& path);

/// Reads ASCII or binary-little-endian PLY, or ASCII OFF. Vertex properties
/// `x y z [red green blue] [nx ny nz] [label]` are recognized; integer color
/// channels are scaled into [0,1]. Parse errors carry a line number (ASCII) or
/// byte offset (binary); the result is validated before it is returned.
Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);
Mesh load_mesh(const std::filesystem::path& path);

/// Binary PLY stores every float attribute as double, so binary round trips
/// are bit-exact. Text formats print 17 significant digits. OFF keeps only
/// positions and faces.
void save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format,
               PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// A PLY vertex element with colors and labels, faces ignored.
LabeledPointCloud load_point_cloud(const std::filesystem::path& path);

}  // namespace dcm

#endif  // DCM_MESH_IO_HPP
