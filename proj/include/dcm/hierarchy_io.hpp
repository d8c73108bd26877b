#ifndef DCM_HIERARCHY_IO_HPP
#define DCM_HIERARCHY_IO_HPP

#include <filesystem>

#include <json.hpp>

#include "dcm/hierarchy.hpp"

namespace dcm {

void to_json(nlohmann::json& j, const HierarchyConfig& c);
void from_json(const nlohmann::json& j, HierarchyConfig& c);

/// Directory layout:
///   manifest.json          strategy, config, per-level counts
///   level_{l}.ply          binary PLY of every mesh level
///   trace_{l}.txt          one coarse index per fine vertex of level l
///   edges_{l}_geo.txt      one directed edge "i j" per line
///   edges_{l}_euc.txt      only when Euclidean edges are attached
/// The directory is created if needed. Output bytes depend only on the input.
/// A non-null `neighborhoods` is stored in the manifest as a record of how
/// the Euclidean edges were built.
void serialize_hierarchy(const Hierarchy& hierarchy, const std::filesystem::path& dir,
                         const nlohmann::json& neighborhoods = nullptr);

/// Reads a directory written by serialize_hierarchy and validates it. Missing
/// files throw IoError; malformed lines and broken invariants throw
/// ValidationError naming the file and line.
Hierarchy deserialize_hierarchy(const std::filesystem::path& dir);

/// The parsed manifest.json of a hierarchy directory.
nlohmann::json read_hierarchy_manifest(const std::filesystem::path& dir);

}  // namespace dcm

#endif  // DCM_HIERARCHY_IO_HPP
