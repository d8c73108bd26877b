#include "dcm/hierarchy_io.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

#include "dcm/mesh_io.hpp"

namespace dcm {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const HierarchyConfig& c) {
    j = {{"strategy", to_string(c.strategy)},
         {"cells", c.cells},
         {"qem_ratio", c.qem_ratio},
         {"qem_levels", c.qem_levels},
         {"pair_distance_threshold", c.pair_distance_threshold},
         {"fps_counts", c.fps_counts},
         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, HierarchyConfig& c) {
    c = HierarchyConfig{};
    c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    c.cells = j.value("cells", c.cells);
    c.qem_ratio = j.value("qem_ratio", c.qem_ratio);
    c.qem_levels = j.value("qem_levels", c.qem_levels);
    c.pair_distance_threshold = j.value("pair_distance_threshold", c.pair_distance_threshold);
    c.fps_counts = j.value("fps_counts", c.fps_counts);
    c.seed = j.value("seed", c.seed);
}

namespace {

fs::path level_path(const fs::path& dir, Index l) { return dir / ("level_" + std::to_string(l) + ".ply"); }
fs::path trace_path(const fs::path& dir, Index l) { return dir / ("trace_" + std::to_string(l) + ".txt"); }
fs::path edges_path(const fs::path& dir, Index l, const char* kind) {
    return dir / ("edges_" + std::to_string(l) + "_" + kind + ".txt");
}

void append_int(std::string& out, Index v) {
    char buf[16];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, end);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("write failed for " + path.string());
}

void write_edges(const EdgeSet& edges, const fs::path& path) {
    std::string text;
    for (Index i = 0; i < edges.vertex_count(); ++i) {
        for (Index j : edges.neighbors(i)) {
            append_int(text, i);
            text += ' ';
            append_int(text, j);
            text += '\n';
        }
    }
    write_text(path, text);
}

void write_trace(const PoolingTraceMap& trace, const fs::path& path) {
    std::string text;
    for (Index a : trace.assignment) {
        append_int(text, a);
        text += '\n';
    }
    write_text(path, text);
}

/// Calls `row(line_number, fields)` for every non-empty line, with the
/// whitespace-separated integers parsed.
template <typename F>
void read_int_lines(const fs::path& path, std::size_t width, F&& row) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t number = 0;
    std::vector<Index> fields;
    while (std::getline(is, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        fields.clear();
        const char* p = line.data();
        const char* end = p + line.size();
        while (true) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) break;
            Index v = 0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{} || (next < end && *next != ' ' && *next != '\t'))
                throw ValidationError(path.string() + ":" + std::to_string(number) + ": not an integer: '" + line + "'");
            fields.push_back(v);
            p = next;
        }
        if (fields.empty()) continue;
        if (fields.size() != width)
            throw ValidationError(path.string() + ":" + std::to_string(number) + ": expected " + std::to_string(width) +
                                  " integers, got " + std::to_string(fields.size()));
        row(number, fields);
    }
}

EdgeSet read_edges(const fs::path& path, Index vertex_count) {
    std::vector<std::vector<Index>> lists(vertex_count);
    read_int_lines(path, 2, [&](std::size_t line, const std::vector<Index>& f) {
        if (f[0] < 0 || f[0] >= vertex_count || f[1] < 0 || f[1] >= vertex_count)
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": edge index out of range [0, " +
                                  std::to_string(vertex_count) + ")");
        lists[f[0]].push_back(f[1]);
    });
    return EdgeSet(lists);
}

PoolingTraceMap read_trace(const fs::path& path, Index fine_count, Index coarse_count) {
    PoolingTraceMap t;
    t.coarse_count = coarse_count;
    t.assignment.reserve(fine_count);
    read_int_lines(path, 1, [&](std::size_t line, const std::vector<Index>& f) {
        if (f[0] < 0 || f[0] >= coarse_count)
            throw ValidationError(path.string() + ":" + std::to_string(line) + ": coarse index " + std::to_string(f[0]) +
                                  " out of range [0, " + std::to_string(coarse_count) + ")");
        t.assignment.push_back(f[0]);
    });
    if (t.fine_count() != fine_count)
        throw ValidationError(path.string() + ": " + std::to_string(t.fine_count()) + " lines for " +
                              std::to_string(fine_count) + " fine vertices");
    return t;
}

}  // namespace

void serialize_hierarchy(const Hierarchy& hierarchy, const fs::path& dir, const nlohmann::json& neighborhoods) {
    hierarchy.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const bool euclidean = !hierarchy.euclidean_edges.empty();
    nlohmann::json manifest;
    manifest["format"] = "dcm-hierarchy";
    manifest["version"] = 1;
    manifest["strategy"] = to_string(hierarchy.config.strategy);
    manifest["config"] = hierarchy.config;
    manifest["euclidean"] = euclidean;
    if (!neighborhoods.is_null()) manifest["neighborhoods"] = neighborhoods;
    manifest["levels"] = nlohmann::json::array();
    for (Index l = 0; l < hierarchy.level_count(); ++l) {
        const Mesh& m = hierarchy.levels[l];
        nlohmann::json level{{"vertices", m.vertex_count()},
                             {"faces", m.face_count()},
                             {"geodesic_edges", hierarchy.geodesic_edges[l].edge_count()}};
        if (euclidean) level["euclidean_edges"] = hierarchy.euclidean_edges[l].edge_count();
        manifest["levels"].push_back(level);

        save_mesh(m, level_path(dir, l), MeshFormat::Ply, PlyEncoding::BinaryLittleEndian);
        write_edges(hierarchy.geodesic_edges[l], edges_path(dir, l, "geo"));
        if (euclidean) write_edges(hierarchy.euclidean_edges[l], edges_path(dir, l, "euc"));
        if (l + 1 < hierarchy.level_count()) write_trace(hierarchy.traces[l], trace_path(dir, l));
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json read_hierarchy_manifest(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed manifest: " + e.what());
    }
}

Hierarchy deserialize_hierarchy(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open " + manifest_path.string());
    Hierarchy h;
    std::vector<Index> vertex_counts;
    bool euclidean = false;
    try {
        const nlohmann::json manifest = nlohmann::json::parse(is);
        if (manifest.value("format", "") != "dcm-hierarchy")
            throw IoError(manifest_path.string() + ": not a hierarchy manifest");
        h.config = manifest.at("config").get<HierarchyConfig>();
        euclidean = manifest.value("euclidean", false);
        for (const auto& level : manifest.at("levels")) vertex_counts.push_back(level.at("vertices").get<Index>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError(manifest_path.string() + ": malformed manifest: " + e.what());
    }
    const Index count = static_cast<Index>(vertex_counts.size());
    if (count == 0) throw ValidationError(manifest_path.string() + ": no levels");

    for (Index l = 0; l < count; ++l) {
        const fs::path mesh_file = level_path(dir, l);
        if (!fs::exists(mesh_file)) throw IoError("missing mesh for level " + std::to_string(l) + ": " + mesh_file.string());
        h.levels.push_back(load_mesh(mesh_file, MeshFormat::Ply));
        if (h.levels.back().vertex_count() != vertex_counts[l])
            throw ValidationError(mesh_file.string() + ": " + std::to_string(h.levels.back().vertex_count()) +
                                  " vertices, manifest says " + std::to_string(vertex_counts[l]));
    }
    for (Index l = 0; l < count; ++l) {
        const fs::path geo = edges_path(dir, l, "geo");
        if (!fs::exists(geo)) throw IoError("missing geodesic edges for level " + std::to_string(l) + ": " + geo.string());
        h.geodesic_edges.push_back(read_edges(geo, vertex_counts[l]));
        if (euclidean) {
            const fs::path euc = edges_path(dir, l, "euc");
            if (!fs::exists(euc)) throw IoError("missing Euclidean edges for level " + std::to_string(l) + ": " + euc.string());
            h.euclidean_edges.push_back(read_edges(euc, vertex_counts[l]));
        }
        if (l + 1 < count) {
            const fs::path trace = trace_path(dir, l);
            if (!fs::exists(trace)) throw IoError("missing trace for level " + std::to_string(l) + ": " + trace.string());
            h.traces.push_back(read_trace(trace, vertex_counts[l], vertex_counts[l + 1]));
        }
    }
    h.validate();
    return h;
}

}  // namespace dcm
