#include "dcm/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace dcm {

namespace {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_type(const std::string& name, std::size_t line) {
    static const std::map<std::string, PlyType> table{
        {"char", PlyType::Int8},     {"int8", PlyType::Int8},       {"uchar", PlyType::UInt8},
        {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},     {"int16", PlyType::Int16},
        {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},   {"int", PlyType::Int32},
        {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},     {"uint32", PlyType::UInt32},
        {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
        {"float64", PlyType::Float64}};
    auto it = table.find(name);
    if (it == table.end()) throw IoError("PLY line " + std::to_string(line) + ": unknown property type '" + name + "'");
    return it->second;
}

std::size_t type_size(PlyType t) {
    switch (t) {
        case PlyType::Int8:
        case PlyType::UInt8: return 1;
        case PlyType::Int16:
        case PlyType::UInt16: return 2;
        case PlyType::Int32:
        case PlyType::UInt32:
        case PlyType::Float32: return 4;
        case PlyType::Float64: return 8;
    }
    return 0;
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::Float32;
    bool is_list = false;
    PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Sequential value source over the PLY body, either text or little-endian binary.
class BodyReader {
public:
    BodyReader(const std::string& data, std::size_t offset, bool binary, std::size_t first_line)
        : data_(data), pos_(offset), binary_(binary), line_(first_line) {}

    /// Starts a new element record; in ASCII mode a record is one line.
    void begin_record() {
        if (binary_) return;
        tokens_.clear();
        next_token_ = 0;
        while (tokens_.empty()) {
            if (pos_ >= data_.size()) throw error("unexpected end of file");
            std::size_t end = data_.find('\n', pos_);
            if (end == std::string::npos) end = data_.size();
            std::istringstream ls(data_.substr(pos_, end - pos_));
            std::string tok;
            while (ls >> tok) tokens_.push_back(tok);
            pos_ = end + 1;
            ++line_;
        }
    }

    double read(PlyType type) {
        if (!binary_) {
            if (next_token_ >= tokens_.size()) throw error("too few values in record");
            const std::string& tok = tokens_[next_token_++];
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
                return v;
            } catch (const std::exception&) {
                throw error("malformed number '" + tok + "'");
            }
        }
        const std::size_t n = type_size(type);
        if (pos_ + n > data_.size()) throw error("unexpected end of binary data");
        unsigned char buf[8];
        std::memcpy(buf, data_.data() + pos_, n);
        if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + n);
        pos_ += n;
        switch (type) {
            case PlyType::Int8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
            case PlyType::UInt8: return static_cast<double>(buf[0]);
            case PlyType::Int16: return load<std::int16_t>(buf);
            case PlyType::UInt16: return load<std::uint16_t>(buf);
            case PlyType::Int32: return load<std::int32_t>(buf);
            case PlyType::UInt32: return load<std::uint32_t>(buf);
            case PlyType::Float32: return load<float>(buf);
            case PlyType::Float64: return load<double>(buf);
        }
        return 0.0;
    }

    void end_record() {
        if (!binary_ && next_token_ != tokens_.size()) throw error("too many values in record");
    }

    IoError error(const std::string& what) const {
        if (binary_) return IoError("PLY byte offset " + std::to_string(pos_) + ": " + what);
        return IoError("PLY line " + std::to_string(line_) + ": " + what);
    }

private:
    template <typename T>
    static double load(const unsigned char* buf) {
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return static_cast<double>(v);
    }

    const std::string& data_;
    std::size_t pos_;
    bool binary_;
    std::size_t line_;
    std::vector<std::string> tokens_;
    std::size_t next_token_ = 0;
};

double color_scale(PlyType t) {
    switch (t) {
        case PlyType::UInt8:
        case PlyType::Int8: return 1.0 / 255.0;
        case PlyType::UInt16:
        case PlyType::Int16: return 1.0 / 65535.0;
        case PlyType::Float32:
        case PlyType::Float64: return 1.0;
        default: return 1.0 / 255.0;
    }
}

Mesh read_ply(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0;
    std::size_t line = 0;
    auto next_line = [&]() {
        if (pos >= data.size()) throw IoError("PLY line " + std::to_string(line + 1) + ": missing end_header");
        std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) end = data.size();
        std::string s = data.substr(pos, end - pos);
        if (!s.empty() && s.back() == '\r') s.pop_back();
        pos = end + 1;
        ++line;
        return s;
    };

    if (next_line() != "ply") throw IoError("PLY line 1: missing 'ply' magic");
    bool binary = false;
    bool have_format = false;
    std::vector<PlyElement> elements;
    for (;;) {
        const std::string header = next_line();
        std::istringstream ls(header);
        std::string keyword;
        ls >> keyword;
        if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
        if (keyword == "end_header") break;
        if (keyword == "format") {
            std::string kind;
            ls >> kind;
            if (kind == "ascii") {
                binary = false;
            } else if (kind == "binary_little_endian") {
                binary = true;
            } else {
                throw IoError("PLY line " + std::to_string(line) + ": unsupported format '" + kind + "'");
            }
            have_format = true;
        } else if (keyword == "element") {
            PlyElement el;
            long long count = -1;
            ls >> el.name >> count;
            if (el.name.empty() || count < 0)
                throw IoError("PLY line " + std::to_string(line) + ": malformed element declaration");
            el.count = static_cast<std::size_t>(count);
            elements.push_back(el);
        } else if (keyword == "property") {
            if (elements.empty()) throw IoError("PLY line " + std::to_string(line) + ": property before element");
            PlyProperty prop;
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string count_type, item_type;
                ls >> count_type >> item_type >> prop.name;
                prop.is_list = true;
                prop.count_type = parse_type(count_type, line);
                prop.type = parse_type(item_type, line);
            } else {
                prop.type = parse_type(type, line);
                ls >> prop.name;
            }
            if (prop.name.empty()) throw IoError("PLY line " + std::to_string(line) + ": property without name");
            elements.back().properties.push_back(prop);
        } else {
            throw IoError("PLY line " + std::to_string(line) + ": unexpected header keyword '" + keyword + "'");
        }
    }
    if (!have_format) throw IoError("PLY header has no format line");

    Mesh mesh;
    BodyReader reader(data, pos, binary, line);
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            std::map<std::string, std::size_t> column;
            for (std::size_t p = 0; p < el.properties.size(); ++p) {
                if (el.properties[p].is_list) throw reader.error("list property on vertex element");
                column[el.properties[p].name] = p;
            }
            for (const char* req : {"x", "y", "z"}) {
                if (!column.count(req)) throw IoError(std::string("PLY vertex element lacks property ") + req);
            }
            auto has = [&](std::initializer_list<const char*> names) {
                return std::all_of(names.begin(), names.end(), [&](const char* n) { return column.count(n) > 0; });
            };
            const bool has_color = has({"red", "green", "blue"});
            const bool has_normal = has({"nx", "ny", "nz"});
            const bool has_label = column.count("label") > 0;
            const auto n = static_cast<Index>(el.count);
            mesh.positions.resize(n, 3);
            if (has_color) mesh.colors = Points(n, 3);
            if (has_normal) mesh.normals = Points(n, 3);
            if (has_label) mesh.labels = Labels(n);
            std::vector<double> values(el.properties.size());
            for (Index i = 0; i < n; ++i) {
                reader.begin_record();
                for (std::size_t p = 0; p < el.properties.size(); ++p) values[p] = reader.read(el.properties[p].type);
                reader.end_record();
                mesh.positions.row(i) << values[column["x"]], values[column["y"]], values[column["z"]];
                if (has_color) {
                    int k = 0;
                    for (const char* c : {"red", "green", "blue"}) {
                        const std::size_t p = column[c];
                        (*mesh.colors)(i, k++) = values[p] * color_scale(el.properties[p].type);
                    }
                }
                if (has_normal)
                    mesh.normals->row(i) << values[column["nx"]], values[column["ny"]], values[column["nz"]];
                if (has_label) (*mesh.labels)(i) = static_cast<Index>(values[column["label"]]);
            }
        } else if (el.name == "face") {
            std::vector<Index> faces;
            faces.reserve(el.count * 3);
            for (std::size_t f = 0; f < el.count; ++f) {
                reader.begin_record();
                for (const auto& prop : el.properties) {
                    if (!prop.is_list) {
                        reader.read(prop.type);
                        continue;
                    }
                    const double count = reader.read(prop.count_type);
                    const bool indices = prop.name == "vertex_indices" || prop.name == "vertex_index";
                    if (indices && count != 3.0)
                        throw reader.error("non-triangle face with " + std::to_string(static_cast<long long>(count)) +
                                           " corners");
                    for (int k = 0; k < static_cast<int>(count); ++k) {
                        const double v = reader.read(prop.type);
                        if (indices) faces.push_back(static_cast<Index>(v));
                    }
                }
                reader.end_record();
            }
            mesh.faces = Eigen::Map<const Faces>(faces.data(), static_cast<Index>(faces.size() / 3), 3);
        } else {
            for (std::size_t r = 0; r < el.count; ++r) {
                reader.begin_record();
                for (const auto& prop : el.properties) {
                    if (prop.is_list) {
                        const double count = reader.read(prop.count_type);
                        for (int k = 0; k < static_cast<int>(count); ++k) reader.read(prop.type);
                    } else {
                        reader.read(prop.type);
                    }
                }
                reader.end_record();
            }
        }
    }
    return mesh;
}

Mesh read_off(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::size_t line_no = 0;
    std::string line;
    // Yields the next non-empty, non-comment line as a token stream.
    auto next = [&]() {
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
        }
        throw IoError("OFF line " + std::to_string(line_no) + ": unexpected end of file");
    };
    auto fail = [&](const std::string& what) { return IoError("OFF line " + std::to_string(line_no) + ": " + what); };

    auto header = next();
    std::string magic;
    header >> magic;
    if (magic != "OFF") throw fail("missing 'OFF' magic");
    long long nv = -1, nf = -1, ne = 0;
    if (!(header >> nv)) {
        auto counts = next();
        counts >> nv >> nf >> ne;
    } else {
        header >> nf >> ne;
    }
    if (nv < 0 || nf < 0) throw fail("malformed element counts");

    Mesh mesh;
    mesh.positions.resize(static_cast<Index>(nv), 3);
    for (Index i = 0; i < nv; ++i) {
        auto ls = next();
        double x, y, z;
        if (!(ls >> x >> y >> z)) throw fail("malformed vertex");
        mesh.positions.row(i) << x, y, z;
    }
    mesh.faces.resize(static_cast<Index>(nf), 3);
    for (Index f = 0; f < nf; ++f) {
        auto ls = next();
        long long k = 0;
        if (!(ls >> k)) throw fail("malformed face");
        if (k != 3) throw fail("non-triangle face with " + std::to_string(k) + " corners");
        long long a, b, c;
        if (!(ls >> a >> b >> c)) throw fail("malformed face");
        mesh.faces.row(f) << static_cast<Index>(a), static_cast<Index>(b), static_cast<Index>(c);
    }
    return mesh;
}

template <typename T>
void put(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void write_ply(const Mesh& mesh, const std::filesystem::path& path, PlyEncoding encoding) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    const bool binary = encoding == PlyEncoding::BinaryLittleEndian;
    os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    os << "element vertex " << mesh.vertex_count() << "\n";
    os << "property double x\nproperty double y\nproperty double z\n";
    if (mesh.colors) os << "property double red\nproperty double green\nproperty double blue\n";
    if (mesh.normals) os << "property double nx\nproperty double ny\nproperty double nz\n";
    if (mesh.labels) os << "property int label\n";
    os << "element face " << mesh.face_count() << "\n";
    os << "property list uchar int vertex_indices\nend_header\n";

    if (binary) {
        for (Index i = 0; i < mesh.vertex_count(); ++i) {
            for (int k = 0; k < 3; ++k) put<double>(os, mesh.positions(i, k));
            if (mesh.colors)
                for (int k = 0; k < 3; ++k) put<double>(os, (*mesh.colors)(i, k));
            if (mesh.normals)
                for (int k = 0; k < 3; ++k) put<double>(os, (*mesh.normals)(i, k));
            if (mesh.labels) put<std::int32_t>(os, (*mesh.labels)(i));
        }
        for (Index f = 0; f < mesh.face_count(); ++f) {
            put<std::uint8_t>(os, 3);
            for (int k = 0; k < 3; ++k) put<std::int32_t>(os, mesh.faces(f, k));
        }
    } else {
        os << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (Index i = 0; i < mesh.vertex_count(); ++i) {
            os << mesh.positions(i, 0) << ' ' << mesh.positions(i, 1) << ' ' << mesh.positions(i, 2);
            if (mesh.colors)
                for (int k = 0; k < 3; ++k) os << ' ' << (*mesh.colors)(i, k);
            if (mesh.normals)
                for (int k = 0; k < 3; ++k) os << ' ' << (*mesh.normals)(i, k);
            if (mesh.labels) os << ' ' << (*mesh.labels)(i);
            os << '\n';
        }
        for (Index f = 0; f < mesh.face_count(); ++f)
            os << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
    }
    if (!os) throw IoError("write failed for " + path.string());
}

void write_off(const Mesh& mesh, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index i = 0; i < mesh.vertex_count(); ++i)
        os << mesh.positions(i, 0) << ' ' << mesh.positions(i, 1) << ' ' << mesh.positions(i, 2) << '\n';
    for (Index f = 0; f < mesh.face_count(); ++f)
        os << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
    if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ply") return MeshFormat::Ply;
    if (ext == ".off") return MeshFormat::Off;
    throw ConfigError("cannot infer mesh format from extension of " + path.string());
}

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    Mesh mesh = format == MeshFormat::Ply ? read_ply(path) : read_off(path);
    require_valid(mesh);
    return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

void save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format, PlyEncoding encoding) {
    if (format == MeshFormat::Ply) {
        write_ply(mesh, path, encoding);
    } else {
        write_off(mesh, path);
    }
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) { save_mesh(mesh, path, format_from_path(path)); }

LabeledPointCloud load_point_cloud(const std::filesystem::path& path) {
    const Mesh mesh = read_ply(path);
    const auto n = mesh.vertex_count();
    for (Index i = 0; i < n; ++i) {
        if (!mesh.positions.row(i).allFinite()) throw ValidationError("non-finite coordinate at point " + std::to_string(i));
    }
    LabeledPointCloud cloud;
    cloud.points = mesh.positions;
    cloud.colors = mesh.colors ? *mesh.colors : Points(Points::Zero(n, 3));
    cloud.labels = mesh.labels ? *mesh.labels : Labels(Labels::Constant(n, kUnlabeled));
    return cloud;
}

}  // namespace dcm
