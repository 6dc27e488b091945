#include "ngsplat/io/ply.hpp"

#include "ngsplat/io/fsio.hpp"

#include <cstring>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ngs {

namespace {

constexpr int kFieldFloats = 24;

const char* kFieldProps[kFieldFloats] = {
    "x",        "y",        "z",        "nx",       "ny",       "nz",
    "f_dc_0",   "f_dc_1",   "f_dc_2",   "f_rest_0", "f_rest_1", "f_rest_2",
    "f_rest_3", "f_rest_4", "f_rest_5", "f_rest_6", "f_rest_7", "f_rest_8",
    "opacity",  "scale_0",  "scale_1",  "scale_2",  "rot_0",    "rot_1",
};
// rot_2 and rot_3 complete the quaternion; appended below to keep the
// table readable.

struct PlyProperty {
    std::string type;
    std::string name;
};

struct PlyHeader {
    std::size_t vertex_count = 0;
    std::vector<PlyProperty> properties;
    std::vector<std::string> comments;
    std::size_t data_offset = 0;
};

std::size_t type_size(const std::string& t) {
    if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" ||
        t == "uint32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    if (t == "uchar" || t == "uint8" || t == "char" || t == "int8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    throw std::runtime_error("unsupported PLY property type: " + t);
}

PlyHeader parse_header(const std::vector<std::uint8_t>& bytes) {
    const std::string text(reinterpret_cast<const char*>(bytes.data()),
                           std::min<std::size_t>(bytes.size(), 65536));
    const std::size_t header_end = text.find("end_header\n");
    if (header_end == std::string::npos) throw std::runtime_error("PLY: missing end_header");

    PlyHeader header;
    header.data_offset = header_end + std::strlen("end_header\n");

    std::istringstream in(text.substr(0, header_end));
    std::string line;
    bool saw_format = false;
    bool in_vertex_element = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "ply") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian")
                throw std::runtime_error("PLY: only binary_little_endian is supported");
            saw_format = true;
        } else if (word == "comment") {
            header.comments.push_back(line.substr(std::strlen("comment ")));
        } else if (word == "element") {
            std::string name;
            std::size_t count;
            ls >> name >> count;
            if (name == "vertex") {
                header.vertex_count = count;
                in_vertex_element = true;
            } else {
                if (count != 0) throw std::runtime_error("PLY: unsupported element: " + name);
                in_vertex_element = false;
            }
        } else if (word == "property" && in_vertex_element) {
            PlyProperty p;
            ls >> p.type >> p.name;
            if (p.type == "list") throw std::runtime_error("PLY: list properties unsupported");
            header.properties.push_back(p);
        }
    }
    if (!saw_format) throw std::runtime_error("PLY: missing format line");
    return header;
}

// Per-vertex reader resolving property names to byte offsets.
class VertexReader {
public:
    VertexReader(const std::vector<std::uint8_t>& bytes, const PlyHeader& header)
        : bytes_(bytes), header_(header) {
        stride_ = 0;
        for (const auto& p : header.properties) {
            offsets_[p.name] = {stride_, p.type};
            stride_ += type_size(p.type);
        }
        if (bytes.size() < header.data_offset + stride_ * header.vertex_count)
            throw std::runtime_error("PLY: truncated vertex data");
    }

    float get_float(std::size_t vertex, const std::string& name) const {
        const auto it = offsets_.find(name);
        if (it == offsets_.end()) throw std::runtime_error("PLY: missing property " + name);
        const auto& [offset, type] = it->second;
        const std::uint8_t* p = bytes_.data() + header_.data_offset + vertex * stride_ + offset;
        if (type == "float" || type == "float32") {
            float v;
            std::memcpy(&v, p, 4);
            return v;
        }
        if (type == "double" || type == "float64") {
            double v;
            std::memcpy(&v, p, 8);
            return static_cast<float>(v);
        }
        if (type == "uchar" || type == "uint8") return static_cast<float>(*p);
        throw std::runtime_error("PLY: property " + name + " has unsupported type " + type);
    }

    bool has(const std::string& name) const { return offsets_.count(name) > 0; }

private:
    const std::vector<std::uint8_t>& bytes_;
    const PlyHeader& header_;
    std::size_t stride_ = 0;
    std::map<std::string, std::pair<std::size_t, std::string>> offsets_;
};

void append_float(std::vector<std::uint8_t>& out, float v) {
    std::uint8_t buf[4];
    std::memcpy(buf, &v, 4);
    out.insert(out.end(), buf, buf + 4);
}

ParamMode parse_param_mode(const std::string& s) {
    if (s == "unconstrained") return ParamMode::Unconstrained;
    if (s == "isotropic") return ParamMode::Isotropic;
    if (s == "normal_guided") return ParamMode::NormalGuided;
    throw std::runtime_error("unknown param_mode: " + s);
}

}  // namespace

void save_field(const std::filesystem::path& path, const GaussianField<float>& field) {
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "comment ngsplat_param_mode=" << param_mode_name(field.param_mode) << "\n";
    header << "comment ngsplat_sh_degree=" << field.sh_degree << "\n";
    header << "element vertex " << field.size() << "\n";
    for (int i = 0; i < kFieldFloats - 2; ++i) header << "property float " << kFieldProps[i] << "\n";
    header << "property float rot_2\nproperty float rot_3\n";
    header << "end_header\n";

    std::vector<std::uint8_t> bytes;
    const std::string h = header.str();
    bytes.insert(bytes.end(), h.begin(), h.end());
    bytes.reserve(bytes.size() + field.size() * kFieldFloats * 4);
    for (const auto& g : field.gaussians) {
        for (int k = 0; k < 3; ++k) append_float(bytes, g.position[k]);
        for (int k = 0; k < 3; ++k) append_float(bytes, g.normal_raw[k]);
        for (int c = 0; c < 3; ++c) append_float(bytes, g.sh(c, 0));
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < 4; ++k) append_float(bytes, g.sh(c, k));
        append_float(bytes, g.opacity_raw);
        for (int k = 0; k < 3; ++k) append_float(bytes, g.scales_log[k]);
        for (int k = 0; k < 4; ++k) append_float(bytes, g.rotation_raw[k]);
    }
    atomic_write_file(path, bytes);
}

GaussianField<float> load_field(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    const PlyHeader header = parse_header(bytes);
    const VertexReader reader(bytes, header);

    GaussianField<float> field;
    for (const auto& c : header.comments) {
        if (c.rfind("ngsplat_param_mode=", 0) == 0)
            field.param_mode = parse_param_mode(c.substr(std::strlen("ngsplat_param_mode=")));
        if (c.rfind("ngsplat_sh_degree=", 0) == 0)
            field.sh_degree = std::stoi(c.substr(std::strlen("ngsplat_sh_degree=")));
    }

    field.gaussians.resize(header.vertex_count);
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
        Gaussian3D<float>& g = field.gaussians[i];
        g.position = {reader.get_float(i, "x"), reader.get_float(i, "y"), reader.get_float(i, "z")};
        g.normal_raw = {reader.get_float(i, "nx"), reader.get_float(i, "ny"),
                        reader.get_float(i, "nz")};
        for (int c = 0; c < 3; ++c) g.sh(c, 0) = reader.get_float(i, "f_dc_" + std::to_string(c));
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k < 4; ++k)
                g.sh(c, k) = reader.get_float(i, "f_rest_" + std::to_string(c * 3 + k - 1));
        g.opacity_raw = reader.get_float(i, "opacity");
        for (int k = 0; k < 3; ++k) g.scales_log[k] = reader.get_float(i, "scale_" + std::to_string(k));
        for (int k = 0; k < 4; ++k) g.rotation_raw[k] = reader.get_float(i, "rot_" + std::to_string(k));
    }
    return field;
}

void save_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
    if (cloud.normals.size() != cloud.positions.size() ||
        cloud.colors.size() != cloud.positions.size())
        throw std::invalid_argument("point cloud arrays must have equal length");

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << cloud.positions.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) header << "property float " << n << "\n";
    for (const char* n : {"red", "green", "blue"}) header << "property uchar " << n << "\n";
    header << "end_header\n";

    std::vector<std::uint8_t> bytes;
    const std::string h = header.str();
    bytes.insert(bytes.end(), h.begin(), h.end());
    for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
        for (int k = 0; k < 3; ++k) append_float(bytes, cloud.positions[i][k]);
        for (int k = 0; k < 3; ++k) append_float(bytes, cloud.normals[i][k]);
        for (int k = 0; k < 3; ++k) {
            const float v = std::clamp(cloud.colors[i][k], 0.0f, 1.0f);
            bytes.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
        }
    }
    atomic_write_file(path, bytes);
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    const PlyHeader header = parse_header(bytes);
    const VertexReader reader(bytes, header);

    PointCloud cloud;
    cloud.positions.resize(header.vertex_count);
    cloud.normals.resize(header.vertex_count);
    cloud.colors.resize(header.vertex_count);
    const bool has_normals = reader.has("nx");
    const bool has_colors = reader.has("red");
    for (std::size_t i = 0; i < header.vertex_count; ++i) {
        cloud.positions[i] = {reader.get_float(i, "x"), reader.get_float(i, "y"),
                              reader.get_float(i, "z")};
        cloud.normals[i] = has_normals ? Vec3<float>(reader.get_float(i, "nx"),
                                                     reader.get_float(i, "ny"),
                                                     reader.get_float(i, "nz"))
                                       : Vec3<float>(0, 0, 1);
        cloud.colors[i] = has_colors ? Vec3<float>(reader.get_float(i, "red") / 255.0f,
                                                   reader.get_float(i, "green") / 255.0f,
                                                   reader.get_float(i, "blue") / 255.0f)
                                     : Vec3<float>(0.5f, 0.5f, 0.5f);
    }
    return cloud;
}

}  // namespace ngs
