#include "pcrl/scene_model.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

namespace pcrl {

namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY reader assumes a little-endian host");

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<PlyType> parse_type(const std::string& name)
{
    if (name == "char" || name == "int8")
        return PlyType::Int8;
    if (name == "uchar" || name == "uint8")
        return PlyType::UInt8;
    if (name == "short" || name == "int16")
        return PlyType::Int16;
    if (name == "ushort" || name == "uint16")
        return PlyType::UInt16;
    if (name == "int" || name == "int32")
        return PlyType::Int32;
    if (name == "uint" || name == "uint32")
        return PlyType::UInt32;
    if (name == "float" || name == "float32")
        return PlyType::Float32;
    if (name == "double" || name == "float64")
        return PlyType::Float64;
    return std::nullopt;
}

std::size_t type_size(PlyType t)
{
    switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8:
        return 1;
    case PlyType::Int16:
    case PlyType::UInt16:
        return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32:
        return 4;
    case PlyType::Float64:
        return 8;
    }
    return 0;
}

template <typename T>
T load_raw(const char* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double decode(PlyType t, const char* p)
{
    switch (t) {
    case PlyType::Int8:
        return load_raw<std::int8_t>(p);
    case PlyType::UInt8:
        return load_raw<std::uint8_t>(p);
    case PlyType::Int16:
        return load_raw<std::int16_t>(p);
    case PlyType::UInt16:
        return load_raw<std::uint16_t>(p);
    case PlyType::Int32:
        return load_raw<std::int32_t>(p);
    case PlyType::UInt32:
        return load_raw<std::uint32_t>(p);
    case PlyType::Float32:
        return load_raw<float>(p);
    case PlyType::Float64:
        return load_raw<double>(p);
    }
    return 0.0;
}

struct Property {
    std::string name;
    PlyType type = PlyType::Float32;
    bool is_list = false;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

constexpr std::array<const char*, 7> kRequired = {"x", "y", "z", "nx", "ny", "nz", "label"};

} // namespace

PointCloud load_point_cloud(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    const std::string where = path.string() + ": ";

    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0)
        throw InputError(where + "not a PLY file");

    bool binary = false;
    std::vector<Element> elements;
    for (;;) {
        if (!std::getline(in, line))
            throw InputError(where + "unterminated header");
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream tok(line);
        std::string word;
        tok >> word;
        if (word == "end_header")
            break;
        if (word == "format") {
            std::string fmt;
            tok >> fmt;
            if (fmt == "ascii")
                binary = false;
            else if (fmt == "binary_little_endian")
                binary = true;
            else
                throw InputError(where + "unsupported format '" + fmt + "'");
        } else if (word == "element") {
            Element e;
            tok >> e.name >> e.count;
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty())
                throw InputError(where + "property outside an element");
            std::string type;
            tok >> type;
            Property prop;
            if (type == "list") {
                std::string count_type, item_type;
                tok >> count_type >> item_type >> prop.name;
                prop.is_list = true;
            } else {
                const auto t = parse_type(type);
                if (!t)
                    throw InputError(where + "unknown property type '" + type + "'");
                prop.type = *t;
                tok >> prop.name;
            }
            elements.back().properties.push_back(prop);
        }
        // comment / obj_info lines fall through
    }

    std::size_t vertex_index = elements.size();
    for (std::size_t i = 0; i < elements.size(); ++i)
        if (elements[i].name == "vertex") {
            vertex_index = i;
            break;
        }
    if (vertex_index == elements.size())
        throw InputError(where + "no vertex element");
    const Element& vertex = elements[vertex_index];

    std::array<int, kRequired.size()> slot{};
    for (std::size_t k = 0; k < kRequired.size(); ++k) {
        slot[k] = -1;
        for (std::size_t p = 0; p < vertex.properties.size(); ++p)
            if (vertex.properties[p].name == kRequired[k])
                slot[k] = static_cast<int>(p);
        if (slot[k] < 0)
            throw InputError(where + "schema error: missing vertex property '" + kRequired[k] + "'");
        if (vertex.properties[static_cast<std::size_t>(slot[k])].is_list)
            throw InputError(where + "schema error: property '" + std::string(kRequired[k]) + "' is a list");
    }

    // Elements before the vertex block must be skipped; list properties there are unsupported in binary.
    for (std::size_t i = 0; i < vertex_index; ++i) {
        const Element& e = elements[i];
        if (binary) {
            std::size_t stride = 0;
            for (const auto& p : e.properties) {
                if (p.is_list)
                    throw InputError(where + "list properties before the vertex element are not supported");
                stride += type_size(p.type);
            }
            in.seekg(static_cast<std::streamoff>(stride * e.count), std::ios::cur);
        } else {
            for (std::size_t r = 0; r < e.count; ++r)
                std::getline(in, line);
        }
    }

    std::vector<double> values(vertex.properties.size());
    std::vector<LabeledPoint> points;
    points.reserve(vertex.count);

    std::size_t stride = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : vertex.properties) {
        if (p.is_list && binary)
            throw InputError(where + "list properties inside the vertex element are not supported");
        offsets.push_back(stride);
        stride += type_size(p.type);
    }
    std::vector<char> record(stride);

    for (std::size_t r = 0; r < vertex.count; ++r) {
        if (binary) {
            if (!in.read(record.data(), static_cast<std::streamsize>(stride)))
                throw InputError(where + "truncated vertex data at record " + std::to_string(r));
            for (std::size_t p = 0; p < vertex.properties.size(); ++p)
                values[p] = decode(vertex.properties[p].type, record.data() + offsets[p]);
        } else {
            if (!std::getline(in, line))
                throw InputError(where + "truncated vertex data at record " + std::to_string(r));
            std::istringstream tok(line);
            for (std::size_t p = 0; p < vertex.properties.size(); ++p)
                if (!(tok >> values[p]))
                    throw InputError(where + "malformed vertex record " + std::to_string(r));
        }
        auto v = [&](std::size_t k) { return values[static_cast<std::size_t>(slot[k])]; };
        LabeledPoint pt;
        pt.position = Vec3(v(0), v(1), v(2));
        const Vec3 n(v(3), v(4), v(5));
        const double len = n.norm();
        if (!(len > 1e-12) || !std::isfinite(len))
            throw InputError(where + "record " + std::to_string(r) + ": zero-length normal");
        pt.normal = n / len;
        const double label = v(6);
        if (label < 0.0 || label != std::floor(label))
            throw InputError(where + "record " + std::to_string(r) + ": label must be a non-negative integer");
        pt.label = static_cast<std::uint32_t>(label);
        if (!is_finite(pt.position))
            throw InputError(where + "record " + std::to_string(r) + ": non-finite position");
        points.push_back(pt);
    }
    return PointCloud(std::move(points));
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, bool binary)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << "ply\n"
        << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n") << "element vertex "
        << cloud.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property double nx\nproperty double ny\nproperty double nz\n"
        << "property int label\nend_header\n";
    if (binary) {
        std::array<char, 6 * sizeof(double) + sizeof(std::int32_t)> rec{};
        for (const auto& p : cloud.points()) {
            const std::array<double, 6> v = {p.position.x(), p.position.y(), p.position.z(),
                                             p.normal.x(),   p.normal.y(),   p.normal.z()};
            std::memcpy(rec.data(), v.data(), sizeof(v));
            const auto label = static_cast<std::int32_t>(p.label);
            std::memcpy(rec.data() + sizeof(v), &label, sizeof(label));
            out.write(rec.data(), rec.size());
        }
    } else {
        out.precision(17);
        for (const auto& p : cloud.points())
            out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << p.normal.x() << ' '
                << p.normal.y() << ' ' << p.normal.z() << ' ' << p.label << '\n';
    }
}

} // namespace pcrl
