#include "ngsplat/triplane/triplane_io.hpp"

#include "ngsplat/io/fsio.hpp"

#include <json.hpp>

#include <cstring>
#include <stdexcept>

namespace ngs {

namespace {
constexpr char kMagic[4] = {'N', 'G', 'T', 'P'};
}

void save_triplane_stack(const std::filesystem::path& path, const TriplaneStack<float>& stack,
                         std::uint64_t seed) {
    nlohmann::json header;
    header["version"] = 1;
    header["plane_order"] = {"xy", "yz", "zx"};
    header["layout"] = "row,col,channel";
    header["dtype"] = "float32";
    header["seed"] = seed;
    header["scales"] = nlohmann::json::array();
    for (const auto& scale : stack.scales)
        header["scales"].push_back({{"resolution", scale.resolution},
                                    {"channels", scale.channels}});
    const std::string htext = header.dump();

    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>((hlen >> (8 * b)) & 0xff));
    bytes.insert(bytes.end(), htext.begin(), htext.end());
    for (const auto& scale : stack.scales)
        for (const auto& plane : scale.planes) {
            const std::size_t n = plane.data.size() * sizeof(float);
            const std::size_t offset = bytes.size();
            bytes.resize(offset + n);
            std::memcpy(bytes.data() + offset, plane.data.data(), n);
        }
    atomic_write_file(path, bytes);
}

LoadedTriplaneStack load_triplane_stack(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("not a triplane stack file: " + path.string());
    std::uint32_t hlen = 0;
    for (int b = 0; b < 4; ++b) hlen |= static_cast<std::uint32_t>(bytes[4 + b]) << (8 * b);
    if (bytes.size() < 8 + hlen) throw std::runtime_error("truncated triplane header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("triplane header parse error: " + std::string(e.what()));
    }
    if (header.at("version").get<int>() != 1 || header.at("dtype") != "float32")
        throw std::runtime_error("unsupported triplane container");

    LoadedTriplaneStack out;
    out.seed = header.value("seed", 0ULL);
    std::size_t offset = 8 + hlen;
    for (const auto& sj : header.at("scales")) {
        Triplane<float> scale;
        scale.resolution = sj.at("resolution").get<int>();
        scale.channels = sj.at("channels").get<int>();
        for (auto& plane : scale.planes) {
            plane = FeatureGrid<float>(scale.resolution, scale.channels);
            const std::size_t n = plane.data.size() * sizeof(float);
            if (offset + n > bytes.size()) throw std::runtime_error("truncated triplane data");
            std::memcpy(plane.data.data(), bytes.data() + offset, n);
            offset += n;
        }
        out.stack.scales.push_back(std::move(scale));
    }
    return out;
}

}  // namespace ngs
