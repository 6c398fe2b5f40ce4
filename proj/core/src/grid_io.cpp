#include "mig/grid_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mig/error.hpp"

namespace mig {

namespace {

void put_u16(std::vector<unsigned char> &out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char> &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const unsigned char *p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char *p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

constexpr unsigned char kMagic[4] = {'M', 'I', 'G', 'F'};

} // namespace

Image FloatGrid::channel(int c) const {
    Image img(width, height);
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
            img.at(i, j) = at(c, i, j);
    return img;
}

FloatGrid FloatGrid::from_images(const std::vector<Image> &channels) {
    if (channels.empty())
        return {};
    FloatGrid grid(static_cast<int>(channels.size()), channels[0].height, channels[0].width);
    for (int c = 0; c < grid.channels; ++c) {
        if (channels[c].width != grid.width || channels[c].height != grid.height)
            throw ContractViolation("grid channels must share dimensions");
        for (int i = 0; i < grid.height; ++i)
            for (int j = 0; j < grid.width; ++j)
                grid.at(c, i, j) = static_cast<float>(channels[c].at(i, j));
    }
    return grid;
}

std::vector<unsigned char> encode_grid(const FloatGrid &grid) {
    if (grid.data.size() != static_cast<std::size_t>(grid.channels) * grid.height * grid.width)
        throw ContractViolation("grid payload does not match its dimensions");
    std::vector<unsigned char> out(kMagic, kMagic + 4);
    out.reserve(16 + grid.data.size() * 4);
    put_u16(out, kFloatGridVersion);
    put_u16(out, static_cast<std::uint16_t>(grid.channels));
    put_u32(out, static_cast<std::uint32_t>(grid.height));
    put_u32(out, static_cast<std::uint32_t>(grid.width));
    for (float f : grid.data)
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

FloatGrid decode_grid(const std::vector<unsigned char> &bytes, const std::string &what) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError(what + ": not a float grid file");
    std::uint16_t version = get_u16(bytes.data() + 4);
    if (version != kFloatGridVersion)
        throw IoError(what + ": unsupported grid version " + std::to_string(version));
    FloatGrid grid;
    grid.channels = get_u16(bytes.data() + 6);
    grid.height = static_cast<int>(get_u32(bytes.data() + 8));
    grid.width = static_cast<int>(get_u32(bytes.data() + 12));
    std::size_t count = static_cast<std::size_t>(grid.channels) * grid.height * grid.width;
    if (bytes.size() != 16 + count * 4)
        throw IoError(what + ": truncated or oversized grid payload");
    grid.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        grid.data[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
    return grid;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path &path, const std::vector<unsigned char> &bytes) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

void write_grid(const std::filesystem::path &path, const FloatGrid &grid) {
    write_file_bytes(path, encode_grid(grid));
}

FloatGrid read_grid(const std::filesystem::path &path) {
    return decode_grid(read_file_bytes(path), path.string());
}

} // namespace mig
