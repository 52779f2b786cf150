#include "parhom/grid.hpp"

#include <cstring>
#include <fstream>

namespace parhom {

namespace {
constexpr char kMagic[4] = {'P', 'H', 'G', 'F'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::ifstream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void write_grid_function(const std::filesystem::path& path, const GridFunction& gf) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path.string());
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, static_cast<std::int32_t>(gf.grid.d));
    put(os, static_cast<std::int32_t>(gf.grid.cells));
    put(os, static_cast<std::int32_t>(gf.grid.m));
    put(os, static_cast<std::int32_t>(gf.components));
    put(os, gf.steps);
    put(os, gf.dt);
    put(os, gf.t0);
    put(os, static_cast<std::uint32_t>(gf.tag.size()));
    os.write(gf.tag.data(), static_cast<std::streamsize>(gf.tag.size()));
    os.write(reinterpret_cast<const char*>(gf.values.data()),
             static_cast<std::streamsize>(gf.values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("short write: " + path.string());
}

GridFunction read_grid_function(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for read: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a grid-function file: " + path.string());
    std::uint32_t version = 0;
    get(is, version);
    if (version != kVersion)
        throw std::runtime_error("grid-function version mismatch in " + path.string());
    std::int32_t d, cells, m, comps;
    get(is, d);
    get(is, cells);
    get(is, m);
    get(is, comps);
    GridFunction gf;
    gf.grid = GridSpec{d, cells, m};
    gf.components = comps;
    get(is, gf.steps);
    get(is, gf.dt);
    get(is, gf.t0);
    std::uint32_t tag_len = 0;
    get(is, tag_len);
    gf.tag.resize(tag_len);
    is.read(gf.tag.data(), tag_len);
    const std::size_t count =
        static_cast<std::size_t>(gf.steps) * static_cast<std::size_t>(comps) *
        static_cast<std::size_t>(gf.grid.points());
    gf.values.resize(count);
    is.read(reinterpret_cast<char*>(gf.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("truncated grid-function file: " + path.string());
    return gf;
}

}  // namespace parhom
