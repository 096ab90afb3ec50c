#include "gridwatch/grid.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gridwatch {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "person", "car", "van", "truck", "motorbike", "bike", "bus", "trailer",
};

constexpr char kContainerMagic[8] = {'G', 'W', 'G', 'D', 'S', '0', '1', '\n'};

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

std::string_view category_name(ObjectCategory c) {
    return kCategoryNames[static_cast<std::size_t>(c)];
}

std::optional<ObjectCategory> category_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        if (kCategoryNames[i] == name) return static_cast<ObjectCategory>(i);
    }
    return std::nullopt;
}

std::optional<ObjectCategory> category_from_index(std::size_t index) {
    if (index >= kCategoryCount) return std::nullopt;
    return static_cast<ObjectCategory>(index);
}

void GridSpec::validate() const {
    if (rows < 1 || cols < 1) throw ConfigError("grid spec: rows and cols must be >= 1");
    if (categories != kCategoryCount)
        throw ConfigError("grid spec: categories must be " + std::to_string(kCategoryCount));
    if (frame_width_px < 1 || frame_height_px < 1)
        throw ConfigError("grid spec: frame dimensions must be >= 1 pixel");
}

GridVector::GridVector(const GridSpec& spec) : spec_(spec) {
    spec.validate();
    bits_.assign(spec.cell_count(), 0);
}

void GridVector::set_bit(std::size_t index, std::uint8_t value) {
    if (index >= bits_.size()) throw BoundsError("grid bit index out of range");
    bits_[index] = value ? 1 : 0;
}

std::size_t linear_index(const GridCell& cell, const GridSpec& spec) {
    if (cell.row >= spec.rows || cell.col >= spec.cols)
        throw BoundsError("cell (" + std::to_string(cell.row) + "," + std::to_string(cell.col) +
                          ") outside " + std::to_string(spec.rows) + "x" + std::to_string(spec.cols) +
                          " grid");
    const auto cat = static_cast<std::size_t>(cell.category);
    return (cell.row * spec.cols + cell.col) * spec.categories + cat;
}

GridCell cell_at(std::size_t index, const GridSpec& spec) {
    if (index >= spec.cell_count()) throw BoundsError("linear index out of range");
    GridCell cell;
    cell.category = static_cast<ObjectCategory>(index % spec.categories);
    const std::size_t spatial = index / spec.categories;
    cell.col = spatial % spec.cols;
    cell.row = spatial / spec.cols;
    return cell;
}

RasterizeResult rasterize(std::span<const BoxAnnotation> annotations, const GridSpec& spec) {
    spec.validate();
    RasterizeResult result{GridVector(spec), 0};
    const double w = static_cast<double>(spec.frame_width_px);
    const double h = static_cast<double>(spec.frame_height_px);
    for (const BoxAnnotation& box : annotations) {
        if (box.x_max <= 0 || box.x_min >= w || box.y_max <= 0 || box.y_min >= h) {
            ++result.skipped_boxes;
            continue;
        }
        const double x0 = std::clamp(box.x_min, 0.0, w);
        const double x1 = std::clamp(box.x_max, 0.0, w);
        const double y0 = std::clamp(box.y_min, 0.0, h);
        const double y1 = std::clamp(box.y_max, 0.0, h);
        const double cx = 0.5 * (x0 + x1);
        const double cy = 0.5 * (y0 + y1);
        GridCell cell;
        cell.col = std::min(spec.cols - 1, static_cast<std::size_t>(cx * static_cast<double>(spec.cols) / w));
        cell.row = std::min(spec.rows - 1, static_cast<std::size_t>(cy * static_cast<double>(spec.rows) / h));
        cell.category = box.category;
        result.grid.set_bit(linear_index(cell, spec), 1);
    }
    return result;
}

GridVector set_cell(const GridVector& grid, const GridCell& cell) {
    GridVector out = grid;
    out.set_bit(linear_index(cell, grid.spec()), 1);
    return out;
}

std::vector<GridCell> diff_cells(const GridVector& a, const GridVector& b) {
    if (!(a.spec() == b.spec()))
        throw ShapeError("diff_cells: grid specs differ");
    std::vector<GridCell> cells;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.bit(i) != b.bit(i)) cells.push_back(cell_at(i, a.spec()));
    }
    return cells;  // linear-index order by construction
}

std::size_t popcount(const GridVector& grid) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) n += grid.bit(i);
    return n;
}

void write_grid_text(const GridVector& grid, std::ostream& out) {
    out << grid.spec().rows << ' ' << grid.spec().cols << ' ' << grid.spec().categories << '\n';
    out << to_bit_string(grid) << '\n';
}

GridVector read_grid_text(std::istream& in, const GridSpec& frame_defaults) {
    GridSpec spec = frame_defaults;
    if (!(in >> spec.rows >> spec.cols >> spec.categories))
        throw ParseError("grid text: malformed header, expected 'rows cols categories'");
    spec.validate();
    GridVector grid(spec);
    std::size_t got = 0;
    char ch;
    while (got < spec.cell_count() && in >> ch) {
        if (ch == '0' || ch == '1') {
            grid.set_bit(got++, static_cast<std::uint8_t>(ch - '0'));
        } else {
            throw ParseError(std::string("grid text: unexpected character '") + ch + "'");
        }
    }
    if (got != spec.cell_count())
        throw ParseError("grid text: expected " + std::to_string(spec.cell_count()) +
                         " bits, got " + std::to_string(got));
    return grid;
}

std::string to_bit_string(const GridVector& grid) {
    std::string s(grid.size(), '0');
    for (std::size_t i = 0; i < grid.size(); ++i) s[i] = grid.bit(i) ? '1' : '0';
    return s;
}

GridVector from_bit_string(const GridSpec& spec, std::string_view bits) {
    if (bits.size() != spec.cell_count())
        throw ShapeError("bit string length " + std::to_string(bits.size()) +
                         " does not match spec cell count " + std::to_string(spec.cell_count()));
    GridVector grid(spec);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != '0' && bits[i] != '1') throw ParseError("bit string: only '0'/'1' allowed");
        grid.set_bit(i, static_cast<std::uint8_t>(bits[i] - '0'));
    }
    return grid;
}

void write_grid_container(std::span<const GridVector> grids, const GridSpec& spec,
                          const std::filesystem::path& path) {
    spec.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kContainerMagic, sizeof(kContainerMagic));
    write_u32(out, static_cast<std::uint32_t>(spec.rows));
    write_u32(out, static_cast<std::uint32_t>(spec.cols));
    write_u32(out, static_cast<std::uint32_t>(spec.categories));
    write_u32(out, static_cast<std::uint32_t>(spec.frame_width_px));
    write_u32(out, static_cast<std::uint32_t>(spec.frame_height_px));
    write_u64(out, grids.size());
    const std::size_t bytes_per_grid = (spec.cell_count() + 7) / 8;
    std::vector<unsigned char> packed(bytes_per_grid);
    for (const GridVector& grid : grids) {
        if (!(grid.spec() == spec))
            throw ShapeError("grid container: grid spec differs from container spec");
        std::fill(packed.begin(), packed.end(), 0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid.bit(i)) packed[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
        }
        out.write(reinterpret_cast<const char*>(packed.data()),
                  static_cast<std::streamsize>(packed.size()));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<GridVector> read_grid_container(const std::filesystem::path& path) {
    GridSpec ignored;
    return read_grid_container(path, ignored);
}

std::vector<GridVector> read_grid_container(const std::filesystem::path& path, GridSpec& spec_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kContainerMagic, sizeof(magic)) != 0)
        throw ParseError("not a grid container: " + path.string());
    GridSpec spec;
    spec.rows = read_u32(in);
    spec.cols = read_u32(in);
    spec.categories = read_u32(in);
    spec.frame_width_px = read_u32(in);
    spec.frame_height_px = read_u32(in);
    const std::uint64_t count = read_u64(in);
    if (!in) throw ParseError("grid container: truncated header in " + path.string());
    spec.validate();
    const std::size_t bytes_per_grid = (spec.cell_count() + 7) / 8;
    std::vector<GridVector> grids;
    grids.reserve(count);
    std::vector<unsigned char> packed(bytes_per_grid);
    for (std::uint64_t g = 0; g < count; ++g) {
        in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
        if (!in) throw ParseError("grid container: truncated grid data in " + path.string());
        GridVector grid(spec);
        for (std::size_t i = 0; i < spec.cell_count(); ++i) {
            grid.set_bit(i, (packed[i / 8] >> (i % 8)) & 1u);
        }
        grids.push_back(std::move(grid));
    }
    spec_out = spec;
    return grids;
}

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::config: return "config";
        case ErrorKind::shape: return "shape";
        case ErrorKind::bounds: return "bounds";
        case ErrorKind::parse: return "parse";
        case ErrorKind::validation: return "validation";
        case ErrorKind::io: return "io";
        case ErrorKind::saturation: return "saturation";
        case ErrorKind::argument: return "argument";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

}  // namespace gridwatch
