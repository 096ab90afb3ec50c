#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridwatch/error.hpp"

namespace gridwatch {

/// The eight annotated object categories. Index order is fixed and is part
/// of every serialized format (grid channel order, rule files, manifests).
enum class ObjectCategory : std::uint8_t {
    person = 0,
    car = 1,
    van = 2,
    truck = 3,
    motorbike = 4,
    bike = 5,
    bus = 6,
    trailer = 7,
};

inline constexpr std::size_t kCategoryCount = 8;

std::string_view category_name(ObjectCategory c);
std::optional<ObjectCategory> category_from_name(std::string_view name);
std::optional<ObjectCategory> category_from_index(std::size_t index);

/// Geometry of the grid-wise scene representation: a rows x cols spatial
/// lattice over a frame of frame_width_px x frame_height_px pixels, with one
/// binary channel per object category.
struct GridSpec {
    std::size_t rows = 8;
    std::size_t cols = 8;
    std::size_t categories = kCategoryCount;
    std::size_t frame_width_px = 1920;
    std::size_t frame_height_px = 1080;

    std::size_t cell_count() const { return rows * cols * categories; }
    void validate() const;  // throws ConfigError
    bool operator==(const GridSpec&) const = default;
};

struct GridCell {
    std::size_t row = 0;
    std::size_t col = 0;
    ObjectCategory category = ObjectCategory::person;

    bool operator==(const GridCell&) const = default;
};

/// Flattened binary occupancy vector over a GridSpec. One byte per cell,
/// values strictly 0/1.
class GridVector {
public:
    GridVector() = default;
    explicit GridVector(const GridSpec& spec);

    const GridSpec& spec() const { return spec_; }
    std::size_t size() const { return bits_.size(); }
    std::uint8_t bit(std::size_t index) const { return bits_[index]; }
    void set_bit(std::size_t index, std::uint8_t value);
    std::span<const std::uint8_t> bits() const { return bits_; }

    bool operator==(const GridVector&) const = default;

private:
    GridSpec spec_;
    std::vector<std::uint8_t> bits_;
};

/// Row-major flattening: (row*cols + col)*categories + category index.
/// Bijective over in-bounds cells; throws BoundsError otherwise.
std::size_t linear_index(const GridCell& cell, const GridSpec& spec);

/// Inverse of linear_index.
GridCell cell_at(std::size_t index, const GridSpec& spec);

/// Axis-aligned pixel box with its category, as read from annotations.
struct BoxAnnotation {
    double x_min = 0;
    double y_min = 0;
    double x_max = 0;
    double y_max = 0;
    ObjectCategory category = ObjectCategory::person;
};

struct RasterizeResult {
    GridVector grid;
    std::size_t skipped_boxes = 0;  // boxes fully outside the frame
};

/// Sets the cell containing each box center (after clamping the box to the
/// frame) in the box's category channel. Boxes fully outside the frame are
/// skipped and counted.
RasterizeResult rasterize(std::span<const BoxAnnotation> annotations, const GridSpec& spec);

GridVector set_cell(const GridVector& grid, const GridCell& cell);

/// Cells on which a and b disagree, sorted by linear index.
std::vector<GridCell> diff_cells(const GridVector& a, const GridVector& b);

std::size_t popcount(const GridVector& grid);

// --- serialization ---

/// Text form: header line "rows cols categories", then one '0'/'1' character
/// per bit in linear-index order on the following line.
void write_grid_text(const GridVector& grid, std::ostream& out);
GridVector read_grid_text(std::istream& in, const GridSpec& frame_defaults = GridSpec{});

std::string to_bit_string(const GridVector& grid);
GridVector from_bit_string(const GridSpec& spec, std::string_view bits);

/// Binary container for many grids sharing one spec: fixed header with the
/// spec and grid count, then each grid as a packed bitset (LSB-first within
/// a byte, linear-index order).
void write_grid_container(std::span<const GridVector> grids, const GridSpec& spec,
                          const std::filesystem::path& path);
std::vector<GridVector> read_grid_container(const std::filesystem::path& path);
std::vector<GridVector> read_grid_container(const std::filesystem::path& path, GridSpec& spec_out);

}  // namespace gridwatch
