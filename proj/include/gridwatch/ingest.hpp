#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gridwatch/grid.hpp"
#include "gridwatch/nn.hpp"

namespace gridwatch {

/// One telemetry sample. Angles in radians, altitude in millimeters,
/// speeds in m/s (nonnegative by the sensor range table).
struct FlightRecord {
    std::string date_time;  // MMDDYYYY-HHMMSS
    std::int64_t t = 0;     // milliseconds since log start
    double lat = 0.0;
    double lon = 0.0;
    double alt_mm = 0.0;
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    double vz = 0.0;
};

/// Throws ValidationError naming the offending field. Bounds are inclusive:
/// lat [-90,90], lon [-180,180], roll/pitch/yaw [-pi,pi], t/alt/vx/vy/vz >= 0.
void validate_flight_record(const FlightRecord& record);

struct FrameAnnotation {
    std::string frame_id;
    std::int64_t time_ms = 0;
    std::vector<BoxAnnotation> boxes;
};

struct ParseIssue {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct AnnotationParse {
    std::vector<FrameAnnotation> frames;
    std::vector<ParseIssue> issues;  // malformed records, never silently dropped
};

/// JSON-lines, one frame per line:
/// {"frame_id": str, "time_ms": int, "boxes": [{"x1","y1","x2","y2","category"}]}
AnnotationParse parse_annotations(const std::filesystem::path& path);

/// Same, but any malformed record throws ParseError naming its line.
std::vector<FrameAnnotation> parse_annotations_strict(const std::filesystem::path& path);

/// CSV with header `date,t,lat,lon,alt_mm,roll,pitch,yaw,vx,vy,vz`; records
/// must be in nondecreasing t order and inside the sensor ranges.
std::vector<FlightRecord> parse_flight_log(const std::filesystem::path& path);

/// Pairs each frame with the flight record nearest in time (ties go to the
/// earlier record). Frames farther than max_gap_ms from every record are a
/// validation error listing their frame ids.
std::vector<std::pair<FrameAnnotation, FlightRecord>> join_by_time(
    const std::vector<FrameAnnotation>& annotations, const std::vector<FlightRecord>& flight,
    std::int64_t max_gap_ms = 500);

struct GpsBounds {
    double lat_min = 0.0, lat_max = 0.0;
    double lon_min = 0.0, lon_max = 0.0;
    double alt_min = 0.0, alt_max = 0.0;
};

GpsBounds compute_gps_bounds(const std::vector<FlightRecord>& records);

/// Affine map of (lat, lon, alt) onto [0,1]^3 over the given bounding box;
/// values outside the box clamp to the edge.
GpsFeature normalize_gps(const FlightRecord& record, const GpsBounds& bounds);

struct Sample {
    GridVector grid;
    GpsFeature gps;
    std::string source_frame;
};

struct SplitRatios {
    double train = 0.6;
    double val = 0.1;
    double test = 0.3;
};

struct SplitResult {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

/// Seeded exact partition; subset sizes follow the ratios by largest
/// remainder. Ratios must be positive and sum to 1 (within 1e-9).
SplitResult split(const std::vector<Sample>& samples, const SplitRatios& ratios,
                  std::uint64_t seed);

struct Dataset {
    GridSpec spec;
    std::vector<Sample> samples;
};

struct IngestResult {
    GridSpec spec;
    SplitResult splits;
    GpsBounds bounds;           // computed over the training split
    std::size_t skipped_boxes = 0;
};

/// Full ingestion: join frames with telemetry, rasterize, split, then
/// normalize GPS against the training split's bounding box.
IngestResult ingest_pipeline(const std::vector<FrameAnnotation>& annotations,
                             const std::vector<FlightRecord>& flight, const GridSpec& spec,
                             std::int64_t max_gap_ms, const SplitRatios& ratios,
                             std::uint64_t seed);

/// Dataset directory: grids.bin (binary grid container) plus samples.csv
/// (index,frame_id,gps0,gps1,gps2), index-aligned.
void save_dataset(const std::vector<Sample>& samples, const GridSpec& spec,
                  const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace gridwatch
