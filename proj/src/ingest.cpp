#include "gridwatch/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "gridwatch/rng.hpp"
#include "textio.hpp"

namespace gridwatch {

namespace {

void check_range(double v, double lo, double hi, const char* field) {
    if (!std::isfinite(v) || v < lo || v > hi) {
        std::ostringstream msg;
        msg << "field " << field << " = " << v << " outside [" << lo << ", " << hi << "]";
        throw ValidationError(msg.str());
    }
}

void check_nonneg(double v, const char* field) {
    if (!std::isfinite(v) || v < 0.0)
        throw ValidationError("field " + std::string(field) + " must be >= 0, got " +
                              textio::format_double(v));
}

bool valid_date_time(const std::string& s) {
    if (s.size() != 15 || s[8] != '-') return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i == 8) continue;
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

FrameAnnotation frame_from_json(const nlohmann::json& j) {
    FrameAnnotation frame;
    if (!j.is_object()) throw ParseError("record is not a JSON object");
    if (!j.contains("frame_id") || !j.at("frame_id").is_string())
        throw ParseError("missing or non-string frame_id");
    frame.frame_id = j.at("frame_id").get<std::string>();
    if (!j.contains("time_ms") || !j.at("time_ms").is_number_integer())
        throw ParseError("missing or non-integer time_ms");
    frame.time_ms = j.at("time_ms").get<std::int64_t>();
    if (!j.contains("boxes") || !j.at("boxes").is_array())
        throw ParseError("missing or non-array boxes");
    std::size_t box_index = 0;
    for (const nlohmann::json& b : j.at("boxes")) {
        const std::string ctx = "box " + std::to_string(box_index);
        if (!b.is_object()) throw ParseError(ctx + " is not an object");
        for (const char* key : {"x1", "y1", "x2", "y2"}) {
            if (!b.contains(key) || !b.at(key).is_number())
                throw ParseError(ctx + ": missing or non-numeric " + key);
        }
        if (!b.contains("category") || !b.at("category").is_string())
            throw ParseError(ctx + ": missing or non-string category");
        BoxAnnotation box;
        box.x_min = b.at("x1").get<double>();
        box.y_min = b.at("y1").get<double>();
        box.x_max = b.at("x2").get<double>();
        box.y_max = b.at("y2").get<double>();
        const std::string cat = b.at("category").get<std::string>();
        const auto category = category_from_name(cat);
        if (!category) throw ParseError(ctx + ": unknown category '" + cat + "'");
        box.category = *category;
        if (!(box.x_min < box.x_max)) throw ParseError(ctx + ": x1 >= x2");
        if (!(box.y_min < box.y_max)) throw ParseError(ctx + ": y1 >= y2");
        frame.boxes.push_back(box);
        ++box_index;
    }
    return frame;
}

}  // namespace

void validate_flight_record(const FlightRecord& record) {
    constexpr double pi = std::numbers::pi;
    if (!valid_date_time(record.date_time))
        throw ValidationError("field date not in MMDDYYYY-HHMMSS form: '" + record.date_time +
                              "'");
    if (record.t < 0)
        throw ValidationError("field t must be >= 0, got " + std::to_string(record.t));
    check_range(record.lat, -90.0, 90.0, "lat");
    check_range(record.lon, -180.0, 180.0, "lon");
    check_nonneg(record.alt_mm, "alt_mm");
    check_range(record.roll, -pi, pi, "roll");
    check_range(record.pitch, -pi, pi, "pitch");
    check_range(record.yaw, -pi, pi, "yaw");
    check_nonneg(record.vx, "vx");
    check_nonneg(record.vy, "vy");
    check_nonneg(record.vz, "vz");
}

AnnotationParse parse_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotations file: " + path.string());
    AnnotationParse result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = textio::strip_cr(std::move(line));
        if (line.empty()) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            result.frames.push_back(frame_from_json(j));
        } catch (const nlohmann::json::parse_error&) {
            result.issues.push_back({line_no, "not valid JSON"});
        } catch (const ParseError& e) {
            result.issues.push_back({line_no, e.what()});
        }
    }
    return result;
}

std::vector<FrameAnnotation> parse_annotations_strict(const std::filesystem::path& path) {
    AnnotationParse parsed = parse_annotations(path);
    if (!parsed.issues.empty()) {
        const ParseIssue& first = parsed.issues.front();
        throw ParseError(path.string() + " line " + std::to_string(first.line) + ": " +
                         first.message +
                         (parsed.issues.size() > 1
                              ? " (and " + std::to_string(parsed.issues.size() - 1) + " more)"
                              : ""));
    }
    return std::move(parsed.frames);
}

std::vector<FlightRecord> parse_flight_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open flight log: " + path.string());
    std::string line;
    if (!std::getline(in, line)) return {};
    line = textio::strip_cr(std::move(line));
    constexpr const char* kHeader = "date,t,lat,lon,alt_mm,roll,pitch,yaw,vx,vy,vz";
    if (line != kHeader)
        throw ParseError(path.string() + ": bad header, expected '" + kHeader + "'");

    std::vector<FlightRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = textio::strip_cr(std::move(line));
        if (line.empty()) continue;
        const std::vector<std::string> f = textio::split_csv_line(line);
        if (f.size() != 11)
            throw ParseError(path.string() + " line " + std::to_string(line_no) + ": expected 11 " +
                             "fields, got " + std::to_string(f.size()));
        FlightRecord r;
        try {
            r.date_time = f[0];
            r.t = textio::parse_int(f[1], "t");
            r.lat = textio::parse_double(f[2], "lat");
            r.lon = textio::parse_double(f[3], "lon");
            r.alt_mm = textio::parse_double(f[4], "alt_mm");
            r.roll = textio::parse_double(f[5], "roll");
            r.pitch = textio::parse_double(f[6], "pitch");
            r.yaw = textio::parse_double(f[7], "yaw");
            r.vx = textio::parse_double(f[8], "vx");
            r.vy = textio::parse_double(f[9], "vy");
            r.vz = textio::parse_double(f[10], "vz");
            validate_flight_record(r);
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + " line " + std::to_string(line_no) + ": " +
                                      e.what());
        }
        if (!records.empty() && r.t < records.back().t)
            throw ValidationError(path.string() + " line " + std::to_string(line_no) +
                                  ": timestamps out of order (t=" + std::to_string(r.t) +
                                  " after t=" + std::to_string(records.back().t) + ")");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<std::pair<FrameAnnotation, FlightRecord>> join_by_time(
    const std::vector<FrameAnnotation>& annotations, const std::vector<FlightRecord>& flight,
    std::int64_t max_gap_ms) {
    for (std::size_t i = 1; i < flight.size(); ++i)
        if (flight[i].t < flight[i - 1].t)
            throw ValidationError("flight records not sorted by t");

    std::vector<std::pair<FrameAnnotation, FlightRecord>> joined;
    std::vector<std::string> unmatched;
    for (const FrameAnnotation& frame : annotations) {
        const FlightRecord* best = nullptr;
        if (!flight.empty()) {
            auto it = std::lower_bound(
                flight.begin(), flight.end(), frame.time_ms,
                [](const FlightRecord& r, std::int64_t t) { return r.t < t; });
            // candidates: first record with t >= frame time, and its predecessor
            if (it != flight.end()) best = &*it;
            if (it != flight.begin()) {
                const FlightRecord* prev = &*(it - 1);
                if (best == nullptr ||
                    frame.time_ms - prev->t <= best->t - frame.time_ms)  // tie -> earlier
                    best = prev;
            }
        }
        if (best == nullptr || std::llabs(best->t - frame.time_ms) > max_gap_ms) {
            unmatched.push_back(frame.frame_id);
            continue;
        }
        joined.emplace_back(frame, *best);
    }
    if (!unmatched.empty()) {
        std::string list;
        for (std::size_t i = 0; i < unmatched.size() && i < 8; ++i) {
            if (i) list += ", ";
            list += unmatched[i];
        }
        if (unmatched.size() > 8) list += ", ...";
        throw ValidationError("no flight record within " + std::to_string(max_gap_ms) +
                              " ms for " + std::to_string(unmatched.size()) +
                              " frame(s): " + list);
    }
    return joined;
}

GpsBounds compute_gps_bounds(const std::vector<FlightRecord>& records) {
    if (records.empty()) throw ArgumentError("cannot compute gps bounds of an empty record list");
    GpsBounds b{records[0].lat, records[0].lat, records[0].lon,
                records[0].lon, records[0].alt_mm, records[0].alt_mm};
    for (const FlightRecord& r : records) {
        b.lat_min = std::min(b.lat_min, r.lat);
        b.lat_max = std::max(b.lat_max, r.lat);
        b.lon_min = std::min(b.lon_min, r.lon);
        b.lon_max = std::max(b.lon_max, r.lon);
        b.alt_min = std::min(b.alt_min, r.alt_mm);
        b.alt_max = std::max(b.alt_max, r.alt_mm);
    }
    return b;
}

GpsFeature normalize_gps(const FlightRecord& record, const GpsBounds& bounds) {
    auto axis = [](double v, double lo, double hi, const char* name) {
        if (!(lo < hi))
            throw ConfigError("degenerate gps bounds on " + std::string(name) + " axis");
        const double clamped = std::clamp(v, lo, hi);
        return (clamped - lo) / (hi - lo);
    };
    GpsFeature g;
    g.values[0] = axis(record.lat, bounds.lat_min, bounds.lat_max, "lat");
    g.values[1] = axis(record.lon, bounds.lon_min, bounds.lon_max, "lon");
    g.values[2] = axis(record.alt_mm, bounds.alt_min, bounds.alt_max, "alt");
    return g;
}

namespace {

// Shuffled index partition with largest-remainder sizing (ties toward the
// earlier subset).
std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n, const SplitRatios& ratios,
                                                      std::uint64_t seed) {
    const double sum = ratios.train + ratios.val + ratios.test;
    if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0)
        throw ConfigError("split ratios must all be positive");
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1, got " + textio::format_double(sum));

    const double ratio[3] = {ratios.train, ratios.val, ratios.test};
    std::size_t size[3];
    double frac[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double ideal = ratio[i] * static_cast<double>(n);
        size[i] = static_cast<std::size_t>(std::floor(ideal));
        frac[i] = ideal - std::floor(ideal);
        assigned += size[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (frac[i] > frac[best]) best = i;
        ++size[best];
        frac[best] = -1.0;
        ++assigned;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);

    std::array<std::vector<std::size_t>, 3> parts;
    std::size_t pos = 0;
    for (int part = 0; part < 3; ++part) {
        parts[part].reserve(size[part]);
        for (std::size_t k = 0; k < size[part]; ++k) parts[part].push_back(order[pos++]);
    }
    return parts;
}

}  // namespace

SplitResult split(const std::vector<Sample>& samples, const SplitRatios& ratios,
                  std::uint64_t seed) {
    const std::array<std::vector<std::size_t>, 3> parts =
        split_indices(samples.size(), ratios, seed);
    SplitResult out;
    for (int part = 0; part < 3; ++part) {
        std::vector<Sample>& dst = part == 0 ? out.train : (part == 1 ? out.val : out.test);
        dst.reserve(parts[part].size());
        for (std::size_t idx : parts[part]) dst.push_back(samples[idx]);
    }
    return out;
}

IngestResult ingest_pipeline(const std::vector<FrameAnnotation>& annotations,
                             const std::vector<FlightRecord>& flight, const GridSpec& spec,
                             std::int64_t max_gap_ms, const SplitRatios& ratios,
                             std::uint64_t seed) {
    spec.validate();
    const std::vector<std::pair<FrameAnnotation, FlightRecord>> joined =
        join_by_time(annotations, flight, max_gap_ms);

    IngestResult result;
    result.spec = spec;

    struct Raw {
        GridVector grid;
        FlightRecord record;
        std::string frame_id;
    };
    std::vector<Raw> raw;
    raw.reserve(joined.size());
    for (const auto& [frame, record] : joined) {
        RasterizeResult r = rasterize(frame.boxes, spec);
        result.skipped_boxes += r.skipped_boxes;
        raw.push_back({std::move(r.grid), record, frame.frame_id});
    }

    const std::array<std::vector<std::size_t>, 3> parts =
        split_indices(raw.size(), ratios, seed);

    std::vector<FlightRecord> train_records;
    train_records.reserve(parts[0].size());
    for (std::size_t idx : parts[0]) train_records.push_back(raw[idx].record);
    result.bounds = compute_gps_bounds(train_records);

    for (int part = 0; part < 3; ++part) {
        std::vector<Sample>& dst = part == 0 ? result.splits.train
                                             : (part == 1 ? result.splits.val
                                                          : result.splits.test);
        dst.reserve(parts[part].size());
        for (std::size_t idx : parts[part]) {
            Sample s;
            s.grid = std::move(raw[idx].grid);
            s.gps = normalize_gps(raw[idx].record, result.bounds);
            s.source_frame = std::move(raw[idx].frame_id);
            dst.push_back(std::move(s));
        }
    }
    return result;
}

void save_dataset(const std::vector<Sample>& samples, const GridSpec& spec,
                  const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<GridVector> grids;
    grids.reserve(samples.size());
    for (const Sample& s : samples) grids.push_back(s.grid);
    write_grid_container(grids, spec, dir / "grids.bin");

    std::ofstream csv(dir / "samples.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / "samples.csv").string());
    csv << "index,frame_id,gps0,gps1,gps2\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        csv << i << ',' << textio::csv_field(s.source_frame);
        for (double v : s.gps.values) csv << ',' << textio::format_double(v);
        csv << '\n';
    }
    if (!csv) throw IoError("write failed: " + (dir / "samples.csv").string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    std::vector<GridVector> grids = read_grid_container(dir / "grids.bin", ds.spec);

    const std::filesystem::path csv_path = dir / "samples.csv";
    std::ifstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path.string());
    std::string line;
    if (!std::getline(csv, line) || textio::strip_cr(line) != "index,frame_id,gps0,gps1,gps2")
        throw ParseError(csv_path.string() + ": bad sidecar header");

    std::size_t line_no = 1;
    std::size_t next = 0;
    ds.samples.reserve(grids.size());
    while (std::getline(csv, line)) {
        ++line_no;
        line = textio::strip_cr(std::move(line));
        if (line.empty()) continue;
        const std::vector<std::string> f = textio::split_csv_line(line);
        if (f.size() != 5)
            throw ParseError(csv_path.string() + " line " + std::to_string(line_no) +
                             ": expected 5 fields");
        const std::int64_t index = textio::parse_int(f[0], "index");
        if (index != static_cast<std::int64_t>(next) || next >= grids.size())
            throw ParseError(csv_path.string() + " line " + std::to_string(line_no) +
                             ": index out of step with grid container");
        Sample s;
        s.grid = std::move(grids[next]);
        s.source_frame = f[1];
        s.gps.values[0] = textio::parse_double(f[2], "gps0");
        s.gps.values[1] = textio::parse_double(f[3], "gps1");
        s.gps.values[2] = textio::parse_double(f[4], "gps2");
        ds.samples.push_back(std::move(s));
        ++next;
    }
    if (next != grids.size())
        throw ParseError(csv_path.string() + ": " + std::to_string(next) + " sidecar rows for " +
                         std::to_string(grids.size()) + " grids");
    return ds;
}

}  // namespace gridwatch
