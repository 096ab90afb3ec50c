#include "gridwatch/worldgen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "gridwatch/rng.hpp"
#include "textio.hpp"

namespace gridwatch {

namespace {

constexpr std::uint64_t kStreamScene = 10;
constexpr std::uint64_t kStreamFlight = 11;

struct BoxSize {
    double w, h;
};

BoxSize box_size(ObjectCategory c) {
    switch (c) {
        case ObjectCategory::person: return {34, 70};
        case ObjectCategory::car: return {86, 52};
        case ObjectCategory::van: return {95, 64};
        case ObjectCategory::truck: return {128, 74};
        case ObjectCategory::bike: return {28, 56};
        default: return {60, 60};
    }
}

// Weighted category pick from parallel (category, weight) lists.
ObjectCategory pick(Rng& rng, const std::vector<std::pair<ObjectCategory, double>>& weighted) {
    double total = 0.0;
    for (const auto& [c, w] : weighted) total += w;
    double u = unit_double(rng) * total;
    for (const auto& [c, w] : weighted) {
        if (u < w) return c;
        u -= w;
    }
    return weighted.back().first;
}

BoxAnnotation make_box(Rng& rng, const GridSpec& spec, std::size_t row, std::size_t col,
                       ObjectCategory category) {
    const double cell_w = static_cast<double>(spec.frame_width_px) / static_cast<double>(spec.cols);
    const double cell_h =
        static_cast<double>(spec.frame_height_px) / static_cast<double>(spec.rows);
    const BoxSize size = box_size(category);
    const double cx = (static_cast<double>(col) + 0.5) * cell_w + uniform_in(rng, -60.0, 60.0);
    const double cy = (static_cast<double>(row) + 0.5) * cell_h + uniform_in(rng, -28.0, 28.0);
    BoxAnnotation box;
    box.x_min = std::floor(cx - size.w / 2);
    box.y_min = std::floor(cy - size.h / 2);
    box.x_max = std::floor(cx + size.w / 2);
    box.y_max = std::floor(cy + size.h / 2);
    box.category = category;
    return box;
}

std::string date_time_for(std::int64_t t_ms) {
    const std::int64_t total_s = t_ms / 1000;
    const int hh = static_cast<int>(10 + total_s / 3600);
    const int mm = static_cast<int>((total_s / 60) % 60);
    const int ss = static_cast<int>(total_s % 60);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "01152019-%02d%02d%02d", hh, mm, ss);
    return buf;
}

}  // namespace

World generate_world(const WorldOptions& options) {
    const GridSpec& spec = options.spec;
    spec.validate();
    if (spec.rows != 8 || spec.cols != 8)
        throw ConfigError("the demo world layout is defined for an 8x8 spatial grid");

    using C = ObjectCategory;
    const std::vector<std::pair<C, double>> road_mix = {{C::car, 0.6}, {C::van, 0.25},
                                                        {C::truck, 0.15}};
    const std::vector<std::pair<C, double>> park_mix = {{C::car, 0.75}, {C::van, 0.25}};

    World world;
    world.annotations.reserve(options.scenes);
    world.flight.reserve(options.scenes * 2 + 1);

    for (std::size_t i = 0; i < options.scenes; ++i) {
        Rng rng(derive_seed(options.seed, kStreamScene, i));
        FrameAnnotation frame;
        char id[24];
        std::snprintf(id, sizeof(id), "frame_%06zu", i);
        frame.frame_id = id;
        frame.time_ms = static_cast<std::int64_t>(i) * 1000 + 200;

        auto place = [&](std::size_t row, std::size_t col, C category) {
            frame.boxes.push_back(make_box(rng, spec, row, col, category));
            if (unit_double(rng) < 0.06)  // occasional second object in the same cell
                frame.boxes.push_back(make_box(rng, spec, row, col, category));
        };

        for (std::size_t row = 0; row < 2; ++row)  // walkway
            for (std::size_t col = 0; col < 8; ++col)
                if (unit_double(rng) < 0.18) place(row, col, C::person);
        for (std::size_t col = 0; col < 8; ++col)  // bike path
            if (unit_double(rng) < 0.15) place(2, col, C::bike);
        for (std::size_t row = 3; row < 5; ++row)  // road
            for (std::size_t col = 0; col < 8; ++col)
                if (unit_double(rng) < 0.25) place(row, col, pick(rng, road_mix));
        for (std::size_t col = 0; col < 8; ++col)  // plaza
            if (unit_double(rng) < 0.15) place(5, col, C::person);
        for (std::size_t row = 6; row < 8; ++row)  // car park; cols 4..7 stay empty
            for (std::size_t col = 0; col < 4; ++col)
                if (unit_double(rng) < 0.35) place(row, col, pick(rng, park_mix));

        world.annotations.push_back(std::move(frame));
    }

    for (std::size_t i = 0; i < options.scenes; ++i) {
        Rng rng(derive_seed(options.seed, kStreamFlight, i));
        for (int k = 0; k < 2; ++k) {  // two telemetry samples per scene
            FlightRecord r;
            r.t = static_cast<std::int64_t>(i) * 1000 + k * 500;
            r.date_time = date_time_for(r.t);
            r.lat = 41.015 + uniform_in(rng, -0.0012, 0.0012);
            r.lon = 28.979 + uniform_in(rng, -0.0015, 0.0015);
            r.alt_mm = uniform_in(rng, 30000.0, 60000.0);
            r.roll = uniform_in(rng, -0.2, 0.2);
            r.pitch = uniform_in(rng, -0.2, 0.2);
            r.yaw = uniform_in(rng, -3.1, 3.1);
            r.vx = uniform_in(rng, 0.0, 4.0);
            r.vy = uniform_in(rng, 0.0, 4.0);
            r.vz = uniform_in(rng, 0.0, 1.5);
            validate_flight_record(r);
            world.flight.push_back(std::move(r));
        }
    }
    return world;
}

std::string default_rules_json() {
    auto zone_mask = [](std::size_t row_lo, std::size_t row_hi, std::size_t col_lo,
                        std::size_t col_hi) {
        nlohmann::ordered_json mask = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < 8; ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (std::size_t c = 0; c < 8; ++c)
                row.push_back(r >= row_lo && r <= row_hi && c >= col_lo && c <= col_hi ? 1 : 0);
            mask.push_back(std::move(row));
        }
        return mask;
    };

    nlohmann::ordered_json rules = nlohmann::ordered_json::array();
    // scenario 1: people are not allowed behind the building
    rules.push_back({{"category", "person"},
                     {"kind", "private_forbidden"},
                     {"mask", zone_mask(6, 7, 4, 7)}});
    // scenario 2: bikes are not allowed on the road
    rules.push_back(
        {{"category", "bike"}, {"kind", "public_forbidden"}, {"mask", zone_mask(3, 4, 0, 7)}});
    // scenario 3: trucks and bikes in the car park are rare events
    rules.push_back({{"category", "truck"}, {"kind", "rare"}, {"mask", zone_mask(6, 7, 0, 3)}});
    rules.push_back({{"category", "bike"}, {"kind", "rare"}, {"mask", zone_mask(6, 7, 0, 3)}});
    return rules.dump(2) + "\n";
}

void write_world(const World& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::ofstream ann(dir / "annotations.jsonl", std::ios::trunc);
    if (!ann) throw IoError("cannot write " + (dir / "annotations.jsonl").string());
    for (const FrameAnnotation& frame : world.annotations) {
        nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
        for (const BoxAnnotation& b : frame.boxes) {
            boxes.push_back({{"x1", static_cast<std::int64_t>(b.x_min)},
                             {"y1", static_cast<std::int64_t>(b.y_min)},
                             {"x2", static_cast<std::int64_t>(b.x_max)},
                             {"y2", static_cast<std::int64_t>(b.y_max)},
                             {"category", std::string(category_name(b.category))}});
        }
        nlohmann::ordered_json line = {{"frame_id", frame.frame_id},
                                       {"time_ms", frame.time_ms},
                                       {"boxes", std::move(boxes)}};
        ann << line.dump() << '\n';
    }
    if (!ann) throw IoError("write failed: " + (dir / "annotations.jsonl").string());

    std::ofstream csv(dir / "flight.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / "flight.csv").string());
    csv << "date,t,lat,lon,alt_mm,roll,pitch,yaw,vx,vy,vz\n";
    for (const FlightRecord& r : world.flight) {
        csv << r.date_time << ',' << r.t << ',' << textio::format_double(r.lat) << ','
            << textio::format_double(r.lon) << ',' << textio::format_double(r.alt_mm) << ','
            << textio::format_double(r.roll) << ',' << textio::format_double(r.pitch) << ','
            << textio::format_double(r.yaw) << ',' << textio::format_double(r.vx) << ','
            << textio::format_double(r.vy) << ',' << textio::format_double(r.vz) << '\n';
    }
    if (!csv) throw IoError("write failed: " + (dir / "flight.csv").string());

    std::ofstream rules(dir / "rules.json", std::ios::trunc);
    if (!rules) throw IoError("cannot write " + (dir / "rules.json").string());
    rules << default_rules_json();
    if (!rules) throw IoError("write failed: " + (dir / "rules.json").string());
}

}  // namespace gridwatch
