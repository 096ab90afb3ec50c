#include "gridwatch/runconfig.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "gridwatch/nn.hpp"
#include "textio.hpp"

namespace gridwatch {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(value);
    while (std::getline(in, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    const std::int64_t n = textio::parse_int(v, key);
    if (n < 0) throw ConfigError("config key " + key + " must be >= 0, got " + v);
    return static_cast<std::size_t>(n);
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value,
            const std::filesystem::path& base_dir) {
    auto as_path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base_dir / p;
    };
    if (key == "annotations") {
        cfg.annotations = as_path(value);
    } else if (key == "flight_log") {
        cfg.flight_log = as_path(value);
    } else if (key == "rules") {
        cfg.rules = as_path(value);
    } else if (key == "grid_rows") {
        cfg.grid_rows = parse_size(value, key);
    } else if (key == "grid_cols") {
        cfg.grid_cols = parse_size(value, key);
    } else if (key == "frame_width") {
        cfg.frame_width = parse_size(value, key);
    } else if (key == "frame_height") {
        cfg.frame_height = parse_size(value, key);
    } else if (key == "ratio_train") {
        cfg.ratios.train = textio::parse_double(value, key);
    } else if (key == "ratio_val") {
        cfg.ratios.val = textio::parse_double(value, key);
    } else if (key == "ratio_test") {
        cfg.ratios.test = textio::parse_double(value, key);
    } else if (key == "gap_ms") {
        cfg.gap_ms = textio::parse_int(value, key);
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(textio::parse_int(value, key));
    } else if (key == "models") {
        cfg.models = split_list(value);
    } else if (key == "hidden") {
        cfg.hidden.clear();
        for (const std::string& h : split_list(value)) cfg.hidden.push_back(parse_size(h, key));
    } else if (key == "latent") {
        cfg.latent = parse_size(value, key);
    } else if (key == "kl_weight") {
        cfg.kl_weight = textio::parse_double(value, key);
    } else if (key == "epochs") {
        cfg.epochs = parse_size(value, key);
    } else if (key == "batch") {
        cfg.batch = parse_size(value, key);
    } else if (key == "lr") {
        cfg.lr = textio::parse_double(value, key);
    } else if (key == "patience") {
        cfg.patience = parse_size(value, key);
    } else if (key == "threshold") {
        cfg.threshold = textio::parse_double(value, key);
    } else if (key == "scenarios") {
        cfg.scenarios.clear();
        for (const std::string& s : split_list(value))
            cfg.scenarios.push_back(static_cast<int>(textio::parse_int(s, key)));
    } else if (key == "per_source") {
        cfg.per_source = parse_size(value, key);
    } else if (key == "inject_count") {
        cfg.inject_count = parse_size(value, key);
    } else if (key == "synth_sources") {
        cfg.synth_sources = parse_size(value, key);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

}  // namespace

GridSpec RunConfig::grid_spec() const {
    GridSpec spec;
    spec.rows = grid_rows;
    spec.cols = grid_cols;
    spec.categories = kCategoryCount;
    spec.frame_width_px = frame_width;
    spec.frame_height_px = frame_height;
    return spec;
}

void RunConfig::validate() const {
    grid_spec().validate();
    if (models.empty()) throw ConfigError("config: at least one model required");
    std::set<std::string> seen;
    for (const std::string& m : models) {
        try {
            config_for_variant(m, 1);
        } catch (const UsageError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        if (!seen.insert(m).second) throw ConfigError("config: duplicate model '" + m + "'");
    }
    if (hidden.empty()) throw ConfigError("config: hidden layer list must be nonempty");
    if (latent < 1) throw ConfigError("config: latent must be >= 1");
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (batch < 1) throw ConfigError("config: batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("config: lr must be > 0");
    if (patience < 1) throw ConfigError("config: patience must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("config: threshold must lie in (0, 1)");
    if (scenarios.empty()) throw ConfigError("config: at least one scenario required");
    std::set<int> seen_scenario;
    for (int s : scenarios) {
        if (s < 1 || s > 3) throw ConfigError("config: scenario ids must be 1, 2 or 3");
        if (!seen_scenario.insert(s).second)
            throw ConfigError("config: duplicate scenario " + std::to_string(s));
    }
    if (per_source < 1) throw ConfigError("config: per_source must be >= 1");
    if (inject_count < 1) throw ConfigError("config: inject_count must be >= 1");
    if (gap_ms < 0) throw ConfigError("config: gap_ms must be >= 0");
    if (kl_weight < 0.0) throw ConfigError("config: kl_weight must be >= 0");
}

void RunConfig::validate_paths() const {
    auto check = [](const char* name, const std::filesystem::path& path) {
        if (path.empty()) throw ConfigError(std::string("config: ") + name + " path not set");
        if (!std::filesystem::exists(path))
            throw ConfigError(std::string("config: ") + name + " path does not exist: " +
                              path.string());
    };
    check("annotations", annotations);
    check("flight_log", flight_log);
    check("rules", rules);
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    auto join_str = [](const auto& items, auto fmt) {
        std::string s;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) s += ',';
            s += fmt(items[i]);
        }
        return s;
    };
    out << "annotations = " << annotations.string() << '\n';
    out << "flight_log = " << flight_log.string() << '\n';
    out << "rules = " << rules.string() << '\n';
    out << "grid_rows = " << grid_rows << '\n';
    out << "grid_cols = " << grid_cols << '\n';
    out << "frame_width = " << frame_width << '\n';
    out << "frame_height = " << frame_height << '\n';
    out << "ratio_train = " << textio::format_double(ratios.train) << '\n';
    out << "ratio_val = " << textio::format_double(ratios.val) << '\n';
    out << "ratio_test = " << textio::format_double(ratios.test) << '\n';
    out << "gap_ms = " << gap_ms << '\n';
    out << "seed = " << seed << '\n';
    out << "models = " << join_str(models, [](const std::string& s) { return s; }) << '\n';
    out << "hidden = "
        << join_str(hidden, [](std::size_t h) { return std::to_string(h); }) << '\n';
    out << "latent = " << latent << '\n';
    out << "kl_weight = " << textio::format_double(kl_weight) << '\n';
    out << "epochs = " << epochs << '\n';
    out << "batch = " << batch << '\n';
    out << "lr = " << textio::format_double(lr) << '\n';
    out << "patience = " << patience << '\n';
    out << "threshold = " << textio::format_double(threshold) << '\n';
    out << "scenarios = " << join_str(scenarios, [](int s) { return std::to_string(s); }) << '\n';
    out << "per_source = " << per_source << '\n';
    out << "inject_count = " << inject_count << '\n';
    out << "synth_sources = " << synth_sources << '\n';
    return out.str();
}

RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open experiment file: " + path.string());
    const std::filesystem::path base_dir = path.has_parent_path()
                                               ? path.parent_path()
                                               : std::filesystem::path(".");
    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = textio::strip_cr(std::move(line));
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + " line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path.string() + " line " + std::to_string(line_no) + ": empty key");
        if (!seen.insert(key).second)
            throw ConfigError(path.string() + " line " + std::to_string(line_no) +
                              ": duplicate key '" + key + "'");
        try {
            assign(cfg, key, value, base_dir);
        } catch (const Error& e) {
            throw ConfigError(path.string() + " line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    cfg.validate();
    return cfg;
}

void apply_override(RunConfig& config, const std::string& assignment,
                    const std::filesystem::path& base_dir) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw UsageError("override must look like key=value, got '" + assignment + "'");
    assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), base_dir);
}

}  // namespace gridwatch
