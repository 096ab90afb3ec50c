#include "gridwatch/synth.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "gridwatch/rng.hpp"
#include "textio.hpp"

namespace gridwatch {

std::string_view rule_kind_name(RuleKind kind) {
    switch (kind) {
        case RuleKind::private_forbidden: return "private_forbidden";
        case RuleKind::public_forbidden: return "public_forbidden";
        case RuleKind::rare: return "rare";
    }
    return "?";
}

std::optional<RuleKind> rule_kind_from_name(std::string_view name) {
    if (name == "private_forbidden") return RuleKind::private_forbidden;
    if (name == "public_forbidden") return RuleKind::public_forbidden;
    if (name == "rare") return RuleKind::rare;
    return std::nullopt;
}

RuleKind kind_for_scenario(int scenario) {
    switch (scenario) {
        case 1: return RuleKind::private_forbidden;
        case 2: return RuleKind::public_forbidden;
        case 3: return RuleKind::rare;
    }
    throw ArgumentError("scenario must be 1, 2 or 3, got " + std::to_string(scenario));
}

LoadedRules load_rules(const std::filesystem::path& path, const GridSpec& spec) {
    spec.validate();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rule file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_array()) throw ParseError(path.string() + ": top-level value must be an array");

    LoadedRules out;
    if (doc.empty()) {
        out.warnings.push_back("rule file " + path.string() + " contains no rules");
        return out;
    }

    // merge duplicate (category, kind) pairs by mask union
    std::map<std::pair<std::size_t, RuleKind>, std::vector<std::uint8_t>> merged;
    std::size_t entry_no = 0;
    for (const nlohmann::json& e : doc) {
        const std::string ctx = path.string() + " rule " + std::to_string(entry_no);
        if (!e.is_object()) throw ParseError(ctx + ": not an object");
        if (!e.contains("category") || !e.at("category").is_string())
            throw ParseError(ctx + ": missing or non-string category");
        if (!e.contains("kind") || !e.at("kind").is_string())
            throw ParseError(ctx + ": missing or non-string kind");
        if (!e.contains("mask") || !e.at("mask").is_array())
            throw ParseError(ctx + ": missing or non-array mask");

        const auto category = category_from_name(e.at("category").get<std::string>());
        if (!category)
            throw ParseError(ctx + ": unknown category '" + e.at("category").get<std::string>() +
                             "'");
        const auto kind = rule_kind_from_name(e.at("kind").get<std::string>());
        if (!kind)
            throw ParseError(ctx + ": unknown kind '" + e.at("kind").get<std::string>() + "'");

        const nlohmann::json& mask = e.at("mask");
        if (mask.size() != spec.rows)
            throw ConfigError(ctx + ": mask has " + std::to_string(mask.size()) + " rows, grid " +
                              "has " + std::to_string(spec.rows));
        std::vector<std::uint8_t> cells(spec.rows * spec.cols, 0);
        bool any = false;
        for (std::size_t r = 0; r < spec.rows; ++r) {
            const nlohmann::json& row = mask.at(r);
            if (!row.is_array() || row.size() != spec.cols)
                throw ConfigError(ctx + ": mask row " + std::to_string(r) + " has " +
                                  std::to_string(row.size()) + " cols, grid has " +
                                  std::to_string(spec.cols));
            for (std::size_t c = 0; c < spec.cols; ++c) {
                const nlohmann::json& v = row.at(c);
                if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1))
                    throw ParseError(ctx + ": mask entries must be 0 or 1");
                if (v.get<int>() == 1) {
                    cells[r * spec.cols + c] = 1;
                    any = true;
                }
            }
        }
        if (!any) throw ConfigError(ctx + ": mask has no set cell");

        auto [it, inserted] =
            merged.try_emplace({static_cast<std::size_t>(*category), *kind}, std::move(cells));
        if (!inserted) {
            for (std::size_t i = 0; i < it->second.size(); ++i)
                it->second[i] = it->second[i] | cells[i];
            out.warnings.push_back(ctx + ": duplicate (category, kind), masks merged");
        }
        ++entry_no;
    }

    for (auto& [key, mask] : merged) {
        ZoneRule rule;
        rule.category = *category_from_index(key.first);
        rule.kind = key.second;
        rule.mask = std::move(mask);
        out.rules.push_back(std::move(rule));
    }
    return out;
}

InjectionResult inject(const GridVector& source, int scenario,
                       const std::vector<ZoneRule>& rules, std::size_t count,
                       std::uint64_t rng_seed) {
    if (count < 1) throw ArgumentError("inject: count must be >= 1");
    const RuleKind kind = kind_for_scenario(scenario);
    const GridSpec& spec = source.spec();

    std::vector<GridCell> eligible;
    bool have_kind = false;
    for (const ZoneRule& rule : rules) {
        if (rule.kind != kind) continue;
        have_kind = true;
        if (rule.mask.size() != spec.rows * spec.cols)
            throw ConfigError("inject: rule mask does not match grid spatial dims");
        for (std::size_t r = 0; r < spec.rows; ++r) {
            for (std::size_t c = 0; c < spec.cols; ++c) {
                if (!rule.mask[r * spec.cols + c]) continue;
                const GridCell cell{r, c, rule.category};
                if (source.bit(linear_index(cell, spec)) == 0) eligible.push_back(cell);
            }
        }
    }
    if (!have_kind)
        throw ConfigError("inject: no rule of kind '" + std::string(rule_kind_name(kind)) +
                          "' for scenario " + std::to_string(scenario));
    std::sort(eligible.begin(), eligible.end(), [&](const GridCell& a, const GridCell& b) {
        return linear_index(a, spec) < linear_index(b, spec);
    });
    eligible.erase(std::unique(eligible.begin(), eligible.end()), eligible.end());
    if (count > eligible.size())
        throw SaturationError("inject: requested " + std::to_string(count) +
                              " cells but only " + std::to_string(eligible.size()) +
                              " eligible empty cells exist");

    Rng rng(rng_seed);
    for (std::size_t k = 0; k < count; ++k) {  // partial Fisher-Yates
        const std::size_t j = k + static_cast<std::size_t>(bounded(rng, eligible.size() - k));
        std::swap(eligible[k], eligible[j]);
    }
    eligible.resize(count);
    std::sort(eligible.begin(), eligible.end(), [&](const GridCell& a, const GridCell& b) {
        return linear_index(a, spec) < linear_index(b, spec);
    });

    InjectionResult result;
    result.grid = source;
    for (const GridCell& cell : eligible) result.grid = set_cell(result.grid, cell);
    result.injected = std::move(eligible);
    result.scenario = scenario;
    return result;
}

std::vector<std::pair<Sample, InjectionResult>> generate_test_set(
    const std::vector<Sample>& sources, int scenario, std::size_t per_source,
    const std::vector<ZoneRule>& rules, std::uint64_t seed, std::size_t count_per_injection) {
    if (sources.empty()) throw ArgumentError("generate_test_set: empty source list");
    if (per_source < 1) throw ArgumentError("generate_test_set: per_source must be >= 1");

    std::vector<std::pair<Sample, InjectionResult>> out;
    out.reserve(sources.size() * per_source);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::uint64_t source_seed = seed ^ static_cast<std::uint64_t>(i);
        for (std::size_t j = 0; j < per_source; ++j) {
            const std::uint64_t inj_seed =
                per_source == 1 ? source_seed : derive_seed(source_seed, j);
            InjectionResult injection;
            try {
                injection =
                    inject(sources[i].grid, scenario, rules, count_per_injection, inj_seed);
            } catch (const SaturationError& e) {
                throw SaturationError("source " + std::to_string(i) + ": " + e.what());
            }
            injection.source_sample = i;
            Sample sample;
            sample.grid = injection.grid;
            sample.gps = sources[i].gps;
            sample.source_frame = sources[i].source_frame;
            out.emplace_back(std::move(sample), std::move(injection));
        }
    }
    return out;
}

void write_manifest(const std::vector<InjectionResult>& injections,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "sample_index,source_index,row,col,category\n";
    for (std::size_t i = 0; i < injections.size(); ++i) {
        for (const GridCell& cell : injections[i].injected) {
            out << i << ',' << injections[i].source_sample << ',' << cell.row << ',' << cell.col
                << ',' << category_name(cell.category) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path, const GridSpec& spec) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        textio::strip_cr(line) != "sample_index,source_index,row,col,category")
        throw ParseError(path.string() + ": bad manifest header");
    std::vector<ManifestRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = textio::strip_cr(std::move(line));
        if (line.empty()) continue;
        const std::vector<std::string> f = textio::split_csv_line(line);
        if (f.size() != 5)
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": expected 5 fields");
        ManifestRow row;
        row.sample_index = static_cast<std::size_t>(textio::parse_int(f[0], "sample_index"));
        row.source_index = static_cast<std::size_t>(textio::parse_int(f[1], "source_index"));
        row.cell.row = static_cast<std::size_t>(textio::parse_int(f[2], "row"));
        row.cell.col = static_cast<std::size_t>(textio::parse_int(f[3], "col"));
        const auto category = category_from_name(f[4]);
        if (!category)
            throw ParseError(path.string() + " line " + std::to_string(line_no) +
                             ": unknown category '" + f[4] + "'");
        row.cell.category = *category;
        linear_index(row.cell, spec);  // bounds check
        rows.push_back(row);
    }
    return rows;
}

void save_synth_dataset(const std::vector<std::pair<Sample, InjectionResult>>& items,
                        const GridSpec& spec, int scenario, std::uint64_t seed,
                        const std::filesystem::path& dir) {
    std::vector<Sample> samples;
    std::vector<InjectionResult> injections;
    samples.reserve(items.size());
    injections.reserve(items.size());
    for (const auto& [sample, injection] : items) {
        samples.push_back(sample);
        injections.push_back(injection);
    }
    save_dataset(samples, spec, dir);
    write_manifest(injections, dir / "manifest.csv");

    nlohmann::ordered_json meta = {{"scenario", scenario}, {"seed", seed},
                                   {"samples", items.size()}};
    std::ofstream out(dir / "synth.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "synth.json").string());
    out << meta.dump(2) << '\n';
}

SynthDataset load_synth_dataset(const std::filesystem::path& dir) {
    SynthDataset ds;
    Dataset base = load_dataset(dir);
    ds.spec = base.spec;

    std::ifstream meta_in(dir / "synth.json");
    if (!meta_in) throw IoError("cannot open " + (dir / "synth.json").string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_in);
        ds.scenario = meta.at("scenario").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "synth.json").string() + ": " + e.what());
    }

    const std::vector<ManifestRow> rows = read_manifest(dir / "manifest.csv", ds.spec);
    ds.items.reserve(base.samples.size());
    for (Sample& s : base.samples) {
        InjectionResult injection;
        injection.grid = s.grid;
        injection.scenario = ds.scenario;
        ds.items.emplace_back(std::move(s), std::move(injection));
    }
    for (const ManifestRow& row : rows) {
        if (row.sample_index >= ds.items.size())
            throw ParseError(dir.string() + ": manifest sample_index out of range");
        InjectionResult& injection = ds.items[row.sample_index].second;
        injection.source_sample = row.source_index;
        injection.injected.push_back(row.cell);
    }
    for (auto& [sample, injection] : ds.items) {
        if (injection.injected.empty())
            throw ParseError(dir.string() + ": sample without manifest rows");
        std::sort(injection.injected.begin(), injection.injected.end(),
                  [&](const GridCell& a, const GridCell& b) {
                      return linear_index(a, ds.spec) < linear_index(b, ds.spec);
                  });
    }
    return ds;
}

}  // namespace gridwatch
