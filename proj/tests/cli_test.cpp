// End-to-end checks of the command-line surface: exit codes, the one-line
// error JSON contract on stderr, and --validate-only leaving the disk alone.
#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "gridwatch/worldgen.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

#ifndef GRIDWATCH_CLI_PATH
#error "GRIDWATCH_CLI_PATH must point at the built binary"
#endif

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args) {
    const fs::path dir = fs::temp_directory_path();
    const fs::path out_file = dir / "gw_cli_stdout.txt";
    const fs::path err_file = dir / "gw_cli_stderr.txt";
    const std::string cmd = std::string(GRIDWATCH_CLI_PATH) + " " + args + " >" +
                            out_file.string() + " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    fs::remove(out_file);
    fs::remove(err_file);
    return r;
}

/// The stderr contract: exactly one line of JSON with "error" and "message".
json parse_error_line(const std::string& err) {
    REQUIRE(!err.empty());
    const std::size_t newline = err.find('\n');
    REQUIRE(newline == err.size() - 1);
    json j = json::parse(err.substr(0, newline));
    REQUIRE(j.contains("error"));
    REQUIRE(j.contains("message"));
    return j;
}

struct WorldFixture {
    fs::path dir;
    WorldFixture() : dir(fs::temp_directory_path() / "gw_cli_world") {
        fs::remove_all(dir);
        gridwatch::WorldOptions options;
        options.scenes = 20;
        options.seed = 11;
        gridwatch::write_world(gridwatch::generate_world(options), dir);
    }
    ~WorldFixture() { fs::remove_all(dir); }
    std::string annotations() const { return (dir / "annotations.jsonl").string(); }
    std::string flight() const { return (dir / "flight.csv").string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("--help exits zero and lists the subcommands") {
    const RunResult r = run_cli("--help");
    CHECK(r.code == 0);
    for (const char* sub : {"ingest", "synth", "train", "detect", "eval", "reproduce"})
        CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("no subcommand is a usage error") {
    const RunResult r = run_cli("");
    CHECK(r.code == 1);
    CHECK(parse_error_line(r.err)["error"] == "usage");
}

TEST_CASE("out-of-range scenario is rejected before any file is touched") {
    const RunResult r = run_cli("synth --dataset nope --rules nope --scenario 4 --out nope");
    CHECK(r.code == 1);
    CHECK(parse_error_line(r.err)["error"] == "usage");
}

TEST_CASE("missing input file maps to the io exit code and names the path") {
    const RunResult r = run_cli(
        "ingest --annotations /definitely/not/here.jsonl --flight /also/missing.csv --out x");
    CHECK(r.code == 2);
    const json j = parse_error_line(r.err);
    CHECK(j["error"] == "io");
    const std::string message = j["message"].get<std::string>();
    CHECK(message.find("/definitely/not/here.jsonl") != std::string::npos);
}

TEST_CASE("validate-only reports on stdout and writes nothing") {
    WorldFixture world;
    const fs::path out_dir = fs::temp_directory_path() / "gw_cli_should_not_exist";
    fs::remove_all(out_dir);
    const RunResult r = run_cli("ingest --annotations " + world.annotations() + " --flight " +
                                world.flight() + " --out " + out_dir.string() +
                                " --validate-only");
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    const json report = json::parse(r.out);
    CHECK(report["valid"] == true);
    CHECK(report["frames"] == 20);
    CHECK(report["train_samples"].get<int>() + report["val_samples"].get<int>() +
              report["test_samples"].get<int>() ==
          20);
    CHECK_FALSE(fs::exists(out_dir));
}

TEST_CASE("corrupt checkpoint surfaces a parse error") {
    WorldFixture world;
    const fs::path dir = fs::temp_directory_path() / "gw_cli_corrupt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream bad(dir / "checkpoint.bin", std::ios::binary);
        bad << "this is not a checkpoint";
    }
    const RunResult ingest = run_cli("ingest --annotations " + world.annotations() +
                                     " --flight " + world.flight() + " --out " +
                                     (dir / "data").string());
    REQUIRE(ingest.code == 0);
    const RunResult r = run_cli("detect --checkpoint " + (dir / "checkpoint.bin").string() +
                                " --dataset " + (dir / "data" / "test").string() + " --out " +
                                (dir / "reports").string());
    CHECK(r.code == 2);
    CHECK(parse_error_line(r.err)["error"] == "parse");
    fs::remove_all(dir);
}

TEST_CASE("bad flight telemetry exits with the validation kind and names the field") {
    WorldFixture world;
    const fs::path dir = fs::temp_directory_path() / "gw_cli_badflight";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream flight(dir / "flight.csv", std::ios::trunc);
        flight << "date,t,lat,lon,alt_mm,roll,pitch,yaw,vx,vy,vz\n";
        flight << "01152019-100000,0,95.0,28.9,25000.0,0.0,0.0,0.5,1.0,1.0,0.5\n";
    }
    const RunResult r = run_cli("ingest --annotations " + world.annotations() + " --flight " +
                                (dir / "flight.csv").string() + " --out " +
                                (dir / "out").string());
    CHECK(r.code == 2);
    const json j = parse_error_line(r.err);
    CHECK(j["error"] == "validation");
    CHECK(j["message"].get<std::string>().find("lat") != std::string::npos);
    fs::remove_all(dir);
}

}  // TEST_SUITE
