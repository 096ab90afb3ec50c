// Generates the bundled demo world: annotations.jsonl + flight.csv + rules.json.

#include <iostream>

#include <CLI11.hpp>

#include "gridwatch/error.hpp"
#include "gridwatch/worldgen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic aerial-annotation dataset"};
    gridwatch::WorldOptions options;
    std::string out = "world";
    app.add_option("--scenes", options.scenes, "number of annotated frames");
    app.add_option("--seed", options.seed, "generation seed");
    app.add_option("--out", out, "output directory")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        const gridwatch::World world = gridwatch::generate_world(options);
        gridwatch::write_world(world, out);
        std::cout << "wrote " << world.annotations.size() << " scenes to " << out << '\n';
    } catch (const gridwatch::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
