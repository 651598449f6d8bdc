#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mctl/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Piecewise-static multiplicative control for reaction-diffusion"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    for (const char* name : {"simulate", "synthesize", "verify", "sweep", "oracle-compare"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "experiment JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (default: config 'output' or .)");
        sub->add_option("--seed", seed, "override the config seed");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mctl::runner::kConfigError;
    }
    return mctl::runner::run_command(app.get_subcommands().front()->get_name(), config, out, seed);
}
