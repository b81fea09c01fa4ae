#include <CLI11.hpp>

#include "optomech/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Squeezed optomechanics: quantum memory, entanglement, sweeps and Monte Carlo checks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", optomech::version);

    optomech::Invocation inv;
    std::string config, out;
    std::uint64_t seed = 0;
    int threads = 0;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"memory", "write/store/read fidelity at one operating point"},
        {"entangle", "stationary log-negativity at one operating point"},
        {"sweep", "grid over one or more parameter axes"},
        {"validate", "moment equations against a Monte Carlo ensemble"},
        {"kerr", "Kerr coefficient from material inputs"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON configuration file");
        sub->add_option("--out", out, "output path (default stdout)");
        sub->add_option("--seed", seed, "base seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--override", inv.overrides, "dotted.key=value, repeatable");
        sub->callback([&inv, name = name] { inv.subcommand = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : optomech::exit_code::config;
    }

    const CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--config")) inv.config_path = config;
    if (sub->count("--out")) inv.out_path = out;
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--threads")) inv.threads = threads;
    return optomech::run(inv);
}
