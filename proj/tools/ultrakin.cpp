// Command-line front end: parses flags into a RunConfig (optionally seeded
// from a config file), runs the requested mode and exports the result tables.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ultrakin/workbench.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ultracold reaction-kinetics workbench"};
    app.get_formatter()->column_width(26);

    std::string mode;
    app.add_option("mode", mode, "quantum | meanfield | classical | poincare | lyapunov | sweep")
        ->required();

    std::string config_path;
    app.add_option("--config", config_path, "config file; flags below override its values");

    std::string network_file, reaction, out_dir, formats, rate_scale;
    double n = 0, tau_max = 0, dtau = 0, c1 = 0, c2 = 0, energy = 0;
    int cutoff = 0, trajectories = 0;
    std::uint64_t seed = 0;
    auto* network_opt = app.add_option("--network", network_file, "reaction network file");
    auto* reaction_opt =
        app.add_option("--reaction", reaction, "inline reaction, e.g. \"A + A <k=1> A2\"");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    auto* n_opt = app.add_option("--n", n, "initial atom number");
    auto* cutoff_opt = app.add_option("--cutoff", cutoff, "occupation cutoff");
    auto* tau_opt = app.add_option("--tau-max", tau_max, "evolution horizon");
    auto* dtau_opt = app.add_option("--dtau", dtau, "output grid spacing");
    auto* c1_opt = app.add_option("--c1", c1, "pairing strength");
    auto* c2_opt = app.add_option("--c2", c2, "molecular detuning");
    auto* energy_opt = app.add_option("--energy", energy, "surface energy");
    auto* traj_opt = app.add_option("--trajectories", trajectories, "sampled trajectories");
    auto* seed_opt = app.add_option("--seed", seed, "sampling seed");
    auto* format_opt = app.add_option("--format", formats, "csv, json or csv,json");
    auto* scale_opt = app.add_option("--rate-scale", rate_scale, "per_particle | raw");

    try {
        app.parse(argc, argv);

        ultrakin::RunConfig config;
        if (!config_path.empty()) config = ultrakin::read_config_file(config_path);
        config.mode = mode;
        if (*network_opt) config.network_file = network_file;
        if (*reaction_opt) config.reaction = reaction;
        if (*out_opt) config.out_dir = out_dir;
        if (*n_opt) config.n_atoms = n;
        if (*cutoff_opt) config.cutoff = cutoff;
        if (*tau_opt) config.tau_max = tau_max;
        if (*dtau_opt) config.dtau = dtau;
        if (*c1_opt) config.c1 = c1;
        if (*c2_opt) config.c2 = c2;
        if (*energy_opt) config.energy = energy;
        if (*traj_opt) config.trajectories = trajectories;
        if (*seed_opt) config.seed = seed;
        if (*format_opt) config.formats = formats;
        if (*scale_opt) config.rate_scale = rate_scale;
        if (config.out_dir.empty())
            throw ultrakin::ConfigError("an output directory is required (--out)");

        auto bundle = ultrakin::run(config);
        ultrakin::export_bundle(bundle, config.out_dir);

        std::printf("%s: %zu table(s) -> %s (%.2fs)\n", config.mode.c_str(),
                    bundle.tables.size(), config.out_dir.c_str(), bundle.wall_seconds);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const ultrakin::NumericError& e) {
        std::fprintf(stderr, "ultrakin: numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ultrakin: %s\n", e.what());
        return 2;
    }
}
