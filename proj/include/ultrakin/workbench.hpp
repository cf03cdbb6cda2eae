#pragma once

// Run orchestration: a flat text configuration mapped onto the module drivers,
// with results exported as CSV/JSON tables plus a manifest that is sufficient
// to reproduce the run bit for bit.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultrakin/errors.hpp"
#include "ultrakin/io.hpp"
#include "ultrakin/protocols.hpp"
#include "ultrakin/version.hpp"

namespace ultrakin {

// One simulation request. Sentinels (-1 for numbers, empty optionals) mean
// "use the owning module's default"; run() resolves them and returns the
// effective values in the bundle so persisted configs are fully explicit.
struct RunConfig {
    std::string mode = "quantum";
    std::string reaction;     // inline network source (single line)
    std::string network_file; // or a path to a network file
    std::string out_dir;
    std::string formats = "csv"; // comma-separated subset of {csv, json}
    std::string rate_scale = "per_particle";
    double n_atoms = RelaxationOptions{}.n_atoms;
    int cutoff = -1;
    double tau_max = -1.0;
    double dtau = -1.0;
    std::optional<double> c1;
    double c2 = ChaosScanOptions{}.c2;
    double energy = ChaosScanOptions{}.energy;
    int trajectories = ChaosScanOptions{}.trajectories;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ResultBundle {
    RunConfig config; // effective: defaults resolved, generated seed filled in
    std::vector<DataTable> tables;
    std::vector<std::pair<std::string, double>> scalars;
    double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Configuration text format: `[section]` headers and `key = value` lines.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trimmed(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string opt_text(const std::optional<double>& v) {
    return v ? round_trip_digits(*v) : std::string();
}

inline std::string opt_text(const std::optional<std::uint64_t>& v) {
    return v ? std::to_string(*v) : std::string();
}

inline double parse_double(const std::string& key, const std::string& text, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key '" + key + "' needs a real number, got '" + text + "' (line " +
                      std::to_string(line) + ")");
}

inline int parse_int(const std::string& key, const std::string& text, int line) {
    try {
        std::size_t used = 0;
        int v = std::stoi(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key '" + key + "' needs an integer, got '" + text + "' (line " +
                      std::to_string(line) + ")");
}

inline std::uint64_t parse_seed(const std::string& key, const std::string& text, int line) {
    try {
        std::size_t used = 0;
        // stoull wraps negative input around instead of rejecting it
        unsigned long long v = text.front() == '-' ? throw std::invalid_argument(text)
                                                   : std::stoull(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("key '" + key + "' needs a non-negative integer, got '" + text +
                      "' (line " + std::to_string(line) + ")");
}

} // namespace detail

inline std::string render_config(const RunConfig& c) {
    std::string out;
    auto kv = [&out](std::string_view key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };
    out += "[run]\n";
    kv("mode", c.mode);
    kv("out", c.out_dir);
    kv("format", c.formats);
    out += "[network]\n";
    kv("reaction", c.reaction);
    kv("file", c.network_file);
    out += "[params]\n";
    kv("n", detail::round_trip_digits(c.n_atoms));
    kv("cutoff", std::to_string(c.cutoff));
    kv("tau_max", detail::round_trip_digits(c.tau_max));
    kv("dtau", detail::round_trip_digits(c.dtau));
    kv("c1", detail::opt_text(c.c1));
    kv("c2", detail::round_trip_digits(c.c2));
    kv("energy", detail::round_trip_digits(c.energy));
    kv("trajectories", std::to_string(c.trajectories));
    kv("seed", detail::opt_text(c.seed));
    kv("rate_scale", c.rate_scale);
    return out;
}

inline RunConfig parse_config(std::string_view text) {
    RunConfig c;
    c.formats.clear();
    c.rate_scale.clear();
    c.mode.clear();
    std::string section;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        std::string line = detail::trimmed(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header (line " +
                                  std::to_string(line_no) + ")");
            section = line.substr(1, line.size() - 2);
            if (section != "run" && section != "network" && section != "params")
                throw ConfigError("unknown section [" + section + "] (line " +
                                  std::to_string(line_no) + ")");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value' (line " + std::to_string(line_no) + ")");
        std::string key = detail::trimmed(std::string_view(line).substr(0, eq));
        std::string value = detail::trimmed(std::string_view(line).substr(eq + 1));
        auto in_section = [&](std::string_view want) {
            if (section != want)
                throw ConfigError("key '" + key + "' belongs in [" + std::string(want) +
                                  "] (line " + std::to_string(line_no) + ")");
        };
        if (key == "mode") {
            in_section("run");
            c.mode = value;
        } else if (key == "out") {
            in_section("run");
            c.out_dir = value;
        } else if (key == "format") {
            in_section("run");
            c.formats = value;
        } else if (key == "reaction") {
            in_section("network");
            c.reaction = value;
        } else if (key == "file") {
            in_section("network");
            c.network_file = value;
        } else if (key == "n") {
            in_section("params");
            c.n_atoms = detail::parse_double(key, value, line_no);
        } else if (key == "cutoff") {
            in_section("params");
            c.cutoff = detail::parse_int(key, value, line_no);
        } else if (key == "tau_max") {
            in_section("params");
            c.tau_max = detail::parse_double(key, value, line_no);
        } else if (key == "dtau") {
            in_section("params");
            c.dtau = detail::parse_double(key, value, line_no);
        } else if (key == "c1") {
            in_section("params");
            if (!value.empty()) c.c1 = detail::parse_double(key, value, line_no);
        } else if (key == "c2") {
            in_section("params");
            c.c2 = detail::parse_double(key, value, line_no);
        } else if (key == "energy") {
            in_section("params");
            c.energy = detail::parse_double(key, value, line_no);
        } else if (key == "trajectories") {
            in_section("params");
            c.trajectories = detail::parse_int(key, value, line_no);
        } else if (key == "seed") {
            in_section("params");
            if (!value.empty()) c.seed = detail::parse_seed(key, value, line_no);
        } else if (key == "rate_scale") {
            in_section("params");
            c.rate_scale = value;
        } else {
            throw ConfigError("unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
        }
    }
    return c;
}

inline RunConfig read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> items;
    std::string token;
    std::istringstream in(csv);
    while (std::getline(in, token, ',')) {
        token = trimmed(token);
        if (!token.empty()) items.push_back(token);
    }
    return items;
}

inline RateScale parse_rate_scale(const std::string& text) {
    if (text == "per_particle") return RateScale::per_particle;
    if (text == "raw") return RateScale::raw;
    throw ConfigError("rate_scale must be per_particle or raw, got '" + text + "'");
}

inline ReactionNetwork load_network(const RunConfig& c) {
    if (c.reaction.empty() == c.network_file.empty())
        throw ConfigError(c.mode + " mode needs exactly one network source "
                          "(inline reaction or file)");
    std::string text = c.reaction;
    if (!c.network_file.empty()) {
        std::ifstream in(c.network_file);
        if (!in) throw ConfigError("cannot read network file: " + c.network_file);
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    ReactionNetwork net = parse_network(text);
    if (parse_rate_scale(c.rate_scale) == RateScale::per_particle) {
        if (!(c.n_atoms > 0.0))
            throw ConfigError("per-particle rate scaling needs a positive atom number");
        net = scale_rates(net, 1.0 / std::sqrt(c.n_atoms));
    }
    return net;
}

inline std::optional<ChargeVector> strictly_positive_charge(const ReactionNetwork& net) {
    for (const auto& charge : conserved_charges(net)) {
        bool positive = true;
        for (long long w : charge.weights) positive = positive && w > 0;
        if (positive) return charge;
    }
    return std::nullopt;
}

// Initial coherent preparation shared by the quantum-side modes: species 0
// holds the condensate, every other species starts empty. Networks with a
// strictly positive conserved charge get complete charge sectors; others are
// truncated per species and need an explicit cutoff.
struct Preparation {
    QuantumState psi0;
    EigenSystem eig;
    int cutoff = 0;
};

inline Preparation prepare_condensate(const ReactionNetwork& net, const RunConfig& c) {
    if (c.n_atoms < 0.0) throw ConfigError("n must be non-negative");
    std::vector<Complex> alphas(net.n_species(), Complex(0.0, 0.0));
    alphas[0] = Complex(std::sqrt(c.n_atoms), 0.0);
    Preparation prep;
    prep.cutoff = c.cutoff >= 0 ? c.cutoff : coherent_cutoff(c.n_atoms);
    FockCutoff cutoff;
    if (strictly_positive_charge(net)) {
        cutoff.max_occupation.assign(net.n_species(), 0);
        cutoff.max_occupation[0] = prep.cutoff;
    } else {
        if (c.cutoff < 0)
            throw ConfigError("networks without a positive conserved charge need an "
                              "explicit cutoff");
        cutoff = FockCutoff::uniform(net.n_species(), prep.cutoff);
    }
    prep.psi0 = coherent_product_state(net, alphas, cutoff);
    prep.eig = diagonalize(hamiltonian_blocks(net, prep.psi0.blocks));
    return prep;
}

inline ResultBundle run_quantum(RunConfig c) {
    if (c.tau_max < 0.0) c.tau_max = RelaxationOptions{}.tau_max;
    if (c.dtau < 0.0) c.dtau = RelaxationOptions{}.dtau;
    auto net = load_network(c);
    if (net.n_species() > 2)
        throw ConfigError("quantum mode reports the two-species timeseries schema; "
                          "got " + std::to_string(net.n_species()) + " species");
    auto prep = prepare_condensate(net, c);
    const bool two = net.n_species() == 2;

    DataTable table;
    table.name = "timeseries";
    table.columns = {"tau", "n_atoms", "n_molecules", "entropy"};
    auto times = uniform_times(c.tau_max, c.dtau);
    evolve_visit(prep.eig, prep.psi0, times, [&](double tau, const QuantumState& psi) {
        double molecules = two ? number_expectation(psi, 1) : 0.0;
        double entropy = two ? von_neumann_entropy(reduced_density(psi, 1)) : 0.0;
        table.add_row({tau, number_expectation(psi, 0), molecules, entropy});
    });

    ResultBundle bundle;
    bundle.config = c;
    long long dim = 0;
    for (const auto& block : prep.psi0.blocks) dim += block.dim();
    bundle.scalars = {{"cutoff", (double)prep.cutoff}, {"hilbert_dim", (double)dim}};
    bundle.tables.push_back(std::move(table));
    return bundle;
}

inline ResultBundle run_meanfield(RunConfig c) {
    if (c.tau_max < 0.0) c.tau_max = RelaxationOptions{}.tau_max;
    if (c.dtau < 0.0) c.dtau = RelaxationOptions{}.dtau;
    auto net = load_network(c);
    if (net.n_species() != 2)
        throw ConfigError("meanfield mode reports the two-species timeseries schema; "
                          "got " + std::to_string(net.n_species()) + " species");
    if (c.n_atoms < 0.0) throw ConfigError("n must be non-negative");

    MeanFieldState init;
    init.alpha = {Complex(std::sqrt(c.n_atoms), 0.0), Complex(0.0, 0.0)};
    auto field = meanfield_vector_field(net);
    auto traj = integrate_meanfield(field, init, c.tau_max, c.dtau, {},
                                    [&](const MeanFieldState& s) { return mf_energy(net, s); });

    DataTable table;
    table.name = "timeseries";
    table.columns = {"tau",     "re_atoms",    "im_atoms", "re_molecules", "im_molecules",
                     "n_atoms", "n_molecules", "energy"};
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& a = traj.states[i].alpha;
        table.add_row({traj.times[i], a[0].real(), a[0].imag(), a[1].real(), a[1].imag(),
                       std::norm(a[0]), std::norm(a[1]), traj.energy[i]});
    }

    ResultBundle bundle;
    bundle.config = c;
    bundle.tables.push_back(std::move(table));
    return bundle;
}

inline ResultBundle run_classical(RunConfig c) {
    if (c.tau_max < 0.0) c.tau_max = RelaxationOptions{}.tau_max;
    if (c.dtau < 0.0) c.dtau = RelaxationOptions{}.dtau;
    auto net = load_network(c);

    DataTable table;
    table.name = "timeseries";
    table.columns = {"tau"};
    for (const auto& sp : net.species()) table.columns.push_back(sp.name);

    Eigen::VectorXd conc = Eigen::VectorXd::Zero(net.n_species());
    conc[0] = 1.0;
    auto grid = uniform_times(c.tau_max, c.dtau);
    integrate_sampled(classical_rate_field(net), 0.0, conc, grid, {},
                      [&](double t, const Eigen::VectorXd& y) {
                          std::vector<Cell> row{t};
                          for (Eigen::Index s = 0; s < y.size(); ++s) row.push_back(y[s]);
                          table.add_row(std::move(row));
                      });

    ResultBundle bundle;
    bundle.config = c;
    bundle.tables.push_back(std::move(table));
    return bundle;
}

inline ResultBundle run_poincare(RunConfig c) {
    if (!c.c1) throw ConfigError("poincare mode needs c1");
    if (c.tau_max < 0.0) c.tau_max = ChaosScanOptions{}.section_tau;
    if (c.trajectories < 1) throw ConfigError("trajectories must be at least 1");

    NondimParams params{1.0, 1.0, *c.c1, c.c2};
    NondimField field{*c.c1, c.c2, true};
    auto points = sample_energy_surface(c.energy, params, c.trajectories, *c.seed);
    auto section = poincare_section(field, points, c.tau_max, ChaosScanOptions{}.control);

    DataTable table;
    table.name = "sections";
    table.columns = {"traj_id", "tau", "X_A", "P_A", "P_A2"};
    long long degenerate = 0;
    for (std::size_t id = 0; id < section.trajectories.size(); ++id) {
        const auto& traj = section.trajectories[id];
        if (traj.degenerate) ++degenerate;
        for (const auto& x : traj.crossings)
            table.add_row({(long long)id, x.tau, x.x_a, x.p_a, x.p_m});
    }

    ResultBundle bundle;
    bundle.config = c;
    bundle.scalars = {{"degenerate_trajectories", (double)degenerate}};
    bundle.tables.push_back(std::move(table));
    return bundle;
}

inline ResultBundle run_lyapunov(RunConfig c) {
    ChaosScanOptions opt;
    opt.energy = c.energy;
    opt.c2 = c.c2;
    if (c.c1) opt.c1_grid = {*c.c1};
    if (c.trajectories < 1) throw ConfigError("trajectories must be at least 1");
    opt.trajectories = c.trajectories;
    if (c.tau_max >= 0.0) opt.lyapunov_horizon = c.tau_max;
    else c.tau_max = opt.lyapunov_horizon;
    opt.seed = *c.seed;
    auto rows = chaos_scan(opt);

    DataTable table;
    table.name = "scan";
    table.columns = {"c1", "lambda_max", "filling_fraction"};
    for (const auto& row : rows) table.add_row({row.c1, row.lambda_max, row.filling});

    ResultBundle bundle;
    bundle.config = c;
    bundle.tables.push_back(std::move(table));
    return bundle;
}

inline ResultBundle run_sweep(const RunConfig& c) {
    RunConfig raw = c;
    raw.rate_scale = "raw"; // scaling is applied per sweep point below
    auto base = load_network(raw);
    if (!strictly_positive_charge(base))
        throw ConfigError("sweep mode needs a network with a positive conserved charge");
    const bool per_particle = parse_rate_scale(c.rate_scale) == RateScale::per_particle;

    DataTable table;
    table.name = "sweep";
    table.columns = {"N", "mean", "fluct"};
    for (double n : {20.0, 50.0, 100.0, 200.0}) {
        auto net = per_particle ? scale_rates(base, 1.0 / std::sqrt(n)) : base;
        RunConfig point = c;
        point.n_atoms = n;
        auto prep = prepare_condensate(net, point);
        auto obs = occupation_diagonals(prep.psi0.blocks, 0);
        auto report = diagonal_ensemble(prep.eig, prep.psi0, obs);
        table.add_row({(long long)n, report.mean_diag, std::sqrt(report.fluct_sq)});
    }

    ResultBundle bundle;
    bundle.config = c;
    bundle.tables.push_back(std::move(table));
    return bundle;
}

} // namespace detail

inline ResultBundle run(const RunConfig& config) {
    auto t0 = std::chrono::steady_clock::now();
    RunConfig c = config;
    for (const auto& fmt : detail::split_list(c.formats))
        if (fmt != "csv" && fmt != "json")
            throw ConfigError("unknown output format '" + fmt + "'");
    if (detail::split_list(c.formats).empty())
        throw ConfigError("at least one output format is required");
    detail::parse_rate_scale(c.rate_scale);
    if (!c.seed) {
        if (c.mode == "poincare" || c.mode == "lyapunov")
            c.seed = std::random_device{}();
    }

    ResultBundle bundle;
    if (c.mode == "quantum") bundle = detail::run_quantum(c);
    else if (c.mode == "meanfield") bundle = detail::run_meanfield(c);
    else if (c.mode == "classical") bundle = detail::run_classical(c);
    else if (c.mode == "poincare") bundle = detail::run_poincare(c);
    else if (c.mode == "lyapunov") bundle = detail::run_lyapunov(c);
    else if (c.mode == "sweep") bundle = detail::run_sweep(c);
    else
        throw ConfigError("unknown mode '" + c.mode + "' (expected quantum, meanfield, "
                          "classical, poincare, lyapunov or sweep)");

    bundle.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return bundle;
}

inline void export_bundle(const ResultBundle& bundle, const std::filesystem::path& out_dir) {
    if (out_dir.empty()) throw ConfigError("export needs an output directory");
    std::filesystem::create_directories(out_dir);
    auto formats = detail::split_list(bundle.config.formats);

    write_text_file(out_dir / "config.cfg", render_config(bundle.config));

    nlohmann::json manifest;
    manifest["artifact_version"] = kVersion;
    manifest["mode"] = bundle.config.mode;
    manifest["wall_seconds"] = bundle.wall_seconds;
    manifest["config"] = render_config(bundle.config);
    auto& scalars = manifest["scalars"] = nlohmann::json::object();
    for (const auto& [name, value] : bundle.scalars) scalars[name] = value;
    auto& tables = manifest["tables"] = nlohmann::json::array();
    for (const auto& table : bundle.tables) {
        tables.push_back({{"name", table.name}, {"rows", table.rows.size()}});
        for (const auto& fmt : formats) {
            if (fmt == "csv")
                write_text_file(out_dir / (table.name + ".csv"), render_csv(table));
            else
                write_text_file(out_dir / (table.name + ".json"),
                                table_to_json(table).dump(2) + "\n");
        }
    }
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

} // namespace ultrakin
