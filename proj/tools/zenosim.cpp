#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "zenosim/cli/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kOther = 1, kSpec = 2, kNumerical = 3 };

}  // namespace

int main(int argc, char** argv) {
    using namespace zenosim;
    CLI::App app{"Zeno entangling gate simulations"};
    app.set_version_flag("--version", std::string(ZENOSIM_VERSION));

    std::string command, spec_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> jobs, fock;
    std::optional<double> dt_ns;
    app.add_option("command", command, "subcommand")->required()->check(CLI::IsMember(cli::subcommand_names()));
    app.add_option("--spec", spec_path, "experiment spec (YAML); defaults apply when omitted");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "base seed");
    app.add_option("--jobs", jobs, "worker threads");
    app.add_option("--fock", fock, "cavity Fock dimension");
    app.add_option("--dt", dt_ns, "integration step in ns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kSpec;
    }

    try {
        auto spec = spec_path.empty() ? cli::parse_spec_string("") : cli::parse_spec(spec_path);
        if (seed) spec.seed = *seed;
        if (jobs) spec.jobs = *jobs;
        if (fock) {
            if (*fock < 0) throw ConfigError("--fock must be positive");
            spec.sim.fock = static_cast<std::size_t>(*fock);
        }
        if (dt_ns) spec.sim.dt_us = *dt_ns * 1e-3;
        cli::validate(spec);

        const auto out = cli::run_subcommand(command, spec);
        for (const auto& f : cli::write_outputs(out_dir, command, spec, out)) std::cout << f.string() << '\n';
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return kSpec;
    } catch (const LabelError& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return kSpec;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
}
