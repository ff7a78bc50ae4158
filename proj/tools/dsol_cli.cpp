#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "dsol/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Field synthesis and guidance scenarios"};
    std::string scenario, config_path, out_dir = "out", grid;
    std::optional<std::uint64_t> seed;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    bool list = false, print_defaults = false;
    app.add_option("--scenario", scenario, "scenario id")->check(CLI::IsMember(dsol::scenario_ids()));
    app.add_option("--config", config_path, "JSON config overlay")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker threads (does not change outputs)")->check(CLI::PositiveNumber);
    app.add_option("--grid", grid, "override field-map resolution, rows x cols, e.g. 400x400");
    app.add_flag("--list", list, "list scenario ids and exit");
    app.add_flag("--print-defaults", print_defaults, "print the resolved config and exit");
    app.set_version_flag("--version", dsol::version);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : dsol::ExitConfig;
    }
    if (list) {
        for (const auto& s : dsol::scenario_ids()) std::cout << s << '\n';
        return 0;
    }
    try {
        nlohmann::json user = nlohmann::json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            try {
                user = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw dsol::ConfigError(config_path + ": " + e.what());
            }
        }
        dsol::Overrides ov;
        ov.seed = seed;
        if (!grid.empty()) ov.grid = dsol::parse_grid_flag(grid);
        auto resolved = dsol::resolve_config(scenario, user, ov);
        if (print_defaults) {
            std::cout << resolved.dump(2) << '\n';
            return 0;
        }
        auto res = dsol::run_scenario(resolved, out_dir, threads);
        std::cout << res.report.dump(2) << '\n';
        if (res.exit_code == dsol::ExitVerify) std::cerr << "verification failed (see reports.json)\n";
        if (res.exit_code == dsol::ExitMasking) std::cerr << "masked fraction exceeds mask_budget\n";
        return res.exit_code;
    } catch (const dsol::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return dsol::ExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return dsol::ExitConfig;
    }
}
