#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "osd/commands.hpp"
#include "osd/config.hpp"

namespace {

enum Exit { ok = 0, config_error = 2, domain_error = 3, invariant_failure = 4 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Opaque serial depth analyzer"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seq_len;
    bool no_folding = false;
    bool json = false;

    auto* analyze = app.add_subcommand("analyze", "Depth of one configuration with a per-stage breakdown");
    analyze->add_option("config", config_path, "Architecture config (JSON)")->required();
    analyze->add_option("--seq-len,-T", seq_len, "Sequence length (defaults to the config's own)");
    analyze->add_flag("--no-folding", no_folding, "Keep bias additions as separate gates");
    analyze->add_flag("--json", json, "Machine-readable output");

    osd::SweepOptions sweep_opts;
    std::string steps = "powers-of-two";
    std::string csv_path;
    auto* sweep = app.add_subcommand("sweep", "Depth across a range of sequence lengths");
    sweep->add_option("config", config_path, "Architecture config (JSON)")->required();
    sweep->add_option("--t-min", sweep_opts.t_min, "Smallest T")->required();
    sweep->add_option("--t-max", sweep_opts.t_max, "Largest T")->required();
    sweep->add_option("--t-steps", steps, "powers-of-two | linear")
        ->check(CLI::IsMember({"powers-of-two", "linear"}));
    sweep->add_option("--t-stride", sweep_opts.stride, "Increment for linear steps");
    sweep->add_option("--csv", csv_path, "Write CSV to this path ('-' for stdout)");
    sweep->add_flag("--no-folding", sweep_opts.no_folding, "Keep bias additions as separate gates");

    std::string family = "gemma3";
    auto* report = app.add_subcommand("report", "Family summary tables");
    report->add_option("--family", family, "Model family")->required();

    std::size_t top = 0;
    auto* path = app.add_subcommand("path", "Critical path listing");
    path->add_option("config", config_path, "Architecture config (JSON)")->required();
    path->add_option("--seq-len,-T", seq_len, "Sequence length (defaults to the config's own)");
    path->add_option("--top", top, "Also list the N deepest distinct paths");
    path->add_flag("--no-folding", no_folding, "Keep bias additions as separate gates");

    std::string preset_name;
    auto* preset = app.add_subcommand("preset", "Print a bundled config");
    preset->add_option("name", preset_name, "gemma3-1b, moe-table5, mlp-example, ...")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*analyze) {
            const auto cfg = osd::load_config(config_path);
            const auto r = osd::cmd_analyze(cfg, {seq_len, no_folding});
            if (json) {
                std::cout << osd::analyze_json(r);
            } else {
                osd::render_analyze(std::cout, r);
            }
        } else if (*sweep) {
            const auto cfg = osd::load_config(config_path);
            sweep_opts.steps = steps == "linear" ? osd::StepMode::linear : osd::StepMode::powers_of_two;
            const auto r = osd::cmd_sweep(cfg, sweep_opts);
            if (csv_path.empty() || csv_path == "-") {
                osd::write_sweep_csv(std::cout, r);
                osd::render_sweep_summary(std::cerr, r);
            } else {
                std::ofstream out(csv_path, std::ios::binary);
                if (!out) throw osd::ConfigError("cannot write '" + csv_path + "'");
                osd::write_sweep_csv(out, r);
                osd::render_sweep_summary(std::cout, r);
            }
        } else if (*report) {
            osd::cmd_report(std::cout, family);
        } else if (*path) {
            const auto cfg = osd::load_config(config_path);
            osd::render_path(std::cout, osd::cmd_path(cfg, seq_len, top, no_folding));
        } else if (*preset) {
            const auto cfg = osd::bundled_config(preset_name);
            if (!cfg) throw osd::ConfigError("no bundled config named '" + preset_name + "'");
            std::cout << osd::serialize_config(*cfg);
        }
    } catch (const osd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const osd::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return domain_error;
    } catch (const osd::InvariantError& e) {
        std::cerr << "invariant failure: " << e.what() << "\n";
        return invariant_failure;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return invariant_failure;
    }
    return ok;
}
