// Command-line driver for width sweeps, the linear-regression rate study,
// analytic predictives and single-width sampling runs.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "widebnn/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNoAccepts = 3;

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            throw widebnn::ConfigError("bad grid entry '" + item + "'");
        }
        if (pos != item.size()) {
            throw widebnn::ConfigError("bad grid entry '" + item + "'");
        }
        grid.push_back(static_cast<std::size_t>(v));
    }
    if (grid.empty()) {
        throw widebnn::ConfigError("empty --n-grid");
    }
    return grid;
}

int run_sweep(const std::string& config_path) {
    const widebnn::ExperimentConfig config = widebnn::load_experiment_config(config_path);
    std::cout << widebnn::sweep_csv_header() << '\n';
    const auto result = widebnn::width_sweep(config, [](const widebnn::SweepRow& row) {
        std::cout << widebnn::sweep_csv_line(row) << std::endl;
    });
    for (const auto& row : result.rows) {
        if (row.accepts > 0) {
            return kExitOk;
        }
    }
    std::cerr << "no proposal was accepted at any width\n";
    return kExitNoAccepts;
}

int run_linreg(const std::string& grid_text, std::size_t m, std::uint64_t seed, const std::string& out) {
    const auto grid = parse_grid(grid_text);
    const widebnn::RateTable table = widebnn::linreg_rates(grid, m, seed, out);
    widebnn::write_rates_csv(std::cout, table);
    return kExitOk;
}

int run_nngp(const std::string& config_path) {
    const widebnn::ExperimentConfig config = widebnn::load_experiment_config(config_path);
    widebnn::write_analytic_csv(std::cout, config, config.widths.back());
    return kExitOk;
}

int run_sample(const std::string& config_path, std::size_t width) {
    const widebnn::ExperimentConfig config = widebnn::load_experiment_config(config_path);
    if (width == 0) {
        throw widebnn::ConfigError("--width must be >= 1");
    }
    widebnn::GaussianStream ds = widebnn::dataset_stream(config);
    const widebnn::Dataset d = widebnn::build_dataset(config, ds);
    const auto report = widebnn::rejection_sample(widebnn::at_width(config, width), d.train_x, d.train_y,
                                                  config.likelihood, d.test_x, widebnn::sampler_options(config));
    std::cout << widebnn::report_to_json(report, width).dump(2) << '\n';
    return report.no_accepts() ? kExitNoAccepts : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact posterior sampling of finite Bayesian networks and their infinite-width limits"};
    app.require_subcommand(1);

    std::string config_path;
    auto* sweep = app.add_subcommand("sweep", "width sweep; CSV to stdout and to output_path");
    sweep->add_option("--config", config_path, "experiment JSON")->required();

    std::string grid_text = "16,32,64,128,256,512,1024,2048,4096,8192,16384";
    std::size_t m = 8;
    std::uint64_t seed = 0;
    std::string out_path;
    auto* rates = app.add_subcommand("linreg-rates", "linear-regression prior-to-posterior discrepancy rates");
    rates->add_option("--n-grid", grid_text, "comma-separated strictly increasing feature counts");
    rates->add_option("--m", m, "number of observations");
    rates->add_option("--seed", seed, "data seed");
    rates->add_option("--out", out_path, "CSV output path")->required();

    auto* nngp = app.add_subcommand("nngp", "analytic NNGP and NTK predictives at the test points");
    nngp->add_option("--config", config_path, "experiment JSON")->required();

    std::size_t width = 0;
    auto* sample = app.add_subcommand("sample", "single-width rejection sampling report as JSON");
    sample->add_option("--config", config_path, "experiment JSON")->required();
    sample->add_option("--width", width, "hidden width")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sweep->parsed()) {
            return run_sweep(config_path);
        }
        if (rates->parsed()) {
            return run_linreg(grid_text, m, seed, out_path);
        }
        if (nngp->parsed()) {
            return run_nngp(config_path);
        }
        return run_sample(config_path, width);
    } catch (const widebnn::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const widebnn::BadRange& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const widebnn::InvalidConfig& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kExitFailure;
    }
}
