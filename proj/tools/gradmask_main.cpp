// Command-line front end: dataset generation, trial execution, failure-mode
// sweeps, landscape/mask-curve exports, and report tables over JSONL records.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gradmask/harness.hpp"
#include "gradmask/io.hpp"
#include "gradmask/landscape.hpp"

namespace fs = std::filesystem;
using namespace gradmask;
using nlohmann::json;

namespace {

json parse_json_arg(const std::string& arg) {
    if (fs::exists(arg)) {
        std::ifstream in(arg);
        return json::parse(in);
    }
    return json::parse(arg);
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(io::parse_double(tok));
    if (out.empty()) throw CLI::ValidationError("empty list: " + csv);
    return out;
}

int default_workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

EnvDataset resolve_dataset(const std::string& spec_arg, std::uint64_t dataset_seed) {
    if (spec_arg == "spirals") {
        SpiralsConfig cfg;
        cfg.seed = dataset_seed;
        return gen_spirals(cfg);
    }
    if (spec_arg == "cmnist") {
        SyntheticCmnistConfig cfg;
        cfg.seed = dataset_seed;
        return gen_synthetic_cmnist(cfg);
    }
    return io::load_dataset(spec_arg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient-agreement masking laboratory"};
    app.require_subcommand(1);

    // --- gen-data ---
    auto* gen = app.add_subcommand("gen-data", "generate a multi-environment dataset");
    std::string gen_dataset, gen_config, gen_out;
    std::uint64_t gen_seed = 0;
    gen->add_option("--dataset", gen_dataset, "spirals|cmnist")->required();
    gen->add_option("--config", gen_config, "JSON file or inline JSON with generator options");
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "output directory")->required();

    // --- run ---
    auto* run = app.add_subcommand("run", "run training trials and persist JSONL records");
    std::string run_dataset = "spirals", run_method = "erm", run_test_env, run_hparams = "{}";
    std::string run_out = "results.jsonl";
    int run_seeds = 1, run_steps = 0, run_workers = default_workers();
    std::uint64_t run_dataset_seed = 0, run_seed_base = 0, run_hparam_seed = 0;
    run->add_option("--dataset", run_dataset, "dataset directory or name (spirals|cmnist)")->required();
    run->add_option("--method", run_method, "erm|and|sand")->required();
    run->add_option("--test-env", run_test_env, "held-out environment id")->required();
    run->add_option("--hparams", run_hparams, "JSON config, or sample:N for random search");
    run->add_option("--seeds", run_seeds, "number of trial seeds");
    run->add_option("--steps", run_steps, "override step count");
    run->add_option("--out", run_out, "output JSONL path");
    run->add_option("--workers", run_workers, "parallel trial workers");
    run->add_option("--dataset-seed", run_dataset_seed, "seed when generating by name");
    run->add_option("--seed-base", run_seed_base, "first trial seed");
    run->add_option("--hparam-seed", run_hparam_seed, "random-search seed");

    // --- sweep ---
    auto* sweep = app.add_subcommand("sweep", "failure-mode sweep on the spirals dataset");
    std::string sweep_kind, sweep_values, sweep_out = "sweep.csv", sweep_method = "and";
    int sweep_seeds = 20, sweep_steps = 0, sweep_workers = default_workers();
    int sweep_num_envs = 16, sweep_samples = 512;
    sweep->add_option("--kind", sweep_kind, "momentum|noise|init")->required();
    sweep->add_option("--values", sweep_values, "comma-separated swept values")->required();
    sweep->add_option("--out", sweep_out, "output CSV path");
    sweep->add_option("--seeds", sweep_seeds, "seeds per value");
    sweep->add_option("--method", sweep_method, "erm|and|sand");
    sweep->add_option("--steps", sweep_steps, "override step count");
    sweep->add_option("--workers", sweep_workers, "parallel trial workers");
    sweep->add_option("--num-envs", sweep_num_envs, "spirals environments");
    sweep->add_option("--samples-per-env", sweep_samples, "spirals samples per environment");

    // --- landscape ---
    auto* land = app.add_subcommand("landscape", "export a masked vector field");
    std::string land_preset = "fig1", land_method = "none", land_out = "field.csv";
    double land_tau = 1.0;
    land->add_option("--preset", land_preset, "landscape preset (fig1)");
    land->add_option("--method", land_method, "none|and|sand");
    land->add_option("--tau", land_tau, "agreement threshold");
    land->add_option("--out", land_out, "output CSV path");

    // --- mask-curve ---
    auto* curve = app.add_subcommand("mask-curve", "export smoothed-mask shape curves");
    double curve_tau = 0.9;
    std::string curve_sigma2 = "0.01,0.1,1,10", curve_out = "curve.csv";
    curve->add_option("--tau", curve_tau, "agreement threshold");
    curve->add_option("--sigma2", curve_sigma2, "comma-separated dispersion levels");
    curve->add_option("--out", curve_out, "output CSV path");

    // --- report ---
    auto* report = app.add_subcommand("report", "aggregate JSONL records into a table");
    std::string report_in, report_selection = "trainval", report_out = "table.csv";
    report->add_option("--in", report_in, "input JSONL path")->required();
    report->add_option("--selection", report_selection, "trainval|oracle");
    report->add_option("--out", report_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            EnvDataset ds;
            if (gen_dataset == "spirals") {
                SpiralsConfig cfg;
                if (!gen_config.empty()) cfg = SpiralsConfig::from_json(parse_json_arg(gen_config));
                cfg.seed = gen_seed;
                ds = gen_spirals(cfg);
            } else if (gen_dataset == "cmnist") {
                SyntheticCmnistConfig cfg;
                if (!gen_config.empty())
                    cfg = SyntheticCmnistConfig::from_json(parse_json_arg(gen_config));
                cfg.seed = gen_seed;
                ds = gen_synthetic_cmnist(cfg);
            } else {
                throw CLI::ValidationError("--dataset must be spirals or cmnist");
            }
            io::save_dataset(ds, gen_out);
            std::printf("wrote %zu environments (dim %d) to %s\n", ds.envs.size(), ds.feature_dim,
                        gen_out.c_str());
        } else if (*run) {
            const EnvDataset ds = resolve_dataset(run_dataset, run_dataset_seed);
            const std::string dataset_name =
                ds.provenance.value("generator", std::string("spirals"));

            std::vector<harness::TrialConfig> configs;
            if (run_hparams.rfind("sample:", 0) == 0) {
                const int n = std::stoi(run_hparams.substr(7));
                const harness::HparamSpace space = harness::hparam_space(dataset_name, run_method);
                Rng rng(run_hparam_seed);
                for (int i = 0; i < n; ++i)
                    configs.push_back(harness::sample_hparams(space, rng, i));
            } else {
                harness::TrialConfig cfg =
                    harness::hparam_space(dataset_name, run_method).defaults;
                const json overrides = parse_json_arg(run_hparams);
                json merged = cfg.to_json();
                merged.update(overrides);
                configs.push_back(harness::TrialConfig::from_json(merged));
            }
            for (auto& cfg : configs) {
                cfg.dataset = dataset_name;
                cfg.method = run_method;
                if (run_steps > 0) cfg.steps = run_steps;
                cfg.validate();
            }

            std::vector<harness::TrialJob> jobs;
            for (const auto& cfg : configs)
                for (int s = 0; s < run_seeds; ++s)
                    jobs.push_back({cfg, run_test_env, run_seed_base + static_cast<std::uint64_t>(s)});
            const auto records = harness::run_trials(jobs, ds, run_workers);
            harness::write_jsonl(run_out, records);
            int failed = 0;
            for (const auto& r : records) failed += r.failed ? 1 : 0;
            std::printf("wrote %zu records (%d failed) to %s\n", records.size(), failed,
                        run_out.c_str());
        } else if (*sweep) {
            SpiralsConfig ds_cfg;
            ds_cfg.num_envs = sweep_num_envs;
            ds_cfg.samples_per_env = sweep_samples;
            harness::TrialConfig base = harness::hparam_space("spirals", sweep_method).defaults;
            if (sweep_steps > 0) base.steps = sweep_steps;
            const auto result =
                harness::run_sweep(harness::sweep_kind_from_string(sweep_kind),
                                   parse_double_list(sweep_values), base, ds_cfg, sweep_seeds,
                                   sweep_workers);
            io::write_text_file(sweep_out, result.to_csv());
            std::printf("wrote %zu sweep points to %s (spearman rho %.3f, p %.4f)\n",
                        result.points.size(), sweep_out.c_str(), result.spearman_rho,
                        result.spearman_negative_p);
        } else if (*land) {
            if (land_preset != "fig1")
                throw CLI::ValidationError("unknown preset '" + land_preset + "'");
            auto [a, b] = landscape::toy_conflict_pair();
            MaskConfig cfg;
            cfg.tau = land_tau;
            if (land_method == "and")
                cfg.method = MaskMethod::and_mask;
            else if (land_method == "sand")
                cfg.method = MaskMethod::sand_mask;
            else if (land_method != "none")
                throw CLI::ValidationError("--method must be none|and|sand");
            const auto field = landscape::compute_field({a, b}, landscape::GridParams{}, cfg);
            const auto dead = landscape::dead_zone_map(field);
            io::write_field_csv(land_out, field, dead);
            std::printf("wrote %dx%d field to %s (dead fraction %.4f)\n", field.grid.nx,
                        field.grid.ny, land_out.c_str(), dead.dead_fraction);
        } else if (*curve) {
            std::vector<double> grid;
            for (int i = 0; i <= 200; ++i) grid.push_back(i / 200.0);
            const auto rows = mask_shape_curve(curve_tau, parse_double_list(curve_sigma2), grid);
            io::write_mask_curve_csv(curve_out, rows);
            std::printf("wrote %zu curve points to %s\n", rows.size(), curve_out.c_str());
        } else if (*report) {
            const auto records = harness::read_jsonl(report_in);
            const auto table = harness::aggregate(
                records, harness::selection_scheme_from_string(report_selection));
            io::write_text_file(report_out, table.to_csv());
            std::printf("wrote %zu rows to %s\n", table.rows.size(), report_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
