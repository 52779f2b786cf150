#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "parhom/config.hpp"
#include "parhom/harness.hpp"
#include "parhom/version.hpp"

namespace fs = std::filesystem;
using parhom::config::Config;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    int workers = 1;
    long seed_base = -1;
};

int run_experiment(const std::string& tag, const CommonOpts& co) {
    Config cfg;
    if (!co.config_path.empty()) cfg = Config::load(co.config_path);
    cfg.set("", "experiment", tag);
    parhom::harness::RunOptions opt;
    opt.out_dir = co.out_dir;
    opt.workers = co.workers;
    if (co.seed_base >= 0)
        opt.seed_base = static_cast<std::uint64_t>(co.seed_base);
    else
        opt.seed_base = cfg.get_seed_or("run", "seed_base", 1);

    auto rec = parhom::harness::run(cfg, opt);
    auto files = parhom::harness::emit_plot_data(rec, fs::path(co.out_dir) / tag / "plots");
    std::printf("experiment %s  (config %s, %.1fs)\n", rec.experiment.c_str(),
                rec.config_hash.c_str(), rec.wallclock_s);
    auto outputs = nlohmann::json::parse(rec.outputs_json);
    for (const auto& [name, v] : outputs.at("flags").items())
        std::printf("  [%s] %s\n", v.get<bool>() ? "PASS" : "FAIL", name.c_str());
    for (const auto& [name, v] : outputs.at("scalars").items())
        std::printf("  %-28s %.6g\n", name.c_str(), v.get<double>());
    std::printf("  wrote %zu plot files under %s\n", files.size(),
                (fs::path(co.out_dir) / tag / "plots").c_str());
    return rec.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for stochastically forced diffusion and "
                 "space-time homogenization"};
    app.set_version_flag("--version", parhom::kArtifactVersion);
    app.require_subcommand(1);

    std::map<std::string, CommonOpts> opts;
    for (const auto& tag : parhom::harness::experiment_tags()) {
        auto* sub = app.add_subcommand(tag, "run the " + tag + " experiment");
        auto& co = opts[tag];
        sub->add_option("--config", co.config_path, "experiment config file");
        sub->add_option("--out", co.out_dir, "output directory");
        sub->add_option("--workers", co.workers, "worker threads for replicas");
        sub->add_option("--seed-base", co.seed_base, "base seed for replica streams");
    }

    std::string snap_config, snap_out;
    auto* snap = app.add_subcommand("snapshot", "canonicalize a config for replay");
    snap->add_option("--config", snap_config, "config file")->required();
    snap->add_option("--out", snap_out, "output file (default stdout)");

    std::string restore_record, restore_out;
    auto* restore = app.add_subcommand("restore", "recover the config from a run record");
    restore->add_option("--record", restore_record, "record.json path")->required();
    restore->add_option("--out", restore_out, "output config file (default stdout)");

    std::string plots_record, plots_out = "plots";
    auto* plots = app.add_subcommand("emit-plots", "write per-figure CSV files from a record");
    plots->add_option("--record", plots_record, "record.json path")->required();
    plots->add_option("--out", plots_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (snap->parsed()) {
            auto cfg = Config::load(snap_config);
            const std::string text = cfg.serialize();
            if (snap_out.empty())
                std::cout << text;
            else
                std::ofstream(snap_out) << text;
            std::fprintf(stderr, "config hash %s\n", parhom::config::hash_hex(text).c_str());
            return 0;
        }
        if (restore->parsed()) {
            auto rec = parhom::harness::read_record(restore_record);
            if (restore_out.empty())
                std::cout << rec.config_text;
            else
                std::ofstream(restore_out) << rec.config_text;
            std::fprintf(stderr, "experiment %s, config hash %s\n", rec.experiment.c_str(),
                         rec.config_hash.c_str());
            return 0;
        }
        if (plots->parsed()) {
            auto rec = parhom::harness::read_record(plots_record);
            auto files = parhom::harness::emit_plot_data(rec, plots_out);
            std::fprintf(stderr, "wrote %zu files\n", files.size());
            return 0;
        }
        for (const auto& tag : parhom::harness::experiment_tags())
            if (app.got_subcommand(tag)) return run_experiment(tag, opts[tag]);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
