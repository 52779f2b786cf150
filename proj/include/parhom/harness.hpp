#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "parhom/config.hpp"

namespace parhom::harness {

struct RunOptions {
    std::filesystem::path out_dir = "out";
    int workers = 1;
    std::uint64_t seed_base = 1;
};

struct RunRecord {
    std::string experiment;
    std::string version;
    std::string config_hash;
    std::string config_text;  // canonical serialization with all defaults filled
    double wallclock_s = 0.0;
    std::vector<std::uint64_t> seeds;
    std::string outputs_json;  // {"tables": .., "scalars": .., "flags": .., "files": ..}
    bool all_pass = true;
};

const std::vector<std::string>& experiment_tags();

// Validates, dispatches to the owning module, writes outputs under
// out_dir/<experiment>/ (staged in a temp directory, renamed on completion)
// and returns the self-contained record.
RunRecord run(config::Config cfg, const RunOptions& opt);

void write_record(const RunRecord& rec, const std::filesystem::path& file);
// Parses a stored record; refuses a version mismatch.
RunRecord read_record(const std::filesystem::path& file);

// Per-figure CSV files plus a manifest; no rendering.
std::vector<std::filesystem::path> emit_plot_data(const RunRecord& rec,
                                                  const std::filesystem::path& out_dir);

}  // namespace parhom::harness
