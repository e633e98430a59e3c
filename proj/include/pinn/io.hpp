#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "pinn/experiments.hpp"

namespace pinn::io {

/// Config-file problem, with file/line/key context in what().
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies a key/value config file on top of `base`. Sections: network,
/// geometry, collocation, optimizer, bc; steps/seed live above the first
/// section header. Unknown keys and malformed values throw ConfigError.
exp::ExperimentConfig load_config(const std::filesystem::path& path,
                                  exp::ExperimentConfig base);

/// The resolved configuration as a JSON object (manifest payload).
std::string config_json(const exp::ExperimentConfig& cfg);

/// Writes run_manifest.json (resolved config, seed, artifact names,
/// timestamp). Called before training so a crashed run still records
/// what it was doing.
void write_manifest(const exp::ExperimentConfig& cfg,
                    const std::filesystem::path& dir);

/// Writes fields.csv, loss.csv and summary.json (optionally plot_*.svg).
void export_fields(const exp::ExperimentReport& report,
                   const std::filesystem::path& dir, bool plots);

}  // namespace pinn::io
