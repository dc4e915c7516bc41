#pragma once

// Command-line front end: configuration loading, the solve / trial /
// montecarlo commands and their CSV and JSON artifacts.
//
// Output schemas (every CSV starts with a "# schema=1" line):
//   trace.csv       iteration,objective,tracking,regularizer,m_d
//   trajectory.csv  slot,x,y,theta,v,omega,lv_x,tv_x,fv_x,lv_delivered,tv_delivered,fv_delivered,
//                   p_lv,p_tv,p_fv,pout_lv,pout_tv,pout_fv,m_d,collision
//   trials.csv      point,sweep_key,sweep_value,policy,trial,seed,slot,x,y,theta,v,omega,
//                   lv_x,tv_x,fv_x,p_lv,p_tv,p_fv,pout_lv,pout_tv,pout_fv,m_d,collision
// Slot 0 rows of trajectory.csv carry the initial state; slot-specific
// columns are empty there. The collision column is 1 only on the first
// colliding slot.

#include "v2x/bcd_solver.hpp"
#include "v2x/lane_change_sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace v2x::cli {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& message);

    const std::string& key() const { return key_; }
    int line() const { return line_; }  // 1-based, 0 when unknown

private:
    std::string key_;
    int line_;
};

struct Sweep {
    std::string key;  // beta, lv-speed, tv-speed, fv-speed, accel, budget-dbm, target-outage
    std::vector<double> values;
};

/// Parses KEY=A:B:STEP with an inclusive upper end.
Sweep parse_sweep(const std::string& text);

/// Applies one sweep value to a scenario.
void apply_sweep(ScenarioConfig& scenario, const std::string& key, double value);

struct RunConfig {
    ScenarioConfig scenario;
    SolverConfig solver;
    std::filesystem::path out_dir = "out";
    int jobs = 0;  // 0 = available parallelism
};

/// Loads a YAML document. Unknown keys, wrong types and invalid values raise
/// ConfigError with the key path and line.
RunConfig load_config_text(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<std::string> policy;
    std::optional<std::string> compare;
    std::optional<std::string> sweep;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::optional<std::string> mode;

    nlohmann::json to_json() const;
};

/// Applies command-line overrides on top of a loaded configuration.
void apply_overrides(RunConfig& config, const Overrides& o);

/// Policies named by a comma-separated list.
std::vector<Policy> parse_policy_list(const std::string& text);

/// Files staged in memory and published together: each is written to a
/// temporary sibling and renamed into place only after all writes succeed.
class OutputSet {
public:
    void add(const std::string& name, std::string content);
    void commit(const std::filesystem::path& dir) const;
    const std::map<std::string, std::string>& files() const { return files_; }

private:
    std::map<std::string, std::string> files_;
};

std::string trace_csv(const std::vector<BcdIteration>& trace);
std::string trial_trajectory_csv(const TrialResult& trial, const ScenarioConfig& config);

inline constexpr const char* kTrialsHeader =
    "# schema=1\npoint,sweep_key,sweep_value,policy,trial,seed,slot,x,y,theta,v,omega,"
    "lv_x,tv_x,fv_x,p_lv,p_tv,p_fv,pout_lv,pout_tv,pout_fv,m_d,collision\n";

/// trials.csv rows for one (sweep point, policy) block.
std::string trials_rows(int point, const std::string& sweep_key, std::optional<double> sweep_value, Policy policy,
                        const std::vector<TrialResult>& trials);

/// The decision-0 plan of a trial, laid out as a trial that executes it open loop.
TrialResult plan_as_trial(const Scenario& scenario, const Decision& decision, const BcdResult& bcd,
                          std::uint64_t seed);

// Commands return the process exit code. Errors are reported as a JSON
// object on stderr and leave no files behind.
int cmd_solve(const RunConfig& config, const Overrides& o);
int cmd_trial(const RunConfig& config, const Overrides& o);
int cmd_montecarlo(const RunConfig& config, const Overrides& o);

/// Full command-line entry point.
int run(int argc, char** argv);

}  // namespace v2x::cli
