#include "v2x/cli.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace v2x::cli {

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error(line > 0 ? key + " (line " + std::to_string(line) + "): " + message : key + ": " + message),
      key_(std::move(key)),
      line_(line) {}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

// A mapping section whose keys are consumed one by one; whatever is left
// over is unknown.
class Section {
public:
    Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, line_of(node_), "expected a mapping");
    }

    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node take(const std::string& key) {
        seen_.insert(key);
        static const YAML::Node empty(YAML::NodeType::Map);
        if (!node_ || !node_.IsMap()) return empty[key];
        const YAML::Node& map = node_;
        return map[key];
    }

    bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

    template <typename T>
    void read(const std::string& key, T& out) {
        const auto n = take(key);
        if (!n) return;
        try {
            out = n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path(key), line_of(n), "wrong type");
        }
        if constexpr (std::is_floating_point_v<T>) {
            if (!std::isfinite(out)) throw ConfigError(path(key), line_of(n), "must be finite");
        }
    }

    void read_point(const std::string& key, Eigen::Vector2d& out) {
        const auto n = take(key);
        if (!n) return;
        if (!n.IsSequence() || n.size() != 2) throw ConfigError(path(key), line_of(n), "expected [x, y]");
        try {
            out = {n[0].as<double>(), n[1].as<double>()};
        } catch (const YAML::Exception&) {
            throw ConfigError(path(key), line_of(n), "wrong type");
        }
    }

    // [a, b] is diag(a, b); [[a, b], [c, d]] is the full matrix
    void read_matrix(const std::string& key, Eigen::Matrix2d& out) {
        const auto n = take(key);
        if (!n) return;
        try {
            if (n.IsSequence() && n.size() == 2 && n[0].IsScalar()) {
                out = Eigen::Vector2d(n[0].as<double>(), n[1].as<double>()).asDiagonal();
                return;
            }
            if (n.IsSequence() && n.size() == 2 && n[0].IsSequence() && n[0].size() == 2 && n[1].size() == 2) {
                out << n[0][0].as<double>(), n[0][1].as<double>(), n[1][0].as<double>(), n[1][1].as<double>();
                return;
            }
        } catch (const YAML::Exception&) {
        }
        throw ConfigError(path(key), line_of(n), "expected [a, b] or [[a, b], [c, d]]");
    }

    // watts either directly or through a KEY_dbm entry
    void read_watts(const std::string& key, double& out) {
        const bool plain = has(key), dbm = has(key + "_dbm");
        if (plain && dbm) {
            throw ConfigError(path(key + "_dbm"), line_of(node_[key + "_dbm"]), "give either " + key + " or " + key + "_dbm");
        }
        if (dbm) {
            double v = 0.0;
            read(key + "_dbm", v);
            out = dbm_to_watts(v);
        } else {
            read(key, out);
        }
        seen_.insert(key);
        seen_.insert(key + "_dbm");
    }

    void finish() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ConfigError(path(key), line_of(kv.first), "unknown key");
        }
    }

    int line() const { return node_ ? line_of(node_) : 0; }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
void guarded(const std::string& path, int line, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, line, e.what());
    }
}

void read_scenario(Section s, ScenarioConfig& c) {
    s.read("lane_width", c.lane_width);
    s.read_point("ego_start", c.ego_start);
    s.read_point("lv_start", c.lv_start);
    s.read_point("tv_start", c.tv_start);
    s.read_point("fv_start", c.fv_start);
    s.read("ego_speed_kmh", c.ego_speed_kmh);
    s.read("lv_speed_kmh", c.lv_speed_kmh);
    s.read("tv_speed_kmh", c.tv_speed_kmh);
    s.read("fv_speed_kmh", c.fv_speed_kmh);
    s.read("accel", c.accel);
    s.read("predict_acceleration", c.predict_acceleration);
    s.read("horizon", c.horizon);
    s.read("dt", c.dt);
    s.read("safety_distance", c.safety_distance);
    s.read("collision_distance", c.collision_distance);
    s.read("rho", c.rho);
    s.read("v_min", c.bounds.v_min);
    s.read("v_max", c.bounds.v_max);
    s.read("omega_min", c.bounds.omega_min);
    s.read("omega_max", c.bounds.omega_max);
    s.read_matrix("w_track", c.w_track);
    s.read_matrix("w_control", c.w_control);
    s.read("turn_start_slot", c.turn_start_slot);
    s.read("turn_end_slot", c.turn_end_slot);
    s.read("trials", c.trials);
    s.read("seed", c.seed);

    auto enum_key = [&](const std::string& key, auto parse, auto& out) {
        const auto n = s.take(key);
        if (!n) return;
        const auto text = n.as<std::string>();
        const auto v = parse(text);
        if (!v) throw ConfigError(s.path(key), line_of(n), "unknown value '" + text + "'");
        out = *v;
    };
    enum_key("policy", parse_policy, c.policy);
    enum_key("mode", parse_mode, c.mode);
    enum_key("error_mode", parse_error_mode, c.error_mode);
    s.finish();
}

void read_channel(Section s, ScenarioConfig& c) {
    auto& ch = c.channel;
    s.read("beta", ch.beta);
    s.read("rate", ch.rate);
    s.read("tau0", ch.tau0);
    s.read("t_comp", ch.t_comp);
    s.read_watts("budget", c.budget);

    const bool density = s.has("noise_density_dbm_per_hz");
    if (density) {
        if (s.has("sigma_sq") || s.has("sigma_sq_dbm")) {
            throw ConfigError(s.path("noise_density_dbm_per_hz"), s.line(), "give either sigma_sq or a noise density");
        }
        double dens = 0.0, bw = 10e6;
        s.read("noise_density_dbm_per_hz", dens);
        s.read("bandwidth_hz", bw);
        guarded(s.path("bandwidth_hz"), s.line(), [&] { ch.sigma_sq = noise_power_watts(dens, bw); });
    } else {
        s.read_watts("sigma_sq", ch.sigma_sq);
        if (s.has("bandwidth_hz")) {
            throw ConfigError(s.path("bandwidth_hz"), s.line(), "bandwidth_hz needs noise_density_dbm_per_hz");
        }
    }

    // an explicit mu_sq switches calibration off unless target_outage is also given
    const bool explicit_gain = s.has("mu_sq");
    s.read("mu_sq", ch.mu_sq);
    if (s.has("target_outage")) {
        const auto n = s.take("target_outage");
        if (n.IsNull()) {
            c.target_outage.reset();
        } else {
            double v = 0.0;
            s.read("target_outage", v);
            c.target_outage = v;
        }
    } else if (explicit_gain) {
        c.target_outage.reset();
    }
    s.take("target_outage");
    s.finish();
}

void read_solver(Section s, SolverConfig& c) {
    s.read("bcd_max_iter", c.bcd_max_iter);
    s.read("bcd_tol", c.bcd_tol);
    s.read("relinearization_step", c.relinearization_step);
    s.read("barrier_t0", c.barrier_t0);
    s.read("barrier_mu", c.barrier_mu);
    s.read("barrier_eps", c.barrier_eps);
    s.read("newton_tol", c.newton_tol);
    s.read("newton_max_iter", c.newton_max_iter);
    s.read("pg_max_iter", c.pg_max_iter);
    s.read("pg_tol", c.pg_tol);
    s.read("armijo_initial", c.armijo_initial);
    s.read("armijo_sigma", c.armijo_sigma);
    s.read("armijo_shrink", c.armijo_shrink);
    s.read("armijo_max_backtracks", c.armijo_max_backtracks);
    s.read("md_floor", c.md_floor);
    s.read("md_report_floor", c.md_report_floor);
    s.read("bisection_tol", c.bisection_tol);
    s.read("parallel_power_block", c.parallel_power_block);
    s.finish();
}

void read_output(Section s, RunConfig& c) {
    std::string dir = c.out_dir.string();
    s.read("dir", dir);
    c.out_dir = dir;
    s.read("jobs", c.jobs);
    s.finish();
}

}  // namespace

RunConfig load_config_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("<document>", e.mark.line + 1, e.msg);
    }
    RunConfig config;
    Section top(root, "");
    read_scenario(Section(top.take("scenario"), "scenario"), config.scenario);
    read_channel(Section(top.take("channel"), "channel"), config.scenario);
    read_solver(Section(top.take("solver"), "solver"), config.solver);
    read_output(Section(top.take("output"), "output"), config);
    top.finish();

    // validation messages start with the offending key; point at it when the document has it
    auto validate = [&](const std::string& section, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            std::string key = msg.substr(0, msg.find(' '));
            if (key.find('.') == std::string::npos) key = section + "." + key;
            const auto dot = key.find('.');
            const YAML::Node& doc = root;
            const bool located = doc.IsMap() && doc[key.substr(0, dot)] && doc[key.substr(0, dot)].IsMap() &&
                                 doc[key.substr(0, dot)][key.substr(dot + 1)];
            if (!located) throw ConfigError(section, line_of(root), msg);
            throw ConfigError(key, line_of(doc[key.substr(0, dot)][key.substr(dot + 1)]), msg);
        }
    };
    validate("scenario", [&] { config.scenario.validate(); });
    validate("solver", [&] { config.solver.validate(); });
    const int line = line_of(root);
    if (config.jobs < 0) throw ConfigError("output.jobs", line, "must be >= 0");
    return config;
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", 0, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str());
}

Sweep parse_sweep(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("--sweep", 0, "expected KEY=A:B:STEP");
    Sweep sw;
    sw.key = text.substr(0, eq);
    static const std::set<std::string> keys{"beta", "lv-speed", "tv-speed", "fv-speed",
                                            "accel", "budget-dbm", "target-outage"};
    if (!keys.count(sw.key)) throw ConfigError("--sweep", 0, "unknown sweep key '" + sw.key + "'");
    std::vector<double> parts;
    std::stringstream ss(text.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--sweep", 0, "bad number '" + item + "'");
        }
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
        throw ConfigError("--sweep", 0, "expected A:B:STEP with A <= B and STEP > 0");
    }
    const double a = parts[0], b = parts[1], step = parts[2];
    const auto count = static_cast<int>(std::floor((b - a) / step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) sw.values.push_back(a + i * step);
    return sw;
}

void apply_sweep(ScenarioConfig& s, const std::string& key, double value) {
    if (key == "beta") {
        s.channel.beta = value;
    } else if (key == "lv-speed") {
        s.lv_speed_kmh = value;
    } else if (key == "tv-speed") {
        s.tv_speed_kmh = value;
    } else if (key == "fv-speed") {
        s.fv_speed_kmh = value;
    } else if (key == "accel") {
        s.accel = value;
    } else if (key == "budget-dbm") {
        s.budget = dbm_to_watts(value);
    } else if (key == "target-outage") {
        s.target_outage = value;
    } else {
        throw ConfigError("--sweep", 0, "unknown sweep key '" + key + "'");
    }
    guarded("--sweep", 0, [&] { s.validate(); });
}

std::vector<Policy> parse_policy_list(const std::string& text) {
    std::vector<Policy> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto p = parse_policy(item);
        if (!p) throw ConfigError("--compare", 0, "unknown policy '" + item + "'");
        out.push_back(*p);
    }
    if (out.empty()) throw ConfigError("--compare", 0, "empty policy list");
    return out;
}

void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.seed) c.scenario.seed = *o.seed;
    if (o.trials) {
        if (*o.trials < 1) throw ConfigError("--trials", 0, "must be >= 1");
        c.scenario.trials = *o.trials;
    }
    if (o.policy) {
        const auto p = parse_policy(*o.policy);
        if (!p) throw ConfigError("--policy", 0, "unknown policy '" + *o.policy + "'");
        c.scenario.policy = *p;
    }
    if (o.mode) {
        const auto m = parse_mode(*o.mode);
        if (!m) throw ConfigError("--mode", 0, "expected oneshot or receding");
        c.scenario.mode = *m;
    }
    if (o.jobs) {
        if (*o.jobs < 0) throw ConfigError("--jobs", 0, "must be >= 0");
        c.jobs = *o.jobs;
    }
    if (o.out) c.out_dir = *o.out;
}

nlohmann::json Overrides::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (seed) j["seed"] = *seed;
    if (trials) j["trials"] = *trials;
    if (policy) j["policy"] = *policy;
    if (compare) j["compare"] = *compare;
    if (sweep) j["sweep"] = *sweep;
    if (jobs) j["jobs"] = *jobs;
    if (out) j["out"] = *out;
    if (mode) j["mode"] = *mode;
    return j;
}

nlohmann::json to_json(const RunConfig& config) {
    const auto& s = config.scenario;
    const auto& ch = s.channel;
    const auto& v = config.solver;
    auto point = [](const Eigen::Vector2d& p) { return nlohmann::json::array({p.x(), p.y()}); };
    auto matrix = [](const Eigen::Matrix2d& m) {
        return nlohmann::json::array({{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}});
    };
    nlohmann::json j;
    j["scenario"] = {
        {"lane_width", s.lane_width},
        {"ego_start", point(s.ego_start)},
        {"lv_start", point(s.lv_start)},
        {"tv_start", point(s.tv_start)},
        {"fv_start", point(s.fv_start)},
        {"ego_speed_kmh", s.ego_speed_kmh},
        {"lv_speed_kmh", s.lv_speed_kmh},
        {"tv_speed_kmh", s.tv_speed_kmh},
        {"fv_speed_kmh", s.fv_speed_kmh},
        {"accel", s.accel},
        {"predict_acceleration", s.predict_acceleration},
        {"horizon", s.horizon},
        {"dt", s.dt},
        {"safety_distance", s.safety_distance},
        {"collision_distance", s.collision_distance},
        {"rho", s.rho},
        {"v_min", s.bounds.v_min},
        {"v_max", s.bounds.v_max},
        {"omega_min", s.bounds.omega_min},
        {"omega_max", s.bounds.omega_max},
        {"w_track", matrix(s.w_track)},
        {"w_control", matrix(s.w_control)},
        {"turn_start_slot", s.turn_start_slot},
        {"turn_end_slot", s.turn_end_slot},
        {"trials", s.trials},
        {"seed", s.seed},
        {"policy", std::string(to_string(s.policy))},
        {"mode", std::string(to_string(s.mode))},
        {"error_mode", std::string(to_string(s.error_mode))},
    };
    j["channel"] = {
        {"beta", ch.beta},
        {"mu_sq", ch.mu_sq},
        {"sigma_sq", ch.sigma_sq},
        {"rate", ch.rate},
        {"tau0", ch.tau0},
        {"t_comp", ch.t_comp},
        {"budget", s.budget},
        {"target_outage", s.target_outage ? nlohmann::json(*s.target_outage) : nlohmann::json(nullptr)},
    };
    j["solver"] = {
        {"bcd_max_iter", v.bcd_max_iter},
        {"bcd_tol", v.bcd_tol},
        {"relinearization_step", v.relinearization_step},
        {"barrier_t0", v.barrier_t0},
        {"barrier_mu", v.barrier_mu},
        {"barrier_eps", v.barrier_eps},
        {"newton_tol", v.newton_tol},
        {"newton_max_iter", v.newton_max_iter},
        {"pg_max_iter", v.pg_max_iter},
        {"pg_tol", v.pg_tol},
        {"armijo_initial", v.armijo_initial},
        {"armijo_sigma", v.armijo_sigma},
        {"armijo_shrink", v.armijo_shrink},
        {"armijo_max_backtracks", v.armijo_max_backtracks},
        {"md_floor", v.md_floor},
        {"md_report_floor", v.md_report_floor},
        {"bisection_tol", v.bisection_tol},
        {"parallel_power_block", v.parallel_power_block},
    };
    j["output"] = {{"dir", config.out_dir.string()}, {"jobs", config.jobs}};
    return j;
}

}  // namespace v2x::cli
