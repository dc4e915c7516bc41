#include "v2x/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace v2x::cli {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// x,y,theta,v,omega for slot k >= 0; controls are empty at slot 0
std::string ego_columns(const TrialResult& t, std::size_t k) {
    const auto& s = t.ego[k];
    std::string out = num(s.x) + "," + num(s.y) + "," + num(s.theta) + ",";
    if (k == 0) return out + ",";
    const auto& u = t.controls[k - 1];
    return out + num(u.v) + "," + num(u.omega);
}

std::string triple(const NeighborPositions& p) { return num(p.lv) + "," + num(p.tv) + "," + num(p.fv); }

std::string triple(const std::array<double, 3>& a) { return num(a[0]) + "," + num(a[1]) + "," + num(a[2]); }

bool collides_at(const TrialResult& t, std::size_t k) {
    return t.collision_slot && static_cast<std::size_t>(*t.collision_slot) == k;
}

}  // namespace

void OutputSet::add(const std::string& name, std::string content) { files_[name] = std::move(content); }

void OutputSet::commit(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::pair<fs::path, fs::path>> staged;
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& [tmp, dst] : staged) fs::remove(tmp, ec);
    };
    try {
        for (const auto& [name, content] : files_) {
            const auto dst = dir / name;
            const auto tmp = dir / ("." + name + ".tmp");
            staged.emplace_back(tmp, dst);
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << content;
            out.close();
            if (!out) throw std::runtime_error("cannot write " + tmp.string());
        }
        for (const auto& [tmp, dst] : staged) fs::rename(tmp, dst);
    } catch (...) {
        cleanup();
        throw;
    }
}

std::string trace_csv(const std::vector<BcdIteration>& trace) {
    std::ostringstream out;
    out << "# schema=1\niteration,objective,tracking,regularizer,m_d\n";
    for (const auto& it : trace) {
        out << it.iteration << ',' << num(it.objective) << ',' << num(it.tracking) << ',' << num(it.regularizer)
            << ',' << num(it.m_d) << '\n';
    }
    return out.str();
}

std::string trial_trajectory_csv(const TrialResult& t, const ScenarioConfig&) {
    std::ostringstream out;
    out << "# schema=1\n"
           "slot,x,y,theta,v,omega,lv_x,tv_x,fv_x,lv_delivered,tv_delivered,fv_delivered,"
           "p_lv,p_tv,p_fv,pout_lv,pout_tv,pout_fv,m_d,collision\n";
    for (std::size_t k = 0; k < t.ego.size(); ++k) {
        out << k << ',' << ego_columns(t, k) << ',' << triple(t.truth[k]) << ',';
        if (k == 0) {
            out << ",,,,,,,,,,0\n";
            continue;
        }
        out << triple(t.delivered[k - 1]) << ',' << triple(t.power[k - 1]) << ',' << triple(t.outage[k - 1]) << ','
            << num(t.margin[k - 1]) << ',' << (collides_at(t, k) ? 1 : 0) << '\n';
    }
    return out.str();
}

// one block of trials.csv rows; the header is written by the caller
std::string trials_rows(int point, const std::string& sweep_key, std::optional<double> sweep_value, Policy policy,
                        const std::vector<TrialResult>& trials) {
    std::ostringstream out;
    const std::string prefix = std::to_string(point) + "," + sweep_key + "," +
                               (sweep_value ? num(*sweep_value) : std::string()) + "," +
                               std::string(to_string(policy)) + ",";
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        for (std::size_t k = 0; k < t.ego.size(); ++k) {
            out << prefix << i << ',' << t.seed << ',' << k << ',' << ego_columns(t, k) << ',' << triple(t.truth[k])
                << ',';
            if (k == 0) {
                out << ",,,,,,,0\n";
                continue;
            }
            out << triple(t.power[k - 1]) << ',' << triple(t.outage[k - 1]) << ',' << num(t.margin[k - 1]) << ','
                << (collides_at(t, k) ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace v2x::cli
