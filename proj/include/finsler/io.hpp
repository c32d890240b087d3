#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/envelope.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/monotonicity.hpp"
#include "finsler/ray_transform.hpp"
#include "finsler/volume.hpp"

namespace finsler {

inline constexpr const char* kVersion = "0.1.0";

/// Fixed-width round-trippable double formatting; all CSV output goes
/// through here so reruns are byte-identical.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file " + path.string());
    out << text;
}

// ---- CSV writers ---------------------------------------------------------------

/// Geodesic trace: t, x, y, alpha1, alpha2.
inline std::string geodesic_csv(const Geodesic& g) {
    std::string s = "t,x,y,alpha1,alpha2\n";
    for (std::size_t k = 0; k < g.size(); ++k) {
        s += fmt_double(g.times[k]) + "," + fmt_double(g.positions[k].x) + "," +
             fmt_double(g.positions[k].y) + "," + fmt_double(g.momenta[k].x) + "," +
             fmt_double(g.momenta[k].y) + "\n";
    }
    return s;
}

/// Header row with grid metadata, then row-major values.
inline std::string bd_table_csv(const BoundaryDistanceTable& t) {
    std::string s = "# boundary-distance-table,N=" + std::to_string(t.N) +
                    ",radius=" + fmt_double(t.radius) + "\n";
    for (int i = 0; i < t.N; ++i) {
        for (int j = 0; j < t.N; ++j) {
            s += fmt_double(t.at(i, j));
            s += (j + 1 == t.N) ? '\n' : ',';
        }
    }
    return s;
}

inline nlohmann::json bd_table_json(const BoundaryDistanceTable& t) {
    return {{"kind", "boundary-distance-table"},
            {"n", t.N},
            {"radius", t.radius},
            {"values", t.values}};
}

inline std::string envelope_csv(const EnvelopingFunction& env) {
    std::string s = "# enveloping-function,M=" + std::to_string(env.M) +
                    ",rings=" + std::to_string(env.grid.rings) +
                    ",angles=" + std::to_string(env.grid.angles) +
                    ",delta=" + fmt_double(env.delta) + "\n";
    s += "m,node,F,dFdx1,dFdx2,dFdp\n";
    for (int mi = 0; mi < env.M; ++mi) {
        for (int node = 0; node < env.grid.node_count(); ++node) {
            const std::size_t at = env.index(mi, node);
            s += std::to_string(mi) + "," + std::to_string(node) + "," +
                 fmt_double(env.F[at]) + "," + fmt_double(env.dFdx[at].x) + "," +
                 fmt_double(env.dFdx[at].y) + "," + fmt_double(env.dFdp[at]) + "\n";
        }
    }
    return s;
}

inline nlohmann::json envelope_json(const EnvelopingFunction& env) {
    std::vector<double> dfdx;
    dfdx.reserve(env.dFdx.size() * 2);
    for (const Vec2& v : env.dFdx) {
        dfdx.push_back(v.x);
        dfdx.push_back(v.y);
    }
    return {{"kind", "enveloping-function"},
            {"m", env.M},
            {"rings", env.grid.rings},
            {"angles", env.grid.angles},
            {"delta", env.delta},
            {"max_distance_like_residual", env.max_distance_like_residual},
            {"values", env.F},
            {"dFdx", dfdx},
            {"dFdp", env.dFdp}};
}

inline nlohmann::json volume_json(const VolumeResult& r) {
    return {{"value", r.value},
            {"method", r.method},
            {"resolution_base", r.resolution_base},
            {"resolution_angular", r.resolution_angular},
            {"resolution_fiber", r.resolution_fiber},
            {"error_estimate", r.error_estimate}};
}

inline std::string sinogram_csv(const std::vector<RaySample>& rows) {
    std::string s = "a_index,b_index,T,I\n";
    for (const auto& r : rows) {
        s += std::to_string(r.a_index) + "," + std::to_string(r.b_index) + "," +
             fmt_double(r.length) + "," + fmt_double(r.value) + "\n";
    }
    return s;
}

inline nlohmann::json trial_json(const TrialRecord& r) {
    return {{"seed", r.seed},
            {"mode", r.mode},
            {"valid", r.valid},
            {"invalid_reason", r.invalid_reason},
            {"margin", r.margin},
            {"dvol", r.dvol},
            {"volumes", {{"fiber_base", r.vol_base}, {"fiber_perturbed", r.vol_pert}}},
            {"vol_error", r.vol_error},
            {"simple_base", r.simple_base},
            {"simple_perturbed", r.simple_pert}};
}

inline std::string trials_summary_csv(const std::vector<TrialRecord>& recs) {
    std::string s = "seed,mode,valid,margin,dvol,vol_base,vol_perturbed,vol_error\n";
    for (const auto& r : recs) {
        s += std::to_string(r.seed) + "," + r.mode + "," + (r.valid ? "1" : "0") + "," +
             fmt_double(r.margin) + "," + fmt_double(r.dvol) + "," + fmt_double(r.vol_base) +
             "," + fmt_double(r.vol_pert) + "," + fmt_double(r.vol_error) + "\n";
    }
    return s;
}

inline nlohmann::json probe_json(const SmoothnessProbe& p) {
    return {{"s", p.s},
            {"lambda", p.lambda},
            {"tau", p.tau},
            {"wx", p.wx},
            {"wy", p.wy},
            {"px", p.px},
            {"py", p.py},
            {"max_first_diff", p.max_first_diff},
            {"max_second_diff", p.max_second_diff},
            {"max_psi_second_diff", p.max_psi_second_diff},
            {"branch_ell", p.branch_ell},
            {"branch_gap", p.branch_gap}};
}

inline std::string probe_family_csv(const SmoothnessProbe& p) {
    std::string s = "s,lambda,tau,wx,wy,px,py,psi_bx,psi_by,psi_vx,psi_vy\n";
    for (std::size_t i = 0; i < p.s.size(); ++i) {
        s += fmt_double(p.s[i]) + "," + fmt_double(p.lambda[i]) + "," + fmt_double(p.tau[i]) +
             "," + fmt_double(p.wx[i]) + "," + fmt_double(p.wy[i]) + "," + fmt_double(p.px[i]) +
             "," + fmt_double(p.py[i]) + "," + fmt_double(p.psi_bx[i]) + "," +
             fmt_double(p.psi_by[i]) + "," + fmt_double(p.psi_vx[i]) + "," +
             fmt_double(p.psi_vy[i]) + "\n";
    }
    return s;
}

}  // namespace finsler
