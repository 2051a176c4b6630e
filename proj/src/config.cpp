#include "fieldloc/config.hpp"

#include <charconv>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

namespace {

using Setter = std::function<void(Config&, std::string_view)>;

struct Key {
    Setter set;
    std::string (*show)(const Config&);
};

// Shortest text that parses back to the same double.
std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

double num(std::string_view v) { return text::parse_double(v, "value"); }
int integer(std::string_view v) { return static_cast<int>(text::parse_int(v, "value")); }

bool flag(std::string_view v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw FormatError("expected true/false, got '" + std::string(v) + "'");
}

GpsMode gps_mode(std::string_view v) {
    const auto m = parse_gps_mode(v);
    if (!m) throw FormatError("expected RTK or PPP, got '" + std::string(v) + "'");
    return *m;
}

#define FL_NUM(name, field)                                            \
    {                                                                  \
        name, Key {                                                    \
            [](Config& c, std::string_view v) { c.field = num(v); },   \
                [](const Config& c) { return shortest(c.field); }       \
        }                                                              \
    }
#define FL_INT(name, field)                                              \
    {                                                                    \
        name, Key {                                                      \
            [](Config& c, std::string_view v) { c.field = integer(v); }, \
                [](const Config& c) { return std::to_string(c.field); }  \
        }                                                                \
    }

const std::map<std::string, Key, std::less<>>& keys() {
    static const std::map<std::string, Key, std::less<>> k = {
        FL_NUM("step_wo", pipeline.step_wo),
        {"window", Key{[](Config& c, std::string_view v) { c.pipeline.window = flag(v); },
                       [](const Config& c) { return std::string(c.pipeline.window ? "true" : "false"); }}},
        FL_INT("w_min", pipeline.w_min),
        {"cues", Key{[](Config& c, std::string_view v) { c.pipeline.cues = CueMask::parse(v); },
                     [](const Config& c) { return c.pipeline.cues.str(); }}},
        FL_NUM("lambda_vo_r", pipeline.weights.lambda_vo_r),
        FL_NUM("lambda_vo_t", pipeline.weights.lambda_vo_t),
        FL_NUM("lambda_mrf", pipeline.weights.lambda_mrf),
        FL_NUM("w_dem_z", pipeline.weights.w_dem_z),
        FL_NUM("vo_fail_threshold", pipeline.weights.vo_fail_threshold),
        FL_NUM("vo_fail_scale", pipeline.weights.vo_fail_scale),
        FL_NUM("mrf_radius_factor", pipeline.mrf.radius_factor),
        FL_INT("mrf_temporal_exclusion", pipeline.mrf.temporal_exclusion),
        FL_INT("max_iterations", pipeline.solver.max_iterations),
        FL_NUM("chi2_rel_tol", pipeline.solver.chi2_rel_tol),
        FL_NUM("step_tol", pipeline.solver.step_tol),
        FL_NUM("lm_lambda_init", pipeline.solver.lm_lambda_init),
        FL_NUM("lm_lambda_factor", pipeline.solver.lm_lambda_factor),
        FL_NUM("jacobian_eps", pipeline.solver.jacobian_eps),
        {"analytic_jacobians",
         Key{[](Config& c, std::string_view v) { c.pipeline.solver.analytic_fast_paths = flag(v); },
             [](const Config& c) { return std::string(c.pipeline.solver.analytic_fast_paths ? "true" : "false"); }}},
        FL_INT("rows", field.rows),
        FL_NUM("row_length", field.row_length),
        {"row_spacing", Key{[](Config& c, std::string_view v) { c.field.row_spacing = c.pipeline.mrf.row_spacing = num(v); },
                            [](const Config& c) { return shortest(c.field.row_spacing); }}},
        FL_NUM("amplitude", field.amplitude),
        FL_NUM("wavelength_1", field.wavelength_1),
        FL_NUM("wavelength_2", field.wavelength_2),
        FL_NUM("slope_x", field.slope_x),
        FL_NUM("slope_y", field.slope_y),
        FL_NUM("speed", field.speed),
        FL_NUM("dem_spacing", field.dem_spacing),
        {"steering", Key{[](Config& c, std::string_view v) {
                             const auto m = parse_steering_mode(v);
                             if (!m) throw FormatError("expected SERPENTINE or SAME_HEADING");
                             c.field.mode = *m;
                         },
                         [](const Config& c) { return std::string(to_string(c.field.mode)); }}},
        {"seed", Key{[](Config& c, std::string_view v) {
                         const long long s = text::parse_int(v, "seed");
                         if (s < 0) throw FormatError("seed must be non-negative");
                         c.field.seed = static_cast<std::uint64_t>(s);
                     },
                     [](const Config& c) { return std::to_string(c.field.seed); }}},
        FL_NUM("wo_sigma_t", noise.wo_sigma_t),
        FL_NUM("wo_sigma_yaw", noise.wo_sigma_yaw),
        FL_NUM("vo_sigma_xy", noise.vo_sigma_xy),
        FL_NUM("vo_sigma_z", noise.vo_sigma_z),
        FL_NUM("vo_sigma_r", noise.vo_sigma_r),
        FL_NUM("vo_fail_rate", noise.vo_fail_rate),
        FL_NUM("vo_fail_magnitude", noise.vo_fail_magnitude),
        FL_NUM("vo_fail_duration", noise.vo_fail_duration),
        FL_NUM("lid_sigma_t", noise.lid_sigma_t),
        FL_NUM("lid_sigma_r", noise.lid_sigma_r),
        FL_NUM("imu_sigma", noise.imu_sigma),
        FL_NUM("rtk_sigma_xy", noise.rtk_sigma_xy),
        FL_NUM("rtk_sigma_z", noise.rtk_sigma_z),
        FL_NUM("ppp_sigma_xy", noise.ppp_sigma_xy),
        FL_NUM("ppp_sigma_z", noise.ppp_sigma_z),
        {"gps_mode", Key{[](Config& c, std::string_view v) { c.noise.gps_mode = gps_mode(v); },
                         [](const Config& c) { return std::string(to_string(c.noise.gps_mode)); }}},
        {"outage", Key{[](Config& c, std::string_view v) {
                           std::istringstream s{std::string(v)};
                           std::string a, b, m, extra;
                           if (!(s >> a >> b >> m) || (s >> extra)) {
                               throw FormatError("outage needs '<t_start> <t_end> <RTK|PPP>'");
                           }
                           c.noise.outages.push_back({num(a), num(b), gps_mode(m)});
                       },
                       [](const Config&) { return std::string(); }}},
    };
    return k;
}

#undef FL_NUM
#undef FL_INT

std::string_view trim(std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
}

}  // namespace

Config parse_config(std::istream& in, std::ostream* warn) {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (const size_t hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = trim(v);
        if (v.empty()) continue;
        const std::string where = "config line " + std::to_string(lineno);
        const size_t eq = v.find('=');
        if (eq == std::string_view::npos) throw FormatError(where + ": expected 'key = value'");
        const std::string_view key = trim(v.substr(0, eq));
        const std::string_view value = trim(v.substr(eq + 1));
        if (key.empty() || value.empty()) throw FormatError(where + ": expected 'key = value'");
        const auto it = keys().find(key);
        if (it == keys().end()) {
            if (warn) *warn << "warning: " << where << ": unknown key '" << key << "' ignored\n";
            continue;
        }
        try {
            it->second.set(c, value);
        } catch (const Error& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    c.pipeline.validate();
    c.field.validate();
    c.noise.validate();
    return c;
}

Config load_config(const std::string& path, std::ostream* warn) {
    auto in = text::open_in(path);
    return parse_config(in, warn);
}

std::string config_reference() {
    const Config defaults;
    std::string out;
    for (const auto& [name, key] : keys()) {
        if (name == "outage") {
            out += "  # outage = <t_start> <t_end> <RTK|PPP>   (repeatable, none by default)\n";
            continue;
        }
        out += "  " + name + " = " + key.show(defaults) + "\n";
    }
    return out;
}

}  // namespace fieldloc
