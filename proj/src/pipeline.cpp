#include "fieldloc/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "fieldloc/errors.hpp"

namespace fieldloc {

// Cue masks ---------------------------------------------------------------------

CueMask CueMask::all() {
    CueMask m;
    m.bits_.fill(true);
    return m;
}

CueMask CueMask::parse(std::string_view s) {
    auto trim = [](std::string_view v) {
        while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
        while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
        return v;
    };
    s = trim(s);
    if (s == "ALL") return all();
    if (s.empty()) throw InvalidArgument("empty cue mask");
    CueMask m;
    while (true) {
        const size_t plus = s.find('+');
        const std::string_view name = trim(s.substr(0, plus));
        if (name == "ALL") {
            m = all();
        } else {
            const auto k = parse_factor_kind(name);
            if (!k) throw InvalidArgument("unknown cue '" + std::string(name) + "'");
            m.set(*k);
        }
        if (plus == std::string_view::npos) break;
        s.remove_prefix(plus + 1);
    }
    return m;
}

std::string CueMask::str() const {
    if (*this == all()) return "ALL";
    std::string out;
    for (FactorKind k : kAllFactorKinds) {
        if (!has(k)) continue;
        if (!out.empty()) out += '+';
        out += to_string(k);
    }
    return out.empty() ? "NONE" : out;
}

std::vector<CueMask> parse_mask_list(std::string_view s) {
    std::vector<CueMask> out;
    while (true) {
        const size_t semi = s.find(';');
        out.push_back(CueMask::parse(s.substr(0, semi)));
        if (semi == std::string_view::npos) break;
        s.remove_prefix(semi + 1);
    }
    return out;
}

void PipelineConfig::validate() const {
    if (!(step_wo > 0.0) || !std::isfinite(step_wo)) throw InvalidArgument("step_wo must be positive");
    if (w_min < 1) throw InvalidArgument("w_min must be at least 1");
    if (!(mrf.row_spacing > 0.0) || !(mrf.radius_factor > 0.0) || mrf.temporal_exclusion < 0) {
        throw InvalidArgument("MRF search settings must be positive");
    }
    weights.validate();
    solver.validate();
}

// Synchronization --------------------------------------------------------------

namespace {

struct Bracket {
    size_t lo = 0;
    size_t hi = 0;
    double alpha = 0.0;
    size_t nearest = 0;
};

template <typename T>
std::optional<Bracket> bracket(const std::vector<T>& v, double stamp) {
    if (v.empty() || stamp < v.front().stamp || stamp > v.back().stamp) return std::nullopt;
    auto it = std::lower_bound(v.begin(), v.end(), stamp, [](const T& x, double s) { return x.stamp < s; });
    const size_t idx = static_cast<size_t>(it - v.begin());
    if (v[idx].stamp == stamp) return Bracket{idx, idx, 0.0, idx};
    Bracket b;
    b.lo = idx - 1;
    b.hi = idx;
    b.alpha = (stamp - v[b.lo].stamp) / (v[b.hi].stamp - v[b.lo].stamp);
    b.nearest = (stamp - v[b.lo].stamp <= v[b.hi].stamp - stamp) ? b.lo : b.hi;
    return b;
}

Pose6D interp(const std::vector<Pose6D>& track, const Bracket& b) {
    if (b.lo == b.hi) return track[b.lo];
    return interp_pose(track[b.lo], track[b.hi], b.alpha);
}

double lerp_at(const std::vector<double>& v, const Bracket& b) {
    return b.lo == b.hi ? v[b.lo] : std::lerp(v[b.lo], v[b.hi], b.alpha);
}

Pose6D planar_pose(const Eigen::Vector3d& d) {
    return {Eigen::Vector3d(d.x(), d.y(), 0.0), Eigen::Vector3d(0.0, 0.0, wrap_angle(d.z()))};
}

std::vector<Pose6D> integrate(const std::vector<RelReading>& v) {
    std::vector<Pose6D> cum;
    cum.reserve(v.size());
    Transform acc = Transform::Identity();
    for (size_t k = 0; k < v.size(); ++k) {
        if (k > 0) acc = compose(acc, to_transform(v[k].delta));
        cum.push_back(to_pose(acc));
    }
    return cum;
}

std::optional<RelSample> rel_sample(const std::vector<RelReading>& v, const std::vector<Pose6D>& cum, double stamp) {
    const auto b = bracket(v, stamp);
    if (!b) return std::nullopt;
    RelSample s;
    s.cumulative = interp(cum, *b);
    s.cov = v[b->nearest].cov;
    const size_t n = b->nearest;
    if (n > 0) {
        s.reading_dt = v[n].stamp - v[n - 1].stamp;
    } else if (v.size() > 1) {
        s.reading_dt = v[1].stamp - v[0].stamp;
    }
    return s;
}

}  // namespace

Synchronizer::Synchronizer(const SensorLog& log) : log_(log) {
    log.validate();
    Transform acc = Transform::Identity();
    double travel = 0.0, turned = 0.0;
    for (size_t k = 0; k < log.wo.size(); ++k) {
        if (k > 0) {
            const Eigen::Vector3d& d = log.wo[k].delta;
            acc = compose(acc, to_transform(planar_pose(d)));
            travel += d.head<2>().norm();
            turned += std::abs(d.z());
        }
        wo_cum_.push_back(to_pose(acc));
        wo_travel_.push_back(travel);
        wo_turned_.push_back(turned);
    }
    vo_cum_ = integrate(log.vo);
    lid_cum_ = integrate(log.lid);
}

Readings Synchronizer::at(double stamp) const {
    Readings r;
    r.stamp = stamp;
    if (const auto b = bracket(log_.wo, stamp)) {
        WoSample s;
        s.cumulative = interp(wo_cum_, *b);
        s.travel = lerp_at(wo_travel_, *b);
        s.turned = lerp_at(wo_turned_, *b);
        s.cov = log_.wo[b->nearest].cov;
        r.wo = s;
    }
    r.vo = rel_sample(log_.vo, vo_cum_, stamp);
    r.lid = rel_sample(log_.lid, lid_cum_, stamp);
    if (const auto b = bracket(log_.gps, stamp)) {
        GpsSample s;
        const auto& lo = log_.gps[b->lo];
        const auto& hi = log_.gps[b->hi];
        if (b->lo == b->hi) {
            s.position = lo.position;
        } else {
            for (int k = 0; k < 3; ++k) s.position[k] = std::lerp(lo.position[k], hi.position[k], b->alpha);
        }
        s.cov = log_.gps[b->nearest].cov;
        s.mode = log_.gps[b->nearest].mode;
        r.gps = s;
    }
    if (const auto b = bracket(log_.imu, stamp)) {
        ImuSample s;
        const auto& lo = log_.imu[b->lo];
        const auto& hi = log_.imu[b->hi];
        s.roll = lo.roll;
        s.pitch = lo.pitch;
        if (b->lo != b->hi) {
            s.roll = wrap_angle(lo.roll + b->alpha * wrap_angle(hi.roll - lo.roll));
            s.pitch = wrap_angle(lo.pitch + b->alpha * wrap_angle(hi.pitch - lo.pitch));
        }
        s.cov = log_.imu[b->nearest].cov;
        r.imu = s;
    }
    if (const auto b = bracket(log_.rows, stamp)) r.row = log_.rows[b->nearest].row;
    return r;
}

Readings synchronize(const SensorLog& log, double stamp) { return Synchronizer(log).at(stamp); }

std::vector<double> trigger_nodes(const SensorLog& log, const PipelineConfig& cfg) {
    if (log.wo.empty()) throw InvalidArgument("trigger_nodes: empty WO stream");
    std::vector<double> stamps{log.wo.front().stamp};
    double acc = 0.0;
    for (size_t k = 1; k < log.wo.size(); ++k) {
        acc += log.wo[k].delta.head<2>().norm();
        if (acc >= cfg.step_wo - 1e-9) {
            stamps.push_back(log.wo[k].stamp);
            acc = 0.0;
        }
    }
    return stamps;
}

Pose6D wo_delta(const WoSample& a, const WoSample& b) {
    return to_pose(relative(to_transform(a.cumulative), to_transform(b.cumulative)));
}

Pose6D rel_delta(const RelSample& a, const RelSample& b) {
    return to_pose(relative(to_transform(a.cumulative), to_transform(b.cumulative)));
}

Pose6D dead_reckon(const Pose6D& prev, const Readings& a, const Readings& b) {
    Pose6D d;
    if (a.wo && b.wo) {
        d = wo_delta(*a.wo, *b.wo);
    } else if (a.vo && b.vo) {
        d = rel_delta(*a.vo, *b.vo);
    } else {
        return prev;
    }
    Transform X = compose(to_transform(prev), to_transform(d));
    if (b.imu) {
        const double yaw = to_rpy(X.linear())[2];
        X.linear() = from_rpy(b.imu->roll, b.imu->pitch, yaw);
    }
    return to_pose(X);
}

Pose6D initial_state(const Readings& r, const SensorLog& log) {
    Pose6D p;
    if (r.gps) {
        p.t = r.gps->position;
    } else if (!log.gps.empty()) {
        p.t = log.gps.front().position;
    }
    double roll = 0.0, pitch = 0.0;
    if (r.imu) {
        roll = r.imu->roll;
        pitch = r.imu->pitch;
    } else if (!log.imu.empty()) {
        roll = log.imu.front().roll;
        pitch = log.imu.front().pitch;
    }
    p.r = so3_log(from_rpy(roll, pitch, 0.0));
    return p;
}

std::vector<Factor> assemble_node(PoseGraph& g, int id, const Readings* prev, const Readings& cur,
                                  const PipelineConfig& cfg, const DemGrid* dem) {
    std::vector<Factor> added;
    auto add = [&](Factor f) {
        added.push_back(f);
        g.add_factor(std::move(f));
    };
    const CueMask& m = cfg.cues;
    if (prev && id > 0) {
        const int i = id - 1;
        const double dt_nodes = cur.stamp - prev->stamp;
        const bool have_wo = prev->wo && cur.wo;
        const Pose6D wd = have_wo ? wo_delta(*prev->wo, *cur.wo) : Pose6D{};
        const double travel = have_wo ? cur.wo->travel - prev->wo->travel : 0.0;
        if (m.has(FactorKind::WO) && have_wo) {
            add(build_wo_factor(i, id, Eigen::Vector3d(wd.t.x(), wd.t.y(), wd.r.z()), cur.wo->cov, travel,
                                cur.wo->turned - prev->wo->turned));
        }
        auto scaled_cov = [&](const RelSample& s) {
            const double k = s.reading_dt > 0.0 ? std::max(1.0, dt_nodes / s.reading_dt) : 1.0;
            return Matrix6d(s.cov * k);
        };
        if (m.has(FactorKind::VO) && prev->vo && cur.vo) {
            const Pose6D vd = rel_delta(*prev->vo, *cur.vo);
            const double scale = have_wo ? vo_failure_scale(wd, vd, cfg.weights) : 1.0;
            add(build_vo_factor(i, id, vd, scaled_cov(*cur.vo), cfg.weights, scale));
        }
        if (m.has(FactorKind::LID) && prev->lid && cur.lid) {
            add(build_lid_factor(i, id, rel_delta(*prev->lid, *cur.lid), scaled_cov(*cur.lid)));
        }
        if (m.has(FactorKind::AMM)) {
            const double dist =
                have_wo ? travel
                        : relative(to_transform(g.node(i).state), to_transform(g.node(id).state)).translation().norm();
            add(build_amm_factor(i, id, dist));
        }
    }
    if (m.has(FactorKind::GPS) && cur.gps) add(build_gps_factor(id, cur.gps->position, cur.gps->cov));
    if (m.has(FactorKind::IMU) && cur.imu) add(build_imu_factor(id, cur.imu->roll, cur.imu->pitch, cur.imu->cov));
    if (m.has(FactorKind::DEM) && dem) {
        if (auto f = build_dem_factor(id, g.node(id).state, *dem, cfg.weights)) add(std::move(*f));
    }
    if (m.has(FactorKind::MRF)) {
        for (int nb : mrf_neighbors(g, id, cfg.mrf)) {
            Factor f = build_mrf_factor(id, nb, g.node(id).state, g.node(nb).state, cfg.weights);
            if (g.add_mrf_factor(f)) added.push_back(std::move(f));
        }
    }
    return added;
}

std::vector<int> window_extent(const PoseGraph& g, int newest, int w_min) {
    if (newest < 0 || newest >= g.size()) throw InvalidArgument("window_extent: unknown node");
    if (w_min < 1) throw InvalidArgument("window_extent: w_min must be positive");
    const int base = std::max(0, newest - w_min + 1);
    int k = base;
    for (const Factor& f : g.factors()) {
        if (f.kind != FactorKind::MRF) continue;
        const int a = f.node_i, b = *f.node_j;
        if (std::abs(a - b) <= 1) continue;
        const bool a_in = a >= base && a <= newest;
        const bool b_in = b >= base && b <= newest;
        if (a_in && !b_in && b < k) k = b;
        if (b_in && !a_in && a < k) k = a;
    }
    std::vector<int> ids;
    for (int id = k; id <= newest; ++id) ids.push_back(id);
    return ids;
}

Trajectory graph_trajectory(const PoseGraph& g) {
    Trajectory t;
    t.reserve(static_cast<size_t>(g.size()));
    for (const auto& n : g.nodes()) t.push_back(to_sample(n.stamp, n.state));
    return t;
}

SolverConfig solver_settings(const PipelineConfig& cfg) {
    SolverConfig s = cfg.solver;
    const CueMask& m = cfg.cues;
    const bool attitude = m.has(FactorKind::IMU) || m.has(FactorKind::VO) || m.has(FactorKind::LID) ||
                          m.has(FactorKind::AMM);
    if (!attitude) s.locked[3] = s.locked[4] = true;
    return s;
}

namespace {

std::optional<int> hint_of(const Readings& r) {
    if (r.row && *r.row >= 0) return r.row;
    return std::nullopt;
}

bool has_gps(const PoseGraph& g) {
    return std::any_of(g.factors().begin(), g.factors().end(),
                       [](const Factor& f) { return f.kind == FactorKind::GPS; });
}

PoseGraph build_graph(const std::vector<Readings>& readings, const std::vector<Pose6D>& states,
                      const PipelineConfig& cfg, const DemGrid* dem) {
    PoseGraph g;
    for (size_t k = 0; k < readings.size(); ++k) g.add_node(readings[k].stamp, states[k], hint_of(readings[k]));
    for (size_t k = 0; k < readings.size(); ++k) {
        assemble_node(g, static_cast<int>(k), k > 0 ? &readings[k - 1] : nullptr, readings[k], cfg, dem);
    }
    return g;
}

SolveReport solve_all(PoseGraph& g, const PipelineConfig& cfg) {
    g.set_frozen_below(has_gps(g) || g.empty() ? 0 : 1);
    std::vector<int> ids(static_cast<size_t>(g.size()));
    for (int k = 0; k < g.size(); ++k) ids[static_cast<size_t>(k)] = k;
    return lm_optimize(g, ids, solver_settings(cfg));
}

std::vector<Pose6D> states_of(const PoseGraph& g) {
    std::vector<Pose6D> out;
    for (const auto& n : g.nodes()) out.push_back(n.state);
    return out;
}

}  // namespace

OnlineResult run_online(const SensorLog& log, const PipelineConfig& cfg, const DemGrid* dem) {
    cfg.validate();
    const Synchronizer sync(log);
    const SolverConfig solver = solver_settings(cfg);
    OnlineResult res;
    PoseGraph& g = res.graph;
    Readings prev;
    bool gps_seen = false;
    for (double stamp : trigger_nodes(log, cfg)) {
        const Readings cur = sync.at(stamp);
        const Pose6D init = g.empty() ? initial_state(cur, log) : dead_reckon(g.nodes().back().state, prev, cur);
        const int id = g.add_node(stamp, init, hint_of(cur));
        const auto added = assemble_node(g, id, id > 0 ? &prev : nullptr, cur, cfg, dem);
        gps_seen = gps_seen || std::any_of(added.begin(), added.end(),
                                           [](const Factor& f) { return f.kind == FactorKind::GPS; });
        prev = cur;

        std::vector<int> ids;
        if (cfg.window) {
            ids = window_extent(g, id, cfg.w_min);
        } else {
            for (int k = 0; k <= id; ++k) ids.push_back(k);
        }
        int frozen = ids.front();
        if (frozen == 0 && !gps_seen) frozen = 1;
        g.set_frozen_below(std::min(frozen, g.size()));

        StepReport step;
        step.node = id;
        step.window_begin = ids.front();
        step.window_nodes = static_cast<int>(ids.size());
        for (const Factor& f : g.factors()) {
            if (f.node_i >= ids.front() || (f.node_j && *f.node_j >= ids.front())) ++step.window_factors;
        }
        try {
            step.solve = lm_optimize(g, ids, solver);
        } catch (const LinearSolveFailure& e) {
            throw LinearSolveFailure("node " + std::to_string(id) + ": " + e.what());
        }
        res.steps.push_back(step);
    }
    res.trajectory = graph_trajectory(g);
    return res;
}

BatchResult run_batch(const SensorLog& log, const PipelineConfig& cfg, const DemGrid* dem,
                      const Trajectory* initial) {
    cfg.validate();
    const Synchronizer sync(log);
    std::vector<Readings> readings;
    for (double stamp : trigger_nodes(log, cfg)) readings.push_back(sync.at(stamp));

    std::vector<Pose6D> states;
    for (size_t k = 0; k < readings.size(); ++k) {
        std::optional<Pose6D> s;
        if (initial) s = pose_at(*initial, readings[k].stamp);
        if (!s) {
            s = k == 0 ? initial_state(readings[0], log) : dead_reckon(states.back(), readings[k - 1], readings[k]);
        }
        states.push_back(*s);
    }

    BatchResult res;
    const bool map_cues = cfg.cues.has(FactorKind::DEM) || cfg.cues.has(FactorKind::MRF);
    if (!initial && map_cues) {
        PipelineConfig first = cfg;
        first.cues = cfg.cues.without(FactorKind::DEM).without(FactorKind::MRF);
        PoseGraph g0 = build_graph(readings, states, first, dem);
        solve_all(g0, first);
        states = states_of(g0);
    }
    res.graph = build_graph(readings, states, cfg, dem);
    res.report = solve_all(res.graph, cfg);
    res.trajectory = graph_trajectory(res.graph);
    return res;
}

}  // namespace fieldloc
