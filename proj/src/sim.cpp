#include "fieldloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTerrainTilt = kPi / 6.0;  // direction of the second undulation
constexpr double kPhase1 = 0.3;
constexpr double kPhase2 = 1.1;
constexpr int kTicksPerKnot = 100;
constexpr int kWoTicks = 5;
constexpr int kVoTicks = 10;
constexpr int kGpsTicks = 20;
constexpr int kImuTicks = 2;
constexpr int kLidTicks = 50;
}  // namespace

std::string_view to_string(SteeringMode m) { return m == SteeringMode::SERPENTINE ? "SERPENTINE" : "SAME_HEADING"; }

std::optional<SteeringMode> parse_steering_mode(std::string_view s) {
    if (s == "SERPENTINE") return SteeringMode::SERPENTINE;
    if (s == "SAME_HEADING") return SteeringMode::SAME_HEADING;
    return std::nullopt;
}

void FieldConfig::validate() const {
    if (rows < 1) throw InvalidArgument("rows must be at least 1");
    if (!(row_length > 0) || !(row_spacing > 0) || !(speed > 0) || !(dem_spacing > 0)) {
        throw InvalidArgument("row_length, row_spacing, speed and dem_spacing must be positive");
    }
    if (!(wavelength_1 > 0) || !(wavelength_2 > 0)) throw InvalidArgument("terrain wavelengths must be positive");
    if (!(amplitude >= 0)) throw InvalidArgument("terrain amplitude must be non-negative");
}

NoiseConfig NoiseConfig::zero() {
    NoiseConfig n;
    n.wo_sigma_t = n.wo_sigma_yaw = 0.0;
    n.vo_sigma_xy = n.vo_sigma_z = n.vo_sigma_r = 0.0;
    n.vo_fail_rate = 0.0;
    n.lid_sigma_t = n.lid_sigma_r = 0.0;
    n.imu_sigma = 0.0;
    n.rtk_sigma_xy = n.rtk_sigma_z = 0.0;
    n.ppp_sigma_xy = n.ppp_sigma_z = 0.0;
    return n;
}

void NoiseConfig::validate() const {
    const double all[] = {wo_sigma_t,  wo_sigma_yaw, vo_sigma_xy,  vo_sigma_z,  vo_sigma_r,   vo_fail_rate,
                          lid_sigma_t, lid_sigma_r,  imu_sigma,    rtk_sigma_xy, rtk_sigma_z, ppp_sigma_xy,
                          ppp_sigma_z, vo_fail_duration, vo_fail_magnitude};
    for (double v : all) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("noise settings must be finite and >= 0");
    }
    if (vo_fail_rate > 1.0) throw InvalidArgument("vo_fail_rate is a per-reading probability");
    for (const auto& o : outages) {
        if (!(o.t_end >= o.t_start)) throw InvalidArgument("outage ends before it starts");
    }
}

double terrain_height(const FieldConfig& c, double x, double y) {
    const double u = x * std::cos(kTerrainTilt) + y * std::sin(kTerrainTilt);
    return 0.5 * c.amplitude * std::sin(2 * kPi * x / c.wavelength_1 + kPhase1) +
           0.5 * c.amplitude * std::sin(2 * kPi * u / c.wavelength_2 + kPhase2) + c.slope_x * x + c.slope_y * y;
}

Eigen::Vector2d terrain_gradient(const FieldConfig& c, double x, double y) {
    const double u = x * std::cos(kTerrainTilt) + y * std::sin(kTerrainTilt);
    const double k1 = 2 * kPi / c.wavelength_1;
    const double k2 = 2 * kPi / c.wavelength_2;
    const double d1 = 0.5 * c.amplitude * k1 * std::cos(k1 * x + kPhase1);
    const double d2 = 0.5 * c.amplitude * k2 * std::cos(k2 * u + kPhase2);
    return {d1 + d2 * std::cos(kTerrainTilt) + c.slope_x, d2 * std::sin(kTerrainTilt) + c.slope_y};
}

namespace {

struct PlanarPoint {
    double x = 0, y = 0, heading = 0;
    int row = -1;
};

// Arc-length parametrised field path.
class FieldPath {
public:
    explicit FieldPath(const FieldConfig& c) : c_(c) {
        const double turn = c.mode == SteeringMode::SERPENTINE ? kPi * c.row_spacing / 2.0 : c.row_spacing;
        turn_len_ = turn;
        length_ = c.rows * c.row_length + (c.rows - 1) * turn;
    }

    double length() const { return length_; }

    PlanarPoint at(double s) const {
        s = std::clamp(s, 0.0, length_);
        const double period = c_.row_length + turn_len_;
        int k = static_cast<int>(std::floor(s / period));
        double u = s - k * period;
        if (k >= c_.rows) {
            k = c_.rows - 1;
            u = c_.row_length;
        }
        const double y0 = k * c_.row_spacing;
        const int dir = k % 2 == 0 ? 1 : -1;
        const double x_start = dir > 0 ? 0.0 : c_.row_length;
        PlanarPoint p;
        if (u <= c_.row_length) {
            p.x = x_start + dir * u;
            p.y = y0;
            p.heading = c_.mode == SteeringMode::SAME_HEADING || dir > 0 ? 0.0 : kPi;
            p.row = k;
            return p;
        }
        const double v = u - c_.row_length;
        const double x_end = x_start + dir * c_.row_length;
        if (c_.mode == SteeringMode::SAME_HEADING) {
            p.x = x_end;
            p.y = y0 + v;
            p.heading = 0.0;
            return p;
        }
        const double r = c_.row_spacing / 2.0;
        const double phi = v / r;
        const double theta = dir > 0 ? -kPi / 2 + phi : -kPi / 2 - phi;
        p.x = x_end + r * std::cos(theta);
        p.y = y0 + r + r * std::sin(theta);
        p.heading = wrap_angle(dir > 0 ? theta + kPi / 2 : theta - kPi / 2);
        return p;
    }

private:
    const FieldConfig& c_;
    double turn_len_ = 0;
    double length_ = 0;
};

// Body frame: z along the terrain normal, x along the heading projected onto
// the tangent plane.
Pose6D terrain_pose(const FieldConfig& c, const PlanarPoint& p) {
    const Eigen::Vector2d g = terrain_gradient(c, p.x, p.y);
    const Eigen::Vector3d n = Eigen::Vector3d(-g.x(), -g.y(), 1.0).normalized();
    const Eigen::Vector3d h(std::cos(p.heading), std::sin(p.heading), 0.0);
    const Eigen::Vector3d xb = (h - h.dot(n) * n).normalized();
    Eigen::Matrix3d R;
    R.col(0) = xb;
    R.col(1) = n.cross(xb);
    R.col(2) = n;
    return {Eigen::Vector3d(p.x, p.y, terrain_height(c, p.x, p.y)), so3_log(R)};
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(which)};
    return std::mt19937_64(seq);
}

double floor_var(double sigma) {
    const double s = std::max(sigma, kReportedSigmaFloor);
    return s * s;
}

}  // namespace

Pose6D Truth::pose_at_tick(int tick) const {
    if (tick < 0 || tick > last_tick()) throw OutOfBounds("truth tick " + std::to_string(tick) + " out of range");
    const size_t k = static_cast<size_t>(tick / kTicksPerKnot);
    const int rem = tick % kTicksPerKnot;
    if (rem == 0 || k + 1 >= knots.size()) return knots[k];
    return interp_pose(knots[k], knots[k + 1], static_cast<double>(rem) / kTicksPerKnot);
}

Truth generate_truth(const FieldConfig& cfg) {
    cfg.validate();
    const FieldPath path(cfg);
    Truth t;
    const double knot_len = cfg.speed * t.knot_dt;
    const int n_knots = static_cast<int>(std::floor(path.length() / knot_len + 1e-9)) + 1;
    for (int k = 0; k < n_knots; ++k) t.knots.push_back(terrain_pose(cfg, path.at(k * knot_len)));
    const int ticks = (n_knots - 1) * kTicksPerKnot;
    t.rows.resize(static_cast<size_t>(ticks) + 1);
    for (int tick = 0; tick <= ticks; ++tick) {
        t.rows[static_cast<size_t>(tick)] = path.at(cfg.speed * tick_stamp(tick)).row;
    }
    for (int tick = 0; tick <= ticks; tick += kWoTicks) {
        const Pose6D p = t.pose_at_tick(tick);
        t.samples.push_back({tick_stamp(tick), p.t, to_rpy(so3_exp(p.r)), t.rows[static_cast<size_t>(tick)]});
    }
    return t;
}

DemGrid export_dem(const FieldConfig& cfg) {
    cfg.validate();
    const double s = cfg.dem_spacing;
    const double margin = std::max(s, cfg.row_spacing);
    const Eigen::Vector2d origin(-margin, -margin);
    const double width = cfg.row_length + 2 * margin;
    const double height = (cfg.rows - 1) * cfg.row_spacing + 2 * margin;
    const int cols = static_cast<int>(std::ceil(width / s)) + 1;
    const int rows = static_cast<int>(std::ceil(height / s)) + 1;
    std::vector<double> z;
    z.reserve(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) z.push_back(terrain_height(cfg, origin.x() + c * s, origin.y() + r * s));
    }
    return DemGrid(origin, s, rows, cols, std::move(z));
}

SensorLog simulate_sensors(const Truth& truth, const NoiseConfig& noise, std::uint64_t seed,
                           std::vector<bool>* vo_failed) {
    noise.validate();
    if (truth.knots.empty()) throw InvalidArgument("simulate_sensors: empty truth");
    SensorLog log;
    std::normal_distribution<double> N(0.0, 1.0);
    const int last = truth.last_tick();
    auto T = [&](int tick) { return to_transform(truth.pose_at_tick(tick)); };

    {
        auto rng = stream(seed, 1);
        Transform prev = T(0);
        for (int tick = 0; tick <= last; tick += kWoTicks) {
            const Transform cur = T(tick);
            WoReading r;
            r.stamp = tick_stamp(tick);
            if (tick > 0) {
                const Vector6d p = phi(relative(prev, cur));
                r.delta = Eigen::Vector3d(p[0], p[1], p[5]);
                const double scale = std::sqrt(std::max(r.delta.head<2>().norm() + std::abs(r.delta.z()), 1e-4));
                r.delta.x() += noise.wo_sigma_t * scale * N(rng);
                r.delta.y() += noise.wo_sigma_t * scale * N(rng);
                r.delta.z() += noise.wo_sigma_yaw * scale * N(rng);
            }
            r.cov = Eigen::Vector3d(floor_var(noise.wo_sigma_t), floor_var(noise.wo_sigma_t),
                                    floor_var(noise.wo_sigma_yaw))
                        .asDiagonal();
            log.wo.push_back(r);
            log.rows.push_back({r.stamp, truth.rows[static_cast<size_t>(tick)]});
            prev = cur;
        }
    }
    {
        auto rng = stream(seed, 2);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const Vector6d sigma = (Vector6d() << noise.vo_sigma_xy, noise.vo_sigma_xy, noise.vo_sigma_z,
                                noise.vo_sigma_r, noise.vo_sigma_r, noise.vo_sigma_r)
                                   .finished();
        Vector6d var;
        for (int k = 0; k < 6; ++k) var[k] = floor_var(sigma[k]);
        Transform prev = T(0);
        double fail_until = -1.0;
        for (int tick = 0; tick <= last; tick += kVoTicks) {
            const Transform cur = T(tick);
            RelReading r;
            r.stamp = tick_stamp(tick);
            bool failed = false;
            double dist = 0.0;
            if (tick > 0) {
                if (r.stamp >= fail_until && U(rng) < noise.vo_fail_rate) fail_until = r.stamp + noise.vo_fail_duration;
                failed = r.stamp < fail_until;
                const Transform rel = relative(prev, cur);
                dist = rel.translation().norm();
                Vector6d n;
                for (int k = 0; k < 6; ++k) n[k] = sigma[k] * N(rng);
                n *= std::sqrt(std::max(dist, 1e-4)) * (failed ? noise.vo_fail_magnitude : 1.0);
                r.delta = box_plus(to_pose(rel), n);
            }
            r.cov = (var * std::max(dist, 1e-4)).asDiagonal();
            log.vo.push_back(r);
            if (vo_failed) vo_failed->push_back(failed);
            prev = cur;
        }
    }
    {
        auto rng = stream(seed, 3);
        const Vector6d sigma = (Vector6d() << noise.lid_sigma_t, noise.lid_sigma_t, noise.lid_sigma_t,
                                noise.lid_sigma_r, noise.lid_sigma_r, noise.lid_sigma_r)
                                   .finished();
        Vector6d var;
        for (int k = 0; k < 6; ++k) var[k] = floor_var(sigma[k]);
        Transform prev = T(0);
        for (int tick = 0; tick <= last; tick += kLidTicks) {
            const Transform cur = T(tick);
            RelReading r;
            r.stamp = tick_stamp(tick);
            if (tick > 0) {
                Vector6d n;
                for (int k = 0; k < 6; ++k) n[k] = sigma[k] * N(rng);
                r.delta = box_plus(to_pose(relative(prev, cur)), n);
            }
            r.cov = var.asDiagonal();
            log.lid.push_back(r);
            prev = cur;
        }
    }
    {
        auto rng = stream(seed, 4);
        for (int tick = 0; tick <= last; tick += kGpsTicks) {
            GpsReading r;
            r.stamp = tick_stamp(tick);
            r.mode = noise.gps_mode;
            for (const auto& o : noise.outages) {
                if (r.stamp >= o.t_start && r.stamp <= o.t_end) r.mode = o.mode;
            }
            const double sxy = r.mode == GpsMode::RTK ? noise.rtk_sigma_xy : noise.ppp_sigma_xy;
            const double sz = r.mode == GpsMode::RTK ? noise.rtk_sigma_z : noise.ppp_sigma_z;
            r.position = truth.pose_at_tick(tick).t;
            r.position.x() += sxy * N(rng);
            r.position.y() += sxy * N(rng);
            r.position.z() += sz * N(rng);
            r.cov = Eigen::Vector3d(floor_var(sxy), floor_var(sxy), floor_var(sz)).asDiagonal();
            log.gps.push_back(r);
        }
    }
    {
        auto rng = stream(seed, 5);
        for (int tick = 0; tick <= last; tick += kImuTicks) {
            const Eigen::Vector3d rpy = to_rpy(so3_exp(truth.pose_at_tick(tick).r));
            ImuReading r;
            r.stamp = tick_stamp(tick);
            r.roll = rpy[0] + noise.imu_sigma * N(rng);
            r.pitch = rpy[1] + noise.imu_sigma * N(rng);
            r.cov = Eigen::Vector2d(floor_var(noise.imu_sigma), floor_var(noise.imu_sigma)).asDiagonal();
            log.imu.push_back(r);
        }
    }
    return log;
}

SimOutput simulate(const FieldConfig& field, const NoiseConfig& noise) {
    SimOutput out{generate_truth(field), {}, export_dem(field), {}};
    out.log = simulate_sensors(out.truth, noise, field.seed, &out.vo_failed);
    return out;
}

Trajectory truth_trajectory(const std::vector<GtSample>& gt) {
    Trajectory t;
    t.reserve(gt.size());
    for (const auto& s : gt) t.push_back({s.stamp, s.t, s.rpy});
    return t;
}

void write_ground_truth(std::ostream& out, const std::vector<GtSample>& gt) {
    for (const auto& s : gt) {
        out << "GT " << text::fmt(s.stamp);
        for (int k = 0; k < 3; ++k) out << ' ' << text::fmt(s.t[k]);
        for (int k = 0; k < 3; ++k) out << ' ' << text::fmt(s.rpy[k]);
        out << ' ' << s.row_hint << '\n';
    }
}

std::vector<GtSample> read_ground_truth(std::istream& in) {
    std::vector<GtSample> gt;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = text::split(line);
        if (tok.empty()) continue;
        const std::string where = "ground truth line " + std::to_string(lineno);
        if (tok[0] != "GT" || tok.size() != 9) throw FormatError(where + ": expected GT with 8 values");
        GtSample s;
        s.stamp = text::parse_double(tok[1], where);
        for (int k = 0; k < 3; ++k) s.t[k] = text::parse_double(tok[2 + k], where);
        for (int k = 0; k < 3; ++k) s.rpy[k] = text::parse_double(tok[5 + k], where);
        s.row_hint = static_cast<int>(text::parse_int(tok[8], where));
        if (!gt.empty() && !(s.stamp > gt.back().stamp)) throw FormatError(where + ": stamps must increase");
        gt.push_back(s);
    }
    return gt;
}

void write_ground_truth_file(const std::string& path, const std::vector<GtSample>& gt) {
    auto out = text::open_out(path);
    write_ground_truth(out, gt);
}

std::vector<GtSample> read_ground_truth_file(const std::string& path) {
    auto in = text::open_in(path);
    return read_ground_truth(in);
}

}  // namespace fieldloc
