#include "fieldloc/sensor_log.hpp"

#include <istream>
#include <ostream>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

std::string_view to_string(GpsMode m) { return m == GpsMode::RTK ? "RTK" : "PPP"; }

std::optional<GpsMode> parse_gps_mode(std::string_view s) {
    if (s == "RTK") return GpsMode::RTK;
    if (s == "PPP") return GpsMode::PPP;
    return std::nullopt;
}

namespace {

template <typename T>
void check_sorted(const std::vector<T>& v, const char* name) {
    for (size_t k = 1; k < v.size(); ++k) {
        if (!(v[k].stamp > v[k - 1].stamp)) {
            throw InvalidArgument(std::string(name) + " stream not strictly increasing at stamp " +
                                  text::fmt(v[k].stamp));
        }
    }
}

class Fields {
public:
    Fields(const std::vector<std::string_view>& tok, std::string where) : tok_(tok), where_(std::move(where)) {}

    double next() {
        if (at_ >= tok_.size()) throw FormatError(where_ + ": too few fields");
        return text::parse_double(tok_[at_++], where_);
    }
    template <int R, int C>
    Eigen::Matrix<double, R, C> matrix() {
        Eigen::Matrix<double, R, C> m;
        for (int r = 0; r < R; ++r) {
            for (int c = 0; c < C; ++c) m(r, c) = next();
        }
        return m;
    }
    std::string_view word() {
        if (at_ >= tok_.size()) throw FormatError(where_ + ": too few fields");
        return tok_[at_++];
    }
    void done() const {
        if (at_ != tok_.size()) throw FormatError(where_ + ": too many fields");
    }
    const std::string& where() const { return where_; }

private:
    const std::vector<std::string_view>& tok_;
    std::string where_;
    size_t at_ = 1;
};

RelReading read_rel(Fields& f) {
    RelReading r;
    r.stamp = f.next();
    r.delta = Pose6D::from_vec(f.matrix<6, 1>());
    r.cov = f.matrix<6, 6>();
    return r;
}

template <typename M>
void put(std::ostream& out, const M& m) {
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) out << ' ' << text::fmt(m(r, c));
    }
}

void write_rel(std::ostream& out, const char* tag, const RelReading& r) {
    out << tag << ' ' << text::fmt(r.stamp);
    put(out, r.delta.vec());
    put(out, r.cov);
    out << '\n';
}

}  // namespace

void SensorLog::validate() const {
    check_sorted(wo, "WO");
    check_sorted(vo, "VO");
    check_sorted(lid, "LID");
    check_sorted(gps, "GPS");
    check_sorted(imu, "IMU");
    check_sorted(rows, "ROW");
}

SensorLog read_sensor_log(std::istream& in, std::ostream* warn) {
    SensorLog log;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = text::split(line);
        if (tok.empty() || tok[0].front() == '#') continue;
        Fields f(tok, "sensor log line " + std::to_string(lineno));
        const std::string_view tag = tok[0];
        if (tag == "WO") {
            WoReading r;
            r.stamp = f.next();
            r.delta = f.matrix<3, 1>();
            r.cov = f.matrix<3, 3>();
            log.wo.push_back(r);
        } else if (tag == "VO") {
            log.vo.push_back(read_rel(f));
        } else if (tag == "LID") {
            log.lid.push_back(read_rel(f));
        } else if (tag == "GPS") {
            GpsReading r;
            r.stamp = f.next();
            r.position = f.matrix<3, 1>();
            r.cov = f.matrix<3, 3>();
            const auto mode = parse_gps_mode(f.word());
            if (!mode) throw FormatError(f.where() + ": GPS mode must be RTK or PPP");
            r.mode = *mode;
            log.gps.push_back(r);
        } else if (tag == "IMU") {
            ImuReading r;
            r.stamp = f.next();
            r.roll = f.next();
            r.pitch = f.next();
            r.cov = f.matrix<2, 2>();
            log.imu.push_back(r);
        } else if (tag == "ROW") {
            RowReading r;
            r.stamp = f.next();
            r.row = static_cast<int>(text::parse_int(f.word(), f.where()));
            log.rows.push_back(r);
        } else {
            if (warn) *warn << "warning: " << f.where() << ": unknown tag '" << tag << "' skipped\n";
            continue;
        }
        f.done();
    }
    try {
        log.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("sensor log: ") + e.what());
    }
    return log;
}

SensorLog read_sensor_log_file(const std::string& path, std::ostream* warn) {
    auto in = text::open_in(path);
    return read_sensor_log(in, warn);
}

void write_sensor_log(std::ostream& out, const SensorLog& log) {
    for (const auto& r : log.wo) {
        out << "WO " << text::fmt(r.stamp);
        put(out, r.delta);
        put(out, r.cov);
        out << '\n';
    }
    for (const auto& r : log.vo) write_rel(out, "VO", r);
    for (const auto& r : log.lid) write_rel(out, "LID", r);
    for (const auto& r : log.gps) {
        out << "GPS " << text::fmt(r.stamp);
        put(out, r.position);
        put(out, r.cov);
        out << ' ' << to_string(r.mode) << '\n';
    }
    for (const auto& r : log.imu) {
        out << "IMU " << text::fmt(r.stamp) << ' ' << text::fmt(r.roll) << ' ' << text::fmt(r.pitch);
        put(out, r.cov);
        out << '\n';
    }
    for (const auto& r : log.rows) out << "ROW " << text::fmt(r.stamp) << ' ' << r.row << '\n';
}

void write_sensor_log_file(const std::string& path, const SensorLog& log) {
    auto out = text::open_out(path);
    write_sensor_log(out, log);
}

}  // namespace fieldloc
