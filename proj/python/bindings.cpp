#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fieldloc/cli.hpp"
#include "fieldloc/config.hpp"
#include "fieldloc/errors.hpp"
#include "fieldloc/eval.hpp"
#include "fieldloc/geometry.hpp"
#include "fieldloc/pipeline.hpp"
#include "fieldloc/sim.hpp"

namespace py = pybind11;
using namespace fieldloc;

namespace {

using TrajArray = Eigen::Matrix<double, Eigen::Dynamic, 7, Eigen::RowMajor>;

// Rows of (stamp, x, y, z, roll, pitch, yaw).
TrajArray to_array(const Trajectory& traj) {
    TrajArray a(static_cast<Eigen::Index>(traj.size()), 7);
    for (size_t k = 0; k < traj.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        a(i, 0) = traj[k].stamp;
        a.block<1, 3>(i, 1) = traj[k].t.transpose();
        a.block<1, 3>(i, 4) = traj[k].rpy.transpose();
    }
    return a;
}

Trajectory from_array(const TrajArray& a) {
    Trajectory traj;
    traj.reserve(static_cast<size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        traj.push_back({a(i, 0), a.block<1, 3>(i, 1).transpose(), a.block<1, 3>(i, 4).transpose()});
    return traj;
}

Config config_from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

py::dict stats_dict(const RunStats& s) {
    py::dict d;
    d["rmse"] = s.rmse;
    d["max"] = s.max_abs;
    d["mean"] = s.mean_abs;
    d["err_x"] = s.err_x;
    d["err_y"] = s.err_y;
    d["err_z"] = s.err_z;
    d["n"] = s.n;
    return d;
}

PipelineConfig with_cues(const Config& c, const std::string& cues) {
    PipelineConfig p = c.pipeline;
    if (!cues.empty()) p.cues = CueMask::parse(cues);
    return p;
}

}  // namespace

PYBIND11_MODULE(_fieldloc, m) {
    m.doc() = "Field robot localization by pose-graph fusion";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<OutOfBounds>(m, "OutOfBounds", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<LinearSolveFailure>(m, "LinearSolveFailure", base.ptr());

    m.def("to_transform", [](const Vector6d& v) { return to_transform(Pose6D::from_vec(v)).matrix(); },
          py::arg("pose"), "6-vector (x, y, z, rx, ry, rz) to a 4x4 homogeneous matrix.");
    m.def(
        "phi",
        [](const Eigen::Matrix4d& T) {
            Transform X;
            X.matrix() = T;
            return phi(X);
        },
        py::arg("matrix"), "4x4 homogeneous matrix to the 6-vector (x, y, z, rx, ry, rz).");
    m.def("so3_exp", &so3_exp, py::arg("r"));
    m.def("so3_log", &so3_log, py::arg("R"));

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("from_text", &config_from_text, py::arg("text"))
        .def_static("load", [](const std::string& path) { return load_config(path); }, py::arg("path"))
        .def_property(
            "seed", [](const Config& c) { return c.field.seed; },
            [](Config& c, std::uint64_t s) { c.field.seed = s; })
        .def_property(
            "cues", [](const Config& c) { return c.pipeline.cues.str(); },
            [](Config& c, const std::string& s) { c.pipeline.cues = CueMask::parse(s); })
        .def_property(
            "gps_mode", [](const Config& c) { return std::string(to_string(c.noise.gps_mode)); },
            [](Config& c, const std::string& s) {
                const auto mode = parse_gps_mode(s);
                if (!mode) throw InvalidArgument("unknown GPS mode '" + s + "'");
                c.noise.gps_mode = *mode;
            })
        .def_property(
            "rows", [](const Config& c) { return c.field.rows; }, [](Config& c, int r) { c.field.rows = r; })
        .def_property(
            "row_length", [](const Config& c) { return c.field.row_length; },
            [](Config& c, double l) { c.field.row_length = l; });
    m.def("config_reference", &config_reference);

    py::class_<DemGrid>(m, "DemGrid")
        .def_static("read", &read_dem_file, py::arg("path"))
        .def("write", [](const DemGrid& g, const std::string& path) { write_dem_file(path, g); }, py::arg("path"))
        .def("query", &DemGrid::query, py::arg("x"), py::arg("y"))
        .def("contains", &DemGrid::contains, py::arg("x"), py::arg("y"))
        .def_property_readonly("origin", &DemGrid::origin)
        .def_property_readonly("spacing", &DemGrid::spacing)
        .def_property_readonly("rows", &DemGrid::rows)
        .def_property_readonly("cols", &DemGrid::cols);

    py::class_<SensorLog>(m, "SensorLog")
        .def_static("read", [](const std::string& path) { return read_sensor_log_file(path); }, py::arg("path"))
        .def("write", [](const SensorLog& l, const std::string& path) { write_sensor_log_file(path, l); },
             py::arg("path"))
        .def("counts", [](const SensorLog& l) {
            py::dict d;
            d["WO"] = l.wo.size();
            d["VO"] = l.vo.size();
            d["LID"] = l.lid.size();
            d["GPS"] = l.gps.size();
            d["IMU"] = l.imu.size();
            d["ROW"] = l.rows.size();
            return d;
        });

    py::class_<SimOutput>(m, "Simulation")
        .def_readonly("log", &SimOutput::log)
        .def_readonly("dem", &SimOutput::dem)
        .def_property_readonly("truth", [](const SimOutput& s) { return to_array(truth_trajectory(s.truth.samples)); })
        .def("write", [](const SimOutput& s, const std::string& dir) {
            write_sensor_log_file(dir + "/sensors.log", s.log);
            write_dem_file(dir + "/dem.txt", s.dem);
            write_ground_truth_file(dir + "/truth.gt", s.truth.samples);
        }, py::arg("directory"));

    m.def("simulate", [](const Config& c) { return simulate(c.field, c.noise); }, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    m.def(
        "run_online",
        [](const SensorLog& log, const Config& c, const DemGrid* dem, const std::string& cues) {
            OnlineResult r;
            {
                py::gil_scoped_release release;
                r = run_online(log, with_cues(c, cues), dem);
            }
            return to_array(r.trajectory);
        },
        py::arg("log"), py::arg("config"), py::arg("dem") = nullptr, py::arg("cues") = "");
    m.def(
        "run_batch",
        [](const SensorLog& log, const Config& c, const DemGrid* dem, const std::string& cues,
           std::optional<TrajArray> initial) {
            const Trajectory init = initial ? from_array(*initial) : Trajectory{};
            BatchResult r;
            {
                py::gil_scoped_release release;
                r = run_batch(log, with_cues(c, cues), dem, initial ? &init : nullptr);
            }
            return to_array(r.trajectory);
        },
        py::arg("log"), py::arg("config"), py::arg("dem") = nullptr, py::arg("cues") = "",
        py::arg("initial") = py::none());

    m.def(
        "compute_stats",
        [](const TrajArray& est, const TrajArray& truth) { return stats_dict(compute_stats(from_array(est), from_array(truth))); },
        py::arg("estimate"), py::arg("truth"));
    m.def(
        "read_trajectory", [](const std::string& path) { return to_array(read_trajectory_file(path)); },
        py::arg("path"));
    m.def(
        "write_trajectory", [](const std::string& path, const TrajArray& a) { write_trajectory_file(path, from_array(a)); },
        py::arg("path"), py::arg("trajectory"));
    m.def(
        "read_ground_truth",
        [](const std::string& path) { return to_array(truth_trajectory(read_ground_truth_file(path))); },
        py::arg("path"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a CLI command in-process. Returns (exit_code, stdout, stderr).");
}
