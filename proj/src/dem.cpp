#include "fieldloc/dem.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "fieldloc/errors.hpp"
#include "fieldloc/text_io.hpp"

namespace fieldloc {

namespace {

// Cell index and fractional offset along one axis; snaps onto grid lines so
// queries at stored nodes are exact.
std::pair<int, double> locate(double u, int n) {
    const double snapped = std::round(u);
    if (std::abs(u - snapped) <= 1e-12 * std::max(1.0, std::abs(u))) u = snapped;
    int cell = static_cast<int>(std::floor(u));
    if (cell >= n - 1) cell = n - 2;
    if (cell < 0) cell = 0;
    return {cell, u - cell};
}

}  // namespace

DemGrid::DemGrid(Eigen::Vector2d origin, double spacing, int rows, int cols,
                 std::vector<double> elevations)
    : origin_(origin), spacing_(spacing), rows_(rows), cols_(cols), elevations_(std::move(elevations)) {
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("DEM spacing must be positive");
    if (rows < 2 || cols < 2) throw InvalidArgument("DEM needs at least 2x2 nodes");
    if (elevations_.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
        throw InvalidArgument("DEM elevation count does not match rows*cols");
    }
    for (double e : elevations_) {
        if (!std::isfinite(e)) throw InvalidArgument("DEM elevations must be finite");
    }
}

bool DemGrid::contains(double x, double y) const {
    const double u = (x - origin_.x()) / spacing_;
    const double v = (y - origin_.y()) / spacing_;
    const double tol = 1e-12;
    return u >= -tol && v >= -tol && u <= (cols_ - 1) + tol && v <= (rows_ - 1) + tol;
}

double DemGrid::query(double x, double y) const {
    if (!contains(x, y)) {
        throw OutOfBounds("DEM query (" + text::fmt(x) + ", " + text::fmt(y) + ") outside grid");
    }
    const auto [c, fx] = locate((x - origin_.x()) / spacing_, cols_);
    const auto [r, fy] = locate((y - origin_.y()) / spacing_, rows_);
    const double e00 = at(r, c);
    const double e01 = at(r, c + 1);
    const double e10 = at(r + 1, c);
    const double e11 = at(r + 1, c + 1);
    return (1.0 - fx) * (1.0 - fy) * e00 + fx * (1.0 - fy) * e01 + (1.0 - fx) * fy * e10 + fx * fy * e11;
}

DemGrid dem_densify(const DemGrid& coarse, int factor) {
    if (factor < 1) throw InvalidArgument("dem_densify: factor must be >= 1");
    if (factor == 1) return coarse;
    const int rows = (coarse.rows() - 1) * factor + 1;
    const int cols = (coarse.cols() - 1) * factor + 1;
    std::vector<double> elev(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        int r0 = std::min(r / factor, coarse.rows() - 2);
        const double fy = static_cast<double>(r - r0 * factor) / factor;
        for (int c = 0; c < cols; ++c) {
            int c0 = std::min(c / factor, coarse.cols() - 2);
            const double fx = static_cast<double>(c - c0 * factor) / factor;
            elev[static_cast<size_t>(r) * cols + c] =
                (1.0 - fx) * (1.0 - fy) * coarse.at(r0, c0) + fx * (1.0 - fy) * coarse.at(r0, c0 + 1) +
                (1.0 - fx) * fy * coarse.at(r0 + 1, c0) + fx * fy * coarse.at(r0 + 1, c0 + 1);
        }
    }
    return DemGrid(coarse.origin(), coarse.spacing() / factor, rows, cols, std::move(elev));
}

DemGrid read_dem(std::istream& in) {
    std::string line;
    int lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!text::split(line).empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw FormatError("DEM: empty input");
    const auto head = text::split(line);
    if (head.size() != 6 || head[0] != "DEM") {
        throw FormatError("DEM line " + std::to_string(lineno) + ": expected 'DEM ox oy spacing rows cols'");
    }
    const Eigen::Vector2d origin(text::parse_double(head[1], "DEM origin_x"),
                                 text::parse_double(head[2], "DEM origin_y"));
    const double spacing = text::parse_double(head[3], "DEM spacing");
    const long long rows = text::parse_int(head[4], "DEM rows");
    const long long cols = text::parse_int(head[5], "DEM cols");
    if (rows < 2 || cols < 2 || rows > 1'000'000 || cols > 1'000'000) {
        throw FormatError("DEM: rows and cols must be >= 2");
    }
    std::vector<double> elev;
    elev.reserve(static_cast<size_t>(rows * cols));
    for (long long r = 0; r < rows; ++r) {
        if (!next_line()) throw FormatError("DEM: expected " + std::to_string(rows) + " elevation rows");
        const auto tok = text::split(line);
        if (static_cast<long long>(tok.size()) != cols) {
            throw FormatError("DEM line " + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                              " values");
        }
        for (auto t : tok) elev.push_back(text::parse_double(t, "DEM elevation"));
    }
    try {
        return DemGrid(origin, spacing, static_cast<int>(rows), static_cast<int>(cols), std::move(elev));
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("DEM: ") + e.what());
    }
}

DemGrid read_dem_file(const std::string& path) {
    auto in = text::open_in(path);
    return read_dem(in);
}

void write_dem(std::ostream& out, const DemGrid& g) {
    out << "DEM " << text::fmt(g.origin().x()) << ' ' << text::fmt(g.origin().y()) << ' '
        << text::fmt(g.spacing()) << ' ' << g.rows() << ' ' << g.cols() << '\n';
    for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
            if (c) out << ' ';
            out << text::fmt(g.at(r, c));
        }
        out << '\n';
    }
}

void write_dem_file(const std::string& path, const DemGrid& g) {
    auto out = text::open_out(path);
    write_dem(out, g);
}

}  // namespace fieldloc
