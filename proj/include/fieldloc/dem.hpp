#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fieldloc {

/// Regularly spaced elevation grid. Row r lies at y = origin.y + r * spacing,
/// column c at x = origin.x + c * spacing.
class DemGrid {
public:
    DemGrid(Eigen::Vector2d origin, double spacing, int rows, int cols,
            std::vector<double> elevations);

    const Eigen::Vector2d& origin() const { return origin_; }
    double spacing() const { return spacing_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    const std::vector<double>& elevations() const { return elevations_; }

    double at(int row, int col) const { return elevations_[static_cast<size_t>(row) * cols_ + col]; }

    bool contains(double x, double y) const;

    /// Bilinear altitude. Throws OutOfBounds outside the bounding rectangle.
    double query(double x, double y) const;

    bool operator==(const DemGrid&) const = default;

private:
    Eigen::Vector2d origin_;
    double spacing_;
    int rows_;
    int cols_;
    std::vector<double> elevations_;
};

inline double dem_query(const DemGrid& g, double x, double y) { return g.query(x, y); }

/// Resamples the grid at spacing / factor; every new node is a bilinear query
/// of the coarse grid.
DemGrid dem_densify(const DemGrid& coarse, int factor);

DemGrid read_dem(std::istream& in);
DemGrid read_dem_file(const std::string& path);
void write_dem(std::ostream& out, const DemGrid& g);
void write_dem_file(const std::string& path, const DemGrid& g);

}  // namespace fieldloc
