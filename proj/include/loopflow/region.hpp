#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <variant>
#include <vector>

#include "loopflow/errors.hpp"
#include "loopflow/lti.hpp"

namespace loopflow {

/// Potential value and repelling force at one point of the complex plane.
/// value == 0 exactly on the admissible set, and then force == (0, 0).
struct PotentialSample {
    double          value = 0.0;
    Eigen::Vector2d force = Eigen::Vector2d::Zero();
};

/// Forbidden disk. `margin` inflates the radius before the potential is
/// built, which pushes the response margin-deep clear of the geometric disk.
struct DiskRegion {
    Complex center{0.0, 0.0};
    double  radius = 1.0;
    double  margin = 0.0;
};

/// Forbidden half-plane. `outward_normal` is the unit direction pointing into
/// the forbidden side; `depth_scale` normalizes the penetration depth.
struct HalfPlaneRegion {
    Complex         anchor{0.0, 0.0};
    Eigen::Vector2d outward_normal{1.0, 0.0};
    double          depth_scale = 1.0;
};

enum class CellKind : unsigned char { Admissible = 0, Forbidden = 1, Source = 2 };

/// Rasterized forbidden set over a rectangle, for arbitrary geometry.
/// Cells are addressed (ix, iy) with ix along the real axis; the potential is
/// pinned to 1 at source cells and 0 on admissible and grid-border cells.
struct GridMaskRegion {
    double re_min = 0.0, re_max = 1.0;
    double im_min = 0.0, im_max = 1.0;
    int    nx = 0, ny = 0;
    std::vector<CellKind> cells;  // row-major, iy * nx + ix

    CellKind  cell(int ix, int iy) const { return cells[static_cast<size_t>(iy) * nx + ix]; }
    CellKind& cell(int ix, int iy) { return cells[static_cast<size_t>(iy) * nx + ix]; }
    double    hx() const { return (re_max - re_min) / nx; }
    double    hy() const { return (im_max - im_min) / ny; }

    /// Throws std::invalid_argument when the mask has no forbidden cells or a
    /// source sits on the grid border (sources must be interior).
    void validate() const;
};

/// Converged harmonic potential over a mask, with nodal central-difference
/// forces precomputed at cell centers.
struct LaplaceField {
    Eigen::MatrixXd value;    // (ny, nx)
    Eigen::MatrixXd force_x;  // -dV/dx at nodes
    Eigen::MatrixXd force_y;
    double          residual = 0.0;
    long            sweeps = 0;
};

struct SorSettings {
    double relaxation = 1.8;  // in (1, 2)
    double tolerance = 1e-8;
    long   max_sweeps = 50000;
};

/// Mask plus its solved field; the form consumed by region evaluation.
struct GridRegion {
    GridMaskRegion mask;
    LaplaceField   field;
};

using RegionShape = std::variant<DiskRegion, HalfPlaneRegion, GridRegion>;

/// Union of forbidden shapes. Potentials add, so the summed force stays the
/// exact negative gradient of the summed potential.
struct RegionSpec {
    std::vector<RegionShape> shapes;
};

PotentialSample disk_potential(const DiskRegion& disk, Complex point);
PotentialSample halfplane_potential(const HalfPlaneRegion& hp, Complex point);

/// SOR solve of the 5-point Laplace system on the forbidden interior, V = 1 at
/// sources, V = 0 elsewhere. Throws NotConverged when the sweep budget runs out.
LaplaceField solve_laplace(const GridMaskRegion& mask, const SorSettings& settings = {});

/// Bilinear interpolation of the solved field; hard zero in admissible cells.
/// Throws OutOfBounds for points outside the mask rectangle.
PotentialSample grid_potential(const GridMaskRegion& mask, const LaplaceField& field, Complex point);

PotentialSample eval_region(const RegionSpec& spec, Complex point);

/// Circle-criterion disk for a sector nonlinearity bounded by slopes
/// 0 < k1 < k2: the disk crosses the real axis at -1/k1 and -1/k2.
DiskRegion disk_from_sector(double k1, double k2);

/// Parses the text mask format: "nx ny" header then ny rows of nx cells,
/// 0 admissible / 1 forbidden / 2 source, first row at im_min.
GridMaskRegion load_mask(const std::string& path, double re_min = 0.0, double re_max = 1.0,
                         double im_min = 0.0, double im_max = 1.0);

}  // namespace loopflow
