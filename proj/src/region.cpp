#include "loopflow/region.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace loopflow {

PotentialSample disk_potential(const DiskRegion& disk, Complex point) {
    if (!(disk.radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
    const double r = disk.radius + disk.margin;
    const Complex offset = point - disk.center;
    const double d = std::abs(offset);
    PotentialSample out;
    if (d >= r) return out;

    const double gap = r - d;
    out.value = (gap / r) * (gap / r);
    // Outward unit direction; the center itself gets the fixed fallback (1, 0).
    Eigen::Vector2d u(1.0, 0.0);
    if (d > 0.0) u = Eigen::Vector2d(offset.real() / d, offset.imag() / d);
    out.force = (2.0 * gap / (r * r)) * u;
    return out;
}

PotentialSample halfplane_potential(const HalfPlaneRegion& hp, Complex point) {
    const Eigen::Vector2d rel(point.real() - hp.anchor.real(), point.imag() - hp.anchor.imag());
    const double depth = rel.dot(hp.outward_normal);
    PotentialSample out;
    if (depth <= 0.0) return out;
    const double sigma = hp.depth_scale;
    out.value = (depth / sigma) * (depth / sigma);
    out.force = -(2.0 * depth / (sigma * sigma)) * hp.outward_normal;
    return out;
}

void GridMaskRegion::validate() const {
    if (nx < 3 || ny < 3) throw std::invalid_argument("mask needs at least 3x3 cells");
    if (static_cast<size_t>(nx) * ny != cells.size())
        throw std::invalid_argument("mask cell count does not match dimensions");
    if (!(re_max > re_min) || !(im_max > im_min))
        throw std::invalid_argument("mask bounds rectangle is degenerate");
    bool any_forbidden = false;
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const CellKind k = cell(ix, iy);
            if (k != CellKind::Admissible) any_forbidden = true;
            const bool border = ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1;
            if (k == CellKind::Source && border)
                throw std::invalid_argument("source cells must be interior");
        }
    }
    if (!any_forbidden) throw std::invalid_argument("mask has no forbidden cells");
}

namespace {

bool relaxed_cell(const GridMaskRegion& mask, int ix, int iy) {
    if (ix == 0 || iy == 0 || ix == mask.nx - 1 || iy == mask.ny - 1) return false;
    return mask.cell(ix, iy) == CellKind::Forbidden;
}

}  // namespace

LaplaceField solve_laplace(const GridMaskRegion& mask, const SorSettings& settings) {
    mask.validate();
    if (!(settings.relaxation > 1.0) || !(settings.relaxation < 2.0))
        throw std::invalid_argument("SOR relaxation factor must lie in (1, 2)");
    if (!(settings.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");

    LaplaceField field;
    field.value = Eigen::MatrixXd::Zero(mask.ny, mask.nx);
    for (int iy = 0; iy < mask.ny; ++iy)
        for (int ix = 0; ix < mask.nx; ++ix)
            if (mask.cell(ix, iy) == CellKind::Source) field.value(iy, ix) = 1.0;

    Eigen::MatrixXd& v = field.value;
    double residual = 0.0;
    long sweep = 0;
    for (; sweep < settings.max_sweeps; ++sweep) {
        for (int iy = 1; iy < mask.ny - 1; ++iy) {
            for (int ix = 1; ix < mask.nx - 1; ++ix) {
                if (!relaxed_cell(mask, ix, iy)) continue;
                const double avg =
                    0.25 * (v(iy, ix + 1) + v(iy, ix - 1) + v(iy + 1, ix) + v(iy - 1, ix));
                v(iy, ix) += settings.relaxation * (avg - v(iy, ix));
            }
        }
        residual = 0.0;
        for (int iy = 1; iy < mask.ny - 1; ++iy) {
            for (int ix = 1; ix < mask.nx - 1; ++ix) {
                if (!relaxed_cell(mask, ix, iy)) continue;
                const double lap =
                    v(iy, ix + 1) + v(iy, ix - 1) + v(iy + 1, ix) + v(iy - 1, ix) - 4.0 * v(iy, ix);
                residual = std::max(residual, std::abs(lap));
            }
        }
        if (residual <= settings.tolerance) break;
    }
    field.residual = residual;
    field.sweeps = sweep + 1;
    if (residual > settings.tolerance) throw NotConverged(settings.max_sweeps, residual);

    // Nodal force = -grad V by central differences, one-sided on the border.
    const double hx = mask.hx(), hy = mask.hy();
    field.force_x = Eigen::MatrixXd::Zero(mask.ny, mask.nx);
    field.force_y = Eigen::MatrixXd::Zero(mask.ny, mask.nx);
    for (int iy = 0; iy < mask.ny; ++iy) {
        for (int ix = 0; ix < mask.nx; ++ix) {
            double dvx, dvy;
            if (ix == 0)
                dvx = (v(iy, 1) - v(iy, 0)) / hx;
            else if (ix == mask.nx - 1)
                dvx = (v(iy, ix) - v(iy, ix - 1)) / hx;
            else
                dvx = (v(iy, ix + 1) - v(iy, ix - 1)) / (2.0 * hx);
            if (iy == 0)
                dvy = (v(1, ix) - v(0, ix)) / hy;
            else if (iy == mask.ny - 1)
                dvy = (v(iy, ix) - v(iy - 1, ix)) / hy;
            else
                dvy = (v(iy + 1, ix) - v(iy - 1, ix)) / (2.0 * hy);
            field.force_x(iy, ix) = -dvx;
            field.force_y(iy, ix) = -dvy;
        }
    }
    return field;
}

PotentialSample grid_potential(const GridMaskRegion& mask, const LaplaceField& field, Complex point) {
    const double x = point.real(), y = point.imag();
    if (x < mask.re_min || x > mask.re_max || y < mask.im_min || y > mask.im_max)
        throw OutOfBounds("point outside mask bounds");

    const double hx = mask.hx(), hy = mask.hy();
    int cx = std::min(static_cast<int>((x - mask.re_min) / hx), mask.nx - 1);
    int cy = std::min(static_cast<int>((y - mask.im_min) / hy), mask.ny - 1);

    PotentialSample out;
    if (mask.cell(cx, cy) == CellKind::Admissible) return out;  // hard zero outside the raster

    // Bilinear interpolation between cell-center nodes, clamped at the border.
    double u = (x - mask.re_min) / hx - 0.5;
    double w = (y - mask.im_min) / hy - 0.5;
    u = std::min(std::max(u, 0.0), static_cast<double>(mask.nx - 1));
    w = std::min(std::max(w, 0.0), static_cast<double>(mask.ny - 1));
    const int i0 = std::min(static_cast<int>(u), mask.nx - 2);
    const int j0 = std::min(static_cast<int>(w), mask.ny - 2);
    const double fu = u - i0, fw = w - j0;

    auto blend = [&](const Eigen::MatrixXd& m) {
        return (1 - fu) * (1 - fw) * m(j0, i0) + fu * (1 - fw) * m(j0, i0 + 1) +
               (1 - fu) * fw * m(j0 + 1, i0) + fu * fw * m(j0 + 1, i0 + 1);
    };
    out.value = blend(field.value);
    if (out.value <= 0.0) {
        out.value = 0.0;
        return out;
    }
    out.force = Eigen::Vector2d(blend(field.force_x), blend(field.force_y));
    return out;
}

PotentialSample eval_region(const RegionSpec& spec, Complex point) {
    PotentialSample total;
    for (const auto& shape : spec.shapes) {
        const PotentialSample s = std::visit(
            [&](const auto& sh) -> PotentialSample {
                using T = std::decay_t<decltype(sh)>;
                if constexpr (std::is_same_v<T, DiskRegion>)
                    return disk_potential(sh, point);
                else if constexpr (std::is_same_v<T, HalfPlaneRegion>)
                    return halfplane_potential(sh, point);
                else
                    return grid_potential(sh.mask, sh.field, point);
            },
            shape);
        total.value += s.value;
        total.force += s.force;
    }
    return total;
}

DiskRegion disk_from_sector(double k1, double k2) {
    if (!(k1 > 0.0) || !(k2 > k1)) throw InvalidSector("need 0 < k1 < k2");
    DiskRegion disk;
    disk.center = Complex(0.5 * (-1.0 / k1 - 1.0 / k2), 0.0);
    disk.radius = 0.5 * (1.0 / k1 - 1.0 / k2);
    return disk;
}

GridMaskRegion load_mask(const std::string& path, double re_min, double re_max, double im_min,
                         double im_max) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path);
    GridMaskRegion mask;
    mask.re_min = re_min;
    mask.re_max = re_max;
    mask.im_min = im_min;
    mask.im_max = im_max;
    if (!(in >> mask.nx >> mask.ny) || mask.nx <= 0 || mask.ny <= 0)
        throw std::invalid_argument("mask header must be 'nx ny' with positive sizes");
    mask.cells.resize(static_cast<size_t>(mask.nx) * mask.ny);
    for (int iy = 0; iy < mask.ny; ++iy) {
        for (int ix = 0; ix < mask.nx; ++ix) {
            int c;
            if (!(in >> c) || c < 0 || c > 2)
                throw std::invalid_argument("mask cells must be 0, 1 or 2");
            mask.cell(ix, iy) = static_cast<CellKind>(c);
        }
    }
    mask.validate();
    return mask;
}

}  // namespace loopflow
