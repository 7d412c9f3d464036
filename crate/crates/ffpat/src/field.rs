//! Grid geometry, scalar fields, and the acoustic medium.
//!
//! Fields live on square Cartesian grids with nodes at cell corners,
//! endpoints included: `n` samples per axis span `[-extent, extent]` with
//! spacing `h = 2*extent/(n-1)`. The object grid (default `[-1,1]^2`) and
//! the simulation grid (default `[-4,4]^2`) are nested when they share the
//! same spacing and their node sets align, which the shipped profiles
//! guarantee; `embed`/`restrict` then move data between them exactly.

use ndarray::Array2;

use crate::error::{FfpatError, Result};

/// Square Cartesian grid on `[-extent, extent]^2`, nodes at corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// Samples per axis.
    pub n: usize,
    /// Physical half-width; the grid covers `[-extent, extent]^2`.
    pub extent: f64,
}

impl Grid {
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 3 {
            return Err(FfpatError::Config(format!("grid needs n >= 3, got {n}")));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(FfpatError::Config(format!(
                "grid extent must be positive and finite, got {extent}"
            )));
        }
        Ok(Grid { n, extent })
    }

    /// Node spacing `h = 2*extent/(n-1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.n - 1) as f64
    }

    /// Cell measure `h^2` used in quadratures.
    pub fn cell_measure(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Physical coordinate of node index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    /// Position `(x1, x2)` of node `(i, j)`; axis 0 is `x1`, axis 1 is `x2`.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coord(i), self.coord(j))
    }

    /// True when `other`'s node set is a subset of this grid's node set.
    ///
    /// Requires equal spacings and an integral, in-range node offset.
    pub fn nests(&self, other: &Grid) -> bool {
        let h = self.spacing();
        if (h - other.spacing()).abs() > 1e-12 * h {
            return false;
        }
        let shift = (other.extent - self.extent).abs() / h;
        if (shift - shift.round()).abs() > 1e-9 {
            return false;
        }
        other.extent <= self.extent + 1e-12
    }

    /// Node offset of a nested inner grid inside this grid.
    pub(crate) fn nest_offset(&self, inner: &Grid) -> usize {
        ((self.extent - inner.extent) / self.spacing()).round() as usize
    }
}

/// Real-valued function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid,
    /// `values[[i, j]]` is the sample at `(x1, x2) = (grid.coord(i), grid.coord(j))`.
    pub values: Array2<f64>,
}

impl ScalarField2D {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.n, grid.n) {
            return Err(FfpatError::shape(
                &[grid.n, grid.n],
                &[values.dim().0, values.dim().1],
                "scalar field",
            ));
        }
        Ok(ScalarField2D { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField2D {
            grid,
            values: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField2D {
            grid,
            values: Array2::from_elem((grid.n, grid.n), value),
        }
    }

    /// Evaluate a function of position at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| {
            let (x1, x2) = grid.node(i, j);
            f(x1, x2)
        });
        ScalarField2D { grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Bilinear interpolation at physical position; zero outside the grid.
    pub fn sample_bilinear(&self, x1: f64, x2: f64) -> f64 {
        let h = self.grid.spacing();
        let n = self.grid.n;
        let fx = (x1 + self.grid.extent) / h;
        let fy = (x2 + self.grid.extent) / h;
        if fx < 0.0 || fy < 0.0 || fx > (n - 1) as f64 || fy > (n - 1) as f64 {
            return 0.0;
        }
        let i0 = (fx.floor() as usize).min(n - 2);
        let j0 = (fy.floor() as usize).min(n - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let v = &self.values;
        (1.0 - tx) * (1.0 - ty) * v[[i0, j0]]
            + tx * (1.0 - ty) * v[[i0 + 1, j0]]
            + (1.0 - tx) * ty * v[[i0, j0 + 1]]
            + tx * ty * v[[i0 + 1, j0 + 1]]
    }

    /// Zero all samples with `|x| >= radius`.
    pub fn mask_disc(&mut self, radius: f64) {
        let grid = self.grid;
        let r2 = radius * radius;
        for ((i, j), v) in self.values.indexed_iter_mut() {
            let (x1, x2) = grid.node(i, j);
            if x1 * x1 + x2 * x2 >= r2 {
                *v = 0.0;
            }
        }
    }

    /// Zero all samples with `|x| < radius` (keep the exterior).
    pub fn mask_exterior(&mut self, radius: f64) {
        let grid = self.grid;
        let r2 = radius * radius;
        for ((i, j), v) in self.values.indexed_iter_mut() {
            let (x1, x2) = grid.node(i, j);
            if x1 * x1 + x2 * x2 < r2 {
                *v = 0.0;
            }
        }
    }
}

/// Sound speed and damping pair on the simulation grid.
///
/// `c` is bounded away from zero, `a` is nonnegative, and both `c - 1` and
/// `a` vanish outside the unit disc.
#[derive(Debug, Clone)]
pub struct Medium {
    pub grid: Grid,
    pub c: ScalarField2D,
    pub a: ScalarField2D,
}

impl Medium {
    /// Validating constructor enforcing the support and sign assumptions.
    pub fn new(c: ScalarField2D, a: ScalarField2D) -> Result<Self> {
        if c.grid != a.grid {
            return Err(FfpatError::Validation(
                "sound speed and damping must share one grid".into(),
            ));
        }
        let grid = c.grid;
        let c_min = c.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(c_min > 0.0) {
            return Err(FfpatError::Validation(format!(
                "sound speed must be bounded away from zero, min = {c_min}"
            )));
        }
        let a_min = a.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if a_min < 0.0 {
            return Err(FfpatError::Validation(format!(
                "damping must be nonnegative, min = {a_min}"
            )));
        }
        for ((i, j), &cv) in c.values.indexed_iter() {
            let (x1, x2) = grid.node(i, j);
            if x1 * x1 + x2 * x2 >= 1.0 {
                let av = a.values[[i, j]];
                if (cv - 1.0).abs() > 1e-12 || av.abs() > 1e-12 {
                    return Err(FfpatError::Validation(format!(
                        "c - 1 and a must vanish outside the unit disc; violated at ({x1}, {x2})"
                    )));
                }
            }
        }
        Ok(Medium { grid, c, a })
    }

    /// Spatially constant medium, used by analytic oracles and benchmarks.
    ///
    /// Skips the support checks: a constant damping has no compact support.
    pub fn homogeneous(grid: Grid, c0: f64, a0: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(FfpatError::Validation(format!(
                "sound speed must be positive, got {c0}"
            )));
        }
        if a0 < 0.0 {
            return Err(FfpatError::Validation(format!(
                "damping must be nonnegative, got {a0}"
            )));
        }
        Ok(Medium {
            grid,
            c: ScalarField2D::constant(grid, c0),
            a: ScalarField2D::constant(grid, a0),
        })
    }

    pub fn c_max(&self) -> f64 {
        self.c.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn c_min(&self) -> f64 {
        self.c.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Copy `src` into a field on `dst_grid`; nodes outside `src`'s extent get
/// `background`. Nested grids copy exactly at shared nodes, otherwise
/// bilinear interpolation is used.
pub fn embed(src: &ScalarField2D, dst_grid: Grid, background: f64) -> ScalarField2D {
    let mut out = ScalarField2D::constant(dst_grid, background);
    if dst_grid.nests(&src.grid) {
        let off = dst_grid.nest_offset(&src.grid);
        for i in 0..src.grid.n {
            for j in 0..src.grid.n {
                out.values[[off + i, off + j]] = src.values[[i, j]];
            }
        }
        return out;
    }
    for ((i, j), v) in out.values.indexed_iter_mut() {
        let (x1, x2) = dst_grid.node(i, j);
        if x1.abs() <= src.grid.extent && x2.abs() <= src.grid.extent {
            *v = src.sample_bilinear(x1, x2);
        }
    }
    out
}

/// Sample `src` on `dst_grid`, discarding everything outside `dst_grid`'s
/// extent. With `mask_unit_disc` the result is multiplied by the indicator
/// of the open unit disc.
pub fn restrict(src: &ScalarField2D, dst_grid: Grid, mask_unit_disc: bool) -> ScalarField2D {
    let mut out = ScalarField2D::zeros(dst_grid);
    if src.grid.nests(&dst_grid) {
        let off = src.grid.nest_offset(&dst_grid);
        for i in 0..dst_grid.n {
            for j in 0..dst_grid.n {
                out.values[[i, j]] = src.values[[off + i, off + j]];
            }
        }
    } else {
        for ((i, j), v) in out.values.indexed_iter_mut() {
            let (x1, x2) = dst_grid.node(i, j);
            *v = src.sample_bilinear(x1, x2);
        }
    }
    if mask_unit_disc {
        out.mask_disc(1.0);
    }
    out
}

/// Relative l2 error `||x - reference|| / ||reference||`, unweighted.
pub fn rel_l2_error(x: &ScalarField2D, reference: &ScalarField2D) -> Result<f64> {
    if x.grid != reference.grid {
        return Err(FfpatError::Validation(
            "relative error requires fields on one grid".into(),
        ));
    }
    rel_l2_error_values(&x.values, &reference.values)
}

/// Relative l2 error on raw sample arrays.
pub fn rel_l2_error_values(x: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    let ref_norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        return Err(FfpatError::Validation(
            "relative error undefined for zero reference".into(),
        ));
    }
    let diff_norm = x
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff_norm / ref_norm)
}
