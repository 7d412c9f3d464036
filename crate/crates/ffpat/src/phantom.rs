//! Deterministic phantom construction for sources, sound speed, and damping.
//!
//! Phantoms are sums of radially symmetric bumps with closed-form profiles,
//! so every downstream test value is reproducible bit for bit.

use crate::error::{FfpatError, Result};
use crate::field::{Grid, ScalarField2D};

/// Radial profile of a single bump, parameterized by `rho = |x - center| / radius`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpProfile {
    /// `exp(1 - 1/(1 - rho^2))` for `rho < 1`, zero otherwise. C-infinity with
    /// compact support; value 1 at the center.
    SmoothBump,
    /// `exp(-4.5 rho^2)` truncated at `rho >= 1` (about 1.1% at the edge).
    GaussianTruncated,
}

impl BumpProfile {
    pub fn eval(&self, rho: f64) -> f64 {
        if rho >= 1.0 {
            return 0.0;
        }
        match self {
            BumpProfile::SmoothBump => (1.0 - 1.0 / (1.0 - rho * rho)).exp(),
            BumpProfile::GaussianTruncated => (-4.5 * rho * rho).exp(),
        }
    }
}

/// One bump primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: (f64, f64),
    pub radius: f64,
    pub amplitude: f64,
    pub profile: BumpProfile,
}

impl Bump {
    pub fn smooth(center: (f64, f64), radius: f64, amplitude: f64) -> Self {
        Bump {
            center,
            radius,
            amplitude,
            profile: BumpProfile::SmoothBump,
        }
    }

    fn eval(&self, x1: f64, x2: f64) -> f64 {
        let dx = x1 - self.center.0;
        let dy = x2 - self.center.1;
        let rho = (dx * dx + dy * dy).sqrt() / self.radius;
        self.amplitude * self.profile.eval(rho)
    }
}

/// What the evaluated bump sum represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomTarget {
    /// Initial pressure `f`; bumps summed directly.
    Source,
    /// Sound speed; the field is `1 +` the bump sum.
    SpeedPerturbation,
    /// Damping coefficient; the bump sum clamped at zero from below.
    Attenuation,
}

/// A list of bumps plus the field they build.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub bumps: Vec<Bump>,
    pub target: PhantomTarget,
}

impl PhantomSpec {
    pub fn new(bumps: Vec<Bump>, target: PhantomTarget) -> Result<Self> {
        let spec = PhantomSpec { bumps, target };
        spec.validate()?;
        Ok(spec)
    }

    /// Every bump's support disc must lie inside `|x| < 0.95`.
    pub fn validate(&self) -> Result<()> {
        for (k, b) in self.bumps.iter().enumerate() {
            if !(b.radius > 0.0) {
                return Err(FfpatError::Validation(format!(
                    "bump {k}: radius must be positive, got {}",
                    b.radius
                )));
            }
            let dist = (b.center.0 * b.center.0 + b.center.1 * b.center.1).sqrt();
            if dist + b.radius >= 0.95 {
                return Err(FfpatError::Validation(format!(
                    "bump {k}: support disc (|center| + radius = {:.4}) must stay inside |x| < 0.95",
                    dist + b.radius
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate a phantom spec on a grid.
pub fn build_phantom(spec: &PhantomSpec, grid: Grid) -> Result<ScalarField2D> {
    spec.validate()?;
    let field = ScalarField2D::from_fn(grid, |x1, x2| {
        let sum: f64 = spec.bumps.iter().map(|b| b.eval(x1, x2)).sum();
        match spec.target {
            PhantomTarget::Source => sum,
            PhantomTarget::SpeedPerturbation => 1.0 + sum,
            PhantomTarget::Attenuation => sum.max(0.0),
        }
    });
    Ok(field)
}

/// The fixed default phantoms: three source bumps, one speed bump giving
/// `c` in `[1, 1.2]`, and one damping bump.
pub fn default_phantoms() -> (PhantomSpec, PhantomSpec, PhantomSpec) {
    let f = PhantomSpec {
        bumps: vec![
            Bump::smooth((-0.3, 0.2), 0.25, 1.0),
            Bump::smooth((0.3, 0.3), 0.2, 0.8),
            Bump::smooth((0.1, -0.35), 0.3, 0.6),
        ],
        target: PhantomTarget::Source,
    };
    let c = PhantomSpec {
        bumps: vec![Bump::smooth((0.0, 0.0), 0.8, 0.2)],
        target: PhantomTarget::SpeedPerturbation,
    };
    let a = PhantomSpec {
        bumps: vec![Bump::smooth((0.1, 0.1), 0.7, 0.5)],
        target: PhantomTarget::Attenuation,
    };
    (f, c, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(201, 1.0).unwrap()
    }

    #[test]
    fn empty_source_spec_is_zero() {
        let spec = PhantomSpec::new(vec![], PhantomTarget::Source).unwrap();
        let f = build_phantom(&spec, grid()).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_speed_spec_is_one() {
        let spec = PhantomSpec::new(vec![], PhantomTarget::SpeedPerturbation).unwrap();
        let c = build_phantom(&spec, grid()).unwrap();
        assert!(c.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_bump_closed_form_values() {
        let spec = PhantomSpec::new(
            vec![Bump::smooth((0.0, 0.0), 0.5, 1.0)],
            PhantomTarget::Source,
        )
        .unwrap();
        let f = build_phantom(&spec, grid()).unwrap();
        // center node of the 201-grid is (100, 100); profile value exp(1-1/1) = 1
        assert!((f.values[[100, 100]] - 1.0).abs() < 1e-15);
        // (0.5, 0) is node (150, 100), exactly on the support edge
        assert_eq!(f.values[[150, 100]], 0.0);
    }

    #[test]
    fn support_outside_inner_disc_is_rejected() {
        let bad = PhantomSpec {
            bumps: vec![Bump::smooth((0.8, 0.0), 0.2, 1.0)],
            target: PhantomTarget::Source,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_speed_phantom_is_bounded() {
        let (_, c_spec, _) = default_phantoms();
        let c = build_phantom(&c_spec, grid()).unwrap();
        let max = c.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = c.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max <= 1.2 + 1e-12);
        assert!(min >= 1.0 - 1e-12);
    }

    #[test]
    fn default_attenuation_is_nonnegative() {
        let (_, _, a_spec) = default_phantoms();
        let a = build_phantom(&a_spec, grid()).unwrap();
        assert!(a.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn default_source_vanishes_outside_inner_disc() {
        let (f_spec, _, _) = default_phantoms();
        let f = build_phantom(&f_spec, grid()).unwrap();
        for ((i, j), &v) in f.values.indexed_iter() {
            let (x, y) = f.grid.node(i, j);
            if x * x + y * y >= 0.95 * 0.95 {
                assert_eq!(v, 0.0, "nonzero at ({x}, {y})");
            }
        }
    }

    #[test]
    fn phantoms_are_bit_reproducible() {
        let (f_spec, c_spec, a_spec) = default_phantoms();
        for spec in [&f_spec, &c_spec, &a_spec] {
            let a = build_phantom(spec, grid()).unwrap();
            let b = build_phantom(spec, grid()).unwrap();
            assert_eq!(a.values, b.values);
        }
    }
}
