//! Pseudospectral time stepping for the damped wave equation and the
//! wave-side operators built on it.
//!
//! One stepper serves all four operators. The forward equation
//! `c^-2 u_tt + a u_t - lap u = 0` is advanced with a spectral Laplacian
//! and second-order centered differences in time for both `u_tt` and the
//! damping term,
//!
//! ```text
//! c^-2 (u[n+1] - 2 u[n] + u[n-1]) / dt^2
//!     + a (u[n+1] - u[n-1]) / (2 dt) = lap u[n],
//! ```
//!
//! solved pointwise for `u[n+1]`. The time-reversed and adjoint equations
//! carry the damping term with the opposite sign but run backward in time;
//! substituting `tau = T - t` flips both at once, so they reduce to the
//! same forward recursion with their final data as initial data.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{FfpatError, Result};
use crate::field::{embed, restrict, Grid, Medium, ScalarField2D};
use crate::ops::{LinearOperator, Space};
use crate::spectral::{Spectral2D, SpectralScratch};

/// Configuration of one wave solve on the simulation grid.
#[derive(Debug, Clone)]
pub struct WaveConfig {
    pub medium: Medium,
    /// Final time `T`.
    pub t_final: f64,
    /// Number of time steps; `dt = t_final / nt`.
    pub nt: usize,
}

impl WaveConfig {
    pub fn new(medium: Medium, t_final: f64, nt: usize) -> Result<Self> {
        let cfg = WaveConfig {
            medium,
            t_final,
            nt,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 || !(self.t_final > 0.0) {
            return Err(FfpatError::Config(format!(
                "need t_final > 0 and nt >= 1; got T = {}, nt = {}",
                self.t_final, self.nt
            )));
        }
        let grid = self.medium.grid;
        let engine = Spectral2D::new(grid.n, grid.spacing());
        let cfl = self.medium.c_max() * self.dt() * engine.k_max();
        // centered-difference / spectral stability limit
        if cfl >= 2.0 {
            return Err(FfpatError::Config(format!(
                "unstable time step: c_max * dt * k_max = {cfl:.4} >= 2; \
                 reduce dt or coarsen the grid"
            )));
        }
        // Waves must not wrap around the periodic boundary and return
        // before T. Sources sit inside the unit disc and the exterior
        // sound speed bounds the sprint to the boundary.
        let c_ext = exterior_speed(&self.medium);
        if c_ext * self.t_final > grid.extent - 1.0 + 1e-9 {
            log::warn!(
                "periodic wrap margin exhausted: exterior speed {c_ext} over T = {} exceeds \
                 extent - 1 = {}; final-time fields near the boundary may be contaminated",
                self.t_final,
                grid.extent - 1.0
            );
        }
        Ok(())
    }
}

fn check_finite(u: &Array2<f64>, step: usize) -> Result<()> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FfpatError::Divergence {
            step,
            context: "wave field became non-finite".into(),
        })
    }
}

/// Largest sound speed outside the unit disc.
fn exterior_speed(medium: &Medium) -> f64 {
    let grid = medium.grid;
    let mut c_ext = 0.0_f64;
    for ((i, j), &cv) in medium.c.values.indexed_iter() {
        let (x1, x2) = grid.node(i, j);
        if x1 * x1 + x2 * x2 >= 1.0 {
            c_ext = c_ext.max(cv);
        }
    }
    c_ext
}

/// Pair of initial data `(f1, f2) = (u(0), u_t(0))` on the simulation grid.
#[derive(Debug, Clone)]
pub struct InitialPair {
    pub f1: ScalarField2D,
    pub f2: ScalarField2D,
}

impl InitialPair {
    pub fn new(f1: ScalarField2D, f2: ScalarField2D) -> Result<Self> {
        if f1.grid != f2.grid {
            return Err(FfpatError::Validation(
                "initial pair must live on one grid".into(),
            ));
        }
        Ok(InitialPair { f1, f2 })
    }

    pub fn zeros(grid: Grid) -> Self {
        InitialPair {
            f1: ScalarField2D::zeros(grid),
            f2: ScalarField2D::zeros(grid),
        }
    }
}

/// Per-solve options; the default runs lean.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Record the discrete energy at every interior step.
    pub track_energy: bool,
    /// Store a snapshot of `u` every k-th step (plus step 0 and the final step).
    pub snapshot_stride: Option<usize>,
}

/// Output of one solve.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    /// `u(., T)`.
    pub u_final: ScalarField2D,
    /// Centered-difference estimate of `u_t(., T)` (one extra step).
    pub ut_final: ScalarField2D,
    /// Discrete energies at steps `1..=nt` when tracking was requested:
    /// `E[n] = sum(c^-2 ((u[n+1]-u[n-1])/(2 dt))^2 + |grad u[n]|^2) h^2`.
    pub energies: Option<Vec<f64>>,
    /// `(step, u[step])` snapshots when a stride was requested.
    pub snapshots: Vec<(usize, ScalarField2D)>,
}

/// Owns the spectral engine and the precomputed diagonal step factors for
/// one [`WaveConfig`]. Solves are pure; one stepper may serve many solves
/// concurrently.
pub struct WaveStepper {
    cfg: WaveConfig,
    engine: Spectral2D,
    /// `1 / (c^-2/dt^2 + a/(2 dt))`.
    inv_dplus: Array2<f64>,
    /// `c^-2/dt^2 - a/(2 dt)`.
    dminus: Array2<f64>,
    /// `2 c^-2 / dt^2`.
    two_invc2_dt2: Array2<f64>,
    inv_c2: Array2<f64>,
}

impl WaveStepper {
    pub fn new(cfg: WaveConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.medium.grid;
        let dt = cfg.dt();
        let c = &cfg.medium.c.values;
        let a = &cfg.medium.a.values;
        let inv_c2 = c.mapv(|v| 1.0 / (v * v));
        let inv_dplus = ndarray::Zip::from(&inv_c2)
            .and(a)
            .map_collect(|ic2, av| 1.0 / (ic2 / (dt * dt) + av / (2.0 * dt)));
        let dminus = ndarray::Zip::from(&inv_c2)
            .and(a)
            .map_collect(|ic2, av| ic2 / (dt * dt) - av / (2.0 * dt));
        let two_invc2_dt2 = inv_c2.mapv(|ic2| 2.0 * ic2 / (dt * dt));
        Ok(WaveStepper {
            engine: Spectral2D::new(grid.n, grid.spacing()),
            cfg,
            inv_dplus,
            dminus,
            two_invc2_dt2,
            inv_c2,
        })
    }

    pub fn config(&self) -> &WaveConfig {
        &self.cfg
    }

    pub fn grid(&self) -> Grid {
        self.cfg.medium.grid
    }

    /// Advance the damped wave equation from `init` to `t_final`.
    pub fn solve(&self, init: &InitialPair, opts: &SolveOptions) -> Result<WaveSolution> {
        let grid = self.grid();
        if init.f1.grid != grid {
            return Err(FfpatError::Validation(
                "initial data must live on the simulation grid".into(),
            ));
        }
        let n = grid.n;
        let nt = self.cfg.nt;
        let dt = self.cfg.dt();
        let h2 = grid.cell_measure();
        let c2 = &self.cfg.medium.c.values;
        let a = &self.cfg.medium.a.values;

        let mut scratch = SpectralScratch::new(n);
        let mut lap = Array2::<f64>::zeros((n, n));
        let mut grads = if opts.track_energy {
            Some((Array2::<f64>::zeros((n, n)), Array2::<f64>::zeros((n, n))))
        } else {
            None
        };

        let mut u_prev = init.f1.values.clone();
        // first step: u[1] = u[0] + dt f2 + dt^2/2 c^2 (lap f1 - a f2)
        self.engine.laplacian(&u_prev, &mut lap, None, &mut scratch);
        let mut u_cur = Array2::from_shape_fn((n, n), |idx| {
            let cc = c2[idx] * c2[idx];
            u_prev[idx] + dt * init.f2.values[idx]
                + 0.5 * dt * dt * cc * (lap[idx] - a[idx] * init.f2.values[idx])
        });
        check_finite(&u_cur, 1)?;

        let mut snapshots = Vec::new();
        if let Some(stride) = opts.snapshot_stride {
            if stride == 0 {
                return Err(FfpatError::Config("snapshot stride must be >= 1".into()));
            }
            snapshots.push((0, ScalarField2D::new(grid, u_prev.clone())?));
            if 1 % stride == 0 && nt > 1 {
                snapshots.push((1, ScalarField2D::new(grid, u_cur.clone())?));
            }
        }

        let mut energies = if opts.track_energy { Some(Vec::new()) } else { None };
        let mut u_before_final = None;
        let mut u_new = Array2::<f64>::zeros((n, n));

        // steps computing u[s+1] for s = 1..=nt; the step past nt feeds the
        // centered time-derivative at T
        for s in 1..=nt {
            let grad_arg = grads.as_mut().map(|(gx, gy)| (&mut *gx, &mut *gy));
            self.engine.laplacian(&u_cur, &mut lap, grad_arg, &mut scratch);
            let mut max_abs = 0.0_f64;
            {
                let un = u_new.as_slice_mut().expect("contiguous");
                let ls = lap.as_slice().expect("contiguous");
                let uc = u_cur.as_slice().expect("contiguous");
                let up = u_prev.as_slice().expect("contiguous");
                let idp = self.inv_dplus.as_slice().expect("contiguous");
                let dm = self.dminus.as_slice().expect("contiguous");
                let tc = self.two_invc2_dt2.as_slice().expect("contiguous");
                for i in 0..un.len() {
                    let v = idp[i] * (ls[i] + tc[i] * uc[i] - dm[i] * up[i]);
                    un[i] = v;
                    max_abs = max_abs.max(v.abs());
                }
            }
            if !max_abs.is_finite() {
                return Err(FfpatError::Divergence {
                    step: s + 1,
                    context: "wave field became non-finite".into(),
                });
            }

            if let (Some(list), Some((gx, gy))) = (energies.as_mut(), grads.as_ref()) {
                let mut e = 0.0;
                let unew = u_new.as_slice().expect("contiguous");
                let uold = u_prev.as_slice().expect("contiguous");
                let ic2 = self.inv_c2.as_slice().expect("contiguous");
                let gxs = gx.as_slice().expect("contiguous");
                let gys = gy.as_slice().expect("contiguous");
                for i in 0..unew.len() {
                    let ut = (unew[i] - uold[i]) / (2.0 * dt);
                    e += ic2[i] * ut * ut + gxs[i] * gxs[i] + gys[i] * gys[i];
                }
                list.push(e * h2);
            }

            if s == nt - 1 {
                u_before_final = Some(u_cur.clone());
            }
            std::mem::swap(&mut u_prev, &mut u_cur);
            std::mem::swap(&mut u_cur, &mut u_new);
            // now u_cur = u[s+1], u_prev = u[s]

            if let Some(stride) = opts.snapshot_stride {
                let step = s + 1;
                if step <= nt && (step % stride == 0 || step == nt) {
                    snapshots.push((step, ScalarField2D::new(grid, u_cur.clone())?));
                }
            }
        }

        // after the loop u_cur = u[nt+1], u_prev = u[nt] = u(T)
        let u_final = ScalarField2D::new(grid, u_prev.clone())?;
        let before = match (nt, u_before_final) {
            (1, _) => init.f1.values.clone(),
            (_, Some(b)) => b,
            _ => unreachable!("u[nt-1] recorded for nt >= 2"),
        };
        let ut_values = ndarray::Zip::from(&u_cur)
            .and(&before)
            .map_collect(|&after, &bef| (after - bef) / (2.0 * dt));
        let ut_final = ScalarField2D::new(grid, ut_values)?;
        Ok(WaveSolution {
            u_final,
            ut_final,
            energies,
            snapshots,
        })
    }
}

/// Solve the forward damped wave equation; returns `(u(., T), u_t(., T))`.
pub fn solve_forward(cfg: &WaveConfig, init: &InitialPair) -> Result<(ScalarField2D, ScalarField2D)> {
    let stepper = WaveStepper::new(cfg.clone())?;
    let sol = stepper.solve(init, &SolveOptions::default())?;
    Ok((sol.u_final, sol.ut_final))
}

/// Scalar-source forward map `W`: object-grid `f` to `u(., T)` on the full
/// simulation grid, with initial data `(f, -c^2 a f)`.
///
/// Input is projected onto the unit disc first, matching the admissible
/// source space.
pub fn forward_w(stepper: &WaveStepper, obj_grid: Grid, f: &ScalarField2D) -> Result<ScalarField2D> {
    if f.grid != obj_grid {
        return Err(FfpatError::Validation(
            "source must live on the object grid".into(),
        ));
    }
    let mut f_masked = f.clone();
    f_masked.mask_disc(1.0);
    let f1 = embed(&f_masked, stepper.grid(), 0.0);
    let init = couple_source(stepper, f1)?;
    let sol = stepper.solve(&init, &SolveOptions::default())?;
    Ok(sol.u_final)
}

/// Build the coupled initial pair `(g, -c^2 a g)` on the simulation grid.
fn couple_source(stepper: &WaveStepper, g: ScalarField2D) -> Result<InitialPair> {
    let medium = &stepper.config().medium;
    let f2 = ndarray::Zip::from(&g.values)
        .and(&medium.c.values)
        .and(&medium.a.values)
        .map_collect(|&gv, &cv, &av| -cv * cv * av * gv);
    InitialPair::new(g, ScalarField2D::new(medium.grid, f2)?)
}

/// Adjoint of [`forward_w`] in the `c^-2`-weighted inner products: solves
/// the time-reversed adjoint equation backward from final data
/// `(g, c^2 a g)` and restricts `q(., 0)` to the object grid inside the
/// unit disc.
///
/// In reversed time the adjoint equation is again the forward damped
/// equation with initial pair `(g, -c^2 a g)`.
pub fn adjoint_w(stepper: &WaveStepper, obj_grid: Grid, g: &ScalarField2D) -> Result<ScalarField2D> {
    if g.grid != stepper.grid() {
        return Err(FfpatError::Validation(
            "adjoint input must live on the simulation grid".into(),
        ));
    }
    let init = couple_source(stepper, g.clone())?;
    let sol = stepper.solve(&init, &SolveOptions::default())?;
    Ok(restrict(&sol.u_final, obj_grid, true))
}

/// Time reversal: solve the reversed equation backward from
/// `(v(T), v_t(T)) = (h, 0)` and return `(v(., 0), v_t(., 0))`.
pub fn time_reverse(stepper: &WaveStepper, h: &ScalarField2D) -> Result<InitialPair> {
    if h.grid != stepper.grid() {
        return Err(FfpatError::Validation(
            "time reversal input must live on the simulation grid".into(),
        ));
    }
    let init = InitialPair::new(h.clone(), ScalarField2D::zeros(stepper.grid()))?;
    let sol = stepper.solve(&init, &SolveOptions::default())?;
    // d/dt at t=0 is minus d/dtau at tau=T
    let mut ut = sol.ut_final;
    ut.values.mapv_inplace(|v| -v);
    InitialPair::new(sol.u_final, ut)
}

/// `W` as a matrix-free operator between the `c^-2`-weighted spaces.
pub struct WaveOperator {
    stepper: Arc<WaveStepper>,
    obj_grid: Grid,
    domain: Space,
    range: Space,
}

impl WaveOperator {
    pub fn new(stepper: Arc<WaveStepper>, obj_grid: Grid) -> Result<Self> {
        let sim_grid = stepper.grid();
        if !sim_grid.nests(&obj_grid) && obj_grid.extent > sim_grid.extent {
            return Err(FfpatError::Config(
                "object grid must fit inside the simulation grid".into(),
            ));
        }
        let c_obj = restrict(&stepper.config().medium.c, obj_grid, false);
        let w_obj = c_obj.values.mapv(|v| 1.0 / (v * v)).into_dyn();
        let w_sim = stepper
            .config()
            .medium
            .c
            .values
            .mapv(|v| 1.0 / (v * v))
            .into_dyn();
        let domain = Space::weighted(
            &[obj_grid.n, obj_grid.n],
            obj_grid.cell_measure(),
            w_obj,
        )?;
        let range = Space::weighted(
            &[sim_grid.n, sim_grid.n],
            sim_grid.cell_measure(),
            w_sim,
        )?;
        Ok(WaveOperator {
            stepper,
            obj_grid,
            domain,
            range,
        })
    }

    pub fn stepper(&self) -> &Arc<WaveStepper> {
        &self.stepper
    }

    pub fn object_grid(&self) -> Grid {
        self.obj_grid
    }
}

impl LinearOperator for WaveOperator {
    fn domain(&self) -> &Space {
        &self.domain
    }

    fn range(&self) -> &Space {
        &self.range
    }

    fn apply(&self, x: &ndarray::ArrayD<f64>) -> Result<ndarray::ArrayD<f64>> {
        self.domain.check(x, "wave operator input")?;
        let f = ScalarField2D::new(
            self.obj_grid,
            x.to_owned()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("checked shape"),
        )?;
        Ok(forward_w(&self.stepper, self.obj_grid, &f)?.values.into_dyn())
    }

    fn apply_adjoint(&self, y: &ndarray::ArrayD<f64>) -> Result<ndarray::ArrayD<f64>> {
        self.range.check(y, "wave operator adjoint input")?;
        let g = ScalarField2D::new(
            self.stepper.grid(),
            y.to_owned()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("checked shape"),
        )?;
        Ok(adjoint_w(&self.stepper, self.obj_grid, &g)?.values.into_dyn())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rel_l2_error;
    use std::f64::consts::PI;

    fn homogeneous_cfg(n: usize, extent: f64, c0: f64, a0: f64, t: f64, nt: usize) -> WaveConfig {
        let grid = Grid::new(n, extent).unwrap();
        let medium = Medium::homogeneous(grid, c0, a0).unwrap();
        WaveConfig::new(medium, t, nt).unwrap()
    }

    /// cos(k.x) for an on-grid periodic mode (m1, m2); returns the field and |k|.
    fn mode(grid: Grid, m1: f64, m2: f64) -> (ScalarField2D, f64) {
        let period = grid.n as f64 * grid.spacing();
        let k1 = 2.0 * PI * m1 / period;
        let k2 = 2.0 * PI * m2 / period;
        let field = ScalarField2D::from_fn(grid, |x, y| (k1 * x + k2 * y).cos());
        (field, (k1 * k1 + k2 * k2).sqrt())
    }

    #[test]
    fn zero_init_stays_zero() {
        let cfg = homogeneous_cfg(65, 1.0, 1.0, 0.0, 1.0, 50);
        let init = InitialPair::zeros(cfg.medium.grid);
        let (u, ut) = solve_forward(&cfg, &init).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
        assert!(ut.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn undamped_single_mode_matches_per_mode_ode() {
        let cfg = homogeneous_cfg(101, 1.0, 1.0, 0.0, 1.0, 200);
        let grid = cfg.medium.grid;
        let (mode_field, knorm) = mode(grid, 2.0, 1.0);
        let init = InitialPair::new(mode_field.clone(), ScalarField2D::zeros(grid)).unwrap();
        let (u, ut) = solve_forward(&cfg, &init).unwrap();

        // per-mode oracle: amp'' = -|k|^2 amp, amp(0)=1, amp'(0)=0
        let amp = (knorm * cfg.t_final).cos();
        let mut expected = mode_field.clone();
        expected.values.mapv_inplace(|v| v * amp);
        let err = rel_l2_error(&u, &expected).unwrap();
        assert!(err <= 1e-3, "relative error {err}");

        let amp_t = -knorm * (knorm * cfg.t_final).sin();
        let mut expected_t = mode_field;
        expected_t.values.mapv_inplace(|v| v * amp_t);
        let err_t = rel_l2_error(&ut, &expected_t).unwrap();
        assert!(err_t <= 1e-3, "time-derivative relative error {err_t}");
    }

    #[test]
    fn damped_single_mode_matches_underdamped_ode() {
        let alpha = 0.5; // constant damping
        let cfg = homogeneous_cfg(101, 1.0, 1.0, alpha, 1.0, 200);
        let grid = cfg.medium.grid;
        let (mode_field, knorm) = mode(grid, 2.0, 1.0);
        let init = InitialPair::new(mode_field.clone(), ScalarField2D::zeros(grid)).unwrap();
        let (u, _) = solve_forward(&cfg, &init).unwrap();

        // amp'' + alpha amp' + |k|^2 amp = 0, amp(0)=1, amp'(0)=0 (underdamped)
        let wd = (knorm * knorm - alpha * alpha / 4.0).sqrt();
        let t = cfg.t_final;
        let amp = (-alpha * t / 2.0).exp() * ((wd * t).cos() + alpha / (2.0 * wd) * (wd * t).sin());
        let mut expected = mode_field;
        expected.values.mapv_inplace(|v| v * amp);
        let err = rel_l2_error(&u, &expected).unwrap();
        assert!(err <= 1e-2, "relative error {err}");
    }

    #[test]
    fn time_reverse_single_mode_matches_backward_ode() {
        let cfg = homogeneous_cfg(101, 1.0, 1.0, 0.0, 1.0, 200);
        let grid = cfg.medium.grid;
        let stepper = WaveStepper::new(cfg.clone()).unwrap();
        let (mode_field, knorm) = mode(grid, 2.0, 1.0);
        let pair = time_reverse(&stepper, &mode_field).unwrap();

        // v(T)=h, v_t(T)=0 backward: v(0) = cos(|k|T) h, v_t(0) = |k| sin(|k|T) h
        let mut expected0 = mode_field.clone();
        expected0.values.mapv_inplace(|v| v * (knorm * cfg.t_final).cos());
        let err0 = rel_l2_error(&pair.f1, &expected0).unwrap();
        assert!(err0 <= 1e-2, "v(0) relative error {err0}");

        let mut expected_t = mode_field;
        expected_t
            .values
            .mapv_inplace(|v| v * knorm * (knorm * cfg.t_final).sin());
        let err_t = rel_l2_error(&pair.f2, &expected_t).unwrap();
        assert!(err_t <= 1e-2, "v_t(0) relative error {err_t}");
    }

    fn pat_setup(obj_n: usize, sim_n: usize, t: f64, nt: usize) -> (WaveConfig, Grid, ScalarField2D) {
        let obj = Grid::new(obj_n, 1.0).unwrap();
        let sim = Grid::new(sim_n, 4.0).unwrap();
        let (f_spec, c_spec, a_spec) = crate::phantom::default_phantoms();
        let f = crate::phantom::build_phantom(&f_spec, obj).unwrap();
        let c_obj = crate::phantom::build_phantom(&c_spec, obj).unwrap();
        let a_obj = crate::phantom::build_phantom(&a_spec, obj).unwrap();
        let medium = Medium::new(embed(&c_obj, sim, 1.0), embed(&a_obj, sim, 0.0)).unwrap();
        (WaveConfig::new(medium, t, nt).unwrap(), obj, f)
    }

    #[test]
    fn forward_w_of_zero_is_zero() {
        let (cfg, obj, _) = pat_setup(26, 101, 1.0, 60);
        let stepper = WaveStepper::new(cfg).unwrap();
        let z = ScalarField2D::zeros(obj);
        let u = forward_w(&stepper, obj, &z).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lossless_medium_conserves_energy() {
        let obj = Grid::new(51, 1.0).unwrap();
        let sim = Grid::new(201, 4.0).unwrap();
        let (f_spec, c_spec, _) = crate::phantom::default_phantoms();
        let f = crate::phantom::build_phantom(&f_spec, obj).unwrap();
        let c_obj = crate::phantom::build_phantom(&c_spec, obj).unwrap();
        let medium = Medium::new(
            embed(&c_obj, sim, 1.0),
            ScalarField2D::zeros(sim),
        )
        .unwrap();
        // dt = 0.0025 keeps the O((c k dt)^2) centered-difference artifact
        // in the energy functional well under the 1e-3 conservation target
        let cfg = WaveConfig::new(medium, 3.0, 1200).unwrap();
        let stepper = WaveStepper::new(cfg).unwrap();
        let mut f1 = embed(&f, sim, 0.0);
        f1.mask_disc(1.0);
        let init = InitialPair::new(f1, ScalarField2D::zeros(sim)).unwrap();
        let sol = stepper
            .solve(
                &init,
                &SolveOptions {
                    track_energy: true,
                    snapshot_stride: None,
                },
            )
            .unwrap();
        let energies = sol.energies.unwrap();
        let first = energies[0];
        let worst = energies
            .iter()
            .map(|e| (e - first).abs())
            .fold(0.0, f64::max);
        assert!(
            worst <= 1e-3 * first,
            "energy deviated by {worst} from {first}"
        );
    }

    #[test]
    fn damped_medium_dissipates_energy_monotonically() {
        let (cfg, obj, f) = pat_setup(51, 201, 3.0, 300);
        let stepper = WaveStepper::new(cfg).unwrap();
        let mut f1 = embed(&f, stepper.grid(), 0.0);
        f1.mask_disc(1.0);
        let init = couple_source(&stepper, f1).unwrap();
        let sol = stepper
            .solve(
                &init,
                &SolveOptions {
                    track_energy: true,
                    snapshot_stride: None,
                },
            )
            .unwrap();
        let energies = sol.energies.unwrap();
        for w in energies.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-3),
                "energy increased from {} to {}",
                w[0],
                w[1]
            );
        }
        let first = energies[0];
        let last = *energies.last().unwrap();
        assert!(last < first, "damping should strictly dissipate");
        let _ = obj;
    }

    #[test]
    fn adjoint_degenerates_to_time_reversal_when_undamped() {
        let obj = Grid::new(26, 1.0).unwrap();
        let sim = Grid::new(101, 4.0).unwrap();
        let medium = Medium::homogeneous(sim, 1.0, 0.0).unwrap();
        let cfg = WaveConfig::new(medium, 1.0, 60).unwrap();
        let stepper = WaveStepper::new(cfg).unwrap();
        let g = ScalarField2D::from_fn(sim, |x, y| (-(x * x + y * y)).exp());
        let adj = adjoint_w(&stepper, obj, &g).unwrap();
        let tr = time_reverse(&stepper, &g).unwrap();
        let tr_restricted = restrict(&tr.f1, obj, true);
        let max_diff = adj
            .values
            .iter()
            .zip(tr_restricted.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff <= 1e-10, "max diff {max_diff}");
    }

    #[test]
    fn unstable_time_step_is_rejected() {
        let grid = Grid::new(101, 1.0).unwrap();
        let medium = Medium::homogeneous(grid, 1.0, 0.0).unwrap();
        // k_max ~ pi/h = 158.7; dt = 0.05 gives c dt k_max ~ 7.9
        assert!(WaveConfig::new(medium, 1.0, 20).is_err());
    }

    #[test]
    fn non_finite_initial_data_reports_divergence_step() {
        let cfg = homogeneous_cfg(65, 1.0, 1.0, 0.0, 1.0, 100);
        let grid = cfg.medium.grid;
        let mut f1 = ScalarField2D::zeros(grid);
        f1.values[[3, 3]] = f64::NAN;
        let init = InitialPair::new(f1, ScalarField2D::zeros(grid)).unwrap();
        match solve_forward(&cfg, &init) {
            Err(FfpatError::Divergence { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn wave_operator_linearity() {
        let (cfg, obj, _) = pat_setup(26, 101, 1.0, 60);
        let stepper = Arc::new(WaveStepper::new(cfg).unwrap());
        let op = WaveOperator::new(stepper, obj).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = op.domain().sample_standard_normal(&mut rng);
        let v = op.domain().sample_standard_normal(&mut rng);
        let (alpha, beta) = (0.7, -1.3);
        let lin = op.apply(&(alpha * &u + beta * &v)).unwrap();
        let au = op.apply(&u).unwrap();
        let av = op.apply(&v).unwrap();
        let combo = alpha * &au + beta * &av;
        let num = (&lin - &combo).mapv(|x| x * x).sum().sqrt();
        let den = au.mapv(|x| x * x).sum().sqrt() + av.mapv(|x| x * x).sum().sqrt();
        assert!(num <= 1e-10 * den, "linearity defect {}", num / den);
    }

    #[test]
    fn small_scale_adjoint_dot_test() {
        let (cfg, obj, _) = pat_setup(26, 101, 1.0, 60);
        let stepper = Arc::new(WaveStepper::new(cfg).unwrap());
        let op = WaveOperator::new(stepper, obj).unwrap();
        let report = crate::ops::dot_test(&op, 5, 11).unwrap();
        assert!(
            report.max_rel_discrepancy <= 2e-2,
            "dot test discrepancy {}",
            report.max_rel_discrepancy
        );
    }
}
