//! Harmonic extension into the unit disc and the time-reversal composites
//! built from it.
//!
//! Final-time data is only trusted outside the object, so running the wave
//! equation backward needs admissible values inside. The extension fills
//! the disc with the solution of the 5-point Laplace problem whose
//! Dirichlet data is read off the exterior nodes adjacent to the disc;
//! linear and saddle harmonic polynomials are reproduced exactly because
//! they are discretely harmonic. The projection then removes the harmonic
//! part again after time reversal, which is what makes the Neumann-series
//! error operator a contraction.

use ndarray::Array2;

use crate::error::{FfpatError, Result};
use crate::field::{embed, restrict, Grid, ScalarField2D};
use crate::wave::{time_reverse, InitialPair, SolveOptions, WaveStepper};

/// Relative residual target of the inner conjugate-gradient solve.
const CG_TOL: f64 = 1e-10;

/// Fill the open unit disc of `g`'s grid with the discrete harmonic
/// function matching `g` on the exterior nodes; everything outside the disc
/// is returned unchanged.
pub fn harmonic_extend(g: &ScalarField2D) -> Result<ScalarField2D> {
    let grid = g.grid;
    let h = grid.spacing();
    if grid.extent <= 1.0 + 2.0 * h {
        return Err(FfpatError::Validation(
            "harmonic extension needs an annulus of exterior nodes around the unit disc".into(),
        ));
    }
    let n = grid.n;

    // interior = nodes strictly inside the disc; everything else carries data
    let mut index = Array2::<i64>::from_elem((n, n), -1);
    let mut interior = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (x, y) = grid.node(i, j);
            if x * x + y * y < 1.0 {
                index[[i, j]] = interior.len() as i64;
                interior.push((i, j));
            }
        }
    }
    if interior.is_empty() {
        return Ok(g.clone());
    }
    let m = interior.len();

    // 4 phi_p - sum(phi_neighbors) = sum(g at exterior neighbors)
    let mut rhs = vec![0.0_f64; m];
    for (p, &(i, j)) in interior.iter().enumerate() {
        let mut b = 0.0;
        for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
            if index[[ni, nj]] < 0 {
                b += g.values[[ni, nj]];
            }
        }
        rhs[p] = b;
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        for (p, &(i, j)) in interior.iter().enumerate() {
            let mut acc = 4.0 * x[p];
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                let q = index[[ni, nj]];
                if q >= 0 {
                    acc -= x[q as usize];
                }
            }
            out[p] = acc;
        }
    };

    // conjugate gradient on the SPD Dirichlet system
    let b_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut phi = vec![0.0_f64; m];
    if b_norm > 0.0 {
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0_f64; m];
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let max_iters = 10 * n;
        let mut converged = false;
        for _ in 0..max_iters {
            if rr.sqrt() <= CG_TOL * b_norm {
                converged = true;
                break;
            }
            apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
            let alpha = rr / pap;
            for k in 0..m {
                phi[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..m {
                p[k] = r[k] + beta * p[k];
            }
        }
        if !converged && rr.sqrt() > CG_TOL * b_norm {
            return Err(FfpatError::Numerical(format!(
                "harmonic extension CG stalled at relative residual {:.3e} after {max_iters} iterations",
                rr.sqrt() / b_norm
            )));
        }
    }

    let mut out = g.clone();
    for (p, &(i, j)) in interior.iter().enumerate() {
        out.values[[i, j]] = phi[p];
    }
    Ok(out)
}

/// Orthogonal projection onto admissible initial pairs: subtract the
/// harmonic part from the first component and restrict both to the disc.
///
/// All three fields live on the object grid.
pub fn project_p(
    g_on_disc: &ScalarField2D,
    h_on_disc: &ScalarField2D,
    phi: &ScalarField2D,
) -> Result<InitialPair> {
    if g_on_disc.grid != phi.grid || h_on_disc.grid != phi.grid {
        return Err(FfpatError::Validation(
            "projection inputs must share the object grid".into(),
        ));
    }
    let mut f1 = g_on_disc.clone();
    f1.values -= &phi.values;
    f1.mask_disc(1.0);
    let mut f2 = h_on_disc.clone();
    f2.mask_disc(1.0);
    InitialPair::new(f1, f2)
}

/// Initial-to-final-time map on pairs: embed, propagate to `T`, keep the
/// exterior samples `|x| >= 1` of `u(., T)`.
pub fn forward_u(stepper: &WaveStepper, obj_grid: Grid, pair: &InitialPair) -> Result<ScalarField2D> {
    if pair.f1.grid != obj_grid {
        return Err(FfpatError::Validation(
            "pair must live on the object grid".into(),
        ));
    }
    let sim = stepper.grid();
    let mut f1 = pair.f1.clone();
    f1.mask_disc(1.0);
    let mut f2 = pair.f2.clone();
    f2.mask_disc(1.0);
    let init = InitialPair::new(embed(&f1, sim, 0.0), embed(&f2, sim, 0.0))?;
    let sol = stepper.solve(&init, &SolveOptions::default())?;
    let mut out = sol.u_final;
    out.mask_exterior(1.0);
    Ok(out)
}

/// Time-reversal inversion step: harmonic extension of the exterior data,
/// backward propagation, then projection. Interior samples of `g` are
/// ignored. Returns an admissible pair on the object grid.
pub fn neumann_v(stepper: &WaveStepper, obj_grid: Grid, g: &ScalarField2D) -> Result<InitialPair> {
    if g.grid != stepper.grid() {
        return Err(FfpatError::Validation(
            "exterior data must live on the simulation grid".into(),
        ));
    }
    let extended = harmonic_extend(g)?;
    let reversed = time_reverse(stepper, &extended)?;
    let phi = harmonic_extend(&reversed.f1)?;
    let v0 = restrict(&reversed.f1, obj_grid, false);
    let vt0 = restrict(&reversed.f2, obj_grid, false);
    let phi_obj = restrict(&phi, obj_grid, false);
    project_p(&v0, &vt0, &phi_obj)
}

/// Energy inner product on admissible pairs: forward-difference gradient of
/// the first component plus the `c^-2`-weighted second component.
pub fn pair_energy_norm(pair: &InitialPair, c_obj: &ScalarField2D) -> f64 {
    let n = pair.f1.grid.n;
    let h2 = pair.f1.grid.cell_measure();
    let f1 = &pair.f1.values;
    let f2 = &pair.f2.values;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                let d = f1[[i + 1, j]] - f1[[i, j]];
                acc += d * d;
            }
            if j + 1 < n {
                let d = f1[[i, j + 1]] - f1[[i, j]];
                acc += d * d;
            }
            let c = c_obj.values[[i, j]];
            acc += f2[[i, j]] * f2[[i, j]] / (c * c);
        }
    }
    (acc * h2).sqrt()
}

/// Asymptotic growth factor of the Neumann-series error operator
/// `K = I - lambda * V_T U_T` on admissible pairs, measured in the energy
/// norm by iterating the operator from a seeded random start.
///
/// Returns the largest per-step ratio over the final third of the
/// iterations; below one means the iterative time reversal contracts.
pub fn contraction_estimate(
    stepper: &WaveStepper,
    obj_grid: Grid,
    lambda: f64,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    if iters < 3 {
        return Err(FfpatError::Validation(
            "contraction estimate needs at least 3 iterations".into(),
        ));
    }
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c_obj = restrict(&stepper.config().medium.c, obj_grid, false);
    let mut draw = || {
        let mut f = ScalarField2D::new(
            obj_grid,
            Array2::from_shape_fn((obj_grid.n, obj_grid.n), |_| StandardNormal.sample(&mut rng)),
        )
        .expect("shape");
        f.mask_disc(1.0);
        f
    };
    let mut x = InitialPair::new(draw(), draw())?;
    let scale = pair_energy_norm(&x, &c_obj);
    if scale == 0.0 {
        return Ok(0.0);
    }
    x.f1.values.mapv_inplace(|v| v / scale);
    x.f2.values.mapv_inplace(|v| v / scale);

    let mut worst_tail = 0.0_f64;
    let tail_start = iters - iters / 3 - 1;
    for it in 0..iters {
        let data = forward_u(stepper, obj_grid, &x)?;
        let vu = neumann_v(stepper, obj_grid, &data)?;
        let mut kx = x.clone();
        ndarray::Zip::from(&mut kx.f1.values)
            .and(&vu.f1.values)
            .for_each(|a, &b| *a -= lambda * b);
        ndarray::Zip::from(&mut kx.f2.values)
            .and(&vu.f2.values)
            .for_each(|a, &b| *a -= lambda * b);
        let ratio = pair_energy_norm(&kx, &c_obj);
        if it >= tail_start {
            worst_tail = worst_tail.max(ratio);
        }
        if ratio == 0.0 {
            return Ok(0.0);
        }
        kx.f1.values.mapv_inplace(|v| v / ratio);
        kx.f2.values.mapv_inplace(|v| v / ratio);
        x = kx;
    }
    Ok(worst_tail)
}
