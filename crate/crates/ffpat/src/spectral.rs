//! Fourier differentiation on the periodic simulation grid.
//!
//! The grid has `n` nodes with spacing `h`, so the periodic extension has
//! period `n*h` and angular wavenumbers `k_j = 2*pi*f_j/(n*h)` with the
//! usual FFT frequency layout. Fields are real, which the transform
//! pipeline exploits twice: row pairs are packed into one complex FFT, and
//! only the nonnegative half of the second-axis spectrum is carried through
//! the column pass (the other half is its conjugate mirror). Work is split
//! into fixed-size chunks so results do not depend on the number of worker
//! threads.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Fixed parallel work split; independent of thread count.
const CHUNKS: usize = 8;

pub struct Spectral2D {
    n: usize,
    /// Half-spectrum length `n/2 + 1` along the packed axis.
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Angular wavenumber for each FFT index.
    k: Vec<f64>,
    /// Gradient symbol; equals `k` except the Nyquist index on even grids
    /// is zeroed to keep derivatives of real fields real.
    k_grad: Vec<f64>,
}

/// Reusable complex work buffers for one solve.
pub struct SpectralScratch {
    /// `n x m` row-major: per original row, half spectrum along axis 1.
    rows_half: Vec<Complex64>,
    /// `m x n` row-major: transposed half spectrum, full along axis 0.
    spec: Vec<Complex64>,
    /// `m x n` secondary buffer for symbol multiplies.
    work: Vec<Complex64>,
}

impl SpectralScratch {
    pub fn new(n: usize) -> Self {
        let m = n / 2 + 1;
        SpectralScratch {
            rows_half: vec![Complex64::default(); n * m],
            spec: vec![Complex64::default(); m * n],
            work: vec![Complex64::default(); m * n],
        }
    }
}

impl Spectral2D {
    pub fn new(n: usize, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let period = n as f64 * h;
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let f = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * std::f64::consts::PI * f / period
            })
            .collect();
        let mut k_grad = k.clone();
        if n % 2 == 0 {
            k_grad[n / 2] = 0.0;
        }
        Spectral2D {
            n,
            m: n / 2 + 1,
            fwd,
            inv,
            k,
            k_grad,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest angular wavenumber representable on the grid.
    pub fn k_max(&self) -> f64 {
        self.k.iter().cloned().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pass A: pack real row pairs, FFT, keep half spectra in `rows_half`.
    fn forward_rows(&self, input: &[f64], scratch: &mut SpectralScratch) {
        let (n, m) = (self.n, self.m);
        let pairs = n.div_ceil(2);
        let pairs_per_chunk = pairs.div_ceil(CHUNKS);
        let plan = &self.fwd;
        scratch
            .rows_half
            .par_chunks_mut(pairs_per_chunk * 2 * m)
            .enumerate()
            .for_each(|(chunk_idx, out_chunk)| {
                let mut buf = vec![Complex64::default(); n];
                let mut fft_scratch =
                    vec![Complex64::default(); plan.get_inplace_scratch_len()];
                let first_pair = chunk_idx * pairs_per_chunk;
                for (local, out_rows) in out_chunk.chunks_mut(2 * m).enumerate() {
                    let i0 = (first_pair + local) * 2;
                    let i1 = i0 + 1;
                    let row0 = &input[i0 * n..(i0 + 1) * n];
                    if i1 < n {
                        let row1 = &input[i1 * n..(i1 + 1) * n];
                        for j in 0..n {
                            buf[j] = Complex64::new(row0[j], row1[j]);
                        }
                    } else {
                        for j in 0..n {
                            buf[j] = Complex64::new(row0[j], 0.0);
                        }
                    }
                    plan.process_with_scratch(&mut buf, &mut fft_scratch);
                    // unpack the two interleaved real-row spectra
                    out_rows[0] = Complex64::new(buf[0].re, 0.0);
                    if i1 < n {
                        out_rows[m] = Complex64::new(buf[0].im, 0.0);
                    }
                    for kk in 1..m {
                        let zk = buf[kk];
                        let zc = buf[n - kk].conj();
                        let u0 = 0.5 * (zk + zc);
                        out_rows[kk] = u0;
                        if i1 < n {
                            let d = zk - zc;
                            out_rows[m + kk] = Complex64::new(0.5 * d.im, -0.5 * d.re);
                        }
                    }
                }
            });
    }

    /// Transpose `rows_half` (`n x m`) into `spec` (`m x n`).
    fn transpose_forward(scratch: &mut SpectralScratch, n: usize, m: usize) {
        const BLOCK: usize = 64;
        let src = &scratch.rows_half;
        scratch
            .spec
            .par_chunks_mut(BLOCK * n)
            .enumerate()
            .for_each(|(bk, dchunk)| {
                let k0 = bk * BLOCK;
                let k1 = (k0 + BLOCK).min(m);
                for ib in (0..n).step_by(BLOCK) {
                    let i1 = (ib + BLOCK).min(n);
                    for kk in k0..k1 {
                        for i in ib..i1 {
                            dchunk[(kk - k0) * n + i] = src[i * m + kk];
                        }
                    }
                }
            });
    }

    /// FFT or inverse FFT over the `m` rows of an `m x n` buffer.
    fn run_spec_rows(&self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        let rows_per_chunk = self.m.div_ceil(CHUNKS);
        data.par_chunks_mut(rows_per_chunk * n).for_each(|chunk| {
            let mut fft_scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for row in chunk.chunks_mut(n) {
                plan.process_with_scratch(row, &mut fft_scratch);
            }
        });
    }

    /// Transpose an `m x n` buffer back into `rows_half` (`n x m`).
    fn transpose_inverse(src: &[Complex64], scratch_rows: &mut [Complex64], n: usize, m: usize) {
        const BLOCK: usize = 64;
        scratch_rows
            .par_chunks_mut(BLOCK * m)
            .enumerate()
            .for_each(|(bi, dchunk)| {
                let i0 = bi * BLOCK;
                let i1 = (i0 + BLOCK).min(n);
                for kb in (0..m).step_by(BLOCK) {
                    let k1 = (kb + BLOCK).min(m);
                    for i in i0..i1 {
                        for kk in kb..k1 {
                            dchunk[(i - i0) * m + kk] = src[kk * n + i];
                        }
                    }
                }
            });
    }

    /// Pass A inverse: rebuild full spectra by conjugate symmetry, inverse
    /// FFT packed row pairs, write real output scaled by `1/n^2`.
    fn inverse_rows(&self, scratch_rows: &[Complex64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let scale = 1.0 / (n * n) as f64;
        let pairs = n.div_ceil(2);
        let pairs_per_chunk = pairs.div_ceil(CHUNKS);
        let plan = &self.inv;
        out.par_chunks_mut(pairs_per_chunk * 2 * n)
            .enumerate()
            .for_each(|(chunk_idx, out_chunk)| {
                let mut buf = vec![Complex64::default(); n];
                let mut fft_scratch =
                    vec![Complex64::default(); plan.get_inplace_scratch_len()];
                let first_pair = chunk_idx * pairs_per_chunk;
                for (local, out_rows) in out_chunk.chunks_mut(2 * n).enumerate() {
                    let i0 = (first_pair + local) * 2;
                    let i1 = i0 + 1;
                    let h0 = &scratch_rows[i0 * m..(i0 + 1) * m];
                    if i1 < n {
                        let h1 = &scratch_rows[i1 * m..(i1 + 1) * m];
                        for kk in 0..m {
                            // pack: h0 + i*h1
                            buf[kk] = Complex64::new(
                                h0[kk].re - h1[kk].im,
                                h0[kk].im + h1[kk].re,
                            );
                        }
                        for kk in m..n {
                            let c0 = h0[n - kk].conj();
                            let c1 = h1[n - kk].conj();
                            buf[kk] = Complex64::new(c0.re - c1.im, c0.im + c1.re);
                        }
                    } else {
                        for kk in 0..m {
                            buf[kk] = h0[kk];
                        }
                        for kk in m..n {
                            buf[kk] = h0[n - kk].conj();
                        }
                    }
                    plan.process_with_scratch(&mut buf, &mut fft_scratch);
                    let (o0, o1) = out_rows.split_at_mut(n.min(out_rows.len()));
                    for j in 0..n {
                        o0[j] = buf[j].re * scale;
                    }
                    if i1 < n {
                        for j in 0..n {
                            o1[j] = buf[j].im * scale;
                        }
                    }
                }
            });
    }

    /// Spectral Laplacian, and optionally the spectral gradient, of `input`.
    ///
    /// The gradient costs two extra inverse transforms and is only computed
    /// when requested (energy diagnostics).
    pub fn laplacian(
        &self,
        input: &Array2<f64>,
        lap: &mut Array2<f64>,
        mut grad: Option<(&mut Array2<f64>, &mut Array2<f64>)>,
        scratch: &mut SpectralScratch,
    ) {
        let (n, m) = (self.n, self.m);
        let inp = input.as_slice().expect("contiguous field values");
        self.forward_rows(inp, scratch);
        Self::transpose_forward(scratch, n, m);
        self.run_spec_rows(&mut scratch.spec, true);
        // spec[k2 * n + k1] now holds the coefficient of (k[k1], k[k2])

        if let Some((gx, gy)) = grad.as_mut() {
            for k2 in 0..m {
                let row = &scratch.spec[k2 * n..(k2 + 1) * n];
                let wrow = &mut scratch.work[k2 * n..(k2 + 1) * n];
                for k1 in 0..n {
                    let kv = self.k_grad[k1];
                    let v = row[k1];
                    wrow[k1] = Complex64::new(-v.im * kv, v.re * kv);
                }
            }
            self.finish_inverse(scratch, gx);
            for k2 in 0..m {
                let kv = self.k_grad[k2];
                let row = &scratch.spec[k2 * n..(k2 + 1) * n];
                let wrow = &mut scratch.work[k2 * n..(k2 + 1) * n];
                for k1 in 0..n {
                    let v = row[k1];
                    wrow[k1] = Complex64::new(-v.im * kv, v.re * kv);
                }
            }
            self.finish_inverse(scratch, gy);
        }

        for k2 in 0..m {
            let k2sq = self.k[k2] * self.k[k2];
            let row = &scratch.spec[k2 * n..(k2 + 1) * n];
            let wrow = &mut scratch.work[k2 * n..(k2 + 1) * n];
            for k1 in 0..n {
                let ksq = self.k[k1] * self.k[k1] + k2sq;
                wrow[k1] = row[k1] * (-ksq);
            }
        }
        self.finish_inverse(scratch, lap);
    }

    /// Inverse pipeline from `scratch.work` into a real field; preserves
    /// `scratch.spec`.
    fn finish_inverse(&self, scratch: &mut SpectralScratch, out: &mut Array2<f64>) {
        let (n, m) = (self.n, self.m);
        self.run_spec_rows(&mut scratch.work, false);
        Self::transpose_inverse(&scratch.work, &mut scratch.rows_half, n, m);
        let out_slice = out.as_slice_mut().expect("contiguous field values");
        self.inverse_rows(&scratch.rows_half, out_slice);
    }
}
