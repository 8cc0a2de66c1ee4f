//! Normalized cross-correlation at fixed offsets and over lag windows.
//!
//! Offsets follow one convention throughout: at offset `(di, dj)` element
//! `a[r][c]` is paired with `b[r + di][c + dj]`, and in 1D `u[t]` with
//! `v[t + d]`. The value at an offset is the Pearson correlation over the
//! overlapping elements; a constant overlap correlates to 0.
//!
//! Full lag windows are computed with FFT cross-correlation for the
//! product sums and summed-area tables for the window moments.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative variance below which an overlap window counts as constant.
const CONSTANT_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Offset2D {
    pub di: i64,
    pub dj: i64,
}

impl Offset2D {
    pub fn new(di: i64, dj: i64) -> Self {
        Self { di, dj }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrConfig {
    /// Largest absolute lag in frames; `None` means a quarter of the shorter stream.
    pub max_lag: Option<usize>,
    pub min_overlap_fraction: f64,
    pub diagonal_only_for_nodes: bool,
}

impl Default for CorrConfig {
    fn default() -> Self {
        Self { max_lag: None, min_overlap_fraction: 0.5, diagonal_only_for_nodes: true }
    }
}

impl CorrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_overlap_fraction > 0.0 && self.min_overlap_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "min_overlap_fraction {} outside (0, 1]",
                self.min_overlap_fraction
            )));
        }
        Ok(())
    }

    pub fn lag_for(&self, shortest_stream: usize) -> usize {
        self.max_lag.unwrap_or(shortest_stream / 4)
    }
}

/// Overlap of a length-`la` axis shifted by `d` against a length-`lb` axis:
/// `(start in a, length)`.
#[inline]
fn axis_overlap(la: usize, lb: usize, d: i64) -> (usize, usize) {
    let start = (-d).max(0);
    let end = (la as i64).min(lb as i64 - d);
    if end <= start {
        (0, 0)
    } else {
        (start as usize, (end - start) as usize)
    }
}

#[inline]
fn axis_ok(la: usize, lb: usize, n: usize, frac: f64) -> bool {
    n > 0 && n as f64 >= frac * la.min(lb) as f64
}

fn mean_and_scale(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let scale = v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    (mean, scale)
}

/// Pearson correlation from window moments of pre-centered data.
#[inline]
fn pearson_from_sums(n: f64, sa: f64, sb: f64, saa: f64, sbb: f64, sab: f64, scale_a: f64, scale_b: f64) -> f64 {
    let va = saa - sa * sa / n;
    let vb = sbb - sb * sb / n;
    if va <= CONSTANT_EPS * n * scale_a * scale_a || vb <= CONSTANT_EPS * n * scale_b * scale_b {
        return 0.0;
    }
    ((sab - sa * sb / n) / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

fn check_lag(off: Offset2D, cfg: &CorrConfig) -> Result<()> {
    if let Some(l) = cfg.max_lag {
        if off.di.unsigned_abs() as usize > l || off.dj.unsigned_abs() as usize > l {
            return Err(Error::InsufficientOverlap { di: off.di, dj: off.dj });
        }
    }
    Ok(())
}

/// Correlation of `a` against `b` at a fixed offset.
pub fn xcorr2_at(a: &Matrix, b: &Matrix, off: Offset2D, cfg: &CorrConfig) -> Result<f64> {
    check_lag(off, cfg)?;
    let (r0, nr) = axis_overlap(a.rows(), b.rows(), off.di);
    let (c0, nc) = axis_overlap(a.cols(), b.cols(), off.dj);
    let frac = cfg.min_overlap_fraction;
    if !axis_ok(a.rows(), b.rows(), nr, frac) || !axis_ok(a.cols(), b.cols(), nc, frac) || nr * nc < 2 {
        return Err(Error::InsufficientOverlap { di: off.di, dj: off.dj });
    }
    let (ma, sa) = mean_and_scale(a.as_slice());
    let (mb, sb) = mean_and_scale(b.as_slice());
    let mut s = [0.0f64; 5];
    for r in r0..r0 + nr {
        let ra = &a.row(r)[c0..c0 + nc];
        let rb_start = (c0 as i64 + off.dj) as usize;
        let rb = &b.row((r as i64 + off.di) as usize)[rb_start..rb_start + nc];
        for (x, y) in ra.iter().zip(rb) {
            let (x, y) = (x - ma, y - mb);
            s[0] += x;
            s[1] += y;
            s[2] += x * x;
            s[3] += y * y;
            s[4] += x * y;
        }
    }
    Ok(pearson_from_sums((nr * nc) as f64, s[0], s[1], s[2], s[3], s[4], sa, sb))
}

/// Maximum correlation over all admissible offsets within the lag window.
/// With `diagonal` set only offsets with `di == dj` are searched. Ties go to
/// the smallest `|di| + |dj|`, then the lexicographically smallest offset.
pub fn xcorr2_max(a: &Matrix, b: &Matrix, cfg: &CorrConfig, diagonal: bool) -> Result<(f64, Offset2D)> {
    cfg.validate()?;
    let lag = cfg.lag_for(a.rows().min(a.cols()).min(b.rows()).min(b.cols())) as i64;
    let s = CorrSurface::compute(a, b, lag, cfg.min_overlap_fraction);
    let best = if diagonal && cfg.diagonal_only_for_nodes {
        s.argmax_diagonal().map(|(v, d)| (v, Offset2D::new(d, d)))
    } else {
        s.argmax()
    };
    best.ok_or(Error::InsufficientOverlap { di: 0, dj: 0 })
}

pub fn xcorr1_at(u: &[f64], v: &[f64], d: i64, cfg: &CorrConfig) -> Result<f64> {
    if let Some(l) = cfg.max_lag {
        if d.unsigned_abs() as usize > l {
            return Err(Error::InsufficientOverlap { di: d, dj: 0 });
        }
    }
    let (s0, n) = axis_overlap(u.len(), v.len(), d);
    if !axis_ok(u.len(), v.len(), n, cfg.min_overlap_fraction) || n < 2 {
        return Err(Error::InsufficientOverlap { di: d, dj: 0 });
    }
    let (mu, su) = mean_and_scale(u);
    let (mv, sv) = mean_and_scale(v);
    let mut s = [0.0f64; 5];
    for t in s0..s0 + n {
        let (x, y) = (u[t] - mu, v[(t as i64 + d) as usize] - mv);
        s[0] += x;
        s[1] += y;
        s[2] += x * x;
        s[3] += y * y;
        s[4] += x * y;
    }
    Ok(pearson_from_sums(n as f64, s[0], s[1], s[2], s[3], s[4], su, sv))
}

/// 1D correlation at every lag in `[-lag, lag]`; inadmissible lags are NaN.
pub fn xcorr1_surface(u: &[f64], v: &[f64], lag: i64, frac: f64) -> Vec<f64> {
    let cfg = CorrConfig { max_lag: None, min_overlap_fraction: frac, diagonal_only_for_nodes: true };
    (-lag..=lag).map(|d| xcorr1_at(u, v, d, &cfg).unwrap_or(f64::NAN)).collect()
}

/// Best lag of a 1D surface; ties go to the smallest `|d|`, then negative.
pub fn argmax_lag(surface: &[f64], lag: i64) -> Option<(f64, i64)> {
    let mut best: Option<(f64, i64)> = None;
    for a in 0..=lag {
        for d in if a == 0 { vec![0] } else { vec![-a, a] } {
            let v = surface[(d + lag) as usize];
            if !v.is_nan() && best.map_or(true, |(b, _)| v > b) {
                best = Some((v, d));
            }
        }
    }
    best
}

pub fn xcorr1_max(u: &[f64], v: &[f64], cfg: &CorrConfig) -> Result<(f64, i64)> {
    cfg.validate()?;
    let lag = cfg.lag_for(u.len().min(v.len())) as i64;
    argmax_lag(&xcorr1_surface(u, v, lag, cfg.min_overlap_fraction), lag).ok_or(Error::InsufficientOverlap { di: 0, dj: 0 })
}

/// Correlation values over the square lag window `[-lag, lag]^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrSurface {
    lag: i64,
    /// Row-major by `di`; NaN marks inadmissible offsets.
    values: Vec<f64>,
}

impl CorrSurface {
    pub fn compute(a: &Matrix, b: &Matrix, lag: i64, frac: f64) -> Self {
        let n = fft_size_for(&[a.rows(), a.cols(), b.rows(), b.cols()], lag as usize);
        let fft = Fft2::new(n);
        let sa = fft.spectrum(a);
        let sb = fft.spectrum(b);
        fft.surface(&sa, &sb, lag, frac)
    }

    pub fn lag(&self) -> i64 {
        self.lag
    }

    #[inline]
    pub fn get(&self, off: Offset2D) -> Option<f64> {
        if off.di.abs() > self.lag || off.dj.abs() > self.lag {
            return None;
        }
        let w = 2 * self.lag + 1;
        let v = self.values[((off.di + self.lag) * w + off.dj + self.lag) as usize];
        (!v.is_nan()).then_some(v)
    }

    /// Same correlations with the roles of the two axes swapped.
    pub fn transposed(&self) -> Self {
        let w = (2 * self.lag + 1) as usize;
        let mut values = vec![0.0; w * w];
        for r in 0..w {
            for c in 0..w {
                values[c * w + r] = self.values[r * w + c];
            }
        }
        Self { lag: self.lag, values }
    }

    pub fn argmax(&self) -> Option<(f64, Offset2D)> {
        let mut best: Option<(f64, Offset2D)> = None;
        for off in offsets_by_priority(self.lag) {
            if let Some(v) = self.get(off) {
                if best.map_or(true, |(b, _)| v > b) {
                    best = Some((v, off));
                }
            }
        }
        best
    }

    pub fn argmax_diagonal(&self) -> Option<(f64, i64)> {
        let diag: Vec<f64> =
            (-self.lag..=self.lag).map(|d| self.get(Offset2D::new(d, d)).unwrap_or(f64::NAN)).collect();
        argmax_lag(&diag, self.lag)
    }
}

/// Offsets of the window ordered by `|di| + |dj|`, then lexicographically.
pub fn offsets_by_priority(lag: i64) -> Vec<Offset2D> {
    let mut v: Vec<Offset2D> = (-lag..=lag).flat_map(|di| (-lag..=lag).map(move |dj| Offset2D::new(di, dj))).collect();
    v.sort_by_key(|o| (o.di.abs() + o.dj.abs(), o.di, o.dj));
    v
}

fn is_fast_size(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

/// Smallest 5-smooth transform size that keeps every lag in the window free
/// of circular wrap-around.
pub fn fft_size_for(lengths: &[usize], lag: usize) -> usize {
    let mut n = lengths.iter().copied().max().unwrap_or(1) + lag;
    while !is_fast_size(n) {
        n += 1;
    }
    n
}

/// Matrix prepared for FFT cross-correlation.
pub struct Spectrum {
    rows: usize,
    cols: usize,
    /// DFT of the centered, zero-padded matrix, stored transposed (`[kc][kr]`).
    freq: Vec<Complex<f64>>,
    /// Summed-area tables of the centered values and their squares, `(rows+1) x (cols+1)`.
    sat: Vec<f64>,
    sat2: Vec<f64>,
    scale: f64,
}

impl Spectrum {
    fn window(&self, table: &[f64], r0: usize, nr: usize, c0: usize, nc: usize) -> f64 {
        let w = self.cols + 1;
        let (r1, c1) = (r0 + nr, c0 + nc);
        table[r1 * w + c1] - table[r0 * w + c1] - table[r1 * w + c0] + table[r0 * w + c0]
    }
}

/// Square 2D FFT of side `n`.
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn spectrum(&self, m: &Matrix) -> Spectrum {
        let n = self.n;
        assert!(m.rows() <= n && m.cols() <= n, "matrix larger than transform");
        let (mean, scale) = mean_and_scale(m.as_slice());
        let mut buf = vec![Complex::new(0.0, 0.0); n * n];
        for r in 0..m.rows() {
            for (c, v) in m.row(r).iter().enumerate() {
                buf[r * n + c] = Complex::new(v - mean, 0.0);
            }
        }
        self.fwd.process(&mut buf[..m.rows() * n]);
        let mut t = transpose(&buf, n);
        self.fwd.process(&mut t);

        let w = m.cols() + 1;
        let mut sat = vec![0.0; (m.rows() + 1) * w];
        let mut sat2 = vec![0.0; (m.rows() + 1) * w];
        for r in 0..m.rows() {
            let (mut acc, mut acc2) = (0.0, 0.0);
            for c in 0..m.cols() {
                let v = m.get(r, c) - mean;
                acc += v;
                acc2 += v * v;
                sat[(r + 1) * w + c + 1] = sat[r * w + c + 1] + acc;
                sat2[(r + 1) * w + c + 1] = sat2[r * w + c + 1] + acc2;
            }
        }
        Spectrum { rows: m.rows(), cols: m.cols(), freq: t, sat, sat2, scale }
    }

    /// Correlation surface of `a` against `b`.
    pub fn surface(&self, a: &Spectrum, b: &Spectrum, lag: i64, frac: f64) -> CorrSurface {
        let n = self.n;
        assert!(
            a.rows.max(b.rows) + lag as usize <= n && a.cols.max(b.cols) + lag as usize <= n,
            "transform too small for lag window"
        );
        let mut prod: Vec<Complex<f64>> = a.freq.iter().zip(&b.freq).map(|(x, y)| x.conj() * y).collect();
        // rows of `prod` are indexed by column frequency; invert over row frequency first
        self.inv.process(&mut prod);
        let w = (2 * lag + 1) as usize;
        let norm = 1.0 / (n * n) as f64;
        let mut values = vec![f64::NAN; w * w];
        let mut col = vec![Complex::new(0.0, 0.0); n];
        for di in -lag..=lag {
            let (r0, nr) = axis_overlap(a.rows, b.rows, di);
            if !axis_ok(a.rows, b.rows, nr, frac) {
                continue;
            }
            let mr = di.rem_euclid(n as i64) as usize;
            for (kc, slot) in col.iter_mut().enumerate() {
                *slot = prod[kc * n + mr];
            }
            self.inv.process(&mut col);
            for dj in -lag..=lag {
                let (c0, nc) = axis_overlap(a.cols, b.cols, dj);
                if !axis_ok(a.cols, b.cols, nc, frac) || nr * nc < 2 {
                    continue;
                }
                let sab = col[dj.rem_euclid(n as i64) as usize].re * norm;
                let br0 = (r0 as i64 + di) as usize;
                let bc0 = (c0 as i64 + dj) as usize;
                let v = pearson_from_sums(
                    (nr * nc) as f64,
                    a.window(&a.sat, r0, nr, c0, nc),
                    b.window(&b.sat, br0, nr, bc0, nc),
                    a.window(&a.sat2, r0, nr, c0, nc),
                    b.window(&b.sat2, br0, nr, bc0, nc),
                    sab,
                    a.scale,
                    b.scale,
                );
                values[((di + lag) as usize) * w + (dj + lag) as usize] = v;
            }
        }
        CorrSurface { lag, values }
    }
}

fn transpose(buf: &[Complex<f64>], n: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); n * n];
    const B: usize = 32;
    for rb in (0..n).step_by(B) {
        for cb in (0..n).step_by(B) {
            for r in rb..(rb + B).min(n) {
                for c in cb..(cb + B).min(n) {
                    out[c * n + r] = buf[r * n + c];
                }
            }
        }
    }
    out
}
