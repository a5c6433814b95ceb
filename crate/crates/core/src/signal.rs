//! Analysis pipeline for stroboscopic time series.
//!
//! Mirrors how the measurement campaigns are reduced: a DFT locates the
//! dominant modulation frequency, the series is split into k subsequences
//! t = (m k + l) T_d which are each fit to a damped cosine, and the fitted
//! modulation periods over the amplitude grid are fit to the two-branch
//! hyperbola tau = C / |A - A_Pk| whose apex recovers the k-tupling
//! amplitude.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::parallel::parallel_map;

const TAU: f64 = std::f64::consts::TAU;

/// Observable sampled at integer multiples of the drive period.
#[derive(Clone, Debug)]
pub struct StroboscopicSeries {
    /// Drive amplitude this series was recorded at (mV or MHz by context).
    pub amplitude: f64,
    /// Sample times in units of T_d, strictly increasing.
    pub times: Vec<u64>,
    /// Observable values (PL counts or <sigma_z>).
    pub values: Vec<f64>,
    /// Optional per-point 1-sigma uncertainties.
    pub value_sigma: Option<Vec<f64>>,
}

impl StroboscopicSeries {
    pub fn new(
        amplitude: f64,
        times: Vec<u64>,
        values: Vec<f64>,
        value_sigma: Option<Vec<f64>>,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "times ({}) and values ({}) lengths differ",
                times.len(),
                values.len()
            )));
        }
        if let Some(sigma) = &value_sigma {
            if sigma.len() != values.len() {
                return Err(Error::InvalidArgument("sigma length differs from values".into()));
            }
            if sigma.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
                return Err(Error::InvalidArgument("sigmas must be positive and finite".into()));
            }
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("values must be finite".into()));
        }
        Ok(Self { amplitude, times, values, value_sigma })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Common spacing of the sample times, or an error if non-uniform.
    pub fn uniform_stride(&self) -> Result<u64> {
        if self.times.len() < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        let stride = self.times[1] - self.times[0];
        if self.times.windows(2).any(|w| w[1] - w[0] != stride) {
            return Err(Error::InvalidArgument("non-uniform sampling".into()));
        }
        Ok(stride)
    }
}

/// One-sided spectrum: (frequency in cycles per sampling interval, magnitude).
pub type Spectrum = Vec<(f64, f64)>;

fn dft_bins(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let half = n / 2;
    (0..=half)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &y) in values.iter().enumerate() {
                let angle = -TAU * k as f64 * m as f64 / n as f64;
                acc += Complex64::from_polar(y - mean, angle);
            }
            acc
        })
        .collect()
}

/// One-sided magnitude spectrum of a mean-removed, uniformly sampled series.
///
/// Frequencies are k/N cycles per sampling interval over [0, 0.5] (equal to
/// cycles per T_d for per-period sampling). Magnitudes are scaled so the sum
/// of squared magnitudes equals (N/2) times the variance of the mean-removed
/// series.
pub fn dft_magnitude(series: &StroboscopicSeries) -> Result<Spectrum> {
    let n = series.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("DFT needs >= 8 points, got {n}")));
    }
    series.uniform_stride()?;
    let bins = dft_bins(&series.values);
    let nf = n as f64;
    let even = n.is_multiple_of(2);
    Ok(bins
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let edge = k == 0 || (even && k == n / 2);
            let weight = if edge { 1.0 } else { 2.0 };
            (k as f64 / nf, z.norm() * (weight / (2.0 * nf)).sqrt())
        })
        .collect())
}

/// Highest-magnitude bin, ignoring DC.
pub fn dominant_frequency(spectrum: &Spectrum) -> Option<(f64, f64)> {
    spectrum
        .iter()
        .skip(1)
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Count distinct ridges (DC excluded): bins at or above `rel_threshold`
/// times the largest non-DC magnitude that are maximal within
/// +/- `min_separation` bins, so one broadened peak is not counted twice.
pub fn count_peaks(spectrum: &Spectrum, rel_threshold: f64, min_separation: usize) -> usize {
    let mags: Vec<f64> = spectrum.iter().skip(1).map(|&(_, m)| m).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let floor = rel_threshold * max;
    let n = mags.len();
    let sep = min_separation.max(1);
    (0..n)
        .filter(|&i| {
            if mags[i] < floor {
                return false;
            }
            let lo = i.saturating_sub(sep);
            let hi = (i + sep).min(n - 1);
            (lo..=hi).all(|j| {
                // ties resolve to the lower bin
                mags[j] < mags[i] || (mags[j] == mags[i] && j >= i)
            })
        })
        .count()
}

/// Split into k subsequences by time residue: subsequence l in {1..k} holds
/// the samples with n = l (mod k), i.e. n = l, l+k, l+2k, ...
pub fn decompose_subsequences(series: &StroboscopicSeries, k: u32) -> Result<Vec<StroboscopicSeries>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    (1..=k as u64)
        .map(|l| {
            let keep: Vec<usize> = series
                .times
                .iter()
                .enumerate()
                .filter(|(_, &n)| n % k as u64 == l % k as u64)
                .map(|(i, _)| i)
                .collect();
            StroboscopicSeries::new(
                series.amplitude,
                keep.iter().map(|&i| series.times[i]).collect(),
                keep.iter().map(|&i| series.values[i]).collect(),
                series
                    .value_sigma
                    .as_ref()
                    .map(|s| keep.iter().map(|&i| s[i]).collect()),
            )
        })
        .collect()
}

/// Result of a damped-cosine fit
/// y(n) = offset + amplitude * exp(-n/decay) * cos(2 pi n / tau + phase).
#[derive(Clone, Debug)]
pub struct DampedCosineFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Modulation period in units of T_d; infinite for flat input.
    pub tau_periods: f64,
    /// Envelope decay time in units of T_d; infinite means no decay.
    pub decay_periods: f64,
    pub phase_rad: f64,
    pub rms_residual: f64,
    pub converged: bool,
    /// 1-sigma uncertainty of tau from the fit covariance.
    pub tau_sigma: Option<f64>,
}

/// Optional seeds; any Levenberg-Marquardt fit can be restarted from a
/// previous solution.
#[derive(Clone, Copy, Debug)]
pub struct DampedCosineSeeds {
    pub offset: f64,
    pub amplitude: f64,
    pub tau_periods: f64,
    pub decay_periods: f64,
    pub phase_rad: f64,
}

impl From<&DampedCosineFit> for DampedCosineSeeds {
    fn from(fit: &DampedCosineFit) -> Self {
        Self {
            offset: fit.offset,
            amplitude: fit.amplitude,
            tau_periods: fit.tau_periods,
            decay_periods: fit.decay_periods,
            phase_rad: fit.phase_rad,
        }
    }
}

/// Internal parameter vector: [offset, amplitude, rate, freq, phase] with
/// rate = 1/decay and freq = 1/tau.
fn dc_model(p: &[f64; 5], n: f64) -> f64 {
    p[0] + p[1] * (-n * p[2]).exp() * (TAU * p[3] * n + p[4]).cos()
}

fn dc_jacobian(p: &[f64; 5], n: f64) -> [f64; 5] {
    let env = (-n * p[2]).exp();
    let arg = TAU * p[3] * n + p[4];
    let (sin, cos) = arg.sin_cos();
    [
        1.0,
        env * cos,
        -n * p[1] * env * cos,
        -TAU * n * p[1] * env * sin,
        -p[1] * env * sin,
    ]
}

/// Fold frequency into (0, 1/2] and keep the phase consistent; valid for
/// integer sample times.
fn canonicalize(p: &mut [f64; 5]) {
    if p[3] < 0.0 {
        p[3] = -p[3];
        p[4] = -p[4];
    }
    p[3] -= p[3].floor();
    if p[3] > 0.5 {
        p[3] = 1.0 - p[3];
        p[4] = -p[4];
    }
    if p[2] < 0.0 {
        p[2] = 0.0;
    }
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[4] += std::f64::consts::PI;
    }
    p[4] = wrap_angle(p[4]);
}

fn wrap_angle(phi: f64) -> f64 {
    let mut w = (phi + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w += TAU;
    }
    w
}

/// Solve a small symmetric linear system by Gaussian elimination with
/// partial pivoting; returns None if singular.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot, max) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if max < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(r);
            let pivot_row = &top[col];
            for (cell, pv) in bottom[0][col..n].iter_mut().zip(&pivot_row[col..n]) {
                *cell -= factor * pv;
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c2 in row + 1..n {
            acc -= a[row][c2] * x[c2];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Damped normal-equation step over the active coordinates; inactive ones
/// get a zero step.
fn lm_step(a: &[Vec<f64>], g: &[f64; 5], lambda: f64, active: &[bool; 5]) -> Option<[f64; 5]> {
    let idx: Vec<usize> = (0..5).filter(|&i| active[i]).collect();
    let m = idx.len();
    let mut sub = vec![vec![0.0f64; m]; m];
    let mut rhs = vec![0.0f64; m];
    for (bi, &i) in idx.iter().enumerate() {
        rhs[bi] = g[i];
        for (bj, &j) in idx.iter().enumerate() {
            sub[bi][bj] = a[i][j];
        }
        sub[bi][bi] += lambda * a[i][i].max(1e-12);
    }
    let solved = solve_dense(&mut sub, &mut rhs)?;
    let mut step = [0.0f64; 5];
    for (bi, &i) in idx.iter().enumerate() {
        step[i] = solved[bi];
    }
    Some(step)
}

fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut m = a.to_vec();
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve_dense(&mut m, &mut e)?);
    }
    // cols[j] is the j-th column of the inverse.
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

/// Weighted Levenberg-Marquardt fit of a single damped cosine.
///
/// Seeds default to the dominant DFT component. Flat input (no significant
/// structure above the noise floor) is reported as a non-converged fit with
/// infinite modulation period.
pub fn fit_damped_cosine(
    series: &StroboscopicSeries,
    seeds: Option<&DampedCosineSeeds>,
) -> Result<DampedCosineFit> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("damped-cosine fit needs >= 10 points, got {n}")));
    }
    let times: Vec<f64> = series.times.iter().map(|&t| t as f64).collect();
    let values = &series.values;
    let weights: Vec<f64> = match &series.value_sigma {
        Some(sigma) => sigma.iter().map(|s| 1.0 / (s * s)).collect(),
        None => vec![1.0; n],
    };
    let wsum: f64 = weights.iter().sum();
    let mean = weights.iter().zip(values).map(|(w, y)| w * y).sum::<f64>() / wsum;
    let wss: f64 = weights.iter().zip(values).map(|(w, y)| w * (y - mean).powi(2)).sum();
    let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);

    let flat = if series.value_sigma.is_some() {
        // chi^2 of the constant model consistent with noise at ~3 sigma
        let dof = (n - 1) as f64;
        wss <= dof + 3.0 * (2.0 * dof).sqrt()
    } else {
        (wss / wsum).sqrt() < 1e-10 * scale
    };
    if flat {
        return Ok(DampedCosineFit {
            offset: mean,
            amplitude: 0.0,
            tau_periods: f64::INFINITY,
            decay_periods: f64::INFINITY,
            phase_rad: 0.0,
            rms_residual: (values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64)
                .sqrt(),
            converged: false,
            tau_sigma: None,
        });
    }

    let window = times[n - 1] - times[0];
    let mut p: [f64; 5] = match seeds {
        Some(s) => [
            s.offset,
            s.amplitude,
            if s.decay_periods.is_finite() { 1.0 / s.decay_periods } else { 0.0 },
            1.0 / s.tau_periods,
            s.phase_rad,
        ],
        None => {
            let stride = series.uniform_stride()? as f64;
            let bins = dft_bins(values);
            let (k_peak, z_peak) = bins
                .iter()
                .enumerate()
                .skip(1)
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .map(|(k, z)| (k, *z))
                .unwrap();
            let f_sample = k_peak as f64 / n as f64;
            let freq = (f_sample / stride).max(1e-4 / window);
            let amp = 2.0 * z_peak.norm() / n as f64;
            let phase = z_peak.arg() - TAU * freq * times[0];
            [mean, amp, 0.5 / window, freq, phase]
        }
    };
    canonicalize(&mut p);

    let cost_of = |p: &[f64; 5]| -> f64 {
        times
            .iter()
            .zip(values)
            .zip(&weights)
            .map(|((t, y), w)| w * (y - dc_model(p, *t)).powi(2))
            .sum()
    };

    let mut cost = cost_of(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..300 {
        // Normal equations J^T W J and J^T W r.
        let mut a = vec![vec![0.0f64; 5]; 5];
        let mut g = [0.0f64; 5];
        for ((t, y), w) in times.iter().zip(values).zip(&weights) {
            let jac = dc_jacobian(&p, *t);
            let r = y - dc_model(&p, *t);
            for i in 0..5 {
                g[i] += w * jac[i] * r;
                for j in 0..5 {
                    a[i][j] += w * jac[i] * jac[j];
                }
            }
        }
        // The decay rate lives on r >= 0. When the solution sits on the
        // boundary and the gradient points outward, drop that coordinate
        // from the step instead of fighting it with damping.
        let mut active = [true; 5];
        if p[2] == 0.0 && g[2] < 0.0 {
            active[2] = false;
        }
        let step = lm_step(&a, &g, lambda, &active);
        let Some(step) = step else {
            lambda *= 10.0;
            if lambda > 1e10 {
                break;
            }
            continue;
        };
        let mut trial = p;
        for i in 0..5 {
            trial[i] += step[i];
        }
        canonicalize(&mut trial);
        let trial_cost = cost_of(&trial);
        if trial_cost <= cost {
            let rel_step = (0..5)
                .map(|i| (trial[i] - p[i]).abs() / (p[i].abs() + 1e-12))
                .fold(0.0f64, f64::max);
            let rel_drop = (cost - trial_cost) / cost.max(1e-300);
            p = trial;
            cost = trial_cost;
            lambda = (lambda * 0.3).max(1e-14);
            if rel_step < 1e-8 || rel_drop < 1e-13 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e10 {
                // Stuck: accept if the (active-set) full Newton step is
                // already negligible, i.e. we are at the optimum.
                if let Some(newton) = lm_step(&a, &g, 1e-12, &active) {
                    let rel = (0..5)
                        .map(|i| newton[i].abs() / (p[i].abs() + 1e-12))
                        .fold(0.0f64, f64::max);
                    converged = rel < 1e-6;
                }
                break;
            }
        }
    }

    // Covariance for the frequency parameter.
    let mut tau_sigma = None;
    if converged && p[3] > 0.0 {
        let mut a = vec![vec![0.0f64; 5]; 5];
        for (t, w) in times.iter().zip(&weights) {
            let jac = dc_jacobian(&p, *t);
            for i in 0..5 {
                for j in 0..5 {
                    a[i][j] += w * jac[i] * jac[j];
                }
            }
        }
        if let Some(inv) = invert_dense(&a) {
            let dof = (n.saturating_sub(5)).max(1) as f64;
            let s2 = if series.value_sigma.is_some() {
                // conservative: inflate if the single-cosine model underfits
                (cost / dof).max(1.0)
            } else {
                cost / dof
            };
            let var_f = inv[3][3] * s2;
            if var_f.is_finite() && var_f >= 0.0 {
                tau_sigma = Some(var_f.sqrt() / (p[3] * p[3]));
            }
        }
    }

    let rms = (times
        .iter()
        .zip(values)
        .map(|(t, y)| (y - dc_model(&p, *t)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();

    Ok(DampedCosineFit {
        offset: p[0],
        amplitude: p[1],
        tau_periods: if p[3] > 0.0 { 1.0 / p[3] } else { f64::INFINITY },
        decay_periods: if p[2] > 1e-12 { 1.0 / p[2] } else { f64::INFINITY },
        phase_rad: p[4],
        rms_residual: rms,
        converged,
        tau_sigma,
    })
}

/// (amplitude, tau, optional tau sigma) triple entering the hyperbola fit.
#[derive(Clone, Copy, Debug)]
pub struct HyperbolaPoint {
    pub amplitude: f64,
    pub tau: f64,
    pub tau_sigma: Option<f64>,
}

/// Two-branch hyperbola tau = C / |A - A_P| fitted in the linearized space
/// 1/tau = |A - A_P| / C.
#[derive(Clone, Debug)]
pub struct HyperbolaFit {
    pub a_p: f64,
    /// Branch coefficient for A < A_P.
    pub c_minus: Option<f64>,
    /// Branch coefficient for A > A_P.
    pub c_plus: Option<f64>,
    pub sigma_a_p: f64,
    pub sigma_c_minus: Option<f64>,
    pub sigma_c_plus: Option<f64>,
    /// RMS residual in the linearized 1/tau space.
    pub rms_residual: f64,
    pub points_minus: usize,
    pub points_plus: usize,
}

struct LinPoint {
    a: f64,
    y: f64,
    w: f64,
}

fn branch_beta(points: &[&LinPoint], a_p: f64) -> (f64, f64) {
    // beta = sum w x y / sum w x^2, ssr contribution with that beta
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for p in points {
        let x = (p.a - a_p).abs();
        sxy += p.w * x * p.y;
        sxx += p.w * x * x;
    }
    let beta = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let ssr: f64 = points
        .iter()
        .map(|p| {
            let x = (p.a - a_p).abs();
            p.w * (p.y - beta * x).powi(2)
        })
        .sum();
    (beta, ssr)
}

fn two_branch_ssr(points: &[LinPoint], a_p: f64) -> f64 {
    let below: Vec<&LinPoint> = points.iter().filter(|p| p.a < a_p).collect();
    let above: Vec<&LinPoint> = points.iter().filter(|p| p.a >= a_p).collect();
    branch_beta(&below, a_p).1 + branch_beta(&above, a_p).1
}

/// Weighted fit of the V-shaped linearized hyperbola. Data only on one side
/// of the apex degrades to a single-branch fit with the other coefficient
/// absent; identical amplitudes everywhere are rejected.
pub fn fit_hyperbola(points: &[HyperbolaPoint]) -> Result<HyperbolaFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "hyperbola fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| p.tau <= 0.0 || !p.tau.is_finite() || !p.amplitude.is_finite())
    {
        return Err(Error::InvalidArgument("hyperbola fit requires finite positive tau".into()));
    }
    let a_min = points.iter().map(|p| p.amplitude).fold(f64::INFINITY, f64::min);
    let a_max = points.iter().map(|p| p.amplitude).fold(f64::NEG_INFINITY, f64::max);
    if a_max - a_min < 1e-300 {
        return Err(Error::InvalidArgument("all points share the same amplitude".into()));
    }

    let lin: Vec<LinPoint> = points
        .iter()
        .map(|p| {
            let y = 1.0 / p.tau;
            let w = match p.tau_sigma {
                Some(st) if st > 0.0 => {
                    let sy = st / (p.tau * p.tau);
                    1.0 / (sy * sy)
                }
                _ => 1.0,
            };
            LinPoint { a: p.amplitude, y, w }
        })
        .collect();

    // Candidate 1: two-branch apex inside the data range (grid + golden).
    let span = a_max - a_min;
    const GRID: usize = 512;
    let mut best_ap = a_min;
    let mut best_ssr = f64::INFINITY;
    for g in 0..=GRID {
        let a_p = a_min + span * g as f64 / GRID as f64;
        let ssr = two_branch_ssr(&lin, a_p);
        if ssr < best_ssr {
            best_ssr = ssr;
            best_ap = a_p;
        }
    }
    let cell = span / GRID as f64;
    let (mut lo, mut hi) = ((best_ap - cell).max(a_min), (best_ap + cell).min(a_max));
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = two_branch_ssr(&lin, x1);
    let mut f2 = two_branch_ssr(&lin, x2);
    for _ in 0..120 {
        if hi - lo < 1e-13 * (1.0 + best_ap.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = two_branch_ssr(&lin, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = two_branch_ssr(&lin, x2);
        }
    }
    let two_branch_ap = 0.5 * (lo + hi);
    let two_branch_ssr_final = two_branch_ssr(&lin, two_branch_ap);

    // Candidate 2: single-branch linear regression y = alpha + b A, valid
    // only when its implied apex -alpha/b falls outside the data range.
    let single = single_branch_regression(&lin, a_min, a_max);

    let use_single = match &single {
        Some(s) => s.ssr < two_branch_ssr_final || {
            let below = lin.iter().filter(|p| p.a < two_branch_ap).count();
            below == 0 || below == lin.len()
        },
        None => {
            let below = lin.iter().filter(|p| p.a < two_branch_ap).count();
            if below == 0 || below == lin.len() {
                return Err(Error::InsufficientData(
                    "points lie on one side of the apex but no consistent single-branch fit exists"
                        .into(),
                ));
            }
            false
        }
    };

    if use_single {
        let s = single.unwrap();
        let c = 1.0 / s.beta;
        let sigma_c = s.sigma_beta / (s.beta * s.beta);
        let on_minus_side = s.apex >= a_max;
        return Ok(HyperbolaFit {
            a_p: s.apex,
            c_minus: on_minus_side.then_some(c),
            c_plus: (!on_minus_side).then_some(c),
            sigma_a_p: s.sigma_apex,
            sigma_c_minus: on_minus_side.then_some(sigma_c),
            sigma_c_plus: (!on_minus_side).then_some(sigma_c),
            rms_residual: (s.ssr_unweighted / lin.len() as f64).sqrt(),
            points_minus: if on_minus_side { lin.len() } else { 0 },
            points_plus: if on_minus_side { 0 } else { lin.len() },
        });
    }

    let a_p = two_branch_ap;
    let below: Vec<&LinPoint> = lin.iter().filter(|p| p.a < a_p).collect();
    let above: Vec<&LinPoint> = lin.iter().filter(|p| p.a >= a_p).collect();
    let (beta_minus, _) = branch_beta(&below, a_p);
    let (beta_plus, _) = branch_beta(&above, a_p);

    // Covariance from the linearized Jacobian in (A_P, beta-, beta+).
    let mut jtj = vec![vec![0.0f64; 3]; 3];
    for p in &lin {
        let (jac, _w): ([f64; 3], f64) = if p.a < a_p {
            ([-beta_minus, -(a_p - p.a), 0.0], p.w)
        } else {
            ([beta_plus, 0.0, -(p.a - a_p)], p.w)
        };
        for i in 0..3 {
            for j in 0..3 {
                jtj[i][j] += p.w * jac[i] * jac[j];
            }
        }
    }
    let dof = (lin.len().saturating_sub(3)).max(1) as f64;
    let has_sigma = points.iter().any(|p| p.tau_sigma.is_some());
    let s2 = if has_sigma {
        (two_branch_ssr_final / dof).max(1.0)
    } else {
        two_branch_ssr_final / dof
    };
    let cov = invert_dense(&jtj);
    let (sigma_a_p, sigma_bm, sigma_bp) = match cov {
        Some(c) => (
            (c[0][0] * s2).max(0.0).sqrt(),
            (c[1][1] * s2).max(0.0).sqrt(),
            (c[2][2] * s2).max(0.0).sqrt(),
        ),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };

    let ssr_unweighted: f64 = lin
        .iter()
        .map(|p| {
            let x = (p.a - a_p).abs();
            let beta = if p.a < a_p { beta_minus } else { beta_plus };
            (p.y - beta * x).powi(2)
        })
        .sum();

    Ok(HyperbolaFit {
        a_p,
        c_minus: (beta_minus > 0.0).then(|| 1.0 / beta_minus),
        c_plus: (beta_plus > 0.0).then(|| 1.0 / beta_plus),
        sigma_a_p,
        sigma_c_minus: (beta_minus > 0.0).then(|| sigma_bm / (beta_minus * beta_minus)),
        sigma_c_plus: (beta_plus > 0.0).then(|| sigma_bp / (beta_plus * beta_plus)),
        rms_residual: (ssr_unweighted / lin.len() as f64).sqrt(),
        points_minus: below.len(),
        points_plus: above.len(),
    })
}

struct SingleBranch {
    apex: f64,
    beta: f64,
    sigma_apex: f64,
    sigma_beta: f64,
    ssr: f64,
    ssr_unweighted: f64,
}

fn single_branch_regression(lin: &[LinPoint], a_min: f64, a_max: f64) -> Option<SingleBranch> {
    let sw: f64 = lin.iter().map(|p| p.w).sum();
    let sa: f64 = lin.iter().map(|p| p.w * p.a).sum();
    let sy: f64 = lin.iter().map(|p| p.w * p.y).sum();
    let saa: f64 = lin.iter().map(|p| p.w * p.a * p.a).sum();
    let say: f64 = lin.iter().map(|p| p.w * p.a * p.y).sum();
    let det = sw * saa - sa * sa;
    if det.abs() < 1e-300 {
        return None;
    }
    let alpha = (saa * sy - sa * say) / det;
    let b = (sw * say - sa * sy) / det;
    if b.abs() < 1e-300 {
        return None;
    }
    let apex = -alpha / b;
    // Consistency: apex on the far side of the data, slope signs match.
    let valid = (b < 0.0 && apex >= a_max) || (b > 0.0 && apex <= a_min);
    if !valid {
        return None;
    }
    let ssr: f64 = lin.iter().map(|p| p.w * (p.y - alpha - b * p.a).powi(2)).sum();
    let ssr_unweighted: f64 = lin.iter().map(|p| (p.y - alpha - b * p.a).powi(2)).sum();
    let dof = (lin.len().saturating_sub(2)).max(1) as f64;
    let s2 = ssr / dof;
    // Covariance of (alpha, b), then delta method for apex = -alpha/b.
    let var_alpha = s2 * saa / det;
    let var_b = s2 * sw / det;
    let cov_ab = -s2 * sa / det;
    let d_alpha = -1.0 / b;
    let d_b = alpha / (b * b);
    let var_apex =
        d_alpha * d_alpha * var_alpha + d_b * d_b * var_b + 2.0 * d_alpha * d_b * cov_ab;
    Some(SingleBranch {
        apex,
        beta: b.abs(),
        sigma_apex: var_apex.max(0.0).sqrt(),
        sigma_beta: var_b.max(0.0).sqrt(),
        ssr,
        ssr_unweighted,
    })
}

/// Report string in the style "A_P2(exp) = 35.844 ± 0.018 mV".
pub fn format_ap_report(k: u32, origin: &str, a_p: f64, sigma: f64, unit: &str) -> String {
    format!("A_P{k}({origin}) = {a_p:.3} \u{b1} {sigma:.3} {unit}")
}

/// Report string in the style "(79.731 ± 0.433)/|A-A_P2|".
pub fn format_branch_report(k: u32, c: f64, sigma: f64) -> String {
    format!("({c:.3} \u{b1} {sigma:.3})/|A-A_P{k}|")
}

/// Per-subsequence analysis of one k-tupling campaign.
#[derive(Clone, Debug)]
pub struct SubsequenceAnalysis {
    /// Subsequence label l in 1..=k.
    pub l: u32,
    /// Damped-cosine fit per amplitude.
    pub fits: Vec<(f64, DampedCosineFit)>,
    /// Points that entered the hyperbola fit: (amplitude, tau, tau_sigma).
    pub used: Vec<HyperbolaPoint>,
    pub hyperbola: HyperbolaFit,
}

/// Campaign-level result: per-subsequence hyperbola fits plus
/// inverse-variance averages of the k-tupling amplitude and branch
/// coefficient.
#[derive(Clone, Debug)]
pub struct KTuplingAnalysis {
    pub k: u32,
    pub per_subsequence: Vec<SubsequenceAnalysis>,
    pub a_pk: f64,
    pub a_pk_sigma: f64,
    pub c_k: f64,
    pub c_k_sigma: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct AnalysisOptions {
    /// Modulation periods longer than this fraction of the observation
    /// window are unresolved and excluded from the hyperbola fit.
    pub tau_window_factor: f64,
    pub threads: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { tau_window_factor: 0.5, threads: 1 }
    }
}

fn inverse_variance_mean(values: &[(f64, f64)]) -> (f64, f64) {
    // sigma = 0 (exact fits) would blow up the weights; clamp.
    let mut num = 0.0;
    let mut den = 0.0;
    for &(v, sigma) in values {
        let s2 = (sigma * sigma).max(1e-300);
        num += v / s2;
        den += 1.0 / s2;
    }
    (num / den, (1.0 / den).sqrt())
}

/// Full closed loop over an amplitude campaign: decompose each series into k
/// subsequences, fit each subsequence to a damped cosine, fit the modulation
/// periods of each subsequence to a hyperbola, and average the k apex
/// estimates.
pub fn analyze_ktupling(
    dataset: &[StroboscopicSeries],
    k: u32,
    opts: &AnalysisOptions,
) -> Result<KTuplingAnalysis> {
    if k < 2 {
        return Err(Error::InvalidArgument("analysis requires k >= 2".into()));
    }
    if dataset.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 amplitudes, got {}",
            dataset.len()
        )));
    }
    let window = dataset
        .iter()
        .map(|s| s.times.last().copied().unwrap_or(0))
        .max()
        .unwrap_or(0) as f64;
    let tau_cut = opts.tau_window_factor * window;

    // All (amplitude, l) fits are independent.
    let indexed: Vec<(usize, u32)> = (0..dataset.len())
        .flat_map(|i| (1..=k).map(move |l| (i, l)))
        .collect();
    let fits: Vec<Result<(usize, u32, f64, DampedCosineFit)>> =
        parallel_map(indexed.len(), opts.threads, |idx| {
            let (i, l) = indexed[idx];
            let subs = decompose_subsequences(&dataset[i], k)?;
            let fit = fit_damped_cosine(&subs[(l - 1) as usize], None)?;
            Ok((i, l, dataset[i].amplitude, fit))
        });

    let mut per_l: Vec<Vec<(f64, DampedCosineFit)>> = vec![Vec::new(); k as usize];
    for item in fits {
        let (_, l, amplitude, fit) = item?;
        per_l[(l - 1) as usize].push((amplitude, fit));
    }

    let mut per_subsequence = Vec::with_capacity(k as usize);
    let mut ap_estimates = Vec::new();
    let mut c_estimates = Vec::new();
    for (li, fits) in per_l.into_iter().enumerate() {
        let used: Vec<HyperbolaPoint> = fits
            .iter()
            .filter(|(_, f)| f.converged && f.tau_periods.is_finite() && f.tau_periods <= tau_cut)
            .map(|(a, f)| HyperbolaPoint {
                amplitude: *a,
                tau: f.tau_periods,
                tau_sigma: f.tau_sigma,
            })
            .collect();
        let hyperbola = fit_hyperbola(&used)?;
        if hyperbola.points_minus < 2 || hyperbola.points_plus < 2 {
            return Err(Error::InsufficientData(format!(
                "subsequence {}: {} below / {} above the apex (need >= 2 each)",
                li + 1,
                hyperbola.points_minus,
                hyperbola.points_plus
            )));
        }
        ap_estimates.push((hyperbola.a_p, hyperbola.sigma_a_p));
        if let (Some(c), Some(sc)) = (hyperbola.c_minus, hyperbola.sigma_c_minus) {
            c_estimates.push((c, sc));
        }
        if let (Some(c), Some(sc)) = (hyperbola.c_plus, hyperbola.sigma_c_plus) {
            c_estimates.push((c, sc));
        }
        per_subsequence.push(SubsequenceAnalysis { l: li as u32 + 1, fits, used, hyperbola });
    }

    let (a_pk, a_pk_sigma) = inverse_variance_mean(&ap_estimates);
    let (c_k, c_k_sigma) = inverse_variance_mean(&c_estimates);
    Ok(KTuplingAnalysis { k, per_subsequence, a_pk, a_pk_sigma, c_k, c_k_sigma })
}
