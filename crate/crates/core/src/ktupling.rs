//! Locating period k-tupling drive amplitudes.
//!
//! A drive amplitude A_Pk satisfies qed(A, nu_d) = j/k with gcd(j, k) = 1;
//! every state then revives after exactly k drive periods. Roots are found
//! by bracketing the wrapped residual on a dense amplitude grid and refining
//! by bisection (the wrap makes derivative-based methods unreliable), and
//! every returned point carries an independent k-period revival certificate.

use crate::error::{Error, Result};
use crate::floquet::{monodromy, tls_qed, IntegratorConfig};
use crate::hamiltonians::{
    nv_eigenstructure, selected_matrix_element, tls_hamiltonian, DriveParams, NvModel, TlsModel,
};
use crate::linalg::StateVector;
use crate::parallel::parallel_map;
use crate::rng::SplitMix64;

/// Residual magnitude below which a refined root is accepted.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Number of random states in the revival certificate.
const CERTIFICATE_STATES: usize = 10;
const CERTIFICATE_SEED: u64 = 0x4b5f_9e21;

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

/// A verified solution of the k-tupling condition.
#[derive(Clone, Debug)]
pub struct KTuplingPoint {
    pub j: u32,
    pub k: u32,
    /// Root amplitude: MHz for the bare two-level model, mV when produced by
    /// the NV wrapper.
    pub a_pk: f64,
    pub nu_d_mhz: f64,
    /// Wrapped distance of qed from j/k at the root.
    pub residual: f64,
    /// Minimum k-period revival fidelity over random initial states.
    pub certificate_fidelity: f64,
}

/// Amplitude search window and grid density.
#[derive(Clone, Copy, Debug)]
pub struct ScanConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub grid_points: usize,
}

impl ScanConfig {
    /// Default window [0, 1.2 delta0] with 2048 grid points — the in-tune,
    /// moderate-amplitude regime the model is validated in.
    pub fn for_tls(model: &TlsModel) -> Self {
        Self { a_min: 0.0, a_max: 1.2 * model.delta0_mhz, grid_points: 2048 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_min < 0.0 || self.a_max <= self.a_min || self.grid_points < 8 {
            return Err(Error::InvalidArgument(format!(
                "invalid scan window [{}, {}] with {} points",
                self.a_min, self.a_max, self.grid_points
            )));
        }
        Ok(())
    }
}

/// Root plus how many sign-change brackets the grid contained.
#[derive(Clone, Debug)]
pub struct FindResult {
    pub point: KTuplingPoint,
    pub bracket_count: usize,
}

/// Wrap x into [-1/2, 1/2).
fn wrap_half(x: f64) -> f64 {
    (x + 0.5).rem_euclid(1.0) - 0.5
}

fn check_jk(j: u32, k: u32) -> Result<()> {
    if j < 1 || k < 2 || j >= k {
        return Err(Error::InvalidArgument(format!("need 1 <= j < k with k >= 2, got j={j}, k={k}")));
    }
    if gcd(j, k) != 1 {
        return Err(Error::InvalidArgument(format!("j={j} and k={k} must be coprime")));
    }
    Ok(())
}

/// Signed wrapped distance of the quasi-energy difference from j/k.
pub fn ktupling_residual(
    a_mhz: f64,
    nu_d_mhz: f64,
    j: u32,
    k: u32,
    model: &TlsModel,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    check_jk(j, k)?;
    let drive = DriveParams::new(a_mhz, nu_d_mhz, 0.0)?;
    let q = tls_qed(model, &drive, cfg)?;
    Ok(wrap_half(q - j as f64 / k as f64))
}

/// Modulation period (units of T_d) predicted from the wrapped residual:
/// tau = 1/|xi|. Returns infinity on an exact root.
pub fn predicted_modulation_period(
    a_mhz: f64,
    nu_d_mhz: f64,
    j: u32,
    k: u32,
    model: &TlsModel,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let xi = ktupling_residual(a_mhz, nu_d_mhz, j, k, model, cfg)?;
    Ok(if xi == 0.0 { f64::INFINITY } else { 1.0 / xi.abs() })
}

/// Find the smallest-amplitude root of qed = j/k inside the scan window.
///
/// Sign changes of the wrapped residual are bracketed on the grid (wrap
/// jumps, which flip sign with a step of ~1, are filtered out) and refined
/// by bisection to |residual| < 1e-8.
pub fn find_amplitude(
    j: u32,
    k: u32,
    nu_d_mhz: f64,
    scan: &ScanConfig,
    model: &TlsModel,
    cfg: &IntegratorConfig,
    threads: usize,
) -> Result<FindResult> {
    check_jk(j, k)?;
    scan.validate()?;
    let fast = cfg.without_verify();
    let residual = |a: f64| -> Result<f64> { ktupling_residual(a, nu_d_mhz, j, k, model, &fast) };

    let n = scan.grid_points;
    let grid: Vec<f64> = (0..n)
        .map(|i| scan.a_min + (scan.a_max - scan.a_min) * i as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<Result<f64>> = parallel_map(n, threads, |i| residual(grid[i]));
    let mut residuals = Vec::with_capacity(n);
    for v in values {
        residuals.push(v?);
    }

    let mut roots: Vec<(f64, f64)> = Vec::new();
    let mut brackets = 0usize;
    for i in 0..n - 1 {
        let (r0, r1) = (residuals[i], residuals[i + 1]);
        if r0 == 0.0 {
            roots.push((grid[i], 0.0));
            brackets += 1;
            continue;
        }
        let wrap_jump = (r1 - r0).abs() > 0.5;
        if r0.signum() != r1.signum() && !wrap_jump {
            brackets += 1;
            let (mut lo, mut hi, mut f_lo) = (grid[i], grid[i + 1], r0);
            let mut best = (lo, f_lo);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let f_mid = residual(mid)?;
                if f_mid.abs() < best.1.abs() {
                    best = (mid, f_mid);
                }
                if f_mid == 0.0 {
                    break;
                }
                if f_mid.signum() == f_lo.signum() {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) < 1e-14 * (1.0 + mid.abs()) {
                    break;
                }
            }
            if best.1.abs() < RESIDUAL_TOL {
                roots.push(best);
            }
        }
    }

    let (a_root, res) = *roots.first().ok_or_else(|| {
        Error::NotFound(format!(
            "no qed = {j}/{k} bracket in amplitude window [{}, {}] at nu_d = {nu_d_mhz} MHz",
            scan.a_min, scan.a_max
        ))
    })?;

    let certificate_fidelity = revival_certificate(a_root, nu_d_mhz, k, model, cfg)?;
    Ok(FindResult {
        point: KTuplingPoint {
            j,
            k,
            a_pk: a_root,
            nu_d_mhz,
            residual: res,
            certificate_fidelity,
        },
        bracket_count: roots.len().max(brackets),
    })
}

/// Minimum fidelity |<psi0|U^k|psi0>|^2 over random initial states; an
/// independent check that the root really produces k-period revivals.
pub fn revival_certificate(
    a_mhz: f64,
    nu_d_mhz: f64,
    k: u32,
    model: &TlsModel,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let drive = DriveParams::new(a_mhz, nu_d_mhz, 0.0)?;
    let m = *model;
    let u = monodromy(&move |t| tls_hamiltonian(&m, &drive, t), nu_d_mhz, cfg)?;
    let mut rng = SplitMix64::new(CERTIFICATE_SEED);
    let mut worst = 1.0f64;
    for _ in 0..CERTIFICATE_STATES {
        let psi0 = rng.next_state(u.dim());
        let mut amps = psi0.amplitudes().to_vec();
        for _ in 0..k {
            amps = u.apply(&amps);
        }
        let evolved = StateVector::new(amps)?;
        worst = worst.min(psi0.fidelity(&evolved));
    }
    Ok(worst)
}

/// One branch of the k-tupling manifold over a drive-frequency grid.
#[derive(Clone, Debug)]
pub struct ManifoldCurve {
    pub j: u32,
    pub k: u32,
    pub points: Vec<KTuplingPoint>,
    /// Drive frequencies where no root was bracketed.
    pub gaps: Vec<f64>,
}

/// Scan the manifold over drive frequencies; per-point not-found results
/// become gaps rather than failures.
pub fn scan_manifold(
    j: u32,
    k: u32,
    nu_grid_mhz: &[f64],
    scan: &ScanConfig,
    model: &TlsModel,
    cfg: &IntegratorConfig,
    threads: usize,
) -> Result<ManifoldCurve> {
    check_jk(j, k)?;
    let outcomes: Vec<Result<FindResult>> = parallel_map(nu_grid_mhz.len(), threads, |i| {
        find_amplitude(j, k, nu_grid_mhz[i], scan, model, cfg, 1)
    });
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    for (nu, outcome) in nu_grid_mhz.iter().zip(outcomes) {
        match outcome {
            Ok(found) => points.push(found.point),
            Err(Error::NotFound(_)) => gaps.push(*nu),
            Err(e) => return Err(e),
        }
    }
    points.sort_by(|a, b| a.nu_d_mhz.total_cmp(&b.nu_d_mhz));
    gaps.sort_by(f64::total_cmp);
    Ok(ManifoldCurve { j, k, points, gaps })
}

/// NV root finding on the two-level abstraction: the search runs at the
/// renormalized amplitude of the selected |0,1/2> <-> |+>_alpha transition
/// (driven in tune with its level spacing) and the root is mapped back to a
/// programmed amplitude in mV. Full six-level verification is the
/// experiment simulator's job.
pub fn find_amplitude_nv(
    model: &NvModel,
    j: u32,
    k: u32,
    scan_mv: &ScanConfig,
    cfg: &IntegratorConfig,
    threads: usize,
) -> Result<FindResult> {
    let structure = nv_eigenstructure(model)?;
    let delta0 = structure.delta0_selected_mhz;
    let tls = TlsModel::new(delta0)?;
    let mv_to_mhz = selected_matrix_element(model, &structure)
        * model.amplitude_calibration_mhz_per_mv;
    if mv_to_mhz <= 0.0 || !mv_to_mhz.is_finite() {
        return Err(Error::ContractViolation(
            "selected transition has vanishing drive matrix element".into(),
        ));
    }
    let scan = ScanConfig {
        a_min: scan_mv.a_min * mv_to_mhz,
        a_max: scan_mv.a_max * mv_to_mhz,
        grid_points: scan_mv.grid_points,
    };
    let mut found = find_amplitude(j, k, delta0, &scan, &tls, cfg, threads)?;
    found.point.a_pk /= mv_to_mhz;
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{stroboscopic_evolve, tls_floquet};

    fn tls() -> TlsModel {
        TlsModel::new(1.0).unwrap()
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn residual_wraps_to_minus_half_at_zero_drive() {
        let r = ktupling_residual(0.0, 1.0, 1, 2, &tls(), &cfg()).unwrap();
        assert!((r + 0.5).abs() < 1e-10, "qed=0 vs target 1/2 wraps to -1/2, got {r}");
    }

    #[test]
    fn residual_changes_sign_across_doubling_amplitude() {
        let below = ktupling_residual(0.45, 1.0, 1, 2, &tls(), &cfg()).unwrap();
        let above = ktupling_residual(0.55, 1.0, 1, 2, &tls(), &cfg()).unwrap();
        assert!(below < 0.0 && above > 0.0, "below={below}, above={above}");
    }

    #[test]
    fn rejects_non_coprime_or_bad_orders() {
        assert!(check_jk(2, 4).is_err());
        assert!(check_jk(0, 2).is_err());
        assert!(check_jk(3, 3).is_err());
        assert!(check_jk(1, 2).is_ok());
        assert!(check_jk(2, 5).is_ok());
    }

    #[test]
    fn finds_period_doubling_amplitude() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let found = find_amplitude(1, 2, 1.0, &scan, &model, &cfg(), 2).unwrap();
        let p = &found.point;
        assert!(
            (p.a_pk - 0.5042).abs() < 5e-4,
            "A_P2 = {} (expected 0.5042 within 5e-4)",
            p.a_pk
        );
        assert!(p.residual.abs() < RESIDUAL_TOL);
        assert!(p.certificate_fidelity >= 1.0 - 1e-7);
        assert_eq!(found.bracket_count, 1);
    }

    #[test]
    fn quadrupling_amplitude_near_rwa_estimate() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let found = find_amplitude(1, 4, 1.0, &scan, &model, &cfg(), 2).unwrap();
        let a = found.point.a_pk;
        assert!((a - 0.25).abs() < 0.05 * 0.25, "A_P4 = {a}, RWA estimate 0.25");
        assert!(found.point.certificate_fidelity >= 1.0 - 1e-7);
    }

    #[test]
    fn amplitude_ordering_in_k() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let roots: Vec<f64> = (2..=5)
            .map(|k| find_amplitude(1, k, 1.0, &scan, &model, &cfg(), 2).unwrap().point.a_pk)
            .collect();
        for w in roots.windows(2) {
            assert!(w[0] > w[1], "A_Pk not strictly decreasing: {roots:?}");
        }
    }

    #[test]
    fn narrow_window_reports_not_found() {
        let model = tls();
        let scan = ScanConfig { a_min: 0.0, a_max: 0.1, grid_points: 256 };
        let err = find_amplitude(1, 2, 1.0, &scan, &model, &cfg(), 1);
        assert!(matches!(err, Err(Error::NotFound(_))), "qed < 1/2 throughout [0, 0.1]");
    }

    #[test]
    fn predicted_period_is_inverse_residual() {
        let model = tls();
        // Pick an amplitude, read its residual, confirm the identity.
        let a = 0.52;
        let xi = ktupling_residual(a, 1.0, 1, 2, &model, &cfg()).unwrap();
        let tau = predicted_modulation_period(a, 1.0, 1, 2, &model, &cfg()).unwrap();
        assert!((tau - 1.0 / xi.abs()).abs() < 1e-12);
    }

    #[test]
    fn modulation_period_follows_hyperbola_near_root() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let a_p2 = find_amplitude(1, 2, 1.0, &scan, &model, &cfg(), 2).unwrap().point.a_pk;
        let mut products = Vec::new();
        for &da in &[-0.02, -0.01, 0.01, 0.02] {
            let tau = predicted_modulation_period(a_p2 + da, 1.0, 1, 2, &model, &cfg()).unwrap();
            products.push(tau * da.abs());
        }
        let mean = products.iter().sum::<f64>() / products.len() as f64;
        for p in &products {
            assert!(
                (p - mean).abs() < 0.1 * mean,
                "tau * |dA| spread too wide: {products:?}"
            );
        }
    }

    #[test]
    fn hyperbola_coefficient_decreases_with_k() {
        // Local slope of 1/tau vs |A - A_Pk| defines 1/C_k.
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let mut coefficients = Vec::new();
        for k in 2..=5 {
            let a_pk = find_amplitude(1, k, 1.0, &scan, &model, &cfg(), 2).unwrap().point.a_pk;
            let da = 0.01;
            let tau = predicted_modulation_period(a_pk + da, 1.0, 1, k, &model, &cfg()).unwrap();
            coefficients.push(tau * da);
        }
        for w in coefficients.windows(2) {
            assert!(w[0] > w[1], "C_k not decreasing: {coefficients:?}");
        }
    }

    #[test]
    fn single_point_manifold_reduces_to_find() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let curve = scan_manifold(1, 2, &[1.0], &scan, &model, &cfg(), 1).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert!(curve.gaps.is_empty());
        let direct = find_amplitude(1, 2, 1.0, &scan, &model, &cfg(), 1).unwrap();
        assert!((curve.points[0].a_pk - direct.point.a_pk).abs() < 1e-12);
    }

    #[test]
    fn doubling_manifold_is_continuous_near_resonance() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let nu_grid: Vec<f64> = (0..9).map(|i| 0.9 + 0.025 * i as f64).collect();
        let curve = scan_manifold(1, 2, &nu_grid, &scan, &model, &cfg(), 4).unwrap();
        assert!(curve.gaps.is_empty(), "gaps at {:?}", curve.gaps);
        assert_eq!(curve.points.len(), nu_grid.len());
        for w in curve.points.windows(2) {
            assert!(w[0].nu_d_mhz < w[1].nu_d_mhz);
            assert!(
                (w[0].a_pk - w[1].a_pk).abs() < 0.05,
                "curve jumps between {} and {}",
                w[0].a_pk,
                w[1].a_pk
            );
        }
        for p in &curve.points {
            assert!(p.certificate_fidelity >= 1.0 - 1e-7);
        }
    }

    #[test]
    fn manifold_scan_records_gaps() {
        // A narrow amplitude window brackets the doubling root only for
        // part of the frequency grid; missing points become gaps.
        let model = tls();
        let scan = ScanConfig { a_min: 0.45, a_max: 0.55, grid_points: 256 };
        let nu_grid = [0.90, 1.00, 1.10];
        let curve = scan_manifold(1, 2, &nu_grid, &scan, &model, &cfg(), 2).unwrap();
        assert_eq!(curve.points.len() + curve.gaps.len(), nu_grid.len());
        assert!(!curve.gaps.is_empty(), "expected at least one gap");
        assert!(!curve.points.is_empty(), "expected at least one point");
        assert!(curve.points.windows(2).all(|w| w[0].nu_d_mhz < w[1].nu_d_mhz));
    }

    #[test]
    fn tripling_revival_only_at_k_periods() {
        let model = tls();
        let scan = ScanConfig::for_tls(&model);
        let root = find_amplitude(1, 3, 1.0, &scan, &model, &cfg(), 2).unwrap().point;
        let drive = DriveParams::new(root.a_pk, 1.0, 0.0).unwrap();
        let dec = tls_floquet(&model, &drive, &cfg()).unwrap();
        let mut rng = SplitMix64::new(1312);
        for _ in 0..6 {
            let psi0 = rng.next_state(2);
            for n in 1..3u64 {
                let part = stroboscopic_evolve(&psi0, n, &dec).unwrap();
                assert!(psi0.fidelity(&part) < 1.0 - 1e-4, "revived early at n={n}");
            }
            let full = stroboscopic_evolve(&psi0, 3, &dec).unwrap();
            assert!(psi0.fidelity(&full) >= 1.0 - 1e-7);
        }
    }

    #[test]
    fn nv_root_lands_in_instrument_range() {
        // With the fixture calibration the doubling root sits in the low
        // tens of mV and the renormalized amplitude matches the TLS root.
        let model = NvModel::default();
        let scan_mv = ScanConfig { a_min: 0.0, a_max: 80.0, grid_points: 1024 };
        let found = find_amplitude_nv(&model, 1, 2, &scan_mv, &cfg(), 2).unwrap();
        let structure = nv_eigenstructure(&model).unwrap();
        let me = selected_matrix_element(&model, &structure);
        let a_bar = me * model.amplitude_calibration_mhz_per_mv * found.point.a_pk
            / structure.delta0_selected_mhz;
        assert!((a_bar - 0.5042).abs() < 1e-3, "renormalized root {a_bar}");
        assert!(found.point.a_pk > 10.0 && found.point.a_pk < 80.0);
    }
}
