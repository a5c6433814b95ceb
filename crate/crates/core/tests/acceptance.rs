//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with:
//!     cargo test -p ktup --test acceptance -- --nocapture

use std::path::PathBuf;
use std::time::Instant;

use ktup::experiment::{reference_campaign_tls, simulate_campaign, ProtocolConfig};
use ktup::floquet::{
    integrate, monodromy, stroboscopic_evolve, tls_floquet, tls_qed, IntegratorConfig, Scheme,
};
use ktup::hamiltonians::{
    calibrate_hyperfine, nv_eigenstructure, sigma_z, tls_hamiltonian, CalibrationKnobs,
    CalibrationTargets, DriveParams, NvModel, TlsModel,
};
use ktup::io::config::RunConfig;
use ktup::io::ppm::HeatmapGrid;
use ktup::ktupling::{find_amplitude, ktupling_residual, FindResult, ScanConfig};
use ktup::rng::SplitMix64;
use ktup::signal::{
    analyze_ktupling, count_peaks, dft_magnitude, dominant_frequency, AnalysisOptions,
    StroboscopicSeries,
};

const THREADS: usize = 2;

fn criterion(n: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} ({name}): {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}): {detail}");
}

fn tls() -> TlsModel {
    TlsModel::new(1.0).unwrap()
}

fn integrator() -> IntegratorConfig {
    IntegratorConfig::default()
}

/// Root of qed = 1/k near its 1/k estimate (narrow window for speed).
fn root_for_k(k: u32) -> FindResult {
    let model = tls();
    let scan = ScanConfig {
        a_min: 0.6 / k as f64,
        a_max: 1.45 / k as f64,
        grid_points: 512,
    };
    find_amplitude(1, k, 1.0, &scan, &model, &integrator(), THREADS).unwrap()
}

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn criterion_01_period_doubling_amplitude() {
    let start = Instant::now();
    let model = tls();
    let scan = ScanConfig::for_tls(&model);
    let found = find_amplitude(1, 2, 1.0, &scan, &model, &integrator(), THREADS).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let a = found.point.a_pk;
    criterion(
        1,
        "period-doubling amplitude",
        (a - 0.5042).abs() <= 5e-4 && elapsed < 10.0,
        &format!("A_P2/delta0 = {a:.6} (want 0.5042 +/- 5e-4), {elapsed:.2} s (limit 10 s)"),
    );
}

#[test]
fn criterion_02_flip_state_projection() {
    let model = tls();
    let a_p2 = root_for_k(2).point.a_pk;
    let drive = DriveParams::new(a_p2, 1.0, 0.0).unwrap();
    let dec = tls_floquet(&model, &drive, &integrator()).unwrap();
    let chi = stroboscopic_evolve(&model.ground_state(), 1, &dec).unwrap();
    let sz = chi.expectation(&sigma_z());
    criterion(
        2,
        "flip-state projection",
        (sz - 0.7099).abs() <= 1e-3,
        &format!("<sigma_z> after one period = {sz:.6} (want 0.7099 +/- 1e-3)"),
    );
}

#[test]
fn criterion_03_ktupling_revival_property() {
    let start = Instant::now();
    let model = tls();
    let mut detail = String::new();
    let mut pass = true;
    for k in 2..=5u32 {
        let root = root_for_k(k).point;
        let drive = DriveParams::new(root.a_pk, 1.0, 0.0).unwrap();
        let dec = tls_floquet(&model, &drive, &integrator()).unwrap();
        let mut rng = SplitMix64::new(0xACCE_0003 + k as u64);
        for state_idx in 0..10 {
            let psi0 = rng.next_state(2);
            let revived = stroboscopic_evolve(&psi0, k as u64, &dec).unwrap();
            let fid_k = psi0.fidelity(&revived);
            if fid_k < 1.0 - 1e-7 {
                pass = false;
                detail = format!("k={k} state {state_idx}: revival fidelity {fid_k}");
            }
            for n in 1..k as u64 {
                let part = stroboscopic_evolve(&psi0, n, &dec).unwrap();
                let fid_n = psi0.fidelity(&part);
                if fid_n >= 1.0 - 1e-4 {
                    pass = false;
                    detail = format!("k={k} state {state_idx}: early revival at n={n} ({fid_n})");
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        pass = false;
        detail = format!("took {elapsed:.1} s (limit 30 s)");
    }
    criterion(3, "k-tupling revival property", pass, &detail);
}

/// Twelve-amplitude campaign around A_Pk, optionally noisy.
fn closed_loop_campaign(k: u32, a_pk: f64, shot_noise: f64) -> Vec<StroboscopicSeries> {
    let model = tls();
    let offsets: Vec<f64> = (0..12)
        .map(|i| -0.03 + 0.06 * i as f64 / 11.0)
        .collect();
    let mut cfg = ProtocolConfig::new(offsets.iter().map(|d| a_pk + d).collect());
    cfg.n_periods = 200;
    cfg.shot_noise = shot_noise;
    cfg.seed = 7 + k as u64;
    let dataset = reference_campaign_tls(&model, &cfg, &integrator().without_verify(), THREADS)
        .unwrap();
    dataset.series
}

#[test]
fn criterion_04_hyperbola_law() {
    let model = tls();
    let a_p2 = root_for_k(2).point.a_pk;
    let series = closed_loop_campaign(2, a_p2, 0.0);
    let analysis = analyze_ktupling(&series, 2, &AnalysisOptions { tau_window_factor: 0.5, threads: THREADS })
        .unwrap();

    let mut pass = true;
    let mut detail = String::new();
    for sub in &analysis.per_subsequence {
        for point in &sub.used {
            let xi =
                ktupling_residual(point.amplitude, 1.0, 1, 2, &model, &integrator()).unwrap();
            let predicted = 1.0 / xi.abs();
            let rel = (point.tau / predicted - 1.0).abs();
            if rel > 0.02 {
                pass = false;
                detail = format!(
                    "A = {:.5}: fitted tau {:.2} vs predicted {:.2} ({:.1}% off)",
                    point.amplitude,
                    point.tau,
                    predicted,
                    100.0 * rel
                );
            }
        }
    }
    let apex_rel = (analysis.a_pk / a_p2 - 1.0).abs();
    if apex_rel > 0.005 {
        pass = false;
        detail = format!("recovered A_P2 {:.6} vs root {:.6} ({:.3}%)", analysis.a_pk, a_p2, 100.0 * apex_rel);
    }
    criterion(4, "hyperbola law", pass, &detail);
}

#[test]
fn criterion_05_branch_coefficient_monotonicity() {
    // Mild shot noise gives the fits honest uncertainties so the
    // subsequence consistency check is meaningful.
    let mut c_values = Vec::new();
    let mut pass = true;
    let mut detail = String::new();
    for k in 2..=5u32 {
        let a_pk = root_for_k(k).point.a_pk;
        let series = closed_loop_campaign(k, a_pk, 1.0e4);
        let analysis = analyze_ktupling(
            &series,
            k,
            &AnalysisOptions { tau_window_factor: 0.5, threads: THREADS },
        )
        .unwrap();
        // per-subsequence apex estimates agree pairwise within 3 sigma
        for a in &analysis.per_subsequence {
            for b in &analysis.per_subsequence {
                if a.l >= b.l {
                    continue;
                }
                let (ha, hb) = (&a.hyperbola, &b.hyperbola);
                let diff = (ha.a_p - hb.a_p).abs();
                let bound = 3.0 * (ha.sigma_a_p.powi(2) + hb.sigma_a_p.powi(2)).sqrt();
                if diff > bound {
                    pass = false;
                    detail = format!(
                        "k={k}: subsequences {} and {} disagree: |{:.6} - {:.6}| > {:.2e}",
                        a.l, b.l, ha.a_p, hb.a_p, bound
                    );
                }
            }
        }
        c_values.push((k, analysis.c_k));
    }
    for w in c_values.windows(2) {
        if w[0].1 <= w[1].1 {
            pass = false;
            detail = format!("C_k not strictly decreasing: {c_values:?}");
        }
    }
    criterion(
        5,
        "C_k monotonicity",
        pass,
        &format!("{detail} C_k = {c_values:?}"),
    );
}

#[test]
fn criterion_06_nv_calibration_fixture() {
    let targets = CalibrationTargets {
        b_z_gauss: 1020.874,
        delta0_selected_mhz: 7.50,
        alpha_sq: 0.9044,
    };
    let knobs = CalibrationKnobs::Hyperfine {
        a_par_mhz: (0.5, 10.0),
        a_perp_mhz: (0.5, 10.0),
    };
    let calibrated = calibrate_hyperfine(&NvModel::default(), &targets, &knobs).unwrap();
    let s = nv_eigenstructure(&calibrated).unwrap();
    let delta_rel = (s.delta0_selected_mhz / 7.50 - 1.0).abs();
    let alpha_rel = (s.alpha_sq / 0.9044 - 1.0).abs();

    // The shipped fixture must match a fresh calibration.
    let fixture = RunConfig::load(&fixture_path("nv_sim.cfg")).unwrap();
    let par_match = (fixture.nv.a_par_mhz - calibrated.a_par_mhz).abs() < 1e-6;
    let perp_match = (fixture.nv.a_perp_mhz - calibrated.a_perp_mhz).abs() < 1e-6;

    criterion(
        6,
        "NV calibration fixture",
        delta_rel <= 1e-3 && alpha_rel <= 1e-3 && par_match && perp_match,
        &format!(
            "delta0 = {:.6} MHz (rel {delta_rel:.2e}), alpha_sq = {:.6} (rel {alpha_rel:.2e}), \
             fixture (A_par, A_perp) = ({}, {}) vs calibrated ({}, {})",
            s.delta0_selected_mhz,
            s.alpha_sq,
            fixture.nv.a_par_mhz,
            fixture.nv.a_perp_mhz,
            calibrated.a_par_mhz,
            calibrated.a_perp_mhz
        ),
    );
}

#[test]
fn criterion_07_dft_ridge_matches_quasi_energy() {
    let model = tls();
    let amplitudes: Vec<f64> = (0..16).map(|i| 0.05 + 0.9 * i as f64 / 15.0).collect();
    let mut cfg = ProtocolConfig::new(amplitudes.clone());
    cfg.n_periods = 200;
    let dataset =
        reference_campaign_tls(&model, &cfg, &integrator().without_verify(), THREADS).unwrap();

    let mut pass = true;
    let mut detail = String::new();
    for series in &dataset.series {
        let spec = dft_magnitude(series).unwrap();
        let (peak_freq, _) = dominant_frequency(&spec).unwrap();
        let drive = DriveParams::new(series.amplitude, 1.0, 0.0).unwrap();
        let q = tls_qed(&model, &drive, &integrator().without_verify()).unwrap();
        let ridge = q.min(1.0 - q);
        let tol = 1.0 / (2.0 * cfg.n_periods as f64);
        if (peak_freq - ridge).abs() > tol {
            pass = false;
            detail = format!(
                "A = {:.3}: DFT peak {:.4} vs folded qed {:.4} (tol {tol})",
                series.amplitude, peak_freq, ridge
            );
        }
    }
    criterion(7, "DFT ridge on quasi-energy difference", pass, &detail);
}

/// Hann window after mean removal: suppresses spectral leakage so ridge
/// counting sees physical components, not sidelobes of the DC offset.
fn hann_windowed(series: &StroboscopicSeries) -> StroboscopicSeries {
    let n = series.values.len();
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let values: Vec<f64> = series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5
                - 0.5 * (std::f64::consts::TAU * i as f64 / (n as f64 - 1.0)).cos();
            (v - mean) * w
        })
        .collect();
    StroboscopicSeries::new(series.amplitude, series.times.clone(), values, None).unwrap()
}

#[test]
fn criterion_08_nv_faint_structure() {
    let fixture = RunConfig::load(&fixture_path("nv_sim.cfg")).unwrap();
    let weak = [2.0, 3.0];
    let strong = [30.0, 34.0, 38.0];
    let mut protocol = fixture.protocol(weak.iter().chain(&strong).copied().collect()).unwrap();
    protocol.n_periods = 200;
    let dataset = simulate_campaign(
        &fixture.nv,
        &fixture.pl_params().unwrap(),
        &protocol,
        &fixture.integrator().unwrap(),
        THREADS,
    )
    .unwrap();

    let mut pass = true;
    let mut detail = String::new();
    let mut summary = String::new();
    for series in &dataset.series {
        let spec = dft_magnitude(&hann_windowed(series)).unwrap();
        let ridges = count_peaks(&spec, 0.05, 3);
        summary.push_str(&format!("A = {:.0} mV -> {ridges} ridges; ", series.amplitude));
        let is_weak = weak.contains(&series.amplitude);
        if is_weak && ridges != 1 {
            pass = false;
            detail = format!("weak amplitude {} mV shows {ridges} ridges (want 1)", series.amplitude);
        }
        if !is_weak && ridges < 2 {
            pass = false;
            detail =
                format!("strong amplitude {} mV shows {ridges} ridges (want >= 2)", series.amplitude);
        }
    }
    criterion(8, "NV faint spectral structure", pass, &format!("{detail} [{summary}]"));
}

#[test]
fn criterion_09_oracle_equivalence() {
    let mut rng = SplitMix64::new(0xACCE_0009);
    let model = tls();
    let mut pass = true;
    let mut detail = String::new();
    for draw in 0..20 {
        let a = 1.2 * rng.next_f64();
        let nu = 0.5 + rng.next_f64();
        let drive = DriveParams::new(a, nu, 0.0).unwrap();
        let h = move |t: f64| tls_hamiltonian(&model, &drive, t);
        let u = monodromy(&h, nu, &integrator()).unwrap();
        let defect = u.unitarity_defect();
        let mut u7 = u.clone();
        for _ in 0..6 {
            u7 = u.mul(&u7);
        }
        let direct =
            integrate(&h, 0.0, 7.0 / nu, 7 * 49_152, Scheme::ExponentialMidpoint).unwrap();
        let diff = u7.sub(&direct).frobenius_norm();
        if diff > 1e-7 || defect > 1e-9 {
            pass = false;
            detail = format!(
                "draw {draw} (A={a:.3}, nu={nu:.3}): |U^7 - direct| = {diff:.2e}, unitarity defect {defect:.2e}"
            );
        }
    }
    criterion(9, "monodromy vs direct integration", pass, &detail);
}

#[test]
fn criterion_10_determinism() {
    let fixture = RunConfig::load(&fixture_path("nv_sim.cfg")).unwrap();
    let mut protocol = fixture.protocol(vec![6.0, 20.0, 34.0]).unwrap();
    protocol.n_periods = 40;
    protocol.shot_noise = 50.0;
    protocol.t_relax_periods = 500.0;
    let fast = IntegratorConfig::new(2048, Scheme::CommutatorFree4)
        .unwrap()
        .without_verify();
    let pl = fixture.pl_params().unwrap();

    let run_a = simulate_campaign(&fixture.nv, &pl, &protocol, &fast, 1).unwrap();
    let run_b = simulate_campaign(&fixture.nv, &pl, &protocol, &fast, 4).unwrap();
    let csv_a = ktup::io::csv::write_campaign(&run_a);
    let csv_b = ktup::io::csv::write_campaign(&run_b);
    let campaign_ok = csv_a == csv_b;

    let grid = |dataset: &ktup::experiment::CampaignDataset| {
        let x: Vec<f64> = dataset.series[0].times.iter().map(|&n| n as f64).collect();
        let y: Vec<f64> = dataset.series.iter().map(|s| s.amplitude).collect();
        let cells: Vec<Vec<f64>> = dataset.series.iter().map(|s| s.values.clone()).collect();
        HeatmapGrid::new(x, y, cells).unwrap()
    };
    let ppm_a = grid(&run_a).render_ppm();
    let ppm_b = grid(&run_b).render_ppm();
    let render_ok = ppm_a == ppm_b;

    criterion(
        10,
        "bitwise determinism",
        campaign_ok && render_ok,
        &format!("campaign bytes equal: {campaign_ok}, PPM bytes equal: {render_ok}"),
    );
}
