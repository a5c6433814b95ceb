//! Synthetic stroboscopic measurement campaigns.
//!
//! For each drive amplitude on a grid the six-level NV model is propagated
//! from an imperfect initial state for n = 1..N drive periods; the
//! photoluminescence after each period is pushed toward the fully mixed
//! level by a phenomenological exponential and shot noise is added as scaled
//! Poisson counts. A two-level reference campaign produces the matching
//! <sigma_z> data without decay or noise unless configured.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::floquet::{monodromy, IntegratorConfig};
use crate::hamiltonians::{
    nv_eigenstructure, nv_hamiltonian, sigma_z, tls_hamiltonian, BareLevel, DriveParams, NvModel,
    PlParams, TlsModel,
};
use crate::linalg::{unitary_eigenphases, ComplexMatrix, DensityState, StateVector};
use crate::parallel::parallel_map;
use crate::rng::SplitMix64;
use crate::signal::{dft_magnitude, StroboscopicSeries};

/// Initial six-level populations (bare basis, diagonal density matrix).
#[derive(Clone, Copy, Debug)]
pub struct Initialization {
    pub populations: [f64; 6],
}

impl Initialization {
    /// `p_target` in |0,+1/2>, the remainder split evenly between |0,-1/2>
    /// and the fully mixed electronic-dark (m_S = +/-1) sector.
    pub fn with_target(p_target: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_target) {
            return Err(Error::InvalidArgument(format!("p_target {p_target} outside [0, 1]")));
        }
        let rest = 1.0 - p_target;
        let mut populations = [rest / 8.0; 6];
        populations[BareLevel::Ms0IuP.index()] = p_target;
        populations[BareLevel::Ms0IuM.index()] = rest / 2.0;
        Ok(Self { populations })
    }

    pub fn explicit(populations: [f64; 6]) -> Result<Self> {
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-12 || populations.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument(
                "populations must be non-negative and sum to 1 within 1e-12".into(),
            ));
        }
        Ok(Self { populations })
    }

    pub fn density(&self) -> DensityState {
        DensityState::from_populations(&self.populations).expect("validated populations")
    }
}

impl Default for Initialization {
    fn default() -> Self {
        Self::with_target(0.95).unwrap()
    }
}

/// Measurement-campaign parameters.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    /// Drive amplitudes: mV for the NV campaign, MHz for the two-level
    /// reference campaign.
    pub amplitudes: Vec<f64>,
    pub n_periods: u64,
    pub initialization: Initialization,
    /// Phenomenological relaxation time in units of T_d; infinite disables
    /// the decay envelope.
    pub t_relax_periods: f64,
    /// Poisson scale in photons per PL count unit; 0 disables shot noise.
    pub shot_noise: f64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(amplitudes: Vec<f64>) -> Self {
        Self {
            amplitudes,
            n_periods: 200,
            initialization: Initialization::default(),
            t_relax_periods: f64::INFINITY,
            shot_noise: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() {
            return Err(Error::InvalidArgument("amplitude grid is empty".into()));
        }
        if self.n_periods == 0 {
            return Err(Error::InvalidArgument("n_periods must be >= 1".into()));
        }
        if self.t_relax_periods.is_nan() || self.t_relax_periods <= 0.0 {
            return Err(Error::InvalidArgument("t_relax_periods must be > 0".into()));
        }
        if self.shot_noise < 0.0 || !self.shot_noise.is_finite() {
            return Err(Error::InvalidArgument("shot_noise must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One simulated campaign: per-amplitude stroboscopic series plus the
/// key = value metadata that reproduces it.
#[derive(Clone, Debug)]
pub struct CampaignDataset {
    pub series: Vec<StroboscopicSeries>,
    pub meta: Vec<(String, String)>,
}

/// Monodromy eigensystem prepared for cheap stroboscopic powers of a
/// density matrix.
struct StroboPropagator {
    basis: Vec<StateVector>,
    phases: Vec<f64>,
    rho_tilde: ComplexMatrix,
}

impl StroboPropagator {
    fn new(u: &ComplexMatrix, rho0: &DensityState) -> Result<Self> {
        let (phases, basis) = unitary_eigenphases(u)?;
        let d = u.dim();
        let rho_tilde = ComplexMatrix::from_fn(d, |a, b| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += basis[a].amp(i).conj() * rho0.matrix().at(i, j) * basis[b].amp(j);
                }
            }
            acc
        })?;
        Ok(Self { basis, phases, rho_tilde })
    }

    /// rho(n T_d) = U^n rho0 U^-n in the bare basis.
    fn density_at(&self, n: u64) -> ComplexMatrix {
        let d = self.rho_tilde.dim();
        let nf = n as f64;
        ComplexMatrix::from_fn(d, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..d {
                for b in 0..d {
                    let rot = Complex64::from_polar(1.0, nf * (self.phases[a] - self.phases[b]));
                    acc += self.basis[a].amp(i)
                        * rot
                        * self.rho_tilde.at(a, b)
                        * self.basis[b].amp(j).conj();
                }
            }
            acc
        })
        .expect("finite rotation of a finite density matrix")
    }
}

fn pl_from_matrix(rho: &ComplexMatrix, pl: &PlParams) -> f64 {
    let p0 = rho.at(BareLevel::Ms0IuP.index(), BareLevel::Ms0IuP.index()).re
        + rho.at(BareLevel::Ms0IuM.index(), BareLevel::Ms0IuM.index()).re;
    pl.dark_level + (pl.bright_level - pl.dark_level) * p0
}

fn decay_toward(value: f64, mixed: f64, n: u64, t_relax: f64) -> f64 {
    if t_relax.is_infinite() {
        value
    } else {
        mixed + (value - mixed) * (-(n as f64) / t_relax).exp()
    }
}

/// Simulate the NV campaign: unitary six-level dynamics per amplitude,
/// sampled after every drive period, then decay toward the mixed-state PL
/// and per-point Poisson noise. The drive runs in tune with the selected
/// transition (nu_d = delta0_selected) and a fixed seed reproduces the
/// dataset bitwise; noise streams are keyed by (seed, amplitude index) so
/// thread scheduling cannot reorder draws.
pub fn simulate_campaign(
    model: &NvModel,
    pl: &PlParams,
    cfg: &ProtocolConfig,
    integrator: &IntegratorConfig,
    threads: usize,
) -> Result<CampaignDataset> {
    cfg.validate()?;
    model.validate()?;
    let structure = nv_eigenstructure(model)?;
    let nu_d = structure.delta0_selected_mhz;
    let rho0 = cfg.initialization.density();
    let mixed_pl = pl.mixed_level();

    let rows: Vec<Result<StroboscopicSeries>> =
        parallel_map(cfg.amplitudes.len(), threads, |idx| {
            let a_mv = cfg.amplitudes[idx];
            let m = *model;
            let u = monodromy(&move |t| nv_hamiltonian(&m, a_mv, nu_d, 0.0, t), nu_d, integrator)?;
            let prop = StroboPropagator::new(&u, &rho0)?;
            let mut rng = SplitMix64::stream(cfg.seed, idx as u64);
            let mut times = Vec::with_capacity(cfg.n_periods as usize);
            let mut values = Vec::with_capacity(cfg.n_periods as usize);
            let mut sigmas = Vec::with_capacity(cfg.n_periods as usize);
            for n in 1..=cfg.n_periods {
                let clean = pl_from_matrix(&prop.density_at(n), pl);
                let decayed = decay_toward(clean, mixed_pl, n, cfg.t_relax_periods);
                times.push(n);
                if cfg.shot_noise > 0.0 {
                    let lambda = (decayed * cfg.shot_noise).max(0.0);
                    values.push(rng.next_poisson(lambda) as f64 / cfg.shot_noise);
                    sigmas.push((decayed.max(0.0) / cfg.shot_noise).sqrt().max(1e-12));
                } else {
                    values.push(decayed);
                }
            }
            StroboscopicSeries::new(
                a_mv,
                times,
                values,
                (cfg.shot_noise > 0.0).then_some(sigmas),
            )
        });

    let mut series = Vec::with_capacity(rows.len());
    for row in rows {
        series.push(row?);
    }

    let mut meta = vec![
        ("kind".to_string(), "nv_campaign".to_string()),
        ("code_version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("nu_d_mhz".to_string(), format!("{nu_d:.17e}")),
        ("delta0_selected_mhz".to_string(), format!("{:.17e}", structure.delta0_selected_mhz)),
        ("alpha_sq".to_string(), format!("{:.17e}", structure.alpha_sq)),
        ("d_zfs_mhz".to_string(), format!("{:.17e}", model.d_zfs_mhz)),
        ("b_z_gauss".to_string(), format!("{:.17e}", model.b_z_gauss)),
        ("a_par_mhz".to_string(), format!("{:.17e}", model.a_par_mhz)),
        ("a_perp_mhz".to_string(), format!("{:.17e}", model.a_perp_mhz)),
        ("gamma_e_mhz_per_g".to_string(), format!("{:.17e}", model.gamma_e_mhz_per_g)),
        ("gamma_n_mhz_per_g".to_string(), format!("{:.17e}", model.gamma_n_mhz_per_g)),
        ("gamma_x_mhz_per_g".to_string(), format!("{:.17e}", model.gamma_x_mhz_per_g)),
        (
            "amplitude_calibration_mhz_per_mv".to_string(),
            format!("{:.17e}", model.amplitude_calibration_mhz_per_mv),
        ),
        ("nuclear_drive".to_string(), model.nuclear_drive.to_string()),
        ("bright_level".to_string(), format!("{:.17e}", pl.bright_level)),
        ("dark_level".to_string(), format!("{:.17e}", pl.dark_level)),
        ("n_periods".to_string(), cfg.n_periods.to_string()),
        ("t_relax_periods".to_string(), format!("{:.17e}", cfg.t_relax_periods)),
        ("shot_noise".to_string(), format!("{:.17e}", cfg.shot_noise)),
        ("seed".to_string(), cfg.seed.to_string()),
        ("steps_per_period".to_string(), integrator.steps_per_period.to_string()),
    ];
    for (i, p) in cfg.initialization.populations.iter().enumerate() {
        meta.push((format!("init_population_{i}"), format!("{p:.17e}")));
    }
    Ok(CampaignDataset { series, meta })
}

/// Two-level reference campaign: <sigma_z> from the ground state, sampled
/// after every period, driven in tune (nu_d = delta0). Decay relaxes toward
/// the mixed-state value 0; optional Gaussian noise with sigma =
/// 1/sqrt(shot_noise) stands in for photon statistics on the dimensionless
/// observable.
pub fn reference_campaign_tls(
    model: &TlsModel,
    cfg: &ProtocolConfig,
    integrator: &IntegratorConfig,
    threads: usize,
) -> Result<CampaignDataset> {
    cfg.validate()?;
    let nu_d = model.delta0_mhz;
    let sz = sigma_z();
    let g = model.ground_state();

    let rows: Vec<Result<StroboscopicSeries>> =
        parallel_map(cfg.amplitudes.len(), threads, |idx| {
            let a_mhz = cfg.amplitudes[idx];
            let drive = DriveParams::new(a_mhz, nu_d, 0.0)?;
            let m = *model;
            let u = monodromy(&move |t| tls_hamiltonian(&m, &drive, t), nu_d, integrator)?;
            let (phases, basis) = unitary_eigenphases(&u)?;
            let coeff: Vec<Complex64> = basis.iter().map(|b| b.inner(&g)).collect();
            let mut rng = SplitMix64::stream(cfg.seed, idx as u64);
            let mut times = Vec::with_capacity(cfg.n_periods as usize);
            let mut values = Vec::with_capacity(cfg.n_periods as usize);
            let mut sigmas = Vec::with_capacity(cfg.n_periods as usize);
            for n in 1..=cfg.n_periods {
                let amps: Vec<Complex64> = (0..2)
                    .map(|i| {
                        (0..2)
                            .map(|a| {
                                basis[a].amp(i)
                                    * coeff[a]
                                    * Complex64::from_polar(1.0, n as f64 * phases[a])
                            })
                            .sum()
                    })
                    .collect();
                let state = StateVector::new(amps)?;
                let clean = state.expectation(&sz);
                let decayed = decay_toward(clean, 0.0, n, cfg.t_relax_periods);
                times.push(n);
                if cfg.shot_noise > 0.0 {
                    let sigma = 1.0 / cfg.shot_noise.sqrt();
                    values.push(decayed + sigma * rng.next_gaussian());
                    sigmas.push(sigma);
                } else {
                    values.push(decayed);
                }
            }
            StroboscopicSeries::new(
                a_mhz,
                times,
                values,
                (cfg.shot_noise > 0.0).then_some(sigmas),
            )
        });

    let mut series = Vec::with_capacity(rows.len());
    for row in rows {
        series.push(row?);
    }
    let meta = vec![
        ("kind".to_string(), "tls_campaign".to_string()),
        ("code_version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("delta0_mhz".to_string(), format!("{:.17e}", model.delta0_mhz)),
        ("nu_d_mhz".to_string(), format!("{nu_d:.17e}")),
        ("n_periods".to_string(), cfg.n_periods.to_string()),
        ("t_relax_periods".to_string(), format!("{:.17e}", cfg.t_relax_periods)),
        ("shot_noise".to_string(), format!("{:.17e}", cfg.shot_noise)),
        ("seed".to_string(), cfg.seed.to_string()),
        ("steps_per_period".to_string(), integrator.steps_per_period.to_string()),
    ];
    Ok(CampaignDataset { series, meta })
}

/// Stacked one-sided spectra of a campaign, one row per amplitude.
#[derive(Clone, Debug)]
pub struct CampaignSpectrum {
    pub amplitudes: Vec<f64>,
    /// Frequencies in cycles per T_d.
    pub frequencies: Vec<f64>,
    /// `magnitudes[row][bin]`, row-aligned with `amplitudes`.
    pub magnitudes: Vec<Vec<f64>>,
}

/// DFT of every series in the campaign.
pub fn dft_campaign(dataset: &CampaignDataset) -> Result<CampaignSpectrum> {
    if dataset.series.is_empty() {
        return Err(Error::InsufficientData("campaign has no series".into()));
    }
    let mut amplitudes = Vec::with_capacity(dataset.series.len());
    let mut magnitudes = Vec::with_capacity(dataset.series.len());
    let mut frequencies: Option<Vec<f64>> = None;
    for s in &dataset.series {
        let spec = dft_magnitude(s)?;
        let freqs: Vec<f64> = spec.iter().map(|&(f, _)| f).collect();
        match &frequencies {
            None => frequencies = Some(freqs),
            Some(existing) if *existing == freqs => {}
            Some(_) => {
                return Err(Error::InvalidArgument(
                    "campaign series disagree on the frequency grid".into(),
                ))
            }
        }
        amplitudes.push(s.amplitude);
        magnitudes.push(spec.into_iter().map(|(_, m)| m).collect());
    }
    Ok(CampaignSpectrum { amplitudes, frequencies: frequencies.unwrap(), magnitudes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{stroboscopic_evolve, tls_floquet};
    use crate::hamiltonians::selected_matrix_element;
    use crate::ktupling::{find_amplitude, find_amplitude_nv, ScanConfig};
    use crate::signal::dominant_frequency;

    fn quiet_protocol(amplitudes: Vec<f64>) -> ProtocolConfig {
        ProtocolConfig::new(amplitudes)
    }

    #[test]
    fn tls_limit_reduction() {
        // Unhybridized model, perfect initialization, no decay or noise: the
        // PL series is an affine map of the two-level <sigma_z> series at
        // the renormalized amplitude.
        let model = NvModel { a_perp_mhz: 0.0, nuclear_drive: false, ..NvModel::default() };
        let structure = nv_eigenstructure(&model).unwrap();
        let pl = PlParams::default();
        let a_mv = 12.0;
        let mut cfg = quiet_protocol(vec![a_mv]);
        cfg.n_periods = 120;
        cfg.initialization = Initialization::explicit({
            let mut p = [0.0; 6];
            p[BareLevel::Ms0IuP.index()] = 1.0;
            p
        })
        .unwrap();
        let integrator = IntegratorConfig::new(8192, crate::floquet::Scheme::CommutatorFree4)
            .unwrap();
        let dataset = simulate_campaign(&model, &pl, &cfg, &integrator, 1).unwrap();

        let tls = TlsModel::new(structure.delta0_selected_mhz).unwrap();
        let me = selected_matrix_element(&model, &structure);
        let a_mhz = me * model.amplitude_calibration_mhz_per_mv * a_mv;
        let drive = DriveParams::new(a_mhz, tls.delta0_mhz, 0.0).unwrap();
        let dec = tls_floquet(&tls, &drive, &IntegratorConfig::default()).unwrap();
        let g = tls.ground_state();
        let contrast = pl.bright_level - pl.dark_level;
        for (i, &v) in dataset.series[0].values.iter().enumerate() {
            let n = (i + 1) as u64;
            let sz = stroboscopic_evolve(&g, n, &dec)
                .unwrap()
                .expectation(&sigma_z());
            // |0,1/2> is the lower level of the selected transition, so
            // P(m_S = 0) = (1 - <sigma_z>)/2.
            let expected = pl.dark_level + contrast * (1.0 - sz) / 2.0;
            assert!(
                (v - expected).abs() < 3e-3 * contrast,
                "n={n}: PL {v} vs TLS map {expected}"
            );
        }
    }

    #[test]
    fn doubling_amplitude_alternates_pl() {
        let model = NvModel::default();
        let scan = ScanConfig { a_min: 1.0, a_max: 70.0, grid_points: 512 };
        let root = find_amplitude_nv(&model, 1, 2, &scan, &IntegratorConfig::default(), 2)
            .unwrap()
            .point;
        let pl = PlParams::default();
        let mut cfg = quiet_protocol(vec![root.a_pk]);
        cfg.n_periods = 128;
        let integrator =
            IntegratorConfig::new(8192, crate::floquet::Scheme::CommutatorFree4).unwrap();
        let dataset = simulate_campaign(&model, &pl, &cfg, &integrator, 1).unwrap();
        let spec = dft_magnitude(&dataset.series[0]).unwrap();
        let (freq, _) = dominant_frequency(&spec).unwrap();
        // The root comes from the two-level abstraction, so the six-level
        // ridge lands near (not exactly on) 0.5; a couple of DFT bins of
        // slack covers the renormalization mismatch.
        assert!(
            (freq - 0.5).abs() < 0.02,
            "dominant PL frequency {freq} not at the period-doubling ridge"
        );
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let model = NvModel::default();
        let pl = PlParams::default();
        let mut cfg = quiet_protocol(vec![5.0, 20.0, 35.0]);
        cfg.n_periods = 40;
        cfg.shot_noise = 50.0;
        cfg.t_relax_periods = 500.0;
        let integrator = IntegratorConfig::default().without_verify();
        let a = simulate_campaign(&model, &pl, &cfg, &integrator, 1).unwrap();
        let b = simulate_campaign(&model, &pl, &cfg, &integrator, 3).unwrap();
        for (sa, sb) in a.series.iter().zip(&b.series) {
            assert_eq!(sa.times, sb.times);
            let bits_a: Vec<u64> = sa.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = sb.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "noise must not depend on thread count");
        }
    }

    #[test]
    fn unitary_core_preserves_trace_and_purity() {
        let model = NvModel::default();
        let cfg = quiet_protocol(vec![25.0]);
        let structure = nv_eigenstructure(&model).unwrap();
        let nu = structure.delta0_selected_mhz;
        let integrator = IntegratorConfig::default().without_verify();
        let u = monodromy(&move |t| nv_hamiltonian(&model, 25.0, nu, 0.0, t), nu, &integrator)
            .unwrap();
        let rho0 = cfg.initialization.density();
        let prop = StroboPropagator::new(&u, &rho0).unwrap();
        let purity0 = rho0.purity();
        for &n in &[1u64, 7, 63, 200] {
            let rho_n = DensityState::new(prop.density_at(n)).expect("physical density matrix");
            assert!((rho_n.matrix().trace().re - 1.0).abs() < 1e-10);
            assert!((rho_n.purity() - purity0).abs() < 1e-8, "purity drift at n={n}");
        }
    }

    #[test]
    fn decay_envelope_converges_to_mixed_level() {
        let model = NvModel::default();
        let pl = PlParams::default();
        let mut cfg = quiet_protocol(vec![30.0]);
        cfg.n_periods = 160;
        cfg.t_relax_periods = 15.0;
        let integrator = IntegratorConfig::default().without_verify();
        let dataset = simulate_campaign(&model, &pl, &cfg, &integrator, 1).unwrap();
        let mixed = pl.mixed_level();
        let tail = dataset.series[0].values[149]; // n = 150 = 10 * t_relax
        assert!(
            ((tail - mixed) / mixed).abs() < 1e-4,
            "PL at 10 T_relax: {tail} vs mixed {mixed}"
        );
    }

    #[test]
    fn noise_mean_converges_to_decayed_value() {
        // Re-derive the noiseless value, then check the Poisson sample mean
        // over many seeds at one (amplitude, n) point.
        let model = NvModel::default();
        let pl = PlParams::default();
        let mut cfg = quiet_protocol(vec![18.0]);
        cfg.n_periods = 5;
        cfg.t_relax_periods = 80.0;
        let integrator = IntegratorConfig::default().without_verify();
        let clean = simulate_campaign(&model, &pl, &cfg, &integrator, 1).unwrap();
        let target = clean.series[0].values[4];

        let shot = 20.0;
        let trials = 10_000;
        let mut sum = 0.0;
        for seed in 0..trials {
            let mut rng = SplitMix64::stream(seed, 0);
            sum += rng.next_poisson(target * shot) as f64 / shot;
        }
        let mean = sum / trials as f64;
        let sigma = (target / shot).sqrt();
        assert!(
            (mean - target).abs() < 3.0 * sigma / (trials as f64).sqrt(),
            "sample mean {mean} vs expected {target}"
        );
    }

    #[test]
    fn tls_reference_ground_state_is_stationary_without_drive() {
        let model = TlsModel::new(1.0).unwrap();
        let mut cfg = quiet_protocol(vec![0.0]);
        cfg.n_periods = 50;
        let dataset =
            reference_campaign_tls(&model, &cfg, &IntegratorConfig::default(), 1).unwrap();
        for &v in &dataset.series[0].values {
            assert!((v + 1.0).abs() < 1e-9, "<sigma_z> should stay -1, got {v}");
        }
    }

    #[test]
    fn tls_reference_doubling_column_alternates() {
        let model = TlsModel::new(1.0).unwrap();
        let scan = ScanConfig::for_tls(&model);
        let a_p2 = find_amplitude(1, 2, 1.0, &scan, &model, &IntegratorConfig::default(), 2)
            .unwrap()
            .point
            .a_pk;
        let mut cfg = quiet_protocol(vec![a_p2]);
        cfg.n_periods = 60;
        let dataset =
            reference_campaign_tls(&model, &cfg, &IntegratorConfig::default(), 1).unwrap();
        for (i, &v) in dataset.series[0].values.iter().enumerate() {
            let n = i as u64 + 1;
            let expected = if n % 2 == 1 { 0.7099 } else { -1.0 };
            assert!(
                (v - expected).abs() < 1.5e-3,
                "n={n}: <sigma_z> {v} vs {expected}"
            );
        }
    }

    #[test]
    fn subsequences_constant_at_the_doubling_root() {
        // Exactly on the manifold every subsequence of the stroboscopic
        // series is constant (k-periodic dynamics).
        let model = TlsModel::new(1.0).unwrap();
        let scan = ScanConfig::for_tls(&model);
        let a_p2 = find_amplitude(1, 2, 1.0, &scan, &model, &IntegratorConfig::default(), 2)
            .unwrap()
            .point
            .a_pk;
        let mut cfg = quiet_protocol(vec![a_p2]);
        cfg.n_periods = 60;
        let dataset =
            reference_campaign_tls(&model, &cfg, &IntegratorConfig::default(), 1).unwrap();
        let subs = crate::signal::decompose_subsequences(&dataset.series[0], 2).unwrap();
        for sub in &subs {
            let spread = sub.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - sub.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(spread < 1e-7, "subsequence spread {spread:.2e}");
        }
    }

    #[test]
    fn six_level_k_periodicity_bound_for_fixture() {
        // At the TLS-mapped roots the six-level PL is only approximately
        // k-periodic: hybridization (alpha_sq = 0.9044) and the abstraction
        // mismatch leave a slow drift. Recorded bounds for this fixture
        // over 60 periods: 8 counts (k=2), 3 counts (k=3) of a 30-count
        // contrast; measured 6.7 and 2.1.
        let model = NvModel {
            a_par_mhz: 4.682033034123,
            a_perp_mhz: 3.650493956121,
            ..NvModel::default()
        };
        let icfg = IntegratorConfig::new(8192, crate::floquet::Scheme::CommutatorFree4).unwrap();
        let scan = ScanConfig { a_min: 10.0, a_max: 60.0, grid_points: 512 };
        for (k, bound) in [(2u32, 8.0), (3, 3.0)] {
            let root = find_amplitude_nv(&model, 1, k, &scan, &icfg, 2).unwrap().point;
            let mut cfg = quiet_protocol(vec![root.a_pk]);
            cfg.n_periods = 60;
            let ds = simulate_campaign(&model, &PlParams::default(), &cfg, &icfg, 2).unwrap();
            let v = &ds.series[0].values;
            let worst = (0..v.len() - k as usize)
                .map(|i| (v[i + k as usize] - v[i]).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < bound, "k={k}: max |PL(n+k)-PL(n)| = {worst:.3} counts");
        }
    }

    #[test]
    fn campaign_spectrum_shares_frequency_grid() {
        let model = TlsModel::new(1.0).unwrap();
        let mut cfg = quiet_protocol(vec![0.1, 0.3, 0.45]);
        cfg.n_periods = 64;
        let dataset =
            reference_campaign_tls(&model, &cfg, &IntegratorConfig::default().without_verify(), 2)
                .unwrap();
        let spec = dft_campaign(&dataset).unwrap();
        assert_eq!(spec.amplitudes.len(), 3);
        assert_eq!(spec.frequencies.len(), 33);
        assert!(spec.magnitudes.iter().all(|row| row.len() == 33));
    }
}
