//! Flat key = value configuration with sections.
//!
//! Unknown sections or keys are rejected, every physical quantity carries
//! its unit in the key name, and `to_text` emits the fully resolved
//! configuration so a run can be reproduced from its own output.

use crate::error::{Error, Result};
use crate::experiment::{Initialization, ProtocolConfig};
use crate::floquet::{IntegratorConfig, Scheme};
use crate::hamiltonians::{NvModel, PlParams, TlsModel};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub delta0_mhz: f64,
    /// Drive frequency; None means "in tune" with the model's level spacing.
    pub nu_d_mhz: Option<f64>,
    pub phase_rad: f64,

    pub nv: NvModel,
    pub bright_level_counts: f64,
    pub dark_level_counts: f64,

    pub steps_per_period: usize,
    pub scheme: Scheme,
    pub verify: bool,

    pub n_periods: u64,
    pub p_target: f64,
    pub t_relax_periods: f64,
    pub shot_noise_photons_per_count: f64,
    pub seed: u64,
    pub amp_min_mv: f64,
    pub amp_max_mv: f64,
    pub amp_points: usize,

    pub scan_a_min_rel: f64,
    pub scan_a_max_rel: f64,
    pub scan_a_min_mv: f64,
    pub scan_a_max_mv: f64,
    pub scan_grid_points: usize,

    pub sweep_a_min_rel: f64,
    pub sweep_a_max_rel: f64,
    pub sweep_a_points: usize,
    pub sweep_n_periods: u64,

    pub tau_window_factor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta0_mhz: 1.0,
            nu_d_mhz: None,
            phase_rad: 0.0,
            nv: NvModel::default(),
            bright_level_counts: 100.0,
            dark_level_counts: 70.0,
            steps_per_period: 1024,
            scheme: Scheme::CommutatorFree4,
            verify: true,
            n_periods: 200,
            p_target: 0.95,
            t_relax_periods: f64::INFINITY,
            shot_noise_photons_per_count: 0.0,
            seed: 1,
            amp_min_mv: 1.0,
            amp_max_mv: 45.0,
            amp_points: 45,
            scan_a_min_rel: 0.0,
            scan_a_max_rel: 1.2,
            scan_a_min_mv: 0.0,
            scan_a_max_mv: 80.0,
            scan_grid_points: 2048,
            sweep_a_min_rel: 0.40,
            sweep_a_max_rel: 0.60,
            sweep_a_points: 81,
            sweep_n_periods: 40,
            tau_window_factor: 0.5,
        }
    }
}

fn parse_f64(value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got '{value}'"),
    })
}

fn parse_usize(value: &str, line: usize) -> Result<usize> {
    value.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, got '{value}'"),
    })
}

fn parse_u64(value: &str, line: usize) -> Result<u64> {
    value.parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, got '{value}'"),
    })
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Parse { line, message: format!("expected true/false, got '{value}'") }),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                const SECTIONS: [&str; 8] =
                    ["tls", "drive", "nv", "pl", "integrator", "protocol", "scan", "sweep"];
                if !SECTIONS.contains(&section.as_str()) && section != "analysis" {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown section '[{section}]'"),
                    });
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected key = value, got '{line}'"),
                });
            };
            cfg.set(&section, key.trim(), value.trim(), line_no)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Apply an override of the form "section.key=value" (CLI --set).
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec.split_once('=').ok_or_else(|| {
            Error::Usage(format!("override '{spec}' is not of the form section.key=value"))
        })?;
        let (section, key) = path.trim().split_once('.').ok_or_else(|| {
            Error::Usage(format!("override key '{path}' is not of the form section.key"))
        })?;
        self.set(section, key, value.trim(), 0)
            .map_err(|e| Error::Usage(format!("bad override '{spec}': {e}")))
    }

    fn set(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        match (section, key) {
            ("tls", "delta0_mhz") => self.delta0_mhz = parse_f64(value, line)?,
            ("drive", "nu_d_mhz") => {
                self.nu_d_mhz =
                    if value == "auto" { None } else { Some(parse_f64(value, line)?) }
            }
            ("drive", "phase_rad") => self.phase_rad = parse_f64(value, line)?,
            ("nv", "d_zfs_mhz") => self.nv.d_zfs_mhz = parse_f64(value, line)?,
            ("nv", "b_z_gauss") => self.nv.b_z_gauss = parse_f64(value, line)?,
            ("nv", "gamma_e_mhz_per_g") => self.nv.gamma_e_mhz_per_g = parse_f64(value, line)?,
            ("nv", "gamma_n_mhz_per_g") => self.nv.gamma_n_mhz_per_g = parse_f64(value, line)?,
            ("nv", "a_par_mhz") => self.nv.a_par_mhz = parse_f64(value, line)?,
            ("nv", "a_perp_mhz") => self.nv.a_perp_mhz = parse_f64(value, line)?,
            ("nv", "gamma_x_mhz_per_g") => self.nv.gamma_x_mhz_per_g = parse_f64(value, line)?,
            ("nv", "amplitude_calibration_mhz_per_mv") => {
                self.nv.amplitude_calibration_mhz_per_mv = parse_f64(value, line)?
            }
            ("nv", "nuclear_drive") => self.nv.nuclear_drive = parse_bool(value, line)?,
            ("pl", "bright_level_counts") => self.bright_level_counts = parse_f64(value, line)?,
            ("pl", "dark_level_counts") => self.dark_level_counts = parse_f64(value, line)?,
            ("integrator", "steps_per_period") => {
                self.steps_per_period = parse_usize(value, line)?
            }
            ("integrator", "scheme") => {
                self.scheme = match value {
                    "cf4" => Scheme::CommutatorFree4,
                    "midpoint" => Scheme::ExponentialMidpoint,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("scheme must be cf4 or midpoint, got '{value}'"),
                        })
                    }
                }
            }
            ("integrator", "verify") => self.verify = parse_bool(value, line)?,
            ("protocol", "n_periods") => self.n_periods = parse_u64(value, line)?,
            ("protocol", "p_target") => self.p_target = parse_f64(value, line)?,
            ("protocol", "t_relax_periods") => self.t_relax_periods = parse_f64(value, line)?,
            ("protocol", "shot_noise_photons_per_count") => {
                self.shot_noise_photons_per_count = parse_f64(value, line)?
            }
            ("protocol", "seed") => self.seed = parse_u64(value, line)?,
            ("protocol", "amp_min_mv") => self.amp_min_mv = parse_f64(value, line)?,
            ("protocol", "amp_max_mv") => self.amp_max_mv = parse_f64(value, line)?,
            ("protocol", "amp_points") => self.amp_points = parse_usize(value, line)?,
            ("scan", "a_min_rel") => self.scan_a_min_rel = parse_f64(value, line)?,
            ("scan", "a_max_rel") => self.scan_a_max_rel = parse_f64(value, line)?,
            ("scan", "a_min_mv") => self.scan_a_min_mv = parse_f64(value, line)?,
            ("scan", "a_max_mv") => self.scan_a_max_mv = parse_f64(value, line)?,
            ("scan", "grid_points") => self.scan_grid_points = parse_usize(value, line)?,
            ("sweep", "a_min_rel") => self.sweep_a_min_rel = parse_f64(value, line)?,
            ("sweep", "a_max_rel") => self.sweep_a_max_rel = parse_f64(value, line)?,
            ("sweep", "a_points") => self.sweep_a_points = parse_usize(value, line)?,
            ("sweep", "n_periods") => self.sweep_n_periods = parse_u64(value, line)?,
            ("analysis", "tau_window_factor") => self.tau_window_factor = parse_f64(value, line)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key '{key}' in section '[{section}]'"),
                })
            }
        }
        Ok(())
    }

    /// Fully resolved configuration in the same format `parse` accepts.
    pub fn to_text(&self) -> String {
        let scheme = match self.scheme {
            Scheme::CommutatorFree4 => "cf4",
            Scheme::ExponentialMidpoint => "midpoint",
        };
        let nu_d = match self.nu_d_mhz {
            Some(v) => format!("{v}"),
            None => "auto".into(),
        };
        format!(
            "[tls]\n\
             delta0_mhz = {}\n\
             \n[drive]\n\
             nu_d_mhz = {}\n\
             phase_rad = {}\n\
             \n[nv]\n\
             d_zfs_mhz = {}\n\
             b_z_gauss = {}\n\
             gamma_e_mhz_per_g = {}\n\
             gamma_n_mhz_per_g = {}\n\
             a_par_mhz = {}\n\
             a_perp_mhz = {}\n\
             gamma_x_mhz_per_g = {}\n\
             amplitude_calibration_mhz_per_mv = {}\n\
             nuclear_drive = {}\n\
             \n[pl]\n\
             bright_level_counts = {}\n\
             dark_level_counts = {}\n\
             \n[integrator]\n\
             steps_per_period = {}\n\
             scheme = {}\n\
             verify = {}\n\
             \n[protocol]\n\
             n_periods = {}\n\
             p_target = {}\n\
             t_relax_periods = {}\n\
             shot_noise_photons_per_count = {}\n\
             seed = {}\n\
             amp_min_mv = {}\n\
             amp_max_mv = {}\n\
             amp_points = {}\n\
             \n[scan]\n\
             a_min_rel = {}\n\
             a_max_rel = {}\n\
             a_min_mv = {}\n\
             a_max_mv = {}\n\
             grid_points = {}\n\
             \n[sweep]\n\
             a_min_rel = {}\n\
             a_max_rel = {}\n\
             a_points = {}\n\
             n_periods = {}\n\
             \n[analysis]\n\
             tau_window_factor = {}\n",
            self.delta0_mhz,
            nu_d,
            self.phase_rad,
            self.nv.d_zfs_mhz,
            self.nv.b_z_gauss,
            self.nv.gamma_e_mhz_per_g,
            self.nv.gamma_n_mhz_per_g,
            self.nv.a_par_mhz,
            self.nv.a_perp_mhz,
            self.nv.gamma_x_mhz_per_g,
            self.nv.amplitude_calibration_mhz_per_mv,
            self.nv.nuclear_drive,
            self.bright_level_counts,
            self.dark_level_counts,
            self.steps_per_period,
            scheme,
            self.verify,
            self.n_periods,
            self.p_target,
            self.t_relax_periods,
            self.shot_noise_photons_per_count,
            self.seed,
            self.amp_min_mv,
            self.amp_max_mv,
            self.amp_points,
            self.scan_a_min_rel,
            self.scan_a_max_rel,
            self.scan_a_min_mv,
            self.scan_a_max_mv,
            self.scan_grid_points,
            self.sweep_a_min_rel,
            self.sweep_a_max_rel,
            self.sweep_a_points,
            self.sweep_n_periods,
            self.tau_window_factor,
        )
    }

    pub fn tls_model(&self) -> Result<TlsModel> {
        TlsModel::new(self.delta0_mhz)
    }

    pub fn pl_params(&self) -> Result<PlParams> {
        PlParams::new(self.bright_level_counts, self.dark_level_counts)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let mut cfg = IntegratorConfig::new(self.steps_per_period, self.scheme)?;
        cfg.verify = self.verify;
        Ok(cfg)
    }

    /// Protocol over an explicit amplitude grid (units by context).
    pub fn protocol(&self, amplitudes: Vec<f64>) -> Result<ProtocolConfig> {
        Ok(ProtocolConfig {
            amplitudes,
            n_periods: self.n_periods,
            initialization: Initialization::with_target(self.p_target)?,
            t_relax_periods: self.t_relax_periods,
            shot_noise: self.shot_noise_photons_per_count,
            seed: self.seed,
        })
    }

    pub fn nv_amplitude_grid(&self) -> Vec<f64> {
        linspace(self.amp_min_mv, self.amp_max_mv, self.amp_points)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
