//! Command-line driver: locate k-tupling amplitudes, sweep stroboscopic
//! dynamics, simulate measurement campaigns, and analyze them.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ktup::error::{Error, Result};
use ktup::experiment::{dft_campaign, reference_campaign_tls, simulate_campaign, CampaignDataset};
use ktup::floquet::intra_period_trajectory;
use ktup::hamiltonians::{tls_hamiltonian, DriveParams};
use ktup::io::config::{linspace, RunConfig};
use ktup::io::csv;
use ktup::io::ppm::HeatmapGrid;
use ktup::ktupling::{find_amplitude, find_amplitude_nv, scan_manifold, ScanConfig};
use ktup::parallel::default_threads;
use ktup::signal::{analyze_ktupling, format_ap_report, format_branch_report, AnalysisOptions};

const USAGE: &str = "\
ktup — period k-tupling toolkit for strongly driven spins

USAGE:
    ktup <COMMAND> [FLAGS]

COMMANDS:
    find           locate the k-tupling amplitude A_Pk (qed = j/k)
    scan-manifold  trace A_Pk over a drive-frequency grid
    sweep          stroboscopic <sigma_z> sweep over an amplitude grid (TLS)
    spectrum       DFT heatmap of a sweep or an existing campaign CSV
    trajectory     intra-period Bloch trajectory from the ground state (TLS)
    simulate       six-level NV measurement campaign (PL vs n and amplitude)
    analyze        recover A_Pk and C_k from a campaign CSV

COMMON FLAGS:
    --config PATH      load a key = value config file
    --set SEC.KEY=VAL  override a single config entry (repeatable)
    --out DIR          output directory (default .)
    --seed N           protocol seed override
    --threads N        worker threads (default: available cores)
    --print-config     print the fully resolved config and exit

COMMAND FLAGS:
    find           --k N [--j N] [--model tls|nv] [--nu-d MHZ]
                   [--scan-min X] [--scan-max X] [--grid-points N]
                   (scan bounds: units of delta0 for tls, mV for nv)
    scan-manifold  --k N [--j N] --nu-min MHZ --nu-max MHZ [--nu-points N]
    sweep          [--a-min REL] [--a-max REL] [--a-points N] [--n-periods N]
    spectrum       [--input CAMPAIGN.CSV]  (default: run the sweep grid)
    trajectory     (--k N | --amplitude-rel X) [--n-periods N] [--samples N]
    simulate       [--render]
    analyze        --input CAMPAIGN.CSV --k N

EXIT CODES:
    0 success, 2 usage/config error, 3 not found / insufficient data,
    4 numerical contract violation
";

struct Cli {
    command: String,
    flags: Vec<(String, String)>,
    print_config: bool,
    out_dir: PathBuf,
    threads: usize,
    config: RunConfig,
}

fn parse_cli(mut args: VecDeque<String>) -> Result<Cli> {
    let command = args
        .pop_front()
        .ok_or_else(|| Error::Usage("missing command; try --help".into()))?;
    if command == "--help" || command == "-h" || command == "help" {
        print!("{USAGE}");
        std::process::exit(0);
    }

    let mut flags: Vec<(String, String)> = Vec::new();
    let mut overrides: Vec<String> = Vec::new();
    let mut config_path: Option<PathBuf> = None;
    let mut out_dir = PathBuf::from(".");
    let mut threads = default_threads();
    let mut print_config = false;
    let mut seed: Option<u64> = None;

    while let Some(flag) = args.pop_front() {
        let mut take_value = |name: &str| -> Result<String> {
            args.pop_front()
                .ok_or_else(|| Error::Usage(format!("flag {name} needs a value")))
        };
        match flag.as_str() {
            "--config" => config_path = Some(PathBuf::from(take_value("--config")?)),
            "--set" => overrides.push(take_value("--set")?),
            "--out" => out_dir = PathBuf::from(take_value("--out")?),
            "--seed" => {
                seed = Some(take_value("--seed")?.parse().map_err(|_| {
                    Error::Usage("--seed expects an unsigned integer".into())
                })?)
            }
            "--threads" => {
                threads = take_value("--threads")?.parse().map_err(|_| {
                    Error::Usage("--threads expects an unsigned integer".into())
                })?
            }
            "--print-config" => print_config = true,
            other if other.starts_with("--") => {
                let value = if flag_takes_value(other) {
                    take_value(other)?
                } else {
                    "true".to_string()
                };
                flags.push((other.trim_start_matches("--").to_string(), value));
            }
            other => return Err(Error::Usage(format!("unexpected argument '{other}'"))),
        }
    }

    let mut config = match config_path {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    for spec in &overrides {
        config.apply_override(spec)?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(Cli { command, flags, print_config, out_dir, threads, config })
}

fn flag_takes_value(flag: &str) -> bool {
    !matches!(flag, "--render")
}

impl Cli {
    fn flag(&self, name: &str) -> Option<&str> {
        self.flags
            .iter()
            .rev()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn flag_f64(&self, name: &str) -> Result<Option<f64>> {
        self.flag(name)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Usage(format!("--{name} expects a number, got '{v}'")))
            })
            .transpose()
    }

    fn flag_u64(&self, name: &str) -> Result<Option<u64>> {
        self.flag(name)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Usage(format!("--{name} expects an integer, got '{v}'")))
            })
            .transpose()
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.flags {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Usage(format!("unknown flag '--{k}' for {}", self.command)));
            }
        }
        Ok(())
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(name))
    }
}

fn main() -> ExitCode {
    let args: VecDeque<String> = std::env::args().skip(1).collect();
    match parse_cli(args).and_then(run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.print_config {
        print!("{}", cli.config.to_text());
        return Ok(());
    }
    match cli.command.as_str() {
        "find" => cmd_find(&cli),
        "scan-manifold" => cmd_scan_manifold(&cli),
        "sweep" => cmd_sweep(&cli),
        "spectrum" => cmd_spectrum(&cli),
        "trajectory" => cmd_trajectory(&cli),
        "simulate" => cmd_simulate(&cli),
        "analyze" => cmd_analyze(&cli),
        other => Err(Error::Usage(format!("unknown command '{other}'; try --help"))),
    }
}

fn required_k(cli: &Cli) -> Result<u32> {
    Ok(cli
        .flag_u64("k")?
        .ok_or_else(|| Error::Usage("--k is required".into()))? as u32)
}

fn cmd_find(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["k", "j", "model", "nu-d", "scan-min", "scan-max", "grid-points"])?;
    let cfg = &cli.config;
    let k = required_k(cli)?;
    let j = cli.flag_u64("j")?.unwrap_or(1) as u32;
    let model_kind = cli.flag("model").unwrap_or("tls");
    let grid_points = cli.flag_u64("grid-points")?.map(|v| v as usize);
    let integrator = cfg.integrator()?;

    let found = match model_kind {
        "tls" => {
            let model = cfg.tls_model()?;
            let nu_d = cli
                .flag_f64("nu-d")?
                .or(cfg.nu_d_mhz)
                .unwrap_or(model.delta0_mhz);
            let scan = ScanConfig {
                a_min: cli.flag_f64("scan-min")?.unwrap_or(cfg.scan_a_min_rel) * model.delta0_mhz,
                a_max: cli.flag_f64("scan-max")?.unwrap_or(cfg.scan_a_max_rel) * model.delta0_mhz,
                grid_points: grid_points.unwrap_or(cfg.scan_grid_points),
            };
            let found = find_amplitude(j, k, nu_d, &scan, &model, &integrator, cli.threads)?;
            println!(
                "A_P{k} = {:.6} MHz (A/delta0 = {:.6}) at nu_d = {:.6} MHz",
                found.point.a_pk,
                found.point.a_pk / model.delta0_mhz,
                nu_d
            );
            found
        }
        "nv" => {
            let scan = ScanConfig {
                a_min: cli.flag_f64("scan-min")?.unwrap_or(cfg.scan_a_min_mv),
                a_max: cli.flag_f64("scan-max")?.unwrap_or(cfg.scan_a_max_mv),
                grid_points: grid_points.unwrap_or(cfg.scan_grid_points),
            };
            let found = find_amplitude_nv(&cfg.nv, j, k, &scan, &integrator, cli.threads)?;
            println!(
                "A_P{k} = {:.6} mV at nu_d = {:.6} MHz (selected transition)",
                found.point.a_pk, found.point.nu_d_mhz
            );
            found
        }
        other => return Err(Error::Usage(format!("--model must be tls or nv, got '{other}'"))),
    };

    println!(
        "residual = {:.3e}, certificate fidelity = {:.9}, brackets = {}",
        found.point.residual, found.point.certificate_fidelity, found.bracket_count
    );
    csv::write_to_file(
        &cli.out_path("ktupling_points.csv")?,
        &csv::write_points(std::slice::from_ref(&found.point)),
    )?;
    Ok(())
}

fn cmd_scan_manifold(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["k", "j", "nu-min", "nu-max", "nu-points", "grid-points"])?;
    let cfg = &cli.config;
    let k = required_k(cli)?;
    let j = cli.flag_u64("j")?.unwrap_or(1) as u32;
    let model = cfg.tls_model()?;
    let nu_min = cli
        .flag_f64("nu-min")?
        .ok_or_else(|| Error::Usage("--nu-min is required".into()))?;
    let nu_max = cli
        .flag_f64("nu-max")?
        .ok_or_else(|| Error::Usage("--nu-max is required".into()))?;
    let nu_points = cli.flag_u64("nu-points")?.unwrap_or(17) as usize;
    let scan = ScanConfig {
        a_min: cfg.scan_a_min_rel * model.delta0_mhz,
        a_max: cfg.scan_a_max_rel * model.delta0_mhz,
        grid_points: cli.flag_u64("grid-points")?.map(|v| v as usize).unwrap_or(cfg.scan_grid_points),
    };
    let nu_grid = linspace(nu_min, nu_max, nu_points);
    let curve = scan_manifold(j, k, &nu_grid, &scan, &model, &cfg.integrator()?, cli.threads)?;
    println!(
        "manifold j/k = {j}/{k}: {} points, {} gaps",
        curve.points.len(),
        curve.gaps.len()
    );
    for gap in &curve.gaps {
        println!("  gap at nu_d = {gap:.6} MHz (no bracket)");
    }
    csv::write_to_file(&cli.out_path("manifold.csv")?, &csv::write_points(&curve.points))?;
    if curve.points.is_empty() {
        return Err(Error::NotFound("manifold scan produced no points".into()));
    }
    Ok(())
}

fn tls_sweep_dataset(cli: &Cli) -> Result<CampaignDataset> {
    let cfg = &cli.config;
    let model = cfg.tls_model()?;
    let a_min = cli.flag_f64("a-min")?.unwrap_or(cfg.sweep_a_min_rel) * model.delta0_mhz;
    let a_max = cli.flag_f64("a-max")?.unwrap_or(cfg.sweep_a_max_rel) * model.delta0_mhz;
    let points = cli.flag_u64("a-points")?.unwrap_or(cfg.sweep_a_points as u64) as usize;
    let mut protocol = cfg.protocol(linspace(a_min, a_max, points))?;
    protocol.n_periods = cli.flag_u64("n-periods")?.unwrap_or(cfg.sweep_n_periods);
    reference_campaign_tls(&model, &protocol, &cfg.integrator()?, cli.threads)
}

fn campaign_heatmap(dataset: &CampaignDataset) -> Result<HeatmapGrid> {
    let x: Vec<f64> = dataset.series[0].times.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = dataset.series.iter().map(|s| s.amplitude).collect();
    let cells: Vec<Vec<f64>> = dataset.series.iter().map(|s| s.values.clone()).collect();
    HeatmapGrid::new(x, y, cells)
}

fn cmd_sweep(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["a-min", "a-max", "a-points", "n-periods"])?;
    let dataset = tls_sweep_dataset(cli)?;
    csv::write_to_file(&cli.out_path("sweep.csv")?, &csv::write_campaign(&dataset))?;
    campaign_heatmap(&dataset)?.write_ppm(&cli.out_path("sweep.ppm")?)?;
    println!(
        "sweep: {} amplitudes x {} periods -> sweep.csv, sweep.ppm",
        dataset.series.len(),
        dataset.series[0].times.len()
    );
    Ok(())
}

fn cmd_spectrum(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["input", "a-min", "a-max", "a-points", "n-periods"])?;
    let dataset = match cli.flag("input") {
        Some(path) => csv::read_campaign(&std::fs::read_to_string(Path::new(path))?)?,
        None => tls_sweep_dataset(cli)?,
    };
    let spectrum = dft_campaign(&dataset)?;
    csv::write_to_file(&cli.out_path("spectrum.csv")?, &csv::write_spectrum(&spectrum))?;
    let grid = HeatmapGrid::new(
        spectrum.frequencies.clone(),
        spectrum.amplitudes.clone(),
        spectrum.magnitudes.clone(),
    )?;
    grid.write_ppm(&cli.out_path("spectrum.ppm")?)?;
    println!(
        "spectrum: {} amplitudes x {} bins -> spectrum.csv, spectrum.ppm",
        spectrum.amplitudes.len(),
        spectrum.frequencies.len()
    );
    Ok(())
}

fn cmd_trajectory(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["k", "amplitude-rel", "n-periods", "samples"])?;
    let cfg = &cli.config;
    let model = cfg.tls_model()?;
    let integrator = cfg.integrator()?;
    let amplitude = match (cli.flag_f64("amplitude-rel")?, cli.flag_u64("k")?) {
        (Some(rel), _) => rel * model.delta0_mhz,
        (None, Some(k)) => {
            let scan = ScanConfig {
                a_min: cfg.scan_a_min_rel * model.delta0_mhz,
                a_max: cfg.scan_a_max_rel * model.delta0_mhz,
                grid_points: cfg.scan_grid_points,
            };
            find_amplitude(1, k as u32, model.delta0_mhz, &scan, &model, &integrator, cli.threads)?
                .point
                .a_pk
        }
        (None, None) => {
            return Err(Error::Usage("trajectory needs --k or --amplitude-rel".into()))
        }
    };
    let n_periods = cli.flag_u64("n-periods")?.unwrap_or(2);
    let samples = cli.flag_u64("samples")?.unwrap_or(64) as usize;
    let nu_d = cfg.nu_d_mhz.unwrap_or(model.delta0_mhz);
    let drive = DriveParams::new(amplitude, nu_d, cfg.phase_rad)?;
    let g = model.ground_state();
    let h = move |t: f64| tls_hamiltonian(&model, &drive, t);
    let traj = intra_period_trajectory(&h, nu_d, &g, n_periods, samples, &integrator)?;
    let bloch: Vec<(f64, [f64; 3])> = traj
        .iter()
        .map(|(t, s)| Ok((*t, s.bloch()?)))
        .collect::<Result<_>>()?;
    csv::write_to_file(&cli.out_path("trajectory.csv")?, &csv::write_trajectory(&bloch))?;
    println!(
        "trajectory at A = {amplitude:.6} MHz over {n_periods} periods -> trajectory.csv"
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["render"])?;
    let cfg = &cli.config;
    let protocol = cfg.protocol(cfg.nv_amplitude_grid())?;
    let dataset =
        simulate_campaign(&cfg.nv, &cfg.pl_params()?, &protocol, &cfg.integrator()?, cli.threads)?;
    csv::write_to_file(&cli.out_path("campaign.csv")?, &csv::write_campaign(&dataset))?;
    let sidecar = format!(
        "{}\n# resolved configuration\n{}",
        csv::write_meta(&dataset.meta),
        cfg.to_text()
    );
    csv::write_to_file(&cli.out_path("campaign_meta.txt")?, &sidecar)?;
    if cli.flag("render").is_some() {
        campaign_heatmap(&dataset)?.write_ppm(&cli.out_path("campaign.ppm")?)?;
    }
    println!(
        "simulated {} amplitudes x {} periods -> campaign.csv, campaign_meta.txt",
        dataset.series.len(),
        protocol.n_periods
    );
    Ok(())
}

fn cmd_analyze(cli: &Cli) -> Result<()> {
    cli.reject_unknown(&["input", "k"])?;
    let cfg = &cli.config;
    let k = required_k(cli)?;
    let input = cli
        .flag("input")
        .ok_or_else(|| Error::Usage("--input CAMPAIGN.CSV is required".into()))?;
    let dataset = csv::read_campaign(&std::fs::read_to_string(Path::new(input))?)?;
    let opts = AnalysisOptions { tau_window_factor: cfg.tau_window_factor, threads: cli.threads };
    let analysis = analyze_ktupling(&dataset.series, k, &opts)?;

    let mut report = String::new();
    report.push_str(&csv::render_summary_table(&[&analysis], "amplitude units"));
    report.push('\n');
    for sub in &analysis.per_subsequence {
        let h = &sub.hyperbola;
        report.push_str(&format!(
            "subsequence {}: {}\n",
            sub.l,
            format_ap_report(k, "fit", h.a_p, h.sigma_a_p, "")
        ));
        if let (Some(c), Some(sc)) = (h.c_plus, h.sigma_c_plus) {
            report.push_str(&format!("  A > A_P{k}: {}\n", format_branch_report(k, c, sc)));
        }
        if let (Some(c), Some(sc)) = (h.c_minus, h.sigma_c_minus) {
            report.push_str(&format!("  A < A_P{k}: {}\n", format_branch_report(k, c, sc)));
        }
    }
    print!("{report}");
    csv::write_to_file(&cli.out_path("fits.csv")?, &csv::write_fits(&analysis))?;
    csv::write_to_file(&cli.out_path("report.txt")?, &report)?;
    Ok(())
}
