//! CSV readers and writers.
//!
//! Comma-separated, '.' decimal, mandatory header row, UTF-8, LF line
//! endings. Floats are written with 17 significant digits so every file
//! round-trips value-exactly through the matching reader.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{CampaignDataset, CampaignSpectrum};
use crate::ktupling::KTuplingPoint;
use crate::signal::{HyperbolaFit, KTuplingAnalysis, StroboscopicSeries};

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_field_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got '{field}'"),
    })
}

fn parse_field_u64(field: &str, line: usize) -> Result<u64> {
    field.trim().parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected an integer, got '{field}'"),
    })
}

fn expect_header(text: &str, expected: &str) -> Result<()> {
    match text.lines().next() {
        Some(h) if h.trim() == expected => Ok(()),
        Some(h) => Err(Error::Parse {
            line: 1,
            message: format!("expected header '{expected}', got '{h}'"),
        }),
        None => Err(Error::Parse { line: 1, message: "empty file".into() }),
    }
}

fn split_fields(line: &str, count: usize, line_no: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != count {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected {count} fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

pub const CAMPAIGN_HEADER: &str = "amplitude,n,value,sigma";

/// Serialize a campaign: one row per (amplitude, n) sample; the sigma field
/// stays empty for noise-free data.
pub fn write_campaign(dataset: &CampaignDataset) -> String {
    let mut out = String::from(CAMPAIGN_HEADER);
    out.push('\n');
    for series in &dataset.series {
        for (i, (&n, &v)) in series.times.iter().zip(&series.values).enumerate() {
            let sigma = series
                .value_sigma
                .as_ref()
                .map(|s| format_float(s[i]))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_float(series.amplitude),
                n,
                format_float(v),
                sigma
            );
        }
    }
    out
}

/// Parse a campaign CSV; consecutive rows with the same amplitude form one
/// series. Sigma must be present for all rows of a series or none of them.
pub fn read_campaign(text: &str) -> Result<CampaignDataset> {
    expect_header(text, CAMPAIGN_HEADER)?;
    type PendingSeries = (f64, Vec<u64>, Vec<f64>, Vec<Option<f64>>);
    let mut series: Vec<StroboscopicSeries> = Vec::new();
    let mut current: Option<PendingSeries> = None;

    let flush = |cur: Option<PendingSeries>, line: usize| -> Result<Option<StroboscopicSeries>> {
        let Some((amp, times, values, sigmas)) = cur else {
            return Ok(None);
        };
        let with_sigma = sigmas.iter().filter(|s| s.is_some()).count();
        let sigma = if with_sigma == 0 {
            None
        } else if with_sigma == sigmas.len() {
            Some(sigmas.into_iter().map(|s| s.unwrap()).collect())
        } else {
            return Err(Error::Parse {
                line,
                message: format!("series at amplitude {amp} mixes empty and non-empty sigma"),
            });
        };
        Ok(Some(StroboscopicSeries::new(amp, times, values, sigma)?))
    };

    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line, 4, line_no)?;
        let amp = parse_field_f64(fields[0], line_no)?;
        let n = parse_field_u64(fields[1], line_no)?;
        let value = parse_field_f64(fields[2], line_no)?;
        let sigma = if fields[3].trim().is_empty() {
            None
        } else {
            Some(parse_field_f64(fields[3], line_no)?)
        };
        let start_new = match &current {
            Some((a, ..)) => a.to_bits() != amp.to_bits(),
            None => true,
        };
        if start_new {
            if let Some(done) = flush(current.take(), line_no)? {
                series.push(done);
            }
            current = Some((amp, Vec::new(), Vec::new(), Vec::new()));
        }
        let cur = current.as_mut().unwrap();
        cur.1.push(n);
        cur.2.push(value);
        cur.3.push(sigma);
    }
    if let Some(done) = flush(current.take(), text.lines().count())? {
        series.push(done);
    }
    if series.is_empty() {
        return Err(Error::Parse { line: 1, message: "campaign file has no data rows".into() });
    }
    Ok(CampaignDataset {
        series,
        meta: vec![("kind".into(), "external".into())],
    })
}

/// Metadata sidecar: key = value per line.
pub fn write_meta(meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn read_meta(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Parse {
            line: idx + 1,
            message: format!("expected key = value, got '{line}'"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub const POINTS_HEADER: &str = "j,k,nu_d_mhz,a_root,residual,certificate_fidelity";

pub fn write_points(points: &[KTuplingPoint]) -> String {
    let mut out = String::from(POINTS_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.j,
            p.k,
            format_float(p.nu_d_mhz),
            format_float(p.a_pk),
            format_float(p.residual),
            format_float(p.certificate_fidelity)
        );
    }
    out
}

pub fn read_points(text: &str) -> Result<Vec<KTuplingPoint>> {
    expect_header(text, POINTS_HEADER)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line, 6, line_no)?;
        out.push(KTuplingPoint {
            j: parse_field_u64(fields[0], line_no)? as u32,
            k: parse_field_u64(fields[1], line_no)? as u32,
            nu_d_mhz: parse_field_f64(fields[2], line_no)?,
            a_pk: parse_field_f64(fields[3], line_no)?,
            residual: parse_field_f64(fields[4], line_no)?,
            certificate_fidelity: parse_field_f64(fields[5], line_no)?,
        });
    }
    Ok(out)
}

pub const SPECTRUM_HEADER: &str = "amplitude,frequency_per_td,magnitude";

pub fn write_spectrum(spectrum: &CampaignSpectrum) -> String {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for (amp, row) in spectrum.amplitudes.iter().zip(&spectrum.magnitudes) {
        for (freq, mag) in spectrum.frequencies.iter().zip(row) {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_float(*amp),
                format_float(*freq),
                format_float(*mag)
            );
        }
    }
    out
}

pub fn read_spectrum(text: &str) -> Result<CampaignSpectrum> {
    expect_header(text, SPECTRUM_HEADER)?;
    let mut amplitudes: Vec<f64> = Vec::new();
    let mut frequencies: Vec<f64> = Vec::new();
    let mut magnitudes: Vec<Vec<f64>> = Vec::new();
    let mut first_row_freqs = true;
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line, 3, line_no)?;
        let amp = parse_field_f64(fields[0], line_no)?;
        let freq = parse_field_f64(fields[1], line_no)?;
        let mag = parse_field_f64(fields[2], line_no)?;
        let new_row = amplitudes.last().map(|a| a.to_bits() != amp.to_bits()).unwrap_or(true);
        if new_row {
            if !amplitudes.is_empty() {
                first_row_freqs = false;
            }
            amplitudes.push(amp);
            magnitudes.push(Vec::new());
        }
        if first_row_freqs {
            frequencies.push(freq);
        }
        magnitudes.last_mut().unwrap().push(mag);
    }
    if amplitudes.is_empty() {
        return Err(Error::Parse { line: 1, message: "spectrum file has no data rows".into() });
    }
    Ok(CampaignSpectrum { amplitudes, frequencies, magnitudes })
}

pub const TRAJECTORY_HEADER: &str = "t_td,bloch_x,bloch_y,bloch_z";

pub fn write_trajectory(points: &[(f64, [f64; 3])]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (t, b) in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_float(*t),
            format_float(b[0]),
            format_float(b[1]),
            format_float(b[2])
        );
    }
    out
}

pub fn read_trajectory(text: &str) -> Result<Vec<(f64, [f64; 3])>> {
    expect_header(text, TRAJECTORY_HEADER)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line, 4, line_no)?;
        out.push((
            parse_field_f64(fields[0], line_no)?,
            [
                parse_field_f64(fields[1], line_no)?,
                parse_field_f64(fields[2], line_no)?,
                parse_field_f64(fields[3], line_no)?,
            ],
        ));
    }
    Ok(out)
}

pub const FITS_HEADER: &str =
    "k,subsequence,a_pk,sigma_a_pk,c_minus,sigma_c_minus,c_plus,sigma_c_plus,rms_residual,points_minus,points_plus";

fn opt_field(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn write_fits(analysis: &KTuplingAnalysis) -> String {
    let mut out = String::from(FITS_HEADER);
    out.push('\n');
    for sub in &analysis.per_subsequence {
        let h = &sub.hyperbola;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            analysis.k,
            sub.l,
            format_float(h.a_p),
            format_float(h.sigma_a_p),
            opt_field(h.c_minus),
            opt_field(h.sigma_c_minus),
            opt_field(h.c_plus),
            opt_field(h.sigma_c_plus),
            format_float(h.rms_residual),
            h.points_minus,
            h.points_plus
        );
    }
    out
}

/// Rows of a fits CSV: (k, subsequence, fit).
pub fn read_fits(text: &str) -> Result<Vec<(u32, u32, HyperbolaFit)>> {
    expect_header(text, FITS_HEADER)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line, 11, line_no)?;
        let opt = |f: &str| -> Result<Option<f64>> {
            if f.trim().is_empty() {
                Ok(None)
            } else {
                parse_field_f64(f, line_no).map(Some)
            }
        };
        out.push((
            parse_field_u64(fields[0], line_no)? as u32,
            parse_field_u64(fields[1], line_no)? as u32,
            HyperbolaFit {
                a_p: parse_field_f64(fields[2], line_no)?,
                sigma_a_p: parse_field_f64(fields[3], line_no)?,
                c_minus: opt(fields[4])?,
                sigma_c_minus: opt(fields[5])?,
                c_plus: opt(fields[6])?,
                sigma_c_plus: opt(fields[7])?,
                rms_residual: parse_field_f64(fields[8], line_no)?,
                points_minus: parse_field_u64(fields[9], line_no)? as usize,
                points_plus: parse_field_u64(fields[10], line_no)? as usize,
            },
        ));
    }
    Ok(out)
}

/// Human-readable summary table: one row per k with the averaged apex and
/// branch coefficient.
pub fn render_summary_table(analyses: &[&KTuplingAnalysis], unit: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<4} {:<26} {:<26}", "k", format!("A_Pk ({unit})"), "C_k/T_d");
    for a in analyses {
        let _ = writeln!(
            out,
            "{:<4} {:<26} {:<26}",
            a.k,
            format!("{:.3} \u{b1} {:.3}", a.a_pk, a.a_pk_sigma),
            format!("{:.3} \u{b1} {:.3}", a.c_k, a.c_k_sigma)
        );
    }
    out
}

pub fn write_to_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_campaign() -> CampaignDataset {
        let s1 = StroboscopicSeries::new(
            0.1234567890123,
            vec![1, 2, 3],
            vec![1.0 / 3.0, -2.0f64.sqrt(), 5.0e-17],
            None,
        )
        .unwrap();
        let s2 = StroboscopicSeries::new(
            0.25,
            vec![1, 2, 3],
            vec![7.0, 8.0, 9.0],
            Some(vec![0.1, 0.2, 0.3]),
        )
        .unwrap();
        CampaignDataset { series: vec![s1, s2], meta: vec![] }
    }

    #[test]
    fn campaign_round_trip_is_value_exact() {
        let dataset = sample_campaign();
        let text = write_campaign(&dataset);
        let back = read_campaign(&text).unwrap();
        assert_eq!(back.series.len(), 2);
        for (a, b) in dataset.series.iter().zip(&back.series) {
            assert_eq!(a.times, b.times);
            let bits_a: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
            assert_eq!(a.value_sigma.is_some(), b.value_sigma.is_some());
            assert_eq!(a.amplitude.to_bits(), b.amplitude.to_bits());
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "amplitude,n,value,sigma\n1.0,1,2.0,\n1.0,x,3.0,\n";
        match read_campaign(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(read_campaign("wrong,header\n").is_err());
    }

    #[test]
    fn points_round_trip() {
        let points = vec![KTuplingPoint {
            j: 1,
            k: 2,
            a_pk: 0.504_217_123_456_789,
            nu_d_mhz: 1.0,
            residual: -3.2e-12,
            certificate_fidelity: 1.0 - 1e-9,
        }];
        let text = write_points(&points);
        let back = read_points(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].a_pk.to_bits(), points[0].a_pk.to_bits());
        assert_eq!(back[0].residual.to_bits(), points[0].residual.to_bits());
    }

    #[test]
    fn trajectory_round_trip() {
        let points = vec![(0.0, [0.0, 0.0, -1.0]), (0.5, [0.3, -0.4, 0.866_025]), (1.0, [0.0, 0.0, 1.0])];
        let text = write_trajectory(&points);
        let back = read_trajectory(&text).unwrap();
        for (a, b) in points.iter().zip(&back) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            for i in 0..3 {
                assert_eq!(a.1[i].to_bits(), b.1[i].to_bits());
            }
        }
    }

    #[test]
    fn spectrum_round_trip() {
        let spectrum = CampaignSpectrum {
            amplitudes: vec![0.1, 0.2],
            frequencies: vec![0.0, 0.25, 0.5],
            magnitudes: vec![vec![0.0, 1.0 / 7.0, 2.0], vec![3.0, 4.0, 5.0e-13]],
        };
        let text = write_spectrum(&spectrum);
        let back = read_spectrum(&text).unwrap();
        assert_eq!(back.amplitudes, spectrum.amplitudes);
        assert_eq!(back.frequencies, spectrum.frequencies);
        for (a, b) in spectrum.magnitudes.iter().zip(&back.magnitudes) {
            let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn fits_round_trip() {
        use crate::signal::{HyperbolaFit, KTuplingAnalysis, SubsequenceAnalysis};
        let hyperbola = HyperbolaFit {
            a_p: 0.504_2,
            c_minus: Some(0.97),
            c_plus: None,
            sigma_a_p: 1.3e-5,
            sigma_c_minus: Some(2.0e-4),
            sigma_c_plus: None,
            rms_residual: 1e-9,
            points_minus: 4,
            points_plus: 0,
        };
        let analysis = KTuplingAnalysis {
            k: 2,
            per_subsequence: vec![SubsequenceAnalysis {
                l: 1,
                fits: vec![],
                used: vec![],
                hyperbola: hyperbola.clone(),
            }],
            a_pk: 0.5042,
            a_pk_sigma: 1.3e-5,
            c_k: 0.97,
            c_k_sigma: 2e-4,
        };
        let text = write_fits(&analysis);
        let rows = read_fits(&text).unwrap();
        assert_eq!(rows.len(), 1);
        let (k, l, fit) = &rows[0];
        assert_eq!((*k, *l), (2, 1));
        assert_eq!(fit.a_p.to_bits(), hyperbola.a_p.to_bits());
        assert_eq!(fit.c_minus.unwrap().to_bits(), hyperbola.c_minus.unwrap().to_bits());
        assert!(fit.c_plus.is_none());
        assert_eq!(fit.points_minus, 4);
    }

    #[test]
    fn meta_round_trip() {
        let meta = vec![("seed".to_string(), "42".to_string()), ("kind".to_string(), "x".to_string())];
        let text = write_meta(&meta);
        assert_eq!(read_meta(&text).unwrap(), meta);
    }
}
