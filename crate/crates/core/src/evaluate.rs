//! Accuracy metrics, spectral estimates and the evaluation report format.
//!
//! Accuracy is normalized mean squared error in percent,
//! `100 * mean((pred - truth)^2) / var(truth)`, computed per channel over a
//! time window and aggregated as the unweighted channel mean. The steady
//! window drops the initial transient (the structure starts quiescent); the
//! transient window covers exactly that start, so the two can be compared.
//!
//! Spectra are Welch estimates: periodic Hann window, 50% overlap, one-sided
//! power spectral density in (unit^2)/Hz. For a tone centered on a bin the
//! Hann spectrum occupies exactly three bins, so the root sum of
//! `2 * psd * df` over a peak recovers the tone amplitude; the per-bin
//! square root of that quantity is exposed as the amplitude spectrum.
//!
//! Reports serialize losslessly: floats are written with shortest
//! round-trip formatting, so read(write(report)) is bit-exact.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{ComputeError, DataError};
use crate::integrator::{channel_names, SimulationResult};

const REPORT_MAGIC: &str = "# monorom-report v1";

/// Sample index range covering `[t_start, t_end)` on an `n`-sample grid with
/// step `dt` (sample i sits at t = i dt). Tolerant of roundoff at the edges.
pub fn window_indices(dt: f64, n: usize, t_start: f64, t_end: f64) -> std::ops::Range<usize> {
    assert!(dt > 0.0 && t_start >= 0.0 && t_end > t_start);
    let i0 = ((t_start / dt) - 1e-9).ceil().max(0.0) as usize;
    let i1 = if t_end.is_finite() {
        (((t_end / dt) - 1e-9).ceil().max(0.0) as usize).min(n)
    } else {
        n
    };
    i0.min(n)..i1
}

/// NMSE in percent of one channel over paired slices.
pub fn nmse_percent(truth: &[f64], pred: &[f64]) -> Result<f64, ComputeError> {
    assert_eq!(truth.len(), pred.len(), "length mismatch");
    if truth.len() < 2 {
        return Err(ComputeError::SeriesTooShort {
            len: truth.len(),
            min: 2,
        });
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let var = truth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 || !var.is_finite() {
        return Err(ComputeError::UndefinedMetric);
    }
    let mse = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (p - t).powi(2))
        .sum::<f64>()
        / n;
    Ok(100.0 * mse / var)
}

/// Per-channel NMSE (%) over `[t_start, t_end)`; channel order follows the
/// record's columns.
pub fn nmse_per_channel(
    truth: &SimulationResult,
    pred: &SimulationResult,
    t_start: f64,
    t_end: f64,
) -> Result<Vec<f64>, ComputeError> {
    assert_eq!(truth.data.shape(), pred.data.shape(), "shape mismatch");
    assert_eq!(truth.dt, pred.dt, "sample step mismatch");
    let range = window_indices(truth.dt, truth.n_samples(), t_start, t_end);
    if range.len() < 2 {
        return Err(ComputeError::SeriesTooShort {
            len: range.len(),
            min: 2,
        });
    }
    let mut out = Vec::with_capacity(truth.n_channels());
    for c in 0..truth.n_channels() {
        let t: Vec<f64> = range.clone().map(|i| truth.data[(i, c)]).collect();
        let p: Vec<f64> = range.clone().map(|i| pred.data[(i, c)]).collect();
        out.push(nmse_percent(&t, &p)?);
    }
    Ok(out)
}

/// Unweighted channel mean.
pub fn aggregate_nmse(per_channel: &[f64]) -> f64 {
    assert!(!per_channel.is_empty());
    per_channel.iter().sum::<f64>() / per_channel.len() as f64
}

/// One-sided Welch power spectral density: periodic Hann window, 50%
/// overlap. Returns (frequencies in Hz, PSD in unit^2/Hz), both of length
/// `segment / 2 + 1`.
pub fn welch_psd(
    x: &[f64],
    dt: f64,
    segment: usize,
) -> Result<(Vec<f64>, Vec<f64>), ComputeError> {
    assert!(dt > 0.0, "sample step must be positive");
    assert!(
        segment >= 4 && segment.is_multiple_of(2),
        "segment must be even and at least 4"
    );
    if x.len() < segment {
        return Err(ComputeError::SeriesTooShort {
            len: x.len(),
            min: segment,
        });
    }
    let hop = segment / 2;
    let n_seg = 1 + (x.len() - segment) / hop;
    let window: Vec<f64> = (0..segment)
        .map(|i| 0.5 * (1.0 - (TAU * i as f64 / segment as f64).cos()))
        .collect();
    let u: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(segment);
    let mut acc = vec![0.0_f64; segment / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    for s in 0..n_seg {
        let off = s * hop;
        for i in 0..segment {
            buf[i] = Complex::new(x[off + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k].norm_sqr();
        }
    }

    let base = dt / (u * n_seg as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            // Interior bins carry the negative-frequency twin.
            let fold = if k == 0 || k == segment / 2 { 1.0 } else { 2.0 };
            a * base * fold
        })
        .collect();
    let freqs = (0..=segment / 2)
        .map(|k| k as f64 / (segment as f64 * dt))
        .collect();
    Ok((freqs, psd))
}

/// Per-bin amplitude spectrum sqrt(2 psd df); the root sum of squares over a
/// tone's peak bins recovers its amplitude.
pub fn amplitude_spectrum(
    x: &[f64],
    dt: f64,
    segment: usize,
) -> Result<(Vec<f64>, Vec<f64>), ComputeError> {
    let (freqs, psd) = welch_psd(x, dt, segment)?;
    let df = 1.0 / (segment as f64 * dt);
    let amp = psd.iter().map(|p| (2.0 * p * df).sqrt()).collect();
    Ok((freqs, amp))
}

/// Wall-clock comparison of the simulator and the surrogate on one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub fom_seconds: f64,
    pub rom_seconds: f64,
    pub speedup: f64,
}

/// Truth/prediction PSD pair of one channel over the steady window.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    pub channel: String,
    pub freqs: Vec<f64>,
    pub truth_psd: Vec<f64>,
    pub pred_psd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dt: f64,
    pub steady_start: f64,
    pub transient_end: f64,
    /// Channel-mean NMSE (%) over the steady window.
    pub aggregate_nmse: f64,
    /// Channel-mean NMSE (%) over the initial transient.
    pub transient_aggregate_nmse: f64,
    /// (channel, steady NMSE %) per column.
    pub per_channel_nmse: Vec<(String, f64)>,
    pub spectra: Vec<SpectrumBlock>,
    /// Present only when a timing comparison was run.
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Steady window is [steady_start, end of record).
    pub steady_start: f64,
    /// Transient window is [0, transient_end).
    pub transient_end: f64,
    /// Welch segment length (samples), even.
    pub spectrum_segment: usize,
    /// Channels whose spectra go into the report.
    pub spectrum_channels: Vec<String>,
}

/// Head, mid-depth and tip of both planes.
pub fn default_spectrum_channels(n_nodes: usize) -> Vec<String> {
    assert!(n_nodes >= 1);
    let mut picks = vec![0, n_nodes / 2, n_nodes - 1];
    picks.dedup();
    let mut out: Vec<String> = picks.iter().map(|i| format!("x{i}")).collect();
    out.extend(picks.iter().map(|i| format!("y{i}")));
    out
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            steady_start: 100.0,
            transient_end: 50.0,
            spectrum_segment: 4096,
            spectrum_channels: default_spectrum_channels(31),
        }
    }
}

/// Compare a prediction against the reference response. `timing` is not
/// filled here (a metrics-only run is byte-reproducible); see the pipeline's
/// benchmark path for the wall-clock comparison.
pub fn evaluate(
    truth: &SimulationResult,
    pred: &SimulationResult,
    cfg: &EvalConfig,
) -> Result<EvalReport, ComputeError> {
    assert_eq!(truth.data.shape(), pred.data.shape(), "shape mismatch");
    assert_eq!(truth.dt, pred.dt, "sample step mismatch");
    assert!(
        truth.n_channels().is_multiple_of(2),
        "channels pair up as two planes"
    );
    let names = channel_names(truth.n_channels() / 2);

    let steady = nmse_per_channel(truth, pred, cfg.steady_start, f64::INFINITY)?;
    let transient = nmse_per_channel(truth, pred, 0.0, cfg.transient_end)?;

    let steady_range = window_indices(truth.dt, truth.n_samples(), cfg.steady_start, f64::INFINITY);
    let mut spectra = Vec::with_capacity(cfg.spectrum_channels.len());
    for ch in &cfg.spectrum_channels {
        let c = names
            .iter()
            .position(|n| n == ch)
            .unwrap_or_else(|| panic!("unknown spectrum channel `{ch}`"));
        let t: Vec<f64> = steady_range.clone().map(|i| truth.data[(i, c)]).collect();
        let p: Vec<f64> = steady_range.clone().map(|i| pred.data[(i, c)]).collect();
        let (freqs, truth_psd) = welch_psd(&t, truth.dt, cfg.spectrum_segment)?;
        let (_, pred_psd) = welch_psd(&p, truth.dt, cfg.spectrum_segment)?;
        spectra.push(SpectrumBlock {
            channel: ch.clone(),
            freqs,
            truth_psd,
            pred_psd,
        });
    }

    Ok(EvalReport {
        dt: truth.dt,
        steady_start: cfg.steady_start,
        transient_end: cfg.transient_end,
        aggregate_nmse: aggregate_nmse(&steady),
        transient_aggregate_nmse: aggregate_nmse(&transient),
        per_channel_nmse: names.into_iter().zip(steady).collect(),
        spectra,
        timing: None,
    })
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), DataError> {
    let p = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| DataError::io(&p, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| DataError::io(&p, e);

    writeln!(w, "{REPORT_MAGIC}").map_err(io)?;
    writeln!(w, "dt={}", report.dt).map_err(io)?;
    writeln!(w, "steady_start={}", report.steady_start).map_err(io)?;
    writeln!(w, "transient_end={}", report.transient_end).map_err(io)?;
    writeln!(w, "aggregate_nmse={}", report.aggregate_nmse).map_err(io)?;
    writeln!(
        w,
        "transient_aggregate_nmse={}",
        report.transient_aggregate_nmse
    )
    .map_err(io)?;
    if let Some(t) = &report.timing {
        writeln!(w, "fom_seconds={}", t.fom_seconds).map_err(io)?;
        writeln!(w, "rom_seconds={}", t.rom_seconds).map_err(io)?;
        writeln!(w, "speedup={}", t.speedup).map_err(io)?;
    }
    writeln!(w, "per_channel_nmse {}", report.per_channel_nmse.len()).map_err(io)?;
    for (name, v) in &report.per_channel_nmse {
        writeln!(w, "{name},{v}").map_err(io)?;
    }
    for s in &report.spectra {
        if s.freqs.len() != s.truth_psd.len() || s.freqs.len() != s.pred_psd.len() {
            return Err(DataError::parse(
                &p,
                format!("spectrum `{}` has inconsistent lengths", s.channel),
            ));
        }
        writeln!(w, "spectrum {} {}", s.channel, s.freqs.len()).map_err(io)?;
        for k in 0..s.freqs.len() {
            writeln!(w, "{},{},{}", s.freqs[k], s.truth_psd[k], s.pred_psd[k]).map_err(io)?;
        }
    }
    writeln!(w, "end").map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_report(path: &Path) -> Result<EvalReport, DataError> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| DataError::io(&p, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<Option<String>, DataError> {
        match lines.next() {
            Some(Ok(l)) => Ok(Some(l)),
            Some(Err(e)) => Err(DataError::io(&p, e)),
            None => Ok(None),
        }
    };
    let bad = |reason: String| DataError::parse(&p, reason);
    let parse_f64 = |s: &str, what: &str| -> Result<f64, DataError> {
        s.parse::<f64>()
            .map_err(|_| DataError::parse(&p, format!("bad float `{s}` in {what}")))
    };

    match next()? {
        Some(l) if l == REPORT_MAGIC => {}
        other => return Err(bad(format!("expected `{REPORT_MAGIC}`, found {other:?}"))),
    }

    // Fixed scalar block, timing keys optional as a group.
    let required = [
        "dt",
        "steady_start",
        "transient_end",
        "aggregate_nmse",
        "transient_aggregate_nmse",
    ];
    let mut scalars = Vec::new();
    let mut line = next()?;
    loop {
        match &line {
            Some(l) if l.contains('=') => {
                let (k, v) = l.split_once('=').unwrap();
                scalars.push((k.to_string(), parse_f64(v, k)?));
                line = next()?;
            }
            _ => break,
        }
    }
    let mut seen = HashSet::new();
    for (k, _) in &scalars {
        if !seen.insert(k.clone()) {
            return Err(bad(format!("duplicate key `{k}`")));
        }
    }
    let get = |k: &str| scalars.iter().find(|(n, _)| n == k).map(|(_, v)| *v);
    for k in required {
        if get(k).is_none() {
            return Err(bad(format!("missing key `{k}`")));
        }
    }
    let timing_keys = ["fom_seconds", "rom_seconds", "speedup"];
    let timing_present = timing_keys.iter().filter(|k| get(k).is_some()).count();
    let timing = match timing_present {
        0 => None,
        3 => Some(Timing {
            fom_seconds: get("fom_seconds").unwrap(),
            rom_seconds: get("rom_seconds").unwrap(),
            speedup: get("speedup").unwrap(),
        }),
        _ => return Err(bad("timing keys must appear together".to_string())),
    };
    let known: usize = required.len() + timing_present;
    if scalars.len() != known {
        let unknown = scalars
            .iter()
            .find(|(k, _)| !required.contains(&k.as_str()) && !timing_keys.contains(&k.as_str()))
            .unwrap();
        return Err(bad(format!("unknown key `{}`", unknown.0)));
    }

    // per_channel_nmse section.
    let header = line.ok_or_else(|| bad("missing per_channel_nmse section".to_string()))?;
    let count: usize = header
        .strip_prefix("per_channel_nmse ")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| bad(format!("expected `per_channel_nmse <count>`, found `{header}`")))?;
    let mut per_channel = Vec::with_capacity(count);
    for _ in 0..count {
        let l = next()?.ok_or_else(|| bad("truncated per_channel_nmse section".to_string()))?;
        let (name, v) = l
            .split_once(',')
            .ok_or_else(|| bad(format!("expected `channel,value`, found `{l}`")))?;
        per_channel.push((name.to_string(), parse_f64(v, "per_channel_nmse")?));
    }

    // Spectrum sections until `end`.
    let mut spectra = Vec::new();
    loop {
        let l = next()?.ok_or_else(|| bad("missing end marker".to_string()))?;
        if l == "end" {
            break;
        }
        let mut parts = l.split(' ');
        let (tag, channel, count) = (parts.next(), parts.next(), parts.next());
        let bad_header = || bad(format!("expected `spectrum <channel> <count>`, found `{l}`"));
        if tag != Some("spectrum") || parts.next().is_some() {
            return Err(bad_header());
        }
        let channel = channel.ok_or_else(bad_header)?.to_string();
        let count: usize = count
            .and_then(|c| c.parse().ok())
            .ok_or_else(bad_header)?;
        let mut freqs = Vec::with_capacity(count);
        let mut truth_psd = Vec::with_capacity(count);
        let mut pred_psd = Vec::with_capacity(count);
        for _ in 0..count {
            let row = next()?.ok_or_else(|| bad(format!("truncated spectrum `{channel}`")))?;
            let cols: Vec<&str> = row.split(',').collect();
            if cols.len() != 3 {
                return Err(bad(format!(
                    "spectrum rows have 3 columns, found {} in `{row}`",
                    cols.len()
                )));
            }
            freqs.push(parse_f64(cols[0], "spectrum")?);
            truth_psd.push(parse_f64(cols[1], "spectrum")?);
            pred_psd.push(parse_f64(cols[2], "spectrum")?);
        }
        spectra.push(SpectrumBlock {
            channel,
            freqs,
            truth_psd,
            pred_psd,
        });
    }
    if next()?.is_some() {
        return Err(bad("unexpected content after end marker".to_string()));
    }

    Ok(EvalReport {
        dt: get("dt").unwrap(),
        steady_start: get("steady_start").unwrap(),
        transient_end: get("transient_end").unwrap(),
        aggregate_nmse: get("aggregate_nmse").unwrap(),
        transient_aggregate_nmse: get("transient_aggregate_nmse").unwrap(),
        per_channel_nmse: per_channel,
        spectra,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(dt: f64, data: DMatrix<f64>) -> SimulationResult {
        SimulationResult {
            dt,
            data,
            wall_seconds: 0.0,
            newton_retries: 0,
        }
    }

    #[test]
    fn window_indices_cover_half_open_ranges_on_the_grid() {
        // dt = 0.02: [100, inf) starts exactly at sample 5000.
        assert_eq!(window_indices(0.02, 25001, 100.0, f64::INFINITY), 5000..25001);
        // [0, 50) excludes the sample at exactly 50 s.
        assert_eq!(window_indices(0.02, 25001, 0.0, 50.0), 0..2500);
        // Off-grid bounds round inward.
        assert_eq!(window_indices(0.02, 100, 0.03, 0.05), 2..3);
        // Start beyond the record is empty.
        assert!(window_indices(0.02, 10, 100.0, f64::INFINITY).is_empty());
    }

    #[test]
    fn nmse_is_zero_for_identity_and_hundred_for_the_mean_predictor() {
        let t: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin() + 0.3).collect();
        assert_eq!(nmse_percent(&t, &t).unwrap(), 0.0);
        // Predicting the window mean scores exactly 100%.
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let p = vec![mean; t.len()];
        let v = nmse_percent(&t, &p).unwrap();
        assert!((v - 100.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn nmse_matches_a_hand_computed_case() {
        // truth alternates 0/1 (variance 1/4); one entry off by delta.
        let truth: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
        let mut pred = truth.clone();
        pred[3] += 0.5;
        // mse = 0.25/8, var = 0.25 -> nmse = 100/8.
        let v = nmse_percent(&truth, &pred).unwrap();
        assert!((v - 12.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn zero_variance_truth_is_undefined() {
        let t = vec![5.0; 10];
        let x = vec![4.0; 10];
        assert!(matches!(
            nmse_percent(&t, &x),
            Err(ComputeError::UndefinedMetric)
        ));
    }

    #[test]
    fn steady_metric_ignores_the_transient_and_vice_versa() {
        let n = 500;
        let truth = record(
            0.02,
            DMatrix::from_fn(n, 2, |i, j| ((i + j) as f64 * 0.11).sin()),
        );
        let mut pred = truth.clone();
        // Corrupt only the first second.
        for i in 0..50 {
            pred.data[(i, 0)] += 0.7;
            pred.data[(i, 1)] -= 0.2;
        }
        let steady = nmse_per_channel(&truth, &pred, 1.0, f64::INFINITY).unwrap();
        assert_eq!(steady, vec![0.0, 0.0]);
        let transient = nmse_per_channel(&truth, &pred, 0.0, 1.0).unwrap();
        assert!(transient.iter().all(|&v| v > 1.0), "{transient:?}");
    }

    #[test]
    fn welch_satisfies_the_windowed_parseval_identity() {
        // Single segment: sum(psd) df must equal sum(w^2 x^2) / U exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 512;
        let dt = 0.05;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (freqs, psd) = welch_psd(&x, dt, n).unwrap();
        assert_eq!(freqs.len(), n / 2 + 1);
        let df = freqs[1] - freqs[0];
        let total: f64 = psd.iter().sum::<f64>() * df;

        let w: Vec<f64> = (0..n)
            .map(|i| 0.5 * (1.0 - (TAU * i as f64 / n as f64).cos()))
            .collect();
        let u: f64 = w.iter().map(|v| v * v).sum();
        let expected = w
            .iter()
            .zip(&x)
            .map(|(wi, xi)| (wi * xi).powi(2))
            .sum::<f64>()
            / u;
        assert!(
            (total - expected).abs() / expected < 1e-10,
            "{total} vs {expected}"
        );
    }

    #[test]
    fn welch_recovers_a_bin_centered_tone_amplitude() {
        // A periodic Hann spectrum occupies exactly 3 bins, so the peak's
        // root sum of 2 psd df equals the amplitude.
        let dt = 0.01;
        let segment = 256;
        let n = segment * 8; // integer periods in every 50%-overlap segment
        let k0 = 10;
        let f0 = k0 as f64 / (segment as f64 * dt);
        let a0 = 2.5;
        let x: Vec<f64> = (0..n)
            .map(|i| a0 * (TAU * f0 * i as f64 * dt).sin())
            .collect();
        let (freqs, psd) = welch_psd(&x, dt, segment).unwrap();
        let df = freqs[1] - freqs[0];
        let peak: f64 = (k0 - 1..=k0 + 1).map(|k| 2.0 * psd[k] * df).sum();
        let a_est = peak.sqrt();
        assert!((a_est - a0).abs() / a0 < 1e-9, "{a_est} vs {a0}");
        // Leakage beyond the 3 peak bins is numerically zero.
        let elsewhere: f64 = psd
            .iter()
            .enumerate()
            .filter(|(k, _)| *k + 1 < k0 || *k > k0 + 1)
            .map(|(_, v)| v)
            .sum();
        assert!(elsewhere < 1e-18 * psd[k0], "leakage {elsewhere}");

        // The amplitude-spectrum helper is the per-bin square root.
        let (_, amp) = amplitude_spectrum(&x, dt, segment).unwrap();
        let rss = (k0 - 1..=k0 + 1).map(|k| amp[k] * amp[k]).sum::<f64>().sqrt();
        assert!((rss - a0).abs() / a0 < 1e-9);
    }

    #[test]
    fn welch_total_power_tracks_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 256 * 64;
        let dt = 0.02;
        // Uniform(-1, 1): variance 1/3.
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (freqs, psd) = welch_psd(&x, dt, 256).unwrap();
        let df = freqs[1] - freqs[0];
        let total: f64 = psd.iter().sum::<f64>() * df;
        assert!((total - 1.0 / 3.0).abs() < 0.05 / 3.0, "total power {total}");
    }

    #[test]
    fn welch_rejects_short_series() {
        let x = vec![0.0; 100];
        match welch_psd(&x, 0.02, 256) {
            Err(ComputeError::SeriesTooShort { len, min }) => assert_eq!((len, min), (100, 256)),
            other => panic!("expected series-too-short, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_assembles_a_consistent_report() {
        let n = 600;
        let truth = record(
            0.02,
            DMatrix::from_fn(n, 6, |i, j| {
                ((i as f64 * 0.07) + j as f64).sin() + 0.1 * j as f64
            }),
        );
        let mut pred = truth.clone();
        for i in 0..n {
            for j in 0..6 {
                pred.data[(i, j)] += 0.01 * ((i * (j + 2)) as f64 * 0.13).cos();
            }
        }
        let cfg = EvalConfig {
            steady_start: 2.0,
            transient_end: 1.0,
            spectrum_segment: 128,
            spectrum_channels: default_spectrum_channels(3),
        };
        let report = evaluate(&truth, &pred, &cfg).unwrap();
        assert_eq!(report.per_channel_nmse.len(), 6);
        assert_eq!(report.per_channel_nmse[0].0, "x0");
        assert_eq!(report.per_channel_nmse[3].0, "y0");
        let mean =
            report.per_channel_nmse.iter().map(|(_, v)| v).sum::<f64>() / 6.0;
        assert!((report.aggregate_nmse - mean).abs() < 1e-12);
        assert!(report.aggregate_nmse > 0.0);
        assert_eq!(report.spectra.len(), 6);
        assert_eq!(report.spectra[0].freqs.len(), 65);
        assert!(report.timing.is_none());
    }

    #[test]
    fn report_roundtrip_is_exact_with_and_without_timing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.txt");
        let mut report = EvalReport {
            dt: 0.02,
            steady_start: 100.0,
            transient_end: 50.0,
            aggregate_nmse: 1.2345678901234567,
            transient_aggregate_nmse: 9.87e-3,
            per_channel_nmse: vec![("x0".to_string(), 0.5), ("y0".to_string(), 5e-324)],
            spectra: vec![SpectrumBlock {
                channel: "x0".to_string(),
                freqs: vec![0.0, 0.25, 0.5],
                truth_psd: vec![1e-18, 2.0, 0.3333333333333333],
                pred_psd: vec![0.0, 1.9, -0.0],
            }],
            timing: None,
        };
        write_report(&path, &report).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);

        report.timing = Some(Timing {
            fom_seconds: 12.5,
            rom_seconds: 0.25,
            speedup: 50.0,
        });
        write_report(&path, &report).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);

        // Deterministic bytes.
        let first = std::fs::read(&path).unwrap();
        write_report(&path, &report).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn report_reader_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.txt");
        let report = EvalReport {
            dt: 0.02,
            steady_start: 1.0,
            transient_end: 0.5,
            aggregate_nmse: 1.0,
            transient_aggregate_nmse: 2.0,
            per_channel_nmse: vec![("x0".to_string(), 0.5)],
            spectra: vec![],
            timing: None,
        };
        write_report(&path, &report).unwrap();
        let good = std::fs::read_to_string(&path).unwrap();

        let cases: Vec<(String, &str)> = vec![
            (good.replace(REPORT_MAGIC, "# other v1"), "magic"),
            (good.replace("dt=0.02\n", ""), "missing dt"),
            (good.replace("dt=0.02\n", "dt=0.02\ndt=0.02\n"), "duplicate"),
            (
                good.replace("dt=0.02\n", "dt=0.02\nfom_seconds=1\n"),
                "partial timing",
            ),
            (
                good.replace("dt=0.02\n", "dt=0.02\nbogus=1\n"),
                "unknown key",
            ),
            (good.replace("per_channel_nmse 1", "per_channel_nmse 2"), "truncated"),
            (good.replace("\nend\n", "\n"), "missing end"),
            (good.replace("\nend\n", "\nend\ntrailing\n"), "trailing"),
            (good.replace("x0,0.5", "x0,abc"), "bad float"),
        ];
        for (text, what) in cases {
            std::fs::write(&path, text).unwrap();
            assert!(read_report(&path).is_err(), "case `{what}` should fail");
        }
    }
}
