//! Synthetic band-limited load histories and the dataset file format.
//!
//! Each record carries four head loads sampled on a common time grid: two
//! shears Fx, Fy (N) and two overturning moments Mx, My (N m). Every channel
//! is an independent random multisine
//!
//! ```text
//! s(t) = sum_k a_k sin(2 pi f_k t + phi_k)
//! ```
//!
//! whose frequencies are drawn uniformly in a band and then snapped to the
//! periodic grid f = m / duration (integer cycles over the record, distinct
//! per component), so the signal contains exactly the drawn lines and
//! nothing else. Amplitudes fall off as 1/f and the whole channel is then
//! rescaled so its sample RMS equals `amplitude_scale * reference_rms`
//! (times the moment arm for moment channels). All randomness flows from
//! one root seed through deterministic stream derivation, so records are
//! reproducible independent of generation order.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{ConfigError, DataError};
use crate::integrator::SimulationResult;

/// Forcing channel labels in file and matrix column order.
pub const FORCING_CHANNELS: [&str; 4] = ["Fx", "Fy", "Mx", "My"];

/// SplitMix64 permutation; the standard finalizer-quality 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed stream: a tagged, indexed child of a root seed.
/// Children with different tags or indices are decorrelated by SplitMix64.
pub fn derive_seed(root: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ tag) ^ index)
}

const SCENARIO_STREAM: u64 = 0x5343;
const CHANNEL_STREAM: u64 = 0x4348;

/// What kind of multisine to draw for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Multiplier on the reference RMS for every channel.
    pub amplitude_scale: f64,
    /// Frequency band (f_min, f_max) in Hz.
    pub band: (f64, f64),
    /// Number of sinusoid components per channel.
    pub n_components: usize,
    /// Lever arm (m) converting the force RMS target into a moment target.
    pub moment_arm: f64,
    /// RMS (N) of a unit-scale force channel.
    pub reference_rms: f64,
}

impl ScenarioSpec {
    pub fn validate(&self, dt: f64, duration: f64) -> Result<(), ConfigError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ConfigError::invalid(
                "dt",
                format!("must be positive and finite, got {dt}"),
            ));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(ConfigError::invalid(
                "duration",
                format!("must be positive and finite, got {duration}"),
            ));
        }
        let (lo, hi) = self.band;
        let nyquist = 0.5 / dt;
        if !(lo > 0.0 && hi > lo) {
            return Err(ConfigError::invalid(
                "band",
                format!("need 0 < f_min < f_max, got ({lo}, {hi})"),
            ));
        }
        if hi > nyquist {
            return Err(ConfigError::invalid(
                "band",
                format!("f_max {hi} Hz exceeds the Nyquist frequency {nyquist} Hz at dt {dt}"),
            ));
        }
        if self.n_components == 0 {
            return Err(ConfigError::invalid(
                "n_components",
                "need at least one component".to_string(),
            ));
        }
        // Distinct grid lines available inside the band.
        let k_lo = (lo * duration).ceil().max(1.0) as u64;
        let k_hi = (hi * duration).floor() as u64;
        let capacity = k_hi.saturating_sub(k_lo).saturating_add(1);
        if k_hi < k_lo || capacity < self.n_components as u64 {
            return Err(ConfigError::invalid(
                "n_components",
                format!(
                    "band ({lo}, {hi}) Hz over {duration} s offers {capacity} grid \
                     frequencies, fewer than the {} requested",
                    self.n_components
                ),
            ));
        }
        if !(self.amplitude_scale > 0.0) || !self.amplitude_scale.is_finite() {
            return Err(ConfigError::invalid(
                "amplitude_scale",
                format!("must be positive and finite, got {}", self.amplitude_scale),
            ));
        }
        if !(self.moment_arm > 0.0) || !self.moment_arm.is_finite() {
            return Err(ConfigError::invalid(
                "moment_arm",
                format!("must be positive and finite, got {}", self.moment_arm),
            ));
        }
        if !(self.reference_rms > 0.0) || !self.reference_rms.is_finite() {
            return Err(ConfigError::invalid(
                "reference_rms",
                format!("must be positive and finite, got {}", self.reference_rms),
            ));
        }
        Ok(())
    }
}

/// Four sampled load channels plus the identifiers that reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingRecord {
    /// Sample step (s).
    pub dt: f64,
    pub scenario_id: usize,
    /// Record seed; channels derive their own streams from it.
    pub seed: u64,
    /// Rows are time samples, columns [Fx, Fy, Mx, My].
    pub data: DMatrix<f64>,
}

impl ForcingRecord {
    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn duration(&self) -> f64 {
        (self.n_samples().saturating_sub(1)) as f64 * self.dt
    }
}

/// Draw one record: per-channel grid-snapped multisines with exact RMS
/// normalization. Samples run t = 0..=duration inclusive.
pub fn generate_forcing(
    spec: &ScenarioSpec,
    scenario_id: usize,
    seed: u64,
    dt: f64,
    duration: f64,
) -> Result<ForcingRecord, ConfigError> {
    spec.validate(dt, duration)?;
    let n_steps = (duration / dt).round() as usize;
    let n = n_steps + 1;
    // Periodicity base: integer cycles over the actually sampled span.
    let period = n_steps as f64 * dt;

    let k_lo = (spec.band.0 * period).ceil().max(1.0) as u64;
    let k_hi = (spec.band.1 * period).floor() as u64;

    let mut data = DMatrix::<f64>::zeros(n, 4);
    for ch in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, CHANNEL_STREAM, ch as u64));
        // Distinct integer cycle counts in [k_lo, k_hi].
        let mut cycles: Vec<u64> = Vec::with_capacity(spec.n_components);
        while cycles.len() < spec.n_components {
            let k = rng.random_range(k_lo..=k_hi);
            if !cycles.contains(&k) {
                cycles.push(k);
            }
        }
        let comps: Vec<(f64, f64, f64)> = cycles
            .iter()
            .map(|&k| {
                let f = k as f64 / period;
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (f, 1.0 / f, phase)
            })
            .collect();

        let mut sum_sq = 0.0;
        for j in 0..n {
            let t = j as f64 * dt;
            let mut s = 0.0;
            for &(f, a, phi) in &comps {
                s += a * (std::f64::consts::TAU * f * t + phi).sin();
            }
            data[(j, ch)] = s;
            sum_sq += s * s;
        }
        let rms = (sum_sq / n as f64).sqrt();
        let target = spec.amplitude_scale
            * spec.reference_rms
            * if ch >= 2 { spec.moment_arm } else { 1.0 };
        let scale = target / rms;
        for j in 0..n {
            data[(j, ch)] *= scale;
        }
    }

    Ok(ForcingRecord {
        dt,
        scenario_id,
        seed,
        data,
    })
}

/// Whether a dataset participates in fitting or is held back for testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(format!("unknown role `{other}`, expected train or test")),
        }
    }
}

/// One scenario of the canonical corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub scenario_id: usize,
    pub role: Role,
    pub spec: ScenarioSpec,
    pub seed: u64,
}

/// Operating band of the production load cases (Hz).
pub const PRODUCTION_BAND: (f64, f64) = (0.05, 0.5);
/// Band of the low-frequency idling cases (Hz).
pub const IDLE_BAND: (f64, f64) = (0.02, 0.2);

/// The twelve-scenario corpus: seven production-band amplitudes and four
/// idle-band amplitudes for training, plus one held-out production-band
/// test case at an amplitude between the training levels.
pub fn canonical_corpus(
    master_seed: u64,
    n_components: usize,
    reference_rms: f64,
    moment_arm: f64,
) -> Vec<CorpusEntry> {
    let spec = |band: (f64, f64), amplitude_scale: f64| ScenarioSpec {
        amplitude_scale,
        band,
        n_components,
        moment_arm,
        reference_rms,
    };
    let mut entries = Vec::with_capacity(12);
    for &scale in &[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0] {
        entries.push((Role::Train, spec(PRODUCTION_BAND, scale)));
    }
    for &scale in &[0.5, 1.0, 1.5, 2.0] {
        entries.push((Role::Train, spec(IDLE_BAND, scale)));
    }
    entries.push((Role::Test, spec(PRODUCTION_BAND, 0.9)));

    entries
        .into_iter()
        .enumerate()
        .map(|(id, (role, spec))| CorpusEntry {
            scenario_id: id,
            role,
            spec,
            seed: derive_seed(master_seed, SCENARIO_STREAM, id as u64),
        })
        .collect()
}

/// A forcing record paired with the simulated response it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub forcing: ForcingRecord,
    pub response: SimulationResult,
    pub role: Role,
}

const DATASET_MAGIC: &str = "# monorom-dataset v1";

/// Write a dataset as the versioned CSV format: magic line, metadata line,
/// column header, then one `%.16e` row per sample (lossless for f64).
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), DataError> {
    let p = path.display().to_string();
    let n = ds.forcing.n_samples();
    if ds.response.n_samples() != n {
        return Err(DataError::parse(
            &p,
            format!(
                "forcing has {n} samples but response has {}",
                ds.response.n_samples()
            ),
        ));
    }
    let n_channels = ds.response.n_channels();
    if n_channels == 0 || !n_channels.is_multiple_of(2) {
        return Err(DataError::parse(
            &p,
            format!("response channel count {n_channels} is not an even positive number"),
        ));
    }
    for v in ds.forcing.data.iter().chain(ds.response.data.iter()) {
        if !v.is_finite() {
            return Err(DataError::parse(&p, "refusing to write non-finite value"));
        }
    }

    let file = std::fs::File::create(path).map_err(|e| DataError::io(&p, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| DataError::io(&p, e);

    writeln!(w, "{DATASET_MAGIC}").map_err(io)?;
    writeln!(
        w,
        "dt={} duration={} scenario_id={} seed={} role={}",
        ds.forcing.dt,
        ds.forcing.duration(),
        ds.forcing.scenario_id,
        ds.forcing.seed,
        ds.role.as_str()
    )
    .map_err(io)?;

    let n_nodes = n_channels / 2;
    let mut header = String::from("t,Fx,Fy,Mx,My");
    for i in 0..n_nodes {
        write!(header, ",x{i}").unwrap();
    }
    for i in 0..n_nodes {
        write!(header, ",y{i}").unwrap();
    }
    writeln!(w, "{header}").map_err(io)?;

    let mut line = String::with_capacity(32 * (5 + n_channels));
    for j in 0..n {
        line.clear();
        write!(line, "{:.16e}", j as f64 * ds.forcing.dt).unwrap();
        for c in 0..4 {
            write!(line, ",{:.16e}", ds.forcing.data[(j, c)]).unwrap();
        }
        for c in 0..n_channels {
            write!(line, ",{:.16e}", ds.response.data[(j, c)]).unwrap();
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

struct DatasetMeta {
    dt: f64,
    duration: f64,
    scenario_id: usize,
    seed: u64,
    role: Role,
}

fn parse_metadata_line(path: &str, line: &str) -> Result<DatasetMeta, DataError> {
    let mut dt = None;
    let mut duration = None;
    let mut scenario_id = None;
    let mut seed = None;
    let mut role = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| DataError::parse(path, format!("metadata field `{field}` is not key=value")))?;
        match key {
            "dt" => {
                dt = Some(value.parse::<f64>().map_err(|_| {
                    DataError::parse(path, format!("metadata dt `{value}` is not a number"))
                })?)
            }
            "duration" => {
                duration = Some(value.parse::<f64>().map_err(|_| {
                    DataError::parse(path, format!("metadata duration `{value}` is not a number"))
                })?)
            }
            "scenario_id" => {
                scenario_id = Some(value.parse::<usize>().map_err(|_| {
                    DataError::parse(path, format!("metadata scenario_id `{value}` is not an integer"))
                })?)
            }
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    DataError::parse(path, format!("metadata seed `{value}` is not an integer"))
                })?)
            }
            "role" => role = Some(Role::from_str(value).map_err(|e| DataError::parse(path, e))?),
            other => {
                return Err(DataError::parse(
                    path,
                    format!("unknown metadata key `{other}`"),
                ))
            }
        }
    }
    let dt = dt.ok_or_else(|| DataError::parse(path, "metadata missing dt"))?;
    let duration = duration.ok_or_else(|| DataError::parse(path, "metadata missing duration"))?;
    let scenario_id =
        scenario_id.ok_or_else(|| DataError::parse(path, "metadata missing scenario_id"))?;
    let seed = seed.ok_or_else(|| DataError::parse(path, "metadata missing seed"))?;
    let role = role.ok_or_else(|| DataError::parse(path, "metadata missing role"))?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DataError::parse(path, format!("metadata dt {dt} must be positive")));
    }
    Ok(DatasetMeta {
        dt,
        duration,
        scenario_id,
        seed,
        role,
    })
}

/// Read a dataset file, validating structure, finiteness and metadata
/// consistency. Timing diagnostics are not stored in the format, so the
/// returned response carries `wall_seconds = 0`.
pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| DataError::io(&p, e))?;
    let mut lines = BufReader::new(file).lines();

    let magic = lines
        .next()
        .transpose()
        .map_err(|e| DataError::io(&p, e))?
        .ok_or_else(|| DataError::parse(&p, "empty file, expected dataset header"))?;
    if magic.trim_end() != DATASET_MAGIC {
        return Err(DataError::parse(
            &p,
            format!("bad magic line `{magic}`, expected `{DATASET_MAGIC}`"),
        ));
    }

    let meta_line = lines
        .next()
        .transpose()
        .map_err(|e| DataError::io(&p, e))?
        .ok_or_else(|| DataError::parse(&p, "missing metadata line"))?;
    let meta = parse_metadata_line(&p, &meta_line)?;
    let dt = meta.dt;

    let header = lines
        .next()
        .transpose()
        .map_err(|e| DataError::io(&p, e))?
        .ok_or_else(|| DataError::parse(&p, "missing column header"))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    let expected_prefix = ["t", "Fx", "Fy", "Mx", "My"];
    if cols.len() < 5 || cols[..5] != expected_prefix {
        return Err(DataError::parse(
            &p,
            format!("column header must start with t,Fx,Fy,Mx,My, got `{header}`"),
        ));
    }
    let response_cols = &cols[5..];
    let n_x = response_cols.iter().take_while(|c| c.starts_with('x')).count();
    let n_y = response_cols.len() - n_x;
    if n_x == 0 || n_x != n_y {
        return Err(DataError::parse(
            &p,
            format!(
                "expected {} response channels ({} x + {} y), found {}",
                2 * n_x.max(1),
                n_x.max(1),
                n_x.max(1),
                response_cols.len()
            ),
        ));
    }
    for (i, c) in response_cols.iter().enumerate() {
        let expect = if i < n_x {
            format!("x{i}")
        } else {
            format!("y{}", i - n_x)
        };
        if *c != expect {
            return Err(DataError::parse(
                &p,
                format!("response column {} named `{c}`, expected `{expect}`", i + 5),
            ));
        }
    }
    let n_channels = 2 * n_x;
    let total_cols = 5 + n_channels;

    let mut forcing_rows: Vec<f64> = Vec::new();
    let mut response_rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| DataError::io(&p, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row_no = idx + 4; // 1-based file line number
        let mut count = 0usize;
        for (k, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                DataError::parse(&p, format!("line {row_no}: `{field}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(DataError::parse(
                    &p,
                    format!("line {row_no}: non-finite value `{field}`"),
                ));
            }
            match k {
                0 => {
                    let expected_t = n_rows as f64 * dt;
                    if (v - expected_t).abs() > 1e-6 * expected_t.abs().max(1.0) {
                        return Err(DataError::parse(
                            &p,
                            format!("line {row_no}: time {v} does not match grid {expected_t}"),
                        ));
                    }
                }
                1..=4 => forcing_rows.push(v),
                _ => response_rows.push(v),
            }
            count += 1;
        }
        if count != total_cols {
            return Err(DataError::parse(
                &p,
                format!("line {row_no}: expected {total_cols} columns, found {count}"),
            ));
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(DataError::parse(&p, "dataset has no data rows"));
    }
    let span = (n_rows - 1) as f64 * dt;
    if (span - meta.duration).abs() > 1e-6 * meta.duration.abs().max(1.0) {
        return Err(DataError::parse(
            &p,
            format!(
                "metadata duration {} inconsistent with {n_rows} rows at dt {dt} (span {span})",
                meta.duration
            ),
        ));
    }

    Ok(Dataset {
        forcing: ForcingRecord {
            dt,
            scenario_id: meta.scenario_id,
            seed: meta.seed,
            data: DMatrix::from_row_slice(n_rows, 4, &forcing_rows),
        },
        response: SimulationResult {
            dt,
            data: DMatrix::from_row_slice(n_rows, n_channels, &response_rows),
            wall_seconds: 0.0,
            newton_retries: 0,
        },
        role: meta.role,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn spec(scale: f64) -> ScenarioSpec {
        ScenarioSpec {
            amplitude_scale: scale,
            band: PRODUCTION_BAND,
            n_components: 25,
            moment_arm: 30.0,
            reference_rms: 1.0e6,
        }
    }

    #[test]
    fn rms_normalization_is_exact_per_channel() {
        let rec = generate_forcing(&spec(1.25), 3, 99, 0.02, 100.0).unwrap();
        let n = rec.n_samples();
        for ch in 0..4 {
            let rms = (rec.data.column(ch).map(|v| v * v).sum() / n as f64).sqrt();
            let target = 1.25 * 1.0e6 * if ch >= 2 { 30.0 } else { 1.0 };
            assert!(
                (rms - target).abs() / target < 1e-12,
                "channel {ch}: rms {rms} vs {target}"
            );
        }
    }

    #[test]
    fn spectrum_is_contained_in_band() {
        let rec = generate_forcing(&spec(1.0), 0, 7, 0.02, 200.0).unwrap();
        // Drop the duplicated endpoint so the grid spans one exact period.
        let n = rec.n_samples() - 1;
        let period = n as f64 * rec.dt;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        for ch in 0..4 {
            let mut buf: Vec<Complex<f64>> = (0..n)
                .map(|j| Complex::new(rec.data[(j, ch)], 0.0))
                .collect();
            fft.process(&mut buf);
            let mut in_band = 0.0;
            let mut total = 0.0;
            for (k, v) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
                let f = k as f64 / period;
                let p = v.norm_sqr();
                total += p;
                if f >= PRODUCTION_BAND.0 - 0.5 / period && f <= PRODUCTION_BAND.1 + 0.5 / period {
                    in_band += p;
                }
            }
            assert!(
                in_band / total >= 0.99,
                "channel {ch}: containment {}",
                in_band / total
            );
        }
    }

    #[test]
    fn deterministic_per_seed_and_distinct_across_seeds_and_channels() {
        let a = generate_forcing(&spec(1.0), 0, 1234, 0.02, 100.0).unwrap();
        let b = generate_forcing(&spec(1.0), 0, 1234, 0.02, 100.0).unwrap();
        assert_eq!(a.data.as_slice(), b.data.as_slice());

        let c = generate_forcing(&spec(1.0), 0, 1235, 0.02, 100.0).unwrap();
        assert_ne!(a.data.as_slice(), c.data.as_slice());

        // Channels inside one record differ from each other.
        for ch in 1..4 {
            assert_ne!(
                a.data.column(0).as_slice().to_vec(),
                a.data.column(ch).as_slice().to_vec(),
                "channel {ch} duplicates channel 0"
            );
        }
    }

    #[test]
    fn validation_rejects_bad_bands_and_overfull_grids() {
        let mut s = spec(1.0);
        s.band = (0.5, 0.05);
        assert!(generate_forcing(&s, 0, 1, 0.02, 100.0).is_err());

        s = spec(1.0);
        s.band = (0.05, 30.0); // above Nyquist at dt = 0.02
        assert!(generate_forcing(&s, 0, 1, 0.02, 100.0).is_err());

        s = spec(1.0);
        s.n_components = 10;
        // Band (0.1, 0.3) over 10 s holds grid lines k = 1..3 only.
        s.band = (0.1, 0.3);
        let err = generate_forcing(&s, 0, 1, 0.02, 10.0);
        assert!(err.is_err());

        s = spec(0.0);
        assert!(generate_forcing(&s, 0, 1, 0.02, 100.0).is_err());

        assert!(generate_forcing(&spec(1.0), 0, 1, 0.0, 100.0).is_err());
        assert!(generate_forcing(&spec(1.0), 0, 1, 0.02, -5.0).is_err());
    }

    #[test]
    fn corpus_layout_is_eleven_train_plus_one_test() {
        let corpus = canonical_corpus(42, 25, 1.0e6, 30.0);
        assert_eq!(corpus.len(), 12);
        assert_eq!(
            corpus.iter().filter(|e| e.role == Role::Train).count(),
            11
        );
        let test: Vec<_> = corpus.iter().filter(|e| e.role == Role::Test).collect();
        assert_eq!(test.len(), 1);
        assert_eq!(test[0].scenario_id, 11);
        assert_eq!(test[0].spec.band, PRODUCTION_BAND);
        assert_eq!(test[0].spec.amplitude_scale, 0.9);

        for (i, e) in corpus.iter().enumerate() {
            assert_eq!(e.scenario_id, i);
        }
        let production: Vec<_> = corpus
            .iter()
            .filter(|e| e.spec.band == PRODUCTION_BAND && e.role == Role::Train)
            .map(|e| e.spec.amplitude_scale)
            .collect();
        assert_eq!(production, [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0]);
        let idle: Vec<_> = corpus
            .iter()
            .filter(|e| e.spec.band == IDLE_BAND)
            .map(|e| e.spec.amplitude_scale)
            .collect();
        assert_eq!(idle, [0.5, 1.0, 1.5, 2.0]);

        // Every scenario is distinguishable: (band, scale, seed) triples differ.
        for a in &corpus {
            for b in &corpus {
                if a.scenario_id != b.scenario_id {
                    assert!(
                        a.seed != b.seed
                            && (a.spec.band != b.spec.band
                                || a.spec.amplitude_scale != b.spec.amplitude_scale)
                    );
                }
            }
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_spread() {
        let s = derive_seed(42, SCENARIO_STREAM, 0);
        assert_eq!(s, derive_seed(42, SCENARIO_STREAM, 0));
        assert_ne!(s, derive_seed(42, SCENARIO_STREAM, 1));
        assert_ne!(s, derive_seed(42, CHANNEL_STREAM, 0));
        assert_ne!(s, derive_seed(43, SCENARIO_STREAM, 0));
    }

    fn tiny_dataset() -> Dataset {
        // A 2 s record only offers grid lines at multiples of 0.5 Hz.
        let mut s = spec(1.0);
        s.band = (0.5, 2.0);
        s.n_components = 3;
        let forcing = generate_forcing(&s, 5, 77, 0.02, 2.0).unwrap();
        let n = forcing.n_samples();
        let response = SimulationResult {
            dt: 0.02,
            data: DMatrix::from_fn(n, 6, |i, j| ((i * 7 + j) as f64 * 0.13).sin() * 1e-4),
            wall_seconds: 0.0,
            newton_retries: 0,
        };
        Dataset {
            forcing,
            response,
            role: Role::Train,
        }
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = tiny_dataset();
        write_dataset(&path, &ds).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.forcing.dt.to_bits(), ds.forcing.dt.to_bits());
        assert_eq!(back.forcing.scenario_id, 5);
        assert_eq!(back.forcing.seed, 77);
        assert_eq!(back.role, Role::Train);
        assert_eq!(back.forcing.data.as_slice(), ds.forcing.data.as_slice());
        assert_eq!(back.response.data.as_slice(), ds.response.data.as_slice());
    }

    #[test]
    fn dataset_write_is_deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let ds = tiny_dataset();
        write_dataset(&a, &ds).unwrap();
        write_dataset(&b, &ds).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn reader_names_expected_channel_count_when_one_is_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let ds = tiny_dataset();
        write_dataset(&path, &ds).unwrap();
        // Drop the last response column from header and rows: 5 remain.
        let text = std::fs::read_to_string(&path).unwrap();
        let mutilated: String = text
            .lines()
            .map(|l| match l.rfind(',') {
                Some(cut) => format!("{}\n", &l[..cut]),
                None => format!("{l}\n"),
            })
            .collect();
        std::fs::write(&path, mutilated).unwrap();
        let err = read_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("expected 6 response channels") && msg.contains("found 5"),
            "unhelpful message: {msg}"
        );
    }

    #[test]
    fn reader_rejects_malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).unwrap_err().to_string().contains("empty"));

        std::fs::write(&path, "# other format v9\n").unwrap();
        assert!(read_dataset(&path)
            .unwrap_err()
            .to_string()
            .contains("bad magic"));

        std::fs::write(
            &path,
            format!("{DATASET_MAGIC}\ndt=0.02 duration=0 scenario_id=0 seed=1 role=bishop\n"),
        )
        .unwrap();
        assert!(read_dataset(&path)
            .unwrap_err()
            .to_string()
            .contains("unknown role"));

        std::fs::write(
            &path,
            format!("{DATASET_MAGIC}\ndt=0.02 duration=0 scenario_id=0 seed=1 role=train flavour=salty\n"),
        )
        .unwrap();
        assert!(read_dataset(&path)
            .unwrap_err()
            .to_string()
            .contains("unknown metadata key"));

        std::fs::write(
            &path,
            format!(
                "{DATASET_MAGIC}\ndt=0.02 duration=0 scenario_id=0 seed=1 role=train\n\
                 t,Fx,Fy,Mx,My,x0,y0\n0.0,1,2,3,4,5,NaN\n"
            ),
        )
        .unwrap();
        assert!(read_dataset(&path)
            .unwrap_err()
            .to_string()
            .contains("non-finite"));

        std::fs::write(
            &path,
            format!(
                "{DATASET_MAGIC}\ndt=0.02 duration=0.02 scenario_id=0 seed=1 role=train\n\
                 t,Fx,Fy,Mx,My,x0,y0\n0.0,1,2,3,4,5,6\n0.02,1,2,3,4,5\n"
            ),
        )
        .unwrap();
        let msg = read_dataset(&path).unwrap_err().to_string();
        assert!(msg.contains("expected 7 columns, found 6"), "{msg}");
    }

    #[test]
    fn writer_rejects_non_finite_and_mismatched_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let mut ds = tiny_dataset();
        ds.response.data[(0, 0)] = f64::NAN;
        assert!(write_dataset(&path, &ds).is_err());

        let mut ds = tiny_dataset();
        ds.response.data = ds.response.data.rows(0, 3).into_owned();
        assert!(write_dataset(&path, &ds).is_err());
    }
}
