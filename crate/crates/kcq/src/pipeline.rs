//! Offline/online computational strategy: generate and persist the response
//! database (samples, weights, per-sample response channels), then answer
//! measurement-conditioned queries against it.
//!
//! Persistence is a directory of delimited numeric text files plus a `meta`
//! file carrying the schema version, the run provenance, and SHA-256 digests
//! of every data file. Values are written with 17 significant digits so that
//! store-then-load is a bitwise identity.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dynamics::{integrate, qoi_value, DynamicalSystem, QoISpec};
use crate::error::{Error, Result};
use crate::measurement::MeasurementModel;
use crate::randomfield::KLField;
use crate::sampling::{
    compute_voronoi_weights, generate_halton, neumaier_sum, transform_to_distribution, Marginal,
    ParameterSpace, WeightedSampleSet,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Built-in system choices for configuration files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemSelector {
    Sdof,
    Beam { n_elements: usize },
}

impl SystemSelector {
    pub fn name(&self) -> String {
        match self {
            Self::Sdof => "sdof".into(),
            Self::Beam { n_elements } => format!("beam{n_elements}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "sdof" {
            Ok(Self::Sdof)
        } else if let Some(n) = s.strip_prefix("beam") {
            let n_elements = n
                .parse()
                .map_err(|_| Error::Config(format!("unknown system '{s}'")))?;
            Ok(Self::Beam { n_elements })
        } else {
            Err(Error::Config(format!("unknown system '{s}'")))
        }
    }

    /// Builds the dynamical system together with its parameter distribution.
    pub fn build(&self) -> Result<(DynamicalSystem, ParameterSpace)> {
        match self {
            Self::Sdof => {
                let system = crate::dynamics::make_sdof_system();
                let space = ParameterSpace::new(vec![
                    Marginal::Normal { mean: 0.0, sd: 0.2 },
                    Marginal::Normal { mean: 0.0, sd: 0.2 },
                ]);
                Ok((system, space))
            }
            Self::Beam { n_elements } => {
                let field = KLField::new(2e11, 3.0, 0.333, 0.2, 10)?;
                let order = field.order;
                let system = crate::dynamics::make_beam_system(*n_elements, field);
                Ok((system, ParameterSpace::standard_normal(order)))
            }
        }
    }
}

/// Everything needed to reproduce one offline run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemSelector,
    pub n: usize,
    pub halton_seed: u64,
    pub probe_seed: u64,
    pub n_probe: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub qois: Vec<QoISpec>,
    pub sensors: MeasurementModel,
    pub n_k: usize,
    pub grid_points: usize,
    /// Run fails if more than this fraction of samples fail to integrate.
    pub max_failure_fraction: f64,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if self.qois.is_empty() {
            return Err(Error::Config("at least one quantity of interest".into()));
        }
        if self.n_k == 0 {
            return Err(Error::Config("N_k must be positive".into()));
        }
        Ok(())
    }
}

/// One response channel: the QoI it reads and its n × (n_steps+1) values.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub spec: QoISpec,
    pub values: DMatrix<f64>,
}

/// Provenance recorded with the database for bit-exact reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub system: String,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub halton_seed: u64,
    pub probe_seed: u64,
    pub n_probe: usize,
    pub schema_version: u32,
}

/// The offline artifact: weighted samples with their response channels.
#[derive(Debug, Clone)]
pub struct ResponseDatabase {
    pub space: ParameterSpace,
    pub sample_set: WeightedSampleSet,
    pub times: Vec<f64>,
    pub qoi_channels: Vec<Channel>,
    pub sensor_channels: Vec<Channel>,
    pub provenance: Provenance,
}

impl ResponseDatabase {
    pub fn n(&self) -> usize {
        self.sample_set.len()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn qoi_channel(&self, spec: &QoISpec) -> Result<&Channel> {
        self.qoi_channels
            .iter()
            .find(|c| c.spec == *spec)
            .ok_or_else(|| Error::DatabaseCoverage(format!("QoI channel '{}'", spec.label())))
    }

    pub fn sensor_channel(&self, j: usize) -> Result<&Channel> {
        self.sensor_channels
            .get(j)
            .ok_or_else(|| Error::DatabaseCoverage(format!("sensor channel {j}")))
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        let cols = self.times.len();
        for c in self.qoi_channels.iter().chain(&self.sensor_channels) {
            if c.values.nrows() != n || c.values.ncols() != cols {
                return Err(Error::Corruption(format!(
                    "channel '{}' has shape {}x{}, expected {}x{}",
                    c.spec.label(),
                    c.values.nrows(),
                    c.values.ncols(),
                    n,
                    cols
                )));
            }
            if let Some(i) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput { index: i });
            }
        }
        Ok(())
    }
}

/// Channels computed for one sample: QoI rows then sensor rows.
struct SampleRows {
    qoi: Vec<Vec<f64>>,
    sensor: Vec<Vec<f64>>,
}

fn compute_sample_rows(
    system: &DynamicalSystem,
    config: &RunConfig,
    alpha: &[f64],
) -> Result<SampleRows> {
    let u0 = system.initial_state(alpha);
    let traj = integrate(
        system,
        alpha,
        &u0,
        config.dt,
        config.n_steps,
        config.tol,
        config.max_iter,
    )?;
    let read_channel = |spec: &QoISpec| -> Result<Vec<f64>> {
        (0..=config.n_steps)
            .map(|k| qoi_value(&traj, spec, k, system))
            .collect()
    };
    Ok(SampleRows {
        qoi: config
            .qois
            .iter()
            .map(read_channel)
            .collect::<Result<_>>()?,
        sensor: config
            .sensors
            .points
            .iter()
            .map(read_channel)
            .collect::<Result<_>>()?,
    })
}

fn journal_path(out_dir: &Path, i: usize) -> PathBuf {
    out_dir.join("journal").join(format!("sample_{i}"))
}

fn write_journal_entry(out_dir: &Path, i: usize, rows: &SampleRows) -> Result<()> {
    let dir = out_dir.join("journal");
    fs::create_dir_all(&dir)?;
    let mut body = String::new();
    for row in rows.qoi.iter().chain(&rows.sensor) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        body.push_str(&line.join(" "));
        body.push('\n');
    }
    // Atomic publish: a journal entry is either absent or complete.
    let tmp = dir.join(format!(".sample_{i}.tmp"));
    fs::write(&tmp, body)?;
    fs::rename(&tmp, journal_path(out_dir, i))?;
    Ok(())
}

fn read_journal_entry(out_dir: &Path, i: usize, config: &RunConfig) -> Option<SampleRows> {
    let text = fs::read_to_string(journal_path(out_dir, i)).ok()?;
    let n_qoi = config.qois.len();
    let n_sensor = config.sensors.points.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_qoi + n_sensor);
    for line in text.lines() {
        let row: Option<Vec<f64>> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        rows.push(row?);
    }
    if rows.len() != n_qoi + n_sensor || rows.iter().any(|r| r.len() != config.n_steps + 1) {
        return None;
    }
    let sensor = rows.split_off(n_qoi);
    Some(SampleRows { qoi: rows, sensor })
}

/// Offline database generation: GQMC samples and weights, one trajectory per
/// sample, response channels extracted and (optionally) persisted. When
/// `config.out_dir` is set, completed samples are journaled so an interrupted
/// run resumes without recomputation and the final database is identical to
/// an uninterrupted run.
pub fn offline_generate(config: &RunConfig) -> Result<ResponseDatabase> {
    config.validate()?;
    let (system, space) = config.system.build()?;
    let dim = space.dim();
    let unit = generate_halton(config.n, dim, config.halton_seed)?;
    let samples = transform_to_distribution(&unit, &space)?;
    let weights = compute_voronoi_weights(&samples, &space, config.n_probe, config.probe_seed)?;
    let sample_set = WeightedSampleSet::new(
        samples,
        weights,
        "gqmc-halton-voronoi",
        config.halton_seed,
    )?;
    let db = build_from_samples(config, &system, space, sample_set)?;
    if let Some(dir) = &config.out_dir {
        store_database(&db, dir)?;
    }
    Ok(db)
}

/// Integrates every sample of `sample_set`, extracts the configured
/// channels, applies the failed-sample policy, and assembles the database.
/// Shared between the GQMC offline stage and the pseudo-random oracle.
pub(crate) fn build_from_samples(
    config: &RunConfig,
    system: &DynamicalSystem,
    space: ParameterSpace,
    sample_set: WeightedSampleSet,
) -> Result<ResponseDatabase> {
    let dim = space.dim();
    let n = sample_set.len();
    let results: Vec<std::result::Result<SampleRows, Error>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let alpha: Vec<f64> = sample_set.samples.row(i).iter().copied().collect();
            if let Some(dir) = &config.out_dir {
                if let Some(rows) = read_journal_entry(dir, i, config) {
                    return Ok(rows);
                }
            }
            let rows = compute_sample_rows(system, config, &alpha)?;
            if let Some(dir) = &config.out_dir {
                write_journal_entry(dir, i, &rows)?;
            }
            Ok(rows)
        })
        .collect();

    let n_failed = results.iter().filter(|r| r.is_err()).count();
    if n_failed > 0 {
        let frac = n_failed as f64 / n as f64;
        if frac > config.max_failure_fraction {
            let first = results.iter().find_map(|r| r.as_ref().err()).unwrap();
            return Err(Error::Config(format!(
                "{n_failed} of {n} samples failed to integrate (first: {first})"
            )));
        }
        log::warn!(
            "{n_failed} of {n} samples failed to integrate; excluding them and renormalizing"
        );
    }

    // Keep the successful rows; renormalize their weights.
    let kept: Vec<usize> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_ok().then_some(i))
        .collect();
    let n_kept = kept.len();
    let cols = config.n_steps + 1;
    let mut kept_samples = DMatrix::zeros(n_kept, dim);
    let mut kept_weights = Vec::with_capacity(n_kept);
    for (row, &i) in kept.iter().enumerate() {
        kept_samples.row_mut(row).copy_from(&sample_set.samples.row(i));
        kept_weights.push(sample_set.weights[i]);
    }
    let total = neumaier_sum(kept_weights.iter().copied());
    for w in &mut kept_weights {
        *w /= total;
    }
    let sample_set = WeightedSampleSet::new(
        kept_samples,
        kept_weights,
        sample_set.generator_tag,
        sample_set.seed,
    )?;

    let mut qoi_channels: Vec<Channel> = config
        .qois
        .iter()
        .map(|spec| Channel {
            spec: *spec,
            values: DMatrix::zeros(n_kept, cols),
        })
        .collect();
    let mut sensor_channels: Vec<Channel> = config
        .sensors
        .points
        .iter()
        .map(|spec| Channel {
            spec: *spec,
            values: DMatrix::zeros(n_kept, cols),
        })
        .collect();
    for (row, &i) in kept.iter().enumerate() {
        let rows = results[i].as_ref().unwrap();
        for (c, vals) in qoi_channels.iter_mut().zip(&rows.qoi) {
            for (k, v) in vals.iter().enumerate() {
                c.values[(row, k)] = *v;
            }
        }
        for (c, vals) in sensor_channels.iter_mut().zip(&rows.sensor) {
            for (k, v) in vals.iter().enumerate() {
                c.values[(row, k)] = *v;
            }
        }
    }

    let db = ResponseDatabase {
        space,
        sample_set,
        times: (0..=config.n_steps).map(|k| k as f64 * config.dt).collect(),
        qoi_channels,
        sensor_channels,
        provenance: Provenance {
            system: config.system.name(),
            dt: config.dt,
            tol: config.tol,
            max_iter: config.max_iter,
            halton_seed: config.halton_seed,
            probe_seed: config.probe_seed,
            n_probe: config.n_probe,
            schema_version: SCHEMA_VERSION,
        },
    };
    db.validate()?;
    Ok(db)
}

/// Online stage: for each requested step, rank correlations, select the N_k
/// key conditions, and evaluate the conditional estimators. The database is
/// only read.
pub fn online_quantify(
    db: &ResponseDatabase,
    meas: &crate::measurement::MeasurementSet,
    qoi: &QoISpec,
    steps: &[usize],
    n_k: usize,
    grid_points: usize,
) -> Result<Vec<crate::estimators::KcqResult>> {
    steps
        .iter()
        .map(|&k| {
            let r = crate::measurement::correlation_coefficients(db, qoi, k, &meas.model)?;
            let sel = crate::measurement::select_key_conditions(&r, meas, n_k, &meas.model)?;
            crate::estimators::kcq_quantify(db, &sel, qoi, k, grid_points).map_err(|e| match e {
                Error::DegenerateLikelihood {
                    ess,
                    threshold,
                    context,
                } => Error::DegenerateLikelihood {
                    ess,
                    threshold,
                    context: format!("{context}; qoi {}, step {k}", qoi.label()),
                },
                other => other,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{:.16e}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn format_vector(v: &[f64]) -> String {
    let mut out = String::new();
    for x in v {
        writeln!(out, "{x:.16e}").unwrap();
    }
    out
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").unwrap();
    }
    hex
}

fn marginal_to_string(m: &Marginal) -> String {
    match m {
        Marginal::StandardNormal => "standardnormal".into(),
        Marginal::Normal { mean, sd } => format!("normal {mean:.16e} {sd:.16e}"),
    }
}

fn marginal_from_string(s: &str) -> Result<Marginal> {
    let bad = || Error::Corruption(format!("cannot parse marginal '{s}'"));
    if s == "standardnormal" {
        return Ok(Marginal::StandardNormal);
    }
    let mut parts = s.split_whitespace();
    if parts.next() != Some("normal") {
        return Err(bad());
    }
    let mean: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let sd: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    Ok(Marginal::Normal { mean, sd })
}

/// Persists the database as a directory; see the module doc for the layout.
pub fn store_database(db: &ResponseDatabase, path: &Path) -> Result<()> {
    db.validate()?;
    fs::create_dir_all(path)?;
    let mut files: Vec<(String, String)> = vec![
        ("times".into(), format_vector(&db.times)),
        ("samples".into(), format_matrix(&db.sample_set.samples)),
        ("weights".into(), format_vector(&db.sample_set.weights)),
    ];
    for (idx, c) in db.qoi_channels.iter().enumerate() {
        files.push((format!("qoi_{idx}"), format_matrix(&c.values)));
    }
    for (idx, c) in db.sensor_channels.iter().enumerate() {
        files.push((format!("sensor_{idx}"), format_matrix(&c.values)));
    }

    let mut meta = String::new();
    let p = &db.provenance;
    writeln!(meta, "schema_version={}", p.schema_version).unwrap();
    writeln!(meta, "system={}", p.system).unwrap();
    writeln!(meta, "n={}", db.n()).unwrap();
    writeln!(meta, "n_steps={}", db.n_steps()).unwrap();
    writeln!(meta, "dt={:.16e}", p.dt).unwrap();
    writeln!(meta, "tol={:.16e}", p.tol).unwrap();
    writeln!(meta, "max_iter={}", p.max_iter).unwrap();
    writeln!(meta, "halton_seed={}", p.halton_seed).unwrap();
    writeln!(meta, "probe_seed={}", p.probe_seed).unwrap();
    writeln!(meta, "n_probe={}", p.n_probe).unwrap();
    writeln!(meta, "generator_tag={}", db.sample_set.generator_tag).unwrap();
    writeln!(meta, "sample_seed={}", db.sample_set.seed).unwrap();
    writeln!(meta, "marginal_count={}", db.space.dim()).unwrap();
    for j in 0..db.space.dim() {
        writeln!(meta, "marginal_{j}={}", marginal_to_string(db.space.marginal(j))).unwrap();
    }
    writeln!(meta, "qoi_count={}", db.qoi_channels.len()).unwrap();
    for (idx, c) in db.qoi_channels.iter().enumerate() {
        writeln!(meta, "qoi_{idx}_label={}", c.spec.label()).unwrap();
    }
    writeln!(meta, "sensor_count={}", db.sensor_channels.len()).unwrap();
    for (idx, c) in db.sensor_channels.iter().enumerate() {
        writeln!(meta, "sensor_{idx}_label={}", c.spec.label()).unwrap();
    }
    for (name, body) in &files {
        writeln!(meta, "digest_{name}={}", sha256_hex(body.as_bytes())).unwrap();
    }

    for (name, body) in &files {
        fs::write(path.join(name), body)?;
    }
    fs::write(path.join("meta"), meta)?;
    Ok(())
}

struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Corruption(format!("meta key '{key}' missing")))
    }

    fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Corruption(format!("meta key '{key}' unparseable")))
    }
}

fn read_data_file(path: &Path, name: &str, meta: &Meta) -> Result<String> {
    let body = fs::read_to_string(path.join(name))?;
    let expected = meta.get(&format!("digest_{name}"))?;
    let actual = sha256_hex(body.as_bytes());
    if actual != expected {
        return Err(Error::Corruption(format!(
            "digest mismatch for '{name}': recorded {expected}, found {actual}"
        )));
    }
    Ok(body)
}

fn parse_matrix(body: &str, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let bad = |msg: String| Error::Corruption(format!("file '{name}': {msg}"));
    let lines: Vec<&str> = body.lines().collect();
    if lines.len() != rows {
        return Err(bad(format!("{} rows, expected {rows}", lines.len())));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, line) in lines.iter().enumerate() {
        let mut count = 0;
        for (j, token) in line.split_whitespace().enumerate() {
            if j >= cols {
                return Err(bad(format!("row {i} has more than {cols} columns")));
            }
            m[(i, j)] = token
                .parse()
                .map_err(|_| bad(format!("bad value at row {i}, column {j}")))?;
            count = j + 1;
        }
        if count != cols {
            return Err(bad(format!("row {i} has {count} columns, expected {cols}")));
        }
    }
    Ok(m)
}

/// Loads a database directory, verifying the schema version and all digests.
pub fn load_database(path: &Path) -> Result<ResponseDatabase> {
    let meta_body = fs::read_to_string(path.join("meta"))?;
    let entries: Vec<(String, String)> = meta_body
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Corruption(format!("malformed meta line '{l}'")))
        })
        .collect::<Result<_>>()?;
    let meta = Meta { entries };

    let version: u32 = meta.get_parsed("schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }

    let n: usize = meta.get_parsed("n")?;
    let n_steps: usize = meta.get_parsed("n_steps")?;
    let cols = n_steps + 1;
    let dim: usize = meta.get_parsed("marginal_count")?;
    let marginals: Vec<Marginal> = (0..dim)
        .map(|j| marginal_from_string(meta.get(&format!("marginal_{j}"))?))
        .collect::<Result<_>>()?;
    let space = ParameterSpace::new(marginals);

    let times_body = read_data_file(path, "times", &meta)?;
    let times: Vec<f64> = parse_matrix(&times_body, "times", cols, 1)?
        .column(0)
        .iter()
        .copied()
        .collect();
    let samples_body = read_data_file(path, "samples", &meta)?;
    let samples = parse_matrix(&samples_body, "samples", n, dim)?;
    let weights_body = read_data_file(path, "weights", &meta)?;
    let weights: Vec<f64> = parse_matrix(&weights_body, "weights", n, 1)?
        .column(0)
        .iter()
        .copied()
        .collect();

    let load_channels = |prefix: &str, count_key: &str| -> Result<Vec<Channel>> {
        let count: usize = meta.get_parsed(count_key)?;
        (0..count)
            .map(|idx| {
                let label = meta.get(&format!("{prefix}_{idx}_label"))?;
                let spec = QoISpec::parse(label)
                    .map_err(|_| Error::Corruption(format!("bad channel label '{label}'")))?;
                let name = format!("{prefix}_{idx}");
                let body = read_data_file(path, &name, &meta)?;
                Ok(Channel {
                    spec,
                    values: parse_matrix(&body, &name, n, cols)?,
                })
            })
            .collect()
    };

    let db = ResponseDatabase {
        space,
        sample_set: WeightedSampleSet::new(
            samples,
            weights,
            meta.get("generator_tag")?.to_string(),
            meta.get_parsed("sample_seed")?,
        )?,
        times,
        qoi_channels: load_channels("qoi", "qoi_count")?,
        sensor_channels: load_channels("sensor", "sensor_count")?,
        provenance: Provenance {
            system: meta.get("system")?.to_string(),
            dt: meta.get_parsed("dt")?,
            tol: meta.get_parsed("tol")?,
            max_iter: meta.get_parsed("max_iter")?,
            halton_seed: meta.get_parsed("halton_seed")?,
            probe_seed: meta.get_parsed("probe_seed")?,
            n_probe: meta.get_parsed("n_probe")?,
            schema_version: version,
        },
    };
    db.validate()?;
    Ok(db)
}

/// SHA-256 digest over the persisted directory (meta plus every file it
/// names), used by resume-correctness checks.
pub fn database_digest(path: &Path) -> Result<String> {
    let meta = fs::read(path.join("meta"))?;
    let mut hasher = Sha256::new();
    hasher.update(&meta);
    let meta_text = String::from_utf8_lossy(&meta).to_string();
    for line in meta_text.lines() {
        if let Some(rest) = line.strip_prefix("digest_") {
            if let Some((name, _)) = rest.split_once('=') {
                hasher.update(fs::read(path.join(name))?);
            }
        }
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").unwrap();
    }
    Ok(hex)
}
