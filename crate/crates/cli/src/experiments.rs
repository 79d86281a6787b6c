//! Disorder-averaged runs. Every mode produces [`Artifacts`] in memory; the
//! caller decides where they go.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use harmneg_core::fock::{FockOracle, OracleTolerances};
use harmneg_core::lattice::boundary;
use harmneg_core::negativity::{
    ensemble_energy_brute_force, ensemble_energy_from_gamma, exact_log_negativity, h_bound, product_bound,
};
use harmneg_core::spectral::{eigencorrelator_decay, effective_area_constant, eigendecompose};
use harmneg_core::summation::compensated_sum;
use harmneg_core::{EnsembleSpec, Error as CoreError, Instance64, LatticeBox, Region};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode, OnBudget};
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "realization,volume,boundary,N,value_kind,value,trace_check,tail_bound,seconds";
pub const ENERGY_HEADER: &str = "N,closed_form,brute_force";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ValueKind {
    LogNegativity,
    ProductBound,
    HBound,
    OracleLogNegativity,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::LogNegativity => "log_negativity",
            ValueKind::ProductBound => "product_bound",
            ValueKind::HBound => "h_bound",
            ValueKind::OracleLogNegativity => "oracle_log_negativity",
        }
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub realization: u64,
    pub volume: usize,
    pub boundary: usize,
    pub n: usize,
    pub kind: ValueKind,
    pub value: f64,
    pub trace_check: Option<f64>,
    pub tail_bound: Option<f64>,
    pub seconds: f64,
}

/// Fixed 17-significant-digit scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.realization,
            self.volume,
            self.boundary,
            self.n,
            self.kind.as_str(),
            fmt_float(self.value),
            opt(self.trace_check),
            opt(self.tail_bound),
            fmt_float(self.seconds)
        )
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Everything a run emits. File names are relative to the output directory
/// and already carry the prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv_name: String,
    pub csv: String,
    pub summary: Value,
    /// Gnuplot data files `(name, contents)`.
    pub data: Vec<(String, String)>,
}

impl Artifacts {
    pub fn write(&self, dir: &Path, prefix: &str) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let put = |name: &str, text: &str| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
        };
        put(&self.csv_name, &self.csv)?;
        let summary = serde_json::to_string_pretty(&self.summary).expect("summary is valid JSON") + "\n";
        put(&format!("{prefix}_summary.json"), &summary)?;
        for (name, text) in &self.data {
            put(name, text)?;
        }
        Ok(())
    }
}

/// Worker count from `NEG_THREADS`; zero means the rayon default.
pub fn threads_from_env() -> usize {
    std::env::var("NEG_THREADS").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

/// Mean and standard error of the mean; the error is absent below two samples.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// SHA-256 over the dimensions, the bit patterns of `h` and the region.
pub fn frame_hash(h: &DMatrix<f64>, region: &Region) -> String {
    let mut hasher = Sha256::new();
    hasher.update((h.nrows() as u64).to_le_bytes());
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            hasher.update(h[(i, j)].to_bits().to_le_bytes());
        }
    }
    for m in region.members() {
        hasher.update((m as u64).to_le_bytes());
    }
    hasher.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFixture {
    pub frame_hash: String,
    pub n_cut: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
}

struct Point {
    lattice: LatticeBox,
    region: Region,
    boundary: usize,
}

pub struct Runner {
    cfg: ExperimentConfig,
    threads: usize,
}

impl Runner {
    pub fn new(cfg: ExperimentConfig) -> Self {
        Self { cfg, threads: threads_from_env() }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
    }

    /// Runs the configured mode.
    pub fn run(&self) -> CliResult<Artifacts> {
        self.run_mode(self.cfg.mode)
    }

    pub fn run_mode(&self, mode: Mode) -> CliResult<Artifacts> {
        let pool = self.pool()?;
        pool.install(|| match mode {
            Mode::Exact => self.disorder_run(true),
            Mode::BoundsOnly => self.disorder_run(false),
            Mode::Sweep => self.area_law_sweep(),
            Mode::DecayFit => self.decay_fit(),
            Mode::OracleCheck => self.oracle_check(),
        })
    }

    fn point(&self, lattice: LatticeBox) -> CliResult<Point> {
        let region = self.cfg.region_on(&lattice)?;
        let boundary = boundary(&lattice, &region)?.len();
        Ok(Point { lattice, region, boundary })
    }

    /// Rows for one realization at one point, for each ensemble in turn.
    fn realization_rows(&self, point: &Point, r: u64, ensembles: &[EnsembleSpec], exact: bool) -> CliResult<Vec<SweepRow>> {
        let timings = self.cfg.record_timings;
        let policy = self.cfg.policy()?;
        let clock = Instant::now();
        let h = self.cfg.hamiltonian(&point.lattice, r)?;
        let inst = Instance64::new(&h, &point.region)?;
        let setup = clock.elapsed().as_secs_f64();
        let mut rows = Vec::new();
        let row = |n, kind, value, trace_check, tail_bound, seconds: f64| SweepRow {
            realization: r,
            volume: point.lattice.len(),
            boundary: point.boundary,
            n,
            kind,
            value,
            trace_check,
            tail_bound,
            seconds: if timings { seconds } else { 0.0 },
        };
        for ens in ensembles {
            let top = ens.top();
            if exact {
                let clock = Instant::now();
                match exact_log_negativity(ens, &inst.spectrum, &policy) {
                    Ok(rep) => rows.push(row(
                        top,
                        ValueKind::LogNegativity,
                        rep.log_negativity,
                        Some(rep.trace_check),
                        Some(rep.tail_bound),
                        setup + clock.elapsed().as_secs_f64(),
                    )),
                    Err(e @ CoreError::EnumerationTooLarge { .. }) if self.cfg.truncation.on_budget == OnBudget::BoundsOnly => {
                        log::warn!("realization {r}, N={top}: {e}; reporting bounds only");
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let clock = Instant::now();
            let pb = product_bound(inst.spectrum.values(), top);
            rows.push(row(top, ValueKind::ProductBound, pb, None, None, setup + clock.elapsed().as_secs_f64()));
            let clock = Instant::now();
            let hb = h_bound(&inst.frame, &point.region, top)?;
            rows.push(row(top, ValueKind::HBound, hb, None, None, setup + clock.elapsed().as_secs_f64()));
        }
        Ok(rows)
    }

    /// Rows for every `(point, realization)`, merged in realization-id order.
    fn collect_rows(&self, points: &[Point], ensembles: &[EnsembleSpec], exact: bool) -> CliResult<Vec<SweepRow>> {
        let realizations = self.realizations() as u64;
        let tasks: Vec<(usize, u64)> =
            (0..points.len()).flat_map(|p| (0..realizations).map(move |r| (p, r))).collect();
        let blocks: Vec<CliResult<Vec<SweepRow>>> = tasks
            .par_iter()
            .map(|&(p, r)| self.realization_rows(&points[p], r, ensembles, exact))
            .collect();
        let mut rows = Vec::new();
        for b in blocks {
            rows.extend(b?);
        }
        Ok(rows)
    }

    fn realizations(&self) -> usize {
        // Fixed springs make every realization identical.
        if self.cfg.disorder.springs.is_some() {
            1
        } else {
            self.cfg.disorder.realizations
        }
    }

    fn disorder_run(&self, exact: bool) -> CliResult<Artifacts> {
        let point = self.point(self.cfg.lattice()?)?;
        let ensemble = self.cfg.ensemble_spec()?;
        let rows = self.collect_rows(std::slice::from_ref(&point), &[ensemble], exact)?;
        let prefix = &self.cfg.output.prefix;
        let mut data = Vec::new();
        for kind in [ValueKind::LogNegativity, ValueKind::ProductBound, ValueKind::HBound] {
            let lines: String = rows
                .iter()
                .filter(|r| r.kind == kind)
                .map(|r| format!("{} {}\n", r.realization, fmt_float(r.value)))
                .collect();
            if !lines.is_empty() {
                data.push((format!("{prefix}_{}.dat", kind.as_str()), format!("# realization {}\n{lines}", kind.as_str())));
            }
        }
        let mode = if exact { "exact" } else { "bounds-only" };
        Ok(Artifacts {
            csv_name: format!("{prefix}.csv"),
            csv: rows_to_csv(&rows),
            summary: self.summarize(mode, &rows),
            data,
        })
    }

    /// Area-law sweep over box sides times N. Per point it reports disorder
    /// means and the ratio `mean(product_bound) / ((2N+1)|∂Λ₀|)`.
    pub fn area_law_sweep(&self) -> CliResult<Artifacts> {
        let sweep = self
            .cfg
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("mode sweep needs a sweep section".into()))?;
        let points = sweep
            .sides
            .iter()
            .map(|&s| self.point(self.cfg.lattice_with_side(s)?))
            .collect::<CliResult<Vec<_>>>()?;
        let ensembles: Vec<EnsembleSpec> = sweep.n.iter().map(|&n| EnsembleSpec::pure(n)).collect();
        let rows = self.collect_rows(&points, &ensembles, sweep.exact)?;
        let summary = self.summarize("sweep", &rows);
        let prefix = &self.cfg.output.prefix;
        let mut data = Vec::new();
        for &n in &sweep.n {
            let mut text = format!("# volume ratio (N={n})\n");
            for p in summary["points"].as_array().into_iter().flatten() {
                if p["N"] == json!(n) {
                    if let Some(ratio) = p["ratio"].as_f64() {
                        let _ = writeln!(text, "{} {}", p["volume"], fmt_float(ratio));
                    }
                }
            }
            data.push((format!("{prefix}_ratio_N{n}.dat"), text));
        }
        Ok(Artifacts { csv_name: format!("{prefix}.csv"), csv: rows_to_csv(&rows), summary, data })
    }

    fn summarize(&self, mode: &str, rows: &[SweepRow]) -> Value {
        let mut groups: BTreeMap<(usize, usize, usize), BTreeMap<ValueKind, Vec<f64>>> = BTreeMap::new();
        for r in rows {
            groups.entry((r.volume, r.n, r.boundary)).or_default().entry(r.kind).or_default().push(r.value);
        }
        let mut points = Vec::new();
        for ((volume, n, boundary), kinds) in &groups {
            let mut mean = Map::new();
            let mut stderr = Map::new();
            let mut count = Map::new();
            for (kind, xs) in kinds {
                let (m, se) = mean_stderr(xs);
                mean.insert(kind.as_str().into(), json!(m));
                stderr.insert(kind.as_str().into(), json!(se));
                count.insert(kind.as_str().into(), json!(xs.len()));
            }
            let scale = ((2 * n + 1) * boundary) as f64;
            let ratio = |kind: ValueKind| -> Value {
                match (kinds.get(&kind), *boundary > 0) {
                    (Some(xs), true) => json!(mean_stderr(xs).0 / scale),
                    _ => Value::Null,
                }
            };
            points.push(json!({
                "volume": volume,
                "boundary": boundary,
                "N": n,
                "mean": mean,
                "stderr": stderr,
                "count": count,
                "ratio": ratio(ValueKind::ProductBound),
                "ratio_log_negativity": ratio(ValueKind::LogNegativity),
            }));
        }
        let mut summary = json!({
            "mode": mode,
            "realizations": self.realizations(),
            "seed": self.cfg.disorder.seed,
            "lambda": self.cfg.disorder.lambda,
            "k_max": self.cfg.disorder.k_max,
        });
        if points.len() == 1 {
            // Single-point runs also expose their means at the top level.
            if let Some(m) = points[0]["mean"].as_object() {
                for (k, v) in m {
                    summary[k] = v.clone();
                }
            }
        }
        let ratios: Vec<f64> = points.iter().filter_map(|p| p["ratio"].as_f64()).collect();
        if !ratios.is_empty() {
            let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
            summary["ratio_spread"] = json!((max - min) / max);
        }
        summary["points"] = Value::Array(points);
        summary
    }

    /// Ensemble energies `N = 0..=top` on realization 0: closed form next to
    /// the sector average.
    pub fn energy_table(&self) -> CliResult<Artifacts> {
        let lattice = self.cfg.lattice()?;
        let top = self.cfg.ensemble_spec()?.top();
        let h = self.cfg.hamiltonian(&lattice, 0)?;
        let gamma: Vec<f64> = eigendecompose(&h)?.gamma().iter().copied().collect();
        let mut csv = format!("{ENERGY_HEADER}\n");
        let mut dat = String::from("# N closed_form\n");
        let mut worst: f64 = 0.0;
        let mut increasing = true;
        let mut last = f64::NEG_INFINITY;
        for n in 0..=top {
            let closed = ensemble_energy_from_gamma(&gamma, n);
            let brute = ensemble_energy_brute_force(&gamma, n)?;
            worst = worst.max((closed - brute).abs() / closed.abs().max(1.0));
            increasing &= closed > last;
            last = closed;
            let _ = writeln!(csv, "{n},{},{}", fmt_float(closed), fmt_float(brute));
            let _ = writeln!(dat, "{n} {}", fmt_float(closed));
        }
        let prefix = &self.cfg.output.prefix;
        Ok(Artifacts {
            csv_name: format!("{prefix}_energy.csv"),
            csv,
            summary: json!({
                "mode": "energy",
                "volume": lattice.len(),
                "max_relative_difference": worst,
                "strictly_increasing": increasing,
            }),
            data: vec![(format!("{prefix}_energy.dat"), dat)],
        })
    }

    /// Disorder-averaged decay of `|h^{-1/2}(x,y)|` and the resulting area-law
    /// constant.
    pub fn decay_fit(&self) -> CliResult<Artifacts> {
        let lattice = self.cfg.lattice()?;
        let spec = self.cfg.disorder_spec()?;
        let fit = eigencorrelator_decay(&lattice, &spec, self.cfg.disorder.realizations)?;
        let constant = effective_area_constant(&fit, lattice.dim(), spec.lambda, spec.k_max).ok();
        let mut csv = String::from("distance,mean,stderr,samples\n");
        let mut dat = String::from("# distance mean\n");
        for &(dist, mean, se, samples) in &fit.profile {
            let _ = writeln!(csv, "{dist},{},{},{samples}", fmt_float(mean), fmt_float(se));
            let _ = writeln!(dat, "{dist} {}", fmt_float(mean));
        }
        let prefix = &self.cfg.output.prefix;
        Ok(Artifacts {
            csv_name: format!("{prefix}_decay.csv"),
            csv,
            summary: json!({
                "mode": "decay-fit",
                "realizations": fit.realizations,
                "c": fit.c,
                "mu": fit.mu,
                "residual": fit.residual,
                "mean_rel_stderr": fit.mean_rel_stderr,
                "degenerate": fit.degenerate,
                "fit_max_distance": fit.fit_max_distance,
                "area_constant": constant,
            }),
            data: vec![(format!("{prefix}_decay.dat"), dat)],
        })
    }

    /// Analytic negativity against the dense Fock oracle for `N = 0..=top` on
    /// realization 0. Frozen fixtures are used when their hash matches.
    pub fn oracle_check(&self) -> CliResult<Artifacts> {
        let point = self.point(self.cfg.lattice()?)?;
        let top = self.cfg.ensemble_spec()?.top();
        let oracle_cfg = &self.cfg.oracle;
        let h = self.cfg.hamiltonian(&point.lattice, 0)?;
        let hash = frame_hash(&h, &point.region);
        let mut fixtures: Vec<OracleFixture> = match &oracle_cfg.fixtures {
            Some(path) if path.exists() => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("fixture file: {e}")))?
            }
            _ => Vec::new(),
        };
        let inst = Instance64::new(&h, &point.region)?;
        let policy = self.cfg.policy()?;
        let mut oracle: Option<FockOracle> = None;
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        let mut fresh = false;
        for n in 0..=top {
            let analytic = exact_log_negativity(&EnsembleSpec::pure(n), &inst.spectrum, &policy)?;
            let frozen = fixtures
                .iter()
                .find(|f| f.frame_hash == hash && f.n_cut == oracle_cfg.n_cut && f.n == n)
                .map(|f| f.value);
            let value = match frozen {
                Some(v) => v,
                None => {
                    if oracle.is_none() {
                        oracle = Some(FockOracle::new(&h, &point.region, oracle_cfg.n_cut, OracleTolerances::default())?);
                    }
                    let v = oracle.as_ref().expect("oracle built above").log_negativity(n)?;
                    fixtures.push(OracleFixture { frame_hash: hash.clone(), n_cut: oracle_cfg.n_cut, n, value: v });
                    fresh = true;
                    v
                }
            };
            let base = SweepRow {
                realization: 0,
                volume: point.lattice.len(),
                boundary: point.boundary,
                n,
                kind: ValueKind::LogNegativity,
                value: analytic.log_negativity,
                trace_check: Some(analytic.trace_check),
                tail_bound: Some(analytic.tail_bound),
                seconds: 0.0,
            };
            rows.push(SweepRow { kind: ValueKind::OracleLogNegativity, value, trace_check: None, tail_bound: None, ..base.clone() });
            rows.push(base);
            let diff = (analytic.log_negativity - value).abs();
            checks.push(json!({
                "N": n,
                "analytic": analytic.log_negativity,
                "oracle": value,
                "difference": diff,
                "frozen": frozen.is_some(),
            }));
            if !(diff <= oracle_cfg.tolerance) {
                return Err(CliError::OracleMismatch {
                    n,
                    analytic: analytic.log_negativity,
                    oracle: value,
                    tolerance: oracle_cfg.tolerance,
                });
            }
        }
        if let (true, Some(path)) = (fresh, &oracle_cfg.fixtures) {
            let text = serde_json::to_string_pretty(&fixtures).expect("fixtures serialize") + "\n";
            std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
        }
        let prefix = &self.cfg.output.prefix;
        Ok(Artifacts {
            csv_name: format!("{prefix}_oracle.csv"),
            csv: rows_to_csv(&rows),
            summary: json!({
                "mode": "oracle-check",
                "frame_hash": hash,
                "n_cut": oracle_cfg.n_cut,
                "tolerance": oracle_cfg.tolerance,
                "checks": checks,
            }),
            data: Vec::new(),
        })
    }
}
