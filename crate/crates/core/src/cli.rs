//! Config-driven commands behind the `gradmap` binary.
//!
//! A run is described by one TOML document ([`RunConfig`]). Every key has a
//! default, unknown keys are rejected, and `--set section.key=value`
//! overrides are applied before validation. Outputs go under `output_dir`,
//! together with a verbatim copy of the config.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::Error;
use crate::liegroups::DistanceMetric;
use crate::objective::ObjectiveConfig;
use crate::planner::{Planner, PlannerConfig};
use crate::sensor::{BeamModel, FovGeometry};
use crate::sim::{
    generate_environment, run_benchmark, run_episode_observed, summarize, write_episodes_csv, write_summary_csv,
    BenchmarkConfig, EnvConfig, EpisodeConfig, PlannerKind,
};
use crate::verify::Suite;

/// Mean clearance (meters) reported for the frontier baseline and the
/// gradient method in the original large-scale experiments.
pub const REFERENCE_CLEARANCE: (f64, f64) = (1.2, 3.9);

#[derive(Debug, ThisError)]
pub enum CliError {
    /// Bad or unreadable configuration: exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running: exit code 1.
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub num_beams: usize,
    pub fov_deg: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            num_beams: 30,
            fov_deg: 90.0,
            max_range: 10.0,
            noise_sigma: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// Weights on `(x, y, yaw)`.
    pub weights: [f64; 3],
    pub xi_max: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        Self {
            weights: [1.0, 1.0, 0.1],
            xi_max: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub gamma_c: f64,
    pub gamma_q: f64,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            gamma_c: 5e-4,
            gamma_q: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Environment seed for `explore`.
    pub env_seed: u64,
    /// Start index for `explore`.
    pub start_idx: u64,
    /// Planner for `explore`.
    pub planner: PlannerKind,
    /// Write a graymap render next to every grid snapshot.
    pub write_pgm: bool,
    pub sensor: SensorSection,
    pub metric: MetricSection,
    pub objective: ObjectiveSection,
    pub ascent: PlannerConfig,
    pub environment: EnvConfig,
    pub episode: EpisodeConfig,
    pub bench: BenchmarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            env_seed: 0,
            start_idx: 0,
            planner: PlannerKind::Gradient,
            write_pgm: true,
            sensor: SensorSection::default(),
            metric: MetricSection::default(),
            objective: ObjectiveSection::default(),
            ascent: PlannerConfig::default(),
            environment: EnvConfig::default(),
            episode: EpisodeConfig::default(),
            bench: BenchmarkConfig::default(),
        }
    }
}

/// Sets `path` (dotted) in `table`, parsing `raw` as a TOML value and falling
/// back to a plain string.
fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> CliResult<()> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut keys = path.split('.').peekable();
    let mut cur = table;
    while let Some(k) = keys.next() {
        if k.is_empty() {
            return Err(CliError::Config(format!("bad override key `{path}`")));
        }
        if keys.peek().is_none() {
            cur.insert(k.to_string(), value);
            return Ok(());
        }
        cur = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{k}` in `{path}` is not a table")))?;
    }
    Ok(())
}

impl RunConfig {
    /// Parses a config document and applies `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> CliResult<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
            apply_override(&mut table, k.trim(), v.trim())?;
        }
        let cfg: RunConfig = if overrides.is_empty() {
            toml::from_str(text)
        } else {
            toml::from_str(&toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?)
        }
        .map_err(|e: toml::de::Error| {
            let origin = if overrides.is_empty() { "" } else { " (after overrides)" };
            CliError::Config(format!("{e}{origin}"))
        })?;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads `path`, or uses the defaults when `None`. Returns the config and
    /// the raw text for echoing.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<(Self, String)> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let cfg = Self::parse(&text, overrides)?;
        Ok((cfg, text))
    }

    pub fn beam_model(&self) -> crate::Result<BeamModel> {
        let s = &self.sensor;
        BeamModel::new(s.num_beams, s.fov_deg.to_radians(), s.max_range, s.noise_sigma)
    }

    pub fn distance_metric(&self) -> crate::Result<DistanceMetric> {
        let [gx, gy, gyaw] = self.metric.weights;
        DistanceMetric::planar(gx, gy, gyaw, self.metric.xi_max)
    }

    pub fn build_planner(&self) -> crate::Result<Planner> {
        let model = self.beam_model()?;
        let metric = self.distance_metric()?;
        let objective = ObjectiveConfig::new(
            self.objective.gamma_c,
            self.objective.gamma_q,
            &FovGeometry::from_model(&model),
            &metric,
            self.ascent.horizon,
        )?;
        Planner::new(model, metric, objective, self.ascent)
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.build_planner()?;
        self.environment.geometry()?;
        if self.episode.budget_m.is_nan() || self.episode.budget_m <= 0.0 {
            return Err(Error::InvalidParameter("episode.budget_m must be positive".into()));
        }
        if self.bench.checkpoints.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter(
                "bench.checkpoints must be fractions in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn echo_config(dir: &Path, text: &str, overrides: &[String]) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), text)?;
    if !overrides.is_empty() {
        fs::write(dir.join("overrides.txt"), overrides.join("\n") + "\n")?;
    }
    Ok(())
}

/// One episode: `episode.csv`, per-iteration grid snapshots under `maps/`,
/// and for the gradient planner the ascent traces and poses under `plans/`.
pub fn cmd_explore(cfg: &RunConfig, text: &str, overrides: &[String]) -> CliResult<()> {
    let out = &cfg.output_dir;
    echo_config(out, text, overrides)?;
    let env = generate_environment(cfg.env_seed, &cfg.environment)?;
    let start = env.start_pose(cfg.start_idx, cfg.bench.start_clearance)?;
    let mut planner = cfg.build_planner()?;
    let mut io_error = None;
    let record = run_episode_observed(
        &env,
        cfg.planner,
        &mut planner,
        cfg.start_idx,
        start,
        &cfg.episode,
        |ev| {
            let write = || -> CliResult<()> {
                let stem = format!("iter_{:04}", ev.iteration);
                let mut w = create(&out.join("maps").join(format!("{stem}.grid")))?;
                ev.map.write_text(&mut w)?;
                if cfg.write_pgm {
                    ev.map
                        .write_pgm(&mut create(&out.join("maps").join(format!("{stem}.pgm")))?)?;
                }
                if let Some(plan) = ev.plan {
                    plan.write_trace_csv(&mut create(&out.join("plans").join(format!("{stem}_trace.csv")))?)?;
                    plan.trajectory
                        .write_poses(&mut create(&out.join("plans").join(format!("{stem}_poses.txt")))?)?;
                }
                Ok(())
            };
            if io_error.is_none() {
                io_error = write().err();
            }
        },
    )?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let mut w = create(&out.join("episode.csv"))?;
    record.write_csv(&mut w, true)?;
    w.flush()?;
    let mut truth = create(&out.join("truth.txt"))?;
    let g = env.geometry();
    for y in (0..g.height).rev() {
        let row: String = (0..g.width)
            .map(|x| if env.truth.cells()[y * g.width + x] { '#' } else { '.' })
            .collect();
        writeln!(truth, "{row}")?;
    }
    println!(
        "{}: {} iterations, {:.1} m, entropy {:.1} -> {:.1} bits, clearance {:.2} m, {}",
        record.planner,
        record.rows.len() - 1,
        record.distance(),
        record.rows[0].entropy_bits,
        record.rows.last().map_or(f64::NAN, |r| r.entropy_bits),
        crate::sim::clearance_stats(&record),
        record.termination
    );
    if record.collisions > 0 {
        return Err(CliError::Runtime(Error::PoseInCollision));
    }
    Ok(())
}

/// The env x start x planner matrix: per-episode CSVs under `episodes/`,
/// `episodes.csv` with one row per episode, and `summary.csv`.
pub fn cmd_bench(cfg: &RunConfig, text: &str, overrides: &[String]) -> CliResult<()> {
    let out = &cfg.output_dir;
    echo_config(out, text, overrides)?;
    let planner = cfg.build_planner()?;
    let records = run_benchmark(&cfg.environment, &cfg.episode, &planner, &cfg.bench)?;
    for r in &records {
        let name = format!("{}_env{}_start{}.csv", r.planner, r.env_seed, r.start_idx);
        let mut w = create(&out.join("episodes").join(name))?;
        r.write_csv(&mut w, true)?;
    }
    write_episodes_csv(&mut create(&out.join("episodes.csv"))?, &records)?;
    let summary = summarize(&records, &cfg.bench, cfg.episode.budget_m);
    write_summary_csv(&mut create(&out.join("summary.csv"))?, &summary)?;
    for s in &summary {
        let cps: Vec<String> = s.entropy.iter().map(|(d, h)| format!("{d:.0} m: {h:.0}")).collect();
        println!(
            "{:>8}: {} episodes, clearance {:.2} m, collisions {}, entropy [{}]",
            s.planner,
            s.episodes,
            s.mean_clearance,
            s.collisions,
            cps.join(", ")
        );
    }
    let clearance = |k: PlannerKind| summary.iter().find(|s| s.planner == k).map(|s| s.mean_clearance);
    if let (Some(g), Some(f)) = (clearance(PlannerKind::Gradient), clearance(PlannerKind::Frontier)) {
        let (rf, rg) = REFERENCE_CLEARANCE;
        println!(
            "clearance ratio gradient/frontier {:.2} (reference {rg} / {rf} = {:.2})",
            g / f,
            rg / rf
        );
    }
    Ok(())
}

/// Runs the named suites; fails if any check is out of tolerance.
pub fn cmd_verify(suites: &[Suite], seed: u64) -> CliResult<bool> {
    let mut ok = true;
    for s in suites {
        let report = s.run(seed)?;
        print!("{report}");
        ok &= report.passed();
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_document() {
        let cfg = RunConfig::parse("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.build_planner().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = RunConfig::parse("env_seed = 1\n[sensor]\nbeams = 3\n", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("beams"), "{msg}");
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = RunConfig::parse(
            "[episode]\nbudget_m = 50.0\n",
            &[
                "episode.budget_m=20".into(),
                "planner=frontier".into(),
                "sensor.num_beams=12".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.episode.budget_m, 20.0);
        assert_eq!(cfg.planner, PlannerKind::Frontier);
        assert_eq!(cfg.sensor.num_beams, 12);
        assert!(RunConfig::parse("", &["sensor=3".into(), "sensor.num_beams=1".into()]).is_err());
        assert!(RunConfig::parse("", &["nonsense".into()]).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = RunConfig::parse("[sensor]\nnum_beams = 0\n", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::parse("", &["ascent.horizon=0".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn serialized_defaults_roundtrip() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::parse(&text, &[]).unwrap(), RunConfig::default());
    }
}
