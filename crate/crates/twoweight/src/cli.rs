//! Batch driver: one JSON experiment config in, deterministic CSV / JSON reports out.
//!
//! Every output row carries the schema version and the window / budget stamp it was
//! computed under. Column meanings are documented in `schema/v1.md`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cantor::{self, CantorError, SigmaVariant};
use crate::conditions::{
    self, a2_constant, energy_hypothesis_dyadic, flag_divergence, hybrid_constant, A2Half, ConditionError, ConditionName,
    ConditionReport, SearchStamp, Witness,
};
use crate::corona::{
    bilinear_decompose, build_stopping_forest, calibrate_threshold, carleson_sums, corona_assign, worst_packing_ratio,
    CarlesonKind, CoronaError, InteractionTable,
};
use crate::dyadic::{estimate_bad_probability, DyadicError, DyadicInterval, GridParam, Window};
use crate::functionals::{FunctionalError, PartitionSpec};
use crate::haar::{expectation, HaarError, StepFunction};
use crate::measure::{Interval, Measure, MeasureError};
use crate::transform::{testing_constant, Direction, TransformError, TruncationProfile};

pub const SCHEMA: &str = "twoweight/v1";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit status: 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

macro_rules! numerical {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numerical(e.to_string())
            }
        }
    )*};
}

numerical!(MeasureError, DyadicError, HaarError, TransformError, FunctionalError, ConditionError, CantorError);

impl From<CoronaError> for CliError {
    fn from(e: CoronaError) -> Self {
        match e {
            CoronaError::NotMeanZero { .. }
            | CoronaError::NotWindowMeasurable(_)
            | CoronaError::WindowMismatch
            | CoronaError::InvalidParameter(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Where the measure pair comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum PairSource {
    /// `ω^(m)` with the gap-supported `σ^(m)` of the chosen variant.
    Cantor {
        depth: u32,
        #[serde(default = "default_variant")]
        variant: SigmaVariant,
        #[serde(default)]
        surrogate_depth: Option<u32>,
    },
    /// Two measure JSON files.
    Files { omega: PathBuf, sigma: PathBuf },
    Inline { omega: Measure, sigma: Measure },
}

fn default_variant() -> SigmaVariant {
    SigmaVariant::Zero
}

impl Default for PairSource {
    fn default() -> Self {
        PairSource::Cantor { depth: 6, variant: SigmaVariant::Zero, surrogate_depth: None }
    }
}

/// A window of a dyadic grid; the grid is unshifted unless `seed` is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub n_min: i32,
    pub n_max: i32,
    pub root_scale: i32,
    pub root_index: i64,
    pub depth: u32,
    pub seed: Option<u64>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { n_min: -16, n_max: 4, root_scale: 0, root_index: 0, depth: 6, seed: None }
    }
}

impl WindowConfig {
    fn with_depth(&self, depth: u32) -> Self {
        WindowConfig { depth, ..*self }
    }

    pub fn build(&self) -> Result<Window, CliError> {
        let grid = match self.seed {
            Some(s) => GridParam::random(self.n_min, self.n_max, s),
            None => GridParam::standard(self.n_min, self.n_max),
        }
        .map_err(|e| config(format!("window: {e}")))?;
        Window::new(grid, DyadicInterval { scale: self.root_scale, index: self.root_index }, self.depth)
            .map_err(|e| config(format!("window: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySource {
    /// Window nodes down to the given depth.
    Dyadic,
    /// Triadic subdivisions of the window root down to the given depth.
    Triadic,
    /// A JSON list of `[left, right]` intervals.
    File { path: PathBuf },
    Inline { intervals: Vec<Interval> },
}

impl Default for FamilySource {
    fn default() -> Self {
        FamilySource::Dyadic
    }
}

impl FamilySource {
    fn label(&self) -> &'static str {
        match self {
            FamilySource::Dyadic => "dyadic",
            FamilySource::Triadic => "triadic",
            FamilySource::File { .. } => "file",
            FamilySource::Inline { .. } => "inline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionInput {
    Path(PathBuf),
    Inline(StepFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    /// Function paired against `σ`; random leaf values from the seed when absent.
    pub f: Option<FunctionInput>,
    /// Function paired against `ω`.
    pub phi: Option<FunctionInput>,
    /// Subtract the mean over the window root before decomposing.
    pub center: bool,
    /// Window of the `ω` side; defaults to the main window with the seed advanced by one.
    pub omega_window: Option<WindowConfig>,
    /// Scale applied to the calibrated threshold when `threshold` is unset.
    pub threshold_scale: f64,
    /// Generation gap used by the Carleson tables.
    pub carleson_t: u32,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig { f: None, phi: None, center: true, omega_window: None, threshold_scale: 0.5, carleson_t: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CantorConfig {
    pub depth: u32,
    pub variant: SigmaVariant,
    /// Depth used to locate zero and level points; `depth + 6` when absent.
    pub surrogate_depth: Option<u32>,
    /// Section letters `a`..`h`, plus `x` for the blow-up, maximal and displacement tables.
    pub reports: String,
    /// Offset of the blow-up evaluation points in units of `3^-k`.
    pub c: f64,
}

impl Default for CantorConfig {
    fn default() -> Self {
        CantorConfig { depth: 8, variant: SigmaVariant::Zero, surrogate_depth: None, reports: "abcdefghx".into(), c: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoodbadConfig {
    pub r: Vec<u32>,
    pub trials: u64,
    /// The fixed interval `J` of the unshifted grid.
    pub scale: i32,
    pub index: i64,
}

impl Default for GoodbadConfig {
    fn default() -> Self {
        GoodbadConfig { r: vec![4, 6, 8], trials: 10_000, scale: -12, index: 1365 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pair: PairSource,
    pub window: WindowConfig,
    pub family: FamilySource,
    pub r: u32,
    pub eps: f64,
    pub gamma: f64,
    /// Stopping threshold `F`; calibrated from the data when absent.
    pub threshold: Option<f64>,
    /// Recursion budget of the energy functional.
    pub budget: u32,
    /// Depths swept by `conditions` and `testing`; the window depth when empty.
    pub depths: Vec<u32>,
    pub seeds: Vec<u64>,
    /// Smooth truncation width of the kernel, untruncated when absent.
    pub truncation: Option<f64>,
    /// Comparability constant of the weak-boundedness pairs.
    pub comparability: f64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Output directory; reports go to stdout when absent.
    pub output: Option<PathBuf>,
    pub decompose: DecomposeConfig,
    pub cantor: CantorConfig,
    pub goodbad: GoodbadConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pair: PairSource::default(),
            window: WindowConfig::default(),
            family: FamilySource::default(),
            r: 4,
            eps: 0.5,
            gamma: 1.0,
            threshold: None,
            budget: 4,
            depths: Vec::new(),
            seeds: vec![0],
            truncation: None,
            comparability: 2.0,
            threads: 0,
            output: None,
            decompose: DecomposeConfig::default(),
            cantor: CantorConfig::default(),
            goodbad: GoodbadConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&read(path)?)
    }

    /// Checks every numeric parameter against its admissible range.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(config(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.r < 1 {
            return Err(config("r must be at least 1"));
        }
        if self.budget < 1 {
            return Err(config("budget must be at least 1"));
        }
        if let Some(f) = self.threshold {
            if !(f > 0.0) || !f.is_finite() {
                return Err(config(format!("threshold must be positive, got {f}")));
            }
        }
        if let Some(t) = self.truncation {
            if !(t > 0.0) {
                return Err(config(format!("truncation must be positive, got {t}")));
            }
        }
        if self.comparability < 1.0 {
            return Err(config("comparability must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config("at least one seed is required"));
        }
        for d in self.sweep_depths() {
            self.window.with_depth(d).build()?;
        }
        if let Some(w) = &self.decompose.omega_window {
            w.build()?;
        }
        if !(self.decompose.threshold_scale > 0.0) {
            return Err(config("threshold_scale must be positive"));
        }
        if let PairSource::Cantor { depth, surrogate_depth, .. } = &self.pair {
            if !(1..=16).contains(depth) {
                return Err(config(format!("cantor pair depth must lie in 1..=16, got {depth}")));
            }
            if surrogate_depth.is_some_and(|s| s < *depth || s > 30) {
                return Err(config("surrogate depth must lie between the pair depth and 30"));
            }
        }
        let c = &self.cantor;
        if !(4..=16).contains(&c.depth) {
            return Err(config(format!("cantor depth must lie in 4..=16, got {}", c.depth)));
        }
        if c.surrogate_depth.is_some_and(|s| s < c.depth || s > 28) {
            return Err(config("cantor surrogate depth must lie between the depth and 28"));
        }
        if let Some(bad) = c.reports.chars().find(|ch| !"abcdefghx".contains(*ch)) {
            return Err(config(format!("unknown cantor report selector {bad:?}")));
        }
        if !(c.c > 0.0 && c.c <= 0.5) {
            return Err(config(format!("c must lie in (0, 1/2], got {}", c.c)));
        }
        let g = &self.goodbad;
        if g.trials < 100 {
            return Err(config("goodbad needs at least 100 trials"));
        }
        if g.r.is_empty() || g.r.contains(&0) {
            return Err(config("goodbad r values must be positive"));
        }
        if g.scale < self.window.n_min || g.scale > self.window.n_max {
            return Err(config("goodbad interval scale lies outside the window"));
        }
        Ok(())
    }

    fn sweep_depths(&self) -> Vec<u32> {
        if self.depths.is_empty() {
            vec![self.window.depth]
        } else {
            self.depths.clone()
        }
    }

    fn trunc(&self) -> Result<Option<TruncationProfile>, CliError> {
        self.truncation.map(TruncationProfile::new).transpose().map_err(|e| config(e.to_string()))
    }

    fn stamp(&self, window: &WindowConfig) -> Value {
        json!({
            "schema": SCHEMA,
            "window": window,
            "budget": self.budget,
            "r": self.r,
            "eps": self.eps,
            "gamma": self.gamma,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Conditions,
    Decompose,
    Cantor,
    Goodbad,
    Testing,
}

/// A named report and its contents.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| config(format!("{}: {e}", path.display())))
}

/// Loads the measure pair `(ω, σ)`.
pub fn load_pair(source: &PairSource) -> Result<(Measure, Measure), CliError> {
    match source {
        PairSource::Cantor { depth, variant, surrogate_depth } => {
            let omega = cantor::build_omega(*depth)?;
            let sigma = cantor::build_sigma(*depth, *variant, surrogate_depth.unwrap_or(depth + 6))?.measure;
            Ok((omega, sigma))
        }
        PairSource::Files { omega, sigma } => Ok((read_json(omega)?, read_json(sigma)?)),
        PairSource::Inline { omega, sigma } => Ok((omega.clone(), sigma.clone())),
    }
}

fn family(source: &FamilySource, window: &Window) -> Result<Vec<Interval>, CliError> {
    match source {
        FamilySource::Dyadic => Ok(window.nodes().into_iter().map(|d| window.realize(d)).collect()),
        FamilySource::Triadic => {
            let root = window.realize(window.root);
            let mut out = Vec::new();
            for k in 0..=window.depth {
                let n = 3u64.pow(k);
                for j in 0..n {
                    let l = root.left() + root.length() * j as f64 / n as f64;
                    let r = root.left() + root.length() * (j + 1) as f64 / n as f64;
                    out.push(Interval::new(l, r)?);
                }
            }
            Ok(out)
        }
        FamilySource::File { path } => read_json(path),
        FamilySource::Inline { intervals } => Ok(intervals.clone()),
    }
}

/// Neighbouring intervals of equal length, the candidate pairs of the weak-boundedness test.
fn adjacent_pairs(family: &[Interval]) -> Vec<(Interval, Interval)> {
    let mut sorted = family.to_vec();
    sorted.sort_by(|a, b| a.length().total_cmp(&b.length()).then(a.left().total_cmp(&b.left())));
    sorted
        .windows(2)
        .filter(|w| (w[0].length() - w[1].length()).abs() <= 1e-12 * w[0].length() && w[0].distance(&w[1]) <= 1e-12)
        .map(|w| (w[0], w[1]))
        .collect()
}

/// Zero report for a constant whose normalising mass vanishes.
fn zero_report(name: ConditionName, search: SearchStamp) -> ConditionReport {
    ConditionReport {
        name,
        value: 0.0,
        witness: Witness::None,
        search,
        truncation_note: "normalising mass is zero".into(),
        divergent: false,
    }
}

fn or_zero(
    r: Result<ConditionReport, ConditionError>,
    name: ConditionName,
    search: SearchStamp,
) -> Result<ConditionReport, CliError> {
    match r {
        Ok(rep) => Ok(rep),
        Err(ConditionError::ZeroNormalizer(_)) | Err(ConditionError::EmptyFamily) => Ok(zero_report(name, search)),
        Err(e) => Err(e.into()),
    }
}

fn conditions_at_depth(
    cfg: &ExperimentConfig,
    omega: &Measure,
    sigma: &Measure,
    depth: u32,
) -> Result<Vec<ConditionReport>, CliError> {
    let window = cfg.window.with_depth(depth).build()?;
    let fam = family(&cfg.family, &window)?;
    let root = window.realize(window.root);
    let trunc = cfg.trunc()?;
    let partitions: Vec<PartitionSpec> = (1..=depth).map(|l| PartitionSpec::uniform(root, l)).collect();
    let fam_stamp = SearchStamp { family_size: fam.len(), depth: Some(depth), budget: None };
    let part_stamp = SearchStamp { family_size: partitions.len(), depth: Some(depth), budget: None };
    let eh_stamp = SearchStamp { family_size: 0, depth: Some(depth), budget: Some(cfg.budget) };
    let (eps, gamma) = (cfg.eps, cfg.gamma);
    let mut out = vec![
        or_zero(a2_constant(omega, sigma, &fam, A2Half::Both), ConditionName::A2, fam_stamp)?,
        or_zero(a2_constant(omega, sigma, &fam, A2Half::Forward), ConditionName::A2HalfForward, fam_stamp)?,
        or_zero(a2_constant(omega, sigma, &fam, A2Half::Dual), ConditionName::A2HalfDual, fam_stamp)?,
        or_zero(conditions::testing_report(omega, sigma, &fam, Direction::Forward, trunc), ConditionName::Testing, fam_stamp)?,
        or_zero(conditions::testing_report(omega, sigma, &fam, Direction::Dual, trunc), ConditionName::TestingDual, fam_stamp)?,
        conditions::weak_boundedness_report(omega, sigma, &adjacent_pairs(&fam), trunc, cfg.comparability)?,
    ];
    for exponent in [eps, 2.0] {
        for dual in [false, true] {
            let name = if dual { ConditionName::HybridDual(exponent) } else { ConditionName::Hybrid(exponent) };
            out.push(or_zero(hybrid_constant(omega, sigma, &root, exponent, &partitions, dual), name, part_stamp)?);
        }
    }
    for dual in [false, true] {
        let name = if dual {
            ConditionName::EnergyHypothesisDual { gamma, eps }
        } else {
            ConditionName::EnergyHypothesis { gamma, eps }
        };
        let r = energy_hypothesis_dyadic(omega, sigma, &root, gamma, eps, depth, cfg.budget, dual);
        out.push(or_zero(r, name, eh_stamp)?);
    }
    Ok(out)
}

fn run_conditions(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let (omega, sigma) = load_pair(&cfg.pair)?;
    let depths = cfg.sweep_depths();
    let per_depth: Vec<Vec<ConditionReport>> =
        depths.iter().map(|&d| conditions_at_depth(cfg, &omega, &sigma, d)).collect::<Result<_, _>>()?;
    let mut warnings = Vec::new();
    // divergence is judged per condition across the depth sweep
    let n = per_depth.first().map_or(0, Vec::len);
    let mut columns: Vec<Vec<ConditionReport>> = (0..n).map(|i| per_depth.iter().map(|r| r[i].clone()).collect()).collect();
    for col in &mut columns {
        if flag_divergence(col) {
            warnings.push(format!("{} grows across the depth sweep", col[0].name));
        }
    }
    let mut lines = String::new();
    for (k, &d) in depths.iter().enumerate() {
        for col in &columns {
            let rep = &col[k];
            let mut row = Map::new();
            row.insert("stamp".into(), cfg.stamp(&cfg.window.with_depth(d)));
            row.insert("family".into(), json!(cfg.family.label()));
            row.insert("report".into(), serde_json::to_value(rep).expect("reports serialize"));
            row.insert("warning".into(), if rep.divergent { json!("divergent") } else { Value::Null });
            lines.push_str(&Value::Object(row).to_string());
            lines.push('\n');
        }
    }
    Ok(RunOutput { files: vec![OutputFile { name: "conditions.jsonl".into(), contents: lines }], warnings })
}

fn centered(f: StepFunction, measure: &Measure, root: &Interval, center: bool) -> Result<StepFunction, CliError> {
    if !center {
        return Ok(f);
    }
    let m = expectation(&f, root, measure)?;
    let shift = StepFunction::constant(root, m);
    Ok(f.add_scaled(&shift, -1.0))
}

fn input_function(
    input: &Option<FunctionInput>,
    window: &Window,
    rng: &mut ChaCha8Rng,
) -> Result<StepFunction, CliError> {
    match input {
        Some(FunctionInput::Path(p)) => read_json(p),
        Some(FunctionInput::Inline(f)) => Ok(f.clone()),
        None => {
            let leaves = (0..1usize << window.depth).map(|_| rng.random_range(-1.0..1.0)).collect();
            Ok(StepFunction::from_leaves(window, leaves)?)
        }
    }
}

fn run_decompose(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let (omega, sigma) = load_pair(&cfg.pair)?;
    let sw_cfg = cfg.window;
    let ow_cfg = cfg.decompose.omega_window.unwrap_or(WindowConfig { seed: sw_cfg.seed.map(|s| s + 1), ..sw_cfg });
    let (sw, ow) = (sw_cfg.build()?, ow_cfg.build()?);
    let table = InteractionTable::new(&sigma, &omega, &sw, &ow, cfg.trunc()?)?;
    let threshold = match cfg.threshold {
        Some(f) => f,
        None => cfg.decompose.threshold_scale * calibrate_threshold(&sigma, &omega, &sw, cfg.gamma, cfg.eps, cfg.budget)?,
    };
    let forest = build_stopping_forest(&sigma, &omega, &sw, cfg.gamma, cfg.eps, threshold, cfg.budget)?;
    let assignment = corona_assign(&forest, &ow, cfg.r);
    let carleson: Vec<Value> = [CarlesonKind::Alpha, CarlesonKind::Beta, CarlesonKind::Gamma]
        .into_iter()
        .map(|k| carleson_sums(&table, &forest, &assignment, k, cfg.decompose.carleson_t))
        .map(|t| t.map(|t| serde_json::to_value(t).expect("tables serialize")))
        .collect::<Result<_, _>>()?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = input_function(&cfg.decompose.f, &sw, &mut rng)?;
        let phi = input_function(&cfg.decompose.phi, &ow, &mut rng)?;
        let f = centered(f, &sigma, &sw.realize(sw.root), cfg.decompose.center)?;
        let phi = centered(phi, &omega, &ow.realize(ow.root), cfg.decompose.center)?;
        let rep = bilinear_decompose(&table, &f, &phi, &forest, cfg.r, cfg.eps)?;
        runs.push(json!({ "seed": seed, "decomposition": rep }));
    }
    let report = json!({
        "stamp": cfg.stamp(&sw_cfg),
        "omega_window": ow_cfg,
        "forest": {
            "threshold": threshold,
            "nodes": forest.len(),
            "worst_packing_ratio": worst_packing_ratio(&forest),
            "intervals": forest.nodes(),
        },
        "carleson": carleson,
        "runs": runs,
    });
    let contents = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok(RunOutput { files: vec![OutputFile { name: "decompose.json".into(), contents }], warnings: Vec::new() })
}

/// Renders rows as CSV, each prefixed by the stamp columns. Rows must serialize to flat
/// objects; field order is preserved.
pub fn csv_table<T: Serialize>(stamp: &[(&str, Value)], rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let objects: Vec<Map<String, Value>> = rows
        .iter()
        .map(|r| match serde_json::to_value(r).expect("rows serialize") {
            Value::Object(m) => m,
            other => Map::from_iter([("value".to_string(), other)]),
        })
        .collect();
    let mut header: Vec<String> = stamp.iter().map(|(k, _)| k.to_string()).collect();
    if let Some(first) = objects.first() {
        header.extend(first.keys().cloned());
    }
    w.write_record(&header).expect("in-memory write");
    let cell = |v: &Value| match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    for obj in &objects {
        let mut rec: Vec<String> = stamp.iter().map(|(_, v)| cell(v)).collect();
        rec.extend(obj.values().map(cell));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn run_cantor(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let c = &cfg.cantor;
    let m = c.depth;
    let surrogate = c.surrogate_depth.unwrap_or(m + 6);
    let has = |ch: char| c.reports.contains(ch);
    let stamp = [
        ("schema", json!(SCHEMA)),
        ("depth", json!(m)),
        ("surrogate_depth", json!(surrogate)),
        ("variant", serde_json::to_value(c.variant).expect("variant serializes")),
    ];
    let omega = cantor::build_omega(m)?;
    let build = cantor::build_sigma(m, c.variant, surrogate)?;
    let sigma = &build.measure;
    let mut files = Vec::new();
    let mut push = |name: &str, contents: String| files.push(OutputFile { name: format!("cantor_{name}.csv"), contents });
    if has('a') {
        push("a_masses", csv_table(&stamp, &cantor::mass_rows(m, sigma)));
    }
    if has('b') {
        push("b_poisson", csv_table(&stamp, &cantor::poisson_rows(&omega, m - 2)));
    }
    if has('c') {
        push("c_pivotal", csv_table(&stamp, &cantor::pivotal_rows(&omega, sigma, m)));
    }
    if has('d') {
        push("d_divergence", csv_table(&stamp, &cantor::divergence_rows(m, surrogate)?));
    }
    if has('e') {
        let e = cantor::epsilon_zero();
        let row = cantor::EpsilonZero { value: e, identity_residual: ((2.0f64 / 9.0).powf(e / 2.0) - 0.5).abs() };
        push("e_epsilon_zero", csv_table(&stamp, &[row]));
    }
    if has('f') {
        push("f_dual_hybrid", csv_table(&stamp, &cantor::dual_hybrid_rows(&omega, sigma, m, 1.0)));
    }
    if has('g') {
        let rows: Vec<Value> = (0..m)
            .map(|k| {
                let s = cantor::atom_mass(k);
                let dev = cantor::generation(k)
                    .iter()
                    .map(|t| (s * omega.mass(&t.interval(), crate::measure::Closure::CLOSED) / t.length().powi(2) - 1.0).abs())
                    .fold(0.0, f64::max);
                json!({ "level": k, "max_deviation": dev })
            })
            .collect();
        push("g_simple_a2", csv_table(&stamp, &rows));
    }
    if has('h') {
        let mut rows = Vec::new();
        for l in 0..=(m - 2).min(6) {
            let fam: Vec<Interval> = cantor::generation(l).iter().map(|t| t.interval()).collect();
            let fw = testing_constant(&omega, sigma, &fam, Direction::Forward, None)?;
            let du = testing_constant(&omega, sigma, &fam, Direction::Dual, None)?;
            rows.push(json!({ "level": l, "forward": fw.constant, "dual": du.constant }));
        }
        push("h_testing", csv_table(&stamp, &rows));
    }
    if has('x') {
        let blow = cantor::blowup_rate_check(m, c.c)?;
        let bstamp = [stamp[0].clone(), stamp[1].clone(), ("c", json!(c.c))];
        push("x_blowup", csv_table(&bstamp, &blow.rows));
        let maxi: Vec<cantor::MaximalCheck> =
            (0..=m - 2).map(|l| cantor::maximal_function_check(m, l, 0)).collect::<Result<_, _>>()?;
        push("x_maximal", csv_table(&stamp[..2], &maxi));
        push("x_points", csv_table(&stamp, &build.points));
    }
    Ok(RunOutput { files, warnings: Vec::new() })
}

#[derive(Serialize)]
struct GoodbadRow {
    r: u32,
    eps: f64,
    trials: u64,
    seed: u64,
    n_min: i32,
    n_max: i32,
    scale: i32,
    index: i64,
    estimate: f64,
    stderr: f64,
    bad: u64,
}

fn run_goodbad(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let g = &cfg.goodbad;
    let w = &cfg.window;
    let grid = GridParam::standard(w.n_min, w.n_max).map_err(|e| config(e.to_string()))?;
    let j = DyadicInterval { scale: g.scale, index: g.index };
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        for &r in &g.r {
            let est = estimate_bad_probability(j, &grid, (w.n_min, w.n_max), r, cfg.eps, g.trials, seed)?;
            rows.push(GoodbadRow {
                r,
                eps: cfg.eps,
                trials: g.trials,
                seed,
                n_min: w.n_min,
                n_max: w.n_max,
                scale: g.scale,
                index: g.index,
                estimate: est.estimate,
                stderr: est.stderr,
                bad: est.bad,
            });
        }
    }
    let contents = csv_table(&[("schema", json!(SCHEMA))], &rows);
    Ok(RunOutput { files: vec![OutputFile { name: "goodbad.csv".into(), contents }], warnings: Vec::new() })
}

#[derive(Serialize)]
struct TestingRow {
    depth: u32,
    family: &'static str,
    family_size: usize,
    truncation: Option<f64>,
    direction: Direction,
    ratio: f64,
    constant: f64,
    witness_left: Option<f64>,
    witness_right: Option<f64>,
}

fn run_testing(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let (omega, sigma) = load_pair(&cfg.pair)?;
    let trunc = cfg.trunc()?;
    let mut rows = Vec::new();
    for d in cfg.sweep_depths() {
        let window = cfg.window.with_depth(d).build()?;
        let fam = family(&cfg.family, &window)?;
        for direction in [Direction::Forward, Direction::Dual] {
            let t = testing_constant(&omega, &sigma, &fam, direction, trunc)?;
            rows.push(TestingRow {
                depth: d,
                family: cfg.family.label(),
                family_size: fam.len(),
                truncation: cfg.truncation,
                direction,
                ratio: t.constant,
                constant: t.constant.sqrt(),
                witness_left: t.witness.map(|i| i.left()),
                witness_right: t.witness.map(|i| i.right()),
            });
        }
    }
    let w = &cfg.window;
    let stamp = [
        ("schema", json!(SCHEMA)),
        ("n_min", json!(w.n_min)),
        ("n_max", json!(w.n_max)),
        ("root_scale", json!(w.root_scale)),
        ("root_index", json!(w.root_index)),
        ("seed", json!(w.seed)),
    ];
    let contents = csv_table(&stamp, &rows);
    Ok(RunOutput { files: vec![OutputFile { name: "testing.csv".into(), contents }], warnings: Vec::new() })
}

/// Validates the config and runs one subcommand inside a worker pool of the configured size.
pub fn run(cfg: &ExperimentConfig, sub: Subcommand) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| config(format!("worker pool: {e}")))?;
    pool.install(|| match sub {
        Subcommand::Conditions => run_conditions(cfg),
        Subcommand::Decompose => run_decompose(cfg),
        Subcommand::Cantor => run_cantor(cfg),
        Subcommand::Goodbad => run_goodbad(cfg),
        Subcommand::Testing => run_testing(cfg),
    })
}

/// Writes each report into `dir`, or to `stdout` under a `# name` header when `dir` is absent.
pub fn write_output(out: &RunOutput, dir: Option<&Path>, stdout: &mut impl std::io::Write) -> Result<(), CliError> {
    match dir {
        Some(dir) => {
            let io = |e: std::io::Error| CliError::Io { path: dir.to_path_buf(), message: e.to_string() };
            fs::create_dir_all(dir).map_err(io)?;
            for f in &out.files {
                fs::write(dir.join(&f.name), &f.contents).map_err(io)?;
            }
        }
        None => {
            let io = |e: std::io::Error| CliError::Io { path: PathBuf::from("<stdout>"), message: e.to_string() };
            for f in &out.files {
                if out.files.len() > 1 {
                    writeln!(stdout, "# {}", f.name).map_err(io)?;
                }
                stdout.write_all(f.contents.as_bytes()).map_err(io)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        let bad = ExperimentConfig { eps: 1.0, ..Default::default() };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
        assert!(ExperimentConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn empty_pair_gives_zero_conditions() {
        let cfg = ExperimentConfig {
            pair: PairSource::Inline { omega: Measure::zero(), sigma: Measure::zero() },
            window: WindowConfig { depth: 3, ..Default::default() },
            ..Default::default()
        };
        let out = run(&cfg, Subcommand::Conditions).unwrap();
        for line in out.files[0].contents.lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["report"]["value"].as_f64(), Some(0.0), "{line}");
        }
    }

    #[test]
    fn cantor_pivotal_is_deterministic() {
        let cfg = ExperimentConfig {
            cantor: CantorConfig { depth: 8, reports: "c".into(), ..Default::default() },
            threads: 2,
            ..Default::default()
        };
        let a = run(&cfg, Subcommand::Cantor).unwrap();
        let b = run(&cfg, Subcommand::Cantor).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.files.len(), 1);
        let text = &a.files[0].contents;
        assert!(text.starts_with("schema,depth,surrogate_depth,variant,level,partial_sum,increment"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn adjacent_pairs_are_neighbours() {
        let iv = |l, r| Interval::new(l, r).unwrap();
        let fam = [iv(0.0, 1.0), iv(0.0, 0.5), iv(0.5, 1.0), iv(2.0, 2.5)];
        assert_eq!(adjacent_pairs(&fam), vec![(iv(0.0, 0.5), iv(0.5, 1.0))]);
    }
}
