//! Problem-file ingestion, suite orchestration, and deterministic report
//! emission (canonical JSON, CSV, plot data).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::QuadProfile;
use crate::contour::{EnsembleCfg, QuadOverrides};
use crate::dilation::{LineGrid, MultiplierMode, SampledKernel};
use crate::error::{HfcError, Result};
use crate::linalg::CMatrix;
use crate::operator::CommutingTuple;
use crate::sector::{FunctionSpec, SectorDomain};
use crate::space::SpaceModel;
use crate::sqfn::LogGrid;

// ---------------------------------------------------------------------------
// problem files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadWire {
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    #[serde(default)]
    pub nodes_per_decade: Option<usize>,
    #[serde(default)]
    pub rmin: Option<f64>,
    #[serde(default)]
    pub rmax: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridWire {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineGridWire {
    pub h: f64,
    #[serde(rename = "S")]
    pub s_extent: f64,
}

/// A validated problem file. Unknown keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub suite: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tuple: Option<CommutingTuple>,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub quadrature: Option<QuadWire>,
    #[serde(default)]
    pub grid: Option<GridWire>,
    #[serde(default)]
    pub line_grid: Option<LineGridWire>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Suite-specific parameters, validated by the suite runner.
    #[serde(default)]
    pub params: Value,
}

impl ProblemFile {
    pub fn from_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HfcError::SchemaError(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    fn param_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    fn param_u64(&self, key: &str) -> Option<u64> {
        self.params.get(key).and_then(Value::as_u64)
    }
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub suite: String,
    pub inputs_digest: String,
    pub seed: u64,
    pub version: String,
    pub profile: String,
    pub checks: Vec<CheckRecord>,
    /// Named x/y series (refinement curves, ladders, profiles).
    pub series: BTreeMap<String, Vec<[f64; 2]>>,
    /// Structured artifacts (persisted dilation systems and the like).
    pub artifacts: BTreeMap<String, Value>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }
}

/// FNV-1a digest of the canonical problem encoding.
pub fn digest(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Canonical JSON: object keys sorted, floats printed in shortest
/// round-trip decimal form, no whitespace variation.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            // shortest round-trip decimal (ryu): re-parsing and re-emitting
            // reproduces the byte sequence exactly
            out.push_str(&n.to_string());
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string encodes"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key encodes"));
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
    PlotData,
}

impl std::str::FromStr for EmitFormat {
    type Err = HfcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(EmitFormat::Json),
            "csv" => Ok(EmitFormat::Csv),
            "plotdata" => Ok(EmitFormat::PlotData),
            other => Err(HfcError::InvalidParameter(format!(
                "unknown format {other:?}"
            ))),
        }
    }
}

/// Serializes the report in the requested format.
pub fn render(report: &Report, format: EmitFormat) -> String {
    match format {
        EmitFormat::Json => {
            let value = serde_json::to_value(report).expect("report serializes");
            canonical_json(&value)
        }
        EmitFormat::Csv => {
            let mut out = String::from("name,value,target,tolerance,pass\n");
            for c in &report.checks {
                out.push_str(&format!(
                    "{},{:.16e},{},{},{}\n",
                    c.name,
                    c.value,
                    c.target.map(|t| format!("{t:.16e}")).unwrap_or_default(),
                    c.tolerance.map(|t| format!("{t:.16e}")).unwrap_or_default(),
                    c.pass
                ));
            }
            out
        }
        EmitFormat::PlotData => {
            let mut out = String::new();
            for (name, series) in &report.series {
                out.push_str(&format!("# series: {name}\n# x\ty\n"));
                for [x, y] in series {
                    out.push_str(&format!("{x:.16e}\t{y:.16e}\n"));
                }
                out.push('\n');
            }
            if report.series.is_empty() {
                out.push_str("# no series in this report\n");
            }
            out
        }
    }
}

/// Writes the rendered report into `dir` as `<suite>.<ext>`.
pub fn emit(report: &Report, format: EmitFormat, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let ext = match format {
        EmitFormat::Json => "json",
        EmitFormat::Csv => "csv",
        EmitFormat::PlotData => "tsv",
    };
    let path = dir.join(format!("{}.{ext}", report.suite));
    let mut f = std::fs::File::create(&path)?;
    f.write_all(render(report, format).as_bytes())?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// suite runner
// ---------------------------------------------------------------------------

struct SuiteCtx {
    problem: ProblemFile,
    seed: u64,
    profile: QuadProfile,
    overrides: QuadOverrides,
    checks: Vec<CheckRecord>,
    series: BTreeMap<String, Vec<[f64; 2]>>,
    artifacts: BTreeMap<String, Value>,
}

impl SuiteCtx {
    fn tuple(&self) -> Result<CommutingTuple> {
        match &self.problem.tuple {
            Some(t) => Ok(t.clone()),
            None => CommutingTuple::new(
                SpaceModel::euclidean(2),
                vec![CMatrix::diag_real(&[1.0, 2.0])],
                1e-10,
            ),
        }
    }

    fn functions(&self) -> Result<Vec<crate::sector::CertifiedFunction>> {
        if self.problem.functions.is_empty() {
            return Ok(vec![crate::sector::phi_m(1, std::f64::consts::FRAC_PI_2)?]);
        }
        self.problem
            .functions
            .iter()
            .map(|f| f.to_certified())
            .collect()
    }

    fn log_grid(&self, d: usize) -> Result<LogGrid> {
        match &self.problem.grid {
            Some(g) => LogGrid::new(d, g.t_min, g.t_max, g.per_decade),
            None => Ok(LogGrid::default_for(d, self.profile)),
        }
    }

    fn line_grid(&self, d: usize) -> Result<LineGrid> {
        match &self.problem.line_grid {
            Some(g) => LineGrid::new(d, g.h, g.s_extent),
            None => LineGrid::new(d, 2.5e-3, 30.0),
        }
    }

    fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    /// Records a bounded check: pass iff `value <= target + tolerance`.
    fn check_le(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.push(CheckRecord {
            name: name.into(),
            value,
            target: Some(target),
            tolerance: Some(tol),
            pass: value.is_finite() && value <= target + tol,
            note: None,
        });
    }

    /// Records a closeness check: pass iff `|value - target| <= tol * max(|target|, floor)`.
    fn check_close(&mut self, name: &str, value: f64, target: f64, rel_tol: f64) {
        let scale = target.abs().max(1e-300);
        self.push(CheckRecord {
            name: name.into(),
            value,
            target: Some(target),
            tolerance: Some(rel_tol),
            pass: value.is_finite() && (value - target).abs() <= rel_tol * scale,
            note: None,
        });
    }

    /// Records an informational value that always passes.
    fn info(&mut self, name: &str, value: f64) {
        self.push(CheckRecord {
            name: name.into(),
            value,
            target: None,
            tolerance: None,
            pass: true,
            note: None,
        });
    }

    fn fail(&mut self, name: &str, err: &HfcError) {
        self.push(CheckRecord {
            name: name.into(),
            value: f64::NAN,
            target: None,
            tolerance: None,
            pass: false,
            note: Some(err.to_string()),
        });
    }

    fn series(&mut self, name: &str, pts: Vec<[f64; 2]>) {
        self.series.insert(name.into(), pts);
    }
}

/// Runs the suite named in the problem file; module errors inside one check
/// become failing records without aborting the siblings.
pub fn run_suite(problem: ProblemFile, overrides: QuadOverrides, profile: QuadProfile) -> Result<Report> {
    let digest_src = canonical_json(
        &serde_json::to_value(ProblemDigestView::from(&problem)).expect("digest view"),
    );
    let seed = problem.seed.unwrap_or(0);
    let randomized = !matches!(problem.suite.as_str(), "fc" | "integral-check" | "multiplier");
    if randomized && problem.seed.is_none() {
        return Err(HfcError::SchemaError(format!(
            "suite {:?} is randomized and requires an explicit seed",
            problem.suite
        )));
    }
    let suite = problem.suite.clone();
    let mut ctx = SuiteCtx {
        problem,
        seed,
        profile,
        overrides,
        checks: Vec::new(),
        series: BTreeMap::new(),
        artifacts: BTreeMap::new(),
    };
    match suite.as_str() {
        "analyze" => run_analyze(&mut ctx),
        "fc" => run_fc(&mut ctx),
        "fc-constant" => run_fc_constant(&mut ctx),
        "angle-profile" => run_angle_profile(&mut ctx),
        "phi-check" => run_phi_check(&mut ctx),
        "integral-check" => run_integral_check(&mut ctx),
        "sqfn" => run_sqfn(&mut ctx),
        "quad-check" => run_quad_check(&mut ctx),
        "reproduce" => run_reproduce(&mut ctx),
        "schatten" => run_schatten(&mut ctx),
        "dilate" => run_dilate(&mut ctx),
        "transfer" => run_transfer(&mut ctx),
        "multiplier" => run_multiplier(&mut ctx),
        "group-equiv" => run_group_equiv(&mut ctx),
        "verify-all" => run_verify_all(&mut ctx),
        other => {
            return Err(HfcError::SchemaError(format!("unknown suite {other:?}")));
        }
    }
    let mut checks = ctx.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(Report {
        suite,
        inputs_digest: digest(&digest_src),
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        profile: profile.name().into(),
        checks,
        series: ctx.series,
        artifacts: ctx.artifacts,
    })
}

/// Digest view: the raw fields that determine the computation.
#[derive(Serialize)]
struct ProblemDigestView {
    suite: String,
    seed: Option<u64>,
    tuple: Option<Value>,
    functions: Value,
    grid: Option<[f64; 3]>,
    line_grid: Option<[f64; 2]>,
    params: Value,
}

impl From<&ProblemFile> for ProblemDigestView {
    fn from(p: &ProblemFile) -> Self {
        ProblemDigestView {
            suite: p.suite.clone(),
            seed: p.seed,
            tuple: p
                .tuple
                .as_ref()
                .map(|t| serde_json::to_value(t).expect("tuple serializes")),
            functions: serde_json::to_value(&p.functions).expect("functions serialize"),
            grid: p.grid.as_ref().map(|g| [g.t_min, g.t_max, g.per_decade as f64]),
            line_grid: p.line_grid.as_ref().map(|g| [g.h, g.s_extent]),
            params: p.params.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// individual suites
// ---------------------------------------------------------------------------

fn run_analyze(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("analyze.tuple", &e),
    };
    let defect = crate::operator::commutation_defect(&tuple);
    ctx.check_le("analyze.commutation_defect", defect, tuple.tolerance, 0.0);
    match tuple.estimated_types() {
        Ok(types) => {
            for (k, &w) in types.iter().enumerate() {
                ctx.info(&format!("analyze.type_{}", k + 1), w);
            }
        }
        Err(e) => ctx.fail("analyze.types", &e),
    }
    let angles = [0.6, 0.9, 1.2, 1.5, 2.0, 2.5];
    match crate::operator::sectorial_profile(
        &tuple.operators[0],
        &tuple.space,
        &angles,
        8,
        &crate::space::NormSearchCfg {
            seed: ctx.seed,
            restarts: 8,
            ..Default::default()
        },
    ) {
        Ok(profile) => {
            let pts: Vec<[f64; 2]> = profile
                .angles
                .iter()
                .zip(profile.constants.iter())
                .map(|(&a, &c)| [a, c])
                .collect();
            ctx.series("sectorial_profile_op1", pts);
            let mono = profile
                .constants
                .windows(2)
                .all(|w| w[0] >= w[1] - 1e-12);
            ctx.check_le("analyze.profile_monotone", if mono { 0.0 } else { 1.0 }, 0.0, 0.0);
        }
        Err(e) => ctx.fail("analyze.profile", &e),
    }
    match crate::operator::ergodic_split(&tuple) {
        Ok(split) => {
            ctx.info("analyze.ergodic_components", split.projections.len() as f64);
        }
        Err(e) => ctx.fail("analyze.ergodic", &e),
    }
}

fn run_fc(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("fc.tuple", &e),
    };
    let functions = match ctx.functions() {
        Ok(f) => f,
        Err(e) => return ctx.fail("fc.functions", &e),
    };
    let tol = ctx.problem.tolerance("rel", 1e-6);
    let spectrum = crate::operator::joint_spectral_decompose(&tuple).ok();
    for (i, cf) in functions.iter().enumerate() {
        let form = crate::sector::H01Form::from_function(cf.clone());
        let name = format!("fc.oracle_vs_contour_{i}");
        match crate::contour::contour_fc(&form, &tuple, &ctx.overrides, ctx.profile) {
            Ok(res) => {
                ctx.info(&format!("fc.norm_{i}"), res.value.spectral_norm());
                ctx.info(&format!("fc.tail_{i}"), res.tail_estimate);
                if let Some(s) = &spectrum {
                    match crate::contour::spectral_oracle_fc_with(&form, s) {
                        Ok(oracle) => {
                            let rel = res.value.rel_diff(&oracle);
                            ctx.check_le(&name, rel, tol + res.tail_estimate, 0.0);
                        }
                        Err(e) => ctx.fail(&name, &e),
                    }
                }
            }
            Err(e) => ctx.fail(&name, &e),
        }
    }
}

fn ensemble_cfg(ctx: &SuiteCtx) -> EnsembleCfg {
    EnsembleCfg {
        size: ctx.problem.param_u64("ensemble").unwrap_or(32) as usize,
        ..Default::default()
    }
}

fn run_fc_constant(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("fc_constant.tuple", &e),
    };
    let theta = ctx
        .problem
        .param_f64("theta")
        .unwrap_or(std::f64::consts::FRAC_PI_2);
    let domain = match SectorDomain::uniform(tuple.d(), theta) {
        Ok(d) => d,
        Err(e) => return ctx.fail("fc_constant.domain", &e),
    };
    match crate::contour::fc_constant_estimate(&tuple, &domain, &ensemble_cfg(ctx), ctx.seed, ctx.profile)
    {
        Ok(rep) => {
            ctx.info("fc_constant.estimate", rep.estimate);
            ctx.info("fc_constant.witness", rep.witness as f64);
        }
        Err(e) => ctx.fail("fc_constant.estimate", &e),
    }
}

fn run_angle_profile(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("angle_profile.tuple", &e),
    };
    let ladder: Vec<f64> = ctx
        .problem
        .params
        .get("ladder")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_else(|| vec![0.9, 1.2, 1.5708, 2.0, 2.4]);
    match crate::contour::angle_dependence_profile(
        &tuple,
        &ladder,
        &ensemble_cfg(ctx),
        ctx.seed,
        ctx.profile,
    ) {
        Ok(rep) => {
            let pts: Vec<[f64; 2]> = rep
                .rungs
                .iter()
                .zip(rep.estimates.iter())
                .map(|(&a, &e)| [a, e])
                .collect();
            ctx.series("angle_profile", pts);
            ctx.check_le(
                "angle_profile.flagged_rungs",
                rep.flagged.len() as f64,
                0.0,
                0.0,
            );
        }
        Err(e) => ctx.fail("angle_profile", &e),
    }
}

fn run_phi_check(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("phi_check.tuple", &e),
    };
    let x = ndarray::Array1::from_elem(tuple.dim(), C64::new(1.0, 0.0));
    let ms: Vec<u32> = vec![8, 16, 32, 64, 128];
    match crate::contour::phi_approximation_check(&tuple, &x, &ms, ctx.profile) {
        Ok(recs) => {
            let pts: Vec<[f64; 2]> = recs
                .iter()
                .map(|r| [r.m as f64, r.vector_error])
                .collect();
            ctx.series("phi_approximation", pts);
            let mono = recs
                .windows(2)
                .all(|w| w[1].vector_error <= w[0].vector_error + 1e-14);
            ctx.check_le("phi_check.monotone", if mono { 0.0 } else { 1.0 }, 0.0, 0.0);
            let errs: Vec<f64> = recs.iter().map(|r| r.operator_error).collect();
            let slope = crate::contour::fit_decay_exponent(&ms, &errs);
            ctx.check_close("phi_check.decay_exponent", slope, 1.0, 0.1);
        }
        Err(e) => ctx.fail("phi_check", &e),
    }
}

fn run_integral_check(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("integral_check.tuple", &e),
    };
    let m = ctx.problem.param_u64("m").unwrap_or(2) as u32;
    let tol = ctx.problem.tolerance("defect", 1e-6);
    match crate::contour::integral_identity_check(&tuple, m, 1e-6, 1e3, 400, ctx.profile) {
        Ok(rep) => ctx.check_le("integral_check.defect", rep.defect, tol, 0.0),
        Err(e) => ctx.fail("integral_check.defect", &e),
    }
}

fn run_sqfn(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("sqfn.tuple", &e),
    };
    let d = tuple.d();
    let theta = 0.9 * std::f64::consts::FRAC_PI_2.min(
        match tuple.estimated_types() {
            Ok(t) => std::f64::consts::FRAC_PI_2.max(t.iter().cloned().fold(0.0, f64::max) + 0.2),
            Err(_) => std::f64::consts::FRAC_PI_2,
        },
    );
    let f = if ctx.problem.functions.is_empty() {
        let base = match crate::sector::sqrt_exp(theta.min(0.45 * std::f64::consts::PI)) {
            Ok(f) => f,
            Err(e) => return ctx.fail("sqfn.function", &e),
        };
        let mut out = base.clone();
        for _ in 1..d {
            out = out.tensor(&base);
        }
        out
    } else {
        match ctx.functions() {
            Ok(mut fs) => fs.remove(0),
            Err(e) => return ctx.fail("sqfn.function", &e),
        }
    };
    let grid = match ctx.log_grid(d) {
        Ok(g) => g,
        Err(e) => return ctx.fail("sqfn.grid", &e),
    };
    let x = ndarray::Array1::from_elem(tuple.dim(), C64::new(1.0, 0.0));
    let job = crate::sqfn::SquareFunctionJob {
        tuple: tuple.clone(),
        f: f.clone(),
        grid: grid.clone(),
        x,
    };
    match crate::sqfn::square_function_norm(&job, ctx.seed, ctx.profile) {
        Ok(rep) => {
            ctx.info("sqfn.norm", rep.value);
            let pts: Vec<[f64; 2]> = rep
                .refinement_curve
                .iter()
                .enumerate()
                .map(|(i, &v)| [i as f64, v])
                .collect();
            ctx.series("sqfn_refinement", pts);
            let d1 = (rep.refinement_curve[1] - rep.refinement_curve[0]).abs();
            let d2 = (rep.refinement_curve[2] - rep.refinement_curve[1]).abs();
            ctx.check_le("sqfn.refinement_cauchy", d2, d1.max(1e-14), 0.0);
        }
        Err(e) => ctx.fail("sqfn.norm", &e),
    }
    match crate::sqfn::sfe_constant(&tuple, &f, &grid, 32, ctx.seed) {
        Ok(rep) => ctx.info("sqfn.sfe_constant", rep.constant),
        Err(e) => ctx.fail("sqfn.sfe_constant", &e),
    }
}

fn run_quad_check(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("quad_check.tuple", &e),
    };
    let fs = match ctx.functions() {
        Ok(f) => f,
        Err(e) => return ctx.fail("quad_check.functions", &e),
    };
    let x = ndarray::Array1::from_elem(tuple.dim(), C64::new(1.0, 0.0));
    let max_ratio = ctx.problem.tolerance("max_ratio", 10.0);
    match crate::sqfn::quad_inequality_check(&tuple, &fs, &x, ctx.seed, ctx.profile) {
        Ok(rep) => {
            ctx.info("quad_check.lhs", rep.lhs);
            ctx.info("quad_check.rhs", rep.rhs);
            ctx.check_le("quad_check.ratio", rep.ratio, max_ratio, 0.0);
        }
        Err(e) => ctx.fail("quad_check.ratio", &e),
    }
}

fn run_reproduce(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("reproduce.tuple", &e),
    };
    let d = tuple.d();
    let theta = 0.45 * std::f64::consts::PI;
    let base = match crate::sector::sqrt_exp(theta) {
        Ok(f) => f,
        Err(e) => return ctx.fail("reproduce.triple", &e),
    };
    let mut triple = base.clone();
    for _ in 1..d {
        triple = triple.tensor(&base);
    }
    let target = if ctx.problem.functions.is_empty() {
        let phi = match crate::sector::phi_m(1, std::f64::consts::FRAC_PI_2) {
            Ok(f) => f,
            Err(e) => return ctx.fail("reproduce.target", &e),
        };
        let mut out = phi.clone();
        for _ in 1..d {
            out = out.tensor(&phi);
        }
        crate::sector::H01Form::from_function(out)
    } else {
        match ctx.functions() {
            Ok(mut fs) => crate::sector::H01Form::from_function(fs.remove(0)),
            Err(e) => return ctx.fail("reproduce.target", &e),
        }
    };
    let grid = match ctx.log_grid(d) {
        Ok(g) => g,
        Err(e) => return ctx.fail("reproduce.grid", &e),
    };
    let tol = ctx.problem.tolerance("defect", 1e-6);
    match crate::sqfn::reproducing_formula_check(&tuple, &target, &triple, &triple, &triple, &grid, 3)
    {
        Ok(rep) => {
            ctx.check_le("reproduce.base_defect", rep.defects[0], tol, 0.0);
            let pts: Vec<[f64; 2]> = rep
                .defects
                .iter()
                .enumerate()
                .map(|(i, &v)| [i as f64, v])
                .collect();
            ctx.series("reproduce_defects", pts);
            let mut worst: f64 = 0.0;
            for w in rep.defects.windows(2) {
                if w[0] > 1e-13 {
                    worst = worst.max((w[1] / w[0] - 0.5).abs());
                }
            }
            ctx.check_le("reproduce.halving_deviation", worst, 0.1, 1e-12);
        }
        Err(e) => ctx.fail("reproduce.defect", &e),
    }
}

fn run_schatten(ctx: &mut SuiteCtx) {
    let p = ctx.problem.param_f64("p").unwrap_or(4.0);
    let ladder: Vec<usize> = ctx
        .problem
        .params
        .get("ladder")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_u64().map(|u| u as usize)).collect())
        .unwrap_or_else(|| vec![2, 4, 8, 16]);
    let cfg = EnsembleCfg {
        size: ctx.problem.param_u64("ensemble").unwrap_or(24) as usize,
        max_atoms: 4,
        ..Default::default()
    };
    match crate::sqfn::schatten_growth_experiment(p, &ladder, &cfg, ctx.seed, ctx.profile) {
        Ok(points) => {
            let pts: Vec<[f64; 2]> = points
                .iter()
                .map(|pt| [pt.n as f64, pt.constant])
                .collect();
            ctx.series("schatten_growth", pts);
            let mut violations: f64 = 0.0;
            for w in points.windows(2) {
                if w[1].constant < w[0].constant * 0.95 {
                    violations += 1.0;
                }
            }
            ctx.check_le("schatten.monotone_violations", violations, 0.0, 0.0);
            ctx.info(
                "schatten.final_constant",
                points.last().map(|p| p.constant).unwrap_or(f64::NAN),
            );
        }
        Err(e) => ctx.fail("schatten.growth", &e),
    }
    match crate::sqfn::schatten_growth_experiment(2.0, &ladder, &cfg, ctx.seed, ctx.profile) {
        Ok(points) => {
            for pt in &points {
                ctx.check_close(
                    &format!("schatten.p2_control_n{}", pt.n),
                    pt.constant,
                    1.0,
                    0.05,
                );
            }
        }
        Err(e) => ctx.fail("schatten.p2_control", &e),
    }
}

fn run_dilate(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("dilate.tuple", &e),
    };
    let grid = match ctx.line_grid(tuple.d()) {
        Ok(g) => g,
        Err(e) => return ctx.fail("dilate.grid", &e),
    };
    let tol = ctx.problem.tolerance("defect", 5e-3);
    let times: Vec<Vec<f64>> = vec![
        vec![0.0; tuple.d()],
        vec![grid.h * (0.5 / grid.h).round(); tuple.d()],
        vec![grid.h * (1.0 / grid.h).round(); tuple.d()],
    ];
    match crate::dilation::build_dilation(&tuple, grid) {
        Ok(sys) => {
            ctx.info("dilate.j_norm", sys.j_norm);
            ctx.info("dilate.q_norm", sys.q_norm);
            ctx.info("dilate.truncation_scale", sys.truncation_scale);
            if let Ok(exported) = sys.to_json(20_000) {
                ctx.artifacts.insert("dilation_system".into(), exported);
            }
            match crate::dilation::verify_factorization(&sys, &times[1..]) {
                Ok(rep) => {
                    ctx.check_le("dilate.defect", rep.max_defect, tol, 0.0);
                    // defect strictly decreases under h-halving
                    match LineGrid::new(grid.d, grid.h / 2.0, grid.s_extent)
                        .and_then(|g2| crate::dilation::build_dilation(&tuple, g2))
                        .and_then(|s2| crate::dilation::verify_factorization(&s2, &times[1..]))
                    {
                        Ok(rep2) => {
                            let pts = vec![
                                [grid.h, rep.max_defect],
                                [grid.h / 2.0, rep2.max_defect],
                            ];
                            ctx.series("dilate_h_refinement", pts);
                            ctx.check_le(
                                "dilate.h_halving_decrease",
                                rep2.max_defect,
                                rep.max_defect,
                                0.0,
                            );
                        }
                        Err(e) => ctx.fail("dilate.h_halving_decrease", &e),
                    }
                }
                Err(e) => ctx.fail("dilate.defect", &e),
            }
        }
        Err(e) => ctx.fail("dilate.build", &e),
    }
}

fn run_transfer(ctx: &mut SuiteCtx) {
    let tuple = match ctx.tuple() {
        Ok(t) => t,
        Err(e) => return ctx.fail("transfer.tuple", &e),
    };
    let grid = match ctx.line_grid(tuple.d()) {
        Ok(g) => g,
        Err(e) => return ctx.fail("transfer.grid", &e),
    };
    let sys = match crate::dilation::build_dilation(&tuple, grid) {
        Ok(s) => s,
        Err(e) => return ctx.fail("transfer.build", &e),
    };
    let forms: Vec<crate::sector::H01Form> = if ctx.problem.functions.is_empty() {
        let theta = 0.6 * std::f64::consts::PI;
        let mut fs = Vec::new();
        for m in [1u32, 2, 5] {
            match crate::sector::phi_m(m, theta) {
                Ok(f) => {
                    let mut out = f.clone();
                    for _ in 1..tuple.d() {
                        out = out.tensor(&f);
                    }
                    fs.push(crate::sector::H01Form::from_function(out));
                }
                Err(e) => return ctx.fail("transfer.functions", &e),
            }
        }
        fs
    } else {
        match ctx.functions() {
            Ok(fs) => fs
                .into_iter()
                .map(crate::sector::H01Form::from_function)
                .collect(),
            Err(e) => return ctx.fail("transfer.functions", &e),
        }
    };
    let times = vec![vec![0.0; tuple.d()], vec![grid.h * (1.0 / grid.h).round(); tuple.d()]];
    for (i, form) in forms.iter().enumerate() {
        match crate::dilation::transfer_fc(form, &sys, &times, ctx.profile) {
            Ok(rep) => {
                ctx.info(&format!("transfer.lhs_{i}"), rep.lhs);
                ctx.info(&format!("transfer.rhs_{i}"), rep.rhs);
                ctx.check_le(
                    &format!("transfer.holds_{i}"),
                    if rep.holds { 0.0 } else { 1.0 },
                    0.0,
                    0.0,
                );
            }
            Err(e) => ctx.fail(&format!("transfer.holds_{i}"), &e),
        }
    }
}

fn default_kernel(h: f64) -> SampledKernel {
    crate::dilation::modulated_exponential_kernel(h, 1.0, 0.0).expect("default kernel")
}

fn run_multiplier(ctx: &mut SuiteCtx) {
    let h = ctx.problem.param_f64("h").unwrap_or(0.25);
    let nodes = ctx.problem.param_u64("nodes").unwrap_or(512) as usize;
    let kernel = match ctx.problem.params.get("kernel") {
        Some(v) => match serde_json::from_value::<SampledKernel>(v.clone()) {
            Ok(k) => k,
            Err(e) => {
                return ctx.fail(
                    "multiplier.kernel",
                    &HfcError::SchemaError(e.to_string()),
                )
            }
        },
        None => default_kernel(h),
    };
    match crate::dilation::multiplier_norm(&kernel, nodes, MultiplierMode::Circulant) {
        Ok(rep) => {
            ctx.info("multiplier.circulant_op", rep.operator_norm);
            ctx.info("multiplier.circulant_symbol", rep.symbol_sup);
            ctx.check_close(
                "multiplier.circulant_equality",
                rep.operator_norm,
                rep.symbol_sup,
                1e-10,
            );
        }
        Err(e) => ctx.fail("multiplier.circulant_equality", &e),
    }
    match crate::dilation::multiplier_norm(&kernel, nodes, MultiplierMode::ZeroPadded) {
        Ok(rep) => {
            ctx.check_close(
                "multiplier.zero_padded_discrepancy",
                rep.operator_norm,
                rep.symbol_sup,
                0.02,
            );
        }
        Err(e) => ctx.fail("multiplier.zero_padded_discrepancy", &e),
    }
}

fn run_group_equiv(ctx: &mut SuiteCtx) {
    let h = ctx.problem.param_f64("h").unwrap_or(0.2);
    let steps: Vec<CMatrix> = match ctx.problem.params.get("unit_steps") {
        Some(v) => match serde_json::from_value::<Vec<CMatrix>>(v.clone()) {
            Ok(m) => m,
            Err(e) => {
                return ctx.fail("group_equiv.group", &HfcError::SchemaError(e.to_string()))
            }
        },
        // default group: unitary diagonal with two frequencies
        None => vec![CMatrix::diag(&[
            C64::from_polar(1.0, -0.4 * h),
            C64::from_polar(1.0, 0.9 * h),
        ])],
    };
    let group = match crate::dilation::GroupTuple::new(h, steps) {
        Ok(g) => g,
        Err(e) => return ctx.fail("group_equiv.group", &e),
    };
    let kernels: Vec<SampledKernel> = [0.0, -0.4, 0.4, 0.9, -0.9]
        .iter()
        .filter_map(|&xi| crate::dilation::modulated_exponential_kernel(h, 1.0, xi).ok())
        .collect();
    let cfg = EnsembleCfg {
        size: 12,
        max_atoms: 4,
        ..Default::default()
    };
    match crate::dilation::group_calculus_equivalence_check(&group, &kernels, &cfg, ctx.seed, ctx.profile)
    {
        Ok(rep) => {
            ctx.info("group_equiv.multiplier_constant", rep.multiplier_constant);
            ctx.info("group_equiv.fc_constant", rep.fc_constant);
            ctx.check_le("group_equiv.ratio_band", rep.ratio, 4.0, 0.0);
            ctx.check_le("group_equiv.ratio_band_low", 0.25, rep.ratio, 0.0);
        }
        Err(e) => ctx.fail("group_equiv.ratio_band", &e),
    }
}

fn run_verify_all(ctx: &mut SuiteCtx) {
    run_analyze(ctx);
    run_fc(ctx);
    run_fc_constant(ctx);
    run_angle_profile(ctx);
    run_phi_check(ctx);
    run_integral_check(ctx);
    run_sqfn(ctx);
    run_quad_check(ctx);
    run_reproduce(ctx);
    run_schatten_small(ctx);
    run_dilate(ctx);
    run_transfer(ctx);
    run_multiplier(ctx);
    run_group_equiv(ctx);
}

/// Schatten battery at reduced scale for the all-suite run.
fn run_schatten_small(ctx: &mut SuiteCtx) {
    let saved = ctx.problem.params.clone();
    if ctx.problem.params.get("ladder").is_none() {
        ctx.problem.params = serde_json::json!({"ladder": [2, 4], "ensemble": 10});
    }
    run_schatten(ctx);
    ctx.problem.params = saved;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_problem(suite: &str) -> ProblemFile {
        ProblemFile::from_str(&format!(r#"{{"suite": "{suite}", "seed": 7}}"#)).unwrap()
    }

    #[test]
    fn schema_rejects_unknown_keys() {
        let bad = r#"{"suite": "fc", "seed": 1, "bogus": 3}"#;
        assert!(matches!(
            ProblemFile::from_str(bad),
            Err(HfcError::SchemaError(_))
        ));
        let bad_tuple = r#"{"suite": "fc", "tuple": {"space": {"kind": "euclidean", "dim": 1}, "operators": [[[[1.0, 0.0]]]], "bogus": 1}}"#;
        assert!(ProblemFile::from_str(bad_tuple).is_err());
    }

    #[test]
    fn randomized_suites_require_seed() {
        let p = ProblemFile::from_str(r#"{"suite": "fc-constant"}"#).unwrap();
        let err = run_suite(p, QuadOverrides::default(), QuadProfile::Fast);
        assert!(matches!(err, Err(HfcError::SchemaError(_))));
    }

    #[test]
    fn canonical_json_is_sorted_and_stable() {
        let v: Value = serde_json::from_str(r#"{"b": 1.5, "a": [1, 2.25], "c": "x"}"#).unwrap();
        let s = canonical_json(&v);
        assert_eq!(s, r#"{"a":[1,2.25],"b":1.5,"c":"x"}"#);
        // byte-identical re-emission after a parse round trip
        let v2: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(canonical_json(&v2), s);
    }

    #[test]
    fn fc_suite_passes_on_default_inputs() {
        let p = minimal_problem("fc");
        let rep = run_suite(p, QuadOverrides::default(), QuadProfile::Default).unwrap();
        assert!(rep.all_pass(), "{:?}", rep.checks);
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn failing_tolerance_fixture_exits_one() {
        let p = ProblemFile::from_str(
            r#"{"suite": "integral-check", "seed": 1, "tolerances": {"defect": 1e-30}}"#,
        )
        .unwrap();
        let rep = run_suite(p, QuadOverrides::default(), QuadProfile::Default).unwrap();
        assert_eq!(rep.exit_code(), 1, "{:?}", rep.checks);
    }

    #[test]
    fn reports_are_deterministic() {
        let run = || {
            let p = minimal_problem("sqfn");
            let rep = run_suite(p, QuadOverrides::default(), QuadProfile::Fast).unwrap();
            render(&rep, EmitFormat::Json)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn emit_formats_round_trip() {
        let p = minimal_problem("multiplier");
        let rep = run_suite(p, QuadOverrides::default(), QuadProfile::Fast).unwrap();
        let json = render(&rep, EmitFormat::Json);
        let parsed: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(canonical_json(&parsed), json);
        let csv = render(&rep, EmitFormat::Csv);
        assert!(csv.starts_with("name,value"));
        let plot = render(&rep, EmitFormat::PlotData);
        assert!(plot.starts_with("#"));
    }

    #[test]
    fn check_records_sorted_by_name() {
        let p = minimal_problem("analyze");
        let rep = run_suite(p, QuadOverrides::default(), QuadProfile::Fast).unwrap();
        for w in rep.checks.windows(2) {
            assert!(w[0].name <= w[1].name);
        }
    }
}
