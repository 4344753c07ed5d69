//! Declarative experiment configuration.
//!
//! Configs are JSON objects with a fixed key set. Parsing validates the whole
//! document and reports every problem at once (unknown keys included) rather
//! than stopping at the first; a clean parse then builds the runnable
//! [`RunConfig`]. Instance randomness (quadratic rotations, random graphs) is
//! drawn from a fixed internal seed, never from the run seed, so seed sweeps
//! optimize one fixed objective over one fixed graph. A canonical SHA-256
//! hash of the resolved document identifies each run in traces and manifests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::exec;
use crate::hard::{make_hard_instance, make_hard_objective};
use crate::kernel::build_legendre_kernel;
use crate::metrics::{RecordSpec, Trace};
use crate::network::{build_topology, metropolis_matrix, GraphKind};
use crate::noise::{NoiseKind, NoiseModel};
use crate::objective::{
    make_holder_probe, make_least_squares, make_logistic, make_quadratic, ProjectionSet,
    CONSTRUCTOR_SEED,
};
use crate::optimizer::{self, EstimatorVariant, InitSpec, RunConfig, Schedule};
use crate::rng::{Purpose, StreamFactory};
use crate::{Error, Result};

/// Default number of log-spaced recording points.
pub const DEFAULT_RECORD_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorSpec {
    Kernel,
    PlainBeta2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Complete,
    Ring,
    Path,
    Grid,
    ErdosRenyi { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic { alpha: f64, lbar: f64 },
    LeastSquares { a: Vec<Vec<f64>>, y: Vec<f64> },
    Logistic { a: Vec<Vec<f64>> },
    HolderProbe,
    Hard { alpha: f64, omega: Vec<i8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindSpec {
    Zero,
    Gaussian,
    Uniform,
    SignAlternating,
    ConstantBias,
    PrecommittedSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKindSpec,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    StronglyConvexPl { alpha: f64 },
    ImprovedBeta2 { alpha: f64 },
    Custom { eta0: f64, eta_exponent: f64, h0: f64, h_exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpecConfig {
    SharedPoint {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point: Option<Vec<f64>>,
    },
    Uniform,
}

impl Default for InitSpecConfig {
    fn default() -> Self {
        InitSpecConfig::SharedPoint { point: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_spaced: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

/// The declarative form of a run. Field names mirror the JSON keys; `T` is
/// the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub n: usize,
    pub d: usize,
    pub graph: GraphSpec,
    pub beta: f64,
    pub estimator: EstimatorSpec,
    pub objective: ObjectiveSpec,
    /// Required for every objective except `hard`, which carries its own box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    pub noise: NoiseSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub init: InitSpecConfig,
    #[serde(default)]
    pub record: RecordConfig,
    /// Sweep extension: number of consecutive seeds starting at `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
}

// Validation helpers over the raw JSON document. Each returns None after
// pushing an error so the walk can continue collecting.

fn obj<'a>(
    v: &'a Value,
    path: &str,
    errs: &mut Vec<String>,
) -> Option<&'a serde_json::Map<String, Value>> {
    match v.as_object() {
        Some(m) => Some(m),
        None => {
            errs.push(format!("`{path}` must be an object"));
            None
        }
    }
}

fn check_keys(
    m: &serde_json::Map<String, Value>,
    path: &str,
    known: &[&str],
    errs: &mut Vec<String>,
) {
    for key in m.keys() {
        if !known.contains(&key.as_str()) {
            errs.push(format!("unknown key `{}{key}`", prefix(path)));
        }
    }
}

fn prefix(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!("{path}.")
    }
}

fn req<'a>(
    m: &'a serde_json::Map<String, Value>,
    key: &str,
    path: &str,
    errs: &mut Vec<String>,
) -> Option<&'a Value> {
    match m.get(key) {
        Some(v) => Some(v),
        None => {
            errs.push(format!("missing key `{}{key}`", prefix(path)));
            None
        }
    }
}

fn as_u64(v: &Value, name: &str, errs: &mut Vec<String>) -> Option<u64> {
    match v.as_u64() {
        Some(x) => Some(x),
        None => {
            errs.push(format!("`{name}` must be a nonnegative integer"));
            None
        }
    }
}

fn as_f64(v: &Value, name: &str, errs: &mut Vec<String>) -> Option<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            errs.push(format!("`{name}` must be a finite number"));
            None
        }
    }
}

fn as_str<'a>(v: &'a Value, name: &str, errs: &mut Vec<String>) -> Option<&'a str> {
    match v.as_str() {
        Some(s) => Some(s),
        None => {
            errs.push(format!("`{name}` must be a string"));
            None
        }
    }
}

fn num_vec(v: &Value, name: &str, errs: &mut Vec<String>) -> Option<Vec<f64>> {
    let arr = match v.as_array() {
        Some(a) => a,
        None => {
            errs.push(format!("`{name}` must be an array of numbers"));
            return None;
        }
    };
    let mut out = Vec::with_capacity(arr.len());
    for (i, e) in arr.iter().enumerate() {
        match e.as_f64() {
            Some(x) if x.is_finite() => out.push(x),
            _ => {
                errs.push(format!("`{name}[{i}]` must be a finite number"));
                return None;
            }
        }
    }
    Some(out)
}

fn kind_of<'a>(
    m: &'a serde_json::Map<String, Value>,
    path: &str,
    errs: &mut Vec<String>,
) -> Option<&'a str> {
    req(m, "kind", path, errs).and_then(|v| as_str(v, &format!("{}kind", prefix(path)), errs))
}

fn matrix(v: &Value, name: &str, d: Option<usize>, errs: &mut Vec<String>) -> Option<usize> {
    let arr = match v.as_array() {
        Some(a) if !a.is_empty() => a,
        _ => {
            errs.push(format!("`{name}` must be a nonempty array of rows"));
            return None;
        }
    };
    for (i, row) in arr.iter().enumerate() {
        let r = num_vec(row, &format!("{name}[{i}]"), errs)?;
        if let Some(d) = d {
            if r.len() != d {
                errs.push(format!("`{name}[{i}]` must have length d = {d}, got {}", r.len()));
                return None;
            }
        }
    }
    Some(arr.len())
}

fn validate_graph(v: &Value, n: Option<usize>, errs: &mut Vec<String>) {
    let Some(m) = obj(v, "graph", errs) else { return };
    check_keys(m, "graph", &["kind", "p"], errs);
    let Some(kind) = kind_of(m, "graph", errs) else { return };
    match kind {
        "erdos_renyi" => {
            match req(m, "p", "graph", errs).and_then(|v| as_f64(v, "graph.p", errs)) {
                Some(p) if p > 0.0 && p <= 1.0 => {}
                Some(p) => errs.push(format!("`graph.p` must lie in (0, 1], got {p}")),
                None => {}
            }
        }
        "complete" | "ring" | "path" | "grid" => {
            if m.contains_key("p") {
                errs.push(format!("graph kind `{kind}` takes no key `p`"));
            }
            if kind == "grid" {
                if let Some(n) = n {
                    let r = (n as f64).sqrt().round() as usize;
                    if r * r != n {
                        errs.push(format!("grid graphs need a square node count, got n = {n}"));
                    }
                }
            }
        }
        other => errs.push(format!("unknown graph kind `{other}`")),
    }
}

fn validate_objective<'a>(
    v: &'a Value,
    d: Option<usize>,
    beta: Option<f64>,
    errs: &mut Vec<String>,
) -> Option<&'a str> {
    let m = obj(v, "objective", errs)?;
    let kind = kind_of(m, "objective", errs)?;
    match kind {
        "quadratic" => {
            check_keys(m, "objective", &["kind", "alpha", "lbar"], errs);
            let alpha =
                req(m, "alpha", "objective", errs).and_then(|v| as_f64(v, "objective.alpha", errs));
            let lbar =
                req(m, "lbar", "objective", errs).and_then(|v| as_f64(v, "objective.lbar", errs));
            if let (Some(a), Some(l)) = (alpha, lbar) {
                if !(a > 0.0 && l >= a) {
                    errs.push(format!(
                        "quadratic spectrum needs 0 < alpha <= lbar, got alpha = {a}, lbar = {l}"
                    ));
                }
            }
        }
        "least_squares" => {
            check_keys(m, "objective", &["kind", "a", "y"], errs);
            let rows =
                req(m, "a", "objective", errs).and_then(|v| matrix(v, "objective.a", d, errs));
            let y = req(m, "y", "objective", errs).and_then(|v| num_vec(v, "objective.y", errs));
            if let (Some(rows), Some(y)) = (rows, y) {
                if y.len() != rows {
                    errs.push(format!(
                        "`objective.y` must have one entry per row of `objective.a` ({rows}), got {}",
                        y.len()
                    ));
                }
            }
        }
        "logistic" => {
            check_keys(m, "objective", &["kind", "a"], errs);
            req(m, "a", "objective", errs).and_then(|v| matrix(v, "objective.a", d, errs));
        }
        "holder_probe" => {
            check_keys(m, "objective", &["kind"], errs);
            if let Some(b) = beta {
                if b.fract() != 0.0 {
                    errs.push(format!("objective `holder_probe` requires integer beta, got {b}"));
                }
            }
        }
        "hard" => {
            check_keys(m, "objective", &["kind", "alpha", "omega"], errs);
            match req(m, "alpha", "objective", errs)
                .and_then(|v| as_f64(v, "objective.alpha", errs))
            {
                Some(a) if a > 0.0 => {}
                Some(a) => errs.push(format!("`objective.alpha` must be positive, got {a}")),
                None => {}
            }
            if let Some(omega) = req(m, "omega", "objective", errs) {
                match omega.as_array() {
                    Some(arr) => {
                        if let Some(d) = d {
                            if arr.len() != d {
                                errs.push(format!(
                                    "`objective.omega` must have length d = {d}, got {}",
                                    arr.len()
                                ));
                            }
                        }
                        for (i, e) in arr.iter().enumerate() {
                            if !matches!(e.as_i64(), Some(1) | Some(-1)) {
                                errs.push(format!("`objective.omega[{i}]` must be +1 or -1"));
                            }
                        }
                    }
                    None => errs.push("`objective.omega` must be an array of +1/-1".into()),
                }
            }
            if let Some(b) = beta {
                if b.fract() != 0.0 {
                    errs.push(format!("objective `hard` requires integer beta, got {b}"));
                }
            }
        }
        other => errs.push(format!("unknown objective kind `{other}`")),
    }
    Some(kind)
}

fn validate_theta(v: &Value, d: Option<usize>, errs: &mut Vec<String>) {
    let Some(m) = obj(v, "theta", errs) else { return };
    let Some(kind) = kind_of(m, "theta", errs) else { return };
    match kind {
        "ball" => {
            check_keys(m, "theta", &["kind", "center", "radius"], errs);
            let center =
                req(m, "center", "theta", errs).and_then(|v| num_vec(v, "theta.center", errs));
            if let (Some(c), Some(d)) = (&center, d) {
                if c.len() != d {
                    errs.push(format!("`theta.center` must have length d = {d}, got {}", c.len()));
                }
            }
            match req(m, "radius", "theta", errs).and_then(|v| as_f64(v, "theta.radius", errs)) {
                Some(r) if r > 0.0 => {}
                Some(r) => errs.push(format!("`theta.radius` must be positive, got {r}")),
                None => {}
            }
        }
        "box" => {
            check_keys(m, "theta", &["kind", "lo", "hi"], errs);
            let lo = req(m, "lo", "theta", errs).and_then(|v| num_vec(v, "theta.lo", errs));
            let hi = req(m, "hi", "theta", errs).and_then(|v| num_vec(v, "theta.hi", errs));
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if let Some(d) = d {
                    if lo.len() != d || hi.len() != d {
                        errs.push(format!(
                            "`theta.lo`/`theta.hi` must have length d = {d}, got {}/{}",
                            lo.len(),
                            hi.len()
                        ));
                    }
                }
                for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
                    if !(l < h) {
                        errs.push(format!("`theta` box needs lo < hi at coordinate {i}"));
                    }
                }
            }
        }
        other => errs.push(format!("unknown theta kind `{other}`")),
    }
}

fn validate_noise(v: &Value, horizon: Option<u64>, errs: &mut Vec<String>) {
    let Some(m) = obj(v, "noise", errs) else { return };
    check_keys(m, "noise", &["kind", "sigma", "sequence"], errs);
    let kind = kind_of(m, "noise", errs);
    let sigma = match m.get("sigma") {
        Some(v) => match as_f64(v, "noise.sigma", errs) {
            Some(s) if s >= 0.0 => Some(s),
            Some(s) => {
                errs.push(format!("`noise.sigma` must be nonnegative, got {s}"));
                None
            }
            None => None,
        },
        None => Some(0.0),
    };
    let known = [
        "zero",
        "gaussian",
        "uniform",
        "sign_alternating",
        "constant_bias",
        "precommitted_sequence",
    ];
    match kind {
        Some(k) if known.contains(&k) => {
            if k == "precommitted_sequence" {
                if let Some(seq) = req(m, "sequence", "noise", errs)
                    .and_then(|v| num_vec(v, "noise.sequence", errs))
                {
                    if let Some(t) = horizon {
                        if (seq.len() as u64) < 2 * t {
                            errs.push(format!(
                                "`noise.sequence` needs 2T = {} values, got {}",
                                2 * t,
                                seq.len()
                            ));
                        }
                    }
                    if let Some(s) = sigma {
                        if let Some(bad) = seq.iter().find(|v| v.abs() > s) {
                            errs.push(format!("`noise.sequence` value {bad} exceeds sigma = {s}"));
                        }
                    }
                }
            } else if m.contains_key("sequence") {
                errs.push(format!("noise kind `{k}` takes no key `sequence`"));
            }
        }
        Some(k) => errs.push(format!("unknown noise kind `{k}`")),
        None => {}
    }
}

fn validate_schedule(v: &Value, beta: Option<f64>, errs: &mut Vec<String>) {
    let Some(m) = obj(v, "schedule", errs) else { return };
    let Some(kind) = kind_of(m, "schedule", errs) else { return };
    let pos = |m: &serde_json::Map<String, Value>, key: &str, errs: &mut Vec<String>| match req(
        m, key, "schedule", errs,
    )
    .and_then(|v| as_f64(v, &format!("schedule.{key}"), errs))
    {
        Some(x) if x > 0.0 => Some(x),
        Some(x) => {
            errs.push(format!("`schedule.{key}` must be positive, got {x}"));
            None
        }
        None => None,
    };
    match kind {
        "strongly_convex_pl" => {
            check_keys(m, "schedule", &["kind", "alpha"], errs);
            pos(m, "alpha", errs);
        }
        "improved_beta2" => {
            check_keys(m, "schedule", &["kind", "alpha"], errs);
            pos(m, "alpha", errs);
            if let Some(b) = beta {
                if b != 2.0 {
                    errs.push(format!("schedule `improved_beta2` requires beta = 2, got {b}"));
                }
            }
        }
        "custom" => {
            check_keys(m, "schedule", &["kind", "eta0", "eta_exponent", "h0", "h_exponent"], errs);
            pos(m, "eta0", errs);
            pos(m, "h0", errs);
            for key in ["eta_exponent", "h_exponent"] {
                match req(m, key, "schedule", errs)
                    .and_then(|v| as_f64(v, &format!("schedule.{key}"), errs))
                {
                    Some(x) if x >= 0.0 => {}
                    Some(x) => errs.push(format!("`schedule.{key}` must be nonnegative, got {x}")),
                    None => {}
                }
            }
        }
        other => errs.push(format!("unknown schedule kind `{other}`")),
    }
}

fn validate_init(v: &Value, d: Option<usize>, errs: &mut Vec<String>) {
    let Some(m) = obj(v, "init", errs) else { return };
    let Some(kind) = kind_of(m, "init", errs) else { return };
    match kind {
        "shared_point" => {
            check_keys(m, "init", &["kind", "point"], errs);
            if let Some(p) = m.get("point") {
                if let (Some(p), Some(d)) = (num_vec(p, "init.point", errs), d) {
                    if p.len() != d {
                        errs.push(format!(
                            "`init.point` must have length d = {d}, got {}",
                            p.len()
                        ));
                    }
                }
            }
        }
        "uniform" => check_keys(m, "init", &["kind"], errs),
        other => errs.push(format!("unknown init kind `{other}`")),
    }
}

fn validate_record(v: &Value, errs: &mut Vec<String>) {
    let Some(m) = obj(v, "record", errs) else { return };
    check_keys(m, "record", &["every", "log_spaced", "points"], errs);
    let every = m.get("every").and_then(|v| as_u64(v, "record.every", errs));
    if let Some(0) = every {
        errs.push("`record.every` must be at least 1".into());
    }
    let log_spaced = match m.get("log_spaced") {
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => {
            errs.push("`record.log_spaced` must be a boolean".into());
            None
        }
        None => None,
    };
    let points = m.get("points").and_then(|v| as_u64(v, "record.points", errs));
    if let Some(0) = points {
        errs.push("`record.points` must be at least 1".into());
    }
    if m.contains_key("every") && (log_spaced == Some(true) || m.contains_key("points")) {
        errs.push("record cadence is either `every` or log-spaced `points`, not both".into());
    }
    if log_spaced == Some(false) && !m.contains_key("every") {
        errs.push("`record.log_spaced = false` requires `every`".into());
    }
}

const TOP_KEYS: [&str; 14] = [
    "seed",
    "T",
    "n",
    "d",
    "graph",
    "beta",
    "estimator",
    "objective",
    "theta",
    "noise",
    "schedule",
    "init",
    "record",
    "seeds",
];

/// Parses and validates a config document, reporting every schema problem.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, Vec<String>> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| vec![format!("json parse error: {e}")])?;
    let mut errs = Vec::new();
    let Some(m) = obj(&value, "config", &mut errs) else { return Err(errs) };
    check_keys(m, "", &TOP_KEYS, &mut errs);

    req(m, "seed", "", &mut errs).and_then(|v| as_u64(v, "seed", &mut errs));
    let horizon = req(m, "T", "", &mut errs).and_then(|v| as_u64(v, "T", &mut errs));
    if let Some(0) = horizon {
        errs.push("`T` must be at least 1".into());
    }
    let n = req(m, "n", "", &mut errs).and_then(|v| as_u64(v, "n", &mut errs));
    if let Some(0) = n {
        errs.push("`n` must be at least 1".into());
    }
    let d = req(m, "d", "", &mut errs).and_then(|v| as_u64(v, "d", &mut errs));
    if let Some(0) = d {
        errs.push("`d` must be at least 1".into());
    }
    let d = d.filter(|&x| x > 0).map(|x| x as usize);
    let beta = req(m, "beta", "", &mut errs).and_then(|v| as_f64(v, "beta", &mut errs));
    if let Some(b) = beta {
        if b < 2.0 {
            errs.push(format!("`beta` must be at least 2, got {b}"));
        }
    }
    let estimator = req(m, "estimator", "", &mut errs)
        .and_then(|v| as_str(v, "estimator", &mut errs))
        .map(str::to_owned);
    match estimator.as_deref() {
        Some("kernel") => {}
        Some("plain_beta2") => {
            if let Some(b) = beta {
                if b != 2.0 {
                    errs.push(format!("estimator `plain_beta2` requires beta = 2, got {b}"));
                }
            }
        }
        Some(other) => errs.push(format!("unknown estimator `{other}`")),
        None => {}
    }

    if let Some(v) = req(m, "graph", "", &mut errs) {
        validate_graph(v, n.map(|x| x as usize), &mut errs);
    }
    let obj_kind = req(m, "objective", "", &mut errs)
        .and_then(|v| validate_objective(v, d, beta, &mut errs))
        .map(str::to_owned);
    match (obj_kind.as_deref(), m.get("theta")) {
        (Some("hard"), Some(_)) => {
            errs.push("objective `hard` defines its own feasible box; remove `theta`".into())
        }
        (Some("hard"), None) | (None, _) => {}
        (_, Some(v)) => validate_theta(v, d, &mut errs),
        (_, None) => errs.push("missing key `theta`".into()),
    }
    if let Some(v) = req(m, "noise", "", &mut errs) {
        validate_noise(v, horizon, &mut errs);
    }
    if let Some(v) = req(m, "schedule", "", &mut errs) {
        validate_schedule(v, beta, &mut errs);
    }
    if let Some(v) = m.get("init") {
        validate_init(v, d, &mut errs);
    }
    if let Some(v) = m.get("record") {
        validate_record(v, &mut errs);
    }
    if let Some(v) = m.get("seeds") {
        match as_u64(v, "seeds", &mut errs) {
            Some(k) if k < 2 => errs.push("`seeds` must be at least 2".into()),
            _ => {}
        }
    }

    if !errs.is_empty() {
        return Err(errs);
    }
    serde_json::from_value(value).map_err(|e| vec![format!("schema error: {e}")])
}

fn resolved(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut out = cfg.clone();
    out.seeds = None;
    if out.record.every.is_none() {
        out.record.log_spaced = Some(true);
        out.record.points = Some(out.record.points.unwrap_or(DEFAULT_RECORD_POINTS));
    }
    out
}

/// Canonical SHA-256 of the resolved document: defaults filled, the sweep
/// `seeds` key stripped, keys sorted by the JSON serializer.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let value = serde_json::to_value(resolved(cfg)).expect("config serializes");
    let text = serde_json::to_string(&value).expect("value serializes");
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = std::fmt::Write::write_fmt(&mut out, format_args!("{b:02x}"));
    }
    out
}

/// Constructs the runnable form of a validated config.
pub fn build(cfg: &ExperimentConfig) -> Result<RunConfig> {
    let factory = StreamFactory::new(CONSTRUCTOR_SEED);
    let graph_kind = match cfg.graph {
        GraphSpec::Complete => GraphKind::Complete,
        GraphSpec::Ring => GraphKind::Ring,
        GraphSpec::Path => GraphKind::Path,
        GraphSpec::Grid => GraphKind::Grid,
        GraphSpec::ErdosRenyi { .. } => GraphKind::ErdosRenyi,
    };
    let p = match cfg.graph {
        GraphSpec::ErdosRenyi { p } => Some(p),
        _ => None,
    };
    let topology =
        build_topology(graph_kind, cfg.n, p, &mut factory.stream(Purpose::Instance, 1, 0))?;
    let mixing = metropolis_matrix(&topology);

    let theta = match &cfg.theta {
        Some(ThetaSpec::Ball { center, radius }) => {
            Some(ProjectionSet::ball(center.clone(), *radius)?)
        }
        Some(ThetaSpec::Box { lo, hi }) => Some(ProjectionSet::axis_box(lo.clone(), hi.clone())?),
        None => None,
    };

    let objective = match &cfg.objective {
        ObjectiveSpec::Quadratic { alpha, lbar } => make_quadratic(
            cfg.d,
            *alpha,
            *lbar,
            theta.ok_or(Error::InvalidDimension)?,
            &mut factory.stream(Purpose::Instance, 0, 0),
        )?,
        ObjectiveSpec::LeastSquares { a, y } => {
            make_least_squares(a, y, theta.ok_or(Error::InvalidDimension)?)?
        }
        ObjectiveSpec::Logistic { a } => make_logistic(a, theta.ok_or(Error::InvalidDimension)?)?,
        ObjectiveSpec::HolderProbe => {
            make_holder_probe(cfg.beta, cfg.d, theta.ok_or(Error::InvalidDimension)?)?
        }
        ObjectiveSpec::Hard { alpha, omega } => {
            let inst = make_hard_instance(cfg.beta, *alpha, cfg.horizon, cfg.d, omega)?;
            make_hard_objective(inst)
        }
    };

    let kernel = match cfg.estimator {
        EstimatorSpec::Kernel => Some(build_legendre_kernel(cfg.beta)?),
        EstimatorSpec::PlainBeta2 => None,
    };
    let estimator = match cfg.estimator {
        EstimatorSpec::Kernel => EstimatorVariant::Kernel,
        EstimatorSpec::PlainBeta2 => EstimatorVariant::PlainBeta2,
    };

    let noise_kind = match cfg.noise.kind {
        NoiseKindSpec::Zero => NoiseKind::Zero,
        NoiseKindSpec::Gaussian => NoiseKind::Gaussian,
        NoiseKindSpec::Uniform => NoiseKind::Uniform,
        NoiseKindSpec::SignAlternating => NoiseKind::SignAlternating,
        NoiseKindSpec::ConstantBias => NoiseKind::ConstantBias,
        NoiseKindSpec::PrecommittedSequence => {
            NoiseKind::Precommitted(cfg.noise.sequence.clone().unwrap_or_default())
        }
    };
    let noise = NoiseModel::new(noise_kind, cfg.noise.sigma)?;

    let schedule = match cfg.schedule {
        ScheduleSpec::StronglyConvexPl { alpha } => {
            Schedule::StronglyConvexPl { alpha, beta: cfg.beta }
        }
        ScheduleSpec::ImprovedBeta2 { alpha } => Schedule::ImprovedBeta2 { alpha, d: cfg.d },
        ScheduleSpec::Custom { eta0, eta_exponent, h0, h_exponent } => {
            Schedule::Custom { eta0, eta_exponent, h0, h_exponent }
        }
    };
    schedule.validate()?;

    let init = match &cfg.init {
        InitSpecConfig::SharedPoint { point } => InitSpec::SharedPoint(point.clone()),
        InitSpecConfig::Uniform => InitSpec::Uniform,
    };

    let record = match (cfg.record.every, cfg.record.points) {
        (Some(k), _) => RecordSpec::Every(k),
        (None, points) => RecordSpec::LogSpaced(points.unwrap_or(DEFAULT_RECORD_POINTS)),
    };

    Ok(RunConfig {
        seed: cfg.seed,
        horizon: cfg.horizon,
        objective,
        topology,
        mixing,
        kernel,
        estimator,
        noise,
        schedule,
        init,
        record,
        config_hash: config_hash(cfg),
    })
}

/// Runs the config once.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Trace> {
    optimizer::run(&build(cfg)?)
}

/// Runs one trace per seed, in parallel, against the same instance. Seeds
/// must be distinct; traces come back in seed order.
pub fn sweep_seeds(base: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<Trace>> {
    let mut seen = BTreeSet::new();
    for &s in seeds {
        if !seen.insert(s) {
            return Err(Error::DuplicateSeed(s));
        }
    }
    let proto = build(base)?;
    let runs: Vec<RunConfig> = seeds
        .iter()
        .map(|&s| {
            let mut rc = proto.clone();
            rc.seed = s;
            let mut ec = base.clone();
            ec.seed = s;
            rc.config_hash = config_hash(&ec);
            rc
        })
        .collect();
    exec::indexed_map(runs.len(), |i| optimizer::run(&runs[i])).into_iter().collect()
}

/// The consecutive seed list `seed, seed+1, ..` of length `k` used by sweeps.
pub fn consecutive_seeds(seed: u64, k: u64) -> Vec<u64> {
    (0..k).map(|i| seed.wrapping_add(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "seed": 7, "T": 32, "n": 4, "d": 2,
            "graph": {"kind": "ring"},
            "beta": 2,
            "estimator": "kernel",
            "objective": {"kind": "quadratic", "alpha": 1.0, "lbar": 4.0},
            "theta": {"kind": "ball", "center": [0, 0], "radius": 5.0},
            "noise": {"kind": "gaussian", "sigma": 0.5},
            "schedule": {"kind": "strongly_convex_pl", "alpha": 1.0}
        }"#
        .to_owned()
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = parse_config(&minimal()).unwrap();
        assert_eq!(cfg.horizon, 32);
        assert_eq!(cfg.init, InitSpecConfig::SharedPoint { point: None });
        assert_eq!(cfg.record, RecordConfig::default());
        assert_eq!(cfg.seeds, None);
        let rc = build(&cfg).unwrap();
        assert_eq!(rc.record, RecordSpec::LogSpaced(DEFAULT_RECORD_POINTS));
        assert!(rc.kernel.is_some());
        assert_eq!(rc.mixing.n(), 4);
    }

    #[test]
    fn plain_beta2_requires_beta_two() {
        let text = minimal()
            .replace("\"kernel\"", "\"plain_beta2\"")
            .replace("\"beta\": 2", "\"beta\": 3");
        let errs = parse_config(&text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("plain_beta2") && e.contains("beta = 2")),
            "constraint not named: {errs:?}"
        );
    }

    #[test]
    fn unknown_keys_are_listed() {
        let text = minimal().replace("\"seed\": 7,", "\"seed\": 7, \"foo\": 1,");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("unknown key `foo`")), "{errs:?}");
        let text = minimal().replace("\"kind\": \"ring\"", "\"kind\": \"ring\", \"weight\": 2");
        let errs = parse_config(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("unknown key `graph.weight`")), "{errs:?}");
    }

    #[test]
    fn all_problems_reported_at_once() {
        let text = r#"{
            "seed": 1, "T": 0, "n": 4, "d": 2,
            "graph": {"kind": "mesh"},
            "beta": 1.5,
            "estimator": "kernel",
            "objective": {"kind": "quadratic", "alpha": -1.0, "lbar": 4.0},
            "theta": {"kind": "ball", "center": [0, 0], "radius": -2},
            "noise": {"kind": "gaussian", "sigma": -0.5},
            "schedule": {"kind": "strongly_convex_pl", "alpha": 1.0}
        }"#;
        let errs = parse_config(text).unwrap_err();
        assert!(errs.len() >= 6, "expected many problems, got {errs:?}");
        for needle in ["`T`", "mesh", "`beta`", "alpha", "radius", "sigma"] {
            assert!(errs.iter().any(|e| e.contains(needle)), "missing {needle}: {errs:?}");
        }
    }

    #[test]
    fn graph_validation() {
        let text = minimal().replace("{\"kind\": \"ring\"}", "{\"kind\": \"erdos_renyi\"}");
        assert!(parse_config(&text).unwrap_err().iter().any(|e| e.contains("graph.p")));
        let text =
            minimal().replace("{\"kind\": \"ring\"}", "{\"kind\": \"erdos_renyi\", \"p\": 1.5}");
        assert!(parse_config(&text).unwrap_err().iter().any(|e| e.contains("(0, 1]")));
        let text = minimal().replace("{\"kind\": \"ring\"}", "{\"kind\": \"ring\", \"p\": 0.5}");
        assert!(parse_config(&text).unwrap_err().iter().any(|e| e.contains("takes no key")));
        let text = minimal()
            .replace("{\"kind\": \"ring\"}", "{\"kind\": \"grid\"}")
            .replace("\"n\": 4", "\"n\": 5");
        assert!(parse_config(&text).unwrap_err().iter().any(|e| e.contains("square")));
        let ok = minimal().replace("{\"kind\": \"ring\"}", "{\"kind\": \"grid\"}");
        parse_config(&ok).unwrap();
    }

    #[test]
    fn hard_objective_owns_its_theta() {
        let with_theta = minimal().replace(
            "{\"kind\": \"quadratic\", \"alpha\": 1.0, \"lbar\": 4.0}",
            "{\"kind\": \"hard\", \"alpha\": 1.0, \"omega\": [1, -1]}",
        );
        let errs = parse_config(&with_theta).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("own") && e.contains("theta")), "{errs:?}");
        let without = with_theta
            .replace("\"theta\": {\"kind\": \"ball\", \"center\": [0, 0], \"radius\": 5.0},", "");
        let cfg = parse_config(&without).unwrap();
        let rc = build(&cfg).unwrap();
        assert_eq!(rc.objective.dim(), 2);
        assert!(rc.objective.hard_instance().is_some());
    }

    #[test]
    fn precommitted_sequence_rules() {
        let make =
            |noise: &str| minimal().replace("{\"kind\": \"gaussian\", \"sigma\": 0.5}", noise);
        let short = make(
            "{\"kind\": \"precommitted_sequence\", \"sigma\": 1.0, \"sequence\": [0.1, -0.1]}",
        );
        let errs = parse_config(&short).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("2T")), "{errs:?}");
        let over = make(
            "{\"kind\": \"precommitted_sequence\", \"sigma\": 0.05, \"sequence\": [0.1, -0.1]}",
        );
        let errs = parse_config(&over).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("exceeds sigma")), "{errs:?}");
        let misplaced = make("{\"kind\": \"gaussian\", \"sigma\": 0.5, \"sequence\": [0.1]}");
        let errs = parse_config(&misplaced).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("takes no key `sequence`")), "{errs:?}");
    }

    #[test]
    fn record_cadence_is_exclusive() {
        let both = minimal()
            .replace("\"schedule\"", "\"record\": {\"every\": 5, \"points\": 10}, \"schedule\"");
        let errs = parse_config(&both).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("not both")), "{errs:?}");
        let off =
            minimal().replace("\"schedule\"", "\"record\": {\"log_spaced\": false}, \"schedule\"");
        let errs = parse_config(&off).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("requires `every`")), "{errs:?}");
        let every = minimal().replace("\"schedule\"", "\"record\": {\"every\": 5}, \"schedule\"");
        let rc = build(&parse_config(&every).unwrap()).unwrap();
        assert_eq!(rc.record, RecordSpec::Every(5));
    }

    #[test]
    fn json_parse_error_is_single_message() {
        let errs = parse_config("not json").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("json parse error"));
    }

    #[test]
    fn hash_is_canonical_and_seed_sensitive() {
        let a = parse_config(&minimal()).unwrap();
        // Same content, different formatting and key order.
        let shuffled = r#"{
            "T": 32, "seed": 7, "d": 2, "n": 4,
            "beta": 2,
            "graph": {"kind": "ring"},
            "objective": {"lbar": 4.0, "kind": "quadratic", "alpha": 1.0},
            "estimator": "kernel",
            "noise": {"sigma": 0.5, "kind": "gaussian"},
            "theta": {"radius": 5.0, "kind": "ball", "center": [0, 0]},
            "schedule": {"alpha": 1.0, "kind": "strongly_convex_pl"}
        }"#;
        let b = parse_config(shuffled).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        // The sweep extension does not change the run identity.
        let mut c = a.clone();
        c.seeds = Some(8);
        assert_eq!(config_hash(&a), config_hash(&c));
        // Explicitly spelling out the default cadence does not either.
        let mut d = a.clone();
        d.record.log_spaced = Some(true);
        d.record.points = Some(DEFAULT_RECORD_POINTS);
        assert_eq!(config_hash(&a), config_hash(&d));
        let mut e = a.clone();
        e.seed = 8;
        assert_ne!(config_hash(&a), config_hash(&e));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn build_is_deterministic_across_calls() {
        let cfg = parse_config(&minimal()).unwrap();
        let a = build(&cfg).unwrap();
        let b = build(&cfg).unwrap();
        assert_eq!(a.topology.edges(), b.topology.edges());
        let probe = [0.3, -0.4];
        assert_eq!(a.objective.value(&probe), b.objective.value(&probe));
        let (xa, fa) = a.objective.optimum().unwrap();
        let (xb, fb) = b.objective.optimum().unwrap();
        assert_eq!(xa, xb);
        assert_eq!(fa, fb);
    }

    #[test]
    fn run_experiment_round_trips_through_csv() {
        let mut cfg = parse_config(&minimal()).unwrap();
        cfg.record.points = Some(10);
        let trace = run_experiment(&cfg).unwrap();
        assert_eq!(trace.seed, 7);
        assert_eq!(trace.config_hash, config_hash(&cfg));
        let text = trace.to_csv();
        let rows = crate::metrics::rows_from_csv(&text).unwrap();
        assert_eq!(rows.len(), trace.rows.len());
    }

    #[test]
    fn sweep_runs_distinct_seeds_on_one_instance() {
        let mut cfg = parse_config(&minimal()).unwrap();
        cfg.horizon = 16;
        cfg.record.points = Some(6);
        let seeds = consecutive_seeds(cfg.seed, 3);
        assert_eq!(seeds, vec![7, 8, 9]);
        let traces = sweep_seeds(&cfg, &seeds).unwrap();
        assert_eq!(traces.len(), 3);
        // Different seeds explore differently but share the step grid.
        assert_ne!(traces[0].rows[1].f_mean_err, traces[1].rows[1].f_mean_err);
        let agg = crate::metrics::aggregate_traces(&traces).unwrap();
        assert_eq!(agg.t.len(), traces[0].rows.len());
        // Hashes differ only through the seed.
        assert_ne!(traces[0].config_hash, traces[1].config_hash);
    }

    #[test]
    fn sweep_rejects_duplicate_seeds() {
        let cfg = parse_config(&minimal()).unwrap();
        assert!(matches!(sweep_seeds(&cfg, &[3, 3]), Err(Error::DuplicateSeed(3))));
    }

    #[test]
    fn uniform_init_and_plain_estimator_build() {
        let text = minimal()
            .replace("\"estimator\": \"kernel\"", "\"estimator\": \"plain_beta2\"")
            .replace(
                "\"schedule\": {\"kind\": \"strongly_convex_pl\", \"alpha\": 1.0}",
                "\"schedule\": {\"kind\": \"improved_beta2\", \"alpha\": 1.0}, \"init\": {\"kind\": \"uniform\"}",
            );
        let cfg = parse_config(&text).unwrap();
        let rc = build(&cfg).unwrap();
        assert!(rc.kernel.is_none());
        assert_eq!(rc.estimator, EstimatorVariant::PlainBeta2);
        assert_eq!(rc.init, InitSpec::Uniform);
        optimizer::run(&rc).unwrap();
    }

    #[test]
    fn init_point_must_match_dimension() {
        let bad = minimal().replace(
            "\"schedule\"",
            "\"init\": {\"kind\": \"shared_point\", \"point\": [1, 2, 3]}, \"schedule\"",
        );
        let errs = parse_config(&bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("init.point")), "{errs:?}");
    }
}
