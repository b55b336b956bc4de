//! Command-line front end: JSON configs in, manifests out.
//!
//! Exit status: 0 success, 1 failed check or computation error, 2 config
//! error, 3 precision certification failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bound::{parse_ratio, ratio_string};
use crate::detlaws::{self, AlgElem, DetError, MatrixDetLaw, Poly};
use crate::fredholm::{self, FredError, FredholmSeries};
use crate::mahler::{MahlerError, MahlerFn, Tail};
use crate::opmat::{self, OpError, OpMatrix, PolyMap};
use crate::rings::{Elem, Ring, RingError, RingSpec};
use crate::selftest;
use crate::upengine::{self, IwahoriMat, UpError};
use crate::weights::{self, DatumType, Factor, RootDatum, WeightChar, WeightError};

pub const SCHEMA_VERSION: u32 = 1;

pub const COMMANDS: [&str; 12] = [
    "ring-info",
    "mahler-fit",
    "mahler-eval",
    "opmat",
    "charseries",
    "polygon",
    "factor",
    "up-slopes",
    "classicality",
    "nbound",
    "detratio",
    "selftest",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precision: {0}")]
    Precision(String),
    #[error("{0}")]
    Compute(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precision(_) => 3,
            _ => 1,
        }
    }
}

fn cfg(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<FredError> for CliError {
    fn from(e: FredError) -> Self {
        match e {
            FredError::GrowCutoff { .. } | FredError::NoBound(_) | FredError::Unseparated(_) | FredError::Precision(_) => {
                CliError::Precision(e.to_string())
            }
            FredError::Ambiguous(_) | FredError::Unsupported(_) | FredError::SizeLimit(..) => CliError::Config(e.to_string()),
            e => CliError::Compute(e.to_string()),
        }
    }
}

impl From<UpError> for CliError {
    fn from(e: UpError) -> Self {
        match e {
            UpError::Fred(f) => f.into(),
            UpError::NotIwahori(..) | UpError::Rank | UpError::Weight(_) => CliError::Config(e.to_string()),
            e => CliError::Compute(e.to_string()),
        }
    }
}

impl From<OpError> for CliError {
    fn from(e: OpError) -> Self {
        match e {
            OpError::Uncertified(_) => CliError::Precision(e.to_string()),
            OpError::Radii { .. } | OpError::Shape(_) => CliError::Config(e.to_string()),
            e => CliError::Compute(e.to_string()),
        }
    }
}

impl From<MahlerError> for CliError {
    fn from(e: MahlerError) -> Self {
        match e {
            MahlerError::IncompleteGrid { .. } | MahlerError::Mismatch | MahlerError::NotNilpotent(_) => CliError::Config(e.to_string()),
            e => CliError::Compute(e.to_string()),
        }
    }
}

impl From<RingError> for CliError {
    fn from(e: RingError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<WeightError> for CliError {
    fn from(e: WeightError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DetError> for CliError {
    fn from(e: DetError) -> Self {
        match e {
            DetError::Parse(_) | DetError::Shape(_) | DetError::Dimensions { .. } => CliError::Config(e.to_string()),
            e => CliError::Compute(e.to_string()),
        }
    }
}

/// A rational given as `"1/2"` or as a JSON integer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatioArg {
    Int(i64),
    Text(String),
}

impl RatioArg {
    pub fn get(&self) -> Result<Ratio<i64>, CliError> {
        match self {
            RatioArg::Int(n) => Ok(Ratio::from_integer(*n)),
            RatioArg::Text(s) => parse_ratio(s).ok_or_else(|| cfg(format!("not a rational: '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    /// `z ↦ z^k`
    Algebraic(u32),
    /// value at the generator, an integer `≡ 1 mod p`
    Generator(i64),
    /// `γ ↦ 1 + T` in a series model
    Boundary,
    Teichmuller(u32),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpSpec {
    /// `f ↦ f∘g`, `g` univariate in the binomial basis
    Pullback { map: Vec<i64> },
    /// `f ↦ f(pz + j)`
    Rescale { j: i64 },
    Inclusion,
    /// the weight-`λ` action of an Iwahori matrix on distributions
    Star { gamma: [i64; 4] },
    Up,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub name: String,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub dim: usize,
    pub generators: Vec<GenSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// the element as a sum of words in generator names; `[]` is `1`
    pub element: Vec<Vec<String>>,
    pub samples: usize,
}

/// Every command reads the fields it needs and ignores the rest.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<RatioArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<RatioArg>,
    /// Mahler cutoff `D`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_out: Option<u32>,
    /// `X`-degree
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k_degree: Option<usize>,
    /// required coefficient precision (absolute valuation)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<i64>,
    /// number of variables
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<i64>>,
    /// CSV rows `z_1, …, z_k, value`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_csv: Option<PathBuf>,
    /// Mahler coefficients in multi-index order
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<OpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<i64>>>,
    /// Fredholm coefficients `1, a_1, …`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<i64>>,
    /// the series is a polynomial (coefficients past the list vanish)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<RatioArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datum: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<LawSpec>,
    /// sample elements for the determinant checks, as words
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modules: Option<Vec<String>>,
}

const MAX_CUTOFF: u32 = 400;
const MAX_K: usize = 64;

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        serde_json::from_str(text).map_err(|e| cfg(format!("malformed config: {e}")))
    }

    fn ring(&self) -> Result<RingSpec, CliError> {
        let r = self.ring.ok_or_else(|| cfg("missing 'ring'"))?;
        r.validate().map_err(|e| cfg(format!("ring: {e}")))?;
        Ok(r)
    }

    fn cutoff(&self) -> Result<u32, CliError> {
        let d = self.cutoff.ok_or_else(|| cfg("missing 'cutoff'"))?;
        if d > MAX_CUTOFF {
            return Err(cfg(format!("cutoff {d} exceeds {MAX_CUTOFF}")));
        }
        Ok(d)
    }

    fn k_degree(&self) -> Result<usize, CliError> {
        let k = self.k_degree.ok_or_else(|| cfg("missing 'K'"))?;
        if k == 0 || k > MAX_K {
            return Err(cfg(format!("K must lie in 1..={MAX_K}")));
        }
        Ok(k)
    }

    fn r(&self) -> Result<Ratio<i64>, CliError> {
        let r = self.r.as_ref().ok_or_else(|| cfg("missing 'r'"))?.get()?;
        if r < Ratio::from_integer(0) {
            return Err(cfg("radius must be ≥ 0"));
        }
        Ok(r)
    }

    fn weight(&self, ring: RingSpec) -> Result<WeightChar, CliError> {
        let f = match self.weight.as_ref().ok_or_else(|| cfg("missing 'weight'"))? {
            WeightSpec::Algebraic(k) => Factor::Algebraic(*k),
            WeightSpec::Teichmuller(j) => Factor::Teichmuller(*j),
            WeightSpec::Generator(u) => Factor::Generator(Elem::from_int(ring, *u)),
            WeightSpec::Boundary => {
                if !ring.is_series() {
                    return Err(cfg("the boundary weight needs a series model"));
                }
                Factor::Generator(Elem::one(ring).add(&Elem::alpha(ring))?)
            }
        };
        Ok(WeightChar::new(ring, vec![f])?)
    }
}

/// Parsed command line, independent of the argument parser.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub command: String,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// The result of one command: its payload and whether every number in it is certified.
pub struct Outcome {
    pub result: Value,
    pub certified: bool,
    /// a check ran and failed; the artifact is still written
    pub failed: bool,
}

fn ok(result: Value, certified: bool) -> Outcome {
    Outcome { result, certified, failed: false }
}

pub fn manifest(command: &str, config: &RunConfig, seed: u64, out: &Outcome) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "versions": {"tate-spectral": env!("CARGO_PKG_VERSION")},
        "seed": seed,
        "certified": out.certified,
        "status": if out.failed { "fail" } else { "ok" },
        "result": out.result,
    })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Runs one invocation and returns the rendered manifest.
pub fn run(inv: &Invocation) -> Result<(String, bool), CliError> {
    if !COMMANDS.contains(&inv.command.as_str()) {
        return Err(cfg(format!("unknown command '{}'", inv.command)));
    }
    let config = match &inv.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| cfg(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = &config.command {
        if *c != inv.command {
            return Err(cfg(format!("config is for '{c}', invoked as '{}'", inv.command)));
        }
    }
    let out = dispatch(&inv.command, &config, inv.seed)?;
    let text = serde_json::to_string_pretty(&manifest(&inv.command, &config, inv.seed, &out)).expect("json") + "\n";
    Ok((text, out.failed))
}

pub fn dispatch(command: &str, c: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    match command {
        "ring-info" => ring_info(c),
        "mahler-fit" => mahler_fit(c),
        "mahler-eval" => mahler_eval(c),
        "opmat" => op_matrix(c),
        "charseries" => charseries(c),
        "polygon" => polygon(c),
        "factor" => factor(c),
        "up-slopes" => up_slopes(c),
        "classicality" => classicality(c),
        "nbound" => nbound(c),
        "detratio" => detratio(c, seed),
        "selftest" => {
            let mods = c.modules.clone().unwrap_or_default();
            let rep = selftest::run(&mods, seed).map_err(cfg)?;
            let pass = rep.pass;
            Ok(Outcome { result: serde_json::to_value(&rep).expect("json"), certified: pass, failed: !pass })
        }
        _ => Err(cfg(format!("unknown command '{command}'"))),
    }
}

fn ring_info(c: &RunConfig) -> Result<Outcome, CliError> {
    let spec = c.ring()?;
    let ring = Ring::new(spec)?;
    Ok(ok(
        json!({
            "ring": spec,
            "display": spec.to_string(),
            "modulus": ring.modulus(),
            "cap": ring.cap(),
            "alpha": ring.alpha().repr(),
            "alpha_invertible": spec.alpha_invertible(),
            "field_like": spec.is_field(),
        }),
        true,
    ))
}

fn grid_values(c: &RunConfig, ring: RingSpec, k: usize, d: u32) -> Result<Vec<Elem>, CliError> {
    let side = d as usize + 1;
    let want = side.pow(k as u32);
    let ints: Vec<i64> = match (&c.values, &c.grid_csv) {
        (Some(v), None) => v.clone(),
        (None, Some(path)) => {
            let mut rd = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .comment(Some(b'#'))
                .from_path(path)
                .map_err(|e| cfg(format!("grid csv: {e}")))?;
            let mut vals: Vec<Option<i64>> = vec![None; want];
            for rec in rd.records() {
                let rec = rec.map_err(|e| cfg(format!("grid csv: {e}")))?;
                let nums: Vec<i64> = rec
                    .iter()
                    .map(|f| f.parse::<i64>().map_err(|_| cfg(format!("grid csv: not an integer: '{f}'"))))
                    .collect::<Result<_, _>>()?;
                if nums.len() != k + 1 {
                    return Err(cfg(format!("grid csv: expected {} fields, got {}", k + 1, nums.len())));
                }
                if nums[..k].iter().any(|&z| z < 0 || z > d as i64) {
                    return Err(cfg(format!("grid csv: point {:?} outside the grid", &nums[..k])));
                }
                let pos = nums[..k].iter().fold(0usize, |a, &z| a * side + z as usize);
                vals[pos] = Some(nums[k]);
            }
            let got = vals.iter().filter(|v| v.is_some()).count();
            if got != want {
                return Err(cfg(format!("grid csv covers {got} of {want} points")));
            }
            vals.into_iter().map(|v| v.unwrap()).collect()
        }
        (Some(_), Some(_)) => return Err(cfg("give either 'values' or 'grid_csv', not both")),
        (None, None) => return Err(cfg("missing 'values' or 'grid_csv'")),
    };
    if ints.len() != want {
        return Err(cfg(format!("grid has {} values, expected {want}", ints.len())));
    }
    Ok(ints.iter().map(|&x| Elem::from_int(ring, x)).collect())
}

fn mahler_fit(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let k = c.dim.unwrap_or(1);
    let d = c.cutoff()?;
    let vals = grid_values(c, ring, k, d)?;
    let f = MahlerFn::fit_values(ring, k, d, &vals)?;
    let mut res = json!({"function": f.to_json()});
    if let Some(r) = &c.r {
        let r = r.get()?;
        res["norm_r"] = serde_json::to_value(f.norm_r(r)).expect("json");
        res["decay"] = serde_json::to_value(f.decay_report(r)).expect("json");
    }
    // the grid determines the coefficients through D; nothing is claimed beyond
    Ok(ok(res, true))
}

fn mahler_eval(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let k = c.dim.unwrap_or(1);
    let d = c.cutoff()?;
    let coeffs = c.coeffs.as_ref().ok_or_else(|| cfg("missing 'coeffs'"))?;
    let el: Vec<Elem> = coeffs.iter().map(|&x| Elem::from_int(ring, x)).collect();
    let f = MahlerFn::from_coeffs(ring, k, d, el, Tail::Zero)?;
    let pts = c.points.as_ref().ok_or_else(|| cfg("missing 'points'"))?;
    let mut out = Vec::new();
    for z in pts {
        if z.len() != k {
            return Err(cfg(format!("point {z:?} has {} coordinates, expected {k}", z.len())));
        }
        let ev = f.eval(z);
        out.push(json!({"z": z, "value": ev.value.repr(), "certified": ev.certified}));
    }
    Ok(ok(json!({"evaluations": out}), true))
}

fn op_matrix(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let d = c.cutoff()?;
    let r = c.r()?;
    let op = c.op.as_ref().ok_or_else(|| cfg("missing 'op'"))?;
    let m: OpMatrix = match op {
        OpSpec::Pullback { map } => {
            let s = c.s.as_ref().map(|s| s.get()).transpose()?.unwrap_or(r);
            let d_out = c.cutoff_out.unwrap_or(d);
            opmat::pullback(ring, &PolyMap::univariate(map), r, s, d, d_out)?
        }
        OpSpec::Rescale { j } => opmat::rescale(ring, &[*j], r, d)?,
        OpSpec::Inclusion => {
            let s = c.s.as_ref().ok_or_else(|| cfg("missing 's'"))?.get()?;
            opmat::inclusion(ring, c.dim.unwrap_or(1), r, s, d)?
        }
        OpSpec::Star { gamma: [a, b, cc, dd] } => {
            let g = IwahoriMat::new(ring.p, *a, *b, *cc, *dd)?;
            upengine::star_matrix(&g, &c.weight(ring)?, r, d)?
        }
        OpSpec::Up => upengine::up_matrix(&c.weight(ring)?, r, d)?.matrix,
    };
    let cc = m.cc_certificate();
    let certified = cc.certified;
    Ok(ok(json!({"matrix": m.to_json(), "compactness": cc}), certified))
}

fn series_json(s: &FredholmSeries) -> (Value, bool) {
    let np = s.newton_polygon();
    let cert = s.all_certified();
    (json!({"series": s.to_json(), "polygon": np}), cert)
}

fn charseries(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let k = c.k_degree()?;
    let s = if let Some(rows) = &c.matrix {
        if rows.is_empty() || rows.iter().any(|r| r.len() != rows.len()) {
            return Err(cfg("'matrix' must be square and nonempty"));
        }
        let m = OpMatrix::from_ints(ring, rows)?;
        fredholm::char_series(&m, k, c.target)?
    } else {
        let u = upengine::up_matrix(&c.weight(ring)?, c.r()?, c.cutoff()?)?;
        u.char_series(k, c.target)?
    };
    let (v, cert) = series_json(&s);
    Ok(ok(v, cert))
}

fn series_arg(c: &RunConfig, ring: RingSpec) -> Result<FredholmSeries, CliError> {
    let a = c.series.as_ref().ok_or_else(|| cfg("missing 'series'"))?;
    if a.first() != Some(&1) {
        return Err(cfg("'series' must start with the constant term 1"));
    }
    let coeffs: Vec<Elem> = a.iter().map(|&x| Elem::from_int(ring, x)).collect();
    Ok(FredholmSeries::new(ring, coeffs, c.polynomial.unwrap_or(true))?)
}

fn polygon(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let s = series_arg(c, ring)?;
    let np = s.newton_polygon();
    let cert = np.segments.iter().all(|g| g.certified);
    let slopes: Vec<String> = np.slopes().iter().map(|x| ratio_string(*x)).collect();
    Ok(ok(json!({"polygon": np, "slopes": slopes}), cert))
}

fn factor(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let s = series_arg(c, ring)?;
    let nu = c.nu.as_ref().ok_or_else(|| cfg("missing 'nu'"))?.get()?;
    let f = fredholm::slope_factor(&s, nu)?;
    Ok(Outcome {
        result: json!({
            "nu": ratio_string(nu),
            "q": f.q.to_json(),
            "s": f.s.to_json(),
            "q_polygon": f.q.newton_polygon(),
            "s_polygon": f.s.newton_polygon(),
            "iterations": f.iterations,
            "residual_ok": f.residual_ok,
        }),
        certified: f.residual_ok,
        failed: !f.residual_ok,
    })
}

fn up_slopes(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let l = c.weight(ring)?;
    let r = c.r()?;
    let (s, np) = upengine::up_slopes(&l, r, c.cutoff()?, c.k_degree()?, c.target)?;
    let cert = s.all_certified();
    Ok(ok(
        json!({
            "r": ratio_string(r),
            "series": s.to_json(),
            "polygon": np,
            "slopes": np.slopes().iter().map(|x| ratio_string(*x)).collect::<Vec<_>>(),
            "certified_slopes": np.certified_slopes().iter().map(|x| ratio_string(*x)).collect::<Vec<_>>(),
        }),
        cert,
    ))
}

fn classicality(c: &RunConfig) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let k = c.k.ok_or_else(|| cfg("missing 'k'"))?;
    let r = c.r.as_ref().map(|x| x.get()).transpose()?.unwrap_or(Ratio::from_integer(1));
    let rep = upengine::classicality_check(ring, k, c.k_degree()?, c.cutoff()?, r)?;
    let decided = rep.degrees.iter().all(|g| g.decided);
    let holds = rep.holds;
    Ok(Outcome { result: serde_json::to_value(&rep).expect("json"), certified: decided, failed: !holds })
}

fn nbound(c: &RunConfig) -> Result<Outcome, CliError> {
    let label: DatumType = c.datum.as_deref().ok_or_else(|| cfg("missing 'datum'"))?.parse().map_err(|e: WeightError| cfg(e.to_string()))?;
    let datum = RootDatum::new(label);
    let mu = c.mu.clone().ok_or_else(|| cfg("missing 'mu'"))?;
    let tau = c.tau.clone().unwrap_or_else(|| weights::standard_tau(label));
    let e = datum.n_bound(&mu, &tau)?;
    Ok(ok(
        json!({
            "datum": format!("{label:?}"),
            "mu": mu,
            "tau": tau,
            "exponent": e,
            "bound": format!("p^{}", -e),
            "dominant": datum.is_dominant(&mu),
            "weyl_order": datum.weyl_group().len(),
        }),
        true,
    ))
}

fn law(ring: RingSpec, symbols: &[String], spec: &LawSpec) -> Result<MatrixDetLaw, CliError> {
    let mut gens = Vec::new();
    for g in &spec.generators {
        let rows = g
            .rows
            .iter()
            .map(|row| row.iter().map(|e| Poly::parse(ring, e, symbols)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        gens.push((g.name.clone(), rows));
    }
    Ok(MatrixDetLaw::new(ring, spec.dim, symbols.to_vec(), gens)?)
}

fn word_elem(ring: RingSpec, names: &[String], words: &[Vec<String>]) -> Result<AlgElem, CliError> {
    let mut e = AlgElem { terms: vec![] };
    for w in words {
        let idx = w
            .iter()
            .map(|g| names.iter().position(|n| n == g).ok_or_else(|| cfg(format!("unknown generator '{g}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        e = e.add(&AlgElem::word(ring, &idx));
    }
    Ok(e)
}

fn detratio(c: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let ring = c.ring()?;
    let symbols = c.symbols.clone().unwrap_or_default();
    let plus = law(ring, &symbols, c.plus.as_ref().ok_or_else(|| cfg("missing 'plus'"))?)?;
    let names: Vec<String> = c.plus.as_ref().unwrap().generators.iter().map(|g| g.name.clone()).collect();
    let mut res = serde_json::Map::new();
    let mut certified = true;
    let mut failed = false;
    if let Some(ms) = &c.minus {
        let minus = law(ring, &symbols, ms)?;
        let mnames: Vec<String> = ms.generators.iter().map(|g| g.name.clone()).collect();
        if mnames != names {
            return Err(cfg("'plus' and 'minus' must list the same generators in the same order"));
        }
        let samples: Vec<AlgElem> = match &c.samples {
            Some(ws) => ws.iter().map(|w| word_elem(ring, &names, std::slice::from_ref(w))).collect::<Result<_, _>>()?,
            None => (0..names.len()).map(|i| AlgElem::gen(ring, i)).collect(),
        };
        let dr = detlaws::det_ratio(&plus, &minus, &samples)?;
        let mut vars = symbols.clone();
        while vars.len() < plus.x0().max(minus.x0()) {
            vars.push(format!("_{}", vars.len()));
        }
        for i in 0..samples.len().max(1) {
            vars.push(format!("X{}", i + 1));
        }
        res.insert("ratio".into(), dr.to_json(&vars));
        certified &= dr.ok();
    }
    if let Some(ks) = &c.kernel {
        let el = word_elem(ring, &names, &ks.element)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rep = detlaws::kernel_test(&plus, &el, ks.samples, &mut rng)?;
        let mut vars = symbols.clone();
        vars.push("X".into());
        res.insert(
            "kernel".into(),
            json!({
                "passed": rep.passed,
                "samples": rep.samples,
                "witness_value": rep.witness.as_ref().map(|(_, v)| v.display(&vars)),
            }),
        );
        failed |= !rep.passed;
    }
    if res.is_empty() {
        return Err(cfg("give 'minus' for the ratio test, 'kernel' for the kernel test, or both"));
    }
    Ok(Outcome { result: Value::Object(res), certified, failed })
}

/// Human-readable usage summary of the config fields per command.
pub fn config_fields() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("ring-info", "ring"),
        ("mahler-fit", "ring, cutoff, dim?, values | grid_csv, r?"),
        ("mahler-eval", "ring, cutoff, dim?, coeffs, points"),
        ("opmat", "ring, cutoff, r, op{kind: pullback|rescale|inclusion|star|up}, s?, cutoff_out?, weight?"),
        ("charseries", "ring, K, target?, matrix | (weight, r, cutoff)"),
        ("polygon", "ring, series, polynomial?"),
        ("factor", "ring, series, polynomial?, nu"),
        ("up-slopes", "ring, weight, r, cutoff, K, target?"),
        ("classicality", "ring, k, K, cutoff, r?"),
        ("nbound", "datum, mu, tau?"),
        ("detratio", "ring, symbols, plus, minus?, samples?, kernel?"),
        ("selftest", "modules"),
    ])
}
