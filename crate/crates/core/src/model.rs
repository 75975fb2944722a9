//! Low-rank dynamical network models, their graphs, and seeded generation.
//!
//! A model is the triple `(G_ml, G_l, Sigma_l)`:
//!
//! ```text
//! y_l(t) = w_l(t) + G_l(z) y_l(t)      w_l white, covariance diag(sigma_l)
//! y_m(t) = G_ml(z) y_l(t)
//! ```
//!
//! The first `m` channels are deterministic causal functions of the last `l`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LrdnError, Result};
use crate::polymat::{
    condition_number, PolynomialMatrix, DEFAULT_DECAY_TOL, DEFAULT_HORIZON, MAX_LEADING_CONDITION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrdnModel {
    pub m: usize,
    pub l: usize,
    /// `m x l` deterministic relation `G_ml(z)`.
    pub g_ml: PolynomialMatrix,
    /// `l x l` network filter `G_l(z)` with `[G_l(inf)]_ii = 0`.
    pub g_l: PolynomialMatrix,
    /// Diagonal of the noise covariance `Sigma_l` (variances).
    pub sigma_l: Vec<f64>,
}

impl LrdnModel {
    pub fn new(g_ml: PolynomialMatrix, g_l: PolynomialMatrix, sigma_l: Vec<f64>) -> Result<Self> {
        let l = g_l.rows();
        if g_l.cols() != l {
            return Err(LrdnError::ShapeMismatch(format!("G_l must be square, got {:?}", g_l.shape())));
        }
        if g_ml.cols() != l {
            return Err(LrdnError::ShapeMismatch(format!(
                "G_ml must have {l} columns, got {:?}",
                g_ml.shape()
            )));
        }
        if sigma_l.len() != l {
            return Err(LrdnError::ShapeMismatch(format!(
                "sigma_l has length {}, expected {l}",
                sigma_l.len()
            )));
        }
        Ok(Self {
            m: g_ml.rows(),
            l,
            g_ml,
            g_l,
            sigma_l,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.m + self.l
    }

    /// `I - G_l(z)`.
    pub fn i_minus_g_l(&self) -> PolynomialMatrix {
        PolynomialMatrix::identity(self.l)
            .sub(&self.g_l)
            .expect("G_l is square")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn check_shapes(&self) -> std::result::Result<(), String> {
        if self.g_l.shape() != (self.l, self.l) {
            return Err(format!("G_l has shape {:?}, expected ({1}, {1})", self.g_l.shape(), self.l));
        }
        if self.g_ml.shape() != (self.m, self.l) {
            return Err(format!("G_ml has shape {:?}, expected ({}, {})", self.g_ml.shape(), self.m, self.l));
        }
        if self.sigma_l.len() != self.l {
            return Err(format!("sigma_l has length {}, expected {}", self.sigma_l.len(), self.l));
        }
        Ok(())
    }
}

/// One line of a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured margin (meaning depends on the check).
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg = self
            .failures()
            .iter()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Err(LrdnError::InvalidModel(msg))
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {:<24} {:>12.4e}  {}",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Checks the standing assumptions with the default horizon and decay tolerance.
pub fn validate(model: &LrdnModel) -> ValidationReport {
    validate_with(model, DEFAULT_HORIZON, DEFAULT_DECAY_TOL)
}

pub fn validate_with(model: &LrdnModel, horizon: usize, decay_tol: f64) -> ValidationReport {
    let mut checks = Vec::new();
    if let Err(detail) = model.check_shapes() {
        checks.push(Check {
            name: "shapes".into(),
            passed: false,
            value: f64::NAN,
            detail,
        });
        return ValidationReport { checks };
    }

    let g0 = model.g_l.coeff(0);
    let worst_diag = (0..model.l).map(|i| g0[(i, i)].abs()).fold(0.0, f64::max);
    checks.push(Check {
        name: "strict_diagonal".into(),
        passed: worst_diag == 0.0,
        value: worst_diag,
        detail: "max |[G_l(inf)]_ii| must be exactly 0".into(),
    });

    let lead = DMatrix::identity(model.l, model.l) - g0;
    let condition = condition_number(&lead);
    let well_posed = condition < MAX_LEADING_CONDITION;
    checks.push(Check {
        name: "well_posed".into(),
        passed: well_posed,
        value: condition,
        detail: format!("cond(I - G_l(inf)) must be below {MAX_LEADING_CONDITION:e}"),
    });

    let (decays, tail) = if well_posed {
        match model.i_minus_g_l().truncated_inverse(horizon, decay_tol) {
            Ok(inv) => (true, inv.tail_norm),
            Err(LrdnError::NoDecay { tail_norm, .. }) => (false, tail_norm),
            Err(_) => (false, f64::INFINITY),
        }
    } else {
        (false, f64::INFINITY)
    };
    checks.push(Check {
        name: "stable".into(),
        passed: decays,
        value: tail,
        detail: format!("||[(I - G_l)^-1]_{horizon}||_F must be at most {decay_tol:e}"),
    });

    let min_sigma = model.sigma_l.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "positive_noise".into(),
        passed: model.sigma_l.iter().all(|&s| s > 0.0 && s.is_finite()),
        value: min_sigma,
        detail: "sigma_l entries must be positive".into(),
    });

    ValidationReport { checks }
}

/// Directed graph of a model on nodes `1..=m+l`.
///
/// An edge `(i, j)` means node `j` (always in `V_l = {m+1..m+l}`) drives node `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct DirectedGraph {
    m: usize,
    l: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn empty(m: usize, l: usize) -> Self {
        Self {
            m,
            l,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(m: usize, l: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(m, l);
        for (i, j) in edges {
            g.insert(i, j)?;
        }
        Ok(g)
    }

    /// Inserts `(target, source)`.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.m + self.l;
        if i == 0 || i > n {
            return Err(LrdnError::IndexOutOfRange { index: i, len: n });
        }
        if j <= self.m || j > n {
            return Err(LrdnError::InvalidConfig(format!(
                "edge ({i}, {j}): source must lie in V_l = {}..={n}",
                self.m + 1
            )));
        }
        self.edges.insert((i, j));
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn num_nodes(&self) -> usize {
        self.m + self.l
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    /// Edges into nodes of `V_l`.
    pub fn l_edges(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.edges.iter().filter(move |(i, _)| *i > self.m)
    }

    /// Edges into nodes of `V \ V_l`.
    pub fn m_edges(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.edges.iter().filter(move |(i, _)| *i <= self.m)
    }

    /// Graphviz rendering; `V_l` nodes carry `partition="l"` and a darker fill.
    pub fn to_dot(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            let _ = writeln!(out, "// {c}");
        }
        out.push_str("digraph lrdn {\n");
        for v in 1..=self.num_nodes() {
            if v > self.m {
                let _ = writeln!(
                    out,
                    "  {v} [label=\"y{v}\", partition=\"l\", style=filled, fillcolor=\"#1f4e99\", fontcolor=white];"
                );
            } else {
                let _ = writeln!(
                    out,
                    "  {v} [label=\"y{v}\", partition=\"m\", style=filled, fillcolor=\"#a9c8f0\"];"
                );
            }
        }
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "  {j} -> {i};");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    m: usize,
    l: usize,
    num_nodes: usize,
    /// `[target, source]` pairs.
    edges: Vec<[usize; 2]>,
}

impl From<DirectedGraph> for GraphJson {
    fn from(g: DirectedGraph) -> Self {
        Self {
            m: g.m,
            l: g.l,
            num_nodes: g.m + g.l,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl TryFrom<GraphJson> for DirectedGraph {
    type Error = String;

    fn try_from(j: GraphJson) -> std::result::Result<Self, String> {
        if j.num_nodes != j.m + j.l {
            return Err(format!("num_nodes {} != m + l = {}", j.num_nodes, j.m + j.l));
        }
        DirectedGraph::from_edges(j.m, j.l, j.edges.into_iter().map(|[i, j]| (i, j))).map_err(|e| e.to_string())
    }
}

/// Graph read off the supports of `G_ml` and `G_l`.
pub fn true_graph(model: &LrdnModel, zero_tol: f64) -> DirectedGraph {
    graph_from_supports(model.m, model.l, &model.g_ml.support(zero_tol), &model.g_l.support(zero_tol))
}

/// Builds a graph from an `m x l` support (edges into `V \ V_l`) and an
/// `l x l` support (edges into `V_l`).
pub fn graph_from_supports(m: usize, l: usize, support_ml: &DMatrix<bool>, support_l: &DMatrix<bool>) -> DirectedGraph {
    let mut g = DirectedGraph::empty(m, l);
    for i in 0..m {
        for j in 0..l {
            if support_ml[(i, j)] {
                g.edges.insert((i + 1, m + j + 1));
            }
        }
    }
    for i in 0..l {
        for j in 0..l {
            if support_l[(i, j)] {
                g.edges.insert((m + i + 1, m + j + 1));
            }
        }
    }
    g
}

/// How a generator picks the support of one filter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportSpec {
    /// No nonzero entries.
    Empty,
    /// Every admissible entry is nonzero.
    Full,
    /// This many admissible entries, chosen uniformly at random.
    Count(usize),
    /// An explicit row-major boolean mask.
    Mask(Vec<Vec<bool>>),
}

/// Configuration for [`random_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub m: usize,
    pub l: usize,
    /// Maximum lag of `G_ml` (lags `0..=degree_ml` are admissible).
    pub degree_ml: usize,
    /// Maximum lag of `G_l` (lags `1..=degree_l`, plus lag 0 off the diagonal
    /// when `contemporaneous` is set).
    pub degree_l: usize,
    pub support_ml: SupportSpec,
    pub support_l: SupportSpec,
    pub coeff_min: f64,
    pub coeff_max: f64,
    /// Probability that an admissible lag beyond the one forced nonzero is also nonzero.
    pub lag_fill: f64,
    /// Allow degree-0 off-diagonal terms in `G_l` (strictly lower triangular).
    pub contemporaneous: bool,
    /// 1-based indices into `y_l` of channels pinned to pure noise (zero row of `G_l`).
    pub pinned_noise: Vec<usize>,
    /// Noise variances; all ones when absent.
    pub sigma_l: Option<Vec<f64>>,
    pub max_rejections: usize,
    pub rng_seed: u64,
    pub horizon: usize,
    pub decay_tol: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            m: 8,
            l: 4,
            degree_ml: 2,
            degree_l: 2,
            support_ml: SupportSpec::Count(17),
            support_l: SupportSpec::Count(8),
            coeff_min: 0.3,
            coeff_max: 0.6,
            lag_fill: 0.3,
            contemporaneous: false,
            pinned_noise: vec![4],
            sigma_l: None,
            max_rejections: 1000,
            rng_seed: 0,
            horizon: DEFAULT_HORIZON,
            decay_tol: DEFAULT_DECAY_TOL,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LrdnError::InvalidConfig(msg));
        if self.l == 0 {
            return bad("l must be positive".into());
        }
        if !(self.coeff_min > 0.0 && self.coeff_min <= self.coeff_max && self.coeff_max.is_finite()) {
            return bad(format!(
                "coefficient range [{}, {}] must satisfy 0 < min <= max",
                self.coeff_min, self.coeff_max
            ));
        }
        if !(0.0..=1.0).contains(&self.lag_fill) {
            return bad(format!("lag_fill {} must lie in [0, 1]", self.lag_fill));
        }
        if let Some(&p) = self.pinned_noise.iter().find(|&&p| p == 0 || p > self.l) {
            return bad(format!("pinned noise channel {p} outside 1..={}", self.l));
        }
        if let Some(s) = &self.sigma_l {
            if s.len() != self.l || s.iter().any(|&v| !(v > 0.0)) {
                return bad("sigma_l must have l positive entries".into());
            }
        }
        if self.max_rejections == 0 {
            return bad("max_rejections must be positive".into());
        }
        self.check_support(&self.support_ml, &self.admissible_ml(), "support_ml")?;
        self.check_support(&self.support_l, &self.admissible_l(), "support_l")?;
        Ok(())
    }

    fn admissible_ml(&self) -> Vec<Vec<bool>> {
        vec![vec![true; self.l]; self.m]
    }

    /// Entry `(i, j)` of `G_l` may be nonzero: not in a pinned row, and a
    /// diagonal entry needs a strictly causal lag.
    fn admissible_l(&self) -> Vec<Vec<bool>> {
        (0..self.l)
            .map(|i| {
                (0..self.l)
                    .map(|j| {
                        if self.pinned_noise.contains(&(i + 1)) {
                            return false;
                        }
                        if i == j {
                            self.degree_l >= 1
                        } else {
                            self.degree_l >= 1 || (self.contemporaneous && i > j)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn check_support(&self, spec: &SupportSpec, admissible: &[Vec<bool>], name: &str) -> Result<()> {
        let slots = admissible.iter().flatten().filter(|&&b| b).count();
        match spec {
            SupportSpec::Empty | SupportSpec::Full => Ok(()),
            SupportSpec::Count(n) if *n <= slots => Ok(()),
            SupportSpec::Count(n) => Err(LrdnError::InvalidConfig(format!(
                "{name}: {n} edges requested but only {slots} admissible entries"
            ))),
            SupportSpec::Mask(mask) => {
                let rows = admissible.len();
                let cols = admissible.first().map_or(self.l, Vec::len);
                if mask.len() != rows || mask.iter().any(|r| r.len() != cols) {
                    return Err(LrdnError::InvalidConfig(format!("{name}: mask must be {rows}x{cols}")));
                }
                for (i, row) in mask.iter().enumerate() {
                    for (j, &b) in row.iter().enumerate() {
                        if b && !admissible[i][j] {
                            return Err(LrdnError::InvalidConfig(format!(
                                "{name}: entry ({}, {}) is not admissible",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn draw_support(spec: &SupportSpec, admissible: &[Vec<bool>], rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let rows = admissible.len();
    let cols = admissible.first().map_or(0, Vec::len);
    match spec {
        SupportSpec::Empty => vec![vec![false; cols]; rows],
        SupportSpec::Full => admissible.to_vec(),
        SupportSpec::Mask(mask) => mask.clone(),
        SupportSpec::Count(n) => {
            let slots: Vec<(usize, usize)> = (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (i, j)))
                .filter(|&(i, j)| admissible[i][j])
                .collect();
            let mut out = vec![vec![false; cols]; rows];
            for idx in sample(rng, slots.len(), *n).into_iter() {
                let (i, j) = slots[idx];
                out[i][j] = true;
            }
            out
        }
    }
}

fn draw_coefficient(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = if cfg.coeff_max > cfg.coeff_min {
        rng.random_range(cfg.coeff_min..=cfg.coeff_max)
    } else {
        cfg.coeff_min
    };
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Fills the supported entries of a polynomial; every supported entry gets
/// one forced nonzero lag and each other admissible lag with probability `lag_fill`.
fn fill_block(
    cfg: &GeneratorConfig,
    support: &[Vec<bool>],
    cols: usize,
    degree: usize,
    lags_for: impl Fn(usize, usize) -> Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> PolynomialMatrix {
    let rows = support.len();
    let mut p = PolynomialMatrix::zeros(rows, cols, degree);
    for (i, row) in support.iter().enumerate() {
        for (j, &on) in row.iter().enumerate() {
            if !on {
                continue;
            }
            let lags = lags_for(i, j);
            let forced = lags[rng.random_range(0..lags.len())];
            for &k in &lags {
                if k == forced || rng.random_bool(cfg.lag_fill) {
                    p.coeff_mut(k)[(i, j)] = draw_coefficient(cfg, rng);
                }
            }
        }
    }
    p
}

/// Draws a random validated model; deterministic in `config.rng_seed`.
///
/// Supports, lags and values are redrawn until the model validates, at most
/// `max_rejections` times.
pub fn random_model(config: &GeneratorConfig) -> Result<LrdnModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let sigma = config.sigma_l.clone().unwrap_or_else(|| vec![1.0; config.l]);
    let adm_ml = config.admissible_ml();
    let adm_l = config.admissible_l();
    for _ in 0..config.max_rejections {
        let sup_ml = draw_support(&config.support_ml, &adm_ml, &mut rng);
        let sup_l = draw_support(&config.support_l, &adm_l, &mut rng);
        let g_ml = fill_block(config, &sup_ml, config.l, config.degree_ml, |_, _| (0..=config.degree_ml).collect(), &mut rng);
        let g_l = fill_block(
            config,
            &sup_l,
            config.l,
            config.degree_l,
            |i, j| {
                let first = if config.contemporaneous && i > j { 0 } else { 1 };
                (first..=config.degree_l).collect()
            },
            &mut rng,
        );
        let model = LrdnModel {
            m: config.m,
            l: config.l,
            g_ml,
            g_l,
            sigma_l: sigma.clone(),
        };
        if validate_with(&model, config.horizon, config.decay_tol).is_valid() {
            return Ok(model);
        }
    }
    Err(LrdnError::GenerationFailed {
        attempts: config.max_rejections,
    })
}

/// `W(z) = (I - G_l(z))^-1` truncated at `horizon`, and the stacked transfer
/// `[G_ml W; W]` from `w_l` to `y`.
#[derive(Debug, Clone)]
pub struct ReducedForm {
    pub w_factor: PolynomialMatrix,
    pub full_transfer: PolynomialMatrix,
    pub tail_norm: f64,
}

pub fn reduced_form(model: &LrdnModel, horizon: usize) -> Result<ReducedForm> {
    reduced_form_with(model, horizon, DEFAULT_DECAY_TOL)
}

pub fn reduced_form_with(model: &LrdnModel, horizon: usize, decay_tol: f64) -> Result<ReducedForm> {
    validate_with(model, horizon, decay_tol).into_result()?;
    let inv = model.i_minus_g_l().truncated_inverse(horizon, decay_tol)?;
    let w = inv.inverse;
    let hw = model.g_ml.mul(&w)?.with_degree(horizon);
    let full_transfer = hw.vstack(&w)?;
    Ok(ReducedForm {
        w_factor: w,
        full_transfer,
        tail_norm: inv.tail_norm,
    })
}
