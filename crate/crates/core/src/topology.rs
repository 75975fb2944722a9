//! Directed topology recovery.
//!
//! An edge `(i, j)` with `j` in `V_l` exists iff the corresponding Wiener
//! filter entry is nonzero: `[H]_{i, j-m}` for `i <= m`, `[S]_{i-m, j-m}` for
//! `i > m`. From data, each entry is decided by a nested-regression group
//! F-test (conditional Granger causality). The `H` regression is noiseless for
//! an LRDN, so its entries are decided by coefficient-norm thresholding
//! whenever the fit is exact.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{LrdnError, Result};
use crate::model::{graph_from_supports, reduced_form, DirectedGraph, LrdnModel};
use crate::regress::{column_space, lagged_design, lagged_target, least_squares, projection_rss, LagColumn};
use crate::sim::TimeSeries;
use crate::wiener::{exact_filters, Block, ExactFilters, FilterEstimate};

/// A fit counts as noiseless when its residual RMS is at most this fraction of
/// the target RMS.
pub const NOISELESS_REL_TOL: f64 = 1e-8;
/// Required ratio between the weakest selected and strongest rejected channel.
pub const MIN_RANK_GAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Correction {
    None,
    Bonferroni,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionConfig {
    pub alpha: f64,
    pub correction: Correction,
    /// Coefficient-group norm threshold for noiseless (M block) fits.
    pub zero_tol: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            correction: Correction::None,
            zero_tol: 1e-6,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(LrdnError::InvalidConfig(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.zero_tol >= 0.0) {
            return Err(LrdnError::InvalidConfig(format!("zero_tol {} must be nonnegative", self.zero_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    /// Nested-regression F-test.
    FTest,
    /// Coefficient-norm threshold on an exact fit; `statistic` is `norm / zero_tol`.
    NormThreshold,
}

/// Outcome of testing one `(target, source)` pair. Nodes are 1-based in `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTestResult {
    pub source: usize,
    pub target: usize,
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub coeff_norm: f64,
    /// `RSS_restricted - RSS_full`.
    pub rss_increase: f64,
    pub decision: bool,
}

/// Tests whether node `source` (in `V_l`) drives node `target`.
///
/// `est` must be the `H` estimate for `target <= m` and the `S` estimate
/// otherwise; `data` must be the series it was fitted on.
pub fn edge_test(
    est: &FilterEstimate,
    data: &TimeSeries,
    target: usize,
    source: usize,
    alpha: f64,
    zero_tol: f64,
) -> Result<EdgeTestResult> {
    let (m, l) = (data.m, data.l);
    if target == 0 || target > m + l {
        return Err(LrdnError::IndexOutOfRange {
            index: target,
            len: m + l,
        });
    }
    if source <= m || source > m + l {
        return Err(LrdnError::InvalidConfig(format!(
            "source {source} is not in V_l = {}..={}",
            m + 1,
            m + l
        )));
    }
    let (block, row) = if target <= m { (Block::M, target - 1) } else { (Block::L, target - m - 1) };
    if est.block != block || row >= est.rows() {
        return Err(LrdnError::InvalidConfig(format!(
            "target {target} needs the {block:?} estimate, got {:?} with {} rows",
            est.block,
            est.rows()
        )));
    }
    let n = est.num_used();
    if data.num_samples() != n + est.order {
        return Err(LrdnError::ShapeMismatch(format!(
            "estimate used {} samples, data has {}",
            n + est.order,
            data.num_samples()
        )));
    }
    let src = source - m - 1;
    let group = est.regressor_groups[row]
        .iter()
        .find(|g| g.source == src)
        .filter(|g| !g.columns.is_empty())
        .ok_or_else(|| LrdnError::DegenerateRestriction {
            target,
            from: source,
            reason: "empty regressor group".into(),
        })?;
    let coeff_norm = est.group_coeffs(row, src).iter().map(|c| c * c).sum::<f64>().sqrt();

    // refit without the group
    let restricted: Vec<LagColumn> = est
        .row_columns(row)
        .into_iter()
        .enumerate()
        .filter(|(c, _)| !group.columns.contains(c))
        .map(|(_, col)| col)
        .collect();
    let x = lagged_design(&data.l_block(), &restricted, est.order);
    let target_channel = if block == Block::M { row } else { m + row };
    let y = lagged_target(&data.data, target_channel, est.order);
    let fit = least_squares(&x, &y, est.ridge, row + 1).map_err(|e| LrdnError::DegenerateRestriction {
        target,
        from: source,
        reason: e.to_string(),
    })?;
    let rss_full = est.rss_full[row];
    let rss_increase = fit.rss - rss_full;

    let noiseless = est.residual_rms(row) <= NOISELESS_REL_TOL * est.target_rms[row];
    if noiseless {
        let decision = coeff_norm > zero_tol;
        let statistic = if zero_tol > 0.0 { coeff_norm / zero_tol } else { coeff_norm };
        return Ok(EdgeTestResult {
            source,
            target,
            method: TestMethod::NormThreshold,
            statistic,
            p_value: if decision { 0.0 } else { 1.0 },
            coeff_norm,
            rss_increase,
            decision,
        });
    }

    let g = group.columns.len();
    let k = est.num_regressors[row];
    let dof = n.checked_sub(k).filter(|&d| d > 0).ok_or(LrdnError::InsufficientData {
        available: n,
        required: k + 1,
    })?;
    let statistic = (rss_increase.max(0.0) / g as f64) / (rss_full / dof as f64);
    let law = FisherSnedecor::new(g as f64, dof as f64)
        .map_err(|e| LrdnError::InvalidConfig(format!("F law: {e}")))?;
    let p_value = law.sf(statistic).clamp(0.0, 1.0);
    Ok(EdgeTestResult {
        source,
        target,
        method: TestMethod::FTest,
        statistic,
        p_value,
        coeff_norm,
        rss_increase,
        decision: p_value < alpha,
    })
}

/// Decided graph together with every test behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDecision {
    pub graph: DirectedGraph,
    pub tests: Vec<EdgeTestResult>,
    /// Per-test level after multiple-testing correction.
    pub alpha_used: f64,
}

/// Runs [`edge_test`] over all `(i, j)` in `V x V_l` and assembles the graph.
pub fn decide_graph(
    h_est: Option<&FilterEstimate>,
    s_est: &FilterEstimate,
    data: &TimeSeries,
    cfg: &DecisionConfig,
) -> Result<GraphDecision> {
    cfg.validate()?;
    let (m, l) = (data.m, data.l);
    if m > 0 && h_est.is_none() {
        return Err(LrdnError::InvalidConfig("m > 0 requires an H estimate".into()));
    }
    let alpha = match cfg.correction {
        Correction::None => cfg.alpha,
        Correction::Bonferroni => cfg.alpha / ((m + l) * l) as f64,
    };
    let pairs: Vec<(usize, usize)> = (1..=m + l).flat_map(|i| (m + 1..=m + l).map(move |j| (i, j))).collect();
    let tests = pairs
        .par_iter()
        .map(|&(i, j)| {
            let est = if i <= m { h_est.expect("checked above") } else { s_est };
            edge_test(est, data, i, j, alpha, cfg.zero_tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = DirectedGraph::from_edges(m, l, tests.iter().filter(|t| t.decision).map(|t| (t.target, t.source)))?;
    Ok(GraphDecision {
        graph,
        tests,
        alpha_used: alpha,
    })
}

/// Population form of the decision rule: supports of the exact filters.
pub fn graph_from_exact(filters: &ExactFilters, zero_tol: f64) -> DirectedGraph {
    let (m, l) = filters.h.shape();
    graph_from_supports(m, l, &filters.h.support(zero_tol), &filters.s.support(zero_tol))
}

/// Writes `source,target,method,F,p,norm,decision`.
pub fn write_edge_tests_csv<W: Write>(tests: &[EdgeTestResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "target", "method", "F", "p", "norm", "decision"])?;
    for t in tests {
        let method = match t.method {
            TestMethod::FTest => "f_test",
            TestMethod::NormThreshold => "norm_threshold",
        };
        w.write_record([
            t.source.to_string(),
            t.target.to_string(),
            method.to_string(),
            t.statistic.to_string(),
            t.p_value.to_string(),
            t.coeff_norm.to_string(),
            t.decision.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// 1 by convention when nothing was estimated (see `precision_defined`).
    pub precision: f64,
    /// 1 by convention when the truth is empty (see `recall_defined`).
    pub recall: f64,
    pub exact_match: bool,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

pub fn compare_graphs(estimated: &DirectedGraph, truth: &DirectedGraph) -> Result<GraphMetrics> {
    if estimated.num_nodes() != truth.num_nodes() {
        return Err(LrdnError::ShapeMismatch(format!(
            "graphs have {} and {} nodes",
            estimated.num_nodes(),
            truth.num_nodes()
        )));
    }
    let tp = estimated.edges().intersection(truth.edges()).count();
    let fp = estimated.num_edges() - tp;
    let fnn = truth.num_edges() - tp;
    let precision_defined = estimated.num_edges() > 0;
    let recall_defined = truth.num_edges() > 0;
    Ok(GraphMetrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fnn,
        precision: if precision_defined { tp as f64 / estimated.num_edges() as f64 } else { 1.0 },
        recall: if recall_defined { tp as f64 / truth.num_edges() as f64 } else { 1.0 },
        exact_match: fp == 0 && fnn == 0,
        precision_defined,
        recall_defined,
    })
}

/// Checks that `W^-1` and the exact `S` have the same off-diagonal support.
pub fn corollary1_check(model: &LrdnModel, horizon: usize, zero_tol: f64) -> Result<bool> {
    let w = reduced_form(model, horizon)?.w_factor;
    let winv = w.truncated_inverse(horizon, crate::polymat::DEFAULT_DECAY_TOL)?.inverse;
    let s = exact_filters(model)?.s;
    let (a, b) = (winv.support(zero_tol), s.support(zero_tol));
    Ok((0..model.l).all(|i| (0..model.l).all(|j| i == j || a[(i, j)] == b[(i, j)])))
}

/// Channel split `y = [y_m; y_l]`. Channel numbers are 1-based positions in
/// the input series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub l_indices: Vec<usize>,
    pub m_indices: Vec<usize>,
    /// Weakest selected residual ratio over the larger of the strongest
    /// rejected ratio and `rank_tol`; `None` when nothing was selected.
    pub rank_gap: Option<f64>,
    /// Channels in selection order.
    pub selection_order: Vec<usize>,
}

impl Partition {
    /// Reorders a series into `[y_m; y_l]`.
    pub fn apply(&self, data: &TimeSeries) -> Result<TimeSeries> {
        let to0 = |v: &[usize]| v.iter().map(|&c| c - 1).collect::<Vec<_>>();
        data.reordered(&to0(&self.m_indices), &to0(&self.l_indices))
    }
}

/// Greedy pivoted channel selection.
///
/// Each round regresses every unselected channel on lags `1..=q` of all
/// channels plus lag 0 of the selected ones, i.e. it measures the part of the
/// channel's one-step innovation not already carried by the selection. The
/// channel with the largest residual variance is added (ties: lowest index)
/// until every remaining channel's residual is below `rank_tol` times its own
/// variance.
pub fn partition_select(data: &TimeSeries, max_lag: usize, rank_tol: f64) -> Result<Partition> {
    let n = data.num_channels();
    let t = data.num_samples();
    if max_lag == 0 {
        return Err(LrdnError::InvalidConfig("max_lag must be positive".into()));
    }
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(LrdnError::InvalidConfig(format!("rank_tol {rank_tol} must lie in (0, 1)")));
    }
    let required = 10 * max_lag * n;
    if t <= required {
        return Err(LrdnError::InsufficientData {
            available: t,
            required: required + 1,
        });
    }
    let x = &data.data;
    let past: Vec<LagColumn> = (0..n)
        .flat_map(|c| (1..=max_lag).map(move |lag| LagColumn { channel: c, lag }))
        .collect();
    let targets: Vec<_> = (0..n).map(|c| lagged_target(x, c, max_lag)).collect();
    let rows = t - max_lag;
    let variance: Vec<f64> = targets
        .iter()
        .map(|y| {
            let mean = y.mean();
            y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64
        })
        .collect();

    let mut selected: Vec<usize> = Vec::new();
    let mut selected_ratios: Vec<f64> = Vec::new();
    let next_ratio = loop {
        let mut cols = past.clone();
        cols.extend(selected.iter().map(|&c| LagColumn { channel: c, lag: 0 }));
        let design = lagged_design(x, &cols, max_lag);
        let basis = column_space(&design, 1e-10);
        let candidates: Vec<(usize, f64, f64)> = (0..n)
            .filter(|c| !selected.contains(c))
            .map(|c| {
                let resid = projection_rss(&basis, &targets[c]) / rows as f64;
                let ratio = if variance[c] > 0.0 { resid / variance[c] } else { 0.0 };
                (c, resid, ratio)
            })
            .collect();
        let best = candidates
            .iter()
            .filter(|(_, _, ratio)| *ratio >= rank_tol)
            .fold(None::<&(usize, f64, f64)>, |best, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            });
        match best {
            Some(&(c, _, ratio)) => {
                selected.push(c);
                selected_ratios.push(ratio);
            }
            None => {
                let next = candidates.iter().map(|c| c.2).fold(0.0, f64::max);
                break next;
            }
        }
    };

    let weakest = selected_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let rank_gap = (!selected.is_empty()).then(|| weakest / next_ratio.max(rank_tol));
    if let Some(gap) = rank_gap {
        if gap < MIN_RANK_GAP {
            return Err(LrdnError::AmbiguousRank { gap });
        }
    }
    let mut l_indices: Vec<usize> = selected.iter().map(|c| c + 1).collect();
    l_indices.sort_unstable();
    let m_indices: Vec<usize> = (1..=n).filter(|c| !l_indices.contains(c)).collect();
    Ok(Partition {
        l_indices,
        m_indices,
        rank_gap,
        selection_order: selected.iter().map(|c| c + 1).collect(),
    })
}

/// Largest RMS residual of regressing each `y_m` channel on lags `0..=p` of `y_l`.
pub fn deterministic_residual(data: &TimeSeries, p: usize) -> Result<f64> {
    let cols: Vec<LagColumn> = (0..data.l)
        .flat_map(|c| (0..=p).map(move |lag| LagColumn { channel: c, lag }))
        .collect();
    let design = lagged_design(&data.l_block(), &cols, p);
    let basis = column_space(&design, 1e-12);
    let rows = design.nrows() as f64;
    let mut worst = 0.0f64;
    for i in 0..data.m {
        let y = lagged_target(&data.data, i, p);
        worst = worst.max((projection_rss(&basis, &y) / rows).sqrt());
    }
    Ok(worst)
}

/// Support of an `l x l` boolean matrix without its diagonal, as a list of 1-based pairs.
pub fn off_diagonal_pairs(support: &DMatrix<bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..support.nrows() {
        for j in 0..support.ncols() {
            if i != j && support[(i, j)] {
                out.push((i + 1, j + 1));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_model, true_graph, GeneratorConfig, SupportSpec};
    use crate::polymat::PolynomialMatrix;
    use crate::sim::{derive_seed, simulate};
    use crate::wiener::{estimate_h, estimate_s, EstimationConfig};

    fn est_cfg(p: usize) -> EstimationConfig {
        EstimationConfig { order_p: p, ridge: 0.0 }
    }

    #[test]
    fn population_rule_reproduces_true_graph() {
        for seed in 0..30 {
            let model = random_model(&GeneratorConfig {
                rng_seed: seed,
                contemporaneous: seed % 2 == 1,
                ..Default::default()
            })
            .unwrap();
            let g = graph_from_exact(&exact_filters(&model).unwrap(), 1e-9);
            assert_eq!(g, true_graph(&model, 1e-9));
        }
    }

    #[test]
    fn compare_examples() {
        let truth = DirectedGraph::from_edges(8, 4, (0..25).map(|k| (k % 12 + 1, 9 + (k / 12) % 4 + (k / 24)))).unwrap();
        assert_eq!(truth.num_edges(), 25);
        let same = compare_graphs(&truth, &truth).unwrap();
        assert!(same.exact_match && same.precision == 1.0 && same.recall == 1.0);

        let empty = DirectedGraph::empty(8, 4);
        let m = compare_graphs(&empty, &truth).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 1.0);
        assert!(!m.precision_defined && !m.exact_match);

        let mut edges: Vec<_> = truth.edges().iter().copied().collect();
        edges.pop();
        let missing = (1..=12)
            .flat_map(|i| (9..=12).map(move |j| (i, j)))
            .find(|e| !truth.contains(e.0, e.1))
            .unwrap();
        edges.push(missing);
        let est = DirectedGraph::from_edges(8, 4, edges).unwrap();
        let m = compare_graphs(&est, &truth).unwrap();
        assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (24, 1, 1));
        assert!((m.precision - 0.96).abs() < 1e-15 && (m.recall - 0.96).abs() < 1e-15);
        assert!(!m.exact_match);

        assert!(compare_graphs(&DirectedGraph::empty(1, 1), &truth).is_err());
    }

    #[test]
    fn support_equivalence_examples() {
        let white = LrdnModel::new(PolynomialMatrix::zeros(1, 3, 0), PolynomialMatrix::zeros(3, 3, 0), vec![1.0; 3]).unwrap();
        assert!(corollary1_check(&white, 256, 1e-9).unwrap());

        // ring 1 <- 2 <- 3 <- 1: sparse G_l, dense W
        let mut g_l = PolynomialMatrix::zeros(3, 3, 1);
        g_l.coeff_mut(1)[(0, 1)] = 0.5;
        g_l.coeff_mut(1)[(1, 2)] = -0.4;
        g_l.coeff_mut(1)[(2, 0)] = 0.6;
        let model = LrdnModel::new(PolynomialMatrix::zeros(0, 3, 0), g_l, vec![1.0; 3]).unwrap();
        assert!(corollary1_check(&model, 256, 1e-9).unwrap());
        let w = reduced_form(&model, 256).unwrap().w_factor;
        assert_eq!(off_diagonal_pairs(&w.support(1e-9)).len(), 6);
        let s = exact_filters(&model).unwrap().s;
        assert_eq!(off_diagonal_pairs(&s.support(1e-9)), vec![(1, 2), (2, 3), (3, 1)]);
    }

    #[test]
    fn noiseless_m_block_zero_group() {
        let mut g_ml = PolynomialMatrix::zeros(1, 2, 1);
        g_ml.coeff_mut(1)[(0, 0)] = 0.8;
        let mut g_l = PolynomialMatrix::zeros(2, 2, 1);
        g_l.coeff_mut(1)[(0, 0)] = 0.5;
        let model = LrdnModel::new(g_ml, g_l, vec![1.0, 1.0]).unwrap();
        let ts = simulate(&model, 500, 100, 3).unwrap();
        let h = estimate_h(&ts, est_cfg(1)).unwrap();
        let absent = edge_test(&h, &ts, 1, 3, 0.01, 1e-6).unwrap();
        assert_eq!(absent.method, TestMethod::NormThreshold);
        assert!(absent.rss_increase.abs() < 1e-12);
        assert!(!absent.decision);
        assert_eq!(absent.p_value, 1.0);
        let present = edge_test(&h, &ts, 1, 2, 0.01, 1e-6).unwrap();
        assert!(present.decision && present.p_value == 0.0);
    }

    #[test]
    fn edge_test_argument_checks() {
        let model = random_model(&GeneratorConfig {
            rng_seed: 1,
            ..Default::default()
        })
        .unwrap();
        let ts = simulate(&model, 400, 100, 1).unwrap();
        let s = estimate_s(&ts, est_cfg(2)).unwrap();
        let h = estimate_h(&ts, est_cfg(2)).unwrap();
        assert!(edge_test(&s, &ts, 1, 9, 0.01, 1e-6).is_err());
        assert!(edge_test(&h, &ts, 9, 9, 0.01, 1e-6).is_err());
        assert!(edge_test(&s, &ts, 9, 8, 0.01, 1e-6).is_err());
        assert!(edge_test(&s, &ts, 13, 9, 0.01, 1e-6).is_err());
        let p0 = estimate_s(&ts, est_cfg(0)).unwrap();
        assert!(matches!(
            edge_test(&p0, &ts, 9, 9, 0.01, 1e-6),
            Err(LrdnError::DegenerateRestriction { .. })
        ));
        let t = edge_test(&s, &ts, 10, 9, 0.01, 1e-6).unwrap();
        assert_eq!(t.method, TestMethod::FTest);
        assert!((0.0..=1.0).contains(&t.p_value));
        assert_eq!(t.decision, t.p_value < 0.01);
    }

    #[test]
    fn power_at_detectability_margin() {
        // one edge 2 <- 1 with coefficient 0.3 at lag 1
        let mut g_l = PolynomialMatrix::zeros(2, 2, 1);
        g_l.coeff_mut(1)[(1, 0)] = 0.3;
        let model = LrdnModel::new(PolynomialMatrix::zeros(0, 2, 0), g_l, vec![1.0, 1.0]).unwrap();
        let mut rejected = 0;
        for trial in 0..100 {
            let ts = simulate(&model, 2000, 200, derive_seed(11, trial)).unwrap();
            let s = estimate_s(&ts, est_cfg(1)).unwrap();
            if edge_test(&s, &ts, 2, 1, 0.01, 1e-6).unwrap().decision {
                rejected += 1;
            }
        }
        assert!(rejected >= 99, "power {rejected}/100");
    }

    #[test]
    fn decide_graph_is_directional_and_correct() {
        let model = random_model(&GeneratorConfig {
            rng_seed: 5,
            ..Default::default()
        })
        .unwrap();
        let ts = simulate(&model, 4000, 500, 6).unwrap();
        let p = 2;
        let h = estimate_h(&ts, est_cfg(p)).unwrap();
        let s = estimate_s(&ts, est_cfg(p)).unwrap();
        let cfg = DecisionConfig {
            correction: Correction::Bonferroni,
            ..Default::default()
        };
        let d = decide_graph(Some(&h), &s, &ts, &cfg).unwrap();
        assert_eq!(d.tests.len(), 12 * 4);
        assert!((d.alpha_used - 0.01 / 48.0).abs() < 1e-18);
        assert_eq!(d.graph, true_graph(&model, 1e-9));
        assert!(decide_graph(None, &s, &ts, &cfg).is_err());
        let again = decide_graph(Some(&h), &s, &ts, &cfg).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn edge_csv_layout() {
        let t = EdgeTestResult {
            source: 3,
            target: 1,
            method: TestMethod::FTest,
            statistic: 2.5,
            p_value: 0.25,
            coeff_norm: 0.5,
            rss_increase: 1.0,
            decision: false,
        };
        let mut buf = Vec::new();
        write_edge_tests_csv(&[t], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "source,target,method,F,p,norm,decision\n3,1,f_test,2.5,0.25,0.5,false\n");
    }

    #[test]
    fn partition_of_full_rank_data_keeps_everything() {
        let model = LrdnModel::new(PolynomialMatrix::zeros(0, 3, 0), PolynomialMatrix::zeros(3, 3, 0), vec![1.0; 3]).unwrap();
        let ts = simulate(&model, 1000, 0, 2).unwrap();
        let p = partition_select(&ts, 2, 1e-6).unwrap();
        assert_eq!(p.l_indices, vec![1, 2, 3]);
        assert!(p.m_indices.is_empty());
        assert!(p.rank_gap.unwrap() > 1e5);
    }

    #[test]
    fn partition_recovers_benchmark_shape() {
        for seed in 0..5 {
            let model = random_model(&GeneratorConfig {
                rng_seed: seed,
                ..Default::default()
            })
            .unwrap();
            let ts = simulate(&model, 2000, 500, seed).unwrap();
            let pooled = TimeSeries::new(ts.data.clone(), 0, 12).unwrap();
            let part = partition_select(&pooled, 3, 1e-6).unwrap();
            assert_eq!(part.l_indices.len(), 4);
            let re = part.apply(&pooled).unwrap();
            assert!(deterministic_residual(&re, 2).unwrap() < 1e-6);
        }
    }

    #[test]
    fn partition_breaks_duplicate_ties() {
        let model = LrdnModel::new(PolynomialMatrix::zeros(0, 2, 0), PolynomialMatrix::zeros(2, 2, 0), vec![1.0; 2]).unwrap();
        let ts = simulate(&model, 800, 0, 4).unwrap();
        let mut data = DMatrix::zeros(800, 3);
        data.set_column(0, &ts.y_l(0));
        data.set_column(1, &ts.y_l(0));
        data.set_column(2, &ts.y_l(1));
        let p = partition_select(&TimeSeries::new(data, 0, 3).unwrap(), 1, 1e-6).unwrap();
        assert_eq!(p.l_indices.len(), 2);
        assert!(p.l_indices.contains(&3));
        assert_eq!(p.l_indices.iter().filter(|&&c| c <= 2).count(), 1);
        assert_eq!(p.l_indices, vec![1, 3]);
    }

    #[test]
    fn partition_rejects_short_or_bad_input() {
        let model = LrdnModel::new(PolynomialMatrix::zeros(0, 2, 0), PolynomialMatrix::zeros(2, 2, 0), vec![1.0; 2]).unwrap();
        let ts = simulate(&model, 30, 0, 4).unwrap();
        assert!(matches!(partition_select(&ts, 2, 1e-6), Err(LrdnError::InsufficientData { .. })));
        assert!(partition_select(&ts, 0, 1e-6).is_err());
        assert!(partition_select(&ts, 1, 0.0).is_err());
    }

    #[test]
    fn partition_flags_ambiguous_rank() {
        // channel 2 = channel 1 + tiny independent noise: neither clearly in nor out
        let model = LrdnModel::new(PolynomialMatrix::zeros(0, 2, 0), PolynomialMatrix::zeros(2, 2, 0), vec![1.0, 1e-6]).unwrap();
        let ts = simulate(&model, 1000, 0, 9).unwrap();
        let mut data = DMatrix::zeros(1000, 2);
        data.set_column(0, &ts.y_l(0));
        data.set_column(1, &(ts.y_l(0) + ts.y_l(1)));
        let r = partition_select(&TimeSeries::new(data, 0, 2).unwrap(), 1, 1e-6);
        assert!(matches!(r, Err(LrdnError::AmbiguousRank { .. })), "{r:?}");
    }

    #[test]
    fn partition_ignores_deterministic_channels() {
        let cfg = GeneratorConfig {
            m: 2,
            l: 2,
            support_ml: SupportSpec::Full,
            support_l: SupportSpec::Count(2),
            pinned_noise: vec![],
            rng_seed: 12,
            ..Default::default()
        };
        let model = random_model(&cfg).unwrap();
        let ts = simulate(&model, 1000, 200, 1).unwrap();
        let pooled = TimeSeries::new(ts.data.clone(), 0, 4).unwrap();
        let part = partition_select(&pooled, 2, 1e-6).unwrap();
        assert_eq!(part.l_indices.len(), 2);
        assert!(part.rank_gap.unwrap() >= MIN_RANK_GAP);
    }
}
