//! Pairwise-preference ratings and retrieval accuracy.

use petgraph::algo::{kosaraju_scc, tarjan_scc};
use petgraph::graph::{DiGraph, UnGraph};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

pub const ELO_BASE: f64 = 1500.0;
pub const ELO_SCALE: f64 = 400.0;
pub const DEFAULT_BT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_BT_MAX_ITER: usize = 10_000;
/// Pseudo-wins added to each direction of every compared pair when the
/// unsmoothed estimate does not exist.
pub const SMOOTHING: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("comparison graph is disconnected: {0:?}")]
    Disconnected(Vec<Vec<String>>),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
}

/// One head-to-head preference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub item_id: String,
    pub model_a: String,
    pub model_b: String,
    pub winner: Winner,
}

impl Judgment {
    pub fn new(item_id: &str, model_a: &str, model_b: &str, winner: Winner) -> Self {
        Self {
            item_id: item_id.into(),
            model_a: model_a.into(),
            model_b: model_b.into(),
            winner,
        }
    }

    pub fn winner_model(&self) -> &str {
        match self.winner {
            Winner::A => &self.model_a,
            Winner::B => &self.model_b,
        }
    }

    pub fn loser_model(&self) -> &str {
        match self.winner {
            Winner::A => &self.model_b,
            Winner::B => &self.model_a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgmentSet {
    records: Vec<Judgment>,
}

impl JudgmentSet {
    pub fn new(records: Vec<Judgment>) -> Result<Self, EvalError> {
        for (i, r) in records.iter().enumerate() {
            if r.model_a == r.model_b {
                return Err(EvalError::Invalid(format!("record {}: {} compared with itself", i + 1, r.model_a)));
            }
            if r.model_a.is_empty() || r.model_b.is_empty() {
                return Err(EvalError::Invalid(format!("record {}: empty model name", i + 1)));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[Judgment] {
        &self.records
    }

    /// CSV with header `item_id,model_a,model_b,winner`; `winner` is `a` or `b`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, EvalError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize::<Judgment>().enumerate() {
            records.push(row.map_err(|e| EvalError::Invalid(format!("row {}: {e}", i + 1)))?);
        }
        Self::new(records)
    }

    pub fn load_csv(path: &Path) -> Result<Self, EvalError> {
        let file = std::fs::File::open(path).map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv(file)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).expect("judgments serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }
}

/// `wins[i][j]`: times model `i` beat model `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub models: Vec<String>,
    pub wins: Vec<Vec<u64>>,
}

impl WinMatrix {
    pub fn from_counts(models: Vec<String>, wins: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let m = models.len();
        if m < 2 {
            return Err(EvalError::Invalid("need at least two models".into()));
        }
        if models.iter().collect::<HashSet<_>>().len() != m {
            return Err(EvalError::Invalid("duplicate model names".into()));
        }
        if wins.len() != m || wins.iter().any(|r| r.len() != m) {
            return Err(EvalError::Invalid(format!("win matrix must be {m} x {m}")));
        }
        if (0..m).any(|i| wins[i][i] != 0) {
            return Err(EvalError::Invalid("a model cannot beat itself".into()));
        }
        Ok(Self { models, wins })
    }

    /// Comparisons between `i` and `j`.
    pub fn n(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j] + self.wins[j][i]
    }

    pub fn index_of(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    pub fn total_wins(&self, i: usize) -> u64 {
        self.wins[i].iter().sum()
    }
}

/// Tallies judgments; models are ordered by first appearance.
pub fn win_matrix(judgments: &JudgmentSet) -> Result<WinMatrix, EvalError> {
    if judgments.records.is_empty() {
        return Err(EvalError::Invalid("no judgments".into()));
    }
    let mut models: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for r in &judgments.records {
        for m in [&r.model_a, &r.model_b] {
            if !index.contains_key(m) {
                index.insert(m.clone(), models.len());
                models.push(m.clone());
            }
        }
    }
    let mut wins = vec![vec![0u64; models.len()]; models.len()];
    for r in &judgments.records {
        wins[index[r.winner_model()]][index[r.loser_model()]] += 1;
    }
    WinMatrix::from_counts(models, wins)
}

/// Percent of comparisons each row model won against each column model;
/// `None` where the pair was never compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub models: Vec<String>,
    pub rates: Vec<Vec<Option<f64>>>,
}

impl RateTable {
    pub fn to_table(&self) -> String {
        let w = self.models.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!("{:<w$}", "");
        for m in &self.models {
            out.push_str(&format!("  {m:>w$}"));
        }
        out.push('\n');
        for (i, m) in self.models.iter().enumerate() {
            out.push_str(&format!("{m:<w$}"));
            for cell in &self.rates[i] {
                let s = cell.map_or_else(|| "-".to_string(), |r| format!("{r:.1}"));
                out.push_str(&format!("  {s:>w$}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn win_rates(matrix: &WinMatrix) -> RateTable {
    let m = matrix.models.len();
    let rates = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let n = matrix.n(i, j);
                    (i != j && n > 0).then(|| 100.0 * matrix.wins[i][j] as f64 / n as f64)
                })
                .collect()
        })
        .collect();
    RateTable {
        models: matrix.models.clone(),
        rates,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_BT_TOLERANCE,
            max_iter: DEFAULT_BT_MAX_ITER,
        }
    }
}

/// Bradley-Terry strengths, geometric mean 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    pub models: Vec<String>,
    pub strengths: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Pseudo-wins were added because some model could not be ranked
    /// from the raw counts (it never lost, never won, or a group of models
    /// never lost to the rest).
    pub smoothed: bool,
}

impl BtFit {
    pub fn strength(&self, model: &str) -> Option<f64> {
        self.models.iter().position(|m| m == model).map(|i| self.strengths[i])
    }
}

fn components(matrix: &WinMatrix) -> Vec<Vec<String>> {
    let m = matrix.models.len();
    let mut g = UnGraph::<usize, ()>::new_undirected();
    let nodes: Vec<_> = (0..m).map(|i| g.add_node(i)).collect();
    for i in 0..m {
        for j in i + 1..m {
            if matrix.n(i, j) > 0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = kosaraju_scc(&g).into_iter().map(|c| c.into_iter().map(|n| g[n]).collect()).collect();
    for c in &mut comps {
        c.sort_unstable();
    }
    comps.sort();
    comps
        .into_iter()
        .map(|c| c.into_iter().map(|i| matrix.models[i].clone()).collect())
        .collect()
}

/// Whether every model can reach every other along "beat" edges, the
/// condition under which the unsmoothed estimate exists.
fn strongly_connected(matrix: &WinMatrix) -> bool {
    let m = matrix.models.len();
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..m).map(|i| g.add_node(i)).collect();
    for i in 0..m {
        for j in 0..m {
            if matrix.wins[i][j] > 0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    tarjan_scc(&g).len() == 1
}

pub fn bradley_terry(matrix: &WinMatrix, options: &BtOptions) -> Result<BtFit, EvalError> {
    bradley_terry_from(matrix, &vec![1.0; matrix.models.len()], options)
}

/// Minorization-maximization iteration
/// `π_i ← W_i / Σ_j n_ij / (π_i + π_j)` from `initial`, renormalized to
/// geometric mean 1 after every step, until the largest relative change
/// falls below `options.tolerance`.
pub fn bradley_terry_from(matrix: &WinMatrix, initial: &[f64], options: &BtOptions) -> Result<BtFit, EvalError> {
    let m = matrix.models.len();
    if initial.len() != m || initial.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(EvalError::Invalid("initial strengths must be positive, one per model".into()));
    }
    if options.tolerance.is_nan() || options.tolerance <= 0.0 || options.max_iter == 0 {
        return Err(EvalError::Invalid("tolerance must be positive and max_iter at least 1".into()));
    }
    let comps = components(matrix);
    if comps.len() > 1 {
        return Err(EvalError::Disconnected(comps));
    }
    let smoothed = !strongly_connected(matrix);
    let w: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let raw = matrix.wins[i][j] as f64;
                    if smoothed && i != j && matrix.n(i, j) > 0 {
                        raw + SMOOTHING
                    } else {
                        raw
                    }
                })
                .collect()
        })
        .collect();
    let total: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();

    let mut pi = initial.to_vec();
    normalize(&mut pi);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        iterations += 1;
        let mut next: Vec<f64> = (0..m)
            .map(|i| {
                let denom: f64 = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| (w[i][j] + w[j][i]) / (pi[i] + pi[j]))
                    .sum();
                total[i] / denom
            })
            .collect();
        normalize(&mut next);
        let change = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if change < options.tolerance {
            converged = true;
            break;
        }
    }
    Ok(BtFit {
        models: matrix.models.clone(),
        strengths: pi,
        iterations,
        converged,
        smoothed,
    })
}

fn normalize(pi: &mut [f64]) {
    let log_mean = pi.iter().map(|p| p.ln()).sum::<f64>() / pi.len() as f64;
    let g = log_mean.exp();
    for p in pi.iter_mut() {
        *p /= g;
    }
}

/// Elo for a strength ratio `π / π_baseline`.
pub fn elo_from_ratio(ratio: f64) -> f64 {
    ELO_SCALE * ratio.log10() + ELO_BASE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloTable {
    pub models: Vec<String>,
    pub strengths: Vec<f64>,
    pub elo: Vec<f64>,
    pub baseline: String,
    pub iterations: usize,
    pub converged: bool,
    pub smoothed: bool,
}

impl EloTable {
    pub fn elo_of(&self, model: &str) -> Option<f64> {
        self.models.iter().position(|m| m == model).map(|i| self.elo[i])
    }

    /// Rows sorted by rating, highest first.
    pub fn to_table(&self) -> String {
        let w = self.models.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut rows: Vec<usize> = (0..self.models.len()).collect();
        rows.sort_by(|&a, &b| self.elo[b].total_cmp(&self.elo[a]));
        let mut out = format!("{:<w$}  {:>10}  {:>8}\n", "model", "strength", "elo");
        for i in rows {
            out.push_str(&format!("{:<w$}  {:>10.4}  {:>8.1}\n", self.models[i], self.strengths[i], self.elo[i]));
        }
        out.push_str(&format!(
            "baseline {}; {} after {} iterations{}\n",
            self.baseline,
            if self.converged { "converged" } else { "not converged" },
            self.iterations,
            if self.smoothed { "; smoothed" } else { "" }
        ));
        out
    }
}

pub fn to_elo(fit: &BtFit, baseline: &str) -> Result<EloTable, EvalError> {
    let base = fit.strength(baseline).ok_or_else(|| EvalError::UnknownModel(baseline.to_string()))?;
    let elo = fit
        .strengths
        .iter()
        .zip(&fit.models)
        .map(|(p, m)| if m == baseline { ELO_BASE } else { elo_from_ratio(p / base) })
        .collect();
    Ok(EloTable {
        models: fit.models.clone(),
        strengths: fit.strengths.clone(),
        elo,
        baseline: baseline.to_string(),
        iterations: fit.iterations,
        converged: fit.converged,
        smoothed: fit.smoothed,
    })
}

/// One retrieval query: the asset that should have come back and what did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalTrial {
    pub target: String,
    pub ranked: Vec<String>,
}

impl RetrievalTrial {
    pub fn new(target: impl Into<String>, ranked: Vec<String>) -> Result<Self, EvalError> {
        let t = Self {
            target: target.into(),
            ranked,
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), EvalError> {
        let mut seen = HashSet::new();
        for id in &self.ranked {
            if !seen.insert(id) {
                return Err(EvalError::Invalid(format!("{id} ranked twice for target {}", self.target)));
            }
        }
        Ok(())
    }

    /// 1-based rank of the target, if retrieved.
    pub fn rank(&self) -> Option<usize> {
        self.ranked.iter().position(|id| id == &self.target).map(|i| i + 1)
    }
}

/// A JSON array of `{"target": ..., "ranked": [...]}`.
pub fn load_trials(path: &Path) -> Result<Vec<RetrievalTrial>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let trials: Vec<RetrievalTrial> =
        serde_json::from_str(&text).map_err(|e| EvalError::Invalid(format!("{}: {e}", path.display())))?;
    for t in &trials {
        t.check()?;
    }
    Ok(trials)
}

/// `(k, fraction of trials with the target among the first k)` per `k`.
pub fn top_k_accuracy(trials: &[RetrievalTrial], ks: &[usize]) -> Result<Vec<(usize, f64)>, EvalError> {
    if trials.is_empty() {
        return Err(EvalError::Invalid("no trials".into()));
    }
    if ks.contains(&0) {
        return Err(EvalError::Invalid("k must be at least 1".into()));
    }
    for t in trials {
        t.check()?;
    }
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = trials.iter().filter(|t| t.rank().is_some_and(|r| r <= k)).count();
            (k, hits as f64 / trials.len() as f64)
        })
        .collect())
}
