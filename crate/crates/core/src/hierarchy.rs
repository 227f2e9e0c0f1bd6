//! Aggregation hierarchies and the linear constraint systems they imply.
//!
//! A single hierarchy with `m_b` bottom series and `m_a` intermediate
//! aggregates (plus its top series) is described by the summing matrix
//! `S = [1'; C; I]` and, equivalently, by the zero-constraint matrix
//! `U = [I; -1, -C']` with `U'y = 0` for every coherent vector `y`.
//!
//! Several hierarchies sharing only their top series are combined into a
//! [`LinkedSystem`], whose `K x n` matrix stacks one top-vs-bottoms row per
//! hierarchy followed by one `[I, -C]` block per hierarchy.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::period::Quarter;

/// Relative threshold used when checking the rank of the combined constraint matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Default relative coherence tolerance for published (rounded) data.
pub const COHERENCE_TOL_REAL: f64 = 1e-6;

/// Default relative coherence tolerance for synthetic data.
pub const COHERENCE_TOL_SYNTHETIC: f64 = 1e-10;

#[derive(Debug, Deserialize)]
struct RawSpec {
    name: String,
    top: String,
    edges: Vec<(String, String)>,
}

/// A validated single-tree hierarchy description.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    name: String,
    top: String,
    edges: Vec<(String, String)>,
    aggregates: Vec<String>,
    bottoms: Vec<String>,
}

impl HierarchySpec {
    /// Validates an edge list. Every non-root node must have exactly one
    /// parent, there must be no cycles, and `top` must be the unique root.
    pub fn new(name: impl Into<String>, top: impl Into<String>, edges: Vec<(String, String)>) -> Result<Self> {
        let name = name.into();
        let top = top.into();
        if edges.is_empty() {
            return Err(Error::SpecFormat(format!("hierarchy `{name}` has no edges")));
        }

        let mut seen = HashSet::new();
        for (p, c) in &edges {
            if p.trim().is_empty() || c.trim().is_empty() {
                return Err(Error::SpecFormat("empty series name in edge".into()));
            }
            if !seen.insert((p.as_str(), c.as_str())) {
                return Err(Error::DuplicateEdge {
                    parent: p.clone(),
                    child: c.clone(),
                });
            }
        }

        // nodes in order of first appearance anywhere in the document
        let mut order: Vec<&str> = Vec::new();
        let mut known = HashSet::new();
        for (p, c) in &edges {
            for s in [p.as_str(), c.as_str()] {
                if known.insert(s) {
                    order.push(s);
                }
            }
        }
        if !known.contains(top.as_str()) {
            return Err(Error::UnknownTop(top));
        }

        let mut parent: HashMap<&str, &str> = HashMap::new();
        for (p, c) in &edges {
            if let Some(first) = parent.insert(c.as_str(), p.as_str()) {
                return Err(Error::MultipleParents {
                    child: c.clone(),
                    first: first.to_string(),
                    second: p.clone(),
                });
            }
        }

        for &start in &order {
            let mut visited = HashSet::new();
            let mut node = start;
            while let Some(&p) = parent.get(node) {
                if !visited.insert(node) {
                    return Err(Error::Cycle(node.to_string()));
                }
                node = p;
            }
        }

        let roots: Vec<String> = order
            .iter()
            .filter(|s| !parent.contains_key(*s))
            .map(|s| s.to_string())
            .collect();
        match roots.as_slice() {
            [] => return Err(Error::Cycle(top)),
            [root] if *root != top => {
                return Err(Error::TopNotRoot {
                    top,
                    root: root.clone(),
                })
            }
            [_] => {}
            _ => return Err(Error::MultipleRoots(roots)),
        }

        let internal: HashSet<&str> = edges.iter().map(|(p, _)| p.as_str()).collect();
        let aggregates = order
            .iter()
            .filter(|s| internal.contains(*s) && **s != top)
            .map(|s| s.to_string())
            .collect();
        let mut bottoms = Vec::new();
        let mut seen_bottom = HashSet::new();
        for (_, c) in &edges {
            if !internal.contains(c.as_str()) && seen_bottom.insert(c.as_str()) {
                bottoms.push(c.clone());
            }
        }

        Ok(Self {
            name,
            top,
            edges,
            aggregates,
            bottoms,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn top(&self) -> &str {
        &self.top
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    /// Intermediate aggregates (excluding the top), in document order.
    pub fn aggregates(&self) -> &[String] {
        &self.aggregates
    }

    /// Bottom-level series, in first-encounter order.
    pub fn bottoms(&self) -> &[String] {
        &self.bottoms
    }

    /// Serialises back to the JSON document format.
    pub fn to_json(&self) -> String {
        let edges: Vec<[&str; 2]> = self.edges.iter().map(|(p, c)| [p.as_str(), c.as_str()]).collect();
        let value = serde_json::json!({
            "name": self.name,
            "top": self.top,
            "edges": edges,
        });
        serde_json::to_string_pretty(&value).expect("spec serialises")
    }
}

/// Parses a hierarchy document (`name`, `top`, `edges: [[parent, child], ...]`).
///
/// Documents starting with `{` are read as JSON, anything else as TOML.
pub fn parse_hierarchy_spec(text: &str) -> Result<HierarchySpec> {
    let raw: RawSpec = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::SpecFormat(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| Error::SpecFormat(e.to_string()))?
    };
    HierarchySpec::new(raw.name, raw.top, raw.edges)
}

/// Matrices of one hierarchy, rows ordered `[top, aggregates, bottoms]`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    name: String,
    top: String,
    aggregate_names: Vec<String>,
    bottom_names: Vec<String>,
    c: DMatrix<f64>,
    s: DMatrix<f64>,
    u: DMatrix<f64>,
}

impl Hierarchy {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn top(&self) -> &str {
        &self.top
    }

    pub fn aggregate_names(&self) -> &[String] {
        &self.aggregate_names
    }

    pub fn bottom_names(&self) -> &[String] {
        &self.bottom_names
    }

    pub fn n_aggregates(&self) -> usize {
        self.aggregate_names.len()
    }

    pub fn n_bottoms(&self) -> usize {
        self.bottom_names.len()
    }

    /// Total number of series, `1 + m_a + m_b`.
    pub fn n_series(&self) -> usize {
        1 + self.n_aggregates() + self.n_bottoms()
    }

    /// Aggregation matrix `C`, `m_a x m_b`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Summing matrix `S = [1'; C; I]`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Zero-constraint matrix `U`, `(1 + m_a + m_b) x (1 + m_a)`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }
}

/// Builds `C`, `S` and `U` for a validated spec.
pub fn build_matrices(spec: &HierarchySpec) -> Hierarchy {
    let ma = spec.aggregates.len();
    let mb = spec.bottoms.len();

    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    for (p, c) in &spec.edges {
        children.entry(p.as_str()).or_default().push(c.as_str());
    }
    let bottom_index: HashMap<&str, usize> = spec.bottoms.iter().enumerate().map(|(j, b)| (b.as_str(), j)).collect();

    let mut c = DMatrix::<f64>::zeros(ma, mb);
    for (i, agg) in spec.aggregates.iter().enumerate() {
        let mut stack = vec![agg.as_str()];
        while let Some(node) = stack.pop() {
            if let Some(&j) = bottom_index.get(node) {
                c[(i, j)] = 1.0;
            } else if let Some(kids) = children.get(node) {
                stack.extend(kids.iter().copied());
            }
        }
    }

    let n = 1 + ma + mb;
    let mut s = DMatrix::<f64>::zeros(n, mb);
    s.row_mut(0).fill(1.0);
    s.view_mut((1, 0), (ma, mb)).copy_from(&c);
    s.view_mut((1 + ma, 0), (mb, mb)).fill_with_identity();

    let mut u = DMatrix::<f64>::zeros(n, 1 + ma);
    u.view_mut((0, 0), (1 + ma, 1 + ma)).fill_with_identity();
    let upper = s.rows(0, 1 + ma);
    u.view_mut((1 + ma, 0), (mb, 1 + ma)).copy_from(&(-upper.transpose()));

    Hierarchy {
        name: spec.name.clone(),
        top: spec.top.clone(),
        aggregate_names: spec.aggregates.clone(),
        bottom_names: spec.bottoms.clone(),
        c,
        s,
        u,
    }
}

/// Column layout of one hierarchy inside a [`LinkedSystem`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub aggregates: Range<usize>,
    pub bottoms: Range<usize>,
}

/// Several hierarchies sharing only their top series.
#[derive(Debug, Clone)]
pub struct LinkedSystem {
    top_name: String,
    hierarchies: Vec<Hierarchy>,
    ordering: Vec<String>,
    blocks: Vec<Block>,
    u_full: DMatrix<f64>,
}

impl LinkedSystem {
    pub fn top_name(&self) -> &str {
        &self.top_name
    }

    pub fn hierarchies(&self) -> &[Hierarchy] {
        &self.hierarchies
    }

    /// Global series order `[top, a1, b1, a2, b2, ...]`.
    pub fn ordering(&self) -> &[String] {
        &self.ordering
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Combined constraint matrix `U'`, `K x n`.
    pub fn u_full(&self) -> &DMatrix<f64> {
        &self.u_full
    }

    pub fn n(&self) -> usize {
        self.ordering.len()
    }

    pub fn k(&self) -> usize {
        self.u_full.nrows()
    }

    pub fn index_of(&self, series: &str) -> Option<usize> {
        self.ordering.iter().position(|s| s == series)
    }

    /// The single-hierarchy system for hierarchy `l`, together with the
    /// positions of its series in this system's ordering.
    pub fn side(&self, l: usize) -> (LinkedSystem, Vec<usize>) {
        let h = self.hierarchies[l].clone();
        let block = &self.blocks[l];
        let columns = std::iter::once(0)
            .chain(block.aggregates.clone())
            .chain(block.bottoms.clone())
            .collect();
        let system = assemble(self.top_name.clone(), vec![h]);
        (system, columns)
    }
}

/// Combines hierarchies sharing `top` into one constraint system and checks
/// that the constraints are linearly independent.
pub fn link_hierarchies(specs: &[HierarchySpec], top: &str) -> Result<LinkedSystem> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("at least one hierarchy is required".into()));
    }
    for spec in specs {
        if spec.top != top {
            return Err(Error::TopMismatch {
                expected: top.to_string(),
                found: spec.top.clone(),
            });
        }
    }
    let mut names = HashSet::new();
    names.insert(top);
    for spec in specs {
        for s in spec.aggregates.iter().chain(&spec.bottoms) {
            if !names.insert(s.as_str()) {
                return Err(Error::DuplicateSeries(s.clone()));
            }
        }
    }

    let system = assemble(top.to_string(), specs.iter().map(build_matrices).collect());
    let rank = numerical_rank(&system.u_full);
    if rank < system.k() {
        return Err(Error::RankDeficient {
            rank,
            expected: system.k(),
        });
    }
    Ok(system)
}

fn assemble(top_name: String, hierarchies: Vec<Hierarchy>) -> LinkedSystem {
    let l_count = hierarchies.len();
    let n = 1 + hierarchies
        .iter()
        .map(|h| h.n_aggregates() + h.n_bottoms())
        .sum::<usize>();
    let k = l_count + hierarchies.iter().map(Hierarchy::n_aggregates).sum::<usize>();

    let mut ordering = vec![top_name.clone()];
    let mut blocks = Vec::with_capacity(l_count);
    let mut u_full = DMatrix::<f64>::zeros(k, n);
    let mut col = 1;
    let mut row = l_count;
    for (l, h) in hierarchies.iter().enumerate() {
        let (ma, mb) = (h.n_aggregates(), h.n_bottoms());
        let aggregates = col..col + ma;
        let bottoms = col + ma..col + ma + mb;
        ordering.extend(h.aggregate_names.iter().cloned());
        ordering.extend(h.bottom_names.iter().cloned());

        u_full[(l, 0)] = 1.0;
        u_full.view_mut((l, bottoms.start), (1, mb)).fill(-1.0);
        u_full.view_mut((row, aggregates.start), (ma, ma)).fill_with_identity();
        u_full.view_mut((row, bottoms.start), (ma, mb)).copy_from(&(-&h.c));

        row += ma;
        col += ma + mb;
        blocks.push(Block { aggregates, bottoms });
    }

    LinkedSystem {
        top_name,
        hierarchies,
        ordering,
        blocks,
        u_full,
    }
}

/// Rank from a column-pivoted QR: diagonal entries of `R` above
/// `RANK_TOLERANCE` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    // pivot over the columns of m' so rows of a wide constraint matrix are ranked
    let r = m.transpose().col_piv_qr().r();
    let d = r.diagonal().map(f64::abs);
    let max = d.max();
    if max == 0.0 {
        return 0;
    }
    d.iter().filter(|&&v| v > RANK_TOLERANCE * max).count()
}

/// `max |U'y|` scaled by `max(1, ||y||_inf)`.
pub fn coherence_violation(u_full: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let scale = y.amax().max(1.0);
    let r = u_full * y;
    r.amax() / scale
}

/// A balanced wide panel: `T` periods by `n` series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    series_names: Vec<String>,
    times: Vec<Quarter>,
    values: DMatrix<f64>,
}

impl TimeSeriesPanel {
    /// `values` is `times.len() x series_names.len()`. Periods must be
    /// consecutive quarters.
    pub fn new(series_names: Vec<String>, times: Vec<Quarter>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != times.len() || values.ncols() != series_names.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} x {}", times.len(), series_names.len()),
                actual: format!("{} x {}", values.nrows(), values.ncols()),
            });
        }
        for w in times.windows(2) {
            if w[1] != w[0].succ() {
                return Err(Error::InvalidParameter(format!(
                    "periods must be consecutive quarters ({} followed by {})",
                    w[0], w[1]
                )));
            }
        }
        let mut seen = HashSet::new();
        for s in &series_names {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateSeries(s.clone()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("panel".into()));
        }
        Ok(Self {
            series_names,
            times,
            values,
        })
    }

    /// Builds a panel from long-format `(series, period, value)` records.
    /// Series keep first-encounter order; every series must cover the same
    /// set of periods.
    pub fn from_long<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Quarter, f64)>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cells: HashMap<(usize, Quarter), f64> = HashMap::new();
        let mut periods = std::collections::BTreeSet::new();
        for (series, period, value) in records {
            let j = match index.get(&series) {
                Some(&j) => j,
                None => {
                    index.insert(series.clone(), names.len());
                    names.push(series.clone());
                    names.len() - 1
                }
            };
            if cells.insert((j, period), value).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate observation for `{series}` at {period}"
                )));
            }
            periods.insert(period);
        }
        let times: Vec<Quarter> = periods.into_iter().collect();
        let mut values = DMatrix::<f64>::zeros(times.len(), names.len());
        for (t, &q) in times.iter().enumerate() {
            for (j, name) in names.iter().enumerate() {
                values[(t, j)] = *cells.get(&(j, q)).ok_or_else(|| Error::MissingValue {
                    series: name.clone(),
                    period: q.to_string(),
                })?;
            }
        }
        Self::new(names, times, values)
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    pub fn times(&self) -> &[Quarter] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_periods(&self) -> usize {
        self.times.len()
    }

    pub fn n_series(&self) -> usize {
        self.series_names.len()
    }

    pub fn position(&self, period: Quarter) -> Option<usize> {
        self.times.iter().position(|&q| q == period)
    }

    /// Reorders columns to `order`, which must name exactly this panel's series.
    pub fn reorder(&self, order: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .series_names
            .iter()
            .enumerate()
            .map(|(j, s)| (s.as_str(), j))
            .collect();
        let wanted: HashSet<&str> = order.iter().map(String::as_str).collect();
        if let Some(extra) = self.series_names.iter().find(|s| !wanted.contains(s.as_str())) {
            return Err(Error::ExtraSeries(extra.clone()));
        }
        let mut values = DMatrix::<f64>::zeros(self.n_periods(), order.len());
        for (j, name) in order.iter().enumerate() {
            let src = *index
                .get(name.as_str())
                .ok_or_else(|| Error::MissingSeries(name.clone()))?;
            values.set_column(j, &self.values.column(src));
        }
        Ok(Self {
            series_names: order.to_vec(),
            times: self.times.clone(),
            values,
        })
    }

    /// Rows `range` as a new panel.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            series_names: self.series_names.clone(),
            times: self.times[range.clone()].to_vec(),
            values: self.values.rows(range.start, range.len()).into_owned(),
        }
    }

    /// Columns `columns` as a new panel.
    pub fn select(&self, columns: &[usize]) -> Self {
        Self {
            series_names: columns.iter().map(|&j| self.series_names[j].clone()).collect(),
            times: self.times.clone(),
            values: self.values.select_columns(columns),
        }
    }
}

/// Per-period relative coherence violation of `panel` under `system`.
pub fn check_coherence(panel: &TimeSeriesPanel, system: &LinkedSystem) -> Result<Vec<f64>> {
    if panel.series_names() != system.ordering() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} series in system order", system.n()),
            actual: format!("{} series", panel.n_series()),
        });
    }
    Ok((0..panel.n_periods())
        .map(|t| {
            let y = panel.values.row(t).transpose();
            coherence_violation(&system.u_full, &y)
        })
        .collect())
}
