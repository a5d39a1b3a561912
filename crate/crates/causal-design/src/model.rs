//! Discrete probability models attached to a design graph.
//!
//! A [`DiscreteModel`] gives every causal and selection variable a
//! conditional probability table. Tables are either explicit rows or the
//! saturated linear form for binary variables, where `P(v=1 | parents)` is a
//! sum of one named coefficient per parent subset, a subset's coefficient
//! being active when all its parents equal 1. Selection parents act as
//! gates rather than table dimensions: while any gate is 0 the variable is
//! forced (selection nodes to 0, determined variables to their baseline
//! value) — this is what makes "not selected, hence nothing happens"
//! cheap to encode.
//!
//! [`FrequencyTable`] is the companion data container: aggregated counts per
//! observed-value pattern with `NA` for values hidden by the design.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DesignGraph, NodeKind};

/// Default cap on enumerated joint state spaces.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Named parameter values feeding a [`DiscreteModel`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamMap(pub BTreeMap<String, f64>);

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|k| k.as_str())
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for ParamMap {
    fn from_iter<T: IntoIterator<Item = (S, f64)>>(iter: T) -> Self {
        ParamMap(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Whether a table belongs to the substantive model or the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamTag {
    /// Distribution of a causal variable.
    Theta,
    /// Selection probability or design-determined assignment.
    Psi,
}

/// How a conditional table gets its numbers.
#[derive(Debug, Clone, PartialEq)]
pub enum TableSpec {
    /// One row per parent configuration (mixed-radix order, last parent
    /// fastest), each row a distribution over the variable's values.
    Explicit(Vec<Vec<f64>>),
    /// Saturated linear form for a binary variable: `P(v=1 | pa)` is the sum
    /// of the coefficients whose parent subset is all-1. Subsets are listed
    /// by (size, position order) and each coefficient carries its parameter
    /// name; values come from a [`ParamMap`] at instantiation time.
    LinearBinary { coeffs: Vec<(String, Vec<usize>)> },
}

/// Conditional table of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VarTable {
    pub name: String,
    pub values: Vec<String>,
    /// Conditioning variables (table dimensions).
    pub parents: Vec<String>,
    /// Selection variables that must all be 1 for the table to apply.
    pub gates: Vec<String>,
    pub tag: ParamTag,
    pub spec: TableSpec,
}

/// A set of conditional tables over named variables, in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    vars: Vec<VarTable>,
}

/// Errors from model construction, instantiation, and data handling.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{0}` must be binary for the saturated linear parametrization")]
    NonBinaryVariable(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("parameters imply probability {value} for `{var}` given configuration {config:?}")]
    InvalidProbability { var: String, config: Vec<String>, value: f64 },
    #[error("table for `{var}` has {got} rows, expected {want}")]
    TableShape { var: String, got: usize, want: usize },
    #[error("row for `{var}` does not sum to 1 (got {sum})")]
    RowNotNormalized { var: String, sum: f64 },
    #[error("state space of {states} configurations exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("frequency table row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("value `{value}` is not in the domain of `{var}`")]
    BadValue { var: String, value: String },
}

impl DiscreteModel {
    pub fn new(vars: Vec<VarTable>) -> Result<Self, ModelError> {
        let mut seen = BTreeMap::new();
        for (ix, v) in vars.iter().enumerate() {
            if seen.insert(v.name.clone(), ix).is_some() {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
        }
        for v in &vars {
            for p in v.parents.iter().chain(&v.gates) {
                if !seen.contains_key(p) {
                    return Err(ModelError::UnknownVariable(p.clone()));
                }
            }
        }
        Ok(DiscreteModel { vars })
    }

    pub fn vars(&self) -> &[VarTable] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Result<&VarTable, ModelError> {
        self.vars
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    /// All parameter names referenced by linear tables, in table order.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for v in &self.vars {
            if let TableSpec::LinearBinary { coeffs } = &v.spec {
                out.extend(coeffs.iter().map(|(name, _)| name.clone()));
            }
        }
        out
    }

    /// Resolves every table to explicit rows and checks all probabilities
    /// land in `[0, 1]`.
    pub fn instantiate(&self, params: &ParamMap) -> Result<ConcreteModel, ModelError> {
        let index: BTreeMap<&str, usize> =
            self.vars.iter().enumerate().map(|(ix, v)| (v.name.as_str(), ix)).collect();
        let mut entries = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            let parent_ixs: Vec<usize> = v.parents.iter().map(|p| index[p.as_str()]).collect();
            let gate_ixs: Vec<usize> = v.gates.iter().map(|g| index[g.as_str()]).collect();
            let n_rows: usize =
                parent_ixs.iter().map(|&p| self.vars[p].values.len()).product::<usize>().max(1);
            let rows = match &v.spec {
                TableSpec::Explicit(rows) => {
                    if rows.len() != n_rows {
                        return Err(ModelError::TableShape {
                            var: v.name.clone(),
                            got: rows.len(),
                            want: n_rows,
                        });
                    }
                    for row in rows {
                        let sum: f64 = row.iter().sum();
                        if row.len() != v.values.len() || (sum - 1.0).abs() > 1e-9 {
                            return Err(ModelError::RowNotNormalized {
                                var: v.name.clone(),
                                sum,
                            });
                        }
                    }
                    rows.clone()
                }
                TableSpec::LinearBinary { coeffs } => {
                    let mut rows = Vec::with_capacity(n_rows);
                    for row_ix in 0..n_rows {
                        // Parent values for this row, mixed radix, last parent fastest.
                        let mut rem = row_ix;
                        let mut bits = vec![0usize; parent_ixs.len()];
                        for (slot, &p) in parent_ixs.iter().enumerate().rev() {
                            let card = self.vars[p].values.len();
                            bits[slot] = rem % card;
                            rem /= card;
                        }
                        let mut p1 = 0.0;
                        for (name, subset) in coeffs {
                            if subset.iter().all(|&s| bits[s] == 1) {
                                p1 += params
                                    .get(name)
                                    .ok_or_else(|| ModelError::MissingParam(name.clone()))?;
                            }
                        }
                        if !(0.0..=1.0).contains(&p1) {
                            let config = bits
                                .iter()
                                .enumerate()
                                .map(|(slot, &b)| {
                                    format!("{}={}", v.parents[slot], self.vars[parent_ixs[slot]].values[b])
                                })
                                .collect();
                            return Err(ModelError::InvalidProbability {
                                var: v.name.clone(),
                                config,
                                value: p1,
                            });
                        }
                        rows.push(vec![1.0 - p1, p1]);
                    }
                    rows
                }
            };
            entries.push(ConcreteVar {
                name: v.name.clone(),
                values: v.values.clone(),
                parent_ixs,
                gate_ixs,
                // Gated-off selections and design-determined variables take
                // their baseline (first) value with certainty.
                forced: 0,
                rows,
            });
        }
        Ok(ConcreteModel { entries })
    }

    /// True when `params` yields a fully valid model.
    pub fn is_valid(&self, params: &ParamMap) -> bool {
        self.instantiate(params).is_ok()
    }
}

/// A variable with its table resolved to explicit probabilities.
#[derive(Debug, Clone)]
pub struct ConcreteVar {
    pub name: String,
    pub values: Vec<String>,
    pub parent_ixs: Vec<usize>,
    pub gate_ixs: Vec<usize>,
    /// Value index taken with certainty while any gate is 0.
    pub forced: usize,
    pub rows: Vec<Vec<f64>>,
}

/// A [`DiscreteModel`] with numbers filled in.
#[derive(Debug, Clone)]
pub struct ConcreteModel {
    entries: Vec<ConcreteVar>,
}

impl ConcreteModel {
    pub fn entries(&self) -> &[ConcreteVar] {
        &self.entries
    }

    pub fn var_index(&self, name: &str) -> Result<usize, ModelError> {
        self.entries
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    /// Distribution of variable `ix` given a full assignment of earlier
    /// variables (value indices). Applies gate semantics.
    pub fn dist(&self, ix: usize, assignment: &[usize]) -> DistRef<'_> {
        let v = &self.entries[ix];
        if v.gate_ixs.iter().any(|&g| self.entries[g].values[assignment[g]] != "1") {
            return DistRef::Forced(v.forced);
        }
        let mut row = 0usize;
        for &p in &v.parent_ixs {
            row = row * self.entries[p].values.len() + assignment[p];
        }
        DistRef::Row(&v.rows[row])
    }

    /// Probability of one full assignment (value indices, model order).
    pub fn prob(&self, assignment: &[usize]) -> f64 {
        let mut p = 1.0;
        for ix in 0..self.entries.len() {
            match self.dist(ix, assignment) {
                DistRef::Forced(f) => {
                    if assignment[ix] != f {
                        return 0.0;
                    }
                }
                DistRef::Row(row) => p *= row[assignment[ix]],
            }
        }
        p
    }

    /// Truncated factorization: each intervened variable's table becomes a
    /// point mass on the set value, cut off from parents and gates; all
    /// other tables are untouched.
    pub fn do_intervene(&self, pins: &[(usize, usize)]) -> ConcreteModel {
        let mut out = self.clone();
        for &(ix, value) in pins {
            let v = &mut out.entries[ix];
            v.parent_ixs.clear();
            v.gate_ixs.clear();
            let mut row = vec![0.0; v.values.len()];
            row[value] = 1.0;
            v.rows = vec![row];
        }
        out
    }

    /// Exact joint distribution by enumeration.
    pub fn joint(&self, cap: usize) -> Result<JointTable, ModelError> {
        let states: u128 = self.entries.iter().map(|v| v.values.len() as u128).product();
        if states > cap as u128 {
            return Err(ModelError::StateSpaceTooLarge { states, cap });
        }
        let states = states as usize;
        let mut probs = vec![0.0; states];
        let mut assignment = vec![0usize; self.entries.len()];
        for (flat, slot) in probs.iter_mut().enumerate() {
            let mut rem = flat;
            for ix in (0..self.entries.len()).rev() {
                let card = self.entries[ix].values.len();
                assignment[ix] = rem % card;
                rem /= card;
            }
            *slot = self.prob(&assignment);
        }
        Ok(JointTable {
            vars: self.entries.iter().map(|v| v.name.clone()).collect(),
            domains: self.entries.iter().map(|v| v.values.clone()).collect(),
            probs,
        })
    }
}

/// Either a forced value or a table row.
pub enum DistRef<'a> {
    Forced(usize),
    Row(&'a [f64]),
}

/// A dense joint distribution over named variables.
#[derive(Debug, Clone)]
pub struct JointTable {
    pub vars: Vec<String>,
    pub domains: Vec<Vec<String>>,
    /// Mixed-radix flat storage, last variable fastest.
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn var_index(&self, name: &str) -> Result<usize, ModelError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    pub fn value_index(&self, var: usize, value: &str) -> Result<usize, ModelError> {
        self.domains[var].iter().position(|v| v == value).ok_or_else(|| ModelError::BadValue {
            var: self.vars[var].clone(),
            value: value.to_string(),
        })
    }

    pub fn flat_index(&self, assignment: &[usize]) -> usize {
        let mut flat = 0usize;
        for (ix, &val) in assignment.iter().enumerate() {
            flat = flat * self.domains[ix].len() + val;
        }
        flat
    }

    /// Iterates all assignments as value-index vectors.
    pub fn assignments(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let cards: Vec<usize> = self.domains.iter().map(|d| d.len()).collect();
        let total = self.probs.len();
        (0..total).map(move |flat| {
            let mut rem = flat;
            let mut assignment = vec![0usize; cards.len()];
            for ix in (0..cards.len()).rev() {
                assignment[ix] = rem % cards[ix];
                rem /= cards[ix];
            }
            assignment
        })
    }

    /// Total probability of the assignments matching all `fixed` pairs
    /// (variable index, value index).
    pub fn sum_where(&self, fixed: &[(usize, usize)]) -> f64 {
        let mut total = 0.0;
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut rem = flat;
            let mut ok = true;
            let mut values = vec![0usize; self.vars.len()];
            for ix in (0..self.vars.len()).rev() {
                values[ix] = rem % self.domains[ix].len();
                rem /= self.domains[ix].len();
            }
            for &(var, val) in fixed {
                if values[var] != val {
                    ok = false;
                    break;
                }
            }
            if ok {
                total += p;
            }
        }
        total
    }

    /// Marginal over a subset of variables (by index, in the given order).
    pub fn marginal(&self, keep: &[usize]) -> JointTable {
        let domains: Vec<Vec<String>> = keep.iter().map(|&k| self.domains[k].clone()).collect();
        let cards: Vec<usize> = domains.iter().map(|d| d.len()).collect();
        let total: usize = cards.iter().product::<usize>().max(1);
        let mut probs = vec![0.0; total];
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut rem = flat;
            let mut values = vec![0usize; self.vars.len()];
            for ix in (0..self.vars.len()).rev() {
                values[ix] = rem % self.domains[ix].len();
                rem /= self.domains[ix].len();
            }
            let mut out = 0usize;
            for (slot, &k) in keep.iter().enumerate() {
                out = out * cards[slot] + values[k];
            }
            probs[out] += p;
        }
        JointTable {
            vars: keep.iter().map(|&k| self.vars[k].clone()).collect(),
            domains,
            probs,
        }
    }
}

/// Aggregated observed data: one row per observed-value pattern, `None`
/// marking values hidden by the design, plus a count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub columns: Vec<String>,
    pub rows: Vec<(Vec<Option<String>>, u64)>,
}

impl FrequencyTable {
    pub fn new(columns: Vec<String>) -> Self {
        FrequencyTable { columns, rows: Vec::new() }
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|(_, n)| n).sum()
    }

    /// Reads `var1,...,varK,count` CSV with `NA` for missing values.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut columns: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        match columns.pop() {
            Some(last) if last == "count" => {}
            _ => {
                return Err(ModelError::BadRow {
                    row: 1,
                    message: "last column must be `count`".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (ix, record) in rdr.records().enumerate() {
            let record = record?;
            let row_no = ix + 2;
            if record.len() != columns.len() + 1 {
                return Err(ModelError::BadRow {
                    row: row_no,
                    message: format!(
                        "expected {} fields, got {}",
                        columns.len() + 1,
                        record.len()
                    ),
                });
            }
            let values: Vec<Option<String>> = record
                .iter()
                .take(columns.len())
                .map(|v| {
                    let v = v.trim();
                    if v == "NA" {
                        None
                    } else {
                        Some(v.to_string())
                    }
                })
                .collect();
            let count: u64 = record[columns.len()].trim().parse().map_err(|_| {
                ModelError::BadRow {
                    row: row_no,
                    message: format!("invalid count `{}`", &record[columns.len()]),
                }
            })?;
            rows.push((values, count));
        }
        Ok(FrequencyTable { columns, rows })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = self.columns.clone();
        header.push("count".into());
        wtr.write_record(&header)?;
        for (values, count) in &self.rows {
            let mut record: Vec<String> =
                values.iter().map(|v| v.clone().unwrap_or_else(|| "NA".into())).collect();
            record.push(count.to_string());
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_csv_writer(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }
}

/// Letter-style parameter name. Subset letters are concatenated when every
/// causal variable in the model is a single character (matching the usual
/// subscript notation), otherwise joined with underscores. `sep` forces a
/// separator between the target and a nonempty subset — used for selection
/// nodes, whose multi-character ids would glue unreadably.
fn param_name(prefix: &str, target: &str, subset: &[&str], terse: bool, sep: bool) -> String {
    if subset.is_empty() {
        return format!("{prefix}_{target}");
    }
    let sub = if terse { subset.concat() } else { subset.join("_") };
    if sep || !terse {
        format!("{prefix}_{target}_{sub}")
    } else {
        format!("{prefix}_{target}{sub}")
    }
}

/// Builds the saturated risk-difference parametrization of a binary design:
/// every causal variable gets `P(v=1 | parents)` as a sum of one coefficient
/// per parent subset (`theta_*`), every non-population selection node and
/// design-determined variable the analogous `psi_*` family over its
/// non-selection parents. Selection parents act as gates; data-node parents
/// condition on the underlying causal value.
pub fn saturated_binary_parametrization(g: &DesignGraph) -> Result<DiscreteModel, ModelError> {
    let topo = g.topo_order().expect("design graphs are acyclic");
    let layer = causal_layers(g);

    // Terse names only when every causal variable is a single character.
    let terse = g
        .causal_ids()
        .iter()
        .all(|id| id.chars().count() == 1);

    let mut vars = Vec::new();
    for &ix in &topo {
        let node = g.node(ix);
        let is_population = Some(node.id.as_str()) == g.population_id();
        match node.kind {
            NodeKind::Data => continue,
            NodeKind::Selection if is_population => continue,
            _ => {}
        }
        if node.domain_values() != BINARY_DOMAIN_VALUES {
            return Err(ModelError::NonBinaryVariable(node.id.clone()));
        }

        // Split graph parents into gates (selection) and table dimensions
        // (causal directly, data nodes via their underlying variable).
        let mut gates = Vec::new();
        let mut dims: Vec<String> = Vec::new();
        for p in g.parents(&node.id).expect("node exists") {
            let parent = g.node_by_id(p).unwrap();
            match parent.kind {
                // The population indicator is identically 1 and gates nothing.
                NodeKind::Selection if Some(p) == g.population_id() => {}
                NodeKind::Selection => gates.push(p.to_string()),
                NodeKind::Causal => dims.push(p.to_string()),
                NodeKind::Data => {
                    let (causal, _) = g.measured_pair(p).expect("validated data node");
                    dims.push(causal.to_string());
                }
            }
        }
        // Dimensions in subscript order: causally latest first.
        dims.sort_by(|a, b| {
            let la = layer.get(a.as_str()).copied().unwrap_or(0);
            let lb = layer.get(b.as_str()).copied().unwrap_or(0);
            lb.cmp(&la).then_with(|| a.cmp(b))
        });

        let tag = if node.kind == NodeKind::Selection || node.info.determined() {
            ParamTag::Psi
        } else {
            ParamTag::Theta
        };
        let prefix = match tag {
            ParamTag::Theta => "theta",
            ParamTag::Psi => "psi",
        };

        let mut coeffs = Vec::new();
        for subset in subsets_by_size(dims.len()) {
            let names: Vec<&str> = subset.iter().map(|&s| dims[s].as_str()).collect();
            let sep = tag == ParamTag::Psi;
            coeffs.push((param_name(prefix, &node.id, &names, terse, sep), subset));
        }
        vars.push(VarTable {
            name: node.id.clone(),
            values: vec!["0".into(), "1".into()],
            parents: dims,
            gates,
            tag,
            spec: TableSpec::LinearBinary { coeffs },
        });
    }
    DiscreteModel::new(vars)
}

const BINARY_DOMAIN_VALUES: [&str; 2] = ["0", "1"];

/// All subsets of `0..n` ordered by (size, lexicographic positions).
fn subsets_by_size(n: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (0..1usize << n)
        .map(|mask| (0..n).filter(|&b| mask >> b & 1 == 1).collect())
        .collect();
    subsets.sort_by_key(|s| (s.len(), s.clone()));
    subsets
}

/// Topological layer of each causal node within the causal projection.
fn causal_layers(g: &DesignGraph) -> BTreeMap<String, usize> {
    g.causal_projection().topo_layers().expect("projection of a DAG is a DAG")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::build_graph;

    const CASE_CONTROL: &str = "\
graph cc
population mOmega
node X kind=causal info=unobserved
node Z kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
node m2 kind=selection info=det-known stage=2
edge X -> Z
edge X -> Y
edge Z -> Y
measure Y* : Y by m1 stage=1
measure X* : X by m2 stage=2
measure Z* : Z by m2 stage=2
edge m1 -> m2
edge Y* -> m2
";

    fn params() -> ParamMap {
        [
            ("theta_X", 0.5),
            ("theta_Z", 0.05),
            ("theta_ZX", 0.9),
            ("theta_Y", 0.1),
            ("theta_YX", 0.8),
            ("theta_YZ", -0.04),
            ("theta_YZX", -0.002),
            ("psi_m1", 1.0),
            ("psi_m2", 0.095),
            ("psi_m2_Y", 0.01),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn saturated_family_uses_subscript_names() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        assert_eq!(
            model.param_names(),
            vec![
                "theta_X", "theta_Z", "theta_ZX", "theta_Y", "theta_YZ", "theta_YX", "theta_YZX",
                "psi_m1", "psi_m2", "psi_m2_Y",
            ]
        );
        // m2 is gated by m1 and conditioned on the recorded Y value.
        let m2 = model.var("m2").unwrap();
        assert_eq!(m2.gates, vec!["m1"]);
        assert_eq!(m2.parents, vec!["Y"]);
        assert_eq!(m2.tag, ParamTag::Psi);
    }

    #[test]
    fn instantiation_expands_linear_tables() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let concrete = model.instantiate(&params()).unwrap();
        let y = concrete.var_index("Y").unwrap();
        // Parent order for Y is (Z, X): latest causal layer first.
        let rows = &concrete.entries()[y].rows;
        assert_eq!(rows.len(), 4);
        let p_y1 = |z: usize, x: usize| rows[z * 2 + x][1];
        assert!((p_y1(0, 0) - 0.1).abs() < 1e-12);
        assert!((p_y1(0, 1) - 0.9).abs() < 1e-12);
        assert!((p_y1(1, 0) - 0.06).abs() < 1e-12);
        assert!((p_y1(1, 1) - (0.1 + 0.8 - 0.04 - 0.002)).abs() < 1e-12);
    }

    #[test]
    fn instantiation_rejects_out_of_range_probabilities() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let mut bad = params();
        bad.set("theta_YX", 0.95); // pushes P(Y=1 | Z=0, X=1) above 1
        match model.instantiate(&bad).unwrap_err() {
            ModelError::InvalidProbability { var, value, .. } => {
                assert_eq!(var, "Y");
                assert!(value > 1.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
        let mut missing = params();
        missing.0.remove("theta_YZX");
        assert!(matches!(
            model.instantiate(&missing).unwrap_err(),
            ModelError::MissingParam(name) if name == "theta_YZX"
        ));
    }

    #[test]
    fn joint_distribution_sums_to_one_with_gates() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let concrete = model.instantiate(&params()).unwrap();
        let joint = concrete.joint(DEFAULT_STATE_CAP).unwrap();
        let total: f64 = joint.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Gate semantics: P(m2 = 1, m1 = 0) must be 0.
        let m1 = joint.var_index("m1").unwrap();
        let m2 = joint.var_index("m2").unwrap();
        assert_eq!(joint.sum_where(&[(m1, 0), (m2, 1)]), 0.0);
    }

    #[test]
    fn state_cap_is_enforced() {
        let vars: Vec<VarTable> = (0..8)
            .map(|i| VarTable {
                name: format!("v{i}"),
                values: (0..6).map(|v| v.to_string()).collect(),
                parents: vec![],
                gates: vec![],
                tag: ParamTag::Theta,
                spec: TableSpec::Explicit(vec![vec![1.0 / 6.0; 6]]),
            })
            .collect();
        let model = DiscreteModel::new(vars).unwrap();
        let concrete = model.instantiate(&ParamMap::new()).unwrap();
        assert!(matches!(
            concrete.joint(1 << 20).unwrap_err(),
            ModelError::StateSpaceTooLarge { .. }
        ));
    }

    #[test]
    fn frequency_table_round_trips_through_csv() {
        let mut table = FrequencyTable::new(vec!["X".into(), "Z".into(), "Y".into()]);
        table.rows.push((vec![Some("0".into()), Some("0".into()), Some("1".into())], 100));
        table.rows.push((vec![None, None, Some("1".into())], 8500));
        let text = table.to_csv_string();
        assert_eq!(text, "X,Z,Y,count\n0,0,1,100\nNA,NA,1,8500\n");
        let back = FrequencyTable::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.total(), 8600);
    }

    #[test]
    fn frequency_table_rejects_malformed_input() {
        let missing_count = "X,Y\n0,1\n";
        assert!(matches!(
            FrequencyTable::from_csv_reader(missing_count.as_bytes()).unwrap_err(),
            ModelError::BadRow { row: 1, .. }
        ));
        let bad_count = "X,count\n0,many\n";
        assert!(matches!(
            FrequencyTable::from_csv_reader(bad_count.as_bytes()).unwrap_err(),
            ModelError::BadRow { row: 2, .. }
        ));
    }

    #[test]
    fn marginal_and_sum_where_agree() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let joint = model.instantiate(&params()).unwrap().joint(DEFAULT_STATE_CAP).unwrap();
        let y = joint.var_index("Y").unwrap();
        let marginal = joint.marginal(&[y]);
        assert!((marginal.probs[1] - joint.sum_where(&[(y, 1)])).abs() < 1e-12);
    }
}
