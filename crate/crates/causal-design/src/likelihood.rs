//! Observed-data likelihoods factorized by selection strata.
//!
//! A design whose selection nodes form a chain from the population splits
//! individuals by how far down the chain they travel: each stratum pins the
//! deepest selection reached (and its successor to 0), determining which
//! causal variables have readable records. [`factorize`] writes the full
//! per-individual likelihood in that stratified form, [`marginalize`] turns
//! the variables without records into explicit sums and drops factors that
//! integrate to one, and [`loglik`] evaluates the result against a
//! [`FrequencyTable`] of observed counts.
//!
//! Rows are matched to strata by their missingness pattern (plus any
//! selection-indicator columns the table carries). When several strata are
//! observationally indistinguishable — possible when an unobserved selection
//! sits on the chain — a row's probability is the sum over all strata
//! consistent with its evidence, which keeps the result equal to brute-force
//! enumeration of the underlying model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{DesignGraph, GraphError, NodeKind};
use crate::model::{DiscreteModel, DistRef, FrequencyTable, ModelError, ParamMap, ParamTag};
use crate::transforms::ignorable_selection_terms;

/// Errors from factorization and likelihood evaluation.
#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("selection node `{0}` branches; strata need the selections to form a chain")]
    NotAChain(String),
    #[error("data row {row} matches no selection stratum")]
    RowMatchesNoStratum { row: usize },
    #[error("data row {row} has zero probability; log-likelihood is not finite")]
    NonfiniteLogLik { row: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One conditioning entry of a [`Factor`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Given {
    /// Conditioning variable (a causal or selection id).
    pub var: String,
    /// Value pinned by the stratum (selection gates and the population).
    pub value: Option<String>,
    /// Data node supplying the variable's value in this stratum; renders as
    /// `var=var*`.
    pub substituted: Option<String>,
}

/// One conditional probability term of a stratum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    /// Variable the factor is a distribution of.
    pub target: String,
    /// Value pinned by the stratum pattern (selection indicators).
    pub value: Option<String>,
    /// Data node supplying the target's value; renders as `p_X(X* | ...)`.
    pub substituted: Option<String>,
    /// Conditioning entries in subscript order (gates first).
    pub given: Vec<Given>,
    /// Whether the term belongs to the substantive model or the design.
    pub tag: ParamTag,
    /// True when the factor reads no random value, so dropping it shifts the
    /// log-likelihood by a constant free of the substantive parameters.
    pub ignorable: bool,
}

/// One selection stratum: a pattern over the selection chain together with
/// the probability terms of the individuals matching it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    /// Defining pattern, deepest selection first, e.g. `{m2=0, m1=1}`.
    pub pattern: Vec<(String, String)>,
    /// Value every selection node takes under the pattern (chain gating
    /// forces everything the pattern does not mention).
    pub selection_values: BTreeMap<String, String>,
    /// Ordered factors of the per-individual likelihood contribution.
    pub factors: Vec<Factor>,
    /// Causal variables with readable records under this pattern.
    pub observed: BTreeSet<String>,
    /// Causal variables without records: the integration scope.
    pub marginalized: BTreeSet<String>,
}

impl Stratum {
    fn pattern_text(&self) -> String {
        let entries: Vec<String> =
            self.pattern.iter().map(|(s, v)| format!("{s}={v}")).collect();
        format!("{{{}}}", entries.join(", "))
    }
}

/// A per-individual likelihood split into selection strata; the full data
/// likelihood is the product of the matching stratum term over individuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub graph_name: String,
    pub strata: Vec<Stratum>,
    /// Selection nodes whose probability reads other individuals' records;
    /// the symbolic form is still valid per individual, but numeric fitting
    /// of such designs is not supported.
    pub shared_selections: Vec<String>,
    /// True once [`marginalize`] has folded unobserved variables into sums.
    pub integrated: bool,
}

impl Factorization {
    /// Copy with every ignorable factor removed. The remaining terms define
    /// the same maximum over substantive parameters, since each dropped
    /// factor contributes a constant.
    pub fn without_ignorable(&self) -> Factorization {
        let mut out = self.clone();
        for stratum in &mut out.strata {
            stratum.factors.retain(|f| !f.ignorable);
        }
        out
    }
}

/// Selection nodes below the population, ordered from the population
/// outward. Errors when the nesting branches.
fn selection_chain(g: &DesignGraph) -> Result<Vec<String>, LikelihoodError> {
    let mut chain = Vec::new();
    let mut current = g.population().to_string();
    loop {
        let next: Vec<&str> = g
            .children(&current)?
            .into_iter()
            .filter(|c| g.node_by_id(c).unwrap().kind == NodeKind::Selection)
            .collect();
        match next.as_slice() {
            [] => break,
            [only] => {
                chain.push(only.to_string());
                current = only.to_string();
            }
            _ => return Err(LikelihoodError::NotAChain(current)),
        }
    }
    // Chains must account for every selection node.
    let on_chain: BTreeSet<&str> = chain.iter().map(String::as_str).collect();
    for s in g.selection_ids() {
        if s != g.population() && !on_chain.contains(s) {
            return Err(LikelihoodError::NotAChain(s.to_string()));
        }
    }
    Ok(chain)
}

/// Stratum patterns for a chain, deepest selection peeled first: all-in,
/// then one pattern per exit depth.
fn chain_patterns(chain: &[String]) -> Vec<Vec<(String, String)>> {
    let mut patterns = Vec::new();
    if chain.is_empty() {
        patterns.push(Vec::new());
        return patterns;
    }
    patterns.push(vec![(chain[chain.len() - 1].clone(), "1".to_string())]);
    for d in (0..chain.len()).rev() {
        let mut p = vec![(chain[d].clone(), "0".to_string())];
        if d > 0 {
            p.push((chain[d - 1].clone(), "1".to_string()));
        }
        patterns.push(p);
    }
    patterns
}

/// Writes the per-individual likelihood of a design stratified by its
/// selection chain. Factors appear in topological order with the record
/// substitutions (`X=X*`) the stratum makes available; variables forced by
/// gating (deeper selections, design-determined values of the unselected)
/// contribute probability one and are omitted.
pub fn factorize(g: &DesignGraph) -> Result<Factorization, LikelihoodError> {
    let chain = selection_chain(g)?;
    let ignorable = ignorable_selection_terms(g);
    let pop = g.population().to_string();
    let topo = g.topo_order()?;
    let layer = g.causal_projection().topo_layers()?;

    let mut strata = Vec::new();
    for pattern in chain_patterns(&chain) {
        // Chain gating: everything above the pattern's deepest mention is 1,
        // everything below is 0.
        let mut selection_values: BTreeMap<String, String> = BTreeMap::new();
        selection_values.insert(pop.clone(), "1".into());
        let cut = pattern
            .first()
            .map(|(s, _)| chain.iter().position(|c| c == s).unwrap())
            .unwrap_or(0);
        for (d, s) in chain.iter().enumerate() {
            let value = if d < cut {
                "1"
            } else if d == cut && !pattern.is_empty() {
                pattern[0].1.as_str()
            } else {
                "0"
            };
            selection_values.insert(s.clone(), value.into());
        }

        // A causal variable has a readable record when its own status makes
        // the value available or its measurement's selection is switched on.
        let mut observed = BTreeSet::new();
        for v in g.causal_ids() {
            let known = g.node_by_id(v).unwrap().info.known();
            let measured = g
                .measurement_of(v)?
                .map(|d| {
                    let (_, s) = g.measured_pair(d).unwrap();
                    selection_values[s] == "1"
                })
                .unwrap_or(false);
            if known || measured {
                observed.insert(v.to_string());
            }
        }

        let mut factors = Vec::new();
        let mut marginalized = BTreeSet::new();
        for &ix in &topo {
            let node = g.node(ix);
            if node.kind == NodeKind::Data || node.id == pop {
                continue;
            }
            // Split parents: selections gate, everything else conditions
            // (data parents via their underlying causal variable).
            let mut gates = Vec::new();
            let mut dims = Vec::new();
            for p in g.parents(&node.id)? {
                match g.node_by_id(p).unwrap().kind {
                    NodeKind::Selection => gates.push(p.to_string()),
                    NodeKind::Causal => dims.push(p.to_string()),
                    NodeKind::Data => dims.push(g.measured_pair(p)?.0.to_string()),
                }
            }
            // Conditioning order matches the parameter subscripts:
            // causally latest first.
            dims.sort_by(|a, b| {
                let (la, lb) = (layer.get(a).copied(), layer.get(b).copied());
                lb.cmp(&la).then_with(|| a.cmp(b))
            });
            let gated_off = gates.iter().any(|s| selection_values[s] == "0");
            match node.kind {
                NodeKind::Selection => {
                    if gated_off {
                        continue; // forced to 0 with certainty
                    }
                }
                NodeKind::Causal => {
                    if gated_off {
                        continue; // forced to the design baseline
                    }
                    if !observed.contains(&node.id) {
                        marginalized.insert(node.id.clone());
                    }
                }
                NodeKind::Data => unreachable!(),
            }

            let substitution = |v: &str| -> Option<String> {
                if !observed.contains(v) {
                    return None;
                }
                g.measurement_of(v).unwrap().map(str::to_string)
            };
            // The population gate is identically 1, so it renders bare.
            let given: Vec<Given> = gates
                .iter()
                .map(|s| Given {
                    var: s.clone(),
                    value: (*s != pop).then(|| selection_values[s].clone()),
                    substituted: None,
                })
                .chain(dims.iter().map(|v| Given {
                    var: v.clone(),
                    value: None,
                    substituted: substitution(v),
                }))
                .collect();
            let value = match node.kind {
                NodeKind::Selection => Some(selection_values[&node.id].clone()),
                _ => None,
            };
            let tag = if node.kind == NodeKind::Selection || node.info.determined() {
                ParamTag::Psi
            } else {
                ParamTag::Theta
            };
            factors.push(Factor {
                target: node.id.clone(),
                value,
                substituted: substitution(&node.id),
                given,
                tag,
                ignorable: *ignorable.get(&node.id).unwrap_or(&false),
            });
        }

        strata.push(Stratum { pattern, selection_values, factors, observed, marginalized });
    }

    let shared_selections = g
        .selection_ids()
        .into_iter()
        .filter(|s| g.node_by_id(s).unwrap().shared)
        .map(str::to_string)
        .collect();
    Ok(Factorization {
        graph_name: g.name().to_string(),
        strata,
        shared_selections,
        integrated: false,
    })
}

/// Integrates each stratum over its unrecorded variables: factors whose
/// target is unrecorded and referenced nowhere else sum to one and are
/// removed (iterated until stable), and what remains renders with an
/// explicit sum scope. Strata with no recorded variables and no causal
/// dependence in their selection terms reduce to selection-only factors.
pub fn marginalize(f: &Factorization, _g: &DesignGraph) -> Factorization {
    let mut out = f.clone();
    out.integrated = true;
    for stratum in &mut out.strata {
        loop {
            let referenced: BTreeSet<&str> = stratum
                .factors
                .iter()
                .flat_map(|f| f.given.iter().map(|g| g.var.as_str()))
                .collect();
            let drop = stratum.factors.iter().position(|f| {
                f.value.is_none()
                    && stratum.marginalized.contains(&f.target)
                    && !referenced.contains(f.target.as_str())
            });
            match drop {
                Some(ix) => {
                    stratum.factors.remove(ix);
                }
                None => break,
            }
        }
        // The sum scope is what the surviving factors still mention.
        let referenced: BTreeSet<String> = stratum
            .factors
            .iter()
            .flat_map(|f| {
                f.given.iter().map(|g| g.var.clone()).chain(std::iter::once(f.target.clone()))
            })
            .collect();
        stratum.marginalized.retain(|v| referenced.contains(v));
    }
    out
}

fn factor_text(f: &Factor) -> String {
    let mut out = String::from("p");
    if let Some(data) = &f.substituted {
        let _ = write!(out, "_{}({data}", f.target);
    } else if let Some(v) = &f.value {
        let _ = write!(out, "({}={v}", f.target);
    } else {
        let _ = write!(out, "({}", f.target);
    }
    let mut given: Vec<String> = f
        .given
        .iter()
        .map(|g| match (&g.value, &g.substituted) {
            (Some(v), _) => format!("{}={v}", g.var),
            (None, Some(data)) => format!("{}={data}", g.var),
            (None, None) => g.var.clone(),
        })
        .collect();
    given.push(
        match f.tag {
            ParamTag::Theta => "theta",
            ParamTag::Psi => "psi",
        }
        .to_string(),
    );
    let _ = write!(out, " | {})", given.join(", "));
    out
}

/// Renders the factorization as one product line per stratum, with the sum
/// over unrecorded variables spelled out once the form is integrated.
pub fn to_text(f: &Factorization) -> String {
    let mut out = String::new();
    for stratum in &f.strata {
        let head = if stratum.pattern.is_empty() {
            "prod{i}".to_string()
        } else {
            format!("prod{{i : {}}}", stratum.pattern_text().trim_matches(['{', '}']))
        };
        let _ = write!(out, "{head} ");
        if !f.integrated || stratum.marginalized.is_empty() {
            let terms: Vec<String> = stratum.factors.iter().map(factor_text).collect();
            let _ = writeln!(out, "{}", if terms.is_empty() { "1".into() } else { terms.join(" ") });
            continue;
        }
        // Factors touching the sum scope go inside the brackets.
        let inside = |f: &Factor| {
            stratum.marginalized.contains(&f.target)
                || f.given.iter().any(|g| stratum.marginalized.contains(&g.var))
        };
        let scope: Vec<&str> = stratum.marginalized.iter().map(String::as_str).collect();
        let inner: Vec<String> =
            stratum.factors.iter().filter(|f| inside(f)).map(factor_text).collect();
        let outer: Vec<String> =
            stratum.factors.iter().filter(|f| !inside(f)).map(factor_text).collect();
        let _ = write!(out, "sum_{{{}}} [ {} ]", scope.join(", "), inner.join(" "));
        if outer.is_empty() {
            out.push('\n');
        } else {
            let _ = writeln!(out, " {}", outer.join(" "));
        }
    }
    out
}

/// JSON form of the factorization, mirroring the text rendering.
pub fn to_json(f: &Factorization) -> Value {
    let strata: Vec<Value> = f
        .strata
        .iter()
        .map(|s| {
            let factors: Vec<Value> = s
                .factors
                .iter()
                .map(|f| {
                    json!({
                        "target": f.target,
                        "value": f.value,
                        "substituted": f.substituted,
                        "given": f.given.iter().map(|g| json!({
                            "var": g.var,
                            "value": g.value,
                            "substituted": g.substituted,
                        })).collect::<Vec<_>>(),
                        "tag": match f.tag { ParamTag::Theta => "theta", ParamTag::Psi => "psi" },
                        "ignorable": f.ignorable,
                    })
                })
                .collect();
            json!({
                "pattern": s.pattern.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
                "factors": factors,
                "observed": s.observed,
                "marginalized": s.marginalized,
            })
        })
        .collect();
    json!({
        "graph": f.graph_name,
        "integrated": f.integrated,
        "shared_selections": f.shared_selections,
        "strata": strata,
    })
}

/// Log-likelihood of aggregated observed data under the factorized model.
///
/// Columns must name model variables; `NA` marks values the design hid.
/// Each row's probability sums the strata consistent with its evidence,
/// enumerating the unrecorded variables of each. Parameter values outside
/// the validity region return `-inf` (rejection), while a data row that is
/// impossible under valid parameters is an error.
pub fn loglik(
    model: &DiscreteModel,
    f: &Factorization,
    data: &FrequencyTable,
    params: &ParamMap,
) -> Result<f64, LikelihoodError> {
    let concrete = match model.instantiate(params) {
        Ok(c) => c,
        Err(ModelError::InvalidProbability { .. }) => return Ok(f64::NEG_INFINITY),
        Err(e) => return Err(e.into()),
    };
    let n_vars = model.vars().len();
    let var_ix: BTreeMap<&str, usize> =
        model.vars().iter().enumerate().map(|(ix, v)| (v.name.as_str(), ix)).collect();
    let is_selection: Vec<bool> = {
        // Selection indicators are exactly the psi-tagged gate-style nodes
        // present in every stratum's selection map.
        let sels: BTreeSet<&str> =
            f.strata.iter().flat_map(|s| s.selection_values.keys().map(String::as_str)).collect();
        model.vars().iter().map(|v| sels.contains(v.name.as_str())).collect()
    };

    let columns: Vec<usize> = data
        .columns
        .iter()
        .map(|c| {
            var_ix
                .get(c.as_str())
                .copied()
                .ok_or_else(|| ModelError::UnknownVariable(c.clone()))
        })
        .collect::<Result<_, _>>()?;

    // Per-stratum evaluation plan: pinned values and enumeration scope.
    struct Plan {
        pins: Vec<Option<usize>>,
        observed: Vec<bool>,
        targets: Vec<usize>,
    }
    let mut plans = Vec::with_capacity(f.strata.len());
    for stratum in &f.strata {
        let mut pins = vec![None; n_vars];
        let mut observed = vec![false; n_vars];
        for (s, value) in &stratum.selection_values {
            if let Some(&ix) = var_ix.get(s.as_str()) {
                let vals = &model.vars()[ix].values;
                let v = vals.iter().position(|x| x == value).expect("selections are binary");
                pins[ix] = Some(v);
            }
        }
        for v in &stratum.observed {
            if let Some(&ix) = var_ix.get(v.as_str()) {
                observed[ix] = true;
            }
        }
        // Variables forced by a dead gate take the design baseline.
        for (ix, v) in model.vars().iter().enumerate() {
            if pins[ix].is_none()
                && v.gates.iter().any(|gate| pins[var_ix[gate.as_str()]] == Some(0))
            {
                pins[ix] = Some(0);
            }
        }
        let targets =
            stratum.factors.iter().filter_map(|f| var_ix.get(f.target.as_str()).copied()).collect();
        plans.push(Plan { pins, observed, targets });
    }

    let mut total_ll = 0.0;
    for (row_no, (values, count)) in data.rows.iter().enumerate() {
        let row = row_no + 1;
        let mut row_prob = 0.0;
        let mut matched = false;
        for plan in &plans {
            // The row fits the stratum when records are present exactly where
            // the pattern reads them and any selection columns agree.
            let fits = columns.iter().zip(values).all(|(&ix, value)| {
                if is_selection[ix] {
                    match value {
                        Some(v) => plan.pins[ix] == model.vars()[ix].values.iter().position(|x| x == v),
                        None => true,
                    }
                } else {
                    value.is_some() == plan.observed[ix]
                }
            });
            if !fits {
                continue;
            }
            matched = true;

            let mut pins = plan.pins.clone();
            let mut bad_value = None;
            for (&ix, value) in columns.iter().zip(values) {
                if let (false, Some(v)) = (is_selection[ix], value) {
                    match model.vars()[ix].values.iter().position(|x| x == v) {
                        Some(val) => pins[ix] = Some(val),
                        None => {
                            bad_value = Some(ModelError::BadValue {
                                var: model.vars()[ix].name.clone(),
                                value: v.clone(),
                            })
                        }
                    }
                }
            }
            if let Some(e) = bad_value {
                return Err(e.into());
            }

            // Enumerate what the retained factors mention but nothing pins.
            let mut referenced = vec![false; n_vars];
            for &t in &plan.targets {
                referenced[t] = true;
                for p in &model.vars()[t].parents {
                    referenced[var_ix[p.as_str()]] = true;
                }
            }
            let free: Vec<usize> =
                (0..n_vars).filter(|&ix| referenced[ix] && pins[ix].is_none()).collect();

            let mut assignment: Vec<usize> =
                pins.iter().map(|p| p.unwrap_or(0)).collect();
            let cards: Vec<usize> =
                free.iter().map(|&ix| model.vars()[ix].values.len()).collect();
            let states: usize = cards.iter().product::<usize>().max(1);
            for flat in 0..states {
                let mut rem = flat;
                for (slot, &ix) in free.iter().enumerate().rev() {
                    assignment[ix] = rem % cards[slot];
                    rem /= cards[slot];
                }
                let mut p = 1.0;
                for &t in &plan.targets {
                    match concrete.dist(t, &assignment) {
                        DistRef::Forced(v) => {
                            if assignment[t] != v {
                                p = 0.0;
                                break;
                            }
                        }
                        DistRef::Row(r) => p *= r[assignment[t]],
                    }
                }
                row_prob += p;
            }
        }
        if !matched {
            return Err(LikelihoodError::RowMatchesNoStratum { row });
        }
        if !(row_prob > 0.0 && row_prob.is_finite()) {
            return Err(LikelihoodError::NonfiniteLogLik { row });
        }
        total_ll += *count as f64 * row_prob.ln();
    }
    Ok(total_ll)
}
