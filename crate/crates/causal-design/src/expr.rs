//! Symbolic probability expressions.
//!
//! Identification returns estimands as small expression trees: conditional
//! probabilities over variable/symbol slots, products, sums over bound
//! symbols, and fractions. The module provides a canonical form (so equal
//! derivations print identically), exact algebraic simplification (chain-rule
//! merges and sum elimination — rewrites valid in *every* distribution), a
//! compact text rendering, a JSON rendering, and numeric evaluation against
//! an explicit joint distribution.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::Graph;
use crate::model::{JointTable, ModelError};

/// One variable/value-symbol pair inside a probability term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Slot {
    pub var: String,
    pub sym: String,
}

impl Slot {
    pub fn new(var: impl Into<String>, sym: impl Into<String>) -> Self {
        Slot { var: var.into(), sym: sym.into() }
    }

    /// Slot whose symbol is the conventional lowercase of the variable.
    pub fn bare(var: impl Into<String>) -> Self {
        let var = var.into();
        let sym = var.to_lowercase();
        Slot { var, sym }
    }
}

/// A symbolic probability expression.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbExpr {
    Const(f64),
    /// `P(outcome | do(intervened), given)` — all lists may be empty except
    /// `outcome`.
    CondProb { outcome: Vec<Slot>, given: Vec<Slot>, intervened: Vec<Slot> },
    Product(Vec<ProbExpr>),
    /// Sum of `body` over all values of `var`, bound to symbol `sym`.
    Sum { var: String, sym: String, body: Box<ProbExpr> },
    Fraction { num: Box<ProbExpr>, den: Box<ProbExpr> },
}

impl ProbExpr {
    pub fn cond(outcome: Vec<Slot>, given: Vec<Slot>) -> Self {
        ProbExpr::CondProb { outcome, given, intervened: vec![] }
    }

    pub fn marginal(outcome: Vec<Slot>) -> Self {
        Self::cond(outcome, vec![])
    }

    pub fn product(factors: Vec<ProbExpr>) -> Self {
        ProbExpr::Product(factors)
    }

    pub fn sum(var: impl Into<String>, sym: impl Into<String>, body: ProbExpr) -> Self {
        ProbExpr::Sum { var: var.into(), sym: sym.into(), body: Box::new(body) }
    }

    pub fn fraction(num: ProbExpr, den: ProbExpr) -> Self {
        ProbExpr::Fraction { num: Box::new(num), den: Box::new(den) }
    }
}

/// Errors from expression evaluation.
#[derive(Debug, Error)]
pub enum ExprError {
    #[error("symbol `{0}` is not bound to a value")]
    UnboundSymbol(String),
    #[error("conditioning event has probability zero")]
    ZeroConditioningEvent,
    #[error("expression still contains an interventional term")]
    InterventionalTerm,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Variable ordering used by the canonical form: topological layer first,
/// name second. Variables the order has never heard of sort last.
#[derive(Debug, Clone, Default)]
pub struct VarOrder {
    layers: BTreeMap<String, usize>,
}

impl VarOrder {
    pub fn from_graph(g: &Graph) -> Self {
        VarOrder { layers: g.topo_layers().unwrap_or_default() }
    }

    pub fn from_layers<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Self {
        VarOrder { layers: pairs.into_iter().map(|(v, l)| (v.into(), l)).collect() }
    }

    pub fn layer(&self, var: &str) -> usize {
        self.layers.get(var).copied().unwrap_or(usize::MAX)
    }

    fn slot_key<'a>(&self, s: &'a Slot) -> (usize, &'a str, &'a str) {
        (self.layer(&s.var), s.var.as_str(), s.sym.as_str())
    }

    fn max_outcome_layer(&self, e: &ProbExpr) -> usize {
        match e {
            ProbExpr::CondProb { outcome, .. } => {
                outcome.iter().map(|s| self.layer(&s.var)).max().unwrap_or(0)
            }
            _ => 0,
        }
    }
}

/// Rebuilds `e` in canonical form: slot lists sorted by variable order,
/// products flattened with plain probability terms (highest outcome first)
/// ahead of composite factors, constants folded, and runs of sums ordered by
/// the bound variable.
pub fn canonicalize(e: &ProbExpr, ord: &VarOrder) -> ProbExpr {
    match e {
        ProbExpr::Const(c) => ProbExpr::Const(*c),
        ProbExpr::CondProb { outcome, given, intervened } => {
            let sort = |slots: &[Slot]| {
                let mut v = slots.to_vec();
                v.sort_by(|a, b| ord.slot_key(a).cmp(&ord.slot_key(b)));
                v
            };
            ProbExpr::CondProb {
                outcome: sort(outcome),
                given: sort(given),
                intervened: sort(intervened),
            }
        }
        ProbExpr::Product(factors) => {
            let mut flat = Vec::new();
            let mut constant = 1.0;
            for f in factors {
                match canonicalize(f, ord) {
                    ProbExpr::Product(inner) => {
                        for g in inner {
                            if let ProbExpr::Const(c) = g {
                                constant *= c;
                            } else {
                                flat.push(g);
                            }
                        }
                    }
                    ProbExpr::Const(c) => constant *= c,
                    other => flat.push(other),
                }
            }
            // Atomic probability terms first, ordered by descending outcome
            // layer; composite factors keep their relative order at the end.
            let (mut atoms, composites): (Vec<_>, Vec<_>) = flat
                .into_iter()
                .partition(|f| matches!(f, ProbExpr::CondProb { .. }));
            let atom_key = |e: &ProbExpr| match e {
                ProbExpr::CondProb { outcome, given, .. } => (
                    std::cmp::Reverse(ord.max_outcome_layer(e)),
                    outcome
                        .iter()
                        .map(|s| (ord.layer(&s.var), s.var.clone(), s.sym.clone()))
                        .min(),
                    outcome.len(),
                    given.len(),
                    format!("{e:?}"),
                ),
                _ => unreachable!("atoms are conditional probabilities"),
            };
            atoms.sort_by_key(atom_key);
            let mut out = Vec::new();
            if constant != 1.0 {
                out.push(ProbExpr::Const(constant));
            }
            out.extend(atoms);
            out.extend(composites);
            match out.len() {
                0 => ProbExpr::Const(1.0),
                1 => out.into_iter().next().expect("length checked"),
                _ => ProbExpr::Product(out),
            }
        }
        ProbExpr::Sum { .. } => {
            // Collect the maximal run of nested sums and order it.
            let mut chain = Vec::new();
            let mut cur = e;
            while let ProbExpr::Sum { var, sym, body } = cur {
                chain.push((var.clone(), sym.clone()));
                cur = body;
            }
            let body = canonicalize(cur, ord);
            chain.sort_by(|a, b| {
                (ord.layer(&a.0), a.0.as_str(), a.1.as_str())
                    .cmp(&(ord.layer(&b.0), b.0.as_str(), b.1.as_str()))
            });
            let mut out = body;
            for (var, sym) in chain.into_iter().rev() {
                out = ProbExpr::sum(var, sym, out);
            }
            out
        }
        ProbExpr::Fraction { num, den } => {
            ProbExpr::fraction(canonicalize(num, ord), canonicalize(den, ord))
        }
    }
}

fn count_symbol(e: &ProbExpr, sym: &str) -> usize {
    match e {
        ProbExpr::Const(_) => 0,
        ProbExpr::CondProb { outcome, given, intervened } => outcome
            .iter()
            .chain(given)
            .chain(intervened)
            .filter(|s| s.sym == sym)
            .count(),
        ProbExpr::Product(fs) => fs.iter().map(|f| count_symbol(f, sym)).sum(),
        ProbExpr::Sum { body, .. } => count_symbol(body, sym),
        ProbExpr::Fraction { num, den } => count_symbol(num, sym) + count_symbol(den, sym),
    }
}

/// All symbols not bound by any enclosing sum.
pub fn free_symbols(e: &ProbExpr) -> BTreeSet<String> {
    fn walk(e: &ProbExpr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match e {
            ProbExpr::Const(_) => {}
            ProbExpr::CondProb { outcome, given, intervened } => {
                for s in outcome.iter().chain(given).chain(intervened) {
                    if !bound.iter().any(|b| b == &s.sym) {
                        out.insert(s.sym.clone());
                    }
                }
            }
            ProbExpr::Product(fs) => fs.iter().for_each(|f| walk(f, bound, out)),
            ProbExpr::Sum { sym, body, .. } => {
                bound.push(sym.clone());
                walk(body, bound, out);
                bound.pop();
            }
            ProbExpr::Fraction { num, den } => {
                walk(num, bound, out);
                walk(den, bound, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(e, &mut Vec::new(), &mut out);
    out
}

fn slot_set(slots: &[Slot]) -> BTreeSet<Slot> {
    slots.iter().cloned().collect()
}

/// One bottom-up pass of the exact rewrites.
fn simplify_once(e: &ProbExpr) -> ProbExpr {
    match e {
        ProbExpr::Const(_) | ProbExpr::CondProb { .. } => e.clone(),
        ProbExpr::Product(factors) => {
            let mut fs: Vec<ProbExpr> = factors.iter().map(simplify_once).collect();
            // Chain-rule merge: P(a | D) * P(b | D ∪ a) = P(a, b | D).
            'merge: loop {
                for i in 0..fs.len() {
                    for j in 0..fs.len() {
                        if i == j {
                            continue;
                        }
                        let (a, b) = (&fs[i], &fs[j]);
                        if let (
                            ProbExpr::CondProb {
                                outcome: ao,
                                given: ag,
                                intervened: ai,
                            },
                            ProbExpr::CondProb {
                                outcome: bo,
                                given: bg,
                                intervened: bi,
                            },
                        ) = (a, b)
                        {
                            if !ai.is_empty() || !bi.is_empty() {
                                continue;
                            }
                            let mut joint_context = slot_set(ag);
                            joint_context.extend(ao.iter().cloned());
                            if slot_set(bg) == joint_context {
                                let merged = ProbExpr::CondProb {
                                    outcome: ao.iter().chain(bo.iter()).cloned().collect(),
                                    given: ag.clone(),
                                    intervened: vec![],
                                };
                                let (lo, hi) = (i.min(j), i.max(j));
                                fs.remove(hi);
                                fs.remove(lo);
                                fs.push(merged);
                                continue 'merge;
                            }
                        }
                    }
                }
                break;
            }
            ProbExpr::Product(fs)
        }
        ProbExpr::Sum { var, sym, body } => {
            let body = simplify_once(body);
            // Sum elimination: when the bound symbol occurs exactly once,
            // in the outcome of a top-level factor, the sum marginalizes
            // that slot away.
            if count_symbol(&body, sym) == 1 {
                let strip = |f: &ProbExpr| -> Option<ProbExpr> {
                    if let ProbExpr::CondProb { outcome, given, intervened } = f {
                        if outcome.iter().any(|s| &s.sym == sym)
                            && given.iter().all(|s| &s.sym != sym)
                            && intervened.iter().all(|s| &s.sym != sym)
                        {
                            let kept: Vec<Slot> =
                                outcome.iter().filter(|s| &s.sym != sym).cloned().collect();
                            return Some(if kept.is_empty() {
                                ProbExpr::Const(1.0)
                            } else {
                                ProbExpr::CondProb {
                                    outcome: kept,
                                    given: given.clone(),
                                    intervened: intervened.clone(),
                                }
                            });
                        }
                    }
                    None
                };
                match &body {
                    ProbExpr::CondProb { .. } => {
                        if let Some(reduced) = strip(&body) {
                            return reduced;
                        }
                    }
                    ProbExpr::Product(fs) => {
                        for (ix, f) in fs.iter().enumerate() {
                            if let Some(reduced) = strip(f) {
                                let mut rest = fs.clone();
                                rest[ix] = reduced;
                                return ProbExpr::Product(rest);
                            }
                        }
                    }
                    _ => {}
                }
            }
            ProbExpr::sum(var.clone(), sym.clone(), body)
        }
        ProbExpr::Fraction { num, den } => {
            let num = simplify_once(num);
            let den = simplify_once(den);
            if num == den {
                return ProbExpr::Const(1.0);
            }
            if den == ProbExpr::Const(1.0) {
                return num;
            }
            ProbExpr::fraction(num, den)
        }
    }
}

/// Exact simplification to fixpoint: chain-rule merges, sum elimination, and
/// fraction cancellation, interleaved with canonicalization. Every rewrite
/// holds in all distributions, so the result is always equivalent.
pub fn simplify(e: &ProbExpr, ord: &VarOrder) -> ProbExpr {
    let mut cur = canonicalize(e, ord);
    for _ in 0..64 {
        let next = canonicalize(&simplify_once(&cur), ord);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn render_outcome(s: &Slot) -> String {
    if s.sym == s.var.to_lowercase() {
        s.sym.clone()
    } else {
        format!("{}={}", s.var, s.sym)
    }
}

/// Compact single-line text: `sum_z P(z|X=x) * P(y|Z=z)` style.
pub fn to_text(e: &ProbExpr) -> String {
    match e {
        ProbExpr::Const(c) => format!("{c}"),
        ProbExpr::CondProb { outcome, given, intervened } => {
            let out: Vec<String> = outcome.iter().map(render_outcome).collect();
            let mut cond: Vec<String> =
                intervened.iter().map(|s| format!("do({}={})", s.var, s.sym)).collect();
            cond.extend(given.iter().map(|s| format!("{}={}", s.var, s.sym)));
            if cond.is_empty() {
                format!("P({})", out.join(","))
            } else {
                format!("P({}|{})", out.join(","), cond.join(","))
            }
        }
        ProbExpr::Product(fs) => {
            let last = fs.len().saturating_sub(1);
            fs.iter()
                .enumerate()
                .map(|(ix, f)| {
                    let text = to_text(f);
                    // A trailing sum extends to the end of the product; any
                    // other composite factor needs parentheses.
                    let needs_parens = match f {
                        ProbExpr::Sum { .. } => ix != last,
                        ProbExpr::Fraction { .. } => true,
                        _ => false,
                    };
                    if needs_parens {
                        format!("({text})")
                    } else {
                        text
                    }
                })
                .collect::<Vec<_>>()
                .join(" * ")
        }
        ProbExpr::Sum { sym, body, .. } => format!("sum_{sym} {}", to_text(body)),
        ProbExpr::Fraction { num, den } => {
            format!("({}) / ({})", to_text(num), to_text(den))
        }
    }
}

fn slots_json(slots: &[Slot]) -> Value {
    Value::Array(
        slots.iter().map(|s| json!({ "var": s.var, "sym": s.sym })).collect(),
    )
}

/// Structured JSON rendering mirroring the expression tree.
pub fn to_json(e: &ProbExpr) -> Value {
    match e {
        ProbExpr::Const(c) => json!({ "const": c }),
        ProbExpr::CondProb { outcome, given, intervened } => json!({
            "prob": {
                "outcome": slots_json(outcome),
                "given": slots_json(given),
                "do": slots_json(intervened),
            }
        }),
        ProbExpr::Product(fs) => {
            json!({ "product": fs.iter().map(to_json).collect::<Vec<_>>() })
        }
        ProbExpr::Sum { var, sym, body } => json!({
            "sum": { "var": var, "sym": sym, "body": to_json(body) }
        }),
        ProbExpr::Fraction { num, den } => json!({
            "fraction": { "num": to_json(num), "den": to_json(den) }
        }),
    }
}

/// Evaluates `e` against an explicit joint distribution, with `env` mapping
/// free symbols to values. Sums iterate the bound variable's domain from the
/// joint table.
pub fn evaluate_expr(
    e: &ProbExpr,
    joint: &JointTable,
    env: &BTreeMap<String, String>,
) -> Result<f64, ExprError> {
    match e {
        ProbExpr::Const(c) => Ok(*c),
        ProbExpr::CondProb { outcome, given, intervened } => {
            if !intervened.is_empty() {
                return Err(ExprError::InterventionalTerm);
            }
            let resolve = |slots: &[Slot]| -> Result<Vec<(usize, usize)>, ExprError> {
                slots
                    .iter()
                    .map(|s| {
                        let value = env
                            .get(&s.sym)
                            .ok_or_else(|| ExprError::UnboundSymbol(s.sym.clone()))?;
                        let var = joint.var_index(&s.var)?;
                        let val = joint.value_index(var, value)?;
                        Ok((var, val))
                    })
                    .collect()
            };
            let given_pairs = resolve(given)?;
            let mut all_pairs = resolve(outcome)?;
            all_pairs.extend(given_pairs.iter().copied());
            let p_given =
                if given_pairs.is_empty() { 1.0 } else { joint.sum_where(&given_pairs) };
            if p_given == 0.0 {
                return Err(ExprError::ZeroConditioningEvent);
            }
            Ok(joint.sum_where(&all_pairs) / p_given)
        }
        ProbExpr::Product(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= evaluate_expr(f, joint, env)?;
            }
            Ok(acc)
        }
        ProbExpr::Sum { var, sym, body } => {
            let var_ix = joint.var_index(var)?;
            let mut acc = 0.0;
            let mut env = env.clone();
            for value in &joint.domains[var_ix] {
                env.insert(sym.clone(), value.clone());
                acc += evaluate_expr(body, joint, &env)?;
            }
            Ok(acc)
        }
        ProbExpr::Fraction { num, den } => {
            let den = evaluate_expr(den, joint, env)?;
            if den == 0.0 {
                return Err(ExprError::ZeroConditioningEvent);
            }
            Ok(evaluate_expr(num, joint, env)? / den)
        }
    }
}
