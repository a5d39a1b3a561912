//! Maximum-likelihood fitting of saturated binary design models.
//!
//! [`fit_mle`] maximizes the stratified observed-data likelihood of a design
//! over the risk-difference coefficients of its saturated parametrization.
//! Ignorable selection terms are dropped first — their parameters cancel
//! from the score — and the remaining coefficients are optimized by
//! Nelder–Mead with a light log-barrier on the implied corner probabilities,
//! restarted from several random interior points and polished with shrinking
//! simplices.
//!
//! For the two-parameter treatment family (`theta_X`, `theta_Z`, `theta_ZX`,
//! `theta_Y`, `theta_YX`, `theta_YZ`, `theta_YZX`),
//! [`causal_effect_plugin`] evaluates the identified interventional risk in
//! closed form by plugging the fitted coefficients into the mediation
//! functional.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DesignGraph;
use crate::likelihood::{factorize, loglik, marginalize, LikelihoodError};
use crate::model::{
    DiscreteModel, FrequencyTable, ModelError, ParamMap, TableSpec, DEFAULT_STATE_CAP,
};

/// Errors from fitting and effect evaluation.
#[derive(Debug, Error)]
pub enum EstimateError {
    /// A selection probability reads other individuals' records, so the
    /// likelihood does not factor over individuals and cannot be fit here.
    #[error(
        "selection {nodes:?} depends on other individuals' records; \
         per-individual likelihood fitting does not support shared selection"
    )]
    SharedSelectionUnsupported { nodes: Vec<String> },
    /// No start point had positive likelihood for every data row.
    #[error("no interior starting point found; data may be inconsistent with the design")]
    NoInteriorPoint,
    /// The parameter set does not describe the treatment/mediator/outcome
    /// family the plug-in effect formula is written for.
    #[error("plug-in effect needs the treatment-family coefficients; missing `{0}`")]
    WrongModelFamily(String),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Optimizer settings. The defaults fit the bundled designs in seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    /// Iteration cap per Nelder–Mead run.
    pub max_iters: u64,
    /// Relative spread of simplex values at which a run stops.
    pub tol: f64,
    /// Number of random interior starting points (plus one neutral start).
    pub multistarts: u32,
    /// Seed for the starting-point draws.
    pub seed: u64,
    /// Interventional risks to report, as (variable, value) pairs.
    pub effects: Vec<(String, String)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iters: 6000, tol: 1e-12, multistarts: 4, seed: 0, effects: Vec::new() }
    }
}

/// Outcome of a fit: estimates, the attained log-likelihood, and derived
/// quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    /// Fitted coefficients (only parameters the data can move).
    pub params: ParamMap,
    /// Observed-data log-likelihood at the estimates, ignorable terms
    /// excluded.
    pub loglik: f64,
    /// Whether the projected score vanished at the solution.
    pub converged: bool,
    /// Total Nelder–Mead iterations across starts and polish stages.
    pub iterations: u64,
    /// Population marginals `theta_<v>_prime` = P(v=1) implied by the fit.
    pub derived: BTreeMap<String, f64>,
    /// Requested interventional risks, keyed `P(Y=1|do(X=x))`.
    pub effects: Option<BTreeMap<String, f64>>,
}

/// One optimized variable: its coefficient positions in the free vector and
/// the parent-subset mask of each coefficient.
struct FittedVar {
    coeffs: Vec<(usize, usize)>,
    n_parents: usize,
}

/// Corner probabilities `P(v=1 | parent configuration)` implied by the
/// coefficients of one variable: the sum of the coefficients whose subset
/// is contained in the configuration.
fn corners(var: &FittedVar, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 1 << var.n_parents];
    for (mask, c) in out.iter_mut().enumerate() {
        for &(pos, subset) in &var.coeffs {
            if subset & !mask == 0 {
                *c += x[pos];
            }
        }
    }
    out
}

/// Coefficients reproducing the given corner probabilities, by
/// inclusion–exclusion over parent subsets.
fn coeffs_from_corners(var: &FittedVar, drawn: &[f64], x: &mut [f64]) {
    for &(pos, subset) in &var.coeffs {
        let mut value = 0.0;
        let mut sub = subset;
        loop {
            let parity = (subset.count_ones() - sub.count_ones()) % 2;
            value += if parity == 0 { drawn[sub] } else { -drawn[sub] };
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & subset;
        }
        x[pos] = value;
    }
}

/// Standard Nelder–Mead over an unconstrained vector; the objective returns
/// `+inf` outside the feasible region. Returns the best point, its value,
/// and the iterations used.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_iters: u64,
    tol: f64,
) -> (Vec<f64>, f64, u64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }

    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let blend = |a: f64| -> Vec<f64> {
            (0..n).map(|i| centroid[i] + a * (simplex[n].0[i] - centroid[i])).collect()
        };

        let reflected = blend(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(-2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[n].1 { blend(-0.5) } else { blend(0.5) };
            let fc = f(&contracted);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|j| simplex[0].0[j] + 0.5 * (simplex[i].0[j] - simplex[0].0[j]))
                        .collect();
                    let fs = f(&shrunk);
                    simplex[i] = (shrunk, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, iters)
}

/// Fits the saturated parametrization of a design to observed counts by
/// maximum likelihood. Parameters attached to ignorable selection terms (and
/// to variables the observed data never touches) are excluded; everything
/// else is reported in [`FitResult::params`].
pub fn fit_mle(
    g: &DesignGraph,
    model: &DiscreteModel,
    data: &FrequencyTable,
    opts: &FitOptions,
) -> Result<FitResult, EstimateError> {
    let full = marginalize(&factorize(g)?, g);
    if !full.shared_selections.is_empty() {
        return Err(EstimateError::SharedSelectionUnsupported {
            nodes: full.shared_selections.clone(),
        });
    }
    let reduced = full.without_ignorable();

    // The data can only move coefficients of variables that still appear as
    // factor targets; everything else gets a fixed valid placeholder so the
    // full model instantiates.
    let targets: BTreeSet<&str> = reduced
        .strata
        .iter()
        .flat_map(|s| s.factors.iter().map(|f| f.target.as_str()))
        .collect();
    let mut free_names: Vec<String> = Vec::new();
    let mut fitted: Vec<FittedVar> = Vec::new();
    let mut placeholders = ParamMap::new();
    for v in model.vars() {
        let TableSpec::LinearBinary { coeffs } = &v.spec else { continue };
        if targets.contains(v.name.as_str()) {
            let mut fv =
                FittedVar { coeffs: Vec::with_capacity(coeffs.len()), n_parents: v.parents.len() };
            for (name, subset) in coeffs {
                let mask = subset.iter().map(|&b| 1usize << b).sum();
                fv.coeffs.push((free_names.len(), mask));
                free_names.push(name.clone());
            }
            fitted.push(fv);
        } else {
            for (name, subset) in coeffs {
                placeholders.set(name.clone(), if subset.is_empty() { 0.5 } else { 0.0 });
            }
        }
    }

    let assemble = |x: &[f64]| -> ParamMap {
        let mut p = placeholders.clone();
        for (name, &value) in free_names.iter().zip(x) {
            p.set(name.clone(), value);
        }
        p
    };

    // Structural problems (unknown columns, rows outside every stratum)
    // surface once here; afterwards any failure is a parameter rejection.
    let neutral = {
        let mut x = vec![0.0; free_names.len()];
        for fv in &fitted {
            coeffs_from_corners(fv, &vec![0.5; 1 << fv.n_parents], &mut x);
        }
        x
    };
    loglik(model, &reduced, data, &assemble(&neutral))?;

    let barrier = |x: &[f64]| -> f64 {
        let mut total = 0.0;
        for fv in &fitted {
            for c in corners(fv, x) {
                if !(0.0..=1.0).contains(&c) {
                    return f64::INFINITY;
                }
                total -= (c.max(1e-12) * (1.0 - c).max(1e-12)).ln();
            }
        }
        total
    };
    let pure = |x: &[f64]| -> f64 {
        match loglik(model, &reduced, data, &assemble(x)) {
            Ok(ll) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };

    if free_names.is_empty() {
        let ll = -pure(&[]);
        return Ok(FitResult {
            params: ParamMap::new(),
            loglik: ll,
            converged: true,
            iterations: 0,
            derived: derived_marginals(g, model, &ParamMap::new())?,
            effects: effects_table(&ParamMap::new(), &opts.effects)?,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut iterations = 0;
    for start in 0..=opts.multistarts {
        let mut x = vec![0.0; free_names.len()];
        for fv in &fitted {
            let drawn: Vec<f64> = (0..1usize << fv.n_parents)
                .map(|_| if start == 0 { 0.5 } else { rng.random_range(0.05..0.95) })
                .collect();
            coeffs_from_corners(fv, &drawn, &mut x);
        }
        for (mu, step) in [(1e-3, 0.08), (1e-6, 0.02)] {
            let (next, _, it) =
                nelder_mead(|p| pure(p) + mu * barrier(p), &x, step, opts.max_iters, opts.tol);
            x = next;
            iterations += it;
        }
        let value = pure(&x);
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((x, value));
        }
    }
    let (mut x, mut value) = best.unwrap();
    if !value.is_finite() {
        return Err(EstimateError::NoInteriorPoint);
    }
    for step in [1e-2, 1e-4] {
        let (next, next_value, it) = nelder_mead(&pure, &x, step, opts.max_iters, opts.tol);
        iterations += it;
        if next_value < value {
            (x, value) = (next, next_value);
        }
    }

    // Convergence is a vanishing score, on the scale of the log-likelihood.
    let h = 1e-6;
    let mut max_grad: f64 = 0.0;
    for i in 0..x.len() {
        let mut lo = x.clone();
        let mut hi = x.clone();
        lo[i] -= h;
        hi[i] += h;
        max_grad = max_grad.max(((pure(&hi) - pure(&lo)) / (2.0 * h)).abs());
    }
    let converged = max_grad.is_finite() && max_grad <= 1e-4 * (1.0 + value.abs());

    let params = {
        let mut p = ParamMap::new();
        for (name, &v) in free_names.iter().zip(&x) {
            p.set(name.clone(), v);
        }
        p
    };
    Ok(FitResult {
        loglik: -value,
        converged,
        iterations,
        derived: derived_marginals(g, model, &params)?,
        effects: effects_table(&params, &opts.effects)?,
        params,
    })
}

/// Population marginals P(v=1) implied by fitted coefficients, for every
/// causal variable whose full coefficient set was fitted. Selection gates
/// are treated as on: the marginal describes the underlying population, not
/// any selected subset.
fn derived_marginals(
    g: &DesignGraph,
    model: &DiscreteModel,
    params: &ParamMap,
) -> Result<BTreeMap<String, f64>, EstimateError> {
    let mut tables = Vec::new();
    for id in g.causal_ids() {
        let source = model.var(id)?;
        let TableSpec::LinearBinary { coeffs } = &source.spec else { continue };
        if !coeffs.iter().all(|(name, _)| params.get(name).is_some()) {
            return Ok(BTreeMap::new());
        }
        let mut table = source.clone();
        table.gates.clear();
        tables.push(table);
    }
    let causal = DiscreteModel::new(tables)?;
    let joint = causal.instantiate(params)?.joint(DEFAULT_STATE_CAP)?;
    let mut out = BTreeMap::new();
    for id in g.causal_ids() {
        let ix = joint.var_index(id)?;
        let one = joint.value_index(ix, "1")?;
        out.insert(format!("theta_{id}_prime"), joint.sum_where(&[(ix, one)]));
    }
    Ok(out)
}

fn effects_table(
    params: &ParamMap,
    wanted: &[(String, String)],
) -> Result<Option<BTreeMap<String, f64>>, EstimateError> {
    if wanted.is_empty() {
        return Ok(None);
    }
    let mut out = BTreeMap::new();
    for (var, value) in wanted {
        out.insert(
            format!("P(Y=1|do({var}={value}))"),
            causal_effect_plugin(params, var, value)?,
        );
    }
    Ok(Some(out))
}

/// Interventional outcome risk P(Y=1 | do(X=x)) for the saturated
/// treatment/mediator/outcome family, by plugging coefficients into the
/// mediation functional: the mediator responds to the set treatment while
/// the outcome's direct arm is averaged over the population treatment
/// distribution.
pub fn causal_effect_plugin(
    params: &ParamMap,
    var: &str,
    value: &str,
) -> Result<f64, EstimateError> {
    if var != "X" {
        return Err(EstimateError::WrongModelFamily(format!("theta_{var}")));
    }
    let x = match value {
        "1" => 1.0,
        "0" => 0.0,
        _ => return Err(EstimateError::WrongModelFamily(format!("X={value}"))),
    };
    let p = |name: &str| -> Result<f64, EstimateError> {
        params.get(name).ok_or_else(|| EstimateError::WrongModelFamily(name.to_string()))
    };
    let t_x = p("theta_X")?;
    let t_z = p("theta_Z")?;
    let t_zx = p("theta_ZX")?;
    let t_y = p("theta_Y")?;
    let t_yx = p("theta_YX")?;
    let t_yz = p("theta_YZ")?;
    let t_yzx = p("theta_YZX")?;

    let p_mediator = t_z + x * t_zx;
    let risk_with = t_x * (t_y + t_yx + t_yz + t_yzx) + (1.0 - t_x) * (t_y + t_yz);
    let risk_without = t_x * (t_y + t_yx) + (1.0 - t_x) * t_y;
    Ok(p_mediator * risk_with + (1.0 - p_mediator) * risk_without)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::build_graph;
    use crate::expr::evaluate_expr;
    use crate::identify::identify;
    use crate::model::saturated_binary_parametrization;

    const CASE_CONTROL: &str = "\
graph case_control
population mOmega
node X kind=causal info=unobserved
node Z kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
node m2 kind=selection info=det-known stage=2
edge X -> Z
edge X -> Y
edge Z -> Y
edge m1 -> m2
edge Y* -> m2
measure Y* : Y by m1 stage=1
measure X* : X by m2 stage=2
measure Z* : Z by m2 stage=2
";

    const FRONT_DOOR: &str = "\
graph frontdoor
population mOmega
node U kind=causal info=unobserved
node X kind=causal info=observed
node Z kind=causal info=observed
node Y kind=causal info=observed
edge U -> X
edge U -> Y
edge X -> Z
edge Z -> Y
";

    fn golden_counts() -> FrequencyTable {
        let mut t = FrequencyTable::new(vec!["X".into(), "Z".into(), "Y".into()]);
        for (x, z, y, n) in [
            (0, 0, 1, 100u64),
            (0, 0, 0, 814),
            (1, 0, 1, 47),
            (1, 0, 0, 5),
            (0, 1, 1, 3),
            (0, 1, 0, 45),
            (1, 1, 1, 850),
            (1, 1, 0, 136),
        ] {
            t.rows.push((
                vec![Some(x.to_string()), Some(z.to_string()), Some(y.to_string())],
                n,
            ));
        }
        t.rows.push((vec![None, None, Some("1".into())], 8500));
        t.rows.push((vec![None, None, Some("0".into())], 9500));
        t
    }

    fn golden_estimates() -> [(&'static str, f64); 9] {
        [
            ("theta_X", 5001.0 / 10000.0),
            ("theta_Z", 501.0 / 9998.0),
            ("theta_ZX", 22_499_998.0 / 24_999_999.0),
            ("theta_Y", 950.0 / 9497.0),
            ("theta_YX", 7_532_721.0 / 9_478_006.0),
            ("theta_YZ", -136_857.0 / 3_171_998.0),
            ("theta_YZX", -846_114_213.0 / 442_400_147_059.0),
            ("psi_m2", 2.0 / 21.0),
            ("psi_m2_Y", 4.0 / 399.0),
        ]
    }

    #[test]
    fn golden_fit_recovers_the_closed_form_estimates() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let opts = FitOptions {
            effects: vec![("X".into(), "1".into()), ("X".into(), "0".into())],
            ..FitOptions::default()
        };
        let fit = fit_mle(&g, &model, &golden_counts(), &opts).unwrap();

        assert!(fit.converged, "max score component too large");
        // The always-on first-stage draw is ignorable, hence not reported.
        assert_eq!(fit.params.get("psi_m1"), None);
        for (name, expected) in golden_estimates() {
            let got = fit.params.get(name).unwrap();
            assert!((got - expected).abs() < 5e-5, "{name}: {got} vs {expected}");
        }
        assert!((fit.derived["theta_Y_prime"] - 0.475).abs() < 5e-5);

        let effects = fit.effects.unwrap();
        let lift = effects["P(Y=1|do(X=1))"];
        let base = effects["P(Y=1|do(X=0))"];
        assert!((lift - 0.455_588_471_411_473_74).abs() < 2e-4, "{lift}");
        assert!((base - 0.495_280_116_183_844_2).abs() < 2e-4, "{base}");
    }

    #[test]
    fn binomial_counts_recover_the_sample_frequency() {
        let g = build_graph(
            "\
graph one
population mOmega
node V kind=causal info=unobserved
node m1 kind=selection info=det-known
measure V* : V by m1
",
        )
        .unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let mut data = FrequencyTable::new(vec!["V".into()]);
        data.rows.push((vec![Some("1".into())], 30));
        data.rows.push((vec![Some("0".into())], 70));
        let fit = fit_mle(&g, &model, &data, &FitOptions::default()).unwrap();
        assert!((fit.params.get("theta_V").unwrap() - 0.30).abs() < 1e-6);
        assert!(fit.converged);
        assert!((fit.derived["theta_V_prime"] - 0.30).abs() < 1e-6);
    }

    #[test]
    fn plugin_matches_the_identified_functional() {
        // The identified expression for the hidden-confounder graph,
        // evaluated on the observational joint of the estimation model,
        // must agree with the closed-form plug-in at any parameter value.
        let frontdoor = build_graph(FRONT_DOOR).unwrap();
        let id = identify(&frontdoor, &["X"], &["Y"]).unwrap();
        let estimand = id.estimand.unwrap();

        let estimation = build_graph(
            "\
graph observational
population mOmega
node X kind=causal info=observed
node Z kind=causal info=observed
node Y kind=causal info=observed
edge X -> Z
edge X -> Y
edge Z -> Y
",
        )
        .unwrap();
        let model = saturated_binary_parametrization(&estimation).unwrap();

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut params = ParamMap::new();
            for v in model.vars() {
                let TableSpec::LinearBinary { coeffs } = &v.spec else { unreachable!() };
                let fv = FittedVar {
                    coeffs: coeffs
                        .iter()
                        .enumerate()
                        .map(|(pos, (_, s))| (pos, s.iter().map(|&b| 1usize << b).sum()))
                        .collect(),
                    n_parents: v.parents.len(),
                };
                let drawn: Vec<f64> = (0..1usize << fv.n_parents)
                    .map(|_| rng.random_range(0.05..0.95))
                    .collect();
                let mut x = vec![0.0; coeffs.len()];
                coeffs_from_corners(&fv, &drawn, &mut x);
                for ((name, _), value) in coeffs.iter().zip(&x) {
                    params.set(name.clone(), *value);
                }
            }
            let joint = model.instantiate(&params).unwrap().joint(DEFAULT_STATE_CAP).unwrap();
            for value in ["0", "1"] {
                let env: BTreeMap<String, String> =
                    [("x".to_string(), value.to_string()), ("y".to_string(), "1".to_string())]
                        .into_iter()
                        .collect();
                let functional = evaluate_expr(&estimand, &joint, &env).unwrap();
                let plugin = causal_effect_plugin(&params, "X", value).unwrap();
                assert!((functional - plugin).abs() < 1e-12, "{functional} vs {plugin}");
            }
        }
    }

    #[test]
    fn zero_interaction_collapses_to_the_baseline_risk() {
        let mut params = ParamMap::new();
        for name in ["theta_ZX", "theta_YX", "theta_YZ", "theta_YZX"] {
            params.set(name, 0.0);
        }
        params.set("theta_X", 0.3);
        params.set("theta_Z", 0.2);
        params.set("theta_Y", 0.17);
        for value in ["0", "1"] {
            let effect = causal_effect_plugin(&params, "X", value).unwrap();
            assert!((effect - 0.17).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_family_and_variables_are_refused() {
        let params = ParamMap::new();
        assert!(matches!(
            causal_effect_plugin(&params, "X", "1"),
            Err(EstimateError::WrongModelFamily(name)) if name == "theta_X"
        ));
        assert!(matches!(
            causal_effect_plugin(&params, "Q", "1"),
            Err(EstimateError::WrongModelFamily(name)) if name == "theta_Q"
        ));
    }

    #[test]
    fn shared_selection_designs_are_refused() {
        let g = build_graph(
            "\
graph nested
population mOmega
node Z kind=causal info=unobserved
node X kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
node m2 kind=selection info=det-known stage=2 shared
node M2 kind=selection info=observed stage=2
edge Z -> Y
edge X -> Y
edge m1 -> m2
edge X* -> m2
edge Y* -> m2
edge m2 -> M2
measure X* : X by m1 stage=1
measure Y* : Y by m1 stage=1
measure Z* : Z by M2 stage=2
",
        )
        .unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let data = FrequencyTable::new(vec!["X".into(), "Y".into(), "Z".into()]);
        assert!(matches!(
            fit_mle(&g, &model, &data, &FitOptions::default()),
            Err(EstimateError::SharedSelectionUnsupported { nodes }) if nodes == ["m2"]
        ));
    }

    #[test]
    fn fit_results_serialize_with_a_stable_shape() {
        let fit = FitResult {
            params: [("theta_X", 0.5)].into_iter().collect(),
            loglik: -12.5,
            converged: true,
            iterations: 42,
            derived: [("theta_X_prime".to_string(), 0.5)].into_iter().collect(),
            effects: None,
        };
        let v = serde_json::to_value(&fit).unwrap();
        assert_eq!(v["params"]["theta_X"], 0.5);
        assert_eq!(v["loglik"], -12.5);
        assert_eq!(v["converged"], true);
        assert_eq!(v["iterations"], 42);
        assert_eq!(v["derived"]["theta_X_prime"], 0.5);
        assert!(v["effects"].is_null());
        let back: FitResult = serde_json::from_value(v).unwrap();
        assert_eq!(back.iterations, 42);
    }
}
