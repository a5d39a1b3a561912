//! Forward simulation and exact enumeration of design models.
//!
//! Three oracles over a [`DiscreteModel`] attached to a design graph:
//! [`simulate_dataset`] draws a finite population individual by individual
//! and reports what the design lets an analyst record, aggregated to counts;
//! [`expected_frequencies`] produces the same table in exact expectation by
//! full enumeration; and [`interventional_distribution`] enumerates the
//! truncated factorization after setting variables by intervention.
//!
//! The recorded columns are the causal variables an analyst can ever see:
//! those with a measurement node (valued when the measurement's selection
//! fired, `NA` otherwise) and those whose value is known by design. Column
//! order follows the causal structure.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

use crate::dsl::canonical_dsl;
use crate::graph::{DesignGraph, GraphError};
use crate::model::{
    ConcreteModel, DiscreteModel, DistRef, FrequencyTable, JointTable, ModelError, ParamMap,
};

/// Errors from simulation and enumeration.
#[derive(Debug, Error)]
pub enum SimulateError {
    /// A selection probability reads other individuals' records, so
    /// individuals cannot be drawn independently.
    #[error(
        "selection {nodes:?} depends on other individuals' records; \
         per-individual sampling does not support shared selection"
    )]
    SharedSelectionUnsupported { nodes: Vec<String> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Provenance sidecar for a simulated dataset: everything needed to
/// reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMeta {
    pub graph: String,
    pub n: u64,
    pub seed: u64,
    /// Pseudo-random generator, pinned by algorithm and crate version.
    pub generator: String,
    /// SHA-256 over the canonical design text, the parameters, and the
    /// draw settings.
    pub spec_hash: String,
}

/// Exact expected counts: same layout as a [`FrequencyTable`] but with
/// real-valued cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTable {
    pub columns: Vec<String>,
    pub rows: Vec<(Vec<Option<String>>, f64)>,
}

impl ExpectedTable {
    pub fn total(&self) -> f64 {
        self.rows.iter().map(|(_, n)| n).sum()
    }

    /// CSV in the observed-data format, `NA` for hidden values.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.columns.join(",");
        out.push_str(",count\n");
        for (values, count) in &self.rows {
            for v in values {
                let _ = write!(out, "{},", v.as_deref().unwrap_or("NA"));
            }
            let _ = writeln!(out, "{count}");
        }
        out
    }

    /// Rounds each cell to the nearest integer count, dropping empty cells.
    /// Faithful when the expectations are themselves near-integers.
    pub fn rounded(&self) -> FrequencyTable {
        let mut t = FrequencyTable::new(self.columns.clone());
        for (values, count) in &self.rows {
            let n = count.round() as u64;
            if n > 0 {
                t.rows.push((values.clone(), n));
            }
        }
        t
    }
}

fn reject_shared(g: &DesignGraph) -> Result<(), SimulateError> {
    let shared: Vec<String> = g
        .selection_ids()
        .into_iter()
        .filter(|s| g.node_by_id(s).unwrap().shared)
        .map(str::to_string)
        .collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(SimulateError::SharedSelectionUnsupported { nodes: shared })
    }
}

/// The observable causal variables, in causal order: measured ones paired
/// with the selection that reveals them, known-by-design ones with `None`.
fn observable_columns(g: &DesignGraph) -> Result<Vec<(String, Option<String>)>, SimulateError> {
    let projection = g.causal_projection();
    let mut out = Vec::new();
    for ix in projection.topo_order()? {
        let id = projection.node(ix).id.clone();
        if let Some(data) = g.measurement_of(&id)? {
            let (_, selection) = g.measured_pair(data)?;
            out.push((id, Some(selection.to_string())));
        } else if g.node_by_id(&id).unwrap().info.known() {
            out.push((id, None));
        }
    }
    Ok(out)
}

/// What one sampled individual contributes to the dataset: each observable
/// variable's value, or `NA` when its measurement's selection did not fire.
fn record_row(
    columns: &[(String, Option<String>)],
    concrete: &ConcreteModel,
    assignment: &[usize],
) -> Result<Vec<Option<String>>, SimulateError> {
    columns
        .iter()
        .map(|(var, selection)| {
            let var_ix = concrete.var_index(var)?;
            let visible = match selection {
                None => true,
                Some(s) => {
                    let s_ix = concrete.var_index(s)?;
                    concrete.entries()[s_ix].values[assignment[s_ix]] == "1"
                }
            };
            Ok(visible.then(|| concrete.entries()[var_ix].values[assignment[var_ix]].clone()))
        })
        .collect()
}

fn spec_hash(g: &DesignGraph, params: &ParamMap, n: u64, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_dsl(g).as_bytes());
    for name in params.names() {
        hasher.update(name.as_bytes());
        hasher.update(b"=");
        hasher.update(params.get(name).unwrap().to_le_bytes());
        hasher.update(b";");
    }
    hasher.update(n.to_le_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Draws a population of `n` individuals and aggregates what the design
/// records into a [`FrequencyTable`], deterministically in `seed`. Each
/// individual is sampled ancestrally — causal variables and selections in
/// topological order — on its own counter stream, so the draw order does
/// not affect any individual's values.
pub fn simulate_dataset(
    g: &DesignGraph,
    model: &DiscreteModel,
    params: &ParamMap,
    n: u64,
    seed: u64,
) -> Result<(FrequencyTable, SimMeta), SimulateError> {
    reject_shared(g)?;
    let concrete = model.instantiate(params)?;
    let columns = observable_columns(g)?;

    let mut cells: BTreeMap<Vec<Option<String>>, u64> = BTreeMap::new();
    let mut assignment = vec![0usize; concrete.entries().len()];
    for individual in 0..n {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(individual);
        for ix in 0..concrete.entries().len() {
            assignment[ix] = match concrete.dist(ix, &assignment) {
                DistRef::Forced(v) => v,
                DistRef::Row(row) => {
                    let u: f64 = rng.random();
                    let mut cdf = 0.0;
                    let mut drawn = row.len() - 1;
                    for (value, p) in row.iter().enumerate() {
                        cdf += p;
                        if u < cdf {
                            drawn = value;
                            break;
                        }
                    }
                    drawn
                }
            };
        }
        *cells.entry(record_row(&columns, &concrete, &assignment)?).or_insert(0) += 1;
    }

    let mut table = FrequencyTable::new(columns.iter().map(|(v, _)| v.clone()).collect());
    table.rows = cells.into_iter().collect();
    let meta = SimMeta {
        graph: g.name().to_string(),
        n,
        seed,
        generator: format!("ChaCha12 (rand_chacha {})", "0.9"),
        spec_hash: spec_hash(g, params, n, seed),
    };
    Ok((table, meta))
}

/// Exact expected counts of the observable table for a population of size
/// `n`: full enumeration of the joint, folded onto the recorded columns.
/// Cells with zero probability are omitted; the remaining cells sum to `n`.
pub fn expected_frequencies(
    g: &DesignGraph,
    model: &DiscreteModel,
    params: &ParamMap,
    n: u64,
    cap: usize,
) -> Result<ExpectedTable, SimulateError> {
    reject_shared(g)?;
    let concrete = model.instantiate(params)?;
    let columns = observable_columns(g)?;
    let joint = concrete.joint(cap)?;

    let mut cells: BTreeMap<Vec<Option<String>>, f64> = BTreeMap::new();
    for assignment in joint.assignments() {
        let p = joint.probs[joint.flat_index(&assignment)];
        if p > 0.0 {
            *cells.entry(record_row(&columns, &concrete, &assignment)?).or_insert(0.0) += p;
        }
    }
    Ok(ExpectedTable {
        columns: columns.into_iter().map(|(v, _)| v).collect(),
        rows: cells.into_iter().map(|(key, p)| (key, p * n as f64)).collect(),
    })
}

/// Joint distribution under do-interventions, by truncated factorization:
/// each intervened variable becomes a point mass, everything else keeps its
/// table, and the whole state space (latents included) is enumerated. With
/// no interventions this is the observational joint.
pub fn interventional_distribution(
    model: &DiscreteModel,
    params: &ParamMap,
    intervene: &[(String, String)],
    cap: usize,
) -> Result<JointTable, SimulateError> {
    let concrete = model.instantiate(params)?;
    let pins: Vec<(usize, usize)> = intervene
        .iter()
        .map(|(var, value)| {
            let ix = concrete.var_index(var)?;
            let v = concrete.entries()[ix]
                .values
                .iter()
                .position(|x| x == value)
                .ok_or_else(|| ModelError::BadValue { var: var.clone(), value: value.clone() })?;
            Ok::<_, SimulateError>((ix, v))
        })
        .collect::<Result<_, _>>()?;
    Ok(concrete.do_intervene(&pins).joint(cap)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::build_graph;
    use crate::expr::evaluate_expr;
    use crate::identify::identify;
    use crate::model::{saturated_binary_parametrization, TableSpec, DEFAULT_STATE_CAP};

    const SURVEY: &str = "\
graph survey
population mOmega
node U kind=causal info=unobserved
node X kind=causal info=unobserved
node Z kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
edge U -> X
edge U -> Y
edge X -> Z
edge Z -> Y
measure X* : X by m1 stage=1
measure Z* : Z by m1 stage=1
measure Y* : Y by m1 stage=1
";

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

    fn golden_params() -> ParamMap {
        [
            ("theta_X", 5001.0 / 10000.0),
            ("theta_Z", 501.0 / 9998.0),
            ("theta_ZX", 22_499_998.0 / 24_999_999.0),
            ("theta_Y", 950.0 / 9497.0),
            ("theta_YX", 7_532_721.0 / 9_478_006.0),
            ("theta_YZ", -136_857.0 / 3_171_998.0),
            ("theta_YZX", -846_114_213.0 / 442_400_147_059.0),
            ("psi_m1", 1.0),
            ("psi_m2", 2.0 / 21.0),
            ("psi_m2_Y", 4.0 / 399.0),
        ]
        .into_iter()
        .collect()
    }

    /// Valid coefficients with every corner probability drawn uniformly.
    fn random_params(model: &DiscreteModel, rng: &mut ChaCha12Rng) -> ParamMap {
        let mut params = ParamMap::new();
        for v in model.vars() {
            let TableSpec::LinearBinary { coeffs } = &v.spec else { unreachable!() };
            let corners: Vec<f64> =
                (0..1usize << v.parents.len()).map(|_| rng.random_range(0.05..0.95)).collect();
            for (name, subset) in coeffs {
                let mask: usize = subset.iter().map(|&b| 1usize << b).sum();
                let mut value = 0.0;
                let mut sub = mask;
                loop {
                    let sign =
                        if (mask.count_ones() - sub.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                    value += sign * corners[sub];
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & mask;
                }
                params.set(name.clone(), value);
            }
        }
        params
    }

    #[test]
    fn survey_rows_are_jointly_present_or_jointly_absent() {
        let g = build_graph(SURVEY).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut params = random_params(&model, &mut rng);
        params.set("psi_m1", 0.6);
        let (table, _) = simulate_dataset(&g, &model, &params, 500, 42).unwrap();
        assert_eq!(table.columns, ["X", "Z", "Y"]);
        assert_eq!(table.total(), 500);
        let mut saw_present = false;
        let mut saw_absent = false;
        for (values, _) in &table.rows {
            let present = values.iter().filter(|v| v.is_some()).count();
            assert!(present == 0 || present == values.len(), "{values:?}");
            saw_present |= present == values.len();
            saw_absent |= present == 0;
        }
        assert!(saw_present && saw_absent);
    }

    #[test]
    fn fixed_seeds_reproduce_and_distinguish_datasets() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let params = golden_params();
        let (a, meta_a) = simulate_dataset(&g, &model, &params, 2000, 7).unwrap();
        let (b, meta_b) = simulate_dataset(&g, &model, &params, 2000, 7).unwrap();
        let (c, meta_c) = simulate_dataset(&g, &model, &params, 2000, 8).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(meta_a, meta_b);
        assert_ne!(a.to_csv_string(), c.to_csv_string());
        assert_ne!(meta_a.spec_hash, meta_c.spec_hash);
        assert_eq!(meta_a.generator, "ChaCha12 (rand_chacha 0.9)");
        assert_eq!(meta_a.spec_hash.len(), 64);
    }

    #[test]
    fn uniform_independent_binaries_split_cells_exactly() {
        let g = build_graph(
            "\
graph flat
population mOmega
node A kind=causal info=observed
node B kind=causal info=observed
node C kind=causal info=observed
",
        )
        .unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let mut params = ParamMap::new();
        for name in model.param_names() {
            params.set(name, 0.5);
        }
        let expected =
            expected_frequencies(&g, &model, &params, 800, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(expected.rows.len(), 8);
        for (_, count) in &expected.rows {
            assert!((count - 100.0).abs() < 1e-9);
        }
        assert!((expected.total() - 800.0).abs() < 1e-9);
    }

    #[test]
    fn expected_cells_reproduce_the_generating_counts() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let expected =
            expected_frequencies(&g, &model, &golden_params(), 20000, DEFAULT_STATE_CAP)
                .unwrap();
        let get = |x: Option<&str>, z: Option<&str>, y: &str| -> f64 {
            let key: Vec<Option<String>> = vec![
                x.map(str::to_string),
                z.map(str::to_string),
                Some(y.to_string()),
            ];
            expected.rows.iter().find(|(k, _)| *k == key).map(|(_, n)| *n).unwrap()
        };
        for (x, z, y, n) in [
            ("0", "0", "1", 100.0),
            ("0", "0", "0", 814.0),
            ("1", "0", "1", 47.0),
            ("1", "0", "0", 5.0),
            ("0", "1", "1", 3.0),
            ("0", "1", "0", 45.0),
            ("1", "1", "1", 850.0),
            ("1", "1", "0", 136.0),
        ] {
            assert!((get(Some(x), Some(z), y) - n).abs() < 1e-6, "{x}{z}{y}");
        }
        assert!((get(None, None, "1") - 8500.0).abs() < 1e-6);
        assert!((get(None, None, "0") - 9500.0).abs() < 1e-6);
        assert_eq!(expected.rows.len(), 10);
        assert!((expected.total() - 20000.0).abs() < 1e-9);

        let rounded = expected.rounded();
        assert_eq!(rounded.total(), 20000);
    }

    #[test]
    fn sample_means_track_exact_expectations() {
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let params = golden_params();
        let expected =
            expected_frequencies(&g, &model, &params, 2000, DEFAULT_STATE_CAP).unwrap();
        let key: Vec<Option<String>> =
            vec![Some("1".into()), Some("1".into()), Some("1".into())];
        let mean_cell = expected.rows.iter().find(|(k, _)| *k == key).unwrap().1;

        let seeds = 40;
        let mut total = 0.0;
        for seed in 0..seeds {
            let (table, _) = simulate_dataset(&g, &model, &params, 2000, seed).unwrap();
            total += table
                .rows
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, n)| *n as f64)
                .unwrap_or(0.0);
        }
        let mean = total / seeds as f64;
        // Binomial cell: sd per draw ≈ sqrt(np(1-p)) ≈ 9.2, so the mean of
        // 40 draws sits within ±6 of the expectation with huge probability.
        assert!((mean - mean_cell).abs() < 6.0, "{mean} vs {mean_cell}");
    }

    #[test]
    fn empty_intervention_is_the_observational_joint() {
        let g = build_graph(FRONT_DOOR).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let params = random_params(&model, &mut rng);
        let observational =
            model.instantiate(&params).unwrap().joint(DEFAULT_STATE_CAP).unwrap();
        let intervened =
            interventional_distribution(&model, &params, &[], DEFAULT_STATE_CAP).unwrap();
        assert_eq!(observational.vars, intervened.vars);
        for (a, b) in observational.probs.iter().zip(&intervened.probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn intervening_on_a_non_ancestor_leaves_the_outcome_marginal() {
        let g = build_graph(
            "\
graph sideline
population mOmega
node A kind=causal info=observed
node B kind=causal info=observed
node Y kind=causal info=observed
edge A -> Y
",
        )
        .unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let params = random_params(&model, &mut rng);
        let p_y = |joint: &JointTable| -> f64 {
            let y = joint.var_index("Y").unwrap();
            let one = joint.value_index(y, "1").unwrap();
            joint.sum_where(&[(y, one)])
        };
        let observational =
            interventional_distribution(&model, &params, &[], DEFAULT_STATE_CAP).unwrap();
        let set_b = interventional_distribution(
            &model,
            &params,
            &[("B".into(), "1".into())],
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert!((p_y(&observational) - p_y(&set_b)).abs() < 1e-12);
    }

    #[test]
    fn truncated_factorization_agrees_with_the_identified_expression() {
        let g = build_graph(FRONT_DOOR).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let estimand = identify(&g, &["X"], &["Y"]).unwrap().estimand.unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1729);
        for _ in 0..25 {
            let params = random_params(&model, &mut rng);
            let observational =
                model.instantiate(&params).unwrap().joint(DEFAULT_STATE_CAP).unwrap();
            for x in ["0", "1"] {
                let intervened = interventional_distribution(
                    &model,
                    &params,
                    &[("X".into(), x.into())],
                    DEFAULT_STATE_CAP,
                )
                .unwrap();
                let y = intervened.var_index("Y").unwrap();
                let one = intervened.value_index(y, "1").unwrap();
                let truth = intervened.sum_where(&[(y, one)]);
                let env: BTreeMap<String, String> =
                    [("x".to_string(), x.to_string()), ("y".to_string(), "1".to_string())]
                        .into_iter()
                        .collect();
                let via_expression = evaluate_expr(&estimand, &observational, &env).unwrap();
                assert!((truth - via_expression).abs() < 1e-9, "{truth} vs {via_expression}");
            }
        }
    }

    #[test]
    fn shared_selection_designs_are_refused() {
        let g = build_graph(
            "\
graph nested
population mOmega
node X kind=causal info=unobserved
node Y kind=causal info=unobserved
node m1 kind=selection info=det-known stage=1
node m2 kind=selection info=det-known stage=2 shared
edge X -> Y
edge m1 -> m2
edge Y* -> m2
measure Y* : Y by m1 stage=1
measure X* : X by m2 stage=2
",
        )
        .unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let params = ParamMap::new();
        assert!(matches!(
            simulate_dataset(&g, &model, &params, 10, 0),
            Err(SimulateError::SharedSelectionUnsupported { nodes }) if nodes == ["m2"]
        ));
        assert!(matches!(
            expected_frequencies(&g, &model, &params, 10, DEFAULT_STATE_CAP),
            Err(SimulateError::SharedSelectionUnsupported { .. })
        ));
    }

    #[test]
    fn half_of_selected_outcomes_are_cases_at_the_golden_design() {
        // The second-stage draw is tuned so cases and non-cases are selected
        // in equal expected numbers.
        let g = build_graph(CASE_CONTROL).unwrap();
        let model = saturated_binary_parametrization(&g).unwrap();
        let expected =
            expected_frequencies(&g, &model, &golden_params(), 20000, DEFAULT_STATE_CAP)
                .unwrap();
        let complete_cases: f64 = expected
            .rows
            .iter()
            .filter(|(k, _)| k[0].is_some() && k[2].as_deref() == Some("1"))
            .map(|(_, n)| n)
            .sum();
        let complete: f64 =
            expected.rows.iter().filter(|(k, _)| k[0].is_some()).map(|(_, n)| n).sum();
        assert!((complete_cases / complete - 0.5).abs() < 1e-9);
    }
}
