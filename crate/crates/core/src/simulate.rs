//! Scenario sampling: draw observational datasets from a structural model
//! with both potential outcomes materialized, so every simulated dataset
//! carries its exact ground truth.

use crate::data::{DataError, Dataset, OutcomeColumn};
use crate::model::{CausalGraph, CausalModel, CptSet, ModelError, NodeSpec};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Recorded in every truth sidecar; bump if the sampling scheme changes.
pub const GENERATOR_ID: &str = "chacha8-stream-per-record-v1";

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Data(#[from] DataError),
    #[error("sample size must be positive")]
    EmptySample,
    #[error("no built-in scenario named {0:?}")]
    UnknownScenario(String),
    #[error("truth file line {line}: {message}")]
    TruthFile { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// A fully specified generating process plus the sampling parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: CausalModel,
    pub treatment: String,
    pub outcome: String,
    pub n: usize,
    pub seed: u64,
}

/// The observed dataset plus the hidden potential-outcome columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: Dataset,
    /// Outcome state each record would show under treatment 0 / 1.
    pub y0: Vec<usize>,
    pub y1: Vec<usize>,
    pub scenario: String,
    pub seed: u64,
    pub generator: String,
    pub true_ate: f64,
}

impl SimulatedDataset {
    /// Empirical mean of the hidden arm columns, as outcome values.
    pub fn potential_means(&self) -> (f64, f64) {
        let n = self.y0.len() as f64;
        let m0 = self.y0.iter().map(|&v| v as f64).sum::<f64>() / n;
        let m1 = self.y1.iter().map(|&v| v as f64).sum::<f64>() / n;
        (m0, m1)
    }
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    // 53 explicit mantissa bits, uniform on [0, 1); independent of any
    // float-conversion helpers that might change underneath us
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Invert one conditional distribution at `u`.
fn inverse_cdf(model: &CausalModel, node: usize, parent_states: &[usize], u: f64) -> usize {
    let card = model.graph().card(node);
    let mut cum = 0.0;
    for s in 0..card {
        cum += model.cpt_prob(node, parent_states, s);
        if u < cum {
            return s;
        }
    }
    card - 1
}

/// Ancestral pass over the stored (topological) node order, reusing the
/// record's per-node uniforms; `force` pins the treatment in a do-world.
fn draw_world(
    model: &CausalModel,
    uniforms: &[f64],
    force: Option<(usize, usize)>,
) -> Vec<usize> {
    let graph = model.graph();
    let mut states = vec![0usize; graph.node_count()];
    let mut parent_buf = Vec::new();
    for j in 0..graph.node_count() {
        if let Some((node, value)) = force {
            if node == j {
                states[j] = value;
                continue;
            }
        }
        parent_buf.clear();
        parent_buf.extend(graph.parents(j).iter().map(|&p| states[p]));
        states[j] = inverse_cdf(model, j, &parent_buf, uniforms[j]);
    }
    states
}

/// Sample the scenario. Each record burns one uniform per node from its own
/// generator stream; the observational world and both do-worlds share those
/// uniforms, which is what makes Y = Z·Y₁ + (1−Z)·Y₀ hold record by record
/// and keeps results independent of how records might be sharded.
pub fn sample(scenario: &Scenario) -> Result<SimulatedDataset, SimulateError> {
    if scenario.n == 0 {
        return Err(SimulateError::EmptySample);
    }
    let model = &scenario.model;
    let graph = model.graph();
    // also validates that the treatment is binary
    let true_ate = model.true_ate(&scenario.treatment, &scenario.outcome)?;
    let t_idx = graph.node_index(&scenario.treatment).expect("checked by true_ate");
    let o_idx = graph.node_index(&scenario.outcome).expect("checked by true_ate");
    let k = graph.node_count();

    let mut columns: Vec<(String, Vec<usize>)> = (0..k)
        .filter(|&j| j != t_idx && j != o_idx)
        .map(|j| (graph.node_name(j).to_string(), Vec::with_capacity(scenario.n)))
        .collect();
    let covariate_ids: Vec<usize> = (0..k).filter(|&j| j != t_idx && j != o_idx).collect();
    let mut z = Vec::with_capacity(scenario.n);
    let mut y = Vec::with_capacity(scenario.n);
    let mut y0 = Vec::with_capacity(scenario.n);
    let mut y1 = Vec::with_capacity(scenario.n);

    let mut uniforms = vec![0.0; k];
    for record in 0..scenario.n {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(record as u64);
        for u in uniforms.iter_mut() {
            *u = unit_uniform(&mut rng);
        }
        let observed = draw_world(model, &uniforms, None);
        let world0 = draw_world(model, &uniforms, Some((t_idx, 0)));
        let world1 = draw_world(model, &uniforms, Some((t_idx, 1)));
        debug_assert_eq!(
            observed[o_idx],
            if observed[t_idx] == 1 { world1[o_idx] } else { world0[o_idx] }
        );
        for (slot, &j) in columns.iter_mut().zip(&covariate_ids) {
            slot.1.push(observed[j]);
        }
        z.push(observed[t_idx] as u8);
        y.push(observed[o_idx]);
        y0.push(world0[o_idx]);
        y1.push(world1[o_idx]);
    }

    let outcome = if graph.card(o_idx) == 2 {
        OutcomeColumn::Binary(y.iter().map(|&v| v as u8).collect())
    } else {
        OutcomeColumn::Real(y.iter().map(|&v| v as f64).collect())
    };
    let dataset = Dataset::new(
        columns,
        (scenario.treatment.clone(), z),
        (scenario.outcome.clone(), outcome),
    )?;
    Ok(SimulatedDataset {
        dataset,
        y0,
        y1,
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        generator: GENERATOR_ID.to_string(),
        true_ate,
    })
}

/// Build a binary node's flat table from `p(node = 1 | parents)`, rows in
/// canonical order (parents ascending, last varying fastest).
fn binary_table(parent_cards: &[usize], p1: impl Fn(&[usize]) -> f64) -> Vec<f64> {
    let rows: usize = parent_cards.iter().product();
    let mut table = Vec::with_capacity(rows * 2);
    let mut states = vec![0usize; parent_cards.len()];
    for _ in 0..rows {
        let p = p1(&states);
        table.push(1.0 - p);
        table.push(p);
        for d in (0..parent_cards.len()).rev() {
            states[d] += 1;
            if states[d] < parent_cards[d] {
                break;
            }
            states[d] = 0;
        }
    }
    table
}

fn binary_nodes(names: &[&str]) -> Vec<NodeSpec> {
    names.iter().map(|n| NodeSpec { name: n.to_string(), card: 2 }).collect()
}

fn edges(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// The shipped scenarios. `triangle` is the confounded X→Z, X→Y, Z→Y model
/// with strong confounding (naive difference 0.48 against a true effect of
/// 0.3); `randomized` removes the X→Z edge so p(y|do(z)) = p(y|z);
/// `mediator` routes part of the effect of Z through Z′. In `mediator`, X1
/// influences treatment only — p(z′|z, x1, x2, x4) carries no x1 term — so
/// dropping X1 from the adjustment set leaves the estimand untouched, which
/// is exactly the admissible-subset reduction the scenario exists to show.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let triangle = {
        let graph = CausalGraph::new(
            binary_nodes(&["x", "z", "y"]),
            &edges(&[("x", "z"), ("x", "y"), ("z", "y")]),
        )
        .unwrap();
        // y's parents in canonical order: (x, z), z varying fastest
        let tables = vec![
            binary_table(&[], |_| 0.5),
            binary_table(&[2], |s| if s[0] == 1 { 0.8 } else { 0.2 }),
            binary_table(&[2, 2], |s| match (s[0], s[1]) {
                (0, 0) => 0.2,
                (0, 1) => 0.5,
                (1, 0) => 0.5,
                (1, 1) => 0.8,
                _ => unreachable!(),
            }),
        ];
        let cpts = CptSet::from_tables(&graph, tables).unwrap();
        Scenario {
            name: "triangle".into(),
            model: CausalModel::new(graph, cpts),
            treatment: "z".into(),
            outcome: "y".into(),
            n: 1000,
            seed: 0,
        }
    };

    let randomized = {
        let graph = CausalGraph::new(
            binary_nodes(&["x", "z", "y"]),
            &edges(&[("x", "y"), ("z", "y")]),
        )
        .unwrap();
        let tables = vec![
            binary_table(&[], |_| 0.5),
            binary_table(&[], |_| 0.5),
            binary_table(&[2, 2], |s| match (s[0], s[1]) {
                (0, 0) => 0.2,
                (0, 1) => 0.5,
                (1, 0) => 0.5,
                (1, 1) => 0.8,
                _ => unreachable!(),
            }),
        ];
        let cpts = CptSet::from_tables(&graph, tables).unwrap();
        Scenario {
            name: "randomized".into(),
            model: CausalModel::new(graph, cpts),
            treatment: "z".into(),
            outcome: "y".into(),
            n: 1000,
            seed: 0,
        }
    };

    let mediator = {
        let graph = CausalGraph::new(
            binary_nodes(&["x1", "x2", "x3", "x4", "z", "zprime", "y"]),
            &edges(&[
                ("x1", "z"),
                ("x3", "z"),
                ("x4", "z"),
                ("z", "zprime"),
                ("x1", "zprime"),
                ("x2", "zprime"),
                ("x4", "zprime"),
                ("z", "y"),
                ("zprime", "y"),
                ("x2", "y"),
                ("x3", "y"),
                ("x4", "y"),
            ]),
        )
        .unwrap();
        let f = |v: usize, w: f64| v as f64 * w;
        let tables = vec![
            binary_table(&[], |_| 0.4), // x1
            binary_table(&[], |_| 0.6), // x2
            binary_table(&[], |_| 0.5), // x3
            binary_table(&[], |_| 0.3), // x4
            // z | (x1, x3, x4)
            binary_table(&[2, 2, 2], |s| 0.15 + f(s[0], 0.3) + f(s[1], 0.25) + f(s[2], 0.2)),
            // zprime | (x1, x2, x4, z) — constant in x1 by design
            binary_table(&[2, 2, 2, 2], |s| 0.1 + f(s[1], 0.2) + f(s[2], 0.15) + f(s[3], 0.45)),
            // y | (x2, x3, x4, z, zprime)
            binary_table(&[2, 2, 2, 2, 2], |s| {
                0.05 + f(s[0], 0.15) + f(s[1], 0.1) + f(s[2], 0.15) + f(s[3], 0.25) + f(s[4], 0.2)
            }),
        ];
        let cpts = CptSet::from_tables(&graph, tables).unwrap();
        Scenario {
            name: "mediator".into(),
            model: CausalModel::new(graph, cpts),
            treatment: "z".into(),
            outcome: "y".into(),
            n: 1000,
            seed: 0,
        }
    };

    vec![triangle, randomized, mediator]
}

/// Look one scenario up by name.
pub fn builtin(name: &str) -> Result<Scenario, SimulateError> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SimulateError::UnknownScenario(name.to_string()))
}

/// Write the hidden columns next to the observed data:
/// a `#`-prefixed metadata line, then `y0,y1` rows aligned with the records.
pub fn write_truth_csv(path: &Path, sim: &SimulatedDataset) -> Result<(), SimulateError> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# true_ate={} scenario={} seed={} n={} generator={}",
        sim.true_ate,
        sim.scenario,
        sim.seed,
        sim.y0.len(),
        sim.generator
    );
    out.push_str("y0,y1\n");
    for (a, b) in sim.y0.iter().zip(&sim.y1) {
        let _ = writeln!(out, "{a},{b}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The parsed truth sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub true_ate: f64,
    pub scenario: String,
    pub seed: u64,
    pub generator: String,
    pub y0: Vec<usize>,
    pub y1: Vec<usize>,
}

pub fn load_truth_csv(path: &Path) -> Result<Truth, SimulateError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SimulateError::TruthFile {
        line: 1,
        message: "empty file".into(),
    })?;
    let meta = header.strip_prefix('#').ok_or(SimulateError::TruthFile {
        line: 1,
        message: "missing `#` metadata line".into(),
    })?;
    let mut true_ate = None;
    let mut scenario = String::new();
    let mut seed = 0u64;
    let mut generator = String::new();
    for part in meta.split_whitespace() {
        let Some((key, value)) = part.split_once('=') else { continue };
        match key {
            "true_ate" => {
                true_ate = Some(value.parse().map_err(|_| SimulateError::TruthFile {
                    line: 1,
                    message: format!("bad true_ate {value:?}"),
                })?)
            }
            "scenario" => scenario = value.to_string(),
            "seed" => {
                seed = value.parse().map_err(|_| SimulateError::TruthFile {
                    line: 1,
                    message: format!("bad seed {value:?}"),
                })?
            }
            "generator" => generator = value.to_string(),
            _ => {}
        }
    }
    let true_ate = true_ate.ok_or(SimulateError::TruthFile {
        line: 1,
        message: "metadata line lacks true_ate".into(),
    })?;
    let mut y0 = Vec::new();
    let mut y1 = Vec::new();
    for (i, line) in lines {
        if i == 1 {
            if line.trim() != "y0,y1" {
                return Err(SimulateError::TruthFile {
                    line: 2,
                    message: format!("expected `y0,y1` header, found {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some((a, b)) = line.split_once(',') else {
            return Err(SimulateError::TruthFile {
                line: i + 1,
                message: "expected two comma-separated values".into(),
            });
        };
        let parse = |v: &str| {
            v.trim().parse::<usize>().map_err(|_| SimulateError::TruthFile {
                line: i + 1,
                message: format!("bad state {v:?}"),
            })
        };
        y0.push(parse(a)?);
        y1.push(parse(b)?);
    }
    Ok(Truth { true_ate, scenario, seed, generator, y0, y1 })
}
