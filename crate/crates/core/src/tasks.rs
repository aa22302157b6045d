//! TSP and vertex k-center instances in the CLRS feature form.
//!
//! A task instance becomes a hint-free [`Trajectory`] (`T = 0`): the inputs
//! are the start mask (TSP), edge weights and adjacency; the output is the
//! optimal solution as predecessor pointers (TSP) or a centre mask (VKC).
//! Node coordinates are never exposed, only distances.

use serde_json::Value;

use crate::clrs::{Feature, FeatureKind, FeatureSpec, Location, Stage, Trajectory};
use crate::decode::{tour_cost, CenterSet, Tour};
use crate::graph::{gen_er_connected, gen_euclidean_complete, WeightedGraph};
use crate::json::{field, fmt_f64, usize_field};
use crate::oracles::{held_karp, vkc_exact};
use crate::{invalid, CoreError, Result, Rng};

pub const TSP_ID: &str = "tsp";
pub const VKC_ID: &str = "vkc";

/// Default number of centres.
pub const DEFAULT_K: usize = 5;

fn edge_inputs(g: &WeightedGraph) -> Vec<Feature> {
    let adj = g.adjacency().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    vec![
        Feature::new(FeatureSpec::new("w", Stage::Input, Location::Edge, FeatureKind::Scalar), g.weights().to_vec()),
        Feature::new(FeatureSpec::new("adj", Stage::Input, Location::Edge, FeatureKind::Mask), adj),
    ]
}

fn usize_list(v: &Value, name: &str) -> Result<Vec<usize>> {
    field(v, name)?
        .as_array()
        .ok_or_else(|| CoreError::Parse(format!("`{name}` is not a list")))?
        .iter()
        .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| CoreError::Parse(format!("bad entry in `{name}`"))))
        .collect()
}

fn f64_field(v: &Value, name: &str) -> Result<f64> {
    field(v, name)?
        .as_f64()
        .ok_or_else(|| CoreError::Parse(format!("`{name}` is not a number")))
}

/// Complete metric graph, start node and an optimal tour beginning there.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub graph: WeightedGraph,
    pub start: usize,
    pub optimal_cost: f64,
    pub target: Tour,
}

impl TspInstance {
    /// Solves `graph` exactly and rotates the optimum to begin at `start`.
    pub fn solve(graph: WeightedGraph, start: usize) -> Result<Self> {
        if start >= graph.n() {
            return Err(invalid(format!("start {start} out of range")));
        }
        let (optimal_cost, tour) = held_karp(&graph)?;
        let order = tour.order();
        let at = order.iter().position(|&v| v == start).expect("tour visits every node");
        let n = order.len();
        let target = Tour::new((0..n).map(|k| order[(at + k) % n]).collect())?;
        Ok(Self { graph, start, optimal_cost, target })
    }

    pub fn generate(n: usize, rng: &mut Rng) -> Result<Self> {
        let graph = gen_euclidean_complete(n, rng)?;
        let start = rng.below(n);
        Self::solve(graph, start)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn specs() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::new("s", Stage::Input, Location::Node, FeatureKind::MaskOne),
            FeatureSpec::new("w", Stage::Input, Location::Edge, FeatureKind::Scalar),
            FeatureSpec::new("adj", Stage::Input, Location::Edge, FeatureKind::Mask),
            FeatureSpec::new("pi", Stage::Output, Location::Node, FeatureKind::Pointer),
        ]
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let n = self.n();
        let mut s = vec![0.0; n];
        s[self.start] = 1.0;
        let mut inputs = vec![Feature::new(Self::specs()[0].clone(), s)];
        inputs.extend(edge_inputs(&self.graph));
        let pred = self.target.predecessors().into_iter().map(|p| p as f64).collect();
        Trajectory {
            algo_id: TSP_ID.into(),
            n,
            steps: 0,
            inputs,
            hints: vec![],
            outputs: vec![Feature::new(Self::specs()[3].clone(), pred)],
        }
    }

    pub fn to_json_line(&self) -> String {
        format!(
            "{{\"task\":\"{TSP_ID}\",\"graph\":{},\"start\":{},\"optimal_cost\":{},\"tour\":{:?}}}",
            self.graph.to_json_line(),
            self.start,
            fmt_f64(self.optimal_cost),
            self.target.order()
        )
    }

    /// Parses a record and re-checks it: the tour must be a permutation
    /// starting at `start` whose cost is the stored optimum.
    pub fn from_json_line(line: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(line)?;
        let graph = WeightedGraph::from_json_value(field(&v, "graph")?)?;
        let start = usize_field(&v, "start")?;
        let optimal_cost = f64_field(&v, "optimal_cost")?;
        let target = Tour::new(usize_list(&v, "tour")?)?;
        if target.len() != graph.n() || target.start() != start {
            return Err(CoreError::Parse("tour does not match the graph and start".into()));
        }
        if tour_cost(&graph, &target)? != optimal_cost {
            return Err(CoreError::Parse("stored optimum disagrees with the tour cost".into()));
        }
        Ok(Self { graph, start, optimal_cost, target })
    }
}

/// Connected graph, centre budget `k` and an optimal centre set.
#[derive(Debug, Clone, PartialEq)]
pub struct VkcInstance {
    pub graph: WeightedGraph,
    pub k: usize,
    pub optimum: f64,
    pub witness: CenterSet,
}

impl VkcInstance {
    pub fn solve(graph: WeightedGraph, k: usize) -> Result<Self> {
        if k == 0 || k > graph.n() {
            return Err(invalid(format!("k = {k} outside 1..={}", graph.n())));
        }
        let (optimum, witness) = vkc_exact(&graph, k)?;
        Ok(Self { graph, k, optimum, witness })
    }

    /// Connected Erdős–Rényi graph with `p = 0.5`.
    pub fn generate(n: usize, k: usize, rng: &mut Rng) -> Result<Self> {
        Self::solve(gen_er_connected(n, 0.5, rng)?, k)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn specs() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::new("w", Stage::Input, Location::Edge, FeatureKind::Scalar),
            FeatureSpec::new("adj", Stage::Input, Location::Edge, FeatureKind::Mask),
            FeatureSpec::new("centers", Stage::Output, Location::Node, FeatureKind::Mask),
        ]
    }

    pub fn to_trajectory(&self) -> Trajectory {
        let n = self.n();
        let mask = (0..n).map(|v| if self.witness.contains(v) { 1.0 } else { 0.0 }).collect();
        Trajectory {
            algo_id: VKC_ID.into(),
            n,
            steps: 0,
            inputs: edge_inputs(&self.graph),
            hints: vec![],
            outputs: vec![Feature::new(Self::specs()[2].clone(), mask)],
        }
    }

    pub fn to_json_line(&self) -> String {
        format!(
            "{{\"task\":\"{VKC_ID}\",\"graph\":{},\"k\":{},\"optimum\":{},\"centers\":{:?}}}",
            self.graph.to_json_line(),
            self.k,
            fmt_f64(self.optimum),
            self.witness.centers()
        )
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(line)?;
        let graph = WeightedGraph::from_json_value(field(&v, "graph")?)?;
        let k = usize_field(&v, "k")?;
        let optimum = f64_field(&v, "optimum")?;
        let witness = CenterSet::new(usize_list(&v, "centers")?, graph.n(), k)?;
        if crate::decode::vkc_objective(&graph, &witness)? != optimum {
            return Err(CoreError::Parse("stored optimum disagrees with the centre set".into()));
        }
        Ok(Self { graph, k, optimum, witness })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tsp_record_roundtrip_and_features() {
        let inst = TspInstance::generate(7, &mut Rng::new(3)).unwrap();
        assert_eq!(inst.target.start(), inst.start);
        let back = TspInstance::from_json_line(&inst.to_json_line()).unwrap();
        assert_eq!(back, inst);
        let t = inst.to_trajectory();
        t.validate().unwrap();
        assert_eq!(t.steps, 0);
        assert!(t.input("pos").is_none());
    }

    #[test]
    fn vkc_record_roundtrip_and_features() {
        let inst = VkcInstance::generate(9, 3, &mut Rng::new(4)).unwrap();
        let back = VkcInstance::from_json_line(&inst.to_json_line()).unwrap();
        assert_eq!(back, inst);
        let t = inst.to_trajectory();
        t.validate().unwrap();
        let chosen = t.output("centers").unwrap().data.iter().filter(|&&x| x == 1.0).count();
        assert!(chosen <= 3);
    }

    #[test]
    fn tampered_optimum_is_rejected() {
        let inst = TspInstance::generate(6, &mut Rng::new(5)).unwrap();
        let line = inst.to_json_line().replace("\"start\"", "\"start_\"");
        assert!(TspInstance::from_json_line(&line).is_err());
        let mut v: Value = serde_json::from_str(&inst.to_json_line()).unwrap();
        v["optimal_cost"] = json!(inst.optimal_cost * 0.5);
        assert!(TspInstance::from_json_line(&v.to_string()).is_err());
    }
}
