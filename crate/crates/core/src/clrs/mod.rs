//! Algorithm executions in the CLRS feature taxonomy.
//!
//! Every algorithm is represented on `n` nodes. A feature carries its data
//! flattened row-major: node features are `[n]` (or `[n, C]` when
//! categorical), edge features `[n, n]`, graph features `[1]` (or `[C]`).
//! Hints get an extra leading time axis. Pointers store node indices as
//! floats; an edge pointer at `(i, j)` names a third node.

mod algorithms;

pub use algorithms::{
    traj_activity_selection, traj_bellman_ford, traj_find_min, traj_floyd_warshall,
    traj_insertion_sort, traj_mst_prim, traj_task_scheduling, schedule_feasible, Algorithm, GraphFamily,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::json::{field, read_nested, str_field, usize_field, write_nested};
use crate::{invalid, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Hint,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Node,
    Edge,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Scalar,
    Categorical,
    Mask,
    MaskOne,
    Pointer,
}

macro_rules! string_enum {
    ($ty:ty { $($variant:ident => $s:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $s),* }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = CoreError;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(Self::$variant),)*
                    other => Err(CoreError::Parse(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

string_enum!(Stage { Input => "input", Hint => "hint", Output => "output" });
string_enum!(Location { Node => "node", Edge => "edge", Graph => "graph" });
string_enum!(FeatureKind {
    Scalar => "scalar",
    Categorical => "categorical",
    Mask => "mask",
    MaskOne => "mask_one",
    Pointer => "pointer",
});

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub stage: Stage,
    pub location: Location,
    pub kind: FeatureKind,
    pub num_categories: Option<usize>,
}

impl FeatureSpec {
    pub fn new(name: &str, stage: Stage, location: Location, kind: FeatureKind) -> Self {
        Self { name: name.to_string(), stage, location, kind, num_categories: None }
    }

    pub fn categorical(name: &str, stage: Stage, location: Location, categories: usize) -> Self {
        Self {
            name: name.to_string(),
            stage,
            location,
            kind: FeatureKind::Categorical,
            num_categories: Some(categories),
        }
    }

    /// Values per location element.
    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.num_categories.unwrap_or(0),
            _ => 1,
        }
    }

    /// Dimensions of one time slice on an `n`-node instance.
    pub fn slice_dims(&self, n: usize) -> Vec<usize> {
        let mut dims = match self.location {
            Location::Node => vec![n],
            Location::Edge => vec![n, n],
            Location::Graph => vec![],
        };
        if self.kind == FeatureKind::Categorical || self.location == Location::Graph {
            dims.push(self.width());
        }
        dims
    }

    pub fn slice_len(&self, n: usize) -> usize {
        self.slice_dims(n).iter().product()
    }

    pub fn check(&self) -> Result<()> {
        match (self.kind, self.num_categories) {
            (FeatureKind::Categorical, Some(c)) if c >= 2 => Ok(()),
            (FeatureKind::Categorical, _) => {
                Err(invalid(format!("categorical `{}` needs >= 2 categories", self.name)))
            }
            (_, None) => Ok(()),
            (_, Some(_)) => Err(invalid(format!("`{}` is not categorical", self.name))),
        }
    }
}

/// A feature specification with its data.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub spec: FeatureSpec,
    pub data: Vec<f64>,
}

impl Feature {
    pub fn new(spec: FeatureSpec, data: Vec<f64>) -> Self {
        Self { spec, data }
    }

    /// Data of time step `t` for a hint, or the whole array otherwise.
    pub fn slice(&self, n: usize, t: usize) -> &[f64] {
        let len = self.spec.slice_len(n);
        match self.spec.stage {
            Stage::Hint => &self.data[t * len..(t + 1) * len],
            _ => &self.data[..len],
        }
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

/// Inputs, per-step hints and outputs of one algorithm execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub algo_id: String,
    pub n: usize,
    pub steps: usize,
    pub inputs: Vec<Feature>,
    pub hints: Vec<Feature>,
    pub outputs: Vec<Feature>,
}

fn is_integer_in(x: f64, n: usize) -> bool {
    x.fract() == 0.0 && x >= 0.0 && (x as usize) < n
}

impl Trajectory {
    pub fn features(&self) -> impl Iterator<Item = &Feature> {
        self.inputs.iter().chain(&self.hints).chain(&self.outputs)
    }

    pub fn input(&self, name: &str) -> Option<&Feature> {
        self.inputs.iter().find(|f| f.name() == name)
    }

    pub fn hint(&self, name: &str) -> Option<&Feature> {
        self.hints.iter().find(|f| f.name() == name)
    }

    pub fn output(&self, name: &str) -> Option<&Feature> {
        self.outputs.iter().find(|f| f.name() == name)
    }

    pub fn specs(&self) -> Vec<FeatureSpec> {
        self.features().map(|f| f.spec.clone()).collect()
    }

    /// Shapes, stages and per-kind value constraints.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        for (stage, group) in [
            (Stage::Input, &self.inputs),
            (Stage::Hint, &self.hints),
            (Stage::Output, &self.outputs),
        ] {
            for f in group.iter() {
                let spec = &f.spec;
                spec.check()?;
                if spec.stage != stage {
                    return Err(invalid(format!("`{}` filed under {stage}", spec.name)));
                }
                let slices = if stage == Stage::Hint { self.steps } else { 1 };
                let len = spec.slice_len(n);
                if f.data.len() != slices * len {
                    return Err(invalid(format!(
                        "`{}` holds {} values, expected {}",
                        spec.name,
                        f.data.len(),
                        slices * len
                    )));
                }
                if f.data.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(format!("`{}` has non-finite values", spec.name)));
                }
                for t in 0..slices {
                    let s = &f.data[t * len..(t + 1) * len];
                    match spec.kind {
                        FeatureKind::Scalar => {}
                        FeatureKind::Mask => {
                            if s.iter().any(|&x| x != 0.0 && x != 1.0) {
                                return Err(invalid(format!("`{}` mask not 0/1", spec.name)));
                            }
                        }
                        FeatureKind::MaskOne => {
                            let ok = s.iter().all(|&x| x == 0.0 || x == 1.0)
                                && s.iter().sum::<f64>() == 1.0;
                            if !ok {
                                return Err(invalid(format!(
                                    "`{}` is not one-hot at step {t}",
                                    spec.name
                                )));
                            }
                        }
                        FeatureKind::Categorical => {
                            let c = spec.width();
                            for row in s.chunks(c) {
                                let ok = row.iter().all(|&x| x == 0.0 || x == 1.0)
                                    && row.iter().sum::<f64>() == 1.0;
                                if !ok {
                                    return Err(invalid(format!(
                                        "`{}` row not one-hot at step {t}",
                                        spec.name
                                    )));
                                }
                            }
                        }
                        FeatureKind::Pointer => {
                            if spec.location == Location::Graph {
                                return Err(invalid("graph-level pointers are unsupported"));
                            }
                            if s.iter().any(|&x| !is_integer_in(x, n)) {
                                return Err(invalid(format!(
                                    "`{}` has an out-of-range pointer at step {t}",
                                    spec.name
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `{algo_id, n, T, features: [{name, stage, location, kind, data}, ...]}`
    /// on a single line.
    pub fn to_json_line(&self) -> String {
        let mut s = format!(
            "{{\"algo_id\":{},\"n\":{},\"T\":{},\"features\":[",
            serde_json::to_string(&self.algo_id).expect("string"),
            self.n,
            self.steps
        );
        for (k, f) in self.features().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let spec = &f.spec;
            s.push_str(&format!(
                "{{\"name\":{},\"stage\":\"{}\",\"location\":\"{}\",\"kind\":\"{}\",",
                serde_json::to_string(&spec.name).expect("string"),
                spec.stage,
                spec.location,
                spec.kind
            ));
            if let Some(c) = spec.num_categories {
                s.push_str(&format!("\"num_categories\":{c},"));
            }
            s.push_str("\"data\":");
            let mut dims = spec.slice_dims(self.n);
            if spec.stage == Stage::Hint {
                dims.insert(0, self.steps);
            }
            write_nested(&mut s, &f.data, &dims);
            s.push('}');
        }
        s.push_str("]}");
        s
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(line)?;
        let algo_id = str_field(&v, "algo_id")?.to_string();
        let n = usize_field(&v, "n")?;
        let steps = usize_field(&v, "T")?;
        let mut t = Trajectory { algo_id, n, steps, inputs: vec![], hints: vec![], outputs: vec![] };
        let feats = field(&v, "features")?
            .as_array()
            .ok_or_else(|| CoreError::Parse("`features` is not a list".into()))?;
        for f in feats {
            let spec = FeatureSpec {
                name: str_field(f, "name")?.to_string(),
                stage: str_field(f, "stage")?.parse()?,
                location: str_field(f, "location")?.parse()?,
                kind: str_field(f, "kind")?.parse()?,
                num_categories: f.get("num_categories").and_then(Value::as_u64).map(|c| c as usize),
            };
            let mut dims = spec.slice_dims(n);
            if spec.stage == Stage::Hint {
                dims.insert(0, steps);
            }
            let data = read_nested(field(f, "data")?, &dims)?;
            let feature = Feature::new(spec, data);
            match feature.spec.stage {
                Stage::Input => t.inputs.push(feature),
                Stage::Hint => t.hints.push(feature),
                Stage::Output => t.outputs.push(feature),
            }
        }
        t.validate()?;
        Ok(t)
    }
}

/// Builder used by the trajectory generators.
#[derive(Debug)]
pub(crate) struct TrajBuilder {
    traj: Trajectory,
}

impl TrajBuilder {
    pub fn new(algo: Algorithm, n: usize) -> Self {
        Self {
            traj: Trajectory {
                algo_id: algo.id().to_string(),
                n,
                steps: 0,
                inputs: vec![],
                hints: vec![],
                outputs: vec![],
            },
        }
    }

    pub fn input(&mut self, name: &str, loc: Location, kind: FeatureKind, data: Vec<f64>) {
        let spec = FeatureSpec::new(name, Stage::Input, loc, kind);
        self.traj.inputs.push(Feature::new(spec, data));
    }

    pub fn output(&mut self, name: &str, loc: Location, kind: FeatureKind, data: Vec<f64>) {
        let spec = FeatureSpec::new(name, Stage::Output, loc, kind);
        self.traj.outputs.push(Feature::new(spec, data));
    }

    /// Declares a hint; its data is appended per step with [`Self::push_hint`].
    pub fn hint(&mut self, name: &str, loc: Location, kind: FeatureKind) {
        let spec = FeatureSpec::new(name, Stage::Hint, loc, kind);
        self.traj.hints.push(Feature::new(spec, vec![]));
    }

    pub fn push_hint(&mut self, name: &str, slice: &[f64]) {
        let f = self
            .traj
            .hints
            .iter_mut()
            .find(|f| f.spec.name == name)
            .expect("hint declared before use");
        f.data.extend_from_slice(slice);
    }

    /// Closes one time step.
    pub fn step(&mut self) {
        self.traj.steps += 1;
    }

    pub fn finish(self) -> Trajectory {
        debug_assert!(self.traj.validate().is_ok(), "{:?}", self.traj.validate());
        self.traj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_needs_two_categories() {
        let mut spec = FeatureSpec::categorical("c", Stage::Input, Location::Node, 1);
        assert!(spec.check().is_err());
        spec.num_categories = Some(3);
        assert!(spec.check().is_ok());
        assert_eq!(spec.slice_dims(4), vec![4, 3]);
    }

    #[test]
    fn validation_catches_bad_mask_one() {
        let mut t = Trajectory {
            algo_id: "x".into(),
            n: 3,
            steps: 0,
            inputs: vec![Feature::new(
                FeatureSpec::new("s", Stage::Input, Location::Node, FeatureKind::MaskOne),
                vec![1.0, 1.0, 0.0],
            )],
            hints: vec![],
            outputs: vec![],
        };
        assert!(t.validate().is_err());
        t.inputs[0].data = vec![0.0, 1.0, 0.0];
        assert!(t.validate().is_ok());
    }

    #[test]
    fn validation_catches_bad_pointer() {
        let t = Trajectory {
            algo_id: "x".into(),
            n: 2,
            steps: 0,
            inputs: vec![],
            hints: vec![],
            outputs: vec![Feature::new(
                FeatureSpec::new("pi", Stage::Output, Location::Node, FeatureKind::Pointer),
                vec![0.0, 2.0],
            )],
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn enum_strings_round_trip() {
        for k in [
            FeatureKind::Scalar,
            FeatureKind::Categorical,
            FeatureKind::Mask,
            FeatureKind::MaskOne,
            FeatureKind::Pointer,
        ] {
            assert_eq!(k.as_str().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("nope".parse::<Stage>().is_err());
    }
}
