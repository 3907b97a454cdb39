//! On-disk instance format: a JSON document holding a weighted graph
//! plus the optional extras the individual quantities need (a gold
//! tree, a second weight table for KL, sparse features for GE).

use serde::{Deserialize, Serialize};
use treexp::{LabeledGraph64, RootConstraint};
use treexp::{EdgeFunction64, Graph64, Tree};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub root_constraint: String,
    pub weights: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<usize>,
    /// Indexed `[i][j][y]`; collapsed over labels before computation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labeled_weights: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gold: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_weights: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ge: Option<GeBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeBlock {
    /// Sparse triplets `(head, dependent, coordinate, value)`.
    pub features: Vec<(usize, usize, usize, f64)>,
    pub target: Vec<f64>,
}

pub fn parse_constraint(s: &str) -> Result<RootConstraint, String> {
    match s {
        "single" => Ok(RootConstraint::SingleRoot),
        "multi" => Ok(RootConstraint::MultiRoot),
        other => Err(format!(
            "root_constraint must be \"single\" or \"multi\", got {other:?}"
        )),
    }
}

pub fn constraint_name(c: RootConstraint) -> &'static str {
    match c {
        RootConstraint::SingleRoot => "single",
        RootConstraint::MultiRoot => "multi",
    }
}

impl InstanceFile {
    pub fn to_graph(&self) -> Result<Graph64, String> {
        let c = parse_constraint(&self.root_constraint)?;
        if self.weights.len() != self.n + 1 {
            return Err(format!(
                "weights must be a {0}x{0} table for n = {1}",
                self.n + 1,
                self.n
            ));
        }
        if let (Some(labels), Some(lw)) = (self.labels, &self.labeled_weights) {
            let mut lg = LabeledGraph64::new(self.n, labels, c);
            for i in 0..=self.n {
                for j in 1..=self.n {
                    if i == j {
                        continue;
                    }
                    let row = lw
                        .get(i)
                        .and_then(|r| r.get(j))
                        .ok_or("labeled_weights table too small")?;
                    if row.len() != labels {
                        return Err("labeled_weights entry has wrong label count".into());
                    }
                    for (y, &w) in row.iter().enumerate() {
                        lg.set_weight(i, j, y, w);
                    }
                }
            }
            lg.validate().map_err(|e| e.to_string())?;
            let collapsed = treexp::laplacian::collapse_labels(&lg);
            // The dense table must agree with the collapsed labels.
            for (i, j) in collapsed.edges() {
                let dense = self.weights[i][j];
                if (dense - collapsed.weight(i, j)).abs() > 1e-9 * dense.abs().max(1.0) {
                    return Err(format!(
                        "weights[{i}][{j}] disagrees with the label sum"
                    ));
                }
            }
            return Ok(collapsed);
        }
        let g = Graph64::from_weights(self.weights.clone(), c).map_err(|e| e.to_string())?;
        Ok(g)
    }

    pub fn to_q_graph(&self) -> Result<Option<Graph64>, String> {
        let c = parse_constraint(&self.root_constraint)?;
        match &self.q_weights {
            None => Ok(None),
            Some(q) => Graph64::from_weights(q.clone(), c)
                .map(Some)
                .map_err(|e| e.to_string()),
        }
    }

    pub fn to_gold(&self) -> Result<Option<Tree>, String> {
        match &self.gold {
            None => Ok(None),
            Some(parents) => {
                if parents.len() != self.n {
                    return Err("gold parent array length must equal n".into());
                }
                Ok(Some(Tree::new(parents.clone())))
            }
        }
    }

    pub fn to_ge(&self) -> Result<Option<treexp::quantities::GESpec<f64>>, String> {
        match &self.ge {
            None => Ok(None),
            Some(block) => {
                let dim = block.target.len();
                let mut features = EdgeFunction64::new(dim);
                for &(i, j, coord, value) in &block.features {
                    if i > self.n || j == 0 || j > self.n || i == j {
                        return Err(format!("ge feature on illegal edge ({i},{j})"));
                    }
                    if coord >= dim {
                        return Err(format!(
                            "ge feature coordinate {coord} out of range for target length {dim}"
                        ));
                    }
                    features.add(i, j, coord, value);
                }
                Ok(Some(treexp::quantities::GESpec {
                    features,
                    target: block.target.clone(),
                }))
            }
        }
    }
}

/// Canonical serialization used by `gen` and the round-trip guarantee.
pub fn to_canonical_json(inst: &InstanceFile) -> String {
    let mut s = serde_json::to_string_pretty(inst).expect("instance serialization");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate_instance;

    #[test]
    fn round_trip_is_byte_identical() {
        for seed in [0u64, 1, 42] {
            for c in [RootConstraint::MultiRoot, RootConstraint::SingleRoot] {
                let inst = generate_instance(seed, 4, c);
                let text = to_canonical_json(&inst);
                let reparsed: InstanceFile = serde_json::from_str(&text).unwrap();
                assert_eq!(text, to_canonical_json(&reparsed));
            }
        }
    }

    #[test]
    fn generated_instance_decodes_and_validates() {
        let inst = generate_instance(9, 4, RootConstraint::SingleRoot);
        let g = inst.to_graph().unwrap();
        assert_eq!(g.n(), 4);
        let z = treexp::laplacian::partition_function(&g);
        let brute = treexp::graph::brute_z(&g).unwrap();
        assert!(treexp::graph::rel_close(z, brute, 1e-10));
        let gold = inst.to_gold().unwrap().unwrap();
        assert!(gold.is_valid(4, RootConstraint::SingleRoot));
        assert!(inst.to_q_graph().unwrap().is_some());
        assert!(inst.to_ge().unwrap().is_some());
    }

    #[test]
    fn rejects_malformed_tables() {
        let mut inst = generate_instance(3, 3, RootConstraint::MultiRoot);
        inst.weights.pop();
        assert!(inst.to_graph().is_err());
        let inst = InstanceFile {
            root_constraint: "both".into(),
            ..generate_instance(3, 3, RootConstraint::MultiRoot)
        };
        assert!(inst.to_graph().is_err());
    }
}
