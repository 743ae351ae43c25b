use serde::{Deserialize, Serialize};

use super::path::RegulatedPath;
use crate::error::{Error, Result};
use crate::levy::ScenarioTree;

/// Base shape of a barrier before right jumps are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum BarrierFamily {
    Constant {
        c: f64,
    },
    /// `a + b t`.
    Linear {
        a: f64,
        b: f64,
    },
    /// `φ(L_t) = Σ_i coeffs[i] L_t^i`, optionally floored.
    LevyPoly {
        coeffs: Vec<f64>,
        #[serde(default)]
        floor: Option<f64>,
    },
}

impl BarrierFamily {
    fn base(&self, t: f64, levy: f64) -> f64 {
        match self {
            BarrierFamily::Constant { c } => *c,
            BarrierFamily::Linear { a, b } => a + b * t,
            BarrierFamily::LevyPoly { coeffs, floor } => {
                let v = coeffs.iter().rev().fold(0.0, |acc, c| acc * levy + c);
                floor.map_or(v, |f| v.max(f))
            }
        }
    }

    pub fn depends_on_levy(&self) -> bool {
        matches!(self, BarrierFamily::LevyPoly { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RightJump {
    pub t: f64,
    pub delta_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    #[serde(flatten)]
    pub family: BarrierFamily,
    #[serde(default)]
    pub right_jumps: Vec<RightJump>,
    /// Replaces the last value, which doubles as the terminal condition.
    #[serde(default)]
    pub terminal: Option<f64>,
}

impl BarrierSpec {
    pub fn new(family: BarrierFamily) -> Self {
        Self {
            family,
            right_jumps: Vec::new(),
            terminal: None,
        }
    }

    pub fn with_jump(mut self, t: f64, delta_plus: f64) -> Self {
        self.right_jumps.push(RightJump { t, delta_plus });
        self
    }

    pub fn with_terminal(mut self, terminal: f64) -> Self {
        self.terminal = Some(terminal);
        self
    }

    /// Same barrier moved down by `s` everywhere, terminal included.
    pub fn shifted(&self, s: f64) -> Self {
        let family = match &self.family {
            BarrierFamily::Constant { c } => BarrierFamily::Constant { c: c + s },
            BarrierFamily::Linear { a, b } => BarrierFamily::Linear { a: a + s, b: *b },
            BarrierFamily::LevyPoly { coeffs, floor } => {
                let mut coeffs = coeffs.clone();
                if coeffs.is_empty() {
                    coeffs.push(0.0);
                }
                coeffs[0] += s;
                BarrierFamily::LevyPoly {
                    coeffs,
                    floor: floor.map(|f| f + s),
                }
            }
        };
        Self {
            family,
            right_jumps: self.right_jumps.clone(),
            terminal: self.terminal.map(|t| t + s),
        }
    }
}

/// Barrier values on every lattice node: `ξ(t_k)` and `ξ(t_k+)`.
///
/// Along any lattice path the node values form a [`RegulatedPath`].
#[derive(Debug, Clone)]
pub struct Barrier {
    values: Vec<Vec<f64>>,
    right_limits: Vec<Vec<f64>>,
}

impl Barrier {
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, k: usize, node: usize) -> f64 {
        self.values[k][node]
    }

    pub fn right_limit(&self, k: usize, node: usize) -> f64 {
        self.right_limits[k][node]
    }

    pub fn right_jump(&self, k: usize, node: usize) -> f64 {
        self.right_limits[k][node] - self.values[k][node]
    }

    /// Whether the node belongs to the stopping-time array of level `n`.
    pub fn in_jump_array(&self, k: usize, node: usize, n: u64) -> bool {
        k < self.steps() && self.right_jump(k, node) < -1.0 / n as f64
    }

    /// Path of the barrier along a sequence of nodes, one per grid time.
    pub fn path_along(&self, tree: &ScenarioTree, nodes: &[usize]) -> Result<RegulatedPath> {
        if nodes.len() != self.values.len() {
            return Err(Error::invalid("node sequence must cover every grid time"));
        }
        RegulatedPath::new(
            tree.grid().to_vec(),
            nodes.iter().enumerate().map(|(k, &i)| self.values[k][i]).collect(),
            nodes
                .iter()
                .enumerate()
                .map(|(k, &i)| self.right_limits[k][i])
                .collect(),
        )
    }

    /// Path along the all-no-jump branch; for barriers that ignore the jump
    /// process this is the barrier itself.
    pub fn quiet_path(&self, tree: &ScenarioTree) -> RegulatedPath {
        let mut nodes = vec![0usize];
        for k in 0..tree.steps() {
            nodes.push(tree.child(k, nodes[k], 0));
        }
        self.path_along(tree, &nodes).expect("one node per grid time")
    }

    pub(crate) fn from_fn(
        tree: &ScenarioTree,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Barrier {
        let mut values = Vec::with_capacity(tree.steps() + 1);
        let mut right_limits = Vec::with_capacity(tree.steps() + 1);
        for k in 0..=tree.steps() {
            let (v, r): (Vec<f64>, Vec<f64>) = (0..tree.nodes_at(k)).map(|i| f(k, i)).unzip();
            values.push(v);
            right_limits.push(r);
        }
        let last = values.len() - 1;
        right_limits[last] = values[last].clone();
        Barrier {
            values,
            right_limits,
        }
    }
}

fn grid_index(tree: &ScenarioTree, t: f64) -> Result<usize> {
    let pos = t / tree.dt();
    let k = pos.round();
    if !t.is_finite() || (pos - k).abs() > 1e-9 || k < 0.0 {
        return Err(Error::invalid(format!(
            "right jump time {t} is not on the grid (step {})",
            tree.dt()
        )));
    }
    let k = k as usize;
    if k >= tree.steps() {
        return Err(Error::invalid(format!(
            "right jump time {t} must lie in [0, T)"
        )));
    }
    Ok(k)
}

/// Evaluate a barrier spec on every node of the tree.
///
/// Right jumps are persistent: a jump `Δ` at `t_j` moves `ξ(t_j+)` and every
/// later value by `Δ`, so the jump list is exactly the purely jumping part of
/// the barrier.
pub fn make_barrier(spec: &BarrierSpec, tree: &ScenarioTree) -> Result<Barrier> {
    let n = tree.steps();
    let mut jump_at = vec![0.0; n + 1];
    for j in &spec.right_jumps {
        if !j.delta_plus.is_finite() {
            return Err(Error::invalid("right jump size must be finite"));
        }
        jump_at[grid_index(tree, j.t)?] += j.delta_plus;
    }
    // before[k] = Σ_{t_j < t_k} Δ_j
    let mut before = vec![0.0; n + 1];
    for k in 1..=n {
        before[k] = before[k - 1] + jump_at[k - 1];
    }

    let barrier = Barrier::from_fn(tree, |k, node| {
        let t = tree.time(k);
        let base = spec.family.base(t, tree.levy_value(k, node));
        if k == n {
            let v = spec.terminal.unwrap_or(base + before[k]);
            (v, v)
        } else {
            (base + before[k], base + before[k] + jump_at[k])
        }
    });
    if barrier
        .values
        .iter()
        .chain(&barrier.right_limits)
        .flatten()
        .any(|v| !v.is_finite())
    {
        return Err(Error::invalid("barrier evaluates to a non-finite value"));
    }
    Ok(barrier)
}
