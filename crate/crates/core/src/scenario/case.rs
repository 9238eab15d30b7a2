use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use super::ScenarioError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    /// Series susceptance, per unit on the case MVA base.
    pub b_pu: f64,
    pub f_max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    pub g_min_mw: f64,
    pub g_max_mw: f64,
    /// Marginal cost, AUD/MWh.
    pub cost: f64,
    pub ramp_mw_per_h: f64,
    pub tech: String,
}

/// Transmission network: buses, lines, generators, the reference bus and the
/// bus hosting the data center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub buses: Vec<u32>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub ref_bus: u32,
    pub aidc_bus: u32,
    /// Static share of the regional demand assigned to each bus.
    pub load_share: BTreeMap<u32, f64>,
    pub mva_base: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl NetworkCase {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let case: NetworkCase =
            serde_json::from_str(text).map_err(|e| ScenarioError::parse(origin, &e))?;
        let issues = case.check();
        if issues.is_empty() {
            Ok(case)
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("case serializes");
        s.push('\n');
        s
    }

    /// The bundled IEEE 39-bus case (nominal ratings).
    pub fn ieee39() -> Self {
        Self::from_json(include_str!("../../data/ieee39.json"), "builtin:ieee39")
            .expect("bundled case is valid")
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| *b == id)
    }

    pub fn aidc_index(&self) -> usize {
        self.bus_index(self.aidc_bus).expect("validated case")
    }

    pub fn ref_index(&self) -> usize {
        self.bus_index(self.ref_bus).expect("validated case")
    }

    /// Load shares in bus order.
    pub fn share_vector(&self) -> Vec<f64> {
        self.buses
            .iter()
            .map(|b| self.load_share.get(b).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn generator_bus_indices(&self) -> Vec<usize> {
        self.generators
            .iter()
            .map(|g| self.bus_index(g.bus).expect("validated case"))
            .collect()
    }

    pub fn max_cost(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.cost)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy with every thermal rating multiplied by `scale`.
    pub fn with_rating_scale(&self, scale: f64) -> Self {
        let mut c = self.clone();
        for l in &mut c.lines {
            l.f_max_mw *= scale;
        }
        c
    }

    /// Every violated structural invariant, as human-readable messages.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let index: HashMap<u32, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (*b, i))
            .collect();
        if index.len() != self.buses.len() {
            issues.push("bus ids are not unique".to_string());
        }
        if self.buses.is_empty() {
            issues.push("case has no buses".to_string());
        }
        if !index.contains_key(&self.ref_bus) {
            issues.push(format!("reference bus {} does not exist", self.ref_bus));
        }
        if !index.contains_key(&self.aidc_bus) {
            issues.push(format!("aidc bus {} does not exist", self.aidc_bus));
        }
        if !(self.mva_base > 0.0) {
            issues.push(format!("mva_base must be positive, got {}", self.mva_base));
        }
        for (k, l) in self.lines.iter().enumerate() {
            for end in [l.from, l.to] {
                if !index.contains_key(&end) {
                    issues.push(format!("line {k} endpoint {end} does not exist"));
                }
            }
            if l.from == l.to {
                issues.push(format!("line {k} is a self-loop at bus {}", l.from));
            }
            if !(l.f_max_mw > 0.0) {
                issues.push(format!("line {k} rating must be positive, got {}", l.f_max_mw));
            }
            if !(l.b_pu.is_finite() && l.b_pu != 0.0) {
                issues.push(format!("line {k} susceptance must be finite and nonzero"));
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if !index.contains_key(&g.bus) {
                issues.push(format!("generator {k} bus {} does not exist", g.bus));
            }
            if !(g.g_min_mw <= g.g_max_mw) {
                issues.push(format!(
                    "generator {k} has g_min {} above g_max {}",
                    g.g_min_mw, g.g_max_mw
                ));
            }
            if !(g.ramp_mw_per_h >= 0.0) {
                issues.push(format!("generator {k} ramp must be nonnegative"));
            }
            if !g.cost.is_finite() {
                issues.push(format!("generator {k} cost must be finite"));
            }
        }
        let mut total = 0.0;
        for (bus, share) in &self.load_share {
            if !index.contains_key(bus) {
                issues.push(format!("load share names unknown bus {bus}"));
            }
            if !(*share >= 0.0) {
                issues.push(format!("load share at bus {bus} is negative"));
            }
            total += share;
        }
        if (total - 1.0).abs() > 1e-9 {
            issues.push(format!("load shares sum to {total}, expected 1"));
        }
        if !self.buses.is_empty() && !self.is_connected(&index) {
            issues.push("network graph is not connected".to_string());
        }
        issues
    }

    fn is_connected(&self, index: &HashMap<u32, usize>) -> bool {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            if let (Some(&a), Some(&b)) = (index.get(&l.from), index.get(&l.to)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn load_network_case(path: impl AsRef<Path>) -> Result<NetworkCase, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    NetworkCase::from_json(&text, &path.display().to_string())
}
