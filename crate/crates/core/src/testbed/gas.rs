//! Steady isothermal gas network with pressure control valves.
//!
//! Unknowns are squared pressures `pi = p^2` (bar^2) at every node except
//! the supply and a flow `q` on every edge, positive from `from` to `to`.
//! Equations:
//! - mass balance at every non-supply node: inflow - outflow - draw = 0;
//! - pipe: `pi_from - pi_to - c q|q| = 0`;
//! - valve: `pi_to - min(pi_from, p_set^2) = 0`, active iff `pi_from > p_set^2`.
//!
//! The valve law is only piecewise smooth, so the solver is a semismooth
//! Newton method with backtracking. The region label of a solution is the
//! bit set of active valves in declaration order.
//!
//! # Network files
//!
//! One statement per line, `#` starts a comment, tokens are separated by
//! whitespace and parameters are `key=value` with decimal values:
//!
//! ```text
//! node <name> supply pressure=<bar>
//! node <name> demand draw=<flow>
//! node <name> junction
//! pipe <name> <from> <to> resistance=<bar^2 per flow^2>
//! valve <name> <from> <to> pset=<bar>
//! bind <k> <element>.<param> <low> <high>
//! qoi <node>
//! ```
//!
//! `bind` maps coordinate `x_k` affinely onto `[low, high]` for one numeric
//! parameter (`pressure`, `draw`, `resistance` or `pset`). Coordinates must
//! be bound as `0..d` without gaps. The QoI is the pressure in bar at the
//! named node.

use std::collections::HashMap;

use thiserror::Error;

use crate::linalg::Lu;
use crate::oracle::{Evaluation, Oracle, OracleError};
use crate::samples::RegionLabel;

pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const MAX_HALVINGS: usize = 30;
/// Convergence bound on the scaled residual (mass rows in flow units, pipe
/// and valve rows relative to the supply's squared pressure).
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Keeps the pipe-law derivative `2c|q|` nonzero at `q = 0`.
const FLOW_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GasError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("parameter point has dimension {got}, network has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Newton solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolveFailure { iterations: usize, residual: f64 },
    #[error("infeasible network: squared pressure {value:.6e} at node {node}")]
    InfeasibleNetwork { node: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Supply { pressure: f64 },
    Demand { draw: f64 },
    Junction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeKind {
    Pipe { resistance: f64 },
    Valve { pset: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node(usize),
    Edge(usize),
}

/// Affine map of one coordinate onto a physical parameter range.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub target: Target,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasNetwork {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub bindings: Vec<Binding>,
    pub qoi: usize,
}

/// Converged state: pressures in bar and edge flows.
#[derive(Debug, Clone, PartialEq)]
pub struct GasSolution {
    pub pressure: Vec<f64>,
    pub flow: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
}

impl GasSolution {
    /// Bit `k` is set iff the `k`-th valve is active.
    pub fn label(&self) -> RegionLabel {
        RegionLabel(
            self.active
                .iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .fold(0u64, |acc, (k, _)| acc | 1 << k),
        )
    }
}

/// The bundled network: supply pressure and one demand are uncertain. The
/// downstream valve always activates before the upstream one, so the two
/// activation curves never cross in the parameter square; the QoI kinks only
/// where the downstream valve switches.
pub const BUNDLED_NETWORK: &str = "\
# supply, two valve stages on the main line and a branch
node S supply pressure=45
node J1 junction
node J2 junction
node J3 junction
node J4 junction
node J5 junction
node D1 demand draw=10
node D2 demand draw=10
node D3 demand draw=5
pipe P1 S J1 resistance=0.5
valve V1 J1 J2 pset=45
pipe P2 J2 J3 resistance=0.3
pipe P3 J3 D1 resistance=0.4
pipe P4 J3 J4 resistance=1.0
valve V2 J4 J5 pset=35
pipe P5 J5 D2 resistance=0.5
pipe P6 J3 D3 resistance=0.4
bind 0 S.pressure 35 55
bind 1 D2.draw 5 15
qoi D2
";

fn parse_error(line: usize, message: impl Into<String>) -> GasError {
    GasError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(line: usize, text: &str) -> Result<f64, GasError> {
    let v: f64 = text
        .parse()
        .map_err(|_| parse_error(line, format!("not a number: {text:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("not a finite number: {text:?}")));
    }
    Ok(v)
}

/// Parses `key=value` tokens, rejecting keys outside `allowed` and repeats.
fn parse_params(line: usize, tokens: &[&str], allowed: &[&str]) -> Result<HashMap<String, f64>, GasError> {
    let mut out = HashMap::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected key=value, got {tok:?}")))?;
        if !allowed.contains(&k) {
            return Err(parse_error(line, format!("unknown key {k:?}")));
        }
        if out.insert(k.to_string(), parse_number(line, v)?).is_some() {
            return Err(parse_error(line, format!("repeated key {k:?}")));
        }
    }
    Ok(out)
}

fn required(line: usize, params: &HashMap<String, f64>, key: &str) -> Result<f64, GasError> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| parse_error(line, format!("missing {key}=")))
}

impl GasNetwork {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_NETWORK).expect("bundled network is valid")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, GasError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GasError::InvalidNetwork(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, GasError> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut node_ids: HashMap<String, usize> = HashMap::new();
        let mut edge_ids: HashMap<String, usize> = HashMap::new();
        let mut binds: Vec<(usize, usize, String, f64, f64)> = Vec::new();
        let mut qoi: Option<(usize, String)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            let Some(&keyword) = tokens.first() else {
                continue;
            };
            match keyword {
                "node" => {
                    if tokens.len() < 3 {
                        return Err(parse_error(line, "expected: node <name> <kind> [key=value]"));
                    }
                    let name = tokens[1].to_string();
                    if node_ids.contains_key(&name) || edge_ids.contains_key(&name) {
                        return Err(parse_error(line, format!("duplicate name {name:?}")));
                    }
                    let kind = match tokens[2] {
                        "supply" => {
                            let p = parse_params(line, &tokens[3..], &["pressure"])?;
                            NodeKind::Supply {
                                pressure: required(line, &p, "pressure")?,
                            }
                        }
                        "demand" => {
                            let p = parse_params(line, &tokens[3..], &["draw"])?;
                            NodeKind::Demand {
                                draw: required(line, &p, "draw")?,
                            }
                        }
                        "junction" => {
                            parse_params(line, &tokens[3..], &[])?;
                            NodeKind::Junction
                        }
                        other => return Err(parse_error(line, format!("unknown node kind {other:?}"))),
                    };
                    node_ids.insert(name.clone(), nodes.len());
                    nodes.push(Node { name, kind });
                }
                "pipe" | "valve" => {
                    if tokens.len() < 5 {
                        return Err(parse_error(line, format!("expected: {keyword} <name> <from> <to> key=value")));
                    }
                    let name = tokens[1].to_string();
                    if node_ids.contains_key(&name) || edge_ids.contains_key(&name) {
                        return Err(parse_error(line, format!("duplicate name {name:?}")));
                    }
                    let endpoint = |t: &str| {
                        node_ids
                            .get(t)
                            .copied()
                            .ok_or_else(|| parse_error(line, format!("unknown node {t:?}")))
                    };
                    let (from, to) = (endpoint(tokens[2])?, endpoint(tokens[3])?);
                    if from == to {
                        return Err(parse_error(line, "edge endpoints must differ"));
                    }
                    let kind = if keyword == "pipe" {
                        let p = parse_params(line, &tokens[4..], &["resistance"])?;
                        EdgeKind::Pipe {
                            resistance: required(line, &p, "resistance")?,
                        }
                    } else {
                        let p = parse_params(line, &tokens[4..], &["pset"])?;
                        EdgeKind::Valve {
                            pset: required(line, &p, "pset")?,
                        }
                    };
                    edge_ids.insert(name.clone(), edges.len());
                    edges.push(Edge { name, from, to, kind });
                }
                "bind" => {
                    if tokens.len() != 5 {
                        return Err(parse_error(line, "expected: bind <k> <element>.<param> <low> <high>"));
                    }
                    let k: usize = tokens[1]
                        .parse()
                        .map_err(|_| parse_error(line, format!("bad coordinate index {:?}", tokens[1])))?;
                    binds.push((
                        line,
                        k,
                        tokens[2].to_string(),
                        parse_number(line, tokens[3])?,
                        parse_number(line, tokens[4])?,
                    ));
                }
                "qoi" => {
                    if tokens.len() != 2 {
                        return Err(parse_error(line, "expected: qoi <node>"));
                    }
                    if qoi.is_some() {
                        return Err(parse_error(line, "qoi given twice"));
                    }
                    qoi = Some((line, tokens[1].to_string()));
                }
                other => return Err(parse_error(line, format!("unknown statement {other:?}"))),
            }
        }
        let (qoi_line, qoi_name) = qoi.ok_or_else(|| GasError::InvalidNetwork("no qoi statement".into()))?;
        let qoi = *node_ids
            .get(&qoi_name)
            .ok_or_else(|| parse_error(qoi_line, format!("unknown node {qoi_name:?}")))?;
        binds.sort_by_key(|b| b.1);
        let mut bindings = Vec::with_capacity(binds.len());
        for (k, (line, index, target, low, high)) in binds.into_iter().enumerate() {
            if index != k {
                return Err(parse_error(line, format!("coordinate {index} bound out of order or twice; expected {k}")));
            }
            let (element, param) = target
                .split_once('.')
                .ok_or_else(|| parse_error(line, format!("expected <element>.<param>, got {target:?}")))?;
            let target = if let Some(&n) = node_ids.get(element) {
                let ok = matches!(
                    (nodes[n].kind, param),
                    (NodeKind::Supply { .. }, "pressure") | (NodeKind::Demand { .. }, "draw")
                );
                if !ok {
                    return Err(parse_error(line, format!("node {element:?} has no parameter {param:?}")));
                }
                Target::Node(n)
            } else if let Some(&e) = edge_ids.get(element) {
                let ok = matches!(
                    (edges[e].kind, param),
                    (EdgeKind::Pipe { .. }, "resistance") | (EdgeKind::Valve { .. }, "pset")
                );
                if !ok {
                    return Err(parse_error(line, format!("edge {element:?} has no parameter {param:?}")));
                }
                Target::Edge(e)
            } else {
                return Err(parse_error(line, format!("unknown element {element:?}")));
            };
            if bindings.iter().any(|b: &Binding| b.target == target) {
                return Err(parse_error(line, format!("{element}.{param} bound twice")));
            }
            bindings.push(Binding { target, low, high });
        }
        let net = GasNetwork {
            nodes,
            edges,
            bindings,
            qoi,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), GasError> {
        let supplies = self
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Supply { .. }))
            .count();
        if supplies != 1 {
            return Err(GasError::InvalidNetwork(format!("expected exactly one supply node, found {supplies}")));
        }
        if self.bindings.is_empty() {
            return Err(GasError::InvalidNetwork("no uncertain parameter is bound".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for e in &self.edges {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if a == v && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|&s| !s) {
            return Err(GasError::InvalidNetwork(format!("node {} is not connected", self.nodes[i].name)));
        }
        for e in &self.edges {
            match e.kind {
                EdgeKind::Pipe { resistance } if resistance <= 0.0 => {
                    return Err(GasError::InvalidNetwork(format!("pipe {} needs resistance > 0", e.name)));
                }
                EdgeKind::Valve { pset } if pset <= 0.0 => {
                    return Err(GasError::InvalidNetwork(format!("valve {} needs pset > 0", e.name)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.bindings.len()
    }

    pub fn num_valves(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e.kind, EdgeKind::Valve { .. }))
            .count()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Copy of the network with the bound parameters set from `x`.
    pub fn instantiate(&self, x: &[f64]) -> Result<GasNetwork, GasError> {
        if x.len() != self.dimension() {
            return Err(GasError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let mut net = self.clone();
        for (b, &t) in self.bindings.iter().zip(x) {
            let v = b.low + t * (b.high - b.low);
            match b.target {
                Target::Node(n) => match &mut net.nodes[n].kind {
                    NodeKind::Supply { pressure } => *pressure = v,
                    NodeKind::Demand { draw } => *draw = v,
                    NodeKind::Junction => unreachable!("junctions have no parameters"),
                },
                Target::Edge(e) => match &mut net.edges[e].kind {
                    EdgeKind::Pipe { resistance } => *resistance = v,
                    EdgeKind::Valve { pset } => *pset = v,
                },
            }
        }
        Ok(net)
    }

    /// Solves the network at parameter point `x`.
    pub fn solve(&self, x: &[f64]) -> Result<GasSolution, GasError> {
        self.instantiate(x)?.solve_fixed()
    }

    /// QoI pressure in bar and the valve-activity label at `x`.
    pub fn qoi(&self, x: &[f64]) -> Result<(f64, RegionLabel), GasError> {
        let s = self.solve(x)?;
        Ok((s.pressure[self.qoi], s.label()))
    }

    fn supply(&self) -> (usize, f64) {
        self.nodes
            .iter()
            .enumerate()
            .find_map(|(i, n)| match n.kind {
                NodeKind::Supply { pressure } => Some((i, pressure)),
                _ => None,
            })
            .expect("validated network has a supply")
    }

    /// Solves with the parameters stored in the network.
    pub fn solve_fixed(&self) -> Result<GasSolution, GasError> {
        let sys = System::new(self);
        let mut z = sys.initial_guess();
        let mut f = sys.residual(&z);
        let mut norm = l2(&f);
        for it in 0..MAX_NEWTON_ITERATIONS {
            if max_abs(&f) <= RESIDUAL_TOL {
                return sys.finish(self, &z, it);
            }
            let jac = sys.jacobian(&z);
            let lu = Lu::new(&jac, sys.size);
            let step = lu
                .solve(&f)
                .filter(|s| s.iter().all(|v| v.is_finite()))
                .ok_or(GasError::SolveFailure {
                    iterations: it,
                    residual: max_abs(&f),
                })?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a - lambda * s).collect();
                let ft = sys.residual(&trial);
                let nt = l2(&ft);
                if nt < norm || max_abs(&ft) <= RESIDUAL_TOL {
                    z = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(GasError::SolveFailure {
                    iterations: it,
                    residual: max_abs(&f),
                });
            }
        }
        if max_abs(&f) <= RESIDUAL_TOL {
            return sys.finish(self, &z, MAX_NEWTON_ITERATIONS);
        }
        Err(GasError::SolveFailure {
            iterations: MAX_NEWTON_ITERATIONS,
            residual: max_abs(&f),
        })
    }

    /// Net mass imbalance `inflow - outflow - draw` at every non-supply node.
    pub fn mass_imbalance(&self, flow: &[f64]) -> Vec<f64> {
        let (supply, _) = self.supply();
        let mut bal = vec![0.0; self.nodes.len()];
        for (e, &q) in self.edges.iter().zip(flow) {
            bal[e.to] += q;
            bal[e.from] -= q;
        }
        for (b, n) in bal.iter_mut().zip(&self.nodes) {
            if let NodeKind::Demand { draw } = n.kind {
                *b -= draw;
            }
        }
        bal[supply] = 0.0;
        bal
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

/// Unknown layout: squared pressures of non-supply nodes, then edge flows.
struct System<'a> {
    net: &'a GasNetwork,
    supply: usize,
    pi_supply: f64,
    /// Position of each node's squared pressure in the unknown vector.
    slot: Vec<Option<usize>>,
    n_pi: usize,
    size: usize,
}

impl<'a> System<'a> {
    fn new(net: &'a GasNetwork) -> Self {
        let (supply, p) = net.supply();
        let mut slot = vec![None; net.nodes.len()];
        let mut k = 0;
        for (i, s) in slot.iter_mut().enumerate() {
            if i != supply {
                *s = Some(k);
                k += 1;
            }
        }
        Self {
            net,
            supply,
            pi_supply: p * p,
            slot,
            n_pi: k,
            size: k + net.edges.len(),
        }
    }

    fn initial_guess(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.size];
        z[..self.n_pi].iter_mut().for_each(|v| *v = self.pi_supply);
        z
    }

    fn pi(&self, z: &[f64], node: usize) -> f64 {
        match self.slot[node] {
            Some(k) => z[k],
            None => self.pi_supply,
        }
    }

    fn residual(&self, z: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.size];
        let flows = &z[self.n_pi..];
        let bal = self.net.mass_imbalance(flows);
        for (node, b) in bal.iter().enumerate() {
            if let Some(k) = self.slot[node] {
                f[k] = *b;
            }
        }
        for (j, e) in self.net.edges.iter().enumerate() {
            let (a, b) = (self.pi(z, e.from), self.pi(z, e.to));
            let q = flows[j];
            f[self.n_pi + j] = match e.kind {
                EdgeKind::Pipe { resistance } => a - b - resistance * q * q.abs(),
                EdgeKind::Valve { pset } => b - a.min(pset * pset),
            } / self.pi_supply;
        }
        f
    }

    /// An element of the generalized Jacobian; at a valve switching point
    /// the inactive branch is used.
    fn jacobian(&self, z: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut j = vec![0.0; n * n];
        for (e_idx, e) in self.net.edges.iter().enumerate() {
            let col = self.n_pi + e_idx;
            if let Some(k) = self.slot[e.to] {
                j[k * n + col] += 1.0;
            }
            if let Some(k) = self.slot[e.from] {
                j[k * n + col] -= 1.0;
            }
            let row = (self.n_pi + e_idx) * n;
            let s = 1.0 / self.pi_supply;
            match e.kind {
                EdgeKind::Pipe { resistance } => {
                    if let Some(k) = self.slot[e.from] {
                        j[row + k] += s;
                    }
                    if let Some(k) = self.slot[e.to] {
                        j[row + k] -= s;
                    }
                    let q = z[col];
                    j[row + col] = -s * resistance * (2.0 * q.abs() + FLOW_REGULARIZATION);
                }
                EdgeKind::Valve { pset } => {
                    if let Some(k) = self.slot[e.to] {
                        j[row + k] += s;
                    }
                    let active = self.pi(z, e.from) > pset * pset;
                    if !active {
                        if let Some(k) = self.slot[e.from] {
                            j[row + k] -= s;
                        }
                    }
                }
            }
        }
        j
    }

    fn finish(&self, net: &GasNetwork, z: &[f64], iterations: usize) -> Result<GasSolution, GasError> {
        let mut pressure = vec![0.0; net.nodes.len()];
        for (i, p) in pressure.iter_mut().enumerate() {
            let pi = self.pi(z, i);
            if pi <= 0.0 {
                return Err(GasError::InfeasibleNetwork {
                    node: net.nodes[i].name.clone(),
                    value: pi,
                });
            }
            *p = pi.sqrt();
        }
        debug_assert_eq!(self.pi(z, self.supply), self.pi_supply);
        let active = net
            .edges
            .iter()
            .filter_map(|e| match e.kind {
                EdgeKind::Valve { pset } => Some(self.pi(z, e.from) > pset * pset),
                EdgeKind::Pipe { .. } => None,
            })
            .collect();
        Ok(GasSolution {
            pressure,
            flow: z[self.n_pi..].to_vec(),
            active,
            iterations,
        })
    }
}

/// A network QoI exposed as an oracle over `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GasOracle {
    pub network: GasNetwork,
}

impl GasOracle {
    pub fn new(network: GasNetwork) -> Self {
        Self { network }
    }

    pub fn bundled() -> Self {
        Self::new(GasNetwork::bundled())
    }
}

impl Oracle for GasOracle {
    fn dimension(&self) -> usize {
        self.network.dimension()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OracleError> {
        match self.network.qoi(x) {
            Ok((value, label)) => Ok(Evaluation { value, label }),
            Err(GasError::DimensionMismatch { expected, got }) => {
                Err(OracleError::DimensionMismatch { expected, got })
            }
            Err(e) => Err(OracleError::Failed(e.to_string())),
        }
    }

    fn describe(&self) -> String {
        format!(
            "gas network d={} qoi={}",
            self.network.dimension(),
            self.network.nodes[self.network.qoi].name
        )
    }
}
