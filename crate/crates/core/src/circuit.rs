//! The circuit model: layered DAGs of weight-thresholded gates over literals.
//!
//! A gate is *orlike* at bias k if it is constant on all inputs with ≥ k
//! ones, and *andlike* if constant on all inputs with ≥ k zeros. Circuits
//! built from such gates interpolate between AND/OR circuits (k = 1) and
//! threshold circuits.

use crate::boolfun::{BoolFun, Cell, Restriction};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Which weight region a gate is constant on.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Side {
    /// Constant on inputs with ≥ k ones.
    OrLike,
    /// Constant on inputs with ≥ k zeros.
    AndLike,
}

/// Maximum fan-in for explicit truth-table gates.
pub const MAX_TABLE_FANIN: usize = 16;

/// Gate semantics. Fan-in is determined by the node's child list except for
/// `TableG` (table arity) and `Piecewise` (sum of block sizes).
#[derive(Clone, PartialEq, Debug)]
pub enum GateSpec {
    Const(bool),
    And,
    Or,
    Not,
    /// 1 iff at least k inputs are 1.
    KOr(u32),
    /// 0 iff at least k inputs are 0.
    KAnd(u32),
    /// Symmetric gate: constant past the threshold, explicit values below.
    /// OrLike indexes `low_values` by the number of ones, AndLike by the
    /// number of zeros.
    SymmetricG {
        side: Side,
        k: u32,
        low_values: Vec<bool>,
        const_value: bool,
    },
    /// Explicit truth table, validated against the claimed bias.
    TableG { side: Side, k: u32, table: BoolFun },
    /// sgn(Σ w_i (-1)^{x_i} - θ) with sign 0 mapping to output bit 1
    /// (bit b corresponds to the ±1 value (-1)^b).
    Ltf { weights: Vec<i64>, theta: i64 },
    /// Piecewise gate produced by collapsing a gate over unambiguous DNF
    /// blocks: `const_value` when the input weight is ≥ k, otherwise the
    /// base gate applied to the per-block ORs (ANDs when `or_blocks` is
    /// false, i.e. the andlike dual).
    Piecewise {
        k: u32,
        const_value: bool,
        or_blocks: bool,
        base: Box<GateSpec>,
        blocks: Vec<u32>,
    },
}

impl GateSpec {
    /// The smallest bias this gate is structurally known to satisfy, together
    /// with its side. Table gates are scanned exhaustively.
    pub fn intrinsic_gk(&self, fanin: usize) -> (Side, u32) {
        match self {
            GateSpec::Const(_) => (Side::OrLike, 0),
            GateSpec::And => (Side::AndLike, 1),
            GateSpec::Or => (Side::OrLike, 1),
            GateSpec::Not => (Side::OrLike, 1),
            GateSpec::KOr(k) => (Side::OrLike, *k),
            GateSpec::KAnd(k) => (Side::AndLike, *k),
            GateSpec::SymmetricG { side, k, .. } => (*side, *k),
            GateSpec::TableG { side, k, .. } => (*side, *k),
            GateSpec::Ltf { weights, theta } => {
                let side = if *theta >= 0 { Side::OrLike } else { Side::AndLike };
                (side, ltf_balance(weights, *theta))
            }
            GateSpec::Piecewise { k, .. } => {
                let _ = fanin;
                (Side::OrLike, *k)
            }
        }
    }

    pub fn eval(&self, bits: &[bool]) -> Result<bool> {
        let ones = bits.iter().filter(|b| **b).count();
        let zeros = bits.len() - ones;
        Ok(match self {
            GateSpec::Const(v) => *v,
            GateSpec::And => zeros == 0,
            GateSpec::Or => ones > 0,
            GateSpec::Not => {
                if bits.len() != 1 {
                    return Err(Error::Structure(format!(
                        "NOT gate with fan-in {}",
                        bits.len()
                    )));
                }
                !bits[0]
            }
            GateSpec::KOr(k) => ones as u32 >= *k,
            GateSpec::KAnd(k) => !(zeros as u32 >= *k),
            GateSpec::SymmetricG { side, k, low_values, const_value } => {
                let count = match side {
                    Side::OrLike => ones,
                    Side::AndLike => zeros,
                };
                if count as u32 >= *k {
                    *const_value
                } else {
                    low_values[count]
                }
            }
            GateSpec::TableG { table, .. } => {
                if bits.len() != table.arity() {
                    return Err(Error::Structure(format!(
                        "table gate fan-in {} fed {} bits",
                        table.arity(),
                        bits.len()
                    )));
                }
                let mut x = 0u64;
                for (i, b) in bits.iter().enumerate() {
                    if *b {
                        x |= 1 << i;
                    }
                }
                table.value(x)
            }
            GateSpec::Ltf { weights, theta } => {
                if bits.len() != weights.len() {
                    return Err(Error::Structure(format!(
                        "ltf fan-in {} fed {} bits",
                        weights.len(),
                        bits.len()
                    )));
                }
                let mut arg: i64 = -theta;
                for (w, b) in weights.iter().zip(bits) {
                    arg += if *b { -w } else { *w };
                }
                arg <= 0
            }
            GateSpec::Piecewise { k, const_value, or_blocks, base, blocks } => {
                if ones as u32 >= *k {
                    return Ok(*const_value);
                }
                let mut base_bits = Vec::with_capacity(blocks.len());
                let mut pos = 0usize;
                for &sz in blocks {
                    let chunk = &bits[pos..pos + sz as usize];
                    let v = if *or_blocks {
                        chunk.iter().any(|b| *b)
                    } else {
                        chunk.iter().all(|b| *b)
                    };
                    base_bits.push(v);
                    pos += sz as usize;
                }
                base.eval(&base_bits)?
            }
        })
    }

    /// Truth table of the gate over its fan-in (≤ MAX_TABLE_FANIN).
    pub fn to_boolfun(&self, fanin: usize) -> Result<BoolFun> {
        if fanin > MAX_TABLE_FANIN {
            return Err(Error::Capacity(format!(
                "gate fan-in {fanin} > {MAX_TABLE_FANIN} for exhaustive expansion"
            )));
        }
        let mut bits = vec![false; fanin];
        let mut out = Vec::with_capacity(1 << fanin);
        for x in 0..(1u64 << fanin) {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = x >> i & 1 == 1;
            }
            out.push(self.eval(&bits)?);
        }
        BoolFun::from_fn(fanin, |x| out[x as usize])
    }
}

/// Outcome of a gate-bias check: a side certificate or a failure. Exhaustive
/// scans attach a counterexample pair of inputs inside the claimed-constant
/// region with differing outputs; structural checks do not.
#[derive(Clone, Debug, PartialEq)]
pub enum GkCheck {
    Valid(Side),
    Invalid { witness: Option<(u64, u64)> },
}

/// Check whether the gate is in G(k) at the claimed bias. Symbolic gates are
/// checked structurally; table/ltf gates with fan-in ≤ 16 exhaustively.
pub fn validate_gk(gate: &GateSpec, fanin: usize, k: u32) -> Result<GkCheck> {
    match gate {
        GateSpec::Const(_) => Ok(GkCheck::Valid(Side::OrLike)),
        GateSpec::And => Ok(check_structural(Side::AndLike, 1, k)),
        GateSpec::Or => Ok(check_structural(Side::OrLike, 1, k)),
        GateSpec::Not => Ok(check_structural(Side::OrLike, 1, k)),
        GateSpec::KOr(j) => Ok(check_structural(Side::OrLike, *j, k)),
        GateSpec::KAnd(j) => Ok(check_structural(Side::AndLike, *j, k)),
        GateSpec::SymmetricG { side, k: j, low_values, const_value } => {
            // Trailing low values equal to the constant lower the effective bias.
            let mut eff = *j;
            while eff > 0 && low_values[(eff - 1) as usize] == *const_value {
                eff -= 1;
            }
            Ok(check_structural(*side, eff, k))
        }
        GateSpec::TableG { table, .. } => {
            if table.arity() > MAX_TABLE_FANIN {
                return Err(Error::Capacity("table gate fan-in above cap".into()));
            }
            Ok(scan_table(table, k))
        }
        GateSpec::Ltf { weights, theta } => {
            if fanin <= MAX_TABLE_FANIN {
                let table = gate.to_boolfun(fanin)?;
                Ok(scan_table(&table, k))
            } else if weights.iter().all(|w| *w >= 0) {
                let side = if *theta >= 0 { Side::OrLike } else { Side::AndLike };
                Ok(check_structural(side, ltf_balance(weights, *theta), k))
            } else {
                Err(Error::Capacity(
                    "ltf with negative weights above exhaustive fan-in cap".into(),
                ))
            }
        }
        GateSpec::Piecewise { k: j, .. } => Ok(check_structural(Side::OrLike, *j, k)),
    }
}

fn check_structural(side: Side, intrinsic: u32, claimed: u32) -> GkCheck {
    if intrinsic <= claimed {
        GkCheck::Valid(side)
    } else {
        // No certificate at the claimed bias; report without a scan.
        GkCheck::Invalid { witness: None }
    }
}

/// Exhaustive scan: constant on weight ≥ k (orlike) or zeros ≥ k (andlike)?
pub fn scan_table(table: &BoolFun, k: u32) -> GkCheck {
    let n = table.arity();
    let mut or_first: Option<(u64, bool)> = None;
    let mut or_witness: Option<(u64, u64)> = None;
    let mut and_first: Option<(u64, bool)> = None;
    let mut and_witness: Option<(u64, u64)> = None;
    for x in 0..(1u64 << n) {
        let ones = x.count_ones();
        let zeros = n as u32 - ones;
        if ones >= k {
            match or_first {
                None => or_first = Some((x, table.value(x))),
                Some((x0, v0)) => {
                    if or_witness.is_none() && table.value(x) != v0 {
                        or_witness = Some((x0, x));
                    }
                }
            }
        }
        if zeros >= k {
            match and_first {
                None => and_first = Some((x, table.value(x))),
                Some((x0, v0)) => {
                    if and_witness.is_none() && table.value(x) != v0 {
                        and_witness = Some((x0, x));
                    }
                }
            }
        }
    }
    if or_witness.is_none() {
        GkCheck::Valid(Side::OrLike)
    } else if and_witness.is_none() {
        GkCheck::Valid(Side::AndLike)
    } else {
        GkCheck::Invalid { witness: or_witness }
    }
}

/// Smallest bias at which the table is a valid gate on the given side.
pub fn minimal_gk(table: &BoolFun, side: Side) -> u32 {
    let n = table.arity();
    'outer: for k in 0..=n as u32 {
        let mut seen: Option<bool> = None;
        for x in 0..(1u64 << n) {
            let count = match side {
                Side::OrLike => x.count_ones(),
                Side::AndLike => n as u32 - x.count_ones(),
            };
            if count >= k {
                match seen {
                    None => seen = Some(table.value(x)),
                    Some(v) => {
                        if table.value(x) != v {
                            continue 'outer;
                        }
                    }
                }
            }
        }
        return k;
    }
    n as u32 + 1
}

/// Balance of an LTF on the ±1 view: the smallest j such that flipping the j
/// smallest-magnitude weights cannot overcome the threshold. Balance 0 means
/// the gate is constant.
pub fn ltf_balance(weights: &[i64], theta: i64) -> u32 {
    let mut mags: Vec<i64> = weights.iter().map(|w| w.abs()).collect();
    mags.sort_unstable();
    let total: i64 = mags.iter().sum();
    let mut prefix = 0i64;
    for j in 0..=mags.len() {
        if j > 0 {
            prefix += mags[j - 1];
        }
        // -prefix + (total - prefix) < |theta|
        if total - 2 * prefix < theta.abs() {
            return j as u32;
        }
    }
    mags.len() as u32
}

/// Convert an LTF into a certified gate: negate the inputs with negative
/// weights, then the resulting gate is constant on the high-weight region at
/// bias = balance. Returns the negation mask and the certified gate.
/// Certification failure is a hard error since it would falsify the
/// balance-to-bias theorem.
pub fn ltf_to_gk(weights: &[i64], theta: i64) -> Result<(u64, GateSpec)> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::Parameter("empty weight vector".into()));
    }
    if n > MAX_TABLE_FANIN {
        return Err(Error::Capacity(format!(
            "ltf fan-in {n} > {MAX_TABLE_FANIN} for exhaustive certification"
        )));
    }
    let mut mask = 0u64;
    let pos_weights: Vec<i64> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if *w < 0 {
                mask |= 1 << i;
                -w
            } else {
                *w
            }
        })
        .collect();
    let bal = ltf_balance(&pos_weights, theta);
    let side = if theta >= 0 { Side::OrLike } else { Side::AndLike };
    let gate = GateSpec::Ltf { weights: pos_weights.clone(), theta };
    let table = gate.to_boolfun(n)?;

    // Exhaustive verification that the negated gate is constant on the
    // region claimed by the balance bound.
    let mut region_val: Option<bool> = None;
    for x in 0..(1u64 << n) {
        let count = match side {
            Side::OrLike => x.count_ones(),
            Side::AndLike => n as u32 - x.count_ones(),
        };
        if count >= bal {
            match region_val {
                None => region_val = Some(table.value(x)),
                Some(v) => {
                    if table.value(x) != v {
                        return Err(Error::Certification(format!(
                            "ltf {pos_weights:?} theta {theta} not constant on \
                             {side:?} region at balance {bal}"
                        )));
                    }
                }
            }
        }
    }

    let all_equal = pos_weights.windows(2).all(|w| w[0] == w[1]);
    let cert = if all_equal {
        // symmetric: read values off the weight levels
        let const_value = region_val.unwrap_or_else(|| table.value(0));
        let low_values: Vec<bool> = (0..bal)
            .map(|c| {
                let x: u64 = match side {
                    Side::OrLike => (1 << c) - 1,
                    Side::AndLike => ((1u64 << n) - 1) & !((1 << c) - 1),
                };
                table.value(x)
            })
            .collect();
        GateSpec::SymmetricG { side, k: bal, low_values, const_value }
    } else {
        GateSpec::TableG { side, k: bal, table }
    };
    Ok((mask, cert))
}

/// Reference to a gate input: a (possibly negated) input variable or an
/// earlier node.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ChildRef {
    Lit { var: u32, negated: bool },
    Gate(u32),
}

#[derive(Clone, PartialEq, Debug)]
pub struct Node {
    pub gate: GateSpec,
    pub children: Vec<ChildRef>,
}

/// Declared circuit metadata (checked against computed metrics in tests).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct DeclaredMeta {
    pub depth: u32,
    pub bias_k: u32,
    pub bottom_width: u32,
}

/// A topologically ordered circuit DAG.
#[derive(Clone, PartialEq, Debug)]
pub struct Circuit {
    pub arity: usize,
    pub nodes: Vec<Node>,
    pub output: usize,
    pub meta: DeclaredMeta,
}

/// Computed structural metrics.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CircuitMetrics {
    /// Total number of wires, input wires included.
    pub wires: usize,
    pub gates: usize,
    pub depth: usize,
    /// Max fan-in among gates whose children are all literals.
    pub bottom_width: usize,
    /// Max intrinsic bias over all gates.
    pub max_k: u32,
    /// Number of gates at distance ≥ 2 from the inputs.
    pub effective_size: usize,
}

impl Circuit {
    pub fn validate(&self) -> Result<()> {
        if self.output >= self.nodes.len() {
            return Err(Error::DanglingRef(self.output));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            for c in &node.children {
                match c {
                    ChildRef::Lit { var, .. } => {
                        if *var as usize >= self.arity {
                            return Err(Error::Structure(format!(
                                "node {i} references variable {var} outside arity {}",
                                self.arity
                            )));
                        }
                    }
                    ChildRef::Gate(g) => {
                        if *g as usize >= i {
                            return Err(Error::DanglingRef(*g as usize));
                        }
                    }
                }
            }
            let fanin = node.children.len();
            match &node.gate {
                GateSpec::Not if fanin != 1 => {
                    return Err(Error::Structure(format!("node {i}: NOT fan-in {fanin}")))
                }
                GateSpec::TableG { table, .. } if table.arity() != fanin => {
                    return Err(Error::Structure(format!(
                        "node {i}: table arity {} vs fan-in {fanin}",
                        table.arity()
                    )))
                }
                GateSpec::Ltf { weights, .. } if weights.len() != fanin => {
                    return Err(Error::Structure(format!(
                        "node {i}: ltf weights {} vs fan-in {fanin}",
                        weights.len()
                    )))
                }
                GateSpec::SymmetricG { k, low_values, .. }
                    if low_values.len() != *k as usize =>
                {
                    return Err(Error::Structure(format!(
                        "node {i}: symmetric gate k {k} with {} low values",
                        low_values.len()
                    )))
                }
                GateSpec::Piecewise { blocks, .. }
                    if blocks.iter().map(|b| *b as usize).sum::<usize>() != fanin =>
                {
                    return Err(Error::Structure(format!(
                        "node {i}: piecewise blocks do not cover fan-in {fanin}"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: u64) -> Result<bool> {
        let mut vals = Vec::with_capacity(self.nodes.len());
        let mut bits: Vec<bool> = Vec::new();
        for node in &self.nodes {
            bits.clear();
            for c in &node.children {
                bits.push(match c {
                    ChildRef::Lit { var, negated } => (x >> var & 1 == 1) ^ negated,
                    ChildRef::Gate(g) => vals[*g as usize],
                });
            }
            vals.push(node.gate.eval(&bits)?);
        }
        Ok(vals[self.output])
    }

    pub fn to_boolfun(&self) -> Result<BoolFun> {
        if self.arity > crate::boolfun::MAX_ARITY {
            return Err(Error::Capacity(format!("arity {} > 24", self.arity)));
        }
        let mut out = Vec::with_capacity(1 << self.arity);
        for x in 0..(1u64 << self.arity) {
            out.push(self.eval(x)?);
        }
        BoolFun::from_fn(self.arity, |x| out[x as usize])
    }

    pub fn metrics(&self) -> CircuitMetrics {
        let live = self.reachable();
        let mut wires = 0usize;
        let mut gates = 0usize;
        let mut depth = vec![0usize; self.nodes.len()];
        let mut dist = vec![0usize; self.nodes.len()];
        let mut bottom_width = 0usize;
        let mut max_k = 0u32;
        let mut effective = 0usize;
        for (i, node) in self.nodes.iter().enumerate() {
            if !live[i] {
                continue;
            }
            gates += 1;
            wires += node.children.len();
            let mut d = 0usize;
            let mut all_lit = true;
            for c in &node.children {
                match c {
                    ChildRef::Lit { .. } => {}
                    ChildRef::Gate(g) => {
                        all_lit = false;
                        d = d.max(depth[*g as usize]);
                        dist[i] = dist[i].max(dist[*g as usize]);
                    }
                }
            }
            depth[i] = d + 1;
            dist[i] += 1;
            if all_lit && !node.children.is_empty() {
                bottom_width = bottom_width.max(node.children.len());
            }
            if dist[i] >= 2 {
                effective += 1;
            }
            max_k = max_k.max(node.gate.intrinsic_gk(node.children.len()).1);
        }
        CircuitMetrics {
            wires,
            gates,
            depth: depth[self.output],
            bottom_width,
            max_k,
            effective_size: effective,
        }
    }

    fn reachable(&self) -> Vec<bool> {
        let mut live = vec![false; self.nodes.len()];
        let mut stack = vec![self.output];
        while let Some(i) = stack.pop() {
            if live[i] {
                continue;
            }
            live[i] = true;
            for c in &self.nodes[i].children {
                if let ChildRef::Gate(g) = c {
                    stack.push(*g as usize);
                }
            }
        }
        live
    }

    /// Substitute fixed literals, fold constants through every gate, and drop
    /// dead nodes. The result evaluates to the same function as restricting
    /// the truth table.
    pub fn restrict(&self, rho: &Restriction) -> Result<Circuit> {
        if rho.len() != self.arity {
            return Err(Error::Dimension(format!(
                "restriction length {} vs arity {}",
                rho.len(),
                self.arity
            )));
        }
        // folded[i]: either a constant or a rebuilt node index
        enum Folded {
            Const(bool),
            Node(u32),
        }
        let mut folded: Vec<Folded> = Vec::with_capacity(self.nodes.len());
        let mut new_nodes: Vec<Node> = Vec::new();
        for node in &self.nodes {
            let mut fixed: Vec<bool> = Vec::new();
            let mut live: Vec<ChildRef> = Vec::new();
            // per-child position info for piecewise folding
            let mut per_child: Vec<std::result::Result<ChildRef, bool>> = Vec::new();
            for c in &node.children {
                let resolved: std::result::Result<ChildRef, bool> = match c {
                    ChildRef::Lit { var, negated } => match rho.cell(*var as usize) {
                        Cell::Star => Ok(ChildRef::Lit { var: *var, negated: *negated }),
                        Cell::Zero => Err(*negated),
                        Cell::One => Err(!*negated),
                    },
                    ChildRef::Gate(g) => match &folded[*g as usize] {
                        Folded::Const(v) => Err(*v),
                        Folded::Node(idx) => Ok(ChildRef::Gate(*idx)),
                    },
                };
                match &resolved {
                    Ok(r) => live.push(*r),
                    Err(v) => fixed.push(*v),
                }
                per_child.push(resolved);
            }
            let f = fold_gate(&node.gate, &fixed, &live, &per_child)?;
            match f {
                FoldResult::Const(v) => folded.push(Folded::Const(v)),
                FoldResult::Gate(gate, children) => {
                    new_nodes.push(Node { gate, children });
                    folded.push(Folded::Node((new_nodes.len() - 1) as u32));
                }
            }
        }
        let (nodes, output) = match &folded[self.output] {
            Folded::Const(v) => (
                vec![Node { gate: GateSpec::Const(*v), children: vec![] }],
                0usize,
            ),
            Folded::Node(idx) => (new_nodes, *idx as usize),
        };
        let mut c = Circuit { arity: self.arity, nodes, output, meta: self.meta };
        c.drop_dead();
        Ok(c)
    }

    fn drop_dead(&mut self) {
        let live = self.reachable();
        let mut remap = vec![0u32; self.nodes.len()];
        let mut kept: Vec<Node> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if live[i] {
                remap[i] = kept.len() as u32;
                let mut n = node.clone();
                for c in &mut n.children {
                    if let ChildRef::Gate(g) = c {
                        *g = remap[*g as usize];
                    }
                }
                kept.push(n);
            }
        }
        self.output = remap[self.output] as usize;
        self.nodes = kept;
    }

    /// SHA-256 digest of the canonical serialization.
    pub fn digest(&self) -> String {
        let json = io::to_json(self);
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex::encode(&hasher.finalize()[..16])
    }
}

enum FoldResult {
    Const(bool),
    Gate(GateSpec, Vec<ChildRef>),
}

fn fold_gate(
    gate: &GateSpec,
    fixed: &[bool],
    live: &[ChildRef],
    per_child: &[std::result::Result<ChildRef, bool>],
) -> Result<FoldResult> {
    let ones = fixed.iter().filter(|b| **b).count() as u32;
    let zeros = fixed.len() as u32 - ones;
    let m = live.len() as u32;
    Ok(match gate {
        GateSpec::Const(v) => FoldResult::Const(*v),
        GateSpec::And => {
            if zeros > 0 {
                FoldResult::Const(false)
            } else if m == 0 {
                FoldResult::Const(true)
            } else {
                FoldResult::Gate(GateSpec::And, live.to_vec())
            }
        }
        GateSpec::Or => {
            if ones > 0 {
                FoldResult::Const(true)
            } else if m == 0 {
                FoldResult::Const(false)
            } else {
                FoldResult::Gate(GateSpec::Or, live.to_vec())
            }
        }
        GateSpec::Not => {
            if fixed.len() == 1 {
                FoldResult::Const(!fixed[0])
            } else {
                FoldResult::Gate(GateSpec::Not, live.to_vec())
            }
        }
        GateSpec::KOr(k) => {
            if ones >= *k {
                FoldResult::Const(true)
            } else if *k - ones > m {
                FoldResult::Const(false)
            } else {
                FoldResult::Gate(GateSpec::KOr(*k - ones), live.to_vec())
            }
        }
        GateSpec::KAnd(k) => {
            if zeros >= *k {
                FoldResult::Const(false)
            } else if *k - zeros > m {
                FoldResult::Const(true)
            } else {
                FoldResult::Gate(GateSpec::KAnd(*k - zeros), live.to_vec())
            }
        }
        GateSpec::SymmetricG { side, k, low_values, const_value } => {
            let consumed = match side {
                Side::OrLike => ones,
                Side::AndLike => zeros,
            };
            if consumed >= *k {
                return Ok(FoldResult::Const(*const_value));
            }
            let k2 = *k - consumed;
            let low: Vec<bool> = low_values[consumed as usize..*k as usize].to_vec();
            // reachable output values: low[0..=m] plus the constant if m >= k2
            let mut vals: Vec<bool> = low.iter().take(m as usize + 1).copied().collect();
            if m >= k2 {
                vals.push(*const_value);
            }
            if vals.windows(2).all(|w| w[0] == w[1]) {
                FoldResult::Const(vals[0])
            } else {
                FoldResult::Gate(
                    GateSpec::SymmetricG {
                        side: *side,
                        k: k2,
                        low_values: low,
                        const_value: *const_value,
                    },
                    live.to_vec(),
                )
            }
        }
        GateSpec::TableG { side, table, .. } => {
            // restrict the table on the fixed child coordinates and re-derive
            // the minimal bias
            let mut cells = vec![Cell::Star; table.arity()];
            let mut fixed_iter = fixed.iter();
            let mut live_positions = Vec::new();
            for (pos, pc) in per_child.iter().enumerate() {
                match pc {
                    Ok(_) => live_positions.push(pos),
                    Err(_) => {
                        cells[pos] = if *fixed_iter.next().unwrap() {
                            Cell::One
                        } else {
                            Cell::Zero
                        };
                    }
                }
            }
            let sub = table.restrict(&Restriction::new(cells))?;
            let proj = sub.project(&live_positions);
            if let Some(v) = proj.is_constant() {
                FoldResult::Const(v)
            } else {
                let k2 = minimal_gk(&proj, *side);
                FoldResult::Gate(
                    GateSpec::TableG { side: *side, k: k2, table: proj },
                    live.to_vec(),
                )
            }
        }
        GateSpec::Ltf { weights, theta } => {
            let mut theta2 = *theta;
            let mut live_weights = Vec::new();
            let mut fixed_iter = fixed.iter();
            for (pc, w) in per_child.iter().zip(weights) {
                match pc {
                    Ok(_) => live_weights.push(*w),
                    Err(_) => {
                        let b = *fixed_iter.next().unwrap();
                        theta2 -= if b { -w } else { *w };
                    }
                }
            }
            if live_weights.is_empty() {
                FoldResult::Const(theta2 >= 0)
            } else if ltf_balance(&live_weights, theta2) == 0 {
                FoldResult::Const(-theta2 <= 0)
            } else {
                FoldResult::Gate(GateSpec::Ltf { weights: live_weights, theta: theta2 }, live.to_vec())
            }
        }
        GateSpec::Piecewise { k, const_value, or_blocks, base, blocks } => {
            if ones >= *k {
                return Ok(FoldResult::Const(*const_value));
            }
            let k2 = *k - ones;
            // walk children block by block; blocks forced by a fixed child
            // get folded into the base gate
            let mut base_fixed: Vec<bool> = Vec::new();
            let mut base_per_child: Vec<std::result::Result<ChildRef, bool>> = Vec::new();
            let mut new_blocks: Vec<u32> = Vec::new();
            let mut new_children: Vec<ChildRef> = Vec::new();
            let mut pos = 0usize;
            for (bi, sz) in blocks.iter().enumerate() {
                let chunk = &per_child[pos..pos + *sz as usize];
                pos += *sz as usize;
                let forced = chunk
                    .iter()
                    .any(|pc| matches!(pc, Err(v) if *v == *or_blocks));
                let live_chunk: Vec<ChildRef> =
                    chunk.iter().filter_map(|pc| pc.as_ref().ok().copied()).collect();
                if forced {
                    base_fixed.push(*or_blocks);
                    base_per_child.push(Err(*or_blocks));
                } else if live_chunk.is_empty() {
                    // block entirely fixed to the non-dominant value
                    base_fixed.push(!*or_blocks);
                    base_per_child.push(Err(!*or_blocks));
                } else {
                    new_blocks.push(live_chunk.len() as u32);
                    new_children.extend(live_chunk);
                    base_per_child.push(Ok(ChildRef::Gate(bi as u32)));
                }
            }
            if new_children.is_empty() {
                // base fully determined
                let bits: Vec<bool> = base_fixed.clone();
                return Ok(FoldResult::Const(base.eval(&bits)?));
            }
            let live_markers: Vec<ChildRef> = base_per_child
                .iter()
                .filter_map(|pc| pc.as_ref().ok().copied())
                .collect();
            let base2 = match fold_gate(base, &base_fixed, &live_markers, &base_per_child)? {
                FoldResult::Const(v) => {
                    return Ok(FoldResult::Gate(
                        GateSpec::Piecewise {
                            k: k2,
                            const_value: *const_value,
                            or_blocks: *or_blocks,
                            base: Box::new(GateSpec::Const(v)),
                            blocks: new_blocks,
                        },
                        new_children,
                    ))
                }
                FoldResult::Gate(g, _) => g,
            };
            FoldResult::Gate(
                GateSpec::Piecewise {
                    k: k2,
                    const_value: *const_value,
                    or_blocks: *or_blocks,
                    base: Box::new(base2),
                    blocks: new_blocks,
                },
                new_children,
            )
        }
    })
}

/// Circuit file format (versioned JSON).
pub mod io {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct FileCircuit {
        version: u32,
        n: usize,
        nodes: Vec<FileNode>,
        output: usize,
        #[serde(default)]
        meta: DeclaredMeta,
    }

    #[derive(Serialize, Deserialize)]
    struct FileNode {
        id: usize,
        gate: FileGate,
        children: Vec<String>,
    }

    #[derive(Serialize, Deserialize)]
    struct FileGate {
        kind: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        side: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<i64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        theta: Option<i64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        fanin: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        table_hex: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        low_values: Option<Vec<u8>>,
        #[serde(rename = "const", skip_serializing_if = "Option::is_none")]
        const_value: Option<u8>,
        #[serde(skip_serializing_if = "Option::is_none")]
        or_blocks: Option<bool>,
        #[serde(skip_serializing_if = "Option::is_none")]
        blocks: Option<Vec<u32>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        base: Option<Box<FileGate>>,
    }

    fn side_str(s: Side) -> String {
        match s {
            Side::OrLike => "orlike".into(),
            Side::AndLike => "andlike".into(),
        }
    }

    fn parse_side(s: &str) -> Result<Side> {
        match s {
            "orlike" => Ok(Side::OrLike),
            "andlike" => Ok(Side::AndLike),
            other => Err(Error::Parse(format!("bad side {other:?}"))),
        }
    }

    fn gate_to_file(g: &GateSpec) -> FileGate {
        let mut f = FileGate {
            kind: String::new(),
            k: None,
            side: None,
            weights: None,
            theta: None,
            fanin: None,
            table_hex: None,
            low_values: None,
            const_value: None,
            or_blocks: None,
            blocks: None,
            base: None,
        };
        match g {
            GateSpec::Const(v) => {
                f.kind = "const".into();
                f.const_value = Some(*v as u8);
            }
            GateSpec::And => f.kind = "and".into(),
            GateSpec::Or => f.kind = "or".into(),
            GateSpec::Not => f.kind = "not".into(),
            GateSpec::KOr(k) => {
                f.kind = "kor".into();
                f.k = Some(*k);
            }
            GateSpec::KAnd(k) => {
                f.kind = "kand".into();
                f.k = Some(*k);
            }
            GateSpec::SymmetricG { side, k, low_values, const_value } => {
                f.kind = "symmetric".into();
                f.side = Some(side_str(*side));
                f.k = Some(*k);
                f.low_values = Some(low_values.iter().map(|b| *b as u8).collect());
                f.const_value = Some(*const_value as u8);
            }
            GateSpec::TableG { side, k, table } => {
                f.kind = "table".into();
                f.side = Some(side_str(*side));
                f.k = Some(*k);
                f.fanin = Some(table.arity());
                f.table_hex = Some(table.to_hex());
            }
            GateSpec::Ltf { weights, theta } => {
                f.kind = "ltf".into();
                f.weights = Some(weights.clone());
                f.theta = Some(*theta);
            }
            GateSpec::Piecewise { k, const_value, or_blocks, base, blocks } => {
                f.kind = "piecewise".into();
                f.k = Some(*k);
                f.const_value = Some(*const_value as u8);
                f.or_blocks = Some(*or_blocks);
                f.blocks = Some(blocks.clone());
                f.base = Some(Box::new(gate_to_file(base)));
            }
        }
        f
    }

    fn gate_from_file(f: &FileGate) -> Result<GateSpec> {
        let need_k = || f.k.ok_or_else(|| Error::Parse(format!("gate {} needs k", f.kind)));
        Ok(match f.kind.as_str() {
            "const" => GateSpec::Const(
                f.const_value
                    .ok_or_else(|| Error::Parse("const gate needs value".into()))?
                    != 0,
            ),
            "and" => GateSpec::And,
            "or" => GateSpec::Or,
            "not" => GateSpec::Not,
            "kor" => GateSpec::KOr(need_k()?),
            "kand" => GateSpec::KAnd(need_k()?),
            "symmetric" => GateSpec::SymmetricG {
                side: parse_side(
                    f.side
                        .as_deref()
                        .ok_or_else(|| Error::Parse("symmetric gate needs side".into()))?,
                )?,
                k: need_k()?,
                low_values: f
                    .low_values
                    .as_ref()
                    .ok_or_else(|| Error::Parse("symmetric gate needs low_values".into()))?
                    .iter()
                    .map(|b| *b != 0)
                    .collect(),
                const_value: f
                    .const_value
                    .ok_or_else(|| Error::Parse("symmetric gate needs const".into()))?
                    != 0,
            },
            "table" => {
                let fanin = f
                    .fanin
                    .ok_or_else(|| Error::Parse("table gate needs fanin".into()))?;
                GateSpec::TableG {
                    side: parse_side(
                        f.side
                            .as_deref()
                            .ok_or_else(|| Error::Parse("table gate needs side".into()))?,
                    )?,
                    k: need_k()?,
                    table: BoolFun::from_hex(
                        fanin,
                        f.table_hex
                            .as_deref()
                            .ok_or_else(|| Error::Parse("table gate needs table_hex".into()))?,
                    )?,
                }
            }
            "ltf" => GateSpec::Ltf {
                weights: f
                    .weights
                    .clone()
                    .ok_or_else(|| Error::Parse("ltf needs weights".into()))?,
                theta: f.theta.ok_or_else(|| Error::Parse("ltf needs theta".into()))?,
            },
            "piecewise" => GateSpec::Piecewise {
                k: need_k()?,
                const_value: f
                    .const_value
                    .ok_or_else(|| Error::Parse("piecewise needs const".into()))?
                    != 0,
                or_blocks: f.or_blocks.unwrap_or(true),
                blocks: f
                    .blocks
                    .clone()
                    .ok_or_else(|| Error::Parse("piecewise needs blocks".into()))?,
                base: Box::new(gate_from_file(
                    f.base
                        .as_deref()
                        .ok_or_else(|| Error::Parse("piecewise needs base".into()))?,
                )?),
            },
            other => return Err(Error::Parse(format!("unknown gate kind {other:?}"))),
        })
    }

    fn child_str(c: &ChildRef) -> String {
        match c {
            ChildRef::Lit { var, negated: false } => format!("x{var}"),
            ChildRef::Lit { var, negated: true } => format!("~x{var}"),
            ChildRef::Gate(g) => format!("@{g}"),
        }
    }

    fn parse_child(s: &str) -> Result<ChildRef> {
        if let Some(rest) = s.strip_prefix("@") {
            return Ok(ChildRef::Gate(
                rest.parse().map_err(|_| Error::Parse(format!("bad node ref {s:?}")))?,
            ));
        }
        let (negated, rest) = if let Some(r) = s.strip_prefix("~x") {
            (true, r)
        } else if let Some(r) = s.strip_prefix('x') {
            (false, r)
        } else {
            return Err(Error::Parse(format!("bad child ref {s:?}")));
        };
        Ok(ChildRef::Lit {
            var: rest.parse().map_err(|_| Error::Parse(format!("bad child ref {s:?}")))?,
            negated,
        })
    }

    pub fn to_json(c: &Circuit) -> String {
        let fc = FileCircuit {
            version: 1,
            n: c.arity,
            nodes: c
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| FileNode {
                    id,
                    gate: gate_to_file(&n.gate),
                    children: n.children.iter().map(child_str).collect(),
                })
                .collect(),
            output: c.output,
            meta: c.meta,
        };
        serde_json::to_string_pretty(&fc).expect("circuit serialization")
    }

    pub fn from_json(s: &str) -> Result<Circuit> {
        let fc: FileCircuit =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("circuit json: {e}")))?;
        if fc.version != 1 {
            return Err(Error::Parse(format!("unsupported version {}", fc.version)));
        }
        let mut nodes = Vec::with_capacity(fc.nodes.len());
        for (i, fnode) in fc.nodes.iter().enumerate() {
            if fnode.id != i {
                return Err(Error::Parse(format!(
                    "node ids must be dense and ordered (got {} at {i})",
                    fnode.id
                )));
            }
            nodes.push(Node {
                gate: gate_from_file(&fnode.gate)?,
                children: fnode
                    .children
                    .iter()
                    .map(|c| parse_child(c))
                    .collect::<Result<Vec<_>>>()?,
            });
        }
        let c = Circuit { arity: fc.n, nodes, output: fc.output, meta: fc.meta };
        c.validate()?;
        Ok(c)
    }
}
