//! Explicit circuit families: parity in depth-2 weight-thresholded form,
//! parity trees, low-depth parity circuits built by alternating DNF/CNF
//! expansion, the parity-correlated block circuit with its combinatorial
//! closed form, and the seeded random corpus the experiments draw from.

use crate::boolfun::binom_u128;
use crate::circuit::{
    validate_gk, ChildRef, Circuit, DeclaredMeta, GateSpec, GkCheck, Node, Side,
};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// The symmetric gate computing the parity of its inputs: constant on the
/// (singleton) top weight level, parity below.
fn parity_gate(fanin: usize) -> GateSpec {
    GateSpec::SymmetricG {
        side: Side::OrLike,
        k: fanin as u32,
        low_values: (0..fanin).map(|v| v % 2 == 1).collect(),
        const_value: fanin % 2 == 1,
    }
}

/// Symmetric gate: parity of the input weight below the threshold, the
/// reachable-parity value at and above it. For odd k the gate is declared at
/// bias k+1 so that the constant region is genuinely constant.
fn parity_up_to(k: usize) -> GateSpec {
    let kk = if k % 2 == 1 { k + 1 } else { k };
    GateSpec::SymmetricG {
        side: Side::OrLike,
        k: kk as u32,
        low_values: (0..kk).map(|v| v % 2 == 1).collect(),
        const_value: false,
    }
}

/// Parity of k·w bits as a depth-2 circuit: per block of w variables, one
/// AND clause per odd-weight assignment; the top gate counts satisfied
/// clauses (at most one per block) and outputs their parity, so it is
/// constant from weight k on.
pub fn parity_as_gk_andw(k: usize, w: usize) -> Result<Circuit> {
    let n = k * w;
    if n == 0 || n > 20 {
        return Err(Error::Capacity(format!("parity block circuit kw = {n} outside 1..=20")));
    }
    let mut nodes = Vec::new();
    let mut children = Vec::new();
    for block in 0..k {
        let base = block * w;
        for assign in 0..(1u64 << w) {
            if assign.count_ones() % 2 == 0 {
                continue;
            }
            let lits: Vec<ChildRef> = (0..w)
                .map(|j| ChildRef::Lit {
                    var: (base + j) as u32,
                    negated: assign >> j & 1 == 0,
                })
                .collect();
            nodes.push(Node { gate: GateSpec::And, children: lits });
            children.push(ChildRef::Gate((nodes.len() - 1) as u32));
        }
    }
    let top = GateSpec::SymmetricG {
        side: Side::OrLike,
        k: k as u32,
        low_values: (0..k).map(|v| v % 2 == 1).collect(),
        const_value: k % 2 == 1,
    };
    nodes.push(Node { gate: top, children });
    let output = nodes.len() - 1;
    Ok(Circuit {
        arity: n,
        nodes,
        output,
        meta: DeclaredMeta { depth: 2, bias_k: k as u32, bottom_width: w as u32 },
    })
}

/// Parity of n bits as a depth-d tree of parity gates with fan-in
/// ceil(n^{1/d}); short blocks behave like zero-padded ones.
pub fn parity_tree(n: usize, d: usize) -> Result<Circuit> {
    if n == 0 || d == 0 {
        return Err(Error::Parameter("parity tree needs n ≥ 1, d ≥ 1".into()));
    }
    let b = (1..=n)
        .find(|b| b.checked_pow(d as u32).is_some_and(|v| v >= n))
        .unwrap_or(n);
    let mut nodes: Vec<Node> = Vec::new();
    // current layer of references, bottom-up
    let mut layer: Vec<ChildRef> = (0..n)
        .map(|v| ChildRef::Lit { var: v as u32, negated: false })
        .collect();
    for _ in 0..d {
        if layer.len() == 1 {
            break;
        }
        let mut next = Vec::new();
        for chunk in layer.chunks(b) {
            nodes.push(Node { gate: parity_gate(chunk.len()), children: chunk.to_vec() });
            next.push(ChildRef::Gate((nodes.len() - 1) as u32));
        }
        layer = next;
    }
    if layer.len() > 1 {
        // capacity leftovers: join in one final gate
        nodes.push(Node { gate: parity_gate(layer.len()), children: layer.clone() });
        layer = vec![ChildRef::Gate((nodes.len() - 1) as u32)];
    }
    let output = match layer[0] {
        ChildRef::Gate(g) => g as usize,
        ChildRef::Lit { .. } => {
            nodes.push(Node { gate: parity_gate(1), children: layer });
            nodes.len() - 1
        }
    };
    let meta = DeclaredMeta { depth: d as u32, bias_k: b as u32, bottom_width: b as u32 };
    Ok(Circuit { arity: n, nodes, output, meta })
}

/// Kind of flattened layer produced by the alternating expansion.
#[derive(Clone, Copy, PartialEq, Eq)]
enum ExpandKind {
    /// OR of AND clauses (the callers splice the AND nodes under an OR).
    Dnf,
    /// AND of OR clauses.
    Cnf,
}

/// Expand "[parity of vars] = bit" as an alternating AND/OR formula of the
/// given depth with branching b, returning the second-level node references
/// (AND clauses for Dnf, OR clauses for Cnf) for splicing into the parent.
fn expand_parity(
    vars: &[usize],
    depth: usize,
    b: usize,
    bit: bool,
    kind: ExpandKind,
    nodes: &mut Vec<Node>,
) -> Vec<ChildRef> {
    if vars.len() == 1 {
        // [parity of one variable = bit] is just a literal
        return vec![ChildRef::Lit { var: vars[0] as u32, negated: !bit }];
    }
    if depth <= 1 || vars.len() <= b {
        // base: complete assignments over the raw variables
        let w = vars.len();
        let mut out = Vec::new();
        for assign in 0..(1u64 << w) {
            let want = match kind {
                ExpandKind::Dnf => (assign.count_ones() % 2 == 1) == bit,
                // clauses of the CNF rule out assignments of the wrong parity
                ExpandKind::Cnf => (assign.count_ones() % 2 == 1) != bit,
            };
            if !want {
                continue;
            }
            let lits: Vec<ChildRef> = (0..w)
                .map(|j| ChildRef::Lit {
                    var: vars[j] as u32,
                    negated: match kind {
                        ExpandKind::Dnf => assign >> j & 1 == 0,
                        ExpandKind::Cnf => assign >> j & 1 == 1,
                    },
                })
                .collect();
            let gate = match kind {
                ExpandKind::Dnf => GateSpec::And,
                ExpandKind::Cnf => GateSpec::Or,
            };
            nodes.push(Node { gate, children: lits });
            out.push(ChildRef::Gate((nodes.len() - 1) as u32));
        }
        return out;
    }
    // split vars into ≤ b sub-blocks and enumerate block-parity assignments
    let chunk = vars.len().div_ceil(b);
    let blocks: Vec<&[usize]> = vars.chunks(chunk).collect();
    let nb = blocks.len();
    let mut out = Vec::new();
    for assign in 0..(1u64 << nb) {
        let parity_ok = (assign.count_ones() % 2 == 1) == bit;
        let want = match kind {
            ExpandKind::Dnf => parity_ok,
            ExpandKind::Cnf => !parity_ok,
        };
        if !want {
            continue;
        }
        // Dnf: AND over blocks of [block parity = assign bit], each expanded
        // as a CNF whose OR clauses splice into this AND. Cnf: dual.
        let mut clause_children = Vec::new();
        for (j, block) in blocks.iter().enumerate() {
            let sub_bit = assign >> j & 1 == 1;
            let sub_kind = match kind {
                ExpandKind::Dnf => ExpandKind::Cnf,
                ExpandKind::Cnf => ExpandKind::Dnf,
            };
            let target = match kind {
                ExpandKind::Dnf => sub_bit,
                // the OR clause must contain "[block parity ≠ assign bit]"
                ExpandKind::Cnf => !sub_bit,
            };
            clause_children.extend(expand_parity(block, depth - 1, b, target, sub_kind, nodes));
        }
        let gate = match kind {
            ExpandKind::Dnf => GateSpec::And,
            ExpandKind::Cnf => GateSpec::Or,
        };
        nodes.push(Node { gate, children: clause_children });
        out.push(ChildRef::Gate((nodes.len() - 1) as u32));
    }
    out
}

/// Parity of n bits at depth d with all gates below the top being AND/OR:
/// k blocks, each a depth-(d-1) parity tree collapsed through its 0-paths
/// into OR clauses under one symmetric zero-counting top gate, with the
/// deeper parity gates expanded by alternating DNF/CNF.
pub fn tight_parity_circuit(n: usize, k: usize, d: usize) -> Result<Circuit> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::Parameter(format!("bad block count k = {k} for n = {n}")));
    }
    if n > 16 {
        return Err(Error::Capacity(format!("tight parity circuit n = {n} > 16")));
    }
    if d < 2 {
        return Err(Error::Parameter("tight parity circuit needs d ≥ 2".into()));
    }
    let block_size = n.div_ceil(k);
    // branching of the per-block depth-(d-1) parity tree
    let b = (1..=block_size)
        .find(|b| b.checked_pow((d - 1) as u32).is_some_and(|v| v >= block_size))
        .unwrap_or(block_size);
    let mut nodes: Vec<Node> = Vec::new();
    let mut top_children: Vec<ChildRef> = Vec::new();
    let mut blocks_built = 0usize;
    for block_vars in (0..n).collect::<Vec<_>>().chunks(block_size) {
        blocks_built += 1;
        // view the block's top parity gate (fan-in ≤ b over sub-blocks) as a
        // decision tree and expand its 0-paths into OR clauses
        let chunk = block_vars.len().div_ceil(b);
        let subs: Vec<&[usize]> = block_vars.chunks(chunk).collect();
        let nsubs = subs.len();
        for assign in 0..(1u64 << nsubs) {
            if assign.count_ones() % 2 == 1 {
                continue; // 0-paths: even-parity assignments
            }
            // OR clause: some sub-block parity differs from the assignment
            let mut clause_children = Vec::new();
            for (j, sub) in subs.iter().enumerate() {
                let path_bit = assign >> j & 1 == 1;
                clause_children.extend(expand_parity(
                    sub,
                    d - 2,
                    b,
                    !path_bit,
                    ExpandKind::Dnf,
                    &mut nodes,
                ));
            }
            if clause_children.len() == 1 && matches!(clause_children[0], ChildRef::Lit { .. }) {
                top_children.push(clause_children[0]);
            } else {
                nodes.push(Node { gate: GateSpec::Or, children: clause_children });
                top_children.push(ChildRef::Gate((nodes.len() - 1) as u32));
            }
        }
    }
    // andlike top: with z clause wires false, exactly z blocks have parity 1
    let kk = blocks_built;
    let top = GateSpec::SymmetricG {
        side: Side::AndLike,
        k: kk as u32,
        low_values: (0..kk).map(|z| (kk - z) % 2 == 1).collect(),
        const_value: false,
    };
    nodes.push(Node { gate: top, children: top_children });
    let output = nodes.len() - 1;
    let c = Circuit {
        arity: n,
        nodes,
        output,
        meta: DeclaredMeta { depth: d as u32, bias_k: k as u32, bottom_width: 0 },
    };
    Ok(c)
}

/// Report for the block correlation construction.
#[derive(Clone, Debug)]
pub struct CorrelationCircuit {
    pub circuit: Circuit,
    pub blocks: usize,
    pub block_size: usize,
    /// Combinatorial closed form of the correlation with parity:
    /// Σ_{j≤k} P(j) + Σ_{j>k} (-1)^j P(j), P(j) = C(B,j)·2^{-B}.
    pub closed_form: f64,
    /// Triangle lower bound Σ_{j≤k} P(j) − Σ_{j>k} P(j).
    pub lower_bound: f64,
}

/// Correlation closed form for B blocks and weight cutoff k.
pub fn correlation_closed_form(blocks: usize, k: usize) -> (f64, f64) {
    let total = 1u128 << blocks;
    let mut signed: i128 = 0;
    let mut lower: i128 = 0;
    for j in 0..=blocks {
        let c = binom_u128(blocks, j) as i128;
        if j <= k {
            signed += c;
            lower += c;
        } else {
            signed += if j % 2 == 0 { c } else { -c };
            lower -= c;
        }
    }
    (signed as f64 / total as f64, lower as f64 / total as f64)
}

/// Block circuit correlated with parity: split into B = ceil(n / M^{d-1})
/// blocks (M = max(k, c_d·log2 m)), compute each block's parity by an
/// alternating depth-(d-1) expansion, and join with the parity-below-k gate.
/// Exact correlation with parity equals the closed form.
pub fn correlation_circuit(n: usize, k: usize, d: usize, m: usize, c_d: f64) -> Result<CorrelationCircuit> {
    if n == 0 || n > 16 || d < 2 || k == 0 {
        return Err(Error::Capacity(
            "correlation circuit needs 1 ≤ n ≤ 16, d ≥ 2, k ≥ 1".into(),
        ));
    }
    let log_m = (m.max(2) as f64).log2();
    let mm = (k as f64).max(c_d * log_m).ceil() as usize;
    let block_size = mm.pow((d - 1) as u32).min(n);
    let blocks: Vec<Vec<usize>> = (0..n)
        .collect::<Vec<_>>()
        .chunks(block_size)
        .map(|c| c.to_vec())
        .collect();
    let nblocks = blocks.len();
    let mut nodes: Vec<Node> = Vec::new();
    let mut top_children = Vec::new();
    for block in &blocks {
        top_children.extend(expand_parity(
            block,
            d - 1,
            mm.max(2),
            true,
            ExpandKind::Dnf,
            &mut nodes,
        ));
    }
    nodes.push(Node { gate: parity_up_to(k), children: top_children });
    let output = nodes.len() - 1;
    let circuit = Circuit {
        arity: n,
        nodes,
        output,
        meta: DeclaredMeta { depth: d as u32, bias_k: parity_up_to(k).intrinsic_gk(0).1, bottom_width: 0 },
    };
    let (closed_form, lower_bound) = correlation_closed_form(nblocks, k);
    Ok(CorrelationCircuit {
        circuit,
        blocks: nblocks,
        block_size,
        closed_form,
        lower_bound,
    })
}

/// Parameters for the random corpus generator.
#[derive(Clone, Copy, Debug)]
pub struct CorpusParams {
    pub n: usize,
    pub m: usize,
    pub k: u32,
    pub w: usize,
    pub d: usize,
}

/// A random depth-2 circuit with an orlike or andlike top over width-≤w
/// clauses. Every gate validates at the declared bias.
pub fn random_gk_and(params: &CorpusParams, rng: &mut ChaCha12Rng) -> Circuit {
    let CorpusParams { n, m, k, w, .. } = *params;
    let orlike = rng.random::<bool>();
    let mut nodes = Vec::new();
    let mut children = Vec::new();
    for _ in 0..m {
        let width = rng.random_range(1..=w);
        let mut pool: Vec<u32> = (0..n as u32).collect();
        let lits: Vec<ChildRef> = (0..width)
            .map(|_| {
                let i = rng.random_range(0..pool.len());
                ChildRef::Lit { var: pool.swap_remove(i), negated: rng.random() }
            })
            .collect();
        nodes.push(Node {
            gate: if orlike { GateSpec::And } else { GateSpec::Or },
            children: lits,
        });
        children.push(ChildRef::Gate((nodes.len() - 1) as u32));
    }
    let side = if orlike { Side::OrLike } else { Side::AndLike };
    let top = match rng.random_range(0..3) {
        0 if orlike => GateSpec::KOr(k),
        0 => GateSpec::KAnd(k),
        _ => GateSpec::SymmetricG {
            side,
            k,
            low_values: (0..k).map(|_| rng.random()).collect(),
            const_value: rng.random(),
        },
    };
    nodes.push(Node { gate: top, children });
    let output = nodes.len() - 1;
    Circuit {
        arity: n,
        nodes,
        output,
        meta: DeclaredMeta { depth: 2, bias_k: k, bottom_width: w as u32 },
    }
}

/// A random layered depth-d circuit over biased symmetric gates. Layers
/// strictly alternate sides: the clause layer is AND (OR) exactly when the
/// gates above it are orlike (andlike), so bottom depth-2 slices stay in
/// the normal form the switching machinery expects.
pub fn random_gc0(params: &CorpusParams, rng: &mut ChaCha12Rng) -> Circuit {
    let CorpusParams { n, m, k, w, d } = *params;
    assert!(d >= 2);
    let mut side = if rng.random() { Side::OrLike } else { Side::AndLike };
    let mut nodes: Vec<Node> = Vec::new();
    // clause layer
    let mut layer: Vec<ChildRef> = Vec::new();
    for _ in 0..m.max(2) {
        let width = rng.random_range(1..=w);
        let mut pool: Vec<u32> = (0..n as u32).collect();
        let lits: Vec<ChildRef> = (0..width)
            .map(|_| {
                let i = rng.random_range(0..pool.len());
                ChildRef::Lit { var: pool.swap_remove(i), negated: rng.random() }
            })
            .collect();
        nodes.push(Node {
            gate: match side {
                Side::OrLike => GateSpec::And,
                Side::AndLike => GateSpec::Or,
            },
            children: lits,
        });
        layer.push(ChildRef::Gate((nodes.len() - 1) as u32));
    }
    // d-1 gate layers above the clauses, alternating sides
    for level in 1..d {
        let last = level == d - 1;
        let mut next: Vec<ChildRef> = Vec::new();
        let mut idx = 0;
        while idx < layer.len() {
            let fan = if last {
                layer.len()
            } else {
                rng.random_range(2..=3).min(layer.len() - idx).max(1)
            };
            let hi = (idx + fan).min(layer.len());
            let kids: Vec<ChildRef> = layer[idx..hi].to_vec();
            let kk = k.min(kids.len() as u32).max(1);
            let gate = match rng.random_range(0..3) {
                0 => match side {
                    Side::OrLike => GateSpec::KOr(kk),
                    Side::AndLike => GateSpec::KAnd(kk),
                },
                _ => GateSpec::SymmetricG {
                    side,
                    k: kk,
                    low_values: (0..kk).map(|_| rng.random()).collect(),
                    const_value: rng.random(),
                },
            };
            nodes.push(Node { gate, children: kids });
            next.push(ChildRef::Gate((nodes.len() - 1) as u32));
            idx = hi;
        }
        layer = next;
        side = match side {
            Side::OrLike => Side::AndLike,
            Side::AndLike => Side::OrLike,
        };
    }
    let output = match layer[0] {
        ChildRef::Gate(g) => g as usize,
        ChildRef::Lit { .. } => unreachable!(),
    };
    Circuit {
        arity: n,
        nodes,
        output,
        meta: DeclaredMeta { depth: d as u32, bias_k: k, bottom_width: w as u32 },
    }
}

/// Every gate of the circuit must certify at the circuit's declared bias
/// (or lower).
pub fn corpus_gates_valid(c: &Circuit) -> Result<bool> {
    let k = c.meta.bias_k.max(1);
    for node in &c.nodes {
        match validate_gk(&node.gate, node.children.len(), k.max(node.gate.intrinsic_gk(node.children.len()).1))? {
            GkCheck::Valid(_) => {}
            GkCheck::Invalid { .. } => return Ok(false),
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfun::BoolFun;
    use rand::SeedableRng;

    #[test]
    fn parity_block_circuit_computes_parity() {
        for (k, w) in [(1, 1), (2, 2), (2, 3), (3, 2)] {
            let c = parity_as_gk_andw(k, w).unwrap();
            let f = c.to_boolfun().unwrap();
            assert_eq!(f, BoolFun::parity(k * w), "k={k} w={w}");
        }
    }

    #[test]
    fn parity_block_unambiguous_per_block() {
        // at most one clause per block is satisfied by any input
        let (k, w) = (2, 3);
        let c = parity_as_gk_andw(k, w).unwrap();
        let per_block = 1usize << (w - 1);
        for x in 0..(1u64 << (k * w)) {
            for block in 0..k {
                let sat = (0..per_block)
                    .filter(|i| {
                        let node = &c.nodes[block * per_block + i];
                        node.children.iter().all(|ch| match ch {
                            ChildRef::Lit { var, negated } => {
                                ((x >> var) & 1 == 1) ^ negated
                            }
                            _ => unreachable!(),
                        })
                    })
                    .count();
                assert!(sat <= 1);
            }
        }
    }

    #[test]
    fn parity_tree_shapes() {
        let c = parity_tree(8, 3).unwrap();
        assert_eq!(c.to_boolfun().unwrap(), BoolFun::parity(8));
        assert_eq!(c.metrics().depth, 3);
        // gate count for a perfect b-ary tree: sum n^{1-i/d}
        assert_eq!(c.nodes.len(), 4 + 2 + 1);

        let c = parity_tree(4, 2).unwrap();
        assert_eq!(c.to_boolfun().unwrap(), BoolFun::parity(4));
        assert_eq!(c.nodes.len(), 3);

        for (n, d) in [(5, 2), (9, 2), (16, 2), (7, 3)] {
            let c = parity_tree(n, d).unwrap();
            assert_eq!(c.to_boolfun().unwrap(), BoolFun::parity(n), "n={n} d={d}");
        }
    }

    #[test]
    fn tight_parity_equals_parity() {
        for (n, k, d) in [(4, 4, 2), (8, 2, 3), (8, 4, 2), (6, 2, 2), (9, 3, 3), (12, 2, 3)] {
            let c = tight_parity_circuit(n, k, d).unwrap();
            assert_eq!(
                c.to_boolfun().unwrap(),
                BoolFun::parity(n),
                "n={n} k={k} d={d}"
            );
            assert!(c.metrics().depth <= d, "depth overflow for n={n} k={k} d={d}");
        }
    }

    #[test]
    fn degenerate_tight_parity_single_gate() {
        // d = 2 with k = n: one symmetric gate over the n literal wires
        let c = tight_parity_circuit(6, 6, 2).unwrap();
        assert_eq!(c.to_boolfun().unwrap(), BoolFun::parity(6));
    }

    #[test]
    fn correlation_circuit_matches_closed_form() {
        for k in [1usize, 2] {
            let cc = correlation_circuit(12, k, 2, 8, 1.0).unwrap();
            assert_eq!(cc.blocks, 4);
            let f = cc.circuit.to_boolfun().unwrap();
            let corr = f.correlation(&BoolFun::parity(12)).unwrap();
            assert!(
                (corr - cc.closed_form).abs() < 1e-9,
                "k={k}: measured {corr} vs closed form {}",
                cc.closed_form
            );
            assert!(corr >= cc.lower_bound - 1e-9);
        }
    }

    #[test]
    fn correlation_single_block_is_parity() {
        let cc = correlation_circuit(8, 2, 2, 64, 1.0).unwrap();
        if cc.blocks == 1 {
            assert!((cc.closed_form - 1.0).abs() < 1e-12);
            assert_eq!(cc.circuit.to_boolfun().unwrap(), BoolFun::parity(8));
        }
    }

    #[test]
    fn corpus_is_deterministic_and_valid() {
        let params = CorpusParams { n: 8, m: 4, k: 2, w: 2, d: 2 };
        let mut rng1 = ChaCha12Rng::seed_from_u64(99);
        let mut rng2 = ChaCha12Rng::seed_from_u64(99);
        let a = random_gk_and(&params, &mut rng1);
        let b = random_gk_and(&params, &mut rng2);
        assert_eq!(a.digest(), b.digest());
        assert!(corpus_gates_valid(&a).unwrap());

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = random_gc0(&CorpusParams { n: 10, m: 6, k: 2, w: 2, d: 3 }, &mut rng);
            c.validate().unwrap();
            assert!(corpus_gates_valid(&c).unwrap());
            let metrics = c.metrics();
            assert!(metrics.depth >= 2);
        }
    }
}
