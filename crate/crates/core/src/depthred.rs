//! Depth reduction through unambiguous DNFs: a gate that is constant above
//! weight k over decision-tree inputs collapses to the same kind of gate
//! over the trees' path clauses, because any input satisfies at most one
//! path clause per tree. Also the staged simplification pipeline that
//! alternates random restrictions with this collapse until a single
//! decision tree remains.

use crate::boolfun::{Cell, DecisionTree, DtSolver, Restriction};
use crate::circuit::{
    validate_gk, ChildRef, Circuit, DeclaredMeta, GateSpec, GkCheck, Node, Side, MAX_TABLE_FANIN,
};
use crate::error::{Error, Result};
use crate::switching::{Clause, DepthTwo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::collections::HashMap;

/// A DNF in which no input satisfies two clauses; the form decision trees
/// expand into. Clauses are (variable, required bit) conjunctions.
#[derive(Clone, Debug)]
pub struct UnambiguousDnf {
    pub arity: usize,
    pub clauses: Vec<Vec<(usize, bool)>>,
}

impl UnambiguousDnf {
    pub fn eval(&self, x: u64) -> bool {
        self.clauses
            .iter()
            .any(|c| c.iter().all(|(v, b)| (x >> v & 1 == 1) == *b))
    }

    /// Exhaustively verify that no input satisfies two clauses.
    pub fn verify_unambiguous(&self) -> Result<bool> {
        if self.arity > 14 {
            return Err(Error::Capacity("unambiguity check capped at n ≤ 14".into()));
        }
        for x in 0..(1u64 << self.arity) {
            let sat = self
                .clauses
                .iter()
                .filter(|c| c.iter().all(|(v, b)| (x >> v & 1 == 1) == *b))
                .count();
            if sat > 1 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Expand a decision tree into its 1-path (or 0-path) DNF.
pub fn dt_to_unambiguous_dnf(
    tree: &DecisionTree,
    arity: usize,
    value: bool,
) -> Result<UnambiguousDnf> {
    if tree.depth() > 20 {
        return Err(Error::Capacity("tree depth > 20".into()));
    }
    Ok(UnambiguousDnf { arity, clauses: tree.paths_with_value(value) })
}

/// Collapse a gate in G(k) fed by decision trees into a gate in G(k) over
/// the trees' path clauses. Orlike tops take 1-path AND clauses, andlike
/// tops 0-path OR clauses. On clause indicators the satisfied (falsified)
/// wire count equals the satisfied (falsified) tree count, so symmetric
/// tops keep their parameters; other tops become explicit tables below the
/// fan-in cap and symbolic piecewise gates above it.
pub fn collapse_gk_over_dts(
    top: &GateSpec,
    k: u32,
    trees: &[DecisionTree],
    arity: usize,
) -> Result<Circuit> {
    let m = trees.len();
    let side = match validate_gk(top, m, k)? {
        GkCheck::Valid(s) => s,
        GkCheck::Invalid { .. } => {
            return Err(Error::Certification(format!(
                "top gate does not certify at bias {k}"
            )))
        }
    };
    let mut nodes: Vec<Node> = Vec::new();
    let mut top_children: Vec<ChildRef> = Vec::new();
    let mut blocks: Vec<u32> = Vec::new();
    let mut width = 0usize;
    for tree in trees {
        let paths = match side {
            Side::OrLike => tree.paths_with_value(true),
            Side::AndLike => tree.paths_with_value(false),
        };
        blocks.push(paths.len() as u32);
        for path in &paths {
            width = width.max(path.len());
            let children: Vec<ChildRef> = path
                .iter()
                .map(|(v, b)| ChildRef::Lit {
                    var: *v as u32,
                    // orlike: AND clause satisfied exactly on the 1-path;
                    // andlike: OR clause falsified exactly on the 0-path
                    negated: match side {
                        Side::OrLike => !*b,
                        Side::AndLike => *b,
                    },
                })
                .collect();
            let gate = match (children.is_empty(), side) {
                (true, Side::OrLike) => GateSpec::Const(true),
                (true, Side::AndLike) => GateSpec::Const(false),
                (false, Side::OrLike) => GateSpec::And,
                (false, Side::AndLike) => GateSpec::Or,
            };
            nodes.push(Node { gate, children });
            top_children.push(ChildRef::Gate((nodes.len() - 1) as u32));
        }
    }
    let total = top_children.len();
    let new_top = collapse_top_gate(top, side, k, m, &blocks, total)?;
    nodes.push(Node { gate: new_top, children: top_children });
    let output = nodes.len() - 1;
    Ok(Circuit {
        arity,
        nodes,
        output,
        meta: DeclaredMeta { depth: 2, bias_k: k, bottom_width: width as u32 },
    })
}

fn collapse_top_gate(
    top: &GateSpec,
    side: Side,
    k: u32,
    m: usize,
    blocks: &[u32],
    total: usize,
) -> Result<GateSpec> {
    if let Some(sym) = to_symmetric(top, side) {
        return Ok(sym);
    }
    let all_ones = top.eval(&vec![true; m])?;
    let all_zeros = top.eval(&vec![false; m])?;
    let const_value = match side {
        Side::OrLike => all_ones,
        Side::AndLike => all_zeros,
    };
    let piece = GateSpec::Piecewise {
        k,
        const_value,
        or_blocks: matches!(side, Side::OrLike),
        base: Box::new(top.clone()),
        blocks: blocks.to_vec(),
    };
    if total <= MAX_TABLE_FANIN {
        let table = piece.to_boolfun(total)?;
        let kk = crate::circuit::minimal_gk(&table, side);
        Ok(GateSpec::TableG { side, k: kk, table })
    } else {
        Ok(piece)
    }
}

/// Canonical symmetric form, if the gate is symmetric.
fn to_symmetric(g: &GateSpec, side: Side) -> Option<GateSpec> {
    Some(match g {
        GateSpec::Const(v) => GateSpec::Const(*v),
        GateSpec::And => GateSpec::SymmetricG {
            side: Side::AndLike,
            k: 1,
            low_values: vec![true],
            const_value: false,
        },
        GateSpec::Or => GateSpec::SymmetricG {
            side: Side::OrLike,
            k: 1,
            low_values: vec![false],
            const_value: true,
        },
        GateSpec::Not => GateSpec::SymmetricG {
            side,
            k: 1,
            low_values: vec![match side {
                Side::OrLike => true,
                Side::AndLike => false,
            }],
            const_value: match side {
                Side::OrLike => false,
                Side::AndLike => true,
            },
        },
        GateSpec::KOr(k) => GateSpec::SymmetricG {
            side: Side::OrLike,
            k: *k,
            low_values: vec![false; *k as usize],
            const_value: true,
        },
        GateSpec::KAnd(k) => GateSpec::SymmetricG {
            side: Side::AndLike,
            k: *k,
            low_values: vec![true; *k as usize],
            const_value: false,
        },
        GateSpec::SymmetricG { .. } => g.clone(),
        _ => return None,
    })
}

/// Exhaustive check of the counting identity behind the collapse: on every
/// input, the number of satisfied trees equals the number of satisfied
/// 1-path clauses across all trees.
pub fn satisfied_clause_identity(trees: &[DecisionTree], arity: usize) -> Result<bool> {
    if arity > 14 {
        return Err(Error::Capacity("identity check capped at n ≤ 14".into()));
    }
    let dnfs: Vec<Vec<Vec<(usize, bool)>>> =
        trees.iter().map(|t| t.paths_with_value(true)).collect();
    for x in 0..(1u64 << arity) {
        let sat_trees = trees.iter().filter(|t| t.eval(x)).count();
        let sat_clauses: usize = dnfs
            .iter()
            .map(|clauses| {
                clauses
                    .iter()
                    .filter(|c| c.iter().all(|(v, b)| (x >> v & 1 == 1) == *b))
                    .count()
            })
            .sum();
        if sat_trees != sat_clauses {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// staged simplification pipeline
// ---------------------------------------------------------------------------

/// Record of one pipeline stage.
#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub p: f64,
    pub t: usize,
    pub succeeded: bool,
    pub resulting_depth: usize,
    pub circuit_digest: String,
}

/// Outcome of one seeded pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub stages: Vec<StageRecord>,
    pub succeeded: bool,
    /// All stage restrictions composed.
    pub restriction: Restriction,
    pub final_tree: Option<DecisionTree>,
}

/// Default stage star-probabilities: the first multi-switch stage uses
/// 1/(128(m·2^k)^{1/w}), later ones 1/(128w(m·2^k)^{1/w}); the closing
/// single-circuit switch uses 1/(40w).
pub fn stage_probability(stage: usize, last: bool, m: usize, k: u32, w: usize) -> f64 {
    let base = (m as f64 * 2f64.powi(k as i32)).powf(1.0 / w as f64);
    if last {
        1.0 / (40.0 * w as f64)
    } else if stage == 0 {
        1.0 / (128.0 * base)
    } else {
        1.0 / (128.0 * w as f64 * base)
    }
}

/// Per-run failure ceiling 4d·2^{-t} for the staged simplification.
pub fn pipeline_bound(d: usize, t: usize) -> f64 {
    4.0 * d as f64 * 2f64.powi(-(t as i32))
}

/// Final decision-tree depth budget (2^d - 1)·t.
pub fn pipeline_depth_budget(d: usize, t: usize) -> usize {
    ((1usize << d) - 1) * t
}

struct Leaf {
    path: Restriction,
    circuit: Circuit,
}

enum PTree {
    Leaf(usize),
    Node { var: usize, lo: Box<PTree>, hi: Box<PTree> },
}

/// Run the staged simplification: d-1 multi-switch stages (with the query
/// budget doubling per stage) interleaved with the collapse, then a closing
/// switch of every leaf into a plain decision tree. A stage that cannot
/// finish within its budget marks the run failed; that is a recorded
/// outcome, not an error.
pub fn simplify_pipeline(
    circuit: &Circuit,
    w: usize,
    t: usize,
    seed: u64,
    p_override: Option<&[f64]>,
    solver: &mut DtSolver,
) -> Result<PipelineOutcome> {
    let n = circuit.arity;
    if n > 14 {
        return Err(Error::Capacity("pipeline capped at n ≤ 14".into()));
    }
    let metrics = circuit.metrics();
    let d = metrics.depth.max(1);
    let k = circuit.meta.bias_k.max(1);
    let m = metrics.gates.max(2);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut stages = Vec::new();
    let mut total_rho = Restriction::all_star(n);
    let mut tree = PTree::Leaf(0);
    let mut leaves = vec![Leaf { path: Restriction::all_star(n), circuit: circuit.clone() }];
    let mut succeeded = true;

    for stage_idx in 0..d {
        let is_last = stage_idx + 1 == d;
        let p = p_override
            .and_then(|ps| ps.get(stage_idx).copied())
            .unwrap_or_else(|| stage_probability(stage_idx, is_last, m, k, w));
        let budget = t << stage_idx;
        let rho = Restriction::sample_rp(n, p, &mut rng)?;
        total_rho = total_rho.compose(&rho)?;
        let mut stage_ok = true;
        let mut new_leaves: Vec<Leaf> = Vec::new();
        let mut leaf_map: Vec<PTree> = Vec::new();
        for leaf in &leaves {
            if !stage_ok {
                break;
            }
            let restricted = leaf.circuit.restrict(&leaf.path.compose(&rho)?)?;
            if is_last {
                match close_leaf(&restricted, budget, solver)? {
                    Some(dt) => {
                        leaf_map.push(const_tree_into_ptree(&dt, &mut new_leaves, &leaf.path, n));
                    }
                    None => stage_ok = false,
                }
            } else {
                match switch_leaf(&restricted, w, budget, &mut rng, solver)? {
                    Some((subtree, subleaves)) => {
                        let base = new_leaves.len();
                        for (path_ext, c) in subleaves {
                            let path = leaf.path.compose(&path_ext)?;
                            new_leaves.push(Leaf { path, circuit: c });
                        }
                        leaf_map.push(offset_ptree(subtree, base));
                    }
                    None => stage_ok = false,
                }
            }
        }
        let digest = new_leaves
            .first()
            .map(|l| l.circuit.digest())
            .unwrap_or_else(|| leaves[0].circuit.digest());
        let resulting_depth = new_leaves
            .iter()
            .map(|l| l.circuit.metrics().depth)
            .max()
            .unwrap_or(0);
        stages.push(StageRecord {
            stage: stage_idx,
            p,
            t: budget,
            succeeded: stage_ok,
            resulting_depth,
            circuit_digest: digest,
        });
        if !stage_ok {
            succeeded = false;
            break;
        }
        tree = graft(tree, &leaf_map);
        leaves = new_leaves;
    }

    let final_tree = if succeeded { Some(ptree_to_dt(&tree, &leaves)) } else { None };
    Ok(PipelineOutcome { stages, succeeded, restriction: total_rho, final_tree })
}

/// Closing stage: the leaf circuit must have decision-tree depth within the
/// budget; return its optimal tree.
fn close_leaf(c: &Circuit, budget: usize, solver: &mut DtSolver) -> Result<Option<DecisionTree>> {
    let f = c.to_boolfun()?;
    solver.tree_within(&f, budget)
}

/// One multi-switch stage at one leaf: build the common partial tree for the
/// bottom depth-2 subcircuits under fresh trial values, and collapse one
/// layer at every completed branch. `None` means the budget was exhausted.
#[allow(clippy::type_complexity)]
fn switch_leaf(
    c: &Circuit,
    w: usize,
    budget: usize,
    rng: &mut ChaCha12Rng,
    solver: &mut DtSolver,
) -> Result<Option<(PTree, Vec<(Restriction, Circuit)>)>> {
    let members = bottom_members(c)?;
    let z: u64 = rng.random::<u64>() & ((1u64 << c.arity) - 1);
    let mut leaves: Vec<(Restriction, Circuit)> = Vec::new();
    let mut asn = Restriction::all_star(c.arity);
    let out = build_common_tree(c, &members, w, budget, 0, z, &mut asn, &mut leaves, solver)?;
    Ok(out.map(|t| (t, leaves)))
}

fn layerize(c: &Circuit) -> Vec<Vec<usize>> {
    let mut dist = vec![0usize; c.nodes.len()];
    let mut maxd = 0usize;
    for (i, node) in c.nodes.iter().enumerate() {
        let mut d = 0;
        for ch in &node.children {
            if let ChildRef::Gate(g) = ch {
                d = d.max(dist[*g as usize]);
            }
        }
        dist[i] = d + 1;
        maxd = maxd.max(dist[i]);
    }
    let mut layers = vec![Vec::new(); maxd];
    for (i, &d) in dist.iter().enumerate() {
        layers[d - 1].push(i);
    }
    layers
}

/// The bottom depth-2 subcircuits: the gates one level above the clause
/// layer (or the bottom gates themselves for depth ≤ 1 circuits, with
/// literal children as unit clauses).
fn bottom_members(c: &Circuit) -> Result<Vec<DepthTwo>> {
    let layers = layerize(c);
    let level = 1.min(layers.len() - 1);
    let mut members = Vec::new();
    for &idx in &layers[level] {
        let k = c.nodes[idx]
            .gate
            .intrinsic_gk(c.nodes[idx].children.len())
            .1
            .max(1);
        members.push(DepthTwo::from_parts(c, idx, k)?);
    }
    Ok(members)
}

#[allow(clippy::too_many_arguments)]
fn build_common_tree(
    c: &Circuit,
    members: &[DepthTwo],
    w: usize,
    budget: usize,
    counter: usize,
    z: u64,
    asn: &mut Restriction,
    leaves: &mut Vec<(Restriction, Circuit)>,
    solver: &mut DtSolver,
) -> Result<Option<PTree>> {
    let rho = asn.clone();
    let mut pick: Option<&DepthTwo> = None;
    for member in members {
        if member_depth_exceeds(member, &rho, w, solver)? {
            pick = Some(member);
            break;
        }
    }
    let Some(member) = pick else {
        // every member is w-shallow along this path: collapse one layer
        let collapsed = collapse_leaf(c, &rho, w, solver)?;
        leaves.push((rho, collapsed));
        return Ok(Some(PTree::Leaf(leaves.len() - 1)));
    };
    let (touched, completed) = cpdt_round_touched(member, &rho, z, budget.saturating_sub(counter));
    if !completed || counter + touched.len() > budget {
        return Ok(None);
    }
    build_branches(c, members, w, budget, counter, z, asn, leaves, solver, &touched, 0)
}

#[allow(clippy::too_many_arguments)]
fn build_branches(
    c: &Circuit,
    members: &[DepthTwo],
    w: usize,
    budget: usize,
    counter: usize,
    z: u64,
    asn: &mut Restriction,
    leaves: &mut Vec<(Restriction, Circuit)>,
    solver: &mut DtSolver,
    touched: &[usize],
    idx: usize,
) -> Result<Option<PTree>> {
    if idx == touched.len() {
        return build_common_tree(
            c,
            members,
            w,
            budget,
            counter + touched.len(),
            z,
            asn,
            leaves,
            solver,
        );
    }
    let v = touched[idx];
    let mut lo = None;
    let mut hi = None;
    for b in [false, true] {
        asn.set(v, if b { Cell::One } else { Cell::Zero });
        let sub =
            build_branches(c, members, w, budget, counter, z, asn, leaves, solver, touched, idx + 1)?;
        asn.set(v, Cell::Star);
        match (b, sub) {
            (false, Some(s)) => lo = Some(s),
            (true, Some(s)) => hi = Some(s),
            (_, None) => return Ok(None),
        }
    }
    Ok(Some(PTree::Node { var: v, lo: Box::new(lo.unwrap()), hi: Box::new(hi.unwrap()) }))
}

fn asn_of(rho: &Restriction) -> Vec<Option<bool>> {
    rho.cells()
        .iter()
        .map(|c| match c {
            Cell::Star => None,
            Cell::Zero => Some(false),
            Cell::One => Some(true),
        })
        .collect()
}

fn member_depth_exceeds(
    member: &DepthTwo,
    rho: &Restriction,
    w: usize,
    solver: &mut DtSolver,
) -> Result<bool> {
    let asn = asn_of(rho);
    let (fun, _) = member.projected_fun(&asn)?;
    Ok(solver.depth(&fun)? > w)
}

/// One round of the canonical partial-tree walk: the variables its batches
/// touch under the trial string z. `completed` is false when the budget ran
/// out with the member still undetermined.
fn cpdt_round_touched(
    member: &DepthTwo,
    rho: &Restriction,
    z: u64,
    budget_left: usize,
) -> (Vec<usize>, bool) {
    let mut y = asn_of(rho);
    let mut touched = Vec::new();
    let mut ctr = 0u32;
    let mut jj = 0usize;
    while jj < member.clauses.len() {
        match member_clause_status(member, jj, &y) {
            MemberStatus::False => jj += 1,
            MemberStatus::True => {
                ctr += 1;
                if ctr == member.k {
                    return (touched, true);
                }
                jj += 1;
            }
            MemberStatus::Open(vars, targets) => {
                if touched.len() >= budget_left {
                    return (touched, false);
                }
                let mut sat = true;
                for (&v, &target) in vars.iter().zip(&targets) {
                    let b = z >> v & 1 == 1;
                    y[v] = Some(b);
                    touched.push(v);
                    if b != target {
                        sat = false;
                    }
                }
                if sat {
                    ctr += 1;
                    if ctr == member.k {
                        return (touched, true);
                    }
                }
                jj += 1;
            }
        }
    }
    (touched, true)
}

enum MemberStatus {
    False,
    True,
    Open(Vec<usize>, Vec<bool>),
}

fn member_clause_status(member: &DepthTwo, idx: usize, y: &[Option<bool>]) -> MemberStatus {
    match &member.clauses[idx] {
        Clause::Const(true) => MemberStatus::True,
        Clause::Const(false) => MemberStatus::False,
        Clause::Ands(lits) => {
            let mut vars = Vec::new();
            let mut targets = Vec::new();
            for lit in lits {
                match y[lit.var] {
                    Some(v) => {
                        if v == lit.negated {
                            return MemberStatus::False;
                        }
                    }
                    None => {
                        vars.push(lit.var);
                        targets.push(!lit.negated);
                    }
                }
            }
            if vars.is_empty() {
                MemberStatus::True
            } else {
                MemberStatus::Open(vars, targets)
            }
        }
    }
}

/// At a completed branch: restrict along the path, replace every
/// second-layer gate by an optimal depth-≤w tree, and collapse the layer
/// above over those trees. Depth-≤2 circuits pass through unchanged.
fn collapse_leaf(
    c: &Circuit,
    rho: &Restriction,
    w: usize,
    solver: &mut DtSolver,
) -> Result<Circuit> {
    let restricted = c.restrict(rho)?;
    let rl = layerize(&restricted);
    if rl.len() <= 2 {
        return Ok(restricted);
    }
    let second: &Vec<usize> = &rl[1];
    let mut tree_of: HashMap<usize, DecisionTree> = HashMap::new();
    for &idx in second {
        let k = restricted.nodes[idx]
            .gate
            .intrinsic_gk(restricted.nodes[idx].children.len())
            .1
            .max(1);
        let member = DepthTwo::from_parts(&restricted, idx, k)?;
        let fun = member.to_boolfun()?;
        let tree = solver.tree_within(&fun, w)?.ok_or_else(|| {
            Error::Certification("leaf member deeper than the switch budget".into())
        })?;
        tree_of.insert(idx, tree);
    }
    // bottom clauses under a layer-2 parent also become (shallow) trees
    let mut new_nodes: Vec<Node> = Vec::new();
    let mut remap: HashMap<usize, u32> = HashMap::new();
    // collapse all layer-3 gates (parents of the switched members)
    if rl.len() >= 3 {
        for &idx in &rl[2] {
            let node = &restricted.nodes[idx];
            let mut trees: Vec<DecisionTree> = Vec::new();
            for ch in &node.children {
                let t = match ch {
                    ChildRef::Lit { var, negated } => DecisionTree::Query {
                        var: *var as usize,
                        if_false: Box::new(DecisionTree::Leaf(*negated)),
                        if_true: Box::new(DecisionTree::Leaf(!*negated)),
                    },
                    ChildRef::Gate(g) => match tree_of.get(&(*g as usize)) {
                        Some(t) => t.clone(),
                        None => {
                            // a bottom clause fed directly into this layer
                            let sub = subcircuit_fun(&restricted, *g as usize)?;
                            solver.tree_within(&sub, w)?.ok_or_else(|| {
                                Error::Certification(
                                    "bottom clause deeper than the switch budget".into(),
                                )
                            })?
                        }
                    },
                };
                trees.push(t);
            }
            let k = node.gate.intrinsic_gk(node.children.len()).1.max(1);
            let collapsed = collapse_gk_over_dts(&node.gate, k, &trees, restricted.arity)?;
            let base = new_nodes.len() as u32;
            for cn in &collapsed.nodes {
                let mut cc = cn.clone();
                for ch in &mut cc.children {
                    if let ChildRef::Gate(g) = ch {
                        *g += base;
                    }
                }
                new_nodes.push(cc);
            }
            remap.insert(idx, base + collapsed.output as u32);
        }
    }
    // copy the remaining structure above, rerouting references
    fn keep(
        idx: usize,
        restricted: &Circuit,
        remap: &mut HashMap<usize, u32>,
        new_nodes: &mut Vec<Node>,
    ) -> u32 {
        if let Some(&i) = remap.get(&idx) {
            return i;
        }
        let node = restricted.nodes[idx].clone();
        let children: Vec<ChildRef> = node
            .children
            .iter()
            .map(|ch| match ch {
                ChildRef::Lit { .. } => *ch,
                ChildRef::Gate(g) => {
                    ChildRef::Gate(keep(*g as usize, restricted, remap, new_nodes))
                }
            })
            .collect();
        new_nodes.push(Node { gate: node.gate, children });
        let id = (new_nodes.len() - 1) as u32;
        remap.insert(idx, id);
        id
    }
    let output = keep(restricted.output, &restricted, &mut remap, &mut new_nodes) as usize;
    let mut out = Circuit { arity: restricted.arity, nodes: new_nodes, output, meta: restricted.meta };
    out.meta.depth = out.meta.depth.saturating_sub(1);
    out.validate()?;
    Ok(out)
}

fn subcircuit_fun(c: &Circuit, top: usize) -> Result<crate::boolfun::BoolFun> {
    let sub = Circuit { arity: c.arity, nodes: c.nodes.clone(), output: top, meta: c.meta };
    sub.to_boolfun()
}

fn const_tree_into_ptree(
    dt: &DecisionTree,
    leaves: &mut Vec<Leaf>,
    path: &Restriction,
    arity: usize,
) -> PTree {
    match dt {
        DecisionTree::Leaf(b) => {
            leaves.push(Leaf {
                path: path.clone(),
                circuit: Circuit {
                    arity,
                    nodes: vec![Node { gate: GateSpec::Const(*b), children: vec![] }],
                    output: 0,
                    meta: DeclaredMeta::default(),
                },
            });
            PTree::Leaf(leaves.len() - 1)
        }
        DecisionTree::Query { var, if_false, if_true } => {
            let mut lo_path = path.clone();
            lo_path.set(*var, Cell::Zero);
            let lo = const_tree_into_ptree(if_false, leaves, &lo_path, arity);
            let mut hi_path = path.clone();
            hi_path.set(*var, Cell::One);
            let hi = const_tree_into_ptree(if_true, leaves, &hi_path, arity);
            PTree::Node { var: *var, lo: Box::new(lo), hi: Box::new(hi) }
        }
    }
}

fn offset_ptree(t: PTree, base: usize) -> PTree {
    match t {
        PTree::Leaf(i) => PTree::Leaf(i + base),
        PTree::Node { var, lo, hi } => PTree::Node {
            var,
            lo: Box::new(offset_ptree(*lo, base)),
            hi: Box::new(offset_ptree(*hi, base)),
        },
    }
}

fn graft(tree: PTree, leaf_map: &[PTree]) -> PTree {
    match tree {
        PTree::Leaf(i) => clone_ptree(&leaf_map[i]),
        PTree::Node { var, lo, hi } => PTree::Node {
            var,
            lo: Box::new(graft(*lo, leaf_map)),
            hi: Box::new(graft(*hi, leaf_map)),
        },
    }
}

fn clone_ptree(t: &PTree) -> PTree {
    match t {
        PTree::Leaf(i) => PTree::Leaf(*i),
        PTree::Node { var, lo, hi } => PTree::Node {
            var: *var,
            lo: Box::new(clone_ptree(lo)),
            hi: Box::new(clone_ptree(hi)),
        },
    }
}

fn ptree_to_dt(tree: &PTree, leaves: &[Leaf]) -> DecisionTree {
    match tree {
        PTree::Leaf(i) => {
            let c = &leaves[*i].circuit;
            match &c.nodes[c.output].gate {
                GateSpec::Const(b) if c.nodes[c.output].children.is_empty() => {
                    DecisionTree::Leaf(*b)
                }
                _ => {
                    let f = c.to_boolfun().expect("leaf eval");
                    DecisionTree::Leaf(f.is_constant().unwrap_or(false))
                }
            }
        }
        PTree::Node { var, lo, hi } => DecisionTree::Query {
            var: *var,
            if_false: Box::new(ptree_to_dt(lo, leaves)),
            if_true: Box::new(ptree_to_dt(hi, leaves)),
        },
    }
}

/// MC sweep over seeded pipeline runs.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineSweep {
    pub runs: u64,
    pub failures: u64,
    pub bound: f64,
    pub max_final_depth: usize,
    pub depth_budget: usize,
}

pub fn pipeline_sweep(
    circuit: &Circuit,
    w: usize,
    t: usize,
    runs: u64,
    seed: u64,
    solver: &mut DtSolver,
) -> Result<PipelineSweep> {
    let d = circuit.metrics().depth.max(1);
    let mut failures = 0;
    let mut max_final_depth = 0usize;
    for i in 0..runs {
        let out = simplify_pipeline(circuit, w, t, seed.wrapping_add(i), None, solver)?;
        if !out.succeeded {
            failures += 1;
        } else if let Some(tree) = &out.final_tree {
            max_final_depth = max_final_depth.max(tree.depth());
            if tree.depth() > pipeline_depth_budget(d, t) {
                return Err(Error::Certification(format!(
                    "final tree depth {} above budget {}",
                    tree.depth(),
                    pipeline_depth_budget(d, t)
                )));
            }
        }
    }
    Ok(PipelineSweep {
        runs,
        failures,
        bound: pipeline_bound(d, t),
        max_final_depth,
        depth_budget: pipeline_depth_budget(d, t),
    })
}
