//! Exact semantics layer: bit-packed truth tables, restrictions, decision
//! trees, and the fast Walsh transform. Everything else in the crate uses
//! this module as the ground-truth oracle.
//!
//! Conventions: variable `i` is bit `i` of the input word (little-endian),
//! the truth-table bit at index `x` is `f(x)`, and the ±1 view of a bit `b`
//! is `(-1)^b` (so bit 0 maps to +1).

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::HashMap;
use std::fmt;

/// Hard cap on truth-table arity (16 MiB bitset at the cap).
pub const MAX_ARITY: usize = 24;
/// Cap on exact decision-tree depth computation.
pub const MAX_DT_ARITY: usize = 14;

fn words_for(n: usize) -> usize {
    (1usize << n).div_ceil(64)
}

/// An n-variable boolean function as a bit-packed truth table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BoolFun {
    arity: usize,
    table: Vec<u64>,
}

impl fmt::Debug for BoolFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoolFun(n={}, {})", self.arity, self.to_hex())
    }
}

impl BoolFun {
    pub fn from_fn(arity: usize, mut f: impl FnMut(u64) -> bool) -> Result<Self> {
        if arity > MAX_ARITY {
            return Err(Error::Capacity(format!("arity {arity} > {MAX_ARITY}")));
        }
        let mut table = vec![0u64; words_for(arity)];
        for x in 0..(1u64 << arity) {
            if f(x) {
                table[(x >> 6) as usize] |= 1 << (x & 63);
            }
        }
        Ok(BoolFun { arity, table })
    }

    pub fn constant(arity: usize, value: bool) -> Self {
        let mut table = vec![if value { !0u64 } else { 0 }; words_for(arity)];
        if value && arity < 6 {
            table[0] = (1u64 << (1 << arity)) - 1;
        }
        BoolFun { arity, table }
    }

    /// The parity of all n input bits.
    pub fn parity(arity: usize) -> Self {
        Self::from_fn(arity, |x| x.count_ones() % 2 == 1).unwrap()
    }

    /// Dictator function x_i.
    pub fn dictator(arity: usize, var: usize) -> Self {
        assert!(var < arity);
        Self::from_fn(arity, |x| (x >> var) & 1 == 1).unwrap()
    }

    pub fn and_all(arity: usize) -> Self {
        Self::from_fn(arity, |x| x == (1u64 << arity) - 1).unwrap()
    }

    pub fn or_all(arity: usize) -> Self {
        Self::from_fn(arity, |x| x != 0).unwrap()
    }

    /// Majority on an odd number of inputs (ties on even arity output 1).
    pub fn majority(arity: usize) -> Self {
        Self::from_fn(arity, |x| 2 * x.count_ones() as usize >= arity).unwrap()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> u64 {
        1u64 << self.arity
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn value(&self, x: u64) -> bool {
        debug_assert!(x < self.len());
        (self.table[(x >> 6) as usize] >> (x & 63)) & 1 == 1
    }

    pub fn table_words(&self) -> &[u64] {
        &self.table
    }

    pub fn is_constant(&self) -> Option<bool> {
        let n = self.arity;
        if n >= 6 {
            if self.table.iter().all(|&w| w == 0) {
                return Some(false);
            }
            if self.table.iter().all(|&w| w == !0) {
                return Some(true);
            }
            None
        } else {
            let mask = (1u64 << (1 << n)) - 1;
            let t = self.table[0] & mask;
            if t == 0 {
                Some(false)
            } else if t == mask {
                Some(true)
            } else {
                None
            }
        }
    }

    pub fn not(&self) -> Self {
        let mut table: Vec<u64> = self.table.iter().map(|w| !w).collect();
        if self.arity < 6 {
            table[0] &= (1u64 << (1 << self.arity)) - 1;
        }
        BoolFun { arity: self.arity, table }
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.arity != other.arity {
            return Err(Error::Dimension(format!(
                "xor arity {} vs {}",
                self.arity, other.arity
            )));
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BoolFun { arity: self.arity, table })
    }

    /// Number of inputs on which the function outputs 1.
    pub fn count_ones(&self) -> u64 {
        if self.arity >= 6 {
            self.table.iter().map(|w| w.count_ones() as u64).sum()
        } else {
            (self.table[0] & ((1u64 << (1 << self.arity)) - 1)).count_ones() as u64
        }
    }

    /// f restricted by rho, over the same ambient arity: g(x) = f(rho ∘ x).
    /// Non-star coordinates of x are ignored.
    pub fn restrict(&self, rho: &Restriction) -> Result<Self> {
        if rho.len() != self.arity {
            return Err(Error::Dimension(format!(
                "restriction length {} vs arity {}",
                rho.len(),
                self.arity
            )));
        }
        let fixed_mask = rho.fixed_mask();
        let fixed_vals = rho.fixed_values();
        Self::from_fn(self.arity, |x| {
            self.value((x & !fixed_mask) | fixed_vals)
        })
    }

    /// Variables the function actually depends on.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for i in 0..self.arity {
            let mut live = false;
            for x in 0..self.len() {
                if x >> i & 1 == 0 && self.value(x) != self.value(x | (1 << i)) {
                    live = true;
                    break;
                }
            }
            if live {
                out.push(i);
            }
        }
        out
    }

    /// Project onto the given variables (in order); all other variables are
    /// fixed to 0. When `vars` covers the support this is semantics-preserving.
    pub fn project(&self, vars: &[usize]) -> Self {
        let m = vars.len();
        let mut table = vec![0u64; words_for(m)];
        for y in 0..(1u64 << m) {
            let mut x = 0u64;
            for (j, &v) in vars.iter().enumerate() {
                if y >> j & 1 == 1 {
                    x |= 1 << v;
                }
            }
            if self.value(x) {
                table[(y >> 6) as usize] |= 1 << (y & 63);
            }
        }
        BoolFun { arity: m, table }
    }

    /// Exact correlation E_x[(-1)^{f(x)+g(x)}] by full enumeration.
    pub fn correlation(&self, other: &Self) -> Result<f64> {
        if self.arity != other.arity {
            return Err(Error::Dimension(format!(
                "correlation arity {} vs {}",
                self.arity, other.arity
            )));
        }
        let diff = self.xor(other)?.count_ones();
        let total = self.len();
        Ok((total as f64 - 2.0 * diff as f64) / total as f64)
    }

    /// Mean of the 0/1 outputs over the uniform distribution.
    pub fn mean(&self) -> f64 {
        self.count_ones() as f64 / self.len() as f64
    }

    /// Hex serialization of the table, little-endian bytes (byte j holds
    /// inputs 8j..8j+8), lowercase.
    pub fn to_hex(&self) -> String {
        let nbytes = (1usize << self.arity).div_ceil(8);
        let mut bytes = Vec::with_capacity(nbytes);
        for j in 0..nbytes {
            let word = self.table[j / 8];
            bytes.push((word >> (8 * (j % 8))) as u8);
        }
        hex::encode(bytes)
    }

    pub fn from_hex(arity: usize, s: &str) -> Result<Self> {
        if arity > MAX_ARITY {
            return Err(Error::Capacity(format!("arity {arity} > {MAX_ARITY}")));
        }
        let bytes = hex::decode(s).map_err(|e| Error::Parse(format!("bad hex: {e}")))?;
        let nbytes = (1usize << arity).div_ceil(8);
        if bytes.len() != nbytes {
            return Err(Error::Parse(format!(
                "expected {nbytes} table bytes for arity {arity}, got {}",
                bytes.len()
            )));
        }
        let mut table = vec![0u64; words_for(arity)];
        for (j, &b) in bytes.iter().enumerate() {
            table[j / 8] |= (b as u64) << (8 * (j % 8));
        }
        if arity < 3 {
            table[0] &= (1u64 << (1 << arity)) - 1;
        }
        Ok(BoolFun { arity, table })
    }

    /// Walsh-Hadamard transform on the ±1 view: coefficient at subset-mask S
    /// is E_x[(-1)^{f(x)} (-1)^{|S ∧ x|}].
    pub fn wht(&self) -> FourierSpectrum {
        let n = self.arity;
        let size = 1usize << n;
        let mut a: Vec<f64> = (0..size as u64)
            .map(|x| if self.value(x) { -1.0 } else { 1.0 })
            .collect();
        let mut h = 1usize;
        while h < size {
            for start in (0..size).step_by(h * 2) {
                for i in start..start + h {
                    let (u, v) = (a[i], a[i + h]);
                    a[i] = u + v;
                    a[i + h] = u - v;
                }
            }
            h *= 2;
        }
        let scale = 1.0 / size as f64;
        for c in &mut a {
            *c *= scale;
        }
        FourierSpectrum { arity: n, coeffs: a }
    }
}

/// A cell of a restriction string over {0, 1, ★}.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Cell {
    Zero,
    One,
    Star,
}

/// A partial assignment rho ∈ {0,1,★}^n.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Restriction {
    cells: Vec<Cell>,
}

impl fmt::Debug for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .cells
            .iter()
            .map(|c| match c {
                Cell::Zero => '0',
                Cell::One => '1',
                Cell::Star => '*',
            })
            .collect();
        write!(f, "Restriction({s})")
    }
}

impl Restriction {
    pub fn new(cells: Vec<Cell>) -> Self {
        Restriction { cells }
    }

    pub fn all_star(n: usize) -> Self {
        Restriction { cells: vec![Cell::Star; n] }
    }

    /// rho(Λ, z): stars on the index set, z elsewhere.
    pub fn from_star_set(n: usize, stars: u64, z: u64) -> Self {
        let cells = (0..n)
            .map(|i| {
                if stars >> i & 1 == 1 {
                    Cell::Star
                } else if z >> i & 1 == 1 {
                    Cell::One
                } else {
                    Cell::Zero
                }
            })
            .collect();
        Restriction { cells }
    }

    /// Parse a string over {0,1,*}.
    pub fn parse(s: &str) -> Result<Self> {
        let cells = s
            .chars()
            .map(|c| match c {
                '0' => Ok(Cell::Zero),
                '1' => Ok(Cell::One),
                '*' | '.' => Ok(Cell::Star),
                other => Err(Error::Parse(format!("bad restriction char {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Restriction { cells })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, i: usize) -> Cell {
        self.cells[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn set(&mut self, i: usize, c: Cell) {
        self.cells[i] = c;
    }

    pub fn star_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Star).count()
    }

    pub fn star_mask(&self) -> u64 {
        let mut m = 0u64;
        for (i, c) in self.cells.iter().enumerate() {
            if *c == Cell::Star {
                m |= 1 << i;
            }
        }
        m
    }

    pub fn fixed_mask(&self) -> u64 {
        let mut m = 0u64;
        for (i, c) in self.cells.iter().enumerate() {
            if *c != Cell::Star {
                m |= 1 << i;
            }
        }
        m
    }

    pub fn fixed_values(&self) -> u64 {
        let mut m = 0u64;
        for (i, c) in self.cells.iter().enumerate() {
            if *c == Cell::One {
                m |= 1 << i;
            }
        }
        m
    }

    /// Composition: cells fixed by self win, the rest come from other.
    pub fn compose(&self, other: &Restriction) -> Result<Restriction> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "compose lengths {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| if *a != Cell::Star { *a } else { *b })
            .collect();
        Ok(Restriction { cells })
    }

    /// Complete with an input word: stars filled from x.
    pub fn complete(&self, x: u64) -> u64 {
        (x & !self.fixed_mask()) | self.fixed_values()
    }

    /// Sample from R_p: each cell independently ★ with probability p, else a
    /// uniform bit.
    pub fn sample_rp(n: usize, p: f64, rng: &mut impl Rng) -> Result<Restriction> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("p = {p} outside [0,1]")));
        }
        let cells = (0..n)
            .map(|_| {
                if rng.random::<f64>() < p {
                    Cell::Star
                } else if rng.random::<bool>() {
                    Cell::One
                } else {
                    Cell::Zero
                }
            })
            .collect();
        Ok(Restriction { cells })
    }
}

/// A binary decision tree; `Query` branches on one variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DecisionTree {
    Leaf(bool),
    Query {
        var: usize,
        if_false: Box<DecisionTree>,
        if_true: Box<DecisionTree>,
    },
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Query { if_false, if_true, .. } => {
                1 + if_false.depth().max(if_true.depth())
            }
        }
    }

    pub fn eval(&self, x: u64) -> bool {
        match self {
            DecisionTree::Leaf(b) => *b,
            DecisionTree::Query { var, if_false, if_true } => {
                if x >> var & 1 == 1 {
                    if_true.eval(x)
                } else {
                    if_false.eval(x)
                }
            }
        }
    }

    pub fn to_boolfun(&self, arity: usize) -> Result<BoolFun> {
        BoolFun::from_fn(arity, |x| self.eval(x))
    }

    /// Root-to-leaf paths reaching leaves of the given value, each as a list
    /// of (variable, required bit). No variable repeats on a path.
    pub fn paths_with_value(&self, value: bool) -> Vec<Vec<(usize, bool)>> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        fn walk(
            t: &DecisionTree,
            value: bool,
            path: &mut Vec<(usize, bool)>,
            out: &mut Vec<Vec<(usize, bool)>>,
        ) {
            match t {
                DecisionTree::Leaf(b) => {
                    if *b == value {
                        out.push(path.clone());
                    }
                }
                DecisionTree::Query { var, if_false, if_true } => {
                    path.push((*var, false));
                    walk(if_false, value, path, out);
                    path.pop();
                    path.push((*var, true));
                    walk(if_true, value, path, out);
                    path.pop();
                }
            }
        }
        walk(self, value, &mut path, &mut out);
        out
    }

    /// Random tree of exactly the given depth shape (full binary skeleton,
    /// variables drawn without repetition along each path, random leaves).
    pub fn random(arity: usize, depth: usize, rng: &mut impl Rng) -> Self {
        fn build(arity: usize, depth: usize, used: &mut Vec<usize>, rng: &mut impl Rng) -> DecisionTree {
            if depth == 0 || used.len() == arity {
                return DecisionTree::Leaf(rng.random());
            }
            let mut var = rng.random_range(0..arity);
            while used.contains(&var) {
                var = rng.random_range(0..arity);
            }
            used.push(var);
            let lo = build(arity, depth - 1, used, rng);
            let hi = build(arity, depth - 1, used, rng);
            used.pop();
            DecisionTree::Query { var, if_false: Box::new(lo), if_true: Box::new(hi) }
        }
        build(arity, depth, &mut Vec::new(), rng)
    }
}

/// Exact minimal decision-tree depth via memoized minimax over restrictions.
/// The memo is keyed by the projected truth table of the live subfunction,
/// which dedups states that are equal as functions.
pub struct DtSolver {
    memo: HashMap<(u8, Box<[u64]>), u8>,
}

impl Default for DtSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl DtSolver {
    pub fn new() -> Self {
        DtSolver { memo: HashMap::new() }
    }

    /// Minimal decision-tree depth of f. Errors above the support cap.
    pub fn depth(&mut self, f: &BoolFun) -> Result<usize> {
        let sup = f.support();
        if sup.len() > MAX_DT_ARITY {
            return Err(Error::Capacity(format!(
                "dt_depth support {} > {MAX_DT_ARITY}",
                sup.len()
            )));
        }
        let proj = f.project(&sup);
        Ok(self.rec(proj.arity as u8, &proj.table) as usize)
    }

    pub fn depth_at_most(&mut self, f: &BoolFun, w: usize) -> Result<bool> {
        Ok(self.depth(f)? <= w)
    }

    fn rec(&mut self, m: u8, table: &[u64]) -> u8 {
        if table_constant(m, table).is_some() {
            return 0;
        }
        if m == 1 {
            return 1;
        }
        let key = (m, table.to_vec().into_boxed_slice());
        if let Some(&d) = self.memo.get(&key) {
            return d;
        }
        let mut best = m;
        for i in 0..m {
            let t0 = halve(m, table, i, false);
            let t1 = halve(m, table, i, true);
            if t0 == t1 {
                // dead variable
                continue;
            }
            let d0 = self.rec(m - 1, &t0);
            if d0 + 1 >= best {
                continue;
            }
            let d1 = self.rec(m - 1, &t1);
            let d = 1 + d0.max(d1);
            if d < best {
                best = d;
                if best == 1 {
                    break;
                }
            }
        }
        self.memo.insert(key, best);
        best
    }

    /// An optimal-depth decision tree when depth(f) ≤ budget.
    pub fn tree_within(&mut self, f: &BoolFun, budget: usize) -> Result<Option<DecisionTree>> {
        let sup = f.support();
        if sup.len() > MAX_DT_ARITY {
            return Err(Error::Capacity(format!(
                "dt tree support {} > {MAX_DT_ARITY}",
                sup.len()
            )));
        }
        let proj = f.project(&sup);
        if self.rec(proj.arity as u8, &proj.table) as usize > budget {
            return Ok(None);
        }
        Ok(Some(self.build_tree(proj.arity as u8, &proj.table, &sup)))
    }

    fn build_tree(&mut self, m: u8, table: &[u64], vars: &[usize]) -> DecisionTree {
        if let Some(b) = table_constant(m, table) {
            return DecisionTree::Leaf(b);
        }
        let target = self.rec(m, table);
        for i in 0..m {
            let t0 = halve(m, table, i, false);
            let t1 = halve(m, table, i, true);
            if t0 == t1 {
                continue;
            }
            let d = 1 + self.rec(m - 1, &t0).max(self.rec(m - 1, &t1));
            if d == target {
                let mut sub_vars: Vec<usize> = vars.to_vec();
                let var = sub_vars.remove(i as usize);
                let lo = self.build_tree(m - 1, &t0, &sub_vars);
                let hi = self.build_tree(m - 1, &t1, &sub_vars);
                return DecisionTree::Query {
                    var,
                    if_false: Box::new(lo),
                    if_true: Box::new(hi),
                };
            }
        }
        unreachable!("no variable achieves the memoized optimum");
    }
}

fn table_constant(m: u8, table: &[u64]) -> Option<bool> {
    let bits = 1usize << m;
    if bits >= 64 {
        if table.iter().all(|&w| w == 0) {
            Some(false)
        } else if table.iter().all(|&w| w == !0) {
            Some(true)
        } else {
            None
        }
    } else {
        let mask = (1u64 << bits) - 1;
        let t = table[0] & mask;
        if t == 0 {
            Some(false)
        } else if t == mask {
            Some(true)
        } else {
            None
        }
    }
}

/// Restrict variable i of an m-variable packed table to the given bit and
/// drop it, producing an (m-1)-variable table.
fn halve(m: u8, table: &[u64], i: u8, bit: bool) -> Vec<u64> {
    let m_out = m - 1;
    let out_bits = 1usize << m_out;
    let mut out = vec![0u64; out_bits.div_ceil(64)];
    let below = (1u64 << i) - 1;
    for y in 0..out_bits as u64 {
        let x = (y & below) | ((y & !below) << 1) | ((bit as u64) << i);
        if (table[(x >> 6) as usize] >> (x & 63)) & 1 == 1 {
            out[(y >> 6) as usize] |= 1 << (y & 63);
        }
    }
    out
}

/// The Fourier spectrum of an n-variable function on the ±1 view, indexed by
/// subset mask.
#[derive(Clone, Debug)]
pub struct FourierSpectrum {
    arity: usize,
    coeffs: Vec<f64>,
}

impl FourierSpectrum {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coeff(&self, mask: u64) -> f64 {
        self.coeffs[mask as usize]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Σ_S f̂(S)^2; equals 1 (to 1e-9) for ±1-valued functions.
    pub fn total_weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// W^{≥ℓ}: squared mass at levels ≥ ℓ.
    pub fn tail_weight(&self, level: usize) -> f64 {
        self.tail_weight_real(level as f64)
    }

    /// Squared mass on |S| ≥ x for a real threshold x.
    pub fn tail_weight_real(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| (s.count_ones() as f64) >= x)
            .map(|(_, c)| c * c)
            .sum()
    }

    /// Σ_{|S|=ℓ} |f̂(S)|.
    pub fn level_l1(&self, level: usize) -> Result<f64> {
        if level > self.arity {
            return Err(Error::Parameter(format!(
                "level {level} > arity {}",
                self.arity
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(s, _)| s.count_ones() as usize == level)
            .map(|(_, c)| c.abs())
            .sum())
    }

    /// Degree-k total influence via Inf^k = Σ_T binom(|T|, k) f̂(T)^2.
    pub fn influence_k(&self, k: usize) -> Result<f64> {
        if k > self.arity {
            return Err(Error::Parameter(format!("k {k} > arity {}", self.arity)));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(s, c)| binom(s.count_ones() as usize, k) * c * c)
            .sum())
    }

    /// Largest |S| with |f̂(S)| > 1e-9, or 0 for the zero spectrum.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > 1e-9)
            .map(|(s, _)| s.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Inverse transform back to a truth table (involution check helper).
    pub fn to_boolfun(&self) -> Result<BoolFun> {
        let size = 1usize << self.arity;
        let mut a = self.coeffs.clone();
        let mut h = 1usize;
        while h < size {
            for start in (0..size).step_by(h * 2) {
                for i in start..start + h {
                    let (u, v) = (a[i], a[i + h]);
                    a[i] = u + v;
                    a[i + h] = u - v;
                }
            }
            h *= 2;
        }
        BoolFun::from_fn(self.arity, |x| a[x as usize] < 0.0)
    }
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0f64;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

pub fn binom_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i as u128 + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn restrict_parity_with_fixed_one() {
        // PAR_3 under (*,1,*) is x0 ⊕ x2 ⊕ 1 on all 8 inputs.
        let f = BoolFun::parity(3);
        let rho = Restriction::parse("*1*").unwrap();
        let g = f.restrict(&rho).unwrap();
        for x in 0..8u64 {
            let expect = ((x & 1) ^ (x >> 2 & 1)) == 0;
            assert_eq!(g.value(x), expect);
        }
    }

    #[test]
    fn restrict_identity_and_absorbing() {
        let f = BoolFun::majority(3);
        let rho = Restriction::all_star(3);
        assert_eq!(f.restrict(&rho).unwrap(), f);

        let and2 = BoolFun::and_all(2);
        let rho = Restriction::parse("0*").unwrap();
        assert_eq!(and2.restrict(&rho).unwrap().is_constant(), Some(false));
    }

    #[test]
    fn compose_definition_and_identities() {
        let a = Restriction::parse("*1").unwrap();
        let b = Restriction::parse("00").unwrap();
        assert_eq!(a.compose(&b).unwrap(), Restriction::parse("01").unwrap());

        let rho = Restriction::parse("0*1").unwrap();
        let stars = Restriction::all_star(3);
        assert_eq!(rho.compose(&stars).unwrap(), rho);
        assert_eq!(stars.compose(&rho).unwrap(), rho);
    }

    #[test]
    fn restrict_compose_coherence() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let f = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let r1 = Restriction::sample_rp(n, 0.4, &mut rng).unwrap();
            let r2 = Restriction::sample_rp(n, 0.4, &mut rng).unwrap();
            let lhs = f.restrict(&r1.compose(&r2).unwrap()).unwrap();
            let rhs = f.restrict(&r1).unwrap().restrict(&r2).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn sample_rp_degenerate_and_concentration() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let r0 = Restriction::sample_rp(40, 0.0, &mut rng).unwrap();
        assert_eq!(r0.star_count(), 0);
        let r1 = Restriction::sample_rp(40, 1.0, &mut rng).unwrap();
        assert_eq!(r1.star_count(), 40);

        // n = 10^4, p = 1/2: star fraction within 5 sigma of 1/2.
        let n = 10_000usize;
        let mut stars = 0usize;
        for i in 0..n {
            let r = Restriction::sample_rp(1, 0.5, &mut ChaCha12Rng::seed_from_u64(i as u64)).unwrap();
            stars += r.star_count();
        }
        let sigma = (0.25 * n as f64).sqrt();
        assert!((stars as f64 - n as f64 / 2.0).abs() <= 5.0 * sigma);
        assert!(Restriction::sample_rp(4, 1.5, &mut rng).is_err());
    }

    #[test]
    fn dt_depth_known_values() {
        let mut solver = DtSolver::new();
        assert_eq!(solver.depth(&BoolFun::constant(5, true)).unwrap(), 0);
        for n in 1..=6 {
            assert_eq!(solver.depth(&BoolFun::parity(n)).unwrap(), n);
            assert_eq!(solver.depth(&BoolFun::and_all(n)).unwrap(), n);
        }
        assert_eq!(solver.depth(&BoolFun::majority(3)).unwrap(), 3);
    }

    #[test]
    fn dt_depth_monotone_under_restriction() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut solver = DtSolver::new();
        for _ in 0..50 {
            let n = rng.random_range(1..=7);
            let f = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let rho = Restriction::sample_rp(n, 0.5, &mut rng).unwrap();
            let d0 = solver.depth(&f).unwrap();
            let d1 = solver.depth(&f.restrict(&rho).unwrap()).unwrap();
            assert!(d1 <= d0);
        }
    }

    #[test]
    fn dt_tree_matches_depth_and_function() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut solver = DtSolver::new();
        for _ in 0..40 {
            let n = rng.random_range(1..=6);
            let f = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let d = solver.depth(&f).unwrap();
            let t = solver.tree_within(&f, d).unwrap().unwrap();
            assert_eq!(t.depth(), d);
            assert_eq!(t.to_boolfun(n).unwrap(), f);
            if d > 0 {
                assert!(solver.tree_within(&f, d - 1).unwrap().is_none());
            }
        }
    }

    #[test]
    fn wht_characters_and_majority() {
        let s = BoolFun::parity(2).wht();
        for mask in 0..4u64 {
            let expect = if mask == 3 { 1.0 } else { 0.0 };
            assert!((s.coeff(mask) - expect).abs() < 1e-12);
        }
        let s = BoolFun::dictator(3, 0).wht();
        assert!((s.coeff(1) - 1.0).abs() < 1e-12);

        // MAJ_3: singletons 1/2 each, top -1/2 (brute-force oracle below).
        let f = BoolFun::majority(3);
        let s = f.wht();
        for mask in [1u64, 2, 4] {
            assert!((s.coeff(mask) - 0.5).abs() < 1e-12);
        }
        assert!((s.coeff(7) + 0.5).abs() < 1e-12);
        // independent oracle: averaged character sums
        for mask in 0..8u64 {
            let mut acc = 0.0;
            for x in 0..8u64 {
                let sign = if f.value(x) { -1.0 } else { 1.0 };
                let chi = if (x & mask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                acc += sign * chi / 8.0;
            }
            assert!((s.coeff(mask) - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_and_involution() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(1..=10);
            let f = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let s = f.wht();
            assert!((s.total_weight() - 1.0).abs() <= 1e-9);
            assert_eq!(s.to_boolfun().unwrap(), f);
        }
    }

    #[test]
    fn tails_l1_influence() {
        let n = 6;
        let s = BoolFun::parity(n).wht();
        assert!((s.tail_weight(n) - 1.0).abs() < 1e-12);
        for k in 0..=n {
            assert!((s.influence_k(k).unwrap() - binom(n, k)).abs() < 1e-9);
        }
        let maj = BoolFun::majority(3).wht();
        assert!((maj.tail_weight(1) - 1.0).abs() < 1e-12);
        assert!((maj.tail_weight(0) - 1.0).abs() < 1e-12);
        assert!(maj.level_l1(0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn correlation_matches_plancherel() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.random_range(1..=8);
            let f = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let g = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let c = f.correlation(&g).unwrap();
            let sf = f.wht();
            let sg = g.wht();
            let dot: f64 = sf
                .coeffs()
                .iter()
                .zip(sg.coeffs())
                .map(|(a, b)| a * b)
                .sum();
            assert!((c - dot).abs() <= 1e-9);
        }
        let f = BoolFun::parity(4);
        assert!((f.correlation(&f).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.correlation(&f.not()).unwrap() + 1.0).abs() < 1e-12);
        let x1 = BoolFun::dictator(2, 0);
        assert!(x1.correlation(&BoolFun::parity(2)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tree_mass_bounded_by_depth() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = 8;
            let d = rng.random_range(0..=3);
            let t = DecisionTree::random(n, d, &mut rng);
            let f = t.to_boolfun(n).unwrap();
            let s = f.wht();
            assert!(s.tail_weight(t.depth() + 1) <= 1e-9);
        }
    }

    #[test]
    fn hex_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        for n in 0..=10 {
            let f = BoolFun::from_fn(n, |_| rng.random()).unwrap();
            let h = f.to_hex();
            assert_eq!(BoolFun::from_hex(n, &h).unwrap(), f);
        }
    }
}
