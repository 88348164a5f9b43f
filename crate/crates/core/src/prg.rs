//! Pseudorandom primitives: small-bias strings by field powering, exact and
//! approximate k-wise independent sources by polynomial evaluation, k-wise
//! independent hash partitions, the decision-tree generator built on them,
//! and the recursive hash-partition generator for constant-depth circuits
//! with biased gates.
//!
//! All field arithmetic is over GF(2^r) with the lexicographically smallest
//! irreducible trinomial x^r + x^a + 1 (pentanomial fallback), computed once
//! and cached, so outputs are bit-reproducible across runs and platforms.

use crate::boolfun::{DecisionTree, Restriction};
use crate::error::{Error, Result};
use crate::stats::{bernoulli_sigma, wilson_ci};
use crate::switching::{cpdt_fails, derand_bound, Family};
use crate::boolfun::DtSolver;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::OnceLock;

/// Largest supported field degree. Requests that would need a larger field
/// saturate to the exact uniform source (which satisfies every (ε,k)
/// guarantee), keeping the construction total at desk scale.
pub const MAX_FIELD_DEGREE: u32 = 30;

/// Multiply two GF(2)[x] polynomials (carryless).
fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut a = a as u128;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

fn poly_degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn poly_mod(mut p: u128, m: u64) -> u64 {
    let md = poly_degree(m as u128);
    while poly_degree(p) >= md {
        p ^= (m as u128) << (poly_degree(p) - md);
    }
    p as u64
}

/// x^(2^r) ≡ x (mod f) and gcd checks via repeated squaring certify
/// irreducibility over GF(2).
fn is_irreducible(f: u64, r: u32) -> bool {
    // compute x^(2^i) mod f iteratively; require x^(2^r) = x and
    // x^(2^d) ≠ x for proper divisors d of r
    let mut x = 0b10u64; // the polynomial x
    let mut powers = Vec::with_capacity(r as usize + 1);
    powers.push(x);
    for _ in 0..r {
        x = poly_mod(clmul(x, x), f);
        powers.push(x);
    }
    if powers[r as usize] != 0b10 {
        return false;
    }
    for d in 1..r {
        if r % d == 0 && powers[d as usize] == 0b10 {
            return false;
        }
    }
    true
}

/// The canonical irreducible modulus for GF(2^r).
pub fn field_modulus(r: u32) -> u64 {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0u64; MAX_FIELD_DEGREE as usize + 1];
        for r in 1..=MAX_FIELD_DEGREE {
            if r == 1 {
                t[1] = 0b11; // x + 1
                continue;
            }
            let top = 1u64 << r;
            let mut found = 0u64;
            for a in 1..r {
                let cand = top | (1 << a) | 1;
                if is_irreducible(cand, r) {
                    found = cand;
                    break;
                }
            }
            if found == 0 {
                'pent: for a in 3..r {
                    for b in 2..a {
                        for c in 1..b {
                            let cand = top | (1 << a) | (1 << b) | (1 << c) | 1;
                            if is_irreducible(cand, r) {
                                found = cand;
                                break 'pent;
                            }
                        }
                    }
                }
            }
            assert!(found != 0, "no low-weight irreducible of degree {r}");
            t[r as usize] = found;
        }
        t
    });
    assert!(r >= 1 && r <= MAX_FIELD_DEGREE);
    table[r as usize]
}

/// GF(2^r) arithmetic with the canonical modulus.
#[derive(Clone, Copy, Debug)]
pub struct BinaryField {
    pub degree: u32,
    modulus: u64,
}

impl BinaryField {
    pub fn new(degree: u32) -> Result<BinaryField> {
        if degree == 0 || degree > MAX_FIELD_DEGREE {
            return Err(Error::Capacity(format!(
                "field degree {degree} outside 1..={MAX_FIELD_DEGREE}"
            )));
        }
        Ok(BinaryField { degree, modulus: field_modulus(degree) })
    }

    pub fn size(&self) -> u64 {
        1u64 << self.degree
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        poly_mod(clmul(a, b), self.modulus)
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    /// Evaluate a polynomial given low-to-high coefficients.
    pub fn eval_poly(&self, coeffs: &[u64], x: u64) -> u64 {
        let mut acc = 0u64;
        for &c in coeffs.iter().rev() {
            acc = self.mul(acc, x) ^ c;
        }
        acc
    }
}

/// A bit string of fixed length (little-endian packing).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitString {
    pub len: usize,
    pub words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> BitString {
        BitString { len, words: vec![0; len.div_ceil(64)] }
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        if b {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn xor_with(&mut self, other: &BitString) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and_with(&mut self, other: &BitString) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn as_u64(&self) -> u64 {
        assert!(self.len <= 64);
        if self.len == 0 {
            0
        } else if self.len == 64 {
            self.words[0]
        } else {
            self.words[0] & ((1u64 << self.len) - 1)
        }
    }

    pub fn from_u64(len: usize, x: u64) -> BitString {
        let mut s = BitString::zeros(len);
        if len > 0 {
            s.words[0] = if len >= 64 { x } else { x & ((1u64 << len) - 1) };
        }
        s
    }
}

/// A consumable stream of seed bits (deterministic given the master seed).
pub struct SeedStream {
    rng: ChaCha12Rng,
    pub bits_drawn: usize,
}

impl SeedStream {
    pub fn new(master_seed: u64) -> SeedStream {
        SeedStream { rng: ChaCha12Rng::seed_from_u64(master_seed), bits_drawn: 0 }
    }

    pub fn take_bits(&mut self, n: usize) -> BitString {
        let mut s = BitString::zeros(n);
        for w in 0..n.div_ceil(64) {
            s.words[w] = self.rng.next_u64();
        }
        if n % 64 != 0 && !s.words.is_empty() {
            let last = s.words.len() - 1;
            s.words[last] &= (1u64 << (n % 64)) - 1;
        }
        self.bits_drawn += n;
        s
    }

    pub fn take_field_elems(&mut self, count: usize, field: &BinaryField) -> Vec<u64> {
        let r = field.degree as usize;
        (0..count)
            .map(|_| {
                let bits = self.take_bits(r);
                bits.words.first().copied().unwrap_or(0) & ((1u64 << r) - 1)
            })
            .collect()
    }
}

/// The generator kinds, mirroring the seeded-source table.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceKind {
    /// Exact uniform bits (the saturation target of every other source).
    Uniform { n: usize },
    /// Small-bias string by field powering: bit i = ⟨x^i · y⟩.
    EpsBiased { n: usize, eps: f64 },
    /// (ε,k)-wise source: small-bias with the bias budget ε·2^{-k/2}.
    EpsKWise { n: usize, k: usize, eps: f64 },
    /// Exactly k-wise independent bits by degree-<k polynomial evaluation.
    KWiseExact { n: usize, k: usize },
    /// Fooler for depth-t decision trees: an (ε·2^{-t}, t)-wise source.
    DtPrg { n: usize, t: usize, eps: f64 },
}

/// A seeded source: a deterministic map from seed bits to an n-bit string.
#[derive(Clone, Debug)]
pub struct SeededSource {
    pub kind: SourceKind,
    /// The kind actually instantiated after saturation.
    resolved: ResolvedSource,
}

#[derive(Clone, Debug)]
enum ResolvedSource {
    Uniform { n: usize },
    Powering { n: usize, degree: u32 },
    PolyEval { n: usize, k: usize, degree: u32 },
}

impl SeededSource {
    pub fn new(kind: SourceKind) -> Result<SeededSource> {
        let resolved = match &kind {
            SourceKind::Uniform { n } => ResolvedSource::Uniform { n: *n },
            SourceKind::EpsBiased { n, eps } => resolve_biased(*n, *eps),
            SourceKind::EpsKWise { n, k, eps } => resolve_k_wise(*n, *k, *eps),
            SourceKind::KWiseExact { n, k } => {
                if *k >= *n {
                    ResolvedSource::Uniform { n: *n }
                } else {
                    let degree = point_degree(*n);
                    ResolvedSource::PolyEval { n: *n, k: *k, degree }
                }
            }
            SourceKind::DtPrg { n, t, eps } => {
                if *t > 20 {
                    return Err(Error::Capacity(format!("tree fooler depth {t} > 20")));
                }
                resolve_k_wise(*n, *t, eps * 2f64.powi(-(*t as i32)))
            }
        };
        Ok(SeededSource { kind, resolved })
    }

    pub fn n(&self) -> usize {
        match &self.resolved {
            ResolvedSource::Uniform { n } => *n,
            ResolvedSource::Powering { n, .. } => *n,
            ResolvedSource::PolyEval { n, .. } => *n,
        }
    }

    /// Seed length in bits.
    pub fn seed_bits(&self) -> usize {
        match &self.resolved {
            ResolvedSource::Uniform { n } => *n,
            ResolvedSource::Powering { degree, .. } => 2 * *degree as usize,
            ResolvedSource::PolyEval { k, degree, .. } => k * *degree as usize,
        }
    }

    /// Whether the source degraded to exact uniform bits.
    pub fn saturated(&self) -> bool {
        matches!(self.resolved, ResolvedSource::Uniform { .. })
            && !matches!(self.kind, SourceKind::Uniform { .. })
    }

    /// Generate from an explicit seed (must carry `seed_bits()` bits).
    pub fn output(&self, seed: &BitString) -> Result<BitString> {
        if seed.len != self.seed_bits() {
            return Err(Error::Dimension(format!(
                "seed length {} vs required {}",
                seed.len,
                self.seed_bits()
            )));
        }
        Ok(match &self.resolved {
            ResolvedSource::Uniform { n } => {
                let mut s = seed.clone();
                s.len = *n;
                s
            }
            ResolvedSource::Powering { n, degree } => {
                let field = BinaryField::new(*degree)?;
                let r = *degree as usize;
                let mask = (1u64 << r) - 1;
                let x = seed.words[0] & mask;
                let y = if 2 * r <= 64 {
                    (seed.words[0] >> r) & mask
                } else {
                    ((seed.words[0] >> r) | (seed.words[1] << (64 - r))) & mask
                };
                let mut out = BitString::zeros(*n);
                let mut xi = 1u64; // x^0
                for i in 0..*n {
                    // bit i = parity of the bits of x^i · y, a nonzero linear
                    // functional of y for every nonzero power sum
                    let prod = field.mul(xi, y);
                    out.set(i, prod.count_ones() % 2 == 1);
                    xi = field.mul(xi, x);
                }
                out
            }
            ResolvedSource::PolyEval { n, k, degree } => {
                let field = BinaryField::new(*degree)?;
                let r = *degree as usize;
                let mask = (1u64 << r) - 1;
                let coeffs: Vec<u64> = (0..*k)
                    .map(|i| {
                        let mut w = 0u64;
                        for b in 0..r {
                            if seed.get(i * r + b) {
                                w |= 1 << b;
                            }
                        }
                        w & mask
                    })
                    .collect();
                let mut out = BitString::zeros(*n);
                for j in 0..*n {
                    let v = field.eval_poly(&coeffs, j as u64);
                    out.set(j, v & 1 == 1);
                }
                out
            }
        })
    }

    /// Generate with seed bits drawn from a stream.
    pub fn output_from_stream(&self, stream: &mut SeedStream) -> Result<BitString> {
        let seed = stream.take_bits(self.seed_bits());
        self.output(&seed)
    }

    /// Enumerate every seed (guarded by the total count).
    pub fn enumerate_seeds(&self) -> Result<impl Iterator<Item = BitString> + '_> {
        let bits = self.seed_bits();
        if bits > 26 {
            return Err(Error::Capacity(format!("seed enumeration over 2^{bits} seeds")));
        }
        Ok((0..(1u64 << bits)).map(move |i| BitString::from_u64(bits, i)))
    }
}

fn resolve_biased(n: usize, eps: f64) -> ResolvedSource {
    if eps <= 0.0 {
        return ResolvedSource::Uniform { n };
    }
    let ratio = (n.max(1) as f64 / eps).log2().ceil();
    if ratio > MAX_FIELD_DEGREE as f64 {
        ResolvedSource::Uniform { n }
    } else {
        let degree = (ratio.max(1.0)) as u32;
        ResolvedSource::Powering { n, degree }
    }
}

fn resolve_k_wise(n: usize, k: usize, eps: f64) -> ResolvedSource {
    if k >= n {
        return ResolvedSource::Uniform { n };
    }
    let eps_bias = eps * 2f64.powf(-(k as f64) / 2.0);
    resolve_biased(n, eps_bias)
}

fn point_degree(n: usize) -> u32 {
    let mut r = 1u32;
    while (1usize << r) < n.max(2) {
        r += 1;
    }
    r
}

/// A k-wise independent hash partition of [n] into ℓ cells (ℓ a power of
/// two): indicator strings H_1..H_ℓ with exactly one cell per index.
pub struct HashPartition {
    pub cells: Vec<BitString>,
}

pub fn kwise_hash_partition(
    n: usize,
    ell: usize,
    independence: usize,
    stream: &mut SeedStream,
) -> Result<HashPartition> {
    if !ell.is_power_of_two() {
        return Err(Error::Parameter(format!("partition size {ell} not a power of two")));
    }
    let bits_out = ell.trailing_zeros();
    let degree = point_degree(n).max(bits_out).min(MAX_FIELD_DEGREE);
    let field = BinaryField::new(degree)?;
    let k = independence.max(1).min(n.max(1));
    let coeffs = stream.take_field_elems(k, &field);
    let mut cells = vec![BitString::zeros(n); ell];
    for j in 0..n {
        let v = field.eval_poly(&coeffs, j as u64);
        let cell = (v & ((ell as u64) - 1)) as usize;
        cells[cell].set(j, true);
    }
    Ok(HashPartition { cells })
}

/// Seed-length report for the recursive generator.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SeedAccounting {
    pub hash_bits: usize,
    pub block_bits: usize,
    pub cnf_bits: usize,
    pub total_bits: usize,
    /// Instantiated closed-form value
    /// (w·log^{d-1}m + log²m)·log(m/ε)·max(1, loglog m) with unit constants.
    pub formula: f64,
}

/// Parameters of the recursive generator for depth-d size-m circuits with
/// width-w bottoms.
#[derive(Clone, Copy, Debug)]
pub struct Gc0PrgParams {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub w: usize,
    pub eps: f64,
}

/// One output sample of the recursive generator:
/// Y ⊕ (X_1 ∧ H_1) ⊕ ... ⊕ (X_ℓ ∧ H_ℓ) with ℓ = 512w rounded to a power of
/// two, t = ⌈10·log2(m/ε)⌉, a 2t-wise hash partition H, per-cell strings
/// X_i from the depth-(d-1) generator (the tree fooler at d = 1), and Y
/// from the CNF-fooling stand-in source.
pub fn gc0_prg(params: &Gc0PrgParams, master_seed: u64) -> Result<(BitString, SeedAccounting)> {
    let mut stream = SeedStream::new(master_seed);
    let mut acct = SeedAccounting::default();
    let out = gc0_prg_rec(params, &mut stream, &mut acct)?;
    acct.total_bits = stream.bits_drawn;
    acct.formula = seed_length_formula(params);
    Ok((out, acct))
}

fn gc0_prg_rec(
    params: &Gc0PrgParams,
    stream: &mut SeedStream,
    acct: &mut SeedAccounting,
) -> Result<BitString> {
    let Gc0PrgParams { n, m, d, w, eps } = *params;
    if d == 0 {
        return Err(Error::Parameter("generator needs depth ≥ 1".into()));
    }
    let ell_logical = 512 * w.max(1);
    let ell = ell_logical.next_power_of_two();
    let t = (10.0 * (m.max(2) as f64 / eps).log2()).ceil().max(1.0) as usize;

    let before = stream.bits_drawn;
    let partition = kwise_hash_partition(n, ell, 2 * t, stream)?;
    acct.hash_bits += stream.bits_drawn - before;

    let eps_block = eps / (ell as f64 * 2f64.powi((t + 1).min(1000) as i32));
    let mut out = BitString::zeros(n);
    for cell in &partition.cells {
        let before = stream.bits_drawn;
        let mut x = if d == 1 {
            let src = SeededSource::new(SourceKind::DtPrg {
                n,
                t: (m.max(2) as f64).log2().ceil().max(1.0) as usize,
                eps: eps_block,
            })?;
            src.output_from_stream(stream)?
        } else {
            let sub = Gc0PrgParams {
                n,
                m: 4 * m * m,
                d: d - 1,
                w: (m.max(2) as f64).log2().ceil().max(1.0) as usize,
                eps: eps_block,
            };
            gc0_prg_rec(&sub, stream, acct)?
        };
        acct.block_bits += stream.bits_drawn - before;
        x.and_with(cell);
        out.xor_with(&x);
    }

    // CNF-fooling stand-in: an (ε_Y, k_Y)-wise source (saturates to
    // uniform at these parameters)
    let before = stream.bits_drawn;
    let eps_y = eps
        / ((64.0 * m as f64 * w.max(1) as f64).powi((t + w + 1).min(1000) as i32)
            * (2.0 * m as f64).powi((2 * t).min(1000) as i32))
        .max(1.0);
    let k_y = ((m as f64 * m as f64).log2().ceil() as usize + 2).min(n.max(1));
    let y_src = SeededSource::new(SourceKind::EpsKWise { n, k: k_y, eps: eps_y })?;
    let y = y_src.output_from_stream(stream)?;
    acct.cnf_bits += stream.bits_drawn - before;
    out.xor_with(&y);
    Ok(out)
}

/// Instantiated closed-form seed length with unit constants.
pub fn seed_length_formula(params: &Gc0PrgParams) -> f64 {
    let m = params.m.max(2) as f64;
    let lm = m.log2().max(1.0);
    let lme = (m / params.eps).log2().max(1.0);
    let llm = lm.log2().max(1.0);
    (params.w as f64 * lm.powi(params.d as i32 - 1) + lm * lm) * lme * llm
}

/// Measured distinguishing error of a generator against a fixed function:
/// |E_seed[f(G(seed))] - E_uniform[f]| with the exact uniform mean.
pub struct FoolingReport {
    pub exact_mean: f64,
    pub prg_mean: f64,
    pub err: f64,
    pub samples: u64,
    pub sigma: f64,
}

pub fn fooling_error_sampled(
    exact_mean: f64,
    mut sample: impl FnMut(u64) -> Result<bool>,
    samples: u64,
) -> Result<FoolingReport> {
    let mut ones = 0u64;
    for s in 0..samples {
        if sample(s)? {
            ones += 1;
        }
    }
    let prg_mean = ones as f64 / samples as f64;
    Ok(FoolingReport {
        exact_mean,
        prg_mean,
        err: (prg_mean - exact_mean).abs(),
        samples,
        sigma: bernoulli_sigma(ones, samples),
    })
}

/// Exhaustive fooling error of a source against a decision tree.
pub fn tree_fooling_error(src: &SeededSource, tree: &DecisionTree) -> Result<f64> {
    let n = src.n();
    let f = tree.to_boolfun(n)?;
    let exact = f.mean();
    let mut ones = 0u64;
    let mut total = 0u64;
    for seed in src.enumerate_seeds()? {
        let out = src.output(&seed)?;
        if f.value(out.as_u64()) {
            ones += 1;
        }
        total += 1;
    }
    Ok((ones as f64 / total as f64 - exact).abs())
}

/// How the star set is drawn in the derandomized switching experiment.
pub enum LambdaSource {
    /// One cell of a k-wise independent hash partition into 1/p cells.
    HashCell { ell: usize, independence: usize },
    /// Fully random star set with Pr[star] = p (dyadic p recommended).
    TrueRp { p: f64 },
}

/// Report of the derandomized multi-switching experiment.
pub struct DerandReport {
    pub trials: u64,
    pub failures: u64,
    pub estimate: f64,
    pub ci: (f64, f64),
    pub bound: f64,
}

/// Measure the partial-tree failure rate when the star set comes from a
/// bounded-independence hash cell and the ground assignment from an
/// arbitrary seeded source.
#[allow(clippy::too_many_arguments)]
pub fn derandomized_switching_experiment(
    fam: &Family,
    lambda: &LambdaSource,
    z_source: &SeededSource,
    p: f64,
    t: usize,
    r: usize,
    trials: u64,
    seed: u64,
    z_eps: f64,
    solver: &mut DtSolver,
) -> Result<DerandReport> {
    let n = fam.arity;
    let mut stream = SeedStream::new(seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut failures = 0u64;
    for _ in 0..trials {
        let stars: u64 = match lambda {
            LambdaSource::HashCell { ell, independence } => {
                let partition = kwise_hash_partition(n, *ell, *independence, &mut stream)?;
                partition.cells[0].as_u64()
            }
            LambdaSource::TrueRp { p } => {
                let mut m = 0u64;
                for i in 0..n {
                    if rng.random::<f64>() < *p {
                        m |= 1 << i;
                    }
                }
                m
            }
        };
        let z = z_source.output_from_stream(&mut stream)?.as_u64();
        let rho = Restriction::from_star_set(n, stars, z);
        if cpdt_fails(fam, &rho, t, r, solver)? {
            failures += 1;
        }
    }
    let estimate = failures as f64 / trials as f64;
    Ok(DerandReport {
        trials,
        failures,
        estimate,
        ci: wilson_ci(failures, trials),
        bound: derand_bound(p, fam.width, t, fam.k, fam.members.len(), r, z_eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irreducibles_verify() {
        for r in 1..=MAX_FIELD_DEGREE {
            let f = field_modulus(r);
            assert_eq!(poly_degree(f as u128), r as i32, "degree {r}");
            if r > 1 {
                assert!(is_irreducible(f, r), "modulus for degree {r} reducible");
            }
        }
    }

    #[test]
    fn field_mul_basics() {
        // GF(4): x * x = x + 1 with modulus x^2+x+1
        let f = BinaryField::new(2).unwrap();
        assert_eq!(f.mul(0b10, 0b10), 0b11);
        // GF(8): known multiplication table spot checks (mod x^3+x+1)
        let f = BinaryField::new(3).unwrap();
        assert_eq!(f.mul(0b010, 0b100), 0b011); // x * x^2 = x^3 = x+1
        // associativity / commutativity on random pairs
        let f = BinaryField::new(8).unwrap();
        for a in [3u64, 87, 255, 100] {
            for b in [7u64, 13, 201] {
                assert_eq!(f.mul(a, b), f.mul(b, a));
                assert_eq!(f.mul(f.mul(a, b), a), f.mul(a, f.mul(b, a)));
            }
        }
    }

    #[test]
    fn small_bias_exhaustive() {
        // n = 16, eps = 1/8: max bias over all seeds & all nonempty parities
        let src = SeededSource::new(SourceKind::EpsBiased { n: 16, eps: 0.125 }).unwrap();
        assert!(!src.saturated());
        let seeds = 1u64 << src.seed_bits();
        // histogram outputs, then a Walsh transform gives every bias at once
        let mut hist = vec![0i64; 1 << 16];
        for seed in src.enumerate_seeds().unwrap() {
            let out = src.output(&seed).unwrap();
            hist[out.as_u64() as usize] += 1;
        }
        let mut a: Vec<f64> = hist.iter().map(|c| *c as f64).collect();
        let size = a.len();
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
        let max_bias = a[1..]
            .iter()
            .map(|v| (v / seeds as f64).abs())
            .fold(0.0f64, f64::max);
        assert!(max_bias <= 0.125, "max parity bias {max_bias} above 1/8");
    }

    #[test]
    fn small_bias_deterministic_and_vacuous_eps() {
        let src = SeededSource::new(SourceKind::EpsBiased { n: 8, eps: 0.25 }).unwrap();
        let seed = BitString::from_u64(src.seed_bits(), 1234 & ((1 << src.seed_bits()) - 1));
        assert_eq!(src.output(&seed).unwrap(), src.output(&seed).unwrap());
        // eps ≥ 1 still constructs
        let src = SeededSource::new(SourceKind::EpsBiased { n: 4, eps: 2.0 }).unwrap();
        let seed = BitString::from_u64(src.seed_bits(), 0);
        assert_eq!(src.output(&seed).unwrap().len, 4);
    }

    #[test]
    fn k_wise_exact_uniform_marginals() {
        for (n, k) in [(6usize, 2usize), (8, 3), (10, 1)] {
            let src = SeededSource::new(SourceKind::KWiseExact { n, k }).unwrap();
            let total = 1u64 << src.seed_bits();
            // every k-tuple of positions, every pattern: exact count
            let positions: Vec<usize> = (0..n).collect();
            let mut tuples: Vec<Vec<usize>> = vec![];
            fn combos(pool: &[usize], k: usize, at: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if cur.len() == k {
                    out.push(cur.clone());
                    return;
                }
                for i in at..pool.len() {
                    cur.push(pool[i]);
                    combos(pool, k, i + 1, cur, out);
                    cur.pop();
                }
            }
            combos(&positions, k, 0, &mut vec![], &mut tuples);
            let outputs: Vec<u64> = src
                .enumerate_seeds()
                .unwrap()
                .map(|s| src.output(&s).unwrap().as_u64())
                .collect();
            for tuple in tuples.iter().take(20) {
                for pattern in 0..(1u64 << k) {
                    let count = outputs
                        .iter()
                        .filter(|&&o| {
                            tuple
                                .iter()
                                .enumerate()
                                .all(|(bi, &pos)| (o >> pos & 1) == (pattern >> bi & 1))
                        })
                        .count() as u64;
                    assert_eq!(
                        count * (1 << k),
                        total,
                        "n={n} k={k} tuple {tuple:?} pattern {pattern:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn eps_k_wise_marginals_within_eps() {
        let (n, k, eps) = (8usize, 2usize, 0.25f64);
        let src = SeededSource::new(SourceKind::EpsKWise { n, k, eps }).unwrap();
        let outputs: Vec<u64> = src
            .enumerate_seeds()
            .unwrap()
            .map(|s| src.output(&s).unwrap().as_u64())
            .collect();
        let total = outputs.len() as f64;
        for i in 0..n {
            for j in (i + 1)..n {
                for pattern in 0..4u64 {
                    let count = outputs
                        .iter()
                        .filter(|&&o| {
                            (o >> i & 1) == (pattern & 1) && (o >> j & 1) == (pattern >> 1 & 1)
                        })
                        .count() as f64;
                    let dev = (count / total - 0.25).abs();
                    assert!(dev <= eps, "positions ({i},{j}) pattern {pattern:02b}: dev {dev}");
                }
            }
        }
    }

    #[test]
    fn hash_partition_properties() {
        let mut stream = SeedStream::new(42);
        let part = kwise_hash_partition(10, 4, 4, &mut stream).unwrap();
        assert_eq!(part.cells.len(), 4);
        // partition: each index in exactly one cell
        for j in 0..10 {
            let hits = part.cells.iter().filter(|c| c.get(j)).count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn hash_partition_pairwise_collisions() {
        // Pr[H(j1)=H(j2)=cell0] = 1/ell^2 exactly under full seed
        // enumeration of a pairwise-independent polynomial hash.
        let n = 4usize;
        let ell = 4usize;
        let degree = point_degree(n).max(ell.trailing_zeros()).min(MAX_FIELD_DEGREE);
        let field = BinaryField::new(degree).unwrap();
        let r = degree as usize;
        let (j1, j2) = (1u64, 3u64);
        let mut hits = 0u64;
        let total = 1u64 << (2 * r);
        for seedv in 0..total {
            let coeffs = vec![seedv & ((1 << r) - 1), (seedv >> r) & ((1 << r) - 1)];
            let h1 = field.eval_poly(&coeffs, j1) & (ell as u64 - 1);
            let h2 = field.eval_poly(&coeffs, j2) & (ell as u64 - 1);
            if h1 == 0 && h2 == 0 {
                hits += 1;
            }
        }
        assert_eq!(hits * (ell as u64).pow(2), total);
    }

    #[test]
    fn dt_prg_fools_small_trees_exhaustively() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let src = SeededSource::new(SourceKind::DtPrg { n: 8, t: 2, eps: 0.25 }).unwrap();
        assert!(src.seed_bits() <= 26);
        for _ in 0..10 {
            let tree = DecisionTree::random(8, 2, &mut rng);
            let err = tree_fooling_error(&src, &tree).unwrap();
            assert!(err <= 0.25, "fooling error {err} above eps");
        }
        // constant tree: error 0
        let c = DecisionTree::Leaf(true);
        assert!(tree_fooling_error(&src, &c).unwrap() <= 1e-12);
        // single-variable tree
        let one = DecisionTree::Query {
            var: 3,
            if_false: Box::new(DecisionTree::Leaf(false)),
            if_true: Box::new(DecisionTree::Leaf(true)),
        };
        assert!(tree_fooling_error(&src, &one).unwrap() <= 0.25);
    }

    #[test]
    fn gc0_prg_deterministic() {
        let params = Gc0PrgParams { n: 12, m: 16, d: 2, w: 2, eps: 0.1 };
        let (a, acct_a) = gc0_prg(&params, 777).unwrap();
        let (b, acct_b) = gc0_prg(&params, 777).unwrap();
        assert_eq!(a, b);
        assert_eq!(acct_a.total_bits, acct_b.total_bits);
        let (c, _) = gc0_prg(&params, 778).unwrap();
        assert!(a != c || a.len == 0);
        assert!(acct_a.formula > 0.0);
    }

    #[test]
    fn gc0_prg_base_case_matches_tree_fooler_shape() {
        let params = Gc0PrgParams { n: 8, m: 4, d: 1, w: 1, eps: 0.5 };
        let (out, acct) = gc0_prg(&params, 9).unwrap();
        assert_eq!(out.len, 8);
        assert!(acct.total_bits >= 8);
    }

    #[test]
    fn hybrid_locality_masking() {
        // replacing a cell's string on coordinates outside the cell leaves
        // the output unchanged: the ∧-mask kills off-cell bits
        let n = 10usize;
        let mut stream = SeedStream::new(5);
        let part = kwise_hash_partition(n, 4, 4, &mut stream).unwrap();
        let x = BitString::from_u64(n, 0b1010101010);
        let mut masked = x.clone();
        masked.and_with(&part.cells[0]);
        // flip every off-cell bit of x; the masked result is identical
        let mut noisy = x.clone();
        for j in 0..n {
            if !part.cells[0].get(j) {
                noisy.set(j, !noisy.get(j));
            }
        }
        let mut masked2 = noisy.clone();
        masked2.and_with(&part.cells[0]);
        assert_eq!(masked, masked2);
    }
}
