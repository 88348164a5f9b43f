//! Fourier-spectrum analysis: exponentially-small-tail reports for biased
//! constant-depth circuits, the restriction-tail inequality, the derived
//! spectral property curves, a membership-query learner that recovers heavy
//! coefficients through prefix buckets, and correlation bounds against
//! symmetric functions.

use crate::boolfun::{binom, BoolFun, FourierSpectrum, Restriction};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

/// One row of a tail report.
#[derive(Clone, Debug, Serialize)]
pub struct TailRow {
    pub level: usize,
    pub measured: f64,
    pub bound: f64,
    pub vacuous: bool,
}

/// Tail weights of a circuit against the closed-form ceiling
/// 4^d·2^{-ℓ/(80w(128(k+log2 m))^{d-1})+k} with m the effective size. When
/// the bottom layer is AND/OR the depth splits as d+1 = gate depth; bare
/// circuits count a virtual width-1 bottom layer.
#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub n: usize,
    pub d: usize,
    pub w: usize,
    pub k: u32,
    pub effective_size: usize,
    pub rows: Vec<TailRow>,
}

pub fn esft_bound(level: usize, d: usize, w: usize, k: u32, m: usize) -> f64 {
    let log_m = (m.max(2) as f64).log2();
    let denom = 80.0 * w as f64 * (128.0 * (k as f64 + log_m)).powi(d as i32 - 1);
    4f64.powi(d as i32) * 2f64.powf(-(level as f64) / denom + k as f64)
}

pub fn esft_report(c: &Circuit, levels: &[usize]) -> Result<TailReport> {
    if c.arity > 16 {
        return Err(Error::Capacity("tail report capped at n ≤ 16".into()));
    }
    let metrics = c.metrics();
    let spectrum = c.to_boolfun()?.wht();
    // split depth into (gate layers above bottom, bottom width)
    let layers_bottom_andor = metrics.bottom_width > 0 && metrics.depth >= 2;
    let (d, w) = if layers_bottom_andor {
        (metrics.depth - 1, metrics.bottom_width)
    } else {
        (metrics.depth, 1)
    };
    let k = metrics.max_k;
    let m = metrics.effective_size.max(1);
    let mut rows = Vec::new();
    let mut prev = f64::INFINITY;
    for &level in levels {
        let measured = spectrum.tail_weight(level);
        if measured > prev + 1e-12 {
            return Err(Error::Certification("tail weights must be non-increasing".into()));
        }
        prev = measured;
        let bound = esft_bound(level, d, w, k, m);
        rows.push(TailRow { level, measured, bound, vacuous: bound >= 1.0 });
    }
    Ok(TailReport { n: c.arity, d, w, k, effective_size: m, rows })
}

/// Check W^{≥ℓ}[f] ≤ 2·E_{ρ~R_p}[W^{≥ℓp}[f|ρ]] by Monte Carlo over
/// restrictions with exact inner tails.
#[derive(Clone, Debug, Serialize)]
pub struct RestrictionTailReport {
    pub lhs: f64,
    pub rhs_estimate: f64,
    pub rhs_sigma: f64,
    pub trials: u64,
}

pub fn restriction_tail_check(
    f: &BoolFun,
    p: f64,
    level: usize,
    trials: u64,
    seed: u64,
) -> Result<RestrictionTailReport> {
    if f.arity() > 14 {
        return Err(Error::Capacity("restriction tail check capped at n ≤ 14".into()));
    }
    let lhs = f.wht().tail_weight(level);
    let cut = level as f64 * p;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..trials {
        let rho = Restriction::sample_rp(f.arity(), p, &mut rng)?;
        let inner = f.restrict(&rho)?.wht().tail_weight_real(cut);
        let v = 2.0 * inner;
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / trials as f64;
    let var = (sumsq / trials as f64 - mean * mean).max(0.0);
    Ok(RestrictionTailReport {
        lhs,
        rhs_estimate: mean,
        rhs_sigma: (var / trials as f64).sqrt(),
        trials,
    })
}

/// Measured curves for the derived spectral properties.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyCurves {
    /// Pr_ρ[deg(f|ρ) ≥ ℓ] per level (MC over restrictions, exact degrees).
    pub slpt: Vec<f64>,
    /// Degree-ℓ total influence per level.
    pub inf_k: Vec<f64>,
    /// Level L1 mass per level.
    pub l1: Vec<f64>,
    /// Size of the heavy-coefficient set capturing 1-ε of the squared mass,
    /// per the recipe {S : |S| < w, |f̂(S)| ≥ (ε/2)/L1_{<w}} with w the first
    /// level whose measured tail is ≤ ε/2.
    pub fmc_set_size: usize,
    pub fmc_eps: f64,
    pub fmc_captured: f64,
}

pub fn property_suite(
    c: &Circuit,
    p: f64,
    trials: u64,
    fmc_eps: f64,
    seed: u64,
) -> Result<PropertyCurves> {
    if c.arity > 14 {
        return Err(Error::Capacity("property suite capped at n ≤ 14".into()));
    }
    let n = c.arity;
    let f = c.to_boolfun()?;
    let spectrum = f.wht();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut deg_counts = vec![0u64; n + 2];
    for _ in 0..trials {
        let rho = Restriction::sample_rp(n, p, &mut rng)?;
        let d = f.restrict(&rho)?.wht().degree();
        deg_counts[d] += 1;
    }
    let slpt: Vec<f64> = (0..=n)
        .map(|l| deg_counts[l..].iter().sum::<u64>() as f64 / trials as f64)
        .collect();
    let inf_k: Vec<f64> = (0..=n).map(|l| spectrum.influence_k(l).unwrap()).collect();
    let l1: Vec<f64> = (0..=n).map(|l| spectrum.level_l1(l).unwrap()).collect();

    let (set, captured, _) = fmc_heavy_set(&spectrum, fmc_eps);
    Ok(PropertyCurves {
        slpt,
        inf_k,
        l1,
        fmc_set_size: set.len(),
        fmc_eps,
        fmc_captured: captured,
    })
}

/// The heavy-coefficient set from the mass-concentration recipe; returns
/// (set, captured squared mass, cutoff level).
pub fn fmc_heavy_set(spectrum: &FourierSpectrum, eps: f64) -> (Vec<u64>, f64, usize) {
    let n = spectrum.arity();
    let w = (0..=n)
        .find(|&l| spectrum.tail_weight(l) <= eps / 2.0)
        .unwrap_or(n + 1);
    let l1_below: f64 = (0..w).map(|l| spectrum.level_l1(l).unwrap()).sum();
    let threshold = if l1_below > 0.0 { (eps / 2.0) / l1_below } else { f64::INFINITY };
    let mut set = Vec::new();
    let mut captured = 0.0;
    for s in 0..(1u64 << n) {
        let lvl = s.count_ones() as usize;
        let coeff = spectrum.coeff(s);
        if lvl < w && coeff.abs() >= threshold {
            set.push(s);
            captured += coeff * coeff;
        }
    }
    (set, captured, w)
}

/// A sparse hypothesis: sign of a sparse real polynomial over the parity
/// basis.
#[derive(Clone, Debug, Serialize)]
pub struct SparseHypothesis {
    pub arity: usize,
    pub coeffs: Vec<(u64, f64)>,
    pub best_effort: bool,
}

impl SparseHypothesis {
    pub fn eval_real(&self, x: u64) -> f64 {
        self.coeffs
            .iter()
            .map(|(mask, c)| {
                let chi = if (mask & x).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                c * chi
            })
            .sum()
    }

    pub fn eval(&self, x: u64) -> bool {
        self.eval_real(x) < 0.0
    }

    /// Exact squared distance E[(f - h)^2] on the ±1 views.
    pub fn squared_error(&self, target: &BoolFun) -> f64 {
        let n = target.arity();
        let mut acc = 0.0;
        for x in 0..(1u64 << n) {
            let fv = if target.value(x) { -1.0 } else { 1.0 };
            let hv = if self.eval(x) { -1.0 } else { 1.0 };
            acc += (fv - hv) * (fv - hv);
        }
        acc / (1u64 << n) as f64
    }
}

/// Documented soundness constant: on targets whose spectrum is
/// ε/2-concentrated within the budget, the hypothesis squared error is at
/// most `KM_ERROR_CONSTANT`·ε.
pub const KM_ERROR_CONSTANT: f64 = 8.0;

/// Membership-query learner: recursively estimate the squared Fourier mass
/// of prefix buckets { S : S ∩ [0,j) = A }, keep buckets above the
/// threshold θ = ε/(2·budget), and estimate the surviving coefficients.
/// Sample counts are Hoeffding-driven: ⌈8·ln(4·budget·2n/δ)/θ²⌉.
pub fn km_learn(
    oracle: &BoolFun,
    budget: usize,
    eps: f64,
    delta: f64,
    rng: &mut ChaCha12Rng,
) -> Result<SparseHypothesis> {
    let n = oracle.arity();
    if n > 16 {
        return Err(Error::Capacity("learner capped at oracle arity ≤ 16".into()));
    }
    if budget == 0 || eps <= 0.0 || !(0.0..1.0).contains(&delta) {
        return Err(Error::Parameter("learner needs budget ≥ 1, ε > 0, δ ∈ (0,1)".into()));
    }
    let theta = eps / (2.0 * budget as f64);
    let samples = (8.0 * (4.0 * budget as f64 * 2.0 * n as f64 / delta).ln() / (theta * theta))
        .ceil() as u64;

    let pm = |b: bool| if b { -1.0 } else { 1.0 };
    // bucket weight estimator for prefix length j, prefix set A:
    // E_suffix[(E_prefix f χ_A)²] sampled as f(y,x)χ_A(y)·f(y',x)χ_A(y')
    let estimate_bucket = |j: usize, a: u64, rng: &mut ChaCha12Rng| -> f64 {
        if j == 0 {
            return 1.0;
        }
        let prefix_mask = (1u64 << j) - 1;
        let mut acc = 0.0;
        for _ in 0..samples {
            let x = rng.random::<u64>() & !prefix_mask & ((1u64 << n) - 1);
            let y1 = rng.random::<u64>() & prefix_mask;
            let y2 = rng.random::<u64>() & prefix_mask;
            let chi1 = pm((a & y1).count_ones() % 2 == 1);
            let chi2 = pm((a & y2).count_ones() % 2 == 1);
            acc += pm(oracle.value(x | y1)) * chi1 * pm(oracle.value(x | y2)) * chi2;
        }
        acc / samples as f64
    };

    let mut buckets: Vec<u64> = vec![0];
    let mut best_effort = false;
    for j in 1..=n {
        let mut next = Vec::new();
        for &a in &buckets {
            for ext in [a, a | (1 << (j - 1))] {
                if estimate_bucket(j, ext, rng) >= theta / 2.0 {
                    next.push(ext);
                }
            }
        }
        // work cap: keep the strongest 4·budget buckets per level
        if next.len() > 4 * budget {
            best_effort = true;
            let mut scored: Vec<(f64, u64)> = next
                .into_iter()
                .map(|a| (estimate_bucket(j, a, rng), a))
                .collect();
            scored.sort_by(|x, y| y.0.total_cmp(&x.0));
            next = scored.into_iter().take(4 * budget).map(|(_, a)| a).collect();
        }
        buckets = next;
        if buckets.is_empty() {
            break;
        }
    }
    if buckets.len() > budget {
        best_effort = true;
    }
    // estimate the surviving coefficients and keep the heaviest
    let mut coeffs: Vec<(u64, f64)> = buckets
        .iter()
        .map(|&s| {
            let mut acc = 0.0;
            for _ in 0..samples {
                let x = rng.random::<u64>() & ((1u64 << n) - 1);
                let chi = pm((s & x).count_ones() % 2 == 1);
                acc += pm(oracle.value(x)) * chi;
            }
            (s, acc / samples as f64)
        })
        .collect();
    coeffs.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    coeffs.truncate(budget);
    coeffs.sort_by_key(|(s, _)| *s);
    Ok(SparseHypothesis { arity: n, coeffs, best_effort })
}

/// Exact correlation of a circuit with a symmetric function together with
/// the three bound components: |ĝ(∅)|, the low-level L1 × symmetric-decay
/// sum, and the high-level Cauchy-Schwarz tail term.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetricCorrelation {
    pub corr: f64,
    pub empty_coeff: f64,
    pub mid_term: f64,
    pub tail_term: f64,
    pub bound: f64,
    pub cut_level: usize,
}

pub fn symmetric_correlation(c: &Circuit, g: &BoolFun) -> Result<SymmetricCorrelation> {
    if c.arity != g.arity() {
        return Err(Error::Dimension("arity mismatch".into()));
    }
    if c.arity > 16 {
        return Err(Error::Capacity("symmetric correlation capped at n ≤ 16".into()));
    }
    let n = c.arity;
    if !is_symmetric(g) {
        return Err(Error::Parameter("g is not symmetric".into()));
    }
    let f = c.to_boolfun()?;
    let corr = f.correlation(g)?;
    let sf = f.wht();
    let sg = g.wht();
    let metrics = c.metrics();
    let k = metrics.max_k.max(1) as f64;
    let log_m = (metrics.effective_size.max(2) as f64).log2();
    let d = metrics.depth.max(1);
    let cut = ((k + (n as f64).log2()) * (k + log_m).powi(d as i32 - 1)).ceil() as usize;
    let cut = cut.clamp(1, n + 1);

    let empty_coeff = sg.coeff(0).abs();
    // symmetric decay: |ĝ(S)| ≤ binom(n,|S|)^{-1/2}, exact L1 for f
    let mut mid_term = 0.0;
    for l in 1..cut.min(n + 1) {
        mid_term += sf.level_l1(l)? / binom(n, l).sqrt();
    }
    let tail_term = (sf.tail_weight(cut) * sg.tail_weight(cut)).sqrt();
    Ok(SymmetricCorrelation {
        corr,
        empty_coeff,
        mid_term,
        tail_term,
        bound: empty_coeff + mid_term + tail_term,
        cut_level: cut,
    })
}

pub fn is_symmetric(g: &BoolFun) -> bool {
    let n = g.arity();
    let mut level_value: Vec<Option<bool>> = vec![None; n + 1];
    for x in 0..(1u64 << n) {
        let lvl = x.count_ones() as usize;
        match level_value[lvl] {
            None => level_value[lvl] = Some(g.value(x)),
            Some(v) => {
                if g.value(x) != v {
                    return false;
                }
            }
        }
    }
    true
}

/// A random symmetric function: a coin per Hamming level.
pub fn random_symmetric(n: usize, rng: &mut ChaCha12Rng) -> BoolFun {
    let levels: Vec<bool> = (0..=n).map(|_| rng.random()).collect();
    BoolFun::from_fn(n, |x| levels[x.count_ones() as usize]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{parity_tree, random_gk_and, CorpusParams};

    #[test]
    fn esft_parity_tree_all_mass_on_top() {
        let c = parity_tree(8, 3).unwrap();
        let report = esft_report(&c, &[0, 2, 4, 6, 8]).unwrap();
        for row in &report.rows {
            assert!(row.vacuous || row.measured <= row.bound + 1e-12);
        }
        // parity has all mass at level n
        let top = report.rows.last().unwrap();
        assert!((top.measured - 1.0).abs() < 1e-9);
    }

    #[test]
    fn esft_tree_mass_cutoff() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let tree = crate::boolfun::DecisionTree::random(10, 3, &mut rng);
        let f = tree.to_boolfun(10).unwrap();
        assert!(f.wht().tail_weight(tree.depth() + 1) <= 1e-9);
    }

    #[test]
    fn restriction_tail_inequality() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        // p = 1: rho is almost surely all-star, so rhs = 2·lhs
        let f = BoolFun::from_fn(8, |_| rng.random()).unwrap();
        let rep = restriction_tail_check(&f, 1.0, 3, 50, 7).unwrap();
        assert!(rep.lhs <= rep.rhs_estimate + 3.0 * rep.rhs_sigma + 1e-9);
        assert!((rep.rhs_estimate - 2.0 * rep.lhs).abs() < 1e-9);

        // parity at several p values
        let f = BoolFun::parity(10);
        for p in [0.3, 0.6] {
            let rep = restriction_tail_check(&f, p, 5, 400, 11).unwrap();
            assert!(
                rep.lhs <= rep.rhs_estimate + 3.0 * rep.rhs_sigma,
                "p={p}: lhs {} rhs {} sigma {}",
                rep.lhs,
                rep.rhs_estimate,
                rep.rhs_sigma
            );
        }

        // constant function: both sides zero at positive levels
        let f = BoolFun::constant(6, true);
        let rep = restriction_tail_check(&f, 0.5, 1, 50, 13).unwrap();
        assert!(rep.lhs.abs() < 1e-12 && rep.rhs_estimate.abs() < 1e-12);
    }

    #[test]
    fn property_curves_sane() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let c = random_gk_and(&CorpusParams { n: 8, m: 4, k: 2, w: 2, d: 2 }, &mut rng);
        let curves = property_suite(&c, 0.3, 200, 0.2, 3).unwrap();
        // deg ≤ n always: the survival curve starts at 1 and is monotone
        assert!((curves.slpt[0] - 1.0).abs() < 1e-12);
        for w in curves.slpt.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        // L1 at level 0 is |f̂(∅)| ≤ 1
        assert!(curves.l1[0] <= 1.0 + 1e-12);
        // FMC recipe captures the promised mass
        assert!(curves.fmc_captured >= 1.0 - curves.fmc_eps - 1e-9);
    }

    #[test]
    fn parity_influence_identity() {
        let s = BoolFun::parity(9).wht();
        for l in 0..=9 {
            assert!((s.influence_k(l).unwrap() - binom(9, l)).abs() < 1e-9);
        }
    }

    #[test]
    fn km_recovers_single_character() {
        let n = 8;
        let target = BoolFun::from_fn(n, |x| (x & 0b11).count_ones() % 2 == 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let h = km_learn(&target, 4, 0.4, 0.02, &mut rng).unwrap();
        assert!(h.squared_error(&target) < 1e-12, "character must be exact");
        let heavy: Vec<u64> = h
            .coeffs
            .iter()
            .filter(|(_, c)| c.abs() > 0.5)
            .map(|(s, _)| *s)
            .collect();
        assert_eq!(heavy, vec![0b11]);
    }

    #[test]
    fn km_learns_majority() {
        let target = BoolFun::majority(3);
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let h = km_learn(&target, 8, 0.1, 0.02, &mut rng).unwrap();
        let err = h.squared_error(&target);
        assert!(err <= KM_ERROR_CONSTANT * 0.1, "majority error {err}");
    }

    #[test]
    fn km_constant_target() {
        let target = BoolFun::constant(6, true);
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let h = km_learn(&target, 2, 0.3, 0.02, &mut rng).unwrap();
        assert!(h.squared_error(&target) < 1e-12);
    }

    #[test]
    fn symmetric_checks() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let g = random_symmetric(9, &mut rng);
        assert!(is_symmetric(&g));
        // level-constant coefficients and the binomial decay
        let s = g.wht();
        for l in 0..=9 {
            let coeffs: Vec<f64> = (0..(1u64 << 9))
                .filter(|m| m.count_ones() as usize == l)
                .map(|m| s.coeff(m).abs())
                .collect();
            for w in coeffs.windows(2) {
                assert!((w[0] - w[1]).abs() <= 1e-9, "level {l} not constant");
            }
            if let Some(c0) = coeffs.first() {
                assert!(*c0 <= binom(9, l).sqrt().recip() + 1e-9);
            }
        }
        // MAJ on odd arity is balanced
        let maj = BoolFun::majority(9);
        assert!(maj.wht().coeff(0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_correlation_bound_holds() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..10 {
            let c = random_gk_and(&CorpusParams { n: 8, m: 4, k: 2, w: 2, d: 2 }, &mut rng);
            let g = random_symmetric(8, &mut rng);
            let rep = symmetric_correlation(&c, &g).unwrap();
            if rep.bound < 1.0 {
                assert!(rep.corr.abs() <= rep.bound + 1e-9);
            }
        }
        let non_sym = BoolFun::dictator(3, 1);
        assert!(symmetric_correlation(
            &parity_tree(3, 2).unwrap(),
            &non_sym
        )
        .is_err());
    }
}
