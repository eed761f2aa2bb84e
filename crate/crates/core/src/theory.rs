//! Exact checks of when missingness-as-a-value beats perfect imputation,
//! and the explicit M-GAM equivalent of an affine imputer feeding a
//! boolean GAM.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Exact rational used by all enumerations.
pub type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

/// Parses a plain decimal such as `0.25` or `3` into an exact rational.
pub fn parse_decimal(s: &str) -> Option<Q> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 30 {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let den = 10i128.checked_pow(frac.len() as u32)?;
    let v = q(num, den);
    Some(if neg { -v } else { v })
}

pub fn to_f64(v: &Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

fn bern(p: Q, outcome: bool) -> Q {
    if outcome {
        p
    } else {
        Q::one() - p
    }
}

/// One atom of a finite joint distribution: probability, the observed
/// key a rule may use, and the label.
type Atom<K> = (Q, K, bool);

/// Bayes rule on `key` (ties predict 1) and its exact accuracy.
fn bayes<K: Ord + Copy>(atoms: &[Atom<K>]) -> (BTreeMap<K, bool>, Q) {
    let mut mass: BTreeMap<K, (Q, Q)> = BTreeMap::new();
    for &(p, k, y) in atoms {
        let e = mass.entry(k).or_insert((Q::zero(), Q::zero()));
        if y {
            e.1 += p;
        } else {
            e.0 += p;
        }
    }
    let mut acc = Q::zero();
    let mut rule = BTreeMap::new();
    for (k, (p0, p1)) in mass {
        let predict = p1 >= p0;
        acc += if predict { p1 } else { p0 };
        rule.insert(k, predict);
    }
    (rule, acc)
}

/// Noise rates of the first construction: `Y = |X1 X2 - e1|`,
/// `M = |Y - e2|` with `e1 ~ Bern(k1)`, `e2 ~ Bern(k2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dgp1Params {
    k1: Q,
    k2: Q,
}

impl Dgp1Params {
    /// Requires `0 < k2 < k1 < 1/2`.
    pub fn new(k1: Q, k2: Q) -> Result<Dgp1Params> {
        if !(Q::zero() < k2 && k2 < k1 && k1 < q(1, 2)) {
            return Err(Error::Config(format!("need 0 < k2 < k1 < 1/2, got k1={k1}, k2={k2}")));
        }
        Ok(Dgp1Params { k1, k2 })
    }

    pub fn k1(&self) -> Q {
        self.k1
    }

    pub fn k2(&self) -> Q {
        self.k2
    }
}

/// A fully specified outcome of the first construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dgp1Outcome {
    pub x1: bool,
    pub x2: bool,
    pub m: bool,
    pub y: bool,
}

/// The 16-atom joint over `(X1, X2, e1, e2)` mapped to outcomes.
pub fn dgp1_joint(p: &Dgp1Params) -> Vec<(Q, Dgp1Outcome)> {
    let mut out = Vec::with_capacity(16);
    for x1 in [false, true] {
        for x2 in [false, true] {
            for e1 in [false, true] {
                for e2 in [false, true] {
                    let prob = q(1, 4) * bern(p.k1, e1) * bern(p.k2, e2);
                    let y = (x1 && x2) != e1;
                    out.push((prob, Dgp1Outcome { x1, x2, m: y != e2, y }));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp1Report {
    /// Bayes accuracy using the true `(X1, X2)`.
    pub acc_f1: Q,
    /// Bayes accuracy using `(M, X2)`.
    pub acc_f2: Q,
    pub total_probability: Q,
    pub rule_f1: BTreeMap<(bool, bool), bool>,
    pub rule_f2: BTreeMap<(bool, bool), bool>,
}

pub fn dgp1_exact(p: &Dgp1Params) -> Dgp1Report {
    let joint = dgp1_joint(p);
    let imputed: Vec<Atom<(bool, bool)>> = joint.iter().map(|(pr, o)| (*pr, (o.x1, o.x2), o.y)).collect();
    let missing: Vec<Atom<(bool, bool)>> = joint.iter().map(|(pr, o)| (*pr, (o.m, o.x2), o.y)).collect();
    let (rule_f1, acc_f1) = bayes(&imputed);
    let (rule_f2, acc_f2) = bayes(&missing);
    Dgp1Report {
        acc_f1,
        acc_f2,
        total_probability: joint.iter().map(|(pr, _)| *pr).sum(),
        rule_f1,
        rule_f2,
    }
}

/// Empirical accuracies of the exact Bayes rules on `n` seeded draws.
pub fn dgp1_monte_carlo(p: &Dgp1Params, n: usize, seed: u64) -> (f64, f64) {
    let report = dgp1_exact(p);
    let (k1, k2) = (to_f64(&p.k1), to_f64(&p.k2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut hit1, mut hit2) = (0usize, 0usize);
    for _ in 0..n {
        let x1: bool = rng.random();
        let x2: bool = rng.random();
        let e1 = rng.random::<f64>() < k1;
        let e2 = rng.random::<f64>() < k2;
        let y = (x1 && x2) != e1;
        let m = y != e2;
        hit1 += usize::from(report.rule_f1[&(x1, x2)] == y);
        hit2 += usize::from(report.rule_f2[&(m, x2)] == y);
    }
    (hit1 as f64 / n as f64, hit2 as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dgp2Report {
    /// Extra error of the missingness-aware rule where `M = 1`.
    pub loss_delta: Q,
    /// Error it saves where `M = 0`.
    pub gain_delta: Q,
    pub net: Q,
    pub acc_imputed: Q,
    pub acc_missing: Q,
    pub total_probability: Q,
}

/// Second construction: `Z = X1 X2 ~ Bern(1/2)`, `Y = |Z - e1|`,
/// `e1 ~ Bern(1/12)`; with probability 1/2 `M = |Y - e2|`,
/// `e2 ~ Bern(1/4)`, else `M = 0`; `X3 = |Y - e3|`, `e3 ~ Bern(1/11)`.
/// The imputation rule predicts `Z`; the missingness rule predicts `X3`
/// when `M = 1` and `Z X3` otherwise.
pub fn dgp2_exact() -> Dgp2Report {
    let mut loss_delta = Q::zero();
    let mut gain_delta = Q::zero();
    let mut acc_imputed = Q::zero();
    let mut acc_missing = Q::zero();
    let mut total = Q::zero();
    let t = [false, true];
    for z in t {
        for e1 in t {
            for mix in t {
                for e2 in t {
                    for e3 in t {
                        let p = q(1, 2) * bern(q(1, 12), e1) * q(1, 2) * bern(q(1, 4), e2) * bern(q(1, 11), e3);
                        total += p;
                        let y = z != e1;
                        let m = mix && (y != e2);
                        let x3 = y != e3;
                        let f_imp = z;
                        let f_miss = if m { x3 } else { z && x3 };
                        let (ok_imp, ok_miss) = (f_imp == y, f_miss == y);
                        if ok_imp {
                            acc_imputed += p;
                        }
                        if ok_miss {
                            acc_missing += p;
                        }
                        if m {
                            if ok_imp && !ok_miss {
                                loss_delta += p;
                            } else if !ok_imp && ok_miss {
                                loss_delta -= p;
                            }
                        } else if !ok_imp && ok_miss {
                            gain_delta += p;
                        } else if ok_imp && !ok_miss {
                            gain_delta -= p;
                        }
                    }
                }
            }
        }
    }
    Dgp2Report {
        loss_delta,
        gain_delta,
        net: gain_delta - loss_delta,
        acc_imputed,
        acc_missing,
        total_probability: total,
    }
}

/// `g(x) = bias + sum_j coef[j] * x_j` over boolean columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanGam {
    pub bias: f64,
    pub coef: Vec<f64>,
}

impl BooleanGam {
    pub fn score(&self, x: &[bool]) -> f64 {
        self.bias + self.coef.iter().zip(x).filter(|(_, &b)| b).map(|(c, _)| c).sum::<f64>()
    }
}

/// Affine imputer for column `target`:
/// `P(x_b = 1 | x_-b) = slope * (s - min) / (max - min) + offset` with
/// `s = sum_{j != b} coef[j] x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputerSpec {
    pub target: usize,
    /// Entry `target` is ignored and must be zero.
    pub coef: Vec<f64>,
    pub slope: f64,
    pub offset: f64,
    pub score_min: f64,
    pub score_max: f64,
}

impl ImputerSpec {
    /// Derives `offset = 1 - slope` and the extremal scores over all
    /// boolean inputs.
    pub fn new(target: usize, coef: Vec<f64>, slope: f64) -> Result<ImputerSpec> {
        let bound = |pick: fn(f64, f64) -> f64| -> f64 {
            coef.iter()
                .enumerate()
                .filter(|(j, _)| *j != target)
                .map(|(_, &c)| pick(c, 0.0))
                .sum()
        };
        let imp = ImputerSpec {
            target,
            score_min: bound(f64::min),
            score_max: bound(f64::max),
            coef,
            slope,
            offset: 1.0 - slope,
        };
        imp.validate()?;
        Ok(imp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target >= self.coef.len() {
            return Err(Error::Imputer(format!(
                "target {} out of range for {} columns",
                self.target,
                self.coef.len()
            )));
        }
        if self.coef[self.target] != 0.0 {
            return Err(Error::Imputer("imputer uses its own target column".into()));
        }
        if !(self.slope > 0.0 && self.offset > 0.0 && libm::fabs(self.slope + self.offset - 1.0) < 1e-12) {
            return Err(Error::Imputer(format!(
                "need slope > 0, offset > 0, slope + offset = 1; got {} and {}",
                self.slope, self.offset
            )));
        }
        if self.score_max.is_nan() || self.score_min.is_nan() || self.score_max < self.score_min {
            return Err(Error::Imputer("score_max below score_min".into()));
        }
        Ok(())
    }

    fn is_constant(&self) -> bool {
        self.coef.iter().all(|&c| c == 0.0)
    }

    pub fn raw_score(&self, x: &[bool]) -> f64 {
        self.coef
            .iter()
            .zip(x)
            .enumerate()
            .filter(|(j, (_, &b))| *j != self.target && b)
            .map(|(_, (c, _))| c)
            .sum()
    }

    /// Modeled `P(x_b = 1)`. A constant imputer yields `offset`.
    pub fn prob_true(&self, x: &[bool]) -> f64 {
        if self.is_constant() {
            return self.offset;
        }
        self.slope * (self.raw_score(x) - self.score_min) / (self.score_max - self.score_min) + self.offset
    }
}

/// M-GAM over the same boolean columns with a single missingness reason
/// on column `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanMgam {
    pub bias: f64,
    pub coef: Vec<f64>,
    pub target: usize,
    /// Missingness indicator of `target`.
    pub miss_coef: f64,
    /// Interaction of `target` missing with each column; entry `target`
    /// is always zero.
    pub interaction: Vec<f64>,
}

impl BooleanMgam {
    /// `x[target] = None` marks the target missing; other entries must be
    /// present.
    pub fn score(&self, x: &[Option<bool>]) -> f64 {
        let on = |j: usize| x[j] == Some(true);
        let mut s = self.bias;
        for j in 0..self.coef.len() {
            if on(j) {
                s += self.coef[j];
            }
        }
        if x[self.target].is_none() {
            s += self.miss_coef;
            for j in 0..self.coef.len() {
                if on(j) {
                    s += self.interaction[j];
                }
            }
        }
        s
    }
}

/// Builds the M-GAM whose score on a missing target equals the
/// imputer-weighted average of the GAM over both completions.
pub fn construct_mgam_from_imputer(gam: &BooleanGam, imp: &ImputerSpec) -> Result<BooleanMgam> {
    imp.validate()?;
    if gam.coef.len() != imp.coef.len() {
        return Err(Error::Dimension(format!(
            "GAM has {} columns, imputer {}",
            gam.coef.len(),
            imp.coef.len()
        )));
    }
    let b = imp.target;
    let beta_b = gam.coef[b];
    let mut interaction = vec![0.0; gam.coef.len()];
    let miss_coef = if imp.is_constant() {
        beta_b * imp.offset
    } else {
        let range = imp.score_max - imp.score_min;
        if range.is_nan() || range <= 0.0 {
            return Err(Error::Imputer("imputer score range is degenerate".into()));
        }
        for (j, a) in interaction.iter_mut().enumerate() {
            if j != b {
                *a = imp.coef[j] * beta_b * imp.slope / range;
            }
        }
        beta_b * imp.offset - beta_b * imp.slope * imp.score_min / range
    };
    Ok(BooleanMgam {
        bias: gam.bias,
        coef: gam.coef.clone(),
        target: b,
        miss_coef,
        interaction,
    })
}

pub const MAX_ENUMERATION: usize = 1 << 16;

/// Largest absolute gap between the M-GAM and the GAM (target present)
/// or its imputer-weighted expectation (target missing), over every
/// boolean input.
pub fn verify_equivalence(gam: &BooleanGam, imp: &ImputerSpec, mgam: &BooleanMgam) -> Result<f64> {
    let p = gam.coef.len();
    if p == 0 || p - 1 > 16 || mgam.coef.len() != p || imp.coef.len() != p || mgam.interaction.len() != p {
        return Err(Error::TooLarge(format!(
            "cannot enumerate {p} boolean columns (limit {MAX_ENUMERATION} points, matching sizes)"
        )));
    }
    let b = imp.target;
    let others: Vec<usize> = (0..p).filter(|&j| j != b).collect();
    let mut worst: f64 = 0.0;
    let mut x = vec![false; p];
    let mut xo: Vec<Option<bool>> = vec![None; p];
    for mask in 0u32..(1 << others.len()) {
        for (bit, &j) in others.iter().enumerate() {
            x[j] = mask >> bit & 1 == 1;
            xo[j] = Some(x[j]);
        }
        for vb in [false, true] {
            x[b] = vb;
            xo[b] = Some(vb);
            worst = worst.max(libm::fabs(mgam.score(&xo) - gam.score(&x)));
        }
        x[b] = true;
        let plus = gam.score(&x);
        x[b] = false;
        let minus = gam.score(&x);
        let pt = imp.prob_true(&x);
        let expected = pt * plus + (1.0 - pt) * minus;
        xo[b] = None;
        worst = worst.max(libm::fabs(mgam.score(&xo) - expected));
    }
    Ok(worst)
}

/// Random GAM and valid imputer over `p` boolean columns (target 0).
pub fn random_instance(p: usize, rng: &mut impl Rng) -> Result<(BooleanGam, ImputerSpec)> {
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let gam = BooleanGam {
        bias: uniform(-2.0, 2.0),
        coef: (0..p).map(|_| uniform(-3.0, 3.0)).collect(),
    };
    let target = 0;
    let coef: Vec<f64> = (0..p)
        .map(|j| if j == target { 0.0 } else { uniform(-2.0, 2.0) })
        .collect();
    let slope = uniform(0.05, 0.95);
    Ok((gam, ImputerSpec::new(target, coef, slope)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("0.25"), Some(q(1, 4)));
        assert_eq!(parse_decimal("3"), Some(q(3, 1)));
        assert_eq!(parse_decimal("-.5"), Some(q(-1, 2)));
        assert_eq!(parse_decimal("1e-3"), None);
        assert_eq!(parse_decimal(""), None);
    }

    #[test]
    fn dgp1_worked_example() {
        let p = Dgp1Params::new(q(1, 4), q(1, 10)).unwrap();
        let r = dgp1_exact(&p);
        assert_eq!(r.total_probability, Q::one());
        assert_eq!(r.acc_f1, q(3, 4));
        assert!(r.acc_f2 >= q(9, 10));
        assert!(r.acc_f2 > r.acc_f1);
        assert!(r.rule_f1[&(true, true)]);
        assert!(!r.rule_f1[&(true, false)]);
    }

    #[test]
    fn dgp1_rejects_bad_params() {
        assert!(Dgp1Params::new(q(1, 10), q(1, 4)).is_err());
        assert!(Dgp1Params::new(q(1, 2), q(1, 4)).is_err());
        assert!(Dgp1Params::new(q(1, 4), Q::zero()).is_err());
        assert!(Dgp1Params::new(q(1, 4), q(1, 4)).is_err());
    }

    #[test]
    fn dgp1_accuracy_formulae() {
        // acc_f1 = 1 - k1; acc_f2 >= 1 - k2 on a grid
        for a in 1..10 {
            for b in 1..(5 * a) {
                let (k1, k2) = (q(a, 20), q(b, 100));
                let p = Dgp1Params::new(k1, k2).unwrap();
                let r = dgp1_exact(&p);
                assert_eq!(r.acc_f1, Q::one() - k1);
                assert!(r.acc_f2 >= Q::one() - k2);
            }
        }
    }

    #[test]
    fn dgp2_deltas() {
        let r = dgp2_exact();
        assert_eq!(r.total_probability, Q::one());
        assert_eq!(r.loss_delta, q(1, 528));
        assert_eq!(r.gain_delta, q(15, 2112));
        assert_eq!(r.net, q(11, 2112));
        assert_eq!(r.acc_imputed, q(11, 12));
        assert_eq!(r.acc_missing - r.acc_imputed, r.net);
    }

    #[test]
    fn constant_imputer_halves_the_coefficient() {
        let gam = BooleanGam {
            bias: 0.3,
            coef: vec![2.0, -1.0, 0.5],
        };
        let imp = ImputerSpec::new(0, vec![0.0; 3], 0.5).unwrap();
        let m = construct_mgam_from_imputer(&gam, &imp).unwrap();
        assert_eq!(m.miss_coef, 1.0);
        assert!(m.interaction.iter().all(|&a| a == 0.0));
        assert!(verify_equivalence(&gam, &imp, &m).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_weight_target_gives_zero_missing_terms() {
        let gam = BooleanGam {
            bias: 0.3,
            coef: vec![0.0, -1.0, 0.5],
        };
        let imp = ImputerSpec::new(0, vec![0.0, 1.0, -2.0], 0.7).unwrap();
        let m = construct_mgam_from_imputer(&gam, &imp).unwrap();
        assert_eq!(m.miss_coef, 0.0);
        assert!(m.interaction.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn random_constructions_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in 2..=8 {
            let (gam, imp) = random_instance(p, &mut rng).unwrap();
            let m = construct_mgam_from_imputer(&gam, &imp).unwrap();
            assert!(verify_equivalence(&gam, &imp, &m).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn perturbation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (gam, imp) = random_instance(3, &mut rng).unwrap();
        let mut m = construct_mgam_from_imputer(&gam, &imp).unwrap();
        m.interaction[1] += 0.1;
        assert!(verify_equivalence(&gam, &imp, &m).unwrap() >= 0.1 - 1e-12);
    }

    #[test]
    fn imputer_validation() {
        assert!(ImputerSpec::new(0, vec![0.0, 1.0], 1.0).is_err());
        assert!(ImputerSpec::new(0, vec![1.0, 1.0], 0.5).is_err());
        assert!(ImputerSpec::new(2, vec![0.0, 1.0], 0.5).is_err());
        let mut imp = ImputerSpec::new(0, vec![0.0, 1.0], 0.5).unwrap();
        imp.score_max = imp.score_min;
        let gam = BooleanGam {
            bias: 0.0,
            coef: vec![1.0, 1.0],
        };
        assert!(matches!(
            construct_mgam_from_imputer(&gam, &imp),
            Err(Error::Imputer(_))
        ));
    }

    #[test]
    fn enumeration_limit() {
        let gam = BooleanGam {
            bias: 0.0,
            coef: vec![0.0; 18],
        };
        let imp = ImputerSpec::new(0, vec![0.0; 18], 0.5).unwrap();
        let m = construct_mgam_from_imputer(&gam, &imp).unwrap();
        assert!(matches!(verify_equivalence(&gam, &imp, &m), Err(Error::TooLarge(_))));
    }
}
