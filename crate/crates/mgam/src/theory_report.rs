//! The claim suite behind `mgam theory-check`.

use mgam_core::theory::{
    construct_mgam_from_imputer, dgp1_exact, dgp1_monte_carlo, dgp2_exact, random_instance, to_f64, verify_equivalence,
    Dgp1Params, Q,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

fn show(v: &Q) -> String {
    format!("{v} ({:.6})", to_f64(v))
}

/// `v` over denominator `den` when exact, then the reduced form.
fn show_over(v: &Q, den: i128) -> String {
    let scaled = v * q(den, 1);
    if scaled.is_integer() && *v.denom() != den {
        format!("{}/{den} = {}", scaled.to_integer(), show(v))
    } else {
        show(v)
    }
}

/// Grid `k1 = 0.05..0.45` step 0.05, `k2 = 0.01..k1 - 0.01` step 0.01.
pub fn dgp1_grid() -> Vec<Dgp1Params> {
    let mut out = Vec::new();
    for a in 1..=9 {
        for b in 1..(5 * a) {
            out.push(Dgp1Params::new(q(a, 20), q(b, 100)).expect("grid points are valid"));
        }
    }
    out
}

pub struct Options {
    pub mc_samples: usize,
    pub constructions: usize,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            mc_samples: 1_000_000,
            constructions: 100,
            seed: 0,
        }
    }
}

pub fn run(opts: &Options) -> Vec<Claim> {
    let mut claims = Vec::new();

    let p = Dgp1Params::new(q(1, 4), q(1, 10)).expect("valid");
    let r = dgp1_exact(&p);
    claims.push(Claim {
        name: "imputation-accuracy-example",
        passed: r.acc_f1 == q(3, 4) && r.acc_f2 >= q(9, 10),
        detail: format!(
            "k1=1/4, k2=1/10: acc_f1 = {}, acc_f2 = {}",
            show(&r.acc_f1),
            show(&r.acc_f2)
        ),
    });

    let grid = dgp1_grid();
    let failures: Vec<String> = grid
        .iter()
        .filter_map(|p| {
            let r = dgp1_exact(p);
            let ok = r.total_probability == q(1, 1)
                && r.acc_f1 == q(1, 1) - p.k1()
                && r.acc_f2 >= q(1, 1) - p.k2()
                && r.acc_f2 > r.acc_f1;
            (!ok).then(|| format!("k1={}, k2={}", p.k1(), p.k2()))
        })
        .collect();
    claims.push(Claim {
        name: "missingness-beats-imputation-grid",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "{} (k1, k2) pairs: acc_f1 = 1-k1 < 1-k2 <= acc_f2, joint sums to 1",
                grid.len()
            )
        } else {
            format!("failed at {}", failures.join("; "))
        },
    });

    if opts.mc_samples > 0 {
        let (e1, e2) = dgp1_monte_carlo(&p, opts.mc_samples, opts.seed);
        let n = opts.mc_samples as f64;
        let within = |emp: f64, exact: &Q| {
            let pr = to_f64(exact);
            (emp - pr).abs() <= 4.0 * (pr * (1.0 - pr) / n).sqrt()
        };
        claims.push(Claim {
            name: "monte-carlo-agreement",
            passed: within(e1, &r.acc_f1) && within(e2, &r.acc_f2),
            detail: format!(
                "{} draws, seed {}: acc_f1 = {e1:.6}, acc_f2 = {e2:.6}",
                opts.mc_samples, opts.seed
            ),
        });
    }

    let d2 = dgp2_exact();
    claims.push(Claim {
        name: "rare-noisy-missingness-deltas",
        passed: d2.loss_delta == q(1, 528) && d2.gain_delta == q(15, 2112) && d2.net == q(11, 2112),
        detail: format!(
            "loss = {}, gain = {}, net = {}",
            show(&d2.loss_delta),
            show_over(&d2.gain_delta, 2112),
            show_over(&d2.net, 2112)
        ),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    let mut detected = true;
    for _ in 0..opts.constructions {
        let p = rng.random_range(2..=8);
        let (gam, imp) = random_instance(p, &mut rng).expect("random instances are valid");
        let mut m = construct_mgam_from_imputer(&gam, &imp).expect("non-degenerate");
        worst = worst.max(verify_equivalence(&gam, &imp, &m).expect("enumerable"));
        m.miss_coef += 0.1;
        detected &= verify_equivalence(&gam, &imp, &m).expect("enumerable") >= 0.1 - 1e-12;
    }
    claims.push(Claim {
        name: "imputer-equivalent-mgam",
        passed: worst <= 1e-10,
        detail: format!("{} random instances, max deviation {worst:e}", opts.constructions),
    });
    claims.push(Claim {
        name: "broken-construction-detected",
        passed: detected,
        detail: "indicator coefficient +0.1 gives deviation >= 0.1 on every instance".into(),
    });
    claims
}

pub fn render(claims: &[Claim]) -> String {
    let mut out = String::new();
    for c in claims {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("[{tag}] {}: {}\n", c.name, c.detail));
    }
    let failed = claims.iter().filter(|c| !c.passed).count();
    out.push_str(&format!("{} of {} claims hold\n", claims.len() - failed, claims.len()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size_and_claims_hold() {
        assert_eq!(dgp1_grid().len(), (1..=9).map(|a| 5 * a - 1).sum::<i128>() as usize);
        let claims = run(&Options {
            mc_samples: 20_000,
            constructions: 10,
            seed: 1,
        });
        assert!(claims.iter().all(|c| c.passed), "{}", render(&claims));
        let text = render(&claims);
        assert!(text.contains("1/528") && text.contains("15/2112") && text.contains("11/2112"));
    }
}
