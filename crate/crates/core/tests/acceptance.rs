//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdim_core::antichain::{antichain_for_n, check_entropy_inequality, verify_antichain};
use qdim_core::dimension::{
    analytic_dimension, antichain_gap, discontinuity_demo, estimate_dimension, stability_experiment, t_sequence,
    Schedule, StabilityOptions, Window,
};
use qdim_core::ifs::presets::{cantor, dyadic_lebesgue, geometric_half_third, uniform_system};
use qdim_core::metrics::{continuity_gap, rho1, rho_r};
use qdim_core::quantizer::{error_curve, gme_exact, gme_mc, Anchor, Method, Strategy};
use qdim_core::{
    make_finite_ifs, Antichain, Codebook, Discrete, Distribution1d, IfsModel, Interval, SelfSimilarMeasure, Shifted,
    SimilarityMap, Word,
};

const D_HALF_THIRD: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_time(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn analytic() -> Outcome {
    let start = Instant::now();
    let c = analytic_dimension(&cantor(), 1e-12);
    let g = analytic_dimension(&geometric_half_third(), 1e-12);
    let ec = (c.value - D_HALF_THIRD).abs();
    let eg = (g.value - D_HALF_THIRD).abs();
    let certified = g.lower() <= D_HALF_THIRD && D_HALF_THIRD <= g.upper() && g.error <= 1e-10;
    let t = start.elapsed();
    outcome(
        ec <= 1e-12 && eg <= 1e-10 && certified && within_time(t, 1),
        format!("cantor err {ec:.1e}, geometric err {eg:.1e} (bound {:.1e}), {:.3}s", g.error, t.as_secs_f64()),
    )
}

fn regression() -> Outcome {
    let start = Instant::now();
    let ns: Vec<usize> = (5..=12).map(|k| 1 << k).collect();
    let strategy = Strategy::AntichainPolish { anchor: Anchor::Optimal, iters: 10 };
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, model, allowed) in [("cantor", cantor(), 0.05), ("geometric", geometric_half_third(), 0.07)] {
        let mu = SelfSimilarMeasure::new(model);
        let est = error_curve(&mu, &ns, &strategy, Method::Exact { tol: 1e-4 })
            .and_then(|curve| estimate_dimension(&curve, Window::all(&ns)));
        match est {
            Ok(e) => {
                let err = e.d_hat - D_HALF_THIRD;
                pass &= err.abs() <= allowed;
                parts.push(format!("{name} D̂ = {:.4} (err {err:+.4}, allowed ±{allowed})", e.d_hat));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    let t = start.elapsed();
    outcome(pass && within_time(t, 300), format!("{}, {:.1}s", parts.join("; "), t.as_secs_f64()))
}

fn truncation_sequence() -> Outcome {
    let g = geometric_half_third();
    let ns = [2usize, 5, 10, 20, 40];
    let t = match t_sequence(&g, &ns) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    // independent partial sums with p_j = 2^-j, s_j = 3^-j
    let oracle = |n: usize| {
        let l: f64 = (1..=n).map(|j| 0.5f64.powi(j as i32)).sum();
        let (mut num, mut den) = (0.0, 0.0);
        for j in 1..=n {
            let q = 0.5f64.powi(j as i32) / l;
            num += q * q.ln();
            den += q * (j as f64) * (1.0 / 3.0f64).ln();
        }
        num / den
    };
    let oracle_err = t.iter().map(|&(n, v)| (v - oracle(n)).abs()).fold(0.0, f64::max);
    let t40 = (t[4].1 - D_HALF_THIRD).abs();
    outcome(t40 < 1e-6 && oracle_err <= 1e-10, format!("|t_40 - D| = {t40:.1e}, max oracle diff {oracle_err:.1e}"))
}

/// Probabilities are `k_j / 4`, so word masses are exact dyadic rationals.
fn exact_mass_is_one(ac: &Antichain, quarters: &[u128]) -> bool {
    let depth = ac.max_len() as u32;
    let total = 4u128.checked_pow(depth);
    let mut sum = 0u128;
    for w in ac.words() {
        let num: u128 = w.letters().iter().map(|&l| quarters[l as usize - 1]).product();
        let term = num * 4u128.pow(depth - w.len() as u32);
        sum = match sum.checked_add(term) {
            Some(s) => s,
            None => return false,
        };
    }
    Some(sum) == total
}

fn combinatorics() -> Outcome {
    let models: Vec<(&str, IfsModel, Vec<u128>)> = vec![
        ("cantor", cantor(), vec![2, 2]),
        (
            "two-map",
            make_finite_ifs(
                vec![SimilarityMap::line(0.25, 1.0, 0.0).unwrap(), SimilarityMap::line(0.5, 1.0, 0.5).unwrap()],
                vec![0.25, 0.75],
            )
            .unwrap(),
            vec![1, 3],
        ),
        ("three-map", uniform_system(3, 0.2, vec![0.25, 0.25, 0.5]), vec![1, 1, 2]),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, model, quarters) in &models {
        let probs = model.probs_prefix(quarters.len());
        let mut checked = 0;
        let mut bad = 0;
        for n in 5..=2000usize {
            let Ok((_, ac)) = antichain_for_n(model, n) else { continue };
            checked += 1;
            let rep = verify_antichain(&probs, &ac, 0, 0);
            if !(ac.len() <= n && rep.prefix_free && rep.structurally_maximal && exact_mass_is_one(&ac, quarters)) {
                bad += 1;
            }
        }
        let ns: Vec<usize> = (5..=2000).collect();
        match antichain_gap(model, &ns, &model.center(), 1e-4) {
            Ok(gap) => {
                // each cylinder holds a codepoint: the gap cannot exceed log diam X = 0
                let ok = bad == 0 && gap.constant <= 1e-4 && gap.drift <= 0.05;
                pass &= ok;
                parts.push(format!(
                    "{name}: {checked} n, {bad} failures, gap const {:.3}, drift {:+.3}",
                    gap.constant, gap.drift
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn random_antichain(rng: &mut ChaCha8Rng, k: usize, max_depth: usize) -> Antichain {
    let mut leaves = Vec::new();
    let mut stack = vec![Word::empty()];
    while let Some(w) = stack.pop() {
        let expand = w.is_empty() || (w.len() < max_depth && rng.gen_bool(0.5));
        if expand {
            stack.extend((1..=k as u32).map(|l| w.child(l)));
        } else {
            leaves.push(w);
        }
    }
    Antichain::new(leaves, k)
}

fn entropy_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=5);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let ratios: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..0.9 / k as f64)).collect();
        let d = probs.iter().map(|p| p * p.ln()).sum::<f64>()
            / probs.iter().zip(&ratios).map(|(p, s)| p * s.ln()).sum::<f64>();
        let ac = random_antichain(&mut rng, k, 6);
        let check = check_entropy_inequality(&ac, &probs, &ratios, d);
        worst = worst.max(check.lhs - check.rhs);
        if !check.holds {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("1000 trials, {violations} violations, max lhs - rhs = {worst:.1e}"))
}

fn random_line_model(rng: &mut ChaCha8Rng) -> IfsModel {
    let k = rng.gen_range(2..=3);
    let ratios: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..0.3)).collect();
    let free = 1.0 - ratios.iter().sum::<f64>();
    let mut x = 0.0;
    let mut maps = Vec::new();
    for (i, r) in ratios.iter().enumerate() {
        maps.push(SimilarityMap::line(*r, 1.0, x).unwrap());
        x += r + if i + 1 < k { free / (k - 1) as f64 } else { 0.0 };
    }
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    make_finite_ifs(maps, raw.iter().map(|p| p / total).collect()).unwrap()
}

fn metric_exactness() -> Outcome {
    let leb = SelfSimilarMeasure::new(dyadic_lebesgue());
    let half = Discrete::point(0.5);
    let run = || -> qdim_core::Result<(f64, f64, f64)> {
        let d = rho1(&leb, &half, 1e-8)?;
        let e_half = (d.value - 0.25).abs();
        let c = SelfSimilarMeasure::new(cantor());
        let mut e_shift: f64 = 0.0;
        for shift in [0.1, -0.37, 1.5] {
            let moved = Shifted { inner: &c, shift };
            e_shift = e_shift.max((rho1(&c, &moved, 1e-8)?.value - shift.abs()).abs());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut e_cross: f64 = 0.0;
        for _ in 0..20 {
            let a = SelfSimilarMeasure::new(random_line_model(&mut rng));
            let b = SelfSimilarMeasure::new(random_line_model(&mut rng));
            let shift = rng.gen_range(-0.2..0.2);
            let b = Shifted { inner: &b, shift };
            let d1 = rho1(&a, &b, 1e-9)?;
            let dq = rho_r(&a, &b, 1.0, 1e-9)?;
            e_cross = e_cross.max((d1.value - dq.value).abs());
        }
        Ok((e_half, e_shift, e_cross))
    };
    match run() {
        Ok((a, b, c)) => outcome(
            a <= 1e-8 && b <= 1e-8 && c <= 2e-8,
            format!("|ρ1(Leb, δ) - 1/4| = {a:.1e}, translation {b:.1e}, ρ1 vs ρ_r(1) on 20 pairs {c:.1e}"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn continuity() -> Outcome {
    let g = geometric_half_third();
    let mut violations = 0;
    let mut unconverged = 0;
    let mut worst = f64::NEG_INFINITY;
    for big_n in [5usize, 10, 20, 40] {
        for n in [1usize, 4, 16, 64] {
            match continuity_gap(&g, big_n, n, 1e-7, 0) {
                Ok(rep) => {
                    worst = worst.max(rep.lhs - rep.rhs);
                    unconverged += usize::from(!rep.converged);
                    if !rep.holds {
                        violations += 1;
                    }
                }
                Err(e) => return outcome(false, format!("N = {big_n}, n = {n}: {e}")),
            }
        }
    }
    outcome(violations == 0, format!("16 cases, {violations} violations, max lhs - rhs = {worst:.2e}, {unconverged} with widened brackets"))
}

fn stability() -> Outcome {
    let g = geometric_half_third();
    let opts = StabilityOptions::default();
    let run = || -> qdim_core::Result<(bool, f64, bool, bool)> {
        let rep = stability_experiment(&g, &Schedule::geometric_weight(&g, &Schedule::default_thetas())?, &opts)?;
        let last = rep.rows.last().map_or(f64::INFINITY, |r| r.delta_d);
        let ks: Vec<usize> = (0..=8).map(|i| 1 << i).collect();
        let counter = stability_experiment(&g, &Schedule::equal_head(&g, &ks)?, &opts)?;
        let n2 = counter.checks.iter().any(|c| c.truncation == 2 && !c.ok);
        Ok((rep.monotone && !rep.hypothesis_violated, last, counter.hypothesis_violated && n2, counter.rows.len() == ks.len()))
    };
    match run() {
        Ok((monotone, last, flagged, kept)) => outcome(
            monotone && last < 1e-3 && flagged && kept,
            format!("weight schedule strictly decreasing: {monotone}, final |ΔD| = {last:.2e}; counter-schedule flagged at N = 2: {flagged}, rows kept: {kept}"),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn discontinuity() -> Outcome {
    match discontinuity_demo(&[4, 8, 16], 1e-10) {
        Ok(rep) => {
            let mid = rep.rows.iter().map(|r| (r.rho1_midpoint - 0.25 / r.m as f64).abs()).fold(0.0, f64::max);
            let right = rep.rows.iter().map(|r| (r.rho1_right - 0.5 / r.m as f64).abs()).fold(0.0, f64::max);
            let degenerate = rep.rows.iter().all(|r| r.e_hat.is_none() && r.d == 0.0);
            let leb = (rep.lebesgue.d_hat - 1.0).abs();
            outcome(
                mid <= 1e-9 && right <= 1e-9 && degenerate && leb <= 1e-3,
                format!(
                    "ρ1 midpoint lattice vs 1/(4m) {mid:.1e}, right lattice vs 1/(2m) {right:.1e}, D̂(Leb) = {:.5}, lattices degenerate: {degenerate}",
                    rep.lebesgue.d_hat
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

/// Cantor system on `[t, t + λ]`.
fn cantor_affine(lambda: f64, t: f64) -> IfsModel {
    let maps = vec![
        SimilarityMap::line(1.0 / 3.0, 1.0, 2.0 * t / 3.0).unwrap(),
        SimilarityMap::line(1.0 / 3.0, 1.0, 2.0 * t / 3.0 + 2.0 * lambda / 3.0).unwrap(),
    ];
    IfsModel::finite(vec![Interval::new(t, t + lambda)], maps, vec![0.5, 0.5]).unwrap()
}

fn hygiene() -> Outcome {
    let start = Instant::now();
    // codepoints off the support (0.1 would be a Cantor point), so brackets can reach 1e-11
    let base = [0.15, 0.5, 0.85];
    let run = || -> qdim_core::Result<(f64, f64, f64, f64)> {
        let e0 = gme_exact(&SelfSimilarMeasure::new(cantor()), &Codebook::from_scalars(&base)?, 1e-11)?.require_converged()?;
        let mut scale_err: f64 = 0.0;
        for lambda in [2.0, 1.0 / 3.0] {
            let pts: Vec<f64> = base.iter().map(|x| lambda * x).collect();
            let e = gme_exact(&SelfSimilarMeasure::new(cantor_affine(lambda, 0.0)), &Codebook::from_scalars(&pts)?, 1e-11)?.require_converged()?;
            scale_err = scale_err.max((e.mid() - e0.mid() - f64::ln(lambda)).abs());
        }
        let mut shift_err: f64 = 0.0;
        for t in [0.25, -3.0] {
            let pts: Vec<f64> = base.iter().map(|x| x + t).collect();
            let e = gme_exact(&SelfSimilarMeasure::new(cantor_affine(1.0, t)), &Codebook::from_scalars(&pts)?, 1e-11)?.require_converged()?;
            shift_err = shift_err.max((e.mid() - e0.mid()).abs());
        }
        // MC interval coverage of the exact value
        let mut covered = 0;
        let mut total = 0;
        for model in [cantor(), dyadic_lebesgue()] {
            let mu = SelfSimilarMeasure::new(model);
            let cb = Codebook::from_scalars(&base)?;
            let exact = gme_exact(&mu, &cb, 1e-9)?.mid();
            for seed in 0..100 {
                let b = gme_mc(&mu, &cb, 5000, seed, 0.95)?;
                total += 1;
                if b.contains(exact) {
                    covered += 1;
                }
            }
        }
        let coverage = covered as f64 / total as f64;
        // KS distance of 10^5 draws against the exact CDF
        let mu = SelfSimilarMeasure::new(cantor());
        let bound = 1.95 / (1e5f64).sqrt() * 1.5;
        let mut ks_ok = 0;
        let seeds = 20;
        for seed in 0..seeds {
            let mut xs = mu.sample(100_000, seed).xs();
            xs.sort_by(f64::total_cmp);
            let m = xs.len() as f64;
            let mut d: f64 = 0.0;
            for (i, x) in xs.iter().enumerate() {
                let f = mu.cdf(*x, 1e-9)?;
                d = d.max((f - i as f64 / m).abs()).max(((i + 1) as f64 / m - f).abs());
            }
            if d < bound {
                ks_ok += 1;
            }
        }
        Ok((scale_err, shift_err, coverage, ks_ok as f64 / seeds as f64))
    };
    match run() {
        Ok((scale, shift, coverage, ks)) => {
            // 200 intervals at nominal 95%: allow two binomial standard deviations
            let floor = 0.95 - 2.0 * (0.95f64 * 0.05 / 200.0).sqrt();
            let t = start.elapsed();
            outcome(
                scale <= 1e-10 && shift <= 1e-10 && coverage >= floor && ks >= 0.95 && within_time(t, 180),
                format!(
                    "scaling {scale:.1e}, translation {shift:.1e}, MC coverage {coverage:.3} (floor {floor:.3}), KS within bound {:.0}% of seeds, {:.1}s",
                    100.0 * ks,
                    t.as_secs_f64()
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("analytic dimension", analytic),
        ("desk-scale regression", regression),
        ("truncation sequence", truncation_sequence),
        ("antichain combinatorics", combinatorics),
        ("entropy inequality", entropy_inequality),
        ("metric exactness", metric_exactness),
        ("continuity under truncation", continuity),
        ("stability schedule", stability),
        ("lattice discontinuity", discontinuity),
        ("numerical hygiene", hygiene),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
