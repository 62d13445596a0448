//! Minimal (Wasserstein) distances between one-dimensional measures, the continuity
//! inequality between quantization errors, and perturbation norms of model pairs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::dist::Distribution1d;
use crate::error::{Error, Result};
use crate::ifs::{Family, IfsModel};
use crate::measure::SelfSimilarMeasure;
use crate::quantizer::{gme_exact, lloyd_log_with, ErrorBracket, LloydOptions};

/// Refinement budget of one distance evaluation.
pub const MAX_SPLITS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMethod {
    CdfL1,
    QuantileCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricResult {
    pub value: f64,
    /// Certified bound on `|value - true distance|`.
    pub tol: f64,
    pub r: f64,
    pub method: MetricMethod,
    /// `false` for `r < 1`, where the quantile coupling only bounds the distance from above.
    pub optimal: bool,
}

impl MetricResult {
    pub fn lower(&self) -> f64 {
        (self.value - self.tol).max(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.value + self.tol
    }
}

struct Cell<T> {
    width: f64,
    lower: f64,
    upper: f64,
    data: T,
}

impl<T> PartialEq for Cell<T> {
    fn eq(&self, other: &Self) -> bool {
        self.width.total_cmp(&other.width) == Ordering::Equal
    }
}
impl<T> Eq for Cell<T> {}
impl<T> PartialOrd for Cell<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Cell<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width.total_cmp(&other.width)
    }
}

/// Bisect the cell with the widest bracket until the summed width is at most `2 * half_tol(cells)`.
fn refine<T: Clone>(
    initial: Vec<T>,
    bracket: impl Fn(&T) -> Result<(f64, f64)>,
    split: impl Fn(&T) -> Result<(T, T)>,
    done: impl Fn(f64, f64, usize) -> bool,
    tol: f64,
) -> Result<(f64, f64, usize)> {
    let mut heap = BinaryHeap::new();
    let (mut lo_sum, mut hi_sum) = (0.0, 0.0);
    let mut cells = 0usize;
    for t in initial {
        let (lower, upper) = bracket(&t)?;
        lo_sum += lower;
        hi_sum += upper;
        cells += 1;
        heap.push(Cell { width: upper - lower, lower, upper, data: t });
    }
    let mut splits = 0;
    let resum = |heap: &BinaryHeap<Cell<T>>| {
        (heap.iter().map(|c| c.lower).sum::<f64>(), heap.iter().map(|c| c.upper).sum::<f64>())
    };
    loop {
        if done(lo_sum, hi_sum, cells) {
            let (l, h) = resum(&heap);
            if done(l, h, cells) {
                return Ok((l, h, cells));
            }
            (lo_sum, hi_sum) = (l, h);
        }
        if splits >= MAX_SPLITS {
            let (l, h) = resum(&heap);
            return Err(Error::ToleranceUnreachable { tol, iterations: splits, width: h - l });
        }
        let Some(cell) = heap.pop() else {
            let (l, h) = resum(&heap);
            return Ok((l, h, cells));
        };
        splits += 1;
        lo_sum -= cell.lower;
        hi_sum -= cell.upper;
        let (a, b) = split(&cell.data)?;
        for t in [a, b] {
            let (lower, upper) = bracket(&t)?;
            lo_sum += lower;
            hi_sum += upper;
            heap.push(Cell { width: upper - lower, lower, upper, data: t });
        }
        cells += 1;
    }
}

/// CDF and quantile evaluations are resolved far below the target so that their
/// accumulated error over many cells stays negligible.
fn eval_tol(tol: f64) -> f64 {
    (tol * 1e-9).clamp(1e-300, 1e-16)
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    x: f64,
    f1: f64,
    i1: f64,
    f2: f64,
    i2: f64,
}

fn probe<A: Distribution1d + ?Sized, B: Distribution1d + ?Sized>(a: &A, b: &B, x: f64, et: f64) -> Result<Probe> {
    let (f1, g1) = a.cdf_moment(x, et)?;
    let (f2, g2) = b.cdf_moment(x, et)?;
    Ok(Probe { x, f1, i1: x * f1 - g1, f2, i2: x * f2 - g2 })
}

/// `ρ_1 = ∫ |F_1 - F_2| dx`, certified to `tol`.
///
/// On each cell the exact integrated CDFs give `|∫ (F_1 - F_2)|` as a lower bound; when
/// monotonicity certifies the sign of `F_1 - F_2` on the cell that bound is the value.
pub fn rho1<A: Distribution1d + ?Sized, B: Distribution1d + ?Sized>(a: &A, b: &B, tol: f64) -> Result<MetricResult> {
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance {tol} must be positive")));
    }
    let (ha, hb) = (a.hull(), b.hull());
    let (lo, hi) = (ha.lo.min(hb.lo), ha.hi.max(hb.hi));
    let et = eval_tol(tol);
    let reach = lo.abs().max(hi.abs()).max(1.0);
    // error of one integrated-CDF value, and of a CDF value
    let ei = et * (1.0 + reach);
    if hi <= lo {
        return Ok(MetricResult { value: 0.0, tol: 0.0, r: 1.0, method: MetricMethod::CdfL1, optimal: true });
    }
    let pieces = 64;
    let probes = (0..=pieces)
        .map(|k| probe(a, b, lo + (hi - lo) * k as f64 / pieces as f64, et))
        .collect::<Result<Vec<_>>>()?;
    let initial: Vec<(Probe, Probe)> = probes.windows(2).map(|w| (w[0], w[1])).collect();
    let bracket = |&(p, q): &(Probe, Probe)| -> Result<(f64, f64)> {
        let len = q.x - p.x;
        let lower = ((q.i1 - p.i1) - (q.i2 - p.i2)).abs();
        let slack = 2.0 * et * len;
        if q.f1 + et <= p.f2 - et || q.f2 + et <= p.f1 - et {
            return Ok((lower, lower + slack));
        }
        let gap = (q.f1 - p.f2).max(q.f2 - p.f1) + 2.0 * et;
        Ok((lower, (gap * len).max(lower) + slack))
    };
    let split = |&(p, q): &(Probe, Probe)| -> Result<((Probe, Probe), (Probe, Probe))> {
        let m = probe(a, b, 0.5 * (p.x + q.x), et)?;
        Ok(((p, m), (m, q)))
    };
    let done = |l: f64, h: f64, cells: usize| 0.5 * (h - l) + 4.0 * ei * cells as f64 <= tol;
    let (l, h, cells) = refine(initial, bracket, split, done, tol)?;
    let value = (0.5 * (l + h)).max(0.0);
    Ok(MetricResult {
        value,
        tol: 0.5 * (h - l) + 4.0 * ei * cells as f64,
        r: 1.0,
        method: MetricMethod::CdfL1,
        optimal: true,
    })
}

#[derive(Debug, Clone, Copy)]
struct QProbe {
    u: f64,
    q1: f64,
    q2: f64,
    /// `∫_0^u Q_i`
    s1: f64,
    s2: f64,
}

fn superquantile<D: Distribution1d + ?Sized>(d: &D, u: f64, q: f64, et: f64) -> Result<f64> {
    let (f, g) = d.cdf_moment(q, et)?;
    Ok(g + q * (u - f))
}

fn qprobe<A: Distribution1d + ?Sized, B: Distribution1d + ?Sized>(
    a: &A,
    b: &B,
    u: f64,
    et: f64,
    with_integral: bool,
) -> Result<QProbe> {
    let q1 = a.quantile(u, et)?;
    let q2 = b.quantile(u, et)?;
    let (s1, s2) = if with_integral {
        (superquantile(a, u, q1, et)?, superquantile(b, u, q2, et)?)
    } else {
        (0.0, 0.0)
    };
    Ok(QProbe { u, q1, q2, s1, s2 })
}

/// `ρ_r = (∫_0^1 |Q_1(u) - Q_2(u)|^r du)^{1/r}` via the quantile coupling, optimal for `r >= 1`.
pub fn rho_r<A: Distribution1d + ?Sized, B: Distribution1d + ?Sized>(
    a: &A,
    b: &B,
    r: f64,
    tol: f64,
) -> Result<MetricResult> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::UnsupportedR(r));
    }
    quantile_coupling(a, b, r, tol)
}

/// The quantile-coupling cost for any `r > 0`; for `r < 1` it is only an upper bound on
/// `ρ_r` and the result is flagged `optimal = false`.
pub fn coupling_cost<A: Distribution1d + ?Sized, B: Distribution1d + ?Sized>(
    a: &A,
    b: &B,
    r: f64,
    tol: f64,
) -> Result<MetricResult> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::UnsupportedR(r));
    }
    quantile_coupling(a, b, r, tol)
}

fn quantile_coupling<A: Distribution1d + ?Sized, B: Distribution1d + ?Sized>(
    a: &A,
    b: &B,
    r: f64,
    tol: f64,
) -> Result<MetricResult> {
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance {tol} must be positive")));
    }
    let et = eval_tol(tol);
    let (ha, hb) = (a.hull(), b.hull());
    let reach = ha.lo.abs().max(ha.hi.abs()).max(hb.lo.abs()).max(hb.hi.abs()).max(1.0);
    let pieces = 64;
    let probes = (0..=pieces)
        .map(|k| qprobe(a, b, k as f64 / pieces as f64, et, true))
        .collect::<Result<Vec<_>>>()?;
    let initial: Vec<(QProbe, QProbe)> = probes.windows(2).map(|w| (w[0], w[1])).collect();
    // quantiles are resolved to `et` in x, superquantiles to `et * reach`
    let qe = 2.0 * et * reach;
    let bracket = |&(p, q): &(QProbe, QProbe)| -> Result<(f64, f64)> {
        let len = q.u - p.u;
        let gap_hi = (q.q1 - p.q2).max(q.q2 - p.q1).max(0.0) + qe;
        let gap_lo = (p.q1 - q.q2).max(p.q2 - q.q1).max(0.0);
        // L1 mass of |Q_1 - Q_2| on the cell: exact when the sign is certified
        let integral = ((q.s1 - p.s1) - (q.s2 - p.s2)).abs();
        let l1_lo = (integral - 2.0 * qe).max(len * gap_lo);
        let l1_hi = if q.q1 <= p.q2 || q.q2 <= p.q1 { (integral + 2.0 * qe).min(len * gap_hi) } else { len * gap_hi };
        // Jensen below; above, |Q_1 - Q_2|^r with values in [gap_lo, gap_hi] and a known
        // integral is at most the chord of t^r (for r >= 1), else sup-times-L1
        let lower = (len * gap_lo.powf(r)).max(if len > 0.0 { l1_lo.max(0.0).powf(r) / len.powf(r - 1.0) } else { 0.0 });
        let mut upper = (len * gap_hi.powf(r)).min(gap_hi.powf(r - 1.0) * l1_hi);
        if r >= 1.0 && gap_hi > gap_lo && len > 0.0 {
            let theta = ((l1_hi / len - gap_lo) / (gap_hi - gap_lo)).clamp(0.0, 1.0);
            upper = upper.min(len * (theta * gap_hi.powf(r) + (1.0 - theta) * gap_lo.powf(r)));
        }
        Ok((lower.min(upper), upper))
    };
    let split = |&(p, q): &(QProbe, QProbe)| -> Result<((QProbe, QProbe), (QProbe, QProbe))> {
        let m = qprobe(a, b, 0.5 * (p.u + q.u), et, true)?;
        Ok(((p, m), (m, q)))
    };
    let inv = 1.0 / r;
    let done = |l: f64, h: f64, _cells: usize| 0.5 * (h.max(0.0).powf(inv) - l.max(0.0).powf(inv)) <= tol;
    let (l, h, _) = refine(initial, bracket, split, done, tol)?;
    let (lo, hi) = (l.max(0.0).powf(inv), h.max(0.0).powf(inv));
    Ok(MetricResult {
        value: 0.5 * (lo + hi),
        tol: 0.5 * (hi - lo),
        r,
        method: MetricMethod::QuantileCoupling,
        optimal: r >= 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub truncation: usize,
    pub n: usize,
    /// `e_n` brackets (after `exp`) for the truncated and the full measure.
    pub e_truncated: (f64, f64),
    pub e_full: (f64, f64),
    /// `|e_n(μ_N) - e_n(μ)|` from bracket midpoints.
    pub lhs: f64,
    /// `ρ_1(μ_N, μ)`.
    pub rhs: f64,
    /// Elementary upper bound `tail_mass(N) * diam X` on the right-hand side.
    pub rhs_bound: f64,
    /// Combined bracket half-widths and metric tolerance.
    pub tol: f64,
    pub holds: bool,
    /// Both error brackets reached `tol`.
    pub converged: bool,
    pub seed: u64,
}

impl ContinuityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Compares `|e_n(μ_N) - e_n(μ)|` with `ρ_1(μ_N, μ)` for an infinite family.
///
/// Both infima are approximated by Lloyd codebooks; each codebook is evaluated on both
/// measures and each measure keeps the better of the two.
pub fn continuity_gap(ifs: &IfsModel, truncation: usize, n: usize, tol: f64, seed: u64) -> Result<ContinuityReport> {
    if ifs.is_finite() {
        return Err(Error::BadParameter("continuity_gap compares an infinite family with its truncation".into()));
    }
    if truncation < 2 || n == 0 {
        return Err(Error::BadParameter("need N >= 2 and n >= 1".into()));
    }
    let full = SelfSimilarMeasure::new(ifs.clone());
    let cut = SelfSimilarMeasure::new(ifs.truncate(truncation)?);
    // codebooks only need to be good, not certified to `tol`
    let opts = LloydOptions { tol: tol.max(1e-5), iters: 10, ..Default::default() };
    let books = [lloyd_log_with(&cut, n, &opts)?.codebook, lloyd_log_with(&full, n, &opts)?.codebook];
    let best = |mu: &SelfSimilarMeasure| -> Result<ErrorBracket> {
        let mut out: Option<ErrorBracket> = None;
        for cb in &books {
            // an unconverged bracket is still certified, only wider; its width enters the slack
            let b = gme_exact(mu, cb, tol)?;
            if out.is_none_or(|o| b.upper < o.upper) {
                out = Some(b);
            }
        }
        Ok(out.expect("two codebooks"))
    };
    let (bt, bf) = (best(&cut)?, best(&full)?);
    let (et, ef) = (bt.exp(), bf.exp());
    let mid = |e: (f64, f64)| 0.5 * (e.0 + e.1);
    let lhs = (mid(et) - mid(ef)).abs();
    let rho = rho1(&cut, &full, tol)?;
    let slack = 0.5 * (et.1 - et.0) + 0.5 * (ef.1 - ef.0) + rho.tol;
    Ok(ContinuityReport {
        truncation,
        n,
        e_truncated: et,
        e_full: ef,
        lhs,
        rhs: rho.value,
        rhs_bound: ifs.tail_mass(truncation) * ifs.diameter(),
        tol: slack,
        holds: lhs <= rho.value + slack,
        converged: bt.converged && bf.converged,
        seed,
    })
}

/// A finite sum with a certified bound on its omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailedSum {
    pub value: f64,
    pub tail_bound: f64,
}

impl TailedSum {
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationNorms {
    /// `Σ_j |p_{a,j} - p_{b,j}|`
    pub prob_diff: TailedSum,
    /// `Σ_j ‖S_{a,j} - S_{b,j}‖_∞` over the ambient box
    pub map_diff: TailedSum,
    /// `Σ_j p_{a,j} ‖S_{a,j} - S_{b,j}‖_∞`
    pub weighted_map_diff: TailedSum,
    /// Upper bound on `ρ_1(μ_a, μ_b)`:
    /// `(Σ p_{a,j} ‖ΔS_j‖ + diam X / 2 · Σ |Δp_j|) / (1 - s_max(b))`.
    pub rho1_bound: f64,
}

/// Perturbation norms over letters `1..=N` plus certified tails (zero for finite models).
pub fn perturbation_norms(a: &IfsModel, b: &IfsModel, n: usize) -> Result<PerturbationNorms> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    if a.ambient() != b.ambient() {
        return Err(Error::IncomparableModels("ambient boxes differ".into()));
    }
    let letters = match (a.family(), b.family()) {
        (Family::ExplicitFinite(_), Family::ExplicitFinite(_)) => {
            if a.size() != b.size() {
                return Err(Error::IncomparableModels(format!("sizes {:?} and {:?}", a.size(), b.size())));
            }
            a.size().expect("finite")
        }
        (Family::Geometric(_), Family::Geometric(_)) => n,
        _ => return Err(Error::IncomparableModels("finite and geometric families".into())),
    };
    let dom = a.ambient();
    let (mut dp, mut dm, mut wdm) = (0.0, 0.0, 0.0);
    for j in 1..=letters {
        let (pa, pb) = (a.prob(j)?, b.prob(j)?);
        let d = a.map(j)?.sup_distance(&b.map(j)?, dom);
        dp += (pa - pb).abs();
        dm += d;
        wdm += pa * d;
    }
    let tails = match (a.family(), b.family()) {
        (Family::Geometric(ga), Family::Geometric(gb)) => {
            // |ΔS_j| <= s_{a,j} + s_{b,j} + β_a b_a^{j-1} + β_b b_b^{j-1} on [0, 1]
            let map_tail = |g: &crate::ifs::GeometricFamily| {
                let b = g.b();
                let n = letters as i32;
                (g.c() * b.powi(n + 1) + (1.0 - g.left(1)) * b.powi(n)) / (1.0 - b)
            };
            let pt = a.tail_mass(letters) + b.tail_mass(letters);
            (pt, map_tail(ga) + map_tail(gb), a.tail_mass(letters) * a.diameter())
        }
        _ => (0.0, 0.0, 0.0),
    };
    let prob_diff = TailedSum { value: dp, tail_bound: tails.0 };
    let map_diff = TailedSum { value: dm, tail_bound: tails.1 };
    let weighted_map_diff = TailedSum { value: wdm, tail_bound: tails.2 };
    let rho1_bound =
        (weighted_map_diff.upper() + 0.5 * a.diameter() * prob_diff.upper()) / (1.0 - b.sup_ratio());
    Ok(PerturbationNorms { prob_diff, map_diff, weighted_map_diff, rho1_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{Discrete, Shifted, Uniform};
    use crate::ifs::presets::{cantor, dyadic_lebesgue};
    use crate::ifs::{make_finite_ifs, make_geometric_family, Interval, SimilarityMap};

    #[test]
    fn uniform_against_point_mass() {
        let leb = SelfSimilarMeasure::new(dyadic_lebesgue());
        let half = Discrete::point(0.5);
        let d = rho1(&leb, &half, 1e-8).unwrap();
        assert!((d.value - 0.25).abs() <= 1e-8 && d.tol <= 1e-8, "{d:?}");
        let u = Uniform(Interval::unit());
        let d = rho1(&u, &half, 1e-10).unwrap();
        assert!((d.value - 0.25).abs() <= 1e-10);
    }

    #[test]
    fn identity_and_translation() {
        let c = SelfSimilarMeasure::new(cantor());
        assert!(rho1(&c, &c, 1e-9).unwrap().value <= 1e-9);
        let moved = Shifted { inner: &c, shift: 0.1 };
        let d = rho1(&c, &moved, 1e-8).unwrap();
        assert!((d.value - 0.1).abs() <= 1e-8, "{d:?}");
        // the root amplifies: certifying ρ_2 <= t needs the cost to within t^2
        assert!(rho_r(&c, &c, 2.0, 1e-6).unwrap().value <= 1e-6);
    }

    #[test]
    fn lattices_against_lebesgue() {
        let u = Uniform(Interval::unit());
        for m in [4usize, 8, 16] {
            let mid = rho1(&Discrete::midpoint_lattice(m), &u, 1e-11).unwrap();
            assert!((mid.value - 1.0 / (4.0 * m as f64)).abs() <= 1e-10);
            let right = rho1(&Discrete::right_lattice(m), &u, 1e-11).unwrap();
            assert!((right.value - 1.0 / (2.0 * m as f64)).abs() <= 1e-10);
        }
    }

    #[test]
    fn point_masses_for_every_r() {
        let (a, b) = (Discrete::point(0.2), Discrete::point(0.9));
        for r in [1.0, 1.5, 2.0, 3.0] {
            let d = rho_r(&a, &b, r, 1e-10).unwrap();
            assert!((d.value - 0.7).abs() <= 1e-10);
        }
        assert_eq!(rho_r(&a, &b, 0.5, 1e-6).unwrap_err(), Error::UnsupportedR(0.5));
        let c = coupling_cost(&a, &b, 0.5, 1e-8).unwrap();
        assert!(!c.optimal && (c.value - 0.7).abs() < 1e-8);
    }

    #[test]
    fn coupling_agrees_with_cdf_formula() {
        let c = SelfSimilarMeasure::new(cantor());
        let g = SelfSimilarMeasure::new(make_geometric_family(0.5, 1.0 / 3.0, 1.0).unwrap());
        let g5 = SelfSimilarMeasure::new(g.model().truncate(5).unwrap());
        for (x, y) in [(&c, &g), (&g5, &g)] {
            let d1 = rho1(x, y, 1e-9).unwrap();
            let dq = rho_r(x, y, 1.0, 1e-9).unwrap();
            assert!((d1.value - dq.value).abs() <= 2e-9, "{d1:?} {dq:?}");
        }
        let leb = SelfSimilarMeasure::new(dyadic_lebesgue());
        // W2(Leb, δ_{1/2}) = sqrt(1/12)
        let d = rho_r(&leb, &Discrete::point(0.5), 2.0, 1e-8).unwrap();
        assert!((d.value - (1.0f64 / 12.0).sqrt()).abs() <= 1e-8);
    }

    #[test]
    fn continuity_examples() {
        let g = make_geometric_family(0.5, 1.0 / 3.0, 1.0).unwrap();
        let rep = continuity_gap(&g, 20, 16, 1e-7, 0).unwrap();
        assert!(rep.holds && rep.rhs <= rep.rhs_bound, "{rep:?}");
        let one = continuity_gap(&g, 6, 1, 1e-7, 0).unwrap();
        assert!(one.holds);
        assert!(continuity_gap(&cantor(), 4, 2, 1e-6, 0).is_err());
    }

    #[test]
    fn perturbation_examples() {
        let c = cantor();
        let z = perturbation_norms(&c, &c, 0).unwrap();
        assert_eq!((z.prob_diff.value, z.map_diff.value), (0.0, 0.0));
        let eps = 0.01;
        let shifted = make_finite_ifs(
            vec![SimilarityMap::line(1.0 / 3.0, 1.0, eps).unwrap(), SimilarityMap::line(1.0 / 3.0, 1.0, 2.0 / 3.0 - eps).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap();
        let s = perturbation_norms(&c, &shifted, 0).unwrap();
        assert!((s.map_diff.value - 2.0 * eps).abs() < 1e-15);
        let delta = 0.05;
        let reweighted = make_finite_ifs(c_maps(), vec![0.5 + delta, 0.5 - delta]).unwrap();
        let w = perturbation_norms(&c, &reweighted, 0).unwrap();
        assert!((w.prob_diff.value - 2.0 * delta).abs() < 1e-15);
        let d = rho1(&SelfSimilarMeasure::new(c.clone()), &SelfSimilarMeasure::new(reweighted), 1e-9).unwrap();
        assert!(d.upper() <= w.rho1_bound);
        let g = make_geometric_family(0.5, 1.0 / 3.0, 1.0).unwrap();
        assert!(matches!(perturbation_norms(&c, &g, 5), Err(Error::IncomparableModels(_))));
    }

    fn c_maps() -> Vec<SimilarityMap> {
        vec![SimilarityMap::line(1.0 / 3.0, 1.0, 0.0).unwrap(), SimilarityMap::line(1.0 / 3.0, 1.0, 2.0 / 3.0).unwrap()]
    }

    #[test]
    fn geometric_perturbation_bounds_the_distance() {
        let a = make_geometric_family(0.5, 1.0 / 3.0, 1.0).unwrap();
        let b = make_geometric_family(0.55, 1.0 / 3.0, 1.0).unwrap();
        let p = perturbation_norms(&a, &b, 40).unwrap();
        let d = rho1(&SelfSimilarMeasure::new(a), &SelfSimilarMeasure::new(b), 1e-9).unwrap();
        assert!(d.upper() <= p.rho1_bound, "{d:?} {p:?}");
        assert!(p.prob_diff.tail_bound < 1e-10);
    }
}
