//! Geometric-mean and `L_r` quantization errors of codebooks, codebook construction,
//! and a Lloyd-type descent for the log cost.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::antichain::{antichain_at_most, antichain_for_n, codebook_from_antichain, Codebook, Provenance};
use crate::dist::{Discrete, Distribution1d};
use crate::error::{Error, Result};
use crate::ifs::{Family, IfsModel};
use crate::measure::SelfSimilarMeasure;
use crate::quadrature::{integrate, leaves, Cylinder, LineSystem, LogDistance, PowerDistance, SortedPoints};

/// Refinement budget of one exact evaluation.
pub const DEFAULT_MAX_REFINEMENTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Sample mean with a normal-approximation confidence interval.
    Mc { samples: usize, seed: u64, ci_level: f64 },
    /// Certified cylinder quadrature; the true value lies in the bracket.
    Exact { tol: f64 },
    /// Closed-form value.
    Closed,
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::Mc { samples, ci_level, .. } => format!("mc(n={samples},level={ci_level})"),
            Method::Exact { tol } => format!("exact(tol={tol:e})"),
            Method::Closed => "closed".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBracket {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    pub n_points: usize,
    /// `false` when an exact evaluation ran out of budget before reaching its tolerance.
    pub converged: bool,
}

impl ErrorBracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// `exp` of both ends: a bracket for `e_n` instead of `ê_n`.
    pub fn exp(&self) -> (f64, f64) {
        (self.lower.exp(), self.upper.exp())
    }

    /// Turns an unconverged exact bracket into [`Error::ToleranceUnreachable`].
    pub fn require_converged(self) -> Result<Self> {
        match (self.converged, self.method) {
            (false, Method::Exact { tol }) => {
                Err(Error::ToleranceUnreachable { tol, iterations: DEFAULT_MAX_REFINEMENTS, width: self.width() })
            }
            _ => Ok(self),
        }
    }
}

fn z_value(ci_level: f64) -> Result<f64> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::BadParameter(format!("confidence level {ci_level} must lie in (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + 0.5 * ci_level))
}

fn nearest(points: &[Vec<f64>], x: &[f64]) -> f64 {
    points
        .iter()
        .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Per-sample distances to the codebook, in sample order.
fn sample_distances(mu: &SelfSimilarMeasure, codebook: &Codebook, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if samples < 1000 {
        return Err(Error::BadParameter(format!("{samples} samples; at least 1000 are required")));
    }
    if codebook.dim() != mu.model().dim() {
        return Err(Error::DimMismatch(codebook.dim(), mu.model().dim()));
    }
    let batch = mu.sample(samples, seed);
    Ok(if codebook.dim() == 1 {
        let sorted = SortedPoints::new(&codebook.scalars());
        batch.points.par_iter().map(|p| sorted.dist(p[0])).collect()
    } else {
        batch.points.par_iter().map(|p| nearest(codebook.points(), p)).collect()
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate of `∫ log d(x, codebook) dμ` with a normal-approximation interval.
pub fn gme_mc(
    mu: &SelfSimilarMeasure,
    codebook: &Codebook,
    samples: usize,
    seed: u64,
    ci_level: f64,
) -> Result<ErrorBracket> {
    let z = z_value(ci_level)?;
    let dists = sample_distances(mu, codebook, samples, seed)?;
    if let Some(index) = dists.iter().position(|d| *d == 0.0) {
        return Err(Error::DegenerateSample { index });
    }
    let logs: Vec<f64> = dists.iter().map(|d| d.ln()).collect();
    let (mean, se) = mean_and_se(&logs);
    Ok(ErrorBracket {
        lower: mean - z * se,
        upper: mean + z * se,
        method: Method::Mc { samples, seed, ci_level },
        n_points: codebook.len(),
        converged: true,
    })
}

fn scalar_codebook(mu: &SelfSimilarMeasure, codebook: &Codebook) -> Result<SortedPoints> {
    if mu.model().dim() != 1 {
        return Err(Error::UnsupportedDim(mu.model().dim()));
    }
    if codebook.dim() != 1 {
        return Err(Error::DimMismatch(codebook.dim(), 1));
    }
    Ok(SortedPoints::new(&codebook.scalars()))
}

/// Certified bracket for `∫ log d(x, codebook) dμ` of width at most `tol`.
///
/// On budget exhaustion the best bracket is returned with `converged = false`.
pub fn gme_exact(mu: &SelfSimilarMeasure, codebook: &Codebook, tol: f64) -> Result<ErrorBracket> {
    gme_exact_with(mu, codebook, tol, DEFAULT_MAX_REFINEMENTS)
}

pub fn gme_exact_with(
    mu: &SelfSimilarMeasure,
    codebook: &Codebook,
    tol: f64,
    max_refinements: usize,
) -> Result<ErrorBracket> {
    let points = scalar_codebook(mu, codebook)?;
    let sys = LineSystem::from_model(mu.model())?;
    gme_exact_points(&sys, &points, tol, max_refinements)
}

pub(crate) fn gme_exact_points(
    sys: &LineSystem,
    points: &SortedPoints,
    tol: f64,
    max_refinements: usize,
) -> Result<ErrorBracket> {
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance {tol} must be positive")));
    }
    if points.as_slice().is_empty() {
        return Err(Error::EmptyCodebook);
    }
    if sys.hull().len() == 0.0 {
        let d = points.dist(sys.hull().lo);
        if d == 0.0 {
            return Err(Error::DegenerateSample { index: 0 });
        }
        let v = d.ln();
        return Ok(ErrorBracket {
            lower: v,
            upper: v,
            method: Method::Exact { tol },
            n_points: points.as_slice().len(),
            converged: true,
        });
    }
    let e = integrate(sys, &LogDistance(points), |l, u| u - l <= tol, max_refinements);
    Ok(ErrorBracket {
        lower: e.lower,
        upper: e.upper,
        method: Method::Exact { tol },
        n_points: points.as_slice().len(),
        converged: e.converged,
    })
}

/// `(∫ d(x, codebook)^r dμ)^{1/r}`, by Monte-Carlo or certified quadrature.
pub fn lr_error(mu: &SelfSimilarMeasure, codebook: &Codebook, r: f64, method: Method) -> Result<ErrorBracket> {
    if !(r > 0.0) {
        return Err(Error::UnsupportedR(r));
    }
    let inv = 1.0 / r;
    match method {
        Method::Mc { samples, seed, ci_level } => {
            let z = z_value(ci_level)?;
            let dists = sample_distances(mu, codebook, samples, seed)?;
            let pow: Vec<f64> = dists.iter().map(|d| d.powf(r)).collect();
            let (mean, se) = mean_and_se(&pow);
            Ok(ErrorBracket {
                lower: (mean - z * se).max(0.0).powf(inv),
                upper: (mean + z * se).powf(inv),
                method,
                n_points: codebook.len(),
                converged: true,
            })
        }
        Method::Exact { tol } => {
            if !(tol > 0.0) {
                return Err(Error::BadParameter(format!("tolerance {tol} must be positive")));
            }
            let points = scalar_codebook(mu, codebook)?;
            let sys = LineSystem::from_model(mu.model())?;
            let f = PowerDistance { points: &points, r };
            let e = integrate(
                &sys,
                &f,
                |l, u| u.powf(inv) - l.max(0.0).powf(inv) <= tol,
                DEFAULT_MAX_REFINEMENTS,
            );
            Ok(ErrorBracket {
                lower: e.lower.max(0.0).powf(inv),
                upper: e.upper.powf(inv),
                method,
                n_points: codebook.len(),
                converged: e.converged,
            })
        }
        Method::Closed => Err(Error::BadParameter("no closed form for a general codebook".into())),
    }
}

/// `∫ log d(x, codebook) dν` for a discrete `ν`; `-inf` when an atom is a codepoint.
pub fn gme_discrete(nu: &Discrete, codebook: &Codebook) -> Result<f64> {
    if codebook.dim() != 1 {
        return Err(Error::DimMismatch(codebook.dim(), 1));
    }
    let points = SortedPoints::new(&codebook.scalars());
    Ok(nu.atoms().iter().zip(nu.weights()).map(|(x, w)| w * points.dist(*x).ln()).sum())
}

/// Point whose images under cylinder maps become codepoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Center of the ambient box.
    Center,
    /// Midpoint of the widest first-level gap inside the attractor hull (1-D).
    WidestGap,
    /// Best single codepoint for the log cost, found by the Lloyd descent (1-D).
    Optimal,
    Point(Vec<f64>),
}

impl Anchor {
    pub fn resolve(&self, mu: &SelfSimilarMeasure) -> Result<Vec<f64>> {
        let model = mu.model();
        match self {
            Anchor::Center => Ok(model.center()),
            Anchor::Point(p) => Ok(p.clone()),
            Anchor::WidestGap => widest_gap(model),
            Anchor::Optimal => {
                let fit = lloyd_log(mu, 1, 30, 0)?;
                Ok(fit.codebook.points()[0].clone())
            }
        }
    }
}

fn widest_gap(model: &IfsModel) -> Result<Vec<f64>> {
    let sys = LineSystem::from_model(model)?;
    let hull = sys.hull();
    let mut images: Vec<(f64, f64)> = sys.children(&sys.root()).map(|c| sys.interval(&c)).collect();
    images.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best = images
        .windows(2)
        .map(|w| (w[1].0 - w[0].1, 0.5 * (w[0].1 + w[1].0)))
        .filter(|(g, _)| *g > 0.0)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    Ok(vec![best.map_or(hull.mid(), |(_, m)| m)])
}

/// How an `n`-point codebook is built.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Mass-threshold antichain at `eps_n = 1/(n p_min)`; requires `n > 1/p_min^2`.
    Antichain { anchor: Anchor },
    /// Largest mass-threshold antichain with at most `n` words.
    AntichainFit { anchor: Anchor },
    /// Lloyd descent from quantile-spread points.
    Lloyd { iters: usize },
    /// Fitted antichain codebook followed by Lloyd descent.
    AntichainPolish { anchor: Anchor, iters: usize },
    /// Midpoints of `n` equal cells of the attractor hull (1-D).
    Grid,
}

impl Strategy {
    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Antichain { .. } => "antichain",
            Strategy::AntichainFit { .. } => "antichain-fit",
            Strategy::Lloyd { .. } => "lloyd",
            Strategy::AntichainPolish { .. } => "antichain+lloyd",
            Strategy::Grid => "grid",
        }
    }
}

/// Mass an infinite family may drop when its antichains are built over a truncated alphabet.
pub const TRUNCATION_TAIL: f64 = 1e-3;

/// Alphabet size used to build antichains: the whole alphabet for finite families, else
/// the smallest `N` whose tail mass is at most [`TRUNCATION_TAIL`]. The level does not
/// depend on `n`, so a curve is built over a single truncated system.
pub fn truncation_for(model: &IfsModel) -> usize {
    match model.size() {
        Some(k) => k,
        None => (2..=4096).find(|&k| model.tail_mass(k) <= TRUNCATION_TAIL).unwrap_or(4096),
    }
}

/// Build an `n`-point (at most) codebook with the given strategy.
pub fn build_codebook(mu: &SelfSimilarMeasure, n: usize, strategy: &Strategy, tol: f64) -> Result<Codebook> {
    if n == 0 {
        return Err(Error::BadParameter("n must be positive".into()));
    }
    let model = mu.model();
    match strategy {
        Strategy::Antichain { anchor } => {
            let (_, ac) = antichain_for_n(model, n)?;
            codebook_from_antichain(model, &ac, &anchor.resolve(mu)?)
        }
        Strategy::AntichainFit { anchor } => fitted_antichain_codebook(mu, n, anchor),
        Strategy::Lloyd { iters } => Ok(lloyd_log_with(mu, n, &LloydOptions { iters: *iters, tol, ..Default::default() })?.codebook),
        Strategy::AntichainPolish { anchor, iters } => {
            let start = fitted_antichain_codebook(mu, n, anchor)?;
            let opts = LloydOptions { iters: *iters, tol, ..Default::default() };
            Ok(lloyd_polish(mu, &start.scalars(), &opts)?.codebook)
        }
        Strategy::Grid => {
            let hull = LineSystem::from_model(model)?.hull();
            let h = hull.len() / n as f64;
            let pts = (0..n).map(|i| vec![hull.lo + (i as f64 + 0.5) * h]).collect();
            Codebook::new(pts, Provenance::Grid)
        }
    }
}

fn fitted_antichain_codebook(mu: &SelfSimilarMeasure, n: usize, anchor: &Anchor) -> Result<Codebook> {
    let model = mu.model();
    let k = truncation_for(model);
    let probs = model.truncate(k)?.probs_prefix(k);
    let (_, ac) = antichain_at_most(&probs, n)?;
    codebook_from_antichain(model, &ac, &anchor.resolve(mu)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveEntry {
    pub n: usize,
    pub bracket: ErrorBracket,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub entries: Vec<CurveEntry>,
    pub measure_id: String,
    pub method: String,
}

impl ErrorCurve {
    pub fn ns(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.n).collect()
    }

    /// CSV with header `n,log_n,e_hat_lower,e_hat_upper,method`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,log_n,e_hat_lower,e_hat_upper,method")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.n,
                (e.n as f64).ln(),
                e.bracket.lower,
                e.bracket.upper,
                e.bracket.method.tag()
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }
}

/// Short identifier of a model for reports.
pub fn measure_id(model: &IfsModel) -> String {
    match model.family() {
        Family::ExplicitFinite(f) => {
            let r: Vec<String> = f.maps().iter().map(|m| format!("{:.6}", m.ratio())).collect();
            let p: Vec<String> = f.probs().iter().map(|p| format!("{p:.6}")).collect();
            format!("finite(s=[{}],p=[{}])", r.join(","), p.join(","))
        }
        Family::Geometric(g) => {
            let head = if g.head().is_empty() { String::new() } else { format!(",head={:?}", g.head()) };
            format!("geometric(a={},b={},c={}{head})", g.a(), g.b(), g.c())
        }
    }
}

/// `ê_n` brackets over `n_list` (evaluated concurrently).
pub fn error_curve(
    mu: &SelfSimilarMeasure,
    n_list: &[usize],
    strategy: &Strategy,
    eval: Method,
) -> Result<ErrorCurve> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadParameter("n_list must be strictly increasing".into()));
    }
    let tol = match eval {
        Method::Exact { tol } => tol,
        _ => 1e-4,
    };
    let entries = n_list
        .par_iter()
        .map(|&n| {
            let cb = build_codebook(mu, n, strategy, tol)?;
            let bracket = match eval {
                Method::Exact { tol } => gme_exact(mu, &cb, tol)?,
                Method::Mc { samples, seed, ci_level } => gme_mc(mu, &cb, samples, seed, ci_level)?,
                Method::Closed => return Err(Error::BadParameter("closed-form curves are not available".into())),
            };
            Ok(CurveEntry { n, bracket })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurve {
        entries,
        measure_id: measure_id(mu.model()),
        method: format!("{}/{}", strategy.tag(), eval.tag()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydOptions {
    pub iters: usize,
    /// Width of the certified bracket used to accept a step.
    pub tol: f64,
    /// Coarse grid size of the per-cell search.
    pub grid: usize,
    /// Stop once the certified upper bound improves by less than this.
    pub min_improvement: f64,
}

impl Default for LloydOptions {
    fn default() -> Self {
        LloydOptions { iters: 20, tol: 1e-6, grid: 64, min_improvement: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydResult {
    pub codebook: Codebook,
    /// Certified bracket of the accepted codebook after each accepted step (first entry: start).
    pub history: Vec<ErrorBracket>,
    /// Codepoints moved because their cell carried no mass.
    pub reseeded: usize,
    pub iterations: usize,
}

/// Lloyd descent for the log cost from the points `quantile((i - 1/2)/n)`.
pub fn lloyd_log(mu: &SelfSimilarMeasure, n: usize, iters: usize, _seed: u64) -> Result<LloydResult> {
    lloyd_log_with(mu, n, &LloydOptions { iters, ..Default::default() })
}

pub fn lloyd_log_with(mu: &SelfSimilarMeasure, n: usize, opts: &LloydOptions) -> Result<LloydResult> {
    if n == 0 {
        return Err(Error::BadParameter("n must be positive".into()));
    }
    if mu.model().dim() != 1 {
        return Err(Error::UnsupportedDim(mu.model().dim()));
    }
    let qtol = 1e-12;
    let init = (0..n)
        .map(|i| mu.quantile((i as f64 + 0.5) / n as f64, qtol))
        .collect::<Result<Vec<_>>>()?;
    lloyd_polish(mu, &init, opts)
}

/// Per-leaf contribution to `a -> ∫ log|x - a| dμ` within one cell.
fn leaf_cost(p: f64, l: f64, h: f64, m: f64, a: f64) -> f64 {
    if a < l || a > h {
        p * (m - a).abs().ln()
    } else {
        let reach = (a - l).max(h - a);
        if reach > 0.0 {
            p * (reach.ln() - 1.0)
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `∫_cylinder log|x - a| dμ`, refining cylinders that are close to `a` relative to their length.
fn point_cost(sys: &LineSystem, c: &Cylinder, a: f64, floor_len: f64) -> f64 {
    let (l, h) = sys.interval(c);
    let len = h - l;
    let d = if a < l { l - a } else if a > h { a - h } else { 0.0 };
    if d >= 4.0 * len || len <= floor_len || !sys.resolvable(c) {
        return leaf_cost(c.p, l, h, sys.cylinder_mean(c), a);
    }
    sys.children(c).map(|ch| point_cost(sys, &ch, a, floor_len)).sum()
}

fn minimize_cell(sys: &LineSystem, cell: &[Cylinder], lo: f64, hi: f64, current: f64, grid: usize) -> f64 {
    let floor_len = 1e-5 * (hi - lo);
    let cost = |a: f64| cell.iter().map(|c| point_cost(sys, c, a, floor_len)).sum::<f64>();
    let width = hi - lo;
    if !(width > 0.0) {
        return lo;
    }
    let step = width / grid as f64;
    let mut best = (cost(current.clamp(lo, hi)), current.clamp(lo, hi));
    let mut best_k = None;
    for k in 0..grid {
        let a = lo + (k as f64 + 0.5) * step;
        let v = cost(a);
        if v < best.0 {
            best = (v, a);
            best_k = Some(k);
        }
    }
    let (mut x0, mut x3) = match best_k {
        Some(k) => ((lo + (k as f64 - 0.5) * step).max(lo), (lo + (k as f64 + 1.5) * step).min(hi)),
        None => ((best.1 - step).max(lo), (best.1 + step).min(hi)),
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..80 {
        if x3 - x0 <= 1e-13 * width {
            break;
        }
        if f1 <= f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = cost(x1);
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = cost(x2);
        }
    }
    let (v, a) = if f1 <= f2 { (f1, x1) } else { (f2, x2) };
    if v < best.0 {
        a
    } else {
        best.1
    }
}

/// Lloyd descent for the log cost from the given points.
///
/// Each step splits the line at Voronoi midpoints and re-optimizes every codepoint within
/// its cell (coarse grid, then golden section) against a fine cylinder discretization.
/// A step is kept only if the certified upper bound of `ê` does not increase.
pub fn lloyd_polish(mu: &SelfSimilarMeasure, start: &[f64], opts: &LloydOptions) -> Result<LloydResult> {
    if start.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    let sys = LineSystem::from_model(mu.model())?;
    let hull = sys.hull();
    let mut current = SortedPoints::new(start);
    let mut bracket = gme_exact_points(&sys, &current, opts.tol, DEFAULT_MAX_REFINEMENTS)?;
    let mut history = vec![bracket];
    let mut reseeded = 0;
    let mut iterations = 0;
    for _ in 0..opts.iters {
        let pts = current.as_slice().to_vec();
        let n = pts.len();
        let bounds: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let cell_of = |x: f64| bounds.partition_point(|b| *b < x);
        let cell_lo = |i: usize| if i == 0 { hull.lo } else { bounds[i - 1].max(hull.lo) };
        let cell_hi = |i: usize| if i + 1 == n { hull.hi } else { bounds[i].min(hull.hi) };
        let res = |m: f64| {
            let i = cell_of(m);
            ((cell_hi(i) - cell_lo(i)) / opts.grid as f64).max(1e-14 * hull.len())
        };
        let leaf_set = leaves(&sys, res, 1e-15 / n as f64);
        let mut cells: Vec<Vec<Cylinder>> = vec![Vec::new(); n];
        for (c, _, _, m) in leaf_set {
            cells[cell_of(m)].push(c);
        }
        let mass = |cell: &[Cylinder]| cell.iter().map(|c| c.p).sum::<f64>();
        let mut next: Vec<Option<f64>> = cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                if mass(cell) <= 0.0 {
                    return None;
                }
                let span = cell.iter().map(|c| sys.interval(c));
                let (lo, hi) = span.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (l, h)| (lo.min(l), hi.max(h)));
                let (lo, hi) = (lo.max(cell_lo(i)), hi.min(cell_hi(i)));
                Some(minimize_cell(&sys, cell, lo.min(hi), hi.max(lo), pts[i], opts.grid))
            })
            .collect();
        // each empty cell's point moves to the mass median of a distinct heavy cell
        let empty: Vec<usize> = (0..n).filter(|&i| next[i].is_none()).collect();
        let mut by_mass: Vec<usize> = (0..n).filter(|&i| next[i].is_some()).collect();
        by_mass.sort_by(|&a, &b| mass(&cells[b]).total_cmp(&mass(&cells[a])));
        for (i, &host) in empty.iter().zip(by_mass.iter().cycle()) {
            let total = mass(&cells[host]);
            let mut acc = 0.0;
            let median = cells[host]
                .iter()
                .find(|c| {
                    acc += c.p;
                    acc >= 0.5 * total
                })
                .map_or(hull.mid(), |c| sys.cylinder_mean(c));
            next[*i] = Some(median);
            reseeded += 1;
        }
        let candidate = SortedPoints::new(&next.into_iter().map(|x| x.expect("filled")).collect::<Vec<_>>());
        let cand = gme_exact_points(&sys, &candidate, opts.tol, DEFAULT_MAX_REFINEMENTS)?;
        iterations += 1;
        if cand.upper > bracket.upper {
            break;
        }
        let gain = bracket.upper - cand.upper;
        current = candidate;
        bracket = cand;
        history.push(bracket);
        if gain < opts.min_improvement {
            break;
        }
    }
    let codebook = Codebook::new(
        current.as_slice().iter().map(|x| vec![*x]).collect(),
        Provenance::Lloyd { iterations },
    )?;
    Ok(LloydResult { codebook, history, reseeded, iterations })
}
