//! Analytic dimension from the entropy/Lyapunov series, the truncation sequence
//! `t_N`, regression-based estimation of the quantization dimension, and the
//! stability and discontinuity experiments.

use rayon::prelude::*;
use serde::Serialize;

use crate::antichain::{antichain_for_n, codebook_from_antichain, word_value};
use crate::dist::{Discrete, Uniform};
use crate::error::{Error, Result};
use crate::ifs::presets::dyadic_lebesgue;
use crate::ifs::{Family, IfsModel, Interval, SeriesValue};
use crate::measure::SelfSimilarMeasure;
use crate::metrics::{perturbation_norms, rho1};
use crate::quantizer::{error_curve, gme_discrete, gme_exact, ErrorBracket, ErrorCurve, Method, Strategy};
use crate::Codebook;

/// `D = Σ p_j log p_j / Σ p_j log s_j` with a certified bound on `|value - D|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticDimension {
    pub value: f64,
    pub error: f64,
    pub entropy: SeriesValue,
    pub lyapunov: SeriesValue,
}

impl AnalyticDimension {
    pub fn lower(&self) -> f64 {
        self.value - self.error
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error
    }
}

/// Ratio of the entropy and Lyapunov series, with the series tails propagated as intervals.
pub fn analytic_dimension(ifs: &IfsModel, tol: f64) -> AnalyticDimension {
    let entropy = ifs.entropy_series(tol);
    let lyapunov = ifs.lyapunov_series(tol);
    // both series are negative; work with magnitudes
    let (h, eh) = (-entropy.value, entropy.tail_bound);
    let (l, el) = (-lyapunov.value, lyapunov.tail_bound);
    if h <= 0.0 {
        // a single map carries no entropy
        return AnalyticDimension { value: 0.0, error: eh / (l - el).max(f64::MIN_POSITIVE), entropy, lyapunov };
    }
    let value = h / l;
    let hi = (h + eh) / (l - el);
    let lo = (h - eh) / (l + el);
    let terms = entropy.terms_used.max(lyapunov.terms_used).max(1) as f64;
    let rounding = 4.0 * f64::EPSILON * (terms + 2.0) * value;
    let error = (hi - value).max(value - lo) + rounding;
    AnalyticDimension { value, error, entropy, lyapunov }
}

/// `t_N`: the dimension of the first `N` maps with renormalized weights. For a finite
/// model, `N` is capped at its size (where `t_N = D`).
pub fn t_sequence(ifs: &IfsModel, ns: &[usize]) -> Result<Vec<(usize, f64)>> {
    ns.par_iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::BadParameter("truncation length must be positive".into()));
            }
            let n = ifs.size().map_or(n, |s| s.min(n));
            Ok((n, analytic_dimension(&ifs.truncate(n)?, 1e-15).value))
        })
        .collect()
}

/// Range of `n` (inclusive) used by the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub n_min: usize,
    pub n_max: usize,
}

impl Window {
    /// The upper half of a grid: small-`n` transients are left out.
    pub fn top_half(ns: &[usize]) -> Option<Window> {
        let last = *ns.last()?;
        Some(Window { n_min: ns[ns.len() / 2], n_max: last })
    }

    pub fn all(ns: &[usize]) -> Option<Window> {
        Some(Window { n_min: *ns.first()?, n_max: *ns.last()? })
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }
}

/// Trend of `log n + t ê_n` over the window: positive tau for `t` below the dimension,
/// negative above it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendDiagnostic {
    pub t: f64,
    pub values: Vec<f64>,
    pub kendall_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    /// `D̂`, the reciprocal of the regression slope.
    pub d_hat: f64,
    /// Slope of `-ê_n` against `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub window: Window,
    pub points: usize,
    /// Largest absolute regression residual.
    pub residual: f64,
    pub diagnostics: Vec<TrendDiagnostic>,
}

/// Relative offset of the diagnostic exponents `D̂ (1 ± δ)`.
pub const DIAGNOSTIC_OFFSET: f64 = 0.1;

/// Fit `-ê_n ≈ log n / D + c` on the window. `log n` is taken from the size of the
/// codebook actually evaluated, which may be below the requested `n`.
pub fn estimate_dimension(curve: &ErrorCurve, window: Option<Window>) -> Result<DimensionEstimate> {
    let ns = curve.ns();
    let window = match window {
        Some(w) => w,
        None => Window::top_half(&ns).ok_or_else(|| Error::IllConditioned("empty curve".into()))?,
    };
    let used: Vec<&ErrorBracket> =
        curve.entries.iter().filter(|e| window.contains(e.n)).map(|e| &e.bracket).collect();
    if used.len() < 4 {
        return Err(Error::IllConditioned(format!("{} entries in the window, need at least 4", used.len())));
    }
    if let Some(b) = used.iter().find(|b| !(b.lower.is_finite() && b.upper.is_finite())) {
        return Err(Error::IllConditioned(format!("non-finite bracket {b:?}")));
    }
    let (first, last) = (used[0], used[used.len() - 1]);
    if first.lower <= last.upper && last.lower <= first.upper {
        return Err(Error::IllConditioned("brackets at the ends of the window overlap".into()));
    }
    let xs: Vec<f64> = used.iter().map(|b| (b.n_points as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|b| -b.mid()).collect();
    let (slope, intercept) = least_squares(&xs, &ys)?;
    if !(slope > 0.0) {
        return Err(Error::IllConditioned(format!("non-positive slope {slope}")));
    }
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).abs()).fold(0.0, f64::max);
    let d_hat = 1.0 / slope;
    let diagnostics = [1.0 - DIAGNOSTIC_OFFSET, 1.0 + DIAGNOSTIC_OFFSET]
        .iter()
        .map(|f| {
            let t = d_hat * f;
            let values: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x - t * y).collect();
            TrendDiagnostic { t, kendall_tau: kendall_tau(&values), values }
        })
        .collect();
    Ok(DimensionEstimate { d_hat, slope, intercept, window, points: used.len(), residual, diagnostics })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 1e-12) {
        return Err(Error::IllConditioned("window spans a single codebook size".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Kendall's tau of a sequence against its index.
pub fn kendall_tau(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += match values[j].partial_cmp(&values[i]) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Less) => -1.0,
                _ => 0.0,
            };
        }
    }
    s / (n * (n - 1) / 2) as f64
}

/// A family of models approaching a base model, ordered by decreasing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub name: String,
    pub entries: Vec<(f64, IfsModel)>,
}

impl Schedule {
    /// `θ = 0.1 · 2^{-i}`, `i = 0..8`.
    pub fn default_thetas() -> Vec<f64> {
        (0..=8).map(|i| 0.1 * 0.5f64.powi(i)).collect()
    }

    /// Geometric weights `p_j(θ) = (1 - a - θ)(a + θ)^{j-1}` with the maps held fixed.
    pub fn geometric_weight(base: &IfsModel, thetas: &[f64]) -> Result<Schedule> {
        let Family::Geometric(g) = base.family() else {
            return Err(Error::BadParameter("the weight schedule perturbs a geometric family".into()));
        };
        if !g.head().is_empty() {
            return Err(Error::BadParameter("the weight schedule needs a family without head weights".into()));
        }
        let entries = thetas
            .iter()
            .map(|&t| Ok((t, IfsModel::geometric(g.a() + t, g.b(), g.c(), Vec::new())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule { name: "geometric-weight".into(), entries })
    }

    /// The first two weights set to `1/(k+2)` and the rest rescaled, for each `k`; the
    /// weights of the first letters are not bounded below along the schedule.
    pub fn equal_head(base: &IfsModel, ks: &[usize]) -> Result<Schedule> {
        let Family::Geometric(g) = base.family() else {
            return Err(Error::BadParameter("the equal-head schedule perturbs a geometric family".into()));
        };
        let entries = ks
            .iter()
            .map(|&k| {
                let q = 1.0 / (k as f64 + 2.0);
                Ok((1.0 / k.max(1) as f64, IfsModel::geometric(g.a(), g.b(), g.c(), vec![q, q])?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule { name: "equal-head".into(), entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityOptions {
    /// Truncation lengths at which the lower-bound hypotheses are validated.
    pub truncations: Vec<usize>,
    /// Floors are this fraction of the base model's smallest weight and ratio among the first `N`.
    pub floor_fraction: f64,
    /// Letters summed explicitly in the perturbation norms (the rest is a certified tail).
    pub norm_letters: usize,
    /// Also compute the certified `ρ_1` to this tolerance (1-D models only).
    pub rho1_tol: Option<f64>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { truncations: vec![2, 5, 10, 20, 40], floor_fraction: 0.5, norm_letters: 64, rho1_tol: None }
    }
}

/// Lower bounds over the schedule of the first `N` weights and ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub truncation: usize,
    pub prob_inf: f64,
    pub prob_floor: f64,
    pub ratio_inf: f64,
    pub ratio_floor: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub theta: f64,
    pub d_analytic: f64,
    pub d_error: f64,
    /// `|D(θ) - D(base)|`
    pub delta_d: f64,
    /// `Σ |p_j - p'_j|` (upper bound including the tail)
    pub prob_l1: f64,
    /// `Σ ‖S_j - S'_j‖_∞` (upper bound including the tail)
    pub map_sup_l1: f64,
    pub rho1_bound: f64,
    pub rho1: Option<f64>,
    /// Truncation lengths at which this entry falls below the floors.
    pub violations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub schedule: String,
    pub base_d: f64,
    pub rows: Vec<StabilityRow>,
    pub checks: Vec<HypothesisCheck>,
    pub hypothesis_violated: bool,
    /// `|D(θ) - D(base)|` strictly decreases along the schedule.
    pub monotone: bool,
    /// Largest `|ΔD| / (prob_l1 + map_sup_l1)` over the rows (empirical, not a universal constant).
    pub lipschitz_fit: Option<f64>,
    pub options: StabilityOptions,
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with header `theta,d_analytic,d_error,delta_d,prob_l1,map_sup_l1,rho1_bound,rho1,hypothesis`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "theta,d_analytic,d_error,delta_d,prob_l1,map_sup_l1,rho1_bound,rho1,hypothesis")?;
        for r in &self.rows {
            let rho = r.rho1.map(|v| v.to_string()).unwrap_or_default();
            let flag = if r.violations.is_empty() { "ok" } else { "violated" };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.theta, r.d_analytic, r.d_error, r.delta_d, r.prob_l1, r.map_sup_l1, r.rho1_bound, rho, flag
            )?;
        }
        Ok(())
    }
}

fn prefix_min(values: Vec<f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// Analytic dimension and perturbation norms along a schedule. Entries that break the
/// lower-bound hypotheses are kept and flagged.
pub fn stability_experiment(base: &IfsModel, schedule: &Schedule, opts: &StabilityOptions) -> Result<StabilityReport> {
    if !(opts.floor_fraction > 0.0 && opts.floor_fraction <= 1.0) {
        return Err(Error::BadParameter("floor_fraction must lie in (0, 1]".into()));
    }
    let base_d = analytic_dimension(base, 1e-15);
    let floors: Vec<(usize, f64, f64)> = opts
        .truncations
        .iter()
        .map(|&n| {
            let p = prefix_min(base.probs_prefix(n));
            let s = prefix_min(base.ratios_prefix(n));
            (n, opts.floor_fraction * p, opts.floor_fraction * s)
        })
        .collect();
    let base_mu = SelfSimilarMeasure::new(base.clone());
    let rows = schedule
        .entries
        .par_iter()
        .map(|(theta, model)| {
            let d = analytic_dimension(model, 1e-15);
            let norms = perturbation_norms(base, model, opts.norm_letters)?;
            let rho = match opts.rho1_tol {
                Some(tol) => Some(rho1(&base_mu, &SelfSimilarMeasure::new(model.clone()), tol)?.value),
                None => None,
            };
            let violations = floors
                .iter()
                .filter(|(n, pf, sf)| prefix_min(model.probs_prefix(*n)) < *pf || prefix_min(model.ratios_prefix(*n)) < *sf)
                .map(|(n, _, _)| *n)
                .collect();
            Ok(StabilityRow {
                theta: *theta,
                d_analytic: d.value,
                d_error: d.error,
                delta_d: (d.value - base_d.value).abs(),
                prob_l1: norms.prob_diff.upper(),
                map_sup_l1: norms.map_diff.upper(),
                rho1_bound: norms.rho1_bound,
                rho1: rho,
                violations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let checks: Vec<HypothesisCheck> = floors
        .iter()
        .map(|&(n, pf, sf)| {
            let models = std::iter::once(base).chain(schedule.entries.iter().map(|(_, m)| m));
            let (mut pi, mut si) = (f64::INFINITY, f64::INFINITY);
            for m in models {
                pi = pi.min(prefix_min(m.probs_prefix(n)));
                si = si.min(prefix_min(m.ratios_prefix(n)));
            }
            HypothesisCheck { truncation: n, prob_inf: pi, prob_floor: pf, ratio_inf: si, ratio_floor: sf, ok: pi >= pf && si >= sf }
        })
        .collect();
    let monotone = rows.windows(2).all(|w| w[1].delta_d < w[0].delta_d);
    let lipschitz_fit = rows
        .iter()
        .filter(|r| r.prob_l1 + r.map_sup_l1 > 0.0)
        .map(|r| r.delta_d / (r.prob_l1 + r.map_sup_l1))
        .reduce(f64::max);
    Ok(StabilityReport {
        schedule: schedule.name.clone(),
        base_d: base_d.value,
        hypothesis_violated: checks.iter().any(|c| !c.ok),
        rows,
        checks,
        monotone,
        lipschitz_fit,
        options: opts.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeRow {
    pub m: usize,
    /// Codebook size; the codebook is the support itself.
    pub n: usize,
    /// `ê_n` with the support as codebook; `None` stands for `-∞`.
    pub e_hat: Option<f64>,
    /// Dimension of the discrete measure: `ê_n = -∞` for every `n >= m`.
    pub d: f64,
    /// `ρ_1` to Lebesgue measure for atoms at `i/m`, `i = 1..m`.
    pub rho1_right: f64,
    /// `ρ_1` to Lebesgue measure for atoms at `(i - 1/2)/m`.
    pub rho1_midpoint: f64,
    pub rho1_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscontinuityReport {
    pub rows: Vec<LatticeRow>,
    /// Estimated dimension of Lebesgue measure from midpoint-grid codebooks.
    pub lebesgue: DimensionEstimate,
    pub lebesgue_curve: ErrorCurve,
}

impl DiscontinuityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Lattice measures converge to Lebesgue measure in `ρ_1` while their dimension stays 0.
pub fn discontinuity_demo(ms: &[usize], tol: f64) -> Result<DiscontinuityReport> {
    let leb = Uniform(Interval::unit());
    let rows = ms
        .iter()
        .map(|&m| {
            let right = Discrete::right_lattice(m);
            let support = Codebook::from_scalars(right.atoms())?;
            let e = gme_discrete(&right, &support)?;
            Ok(LatticeRow {
                m,
                n: support.len(),
                e_hat: e.is_finite().then_some(e),
                d: 0.0,
                rho1_right: rho1(&right, &leb, tol)?.value,
                rho1_midpoint: rho1(&Discrete::midpoint_lattice(m), &leb, tol)?.value,
                rho1_tol: tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mu = SelfSimilarMeasure::new(dyadic_lebesgue());
    let ns: Vec<usize> = (3..=9).map(|k| 1usize << k).collect();
    let curve = error_curve(&mu, &ns, &Strategy::Grid, Method::Exact { tol: 1e-6 })?;
    let lebesgue = estimate_dimension(&curve, Window::all(&ns))?;
    Ok(DiscontinuityReport { rows, lebesgue, lebesgue_curve: curve })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub card: usize,
    pub eps: f64,
    /// Certified upper bound on `ê` of the antichain codebook.
    pub e_hat_upper: f64,
    /// `Σ_{ω ∈ F_n} p_ω log s_ω`
    pub log_scale: f64,
    /// `e_hat_upper - log_scale`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// `max gap` over all rows.
    pub constant: f64,
    /// Max gap over the upper half of the `n` range minus max over the lower half.
    pub drift: f64,
}

/// `ê_n(F_n codebook) - Σ p_ω log s_ω` for every admissible `n` in `ns` (inadmissible
/// `n` are skipped). Finite models only.
pub fn antichain_gap(ifs: &IfsModel, ns: &[usize], anchor: &[f64], tol: f64) -> Result<GapReport> {
    let k = ifs.size().ok_or_else(|| Error::BadParameter("antichain gaps need a finite model".into()))?;
    let probs = ifs.probs_prefix(k);
    let ratios = ifs.ratios_prefix(k);
    let mu = SelfSimilarMeasure::new(ifs.clone());
    let rows: Vec<GapRow> = ns
        .par_iter()
        .filter_map(|&n| match antichain_for_n(ifs, n) {
            Err(Error::NTooSmall { .. }) => None,
            other => Some(other.and_then(|(eps, ac)| {
                let cb = codebook_from_antichain(ifs, &ac, anchor)?;
                let e = gme_exact(&mu, &cb, tol)?;
                let log_scale: f64 =
                    ac.words().iter().map(|w| word_value(w, &probs) * word_value(w, &ratios).ln()).sum();
                Ok(GapRow { n, card: ac.len(), eps, e_hat_upper: e.upper, log_scale, gap: e.upper - log_scale })
            })),
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::BadParameter("no admissible n in the list".into()));
    }
    let constant = rows.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    let half = rows.len() / 2;
    let max_of = |rs: &[GapRow]| rs.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    let drift = if half > 0 { max_of(&rows[half..]) - max_of(&rows[..half]) } else { 0.0 };
    Ok(GapReport { rows, constant, drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::presets::{cantor, geometric_half_third, uniform_system};
    use crate::quantizer::CurveEntry;

    const LOG2_LOG3: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;

    #[test]
    fn closed_form_dimensions() {
        let c = analytic_dimension(&cantor(), 1e-12);
        assert!((c.value - LOG2_LOG3).abs() < 1e-12 && c.error < 1e-12);
        let g = analytic_dimension(&geometric_half_third(), 1e-12);
        assert!((g.value - LOG2_LOG3).abs() < 1e-10 && g.lower() <= LOG2_LOG3 && LOG2_LOG3 <= g.upper());
        for m in [3usize, 4, 5] {
            let d = analytic_dimension(&uniform_system(m, 0.1, vec![1.0 / m as f64; m]), 1e-12);
            assert!((d.value - (m as f64).ln() / 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_sequence() {
        let g = geometric_half_third();
        let t = t_sequence(&g, &[1, 2, 10, 20, 40]).unwrap();
        assert_eq!(t[0], (1, 0.0));
        let errs: Vec<f64> = t.iter().map(|(_, v)| (v - LOG2_LOG3).abs()).collect();
        assert!(errs[1..].windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[4] < 1e-6);
        let c = t_sequence(&cantor(), &[2, 7]).unwrap();
        assert_eq!(c, vec![(2, analytic_dimension(&cantor(), 1e-15).value); 2]);
    }

    fn synthetic(d: f64, c: f64, ns: &[usize]) -> ErrorCurve {
        let entries = ns
            .iter()
            .map(|&n| {
                let e = -(n as f64).ln() / d + c;
                CurveEntry { n, bracket: ErrorBracket { lower: e, upper: e, method: Method::Closed, n_points: n, converged: true } }
            })
            .collect();
        ErrorCurve { entries, measure_id: "synthetic".into(), method: "closed".into() }
    }

    #[test]
    fn exact_line_and_trend_diagnostics() {
        let ns: Vec<usize> = (2..=12).map(|k| 1 << k).collect();
        let est = estimate_dimension(&synthetic(0.7, -0.3, &ns), None).unwrap();
        assert!((est.d_hat - 0.7).abs() < 1e-9 && est.residual < 1e-12);
        assert_eq!(est.window, Window { n_min: 128, n_max: 4096 });
        assert!(est.diagnostics[0].kendall_tau > 0.8 && est.diagnostics[1].kendall_tau < -0.8);
    }

    #[test]
    fn ill_conditioned_windows() {
        let ns: Vec<usize> = (2..=12).map(|k| 1 << k).collect();
        let curve = synthetic(0.7, 0.0, &ns);
        let narrow = Window { n_min: 4, n_max: 16 };
        assert!(matches!(estimate_dimension(&curve, Some(narrow)), Err(Error::IllConditioned(_))));
        let mut wide = curve.clone();
        for e in &mut wide.entries {
            e.bracket.lower -= 100.0;
        }
        assert!(matches!(estimate_dimension(&wide, None), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn lebesgue_grid_curve() {
        let mu = SelfSimilarMeasure::new(dyadic_lebesgue());
        let ns: Vec<usize> = (3..=9).map(|k| 1 << k).collect();
        let curve = error_curve(&mu, &ns, &Strategy::Grid, Method::Exact { tol: 1e-6 }).unwrap();
        for e in &curve.entries {
            let exact = -(e.n as f64).ln() - std::f64::consts::LN_2 - 1.0;
            assert!(e.bracket.contains(exact), "{e:?}");
        }
        let est = estimate_dimension(&curve, Window::all(&ns)).unwrap();
        assert!((est.d_hat - 1.0).abs() < 1e-3);
    }

    #[test]
    fn weight_schedule_converges() {
        let g = geometric_half_third();
        let sched = Schedule::geometric_weight(&g, &Schedule::default_thetas()).unwrap();
        let rep = stability_experiment(&g, &sched, &StabilityOptions::default()).unwrap();
        assert!(rep.monotone && !rep.hypothesis_violated, "{rep:?}");
        assert!(rep.rows.last().unwrap().delta_d < 1e-3);
        assert!(rep.rows.iter().all(|r| r.map_sup_l1 < 1e-12 && r.prob_l1 > 0.0));
        let zero = Schedule::geometric_weight(&g, &[0.0]).unwrap();
        let rep0 = stability_experiment(&g, &zero, &StabilityOptions::default()).unwrap();
        let row = &rep0.rows[0];
        assert_eq!(row.delta_d, 0.0);
        assert!(row.prob_l1 < 1e-15 && row.map_sup_l1 < 1e-15 && row.violations.is_empty());
    }

    #[test]
    fn equal_head_schedule_is_flagged() {
        let g = geometric_half_third();
        let ks: Vec<usize> = (0..=8).map(|i| 1 << i).collect();
        let sched = Schedule::equal_head(&g, &ks).unwrap();
        let rep = stability_experiment(&g, &sched, &StabilityOptions::default()).unwrap();
        assert!(rep.hypothesis_violated);
        let two = rep.checks.iter().find(|c| c.truncation == 2).unwrap();
        assert!(!two.ok);
        assert_eq!(rep.rows.len(), ks.len());
        assert!(rep.rows.last().unwrap().violations.contains(&2));
    }

    #[test]
    fn lattice_demo() {
        let rep = discontinuity_demo(&[4, 8], 1e-10).unwrap();
        for r in &rep.rows {
            assert_eq!(r.e_hat, None);
            assert!((r.rho1_midpoint - 0.25 / r.m as f64).abs() < 1e-9);
            assert!((r.rho1_right - 0.5 / r.m as f64).abs() < 1e-9);
        }
        assert!((rep.lebesgue.d_hat - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cantor_gap_is_bounded() {
        let c = cantor();
        let ns: Vec<usize> = (5..=200).collect();
        let rep = antichain_gap(&c, &ns, &[0.5], 1e-6).unwrap();
        assert_eq!(rep.rows.len(), ns.len());
        assert!(rep.rows.iter().all(|r| r.card <= r.n));
        // each cylinder holds a codepoint, so the gap is at most log diam X = 0
        assert!(rep.constant <= 1e-6 && rep.drift.abs() < 0.1, "{} {}", rep.constant, rep.drift);
    }
}
