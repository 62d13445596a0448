//! Certified cylinder quadrature for one-dimensional self-similar measures.
//!
//! A measure is reduced to a finite *line system*: signed ratios `r_j`, shifts `t_j`,
//! weights `p_j`, the convex hull `K` of the attractor and the mean. A cylinder is the
//! affine image `x -> a x + b` of `K` carrying mass `p`; its own mean is `a * mean + b`.
//!
//! The head-free geometric family reduces exactly to two maps: `S_1` with weight `1 - a`
//! and `T(x) = b x + 1 - b` with weight `a`, because `S_{j+1} = T o S_j` and
//! `sum_{j>=2} p_j (S_j)_* mu = a T_* mu`. Cylinders of `T` are the tail blocks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::ifs::{Family, IfsModel, Interval};

#[derive(Debug, Clone, PartialEq)]
pub struct LineSystem {
    ratios: Vec<f64>,
    shifts: Vec<f64>,
    probs: Vec<f64>,
    hull: Interval,
    mean: f64,
    log_floor: f64,
}

/// One cylinder: the image of the hull under `x -> a x + b`, with mass `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl Cylinder {
    pub fn scale(&self) -> f64 {
        self.a.abs()
    }
}

impl LineSystem {
    pub fn from_model(model: &IfsModel) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::UnsupportedDim(model.dim()));
        }
        let (ratios, shifts, probs) = match model.family() {
            Family::ExplicitFinite(f) => {
                let ratios = f.maps().iter().map(|m| m.ratio() * m.orientation().unwrap_or(1.0)).collect();
                let shifts = f.maps().iter().map(|m| m.translation()[0]).collect();
                (ratios, shifts, f.probs().to_vec())
            }
            Family::Geometric(g) => {
                if !g.head().is_empty() {
                    return Err(Error::BadParameter(
                        "exact quadrature supports geometric families without a probability head".into(),
                    ));
                }
                let first = g.map(1);
                (
                    vec![first.ratio(), g.b()],
                    vec![first.translation()[0], 1.0 - g.b()],
                    vec![1.0 - g.a(), g.a()],
                )
            }
        };
        Self::new(ratios, shifts, probs, model.ambient1()?)
    }

    fn new(ratios: Vec<f64>, shifts: Vec<f64>, probs: Vec<f64>, ambient: Interval) -> Result<Self> {
        let hull = attractor_hull(&ratios, &shifts, ambient);
        let len = hull.len();
        let mut images: Vec<(f64, f64)> = ratios
            .iter()
            .zip(&shifts)
            .map(|(r, t)| {
                let (u, v) = (r * hull.lo + t, r * hull.hi + t);
                (u.min(v), u.max(v))
            })
            .collect();
        images.sort_by(|x, y| x.0.total_cmp(&y.0));
        if len > 0.0 {
            for w in images.windows(2) {
                if w[0].1 > w[1].0 + 1e-12 * len {
                    return Err(Error::BadParameter(
                        "exact quadrature needs images with disjoint interiors".into(),
                    ));
                }
            }
        }
        let drift: f64 = probs.iter().zip(&ratios).map(|(p, r)| p * r).sum();
        let mean = probs.iter().zip(&shifts).map(|(p, t)| p * t).sum::<f64>() / (1.0 - drift);
        let log_floor = if len > 0.0 { frostman_floor(&ratios, &probs, len) } else { 0.0 };
        Ok(LineSystem { ratios, shifts, probs, hull, mean, log_floor })
    }

    pub fn hull(&self) -> Interval {
        self.hull
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Lower bound on `inf_c  int min(log|y - c|, 0) dmu(y)`.
    pub fn log_floor(&self) -> f64 {
        self.log_floor
    }

    pub fn root(&self) -> Cylinder {
        Cylinder { a: 1.0, b: 0.0, p: 1.0 }
    }

    pub fn children<'a>(&'a self, c: &'a Cylinder) -> impl Iterator<Item = Cylinder> + 'a {
        (0..self.ratios.len()).map(move |j| Cylinder {
            a: c.a * self.ratios[j],
            b: c.a * self.shifts[j] + c.b,
            p: c.p * self.probs[j],
        })
    }

    pub fn interval(&self, c: &Cylinder) -> (f64, f64) {
        let (u, v) = (c.a * self.hull.lo + c.b, c.a * self.hull.hi + c.b);
        (u.min(v), u.max(v))
    }

    /// Whether floating point still separates the cylinder's endpoints from its neighbours'.
    pub fn resolvable(&self, c: &Cylinder) -> bool {
        let (l, h) = self.interval(c);
        c.scale() * self.hull.len() > 64.0 * f64::EPSILON * l.abs().max(h.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn cylinder_mean(&self, c: &Cylinder) -> f64 {
        c.a * self.mean + c.b
    }
}

fn attractor_hull(ratios: &[f64], shifts: &[f64], ambient: Interval) -> Interval {
    if ratios.iter().all(|r| *r > 0.0) {
        let fixed = ratios.iter().zip(shifts).map(|(r, t)| t / (1.0 - r));
        let (lo, hi) = fixed.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let snap = |x: f64| {
            let eps = 1e-14 * ambient.len();
            if (x - ambient.lo).abs() <= eps {
                ambient.lo
            } else if (x - ambient.hi).abs() <= eps {
                ambient.hi
            } else {
                x
            }
        };
        return Interval::new(snap(lo).max(ambient.lo), snap(hi).min(ambient.hi));
    }
    let (mut lo, mut hi) = (ambient.lo, ambient.hi);
    for _ in 0..100_000 {
        let (mut nlo, mut nhi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (r, t) in ratios.iter().zip(shifts) {
            let (u, v) = (r * lo + t, r * hi + t);
            nlo = nlo.min(u.min(v));
            nhi = nhi.max(u.max(v));
        }
        let done = (nlo - lo).abs() <= 1e-17 && (nhi - hi).abs() <= 1e-17;
        lo = nlo.max(lo);
        hi = nhi.min(hi);
        if done {
            break;
        }
    }
    Interval::new(lo, hi)
}

/// Mass of any interval of radius `r` is at most `C r^alpha` with
/// `alpha = min log p_j / log s_j` and `C = (2/s_min + 2) |K|^-alpha`: the cylinders
/// with `s_w |K| <= r < s_{w-} |K|` have disjoint interiors and length above `s_min r`.
/// Integrating the layer-cake formula gives the floor `-(ln C + 1) / alpha`.
fn frostman_floor(ratios: &[f64], probs: &[f64], hull_len: f64) -> f64 {
    let alpha = ratios
        .iter()
        .zip(probs)
        .map(|(r, p)| p.ln() / r.abs().ln())
        .fold(f64::INFINITY, f64::min);
    let s_min = ratios.iter().map(|r| r.abs()).fold(1.0, f64::min);
    let c = ((2.0 / s_min + 2.0) * hull_len.powf(-alpha)).max(1.0);
    -(c.ln() + 1.0) / alpha
}

/// Sorted scalar codebook with nearest-point queries.
#[derive(Debug, Clone)]
pub struct SortedPoints(Vec<f64>);

impl SortedPoints {
    pub fn new(xs: &[f64]) -> Self {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        SortedPoints(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Distance from `x` to the nearest point.
    pub fn dist(&self, x: f64) -> f64 {
        let v = &self.0;
        let i = v.partition_point(|c| *c < x);
        let right = v.get(i).map_or(f64::INFINITY, |c| c - x);
        let left = if i > 0 { x - v[i - 1] } else { f64::INFINITY };
        left.min(right)
    }

    /// Number of points in the open interval `(lo, hi)`.
    pub fn count_open(&self, lo: f64, hi: f64) -> usize {
        let v = &self.0;
        let a = v.partition_point(|c| *c <= lo);
        let b = v.partition_point(|c| *c < hi);
        b.saturating_sub(a)
    }

    /// Whether some point lies in the closed interval `[lo, hi]`.
    pub fn hits(&self, lo: f64, hi: f64) -> bool {
        let i = self.0.partition_point(|c| *c < lo);
        i < self.0.len() && self.0[i] <= hi
    }

    /// `min_c max(|lo - c|, |hi - c|)`: every point of `[lo, hi]` is within this of the codebook.
    pub fn cover_radius(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        let v = &self.0;
        let i = v.partition_point(|c| *c < mid);
        let far = |c: f64| (lo - c).abs().max((hi - c).abs());
        let mut best = f64::INFINITY;
        if i < v.len() {
            best = best.min(far(v[i]));
        }
        if i > 0 {
            best = best.min(far(v[i - 1]));
        }
        best
    }

    /// Whether one codepoint is nearest throughout `[lo, hi]`, assuming no point lies inside.
    pub fn single_cell(&self, lo: f64, hi: f64) -> bool {
        let v = &self.0;
        let i = v.partition_point(|c| *c < lo);
        match (i.checked_sub(1).map(|k| v[k]), v.get(i)) {
            (Some(l), Some(r)) => {
                let mid = 0.5 * (l + r);
                !(lo < mid && mid < hi)
            }
            _ => true,
        }
    }

    /// Largest distance to the codebook over `[lo, hi]`, assuming no point lies inside.
    pub fn max_dist_outside(&self, lo: f64, hi: f64) -> f64 {
        let v = &self.0;
        let i = v.partition_point(|c| *c < lo);
        let left = if i > 0 { Some(v[i - 1]) } else { None };
        let right = v.get(i).copied();
        let peak = match (left, right) {
            (Some(l), Some(r)) => (0.5 * (l + r)).clamp(lo, hi),
            (Some(_), None) => hi,
            (None, Some(_)) => lo,
            (None, None) => return f64::INFINITY,
        };
        self.dist(peak)
    }
}

/// Per-cylinder enclosure of `int_cylinder f dmu`.
pub trait Integrand {
    fn bracket(&self, sys: &LineSystem, c: &Cylinder) -> (f64, f64);
}

/// `f = log d(x, codebook)`.
pub struct LogDistance<'a>(pub &'a SortedPoints);

impl Integrand for LogDistance<'_> {
    fn bracket(&self, sys: &LineSystem, c: &Cylinder) -> (f64, f64) {
        let pts = self.0;
        let (l, h) = sys.interval(c);
        if pts.hits(l, h) {
            let s = c.scale();
            // every point is within the cylinder length of the codepoint inside it
            // (the float interval may collapse to a point; the exact length s·H still bounds it)
            let exact_len = s * sys.hull().len();
            let float_len = pts.cover_radius(l, h).max(h - l);
            let upper = c.p * if float_len > 0.0 { exact_len.min(float_len) } else { exact_len }.ln();
            let k = pts.count_open(l - s, h + s) as f64;
            let lower = c.p * (s.ln() + k * sys.log_floor());
            return (lower.min(upper), upper);
        }
        // log d(., codebook) is concave on a codepoint-free interval:
        // Jensen bounds it above at the mean, the chord bounds it below.
        let m = sys.cylinder_mean(c).clamp(l, h);
        let (fl, fh, fm) = (pts.dist(l).ln(), pts.dist(h).ln(), pts.dist(m).ln());
        let chord = if h > l { fl + (fh - fl) * (m - l) / (h - l) } else { fl };
        let lower = c.p * chord;
        let upper = c.p * fm;
        (lower.min(upper), upper.max(lower))
    }
}

/// `f = d(x, codebook)^r`.
pub struct PowerDistance<'a> {
    pub points: &'a SortedPoints,
    pub r: f64,
}

impl Integrand for PowerDistance<'_> {
    fn bracket(&self, sys: &LineSystem, c: &Cylinder) -> (f64, f64) {
        let pts = self.points;
        let (l, h) = sys.interval(c);
        if pts.hits(l, h) {
            return (0.0, c.p * pts.cover_radius(l, h).min(h - l).powf(self.r));
        }
        let lo_d = pts.dist(l).min(pts.dist(h));
        let hi_d = pts.max_dist_outside(l, h);
        let (mut lower, mut upper) = (c.p * lo_d.powf(self.r), c.p * hi_d.powf(self.r));
        let m = sys.cylinder_mean(c).clamp(l, h);
        let (fl, fh, fm) = (pts.dist(l).powf(self.r), pts.dist(h).powf(self.r), pts.dist(m).powf(self.r));
        let chord = if h > l { fl + (fh - fl) * (m - l) / (h - l) } else { fl };
        if self.r <= 1.0 {
            // concave away from the codebook
            lower = lower.max(c.p * chord);
            upper = upper.min(c.p * fm);
        } else if pts.single_cell(l, h) {
            // convex inside one Voronoi cell
            lower = lower.max(c.p * fm);
            upper = upper.min(c.p * chord);
        }
        (lower.min(upper), upper.max(lower))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enclosure {
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
    pub refinements: usize,
}

struct Item {
    width: f64,
    lower: f64,
    upper: f64,
    cyl: Cylinder,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.width.total_cmp(&other.width) == Ordering::Equal
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        self.width.total_cmp(&other.width)
    }
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Refine the widest cylinder until `done(lower, upper)` or `max_refinements` is hit.
pub fn integrate<I: Integrand>(
    sys: &LineSystem,
    f: &I,
    done: impl Fn(f64, f64) -> bool,
    max_refinements: usize,
) -> Enclosure {
    let mut heap = BinaryHeap::new();
    let (mut settled_lo, mut settled_hi) = (Vec::new(), Vec::new());
    let push = |heap: &mut BinaryHeap<Item>, lo_acc: &mut Vec<f64>, hi_acc: &mut Vec<f64>, c: Cylinder| {
        let (lower, upper) = f.bracket(sys, &c);
        let width = upper - lower;
        if width > 0.0 && sys.resolvable(&c) {
            heap.push(Item { width, lower, upper, cyl: c });
        } else {
            lo_acc.push(lower);
            hi_acc.push(upper);
        }
    };
    push(&mut heap, &mut settled_lo, &mut settled_hi, sys.root());
    let totals = |heap: &BinaryHeap<Item>, lo: &[f64], hi: &[f64]| {
        (
            neumaier(heap.iter().map(|i| i.lower).chain(lo.iter().copied())),
            neumaier(heap.iter().map(|i| i.upper).chain(hi.iter().copied())),
        )
    };
    let (mut lower, mut upper) = totals(&heap, &settled_lo, &settled_hi);
    let mut refinements = 0;
    loop {
        if done(lower, upper) {
            let exact = totals(&heap, &settled_lo, &settled_hi);
            if done(exact.0, exact.1) {
                return Enclosure { lower: exact.0, upper: exact.1, converged: true, refinements };
            }
            (lower, upper) = exact;
        }
        let Some(item) = heap.pop() else {
            let (lo, hi) = totals(&heap, &settled_lo, &settled_hi);
            return Enclosure { lower: lo, upper: hi, converged: done(lo, hi), refinements };
        };
        if refinements >= max_refinements {
            heap.push(item);
            let (lo, hi) = totals(&heap, &settled_lo, &settled_hi);
            return Enclosure { lower: lo, upper: hi, converged: done(lo, hi), refinements };
        }
        refinements += 1;
        lower -= item.lower;
        upper -= item.upper;
        for child in sys.children(&item.cyl) {
            let (cl, cu) = f.bracket(sys, &child);
            lower += cl;
            upper += cu;
            if cu - cl > 0.0 && sys.resolvable(&child) {
                heap.push(Item { width: cu - cl, lower: cl, upper: cu, cyl: child });
            } else {
                settled_lo.push(cl);
                settled_hi.push(cu);
            }
        }
        if refinements % 65_536 == 0 {
            (lower, upper) = totals(&heap, &settled_lo, &settled_hi);
        }
    }
}

/// Cylinders whose hull is no longer than `resolution(mean)`, found depth-first.
pub fn leaves(sys: &LineSystem, resolution: impl Fn(f64) -> f64, min_mass: f64) -> Vec<(Cylinder, f64, f64, f64)> {
    let mut out = Vec::new();
    let mut stack = vec![sys.root()];
    while let Some(c) = stack.pop() {
        let (l, h) = sys.interval(&c);
        let m = sys.cylinder_mean(&c);
        if h - l <= resolution(m) || c.p <= min_mass || !sys.resolvable(&c) {
            out.push((c, l, h, m));
        } else {
            stack.extend(sys.children(&c));
        }
    }
    out.sort_by(|x, y| x.3.total_cmp(&y.3));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::presets::{cantor, dyadic_lebesgue};
    use crate::ifs::make_geometric_family;

    #[test]
    fn hull_mean_and_floor() {
        let c = LineSystem::from_model(&cantor()).unwrap();
        assert_eq!((c.hull().lo, c.hull().hi), (0.0, 1.0));
        assert!((c.mean() - 0.5).abs() < 1e-15);
        assert!(c.log_floor() < 0.0 && c.log_floor().is_finite());
        let g = LineSystem::from_model(&make_geometric_family(0.5, 1.0 / 3.0, 1.0).unwrap()).unwrap();
        assert!((g.hull().lo - 0.5).abs() < 1e-15 && g.hull().hi == 1.0);
    }

    #[test]
    fn geometric_reduction_matches_the_cdf_mean() {
        use crate::dist::Distribution1d;
        use crate::measure::SelfSimilarMeasure;
        for (a, b, c) in [(0.5, 1.0 / 3.0, 1.0), (0.3, 0.25, 1.5), (0.7, 0.2, 2.0)] {
            let model = make_geometric_family(a, b, c).unwrap();
            let sys = LineSystem::from_model(&model).unwrap();
            let mu = SelfSimilarMeasure::new(model);
            assert!((sys.mean() - mu.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn far_point_and_lebesgue_closed_forms() {
        let sys = LineSystem::from_model(&dyadic_lebesgue()).unwrap();
        let far = SortedPoints::new(&[10.0]);
        let e = integrate(&sys, &LogDistance(&far), |l, u| u - l <= 1e-10, 1 << 22);
        // int_0^1 log(10 - x) dx = 10 ln 10 - 9 ln 9 - 1
        let exact = 10.0 * 10f64.ln() - 9.0 * 9f64.ln() - 1.0;
        assert!(e.converged && e.lower <= exact + 1e-14 && exact <= e.upper + 1e-14);
        let mid = SortedPoints::new(&[0.5]);
        let e = integrate(&sys, &LogDistance(&mid), |l, u| u - l <= 1e-7, 1 << 22);
        let exact = -(2f64.ln()) - 1.0;
        assert!(e.converged && e.lower <= exact && exact <= e.upper, "{e:?}");
        let e = integrate(&sys, &PowerDistance { points: &mid, r: 2.0 }, |l, u| u - l <= 1e-9, 1 << 22);
        assert!(e.converged && e.lower <= 1.0 / 12.0 && 1.0 / 12.0 <= e.upper);
    }

    #[test]
    fn overlapping_images_are_rejected() {
        use crate::ifs::{make_finite_ifs, SimilarityMap};
        let maps = vec![SimilarityMap::line(0.6, 1.0, 0.0).unwrap(), SimilarityMap::line(0.6, 1.0, 0.4).unwrap()];
        let model = make_finite_ifs(maps, vec![0.5, 0.5]).unwrap();
        assert!(matches!(LineSystem::from_model(&model), Err(Error::BadParameter(_))));
    }
}
