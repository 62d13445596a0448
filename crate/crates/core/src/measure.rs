//! The invariant measure of an [`IfsModel`]: chaos-game sampling, and in one
//! dimension an exact CDF / partial-moment recursion and a quantile descent.
//!
//! The CDF recursion uses
//! `F(x) = sum_{j : S_j(X) left of x} p_j + p_k F(S_k^{-1} x)`
//! where `S_k(X)` is the image containing `x`. It needs orientation-preserving
//! maps whose images do not overlap (touching endpoints are fine).

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::Distribution1d;
use crate::error::{Error, Result};
use crate::ifs::{Family, GeometricFamily, IfsModel, Interval};
use crate::rng;

pub const DEFAULT_DEPTH_TOL: f64 = 1e-10;
const MAX_DEPTH: usize = 100_000;
/// Geometric tail sums stop once the remaining mass is below this.
const SERIES_CUTOFF: f64 = 1e-20;

#[derive(Debug, Clone, Copy)]
struct Image {
    lo: f64,
    hi: f64,
    p: f64,
    ratio: f64,
    offset: f64,
}

#[derive(Debug, Clone)]
enum Layout {
    /// Single map: the measure is a point mass at its fixed point.
    Atom(f64),
    Finite {
        images: Vec<Image>,
        /// `cum_p[k]` = mass of images `0..k` in spatial order.
        cum_p: Vec<f64>,
        /// `cum_m[k]` = `sum_{i<k} p_i (s_i m + t_i)`.
        cum_m: Vec<f64>,
    },
    Geometric(GeometricFamily),
}

enum Located {
    Gap { before: usize },
    Inside(usize),
}

/// Handle binding a model to its invariant measure.
#[derive(Debug, Clone)]
pub struct SelfSimilarMeasure {
    model: IfsModel,
    depth_tol: f64,
    line: std::result::Result<(Layout, f64), Error>,
}

impl SelfSimilarMeasure {
    pub fn new(model: IfsModel) -> Self {
        Self::with_depth_tol(model, DEFAULT_DEPTH_TOL)
    }

    pub fn with_depth_tol(model: IfsModel, depth_tol: f64) -> Self {
        assert!(depth_tol > 0.0, "depth_tol must be positive");
        let line = line_layout(&model);
        SelfSimilarMeasure { model, depth_tol, line }
    }

    pub fn model(&self) -> &IfsModel {
        &self.model
    }

    pub fn depth_tol(&self) -> f64 {
        self.depth_tol
    }

    fn layout(&self) -> Result<(&Layout, f64)> {
        match &self.line {
            Ok((l, m)) => Ok((l, *m)),
            Err(e) => Err(e.clone()),
        }
    }

    /// Whether the exact 1-D machinery (cdf, quantile, quadrature) is available.
    pub fn supports_line_ops(&self) -> Result<()> {
        self.layout().map(|_| ())
    }

    /// `count` i.i.d. draws; draw `i` uses its own counter-based stream.
    pub fn sample(&self, count: usize, seed: u64) -> SampleBatch {
        self.sample_range(0, count as u64, seed)
    }

    /// Draws `start..start + count` of the stream for `seed`. Splitting a batch
    /// into ranges gives the same points as one call.
    pub fn sample_range(&self, start: u64, count: u64, seed: u64) -> SampleBatch {
        let draws: Vec<(Vec<f64>, usize)> =
            (start..start + count).into_par_iter().map(|i| self.draw(seed, i)).collect();
        let (points, depth_used) = draws.into_iter().unzip();
        SampleBatch { start, points, depth_used, seed }
    }

    fn letter(&self, u: f64) -> usize {
        match self.model.family() {
            Family::ExplicitFinite(f) => {
                let mut acc = 0.0;
                for (i, p) in f.probs().iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i + 1;
                    }
                }
                f.probs().len()
            }
            Family::Geometric(g) => g.letter_for(u),
        }
    }

    fn draw(&self, seed: u64, index: u64) -> (Vec<f64>, usize) {
        let mut r = rng::stream(seed, index);
        let diam = self.model.diameter();
        let center = self.model.center();
        if self.model.dim() == 1 {
            let (mut scale, mut offset) = (1.0f64, 0.0f64);
            let mut depth = 0;
            while scale.abs() * diam >= self.depth_tol && depth < MAX_DEPTH {
                let m = self.model.map(self.letter(r.gen())).expect("letter in range");
                offset += scale * m.translation()[0];
                scale *= m.ratio() * m.orthogonal()[0];
                depth += 1;
            }
            return (vec![offset + scale * center[0]], depth);
        }
        let mut map = crate::ifs::SimilarityMap::identity(self.model.dim());
        let mut depth = 0;
        while map.ratio() * diam >= self.depth_tol && depth < MAX_DEPTH {
            map = map.compose(&self.model.map(self.letter(r.gen())).expect("letter in range"));
            depth += 1;
        }
        (map.apply(&center), depth)
    }

    /// Maximum over random probes of the violation of `F = sum_j p_j F∘S_j^{-1}`.
    pub fn self_similarity_residual(&self, probes: usize, tol: f64, seed: u64) -> Result<f64> {
        let (layout, _) = self.layout()?;
        let x = self.model.ambient1()?;
        if let Layout::Atom(_) = layout {
            return Ok(0.0);
        }
        let n_terms = match self.model.size() {
            Some(n) => n,
            None => (1..).find(|&n| self.model.tail_mass(n) <= tol).unwrap(),
        };
        let tail = self.model.tail_mass(n_terms);
        let maps: Vec<_> = (1..=n_terms).map(|j| self.model.map(j)).collect::<Result<_>>()?;
        let probs = self.model.probs_prefix(n_terms);
        let mut worst: f64 = 0.0;
        for i in 0..probes {
            let y = x.lo + rng::stream(seed, i as u64).gen::<f64>() * x.len();
            let lhs = self.cdf(y, tol)?;
            let mut rhs = 0.0;
            for (m, p) in maps.iter().zip(&probs) {
                rhs += p * self.cdf(m.inverse1(y), tol)?.clamp(0.0, 1.0);
            }
            let r = if lhs < rhs { rhs - lhs } else if lhs > rhs + tail { lhs - rhs - tail } else { 0.0 };
            worst = worst.max(r);
        }
        Ok(worst)
    }

    fn locate(layout: &Layout, y: f64) -> Located {
        match layout {
            Layout::Finite { images, .. } => {
                let k = images.partition_point(|im| im.lo <= y);
                if k == 0 {
                    Located::Gap { before: 0 }
                } else if y <= images[k - 1].hi {
                    Located::Inside(k - 1)
                } else {
                    Located::Gap { before: k }
                }
            }
            Layout::Geometric(g) => {
                let j = g.last_image_starting_before(y);
                if j == 0 {
                    Located::Gap { before: 0 }
                } else if y <= g.right(j) {
                    Located::Inside(j - 1)
                } else {
                    Located::Gap { before: j }
                }
            }
            Layout::Atom(_) => unreachable!("atoms resolve directly"),
        }
    }

    /// Mass and `sum p_i (s_i m + t_i)` over the first `k` images in spatial order.
    fn prefix(layout: &Layout, k: usize, mean: f64) -> (f64, f64) {
        match layout {
            Layout::Finite { cum_p, cum_m, .. } => (cum_p[k], cum_m[k]),
            Layout::Geometric(g) => {
                let mut mom = 0.0;
                for j in 1..=k {
                    mom += g.prob(j) * (g.ratio(j) * mean + g.left(j));
                }
                (g.mass_before(k + 1), mom)
            }
            Layout::Atom(_) => unreachable!(),
        }
    }

    fn image(layout: &Layout, k: usize) -> Image {
        match layout {
            Layout::Finite { images, .. } => images[k],
            Layout::Geometric(g) => {
                let j = k + 1;
                Image { lo: g.left(j), hi: g.right(j), p: g.prob(j), ratio: g.ratio(j), offset: g.left(j) }
            }
            Layout::Atom(_) => unreachable!(),
        }
    }

    /// Largest and smallest points of the support.
    fn extremes(&self, layout: &Layout) -> (f64, f64) {
        match layout {
            Layout::Atom(x) => (*x, *x),
            Layout::Finite { images, .. } => {
                let amb = self.model.ambient()[0];
                let fixed = |im: &Image| {
                    if im.lo == amb.lo {
                        amb.lo
                    } else if im.hi == amb.hi {
                        amb.hi
                    } else {
                        im.offset / (1.0 - im.ratio)
                    }
                };
                (fixed(&images[0]), fixed(&images[images.len() - 1]))
            }
            Layout::Geometric(g) => (g.left(1) / (1.0 - g.ratio(1)), 1.0),
        }
    }
}

fn line_layout(model: &IfsModel) -> Result<(Layout, f64)> {
    let x = model.ambient1()?;
    if !model.orientation_preserving() {
        return Err(Error::UnsupportedOrientation);
    }
    match model.family() {
        Family::ExplicitFinite(f) if f.maps().len() == 1 => {
            let m = &f.maps()[0];
            let fixed = m.translation()[0] / (1.0 - m.ratio());
            Ok((Layout::Atom(fixed), fixed))
        }
        Family::ExplicitFinite(f) => {
            let mut images: Vec<Image> = f
                .maps()
                .iter()
                .zip(f.probs())
                .map(|(m, p)| {
                    let im = m.image1(&x);
                    Image { lo: im.lo, hi: im.hi, p: *p, ratio: m.ratio(), offset: m.translation()[0] }
                })
                .collect();
            images.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            if let Some(w) = images.windows(2).find(|w| w[1].lo < w[0].hi) {
                return Err(Error::BadParameter(format!(
                    "images [{}, {}] and [{}, {}] overlap",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
            let ps: f64 = images.iter().map(|i| i.p * i.ratio).sum();
            let pt: f64 = images.iter().map(|i| i.p * i.offset).sum();
            let mean = pt / (1.0 - ps);
            let mut cum_p = vec![0.0];
            let mut cum_m = vec![0.0];
            for im in &images {
                cum_p.push(cum_p.last().unwrap() + im.p);
                cum_m.push(cum_m.last().unwrap() + im.p * (im.ratio * mean + im.offset));
            }
            Ok((Layout::Finite { images, cum_p, cum_m }, mean))
        }
        Family::Geometric(g) => {
            let (mut ps, mut pt) = (0.0, 0.0);
            let mut j = 1;
            while g.tail_mass(j - 1) > SERIES_CUTOFF {
                ps += g.prob(j) * g.ratio(j);
                pt += g.prob(j) * g.left(j);
                j += 1;
            }
            Ok((Layout::Geometric(g.clone()), pt / (1.0 - ps)))
        }
    }
}

impl Distribution1d for SelfSimilarMeasure {
    fn hull(&self) -> Interval {
        match self.layout() {
            Ok((l, _)) => {
                let (lo, hi) = self.extremes(l);
                Interval::new(lo, hi)
            }
            Err(_) => self.model.ambient()[0],
        }
    }

    fn cdf_moment(&self, x: f64, tol: f64) -> Result<(f64, f64)> {
        let (layout, mean) = self.layout()?;
        if let Layout::Atom(a) = layout {
            return Ok(if x >= *a { (1.0, *a) } else { (0.0, 0.0) });
        }
        let amb = self.model.ambient1()?;
        let (mut f, mut g, mut w) = (0.0, 0.0, 1.0);
        let (mut scale, mut offset) = (1.0, 0.0);
        let mut y = x;
        loop {
            if y < amb.lo {
                return Ok((f, g));
            }
            if y >= amb.hi {
                return Ok((f + w, g + w * (offset + scale * mean)));
            }
            if w <= tol {
                return Ok((f + 0.5 * w, g + 0.5 * w * (offset + scale * amb.mid())));
            }
            let (k, inside) = match Self::locate(layout, y) {
                Located::Gap { before } => (before, false),
                Located::Inside(k) => (k, true),
            };
            let (pm, mm) = Self::prefix(layout, k, mean);
            f += w * pm;
            g += w * (offset * pm + scale * mm);
            if !inside {
                return Ok((f, g));
            }
            let im = Self::image(layout, k);
            w *= im.p;
            offset += scale * im.offset;
            scale *= im.ratio;
            y = (y - im.offset) / im.ratio;
        }
    }

    fn quantile(&self, u: f64, tol: f64) -> Result<f64> {
        let (layout, _) = self.layout()?;
        let (lo, hi) = self.extremes(layout);
        if let Layout::Atom(a) = layout {
            return Ok(*a);
        }
        if u <= 0.0 {
            return Ok(lo);
        }
        if u >= 1.0 {
            return Ok(hi);
        }
        let amb = self.model.ambient1()?;
        let (mut scale, mut offset, mut w) = (1.0, 0.0, 1.0);
        let mut v = u;
        while w >= tol {
            let k = match layout {
                Layout::Finite { images, cum_p, .. } => {
                    (0..images.len()).find(|&k| v < cum_p[k + 1]).unwrap_or(images.len() - 1)
                }
                Layout::Geometric(g) => g.letter_for(v) - 1,
                Layout::Atom(_) => unreachable!(),
            };
            let (before, _) = Self::prefix(layout, k, 0.0);
            let im = Self::image(layout, k);
            v = ((v - before) / im.p).clamp(0.0, 1.0);
            w *= im.p;
            offset += scale * im.offset;
            scale *= im.ratio;
        }
        Ok(offset + scale * amb.mid())
    }

    fn mean(&self) -> f64 {
        self.layout().map(|(_, m)| m).unwrap_or(f64::NAN)
    }
}

/// Points drawn by [`SelfSimilarMeasure::sample`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub start: u64,
    pub points: Vec<Vec<f64>>,
    pub depth_used: Vec<usize>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First coordinates, for 1-D work.
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    /// CSV with header `index,x[,y...],depth`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.points.first().map_or(1, Vec::len);
        const NAMES: [&str; 3] = ["x", "y", "z"];
        let mut header = vec!["index".to_string()];
        for d in 0..dim {
            header.push(NAMES.get(d).map_or_else(|| format!("x{d}"), |s| s.to_string()));
        }
        header.push("depth".into());
        writeln!(out, "{}", header.join(","))?;
        for (i, (p, d)) in self.points.iter().zip(&self.depth_used).enumerate() {
            let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{},{}", self.start + i as u64, coords.join(","), d)?;
        }
        Ok(())
    }
}
