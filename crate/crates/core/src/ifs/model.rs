use serde::Serialize;

use super::map::{Interval, SimilarityMap};
use super::word::Word;
use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;
const CONTAINMENT_SLACK: f64 = 1e-12;

/// A truncated series together with a certified bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl SeriesValue {
    pub fn lower(&self) -> f64 {
        self.value - self.tail_bound
    }

    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteFamily {
    maps: Vec<SimilarityMap>,
    probs: Vec<f64>,
}

impl FiniteFamily {
    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Countably infinite family on `[0, 1]`.
///
/// Probabilities: an optional explicit head `q_1..q_h`, then a geometric tail
/// `p_j = M (1 - a) a^{j-h-1}` for `j > h` with `M = 1 - sum(head)`. With an
/// empty head this is `p_j = (1 - a) a^{j-1}`.
///
/// Ratios `s_j = c b^j`. Images are packed left to right; the leftover length
/// `1 - sum_j s_j` is spread as gaps, the gap before image `j` proportional to
/// `s_j`. That gives `S_j(x) = s_j x + 1 - beta b^{j-1}` with
/// `beta = 1 - (1 - L)(1 - b)` and `L = c b / (1 - b)`. Images accumulate at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricFamily {
    a: f64,
    b: f64,
    c: f64,
    head: Vec<f64>,
    tail_scale: f64,
    packed: f64,
    beta: f64,
}

impl GeometricFamily {
    fn new(a: f64, b: f64, c: f64, head: Vec<f64>) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::BadParameter(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::BadParameter(format!("c = {c} must be positive")));
        }
        if let Some(q) = head.iter().find(|q| !(**q > 0.0)) {
            return Err(Error::BadProbabilities(format!("head probability {q} is not positive")));
        }
        let head_sum: f64 = head.iter().sum();
        let tail_scale = 1.0 - head_sum;
        if !(tail_scale > 0.0) {
            return Err(Error::BadProbabilities(format!(
                "head mass {head_sum} leaves no room for the tail"
            )));
        }
        let packed = c * b / (1.0 - b);
        if packed >= 1.0 {
            return Err(Error::InfeasiblePacking { total: packed });
        }
        let beta = 1.0 - (1.0 - packed) * (1.0 - b);
        Ok(GeometricFamily { a, b, c, head, tail_scale, packed, beta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    /// Total image length `sum_j s_j`.
    pub fn packed_length(&self) -> f64 {
        self.packed
    }

    pub fn prob(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        let h = self.head.len();
        if j <= h {
            self.head[j - 1]
        } else {
            self.tail_scale * (1.0 - self.a) * self.a.powi((j - h - 1) as i32)
        }
    }

    pub fn ratio(&self, j: usize) -> f64 {
        self.c * self.b.powi(j as i32)
    }

    pub fn left(&self, j: usize) -> f64 {
        1.0 - self.beta * self.b.powi(j as i32 - 1)
    }

    pub fn right(&self, j: usize) -> f64 {
        self.left(j) + self.ratio(j)
    }

    pub fn map(&self, j: usize) -> SimilarityMap {
        SimilarityMap::line(self.ratio(j), 1.0, self.left(j)).expect("ratios of a feasible family are contractive")
    }

    /// `sum_{j > n} p_j`, in closed form.
    pub fn tail_mass(&self, n: usize) -> f64 {
        let h = self.head.len();
        if n >= h {
            self.tail_scale * self.a.powi((n - h) as i32)
        } else {
            self.tail_scale + self.head[n..].iter().sum::<f64>()
        }
    }

    /// Mass of letters strictly before `j`: `1 - tail_mass(j - 1)`, computed without cancellation
    /// for small `j`.
    pub fn mass_before(&self, j: usize) -> f64 {
        let h = self.head.len();
        if j <= h + 1 {
            self.head[..j - 1].iter().sum()
        } else {
            1.0 - self.tail_mass(j - 1)
        }
    }

    /// Inverse CDF of the letter distribution: head by search, tail by
    /// `k = floor(log(1 - u) / log a) + 1`.
    pub fn letter_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, q) in self.head.iter().enumerate() {
            acc += q;
            if u < acc {
                return i + 1;
            }
        }
        let v = ((u - acc) / self.tail_scale).clamp(0.0, 1.0 - f64::EPSILON);
        let k = ((1.0 - v).ln() / self.a.ln()).floor() as usize + 1;
        self.head.len() + k.max(1)
    }

    /// Largest `j` with `left(j) <= y`, or 0 when `y` is left of every image. Requires `y < 1`.
    pub fn last_image_starting_before(&self, y: f64) -> usize {
        if y < self.left(1) {
            return 0;
        }
        let est = ((1.0 - y) / self.beta).ln() / self.b.ln();
        let mut j = if est.is_finite() && est > 0.0 { est.floor() as usize + 1 } else { 1 };
        j = j.clamp(1, 4000);
        while j > 1 && self.left(j) > y {
            j -= 1;
        }
        while self.left(j + 1) <= y && j < 100_000 {
            j += 1;
        }
        j
    }

    fn entropy(&self) -> f64 {
        let head: f64 = self.head.iter().map(|q| q * q.ln()).sum();
        let m = self.tail_scale;
        let a = self.a;
        head + m * (m * (1.0 - a)).ln() + m * a / (1.0 - a) * a.ln()
    }

    fn lyapunov(&self) -> f64 {
        let h = self.head.len();
        let head: f64 = self.head.iter().enumerate().map(|(i, q)| q * self.ratio(i + 1).ln()).sum();
        let a = self.a;
        head + self.tail_scale * (self.c.ln() + (h as f64 + 1.0 + a / (1.0 - a)) * self.b.ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    ExplicitFinite(FiniteFamily),
    Geometric(GeometricFamily),
}

/// A finite or countably infinite system of weighted contractive similarities
/// acting on a compact box.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsModel {
    ambient: Vec<Interval>,
    family: Family,
}

/// Builds a finite model on the unit box `[0, 1]^k`.
pub fn make_finite_ifs(maps: Vec<SimilarityMap>, probs: Vec<f64>) -> Result<IfsModel> {
    let k = maps.first().map(SimilarityMap::dim).unwrap_or(1);
    IfsModel::finite(vec![Interval::unit(); k], maps, probs)
}

/// Builds the geometric family `p_j = (1-a) a^{j-1}`, `s_j = c b^j` on `[0, 1]`.
pub fn make_geometric_family(a: f64, b: f64, c: f64) -> Result<IfsModel> {
    IfsModel::geometric(a, b, c, Vec::new())
}

impl IfsModel {
    pub fn finite(ambient: Vec<Interval>, maps: Vec<SimilarityMap>, probs: Vec<f64>) -> Result<Self> {
        if maps.is_empty() || maps.len() != probs.len() {
            return Err(Error::BadParameter(format!(
                "need equal nonzero numbers of maps and probabilities, got {} and {}",
                maps.len(),
                probs.len()
            )));
        }
        let k = ambient.len();
        for (i, m) in maps.iter().enumerate() {
            if m.dim() != k {
                return Err(Error::DimMismatch(m.dim(), k));
            }
            if !(m.ratio() > 0.0 && m.ratio() < 1.0) {
                return Err(Error::NonContractive { index: i + 1, ratio: m.ratio() });
            }
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::BadProbabilities(format!("probability {p} is not positive")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::BadProbabilities(format!("probabilities sum to {total}")));
        }
        check_self_map(&ambient, &maps)?;
        Ok(IfsModel { ambient, family: Family::ExplicitFinite(FiniteFamily { maps, probs }) })
    }

    pub fn geometric(a: f64, b: f64, c: f64, head: Vec<f64>) -> Result<Self> {
        let fam = GeometricFamily::new(a, b, c, head)?;
        Ok(IfsModel { ambient: vec![Interval::unit()], family: Family::Geometric(fam) })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.ambient.len()
    }

    pub fn ambient(&self) -> &[Interval] {
        &self.ambient
    }

    /// The ambient interval of a 1-D model.
    pub fn ambient1(&self) -> Result<Interval> {
        match self.ambient.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::UnsupportedDim(self.dim())),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.ambient.iter().map(|i| i.len() * i.len()).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.ambient.iter().map(Interval::mid).collect()
    }

    /// Number of maps, `None` for infinite families.
    pub fn size(&self) -> Option<usize> {
        match &self.family {
            Family::ExplicitFinite(f) => Some(f.maps.len()),
            Family::Geometric(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.size().is_some()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        match self.size() {
            Some(n) if j == 0 || j > n => Err(Error::BadIndex { letter: j as u32, size: n }),
            None if j == 0 => Err(Error::BadIndex { letter: 0, size: usize::MAX }),
            _ => Ok(()),
        }
    }

    /// `p_j`, 1-based.
    pub fn prob(&self, j: usize) -> Result<f64> {
        self.check_index(j)?;
        Ok(match &self.family {
            Family::ExplicitFinite(f) => f.probs[j - 1],
            Family::Geometric(g) => g.prob(j),
        })
    }

    /// `s_j`, 1-based.
    pub fn ratio(&self, j: usize) -> Result<f64> {
        self.check_index(j)?;
        Ok(match &self.family {
            Family::ExplicitFinite(f) => f.maps[j - 1].ratio(),
            Family::Geometric(g) => g.ratio(j),
        })
    }

    /// `S_j`, 1-based.
    pub fn map(&self, j: usize) -> Result<SimilarityMap> {
        self.check_index(j)?;
        Ok(match &self.family {
            Family::ExplicitFinite(f) => f.maps[j - 1].clone(),
            Family::Geometric(g) => g.map(j),
        })
    }

    /// First `n` probabilities (all of them for a smaller finite model).
    pub fn probs_prefix(&self, n: usize) -> Vec<f64> {
        let n = self.size().map_or(n, |s| s.min(n));
        (1..=n).map(|j| self.prob(j).unwrap()).collect()
    }

    pub fn ratios_prefix(&self, n: usize) -> Vec<f64> {
        let n = self.size().map_or(n, |s| s.min(n));
        (1..=n).map(|j| self.ratio(j).unwrap()).collect()
    }

    /// `sum_{j > n} p_j`; exact zero past the end of a finite model.
    pub fn tail_mass(&self, n: usize) -> f64 {
        match &self.family {
            Family::ExplicitFinite(f) => f.probs.iter().skip(n).sum(),
            Family::Geometric(g) => g.tail_mass(n),
        }
    }

    pub fn sup_ratio(&self) -> f64 {
        match &self.family {
            Family::ExplicitFinite(f) => f.maps.iter().map(SimilarityMap::ratio).fold(0.0, f64::max),
            Family::Geometric(g) => g.ratio(1),
        }
    }

    /// True when every map preserves orientation (1-D only).
    pub fn orientation_preserving(&self) -> bool {
        match &self.family {
            Family::ExplicitFinite(f) => f.maps.iter().all(|m| m.orientation() == Some(1.0)),
            Family::Geometric(_) => true,
        }
    }

    /// Keeps the first `n` maps and renormalizes `p_i / L_n`; the last probability
    /// is `1 -` the others so the vector sums to one.
    pub fn truncate(&self, n: usize) -> Result<IfsModel> {
        if n == 0 {
            return Err(Error::BadParameter("truncation length must be positive".into()));
        }
        if let Some(size) = self.size() {
            if n > size {
                return Err(Error::BadParameter(format!("cannot truncate {size} maps to {n}")));
            }
            if n == size {
                return Ok(self.clone());
            }
        }
        let raw = self.probs_prefix(n);
        let total: f64 = raw.iter().sum();
        let mut probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let head: f64 = probs[..n - 1].iter().sum();
        probs[n - 1] = 1.0 - head;
        let maps = (1..=n).map(|j| self.map(j)).collect::<Result<Vec<_>>>()?;
        Ok(IfsModel { ambient: self.ambient.clone(), family: Family::ExplicitFinite(FiniteFamily { maps, probs }) })
    }

    /// `sum_j p_j log p_j`. Finite sums are exact; the geometric family uses its closed form.
    pub fn entropy_series(&self, tol: f64) -> SeriesValue {
        debug_assert!(tol > 0.0);
        match &self.family {
            Family::ExplicitFinite(f) => SeriesValue {
                value: f.probs.iter().map(|p| p * p.ln()).sum(),
                tail_bound: 0.0,
                terms_used: f.probs.len(),
            },
            Family::Geometric(g) => SeriesValue { value: g.entropy(), tail_bound: 0.0, terms_used: g.head.len() },
        }
    }

    /// `sum_j p_j log s_j`.
    pub fn lyapunov_series(&self, tol: f64) -> SeriesValue {
        debug_assert!(tol > 0.0);
        match &self.family {
            Family::ExplicitFinite(f) => SeriesValue {
                value: f.probs.iter().zip(&f.maps).map(|(p, m)| p * m.ratio().ln()).sum(),
                tail_bound: 0.0,
                terms_used: f.probs.len(),
            },
            Family::Geometric(g) => SeriesValue { value: g.lyapunov(), tail_bound: 0.0, terms_used: g.head.len() },
        }
    }

    /// `(S_w, p_w, s_w)` with `S_w = S_{w1} ∘ ... ∘ S_{wn}`.
    pub fn compose_word(&self, word: &Word) -> Result<(SimilarityMap, f64, f64)> {
        let mut map = SimilarityMap::identity(self.dim());
        let mut p = 1.0;
        let mut s = 1.0;
        for &letter in word.letters() {
            let j = letter as usize;
            self.check_index(j)?;
            let m = self.map(j)?;
            p *= self.prob(j)?;
            s *= m.ratio();
            map = map.compose(&m);
        }
        Ok((map, p, s))
    }

    /// The cylinder `S_w(X)` of a 1-D model.
    pub fn word_cylinder(&self, word: &Word) -> Result<Interval> {
        let x = self.ambient1()?;
        let (map, _, _) = self.compose_word(word)?;
        Ok(map.image1(&x))
    }

    /// Exact strong-separation check on the first `n` images `S_j(X)` (1-D).
    pub fn verify_ssc(&self, n: usize) -> Result<SeparationReport> {
        let x = self.ambient1()?;
        let n = self.size().map_or(n, |s| s.min(n));
        let images: Vec<Interval> = (1..=n).map(|j| Ok(self.map(j)?.image1(&x))).collect::<Result<_>>()?;
        let mut pairwise = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut min_gap = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let (u, v) = (&images[i], &images[j]);
                let gap = (v.lo - u.hi).max(u.lo - v.hi);
                min_gap = min_gap.min(gap);
                pairwise.push(PairGap { i: i + 1, j: j + 1, gap });
            }
        }
        let inside = images.iter().all(|im| im.lo >= x.lo - CONTAINMENT_SLACK && im.hi <= x.hi + CONTAINMENT_SLACK);
        let tail = match &self.family {
            Family::Geometric(g) => {
                let residual = Interval::new(g.left(n + 1), x.hi);
                let last = images.iter().map(|im| im.hi).fold(x.lo, f64::max);
                Some(TailCertificate { residual, gap: residual.lo - last })
            }
            Family::ExplicitFinite(_) => None,
        };
        let pass = inside && (n < 2 || min_gap > 0.0) && tail.as_ref().is_none_or(|t| t.gap > 0.0);
        Ok(SeparationReport {
            checked: n,
            pairwise,
            min_gap: if n < 2 { f64::INFINITY } else { min_gap },
            inside_ambient: inside,
            tail,
            pass,
        })
    }
}

fn check_self_map(ambient: &[Interval], maps: &[SimilarityMap]) -> Result<()> {
    let k = ambient.len();
    let mut vertex = vec![0.0; k];
    for (idx, m) in maps.iter().enumerate() {
        for mask in 0..(1usize << k) {
            for (i, iv) in ambient.iter().enumerate() {
                vertex[i] = if mask >> i & 1 == 1 { iv.hi } else { iv.lo };
            }
            let y = m.apply(&vertex);
            let outside = y.iter().zip(ambient).any(|(v, iv)| {
                *v < iv.lo - CONTAINMENT_SLACK * iv.len().max(1.0) || *v > iv.hi + CONTAINMENT_SLACK * iv.len().max(1.0)
            });
            if outside {
                return Err(Error::BadParameter(format!("map {} sends the ambient box outside itself", idx + 1)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGap {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
}

/// The images of all maps past the checked prefix lie in `residual`, which is
/// separated from the prefix images by `gap`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCertificate {
    pub residual: Interval,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub checked: usize,
    pub pairwise: Vec<PairGap>,
    pub min_gap: f64,
    pub inside_ambient: bool,
    pub tail: Option<TailCertificate>,
    pub pass: bool,
}
