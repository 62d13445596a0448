use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-12;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Distance from `x` to the interval; zero inside.
    pub fn dist(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// A similarity `x -> ratio * O x + t` on R^k.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    ratio: f64,
    /// Row-major k x k orthogonal matrix.
    orthogonal: Vec<f64>,
    translation: Vec<f64>,
}

impl SimilarityMap {
    /// Builds a contractive similarity, checking `0 < ratio < 1` and orthogonality.
    pub fn new(ratio: f64, orthogonal: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        let k = translation.len();
        if k == 0 || orthogonal.len() != k * k {
            return Err(Error::BadParameter(format!(
                "orthogonal part has {} entries for dimension {k}",
                orthogonal.len()
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::NonContractive { index: 0, ratio });
        }
        let defect = orthogonality_defect(&orthogonal, k);
        if !(defect <= ORTHO_TOL) {
            return Err(Error::NotOrthogonal { index: 0, defect });
        }
        Ok(SimilarityMap { ratio, orthogonal, translation })
    }

    /// One-dimensional map `x -> orientation * ratio * x + translation`.
    pub fn line(ratio: f64, orientation: f64, translation: f64) -> Result<Self> {
        if orientation != 1.0 && orientation != -1.0 {
            return Err(Error::NotOrthogonal { index: 0, defect: (orientation.abs() - 1.0).abs() });
        }
        Self::new(ratio, vec![orientation], vec![translation])
    }

    pub fn identity(dim: usize) -> Self {
        let mut orthogonal = vec![0.0; dim * dim];
        for i in 0..dim {
            orthogonal[i * dim + i] = 1.0;
        }
        SimilarityMap { ratio: 1.0, orthogonal, translation: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn orthogonal(&self) -> &[f64] {
        &self.orthogonal
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    /// Sign of the orthogonal part in 1-D.
    pub fn orientation(&self) -> Option<f64> {
        (self.dim() == 1).then(|| self.orthogonal[0])
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let k = self.dim();
        assert_eq!(x.len(), k, "point dimension");
        (0..k)
            .map(|i| {
                let row = &self.orthogonal[i * k..(i + 1) * k];
                let ox: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                self.ratio * ox + self.translation[i]
            })
            .collect()
    }

    /// Scalar evaluation for 1-D maps.
    pub fn apply1(&self, x: f64) -> f64 {
        self.ratio * self.orthogonal[0] * x + self.translation[0]
    }

    pub fn inverse1(&self, y: f64) -> f64 {
        (y - self.translation[0]) / (self.ratio * self.orthogonal[0])
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SimilarityMap) -> SimilarityMap {
        let k = self.dim();
        assert_eq!(inner.dim(), k, "composing maps of different dimension");
        let mut orthogonal = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                orthogonal[i * k + j] =
                    (0..k).map(|l| self.orthogonal[i * k + l] * inner.orthogonal[l * k + j]).sum();
            }
        }
        let translation = self.apply(&inner.translation);
        SimilarityMap { ratio: self.ratio * inner.ratio, orthogonal, translation }
    }

    /// Image of an axis-aligned interval under a 1-D map.
    pub fn image1(&self, x: &Interval) -> Interval {
        let a = self.apply1(x.lo);
        let b = self.apply1(x.hi);
        Interval::new(a.min(b), a.max(b))
    }

    /// `sup_{x in box} |self(x) - other(x)|`, Euclidean norm. The difference of
    /// two affine maps is affine and its norm is convex, so the sup sits at a vertex.
    pub fn sup_distance(&self, other: &SimilarityMap, domain: &[Interval]) -> f64 {
        let k = self.dim();
        assert_eq!(domain.len(), k);
        let mut best: f64 = 0.0;
        let mut vertex = vec![0.0; k];
        for mask in 0..(1usize << k) {
            for (i, iv) in domain.iter().enumerate() {
                vertex[i] = if mask >> i & 1 == 1 { iv.hi } else { iv.lo };
            }
            let a = self.apply(&vertex);
            let b = other.apply(&vertex);
            let d = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            best = best.max(d);
        }
        best
    }
}

fn orthogonality_defect(m: &[f64], k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = (0..k).map(|l| m[i * k + l] * m[j * k + l]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}
