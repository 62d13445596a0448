//! One-dimensional probability laws that expose a CDF, a partial first moment
//! and a quantile function. Self-similar measures implement this as well as the
//! simple reference laws below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::Interval;

pub trait Distribution1d {
    /// Smallest interval containing the support.
    fn hull(&self) -> Interval;

    /// `(F(x), G(x))` with `F(x) = mu((-inf, x])` and `G(x) = int_{(-inf, x]} y dmu(y)`.
    /// `F` is within `tol`, `G` within `tol * max|hull|`.
    fn cdf_moment(&self, x: f64, tol: f64) -> Result<(f64, f64)>;

    /// A quantile `Q(u)` (any generalized inverse of `F`), accurate to the resolution
    /// of a cell of mass below `tol`.
    fn quantile(&self, u: f64, tol: f64) -> Result<f64>;

    fn mean(&self) -> f64;

    fn cdf(&self, x: f64, tol: f64) -> Result<f64> {
        Ok(self.cdf_moment(x, tol)?.0)
    }

    /// `int_{-inf}^x F(t) dt = E[(x - Y)^+]`.
    fn integrated_cdf(&self, x: f64, tol: f64) -> Result<f64> {
        let (f, g) = self.cdf_moment(x, tol)?;
        Ok(x * f - g)
    }
}

impl<D: Distribution1d + ?Sized> Distribution1d for &D {
    fn hull(&self) -> Interval {
        (**self).hull()
    }
    fn cdf_moment(&self, x: f64, tol: f64) -> Result<(f64, f64)> {
        (**self).cdf_moment(x, tol)
    }
    fn quantile(&self, u: f64, tol: f64) -> Result<f64> {
        (**self).quantile(u, tol)
    }
    fn mean(&self) -> f64 {
        (**self).mean()
    }
}

/// Lebesgue measure restricted to an interval, normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform(pub Interval);

impl Distribution1d for Uniform {
    fn hull(&self) -> Interval {
        self.0
    }

    fn cdf_moment(&self, x: f64, _tol: f64) -> Result<(f64, f64)> {
        let Interval { lo, hi } = self.0;
        let t = x.clamp(lo, hi);
        let len = hi - lo;
        Ok(((t - lo) / len, (t * t - lo * lo) / (2.0 * len)))
    }

    fn quantile(&self, u: f64, _tol: f64) -> Result<f64> {
        Ok(self.0.lo + u.clamp(0.0, 1.0) * self.0.len())
    }

    fn mean(&self) -> f64 {
        self.0.mid()
    }
}

/// Finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrete {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl Discrete {
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::BadProbabilities("no atoms".into()));
        }
        if pairs.iter().any(|(x, w)| !(*w > 0.0) || !x.is_finite()) {
            return Err(Error::BadProbabilities("atom weights must be positive".into()));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadProbabilities(format!("atom weights sum to {total}")));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(Discrete { atoms, weights })
    }

    pub fn point(x: f64) -> Self {
        Discrete { atoms: vec![x], weights: vec![1.0] }
    }

    /// `(1/m) sum_{i=1}^m delta_{i/m}`.
    pub fn right_lattice(m: usize) -> Self {
        Discrete { atoms: (1..=m).map(|i| i as f64 / m as f64).collect(), weights: vec![1.0 / m as f64; m] }
    }

    /// `(1/m) sum_{i=1}^m delta_{(2i-1)/(2m)}`.
    pub fn midpoint_lattice(m: usize) -> Self {
        Discrete {
            atoms: (1..=m).map(|i| (2 * i - 1) as f64 / (2 * m) as f64).collect(),
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Distribution1d for Discrete {
    fn hull(&self) -> Interval {
        Interval::new(self.atoms[0], *self.atoms.last().unwrap())
    }

    fn cdf_moment(&self, x: f64, _tol: f64) -> Result<(f64, f64)> {
        let k = self.atoms.partition_point(|a| *a <= x);
        let f = self.weights[..k].iter().sum();
        let g = self.atoms[..k].iter().zip(&self.weights).map(|(a, w)| a * w).sum();
        Ok((f, g))
    }

    fn quantile(&self, u: f64, _tol: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return Ok(*a);
            }
        }
        Ok(*self.atoms.last().unwrap())
    }

    fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }
}

/// Push-forward of `inner` under `x -> x + shift`.
#[derive(Debug, Clone)]
pub struct Shifted<D> {
    pub inner: D,
    pub shift: f64,
}

impl<D: Distribution1d> Distribution1d for Shifted<D> {
    fn hull(&self) -> Interval {
        let h = self.inner.hull();
        Interval::new(h.lo + self.shift, h.hi + self.shift)
    }

    fn cdf_moment(&self, x: f64, tol: f64) -> Result<(f64, f64)> {
        let (f, g) = self.inner.cdf_moment(x - self.shift, tol)?;
        Ok((f, g + self.shift * f))
    }

    fn quantile(&self, u: f64, tol: f64) -> Result<f64> {
        Ok(self.inner.quantile(u, tol)? + self.shift)
    }

    fn mean(&self) -> f64 {
        self.inner.mean() + self.shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_moments() {
        let u = Uniform(Interval::unit());
        assert_eq!(u.cdf_moment(0.5, 0.0).unwrap(), (0.5, 0.125));
        assert_eq!(u.integrated_cdf(1.0, 0.0).unwrap(), 0.5);
        assert_eq!(u.quantile(0.25, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn discrete_cdf_is_right_continuous() {
        let d = Discrete::right_lattice(4);
        assert_eq!(d.cdf(0.25, 0.0).unwrap(), 0.25);
        assert_eq!(d.cdf(0.2499, 0.0).unwrap(), 0.0);
        assert_eq!(d.quantile(0.3, 0.0).unwrap(), 0.5);
        assert!((d.mean() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn shifted_moment() {
        let s = Shifted { inner: Uniform(Interval::unit()), shift: 2.0 };
        let (f, g) = s.cdf_moment(3.0, 0.0).unwrap();
        assert_eq!(f, 1.0);
        assert!((g - 2.5).abs() < 1e-15);
    }
}
