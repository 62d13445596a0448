//! Similarity maps, finite and infinite weighted families, and word algebra.

mod file;
mod map;
mod model;
mod word;

pub use file::{GeometricParams, MapSpec, ModelFile, ModelKind, Scalar};
pub use map::{Interval, SimilarityMap};
pub use model::{
    make_finite_ifs, make_geometric_family, Family, FiniteFamily, GeometricFamily, IfsModel, PairGap,
    SeparationReport, SeriesValue, TailCertificate,
};
pub use word::Word;

/// Standard models used across tests, benches and the CLI.
pub mod presets {
    use super::*;

    /// Middle-thirds Cantor system with equal weights.
    pub fn cantor() -> IfsModel {
        make_finite_ifs(
            vec![
                SimilarityMap::line(1.0 / 3.0, 1.0, 0.0).unwrap(),
                SimilarityMap::line(1.0 / 3.0, 1.0, 2.0 / 3.0).unwrap(),
            ],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    /// Two halves of `[0, 1]`; the invariant measure is Lebesgue measure.
    pub fn dyadic_lebesgue() -> IfsModel {
        make_finite_ifs(
            vec![SimilarityMap::line(0.5, 1.0, 0.0).unwrap(), SimilarityMap::line(0.5, 1.0, 0.5).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    /// `p_j = 2^{-j}`, `s_j = 3^{-j}`.
    pub fn geometric_half_third() -> IfsModel {
        make_geometric_family(0.5, 1.0 / 3.0, 1.0).unwrap()
    }

    /// Equal-ratio system on `[0, 1]` with `m` maps of ratio `r`, evenly spaced.
    pub fn uniform_system(m: usize, r: f64, probs: Vec<f64>) -> IfsModel {
        let gap = if m > 1 { (1.0 - m as f64 * r) / (m as f64 - 1.0) } else { 0.0 };
        let maps = (0..m).map(|i| SimilarityMap::line(r, 1.0, i as f64 * (r + gap)).unwrap()).collect();
        make_finite_ifs(maps, probs).unwrap()
    }
}
