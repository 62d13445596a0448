//! Finite maximal antichains over a finite alphabet and the codebooks they induce.
//!
//! The mass-threshold antichain for `eps` is
//! `{ w : p_{parent(w)} >= eps > p_w }`: expand every word whose mass is at
//! least `eps`, stop at the first descendant strictly below it.

use std::collections::{HashSet, VecDeque};
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifs::{IfsModel, Word};
use crate::rng;

/// Refuse to materialize antichains larger than this.
pub const MAX_ANTICHAIN: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antichain {
    words: Vec<Word>,
    alphabet_size: usize,
}

impl Antichain {
    /// Wraps a word set as-is (sorted lexicographically); use [`verify_antichain`] to check it.
    pub fn new(mut words: Vec<Word>, alphabet_size: usize) -> Self {
        words.sort();
        Antichain { words, alphabet_size }
    }

    pub fn root(alphabet_size: usize) -> Self {
        Antichain { words: vec![Word::empty()], alphabet_size }
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn max_len(&self) -> usize {
        self.words.iter().map(Word::len).max().unwrap_or(0)
    }

    /// `p_w` for each word, in order.
    pub fn masses(&self, probs: &[f64]) -> Vec<f64> {
        self.words.iter().map(|w| word_value(w, probs)).collect()
    }

    /// JSON list of integer arrays.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.words).expect("words serialize")
    }

    pub fn from_json(text: &str, alphabet_size: usize) -> Result<Self> {
        let words: Vec<Word> = serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        Ok(Antichain::new(words, alphabet_size))
    }
}

/// Product of `values[letter - 1]` along the word.
pub fn word_value(w: &Word, values: &[f64]) -> f64 {
    w.letters().iter().map(|&l| values[l as usize - 1]).product()
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::BadProbabilities("need a nonempty positive vector".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::BadProbabilities(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// The mass-threshold antichain `{ w : p_{w^-} >= eps > p_w }`.
pub fn build_antichain(probs: &[f64], eps: f64) -> Result<Antichain> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::BadEps(eps));
    }
    check_probs(probs)?;
    let p_max = probs.iter().cloned().fold(0.0, f64::max);
    if p_max >= 1.0 {
        return Err(Error::NonTerminating("a letter carries all the mass".into()));
    }
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(Word::empty(), 1.0f64)]);
    while let Some((w, p)) = queue.pop_front() {
        if p < eps {
            out.push(w);
            if out.len() > MAX_ANTICHAIN {
                return Err(Error::NonTerminating(format!("more than {MAX_ANTICHAIN} words")));
            }
            continue;
        }
        if queue.len() > MAX_ANTICHAIN {
            return Err(Error::NonTerminating(format!("eps = {eps:e} needs more than {MAX_ANTICHAIN} words")));
        }
        for (i, q) in probs.iter().enumerate() {
            queue.push_back((w.child(i as u32 + 1), p * q));
        }
    }
    Ok(Antichain::new(out, probs.len()))
}

/// `eps_n = 1 / (n p_min)` and its antichain; requires `n > 1/p_min^2`.
pub fn antichain_for_n(ifs: &IfsModel, n: usize) -> Result<(f64, Antichain)> {
    let size = ifs
        .size()
        .ok_or_else(|| Error::BadParameter("antichains are built over a finite (truncated) alphabet".into()))?;
    let probs = ifs.probs_prefix(size);
    antichain_for_n_probs(&probs, n)
}

pub fn antichain_for_n_probs(probs: &[f64], n: usize) -> Result<(f64, Antichain)> {
    check_probs(probs)?;
    let p_min = probs.iter().cloned().fold(1.0, f64::min);
    let bound = 1.0 / (p_min * p_min);
    if !(n as f64 > bound) {
        return Err(Error::NTooSmall { n, bound });
    }
    let eps = 1.0 / (n as f64 * p_min);
    Ok((eps, build_antichain(probs, eps)?))
}

/// The largest mass-threshold antichain with at most `n` words, found by bisection on `eps`.
///
/// Every word of the `eps` antichain has mass in `[eps p_min, eps)`, so its size lies in
/// `(1/eps, 1/(eps p_min)]`; the search runs over that bracket.
pub fn antichain_at_most(probs: &[f64], n: usize) -> Result<(f64, Antichain)> {
    check_probs(probs)?;
    if n == 0 {
        return Err(Error::BadParameter("n must be positive".into()));
    }
    if probs.len() > n || probs.len() == 1 {
        return Ok((1.0, Antichain::root(probs.len())));
    }
    let p_min = probs.iter().cloned().fold(1.0, f64::min);
    let mut hi = (1.0 / (n as f64 * p_min)).min(1.0);
    let mut best = build_antichain(probs, hi)?;
    let mut lo = 1.0 / n as f64;
    for _ in 0..60 {
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let ac = build_antichain(probs, mid)?;
        if ac.len() <= n {
            hi = mid;
            best = ac;
        } else {
            lo = mid;
        }
    }
    Ok((hi, best))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntichainReport {
    pub prefix_free: bool,
    /// `(u, w)` with `u` a proper prefix of `w`.
    pub prefix_conflicts: Vec<(Word, Word)>,
    /// Every internal node has all of its children accounted for.
    pub structurally_maximal: bool,
    pub mass: f64,
    pub mass_ok: bool,
    pub trials: usize,
    pub trial_failures: usize,
    pub pass: bool,
}

/// Exhaustive prefix-freeness, exact structural maximality, total mass within `1e-10`,
/// and `trials` random sequences each hitting exactly one word.
pub fn verify_antichain(probs: &[f64], ac: &Antichain, trials: usize, seed: u64) -> AntichainReport {
    let words = ac.words();
    let mut conflicts = Vec::new();
    for pair in words.windows(2) {
        if pair[0].is_prefix_of(&pair[1]) {
            conflicts.push((pair[0].clone(), pair[1].clone()));
        }
    }
    let set: HashSet<&[u32]> = words.iter().map(Word::letters).collect();
    let mut internal: HashSet<&[u32]> = HashSet::new();
    for w in words {
        for k in 0..w.len() {
            internal.insert(&w.letters()[..k]);
        }
    }
    let alphabet = ac.alphabet_size() as u32;
    let structurally_maximal = !words.is_empty()
        && internal.iter().all(|node| {
            (1..=alphabet).all(|l| {
                let mut child = node.to_vec();
                child.push(l);
                set.contains(child.as_slice()) || internal.contains(child.as_slice())
            })
        });
    let mass: f64 = ac.masses(probs).iter().sum();
    let mass_ok = (mass - 1.0).abs() <= 1e-10;
    let depth = ac.max_len();
    let mut failures = 0;
    for t in 0..trials {
        let mut r = rng::stream(seed, t as u64);
        let seq: Vec<u32> = (0..depth).map(|_| r.gen_range(1..=alphabet)).collect();
        let hits = (0..=depth).filter(|&k| set.contains(&seq[..k])).count();
        if hits != 1 {
            failures += 1;
        }
    }
    let prefix_free = conflicts.is_empty();
    AntichainReport {
        pass: prefix_free && structurally_maximal && mass_ok && failures == 0,
        prefix_free,
        prefix_conflicts: conflicts,
        structurally_maximal,
        mass,
        mass_ok,
        trials,
        trial_failures: failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Antichain { words: Vec<Word>, anchor: Vec<f64> },
    Lloyd { iterations: usize },
    Grid,
    Explicit,
}

/// A finite set of codepoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Codebook {
    points: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl Codebook {
    pub fn new(points: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCodebook);
        }
        Ok(Codebook { points, provenance })
    }

    /// One-dimensional codebook from scalar points.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|x| vec![*x]).collect(), Provenance::Explicit)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn scalars(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    /// CSV with header `index,x[,y...]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        const NAMES: [&str; 3] = ["x", "y", "z"];
        let cols: Vec<String> =
            (0..self.dim()).map(|d| NAMES.get(d).map_or_else(|| format!("x{d}"), |s| s.to_string())).collect();
        writeln!(out, "index,{}", cols.join(","))?;
        for (i, p) in self.points.iter().enumerate() {
            let v: Vec<String> = p.iter().map(f64::to_string).collect();
            writeln!(out, "{i},{}", v.join(","))?;
        }
        Ok(())
    }
}

/// One point `S_w(anchor)` per word.
pub fn codebook_from_antichain(ifs: &IfsModel, ac: &Antichain, anchor: &[f64]) -> Result<Codebook> {
    if anchor.len() != ifs.dim() {
        return Err(Error::DimMismatch(anchor.len(), ifs.dim()));
    }
    if !anchor.iter().zip(ifs.ambient()).all(|(x, iv)| iv.contains(*x)) {
        return Err(Error::BadParameter("anchor lies outside the ambient box".into()));
    }
    let points = ac
        .words()
        .iter()
        .map(|w| Ok(ifs.compose_word(w)?.0.apply(anchor)))
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(points, Provenance::Antichain { words: ac.words().to_vec(), anchor: anchor.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `sum_w q_w log s_w <= (1/D) sum_w q_w log q_w` over the antichain.
pub fn check_entropy_inequality(ac: &Antichain, probs: &[f64], ratios: &[f64], d_tilde: f64) -> EntropyCheck {
    let mut lhs = 0.0;
    let mut ent = 0.0;
    for w in ac.words() {
        let q = word_value(w, probs);
        let s = word_value(w, ratios);
        lhs += q * s.ln();
        ent += q * q.ln();
    }
    let rhs = ent / d_tilde;
    EntropyCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 }
}
