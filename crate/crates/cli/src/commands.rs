//! One function per pipeline. Each writes CSV and JSON under the output directory;
//! every JSON file wraps its result together with the resolved configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use qdim_core::antichain::{antichain_for_n_probs, build_antichain, codebook_from_antichain};
use qdim_core::dimension::{
    analytic_dimension, discontinuity_demo, estimate_dimension, stability_experiment, t_sequence, Schedule,
    StabilityOptions,
};
use qdim_core::metrics::{continuity_gap, rho1, rho_r, ContinuityReport};
use qdim_core::quantizer::{error_curve, gme_exact, measure_id, truncation_for};
use qdim_core::{IfsModel, SelfSimilarMeasure};

use crate::config::{ExperimentConfig, ScheduleKind};
use crate::error::CliError;

/// A validated configuration with its model loaded.
pub struct Run {
    /// The configuration with every model reference replaced by the model itself.
    pub config: ExperimentConfig,
    pub model: IfsModel,
    /// Directory that relative model paths inside the configuration refer to.
    pub base: PathBuf,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'static str,
    config: &'a ExperimentConfig,
    result: T,
}

impl Run {
    fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.config.out)
            .map_err(|e| CliError::io(format!("creating {}", self.config.out.display()), e))?;
        Ok(self.config.out.join(name))
    }

    fn write_json<T: Serialize>(&self, command: &'static str, name: &str, result: T) -> Result<(), CliError> {
        let path = self.out_path(name)?;
        let env = Envelope { command, config: &self.config, result };
        let mut text = serde_json::to_string_pretty(&env).expect("reports serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn write_csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.out_path(name)?;
        let ctx = || format!("writing {}", path.display());
        let file = File::create(&path).map_err(|e| CliError::io(ctx(), e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(ctx(), e))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn measure(&self) -> SelfSimilarMeasure {
        SelfSimilarMeasure::new(self.model.clone())
    }
}

#[derive(Serialize)]
struct DimResult {
    measure_id: String,
    value: f64,
    error: f64,
    lower: f64,
    upper: f64,
    analytic: qdim_core::dimension::AnalyticDimension,
    t_sequence: Vec<(usize, f64)>,
}

/// Analytic dimension and the truncation sequence `t_N`.
pub fn cmd_dim(run: &Run) -> Result<(), CliError> {
    let ad = analytic_dimension(&run.model, run.config.tol.min(1e-12));
    let ts = t_sequence(&run.model, &run.config.dim.truncations).map_err(|e| CliError::core("t_N sequence", e))?;
    run.write_csv("t_sequence.csv", |w| {
        writeln!(w, "n,t_n")?;
        ts.iter().try_for_each(|(n, t)| writeln!(w, "{n},{t}"))
    })?;
    let result = DimResult {
        measure_id: measure_id(&run.model),
        value: ad.value,
        error: ad.error,
        lower: ad.lower(),
        upper: ad.upper(),
        analytic: ad,
        t_sequence: ts,
    };
    run.write_json("dim", "dim.json", &result)?;
    println!("{}", ad.value);
    Ok(())
}

/// Error curve over the configured sizes and the regression estimate of the dimension.
pub fn cmd_estimate(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config.estimate;
    let mu = run.measure();
    let method = cfg.method(run.config.tol, run.config.seed);
    info!("error curve over {} sizes, {}", cfg.ns.len(), method.tag());
    let curve = error_curve(&mu, &cfg.ns, &cfg.strategy.to_core(), method)
        .map_err(|e| CliError::core("error curve", e))?;
    // the curve is worth keeping even when the regression below fails
    run.write_csv("curve.csv", |w| curve.write_csv(w))?;
    let estimate = estimate_dimension(&curve, cfg.window.to_core(&cfg.ns))
        .map_err(|e| CliError::core("dimension estimate", e))?;
    let analytic = analytic_dimension(&run.model, 1e-12);
    #[derive(Serialize)]
    struct EstimateResult<'a> {
        estimate: &'a qdim_core::dimension::DimensionEstimate,
        analytic: f64,
        curve: &'a qdim_core::quantizer::ErrorCurve,
    }
    run.write_json("estimate", "estimate.json", EstimateResult { estimate: &estimate, analytic: analytic.value, curve: &curve })?;
    println!("{}", estimate.d_hat);
    Ok(())
}

/// Mass-threshold antichain for the configured `n` or `eps`, its codebook and error bracket.
pub fn cmd_antichain(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config.antichain;
    let k = truncation_for(&run.model);
    let probs = run.model.probs_prefix(k);
    let total: f64 = probs.iter().sum();
    // infinite families are cut at a fixed tail mass and renormalized
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let (eps, ac) = match (cfg.n, cfg.eps) {
        (Some(n), _) => antichain_for_n_probs(&probs, n),
        (None, Some(eps)) => build_antichain(&probs, eps).map(|ac| (eps, ac)),
        (None, None) => unreachable!("validated"),
    }
    .map_err(|e| CliError::core("building the antichain", e))?;
    let mu = run.measure();
    let anchor = cfg.anchor.to_core().resolve(&mu).map_err(|e| CliError::core("anchor", e))?;
    let cb = codebook_from_antichain(&run.model, &ac, &anchor).map_err(|e| CliError::core("codebook", e))?;
    let bracket = gme_exact(&mu, &cb, run.config.tol).map_err(|e| CliError::core("evaluating the codebook", e))?;
    let masses = ac.masses(&probs);
    run.write_csv("codebook.csv", |w| cb.write_csv(w))?;
    #[derive(Serialize)]
    struct AntichainResult<'a> {
        truncation: usize,
        eps: f64,
        card: usize,
        max_len: usize,
        mass_total: f64,
        anchor: &'a [f64],
        words: Vec<String>,
        masses: &'a [f64],
        points: &'a [Vec<f64>],
        e_hat: qdim_core::quantizer::ErrorBracket,
    }
    let result = AntichainResult {
        truncation: k,
        eps,
        card: ac.len(),
        max_len: ac.max_len(),
        mass_total: masses.iter().sum(),
        anchor: &anchor,
        words: ac.words().iter().map(|w| w.to_string()).collect(),
        masses: &masses,
        points: cb.points(),
        e_hat: bracket,
    };
    run.write_json("antichain", "antichain.json", &result)?;
    println!("{} words, eps = {eps}, e_hat in [{}, {}]", ac.len(), bracket.lower, bracket.upper);
    Ok(())
}

/// `ρ_1` / `ρ_r` against a second model and, for infinite families, the continuity table.
pub fn cmd_metrics(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config.metrics;
    let tol = run.config.tol;
    if cfg.against.is_none() && run.model.is_finite() {
        return Err(CliError::Config(
            "metrics needs `metrics.against` (or --against) or an infinite model for the continuity table".into(),
        ));
    }
    let mut pair = None;
    if let Some(src) = &cfg.against {
        let (_, other) = src.resolve(&run.base)?;
        let (a, b) = (run.measure(), SelfSimilarMeasure::new(other));
        let r1 = rho1(&a, &b, tol).map_err(|e| CliError::core("rho_1", e))?;
        let rr = rho_r(&a, &b, cfg.r, tol).map_err(|e| CliError::core("rho_r", e))?;
        run.write_csv("rho.csv", |w| {
            writeln!(w, "metric,r,value,tol,optimal")?;
            writeln!(w, "rho_1,1,{},{},{}", r1.value, r1.tol, r1.optimal)?;
            writeln!(w, "rho_r,{},{},{},{}", rr.r, rr.value, rr.tol, rr.optimal)
        })?;
        println!("rho_1 = {} (± {:e}), rho_{} = {} (± {:e})", r1.value, r1.tol, rr.r, rr.value, rr.tol);
        pair = Some((r1, rr));
    }
    let mut continuity: Vec<ContinuityReport> = Vec::new();
    if !run.model.is_finite() {
        let cases: Vec<(usize, usize)> =
            cfg.truncations.iter().flat_map(|&t| cfg.ns.iter().map(move |&n| (t, n))).collect();
        info!("continuity table over {} cases", cases.len());
        continuity = cases
            .par_iter()
            .map(|&(t, n)| {
                continuity_gap(&run.model, t, n, tol, run.config.seed)
                    .map_err(|e| CliError::core(format!("continuity at N = {t}, n = {n}"), e))
            })
            .collect::<Result<_, _>>()?;
        run.write_csv("continuity.csv", |w| {
            writeln!(w, "truncation,n,e_truncated_lo,e_truncated_hi,e_full_lo,e_full_hi,lhs,rhs,rhs_bound,tol,holds,converged")?;
            continuity.iter().try_for_each(|c| {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    c.truncation,
                    c.n,
                    c.e_truncated.0,
                    c.e_truncated.1,
                    c.e_full.0,
                    c.e_full.1,
                    c.lhs,
                    c.rhs,
                    c.rhs_bound,
                    c.tol,
                    c.holds,
                    c.converged
                )
            })
        })?;
        let violations = continuity.iter().filter(|c| !c.holds).count();
        if violations > 0 {
            warn!("{violations} continuity cases exceed rho_1 plus tolerances");
        }
        println!("continuity: {} cases, {violations} violations", continuity.len());
    }
    #[derive(Serialize)]
    struct MetricsResult {
        rho1: Option<qdim_core::metrics::MetricResult>,
        rho_r: Option<qdim_core::metrics::MetricResult>,
        continuity: Vec<ContinuityReport>,
    }
    let (r1, rr) = pair.map_or((None, None), |(a, b)| (Some(a), Some(b)));
    run.write_json("metrics", "metrics.json", MetricsResult { rho1: r1, rho_r: rr, continuity })
}

/// Stability table along a schedule, then the lattice discontinuity demo.
pub fn cmd_stability(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config.stability;
    let schedule = match cfg.schedule {
        ScheduleKind::GeometricWeight => Schedule::geometric_weight(&run.model, &cfg.thetas),
        ScheduleKind::EqualHead => Schedule::equal_head(&run.model, &cfg.ks),
    }
    .map_err(|e| CliError::core("building the schedule", e))?;
    let opts = StabilityOptions {
        truncations: cfg.truncations.clone(),
        floor_fraction: cfg.floor_fraction,
        norm_letters: cfg.norm_letters,
        rho1_tol: cfg.rho1.then_some(run.config.tol),
    };
    let report =
        stability_experiment(&run.model, &schedule, &opts).map_err(|e| CliError::core("stability experiment", e))?;
    run.write_csv("stability.csv", |w| report.write_csv(w))?;
    run.write_json("stability", "stability.json", &report)?;
    if report.hypothesis_violated {
        let flagged: Vec<String> =
            report.rows.iter().filter(|r| !r.violations.is_empty()).map(|r| r.theta.to_string()).collect();
        warn!("schedule `{}` breaks the lower-bound hypotheses at theta = {}", report.schedule, flagged.join(", "));
        println!("{}: hypothesis violated on {} of {} rows", report.schedule, flagged.len(), report.rows.len());
    } else {
        let last = report.rows.last().map_or(0.0, |r| r.delta_d);
        println!("{}: monotone = {}, final |dD| = {last:e}", report.schedule, report.monotone);
    }
    if !cfg.lattice_ms.is_empty() {
        let demo =
            discontinuity_demo(&cfg.lattice_ms, run.config.tol).map_err(|e| CliError::core("discontinuity demo", e))?;
        run.write_csv("lattice.csv", |w| {
            writeln!(w, "m,n,e_hat,d,rho1_right,rho1_midpoint,rho1_tol")?;
            demo.rows.iter().try_for_each(|r| {
                // e_hat = -inf is written as such; JSON carries it as null
                let e = r.e_hat.map_or("-inf".to_string(), |v| v.to_string());
                writeln!(w, "{},{},{e},{},{},{},{}", r.m, r.n, r.d, r.rho1_right, r.rho1_midpoint, r.rho1_tol)
            })
        })?;
        run.write_csv("lebesgue_curve.csv", |w| demo.lebesgue_curve.write_csv(w))?;
        run.write_json("stability", "discontinuity.json", &demo)?;
        println!("lattices: rho_1 -> 0 while D = 0; D_hat(Lebesgue) = {}", demo.lebesgue.d_hat);
    }
    Ok(())
}

/// Directory against which relative model paths in a config file are read.
pub fn config_base(config_path: Option<&Path>) -> PathBuf {
    config_path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}
