use crate::config::{parse_q, parse_radius, CommandKind, Format, RunConfig};
use chaoslab::contractions::{h_estimate, xi_estimate, ContractionEstimate};
use chaoslab::covmoments::{loglog_fit, moment_constant, MomentConstant, MomentEntry, MomentTable};
use chaoslab::fieldgen::{circulant_sample, make_planewave, DirectionMode, GridField, GridSpec};
use chaoslab::functionals::{exact_variance, sigma_proxy, VarianceTerm};
use chaoslab::limits::{
    ascl_logaverage, clt_experiment, excluded_case, AsclConfig, Carrier, CltConfig, CltResult, ExperimentReport,
    LogAverage, Provenance, SCHEMA_VERSION,
};
use chaoslab::specialfn::{check_conditions, ConditionReport, ModelKind};
use chaoslab::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;

/// What a finished command hands back to `main`.
pub struct Outcome {
    pub summary: String,
    pub warnings: Vec<String>,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsResult {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    pub constant: Option<MomentConstant>,
    pub entries: Vec<MomentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub t: f64,
    pub n: usize,
    pub total: f64,
    pub err: f64,
    pub tail_bound: Option<f64>,
    pub label: Option<String>,
    pub terms: Vec<VarianceTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub n_values: usize,
    pub extents: Vec<usize>,
    pub spacing: f64,
    pub clipped_mass: f64,
    pub carrier: Carrier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub t: f64,
    pub xi: Option<f64>,
    pub argmax: Option<(usize, usize)>,
    pub cap_residual: Option<f64>,
    pub inconclusive: bool,
    pub sigma2: Option<f64>,
    pub estimates: Vec<ContractionEstimate>,
}

pub type Report<R> = ExperimentReport<RunConfig, R>;

fn report<R>(cfg: &RunConfig, results: Vec<R>, warnings: Vec<String>) -> Report<R> {
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        command: cfg.command.unwrap().name().to_string(),
        config: cfg.clone(),
        results,
        warnings,
        provenance: Provenance::now(),
    }
}

fn create(path: &str) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("cannot create {path}: {e}")))
}

/// JSON output is the report itself; CSV output gets the report as a
/// `<out>.manifest.json` sidecar.
fn emit<R: Serialize>(
    cfg: &RunConfig,
    rep: &Report<R>,
    write_csv: impl FnOnce(BufWriter<File>) -> Result<()>,
) -> Result<String> {
    let out = cfg.out();
    match cfg.format() {
        Format::Json => {
            std::fs::write(out, rep.to_json()?)?;
        }
        Format::Csv | Format::Bin => {
            write_csv(create(out)?)?;
            std::fs::write(format!("{out}.manifest.json"), rep.to_json()?)?;
        }
    }
    Ok(out.to_string())
}

fn fmt_list(xs: impl IntoIterator<Item = String>) -> String {
    xs.into_iter().collect::<Vec<_>>().join(" ")
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command.unwrap() {
        CommandKind::Moments => moments(cfg),
        CommandKind::Variance => variance(cfg),
        CommandKind::Field => field(cfg),
        CommandKind::Clt => clt(cfg),
        CommandKind::Ascl => ascl(cfg),
        CommandKind::Contractions => contractions(cfg),
        CommandKind::Conditions => conditions(cfg),
    }
}

fn moments(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let qs = parse_q(cfg.q.as_deref().unwrap())?;
    let radius = parse_radius(cfg.r_max.as_deref().unwrap())?;
    let table = MomentTable::build(&model, &qs, radius, cfg.signed.unwrap())?;
    let mut warnings = Vec::new();
    let positive = table.entries.iter().all(|e| e.value > 0.0);
    let fit = if qs.len() >= 2 && positive {
        let xs: Vec<f64> = table.entries.iter().map(|e| e.q as f64).collect();
        let ys: Vec<f64> = table.entries.iter().map(|e| e.value).collect();
        Some(loglog_fit(&xs, &ys))
    } else {
        if qs.len() >= 2 {
            warnings.push("non-positive moments present; no log-log slope fitted".to_string());
        }
        None
    };
    let constant = (model.kind == ModelKind::Berry && model.d == 2 && table.entries.len() >= 3 && positive)
        .then(|| moment_constant(&table, qs[qs.len() / 2]));
    let result = MomentsResult {
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        residual: fit.map(|f| f.2),
        constant,
        entries: table.entries.clone(),
    };
    let rep = report(cfg, vec![result], warnings.clone());
    let path = emit(cfg, &rep, |w| table.write_csv(w))?;
    let summary = match fit {
        Some((slope, ..)) => format!("slope={slope:.4} file={path}"),
        None => format!("value={:.6e} file={path}", table.entries[0].value),
    };
    Ok(Outcome { summary, warnings, inconclusive: false })
}

fn variance(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let e = cfg.expansion()?;
    let rank = e
        .rank
        .finite()
        .ok_or_else(|| Error::Degenerate("observable has no nonconstant chaos".into()))?;
    let ts = cfg.t.clone().unwrap();
    let rows = ts
        .iter()
        .map(|&t| {
            let domain = cfg.domain(t)?;
            let (b, tail) = match cfg.n {
                Some(n) => (exact_variance(&model, &e, &domain, n)?, None),
                None => {
                    let (b, bound) = sigma_proxy(&model, &e, &domain, rank)?;
                    (b, Some(bound))
                }
            };
            Ok(VarianceRow { t, n: b.n, total: b.total, err: b.err, tail_bound: tail, label: b.label, terms: b.terms })
        })
        .collect::<Result<Vec<_>>>()?;
    let warnings: Vec<String> = rows.iter().filter_map(|r| r.label.clone()).take(1).collect();
    let rep = report(cfg, rows.clone(), warnings.clone());
    let path = emit(cfg, &rep, |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["t", "n", "q", "value", "err"])?;
        for r in &rows {
            for term in &r.terms {
                w.serialize((r.t, r.n, term.q, term.value, term.err))?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let summary = format!(
        "{} file={path}",
        fmt_list(rows.iter().map(|r| format!("sigma2(t={})={:.6e}", r.t, r.total)))
    );
    Ok(Outcome { summary, warnings, inconclusive: false })
}

fn field(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let (h, t) = (cfg.h.unwrap(), cfg.t.as_ref().unwrap()[0]);
    let grid = GridSpec::centered(model.d, h, t)?;
    let carrier = match cfg.carrier.unwrap() {
        Carrier::Auto if model.kind == ModelKind::Berry => Carrier::Planewave,
        Carrier::Auto => Carrier::Circulant,
        c => c,
    };
    let seed = cfg.seed();
    let gf = match carrier {
        Carrier::Planewave => {
            if model.kind != ModelKind::Berry {
                return Err(Error::Config("the plane-wave carrier only synthesizes Berry models".into()));
            }
            let mode = if model.d == 2 { DirectionMode::Deterministic } else { DirectionMode::RandomSphere };
            let diameter = 2.0 * t * (model.d as f64).sqrt();
            let k = cfg.k.unwrap_or_else(|| chaoslab::limits::default_waves(model.d, diameter));
            let basis = make_planewave(model.d, k, mode, seed)?;
            let values = (0..grid.len()).into_par_iter().map(|i| basis.eval(&grid.point(i))).collect();
            GridField { grid, values, seed, model: model.tag(), clipped_mass: 0.0 }
        }
        _ => {
            if cfg.k.is_some() {
                return Err(Error::Config("K (wave count) only applies to the plane-wave carrier".into()));
            }
            circulant_sample(&model, &grid, seed)?
        }
    };
    let summary_row = FieldSummary {
        n_values: gf.values.len(),
        extents: gf.grid.extents.clone(),
        spacing: gf.grid.spacing,
        clipped_mass: gf.clipped_mass,
        carrier,
    };
    let mut warnings = Vec::new();
    if gf.clipped_mass > 0.0 {
        warnings.push(format!("embedding clipped negative eigenvalue mass {:.3e}", gf.clipped_mass));
    }
    let rep = report(cfg, vec![summary_row], warnings.clone());
    let path = emit(cfg, &rep, |w| match cfg.format() {
        Format::Bin => gf.write_binary(w),
        _ => gf.write_csv(w),
    })?;
    Ok(Outcome {
        summary: format!("n_values={} clipped_mass={:.3e} file={path}", gf.values.len(), gf.clipped_mass),
        warnings,
        inconclusive: false,
    })
}

fn clt(cfg: &RunConfig) -> Result<Outcome> {
    let ccfg = CltConfig {
        model: cfg.model_spec()?,
        phi: cfg.phi.clone().unwrap(),
        shape: cfg.shape.unwrap(),
        t_list: cfg.t.clone().unwrap(),
        n_reps: cfg.n_reps.unwrap(),
        seed: cfg.seed(),
        drop_first_chaos: cfg.drop_first_chaos.unwrap(),
        truncation: cfg.n,
        h: cfg.h,
        carrier: cfg.carrier.unwrap(),
        k_waves: cfg.k,
        expansion_digest: None,
    };
    let core = clt_experiment(&ccfg)?;
    let rows: Vec<CltResult> = core.results;
    let rep = report(cfg, rows.clone(), core.warnings.clone());
    let path = emit(cfg, &rep, |w| rep.write_csv(w))?;
    let summary = format!(
        "{} file={path}",
        fmt_list(rows.iter().map(|r| format!("w1(t={})={:.4} ks_p={:.3}", r.t, r.w1, r.ks_p_value)))
    );
    Ok(Outcome { summary, warnings: core.warnings, inconclusive: false })
}

fn ascl(cfg: &RunConfig) -> Result<Outcome> {
    let acfg = AsclConfig {
        model: cfg.model_spec()?,
        phi: cfg.phi.clone().unwrap(),
        shape: cfg.shape.unwrap(),
        horizons: cfg.horizons.clone().unwrap(),
        t1: 1.0,
        ratio: 1.05,
        g_list: chaoslab::limits::TestFunction::DEFAULTS.to_vec(),
        seed: cfg.seed(),
        carrier: cfg.carrier.unwrap(),
        h: cfg.h,
        k_waves: cfg.k,
        drop_first_chaos: cfg.drop_first_chaos.unwrap(),
    };
    let mut warnings = Vec::new();
    let e = cfg.expansion()?;
    if let Some(w) = excluded_case(&acfg.model, &e) {
        warnings.push(w);
    }
    let rows: Vec<LogAverage> = ascl_logaverage(&acfg)?
        .into_iter()
        .map(|mut r| {
            r.t_grid.clear();
            r.weights.clear();
            r
        })
        .collect();
    let rep = report(cfg, rows.clone(), warnings.clone());
    let path = emit(cfg, &rep, |w| rep.write_csv(w))?;
    let worst = rows.iter().map(|r| r.discrepancy.abs()).fold(0.0, f64::max);
    let last_t = rows.iter().map(|r| r.horizon).fold(0.0, f64::max);
    Ok(Outcome {
        summary: format!("max_discrepancy={worst:.4} T_max={last_t} file={path}"),
        warnings,
        inconclusive: false,
    })
}

fn contractions(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let n_samples = cfg.n_samples.unwrap();
    let seed = cfg.seed();
    let mut rows = Vec::new();
    for &t in cfg.t.as_ref().unwrap() {
        let domain = cfg.domain(t)?;
        let row = if cfg.phi.is_some() {
            let e = cfg.expansion()?;
            let xi = xi_estimate(&model, &e, &domain, cfg.m.unwrap(), cfg.k_cap.unwrap(), n_samples, seed)?;
            ContractionRow {
                t,
                xi: Some(xi.value),
                argmax: Some(xi.argmax),
                cap_residual: Some(xi.cap_residual),
                inconclusive: xi.inconclusive,
                sigma2: Some(xi.sigma2),
                estimates: xi.pairs,
            }
        } else {
            let est = h_estimate(&model, cfg.k1.unwrap(), cfg.k2.unwrap(), &domain, n_samples, seed)?;
            ContractionRow {
                t,
                xi: None,
                argmax: None,
                cap_residual: None,
                inconclusive: false,
                sigma2: None,
                estimates: vec![est],
            }
        };
        rows.push(row);
    }
    let mut warnings = Vec::new();
    for r in rows.iter().filter(|r| r.inconclusive) {
        warnings.push(format!(
            "t={}: cap residual {:.3e} dominates xi {:.3e}; raise k_cap",
            r.t,
            r.cap_residual.unwrap_or(f64::NAN),
            r.xi.unwrap_or(f64::NAN)
        ));
    }
    let rep = report(cfg, rows.clone(), warnings.clone());
    let path = emit(cfg, &rep, |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["t", "k1", "k2", "mean", "stderr", "n_samples", "seed"])?;
        for r in &rows {
            for e in &r.estimates {
                w.serialize((r.t, e.k1, e.k2, e.mean, e.stderr, e.n_samples, e.seed))?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let stats = rows.iter().map(|r| match r.xi {
        Some(xi) => format!("xi(t={})={:.4e} cap_residual={:.3e}", r.t, xi, r.cap_residual.unwrap()),
        None => format!("h(t={})={:.6e}±{:.2e}", r.t, r.estimates[0].mean, r.estimates[0].stderr),
    });
    let inconclusive = rows.iter().any(|r| r.inconclusive);
    Ok(Outcome { summary: format!("{} file={path}", fmt_list(stats)), warnings, inconclusive })
}

fn conditions(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let r: ConditionReport = check_conditions(&model)?;
    let rep = report(cfg, vec![r.clone()], Vec::new());
    let path = emit(cfg, &rep, |w| rep.write_csv(w))?;
    let verdict = |b: bool| if b { "pass" } else { "fail" };
    Ok(Outcome {
        summary: format!(
            "cond5 delta={:?} {} cond6 alpha={} {} file={path}",
            r.delta,
            verdict(r.decay_pass),
            r.alpha,
            verdict(r.regularity_pass)
        ),
        warnings: Vec::new(),
        inconclusive: false,
    })
}
