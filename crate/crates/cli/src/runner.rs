//! Implementations of the CLI subcommands over the library API.

use crate::config::{ExperimentConfig, TimeFamilyCfg};
use crate::csvio::{fmt17, FitRow, MomentRow, FIT_HEADER, MOMENT_HEADER};
use spde_moments::analysis::{compare_exponents, fit_order_exponent, fit_time_exponent};
use spde_moments::fieldsim::{simulate_do_field, LatticeConfig};
use spde_moments::model::{
    dalang_integral, predicted_exponents, validate, EquationKind, EquationSpec, NoiseSpec,
    SpatialCovariance,
};
use spde_moments::moment_mc::{
    fk_moment_generalized_mc, nth_moment_heat_mc, nth_moment_wave_mc, pair_replica_values,
    MomentEstimate,
};
use spde_moments::oracles::{nth_closed_constant_f_log1, pair_count, volterra_solve};
use spde_moments::specfun::gamma_time_integral;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

/// Domain errors exit with code 1, usage/parse errors with code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

fn domain<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Domain(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    Poisson,
    Fk,
    Oracle,
    Fieldsim,
}

impl MomentMethod {
    pub fn name(&self) -> &'static str {
        match self {
            MomentMethod::Poisson => "poisson",
            MomentMethod::Fk => "fk",
            MomentMethod::Oracle => "oracle",
            MomentMethod::Fieldsim => "fieldsim",
        }
    }
}

pub struct ValidateReport {
    pub lines: Vec<String>,
    pub ok: bool,
}

/// Checks the configuration against the admissibility conditions and the
/// spectral integral, reporting every check by name.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<ValidateReport, CliError> {
    let (eq, noise) = cfg.to_core().map_err(CliError::Domain)?;
    let mut lines = Vec::new();
    let violations = validate(&eq, &noise);
    let mut ok = true;

    let heat_cond = format!(
        "H > a/4 (heat solvability): H = {}, a = {}",
        noise.hurst(),
        noise.a_param()
    );
    let wave_cond = format!(
        "H > (a-2)/2 (wave solvability): H = {}, a = {}",
        noise.hurst(),
        noise.a_param()
    );
    match eq.kind {
        EquationKind::Heat => lines.push(check_line(
            &heat_cond,
            !violations.iter().any(|v| {
                matches!(v, spde_moments::model::Violation::HeatHurstTooSmall { .. })
            }),
        )),
        EquationKind::Wave => lines.push(check_line(
            &wave_cond,
            !violations.iter().any(|v| {
                matches!(v, spde_moments::model::Violation::WaveHurstTooSmall { .. })
            }),
        )),
    }
    lines.push(check_line(
        "H < 1 (comparability across families)",
        !violations
            .iter()
            .any(|v| matches!(v, spde_moments::model::Violation::HurstNotBelowOne { .. })),
    ));
    let dal = dalang_integral(&noise.spatial, eq.d);
    let dal_desc = match dal.value {
        Some(v) => format!(
            "spectral integral int mu(dxi)/(1+|xi|^2) finite (a < min(2,d)): value = {}",
            fmt17(v)
        ),
        None => "spectral integral int mu(dxi)/(1+|xi|^2) finite (a < min(2,d))".to_string(),
    };
    lines.push(check_line(&dal_desc, dal.finite));
    for v in &violations {
        if !matches!(
            v,
            spde_moments::model::Violation::HeatHurstTooSmall { .. }
                | spde_moments::model::Violation::WaveHurstTooSmall { .. }
                | spde_moments::model::Violation::HurstNotBelowOne { .. }
        ) {
            lines.push(check_line(&v.to_string(), false));
        }
    }
    if !violations.is_empty() || !dal.finite {
        ok = false;
    }
    Ok(ValidateReport { lines, ok })
}

fn check_line(name: &str, pass: bool) -> String {
    format!("[{}] {}", if pass { "ok" } else { "violated" }, name)
}

pub struct MomentOutput {
    pub rows: Vec<MomentRow>,
    /// Per-replica traces, one document per (t, order), when requested.
    pub trace_csv: Option<String>,
    /// Field snapshots when requested by the fieldsim method.
    pub dump_csv: Option<String>,
}

impl MomentOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(MOMENT_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_line());
            out.push('\n');
        }
        out
    }

    /// (x y) column pairs for generic plotting tools: one block per order,
    /// t and estimate columns, blocks separated by blank lines.
    pub fn to_dat(&self) -> String {
        let mut orders: Vec<usize> = self.rows.iter().map(|r| r.order).collect();
        orders.sort_unstable();
        orders.dedup();
        let mut out = String::new();
        for order in orders {
            let _ = writeln!(out, "# order {order}: t estimate");
            for row in self.rows.iter().filter(|r| r.order == order) {
                let _ = writeln!(out, "{} {}", fmt17(row.t), fmt17(row.estimate));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the requested estimator over the t x n grid and renders CSV rows.
pub fn cmd_moment(
    cfg: &ExperimentConfig,
    method: MomentMethod,
    trace: bool,
    dump_fields: bool,
) -> Result<MomentOutput, CliError> {
    let (eq, noise) = cfg.to_core().map_err(CliError::Domain)?;
    if cfg.run.t.is_empty() {
        return domain("run.t must list at least one time");
    }
    if cfg.run.n.is_empty() {
        return domain("run.n must list at least one order");
    }
    let hash = cfg.content_hash();
    let mut rows = Vec::new();
    let mut trace_body = if trace { Some(String::new()) } else { None };
    let mut dump_body: Option<String> = None;

    for &t in &cfg.run.t {
        for &order in &cfg.run.n {
            let started = Instant::now();
            let est = run_single(cfg, &eq, &noise, method, t, order, &mut trace_body, dump_fields, &mut dump_body)?;
            let wall_ms = started.elapsed().as_millis() as u64;
            let (a1, a2) = cfg.generalized_params();
            let row = MomentRow {
                method: method.name().to_string(),
                equation: cfg.equation_name().to_string(),
                d: eq.d,
                family: cfg.family_name().to_string(),
                h: noise.hurst(),
                a1,
                a2,
                spatial: cfg.spatial_name().to_string(),
                spatial_param: cfg.spatial_param(),
                t,
                order,
                estimate: est.mean,
                stderr: est.stderr,
                log_estimate: est.log_mean,
                n_rep: est.n_rep,
                quad_steps: cfg.run.quad_steps,
                seed: cfg.run.seed,
                wall_ms,
                config_hash: hash.clone(),
            };
            rows.push(row);
        }
    }
    Ok(MomentOutput { rows, trace_csv: trace_body, dump_csv: dump_body })
}

#[allow(clippy::too_many_arguments)]
fn run_single(
    cfg: &ExperimentConfig,
    eq: &EquationSpec,
    noise: &NoiseSpec,
    method: MomentMethod,
    t: f64,
    order: usize,
    trace_body: &mut Option<String>,
    dump_fields: bool,
    dump_body: &mut Option<String>,
) -> Result<MomentEstimate, CliError> {
    let run = &cfg.run;
    match method {
        MomentMethod::Poisson => {
            if !matches!(cfg.noise.family, TimeFamilyCfg::White | TimeFamilyCfg::Do { .. }) {
                return domain(format!(
                    "the poisson method needs a white-in-time family (white or do); \
                     the {} family has correlated increments - use the fk method",
                    cfg.family_name()
                ));
            }
            if order < 2 {
                return domain("poisson moments need order n >= 2");
            }
            let starts = vec![vec![0.0; eq.d]; order];
            let est = match eq.kind {
                EquationKind::Heat => {
                    nth_moment_heat_mc(eq, noise, t, &starts, run.n_rep, run.seed)
                }
                EquationKind::Wave => {
                    nth_moment_wave_mc(eq, noise, t, &starts, run.n_rep, run.seed)
                }
            }
            .map_err(|e| CliError::Domain(e.to_string()))?;
            if let Some(tb) = trace_body.as_mut() {
                if t > 0.0 {
                    let values = pair_replica_values(eq, noise, t, &starts, run.n_rep, run.seed)
                        .map_err(|e| CliError::Domain(e.to_string()))?;
                    append_trace(tb, t, order, &values);
                }
            }
            Ok(est)
        }
        MomentMethod::Fk => {
            if eq.kind != EquationKind::Heat {
                return domain("the fk method covers the heat equation only");
            }
            let est = fk_moment_generalized_mc(
                noise,
                eq.d,
                order,
                t,
                eq.u0,
                run.n_rep,
                run.quad_steps,
                run.seed,
            )
            .map_err(|e| CliError::Domain(e.to_string()))?;
            if let Some(tb) = trace_body.as_mut() {
                let values = spde_moments::moment_mc::fk_replica_exponential_values(
                    noise,
                    eq.d,
                    order,
                    t,
                    run.n_rep,
                    run.quad_steps,
                    run.seed,
                )
                .map_err(|e| CliError::Domain(e.to_string()))?;
                append_trace(tb, t, order, &values);
            }
            Ok(est)
        }
        MomentMethod::Oracle => oracle_estimate(cfg, eq, noise, t, order),
        MomentMethod::Fieldsim => {
            if eq.kind != EquationKind::Heat || eq.d != 1 {
                return domain("the fieldsim method covers the heat equation in d = 1 only");
            }
            if !matches!(cfg.noise.family, TimeFamilyCfg::White | TimeFamilyCfg::Do { .. }) {
                return domain("the fieldsim method needs the white or do family");
            }
            if !(1..=3).contains(&order) {
                return domain("fieldsim reports moments of order 1..=3 only");
            }
            let lattice = run.lattice.as_ref().ok_or_else(|| {
                CliError::Domain("the fieldsim method needs a run.lattice block".to_string())
            })?;
            let lcfg = LatticeConfig {
                half_width: lattice.half_width,
                n_x: lattice.n_x,
                t_max: t,
                n_t: lattice.n_t,
                hurst: noise.hurst(),
                spatial: noise.spatial,
                u0: eq.u0,
                n_rep: run.n_rep,
                seed: run.seed,
            };
            let moments = if dump_fields {
                let body = dump_body.get_or_insert_with(|| "replica,step,x,u\n".to_string());
                let grid = lcfg.grid();
                let mut sink = |r: usize, s: usize, u: &[f64]| {
                    for (j, &uj) in u.iter().enumerate() {
                        let _ = writeln!(body, "{r},{s},{},{}", fmt17(grid[j]), fmt17(uj));
                    }
                };
                simulate_do_field(&lcfg, Some(&mut sink))
            } else {
                simulate_do_field(&lcfg, None)
            }
            .map_err(|e| CliError::Domain(e.to_string()))?;
            let estimate = moments.spatial_mean(order);
            let stderr = moments.stderr[order - 1].iter().sum::<f64>()
                / moments.stderr[order - 1].len() as f64;
            Ok(MomentEstimate {
                mean: estimate,
                stderr,
                n_rep: run.n_rep,
                seed: run.seed,
                log_mean: estimate.ln(),
                heavy_tail_warning: false,
            })
        }
    }
}

/// Closed-form reference values: renewal family for the heat equation,
/// the Volterra grid for the wave second moment.
fn oracle_estimate(
    cfg: &ExperimentConfig,
    eq: &EquationSpec,
    noise: &NoiseSpec,
    t: f64,
    order: usize,
) -> Result<MomentEstimate, CliError> {
    let a0 = match noise.spatial {
        SpatialCovariance::Bounded {
            a0,
            profile: spde_moments::model::BoundedProfile::Constant,
        } => a0,
        _ => {
            return domain(
                "oracle values exist for the constant bounded covariance only",
            )
        }
    };
    if order < 2 {
        return domain("oracle moments need order n >= 2");
    }
    let exact_log1 = match (eq.kind, &cfg.noise.family) {
        (EquationKind::Heat, TimeFamilyCfg::White | TimeFamilyCfg::Do { .. }) => {
            nth_closed_constant_f_log1(order, a0, noise.hurst(), t)
        }
        (EquationKind::Heat, TimeFamilyCfg::Generalized { a1, a2 }) => {
            // Constant covariance: each of the nu_k pairs contributes the
            // exact double time integral.
            pair_count(order)
                * a0
                * gamma_time_integral(*a1, *a2, t).map_err(|e| CliError::Domain(e.to_string()))?
        }
        (EquationKind::Wave, TimeFamilyCfg::White | TimeFamilyCfg::Do { .. }) => {
            if order != 2 {
                return domain("the wave oracle covers the second moment only");
            }
            if eq.v0 != 0.0 {
                return domain("the wave oracle assumes v0 = 0");
            }
            if t == 0.0 {
                0.0
            } else {
                let grid = volterra_solve(EquationKind::Wave, a0, noise.hurst(), t, 4096)
                    .map_err(|e| CliError::Domain(e.to_string()))?;
                t + grid.last().ln()
            }
        }
        _ => {
            return domain(format!(
                "no oracle for the {} family with the {} equation",
                cfg.family_name(),
                cfg.equation_name()
            ))
        }
    };
    let log_mean = order as f64 * eq.u0.ln() + exact_log1;
    Ok(MomentEstimate {
        mean: log_mean.exp(),
        stderr: 0.0,
        n_rep: cfg.run.n_rep,
        seed: cfg.run.seed,
        log_mean,
        heavy_tail_warning: false,
    })
}

fn append_trace(body: &mut String, t: f64, order: usize, values: &[f64]) {
    if body.is_empty() {
        body.push_str("t,order,replica,value\n");
    }
    for (r, v) in values.iter().enumerate() {
        let _ = writeln!(body, "{},{},{},{}", fmt17(t), order, r, fmt17(*v));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Time,
    Order,
}

pub struct FitOutput {
    pub report: Vec<String>,
    pub csv: String,
    pub all_pass: bool,
}

/// Groups rows by configuration hash and fits growth exponents: in time mode
/// per fixed order against t, in order mode per fixed time against n.
pub fn cmd_fit(
    rows: &[crate::csvio::MomentRow],
    mode: FitMode,
    use_predicted: bool,
    tol: f64,
) -> Result<FitOutput, CliError> {
    if rows.is_empty() {
        return domain("no rows to fit");
    }
    // Rows from the same configuration may carry several methods (e.g. an
    // estimator next to its oracle); fit each method separately.
    let mut groups: BTreeMap<(String, String), Vec<&crate::csvio::MomentRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.config_hash.clone(), row.method.clone()))
            .or_default()
            .push(row);
    }
    let mut report = Vec::new();
    let mut body = String::new();
    let mut all_pass = true;
    for ((hash, method), group) in &groups {
        // A hash names one configuration; mixed metadata under one hash
        // means the file was stitched together from incompatible runs.
        let head = group[0];
        if group.iter().any(|r| {
            r.equation != head.equation
                || r.family != head.family
                || r.d != head.d
                || (r.h - head.h).abs() > 0.0
        }) {
            return domain(format!("mixed configurations under hash {hash}"));
        }
        let mut keys: Vec<f64> = match mode {
            FitMode::Time => group.iter().map(|r| r.order as f64).collect(),
            FitMode::Order => group.iter().map(|r| r.t).collect(),
        };
        keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        keys.dedup();
        for key in keys {
            let samples: Vec<(f64, f64)> = group
                .iter()
                .filter(|r| match mode {
                    FitMode::Time => r.order as f64 == key,
                    FitMode::Order => r.t == key,
                })
                .map(|r| match mode {
                    FitMode::Time => (r.t, r.log_estimate),
                    FitMode::Order => (r.order as f64, r.log_estimate),
                })
                .collect();
            let fit = match mode {
                FitMode::Time => fit_time_exponent(&samples),
                FitMode::Order => fit_order_exponent(&samples),
            }
            .map_err(|e| CliError::Domain(format!("group {hash}: {e}")))?;
            let (predicted_rho, pass) = if use_predicted {
                let predicted = prediction_from_row(head)?;
                let target = match mode {
                    FitMode::Time => predicted.rho_t,
                    FitMode::Order => predicted.rho_n,
                };
                let cmp = compare_exponents(&fit, target, tol);
                if !cmp.pass {
                    all_pass = false;
                }
                (Some(target), Some(cmp.pass))
            } else {
                (None, None)
            };
            let mode_name = match mode {
                FitMode::Time => "time",
                FitMode::Order => "order",
            };
            report.push(format!(
                "{mode_name} fit [{hash}/{method}] key={key}: rho_hat={:.6} c_hat={:.6} r2={:.8} points={}{}",
                fit.rho_hat,
                fit.c_hat,
                fit.r_squared,
                fit.points_used,
                match (predicted_rho, pass) {
                    (Some(p), Some(ok)) =>
                        format!(" predicted={p:.6} -> {}", if ok { "pass" } else { "FAIL" }),
                    _ => String::new(),
                }
            ));
            let row = FitRow {
                mode: mode_name.to_string(),
                config_hash: hash.clone(),
                group_key: key,
                rho_hat: fit.rho_hat,
                c_hat: fit.c_hat,
                r_squared: fit.r_squared,
                points_used: fit.points_used,
                predicted_rho,
                tol: use_predicted.then_some(tol),
                pass,
            };
            body.push_str(&row.to_line());
            body.push('\n');
        }
    }
    Ok(FitOutput { report, csv: format!("{FIT_HEADER}\n{body}"), all_pass })
}

/// Rebuilds the exponent prediction from a row's recorded parameters.
fn prediction_from_row(
    row: &crate::csvio::MomentRow,
) -> Result<spde_moments::model::ExponentPrediction, CliError> {
    let kind = match row.equation.as_str() {
        "heat" => EquationKind::Heat,
        "wave" => EquationKind::Wave,
        other => return domain(format!("unknown equation `{other}` in CSV")),
    };
    let eq = EquationSpec { kind, d: row.d, u0: 1.0, v0: 0.0 };
    let spatial = match row.spatial.as_str() {
        "bounded-constant" | "bounded-gaussian-bump" => SpatialCovariance::Bounded {
            a0: row.spatial_param.unwrap_or(1.0),
            profile: spde_moments::model::BoundedProfile::Constant,
        },
        "riesz" => SpatialCovariance::Riesz {
            alpha: row
                .spatial_param
                .ok_or_else(|| CliError::Domain("riesz row lacks spatial_param".into()))?,
        },
        "space-white" => SpatialCovariance::SpaceWhite,
        other => return domain(format!("unknown spatial kind `{other}` in CSV")),
    };
    let noise = NoiseSpec::new(
        spde_moments::model::TimeFamily::Do { hurst: row.h },
        spatial,
    );
    predicted_exponents(&eq, &noise).map_err(|e| CliError::Domain(e.to_string()))
}

/// Direct special-function evaluations for debugging.
pub enum SpecfunRequest {
    GammaStar { nu: f64, z: f64 },
    Beta { x: f64, y: f64 },
    Upsilon { kind: EquationKind, alpha: f64, hurst: f64, beta: f64, gamma_exp: f64, t: f64 },
    GammaTimeIntegral { a1: f64, a2: f64, t: f64 },
}

pub fn cmd_specfun(req: &SpecfunRequest) -> Result<String, CliError> {
    use spde_moments::specfun;
    let line = match req {
        SpecfunRequest::GammaStar { nu, z } => {
            let s = specfun::incomplete_gamma_star(*nu, *z)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            format!(
                "gamma_star({nu}, {z}) = {} (terms {}, tail <= {})",
                fmt17(s.value),
                s.terms_used,
                fmt17(s.truncation_bound)
            )
        }
        SpecfunRequest::Beta { x, y } => {
            if !(*x > 0.0 && *y > 0.0) {
                return domain("beta needs x > 0 and y > 0");
            }
            format!("beta({x}, {y}) = {}", fmt17(specfun::beta_fn(*x, *y)))
        }
        SpecfunRequest::Upsilon { kind, alpha, hurst, beta, gamma_exp, t } => {
            let v = specfun::upsilon_discounted(*kind, *alpha, *hurst, *beta, *gamma_exp, *t)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            format!("upsilon_discounted = {}", fmt17(v))
        }
        SpecfunRequest::GammaTimeIntegral { a1, a2, t } => {
            let v = gamma_time_integral(*a1, *a2, *t)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            format!("gamma_time_integral({a1}, {a2}, {t}) = {}", fmt17(v))
        }
    };
    Ok(line)
}
