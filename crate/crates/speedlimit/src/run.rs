//! Experiment dispatch. Each run writes TSV plot data and a `summary.json`
//! into the output directory; identical configs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use speedlimit_core::dynamics::{
    propagate_gaussian_ou, simulate_gradient_flow, IntegratorConfig, LangevinSampler,
};
use speedlimit_core::linreg::mp::MarchenkoPastur;
use speedlimit_core::linreg::{
    asymptotic_terms, generate_teacher_problem, tsl_finite, tsl_limits, Limit, MpParams,
};
use speedlimit_core::nalgebra::{DMatrix, DVector};
use speedlimit_core::ntk::{
    displacement_sq, fit_loglog_slope, loss_drop, path_length_gamma_series, predicted_exponents,
};
use speedlimit_core::thermo::{
    entropy_dynamic_gaussian, entropy_equilibrium, ou_gibbs_endpoints, w2_gaussian,
};
use speedlimit_core::{
    build_power_law_spectrum, GaussianMeasure, PowerLawSpec, QuadraticPotential, SpectralModel,
    SpeedLimitReport,
};

use crate::analysis::{analyze_trajectory, report_series, weight_triplet_trace};
use crate::archive::{ingest_trajectory, serialize_trajectory, Manifest};
use crate::config::{
    AnalyzeParams, Experiment, ExperimentConfig, LangevinParams, LinregAsymptoticParams,
    LinregFiniteParams, NtkInefficiencyParams, NtkScalingParams, SweepParameter,
};
use crate::error::{HarnessError, Result};
use crate::plot::{column, emit_plot_data, report_table, PlotTable, ReportRecord};

pub const SUMMARY: &str = "summary.json";

/// Files written by one run, relative to its output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn table(&mut self, name: &str, table: &PlotTable) -> Result<()> {
        emit_plot_data(table, &self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut w = Writer {
        dir: out,
        files: Vec::new(),
    };
    let results = match &cfg.experiment {
        Experiment::NtkScaling(p) => ntk_scaling(p, &mut w)?,
        Experiment::NtkInefficiency(p) => ntk_inefficiency(p, &mut w)?,
        Experiment::LinregFinite(p) => linreg_finite(p, cfg.seed, &mut w)?,
        Experiment::LinregAsymptotic(p) => linreg_asymptotic(p, &mut w)?,
        Experiment::LangevinSim(p) => langevin_sim(p, cfg.seed, &mut w)?,
        Experiment::AnalyzeTrajectory(p) => analyze(p, &mut w)?,
    };
    w.files.push(SUMMARY.to_string());
    let summary = json!({
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "versions": {
            "speedlimit": env!("CARGO_PKG_VERSION"),
            "speedlimit-core": speedlimit_core::VERSION,
        },
        "parameters": serde_json::to_value(&cfg.parameters).unwrap_or(Value::Null),
        "files": w.files,
        "results": results,
    });
    let path = out.join(SUMMARY);
    let mut text = serde_json::to_string_pretty(&summary).expect("summary is plain data");
    text.push('\n');
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(RunOutput {
        dir: out.to_path_buf(),
        files: w.files,
        summary,
    })
}

/// `n` points log-spaced over `[lo, hi]`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn records(reports: &[(f64, SpeedLimitReport)]) -> Vec<ReportRecord> {
    reports.iter().map(|(_, r)| ReportRecord::from(r)).collect()
}

fn power_law(
    alpha: f64,
    delta: f64,
    n_modes: usize,
    first_mode: usize,
    eigen_scale: f64,
    residue_scale: f64,
) -> Result<SpectralModel> {
    Ok(build_power_law_spectrum(&PowerLawSpec {
        eigen_scale,
        eigen_decay: alpha,
        residue_scale,
        residue_decay: delta,
        first_mode,
        last_mode: first_mode + n_modes - 1,
    })?)
}

/// Closed-form NTK reports along `ts`, with `l_γ` from shared quadrature.
fn ntk_series(
    model: &SpectralModel,
    ts: &[f64],
    n_quad: usize,
) -> Result<Vec<(f64, SpeedLimitReport)>> {
    let lengths = path_length_gamma_series(model, ts, n_quad)?;
    ts.par_iter()
        .zip(lengths.par_iter())
        .map(|(&t, &l)| {
            let w2 = displacement_sq(model, t)?;
            let entropy = loss_drop(model, t)?;
            Ok((t, SpeedLimitReport::assemble(Some(t), w2, entropy, Some(l))))
        })
        .collect()
}

fn ntk_scaling(p: &NtkScalingParams, w: &mut Writer) -> Result<Value> {
    let model = power_law(
        p.alpha,
        p.delta,
        p.n_modes,
        p.first_mode,
        p.eigen_scale,
        p.residue_scale,
    )?;
    let ts = log_grid(p.t_min, p.t_max, p.n_points);
    let reports = ntk_series(&model, &ts, p.n_quad)?;
    w.table("reports.tsv", &report_table("ntk scaling sweep", &reports))?;

    let series = |f: fn(&SpeedLimitReport) -> Option<f64>| -> Vec<f64> {
        reports
            .iter()
            .map(|(_, r)| f(r).unwrap_or(f64::NAN))
            .collect()
    };
    let fit = |ys: Vec<f64>| fit_loglog_slope(&ts, &ys).ok();
    let slopes = [
        ("w2_sq", fit(series(|r| Some(r.w2_sq)))),
        ("entropy", fit(series(|r| Some(r.entropy)))),
        ("t_sl", fit(series(|r| r.t_sl))),
        ("l_gamma", fit(series(|r| r.path_length))),
        ("l_geo", fit(series(|r| Some(r.geo_length)))),
    ];
    let mut table = PlotTable::new(
        "log-log slopes against t",
        vec![
            column("w2_sq_slope", "1"),
            column("entropy_slope", "1"),
            column("t_sl_slope", "1"),
            column("l_gamma_slope", "1"),
            column("l_geo_slope", "1"),
        ],
    );
    table.push(slopes.iter().map(|(_, s)| s.unwrap_or(f64::NAN)).collect());
    w.table("slopes.tsv", &table)?;

    let prediction = predicted_exponents(p.alpha, p.delta)?;
    let fitted: serde_json::Map<String, Value> = slopes
        .iter()
        .map(|(k, s)| (k.to_string(), json!(s)))
        .collect();
    Ok(json!({
        "prediction": {
            "kappa": prediction.kappa,
            "regime": format!("{:?}", prediction.regime),
            "w2_sq": prediction.w2_exponent,
            "entropy": prediction.entropy_exponent,
            "t_sl": prediction.tsl_exponent,
            "length": prediction.length_exponent,
        },
        "fitted_slopes": fitted,
        "reports": records(&reports),
    }))
}

fn ntk_inefficiency(p: &NtkInefficiencyParams, w: &mut Writer) -> Result<Value> {
    let model = match (&p.eigenvalues, &p.residues_sq) {
        (Some(l), Some(r)) => SpectralModel::new(
            l.iter().map(|x| x * p.eigen_scale).collect(),
            r.iter().map(|x| x * p.residue_scale).collect(),
        )?,
        _ => power_law(
            p.alpha.unwrap_or_default(),
            p.delta.unwrap_or_default(),
            p.n_modes.unwrap_or_default(),
            1,
            p.eigen_scale,
            p.residue_scale,
        )?,
    };
    let ts = log_grid(p.t_min, p.t_max, p.n_points);
    let reports = ntk_series(&model, &ts, p.n_quad)?;
    let mut table = PlotTable::new(
        "speed limit relative to elapsed time",
        vec![
            column("t", "time"),
            column("t_sl", "time"),
            column("t_sl_over_t", "1"),
            column("l_gamma", "weight"),
            column("l_geo", "weight"),
            column("length_ratio", "1"),
        ],
    );
    for (t, r) in &reports {
        let t_sl = r.t_sl.unwrap_or(f64::NAN);
        table.push(vec![
            *t,
            t_sl,
            t_sl / t,
            r.path_length.unwrap_or(f64::NAN),
            r.geo_length,
            r.length_ratio.unwrap_or(f64::NAN),
        ]);
    }
    w.table("inefficiency.tsv", &table)?;
    let ratios: Vec<f64> = reports
        .iter()
        .filter_map(|(t, r)| r.t_sl.map(|s| s / t))
        .collect();
    Ok(json!({
        "n_modes": model.len(),
        "max_t_sl_over_t": ratios.iter().cloned().fold(f64::NAN, f64::max),
        "min_t_sl_over_t": ratios.iter().cloned().fold(f64::NAN, f64::min),
        "reports": records(&reports),
    }))
}

fn linreg_finite(p: &LinregFiniteParams, seed: u64, w: &mut Writer) -> Result<Value> {
    let n = p.samples();
    let reports: Vec<SpeedLimitReport> = (0..p.n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let problem =
                generate_teacher_problem(p.d, n, p.lambda, p.beta, p.alpha, seed.wrapping_add(i))?;
            Ok(tsl_finite(&problem)?)
        })
        .collect::<Result<_>>()?;

    let mut table = PlotTable::new(
        format!("finite ridge regression, d = {}, n = {n}", p.d),
        vec![
            column("seed", "1"),
            column("w2_sq", "weight^2"),
            column("entropy", "loss/sample"),
            column("t_sl", "time"),
        ],
    );
    for (i, r) in reports.iter().enumerate() {
        table.push(vec![
            seed.wrapping_add(i as u64) as f64,
            r.w2_sq,
            r.entropy,
            r.t_sl.unwrap_or(f64::NAN),
        ]);
    }
    w.table("reports.tsv", &table)?;

    let t_sls: Vec<f64> = reports.iter().filter_map(|r| r.t_sl).collect();
    let mean = t_sls.iter().sum::<f64>() / t_sls.len().max(1) as f64;
    let gamma = p.d as f64 / n as f64;
    let mp = MpParams {
        gamma,
        lambda: p.lambda,
        beta: p.beta,
        alpha: p.alpha,
    };
    let asymptotic = asymptotic_terms(&mp, &MarchenkoPastur::new(gamma)?)?
        .t_sl()
        .ok();
    Ok(json!({
        "d": p.d,
        "n": n,
        "gamma": gamma,
        "mean_t_sl": mean,
        "asymptotic_t_sl": asymptotic,
        "relative_gap": asymptotic.map(|a| (mean - a).abs() / a),
        "reports": reports.iter().map(ReportRecord::from).collect::<Vec<_>>(),
    }))
}

fn linreg_asymptotic(p: &LinregAsymptoticParams, w: &mut Writer) -> Result<Value> {
    let base = MpParams {
        gamma: p.gamma,
        lambda: p.lambda,
        beta: p.beta,
        alpha: p.alpha,
    };
    let (label, points): (&str, Vec<(f64, MpParams)>) = match &p.sweep {
        None => ("gamma", vec![(p.gamma, base)]),
        Some(s) => {
            let label = match s.parameter {
                SweepParameter::Gamma => "gamma",
                SweepParameter::Lambda => "lambda",
                SweepParameter::Beta => "beta",
                SweepParameter::Alpha => "alpha",
            };
            let points = s
                .values
                .iter()
                .map(|&v| {
                    let mut mp = base;
                    match s.parameter {
                        SweepParameter::Gamma => mp.gamma = v,
                        SweepParameter::Lambda => mp.lambda = v,
                        SweepParameter::Beta => mp.beta = v,
                        SweepParameter::Alpha => mp.alpha = v,
                    }
                    (v, mp)
                })
                .collect();
            (label, points)
        }
    };
    let rows: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .map(|(v, mp)| {
            let rule = MarchenkoPastur::with_nodes(mp.gamma, p.nodes)?;
            let terms = asymptotic_terms(mp, &rule)?;
            Ok((*v, terms.w2(), terms.entropy(), terms.t_sl()?))
        })
        .collect::<Result<_>>()?;

    let mut table = PlotTable::new(
        format!("asymptotic speed limit against {label}"),
        vec![
            column(label, "1"),
            column("w2_sq", "weight^2"),
            column("entropy", "loss/sample"),
            column("t_sl", "time"),
        ],
    );
    for (v, w2, e, t) in &rows {
        table.push(vec![*v, *w2, *e, *t]);
    }
    w.table("sweep.tsv", &table)?;

    let limits: serde_json::Map<String, Value> = [
        ("beta_inf", Limit::BetaInf),
        ("beta_zero", Limit::BetaZero),
        ("n_inf", Limit::NInf),
        ("d_inf", Limit::DInf),
    ]
    .into_iter()
    .map(|(k, l)| Ok((k.to_string(), json!(tsl_limits(&base, l)?))))
    .collect::<Result<_>>()?;
    Ok(json!({
        "sweep_parameter": label,
        "rows": rows.iter().map(|(v, w2, e, t)| json!({
            "value": v, "w2_sq": w2, "entropy": e, "t_sl": t,
        })).collect::<Vec<_>>(),
        "limits_at_base": limits,
    }))
}

fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

fn langevin_setup(p: &LangevinParams) -> Result<(QuadraticPotential, GaussianMeasure)> {
    let d = p
        .eigenvalues
        .as_ref()
        .map_or_else(|| p.a.as_ref().map_or(0, Vec::len), Vec::len);
    let b =
        p.b.clone()
            .map_or_else(|| DVector::zeros(d), DVector::from_vec);
    let pot = match (&p.eigenvalues, &p.a) {
        (Some(l), _) => QuadraticPotential::diagonal(l, b, p.c)?,
        (None, Some(a)) => QuadraticPotential::new(matrix(a), b, p.c)?,
        (None, None) => unreachable!("validated"),
    };
    let mean = p
        .init_mean
        .clone()
        .map_or_else(|| DVector::from_element(d, 1.0), DVector::from_vec);
    let init = match (&p.init_variance, &p.init_covariance) {
        (_, Some(c)) => GaussianMeasure::new(mean, matrix(c))?,
        (Some(v), None) => GaussianMeasure::isotropic(mean, *v)?,
        (None, None) => unreachable!("validated"),
    };
    Ok((pot, init))
}

fn langevin_sim(p: &LangevinParams, seed: u64, w: &mut Writer) -> Result<Value> {
    let (pot, init) = langevin_setup(p)?;
    let d = pot.dim();
    let ts: Vec<f64> = (1..=p.n_points)
        .map(|k| p.horizon * k as f64 / p.n_points as f64)
        .collect();
    let reports: Vec<(f64, SpeedLimitReport)> = ts
        .par_iter()
        .map(|&t| {
            let law = propagate_gaussian_ou(&pot, &init, p.beta_inv, t)?;
            let w2 = w2_gaussian(&init, &law)?;
            let entropy = entropy_dynamic_gaussian(&pot, &init, p.beta_inv, t, p.n_quad)?.value;
            Ok((t, SpeedLimitReport::assemble(Some(t), w2, entropy, None)))
        })
        .collect::<Result<_>>()?;
    w.table(
        "reports.tsv",
        &report_table("Ornstein-Uhlenbeck speed limit", &reports),
    )?;

    // Monte Carlo check of the terminal law.
    let cfg = IntegratorConfig::langevin(p.dt, p.horizon, p.beta_inv, seed, p.n_realizations);
    let sampler = LangevinSampler::new(&pot, &init, &cfg)?;
    let states: Vec<DVector<f64>> = (0..sampler.n_realizations())
        .into_par_iter()
        .map(|i| sampler.terminal_state(i))
        .collect();
    let m = states.len() as f64;
    let emp_mean = states.iter().fold(DVector::zeros(d), |acc, s| acc + s) / m;
    let emp_var = states
        .iter()
        .fold(DVector::zeros(d), |acc: DVector<f64>, s| {
            acc + (s - &emp_mean).map(|x| x * x)
        })
        / (m - 1.0).max(1.0);
    let exact = propagate_gaussian_ou(&pot, &init, p.beta_inv, p.horizon)?;
    let mut moments = PlotTable::new(
        format!("terminal moments over {} realizations", states.len()),
        vec![
            column("coordinate", "1"),
            column("mean_exact", "weight"),
            column("mean_empirical", "weight"),
            column("var_exact", "weight^2"),
            column("var_empirical", "weight^2"),
        ],
    );
    for i in 0..d {
        moments.push(vec![
            i as f64,
            exact.mean()[i],
            emp_mean[i],
            exact.covariance()[(i, i)],
            emp_var[i],
        ]);
    }
    w.table("moments.tsv", &moments)?;

    // Noiseless counterpart, archived for `analyze`.
    let gf_cfg = IntegratorConfig::gradient_flow(p.dt, p.horizon).with_max_checkpoints(1000);
    let flow = simulate_gradient_flow(&pot, init.mean(), &gf_cfg)?;
    let archive = w.dir.join("gradient_flow");
    serialize_trajectory(&flow, &Manifest::for_trajectory(&flow), &archive)?;
    w.files.push("gradient_flow".to_string());

    let equilibrium = if pot.lambda_min() > 0.0 {
        let g = ou_gibbs_endpoints(&pot, &init, p.beta_inv)?;
        Some(
            entropy_equilibrium(
                g.log_z_final,
                g.log_z_initial,
                g.mean_initial_loss,
                p.beta_inv,
            )?
            .value,
        )
    } else {
        None
    };
    Ok(json!({
        "dimension": d,
        "n_realizations": states.len(),
        "equilibrium_entropy": equilibrium,
        "reports": records(&reports),
    }))
}

fn analyze(p: &AnalyzeParams, w: &mut Writer) -> Result<Value> {
    let (traj, manifest) = ingest_trajectory(&p.archive)?;
    let warm_start = p.warm_start.or(manifest.warm_start);
    let (cold, warm) = analyze_trajectory(&traj, warm_start)?;
    w.table(
        "cold.tsv",
        &report_table("cold start", &report_series(&traj, 0)?),
    )?;
    if let Some(ws) = warm_start {
        if ws + 1 < traj.len() {
            w.table(
                "warm.tsv",
                &report_table(
                    format!("warm start at checkpoint {ws}"),
                    &report_series(&traj, ws)?,
                ),
            )?;
        }
    }
    for (k, triplet) in p.triplets.iter().enumerate() {
        w.table(
            &format!("triplet_{k}.tsv"),
            &weight_triplet_trace(&traj, triplet)?,
        )?;
    }
    Ok(json!({
        "checkpoints": traj.len(),
        "dimension": traj.dim(),
        "time_unit": manifest.time_unit,
        "warm_start": warm_start,
        "cold": ReportRecord::from(&cold),
        "warm": warm.as_ref().map(ReportRecord::from),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Kind;

    #[test]
    fn log_grid_endpoints_are_exact() {
        let g = log_grid(1e2, 1e4, 20);
        assert_eq!((g[0], g[19], g.len()), (1e2, 1e4, 20));
        assert!(g.windows(2).all(|p| p[1] > p[0]));
        assert!((g[1] / g[0] - g[19] / g[18]).abs() < 1e-12);
    }

    #[test]
    fn scaling_run_writes_one_row_per_time() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[parameters]\nalpha = 1\ndelta = 0\nn_modes = 200\nt_min = 1\nt_max = 10\nn_points = 5\nn_quad = 256\n";
        let cfg = ExperimentConfig::parse(text, Some(Kind::NtkScaling)).unwrap();
        let out = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(out.files, ["reports.tsv", "slopes.tsv", "summary.json"]);
        let body = fs::read_to_string(dir.path().join("reports.tsv")).unwrap();
        assert_eq!(body.lines().filter(|l| !l.starts_with('#')).count(), 5);
        assert_eq!(
            body.lines().nth(1).unwrap(),
            "# t\tw2_sq\tentropy\tt_sl\tinefficiency\tl_gamma\tl_geo"
        );
    }

    #[test]
    fn langevin_archive_feeds_analysis() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[parameters]\neigenvalues = [1.0, 2.0, 0.5]\ninit_mean = [1.0, -1.0, 2.0]\ninit_variance = 0.1\nbeta_inv = 0.1\ndt = 0.01\nhorizon = 2.0\nn_realizations = 50\nn_points = 4\nn_quad = 256\n";
        let cfg = ExperimentConfig::parse(text, Some(Kind::LangevinSim)).unwrap();
        run_experiment(&cfg, dir.path()).unwrap();

        let analyze = format!(
            "[parameters]\narchive = {:?}\ntriplets = [[0, 1, 2]]\nwarm_start = 10\n",
            dir.path().join("gradient_flow")
        );
        let cfg = ExperimentConfig::parse(&analyze, Some(Kind::AnalyzeTrajectory)).unwrap();
        let out = run_experiment(&cfg, &dir.path().join("analysis")).unwrap();
        let cold = &out.summary["results"]["cold"];
        let ineff = cold["inefficiency"].as_f64().unwrap();
        assert!(ineff >= 1.0 - 10.0 * 0.01 * 2.0, "{ineff}");
        assert!(out.files.contains(&"triplet_0.tsv".to_string()));
    }
}
