//! Subcommand implementations. Each returns the process exit code and
//! writes its human-readable report to `log`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use minimax_adapt::dpverify::{check_bellman_decrease, scalar_riccati_iterates, value_iteration_scalar, BellmanReport};
use minimax_adapt::linalg::{from_rows, lambda_max, max_abs, to_rows};
use minimax_adapt::output::to_json_string;
use minimax_adapt::riccati::{hinf_riccati, GameSpec, RiccatiOptions};
use minimax_adapt::simulation::{empirical_gain, simulate_batch, simulate_known_model, DisturbanceSpec, Trajectory};
use minimax_adapt::synthesis::{
    gamma_bisect, synth_certificate, verify_certificate, Certificate, SynthOptions, VerifyReport,
};
use minimax_adapt::Error;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{double_integrator, Config, DpcheckSettings, Problem};
use crate::plot::{line_plot, Series};
use crate::{CliError, EXIT_OK, EXIT_TRUNCATED, EXIT_VIOLATION};

/// Slack accepted by `verify` and the Bellman sample check.
pub const VERIFY_TOL: f64 = 1e-6;

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub cert: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
}

type CmdResult = Result<u8, CliError>;

fn load_problem(opts: &Options) -> Result<Problem, CliError> {
    let path = opts.config.as_ref().ok_or_else(|| CliError::Input("--config is required".into()))?;
    Config::load(path)?.validate()
}

fn load_certificate(path: &Path) -> Result<Certificate<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(Certificate::from_json(&text)?)
}

fn out_dir(opts: &Options, problem: Option<&Problem>, fallback: &str) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| problem.and_then(|p| p.config.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn json<S: Serialize>(value: &S) -> Result<String, CliError> {
    to_json_string(value).map_err(|e| CliError::Io(e.to_string()))
}

fn spec_at(problem: &Problem, gamma: f64) -> Result<GameSpec<f64>, CliError> {
    Ok(GameSpec::new(problem.q.clone(), problem.r.clone(), gamma)?)
}

/// Certificate from `--cert`, or synthesized from the config.
fn certificate_for(problem: &Problem, opts: &Options, log: &mut dyn Write) -> Result<Certificate<f64>, CliError> {
    let cert = match &opts.cert {
        Some(path) => load_certificate(path)?,
        None => {
            let cert = synthesize(problem)?;
            writeln!(log, "synthesized certificate at gamma = {}", cert.gamma.value())?;
            cert
        }
    };
    cert.check_dims(&problem.models)?;
    Ok(cert)
}

fn synthesize(problem: &Problem) -> Result<Certificate<f64>, CliError> {
    let opts = SynthOptions::default();
    match (&problem.config.gamma, &problem.config.gamma_range) {
        (Some(g), _) => Ok(synth_certificate(&problem.models, &spec_at(problem, *g)?, &opts)?),
        (None, Some(range)) => {
            Ok(gamma_bisect(&problem.models, &problem.q, &problem.r, range.lo, range.hi, range.steps, &opts)?
                .certificate)
        }
        (None, None) => Err(CliError::Input("one of gamma or gamma_range is required".into())),
    }
}

#[derive(Serialize)]
struct TripleRow {
    i: usize,
    j: usize,
    k: usize,
    slack: f64,
    dominated_by: (usize, usize),
}

#[derive(Serialize)]
struct ConeRow {
    i: usize,
    j: usize,
    lambda_min: f64,
    gamma_sq_minus_lambda_max: f64,
}

#[derive(Serialize)]
struct VerifySummary {
    gamma: f64,
    feasible: bool,
    margin: f64,
    worst_triple: (usize, usize, usize),
    triples: Vec<TripleRow>,
    cones: Vec<ConeRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bellman_max_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bellman_samples: Option<usize>,
}

fn verify_summary(gamma: f64, report: &VerifyReport<f64>, bellman: Option<&BellmanReport<f64>>) -> VerifySummary {
    VerifySummary {
        gamma,
        feasible: report.feasible,
        margin: report.margin,
        worst_triple: report.worst_triple,
        triples: report
            .triples
            .iter()
            .map(|t| TripleRow {
                i: t.triple.0,
                j: t.triple.1,
                k: t.triple.2,
                slack: t.slack,
                dominated_by: t.dominated_by,
            })
            .collect(),
        cones: report
            .cones
            .iter()
            .map(|c| ConeRow { i: c.pair.0, j: c.pair.1, lambda_min: c.lower, gamma_sq_minus_lambda_max: c.upper })
            .collect(),
        bellman_max_violation: bellman.map(|b| b.max_violation),
        bellman_samples: bellman.map(|b| b.samples),
    }
}

fn print_verify(log: &mut dyn Write, report: &VerifyReport<f64>) -> std::io::Result<()> {
    writeln!(log, "feasible: {}", report.feasible)?;
    writeln!(log, "margin: {:.6e}", report.margin)?;
    for t in &report.triples {
        let (i, j, k) = t.triple;
        writeln!(log, "  F({i},{j},{k}) <= P({},{}): slack {:.6e}", t.dominated_by.0, t.dominated_by.1, t.slack)?;
    }
    for c in &report.cones {
        writeln!(
            log,
            "  P({},{}): lambda_min {:.6e}, gamma^2 - lambda_max {:.6e}",
            c.pair.0, c.pair.1, c.lower, c.upper
        )?;
    }
    let (i, j, k) = report.worst_triple;
    writeln!(log, "worst triple: ({i},{j},{k})")
}

/// `synth`: certificate at `gamma`, or the smallest feasible level found by
/// bisection over `gamma_range`.
pub fn cmd_synth(opts: &Options, log: &mut dyn Write) -> CmdResult {
    let problem = load_problem(opts)?;
    let synth = SynthOptions::default();
    let cert = match (&problem.config.gamma, &problem.config.gamma_range) {
        (Some(g), _) => match synth_certificate(&problem.models, &spec_at(&problem, *g)?, &synth) {
            Ok(c) => c,
            Err(e @ (Error::InfeasibleAtGamma { .. } | Error::GammaTooSmall { .. } | Error::NoConvergence { .. })) => {
                writeln!(log, "{e}")?;
                return Ok(EXIT_VIOLATION);
            }
            Err(e) => return Err(e.into()),
        },
        (None, Some(range)) => {
            match gamma_bisect(&problem.models, &problem.q, &problem.r, range.lo, range.hi, range.steps, &synth) {
                Ok(b) => {
                    writeln!(log, "bisection: feasible at gamma = {}", b.gamma)?;
                    if let Some(below) = b.infeasible_below {
                        writeln!(log, "bisection: infeasible at gamma = {below}")?;
                    }
                    b.certificate
                }
                Err(e @ Error::InfeasibleAtGamma { .. }) => {
                    writeln!(log, "{e}")?;
                    return Ok(EXIT_VIOLATION);
                }
                Err(e) => return Err(e.into()),
            }
        }
        (None, None) => unreachable!("validated config has a gamma"),
    };
    let gamma = cert.gamma.value();
    let report = verify_certificate(&problem.models, &spec_at(&problem, gamma)?, &cert, VERIFY_TOL)?;
    writeln!(log, "gamma: {gamma}")?;
    print_verify(log, &report)?;
    let dir = out_dir(opts, Some(&problem), "out");
    let path = write_file(&dir, "certificate.json", cert.to_json().as_bytes())?;
    write_file(&dir, "synth_report.json", json(&verify_summary(gamma, &report, None))?.as_bytes())?;
    writeln!(log, "wrote {}", path.display())?;
    Ok(if report.feasible { EXIT_OK } else { EXIT_VIOLATION })
}

fn dp_settings(problem: &Problem) -> DpcheckSettings {
    problem.config.dpcheck.clone().unwrap_or_default()
}

/// `verify`: matrix inequalities plus the sampled Bellman decrease.
pub fn cmd_verify(opts: &Options, log: &mut dyn Write) -> CmdResult {
    let problem = load_problem(opts)?;
    let path = opts.cert.as_ref().ok_or_else(|| CliError::Input("--cert is required".into()))?;
    let cert = load_certificate(path)?;
    cert.check_dims(&problem.models)?;
    let spec = spec_at(&problem, cert.gamma.value())?;
    let report = verify_certificate(&problem.models, &spec, &cert, VERIFY_TOL)?;
    writeln!(log, "gamma: {}", cert.gamma.value())?;
    print_verify(log, &report)?;
    let dp = dp_settings(&problem);
    let bellman = if report.feasible {
        let b = check_bellman_decrease(&cert, &problem.models, &spec, dp.samples, opts.seed.unwrap_or(dp.seed))?;
        writeln!(log, "bellman max_violation: {:.6e} over {} samples", b.max_violation, b.samples)?;
        Some(b)
    } else {
        None
    };
    if let Some(dir) = opts.out_dir.as_ref().or(problem.config.out_dir.as_ref()) {
        write_file(
            dir,
            "verify_report.json",
            json(&verify_summary(cert.gamma.value(), &report, bellman.as_ref()))?.as_bytes(),
        )?;
    }
    let ok = report.feasible && bellman.is_some_and(|b| b.max_violation <= VERIFY_TOL);
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: usize,
    pub truncated: bool,
    pub cum_payoff: f64,
    /// `x0^T P_ij x0` for the maximizing pair.
    pub payoff_bound: f64,
    /// Largest `cum_cost - payoff_bound` over the run.
    pub payoff_excess: f64,
    pub cum_regulated: f64,
    pub cum_disturbance: f64,
    pub empirical_gain: Option<f64>,
    pub switch_times: Vec<usize>,
    pub final_model: usize,
    pub baseline_cum_payoff: Option<f64>,
}

#[derive(Serialize)]
pub struct SimulationSummary {
    pub gamma: f64,
    pub truncated_any: bool,
    pub runs: Vec<RunSummary>,
}

fn threads_from_env() -> Option<usize> {
    std::env::var("MINIMAX_ADAPT_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

fn series<'a>(
    traj: &Trajectory<f64>,
    label: &'a str,
    color: &'a str,
    markers: bool,
    pick: impl Fn(&minimax_adapt::simulation::StepRecord<f64>) -> f64,
) -> Series<'a> {
    Series { label, color, dashed: false, markers, points: traj.steps.iter().map(|s| (s.t as f64, pick(s))).collect() }
}

fn plots(traj: &Trajectory<f64>, baseline: Option<&Trajectory<f64>>) -> (String, String) {
    let mut ys = vec![series(traj, "minimax adaptive", "#1f4fd1", true, |s| s.x[0])];
    let mut us = vec![series(traj, "minimax adaptive", "#1f4fd1", true, |s| s.u[0])];
    if let Some(b) = baseline {
        ys.push(series(b, "known model", "#d12b1f", false, |s| s.x[0]));
        us.push(series(b, "known model", "#d12b1f", false, |s| s.u[0]));
    }
    (line_plot("Output", "t", "y = x_1", &ys), line_plot("Input", "t", "u_1", &us))
}

fn csv_bytes(traj: &Trajectory<f64>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    Ok(buf)
}

/// `simulate`: one closed-loop run per seed with CSV, SVG and a summary.
pub fn cmd_simulate(opts: &Options, log: &mut dyn Write) -> CmdResult {
    let problem = load_problem(opts)?;
    let sim =
        problem.config.simulation.clone().ok_or_else(|| CliError::Input("config has no simulation section".into()))?;
    let configs = sim.to_configs(problem.models.n(), opts.seed, opts.horizon)?;
    let cert = certificate_for(&problem, opts, log)?;
    let gamma = cert.gamma.value();
    let spec = spec_at(&problem, gamma)?;
    let sim_cfgs: Vec<_> = configs.iter().map(|(_, c)| c.clone()).collect();
    let runs = simulate_batch(&problem.models, &cert, &spec, &sim_cfgs, threads_from_env())?;

    let gains: Option<Vec<DMatrix<f64>>> = if sim.baseline {
        problem
            .models
            .models()
            .iter()
            .map(|m| hinf_riccati(&m.a, &m.b, &spec, &RiccatiOptions::default()).map(|s| s.k))
            .collect::<Result<_, _>>()
            .map_err(|e| writeln!(log, "baseline skipped: {e}"))
            .ok()
    } else {
        None
    };

    let dir = out_dir(opts, Some(&problem), "out");
    let mut summaries = Vec::new();
    for ((seed, cfg), traj) in configs.iter().zip(&runs) {
        let baseline = match (&gains, &cfg.disturbance) {
            (Some(k), d) if !matches!(d, DisturbanceSpec::Adversarial) => {
                Some(simulate_known_model(&problem.models, k, &spec, cfg)?)
            }
            _ => None,
        };
        write_file(&dir, &format!("trajectory_seed{seed}.csv"), &csv_bytes(traj)?)?;
        if let Some(b) = &baseline {
            write_file(&dir, &format!("baseline_seed{seed}.csv"), &csv_bytes(b)?)?;
        }
        let (out_svg, in_svg) = plots(traj, baseline.as_ref());
        write_file(&dir, &format!("output_seed{seed}.svg"), out_svg.as_bytes())?;
        write_file(&dir, &format!("input_seed{seed}.svg"), in_svg.as_bytes())?;
        let bound = cert.initial_bound(&cfg.x0);
        let excess = traj.steps.iter().map(|s| s.cum_cost - bound).fold(f64::NEG_INFINITY, f64::max);
        let gain = empirical_gain(traj).ok();
        writeln!(
            log,
            "seed {seed}: {} steps, payoff {:.6e} (bound {:.6e}), gain {}, switches {:?}{}",
            traj.len(),
            traj.cum_payoff,
            bound,
            gain.map_or("n/a".to_string(), |g| format!("{g:.4}")),
            traj.switch_times(),
            if traj.truncated { ", truncated" } else { "" }
        )?;
        summaries.push(RunSummary {
            seed: *seed,
            steps: traj.len(),
            truncated: traj.truncated,
            cum_payoff: traj.cum_payoff,
            payoff_bound: bound,
            payoff_excess: excess,
            cum_regulated: traj.cum_regulated,
            cum_disturbance: traj.cum_disturbance,
            empirical_gain: gain,
            switch_times: traj.switch_times(),
            final_model: traj.final_controller.k,
            baseline_cum_payoff: baseline.as_ref().map(|b| b.cum_payoff),
        });
    }
    let truncated_any = summaries.iter().any(|s| s.truncated);
    let summary = SimulationSummary { gamma, truncated_any, runs: summaries };
    write_file(&dir, "summary.json", json(&summary)?.as_bytes())?;
    Ok(if truncated_any { EXIT_TRUNCATED } else { EXIT_OK })
}

#[derive(Serialize)]
struct DpcheckSummary {
    gamma: f64,
    bellman_max_violation: f64,
    bellman_samples: usize,
    bellman_worst_x: Vec<f64>,
    bellman_worst_z: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value_iteration: Option<ViSummary>,
}

#[derive(Serialize)]
struct ViSummary {
    k_max: usize,
    grid_tol: Vec<f64>,
    monotonicity_slack: Vec<f64>,
    upper_bound_slack: Vec<f64>,
    monotone: bool,
    below_upper_bound: bool,
    /// Single model only: `max |V_k(x) - p x^2|` on the last grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    riccati_gap: Option<f64>,
}

/// `dpcheck`: sampled Bellman decrease and, for scalar model sets, gridded
/// value iteration.
pub fn cmd_dpcheck(opts: &Options, log: &mut dyn Write) -> CmdResult {
    let problem = load_problem(opts)?;
    let dp = dp_settings(&problem);
    let cert = certificate_for(&problem, opts, log)?;
    let gamma = cert.gamma.value();
    let spec = spec_at(&problem, gamma)?;
    let seed = opts.seed.unwrap_or(dp.seed);
    let bellman = check_bellman_decrease(&cert, &problem.models, &spec, dp.samples, seed)?;
    writeln!(log, "bellman max_violation: {:.6e} over {} samples", bellman.max_violation, bellman.samples)?;
    let mut ok = bellman.max_violation <= VERIFY_TOL;

    let scalar = problem.models.n() == 1 && problem.models.m() == 1 && problem.models.len() <= 2;
    let dir = out_dir(opts, Some(&problem), "out");
    let mut vi_summary = None;
    if scalar {
        let grid = dp.grid.clone().unwrap_or_default().to_config();
        let vi = value_iteration_scalar(&problem.models, &spec, &grid)?;
        let mono = vi.monotonicity_slack();
        let upper = vi.upper_bound_slack(&cert);
        let monotone = mono.iter().all(|&s| s >= 0.0);
        let below = upper.iter().all(|&s| s >= 0.0);
        let tol_final = *vi.grid_tol.last().unwrap();
        writeln!(log, "value iteration: {} updates, final grid_tol {:.4e}", grid.k_max, tol_final)?;
        writeln!(log, "monotone within grid_tol: {monotone}")?;
        writeln!(log, "below value_upper within grid_tol: {below}")?;
        let riccati_gap = if problem.models.len() == 1 {
            let m = problem.models.get(0);
            let p = hinf_riccati(&m.a, &m.b, &spec, &RiccatiOptions::default())?.p[(0, 0)];
            let last = vi.grids.last().unwrap();
            let gap = last.xs.iter().enumerate().map(|(ix, &x)| (last.at(ix, 0) - p * x * x).abs()).fold(0.0, f64::max);
            let finite = scalar_riccati_iterates(m.a[(0, 0)], m.b[(0, 0)], &spec, grid.k_max)?;
            writeln!(
                log,
                "riccati p = {p:.6}, finite-horizon p_k = {:.6}, max |V_k - p x^2| = {gap:.4e}",
                finite.last().unwrap()
            )?;
            Some(gap)
        } else {
            None
        };
        let mut csv = Vec::new();
        vi.write_csv(&mut csv)?;
        write_file(&dir, "value_iteration.csv", &csv)?;
        ok &= monotone && below;
        vi_summary = Some(ViSummary {
            k_max: grid.k_max,
            grid_tol: vi.grid_tol.clone(),
            monotonicity_slack: mono,
            upper_bound_slack: upper,
            monotone,
            below_upper_bound: below,
            riccati_gap,
        });
    } else {
        writeln!(log, "value iteration skipped: needs n = m = 1 and at most two models")?;
    }
    let summary = DpcheckSummary {
        gamma,
        bellman_max_violation: bellman.max_violation,
        bellman_samples: bellman.samples,
        bellman_worst_x: bellman.worst_point.x.iter().copied().collect(),
        bellman_worst_z: bellman.worst_point.z.clone(),
        value_iteration: vi_summary,
    };
    write_file(&dir, "dpcheck_report.json", json(&summary)?.as_bytes())?;
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

/// `P`, `T`, `K` as printed for the double-integrator example.
pub fn printed_example() -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let p = from_rows(&[vec![20.61, -11.09, 11.09], vec![-11.09, 7.83, -6.83], vec![11.09, -6.83, 7.83]]).unwrap();
    let t = from_rows(&[vec![155.0, -84.4, 84.4], vec![-84.4, 89.0, -87.5], vec![84.4, -87.5, 89.0]]).unwrap();
    let k = from_rows(&[vec![1.786, -1.288, 1.288]]).unwrap();
    (p, t, k)
}

#[derive(Serialize)]
struct ExampleSummary {
    gamma: f64,
    margin: f64,
    bellman_max_violation: f64,
    sqrt_lambda_max_printed_t: f64,
    sqrt_lambda_max_t: f64,
    p: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    p_relative_difference: f64,
    k_relative_difference: f64,
    t_relative_difference: f64,
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b)
}

/// `example-double-integrator`: synthesis, verification and the two
/// simulation scenarios (no disturbance; white noise with a sign change at
/// t = 10) for the double integrator with unknown input sign.
pub fn cmd_example(opts: &Options, log: &mut dyn Write) -> CmdResult {
    let dir = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from("example-double-integrator"));
    let config = double_integrator();
    let problem = config.clone().validate()?;
    let spec = spec_at(&problem, 19.0)?;
    let cert = synth_certificate(&problem.models, &spec, &SynthOptions::default())?;
    let report = verify_certificate(&problem.models, &spec, &cert, VERIFY_TOL)?;
    let bellman = check_bellman_decrease(&cert, &problem.models, &spec, 10_000, opts.seed.unwrap_or(0))?;
    let (pp, tp, kp) = printed_example();
    let summary = ExampleSummary {
        gamma: 19.0,
        margin: report.margin,
        bellman_max_violation: bellman.max_violation,
        sqrt_lambda_max_printed_t: lambda_max(&tp).sqrt(),
        sqrt_lambda_max_t: lambda_max(&cert.p[0][1]).sqrt(),
        p: to_rows(&cert.p[0][0]),
        t: to_rows(&cert.p[0][1]),
        k: to_rows(&cert.k[0]),
        p_relative_difference: rel(&cert.p[0][0], &pp),
        k_relative_difference: rel(&cert.k[0], &kp),
        t_relative_difference: rel(&cert.p[0][1], &tp),
    };
    writeln!(log, "gamma = 19, verified: {}, margin {:.3e}", report.feasible, report.margin)?;
    writeln!(log, "bellman max_violation {:.3e}", bellman.max_violation)?;
    writeln!(log, "P =\n{}K =\n{}T =\n{}", cert.p[0][0], cert.k[0], cert.p[0][1])?;
    writeln!(
        log,
        "relative difference to printed values: P {:.2e}, K {:.2e}, T {:.2e}",
        summary.p_relative_difference, summary.k_relative_difference, summary.t_relative_difference
    )?;
    writeln!(
        log,
        "sqrt(lambda_max(T)): printed {:.4}, synthesized {:.4}",
        summary.sqrt_lambda_max_printed_t, summary.sqrt_lambda_max_t
    )?;

    write_file(&dir, "config.json", json(&config)?.as_bytes())?;
    let cert_path = write_file(&dir, "certificate.json", cert.to_json().as_bytes())?;
    write_file(&dir, "example_summary.json", json(&summary)?.as_bytes())?;

    let mut worst = EXIT_OK;
    for (name, cfg) in example_scenarios() {
        let path = write_file(&dir, &format!("{name}.json"), json(&cfg)?.as_bytes())?;
        let sub = Options {
            config: Some(path),
            cert: Some(cert_path.clone()),
            out_dir: Some(dir.join(name)),
            seed: opts.seed,
            horizon: opts.horizon,
        };
        writeln!(log, "scenario {name}:")?;
        worst = worst.max(cmd_simulate(&sub, log)?);
    }
    Ok(if report.feasible && bellman.max_violation <= VERIFY_TOL { worst } else { EXIT_VIOLATION })
}

/// No disturbance from `x0 = e_1`, and white noise with the input sign
/// flipped at `t = 10`.
pub fn example_scenarios() -> Vec<(&'static str, Config)> {
    use crate::config::{DisturbanceEntry, EventEntry};
    let quiet = double_integrator();
    let mut noisy = double_integrator();
    if let Some(sim) = noisy.simulation.as_mut() {
        sim.disturbance = DisturbanceEntry::White { sigma: 0.1 };
        sim.events = vec![EventEntry { time: 10, model: 1 }];
        sim.horizon = 60;
        sim.seeds = vec![1];
    }
    vec![("no_disturbance", quiet), ("white_noise_sign_flip", noisy)]
}
