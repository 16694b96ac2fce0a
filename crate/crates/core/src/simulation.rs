//! Closed-loop simulation of `x_{t+1} = A x_t + B u_t + w_t` under the
//! adaptive law, with zero, white, adversarial or explicit disturbances.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::controller::{value_upper, ControllerState};
use crate::linalg;
use crate::output::fmt17;
use crate::quadform::GammaForm;
use crate::riccati::GameSpec;
use crate::synthesis::{Certificate, ModelSet};
use crate::{Error, Real, Result};

/// States with norm above this stop the run and set [`Trajectory::truncated`].
pub const OVERFLOW_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec<T: Real> {
    Zero,
    /// Zero-mean Gaussian with standard deviation `sigma` per coordinate.
    White {
        sigma: T,
        seed: u64,
    },
    /// Maximizer of the certificate value function, see [`adversarial_disturbance`].
    Adversarial,
    /// One vector per step; must cover the horizon.
    Explicit(Vec<DVector<T>>),
}

/// Switches the true model to `model` from step `time` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub time: usize,
    pub model: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<T: Real> {
    pub true_model: usize,
    pub x0: DVector<T>,
    pub horizon: usize,
    pub disturbance: DisturbanceSpec<T>,
    pub events: Vec<ScenarioEvent>,
}

/// One simulated step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T: Real> {
    pub t: usize,
    pub x: DVector<T>,
    pub u: DVector<T>,
    pub w: DVector<T>,
    /// Active controller model.
    pub k: usize,
    /// Model generating `x_{t+1}`.
    pub true_model: usize,
    /// Residual energies before the step.
    pub z: Vec<T>,
    /// `|x|^2_Q + |u|^2_R - gamma^2 |w|^2`.
    pub stage_cost: T,
    /// Sum of stage costs up to and including this step.
    pub cum_cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub steps: Vec<StepRecord<T>>,
    /// State after the last recorded step.
    pub final_state: DVector<T>,
    /// Controller state after the last recorded step.
    pub final_controller: ControllerState<T>,
    /// `sum |x|^2_Q + |u|^2_R - gamma^2 |w|^2`.
    pub cum_payoff: T,
    /// `sum |x|^2_Q + |u|^2_R`.
    pub cum_regulated: T,
    /// `sum |w|^2`.
    pub cum_disturbance: T,
    /// The run stopped early because the state norm exceeded [`OVERFLOW_LIMIT`].
    pub truncated: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn k_sequence(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.k).collect()
    }

    /// Steps at which the active model changes.
    pub fn switch_times(&self) -> Vec<usize> {
        self.steps.windows(2).filter(|w| w[0].k != w[1].k).map(|w| w[1].t).collect()
    }

    /// Writes `t,x_1..x_n,u_1..u_m,w_1..w_n,k,stage_cost,cum_cost` with
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.final_state.len();
        let m = self.steps.first().map_or(0, |s| s.u.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=n).map(|i| format!("w_{i}")));
        header.extend(["k", "stage_cost", "cum_cost"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.steps {
            let mut row = vec![s.t.to_string()];
            row.extend(s.x.iter().chain(s.u.iter()).chain(s.w.iter()).map(|v| fmt17(v.as_f64())));
            row.push(s.k.to_string());
            row.push(fmt17(s.stage_cost.as_f64()));
            row.push(fmt17(s.cum_cost.as_f64()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Gaussian stream from a ChaCha20 keystream seeded with `seed`; the
/// sequence depends only on the seed.
#[derive(Debug, Clone)]
pub struct WhiteNoise {
    rng: ChaCha20Rng,
    sigma: f64,
}

impl WhiteNoise {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), sigma }
    }

    pub fn sample<T: Real>(&mut self, n: usize) -> DVector<T> {
        DVector::from_iterator(
            n,
            (0..n).map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                T::lit(self.sigma * z)
            }),
        )
    }
}

/// Worst-case disturbance for the current piece of the value function.
///
/// With `(i, j)` the maximizing pair of [`value_upper`] and `y_l = A_l x + B_l u`,
/// the next state is `v* = (I - gamma^-2 P_ij)^-1 (y_i + y_j) / 2` and the
/// returned disturbance is `v* - (A x + B u)` for the true model.
pub fn adversarial_disturbance<T: Real>(
    cert: &Certificate<T>,
    state: &ControllerState<T>,
    models: &ModelSet<T>,
    true_model: usize,
    x: &DVector<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let (_, (i, j)) = value_upper(cert, &state.z, x);
    let yi = models.get(i).predict(x, u);
    let yj = models.get(j).predict(x, u);
    let form = GammaForm::new(&cert.p[i][j], cert.gamma)?;
    let vstar = form.max_pair(&yi, &yj).vstar;
    Ok(vstar - models.get(true_model).predict(x, u))
}

/// `sqrt(sum |x|^2_Q + |u|^2_R) / sqrt(sum |w|^2)`.
pub fn empirical_gain<T: Real>(traj: &Trajectory<T>) -> Result<T> {
    if traj.cum_disturbance <= T::zero() {
        return Err(Error::ZeroDisturbance);
    }
    Ok((traj.cum_regulated / traj.cum_disturbance).sqrt())
}

/// Source of the control input in a simulation run.
enum Policy<'a, T: Real> {
    Adaptive(&'a Certificate<T>),
    /// `u = -K_i x` with `i` the current true model.
    KnownModel(&'a [DMatrix<T>]),
}

fn validate<T: Real>(models: &ModelSet<T>, spec: &GameSpec<T>, cfg: &SimulationConfig<T>) -> Result<()> {
    models.check_spec(spec)?;
    if cfg.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if cfg.x0.len() != models.n() {
        return Err(Error::Dimension(format!("x0 has length {}, expected {}", cfg.x0.len(), models.n())));
    }
    if cfg.true_model >= models.len() || cfg.events.iter().any(|e| e.model >= models.len()) {
        return Err(Error::InvalidInput("model index out of range".into()));
    }
    match &cfg.disturbance {
        DisturbanceSpec::White { sigma, .. } if *sigma < T::zero() => {
            Err(Error::InvalidInput("sigma must be nonnegative".into()))
        }
        DisturbanceSpec::Explicit(seq) if seq.len() < cfg.horizon => Err(Error::InvalidInput(format!(
            "explicit disturbance has {} steps, horizon is {}",
            seq.len(),
            cfg.horizon
        ))),
        DisturbanceSpec::Explicit(seq) if seq.iter().any(|w| w.len() != models.n()) => {
            Err(Error::Dimension("explicit disturbance vectors must have length n".into()))
        }
        _ => Ok(()),
    }
}

fn run<T: Real>(
    models: &ModelSet<T>,
    policy: Policy<'_, T>,
    gamma: T,
    spec: &GameSpec<T>,
    cfg: &SimulationConfig<T>,
) -> Result<Trajectory<T>> {
    validate(models, spec, cfg)?;
    let n = models.n();
    let g2 = spec.gamma.squared();
    let mut noise = match &cfg.disturbance {
        DisturbanceSpec::White { sigma, seed } => Some(WhiteNoise::new(sigma.as_f64(), *seed)),
        _ => None,
    };
    let mut events = cfg.events.clone();
    events.sort_by_key(|e| e.time);
    let mut events = events.into_iter().peekable();

    let mut state = ControllerState::new(models.len());
    let mut true_model = cfg.true_model;
    let mut x = cfg.x0.clone();
    let mut steps = Vec::with_capacity(cfg.horizon);
    let (mut cum, mut regulated, mut energy) = (T::zero(), T::zero(), T::zero());
    let mut truncated = false;
    let limit = T::lit(OVERFLOW_LIMIT);

    for t in 0..cfg.horizon {
        while let Some(e) = events.next_if(|e| e.time <= t) {
            true_model = e.model;
        }
        let u = match policy {
            Policy::Adaptive(cert) => state.control(cert, &x),
            Policy::KnownModel(gains) => -(&gains[true_model] * &x),
        };
        let w = match &cfg.disturbance {
            DisturbanceSpec::Zero => DVector::zeros(n),
            DisturbanceSpec::White { .. } => noise.as_mut().expect("noise stream").sample(n),
            DisturbanceSpec::Explicit(seq) => seq[t].clone(),
            DisturbanceSpec::Adversarial => match policy {
                Policy::Adaptive(cert) => adversarial_disturbance(cert, &state, models, true_model, &x, &u)?,
                Policy::KnownModel(_) => {
                    return Err(Error::InvalidInput("adversarial disturbance needs the adaptive policy".into()))
                }
            },
        };
        let reg = linalg::quad(&spec.q, &x) + linalg::quad(&spec.r, &u);
        let w2 = w.norm_squared();
        let stage = reg - g2 * w2;
        regulated += reg;
        energy += w2;
        cum += stage;
        let x_next = models.get(true_model).predict(&x, &u) + &w;
        let next_state = state.observe(models, gamma, &x, &u, &x_next);
        steps.push(StepRecord {
            t,
            x: std::mem::replace(&mut x, x_next),
            u,
            w,
            k: state.k,
            true_model,
            z: std::mem::take(&mut state.z),
            stage_cost: stage,
            cum_cost: cum,
        });
        state = next_state;
        let norm = x.norm();
        if !(norm <= limit) {
            truncated = true;
            break;
        }
    }
    Ok(Trajectory {
        steps,
        final_state: x,
        final_controller: state,
        cum_payoff: cum,
        cum_regulated: regulated,
        cum_disturbance: energy,
        truncated,
    })
}

/// Runs the adaptive law certified by `cert` in closed loop.
pub fn simulate<T: Real>(
    models: &ModelSet<T>,
    cert: &Certificate<T>,
    spec: &GameSpec<T>,
    cfg: &SimulationConfig<T>,
) -> Result<Trajectory<T>> {
    cert.check_dims(models)?;
    run(models, Policy::Adaptive(cert), cert.gamma.value(), spec, cfg)
}

/// Baseline with the true model known: `u = -K_i x` for the current true
/// model `i`, using the same disturbance specification.
pub fn simulate_known_model<T: Real>(
    models: &ModelSet<T>,
    gains: &[DMatrix<T>],
    spec: &GameSpec<T>,
    cfg: &SimulationConfig<T>,
) -> Result<Trajectory<T>> {
    if gains.len() != models.len() {
        return Err(Error::Dimension("one gain per model required".into()));
    }
    run(models, Policy::KnownModel(gains), spec.gamma.value(), spec, cfg)
}

/// Runs independent simulations in parallel on at most `threads` threads
/// (all available when `None`). Results keep the order of `configs`.
pub fn simulate_batch<T: Real>(
    models: &ModelSet<T>,
    cert: &Certificate<T>,
    spec: &GameSpec<T>,
    configs: &[SimulationConfig<T>],
    threads: Option<usize>,
) -> Result<Vec<Trajectory<T>>> {
    let job = || configs.par_iter().map(|cfg| simulate(models, cert, spec, cfg)).collect();
    match threads {
        Some(count) => rayon::ThreadPoolBuilder::new()
            .num_threads(count.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{synth_certificate, SynthOptions};

    fn setup() -> (ModelSet<f64>, GameSpec<f64>, Certificate<f64>) {
        let set = ModelSet::sign_pair(
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
        )
        .unwrap();
        let spec = GameSpec::new(DMatrix::identity(3, 3), DMatrix::identity(1, 1), 19.0).unwrap();
        let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        (set, spec, cert)
    }

    fn cfg(x0: DVector<f64>, horizon: usize, disturbance: DisturbanceSpec<f64>) -> SimulationConfig<f64> {
        SimulationConfig { true_model: 0, x0, horizon, disturbance, events: vec![] }
    }

    #[test]
    fn zero_start_zero_noise_stays_at_rest() {
        let (set, spec, cert) = setup();
        let traj = simulate(&set, &cert, &spec, &cfg(DVector::zeros(3), 20, DisturbanceSpec::Zero)).unwrap();
        assert!(traj.steps.iter().all(|s| s.x.norm() == 0.0 && s.u.norm() == 0.0));
        assert_eq!(traj.cum_payoff, 0.0);
        assert!(matches!(empirical_gain(&traj), Err(Error::ZeroDisturbance)));
    }

    #[test]
    fn plant_equation_holds_for_logged_model() {
        let (set, spec, cert) = setup();
        let mut c = cfg(DVector::from_vec(vec![1.0, 0.0, 0.0]), 30, DisturbanceSpec::White { sigma: 0.1, seed: 3 });
        c.events = vec![ScenarioEvent { time: 10, model: 1 }];
        let traj = simulate(&set, &cert, &spec, &c).unwrap();
        for pair in traj.steps.windows(2) {
            let s = &pair[0];
            let expected = set.get(s.true_model).predict(&s.x, &s.u) + &s.w;
            assert_eq!(expected, pair[1].x);
        }
        assert_eq!(traj.steps[9].true_model, 0);
        assert_eq!(traj.steps[10].true_model, 1);
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let (set, spec, cert) = setup();
        let c = cfg(DVector::from_vec(vec![1.0, 0.0, 0.0]), 50, DisturbanceSpec::White { sigma: 0.3, seed: 42 });
        let a = simulate(&set, &cert, &spec, &c).unwrap();
        let b = simulate(&set, &cert, &spec, &c).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_csv(&mut buf_a).unwrap();
        b.write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn batch_matches_sequential_runs() {
        let (set, spec, cert) = setup();
        let configs: Vec<_> = (0..8)
            .map(|s| cfg(DVector::from_vec(vec![0.5, 0.0, 0.0]), 40, DisturbanceSpec::White { sigma: 0.2, seed: s }))
            .collect();
        let batch = simulate_batch(&set, &cert, &spec, &configs, Some(3)).unwrap();
        for (c, traj) in configs.iter().zip(&batch) {
            assert_eq!(&simulate(&set, &cert, &spec, c).unwrap(), traj);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let (set, spec, cert) = setup();
        let traj = simulate(&set, &cert, &spec, &cfg(DVector::zeros(3), 3, DisturbanceSpec::Zero)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,x_3,u_1,w_1,w_2,w_3,k,stage_cost,cum_cost");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn explicit_disturbance_too_short() {
        let (set, spec, cert) = setup();
        let c = cfg(DVector::zeros(3), 5, DisturbanceSpec::Explicit(vec![DVector::zeros(3); 4]));
        assert!(matches!(simulate(&set, &cert, &spec, &c), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn adversarial_run_is_truncated_not_failed() {
        let (set, spec, cert) = setup();
        let c = cfg(DVector::from_vec(vec![1.0, 0.0, 0.0]), 200, DisturbanceSpec::Adversarial);
        let traj = simulate(&set, &cert, &spec, &c).unwrap();
        assert!(traj.truncated);
        assert!(traj.len() < 200);
    }

    #[test]
    fn adversarial_sign_pair_uses_cross_form_on_a_x() {
        let (set, _spec, cert) = setup();
        let state = ControllerState::new(2);
        let x = DVector::from_vec(vec![1.0, 0.3, -0.2]);
        let u = state.control(&cert, &x);
        let (_, pair) = value_upper(&cert, &state.z, &x);
        assert_eq!(pair, (0, 1));
        let w = adversarial_disturbance(&cert, &state, &set, 0, &x, &u).unwrap();
        let next = set.get(0).predict(&x, &u) + w;
        let t = &cert.p[0][1];
        let m = DMatrix::identity(3, 3) - t / 361.0;
        let expected = m.lu().solve(&(&set.get(0).a * &x)).unwrap();
        assert!((next - expected).norm() < 1e-10);
    }

    #[test]
    fn gain_invariant_to_disturbance_scale() {
        let (set, spec, cert) = setup();
        let mut noise = WhiteNoise::new(1.0, 11);
        let w: Vec<DVector<f64>> = (0..60).map(|_| noise.sample(3)).collect();
        let run = |c: f64| {
            let scaled = w.iter().map(|v| v * c).collect();
            simulate(&set, &cert, &spec, &cfg(DVector::zeros(3), 60, DisturbanceSpec::Explicit(scaled))).unwrap()
        };
        let base = run(1.0);
        for c in [0.01, 3.0, 250.0] {
            let other = run(c);
            assert_eq!(base.k_sequence(), other.k_sequence());
            let (g0, g1) = (empirical_gain(&base).unwrap(), empirical_gain(&other).unwrap());
            assert!((g0 - g1).abs() <= 1e-9 * g0, "{g0} vs {g1}");
        }
    }

    #[test]
    fn adversarial_next_state_maximizes_its_piece() {
        let (set, _spec, cert) = setup();
        let g2 = 361.0;
        let mut state = ControllerState::new(2);
        state.z = vec![0.4, 2.5];
        let x = DVector::from_vec(vec![1.0, -0.3, 0.2]);
        let u = state.control(&cert, &x);
        let (i, j) = value_upper(&cert, &state.z, &x).1;
        let (yi, yj) = (set.get(i).predict(&x, &u), set.get(j).predict(&x, &u));
        let piece = |v: &DVector<f64>| {
            linalg::quad(&cert.p[i][j], v) - 0.5 * g2 * ((&yi - v).norm_squared() + (&yj - v).norm_squared())
        };
        let w = adversarial_disturbance(&cert, &state, &set, 0, &x, &u).unwrap();
        let vstar = set.get(0).predict(&x, &u) + w;
        let best = piece(&vstar);
        let closed = GammaForm::new(&cert.p[i][j], cert.gamma).unwrap().max_pair(&yi, &yj).value;
        assert!((best - closed).abs() <= 1e-9 * closed.abs().max(1.0), "{best} vs {closed}");
        let h = 0.05 * vstar.norm().max(1.0);
        for a in -4..=4 {
            for b in -4..=4 {
                for c in -4..=4 {
                    let v = &vstar + DVector::from_vec(vec![a as f64, b as f64, c as f64]) * (h / 4.0);
                    assert!(piece(&v) <= best + 1e-4);
                }
            }
        }
    }

    #[test]
    fn diagonal_piece_gives_single_model_worst_case() {
        let (set, _spec, cert) = setup();
        let mut state = ControllerState::new(2);
        state.z = vec![0.0, 1e6];
        let x = DVector::from_vec(vec![0.5, -0.2, 0.1]);
        assert_eq!(value_upper(&cert, &state.z, &x).1, (0, 0));
        let u = state.control(&cert, &x);
        let y = set.get(0).predict(&x, &u);
        let w = adversarial_disturbance(&cert, &state, &set, 0, &x, &u).unwrap();
        let single = crate::quadform::max_quad_single(&cert.p[0][0], cert.gamma, &y).unwrap();
        assert!((&y + w - single.vstar).norm() < 1e-12);
    }

    #[test]
    fn undisturbed_run_locks_on_to_true_model() {
        let (set, spec, cert) = setup();
        for true_model in 0..2 {
            let mut c = cfg(DVector::from_vec(vec![1.0, 0.0, 0.0]), 40, DisturbanceSpec::Zero);
            c.true_model = true_model;
            let traj = simulate(&set, &cert, &spec, &c).unwrap();
            let ks = traj.k_sequence();
            let lock = ks.iter().rposition(|&k| k != true_model).map_or(0, |t| t + 1);
            assert!(lock < 5, "true model {true_model}: {ks:?}");
            assert!(traj.final_state.norm() < 1e-6);
            // after lock-in the law is the fixed gain of the true model
            for s in &traj.steps[lock..] {
                assert_eq!(s.u, -(&cert.k[true_model] * &s.x));
            }
        }
    }

    #[test]
    fn f32_single_model_run() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0f32, 1.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0f32, 1.0]);
        let spec = GameSpec::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1), 6.0f32).unwrap();
        let cert = crate::dpverify::riccati_certificate(&a, &b, &spec).unwrap();
        let set = ModelSet::new(vec![crate::synthesis::Model::new(a, b)]).unwrap();
        let c = SimulationConfig {
            true_model: 0,
            x0: DVector::from_vec(vec![1.0f32, 0.0]),
            horizon: 50,
            disturbance: DisturbanceSpec::White { sigma: 0.1, seed: 2 },
            events: vec![],
        };
        let traj = simulate(&set, &cert, &spec, &c).unwrap();
        let z = traj.final_controller.z[0];
        assert!((z - 36.0 * traj.cum_disturbance).abs() <= 1e-4 * z);
        assert!(traj.cum_payoff <= cert.initial_bound(&c.x0) + 1e-3);
    }
}
