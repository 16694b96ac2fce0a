//! Numerical checks of the dynamic-programming layer: the operator `F_u`
//! applied to the certificate value function, sampled Bellman-decrease
//! checks, and gridded value iteration for scalar plants.
//!
//! Every value function here depends on the data matrix only through the
//! residual energies `z_l`, and shifting all `z_l` by `c` shifts the value by
//! `-c`. Scalar value iteration therefore works on `(x, delta)` with
//! `delta = z_2 - z_1` and `z_1 = 0`.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::controller::{argmin, value_upper};
use crate::linalg;
use crate::output::fmt17;
use crate::quadform::GammaForm;
use crate::riccati::{hinf_riccati, GameSpec, RiccatiOptions};
use crate::synthesis::{Certificate, ModelSet};
use crate::{Error, Real, Result};

/// Argument `(x, z)` of a value function.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePoint<T: Real> {
    pub x: DVector<T>,
    pub z: Vec<T>,
}

impl<T: Real> ValuePoint<T> {
    pub fn new(x: DVector<T>, z: Vec<T>) -> Result<Self> {
        if z.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::InvalidInput("z must be nonnegative".into()));
        }
        Ok(Self { x, z })
    }
}

/// `|x|^2_Q + |u|^2_R + max_{i,j} [max_v |v|^2_{P_ij} - gamma^2 (|y_i - v|^2 + |y_j - v|^2) / 2 - (z_i + z_j) / 2]`
/// with `y_l = A_l x + B_l u`: the operator `F_u` applied to the certificate value.
pub fn apply_fu_vbar<T: Real>(
    cert: &Certificate<T>,
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    point: &ValuePoint<T>,
    u: &DVector<T>,
) -> Result<T> {
    cert.check_dims(models)?;
    if point.z.len() != models.len() || point.x.len() != models.n() || u.len() != models.m() {
        return Err(Error::Dimension("value point or input does not match the model set".into()));
    }
    let half = T::lit(0.5);
    let ys: Vec<_> = models.models().iter().map(|md| md.predict(&point.x, u)).collect();
    let mut best = T::min_value().unwrap();
    for i in 0..models.len() {
        for j in i..models.len() {
            let form = GammaForm::new(&cert.p[i][j], cert.gamma)?;
            let v = form.max_pair(&ys[i], &ys[j]).value - (point.z[i] + point.z[j]) * half;
            best = best.max(v);
        }
    }
    Ok(linalg::quad(&spec.q, &point.x) + linalg::quad(&spec.r, u) + best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellmanReport<T: Real> {
    /// `max F_{-K_k x} Vbar - Vbar` over the samples, `k = argmin z`.
    pub max_violation: T,
    pub worst_point: ValuePoint<T>,
    pub samples: usize,
}

/// Samples `x` uniformly from the unit ball and each `z_l` uniformly from
/// `[0, 2 max lambda_max(P_ij)]`, and evaluates the Bellman decrease at the
/// controller input `u = -K_k x`.
pub fn check_bellman_decrease<T: Real>(
    cert: &Certificate<T>,
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    samples: usize,
    seed: u64,
) -> Result<BellmanReport<T>> {
    cert.check_dims(models)?;
    models.check_spec(spec)?;
    let n = models.n();
    let z_max = cert.p.iter().flatten().map(|p| linalg::lambda_max(p).as_f64()).fold(0.0, f64::max) * 2.0;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: Option<(T, ValuePoint<T>)> = None;
    for _ in 0..samples {
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let radius = rng.random::<f64>().powf(1.0 / n as f64);
        let x = DVector::from_iterator(n, dir.iter().map(|v| T::lit(v / norm * radius)));
        let z: Vec<T> = (0..models.len()).map(|_| T::lit(rng.random::<f64>() * z_max)).collect();
        let point = ValuePoint { x, z };
        let u = -(&cert.k[argmin(&point.z)] * &point.x);
        let gap = apply_fu_vbar(cert, models, spec, &point, &u)? - value_upper(cert, &point.z, &point.x).0;
        if worst.as_ref().is_none_or(|(w, _)| gap > *w) {
            worst = Some((gap, point));
        }
    }
    let (max_violation, worst_point) =
        worst.ok_or_else(|| Error::InvalidInput("at least one sample required".into()))?;
    Ok(BellmanReport { max_violation, worst_point, samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueGridConfig<T> {
    /// x-grid covers `[-x_max, x_max]`.
    pub x_max: T,
    pub nx: usize,
    /// delta-grid covers `[-delta_max, delta_max]`; ignored for one model.
    pub delta_max: T,
    pub ndelta: usize,
    /// Initial u-grid size before refinement.
    pub nu: usize,
    /// Initial v-grid size before refinement.
    pub nv: usize,
    /// Number of Bellman updates.
    pub k_max: usize,
    /// u-grid half width; `3 max_i |K_i| x_max` from the per-model Riccati
    /// gains when `None`.
    pub u_max: Option<T>,
    /// Largest accepted cumulative `grid_tol`.
    pub max_grid_tol: T,
}

impl<T: Real> Default for ValueGridConfig<T> {
    fn default() -> Self {
        Self {
            x_max: T::one(),
            nx: 41,
            delta_max: T::lit(40.0),
            ndelta: 81,
            nu: 25,
            nv: 41,
            k_max: 20,
            u_max: None,
            max_grid_tol: T::lit(f64::INFINITY),
        }
    }
}

/// `V_k` on a uniform `(x, delta)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid<T: Real> {
    pub xs: Vec<T>,
    /// `[0]` for a single model.
    pub deltas: Vec<T>,
    /// Row-major: `values[ix * deltas.len() + id]`.
    pub values: Vec<T>,
    pub k: usize,
}

fn lattice<T: Real>(half_width: T, count: usize) -> Vec<T> {
    if count == 1 {
        return vec![T::zero()];
    }
    let step = half_width * T::lit(2.0) / T::lit((count - 1) as f64);
    (0..count).map(|i| -half_width + step * T::lit(i as f64)).collect()
}

/// Cell index and local coordinate; the coordinate leaves `[0, 1]` outside
/// the lattice, which gives linear extrapolation.
fn locate<T: Real>(grid: &[T], s: T) -> (usize, T) {
    let h = grid[1] - grid[0];
    let pos = (s - grid[0]) / h;
    let cell = pos.floor().max(T::zero()).min(T::lit((grid.len() - 2) as f64));
    let i = cell.to_usize().unwrap_or(0);
    (i, pos - cell)
}

impl<T: Real> ValueGrid<T> {
    pub fn at(&self, ix: usize, id: usize) -> T {
        self.values[ix * self.deltas.len() + id]
    }

    fn x_max(&self) -> T {
        self.xs[self.xs.len() - 1]
    }

    /// Bilinear interpolation, linear extrapolation in delta, and
    /// `V(c x, c^2 delta) = c^2 V(x, delta)` for `|x| > x_max`.
    pub fn eval(&self, x: T, delta: T) -> T {
        let xm = self.x_max();
        if x.abs() > xm {
            let c = x.abs() / xm;
            return c * c * self.eval(xm.copysign(x), delta / (c * c));
        }
        let (ix, tx) = locate(&self.xs, x);
        let nd = self.deltas.len();
        let row = |ix: usize| -> T {
            if nd == 1 {
                return self.values[ix];
            }
            let (id, td) = locate(&self.deltas, delta);
            let base = ix * nd + id;
            self.values[base] * (T::one() - td) + self.values[base + 1] * td
        };
        row(ix) * (T::one() - tx) + row(ix + 1) * tx
    }

    /// `(max |second difference in x| + max |second difference in delta|) / 8`,
    /// the bilinear interpolation error bound for this grid.
    pub fn curvature_tol(&self) -> T {
        let (nx, nd) = (self.xs.len(), self.deltas.len());
        let two = T::lit(2.0);
        let mut dx = T::zero();
        let mut dd = T::zero();
        for ix in 0..nx {
            for id in 0..nd {
                if ix > 0 && ix + 1 < nx {
                    dx = dx.max((self.at(ix - 1, id) - two * self.at(ix, id) + self.at(ix + 1, id)).abs());
                }
                if id > 0 && id + 1 < nd {
                    dd = dd.max((self.at(ix, id - 1) - two * self.at(ix, id) + self.at(ix, id + 1)).abs());
                }
            }
        }
        (dx + dd) / T::lit(8.0)
    }
}

/// Value-iteration output.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration<T: Real> {
    /// `V_0, ..., V_{k_max}`.
    pub grids: Vec<ValueGrid<T>>,
    /// `grid_tol[k]` bounds the accumulated interpolation error in `V_k`.
    pub grid_tol: Vec<T>,
}

impl<T: Real> ValueIteration<T> {
    /// `min over nodes of V_{k+1} - V_k + grid_tol[k+1]` for each `k`; all
    /// nonnegative means monotone up to grid tolerance.
    pub fn monotonicity_slack(&self) -> Vec<T> {
        self.grids
            .windows(2)
            .zip(&self.grid_tol[1..])
            .map(|(w, &tol)| {
                w[1].values.iter().zip(&w[0].values).map(|(&b, &a)| b - a + tol).fold(T::max_value().unwrap(), T::min)
            })
            .collect()
    }

    /// `min over nodes of value_upper + grid_tol[k] - V_k` for each `k`,
    /// with `z = (0, delta)`.
    pub fn upper_bound_slack(&self, cert: &Certificate<T>) -> Vec<T> {
        self.grids
            .iter()
            .zip(&self.grid_tol)
            .map(|(g, &tol)| {
                let mut slack = T::max_value().unwrap();
                for (ix, &x) in g.xs.iter().enumerate() {
                    for (id, &d) in g.deltas.iter().enumerate() {
                        let z = if cert.len() == 1 { vec![T::zero()] } else { vec![T::zero(), d] };
                        let bound = value_upper(cert, &z, &DVector::from_element(1, x)).0;
                        slack = slack.min(bound + tol - g.at(ix, id));
                    }
                }
                slack
            })
            .collect()
    }

    /// Rows `k,x,delta,value` for every grid.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,x,delta,value")?;
        for g in &self.grids {
            for (ix, x) in g.xs.iter().enumerate() {
                for (id, d) in g.deltas.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        g.k,
                        fmt17(x.as_f64()),
                        fmt17(d.as_f64()),
                        fmt17(g.at(ix, id).as_f64())
                    )?;
                }
            }
        }
        Ok(())
    }
}

const REFINE_ITERS: usize = 30;

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max<T: Real>(f: &impl Fn(T) -> T, mut lo: T, mut hi: T) -> (T, T) {
    let ratio = T::lit(0.618_033_988_749_894_8);
    let mut a = hi - (hi - lo) * ratio;
    let mut b = lo + (hi - lo) * ratio;
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..REFINE_ITERS {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - (hi - lo) * ratio;
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + (hi - lo) * ratio;
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Grid search on `count` points of `[lo, hi]` followed by golden-section
/// refinement around the two best local maxima.
fn grid_max<T: Real>(f: &impl Fn(T) -> T, lo: T, hi: T, count: usize) -> (T, T, bool) {
    let pts = {
        let step = (hi - lo) / T::lit((count - 1) as f64);
        (0..count).map(|i| lo + step * T::lit(i as f64)).collect::<Vec<_>>()
    };
    let vals: Vec<T> = pts.iter().map(|&p| f(p)).collect();
    let mut peaks: Vec<usize> = (0..count)
        .filter(|&i| (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == count || vals[i] >= vals[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let at_edge = peaks.first().is_some_and(|&i| i == 0 || i + 1 == count);
    let mut best = (pts[0], vals[0]);
    for &i in peaks.iter().take(2) {
        let (a, b) = (pts[i.saturating_sub(1)], pts[(i + 1).min(count - 1)]);
        let cand = golden_max(f, a, b);
        for c in [cand, (pts[i], vals[i])] {
            if c.1 > best.1 {
                best = c;
            }
        }
    }
    (best.0, best.1, at_edge)
}

struct ScalarGame<T> {
    a: Vec<T>,
    b: Vec<T>,
    q: T,
    r: T,
    g2: T,
}

impl<T: Real> ScalarGame<T> {
    /// `max_v q x^2 + r u^2 - e_1 + V(v, delta + e_2 - e_1)`,
    /// `e_l = gamma^2 (a_l x + b_l u - v)^2`.
    fn inner(&self, prev: &ValueGrid<T>, x: T, delta: T, u: T, nv: usize) -> T {
        let ys: Vec<T> = self.a.iter().zip(&self.b).map(|(&a, &b)| a * x + b * u).collect();
        let stage = self.q * x * x + self.r * u * u;
        let obj = |v: T| {
            let e1 = self.g2 * (ys[0] - v) * (ys[0] - v);
            let next_delta = match ys.get(1) {
                Some(&y2) => delta + self.g2 * (y2 - v) * (y2 - v) - e1,
                None => T::zero(),
            };
            stage - e1 + prev.eval(v, next_delta)
        };
        let (lo_y, hi_y) = ys.iter().fold((T::zero(), T::zero()), |(l, h), &y| (l.min(y), h.max(y)));
        let mut pad = (hi_y - lo_y) + prev.x_max() * T::lit(0.1);
        for _ in 0..30 {
            let (_, val, at_edge) = grid_max(&obj, lo_y - pad, hi_y + pad, nv);
            if !at_edge {
                return val;
            }
            pad *= T::lit(2.0);
        }
        grid_max(&obj, lo_y - pad, hi_y + pad, nv).1
    }

    fn node(&self, prev: &ValueGrid<T>, x: T, delta: T, u_max: T, nu: usize, nv: usize) -> T {
        let outer = |u: T| -self.inner(prev, x, delta, u, nv);
        -grid_max(&outer, -u_max, u_max, nu).1
    }
}

/// Gridded value iteration `V_{k+1} = F V_k` from `V_0 = -min_l z_l` for
/// scalar plants with one or two models.
///
/// Each node takes `min_u max_v` by grid search plus golden-section
/// refinement; the v-bracket widens until its maximizer is interior.
/// `grid_tol[k]` sums the interpolation bounds of `V_0, ..., V_{k-1}`.
pub fn value_iteration_scalar<T: Real>(
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    cfg: &ValueGridConfig<T>,
) -> Result<ValueIteration<T>> {
    models.check_spec(spec)?;
    if models.n() != 1 || models.m() != 1 || models.len() > 2 {
        return Err(Error::InvalidInput("scalar value iteration needs n = m = 1 and at most two models".into()));
    }
    if cfg.nx < 3 || cfg.nu < 3 || cfg.nv < 3 || (models.len() == 2 && cfg.ndelta < 3) {
        return Err(Error::InvalidInput("grids need at least three points".into()));
    }
    if !(cfg.x_max > T::zero()) || !(cfg.delta_max > T::zero()) {
        return Err(Error::InvalidInput("grid extents must be positive".into()));
    }
    let game = ScalarGame {
        a: models.models().iter().map(|md| md.a[(0, 0)]).collect(),
        b: models.models().iter().map(|md| md.b[(0, 0)]).collect(),
        q: spec.q[(0, 0)],
        r: spec.r[(0, 0)],
        g2: spec.gamma.squared(),
    };
    let u_max = match cfg.u_max {
        Some(u) => u,
        None => {
            let mut k_max = T::zero();
            for md in models.models() {
                let k = match hinf_riccati(&md.a, &md.b, spec, &RiccatiOptions::default()) {
                    Ok(sol) => sol.k[(0, 0)].abs(),
                    Err(_) => (md.a[(0, 0)] / md.b[(0, 0)]).abs(),
                };
                k_max = k_max.max(k);
            }
            T::lit(3.0) * k_max.max(T::one()) * cfg.x_max
        }
    };
    let xs = lattice(cfg.x_max, cfg.nx);
    let deltas = if models.len() == 1 { vec![T::zero()] } else { lattice(cfg.delta_max, cfg.ndelta) };
    let nd = deltas.len();
    let v0: Vec<T> = xs.iter().flat_map(|_| deltas.iter().map(|&d| -d.min(T::zero()))).collect();
    let mut grids = vec![ValueGrid { xs: xs.clone(), deltas: deltas.clone(), values: v0, k: 0 }];
    let mut grid_tol = vec![T::zero()];
    for k in 1..=cfg.k_max {
        let prev = &grids[k - 1];
        let tol = grid_tol[k - 1] + prev.curvature_tol();
        if tol > cfg.max_grid_tol {
            return Err(Error::GridTooCoarse { grid_tol: tol.as_f64(), threshold: cfg.max_grid_tol.as_f64() });
        }
        let values: Vec<T> = (0..xs.len() * nd)
            .into_par_iter()
            .map(|idx| game.node(prev, xs[idx / nd], deltas[idx % nd], u_max, cfg.nu, cfg.nv))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value iteration produced a non-finite value at k = {k}")));
        }
        grids.push(ValueGrid { xs: xs.clone(), deltas: deltas.clone(), values, k });
        grid_tol.push(tol);
    }
    Ok(ValueIteration { grids, grid_tol })
}

/// Finite-horizon scalar game values `p_k` with `V_k(x) = p_k x^2`, `p_0 = 0`:
/// the single-model oracle for [`value_iteration_scalar`].
pub fn scalar_riccati_iterates<T: Real>(a: T, b: T, spec: &GameSpec<T>, k_max: usize) -> Result<Vec<T>> {
    let (q, r, g2) = (spec.q[(0, 0)], spec.r[(0, 0)], spec.gamma.squared());
    let mut p = vec![T::zero()];
    for _ in 0..k_max {
        let last = *p.last().unwrap();
        if last >= g2 {
            return Err(Error::GammaTooSmall { gamma: spec.gamma.value().as_f64(), model: None });
        }
        let g = last / (T::one() - last / g2);
        p.push(q + a * a * g - (a * b * g) * (a * b * g) / (r + b * b * g));
    }
    Ok(p)
}

/// `V(x, z + c 1) - (V(x, z) - c)` for [`value_upper`], [`apply_fu_vbar`] at
/// the controller input, and `V_0`; all three are zero up to rounding.
pub fn translation_defects<T: Real>(
    cert: &Certificate<T>,
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    point: &ValuePoint<T>,
    c: T,
) -> Result<[T; 3]> {
    let shifted = ValuePoint { x: point.x.clone(), z: point.z.iter().map(|&z| z + c).collect() };
    let u: DVector<T> = -(&cert.k[argmin(&point.z)] * &point.x);
    let upper = value_upper(cert, &shifted.z, &shifted.x).0 - (value_upper(cert, &point.z, &point.x).0 - c);
    let fu = apply_fu_vbar(cert, models, spec, &shifted, &u)? - (apply_fu_vbar(cert, models, spec, point, &u)? - c);
    let v0 = |z: &[T]| -z.iter().copied().fold(T::max_value().unwrap(), T::min);
    Ok([upper, fu, v0(&shifted.z) - (v0(&point.z) - c)])
}

/// Shorthand for a certificate with a single model and its Riccati solution.
pub fn riccati_certificate<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, spec: &GameSpec<T>) -> Result<Certificate<T>> {
    let sol = hinf_riccati(a, b, spec, &RiccatiOptions::default())?;
    Ok(Certificate { gamma: spec.gamma, k: vec![sol.k], p: vec![vec![sol.p]], margin: T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::pair_objective;
    use crate::synthesis::{synth_certificate, Model, SynthOptions};

    fn example() -> (ModelSet<f64>, GameSpec<f64>, Certificate<f64>) {
        let set = ModelSet::sign_pair(
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
        )
        .unwrap();
        let spec = GameSpec::new(DMatrix::identity(3, 3), DMatrix::identity(1, 1), 19.0).unwrap();
        let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        (set, spec, cert)
    }

    fn scalar_pair(gamma: f64) -> (ModelSet<f64>, GameSpec<f64>) {
        let one = DMatrix::from_element(1, 1, 1.0);
        (ModelSet::sign_pair(one.clone(), one.clone()).unwrap(), GameSpec::new(one.clone(), one, gamma).unwrap())
    }

    #[test]
    fn origin_is_zero() {
        let (set, spec, cert) = example();
        let p = ValuePoint::new(DVector::zeros(3), vec![0.0, 0.0]).unwrap();
        assert_eq!(apply_fu_vbar(&cert, &set, &spec, &p, &DVector::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn negative_z_rejected() {
        assert!(ValuePoint::new(DVector::<f64>::zeros(1), vec![-1.0]).is_err());
    }

    #[test]
    fn closed_form_beats_dense_v_grid() {
        let (set, spec, cert) = example();
        let x = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let z = vec![0.5, 1.5];
        let u = DVector::from_element(1, 0.7);
        let point = ValuePoint::new(x.clone(), z.clone()).unwrap();
        let closed = apply_fu_vbar(&cert, &set, &spec, &point, &u).unwrap();
        let ys: Vec<_> = set.models().iter().map(|md| md.predict(&x, &u)).collect();
        let stage = x.norm_squared() + u.norm_squared();
        let mut oracle = f64::MIN;
        for i in 0..2 {
            for j in i..2 {
                let form = GammaForm::new(&cert.p[i][j], cert.gamma).unwrap();
                let center = form.max_pair(&ys[i], &ys[j]).vstar;
                // coarse lattice, then a finer one around its best point
                let mut best = (f64::MIN, center.clone());
                for (width, steps) in [(0.5, 20), (0.05, 20), (0.005, 20)] {
                    let c = best.1.clone();
                    for a in -steps..=steps {
                        for b in -steps..=steps {
                            for d in -steps..=steps {
                                let off =
                                    DVector::from_vec(vec![a as f64, b as f64, d as f64]) * (width / steps as f64);
                                let v = &c + off;
                                let val = pair_objective(&cert.p[i][j], cert.gamma, &ys[i], &ys[j], &v);
                                if val > best.0 {
                                    best = (val, v);
                                }
                            }
                        }
                    }
                }
                oracle = oracle.max(stage + best.0 - (z[i] + z[j]) / 2.0);
            }
        }
        assert!(oracle <= closed + 1e-6, "{oracle} > {closed}");
        assert!(closed - oracle < 1e-3);
    }

    #[test]
    fn riccati_certificate_is_an_equality() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let spec = GameSpec::<f64>::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1), 5.0).unwrap();
        let cert = riccati_certificate(&a, &b, &spec).unwrap();
        let set = ModelSet::new(vec![Model::new(a, b)]).unwrap();
        let report = check_bellman_decrease(&cert, &set, &spec, 2000, 1).unwrap();
        assert!(report.max_violation.abs() <= 1e-8, "{report:?}");
    }

    #[test]
    fn example_certificate_decreases() {
        let (set, spec, cert) = example();
        let report = check_bellman_decrease(&cert, &set, &spec, 2000, 7).unwrap();
        assert!(report.max_violation <= 1e-6, "{report:?}");
    }

    #[test]
    fn broken_certificate_reports_witness() {
        let (set, spec, mut cert) = example();
        for (i, j) in [(0, 1), (1, 0)] {
            cert.p[i][j] *= 0.5;
        }
        let report = check_bellman_decrease(&cert, &set, &spec, 2000, 7).unwrap();
        assert!(report.max_violation > 0.0);
        let w = &report.worst_point;
        let u = -(&cert.k[argmin(&w.z)] * &w.x);
        let again = apply_fu_vbar(&cert, &set, &spec, w, &u).unwrap() - value_upper(&cert, &w.z, &w.x).0;
        assert_eq!(again, report.max_violation);
    }

    #[test]
    fn translation_invariance() {
        let (set, spec, cert) = example();
        let p = ValuePoint::new(DVector::from_vec(vec![0.4, 0.1, -0.3]), vec![2.0, 0.5]).unwrap();
        for d in translation_defects(&cert, &set, &spec, &p, 3.25).unwrap() {
            assert!(d.abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn v0_slice() {
        let (set, spec) = scalar_pair(4.0);
        let cfg = ValueGridConfig { nx: 5, ndelta: 9, k_max: 0, ..Default::default() };
        let vi = value_iteration_scalar(&set, &spec, &cfg).unwrap();
        let g = &vi.grids[0];
        for ix in 0..5 {
            for (id, &d) in g.deltas.iter().enumerate() {
                assert_eq!(g.at(ix, id), -f64::min(0.0, d));
            }
        }
    }

    #[test]
    fn homogeneous_extension() {
        let g = ValueGrid {
            xs: vec![-1.0, 0.0, 1.0],
            deltas: vec![-1.0, 0.0, 1.0],
            values: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0],
            k: 0,
        };
        assert_eq!(g.eval(1.0, 0.5), 2.5);
        // linear extrapolation in delta
        assert_eq!(g.eval(1.0, 3.0), 5.0);
        // c = 2: 4 * V(1, 0.25)
        assert_eq!(g.eval(2.0, 1.0), 4.0 * 2.25);
    }

    #[test]
    fn single_model_tracks_riccati_iterates() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let set = ModelSet::new(vec![Model::new(one.clone(), one.clone())]).unwrap();
        let spec = GameSpec::<f64>::new(one.clone(), one, 4.0).unwrap();
        let cfg = ValueGridConfig { nx: 21, nu: 21, nv: 21, k_max: 8, ..Default::default() };
        let vi = value_iteration_scalar(&set, &spec, &cfg).unwrap();
        let p = scalar_riccati_iterates(1.0, 1.0, &spec, 8).unwrap();
        for (g, (&pk, &tol)) in vi.grids.iter().zip(p.iter().zip(&vi.grid_tol)) {
            for (ix, &x) in g.xs.iter().enumerate() {
                assert!((g.at(ix, 0) - pk * x * x).abs() <= tol + 1e-8, "k={} x={x}", g.k);
            }
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let (set, spec) = scalar_pair(4.0);
        let cfg =
            ValueGridConfig { nx: 5, ndelta: 5, nu: 5, nv: 5, k_max: 3, max_grid_tol: 1e-3, ..Default::default() };
        assert!(matches!(value_iteration_scalar(&set, &spec, &cfg), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn large_state_slope_bounded_by_certificate() {
        let (set, spec) = scalar_pair(4.0);
        let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        let cfg = ValueGridConfig { nx: 11, ndelta: 41, nu: 15, nv: 21, k_max: 6, ..Default::default() };
        let vi = value_iteration_scalar(&set, &spec, &cfg).unwrap();
        let p_max = cert.p.iter().flatten().map(|p| p[(0, 0)]).fold(0.0, f64::max);
        let tol = *vi.grid_tol.last().unwrap();
        let last = vi.grids.last().unwrap();
        for x in [1.0, 3.0, 10.0] {
            assert!(last.eval(x, 0.0) / (x * x) <= p_max + tol, "x = {x}");
        }
        assert!(vi.monotonicity_slack().iter().all(|&s| s >= 0.0));
        assert!(vi.upper_bound_slack(&cert).iter().all(|&s| s >= 0.0));
    }
}
