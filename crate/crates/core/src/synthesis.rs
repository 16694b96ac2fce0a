//! Certificates for the minimax adaptive controller.
//!
//! A certificate at level `gamma` consists of gains `K_k` and forms `P_ij`
//! with `0 < P_ij < gamma^2 I` such that for every triple `(i, j, k)`
//!
//! ```text
//! F_ijk = Q + K_k^T R K_k + M+^T G_ij M+ - gamma^2 M-^T M-
//! M+ = (A_i - B_i K_k + A_j - B_j K_k) / 2
//! M- = (A_i - B_i K_k - A_j + B_j K_k) / 2
//! G_ij = (P_ij^-1 - gamma^-2 I)^-1
//! ```
//!
//! is dominated by `P_ik` or by `P_jk`. Either one closes the Bellman
//! decrease step for the piece `(i, j)` when `k` is the residual argmin,
//! because `z_k <= z_i` and `z_k <= z_j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, lambda_max, lambda_min, max_abs};
use crate::quadform::{Gamma, GammaForm};
use crate::riccati::{hinf_riccati, GameSpec, RiccatiOptions};
use crate::{output, Error, Real, Result};

/// One candidate model `x+ = A x + B u + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
}

impl<T: Real> Model<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>) -> Self {
        Self { a, b }
    }

    /// `A x + B u`.
    pub fn predict(&self, x: &nalgebra::DVector<T>, u: &nalgebra::DVector<T>) -> nalgebra::DVector<T> {
        &self.a * x + &self.b * u
    }

    /// Closed-loop matrix `A - B K`.
    pub fn closed_loop(&self, k: &DMatrix<T>) -> DMatrix<T> {
        &self.a - &self.b * k
    }
}

/// Finite, ordered set of pairwise distinct models of common dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet<T: Real> {
    models: Vec<Model<T>>,
    n: usize,
    m: usize,
}

impl<T: Real> ModelSet<T> {
    pub fn new(models: Vec<Model<T>>) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::InvalidInput("model set is empty".into()))?;
        let (n, m) = (first.a.nrows(), first.b.ncols());
        if n == 0 || m == 0 {
            return Err(Error::Dimension("models must have n >= 1 and m >= 1".into()));
        }
        for (i, model) in models.iter().enumerate() {
            if model.a.shape() != (n, n) || model.b.shape() != (n, m) {
                return Err(Error::Dimension(format!(
                    "model {i}: A is {:?}, B is {:?}, expected ({n}, {n}) and ({n}, {m})",
                    model.a.shape(),
                    model.b.shape()
                )));
            }
            if models[..i].iter().any(|other| other == model) {
                return Err(Error::InvalidInput(format!("model {i} duplicates an earlier model")));
            }
        }
        Ok(Self { models, n, m })
    }

    /// `{(A, B), (A, -B)}`, in that order.
    pub fn sign_pair(a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        let neg = -&b;
        Self::new(vec![Model::new(a.clone(), b), Model::new(a, neg)])
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn models(&self) -> &[Model<T>] {
        &self.models
    }

    pub fn get(&self, i: usize) -> &Model<T> {
        &self.models[i]
    }

    pub fn check_spec(&self, spec: &GameSpec<T>) -> Result<()> {
        if spec.n() != self.n || spec.m() != self.m {
            return Err(Error::Dimension(format!(
                "Q is {0}x{0} and R is {1}x{1}, models have n = {2}, m = {3}",
                spec.n(),
                spec.m(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

/// Gains `K_k` and forms `P_ij` witnessing the Bellman inequality at `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T: Real> {
    pub gamma: Gamma<T>,
    /// `K[k]` is `m x n`; the controller applies `u = -K[k] x`.
    pub k: Vec<DMatrix<T>>,
    /// `P[i][j]` is `n x n` symmetric.
    pub p: Vec<Vec<DMatrix<T>>>,
    /// Smallest slack over all verified inequalities.
    pub margin: T,
}

impl<T: Real> Certificate<T> {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Checks the shapes against a model set.
    pub fn check_dims(&self, models: &ModelSet<T>) -> Result<()> {
        let (n, m, count) = (models.n(), models.m(), models.len());
        if self.k.len() != count || self.p.len() != count || self.p.iter().any(|row| row.len() != count) {
            return Err(Error::Dimension(format!("certificate does not cover {count} models")));
        }
        if self.k.iter().any(|k| k.shape() != (m, n)) {
            return Err(Error::Dimension(format!("gains must be {m}x{n}")));
        }
        if self.p.iter().flatten().any(|p| p.shape() != (n, n)) {
            return Err(Error::Dimension(format!("forms must be {n}x{n}")));
        }
        Ok(())
    }

    /// `max_{i,j} x^T P_ij x`, the certified bound on the payoff from `x0`
    /// with no data collected.
    pub fn initial_bound(&self, x0: &nalgebra::DVector<T>) -> T {
        self.p.iter().flatten().map(|p| linalg::quad(p, x0)).fold(T::min_value().unwrap(), T::max)
    }

    pub fn to_file(&self) -> CertificateFile {
        let rows = |m: &DMatrix<T>| {
            linalg::to_rows(m).into_iter().map(|r| r.into_iter().map(Real::as_f64).collect()).collect()
        };
        CertificateFile {
            gamma: self.gamma.value().as_f64(),
            n: self.p.first().map_or(0, |row| row[0].nrows()),
            m: self.k.first().map_or(0, |k| k.nrows()),
            count: self.len(),
            k: self.k.iter().map(rows).collect(),
            p: self.p.iter().map(|row| row.iter().map(rows).collect()).collect(),
            margin: Some(self.margin.as_f64()),
        }
    }

    pub fn from_file(file: &CertificateFile) -> Result<Self> {
        let mat = |rows: &Vec<Vec<f64>>, r: usize, c: usize, what: &str| -> Result<DMatrix<T>> {
            let m = linalg::from_rows(rows).ok_or_else(|| Error::Dimension(format!("{what} has ragged rows")))?;
            if m.shape() != (r, c) {
                return Err(Error::Dimension(format!("{what} is {:?}, expected ({r}, {c})", m.shape())));
            }
            Ok(m.map(T::lit))
        };
        let (n, m, count) = (file.n, file.m, file.count);
        if file.k.len() != count || file.p.len() != count || file.p.iter().any(|row| row.len() != count) {
            return Err(Error::Dimension(format!("certificate lists do not match N = {count}")));
        }
        let k = file
            .k
            .iter()
            .enumerate()
            .map(|(i, rows)| mat(rows, m, n, &format!("K[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let p = file
            .p
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, rows)| mat(rows, n, n, &format!("P[{i}][{j}]")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { gamma: Gamma::new(T::lit(file.gamma))?, k, p, margin: T::lit(file.margin.unwrap_or(f64::NAN)) })
    }

    pub fn to_json(&self) -> String {
        output::to_json_string(&self.to_file()).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CertificateFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("certificate JSON: {e}")))?;
        Self::from_file(&file)
    }
}

/// On-disk certificate layout. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub gamma: f64,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub count: usize,
    #[serde(rename = "K")]
    pub k: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

/// `F_ijk` from an already transformed `G_ij`.
fn rhs_from_transform<T: Real>(
    i: usize,
    j: usize,
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    g_ij: &DMatrix<T>,
    k_k: &DMatrix<T>,
) -> DMatrix<T> {
    let half = T::lit(0.5);
    let cl_i = models.get(i).closed_loop(k_k);
    let cl_j = models.get(j).closed_loop(k_k);
    let plus = (&cl_i + &cl_j) * half;
    let minus = (cl_i - cl_j) * half;
    let out = &spec.q + k_k.transpose() * &spec.r * k_k + plus.transpose() * g_ij * &plus
        - minus.transpose() * &minus * spec.gamma.squared();
    linalg::symmetrize(&out)
}

/// Right-hand side `F_ijk` of the certificate inequality for the triple
/// `(i, j, k)`. May be indefinite.
pub fn pik_rhs<T: Real>(
    i: usize,
    j: usize,
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    p_ij: &DMatrix<T>,
    k_k: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let g = GammaForm::new(p_ij, spec.gamma)?.transform();
    Ok(rhs_from_transform(i, j, models, spec, &g, k_k))
}

/// Slack of one triple: `max(lambda_min(P_ik - F), lambda_min(P_jk - F))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleSlack<T> {
    pub triple: (usize, usize, usize),
    pub slack: T,
    /// Which form dominates: `(i, k)` or `(j, k)`.
    pub dominated_by: (usize, usize),
}

/// Eigenvalue slack of `0 < P_ij < gamma^2 I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeSlack<T> {
    pub pair: (usize, usize),
    /// `lambda_min(P_ij)`.
    pub lower: T,
    /// `gamma^2 - lambda_max(P_ij)`.
    pub upper: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport<T> {
    pub feasible: bool,
    pub margin: T,
    pub worst_triple: (usize, usize, usize),
    pub triples: Vec<TripleSlack<T>>,
    pub cones: Vec<ConeSlack<T>>,
}

/// Checks every certificate inequality by eigenvalues. Infeasibility is
/// reported, not raised.
pub fn verify_certificate<T: Real>(
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    cert: &Certificate<T>,
    tol: T,
) -> Result<VerifyReport<T>> {
    models.check_spec(spec)?;
    cert.check_dims(models)?;
    let count = models.len();
    let gamma = spec.gamma;
    let neg_inf = T::min_value().unwrap();

    let mut cones = Vec::with_capacity(count * count);
    let mut transforms = vec![vec![None; count]; count];
    for i in 0..count {
        for j in 0..count {
            let p = &cert.p[i][j];
            let (lo, hi) = linalg::eig_range(p);
            cones.push(ConeSlack { pair: (i, j), lower: lo, upper: gamma.squared() - hi });
            transforms[i][j] = GammaForm::new(p, gamma).ok().map(|f| f.transform());
        }
    }

    let mut triples = Vec::with_capacity(count * count * count);
    for i in 0..count {
        for j in 0..count {
            for k in 0..count {
                let entry = match &transforms[i][j] {
                    Some(g) => {
                        let f = rhs_from_transform(i, j, models, spec, g, &cert.k[k]);
                        let via_i = lambda_min(&(&cert.p[i][k] - &f));
                        let via_j = lambda_min(&(&cert.p[j][k] - &f));
                        if via_j > via_i {
                            TripleSlack { triple: (i, j, k), slack: via_j, dominated_by: (j, k) }
                        } else {
                            TripleSlack { triple: (i, j, k), slack: via_i, dominated_by: (i, k) }
                        }
                    }
                    None => TripleSlack { triple: (i, j, k), slack: neg_inf, dominated_by: (i, k) },
                };
                triples.push(entry);
            }
        }
    }

    let worst = triples
        .iter()
        .fold(None::<&TripleSlack<T>>, |acc, t| match acc {
            Some(a) if a.slack <= t.slack => Some(a),
            _ => Some(t),
        })
        .expect("at least one triple");
    let cone_margin = cones.iter().map(|c| c.lower.min(c.upper)).fold(T::max_value().unwrap(), T::min);
    let cone_ok = cones.iter().all(|c| c.lower > T::zero() && c.upper > T::zero());
    let margin = worst.slack.min(cone_margin);
    Ok(VerifyReport { feasible: cone_ok && worst.slack >= -tol, margin, worst_triple: worst.triple, triples, cones })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions<T> {
    /// Verification tolerance on the final certificate.
    pub tol: T,
    /// Sweeps stop when no `P_ij` entry moves by more than this.
    pub sweep_tol: T,
    pub max_sweeps: usize,
    /// Forms are kept inside `eps I <= P <= (1 - eps) gamma^2 I`.
    pub cone_eps: T,
    pub riccati: RiccatiOptions<T>,
}

impl<T: Real> Default for SynthOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol(1e-6),
            sweep_tol: T::tol(1e-9),
            max_sweeps: 500,
            cone_eps: T::tol(1e-6),
            riccati: RiccatiOptions::default(),
        }
    }
}

/// Riccati solves for every model; `GammaTooSmall` tags the failing model.
fn diagonal_blocks<T: Real>(
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    opts: &RiccatiOptions<T>,
) -> Result<Vec<crate::riccati::RiccatiSolution<T>>> {
    let gamma = spec.gamma.value().as_f64();
    models
        .models()
        .iter()
        .enumerate()
        .map(|(i, model)| {
            hinf_riccati(&model.a, &model.b, spec, opts).map_err(|e| match e {
                Error::GammaTooSmall { .. } | Error::NoConvergence { .. } => {
                    Error::GammaTooSmall { gamma, model: Some(i) }
                }
                other => other,
            })
        })
        .collect()
}

/// Clips the spectrum into `[eps, (1 - eps) gamma^2]`; `None` if the upper
/// clip would be active, since the clipped matrix could no longer dominate.
fn project_into_cone<T: Real>(x: &DMatrix<T>, gamma: Gamma<T>, eps: T) -> Option<DMatrix<T>> {
    let eig = linalg::sym_eigen(x);
    let ceiling = (T::one() - eps) * gamma.squared();
    if eig.eigenvalues.iter().any(|&l| !(l < ceiling)) {
        return None;
    }
    Some(linalg::spectral_map(&eig, |l| l.max(eps)))
}

/// Synthesizes a certificate without a conic solver.
///
/// Diagonal blocks and gains come from the per-model Riccati solutions and
/// stay fixed. Each off-diagonal `P_ik` is then raised, sweep by sweep, to an
/// upper bound of itself and of every `F_ijk` assigned to it: all triples
/// with left side `P_ik`, plus the triple `(k, i, k)` whose own diagonal left
/// side `P_kk` is frozen. The result is checked by [`verify_certificate`].
pub fn synth_certificate<T: Real>(
    models: &ModelSet<T>,
    spec: &GameSpec<T>,
    opts: &SynthOptions<T>,
) -> Result<Certificate<T>> {
    models.check_spec(spec)?;
    let count = models.len();
    let gamma = spec.gamma;
    let infeasible = |margin: f64| Error::InfeasibleAtGamma { gamma: gamma.value().as_f64(), margin };

    let diag = diagonal_blocks(models, spec, &opts.riccati)?;
    let gains: Vec<DMatrix<T>> = diag.iter().map(|s| s.k.clone()).collect();
    let mut p: Vec<Vec<DMatrix<T>>> = (0..count)
        .map(|i| {
            (0..count)
                .map(|k| {
                    if i == k {
                        diag[i].p.clone()
                    } else {
                        linalg::upper_bound(&[diag[i].p.clone(), diag[k].p.clone()])
                    }
                })
                .collect()
        })
        .collect();

    for _sweep in 0..opts.max_sweeps {
        if count == 1 {
            break;
        }
        let mut transforms = Vec::with_capacity(count);
        for row in &p {
            let mut out = Vec::with_capacity(count);
            for form in row {
                let g = GammaForm::new(form, gamma).map_err(|_| infeasible(f64::NEG_INFINITY))?;
                out.push(g.transform());
            }
            transforms.push(out);
        }
        let mut change = T::zero();
        let mut next = p.clone();
        for i in 0..count {
            for k in 0..count {
                if i == k {
                    continue;
                }
                let mut family = Vec::with_capacity(count + 2);
                family.push(p[i][k].clone());
                for j in 0..count {
                    family.push(rhs_from_transform(i, j, models, spec, &transforms[i][j], &gains[k]));
                }
                family.push(rhs_from_transform(k, i, models, spec, &transforms[k][i], &gains[k]));
                let bound = linalg::upper_bound(&family);
                let projected =
                    project_into_cone(&bound, gamma, opts.cone_eps).ok_or_else(|| infeasible(f64::NEG_INFINITY))?;
                change = change.max(max_abs(&(&projected - &p[i][k])));
                next[i][k] = projected;
            }
        }
        p = next;
        if change <= opts.sweep_tol {
            break;
        }
    }

    let mut cert = Certificate { gamma, k: gains, p, margin: T::zero() };
    let report = verify_certificate(models, spec, &cert, opts.tol)?;
    cert.margin = report.margin;
    if report.feasible {
        Ok(cert)
    } else {
        Err(infeasible(report.margin.as_f64()))
    }
}

/// Outcome of [`gamma_bisect`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bisection<T: Real> {
    pub gamma: T,
    pub certificate: Certificate<T>,
    /// Largest tested level that failed, if any.
    pub infeasible_below: Option<T>,
}

/// Bisects `gamma` over `[gamma_lo, gamma_hi]` for `steps` halvings and
/// returns the smallest lattice level at which [`synth_certificate`]
/// succeeds. This is an upper bound on the best achievable level, not the
/// level itself.
pub fn gamma_bisect<T: Real>(
    models: &ModelSet<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    gamma_lo: T,
    gamma_hi: T,
    steps: usize,
    opts: &SynthOptions<T>,
) -> Result<Bisection<T>> {
    if !(gamma_lo < gamma_hi) || gamma_lo <= T::zero() {
        return Err(Error::InvalidInput(format!("need 0 < gamma_lo < gamma_hi, got [{gamma_lo}, {gamma_hi}]")));
    }
    let attempt = |gamma: T| -> Result<Option<Certificate<T>>> {
        let spec = GameSpec::new(q.clone(), r.clone(), gamma)?;
        match synth_certificate(models, &spec, opts) {
            Ok(cert) => Ok(Some(cert)),
            Err(Error::GammaTooSmall { .. } | Error::InfeasibleAtGamma { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut best = match attempt(gamma_hi)? {
        Some(cert) => (gamma_hi, cert),
        None => return Err(Error::InfeasibleAtGamma { gamma: gamma_hi.as_f64(), margin: f64::NEG_INFINITY }),
    };
    if let Some(cert) = attempt(gamma_lo)? {
        return Ok(Bisection { gamma: gamma_lo, certificate: cert, infeasible_below: None });
    }
    let (mut lo, mut hi) = (gamma_lo, gamma_hi);
    for _ in 0..steps {
        let mid = (lo + hi) * T::lit(0.5);
        match attempt(mid)? {
            Some(cert) => {
                hi = mid;
                best = (mid, cert);
            }
            None => lo = mid,
        }
    }
    Ok(Bisection { gamma: best.0, certificate: best.1, infeasible_below: Some(lo) })
}

/// Certificate for the input-sign model set `{(A, B), (A, -B)}` in the
/// reduced form `(P, T, K)`: `P_11 = P_22 = P`, `P_12 = P_21 = T`,
/// `K_1 = -K_2 = K`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignCertificate<T: Real> {
    pub gamma: Gamma<T>,
    pub p: DMatrix<T>,
    pub t: DMatrix<T>,
    pub k: DMatrix<T>,
}

impl<T: Real> InputSignCertificate<T> {
    /// The equivalent two-model certificate for `ModelSet::sign_pair(A, B)`.
    pub fn to_certificate(&self) -> Certificate<T> {
        Certificate {
            gamma: self.gamma,
            k: vec![self.k.clone(), -&self.k],
            p: vec![vec![self.p.clone(), self.t.clone()], vec![self.t.clone(), self.p.clone()]],
            margin: T::zero(),
        }
    }
}

/// Eigenvalue slacks of the three input-sign inequalities
///
/// ```text
/// P >= Q + K^T R K + (A - BK)^T G(P) (A - BK)
/// T >= Q + K^T R K + (A + BK)^T G(P) (A + BK)
/// T >= Q + K^T (R - gamma^2 B^T B) K + A^T G(T) A
/// ```
///
/// and of the ordering `0 < P < T < gamma^2 I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSignSlacks<T> {
    pub p_ineq: T,
    pub t_ineq: T,
    pub k_ineq: T,
    /// `lambda_min(P)`.
    pub p_lower: T,
    /// `lambda_min(T - P)`.
    pub t_over_p: T,
    /// `gamma^2 - lambda_max(T)`.
    pub t_upper: T,
}

impl<T: Real> InputSignSlacks<T> {
    pub fn min(&self) -> T {
        [self.p_ineq, self.t_ineq, self.k_ineq, self.p_lower, self.t_over_p, self.t_upper]
            .into_iter()
            .fold(T::max_value().unwrap(), T::min)
    }
}

fn sign_case_rhs<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    spec: &GameSpec<T>,
    k: &DMatrix<T>,
    g_p: &DMatrix<T>,
    g_t: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let cost = &spec.q + k.transpose() * &spec.r * k;
    let minus = a - b * k;
    let plus = a + b * k;
    let f_p = &cost + minus.transpose() * g_p * &minus;
    let f_t = &cost + plus.transpose() * g_p * &plus;
    let learn = &spec.r - b.transpose() * b * spec.gamma.squared();
    let f_k = &spec.q + k.transpose() * learn * k + a.transpose() * g_t * a;
    (linalg::symmetrize(&f_p), linalg::symmetrize(&f_t), linalg::symmetrize(&f_k))
}

/// Evaluates [`InputSignSlacks`] for given `(P, T, K)`.
pub fn input_sign_slacks<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    spec: &GameSpec<T>,
    p: &DMatrix<T>,
    t: &DMatrix<T>,
    k: &DMatrix<T>,
) -> Result<InputSignSlacks<T>> {
    let g_p = GammaForm::new(p, spec.gamma)?.transform();
    let g_t = GammaForm::new(t, spec.gamma)?.transform();
    let (f_p, f_t, f_k) = sign_case_rhs(a, b, spec, k, &g_p, &g_t);
    Ok(InputSignSlacks {
        p_ineq: lambda_min(&(p - f_p)),
        t_ineq: lambda_min(&(t - &f_t)),
        k_ineq: lambda_min(&(t - f_k)),
        p_lower: lambda_min(p),
        t_over_p: lambda_min(&(t - p)),
        t_upper: spec.gamma.squared() - lambda_max(t),
    })
}

/// Synthesizes `(P, T, K)` for `{(A, B), (A, -B)}`: `(P, K)` from the
/// Riccati equation, then `T` by a monotone upper-bound sweep started at `P`.
pub fn input_sign_synthesis<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    spec: &GameSpec<T>,
    opts: &SynthOptions<T>,
) -> Result<InputSignCertificate<T>> {
    let gamma = spec.gamma;
    let infeasible = |margin: f64| Error::InfeasibleAtGamma { gamma: gamma.value().as_f64(), margin };
    let sol = hinf_riccati(a, b, spec, &opts.riccati).map_err(|e| match e {
        Error::NoConvergence { .. } => Error::GammaTooSmall { gamma: gamma.value().as_f64(), model: None },
        other => other,
    })?;
    let (p, k) = (sol.p, sol.k);
    let g_p = GammaForm::new(&p, gamma)?.transform();
    let mut t = p.clone();
    for _ in 0..opts.max_sweeps {
        let g_t = GammaForm::new(&t, gamma).map_err(|_| infeasible(f64::NEG_INFINITY))?.transform();
        let (_, f_t, f_k) = sign_case_rhs(a, b, spec, &k, &g_p, &g_t);
        let bound = linalg::upper_bound(&[t.clone(), f_t, f_k]);
        let next = project_into_cone(&bound, gamma, opts.cone_eps).ok_or_else(|| infeasible(f64::NEG_INFINITY))?;
        let change = max_abs(&(&next - &t));
        t = next;
        if change <= opts.sweep_tol {
            break;
        }
    }
    let slacks = input_sign_slacks(a, b, spec, &p, &t, &k)?;
    let ineq = slacks.p_ineq.min(slacks.t_ineq).min(slacks.k_ineq).min(slacks.t_over_p);
    if ineq < -opts.tol || slacks.p_lower <= T::zero() || slacks.t_upper <= T::zero() {
        return Err(infeasible(ineq.as_f64()));
    }
    Ok(InputSignCertificate { gamma, p, t, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn double_integrator() -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
        )
    }

    fn unit_spec(n: usize, m: usize, gamma: f64) -> GameSpec<f64> {
        GameSpec::new(DMatrix::identity(n, n), DMatrix::identity(m, m), gamma).unwrap()
    }

    #[test]
    fn model_set_validation() {
        let a = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::from_element(2, 1, 1.0);
        assert!(ModelSet::<f64>::new(vec![]).is_err());
        assert!(ModelSet::new(vec![Model::new(a.clone(), b.clone()), Model::new(a.clone(), b.clone())]).is_err());
        assert!(
            ModelSet::new(vec![Model::new(a.clone(), b.clone()), Model::new(a.clone(), DMatrix::zeros(2, 2))]).is_err()
        );
        assert!(ModelSet::sign_pair(a.clone(), DMatrix::zeros(2, 1)).is_err());
        let set = ModelSet::sign_pair(a, b).unwrap();
        assert_eq!((set.len(), set.n(), set.m()), (2, 2, 1));
    }

    #[test]
    fn single_model_rhs_is_riccati_rhs() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let set = ModelSet::new(vec![Model::new(a.clone(), b.clone())]).unwrap();
        let sol = hinf_riccati(&a, &b, &spec, &RiccatiOptions::default()).unwrap();
        let f = pik_rhs(0, 0, &set, &spec, &sol.p, &sol.k).unwrap();
        assert!(max_abs(&(f - &sol.p)) < 1e-8);
    }

    #[test]
    fn sign_case_cross_rhs_matches_learning_inequality() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let set = ModelSet::sign_pair(a.clone(), b.clone()).unwrap();
        let k = DMatrix::from_row_slice(1, 3, &[1.786, -1.288, 1.288]);
        let t = DMatrix::from_row_slice(3, 3, &[155.0, -84.4, 84.4, -84.4, 89.0, -87.5, 84.4, -87.5, 89.0]);
        let f = pik_rhs(0, 1, &set, &spec, &t, &k).unwrap();
        let g_t = crate::quadform::gamma_transform(&t, spec.gamma).unwrap();
        let expected = &spec.q + k.transpose() * (&spec.r - b.transpose() * &b * 361.0) * &k + a.transpose() * g_t * &a;
        assert!(max_abs(&(f - expected)) < 1e-9);
    }

    #[test]
    fn rhs_matches_pointwise_pair_maximization() {
        use crate::quadform::max_quad_pair;
        let set = ModelSet::new(vec![
            Model::new(
                DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 0.9]),
                DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            ),
            Model::new(
                DMatrix::from_row_slice(2, 2, &[0.8, -0.2, 0.4, 1.1]),
                DMatrix::from_row_slice(2, 1, &[0.5, -1.0]),
            ),
        ])
        .unwrap();
        let spec = unit_spec(2, 1, 7.0);
        let p_ij = DMatrix::from_row_slice(2, 2, &[9.0, 2.0, 2.0, 5.0]);
        let k_k = DMatrix::from_row_slice(1, 2, &[0.4, -0.7]);
        let f = pik_rhs(0, 1, &set, &spec, &p_ij, &k_k).unwrap();
        for s in 0..100 {
            let th = s as f64 * 0.377;
            let x = DVector::from_vec(vec![th.cos() * 1.3, (th * 1.7).sin()]);
            let u = -&k_k * &x;
            let y1 = set.get(0).predict(&x, &u);
            let y2 = set.get(1).predict(&x, &u);
            let pointwise = linalg::quad(&spec.q, &x)
                + linalg::quad(&spec.r, &u)
                + max_quad_pair(&p_ij, spec.gamma, &y1, &y2).unwrap().value;
            let via_matrix = linalg::quad(&f, &x);
            assert!((pointwise - via_matrix).abs() < 1e-9 * (1.0 + pointwise.abs()));
        }
    }

    #[test]
    fn single_model_certificate_is_riccati_solution() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let set = ModelSet::new(vec![Model::new(a.clone(), b.clone())]).unwrap();
        let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        let sol = hinf_riccati(&a, &b, &spec, &RiccatiOptions::default()).unwrap();
        assert_eq!(cert.p[0][0], sol.p);
        assert_eq!(cert.k[0], sol.k);
        let report = verify_certificate(&set, &spec, &cert, 1e-8).unwrap();
        assert!(report.feasible && report.margin >= -1e-8, "{report:?}");
    }

    #[test]
    fn double_integrator_sign_pair_feasible_at_19() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let set = ModelSet::sign_pair(a, b).unwrap();
        let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        assert!(cert.margin >= -1e-6);
        let p = &cert.p[0][0];
        let t = &cert.p[0][1];
        assert!(lambda_min(p) > 0.0);
        assert!(lambda_min(&(t - p)) > 0.0);
        assert!(lambda_max(t) < 361.0);
    }

    #[test]
    fn double_integrator_sign_pair_infeasible_at_5() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 5.0);
        let set = ModelSet::sign_pair(a, b).unwrap();
        let res = synth_certificate(&set, &spec, &SynthOptions::default());
        assert!(matches!(res, Err(Error::GammaTooSmall { .. } | Error::InfeasibleAtGamma { .. })), "{res:?}");
    }

    #[test]
    fn shrunken_cross_term_is_rejected_with_witness() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let set = ModelSet::sign_pair(a, b).unwrap();
        let mut cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        cert.p[0][1] *= 0.5;
        let report = verify_certificate(&set, &spec, &cert, 1e-6).unwrap();
        assert!(!report.feasible);
        let (i, j, k) = report.worst_triple;
        assert!(report.margin < -1e-6);
        let worst = report.triples.iter().find(|t| t.triple == (i, j, k)).unwrap();
        assert_eq!(worst.slack, report.triples.iter().map(|t| t.slack).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn input_sign_zero_b_gives_t_equal_p() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.7]);
        let b = DMatrix::zeros(2, 1);
        let spec = unit_spec(2, 1, 4.0);
        let c = input_sign_synthesis(&a, &b, &spec, &SynthOptions::default()).unwrap();
        assert!(max_abs(&(&c.t - &c.p)) < 1e-8);
    }

    #[test]
    fn input_sign_example_within_gamma() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let c = input_sign_synthesis(&a, &b, &spec, &SynthOptions::default()).unwrap();
        assert!(lambda_max(&c.t).sqrt() <= 19.0);
        let slacks = input_sign_slacks(&a, &b, &spec, &c.p, &c.t, &c.k).unwrap();
        assert!(slacks.min() >= -1e-6, "{slacks:?}");
    }

    #[test]
    fn input_sign_embedding_verifies() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let c = input_sign_synthesis(&a, &b, &spec, &SynthOptions::default()).unwrap();
        let set = ModelSet::sign_pair(a, b).unwrap();
        let report = verify_certificate(&set, &spec, &c.to_certificate(), 1e-6).unwrap();
        assert!(report.feasible, "{report:?}");
        let general = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        assert!(max_abs(&(&general.p[0][1] - &c.t)) < 1e-6 * max_abs(&c.t));
    }

    #[test]
    fn large_gamma_cross_term_dominates_riccati() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.3]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let spec = unit_spec(2, 1, 1000.0);
        let c = input_sign_synthesis(&a, &b, &spec, &SynthOptions::default()).unwrap();
        assert!(lambda_min(&(&c.t - &c.p)) >= -1e-9);
        // one wrong-sign step at most; T stays within a fraction of P
        assert!(max_abs(&(&c.t - &c.p)) < 0.25 * max_abs(&c.p));
        let set = ModelSet::sign_pair(a, b).unwrap();
        assert!(verify_certificate(&set, &spec, &c.to_certificate(), 1e-6).unwrap().feasible);
    }

    #[test]
    fn bisection_on_scalar_model_matches_dense_sweep() {
        let set = ModelSet::new(vec![Model::new(DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 1.0))])
            .unwrap();
        let q = DMatrix::identity(1, 1);
        let r = DMatrix::identity(1, 1);
        let (lo, hi, steps) = (0.5, 4.0, 12);
        let res = gamma_bisect(&set, &q, &r, lo, hi, steps, &SynthOptions::default()).unwrap();
        // Dense oracle: smallest gamma on a fine grid where the Riccati solve succeeds.
        let step = (hi - lo) / 4096.0;
        let critical = (0..=4096)
            .map(|i| lo + i as f64 * step)
            .find(|&g| {
                let spec = GameSpec::new(q.clone(), r.clone(), g).unwrap();
                hinf_riccati(&set.get(0).a, &set.get(0).b, &spec, &RiccatiOptions::default()).is_ok()
            })
            .unwrap();
        let lattice = (hi - lo) / (1u64 << steps) as f64;
        assert!((res.gamma - critical).abs() <= lattice + step, "{} vs {}", res.gamma, critical);
    }

    #[test]
    fn bisection_errors() {
        let (a, b) = double_integrator();
        let set = ModelSet::sign_pair(a, b).unwrap();
        let i3 = DMatrix::identity(3, 3);
        let i1 = DMatrix::identity(1, 1);
        let res = gamma_bisect(&set, &i3, &i1, 1.0, 3.0, 4, &SynthOptions::default());
        assert!(matches!(res, Err(Error::InfeasibleAtGamma { .. })));
        assert!(gamma_bisect(&set, &i3, &i1, 3.0, 1.0, 4, &SynthOptions::default()).is_err());
    }

    #[test]
    fn three_model_certificate_verifies() {
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let set = ModelSet::new(vec![
            Model::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.9]), b.clone()),
            Model::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.9]), -&b),
            Model::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.3, 1.1]), b.clone() * 0.5),
        ])
        .unwrap();
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(1, 1);
        let res = gamma_bisect(&set, &q, &r, 1.0, 200.0, 10, &SynthOptions::default()).unwrap();
        let spec = GameSpec::new(q, r, res.gamma).unwrap();
        let report = verify_certificate(&set, &spec, &res.certificate, 1e-6).unwrap();
        assert!(report.feasible);
    }

    #[test]
    fn certificate_json_round_trip_is_lossless() {
        let (a, b) = double_integrator();
        let spec = unit_spec(3, 1, 19.0);
        let set = ModelSet::sign_pair(a, b).unwrap();
        let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
        let text = cert.to_json();
        let back = Certificate::<f64>::from_json(&text).unwrap();
        assert_eq!(back, cert);
        assert!(text.contains("\"N\""));
    }

    #[test]
    fn malformed_certificate_json() {
        assert!(Certificate::<f64>::from_json("{}").is_err());
        let bad = r#"{"gamma": 1.0, "n": 1, "m": 1, "N": 1, "K": [[[1.0]]], "P": [[[[1.0, 2.0]]]]}"#;
        assert!(matches!(Certificate::<f64>::from_json(bad), Err(Error::Dimension(_))));
    }

    fn example_certificate() -> &'static (ModelSet<f64>, GameSpec<f64>, Certificate<f64>) {
        static CELL: std::sync::OnceLock<(ModelSet<f64>, GameSpec<f64>, Certificate<f64>)> = std::sync::OnceLock::new();
        CELL.get_or_init(|| {
            let (a, b) = double_integrator();
            let set = ModelSet::sign_pair(a, b).unwrap();
            let spec = unit_spec(3, 1, 19.0);
            let cert = synth_certificate(&set, &spec, &SynthOptions::default()).unwrap();
            (set, spec, cert)
        })
    }

    proptest::proptest! {
        #[test]
        fn verified_certificate_holds_pointwise(coords in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let (set, spec, cert) = example_certificate();
            let x = DVector::from_vec(coords);
            for k in 0..2 {
                let u = -(&cert.k[k] * &x);
                let stage = linalg::quad(&spec.q, &x) + linalg::quad(&spec.r, &u);
                for i in 0..2 {
                    for j in 0..2 {
                        let yi = set.get(i).predict(&x, &u);
                        let yj = set.get(j).predict(&x, &u);
                        let lhs = stage + GammaForm::new(&cert.p[i][j], cert.gamma).unwrap().max_pair(&yi, &yj).value;
                        let rhs = linalg::quad(&cert.p[i][k], &x).max(linalg::quad(&cert.p[j][k], &x));
                        proptest::prop_assert!(lhs <= rhs + 1e-6 * x.norm_squared(), "({i},{j},{k}): {lhs} > {rhs}");
                    }
                }
            }
        }
    }
}
