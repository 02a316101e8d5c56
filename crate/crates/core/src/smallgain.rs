//! Small-gain certification of robust mean-square stability.
//!
//! The nominal drift is `F = -iJM - ½ J N_a† J N_a`, the uncertainty channel
//! sees `H(s) = C (sI - F)⁻¹ B` with `B = JΣẼᵀ` and `C = Ẽ#Σ`. A plant is
//! certified when `F` is Hurwitz, `‖H‖∞ < γ/2`, and a structured `P > 0`
//! witnessing the quadratic matrix inequality is found.
//!
//! The quadratic forms `x† A x` that appear in the dissipation argument only
//! see the structured part `(A + ΣA#Σ)/2` of `A`, up to the constant
//! `-½ tr(AJ)`. The Riccati equation is therefore solved with the structured
//! projections of `4BB†` and `C†C/γ²`; its stabilizing solution is then
//! structured exactly, and the dropped constant is carried into the bound
//! as [`CertificationReport::ordering_offset`].


use crate::error::{Error, Result, StageExt};
use crate::linalg::{self, c, max_abs, max_hermitian_eig, min_hermitian_eig, CMatrix, C64};
use crate::model::{j_matrix, sigma_conjugate, sigma_matrix, structured_part, QuantumModel};

/// Multiplier between the double commutator `[z,[z,V]]` and `-ẼΣJPᵀJẼᵀ`.
pub const MU_CONSTANT: f64 = 2.0;

/// A single-input single-output state-space triple `(F, B, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices {
    pub f: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

impl PlantMatrices {
    pub fn new(f: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let n = f.nrows();
        if n == 0 || f.ncols() != n || b.shape() != (n, 1) || c.shape() != (1, n) {
            return Err(Error::DimensionMismatch {
                what: "state-space triple".into(),
                expected: format!("F {n}x{n}, B {n}x1, C 1x{n}"),
                got: format!("F {:?}, B {:?}, C {:?}", f.shape(), b.shape(), c.shape()),
            });
        }
        Ok(Self { f, b, c })
    }

    pub fn states(&self) -> usize {
        self.f.nrows()
    }
}

pub fn compute_f(model: &QuantumModel) -> PlantMatrices {
    let n = model.n_a();
    let m = model.plant_coupling().row_modes();
    let j = j_matrix(n);
    let jm = j_matrix(m);
    let sigma = sigma_matrix(n);
    let na = model.plant_coupling().value();
    let i = c(0.0, 1.0);
    let f = -(&j * model.hamiltonian()) * i - &j * na.adjoint() * &jm * na * c(0.5, 0.0);
    let e = model.e_tilde();
    let b = &j * &sigma * e.transpose();
    let cm = linalg::conj(e) * &sigma;
    PlantMatrices { f, b, c: cm }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzTest {
    pub hurwitz: bool,
    pub abscissa: f64,
}

/// Hurwitz iff the spectral abscissa is below `-margin_tol`.
pub fn is_hurwitz(f: &CMatrix, margin_tol: f64) -> Result<HurwitzTest> {
    if f.nrows() != f.ncols() {
        return Err(Error::DimensionMismatch {
            what: "is_hurwitz".into(),
            expected: "square matrix".into(),
            got: format!("{}x{}", f.nrows(), f.ncols()),
        });
    }
    let abscissa = linalg::spectral_abscissa(f)?;
    Ok(HurwitzTest {
        hurwitz: abscissa < -margin_tol,
        abscissa,
    })
}

/// `H(iω) = C (iωI - F)⁻¹ B`.
pub fn freq_response(plant: &PlantMatrices, omega: f64) -> Result<C64> {
    let n = plant.states();
    let resolvent = linalg::identity(n) * c(0.0, omega) - &plant.f;
    let lu = resolvent.lu();
    let u = lu.u();
    let scale = max_abs(&plant.f).max(omega.abs()).max(1.0);
    let pivot = (0..n).fold(f64::INFINITY, |a, k| a.min(u[(k, k)].norm()));
    if pivot <= 1e-14 * scale {
        return Err(Error::PoleProximity { omega });
    }
    let x = lu
        .solve(&plant.b)
        .ok_or(Error::PoleProximity { omega })?;
    Ok((&plant.c * x)[(0, 0)])
}

/// Tuning of the H∞ bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfOptions {
    /// Stop once the bracket is narrower than `rel_tol` times its lower end.
    pub rel_tol: f64,
    /// An eigenvalue with `|Re λ|` below this counts as imaginary.
    pub axis_tol: f64,
    /// Log-spaced frequencies used for the initial lower bound.
    pub grid_points: usize,
    /// Grid covers `[lo, hi]·‖F‖₂`.
    pub grid_span: (f64, f64),
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            axis_tol: 1e-8,
            grid_points: 512,
            grid_span: (1e-4, 1e4),
        }
    }
}

/// `[[F, BB†/g], [-C†C/g, -F†]]` has an eigenvalue on the imaginary axis
/// exactly when `g ≤ ‖H‖∞` (for Hurwitz `F`).
fn level_crossing(plant: &PlantMatrices, g: f64, axis_tol: f64) -> Result<bool> {
    let n = plant.states();
    let inv_g = c(1.0 / g, 0.0);
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&plant.f);
    h.view_mut((0, n), (n, n))
        .copy_from(&(&plant.b * plant.b.adjoint() * inv_g));
    h.view_mut((n, 0), (n, n))
        .copy_from(&(-(plant.c.adjoint() * &plant.c) * inv_g));
    h.view_mut((n, n), (n, n)).copy_from(&(-plant.f.adjoint()));
    Ok(linalg::eigenvalues(&h)?
        .iter()
        .any(|z| z.re.abs() < axis_tol))
}

pub fn hinf_norm(plant: &PlantMatrices, rel_tol: f64) -> Result<f64> {
    hinf_norm_with(
        plant,
        &HinfOptions {
            rel_tol,
            ..HinfOptions::default()
        },
    )
}

pub fn hinf_norm_with(plant: &PlantMatrices, opts: &HinfOptions) -> Result<f64> {
    if !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rel_tol".into(),
            reason: "must be positive".into(),
        });
    }
    let abscissa = linalg::spectral_abscissa(&plant.f)?;
    if abscissa >= 0.0 {
        return Err(Error::Precondition(format!(
            "H-infinity norm needs a Hurwitz drift (spectral abscissa {abscissa:.3e})"
        )));
    }
    if max_abs(&plant.b) == 0.0 || max_abs(&plant.c) == 0.0 {
        return Ok(0.0);
    }

    let scale = linalg::norm2(&plant.f).max(f64::MIN_POSITIVE);
    let (lo_w, hi_w) = (opts.grid_span.0 * scale, opts.grid_span.1 * scale);
    let pts = opts.grid_points.max(2);
    let mut lower = freq_response(plant, 0.0)?.norm();
    for k in 0..pts {
        let t = k as f64 / (pts - 1) as f64;
        let w = lo_w * (hi_w / lo_w).powf(t);
        if let Ok(h) = freq_response(plant, w) {
            lower = lower.max(h.norm());
        }
    }
    if lower == 0.0 {
        return Ok(0.0);
    }

    let mut upper = 10.0 * lower;
    let mut expansions = 0;
    while level_crossing(plant, upper, opts.axis_tol)? {
        lower = upper;
        upper *= 10.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numeric("H-infinity bracket did not close".into()));
        }
    }
    while upper - lower > opts.rel_tol * lower {
        let mid = 0.5 * (lower + upper);
        if level_crossing(plant, mid, opts.axis_tol)? {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    Ok(0.5 * (lower + upper))
}

/// A structured Hermitian `P > 0` certifying the quadratic matrix inequality,
/// with the diagnostics gathered while verifying it.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredP {
    pub p: CMatrix,
    /// Shift `ε` used in the Riccati equation.
    pub epsilon: f64,
    /// Max entry of the Riccati residual (structured quadratic terms, with `ε`).
    pub are_residual: f64,
    pub hermitian_residual: f64,
    pub structure_residual: f64,
    pub min_eig: f64,
    /// Largest eigenvalue of the structured QMI left side (without `ε`).
    pub qmi_max_eig: f64,
    /// Largest eigenvalue of the unprojected left side
    /// `F†P + PF + 4PBB†P + C†C/γ²` (diagnostic only; may be positive).
    pub unprojected_qmi_max_eig: f64,
}

fn quadratic_weights(plant: &PlantMatrices, gamma: f64) -> (CMatrix, CMatrix) {
    let r = &plant.b * plant.b.adjoint() * c(4.0, 0.0);
    let inv_g2 = if gamma.is_infinite() {
        0.0
    } else {
        1.0 / (gamma * gamma)
    };
    let q = plant.c.adjoint() * &plant.c * c(inv_g2, 0.0);
    (r, q)
}

/// `F†P + PF + 4P R P + Q` with the structured projections of `R = BB†`
/// and `Q = C†C/γ²` when `structured` is set.
pub fn qmi_lhs(plant: &PlantMatrices, gamma: f64, p: &CMatrix, structured: bool) -> CMatrix {
    let (mut r, mut q) = quadratic_weights(plant, gamma);
    if structured {
        r = structured_part(&r);
        q = structured_part(&q);
    }
    plant.f.adjoint() * p + p * &plant.f + p * r * p + q
}

fn check_plant_square(plant: &PlantMatrices, p: &CMatrix) -> Result<()> {
    let n = plant.states();
    if !n.is_multiple_of(2) || p.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "P".into(),
            expected: format!("{n}x{n} with even n"),
            got: format!("{}x{}", p.nrows(), p.ncols()),
        });
    }
    Ok(())
}

pub fn solve_qmi(plant: &PlantMatrices, gamma: f64, eps: f64) -> Result<StructuredP> {
    let n = plant.states();
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidDimension(
            "QMI needs a doubled-up plant (even state count)".into(),
        ));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma".into(),
            reason: "must be positive".into(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps".into(),
            reason: "must be positive".into(),
        });
    }
    let (r, q) = quadratic_weights(plant, gamma);
    let r_s = structured_part(&r);
    let q_eps = structured_part(&q) + linalg::identity(n) * c(eps, 0.0);

    let p_raw = linalg::care(&plant.f, &r_s, &q_eps, 1e-10).map_err(|e| {
        Error::InfeasibleEpsilon {
            epsilon: eps,
            reason: e.to_string(),
        }
    })?;
    let p = structured_part(&linalg::hermitian_part(&p_raw));

    let scale = max_abs(&plant.f).max(1.0);
    let residual_mat = plant.f.adjoint() * &p + &p * &plant.f + &p * &r_s * &p + &q_eps;
    let are_residual = max_abs(&residual_mat);
    let hermitian_residual = max_abs(&(&p - p.adjoint()));
    let structure_residual = max_abs(&(sigma_conjugate(&p) - &p));
    let min_eig = min_hermitian_eig(&p);
    if !(min_eig > 0.0) {
        return Err(Error::Infeasible(format!(
            "Riccati solution is not positive definite (min eigenvalue {min_eig:.3e})"
        )));
    }
    if are_residual > 1e-8 * scale {
        return Err(Error::InfeasibleEpsilon {
            epsilon: eps,
            reason: format!("Riccati residual {are_residual:.3e} too large"),
        });
    }
    let qmi_max_eig = max_hermitian_eig(&qmi_lhs(plant, gamma, &p, true));
    if !(qmi_max_eig < 0.0) {
        return Err(Error::Infeasible(format!(
            "quadratic matrix inequality not strict (max eigenvalue {qmi_max_eig:.3e})"
        )));
    }
    let unprojected_qmi_max_eig = max_hermitian_eig(&qmi_lhs(plant, gamma, &p, false));
    Ok(StructuredP {
        p,
        epsilon: eps,
        are_residual,
        hermitian_residual,
        structure_residual,
        min_eig,
        qmi_max_eig,
        unprojected_qmi_max_eig,
    })
}

/// `μ = [z, [z, V]]` for `V = x†Px`, `z = Ẽx`, evaluated in closed form as
/// `κ_μ · (-ẼΣJPᵀJẼᵀ)` with `κ_μ = 2`.
pub fn compute_mu(p: &CMatrix, e_tilde: &CMatrix) -> Result<C64> {
    let dim = p.nrows();
    if dim == 0 || !dim.is_multiple_of(2) || p.ncols() != dim || e_tilde.shape() != (1, dim) {
        return Err(Error::DimensionMismatch {
            what: "compute_mu".into(),
            expected: "P 2n x 2n, E_tilde 1 x 2n".into(),
            got: format!("P {:?}, E_tilde {:?}", p.shape(), e_tilde.shape()),
        });
    }
    let n = dim / 2;
    let j = j_matrix(n);
    let s = sigma_matrix(n);
    let v = e_tilde * &s * &j * p.transpose() * &j * e_tilde.transpose();
    Ok(-v[(0, 0)] * MU_CONSTANT)
}

/// `λ̃ = tr(P J N_a† diag(I, 0) N_a J)`.
pub fn compute_lambda_tilde(p: &CMatrix, n_a: &CMatrix) -> Result<f64> {
    let dim = p.nrows();
    if !dim.is_multiple_of(2) || p.ncols() != dim || n_a.ncols() != dim || !n_a.nrows().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            what: "compute_lambda_tilde".into(),
            expected: "P 2n x 2n, N_a 2m x 2n".into(),
            got: format!("P {:?}, N_a {:?}", p.shape(), n_a.shape()),
        });
    }
    let j = j_matrix(dim / 2);
    let m = n_a.nrows() / 2;
    let mut upper = CMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        upper[(k, k)] = c(1.0, 0.0);
    }
    let tr = (p * &j * n_a.adjoint() * upper * n_a * &j).trace();
    let scale = max_abs(p).max(1.0) * max_abs(n_a).powi(2).max(1.0);
    if tr.im.abs() > 1e-10 * scale || tr.re < -1e-10 * scale {
        return Err(Error::InconsistentCertificate(format!(
            "coupling trace {:.3e}{:+.3e}i is not a nonnegative real",
            tr.re, tr.im
        )));
    }
    Ok(tr.re.max(0.0))
}

/// Slack `δ₀`: smallest eigenvalue of minus the structured QMI left side.
pub fn compute_delta0(plant: &PlantMatrices, gamma: f64, p: &CMatrix) -> Result<f64> {
    check_plant_square(plant, p)?;
    let d = -max_hermitian_eig(&qmi_lhs(plant, gamma, p, true));
    if !(d > 0.0) {
        return Err(Error::InconsistentCertificate(format!(
            "QMI slack {d:.3e} is not positive"
        )));
    }
    Ok(d)
}

/// Constant `-½ tr((4PBB†P + C†C/γ²) J)` picked up when the quadratic
/// terms are replaced by their structured projections.
pub fn ordering_offset(plant: &PlantMatrices, gamma: f64, p: &CMatrix) -> Result<f64> {
    check_plant_square(plant, p)?;
    let (r, q) = quadratic_weights(plant, gamma);
    let j = j_matrix(plant.states() / 2);
    let a = p * r * p + q;
    Ok(-0.5 * (a * j).trace().re)
}

/// `c = (λ + |μ|²/4 + δ₁ + δ₂) / δ₀`.
pub fn compute_c_bound(lambda: f64, mu: C64, delta0: f64, delta1: f64, delta2: f64) -> Result<f64> {
    if !(delta0 > 0.0) {
        return Err(Error::Precondition(format!(
            "delta0 must be positive, got {delta0}"
        )));
    }
    if !(delta1 >= 0.0) || !(delta2 >= 0.0) {
        return Err(Error::Precondition(
            "delta1 and delta2 must be nonnegative".into(),
        ));
    }
    Ok((lambda + mu.norm_sqr() / 4.0 + delta1 + delta2) / delta0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    GainViolated,
    NotHurwitz,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::GainViolated => "gain-violated",
            Verdict::NotHurwitz => "not-hurwitz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub hurwitz_margin: f64,
    pub hinf: HinfOptions,
    /// First `ε` tried is `epsilon_start · ‖F‖₂`, halved down to `epsilon_floor · ‖F‖₂`.
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            hurwitz_margin: 1e-9,
            hinf: HinfOptions::default(),
            epsilon_start: 1e-2,
            epsilon_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub f_eigenvalues: Vec<C64>,
    pub hurwitz: HurwitzTest,
    pub hinf: Option<f64>,
    pub gamma: f64,
    /// `γ/2 - ‖H‖∞`
    pub margin: Option<f64>,
    pub p: Option<StructuredP>,
    pub mu: Option<C64>,
    pub lambda_tilde: Option<f64>,
    pub ordering_offset: Option<f64>,
    pub delta0: Option<f64>,
    pub delta1: f64,
    pub delta2: f64,
    pub c_bound: Option<f64>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

pub fn certify(
    model: &QuantumModel,
    gamma: f64,
    delta1: f64,
    delta2: f64,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma".into(),
            reason: "must be positive (use +inf for no gain constraint)".into(),
        });
    }
    if !(delta1 >= 0.0 && delta1.is_finite()) || !(delta2 >= 0.0 && delta2.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta1/delta2".into(),
            reason: "must be finite and nonnegative".into(),
        });
    }
    let plant = compute_f(model);
    let mut f_eigenvalues = linalg::eigenvalues(&plant.f).stage("compute_F")?;
    f_eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let hurwitz = is_hurwitz(&plant.f, opts.hurwitz_margin).stage("is_hurwitz")?;
    let mut report = CertificationReport {
        f_eigenvalues,
        hurwitz,
        hinf: None,
        gamma,
        margin: None,
        p: None,
        mu: None,
        lambda_tilde: None,
        ordering_offset: None,
        delta0: None,
        delta1,
        delta2,
        c_bound: None,
        verdict: Verdict::NotHurwitz,
        warnings: Vec::new(),
    };
    if !hurwitz.hurwitz {
        return Ok(report);
    }

    let hinf = hinf_norm_with(&plant, &opts.hinf).stage("hinf_norm")?;
    let margin = gamma / 2.0 - hinf;
    report.hinf = Some(hinf);
    report.margin = Some(margin);
    if !(margin > 0.0) {
        report.verdict = Verdict::GainViolated;
        return Ok(report);
    }

    let scale = linalg::norm2(&plant.f);
    let floor = opts.epsilon_floor * scale;
    let mut eps = opts.epsilon_start * scale;
    let mut last_err = None;
    let mut cert = None;
    while eps >= floor {
        match solve_qmi(&plant, gamma, eps) {
            Ok(p) => {
                cert = Some(p);
                break;
            }
            Err(e @ (Error::InfeasibleEpsilon { .. } | Error::Infeasible(_))) => {
                last_err = Some(e);
                eps *= 0.5;
            }
            Err(e) => return Err(e.at("solve_qmi")),
        }
    }
    let cert = match cert {
        Some(c) => c,
        None => {
            let e = last_err.unwrap_or_else(|| Error::Infeasible("epsilon floor reached".into()));
            return Err(Error::Infeasible(format!(
                "no certificate down to epsilon {floor:.3e}: {e}"
            ))
            .at("solve_qmi"));
        }
    };

    let mu = compute_mu(&cert.p, model.e_tilde()).stage("compute_mu")?;
    let lambda_tilde = compute_lambda_tilde(&cert.p, model.plant_coupling().value())
        .stage("compute_lambda_tilde")?;
    let offset = ordering_offset(&plant, gamma, &cert.p).stage("ordering_offset")?;
    let delta0 = compute_delta0(&plant, gamma, &cert.p).stage("compute_delta0")?;
    // The shift makes the slack exactly ε up to the Riccati residual.
    if delta0 < cert.epsilon - 1e-8 * max_abs(&plant.f).max(1.0) {
        report.warnings.push(format!(
            "QMI slack delta0 = {delta0:.6e} does not exceed the Riccati shift epsilon = {:.6e}",
            cert.epsilon
        ));
    }
    let c_bound = compute_c_bound(lambda_tilde + offset, mu, delta0, delta1, delta2)
        .stage("compute_c_bound")?;

    report.mu = Some(mu);
    report.lambda_tilde = Some(lambda_tilde);
    report.ordering_offset = Some(offset);
    report.delta0 = Some(delta0);
    report.c_bound = Some(c_bound);
    report.p = Some(cert);
    report.verdict = Verdict::Certified;
    Ok(report)
}
