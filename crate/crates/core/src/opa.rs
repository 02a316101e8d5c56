//! Optical parametric amplifier: the fundamental mode `a` is the plant, the
//! second-harmonic mode `b` is the uncertainty, and linearizing about the
//! steady-state amplitudes `(ā, b̄)` gives a bilinear interaction.

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg::{c, identity, CMatrix, C64};
use crate::model::{validate_model, QuantumModel, RawModel};
use crate::smallgain::{certify, CertificationReport, CertifyOptions, Verdict};
use crate::uncertainty::{qsiqc_params, LinearUncertainty, QsiqcParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaParams {
    pub chi: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub abar: C64,
    pub bbar: C64,
}

impl OpaParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chi", self.chi), ("kappa_a", self.kappa_a), ("kappa_b", self.kappa_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        for (name, z) in [("abar", self.abar), ("bbar", self.bbar)] {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(())
    }

    /// `g = 2χā`
    pub fn coupling(&self) -> C64 {
        self.abar * (2.0 * self.chi)
    }
}

#[derive(Debug, Clone)]
pub struct OpaSystem {
    pub model: QuantumModel,
    pub coupling: C64,
    pub uncertainty: LinearUncertainty,
}

pub fn build_opa_model(p: &OpaParams) -> Result<OpaSystem> {
    p.validate()?;
    let i = c(0.0, 1.0);
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), -i * p.chi * p.bbar, i * p.chi * p.bbar.conj(), c(0.0, 0.0)],
    );
    let model = validate_model(RawModel {
        n_a: 1,
        n_b: 1,
        m,
        n_a_coupling: identity(2) * c(p.kappa_a.sqrt(), 0.0),
        n_b_coupling: identity(2) * c(p.kappa_b.sqrt(), 0.0),
        e_tilde: CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]),
    })?;
    let coupling = p.coupling();
    let uncertainty = LinearUncertainty::from_bilinear_coupling(coupling, p.kappa_b)?;
    Ok(OpaSystem {
        model,
        coupling,
        uncertainty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    /// Real poles `-κ_a/2 ∓ χ|b̄|`, ascending.
    pub f_eigs: [f64; 2],
    pub hurwitz: bool,
    /// `2κ_a/(κ_a² - 4χ²|b̄|²)`; `None` when the drift is not Hurwitz.
    pub h0_mag: Option<f64>,
    /// `8χ²|ā|²/κ_b`
    pub g_norm: f64,
    /// `κ_b/(8χ²|ā|²)`
    pub gamma: f64,
    /// `4χ²|ā|²`
    pub delta1: f64,
    /// `4χ²(8(κ_a/κ_b)|ā|² + |b̄|²)`, compared against `κ_a²`.
    pub lhs: f64,
    pub certified: bool,
}

pub fn closed_form_quantities(p: &OpaParams) -> ClosedForm {
    let chi2 = p.chi * p.chi;
    let a2 = p.abar.norm_sqr();
    let b2 = p.bbar.norm_sqr();
    let half = p.kappa_a / 2.0;
    let split = p.chi * p.bbar.norm();
    let hurwitz = split < half;
    let g_norm = 8.0 * chi2 * a2 / p.kappa_b;
    let lhs = 4.0 * chi2 * (8.0 * (p.kappa_a / p.kappa_b) * a2 + b2);
    ClosedForm {
        f_eigs: [-half - split, -half + split],
        hurwitz,
        h0_mag: hurwitz.then(|| 2.0 * p.kappa_a / (p.kappa_a * p.kappa_a - 4.0 * chi2 * b2)),
        g_norm,
        gamma: if g_norm == 0.0 { f64::INFINITY } else { 1.0 / g_norm },
        delta1: 4.0 * chi2 * a2,
        lhs,
        certified: lhs < p.kappa_a * p.kappa_a,
    }
}

/// Closed forms next to the generic pipeline for one parameter tuple.
#[derive(Debug, Clone)]
pub struct Agreement {
    pub params: OpaParams,
    pub closed: ClosedForm,
    pub qsiqc: QsiqcParams,
    pub report: CertificationReport,
    /// `|LHS - κ_a²| ≤ tol·κ_a²`: verdicts are not compared here.
    pub in_boundary_band: bool,
    pub verdict_match: bool,
    /// Relative errors of `(‖H‖∞, γ, δ₁)`; `None` when not comparable.
    pub hinf_rel_err: Option<f64>,
    pub gamma_rel_err: f64,
    pub delta1_rel_err: f64,
    /// Quantities outside `tol`, by name.
    pub divergent: Vec<&'static str>,
}

impl Agreement {
    pub fn agrees(&self) -> bool {
        self.divergent.is_empty()
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Runs both paths and records every disagreement without failing.
pub fn compare_paths(p: &OpaParams, tol: f64, opts: &CertifyOptions) -> Result<Agreement> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol".into(),
            reason: "must be positive".into(),
        });
    }
    let sys = build_opa_model(p)?;
    let closed = closed_form_quantities(p);
    let qsiqc = qsiqc_params(&sys.uncertainty, opts.hinf.rel_tol)?;
    let report = certify(&sys.model, qsiqc.gamma, qsiqc.delta1, qsiqc.delta2, opts)?;

    let ka2 = p.kappa_a * p.kappa_a;
    let in_boundary_band = (closed.lhs - ka2).abs() <= tol * ka2;
    let verdict_match = closed.certified == (report.verdict == Verdict::Certified);
    let hinf_rel_err = match (report.hinf, closed.h0_mag) {
        (Some(h), Some(h0)) => Some(rel_err(h, h0)),
        _ => None,
    };
    let gamma_rel_err = rel_err(qsiqc.gamma, closed.gamma);
    let delta1_rel_err = rel_err(qsiqc.delta1, closed.delta1);

    let mut divergent = Vec::new();
    if !verdict_match && !in_boundary_band {
        divergent.push("verdict");
    }
    if hinf_rel_err.is_some_and(|e| e > tol) {
        divergent.push("hinf");
    }
    if gamma_rel_err > tol {
        divergent.push("gamma");
    }
    if delta1_rel_err > tol {
        divergent.push("delta1");
    }
    Ok(Agreement {
        params: *p,
        closed,
        qsiqc,
        report,
        in_boundary_band,
        verdict_match,
        hinf_rel_err,
        gamma_rel_err,
        delta1_rel_err,
        divergent,
    })
}

/// Like [`compare_paths`], failing when any quantity diverges.
pub fn cross_validate(p: &OpaParams, tol: f64) -> Result<Agreement> {
    let agreement = compare_paths(p, tol, &CertifyOptions::default())?;
    if agreement.agrees() {
        Ok(agreement)
    } else {
        Err(Error::CrossValidation(format!(
            "generic pipeline and closed forms disagree on {}",
            agreement.divergent.join(", ")
        )))
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi / lo).ln()).exp()
}

/// Log-uniform `χ ∈ [1e-3, 2]`, `κ_a, κ_b ∈ [0.1, 10]`, `|ā|, |b̄| ∈ [0.05, 5]`
/// with uniform phases.
pub fn sample_params<R: Rng>(rng: &mut R) -> OpaParams {
    let chi = log_uniform(rng, 1e-3, 2.0);
    let kappa_a = log_uniform(rng, 0.1, 10.0);
    let kappa_b = log_uniform(rng, 0.1, 10.0);
    let a_mag = log_uniform(rng, 0.05, 5.0);
    let b_mag = log_uniform(rng, 0.05, 5.0);
    let a_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let b_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    OpaParams {
        chi,
        kappa_a,
        kappa_b,
        abar: C64::from_polar(a_mag, a_phase),
        bbar: C64::from_polar(b_mag, b_phase),
    }
}

pub fn sample_sweep(n: usize, seed: u64) -> Vec<OpaParams> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_params(&mut rng)).collect()
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    pub params: OpaParams,
    pub outcome: std::result::Result<Agreement, Error>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub seed: u64,
    pub tol: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn disagreements(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| !matches!(&r.outcome, Ok(a) if a.agrees()))
            .count()
    }

    pub fn boundary_cases(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(&r.outcome, Ok(a) if a.in_boundary_band))
            .count()
    }

    pub fn certified(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(&r.outcome, Ok(a) if a.report.verdict == Verdict::Certified))
            .count()
    }
}

/// Rows come back in sample order.
pub fn sweep(n: usize, seed: u64, tol: f64) -> SweepReport {
    let opts = CertifyOptions::default();
    let rows = sample_sweep(n, seed)
        .into_iter()
        .enumerate()
        .map(|(index, params)| SweepRow {
            index,
            params,
            outcome: compare_paths(&params, tol, &opts),
        })
        .collect();
    SweepReport { seed, tol, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn stable() -> OpaParams {
        OpaParams {
            chi: 0.1,
            kappa_a: 2.0,
            kappa_b: 4.0,
            abar: c(1.0, 0.0),
            bbar: c(1.0, 0.0),
        }
    }

    #[test]
    fn model_matrices() {
        let sys = build_opa_model(&stable()).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.1), c(0.0, 0.1), c(0.0, 0.0)]);
        assert!(max_abs(&(sys.model.hamiltonian() - expect)) < 1e-16);
        assert!((sys.coupling - c(0.2, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = stable();
        p.kappa_b = 0.0;
        assert!(build_opa_model(&p).is_err());
        p = stable();
        p.chi = -1.0;
        assert!(build_opa_model(&p).is_err());
    }

    #[test]
    fn closed_forms() {
        let cf = closed_form_quantities(&stable());
        assert!((cf.h0_mag.unwrap() - 4.0 / 3.96).abs() < 1e-15);
        assert!((cf.gamma - 50.0).abs() < 1e-12);
        assert!((cf.delta1 - 0.04).abs() < 1e-16);
        assert!((cf.lhs - 0.2).abs() < 1e-15);
        assert!(cf.certified && cf.hurwitz);
        assert_eq!(cf.f_eigs, [-1.1, -0.9]);

        let mut p = stable();
        p.chi = 1e-9;
        let cf = closed_form_quantities(&p);
        assert!(cf.certified && (cf.h0_mag.unwrap() - 1.0).abs() < 1e-12);

        p = stable();
        p.chi = 1.2;
        assert!(!closed_form_quantities(&p).hurwitz);
    }

    #[test]
    fn violated_closed_form() {
        let p = OpaParams {
            chi: 0.5,
            kappa_a: 2.0,
            kappa_b: 0.1,
            abar: c(2.0, 0.0),
            bbar: c(0.5, 0.0),
        };
        let cf = closed_form_quantities(&p);
        assert!((cf.lhs - 640.25).abs() < 1e-10);
        assert!(!cf.certified && cf.hurwitz);
        let agr = cross_validate(&p, 1e-6).unwrap();
        assert_eq!(agr.report.verdict, Verdict::GainViolated);
    }

    #[test]
    fn both_paths_agree_on_certified_instance() {
        let agr = cross_validate(&stable(), 1e-6).unwrap();
        assert_eq!(agr.report.verdict, Verdict::Certified);
        assert!(agr.hinf_rel_err.unwrap() < 1e-8);
        assert!(agr.gamma_rel_err < 1e-8 && agr.delta1_rel_err < 1e-10);
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = sample_sweep(5, 42);
        let b = sample_sweep(5, 42);
        assert_eq!(a, b);
        assert_ne!(a, sample_sweep(5, 43));
        for p in a {
            assert!(p.chi >= 1e-3 && p.chi <= 2.0);
            assert!(p.abar.norm() >= 0.05 - 1e-12 && p.abar.norm() <= 5.0 + 1e-12);
        }
    }
}
