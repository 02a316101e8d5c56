//! Linear uncertainty subsystems driven by the plant output `z` and their
//! quadratic-constraint parameters `(γ, δ₁, δ₂)`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, max_abs, CMatrix, C64};
use crate::model::QuantumModel;
use crate::smallgain::{hinf_norm, PlantMatrices};

/// `db = A_u b dt + B_u z dt + noise`, `w₁ = C_u b`, with Itô covariance
/// `NoiseCov` per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearUncertainty {
    a_u: CMatrix,
    b_u: CMatrix,
    c_u: CMatrix,
    noise_cov: CMatrix,
}

impl LinearUncertainty {
    pub fn new(a_u: CMatrix, b_u: CMatrix, c_u: CMatrix, noise_cov: CMatrix) -> Result<Self> {
        let n = a_u.nrows();
        if n == 0
            || a_u.ncols() != n
            || b_u.shape() != (n, 1)
            || c_u.shape() != (1, n)
            || noise_cov.shape() != (n, n)
        {
            return Err(Error::DimensionMismatch {
                what: "uncertainty system".into(),
                expected: format!("A_u {n}x{n}, B_u {n}x1, C_u 1x{n}, NoiseCov {n}x{n}"),
                got: format!(
                    "A_u {:?}, B_u {:?}, C_u {:?}, NoiseCov {:?}",
                    a_u.shape(),
                    b_u.shape(),
                    c_u.shape(),
                    noise_cov.shape()
                ),
            });
        }
        for (name, m) in [("A_u", &a_u), ("B_u", &b_u), ("C_u", &c_u), ("NoiseCov", &noise_cov)] {
            linalg::check_finite(name, m)?;
        }
        let (res, row, col) = linalg::max_abs_at(&(&noise_cov - noise_cov.adjoint()));
        let scale = max_abs(&noise_cov).max(1.0);
        if res > 1e-12 * scale {
            return Err(Error::NotHermitian {
                matrix: "NoiseCov".into(),
                row,
                col,
                residual: res,
            });
        }
        let min = linalg::min_hermitian_eig(&noise_cov);
        if min < -1e-12 * scale {
            return Err(Error::InvalidParameter {
                name: "NoiseCov".into(),
                reason: format!("not positive semidefinite (min eigenvalue {min:.3e})"),
            });
        }
        Ok(Self {
            a_u,
            b_u,
            c_u,
            noise_cov: linalg::hermitian_part(&noise_cov),
        })
    }

    /// One damped mode `b` with interaction `f = i(g b* z - g* z* b)`.
    pub fn from_bilinear_coupling(g: C64, kappa_b: f64) -> Result<Self> {
        if !(kappa_b > 0.0 && kappa_b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "kappa_b".into(),
                reason: format!("decay rate must be positive and finite, got {kappa_b}"),
            });
        }
        if !(g.re.is_finite() && g.im.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "g".into(),
                reason: "coupling must be finite".into(),
            });
        }
        let one = |z: C64| CMatrix::from_element(1, 1, z);
        Self::new(
            one(c(-kappa_b / 2.0, 0.0)),
            one(g),
            one(-c(0.0, 1.0) * g.conj()),
            one(c(kappa_b, 0.0)),
        )
    }

    /// Uncertainty modes of `model` damped through `N_b`, with interaction
    /// `f = i Σ_j (g_j b_j* z - g_j* z* b_j)`. Only the annihilation sector is
    /// kept, so `N_b` must not mix `b` with `b#`.
    pub fn from_model_coupling(model: &QuantumModel, coupling: &[C64]) -> Result<Self> {
        let nb = model.uncertainty_coupling();
        let n = model.n_b();
        if coupling.len() != n {
            return Err(Error::DimensionMismatch {
                what: "coupling".into(),
                expected: format!("{n} coefficients"),
                got: format!("{}", coupling.len()),
            });
        }
        if max_abs(&nb.block2()) != 0.0 {
            return Err(Error::Unsupported(
                "uncertainty coupling N_b with a nonzero b# block".into(),
            ));
        }
        // with N_b2 = 0 the annihilation sector sees only N_b1
        let n1 = nb.block1();
        let a_u = -(n1.adjoint() * &n1) * c(0.5, 0.0);
        let noise_cov = n1.adjoint() * &n1;
        let b_u = CMatrix::from_iterator(n, 1, coupling.iter().copied());
        let c_u = CMatrix::from_iterator(1, n, coupling.iter().map(|g| -c(0.0, 1.0) * g.conj()));
        Self::new(a_u, b_u, c_u, noise_cov)
    }

    pub fn a_u(&self) -> &CMatrix {
        &self.a_u
    }
    pub fn b_u(&self) -> &CMatrix {
        &self.b_u
    }
    pub fn c_u(&self) -> &CMatrix {
        &self.c_u
    }
    pub fn noise_cov(&self) -> &CMatrix {
        &self.noise_cov
    }

    /// The transfer `z ↦ w₁` as a state-space triple.
    pub fn transfer(&self) -> PlantMatrices {
        PlantMatrices {
            f: self.a_u.clone(),
            b: self.b_u.clone(),
            c: self.c_u.clone(),
        }
    }

    fn require_hurwitz(&self) -> Result<()> {
        let abscissa = linalg::spectral_abscissa(&self.a_u)?;
        if abscissa < 0.0 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "uncertainty drift A_u is not Hurwitz (spectral abscissa {abscissa:.3e})"
            )))
        }
    }
}

/// `γ = 1/‖C_u (sI - A_u)⁻¹ B_u‖∞`, `+∞` for a zero transfer.
pub fn gain_gamma(u: &LinearUncertainty, rel_tol: f64) -> Result<f64> {
    u.require_hurwitz()?;
    let norm = hinf_norm(&u.transfer(), rel_tol)?;
    Ok(if norm == 0.0 { f64::INFINITY } else { 1.0 / norm })
}

/// Steady-state covariance `C_u X C_u†` of `w₁` with `A_u X + X A_u† + NoiseCov = 0`.
pub fn steady_state_delta1(u: &LinearUncertainty) -> Result<f64> {
    u.require_hurwitz()?;
    let x = linalg::lyapunov(&u.a_u, &u.noise_cov)?;
    let v = (&u.c_u * x * u.c_u.adjoint())[(0, 0)];
    Ok(v.re.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsiqcParams {
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// `δ₂` is zero since a bilinear interaction has no second `z`-derivative.
pub fn qsiqc_params(u: &LinearUncertainty, rel_tol: f64) -> Result<QsiqcParams> {
    Ok(QsiqcParams {
        gamma: gain_gamma(u, rel_tol)?,
        delta1: steady_state_delta1(u)?,
        delta2: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opa_bilinear_system() {
        let u = LinearUncertainty::from_bilinear_coupling(c(0.2, 0.0), 4.0).unwrap();
        assert_eq!(u.a_u()[(0, 0)], c(-2.0, 0.0));
        assert_eq!(u.b_u()[(0, 0)], c(0.2, 0.0));
        assert_eq!(u.c_u()[(0, 0)], c(0.0, -0.2));
        assert_eq!(u.noise_cov()[(0, 0)], c(4.0, 0.0));
    }

    #[test]
    fn imaginary_amplitude_output_map() {
        let chi = 0.1;
        let u = LinearUncertainty::from_bilinear_coupling(c(0.0, 2.0 * chi), 4.0).unwrap();
        assert!((u.c_u()[(0, 0)] - c(-2.0 * chi, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn rejects_bad_rate() {
        for k in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                LinearUncertainty::from_bilinear_coupling(c(1.0, 0.0), k),
                Err(Error::InvalidParameter { .. })
            ));
        }
    }

    #[test]
    fn opa_parameters() {
        let u = LinearUncertainty::from_bilinear_coupling(c(0.2, 0.0), 4.0).unwrap();
        let q = qsiqc_params(&u, 1e-12).unwrap();
        assert!((q.gamma - 50.0).abs() < 1e-8 * 50.0);
        assert!((q.delta1 - 0.04).abs() < 1e-12);
        assert_eq!(q.delta2, 0.0);

        let u = LinearUncertainty::from_bilinear_coupling(c(0.2, 0.0), 8.0).unwrap();
        assert!((gain_gamma(&u, 1e-12).unwrap() - 100.0).abs() < 1e-8 * 100.0);
        assert!((steady_state_delta1(&u).unwrap() - 0.04).abs() < 1e-12);

        let u = LinearUncertainty::from_bilinear_coupling(c(0.4, 0.0), 4.0).unwrap();
        let q2 = qsiqc_params(&u, 1e-12).unwrap();
        assert!((q2.gamma - 12.5).abs() < 1e-8 * 12.5);
        assert!((q2.delta1 - 0.16).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling() {
        let u = LinearUncertainty::from_bilinear_coupling(c(0.0, 0.0), 3.0).unwrap();
        let q = qsiqc_params(&u, 1e-10).unwrap();
        assert_eq!(q.gamma, f64::INFINITY);
        assert_eq!(q.delta1, 0.0);
    }

    #[test]
    fn zero_noise_gives_zero_delta1() {
        let one = |z: C64| CMatrix::from_element(1, 1, z);
        let u = LinearUncertainty::new(one(c(-1.0, 0.0)), one(c(1.0, 0.0)), one(c(1.0, 0.0)), one(c(0.0, 0.0))).unwrap();
        assert_eq!(steady_state_delta1(&u).unwrap(), 0.0);
    }

    #[test]
    fn non_hurwitz_is_precondition() {
        let one = |z: C64| CMatrix::from_element(1, 1, z);
        let u = LinearUncertainty::new(one(c(0.5, 0.0)), one(c(1.0, 0.0)), one(c(1.0, 0.0)), one(c(1.0, 0.0))).unwrap();
        assert!(matches!(gain_gamma(&u, 1e-8), Err(Error::Precondition(_))));
        assert!(matches!(steady_state_delta1(&u), Err(Error::Precondition(_))));
    }

    #[test]
    fn from_model_matches_bilinear() {
        use crate::model::{validate_model, RawModel};
        let raw = RawModel {
            n_a: 1,
            n_b: 1,
            m: CMatrix::zeros(2, 2),
            n_a_coupling: linalg::identity(2),
            n_b_coupling: linalg::identity(2) * c(2.0, 0.0),
            e_tilde: CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]),
        };
        let g = c(0.2, -0.1);
        let u = LinearUncertainty::from_model_coupling(&validate_model(raw.clone()).unwrap(), &[g]).unwrap();
        assert_eq!(u, LinearUncertainty::from_bilinear_coupling(g, 4.0).unwrap());

        let mut squeezed = raw;
        squeezed.n_b_coupling[(0, 1)] = c(0.5, 0.0);
        squeezed.n_b_coupling[(1, 0)] = c(0.5, 0.0);
        let model = validate_model(squeezed).unwrap();
        assert!(matches!(
            LinearUncertainty::from_model_coupling(&model, &[g]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rejects_indefinite_noise() {
        let one = |z: C64| CMatrix::from_element(1, 1, z);
        assert!(LinearUncertainty::new(one(c(-1.0, 0.0)), one(c(1.0, 0.0)), one(c(1.0, 0.0)), one(c(-1.0, 0.0))).is_err());
    }
}
