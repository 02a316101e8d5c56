//! Second moments of the closed loop formed by the plant and a bilinear
//! uncertainty subsystem.
//!
//! State ordering is `(a, a#, b, b#)`. Second moments are `X = ⟨x x†⟩`; the
//! mean-square quantity `⟨[a; a#]†[a; a#]⟩` is the trace of the plant block.

use crate::error::{Error, Result};
use crate::linalg::{self, c, max_abs, CMatrix, C64};
use crate::model::{j_matrix, sigma_matrix, QuantumModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub a_cl: CMatrix,
    /// Itô diffusion `G diag(I, 0) G†` of the vacuum inputs.
    pub noise: CMatrix,
    pub n_a: usize,
    pub n_b: usize,
}

impl ClosedLoopSystem {
    pub fn dim(&self) -> usize {
        self.a_cl.nrows()
    }

    /// `diag(I, 0)` per sector: the vacuum second moments.
    pub fn vacuum(&self) -> CMatrix {
        let mut x = CMatrix::zeros(self.dim(), self.dim());
        for k in 0..self.n_a {
            x[(k, k)] = c(1.0, 0.0);
        }
        let off = 2 * self.n_a;
        for k in 0..self.n_b {
            x[(off + k, off + k)] = c(1.0, 0.0);
        }
        x
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        linalg::spectral_abscissa(&self.a_cl)
    }

    fn drift_rhs(&self, x: &CMatrix) -> CMatrix {
        &self.a_cl * x + x * self.a_cl.adjoint() + &self.noise
    }
}

fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut m = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

fn upper_identity(modes: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        m[(k, k)] = c(1.0, 0.0);
    }
    m
}

/// Closed loop with interaction `f = i Σ_j (g_j b_j* z - g_j* z* b_j)`,
/// `z = Ẽ [a; a#]`, and the uncertainty modes damped through the model's `N_b`.
pub fn build_closed_loop(model: &QuantumModel, coupling: &[C64]) -> Result<ClosedLoopSystem> {
    let n_a = model.n_a();
    let n_b = model.n_b();
    if coupling.len() != n_b {
        return Err(Error::DimensionMismatch {
            what: "coupling".into(),
            expected: format!("{n_b} coefficients (one per uncertainty mode)"),
            got: format!("{}", coupling.len()),
        });
    }
    if coupling.iter().any(|g| !(g.re.is_finite() && g.im.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "coupling".into(),
            reason: "coefficients must be finite".into(),
        });
    }
    let dim = 2 * (n_a + n_b);
    let e = model.e_tilde();
    let e_conj_sigma = linalg::conj(e) * sigma_matrix(n_a);
    let i = c(0.0, 1.0);

    let mut cross = CMatrix::zeros(2 * n_b, 2 * n_a);
    for (j, g) in coupling.iter().enumerate() {
        cross.row_mut(j).copy_from(&(e * (i * g)).row(0));
        cross
            .row_mut(n_b + j)
            .copy_from(&(&e_conj_sigma * (-i * g.conj())).row(0));
    }
    let mut m_full = CMatrix::zeros(dim, dim);
    m_full
        .view_mut((0, 0), (2 * n_a, 2 * n_a))
        .copy_from(model.hamiltonian());
    m_full.view_mut((2 * n_a, 0), cross.shape()).copy_from(&cross);
    m_full
        .view_mut((0, 2 * n_a), (2 * n_a, 2 * n_b))
        .copy_from(&cross.adjoint());

    let na = model.plant_coupling();
    let nb = model.uncertainty_coupling();
    let n_full = block_diag(na.value(), nb.value());
    let j_full = block_diag(&j_matrix(n_a), &j_matrix(n_b));
    let j_field = block_diag(&j_matrix(na.row_modes()), &j_matrix(nb.row_modes()));
    let vacuum_ito = block_diag(&upper_identity(na.row_modes()), &upper_identity(nb.row_modes()));

    let a_cl = -(&j_full * &m_full) * i - &j_full * n_full.adjoint() * &j_field * &n_full * c(0.5, 0.0);
    let g_in = -(&j_full * n_full.adjoint() * &j_field);
    let noise = linalg::hermitian_part(&(&g_in * vacuum_ito * g_in.adjoint()));
    Ok(ClosedLoopSystem { a_cl, noise, n_a, n_b })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondMomentState {
    pub x: CMatrix,
    pub ms_value: f64,
    /// `‖A X + X A† + D‖_max`
    pub residual: f64,
}

pub(crate) fn plant_trace(x: &CMatrix, n_a: usize) -> f64 {
    (0..2 * n_a).map(|k| x[(k, k)].re).sum()
}

pub fn steady_state_moments(sys: &ClosedLoopSystem) -> Result<SecondMomentState> {
    let abscissa = sys.spectral_abscissa()?;
    if !(abscissa < 0.0) {
        return Err(Error::MeanSquareUnstable { abscissa });
    }
    let x = linalg::lyapunov(&sys.a_cl, &sys.noise)?;
    let residual = max_abs(&sys.drift_rhs(&x));
    Ok(SecondMomentState {
        ms_value: plant_trace(&x, sys.n_a),
        x,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub ms_values: Vec<f64>,
    pub final_x: CMatrix,
}

impl MomentTrajectory {
    /// Trapezoidal time average of the mean-square value.
    pub fn time_average(&self) -> f64 {
        let n = self.times.len();
        if n < 2 {
            return self.ms_values.first().copied().unwrap_or(f64::NAN);
        }
        let mut acc = 0.0;
        for k in 1..n {
            acc += 0.5 * (self.ms_values[k] + self.ms_values[k - 1]) * (self.times[k] - self.times[k - 1]);
        }
        acc / (self.times[n - 1] - self.times[0])
    }
}

/// `0.01 / |spectral abscissa|` (`0.01` when the abscissa vanishes), capped
/// at `0.5 / ρ(A)` so that fast modes stay inside the RK4 stability region.
pub fn default_step(sys: &ClosedLoopSystem) -> Result<f64> {
    let a = sys.spectral_abscissa()?.abs();
    let slow = if a > 0.0 { 0.01 / a } else { 0.01 };
    let radius = linalg::eigenvalues(&sys.a_cl)?
        .iter()
        .fold(0.0f64, |r, l| r.max(l.norm()));
    Ok(if radius > 0.0 { slow.min(0.5 / radius) } else { slow })
}

/// RK4 on `dX/dt = A X + X A† + D` from the vacuum. The last step is
/// shortened so that the trajectory ends exactly at `t_end`.
pub fn integrate_moments(sys: &ClosedLoopSystem, t_end: f64, dt: f64) -> Result<MomentTrajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "T".into(),
            reason: "horizon must be positive and finite".into(),
        });
    }
    if !(dt > 0.0 && dt <= t_end) {
        return Err(Error::InvalidParameter {
            name: "dt".into(),
            reason: format!("step must satisfy 0 < dt <= T, got {dt}"),
        });
    }
    let steps = (t_end / dt).ceil() as usize;
    let mut x = sys.vacuum();
    let mut times = Vec::with_capacity(steps + 1);
    let mut ms_values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    ms_values.push(plant_trace(&x, sys.n_a));
    let mut t = 0.0;
    for k in 1..=steps {
        let t_next = if k == steps { t_end } else { k as f64 * dt };
        let h = t_next - t;
        let k1 = sys.drift_rhs(&x);
        let k2 = sys.drift_rhs(&(&x + &k1 * c(0.5 * h, 0.0)));
        let k3 = sys.drift_rhs(&(&x + &k2 * c(0.5 * h, 0.0)));
        let k4 = sys.drift_rhs(&(&x + &k3 * c(h, 0.0)));
        x += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
        t = t_next;
        let size = max_abs(&x);
        if !(size <= 1e12) {
            return Err(Error::Divergent { t });
        }
        times.push(t);
        ms_values.push(plant_trace(&x, sys.n_a));
    }
    Ok(MomentTrajectory {
        times,
        ms_values,
        final_x: x,
    })
}
