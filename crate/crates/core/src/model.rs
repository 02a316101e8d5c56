//! Structured matrices describing the nominal plant and its uncertainty channel.
//!
//! All mode vectors use the doubled-up ordering `x = [a; a#]`. A matrix `X`
//! acting between doubled-up vectors is *structured* when it has the block
//! form `[[X1, X2], [X2#, X1#]]`, equivalently `Σ X# Σ = X`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, check_finite, conj, max_abs, CMatrix};

/// Relative tolerance of every structural check, scaled by the largest entry.
pub const STRUCTURE_RTOL: f64 = 1e-12;

/// `J = diag(I, -I)` and `Σ = [[0, I], [I, 0]]` for `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    pub j: CMatrix,
    pub sigma: CMatrix,
}

pub fn constants(n: usize) -> Result<Constants> {
    if n == 0 {
        return Err(Error::InvalidDimension("mode count must be at least 1".into()));
    }
    Ok(Constants {
        j: j_matrix(n),
        sigma: sigma_matrix(n),
    })
}

pub(crate) fn j_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(2 * n, 2 * n, |i, k| {
        if i != k {
            c(0.0, 0.0)
        } else if i < n {
            c(1.0, 0.0)
        } else {
            c(-1.0, 0.0)
        }
    })
}

pub(crate) fn sigma_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(2 * n, 2 * n, |i, k| {
        if (i < n && k == i + n) || (i >= n && i == k + n) {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// `Σ X# Σ` for a matrix with even row and column counts.
pub fn sigma_conjugate(x: &CMatrix) -> CMatrix {
    let (r, k) = x.shape();
    debug_assert!(r % 2 == 0 && k % 2 == 0);
    sigma_matrix(r / 2) * conj(x) * sigma_matrix(k / 2)
}

/// Max entry magnitude of `Σ X# Σ - X`; zero iff `X` is structured.
pub fn structure_residual(x: &CMatrix, n: usize) -> Result<f64> {
    if x.shape() != (2 * n, 2 * n) {
        return Err(Error::DimensionMismatch {
            what: "structure_residual".into(),
            expected: format!("{}x{}", 2 * n, 2 * n),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    Ok(max_abs(&(sigma_conjugate(x) - x)))
}

/// Projection `(X + Σ X# Σ) / 2` onto structured matrices.
pub fn structured_part(x: &CMatrix) -> CMatrix {
    (x + sigma_conjugate(x)) * c(0.5, 0.0)
}

/// A matrix with the doubled-up block form, `2·rows_modes × 2·cols_modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredDoubled {
    value: CMatrix,
}

impl StructuredDoubled {
    pub fn new(name: &str, value: CMatrix) -> Result<Self> {
        let (r, k) = value.shape();
        if r == 0 || k == 0 || r % 2 != 0 || k % 2 != 0 {
            return Err(Error::DimensionMismatch {
                what: name.into(),
                expected: "even, non-zero row and column counts".into(),
                got: format!("{r}x{k}"),
            });
        }
        check_finite(name, &value)?;
        let (residual, row, col) = linalg::max_abs_at(&(sigma_conjugate(&value) - &value));
        if residual > STRUCTURE_RTOL * max_abs(&value) {
            return Err(Error::NotStructured {
                matrix: name.into(),
                row,
                col,
                residual,
            });
        }
        Ok(Self { value })
    }

    pub fn value(&self) -> &CMatrix {
        &self.value
    }

    /// Number of modes on the row side.
    pub fn row_modes(&self) -> usize {
        self.value.nrows() / 2
    }

    /// Number of modes on the column side.
    pub fn col_modes(&self) -> usize {
        self.value.ncols() / 2
    }

    /// Upper-left block `X1`.
    pub fn block1(&self) -> CMatrix {
        self.value
            .view((0, 0), (self.row_modes(), self.col_modes()))
            .into_owned()
    }

    /// Upper-right block `X2`.
    pub fn block2(&self) -> CMatrix {
        self.value
            .view((0, self.col_modes()), (self.row_modes(), self.col_modes()))
            .into_owned()
    }
}

/// Matrices as supplied by a caller, before any structural checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModel {
    pub n_a: usize,
    pub n_b: usize,
    pub m: CMatrix,
    pub n_a_coupling: CMatrix,
    pub n_b_coupling: CMatrix,
    pub e_tilde: CMatrix,
}

/// The validated nominal plant.
///
/// `hamiltonian` is the Hermitian structured `M`, `plant_coupling` is `N_a`
/// (`2m × 2n_a`), `uncertainty_coupling` is `N_b` and `e_tilde` the row
/// `[E1 E2]` defining the scalar output `z = Ẽ [a; a#]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumModel {
    n_a: usize,
    n_b: usize,
    hamiltonian: StructuredDoubled,
    plant_coupling: StructuredDoubled,
    uncertainty_coupling: StructuredDoubled,
    e_tilde: CMatrix,
}

impl QuantumModel {
    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        self.hamiltonian.value()
    }

    pub fn plant_coupling(&self) -> &StructuredDoubled {
        &self.plant_coupling
    }

    pub fn uncertainty_coupling(&self) -> &StructuredDoubled {
        &self.uncertainty_coupling
    }

    pub fn e_tilde(&self) -> &CMatrix {
        &self.e_tilde
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            n_a: self.n_a,
            n_b: self.n_b,
            m: self.hamiltonian.value().clone(),
            n_a_coupling: self.plant_coupling.value().clone(),
            n_b_coupling: self.uncertainty_coupling.value().clone(),
            e_tilde: self.e_tilde.clone(),
        }
    }
}

fn expect_shape(name: &str, m: &CMatrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch {
            what: name.into(),
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

pub fn validate_model(raw: RawModel) -> Result<QuantumModel> {
    let RawModel {
        n_a,
        n_b,
        m,
        n_a_coupling,
        n_b_coupling,
        e_tilde,
    } = raw;
    if n_a == 0 {
        return Err(Error::InvalidDimension("n_a must be at least 1".into()));
    }
    if n_b == 0 {
        return Err(Error::InvalidDimension("n_b must be at least 1".into()));
    }
    expect_shape("M", &m, 2 * n_a, 2 * n_a)?;
    if n_a_coupling.ncols() != 2 * n_a {
        return Err(Error::DimensionMismatch {
            what: "N_a".into(),
            expected: format!("2m x {}", 2 * n_a),
            got: format!("{}x{}", n_a_coupling.nrows(), n_a_coupling.ncols()),
        });
    }
    if n_b_coupling.ncols() != 2 * n_b {
        return Err(Error::DimensionMismatch {
            what: "N_b".into(),
            expected: format!("2m' x {}", 2 * n_b),
            got: format!("{}x{}", n_b_coupling.nrows(), n_b_coupling.ncols()),
        });
    }
    expect_shape("E_tilde", &e_tilde, 1, 2 * n_a)?;
    check_finite("M", &m)?;
    check_finite("N_a", &n_a_coupling)?;
    check_finite("N_b", &n_b_coupling)?;
    check_finite("E_tilde", &e_tilde)?;

    let (herm, row, col) = linalg::max_abs_at(&(&m - m.adjoint()));
    if herm > STRUCTURE_RTOL * max_abs(&m) {
        return Err(Error::NotHermitian {
            matrix: "M".into(),
            row,
            col,
            residual: herm,
        });
    }
    let hamiltonian = StructuredDoubled::new("M", m)?;
    let plant_coupling = StructuredDoubled::new("N_a", n_a_coupling)?;
    let uncertainty_coupling = StructuredDoubled::new("N_b", n_b_coupling)?;
    Ok(QuantumModel {
        n_a,
        n_b,
        hamiltonian,
        plant_coupling,
        uncertainty_coupling,
        e_tilde,
    })
}
