use crate::error::{Error, Result};
use crate::linalg::{hermitize, inner, inverse_pd, log_det_pd, min_eigenvalue, CMatrix};

/// Smallest eigenvalue of
/// `VᴴX⁻¹V − (V̄ᴴX̄⁻¹V + VᴴX̄⁻¹V̄ − V̄ᴴX̄⁻¹XX̄⁻¹V̄)`,
/// non-negative whenever `X, X̄ ≻ 0`.
pub fn check_inequality_in1(v: &CMatrix, v_bar: &CMatrix, x: &CMatrix, x_bar: &CMatrix) -> Result<f64> {
    if v.shape() != v_bar.shape() || x.nrows() != v.nrows() || x.shape() != x_bar.shape() {
        return Err(Error::Dimension("in1: inconsistent shapes".into()));
    }
    let xi = inverse_pd(x, "in1: X")?;
    let xbi = inverse_pd(x_bar, "in1: X̄")?;
    let lhs = v.adjoint() * &xi * v;
    let cross = v_bar.adjoint() * &xbi * v;
    let rhs = &cross + cross.adjoint() - v_bar.adjoint() * &xbi * x * &xbi * v_bar;
    Ok(min_eigenvalue(&hermitize(&(lhs - rhs))))
}

/// `ln|X| − (ln|X̄| − ⟨X̄, X⁻¹ − X̄⁻¹⟩)`, non-negative for `X, X̄ ≻ 0`.
pub fn check_inequality_in2(x: &CMatrix, x_bar: &CMatrix) -> Result<f64> {
    if x.shape() != x_bar.shape() {
        return Err(Error::Dimension("in2: inconsistent shapes".into()));
    }
    let xi = inverse_pd(x, "in2: X")?;
    let xbi = inverse_pd(x_bar, "in2: X̄")?;
    let bound = log_det_pd(x_bar, "in2: X̄")? - inner(x_bar, &(xi - xbi)).re;
    Ok(log_det_pd(x, "in2: X")? - bound)
}

/// `(a(z̄), b(z̄)) = (ln(1+z̄) + z̄/(z̄+1), z̄²/(z̄+1))`.
pub fn zf_coefficients(z_bar: f64) -> (f64, f64) {
    (z_bar.ln_1p() + z_bar / (z_bar + 1.0), z_bar * z_bar / (z_bar + 1.0))
}

/// `ln(1+z) − a(z̄) + b(z̄)/z`, non-negative for `z, z̄ > 0`.
pub fn check_inequality_zf8(z: f64, z_bar: f64) -> Result<f64> {
    if !(z > 0.0 && z_bar > 0.0) {
        return Err(Error::Domain(format!("zf8 needs z, z̄ > 0 (got {z}, {z_bar})")));
    }
    let (a, b) = zf_coefficients(z_bar);
    Ok(z.ln_1p() - a + b / z)
}
