//! Fixed-step classical Runge–Kutta integration of linear vector fields,
//! used to cross-check closed-form flows computed through the matrix
//! exponential.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, CVec, C64};

/// Integrates `v' = f(v)` from `v0` over `[0, t]` with `steps` RK4 steps.
pub fn rk4(f: impl Fn(&CVec) -> CVec, v0: &CVec, t: f64, steps: usize) -> Result<CVec> {
    if steps == 0 || !t.is_finite() {
        return Err(Error::Invalid("rk4 needs a finite horizon and at least one step".into()));
    }
    let h = t / steps as f64;
    let r = |x: f64| C64::new(x, 0.0);
    let mut v = v0.clone();
    for _ in 0..steps {
        let k1 = f(&v);
        let k2 = f(&(&v + &k1 * r(0.5 * h)));
        let k3 = f(&(&v + &k2 * r(0.5 * h)));
        let k4 = f(&(&v + &k3 * r(h)));
        v += (k1 + k2 * r(2.0) + k3 * r(2.0) + k4) * r(h / 6.0);
    }
    Ok(v)
}

/// Integrates `v' = M v` with a step count chosen so that `h·‖M‖ ≤ h_scaled`.
pub fn integrate_linear(m: &ComplexMatrix, v0: &CVec, t: f64, h_scaled: f64) -> Result<CVec> {
    let norm = m.frobenius_norm().max(1e-300);
    let steps = ((t.abs() * norm / h_scaled).ceil() as usize).max(1);
    let inner = m.inner();
    rk4(|v| inner * v, v0, t, steps)
}
