//! Direct x-space evolution of the Novikov equation for smooth data.
//!
//! The Cauchy problem is advanced in the nonlocal form
//!
//!   u_t + u² u_x + ∂x P1 + P2 = 0,
//!   P1 = G * ( (3/2) u u_x² + u³ ),   P2 = ½ G * (u_x³),
//!
//! with G = ½ e^{-|x|} the Green's function of (1 - ∂x²)⁻¹. Differentiating
//! once more gives the slope evolution used by the tangent transport:
//!
//!   u_xt + u² u_xx + ½ u u_x² - u³ + P1 + ∂x P2 = 0.
//!
//! This solver exists for tangent transport and cross-validation against the
//! characteristic-coordinate solver; it refuses to run near wave breaking
//! (|u_x| guard) instead of regularizing, since artificial viscosity would
//! destroy the conservation checks.

use crate::error::{Error, Result};
use crate::grid::{ConvolutionMode, GridFunction};

/// Slope guard: beyond this the x-space formulation is meaningless.
pub const SLOPE_GUARD: f64 = 10.0;
/// CFL safety factor for `dt <= CFL_FACTOR * dx / max(u²)`.
pub const CFL_FACTOR: f64 = 0.25;

/// The four nonlocal source fields of the weak-form equation.
#[derive(Debug, Clone)]
pub struct NovikovSources {
    pub p1: GridFunction,
    pub dx_p1: GridFunction,
    pub p2: GridFunction,
    pub dx_p2: GridFunction,
}

/// Convolution sources P1, ∂xP1, P2, ∂xP2 for a given profile.
pub fn novikov_sources(u: &GridFunction) -> Result<NovikovSources> {
    let ux = u.derivative();
    let q1 = u.zip_with(&ux, |u, ux| 1.5 * u * ux * ux + u * u * u)?;
    let q2 = ux.map(|_, s| s * s * s);
    Ok(NovikovSources {
        p1: q1.exp_convolution(ConvolutionMode::Symmetric)?,
        dx_p1: q1.exp_convolution(ConvolutionMode::Antisymmetric)?,
        p2: q2
            .exp_convolution(ConvolutionMode::Symmetric)?
            .map(|_, v| 0.5 * v),
        dx_p2: q2
            .exp_convolution(ConvolutionMode::Antisymmetric)?
            .map(|_, v| 0.5 * v),
    })
}

fn check_slope(ux: &GridFunction) -> Result<()> {
    let max_slope = ux.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_slope > SLOPE_GUARD {
        Err(Error::NearBreaking { max_slope })
    } else {
        Ok(())
    }
}

/// Time derivatives `(u_t, u_xt)`. Errors with `NearBreaking` once the slope
/// guard trips.
pub fn novikov_rhs(u: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    let ux = u.derivative();
    check_slope(&ux)?;
    let uxx = ux.derivative();
    let src = novikov_sources(u)?;

    let mut u_t = u.zip_with(&ux, |u, ux| -u * u * ux)?;
    u_t = u_t.zip_with(&src.dx_p1, |a, b| a - b)?;
    u_t = u_t.zip_with(&src.p2, |a, b| a - b)?;

    let mut u_xt = u.zip_with(&uxx, |u, uxx| -u * u * uxx)?;
    u_xt = u_xt.zip_with(&u.zip_with(&ux, |u, ux| 0.5 * u * ux * ux - u * u * u)?, |a, b| a - b)?;
    u_xt = u_xt.zip_with(&src.p1, |a, b| a - b)?;
    u_xt = u_xt.zip_with(&src.dx_p2, |a, b| a - b)?;
    Ok((u_t, u_xt))
}

/// One classical RK4 step of `u_t`.
pub fn smooth_step(u: &GridFunction, dt: f64) -> Result<GridFunction> {
    if !(dt > 0.0) {
        return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
    }
    let max_u2 = u.values().iter().fold(0.0f64, |m, v| m.max(v * v));
    let dt_max = CFL_FACTOR * u.dx() / max_u2.max(1e-30);
    if dt > dt_max {
        return Err(Error::StepTooLarge { dt, dt_max });
    }
    let k1 = novikov_rhs(u)?.0;
    let u2 = u.zip_with(&k1, |a, k| a + 0.5 * dt * k)?;
    let k2 = novikov_rhs(&u2)?.0;
    let u3 = u.zip_with(&k2, |a, k| a + 0.5 * dt * k)?;
    let k3 = novikov_rhs(&u3)?.0;
    let u4 = u.zip_with(&k3, |a, k| a + dt * k)?;
    let k4 = novikov_rhs(&u4)?.0;
    let mut out = u.clone();
    out = out.zip_with(&k1, |a, k| a + dt / 6.0 * k)?;
    out = out.zip_with(&k2, |a, k| a + dt / 3.0 * k)?;
    out = out.zip_with(&k3, |a, k| a + dt / 3.0 * k)?;
    out = out.zip_with(&k4, |a, k| a + dt / 6.0 * k)?;
    Ok(out)
}

/// Fixed-step trajectory `u(0), u(dt), ..., u(t_end)`.
pub fn smooth_evolve(u0: &GridFunction, t_end: f64, dt: f64) -> Result<Vec<GridFunction>> {
    let n_steps = (t_end / dt).round() as usize;
    let mut traj = Vec::with_capacity(n_steps + 1);
    traj.push(u0.clone());
    let mut u = u0.clone();
    for _ in 0..n_steps {
        u = smooth_step(&u, dt)?;
        traj.push(u.clone());
    }
    Ok(traj)
}
