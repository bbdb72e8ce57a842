//! Camassa-Holm analog of the smooth solver and the tangent machinery.
//!
//! The CH equation in nonlocal form is
//!
//!   u_t + u u_x + P_x = 0,    P = ½ e^{-|x|} * (u² + ½ u_x²),
//!
//! with the H¹ energy ∫(u² + u_x²) conserved. Its energy measure has density
//! u_x² (one power lower than the Novikov case), so the transport cost drops
//! the fourth integral and weights with (1 + u_x²):
//!
//!   I1 = ∫ |w| (1+u_x²) e^{-|x|} dx,
//!   I2 = ∫ |v + u_x w| (1+u_x²) e^{-|x|} dx,
//!   I3 = ∫ |2u_x(v_x + u_xx w) + u_x² w_x| e^{-|x|} dx.
//!
//! The tangent transport is
//!
//!   v_t + u v_x + u_x v + A[2uv + u_y v_y] = 0,
//!   v_xt + u v_xx + u_x v_x + u_xx v - 2uv + S[2uv + u_y v_y] = 0,
//!   w_t + u w_x = v + u_x w,
//!   w_xt + u w_xx = v_x + u_xx w,
//!
//! a simpler validation target for the shared frame-evolution code.

use crate::error::{Error, Result};
use crate::grid::{ConvolutionMode, GridFunction};
use crate::tangent::{
    fit_growth, norm_upper_impl, rk4_frame_step, trapezoid, CostBreakdown, FrozenProfileRef,
    GrowthReport, TangentFrame, TransportCandidate,
};

use crate::smooth::{CFL_FACTOR, SLOPE_GUARD};

/// P and P_x for the CH equation.
pub fn ch_sources(u: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    let ux = u.derivative();
    let q = u.zip_with(&ux, |u, s| u * u + 0.5 * s * s)?;
    Ok((
        q.exp_convolution(ConvolutionMode::Symmetric)?,
        q.exp_convolution(ConvolutionMode::Antisymmetric)?,
    ))
}

/// Time derivatives `(u_t, u_xt)`:
/// u_t = -u u_x - P_x and u_xt = -u u_xx - ½u_x² + u² - P.
pub fn ch_rhs(u: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    let ux = u.derivative();
    let max_slope = ux.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_slope > SLOPE_GUARD {
        return Err(Error::NearBreaking { max_slope });
    }
    let uxx = ux.derivative();
    let (p, px) = ch_sources(u)?;
    let mut u_t = u.zip_with(&ux, |u, s| -u * s)?;
    u_t = u_t.zip_with(&px, |a, b| a - b)?;
    let mut u_xt = u.zip_with(&uxx, |u, c| -u * c)?;
    u_xt = u_xt.zip_with(&ux, |a, s| a - 0.5 * s * s)?;
    u_xt = u_xt.zip_with(u, |a, u| a + u * u)?;
    u_xt = u_xt.zip_with(&p, |a, b| a - b)?;
    Ok((u_t, u_xt))
}

/// One RK4 step with the CFL restriction dt <= 0.25 dx / max|u|.
pub fn ch_step(u: &GridFunction, dt: f64) -> Result<GridFunction> {
    if !(dt > 0.0) {
        return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
    }
    let speed = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dt_max = CFL_FACTOR * u.dx() / speed.max(1e-30);
    if dt > dt_max {
        return Err(Error::StepTooLarge { dt, dt_max });
    }
    let k1 = ch_rhs(u)?.0;
    let u2 = u.zip_with(&k1, |a, k| a + 0.5 * dt * k)?;
    let k2 = ch_rhs(&u2)?.0;
    let u3 = u.zip_with(&k2, |a, k| a + 0.5 * dt * k)?;
    let k3 = ch_rhs(&u3)?.0;
    let u4 = u.zip_with(&k3, |a, k| a + dt * k)?;
    let k4 = ch_rhs(&u4)?.0;
    let mut out = u.clone();
    out = out.zip_with(&k1, |a, k| a + dt / 6.0 * k)?;
    out = out.zip_with(&k2, |a, k| a + dt / 3.0 * k)?;
    out = out.zip_with(&k3, |a, k| a + dt / 3.0 * k)?;
    out = out.zip_with(&k4, |a, k| a + dt / 6.0 * k)?;
    Ok(out)
}

pub fn ch_evolve(u0: &GridFunction, t_end: f64, dt: f64) -> Result<Vec<GridFunction>> {
    let n_steps = (t_end / dt).round() as usize;
    let mut traj = Vec::with_capacity(n_steps + 1);
    traj.push(u0.clone());
    let mut u = u0.clone();
    for _ in 0..n_steps {
        u = ch_step(&u, dt)?;
        traj.push(u.clone());
    }
    Ok(traj)
}

fn ch_tangent_rhs(p: &FrozenProfileRef, f: &TangentFrame) -> Result<TangentFrame> {
    let n = p.u.len();
    let u = p.u.values();
    let ux = p.ux.values();
    let uxx = p.uxx.values();

    let g_vals: Vec<f64> = (0..n)
        .map(|i| 2.0 * u[i] * f.v[i] + ux[i] * f.vx[i])
        .collect();
    let g = GridFunction::new(p.u.x0(), p.u.dx(), g_vals)?;
    let a_g = g.exp_convolution(ConvolutionMode::Antisymmetric)?;
    let s_g = g.exp_convolution(ConvolutionMode::Symmetric)?;

    let vxx = crate::tangent::derivative_of(&p.u, &f.vx);
    let wxx = crate::tangent::derivative_of(&p.u, &f.wx);

    let mut out = TangentFrame::zero(n);
    for i in 0..n {
        out.v[i] = -u[i] * f.vx[i] - ux[i] * f.v[i] - a_g.values()[i];
        out.vx[i] = -u[i] * vxx[i] - ux[i] * f.vx[i] - uxx[i] * f.v[i] + 2.0 * u[i] * f.v[i]
            - s_g.values()[i];
        out.w[i] = -u[i] * f.wx[i] + f.v[i] + ux[i] * f.w[i];
        out.wx[i] = -u[i] * wxx[i] + f.vx[i] + uxx[i] * f.w[i];
    }
    Ok(out)
}

/// Transport a tangent frame along a CH trajectory with uniform spacing `dt`.
pub fn ch_evolve_tangent(
    u_traj: &[GridFunction],
    tf0: &TangentFrame,
    dt: f64,
) -> Result<Vec<TangentFrame>> {
    if u_traj.is_empty() {
        return Err(Error::InvalidGrid("empty trajectory".into()));
    }
    let mut frames = Vec::with_capacity(u_traj.len());
    frames.push(tf0.clone());
    for k in 0..u_traj.len() - 1 {
        let next = rk4_frame_step(
            &u_traj[k],
            &u_traj[k + 1],
            frames.last().unwrap(),
            dt,
            ch_tangent_rhs,
        )?;
        frames.push(next);
    }
    Ok(frames)
}

/// CH transport cost; the breakdown's fourth part is identically zero.
pub fn ch_finsler_cost(u: &GridFunction, tf: &TangentFrame) -> Result<CostBreakdown> {
    if tf.len() != u.len() {
        return Err(Error::GridMismatch);
    }
    let ux = u.derivative();
    let uxx = ux.derivative();
    let n = u.len();
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    let mut g3 = vec![0.0; n];
    for i in 0..n {
        let s = ux.values()[i];
        let m = 1.0 + s * s;
        let weight = (-u.x(i).abs()).exp();
        let dslope = tf.vx[i] + uxx.values()[i] * tf.w[i];
        g1[i] = tf.w[i].abs() * m * weight;
        g2[i] = (tf.v[i] + s * tf.w[i]).abs() * m * weight;
        g3[i] = (2.0 * s * dslope + s * s * tf.wx[i]).abs() * weight;
    }
    let dx = u.dx();
    Ok(CostBreakdown::from_parts(
        trapezoid(&g1, dx),
        trapezoid(&g2, dx),
        trapezoid(&g3, dx),
        0.0,
    ))
}

/// Norm upper bound over candidate transports, CH cost.
pub fn ch_finsler_norm_upper(
    u: &GridFunction,
    v: &GridFunction,
    candidates: &[TransportCandidate],
) -> Result<f64> {
    norm_upper_impl(u, v, candidates, ch_finsler_cost)
}

/// Norm history along a CH trajectory, as in the Novikov `verify_growth`.
pub fn ch_verify_growth(
    u_traj: &[GridFunction],
    tf_traj: &[TangentFrame],
    dt: f64,
) -> Result<GrowthReport> {
    if u_traj.len() != tf_traj.len() || u_traj.is_empty() {
        return Err(Error::GridMismatch);
    }
    let mut times = Vec::with_capacity(u_traj.len());
    let mut norms = Vec::with_capacity(u_traj.len());
    for (k, (u, tf)) in u_traj.iter().zip(tf_traj).enumerate() {
        let v = GridFunction::new(u.x0(), u.dx(), tf.v.clone())?;
        let norm = ch_finsler_norm_upper(
            u,
            &v,
            &[
                TransportCandidate::Zero,
                TransportCandidate::TranslationMatched,
                TransportCandidate::Explicit {
                    w: tf.w.clone(),
                    wx: tf.wx.clone(),
                },
            ],
        )?;
        times.push(k as f64 * dt);
        norms.push(norm);
    }
    Ok(fit_growth(times, norms))
}
