//! Multi-peakon dynamics for the Novikov equation.
//!
//! An N-peakon configuration u(x) = Σ p_i e^{-|x-q_i|} stays in that family
//! as long as the peaks do not cross; the amplitudes and positions obey
//!
//!   dq_i/dt = Σ_{j,k} p_j p_k e^{-|q_i-q_j| - |q_i-q_k|},
//!   dp_i/dt = p_i Σ_{j,k} p_j p_k sgn(q_i-q_j) e^{-|q_i-q_j| - |q_i-q_k|},
//!
//! with sgn(0) = 0, so a single peakon travels right at speed p² with frozen
//! amplitude. For an anti-strength pair (p_1 p_2 < 0) the spacing collapses in
//! finite time while the amplitudes diverge, so the integrator halts on
//! pragmatic guards (spacing < 1e-8 or |p| > 1e8) and leaves continuation
//! through the collision to the characteristic-coordinate solver.

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

/// Spacing below which the ODE system is considered collapsed.
pub const SPACING_GUARD: f64 = 1e-8;
/// Amplitude magnitude above which the run halts.
pub const AMPLITUDE_GUARD: f64 = 1e8;

/// Amplitudes and positions of an N-peakon configuration at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakonState {
    pub t: f64,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl PeakonState {
    pub fn new(t: f64, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::InvalidGrid(format!(
                "peakon lists must be non-empty and equal length, got {} and {}",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        if q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "peakon positions must be strictly increasing".into(),
            ));
        }
        Ok(PeakonState { t, p, q })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.p
    }

    pub fn positions(&self) -> &[f64] {
        &self.q
    }

    pub fn min_spacing(&self) -> f64 {
        self.q
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Right-hand side of the peakon ODE system, evaluated as the literal double
/// sum.
pub fn peakon_rhs(s: &PeakonState) -> (Vec<f64>, Vec<f64>) {
    rhs_raw(&s.p, &s.q)
}

fn rhs_raw(p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.len();
    let mut dp = vec![0.0; n];
    let mut dq = vec![0.0; n];
    for i in 0..n {
        let mut sum_q = 0.0;
        let mut sum_p = 0.0;
        for j in 0..n {
            let dij = (q[i] - q[j]).abs();
            for k in 0..n {
                let weight = p[j] * p[k] * (-(dij + (q[i] - q[k]).abs())).exp();
                sum_q += weight;
                sum_p += sgn(q[i] - q[j]) * weight;
            }
        }
        dq[i] = sum_q;
        dp[i] = p[i] * sum_p;
    }
    (dp, dq)
}

/// Why a trajectory stopped before reaching its requested end time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Halt {
    SpacingCollapse,
    AmplitudeGuard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakonTrajectory {
    pub states: Vec<PeakonState>,
    pub halt: Option<Halt>,
}

impl PeakonTrajectory {
    /// CSV rows `t,p1..pN,q1..qN`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",p{i}"));
        }
        for i in 1..=n {
            header.push_str(&format!(",q{i}"));
        }
        writeln!(w, "{header}")?;
        for s in &self.states {
            let mut row = format!("{}", s.t);
            for v in s.amplitudes().iter().chain(s.positions()) {
                row.push_str(&format!(",{v}"));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Classical RK4 on the peakon ODE system, sampled every `dt`.
///
/// Halts early (with a flag on the trajectory) when the spacing or amplitude
/// guards trip; a non-finite state is a hard error carrying the partial
/// trajectory.
pub fn integrate_peakons(s0: &PeakonState, t_end: f64, dt: f64) -> Result<PeakonTrajectory> {
    if !(dt > 0.0) || !(t_end > s0.t) {
        return Err(Error::InvalidGrid(format!(
            "need dt > 0 and t_end > t0, got dt={dt}, t_end={t_end}"
        )));
    }
    let mut states = vec![s0.clone()];
    let mut p = s0.p.clone();
    let mut q = s0.q.clone();
    let mut t = s0.t;
    let n_steps = ((t_end - s0.t) / dt).round() as usize;

    for _ in 0..n_steps {
        let (kp1, kq1) = rhs_raw(&p, &q);
        let (p2, q2) = advance(&p, &q, &kp1, &kq1, 0.5 * dt);
        let (kp2, kq2) = rhs_raw(&p2, &q2);
        let (p3, q3) = advance(&p, &q, &kp2, &kq2, 0.5 * dt);
        let (kp3, kq3) = rhs_raw(&p3, &q3);
        let (p4, q4) = advance(&p, &q, &kp3, &kq3, dt);
        let (kp4, kq4) = rhs_raw(&p4, &q4);

        for i in 0..p.len() {
            p[i] += dt / 6.0 * (kp1[i] + 2.0 * kp2[i] + 2.0 * kp3[i] + kp4[i]);
            q[i] += dt / 6.0 * (kq1[i] + 2.0 * kq2[i] + 2.0 * kq3[i] + kq4[i]);
        }
        t += dt;

        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::PeakonBlowup {
                t,
                partial: PeakonTrajectory { states, halt: None },
            });
        }
        let spacing = q
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if spacing < SPACING_GUARD {
            return Ok(PeakonTrajectory {
                states,
                halt: Some(Halt::SpacingCollapse),
            });
        }
        if p.iter().any(|v| v.abs() > AMPLITUDE_GUARD) {
            return Ok(PeakonTrajectory {
                states,
                halt: Some(Halt::AmplitudeGuard),
            });
        }
        states.push(PeakonState {
            t,
            p: p.clone(),
            q: q.clone(),
        });
    }
    Ok(PeakonTrajectory {
        states,
        halt: None,
    })
}

fn advance(p: &[f64], q: &[f64], dp: &[f64], dq: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    (
        p.iter().zip(dp).map(|(v, d)| v + h * d).collect(),
        q.iter().zip(dq).map(|(v, d)| v + h * d).collect(),
    )
}

/// Sample u(x) = Σ p_i e^{-|x-q_i|} on a grid.
pub fn peakon_field(s: &PeakonState, spec: GridSpec) -> GridFunction {
    let mut g = GridFunction::zeros(spec);
    g = g.map(|x, _| {
        s.p.iter()
            .zip(&s.q)
            .map(|(&p, &q)| p * (-(x - q).abs()).exp())
            .sum()
    });
    g
}

fn erf(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26, |error| <= 1.5e-7
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = ((((1.061405429 * t - 1.453152027) * t + 1.421413741) * t - 0.284496736) * t
        + 0.254829592)
        * t;
    sign * (1.0 - poly * (-x * x).exp())
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// The peak kernel e^{-|x|} mollified by a Gaussian of width `w`:
/// closed form e^{w²/2} [ e^{-x} Φ((x-w²)/w) + e^{x} Φ(-(x+w²)/w) ].
///
/// The tails are e^{w²/2} e^{-|x|}, so the pair interaction is perturbed only
/// at O(w²) while the slope becomes smooth at scale w.
pub fn smoothed_peak(x: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return (-x.abs()).exp();
    }
    (0.5 * w * w).exp()
        * ((-x).exp() * normal_cdf((x - w * w) / w) + x.exp() * normal_cdf(-(x + w * w) / w))
}

/// Sample the regularized multi-peakon profile with peaks mollified at
/// physical width `w`. With `w = 0` this is exactly [`peakon_field`]; for
/// `w > 0` the profile is smooth, so downstream quadrature converges at
/// second order instead of stalling on the slope discontinuities, at the
/// price of an O(w) shift of the collision time.
pub fn peakon_field_smoothed(s: &PeakonState, spec: GridSpec, w: f64) -> GridFunction {
    let mut g = GridFunction::zeros(spec);
    g = g.map(|x, _| {
        s.p.iter()
            .zip(&s.q)
            .map(|(&p, &q)| p * smoothed_peak(x - q, w))
            .sum()
    });
    g
}

/// Collision seed from a halted trajectory: linear extrapolation of the
/// closing pair from the last two frames. Returns `(t_star, q_star)`.
pub fn detect_crossing(traj: &PeakonTrajectory) -> Option<(f64, f64)> {
    if traj.halt != Some(Halt::SpacingCollapse) || traj.states.len() < 2 {
        return None;
    }
    let last = &traj.states[traj.states.len() - 1];
    let prev = &traj.states[traj.states.len() - 2];
    // pair with the smallest final spacing
    let (i, _) = last
        .positions()
        .windows(2)
        .map(|w| w[1] - w[0])
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| {
            if s < acc.1 {
                (i, s)
            } else {
                acc
            }
        });
    let dt = last.t - prev.t;
    let s1 = last.positions()[i + 1] - last.positions()[i];
    let s0 = prev.positions()[i + 1] - prev.positions()[i];
    let rate = (s1 - s0) / dt;
    if rate >= 0.0 {
        return None;
    }
    let t_star = last.t - s1 / rate;
    let qi_rate = (last.positions()[i] - prev.positions()[i]) / dt;
    let qj_rate = (last.positions()[i + 1] - prev.positions()[i + 1]) / dt;
    let qi = last.positions()[i] + qi_rate * (t_star - last.t);
    let qj = last.positions()[i + 1] + qj_rate * (t_star - last.t);
    Some((t_star, 0.5 * (qi + qj)))
}
