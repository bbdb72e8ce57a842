//! Mapping between x-space profiles and characteristic coordinates.
//!
//! The Lagrangian label Y of the point x is the initial-data measure
//!
//!   Y(x) = ∫₀^x (1 + u0_x²)² dx',
//!
//! constant along the characteristics dx/dt = u². The unknowns carried on a
//! uniform Y-grid are x, u, the slope angle α = 2 arctan u_x, and the relative
//! density ξ = (1 + u_x²)² / Y_x, so that (1 + u_x²)² dx = ξ dY and
//! x_Y = ξ cos⁴(α/2). At t = 0 the change of variables gives ξ ≡ 1 exactly.
//!
//! α is stored unwrapped: the evolution equations treat it as a real number,
//! so wave breaking shows up as a continuous level crossing of an odd
//! multiple of π, where cos⁴(α/2) = 0 collapses the x-increment and the graph
//! {(x(Y), u(Y))} develops a vertical segment.
//!
//! Peakon data needs one extra structure: the slope is genuinely
//! discontinuous at each peak, and the peak rides exactly on a characteristic,
//! so α(t, ·) keeps a jump at the same label Y(q_i) forever. Sampling such a
//! jump on the grid poisons every quadrature at first order. A [`CharState`]
//! therefore carries optional *interfaces*: labels where the regular arrays
//! hold the left limits of (α, ξ) and the interface records the right limits.
//! All quadratures split there, and [`peakon_to_characteristic`] aligns the
//! Y-grid so the jump labels are nodes, restoring second-order accuracy for
//! kinked data.

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, MIN_SAMPLES};
use crate::peakon::PeakonState;

/// A slope-discontinuity label: the regular arrays hold the left limits at
/// `node`; the right limits live here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub node: usize,
    pub alpha_plus: f64,
    pub xi_plus: f64,
}

#[derive(Deserialize)]
struct CharStateRaw {
    t: f64,
    y0: f64,
    dy: f64,
    x: Vec<f64>,
    u: Vec<f64>,
    alpha: Vec<f64>,
    xi: Vec<f64>,
    #[serde(default)]
    interfaces: Vec<Interface>,
}

impl TryFrom<CharStateRaw> for CharState {
    type Error = String;
    fn try_from(r: CharStateRaw) -> std::result::Result<Self, String> {
        CharState::with_interfaces(r.t, r.y0, r.dy, r.x, r.u, r.alpha, r.xi, r.interfaces)
            .map_err(|e| e.to_string())
    }
}

/// Characteristic-coordinate unknowns on a uniform Y-grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CharStateRaw")]
pub struct CharState {
    pub t: f64,
    y0: f64,
    dy: f64,
    x: Vec<f64>,
    u: Vec<f64>,
    alpha: Vec<f64>,
    xi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    interfaces: Vec<Interface>,
}

impl CharState {
    pub fn new(
        t: f64,
        y0: f64,
        dy: f64,
        x: Vec<f64>,
        u: Vec<f64>,
        alpha: Vec<f64>,
        xi: Vec<f64>,
    ) -> Result<Self> {
        CharState::with_interfaces(t, y0, dy, x, u, alpha, xi, Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_interfaces(
        t: f64,
        y0: f64,
        dy: f64,
        x: Vec<f64>,
        u: Vec<f64>,
        alpha: Vec<f64>,
        xi: Vec<f64>,
        interfaces: Vec<Interface>,
    ) -> Result<Self> {
        let n = x.len();
        if n < MIN_SAMPLES || u.len() != n || alpha.len() != n || xi.len() != n {
            return Err(Error::InvalidGrid(format!(
                "characteristic fields must share a length >= {MIN_SAMPLES}"
            )));
        }
        if !(dy > 0.0) || !y0.is_finite() || !t.is_finite() {
            return Err(Error::InvalidGrid(format!("bad Y geometry y0={y0}, dy={dy}")));
        }
        if x.iter()
            .chain(u.iter())
            .chain(alpha.iter())
            .chain(xi.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteInput);
        }
        if xi.iter().any(|&v| v <= 0.0) {
            return Err(Error::XiPositivity);
        }
        if x.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::InvalidGrid("x must be non-decreasing".into()));
        }
        for (k, f) in interfaces.iter().enumerate() {
            if f.node == 0 || f.node + 1 >= n {
                return Err(Error::InvalidGrid(format!(
                    "interface node {} out of range",
                    f.node
                )));
            }
            if k > 0 && interfaces[k - 1].node >= f.node {
                return Err(Error::InvalidGrid(
                    "interface nodes must be strictly increasing".into(),
                ));
            }
            if !f.alpha_plus.is_finite() || !(f.xi_plus > 0.0) {
                return Err(Error::XiPositivity);
            }
        }
        Ok(CharState {
            t,
            y0,
            dy,
            x,
            u,
            alpha,
            xi,
            interfaces,
        })
    }

    /// Construction bypass for the time stepper, which maintains the
    /// invariants itself.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts_unchecked(
        t: f64,
        y0: f64,
        dy: f64,
        x: Vec<f64>,
        u: Vec<f64>,
        alpha: Vec<f64>,
        xi: Vec<f64>,
        interfaces: Vec<Interface>,
    ) -> Self {
        CharState {
            t,
            y0,
            dy,
            x,
            u,
            alpha,
            xi,
            interfaces,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y0 + i as f64 * self.dy
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Slope-jump labels, if any (regular arrays hold the left limits there).
    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    /// (α, ξ) seen by the cell to the *right* of node `i`.
    pub fn plus_values(&self, i: usize) -> (f64, f64) {
        match self.interfaces.iter().find(|f| f.node == i) {
            Some(f) => (f.alpha_plus, f.xi_plus),
            None => (self.alpha[i], self.xi[i]),
        }
    }

    pub(crate) fn set_x(&mut self, x: Vec<f64>) {
        debug_assert_eq!(x.len(), self.x.len());
        self.x = x;
    }

    #[cfg(test)]
    pub(crate) fn fields_mut(
        &mut self,
    ) -> (&mut Vec<f64>, &mut Vec<f64>, &mut Vec<f64>, &mut Vec<f64>) {
        (&mut self.x, &mut self.u, &mut self.alpha, &mut self.xi)
    }

    /// Index of the node closest to Y = 0, the anchor characteristic.
    pub fn center_index(&self) -> usize {
        let i = ((-self.y0) / self.dy).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    /// CSV rows `Y,x,u,alpha,xi`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "Y,x,u,alpha,xi")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.y(i),
                self.x[i],
                self.u[i],
                self.alpha[i],
                self.xi[i]
            )?;
        }
        Ok(())
    }
}

/// Transform initial data to characteristic coordinates: cumulative Y(x),
/// a uniform Y-grid with the same node count, and (x, u, α, ξ = 1) sampled
/// at the inverse map. Outside the truncated domain the data is treated as
/// u = 0, α = 0, ξ = 1.
pub fn to_characteristic(u0: &GridFunction) -> Result<CharState> {
    let n = u0.len();
    let ux = u0.derivative();
    let dx = u0.dx();

    // cumulative trapezoid of the density (1 + u_x²)², then re-anchored so
    // that Y(0) = 0
    let density: Vec<f64> = ux.values().iter().map(|s| (1.0 + s * s).powi(2)).collect();
    let mut y_of_x = vec![0.0; n];
    for i in 1..n {
        y_of_x[i] = y_of_x[i - 1] + 0.5 * dx * (density[i - 1] + density[i]);
    }
    let y_anchor = interp_at(u0, &y_of_x, 0.0);
    for y in &mut y_of_x {
        *y -= y_anchor;
    }
    if y_of_x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "cumulative Y must be strictly increasing".into(),
        ));
    }

    let y_first = y_of_x[0];
    let y_last = y_of_x[n - 1];
    let dy = (y_last - y_first) / (n - 1) as f64;

    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    // monotone inversion of Y(x) with a single sweep
    let mut seg = 0usize;
    for j in 0..n {
        let target = y_first + j as f64 * dy;
        while seg + 2 < n && y_of_x[seg + 1] < target {
            seg += 1;
        }
        let width = y_of_x[seg + 1] - y_of_x[seg];
        let frac = ((target - y_of_x[seg]) / width).clamp(0.0, 1.0);
        let xj = u0.x(seg) + frac * dx;
        x.push(xj);
        u.push(u0.sample_cubic(xj));
        alpha.push(2.0 * ux.sample_cubic(xj).atan());
    }
    CharState::new(0.0, y_first, dy, x, u, alpha, vec![1.0; n])
}

fn interp_at(grid: &GridFunction, values: &[f64], x: f64) -> f64 {
    let s = ((x - grid.x0()) / grid.dx()).clamp(0.0, (values.len() - 1) as f64);
    let i = (s.floor() as usize).min(values.len() - 2);
    let frac = s - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// One smooth region of a multi-peakon profile: between adjacent peaks,
/// u = A e^{-x} + B e^{x} and u_x = -A e^{-x} + B e^{x}.
#[derive(Debug, Clone, Copy)]
struct PeakonRegion {
    a: f64,
    b: f64,
}

impl PeakonRegion {
    fn u(&self, x: f64) -> f64 {
        self.a * (-x).exp() + self.b * x.exp()
    }

    fn slope(&self, x: f64) -> f64 {
        -self.a * (-x).exp() + self.b * x.exp()
    }

    /// Antiderivative of (1 + u_x²)², exact per region:
    /// expand (1 + (Be^x - Ae^{-x})²)² into e^{kx} terms, k = -4..4 even.
    fn density_antiderivative(&self, x: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let c0 = 1.0 - 4.0 * a * b + 6.0 * a * a * b * b;
        let c2 = 2.0 * b * b - 4.0 * a * b.powi(3);
        let cm2 = 2.0 * a * a - 4.0 * a.powi(3) * b;
        let c4 = b.powi(4);
        let cm4 = a.powi(4);
        c0 * x + 0.5 * c2 * (2.0 * x).exp() - 0.5 * cm2 * (-2.0 * x).exp()
            + 0.25 * c4 * (4.0 * x).exp()
            - 0.25 * cm4 * (-4.0 * x).exp()
    }
}

/// Regions of the profile from left to right: region k covers
/// (q_k, q_{k+1}) with q_0 = -∞, q_{N+1} = ∞. Coefficients are direct sums
/// so that empty sums are exactly zero (a running difference would leave
/// round-off that e^{±x} amplifies in the tails).
fn peakon_regions(s: &PeakonState) -> Vec<PeakonRegion> {
    let n = s.len();
    (0..=n)
        .map(|k| PeakonRegion {
            a: (0..k)
                .map(|i| s.amplitudes()[i] * s.positions()[i].exp())
                .sum(),
            b: (k..n)
                .map(|i| s.amplitudes()[i] * (-s.positions()[i]).exp())
                .sum(),
        })
        .collect()
}

/// Exact characteristic-coordinate initial data for a multi-peakon profile,
/// with the Y-grid aligned so the slope-jump labels Y(q_i) are nodes (exact
/// for the first two peaks, nearest-node for any further ones) and the jumps
/// recorded as interfaces carrying the one-sided slopes.
pub fn peakon_to_characteristic(
    ps: &PeakonState,
    half_width: f64,
    n: usize,
) -> Result<CharState> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidGrid(format!("need at least {MIN_SAMPLES} nodes")));
    }
    let q = ps.positions();
    if q[0] <= -half_width || q[q.len() - 1] >= half_width {
        return Err(Error::InvalidGrid(
            "peaks must lie inside the truncated domain".into(),
        ));
    }
    let regions = peakon_regions(ps);
    // breakpoints of the piecewise-smooth structure
    let mut breaks = vec![-half_width];
    breaks.extend_from_slice(q);
    breaks.push(half_width);
    // cumulative Y at the breakpoints, then anchored at Y(0) = 0
    let mut y_break = vec![0.0];
    for k in 0..breaks.len() - 1 {
        let region = &regions[k];
        let span = region.density_antiderivative(breaks[k + 1])
            - region.density_antiderivative(breaks[k]);
        y_break.push(y_break[k] + span);
    }
    let k0 = breaks.partition_point(|&b| b <= 0.0) - 1;
    let y_at_zero = y_break[k0]
        + (regions[k0].density_antiderivative(0.0) - regions[k0].density_antiderivative(breaks[k0]));
    for y in &mut y_break {
        *y -= y_at_zero;
    }

    // uniform Y-grid aligned with the first (up to) two peak labels
    let (ymin, ymax) = (y_break[0], y_break[y_break.len() - 1]);
    let dy_target = (ymax - ymin) / (n - 1) as f64;
    let y_q1 = y_break[1];
    let dy = if q.len() >= 2 {
        let cells = ((y_break[2] - y_q1) / dy_target).round().max(1.0);
        (y_break[2] - y_q1) / cells
    } else {
        dy_target
    };
    let below = ((y_q1 - ymin) / dy).ceil();
    let y0 = y_q1 - below * dy;
    let count = ((ymax - y0) / dy).floor() as usize + 1;

    // each peak label is represented by its nearest node (exact for the two
    // aligned peaks; off by at most dY/2 for any further ones)
    let peak_node: Vec<usize> = (0..q.len())
        .map(|i| ((y_break[i + 1] - y0) / dy).round().max(0.0) as usize)
        .collect();

    // invert Y per node, region by region (bisection on the exact
    // antiderivative; the density is >= 1 so the map is strictly monotone)
    let mut x = Vec::with_capacity(count);
    let mut u = Vec::with_capacity(count);
    let mut alpha = Vec::with_capacity(count);
    let mut interfaces = Vec::new();
    let mut region_idx = 0usize;
    for j in 0..count {
        // nodes carrying a peak are snapped onto it and record the jump
        if let Some(i) = peak_node
            .iter()
            .position(|&node| node == j && j > 0 && j + 1 < count)
        {
            x.push(q[i]);
            u.push(regions[i + 1].u(q[i]));
            alpha.push(2.0 * regions[i].slope(q[i]).atan());
            interfaces.push(Interface {
                node: j,
                alpha_plus: 2.0 * regions[i + 1].slope(q[i]).atan(),
                xi_plus: 1.0,
            });
            while region_idx + 2 < y_break.len() && breaks[region_idx + 1] <= q[i] {
                region_idx += 1;
            }
            continue;
        }
        let target = y0 + j as f64 * dy;
        while region_idx + 2 < y_break.len() && y_break[region_idx + 1] < target + 1e-13 * dy {
            region_idx += 1;
        }
        let region = &regions[region_idx];
        let (mut lo, mut hi) = (breaks[region_idx], breaks[region_idx + 1]);
        let y_lo = y_break[region_idx];
        let g_lo = region.density_antiderivative(lo);
        let f = |x: f64| y_lo + region.density_antiderivative(x) - g_lo - target;
        // the target may sit exactly on the region boundary
        let xj = if f(lo) >= -1e-12 * dy.max(1.0) {
            lo
        } else if f(hi) <= 1e-12 * dy.max(1.0) {
            hi
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * (1.0 + hi.abs()) {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        x.push(xj);
        u.push(region.u(xj));
        alpha.push(2.0 * region.slope(xj).atan());
    }
    CharState::with_interfaces(0.0, y0, dy, x, u, alpha, vec![1.0; count], interfaces)
}

/// Recompute the x-positions from the current (α, ξ) by integrating
/// x_Y = ξ cos⁴(α/2) in Y, anchored at the tracked center characteristic.
/// Cells to the right of an interface use its right-limit values.
pub fn x_of_y(s: &CharState) -> Vec<f64> {
    let n = s.len();
    let density = |alpha: f64, xi: f64| xi * (0.5 * alpha).cos().powi(4);
    let mut cum = vec![0.0; n];
    for i in 1..n {
        let (a_out, xi_out) = s.plus_values(i - 1);
        cum[i] = cum[i - 1]
            + 0.5
                * s.dy()
                * (density(a_out, xi_out) + density(s.alpha()[i], s.xi()[i]));
    }
    let c = s.center_index();
    let anchor = s.x()[c] - cum[c];
    cum.iter().map(|v| v + anchor).collect()
}

/// Sample the parametric graph {(x(Y), u(Y))} at the nodes of an x-grid.
/// Where consecutive characteristics have collapsed (x flat) the single
/// limiting u value is used; outside the graph's x-range the profile is 0.
pub fn graph_to_x(s: &CharState, spec: GridSpec) -> Result<GridFunction> {
    let n = s.len();
    let xs = s.x();
    let us = s.u();
    let mut values = Vec::with_capacity(spec.n);
    let mut seg = 0usize;
    let flat_tol = 1e-14 * (1.0 + xs[n - 1].abs());
    for k in 0..spec.n {
        let xq = spec.x(k);
        if xq < xs[0] || xq > xs[n - 1] {
            values.push(0.0);
            continue;
        }
        while seg + 2 < n && xs[seg + 1] < xq {
            seg += 1;
        }
        let width = xs[seg + 1] - xs[seg];
        if width <= flat_tol {
            values.push(us[seg]);
            continue;
        }
        let t = ((xq - xs[seg]) / width).clamp(0.0, 1.0);
        // cubic Hermite on the non-uniform graph, linear at the ends
        if seg == 0 || seg + 2 >= n {
            values.push(us[seg] * (1.0 - t) + us[seg + 1] * t);
            continue;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let slope = |a: usize, b: usize| -> f64 {
            let h = xs[b] - xs[a];
            if h <= flat_tol {
                0.0
            } else {
                (us[b] - us[a]) / h
            }
        };
        let m0 = 0.5 * (slope(seg - 1, seg) + slope(seg, seg + 1));
        let m1 = 0.5 * (slope(seg, seg + 1) + slope(seg + 1, seg + 2));
        let h = x1 - x0;
        let t2 = t * t;
        let t3 = t2 * t;
        let v = us[seg] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * h * (t3 - 2.0 * t2 + t)
            + us[seg + 1] * (-2.0 * t3 + 3.0 * t2)
            + m1 * h * (t3 - t2);
        values.push(v);
    }
    GridFunction::new(spec.x0, spec.dx, values)
}
