//! Streamline integration, stream-tube construction and classification,
//! first-integral transport, and tube volume quadrature.
//!
//! Integration uses an embedded Dormand-Prince 4/5 pair with PI step control.
//! Boundary crossings are located by bisection re-stepping from the last
//! accepted state, so the reported hit satisfies the surface equation to
//! 1e-10 on the integrator's own path.

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::geo::{M3, V3};
use crate::potentials::VolumeDensity;
use crate::special::gauss_legendre;
use crate::surface::{SurfacePatch, SurfaceShape};
use rayon::prelude::*;

/// Adaptive integrator controls.
#[derive(Debug, Clone)]
pub struct RkControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for RkControls {
    fn default() -> Self {
        RkControls {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.25,
            min_step: 1e-13,
            max_steps: 100_000,
        }
    }
}

/// Why a streamline stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum ExitEvent {
    /// Event function `index` crossed zero at (t, point).
    Event { index: usize, t: f64, point: V3 },
    MaxTime { t: f64 },
    /// Step size collapsed below min_step; never silent.
    StepCollapse { t: f64 },
}

/// Recorded streamline: sample times, points, and the exit event.
#[derive(Debug, Clone)]
pub struct Streamline {
    pub times: Vec<f64>,
    pub points: Vec<V3>,
    pub exit: ExitEvent,
}

/// Sign-change event in a scalar function of position.
pub struct EventFn<'a> {
    pub f: Box<dyn Fn(V3) -> f64 + 'a>,
    /// Required crossing direction: -1 falling, +1 rising, 0 any.
    pub direction: i8,
    /// Events are ignored before this time (lets trajectories leave S).
    pub arm_time: f64,
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Generic state for the coupled (position, fundamental matrix) system.
#[derive(Clone, Copy, Debug)]
struct FlowState {
    x: V3,
    m: Option<M3>,
}

impl FlowState {
    fn axpy(&self, h: f64, k: &FlowDeriv) -> FlowState {
        let mut out = *self;
        out.x += k.dx * h;
        if let (Some(m), Some(dm)) = (&mut out.m, &k.dm) {
            for i in 0..3 {
                for j in 0..3 {
                    m.0[i][j] += h * dm.0[i][j];
                }
            }
        }
        out
    }
    fn norm(&self) -> f64 {
        let mut n = self.x.norm();
        if let Some(m) = &self.m {
            for r in &m.0 {
                for v in r {
                    n = n.max(v.abs());
                }
            }
        }
        n
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct FlowDeriv {
    dx: V3,
    dm: Option<M3>,
}

fn flow_rhs(field: &dyn RealField, s: &FlowState, sign: f64) -> Result<FlowDeriv> {
    if let Some(m) = &s.m {
        let jac = field.jacobian(s.x)?;
        let mut dm = M3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += jac.0[i][k] * m.0[k][j];
                }
                dm.0[i][j] = sign * acc;
            }
        }
        Ok(FlowDeriv {
            dx: field.eval(s.x)? * sign,
            dm: Some(dm),
        })
    } else {
        Ok(FlowDeriv {
            dx: field.eval(s.x)? * sign,
            dm: None,
        })
    }
}

struct Integrator<'a> {
    field: &'a dyn RealField,
    sign: f64,
    controls: RkControls,
}

impl<'a> Integrator<'a> {
    /// One Dormand-Prince step of size h from (t, s); returns (state, error estimate).
    fn step(&self, s: &FlowState, h: f64) -> Result<(FlowState, f64)> {
        let mut k: Vec<FlowDeriv> = Vec::with_capacity(7);
        k.push(flow_rhs(self.field, s, self.sign)?);
        for stage in 1..7 {
            let mut trial = *s;
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    trial = trial.axpy(h * a, kj);
                }
            }
            k.push(flow_rhs(self.field, &trial, self.sign)?);
        }
        let mut out = *s;
        let mut err4 = *s;
        for (j, kj) in k.iter().enumerate() {
            if DP_B5[j] != 0.0 {
                out = out.axpy(h * DP_B5[j], kj);
            }
            if DP_B4[j] != 0.0 {
                err4 = err4.axpy(h * DP_B4[j], kj);
            }
        }
        let scale = self.controls.abs_tol
            + self.controls.rel_tol * s.norm().max(out.norm());
        let mut errn = (out.x - err4.x).norm();
        if let (Some(a), Some(b)) = (&out.m, &err4.m) {
            for i in 0..3 {
                for j in 0..3 {
                    errn = errn.max((a.0[i][j] - b.0[i][j]).abs());
                }
            }
        }
        Ok((out, errn / scale))
    }
}

/// Integrate dx/dt = sign * u(x) with events; record samples.
#[allow(clippy::too_many_arguments)]
fn integrate_core(
    field: &dyn RealField,
    x0: V3,
    with_matrix: Option<M3>,
    sign: f64,
    t_max: f64,
    controls: &RkControls,
    events: &[EventFn],
    mut on_sample: impl FnMut(f64, &FlowState),
) -> Result<(FlowState, ExitEvent)> {
    let integ = Integrator {
        field,
        sign,
        controls: controls.clone(),
    };
    let mut t = 0.0;
    let mut state = FlowState {
        x: x0,
        m: with_matrix,
    };
    on_sample(t, &state);
    let mut h = (controls.max_step / 8.0).min(t_max / 4.0).max(controls.min_step);
    let mut ev_prev: Vec<f64> = events.iter().map(|e| (e.f)(x0)).collect();
    for _ in 0..controls.max_steps {
        if t >= t_max {
            return Ok((state, ExitEvent::MaxTime { t }));
        }
        h = h.min(t_max - t);
        let (next, err) = integ.step(&state, h)?;
        if err > 1.0 {
            // reject
            h = (h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)).max(controls.min_step);
            if h <= controls.min_step * 1.0001 {
                return Ok((state, ExitEvent::StepCollapse { t }));
            }
            continue;
        }
        // check events on this step
        let t_next = t + h;
        let mut triggered: Option<(usize, f64, FlowState)> = None;
        for (idx, ev) in events.iter().enumerate() {
            let val = (ev.f)(next.x);
            let prev = ev_prev[idx];
            let armed = t_next > ev.arm_time;
            let crossing = prev.signum() != val.signum() && prev != 0.0;
            let dir_ok = match ev.direction {
                0 => true,
                d => (val - prev).signum() == d as f64,
            };
            if armed && crossing && dir_ok {
                // bisection in step size from the accepted left state
                let mut lo = 0.0;
                let mut hi = h;
                let mut hit = next;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (trial, _) = integ.step(&state, mid)?;
                    let v = (ev.f)(trial.x);
                    if v.abs() < 1e-12 {
                        hit = trial;
                        hi = mid;
                        break;
                    }
                    if v.signum() == prev.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                        hit = trial;
                    }
                    if hi - lo < 1e-14 * h.max(1.0) {
                        break;
                    }
                }
                triggered = Some((idx, t + hi, hit));
                break;
            }
            ev_prev[idx] = val;
        }
        if let Some((idx, te, hit)) = triggered {
            on_sample(te, &hit);
            return Ok((
                hit,
                ExitEvent::Event {
                    index: idx,
                    t: te,
                    point: hit.x,
                },
            ));
        }
        t = t_next;
        state = next;
        on_sample(t, &state);
        h = (h * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)).min(controls.max_step);
    }
    Err(Error::numerical(format!(
        "streamline exceeded {} steps at t = {t:.3e}",
        controls.max_steps
    )))
}

/// Integrate a streamline of the field from x0 up to max_time, stopping at
/// the first triggered event.
pub fn integrate_streamline(
    field: &dyn RealField,
    x0: V3,
    max_time: f64,
    controls: &RkControls,
    events: &[EventFn],
) -> Result<Streamline> {
    let mut times = Vec::new();
    let mut points = Vec::new();
    let (_, exit) = integrate_core(
        field,
        x0,
        None,
        1.0,
        max_time,
        controls,
        events,
        |t, s| {
            times.push(t);
            points.push(s.x);
        },
    )?;
    Ok(Streamline {
        times,
        points,
        exit,
    })
}

/// One streamline of a stream tube with its variational data.
#[derive(Debug, Clone)]
pub struct TubeLine {
    pub s: [f64; 2],
    /// Accepted sample times in [0, t_return].
    pub times: Vec<f64>,
    pub points: Vec<V3>,
    /// Fundamental matrices M(t) with M(0) = I at the sample times.
    pub matrices: Vec<M3>,
    /// det Jac(phi)(t, s) = det [u(x) | M mu_s1 | M mu_s2] at sample times.
    pub det_jac: Vec<f64>,
    /// Return-to-surface time T_0(s).
    pub t_return: f64,
    pub return_point: V3,
    /// Deepest interior excursion after return (positive depth), with time.
    pub depth: f64,
    pub t_depth: f64,
}

/// Stream tube from a boundary patch: the (t, s) atlas of the flow.
#[derive(Debug)]
pub struct StreamTube {
    pub patch: SurfacePatch,
    pub s_nodes: Vec<[f64; 2]>,
    pub s_weights: Vec<f64>,
    pub lines: Vec<TubeLine>,
    /// (rho_0, T, delta) classification; populated by classify_tube.
    pub classification: Option<(f64, f64, f64)>,
}

/// Polar Gauss x uniform quadrature for the chart disk of radius s_max.
pub fn disk_quadrature(s_max: f64, n_radial: usize, n_angular: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (rn, rw) = gauss_legendre(n_radial);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (r, wr) in rn.iter().zip(&rw) {
        let rho = 0.5 * s_max * (r + 1.0);
        let wrho = 0.5 * s_max * wr;
        for k in 0..n_angular {
            let alpha = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n_angular as f64;
            nodes.push([rho * alpha.cos(), rho * alpha.sin()]);
            weights.push(wrho * 2.0 * std::f64::consts::PI / n_angular as f64 * rho);
        }
    }
    (nodes, weights)
}

/// Build the stream tube of `field` emanating from the patch: flow and
/// variational equations integrated together per chart node, with return and
/// depth events. Fails fast when the field does not point outward on the patch.
pub fn build_stream_tube(
    field: &dyn RealField,
    patch: &SurfacePatch,
    s_nodes: Vec<[f64; 2]>,
    s_weights: Vec<f64>,
    t_budget: f64,
    controls: &RkControls,
) -> Result<StreamTube> {
    // transversality on the patch
    let mut rho0 = f64::INFINITY;
    for s in &s_nodes {
        let y = patch.chart(*s);
        let dir = (y - patch.shape.center()).normalized();
        let theta = dir.z().clamp(-1.0, 1.0).acos();
        let phi = dir.y().atan2(dir.x());
        let eta = patch.shape.chart_normal(theta, phi);
        let un = field.eval(y)?.dot(eta);
        rho0 = rho0.min(un);
    }
    if rho0 <= 0.0 {
        return Err(Error::validation(format!(
            "field does not point outward on the patch (min u.eta = {rho0:.3e})"
        )));
    }

    let shape = patch.shape.clone();
    let lines: Vec<Result<TubeLine>> = s_nodes
        .par_iter()
        .map(|s| trace_tube_line(field, patch, &shape, *s, t_budget, controls))
        .collect();
    let mut done = Vec::with_capacity(lines.len());
    for l in lines {
        done.push(l?);
    }
    Ok(StreamTube {
        patch: patch.clone(),
        s_nodes,
        s_weights,
        lines: done,
        classification: None,
    })
}

fn trace_tube_line(
    field: &dyn RealField,
    patch: &SurfacePatch,
    shape: &SurfaceShape,
    s: [f64; 2],
    t_budget: f64,
    controls: &RkControls,
) -> Result<TubeLine> {
    let x0 = patch.chart(s);
    let (mu1, mu2) = patch.chart_tangents(s);
    // phase 1: leave the surface, fly through the exterior, return to S
    let sd = {
        let shape = shape.clone();
        move |x: V3| shape.signed_distance(x)
    };
    let events = [EventFn {
        f: Box::new(sd.clone()),
        direction: -1,
        arm_time: 1e-6,
    }];
    let mut times = Vec::new();
    let mut points = Vec::new();
    let mut mats = Vec::new();
    let (end_state, exit) = integrate_core(
        field,
        x0,
        Some(M3::IDENTITY),
        1.0,
        t_budget,
        controls,
        &events,
        |t, st| {
            times.push(t);
            points.push(st.x);
            mats.push(st.m.unwrap());
        },
    )?;
    let (t_return, return_point) = match exit {
        ExitEvent::Event { t, point, .. } => (t, point),
        ExitEvent::MaxTime { t } => {
            return Err(Error::numerical(format!(
                "streamline from s = ({:.3}, {:.3}) did not return to S within t = {t:.2}",
                s[0], s[1]
            )))
        }
        ExitEvent::StepCollapse { t } => {
            return Err(Error::numerical(format!(
                "step collapse at t = {t:.3e} on streamline from s = ({:.3}, {:.3})",
                s[0], s[1]
            )))
        }
    };
    // phase 2: continue into G and record the deepest excursion
    let mut depth = 0.0_f64;
    let mut t_depth = t_return;
    let exit_event = [EventFn {
        f: Box::new(sd),
        direction: 1,
        arm_time: 1e-6,
    }];
    let shape2 = shape.clone();
    let (_, _exit2) = integrate_core(
        field,
        end_state.x,
        None,
        1.0,
        t_budget,
        controls,
        &exit_event,
        |t, st| {
            let d = -shape2.signed_distance(st.x);
            if d > depth {
                depth = d;
                t_depth = t_return + t;
            }
        },
    )?;
    // det Jac(phi) = u(x) . (M mu_s1 x M mu_s2)
    let mut det_jac = Vec::with_capacity(times.len());
    for (p, m) in points.iter().zip(&mats) {
        let u = field.eval(*p)?;
        let c1 = m.apply(mu1);
        let c2 = m.apply(mu2);
        det_jac.push(M3::from_columns(u, c1, c2).det());
    }
    Ok(TubeLine {
        s,
        times,
        points,
        matrices: mats,
        det_jac,
        t_return,
        return_point,
        depth,
        t_depth,
    })
}

impl StreamTube {
    /// Hermite interpolation of the line position at time t.
    pub fn line_point(&self, line: &TubeLine, field: &dyn RealField, t: f64) -> Result<V3> {
        let times = &line.times;
        if t <= times[0] {
            return Ok(line.points[0]);
        }
        let n = times.len();
        if t >= times[n - 1] {
            return Ok(line.points[n - 1]);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if times[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = times[hi] - times[lo];
        let tau = (t - times[lo]) / h;
        let p0 = line.points[lo];
        let p1 = line.points[hi];
        let v0 = field.eval(p0)? * h;
        let v1 = field.eval(p1)? * h;
        let t2 = tau * tau;
        let t3 = t2 * tau;
        Ok(p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + v0 * (t3 - 2.0 * t2 + tau)
            + p1 * (-2.0 * t3 + 3.0 * t2)
            + v1 * (t3 - t2))
    }

    /// Linear interpolation of det Jac(phi) along the line.
    pub fn line_det_jac(&self, line: &TubeLine, t: f64) -> f64 {
        let times = &line.times;
        let n = times.len();
        if t <= times[0] {
            return line.det_jac[0];
        }
        if t >= times[n - 1] {
            return line.det_jac[n - 1];
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if times[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (t - times[lo]) / (times[hi] - times[lo]);
        line.det_jac[lo] * (1.0 - w) + line.det_jac[hi] * w
    }
}

/// Classify the built tube: rho_0 = min u.eta on the patch nodes, T twice the
/// latest depth time, delta the shallowest interior excursion.
pub fn classify_tube(tube: &mut StreamTube, field: &dyn RealField) -> Result<(f64, f64, f64)> {
    let mut rho0 = f64::INFINITY;
    for s in &tube.s_nodes {
        let y = tube.patch.chart(*s);
        let dir = (y - tube.patch.shape.center()).normalized();
        let theta = dir.z().clamp(-1.0, 1.0).acos();
        let phi = dir.y().atan2(dir.x());
        let eta = tube.patch.shape.chart_normal(theta, phi);
        rho0 = rho0.min(field.eval(y)?.dot(eta));
    }
    if rho0 <= 0.0 {
        return Err(Error::validation("tube lost transversality on the patch"));
    }
    let mut t_max = 0.0_f64;
    let mut delta = f64::INFINITY;
    for line in &tube.lines {
        if line.depth <= 0.0 {
            return Err(Error::numerical(format!(
                "streamline from s = ({:.3}, {:.3}) recorded no interior excursion",
                line.s[0], line.s[1]
            )));
        }
        t_max = t_max.max(line.t_depth);
        delta = delta.min(line.depth);
    }
    let cls = (rho0, 2.0 * t_max, delta);
    tube.classification = Some(cls);
    Ok(cls)
}

/// Transported scalar: phi(x) = phi0(chart coords of the backward hit point),
/// zero when the backward characteristic misses the patch.
pub fn transport_eval(
    field: &dyn RealField,
    patch: &SurfacePatch,
    phi0: &dyn Fn([f64; 2]) -> f64,
    x: V3,
    t_back: f64,
    controls: &RkControls,
) -> Result<f64> {
    let shape = patch.shape.clone();
    if shape.signed_distance(x) <= 0.0 {
        return Ok(0.0);
    }
    let sd = move |p: V3| shape.signed_distance(p);
    let events = [EventFn {
        f: Box::new(sd),
        direction: -1,
        arm_time: 0.0,
    }];
    let mut last = x;
    let (_, exit) = integrate_core(
        field,
        x,
        None,
        -1.0,
        t_back,
        controls,
        &events,
        |_, st| {
            last = st.x;
        },
    )?;
    match exit {
        ExitEvent::Event { point, .. } => Ok(match patch.chart_coords_of(point) {
            Some(s) => phi0(s),
            None => 0.0,
        }),
        _ => Ok(0.0),
    }
}

/// Volume quadrature of the transported density phi * u over the exterior
/// part of the tube: nodes x_q = phi(t_q, s_q), weights from |det Jac|, the
/// transported factor structural (phi0 at the chart footpoint).
pub fn tube_quadrature(
    tube: &StreamTube,
    field: &dyn RealField,
    phi0: &dyn Fn([f64; 2]) -> f64,
    n_t: usize,
    clearance: f64,
) -> Result<VolumeDensity> {
    let mut vd = VolumeDensity::default();
    // graded panels toward the surface ends
    let panels = [(0.0, 0.08), (0.08, 0.35), (0.35, 0.7), (0.7, 1.0)];
    let per_panel = (n_t / panels.len()).max(2);
    let (gn, gw) = gauss_legendre(per_panel);
    let mut support: f64 = 0.0;
    for (line, (s, ws)) in tube.lines.iter().zip(tube.s_nodes.iter().zip(&tube.s_weights)) {
        let f0 = phi0(*s);
        if f0 == 0.0 {
            continue;
        }
        let t_ret = line.t_return;
        for (a, b) in panels {
            for (tn, tw) in gn.iter().zip(&gw) {
                let t = t_ret * (a + (b - a) * 0.5 * (tn + 1.0));
                let wt = t_ret * (b - a) * 0.5 * tw;
                let x = tube.line_point(line, field, t)?;
                // drop the sliver closer to S than the clearance
                if tube.patch.shape.signed_distance(x) < clearance {
                    continue;
                }
                let dj = tube.line_det_jac(line, t).abs();
                let u = field.eval(x)?;
                vd.nodes.push(x);
                vd.weights.push(wt * ws * dj);
                vd.values.push(u.to_c().scale_re(f0));
                support = support.max((x - tube.patch.shape.center()).norm());
            }
        }
    }
    vd.support_radius = support;
    if !vd.nodes.is_empty() {
        // exclusion radius ~ local node separation for self-field smoothing
        let total: f64 = vd.weights.iter().sum();
        vd.exclusion_radius = (total / vd.nodes.len() as f64).cbrt() * 0.75;
    }
    Ok(vd)
}

/// Poincare return-map samples: crossings of the plane (x - p0) . n = 0 in
/// the positive direction.
pub fn poincare_section(
    field: &dyn RealField,
    plane_point: V3,
    plane_normal: V3,
    seeds: &[V3],
    n_returns: usize,
    t_budget: f64,
    controls: &RkControls,
) -> Result<Vec<Vec<V3>>> {
    let n = plane_normal.normalized();
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut crossings = Vec::new();
        let mut x = seed;
        let mut budget = t_budget;
        for _ in 0..n_returns {
            let f = {
                let n = n;
                move |p: V3| (p - plane_point).dot(n)
            };
            let events = [EventFn {
                f: Box::new(f),
                direction: 1,
                arm_time: 1e-4,
            }];
            let (st, exit) = integrate_core(field, x, None, 1.0, budget, controls, &events, |_, _| {})?;
            match exit {
                ExitEvent::Event { t, point, .. } => {
                    crossings.push(point);
                    x = st.x;
                    budget -= t;
                    if budget <= 0.0 {
                        break;
                    }
                }
                _ => break,
            }
        }
        out.push(crossings);
    }
    Ok(out)
}
