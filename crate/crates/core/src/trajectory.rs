//! Analytic flat-output references and feasibility checking.
//!
//! Every generator produces position and yaw as [`Jet`]s in time, so the
//! derivative relationships in the returned [`FlatOutput`] are exact.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::aero::{AeroCoeffs, VehicleParams};
use crate::flatness::{flat_state, inputs_from_moment_thrust, velocity_zero_lift, FlatOutput};
use crate::frames::{EulerZxy, UnitQuat};
use crate::jet::Jet;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("time {t} s outside [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("invalid trajectory parameter: {0}")]
    Invalid(String),
}

/// A time-parameterized flat-output reference.
pub trait Reference: Send + Sync {
    fn duration(&self) -> f64;

    /// Position and yaw jets at `t`, with `t` already range-checked.
    fn jets(&self, t: f64) -> ([Jet; 3], Jet);

    fn sample(&self, t: f64) -> Result<FlatOutput, TrajectoryError> {
        let d = self.duration();
        if !(t >= -1e-9 && t <= d + 1e-9) {
            return Err(TrajectoryError::OutOfRange { t, duration: d });
        }
        let (p, y) = self.jets(t.clamp(0.0, d));
        Ok(flat_from_jets(&p, &y))
    }
}

pub fn flat_from_jets(p: &[Jet; 3], yaw: &Jet) -> FlatOutput {
    let v = |k: usize| Vec3::new(p[0].derivative(k), p[1].derivative(k), p[2].derivative(k));
    FlatOutput {
        position: v(0),
        velocity: v(1),
        acceleration: v(2),
        jerk: v(3),
        snap: v(4),
        yaw: yaw.derivative(0),
        yaw_rate: yaw.derivative(1),
        yaw_accel: yaw.derivative(2),
    }
}

/// Quintic smoothstep `10u³ − 15u⁴ + 6u⁵` (C² at the ends).
pub const S5: [f64; 6] = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
/// Septic smoothstep (C³).
pub const S7: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0];
/// Nonic smoothstep (C⁴).
pub const S9: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];

/// Smoothstep polynomial applied to `(t − t0)/width`, clamped to [0, 1].
fn smoothstep_jet(poly: &[f64], t: f64, t0: f64, width: f64) -> Jet {
    let u = (t - t0) / width;
    if u <= 0.0 {
        Jet::constant(0.0)
    } else if u >= 1.0 {
        Jet::constant(1.0)
    } else {
        ((Jet::variable(t) + (-t0)) * (1.0 / width)).poly(poly)
    }
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YawStep {
    /// Centre of the step, s.
    pub time: f64,
    /// Duration of the step, s.
    pub width: f64,
    /// Yaw change, rad.
    pub amount: f64,
}

/// How yaw follows the path heading χ. Yaw is the angle of the horizontal
/// projection of b_y, so `ψ = χ` puts the wing perpendicular to the velocity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum YawPolicy {
    #[default]
    Coordinated,
    /// `ψ = χ − side·π/2`; `side = +1` makes the right wingtip lead.
    KnifeEdge {
        #[serde(default = "one")]
        side: f64,
    },
    Fixed {
        yaw: f64,
    },
    /// Coordinated plus smooth quintic steps.
    Scheduled {
        steps: Vec<YawStep>,
    },
}

fn one() -> f64 {
    1.0
}

impl YawPolicy {
    pub fn apply(&self, heading: Jet, t: f64) -> Jet {
        match self {
            YawPolicy::Coordinated => heading,
            YawPolicy::KnifeEdge { side } => heading + (-side * FRAC_PI_2),
            YawPolicy::Fixed { yaw } => Jet::constant(*yaw),
            YawPolicy::Scheduled { steps } => steps.iter().fold(heading, |acc, s| {
                acc + smoothstep_jet(&S5, t, s.time - s.width / 2.0, s.width) * s.amount
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMode {
    FromHover,
    ToHover,
}

fn default_center() -> Vec3 {
    Vec3::new(0.0, 0.0, -1.5)
}

/// Declarative description of a reference, as found in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryDef {
    Hover {
        #[serde(default = "default_center")]
        position: Vec3,
        #[serde(default)]
        yaw: f64,
        duration: f64,
    },
    Lemniscate {
        speed: f64,
        lap_time: f64,
        laps: f64,
        #[serde(default = "default_center")]
        center: Vec3,
        #[serde(default)]
        yaw: YawPolicy,
    },
    Circle {
        radius: f64,
        speed: f64,
        laps: f64,
        #[serde(default = "default_center")]
        center: Vec3,
        #[serde(default)]
        yaw: YawPolicy,
        #[serde(default)]
        clockwise: bool,
    },
    HoverToHover {
        #[serde(default = "default_center")]
        start: Vec3,
        displacement: Vec3,
        #[serde(default)]
        yaw_start: f64,
        yaw_change: f64,
        duration: f64,
        #[serde(default = "default_hold")]
        hold_before: f64,
        #[serde(default = "default_hold_after")]
        hold_after: f64,
    },
    TransitionCircle {
        mode: TransitionMode,
        radius: f64,
        speed: f64,
        transition_time: f64,
        #[serde(default = "default_blend")]
        blend_time: f64,
        #[serde(default = "default_hold")]
        hover_time: f64,
        #[serde(default = "default_cruise")]
        cruise_time: f64,
        #[serde(default = "default_center")]
        center: Vec3,
    },
    DiffThrustTurn {
        speed: f64,
        #[serde(default = "default_reversal")]
        reversal_time: f64,
        #[serde(default = "default_flip")]
        yaw_flip_time: f64,
        #[serde(default = "default_cruise_turn")]
        cruise_time: f64,
        #[serde(default = "default_center")]
        start: Vec3,
        #[serde(default)]
        heading: f64,
    },
}

fn default_hold() -> f64 {
    1.0
}
fn default_hold_after() -> f64 {
    2.0
}
fn default_blend() -> f64 {
    0.5
}
fn default_cruise() -> f64 {
    2.0
}
fn default_reversal() -> f64 {
    1.6
}
fn default_flip() -> f64 {
    0.5
}
fn default_cruise_turn() -> f64 {
    1.5
}

impl TrajectoryDef {
    /// Hover-to-hover with the standard holds.
    pub fn hover_to_hover(displacement: f64, yaw_change: f64, duration: f64) -> Self {
        TrajectoryDef::HoverToHover {
            start: default_center(),
            displacement: Vec3::new(displacement, 0.0, 0.0),
            yaw_start: 0.0,
            yaw_change,
            duration,
            hold_before: default_hold(),
            hold_after: default_hold_after(),
        }
    }

    pub fn hover(duration: f64) -> Self {
        TrajectoryDef::Hover {
            position: default_center(),
            yaw: 0.0,
            duration,
        }
    }

    /// 6 m/s, 7 s laps.
    pub fn lemniscate(laps: f64) -> Self {
        TrajectoryDef::Lemniscate {
            speed: 6.0,
            lap_time: 7.0,
            laps,
            center: default_center(),
            yaw: YawPolicy::Coordinated,
        }
    }

    pub fn circle(speed: f64, laps: f64, yaw: YawPolicy) -> Self {
        TrajectoryDef::Circle {
            radius: 3.5,
            speed,
            laps,
            center: default_center(),
            yaw,
            clockwise: false,
        }
    }

    pub fn transition(mode: TransitionMode) -> Self {
        TrajectoryDef::TransitionCircle {
            mode,
            radius: 3.5,
            speed: 8.0,
            transition_time: 3.0,
            blend_time: default_blend(),
            hover_time: default_hold(),
            cruise_time: default_cruise(),
            center: default_center(),
        }
    }

    pub fn diff_thrust_turn() -> Self {
        TrajectoryDef::DiffThrustTurn {
            speed: 7.0,
            reversal_time: default_reversal(),
            yaw_flip_time: default_flip(),
            cruise_time: default_cruise_turn(),
            start: default_center() - Vec3::new(7.0 * default_cruise_turn(), 0.0, 0.0),
            heading: 0.0,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Reference>, TrajectoryError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TrajectoryError::Invalid(format!("{name} must be positive")))
            }
        };
        Ok(match self {
            TrajectoryDef::Hover {
                position,
                yaw,
                duration,
            } => {
                pos("duration", *duration)?;
                Box::new(Hover {
                    position: *position,
                    yaw: *yaw,
                    duration: *duration,
                })
            }
            TrajectoryDef::Lemniscate {
                speed,
                lap_time,
                laps,
                center,
                yaw,
            } => {
                pos("speed", *speed)?;
                pos("lap_time", *lap_time)?;
                pos("laps", *laps)?;
                Box::new(Lemniscate::new(*speed, *lap_time, *laps, *center, yaw.clone()))
            }
            TrajectoryDef::Circle {
                radius,
                speed,
                laps,
                center,
                yaw,
                clockwise,
            } => {
                pos("radius", *radius)?;
                pos("speed", *speed)?;
                pos("laps", *laps)?;
                Box::new(Circle {
                    radius: *radius,
                    speed: *speed,
                    duration: laps * TAU * radius / speed,
                    center: *center,
                    yaw: yaw.clone(),
                    dir: if *clockwise { -1.0 } else { 1.0 },
                })
            }
            TrajectoryDef::HoverToHover {
                start,
                displacement,
                yaw_start,
                yaw_change,
                duration,
                hold_before,
                hold_after,
            } => {
                pos("duration", *duration)?;
                if *hold_before < 0.0 || *hold_after < 0.0 {
                    return Err(TrajectoryError::Invalid("holds must be non-negative".into()));
                }
                Box::new(HoverToHover {
                    start: *start,
                    displacement: *displacement,
                    yaw_start: *yaw_start,
                    yaw_change: *yaw_change,
                    move_time: *duration,
                    hold_before: *hold_before,
                    hold_after: *hold_after,
                })
            }
            TrajectoryDef::TransitionCircle {
                mode,
                radius,
                speed,
                transition_time,
                blend_time,
                hover_time,
                cruise_time,
                center,
            } => {
                pos("radius", *radius)?;
                pos("speed", *speed)?;
                pos("transition_time", *transition_time)?;
                pos("blend_time", *blend_time)?;
                if 2.0 * blend_time > *transition_time {
                    return Err(TrajectoryError::Invalid(
                        "blend_time must be at most half the transition time".into(),
                    ));
                }
                Box::new(TransitionCircle::new(
                    *mode,
                    *radius,
                    *speed,
                    *transition_time,
                    *blend_time,
                    *hover_time,
                    *cruise_time,
                    *center,
                ))
            }
            TrajectoryDef::DiffThrustTurn {
                speed,
                reversal_time,
                yaw_flip_time,
                cruise_time,
                start,
                heading,
            } => {
                pos("speed", *speed)?;
                pos("reversal_time", *reversal_time)?;
                pos("yaw_flip_time", *yaw_flip_time)?;
                Box::new(DiffThrustTurn::new(
                    *speed,
                    *reversal_time,
                    *yaw_flip_time,
                    *cruise_time,
                    *start,
                    *heading,
                ))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryDef::Hover { .. } => "hover",
            TrajectoryDef::Lemniscate { .. } => "lemniscate",
            TrajectoryDef::Circle { .. } => "circle",
            TrajectoryDef::HoverToHover { .. } => "hover_to_hover",
            TrajectoryDef::TransitionCircle { .. } => "transition_circle",
            TrajectoryDef::DiffThrustTurn { .. } => "diff_thrust_turn",
        }
    }
}

/// Static hover.
#[derive(Debug, Clone)]
pub struct Hover {
    pub position: Vec3,
    pub yaw: f64,
    pub duration: f64,
}

impl Reference for Hover {
    fn duration(&self) -> f64 {
        self.duration
    }
    fn jets(&self, _t: f64) -> ([Jet; 3], Jet) {
        (
            [0, 1, 2].map(|i| Jet::constant(self.position[i])),
            Jet::constant(self.yaw),
        )
    }
}

fn circle_jets(center: &Vec3, radius: f64, angle: Jet, dir: f64) -> ([Jet; 3], Jet) {
    let (s, c) = angle.sin_cos();
    (
        [c * radius + center.x, s * radius + center.y, Jet::constant(center.z)],
        angle + dir * FRAC_PI_2,
    )
}

/// Constant-speed circle in the horizontal plane.
#[derive(Debug, Clone)]
pub struct Circle {
    pub radius: f64,
    pub speed: f64,
    pub duration: f64,
    pub center: Vec3,
    pub yaw: YawPolicy,
    /// +1 counter-clockwise in the x-y plane, −1 clockwise.
    pub dir: f64,
}

impl Reference for Circle {
    fn duration(&self) -> f64 {
        self.duration
    }
    fn jets(&self, t: f64) -> ([Jet; 3], Jet) {
        let angle = Jet::variable(t) * (self.dir * self.speed / self.radius);
        let (p, heading) = circle_jets(&self.center, self.radius, angle, self.dir);
        (p, self.yaw.apply(heading, t))
    }
}

/// Lemniscate of Bernoulli flown at constant speed.
///
/// `x = a cos u/(1 + sin²u)`, `y = a sin u cos u/(1 + sin²u)` with
/// `|dc/du| = a/√(1 + sin²u)`; `u(t)` is found by exact arc-length inversion.
#[derive(Debug, Clone)]
pub struct Lemniscate {
    pub a: f64,
    pub speed: f64,
    pub duration: f64,
    pub center: Vec3,
    pub yaw: YawPolicy,
    u0: f64,
    perimeter: f64,
    /// Arc length at `u = k·2π/N`.
    arc: Vec<f64>,
    /// Unwrapped heading at the same nodes.
    heading: Vec<f64>,
}

const LEMNISCATE_NODES: usize = 2048;

fn gauss_legendre_5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (m, h) = ((a + b) / 2.0, (b - a) / 2.0);
    h * X.iter().zip(W).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
}

impl Lemniscate {
    /// Lemniscate whose perimeter equals `speed · lap_time`.
    pub fn new(speed: f64, lap_time: f64, laps: f64, center: Vec3, yaw: YawPolicy) -> Self {
        let du = TAU / LEMNISCATE_NODES as f64;
        let unit_ds = |u: f64| 1.0 / (1.0 + u.sin().powi(2)).sqrt();
        let mut arc = vec![0.0; LEMNISCATE_NODES + 1];
        for k in 0..LEMNISCATE_NODES {
            let u = k as f64 * du;
            arc[k + 1] = arc[k] + gauss_legendre_5(unit_ds, u, u + du);
        }
        let unit_perimeter = arc[LEMNISCATE_NODES];
        let a = speed * lap_time / unit_perimeter;
        for s in arc.iter_mut() {
            *s *= a;
        }
        let mut heading = Vec::with_capacity(LEMNISCATE_NODES + 1);
        let mut prev: Option<f64> = None;
        for k in 0..=LEMNISCATE_NODES {
            let u = k as f64 * du;
            let (dx, dy) = Self::tangent(u);
            let raw = dy.atan2(dx);
            let h = match prev {
                Some(p) => raw + TAU * ((p - raw) / TAU).round(),
                None => raw,
            };
            heading.push(h);
            prev = Some(h);
        }
        Self {
            a,
            speed,
            duration: laps * lap_time,
            center,
            yaw,
            u0: FRAC_PI_2,
            perimeter: a * unit_perimeter,
            arc,
            heading,
        }
    }

    fn tangent(u: f64) -> (f64, f64) {
        let (s, c) = u.sin_cos();
        let d = 1.0 + s * s;
        let dx = (-s * d - c * 2.0 * s * c) / (d * d);
        let dy = ((c * c - s * s) * d - s * c * 2.0 * s * c) / (d * d);
        (dx, dy)
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    fn arc_length(&self, u: f64) -> f64 {
        let laps = (u / TAU).floor();
        let r = u - laps * TAU;
        let du = TAU / LEMNISCATE_NODES as f64;
        let k = ((r / du).floor() as usize).min(LEMNISCATE_NODES - 1);
        let a = self.a;
        let ds = |x: f64| a / (1.0 + x.sin().powi(2)).sqrt();
        laps * self.perimeter + self.arc[k] + gauss_legendre_5(ds, k as f64 * du, r)
    }

    /// Curve parameter at arc length `s` (Newton on the exact arc length).
    fn parameter_at(&self, s: f64) -> f64 {
        let laps = (s / self.perimeter).floor();
        let r = s - laps * self.perimeter;
        let k = self.arc.partition_point(|&x| x <= r).clamp(1, LEMNISCATE_NODES) - 1;
        let du = TAU / LEMNISCATE_NODES as f64;
        let mut u = k as f64 * du + laps * TAU;
        for _ in 0..20 {
            let f = self.arc_length(u) - s;
            let step = f * (1.0 + u.sin().powi(2)).sqrt() / self.a;
            u -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        u
    }

    fn unwrapped_heading(&self, u: f64, raw: f64) -> f64 {
        let laps = (u / TAU).floor();
        let r = u - laps * TAU;
        let du = TAU / LEMNISCATE_NODES as f64;
        let x = r / du;
        let k = (x.floor() as usize).min(LEMNISCATE_NODES - 1);
        let f = x - k as f64;
        let table = self.heading[k] * (1.0 - f) + self.heading[k + 1] * f;
        // heading is periodic per lap (figure eight turns cancel)
        raw + TAU * ((table - raw) / TAU).round()
    }
}

impl Reference for Lemniscate {
    fn duration(&self) -> f64 {
        self.duration
    }
    fn jets(&self, t: f64) -> ([Jet; 3], Jet) {
        let s0 = self.arc_length(self.u0);
        let u = self.parameter_at(s0 + self.speed * t);
        // du/dt = V √(1 + sin²u)/a, solved for the Taylor coefficients by
        // Picard iteration (one coefficient per pass)
        let k = self.speed / self.a;
        let mut uj = Jet::constant(u);
        for _ in 0..crate::jet::ORDER {
            let s = uj.sin();
            uj = ((s * s + 1.0).sqrt() * k).integrate(u);
        }
        let (s, c) = uj.sin_cos();
        let d = s * s + 1.0;
        let x = c / d * self.a;
        let y = s * c / d * self.a;
        let h = y.diff().atan2(&x.diff());
        let unwrapped = self.unwrapped_heading(u, h.value());
        let heading = h + (unwrapped - h.value());
        (
            [x + self.center.x, y + self.center.y, Jet::constant(self.center.z)],
            self.yaw.apply(heading, t),
        )
    }
}

/// Hover, smooth point-to-point move with simultaneous yaw change, hover.
#[derive(Debug, Clone)]
pub struct HoverToHover {
    pub start: Vec3,
    pub displacement: Vec3,
    pub yaw_start: f64,
    pub yaw_change: f64,
    pub move_time: f64,
    pub hold_before: f64,
    pub hold_after: f64,
}

impl Reference for HoverToHover {
    fn duration(&self) -> f64 {
        self.hold_before + self.move_time + self.hold_after
    }
    fn jets(&self, t: f64) -> ([Jet; 3], Jet) {
        let sp = smoothstep_jet(&S9, t, self.hold_before, self.move_time);
        let sy = smoothstep_jet(&S5, t, self.hold_before, self.move_time);
        (
            [0, 1, 2].map(|i| sp * self.displacement[i] + self.start[i]),
            sy * self.yaw_change + self.yaw_start,
        )
    }
}

/// Piecewise-polynomial path coordinate `s(t)` built from acceleration
/// segments.
#[derive(Debug, Clone)]
pub struct SpeedProfile {
    /// `(t_start, duration, s-polynomial in local time)`
    segments: Vec<(f64, f64, Vec<f64>)>,
    end: (f64, f64, f64),
}

impl SpeedProfile {
    /// `segments`: `(duration, acceleration polynomial in u = τ/duration)`.
    pub fn new(v0: f64, segments: &[(f64, Vec<f64>)]) -> Self {
        let mut out = Vec::new();
        let (mut t, mut s, mut v) = (0.0, 0.0, v0);
        for (dur, acc) in segments {
            let mut poly = vec![s, v];
            for (k, c) in acc.iter().enumerate() {
                let ck = c / dur.powi(k as i32);
                poly.push(ck / ((k + 1) * (k + 2)) as f64);
            }
            let dpoly = poly_derivative(&poly);
            let eval = |p: &[f64], x: f64| p.iter().rev().fold(0.0, |a, c| a * x + c);
            let s_end = eval(&poly, *dur);
            let v_end = eval(&dpoly, *dur);
            out.push((t, *dur, poly));
            t += dur;
            s = s_end;
            v = v_end;
        }
        Self {
            segments: out,
            end: (t, s, v),
        }
    }

    pub fn duration(&self) -> f64 {
        self.end.0
    }

    pub fn final_speed(&self) -> f64 {
        self.end.2
    }

    pub fn final_distance(&self) -> f64 {
        self.end.1
    }

    pub fn jet(&self, t: f64) -> Jet {
        for (t0, dur, poly) in &self.segments {
            if t < t0 + dur {
                return (Jet::variable(t) + (-t0)).poly(poly);
            }
        }
        let (t_end, s, v) = self.end;
        (Jet::variable(t) + (-t_end)).poly(&[s, v])
    }
}

fn scaled(p: &[f64], k: f64) -> Vec<f64> {
    p.iter().map(|c| c * k).collect()
}

fn one_minus(p: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = p.iter().map(|c| -c).collect();
    q[0] += 1.0;
    q
}

/// Acceleration segments for a speed change `dv` over `time` with C³ blends of
/// width `blend` into and out of a constant-acceleration plateau.
pub fn plateau_segments(dv: f64, time: f64, blend: f64) -> Vec<(f64, Vec<f64>)> {
    let a = dv / (time - blend);
    let mut segs = vec![(blend, scaled(&S7, a))];
    if time > 2.0 * blend {
        segs.push((time - 2.0 * blend, vec![a]));
    }
    segs.push((blend, scaled(&one_minus(&S7), a)));
    segs
}

/// Circle entered from (or left to) static hover with a C³ tangential
/// acceleration profile. Yaw is coordinated.
#[derive(Debug, Clone)]
pub struct TransitionCircle {
    pub radius: f64,
    pub center: Vec3,
    pub profile: SpeedProfile,
    pub duration: f64,
}

impl TransitionCircle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: TransitionMode,
        radius: f64,
        speed: f64,
        transition_time: f64,
        blend_time: f64,
        hover_time: f64,
        cruise_time: f64,
        center: Vec3,
    ) -> Self {
        let (v0, dv) = match mode {
            TransitionMode::FromHover => (0.0, speed),
            TransitionMode::ToHover => (speed, -speed),
        };
        let mut segs = Vec::new();
        let first_hold = if mode == TransitionMode::FromHover {
            hover_time
        } else {
            cruise_time
        };
        let last_hold = if mode == TransitionMode::FromHover {
            cruise_time
        } else {
            hover_time
        };
        if first_hold > 0.0 {
            segs.push((first_hold, vec![0.0]));
        }
        segs.extend(plateau_segments(dv, transition_time, blend_time));
        if last_hold > 0.0 {
            segs.push((last_hold, vec![0.0]));
        }
        let profile = SpeedProfile::new(v0, &segs);
        Self {
            radius,
            center,
            duration: profile.duration(),
            profile,
        }
    }

    /// Plateau tangential acceleration, m/s².
    pub fn plateau_acceleration(speed: f64, transition_time: f64, blend_time: f64) -> f64 {
        speed / (transition_time - blend_time)
    }
}

impl Reference for TransitionCircle {
    fn duration(&self) -> f64 {
        self.duration
    }
    fn jets(&self, t: f64) -> ([Jet; 3], Jet) {
        let angle = self.profile.jet(t) * (1.0 / self.radius) + (-FRAC_PI_2);
        circle_jets(&self.center, self.radius, angle, 1.0)
    }
}

/// Straight line at constant speed whose velocity reverses along the same
/// line while yaw flips by π.
#[derive(Debug, Clone)]
pub struct DiffThrustTurn {
    pub start: Vec3,
    pub heading: f64,
    pub profile: SpeedProfile,
    pub flip_center: f64,
    pub flip_time: f64,
    pub duration: f64,
}

impl DiffThrustTurn {
    pub fn new(
        speed: f64,
        reversal_time: f64,
        yaw_flip_time: f64,
        cruise_time: f64,
        start: Vec3,
        heading: f64,
    ) -> Self {
        // v(u) = V(1 − 2 S7(u)) over the reversal
        let acc = scaled(&poly_derivative(&S7), -2.0 * speed);
        let segs = vec![
            (cruise_time, vec![0.0]),
            (reversal_time, acc.iter().map(|c| c / reversal_time).collect()),
            (cruise_time, vec![0.0]),
        ];
        let profile = SpeedProfile::new(speed, &segs);
        Self {
            start,
            heading,
            flip_center: cruise_time + reversal_time / 2.0,
            flip_time: yaw_flip_time,
            duration: profile.duration(),
            profile,
        }
    }
}

impl Reference for DiffThrustTurn {
    fn duration(&self) -> f64 {
        self.duration
    }
    fn jets(&self, t: f64) -> ([Jet; 3], Jet) {
        let s = self.profile.jet(t);
        let (sh, ch) = self.heading.sin_cos();
        let flip = smoothstep_jet(&S5, t, self.flip_center - self.flip_time / 2.0, self.flip_time);
        (
            [
                s * ch + self.start.x,
                s * sh + self.start.y,
                Jet::constant(self.start.z),
            ],
            flip * PI + self.heading,
        )
    }
}

/// Result of running the full flatness chain along a reference.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub samples: usize,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_rotor_speed: f64,
    pub max_flap: f64,
    pub max_thrust: f64,
    pub max_moment: f64,
    pub max_rate: f64,
    pub rotor_limit_violations: usize,
    pub flap_limit_violations: usize,
    pub negative_thrust_samples: usize,
    pub singular_samples: usize,
    pub degenerate_samples: usize,
    /// Times at which thrust, attitude or moment jump.
    pub discontinuities: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct ChainSample {
    attitude: UnitQuat,
    thrust: f64,
    moment: Vec3,
}

fn chain_at(
    r: &dyn Reference,
    t: f64,
    delta: f64,
    hint: &UnitQuat,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> ChainSample {
    let flat = r.sample(t).expect("time within range");
    let st = flat_state(&flat, delta, hint, params, coeffs);
    ChainSample {
        attitude: st.solution.attitude,
        thrust: st.solution.thrust,
        moment: st.moment,
    }
}

fn jump(a: &ChainSample, b: &ChainSample, weight: f64) -> f64 {
    (a.thrust - b.thrust).abs() / weight
        + (a.moment - b.moment).norm() / (0.01 * weight)
        + a.attitude.angle_to(&b.attitude)
}

/// Samples `r` every `dt`, runs attitude, rate, moment and input transforms,
/// and reports actuator-limit violations and continuity defects.
pub fn feasibility_check(r: &dyn Reference, params: &VehicleParams, coeffs: &AeroCoeffs, dt: f64) -> FeasibilityReport {
    let n = (r.duration() / dt).floor() as usize + 1;
    let mut rep = FeasibilityReport {
        samples: n,
        ..Default::default()
    };
    let omega_max = params.omega_max();
    let hover_delta = 2.0 * coeffs.c_mu_t / (params.l_dx * coeffs.c_dlt * params.alpha_bar().cos());
    let mut delta = if hover_delta.is_finite() { hover_delta } else { 0.0 };
    let first = r.sample(0.0).expect("t = 0 in range");
    let mut hint = EulerZxy::new(first.yaw, 0.0, FRAC_PI_2).to_quat();
    // references may start in cruise; settle the flap/attitude fixed point
    // there so the first sample is not an artifact of the hover guess
    for _ in 0..50 {
        let st = flat_state(&first, delta, &hint, params, coeffs);
        hint = st.solution.attitude;
        let va = velocity_zero_lift(&hint, &first.velocity, params);
        let Ok(inp) = inputs_from_moment_thrust(
            &st.moment,
            st.solution.thrust,
            &va,
            first.velocity.norm(),
            params,
            coeffs,
        ) else {
            break;
        };
        let d = inp.delta[0] + inp.delta[1];
        if (d - delta).abs() < 1e-12 {
            break;
        }
        delta = d;
    }
    let mut chain = Vec::with_capacity(n);
    let mut hints = Vec::with_capacity(n);
    let mut deltas = Vec::with_capacity(n);
    let weight = params.weight();

    for k in 0..n {
        let t = (k as f64 * dt).min(r.duration());
        let flat = r.sample(t).expect("time within range");
        rep.max_speed = rep.max_speed.max(flat.velocity.norm());
        rep.max_accel = rep.max_accel.max(flat.acceleration.norm());
        hints.push(hint);
        let mut st = flat_state(&flat, delta, &hint, params, coeffs);
        let mut inputs = None;
        // flap deflection enters the attitude transform; iterate to consistency
        for _ in 0..4 {
            let va = velocity_zero_lift(&st.solution.attitude, &flat.velocity, params);
            match inputs_from_moment_thrust(
                &st.moment,
                st.solution.thrust,
                &va,
                flat.velocity.norm(),
                params,
                coeffs,
            ) {
                Ok(inp) => {
                    let d = inp.delta[0] + inp.delta[1];
                    inputs = Some(inp);
                    if (d - delta).abs() < 1e-10 {
                        break;
                    }
                    delta = d;
                    st = flat_state(&flat, delta, &hint, params, coeffs);
                }
                Err(_) => {
                    inputs = None;
                    break;
                }
            }
        }
        deltas.push(delta);
        if st.solution.degenerate {
            rep.degenerate_samples += 1;
        }
        rep.max_thrust = rep.max_thrust.max(st.solution.thrust);
        rep.max_moment = rep.max_moment.max(st.moment.norm());
        rep.max_rate = rep.max_rate.max(st.omega.norm());
        match inputs {
            Some(inp) => {
                let w = inp.omega[0].max(inp.omega[1]);
                rep.max_rotor_speed = rep.max_rotor_speed.max(w);
                if w > omega_max {
                    rep.rotor_limit_violations += 1;
                }
                if inp.flap_saturated {
                    rep.flap_limit_violations += 1;
                }
                if inp.thrust_saturated {
                    rep.negative_thrust_samples += 1;
                }
                rep.max_flap = rep.max_flap.max(inp.delta[0].abs()).max(inp.delta[1].abs());
            }
            None => rep.singular_samples += 1,
        }
        chain.push(ChainSample {
            attitude: st.solution.attitude,
            thrust: st.solution.thrust,
            moment: st.moment,
        });
        hint = st.solution.attitude;
    }

    // continuity: an isolated spike in the sample-to-sample jump that does not
    // shrink under bisection marks a discontinuity
    let jumps: Vec<f64> = chain.windows(2).map(|w| jump(&w[0], &w[1], weight)).collect();
    for k in 0..jumps.len() {
        let left = if k > 0 { jumps[k - 1] } else { 0.0 };
        let right = jumps.get(k + 1).copied().unwrap_or(0.0);
        if jumps[k] < 1e-6 || jumps[k] < 4.0 * left.max(right) {
            continue;
        }
        let (mut a, mut b) = (k as f64 * dt, ((k + 1) as f64 * dt).min(r.duration()));
        let (h, d) = (hints[k], deltas[k]);
        let mut ja = chain[k];
        let mut jb = chain[k + 1];
        let j0 = jump(&ja, &jb, weight);
        for _ in 0..12 {
            let m = 0.5 * (a + b);
            let cm = chain_at(r, m, d, &h, params, coeffs);
            if jump(&ja, &cm, weight) >= jump(&cm, &jb, weight) {
                b = m;
                jb = cm;
            } else {
                a = m;
                ja = cm;
            }
        }
        if jump(&ja, &jb, weight) > 0.25 * j0 {
            rep.discontinuities.push(0.5 * (a + b));
        }
    }

    rep.feasible = rep.rotor_limit_violations == 0
        && rep.flap_limit_violations == 0
        && rep.negative_thrust_samples == 0
        && rep.singular_samples == 0
        && rep.discontinuities.is_empty();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(r: &dyn Reference, t: f64) {
        let h = 1e-5;
        let a = r.sample(t - h).unwrap();
        let b = r.sample(t + h).unwrap();
        let m = r.sample(t).unwrap();
        let pairs = [
            (a.position, b.position, m.velocity),
            (a.velocity, b.velocity, m.acceleration),
            (a.acceleration, b.acceleration, m.jerk),
            (a.jerk, b.jerk, m.snap),
        ];
        for (i, (lo, hi, d)) in pairs.iter().enumerate() {
            let fd = (hi - lo) / (2.0 * h);
            assert!(
                (fd - d).norm() <= 1e-6 * (1.0 + d.norm()) + 1e-4 * (i as f64),
                "order {} at t={t}: fd {fd:?} vs {d:?}",
                i + 1
            );
        }
        let fd_yaw = (b.yaw - a.yaw) / (2.0 * h);
        assert!((fd_yaw - m.yaw_rate).abs() < 1e-6 * (1.0 + m.yaw_rate.abs()));
    }

    #[test]
    fn hover_is_static() {
        let r = TrajectoryDef::hover(5.0).build().unwrap();
        for t in [0.0, 1.3, 5.0] {
            let f = r.sample(t).unwrap();
            assert_eq!(f.velocity, Vec3::zeros());
            assert_eq!(f.snap, Vec3::zeros());
            assert_eq!(f.yaw_rate, 0.0);
        }
        assert!(r.sample(5.1).is_err());
        assert!(r.sample(-0.1).is_err());
    }

    #[test]
    fn lemniscate_speed_is_constant() {
        let r = TrajectoryDef::lemniscate(1.0).build().unwrap();
        for k in 0..=700 {
            let f = r.sample(k as f64 * 0.01).unwrap();
            assert!((f.velocity.norm() - 6.0).abs() < 1e-6, "t={}", k as f64 * 0.01);
        }
    }

    #[test]
    fn lemniscate_fits_flight_space() {
        let r = Lemniscate::new(6.0, 7.0, 1.0, Vec3::zeros(), YawPolicy::Coordinated);
        assert!((r.perimeter() - 42.0).abs() < 1e-9);
        assert!(2.0 * r.a < 18.0);
        // widest point at a/(2√2) on each side
        assert!(r.a / 2.0_f64.sqrt() < 8.0);
    }

    #[test]
    fn coordinated_yaw_follows_heading() {
        let r = TrajectoryDef::lemniscate(1.0).build().unwrap();
        let mut prev: Option<f64> = None;
        for k in 0..=1400 {
            let f = r.sample(k as f64 * 0.005).unwrap();
            let raw = f.velocity.y.atan2(f.velocity.x);
            let d = crate::frames::wrap_pi(f.yaw - raw);
            assert!(d.abs() < 1e-9);
            if let Some(p) = prev {
                assert!((f.yaw - p).abs() < 0.1, "yaw jump at {}", k as f64 * 0.005);
            }
            prev = Some(f.yaw);
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let defs = [
            TrajectoryDef::lemniscate(1.0),
            TrajectoryDef::circle(7.8, 1.0, YawPolicy::KnifeEdge { side: 1.0 }),
            TrajectoryDef::hover_to_hover(6.0, FRAC_PI_2, 3.0),
            TrajectoryDef::transition(TransitionMode::FromHover),
            TrajectoryDef::transition(TransitionMode::ToHover),
            TrajectoryDef::diff_thrust_turn(),
        ];
        for d in defs {
            let r = d.build().unwrap();
            let n = 37;
            for k in 1..n {
                let t = r.duration() * k as f64 / n as f64;
                fd_check(r.as_ref(), t);
            }
        }
    }

    #[test]
    fn circle_centripetal_load() {
        let r = TrajectoryDef::circle(8.1, 1.0, YawPolicy::Coordinated).build().unwrap();
        let f = r.sample(0.3).unwrap();
        let a = f.acceleration.norm();
        assert!((a - 8.1 * 8.1 / 3.5).abs() < 1e-9);
        assert!((a - 18.75).abs() < 0.01);
        let load = (f.acceleration - crate::GRAVITY * Vec3::z()).norm() / crate::GRAVITY;
        let oracle = (a * a + crate::GRAVITY * crate::GRAVITY).sqrt() / crate::GRAVITY;
        assert!((load - oracle).abs() < 1e-9);
        assert!((load - 2.1).abs() < 0.1);
    }

    #[test]
    fn hover_to_hover_peaks() {
        for (dur, v, a) in [(5.0, 3.0, 2.3), (3.0, 4.9, 6.2)] {
            let r = TrajectoryDef::hover_to_hover(6.0, FRAC_PI_2, dur).build().unwrap();
            let (mut vm, mut am) = (0.0_f64, 0.0_f64);
            for k in 0..=4000 {
                let f = r.sample(r.duration() * k as f64 / 4000.0).unwrap();
                vm = vm.max(f.velocity.norm());
                am = am.max(f.acceleration.norm());
            }
            assert!((vm - v).abs() < 0.1, "v {vm}");
            assert!((am - a).abs() < 0.1, "a {am}");
            let end = r.sample(r.duration()).unwrap();
            assert!((end.position - (default_center() + Vec3::new(6.0, 0.0, 0.0))).norm() < 1e-12);
            assert!((end.yaw - FRAC_PI_2).abs() < 1e-12);
        }
        let still = TrajectoryDef::hover_to_hover(0.0, 0.0, 3.0).build().unwrap();
        for k in 0..50 {
            let f = still.sample(k as f64 * 0.1).unwrap();
            assert_eq!(f.velocity, Vec3::zeros());
            assert_eq!(f.yaw, 0.0);
        }
    }

    #[test]
    fn transition_reaches_speed() {
        let r = TransitionCircle::new(TransitionMode::FromHover, 3.5, 8.0, 3.0, 0.5, 1.0, 2.0, Vec3::zeros());
        let end = r.sample(r.duration()).unwrap();
        assert!((end.velocity.norm() - 8.0).abs() < 1e-9);
        let start = r.sample(0.5).unwrap();
        assert_eq!(start.velocity.norm(), 0.0);
        assert!((TransitionCircle::plateau_acceleration(8.0, 3.0, 0.5) - 3.2).abs() < 1e-12);
    }

    #[test]
    fn diff_thrust_turn_profile() {
        let r = TrajectoryDef::diff_thrust_turn().build().unwrap();
        let (mut yr, mut load) = (0.0_f64, 0.0_f64);
        for k in 0..=4600 {
            let f = r.sample(k as f64 * 1e-3).unwrap();
            yr = yr.max(f.yaw_rate.abs());
            load = load.max((f.acceleration - crate::GRAVITY * Vec3::z()).norm() / crate::GRAVITY);
        }
        assert!(yr.to_degrees() > 600.0);
        assert!((load - 2.2).abs() < 0.1, "{load}");
        let end = r.sample(r.duration()).unwrap();
        assert!((end.velocity.x + 7.0).abs() < 1e-9);
        assert!((end.yaw - PI).abs() < 1e-12);
    }

    #[test]
    fn scheduled_yaw_steps_are_smooth() {
        let p = YawPolicy::Scheduled {
            steps: vec![YawStep {
                time: 1.0,
                width: 0.4,
                amount: FRAC_PI_2,
            }],
        };
        let before = p.apply(Jet::constant(0.0), 0.5).value();
        let after = p.apply(Jet::constant(0.0), 1.5).value();
        assert_eq!(before, 0.0);
        assert!((after - FRAC_PI_2).abs() < 1e-12);
        let mid = p.apply(Jet::constant(0.0), 1.0);
        assert!((mid.value() - FRAC_PI_2 / 2.0).abs() < 1e-12);
    }
}
