//! Second-order Butterworth filters and the backward-difference derivative.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// Direct-form-II-transposed biquad.
#[derive(Debug, Clone, PartialEq)]
pub struct Biquad {
    pub kind: FilterKind,
    pub cutoff: f64,
    pub sample_rate: f64,
    pub b: [f64; 3],
    /// `a1, a2` with `a0 = 1`.
    pub a: [f64; 2],
    s1: f64,
    s2: f64,
    primed: bool,
}

impl Biquad {
    /// Bilinear transform of the analog prototype, prewarped at the cutoff.
    pub fn design(kind: FilterKind, cutoff: f64, sample_rate: f64) -> Result<Self, FilterError> {
        let nyquist = sample_rate / 2.0;
        if !(cutoff > 0.0 && cutoff < nyquist) {
            return Err(FilterError::InvalidCutoff { cutoff, nyquist });
        }
        let k = (PI * cutoff / sample_rate).tan();
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        let b = match kind {
            FilterKind::Lowpass => {
                let b0 = k * k * norm;
                [b0, 2.0 * b0, b0]
            }
            FilterKind::Highpass => [norm, -2.0 * norm, norm],
        };
        let a = [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm];
        Ok(Self {
            kind,
            cutoff,
            sample_rate,
            b,
            a,
            s1: 0.0,
            s2: 0.0,
            primed: false,
        })
    }

    pub fn lowpass(cutoff: f64, sample_rate: f64) -> Result<Self, FilterError> {
        Self::design(FilterKind::Lowpass, cutoff, sample_rate)
    }

    pub fn highpass(cutoff: f64, sample_rate: f64) -> Result<Self, FilterError> {
        Self::design(FilterKind::Highpass, cutoff, sample_rate)
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Sets the state to the steady state for a constant input `x`
    /// (output `x` for lowpass, 0 for highpass).
    pub fn warm_start(&mut self, x: f64) {
        let y = self.dc_gain() * x;
        self.s2 = self.b[2] * x - self.a[1] * y;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.primed = true;
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
        self.primed = false;
    }

    /// One update; the first call warm-starts on its input.
    pub fn step(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.warm_start(x);
        }
        self.step_raw(x)
    }

    /// One update without warm start (zero initial state unless set).
    pub fn step_raw(&mut self, x: f64) -> f64 {
        self.primed = true;
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    /// |H(e^{jωT})| at frequency `f` Hz.
    pub fn magnitude_at(&self, f: f64) -> f64 {
        let w = 2.0 * PI * f / self.sample_rate;
        let z1 = polar(-w);
        let z2 = polar(-2.0 * w);
        let num = cadd((self.b[0], 0.0), cadd(cscale(z1, self.b[1]), cscale(z2, self.b[2])));
        let den = cadd((1.0, 0.0), cadd(cscale(z1, self.a[0]), cscale(z2, self.a[1])));
        cabs(num) / cabs(den)
    }

    /// Analog Butterworth prototype magnitude at `f` Hz.
    pub fn analog_magnitude_at(&self, f: f64) -> f64 {
        let r = (f / self.cutoff).powi(4);
        match self.kind {
            FilterKind::Lowpass => 1.0 / (1.0 + r).sqrt(),
            FilterKind::Highpass => (r / (1.0 + r)).sqrt(),
        }
    }
}

fn polar(theta: f64) -> (f64, f64) {
    (theta.cos(), theta.sin())
}
fn cadd(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}
fn cscale(a: (f64, f64), s: f64) -> (f64, f64) {
    (a.0 * s, a.1 * s)
}
fn cabs(a: (f64, f64)) -> f64 {
    a.0.hypot(a.1)
}

/// Magnitude in decibels.
pub fn to_db(mag: f64) -> f64 {
    20.0 * mag.log10()
}

/// One biquad per vector component.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec3Filter([Biquad; 3]);

impl Vec3Filter {
    pub fn new(filter: Biquad) -> Self {
        Self([filter.clone(), filter.clone(), filter])
    }

    pub fn step(&mut self, x: &Vec3) -> Vec3 {
        Vec3::new(self.0[0].step(x.x), self.0[1].step(x.y), self.0[2].step(x.z))
    }

    pub fn warm_start(&mut self, x: &Vec3) {
        for i in 0..3 {
            self.0[i].warm_start(x[i]);
        }
    }
}

/// Causal first-order backward difference.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardDifference {
    dt: f64,
    prev: Option<Vec3>,
}

impl BackwardDifference {
    pub fn new(dt: f64) -> Self {
        Self { dt, prev: None }
    }

    /// Derivative estimate; zero on the first sample.
    pub fn step(&mut self, x: &Vec3) -> Vec3 {
        let d = match self.prev {
            Some(p) => (x - p) / self.dt,
            None => Vec3::zeros(),
        };
        self.prev = Some(*x);
        d
    }
}

/// `(x[k] − x[k−1]) / dt` over a history slice (oldest first).
pub fn filtered_derivative(history: &[Vec3], dt: f64) -> Option<Vec3> {
    match history {
        [.., a, b] => Some((b - a) / dt),
        _ => None,
    }
}
