//! Angular velocity and acceleration from the flatness chain against central
//! differences of the attitude and rate along reference trajectories.

use tailsitter::config::defaults;
use tailsitter::flatness::flat_state;
use tailsitter::frames::{EulerZxy, UnitQuat};
use tailsitter::trajectory::{TrajectoryDef, YawPolicy};
use tailsitter::Vec3;

const H: f64 = 1e-4;

struct Worst {
    omega: f64,
    omega_dot: f64,
}

fn check(def: &TrajectoryDef) -> Worst {
    let (p, c) = (defaults::vehicle_params(), defaults::experimental_coeffs());
    let r = def.build().unwrap();
    let delta = 0.0;
    let t_end = r.duration();
    let mut hint = EulerZxy::new(0.0, 0.0, std::f64::consts::FRAC_PI_2).to_quat();
    let mut worst = Worst {
        omega: 0.0,
        omega_dot: 0.0,
    };

    let state = |t: f64, hint: &UnitQuat| flat_state(&r.sample(t).unwrap(), delta, hint, &p, &c);
    let n = 200;
    for k in 1..n {
        let t = t_end * k as f64 / n as f64;
        let mid = state(t, &hint);
        hint = mid.solution.attitude;
        let (a, b) = (state(t - H, &hint), state(t + H, &hint));

        // Ω = 2 vec(ξ⁻¹ ξ̇) in the body frame
        let dq = a.solution.attitude.inverse().hamilton(&b.solution.attitude);
        let rotvec: Vec3 = dq.inner().scaled_axis();
        let omega_fd = rotvec / (2.0 * H);
        let omega_dot_fd = (b.omega - a.omega) / (2.0 * H);

        worst.omega = worst.omega.max((omega_fd - mid.omega).norm());
        worst.omega_dot = worst.omega_dot.max((omega_dot_fd - mid.omega_dot).norm());
    }
    eprintln!(
        "{}: |dOmega| {:.2e}, |dOmegadot| {:.2e}",
        def.name(),
        worst.omega,
        worst.omega_dot
    );
    worst
}

#[test]
fn hover_rates_match_finite_differences() {
    let w = check(&TrajectoryDef::hover(5.0));
    assert!(w.omega < 1e-3 && w.omega_dot < 1e-2, "{} {}", w.omega, w.omega_dot);
}

#[test]
fn hover_to_hover_rates_match_finite_differences() {
    let w = check(&TrajectoryDef::hover_to_hover(6.0, std::f64::consts::FRAC_PI_2, 4.0));
    assert!(w.omega < 1e-3 && w.omega_dot < 1e-2, "{} {}", w.omega, w.omega_dot);
}

#[test]
fn lemniscate_rates_match_finite_differences() {
    let w = check(&TrajectoryDef::lemniscate(1.0));
    assert!(w.omega < 1e-3 && w.omega_dot < 1e-2, "{} {}", w.omega, w.omega_dot);
}

#[test]
fn knife_edge_rates_match_finite_differences() {
    let w = check(&TrajectoryDef::circle(7.8, 1.0, YawPolicy::KnifeEdge { side: 1.0 }));
    assert!(w.omega < 1e-3 && w.omega_dot < 1e-2, "{} {}", w.omega, w.omega_dot);
}
