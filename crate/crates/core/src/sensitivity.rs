//! Derivatives of the downstream solution with respect to the shock position.
//!
//! `X = d rho/d t_s` and `Y = d E/d t_s` satisfy a linear system along the
//! downstream trajectory. Integrating it gives `dp/dt_s` at the exit without
//! differencing forward solves.

use crate::error::{Error, Result};
use crate::gas::{g1_unguarded, rhs_h1, BranchConstants, FlowState, GasLaw, Geometry};
use crate::jump::{entropy_map_f, JumpRecord};
use crate::ode::{dense_eval, integrate, IvpProblem, ToleranceConfig, Trajectory};
use crate::radial::SolutionProfile;
use crate::scalar::{rel_diff, Real};

/// Agreement required between the quadrature and algebraic values of `dB/dt_s`.
pub const SELF_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityIc<T> {
    pub x0: T,
    pub y0: T,
    pub dkappa_dts: T,
    /// Upstream `d M^2/dt` at the shock.
    pub dmach2_dt: T,
}

/// Launch values of `X`, `Y` and `d kappa_s/d t_s` for a shock at `jump.t_s`
/// on the upstream branch `up`.
pub fn jump_sensitivity_ic<T: Real>(
    up: &SolutionProfile<T>,
    jump: &JumpRecord<T>,
    geom: &Geometry<T>,
    sonic_guard: T,
) -> Result<SensitivityIc<T>> {
    let bc = up.constants();
    let dmach2_dt = rhs_h1(jump.t_s, jump.mach2_minus, jump.upstream.e, &bc, geom, sonic_guard)?;
    ic_from_slope(jump, up.inv.kappa0, dmach2_dt)
}

/// Same as [`jump_sensitivity_ic`] with the upstream Mach slope supplied.
pub fn ic_from_slope<T: Real>(jump: &JumpRecord<T>, kappa0: T, dmach2_dt: T) -> Result<SensitivityIc<T>> {
    let one = T::one();
    let g = jump.gamma;
    let m2 = jump.mach2_minus;
    let us = jump.downstream.u;
    let x0 = -(T::lit(2.0) * g * g * kappa0 / ((g + one) * (g + one))) * jump.upstream.rho.powf(g) / (us * us)
        * ((m2 - one) / m2)
        * dmach2_dt;
    let (_, fprime) = entropy_map_f(m2, g)?;
    Ok(SensitivityIc {
        x0,
        y0: jump.upstream.rho - jump.downstream.rho,
        dkappa_dts: fprime * dmach2_dt * kappa0,
        dmach2_dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivitySample<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    /// `int_{t_s}^t Y`.
    pub y_integral: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProfile<T> {
    pub t_s: T,
    pub samples: Vec<SensitivitySample<T>>,
    pub x_initial: T,
    pub y_initial: T,
    pub dkappa_dts: T,
    pub trajectory: Trajectory<T>,
}

impl<T: Real> SensitivityProfile<T> {
    pub fn last(&self) -> &SensitivitySample<T> {
        &self.samples[self.samples.len() - 1]
    }

    pub fn x_max(&self) -> T {
        self.samples.iter().fold(T::neg_infinity(), |m, s| m.max(s.x))
    }

    pub fn y_max(&self) -> T {
        self.samples.iter().fold(T::neg_infinity(), |m, s| m.max(s.y))
    }

    /// Largest mismatch in `r Y(t) = r_s Y0 + int r X`, relative to `|r_s Y0|`,
    /// with the integral taken by quadrature of the interpolated `X`.
    pub fn integral_identity_residual(&self, geom: &Geometry<T>) -> T {
        let base = geom.radius(self.t_s) * self.y_initial;
        let nodes = self.trajectory.gauss_nodes();
        let mut acc = T::zero();
        let mut k = 0;
        let mut worst = T::zero();
        for s in &self.samples[1..] {
            while k < nodes.len() && nodes[k].0 < s.t {
                acc = acc + nodes[k].1 * geom.radius(nodes[k].0) * nodes[k].2[0];
                k += 1;
            }
            let lhs = geom.radius(s.t) * s.y;
            worst = worst.max((lhs - base - acc).abs() / base.abs());
        }
        worst
    }
}

/// Coefficients of `X' = a3 X + a2 dkappa + a1 Y` at a downstream point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalCoefficients<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
}

pub fn variational_coefficients<T: Real>(
    t: T,
    rho: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
    sonic_guard: T,
) -> Result<VariationalCoefficients<T>> {
    let one = T::one();
    let g = bc.gamma;
    let r = geom.radius(t);
    let u2 = bc.m0 * bc.m0 / (r * r * rho * rho);
    let m2 = u2 / bc.gas().sound_speed_sq(rho);
    let sub = one - m2;
    if !(sub >= sonic_guard) {
        return Err(Error::SonicDegeneracy { t: t.to_f64_lossy(), mach2: m2.to_f64_lossy() });
    }
    let drho = g1_unguarded(t, rho, e, bc, geom);
    Ok(VariationalCoefficients {
        a1: rho.powf(T::lit(2.0) - g) / (g * bc.kappa * sub),
        a2: -drho / (bc.kappa * sub),
        a3: drho / rho * ((T::lit(2.0) - g) - T::lit(3.0) * m2) / sub + T::lit(2.0) * m2 / (r * sub),
    })
}

/// Integrates `(X, r Y, int Y)` over the downstream span. The downstream
/// state is read from its dense interpolant.
pub fn integrate_sensitivity<T: Real>(
    down: &SolutionProfile<T>,
    ic: &SensitivityIc<T>,
    tol: &ToleranceConfig<T>,
    sonic_guard: T,
) -> Result<SensitivityProfile<T>> {
    if let Some(stop) = &down.stop {
        return Err(Error::DownstreamChoked { guard: stop.guard.clone(), t_fail: stop.t_stop.to_f64_lossy() });
    }
    let bc = down.constants();
    let geom = down.geom;
    let t_s = down.t_from();
    let t_end = down.t_to();
    let dkappa = ic.dkappa_dts;
    let y_start = vec![ic.x0, geom.radius(t_s) * ic.y0, T::zero()];
    let problem = IvpProblem::new(t_s, t_end, y_start, |t, z: &[T], dz: &mut [T]| {
        let base = dense_eval(&down.trajectory, t)?;
        let r = geom.radius(t);
        let c = variational_coefficients(t, base[0], base[1] / r, &bc, &geom, sonic_guard)?;
        let y = z[1] / r;
        dz[0] = c.a3 * z[0] + c.a2 * dkappa + c.a1 * y;
        dz[1] = r * z[0];
        dz[2] = y;
        Ok(())
    });
    let trajectory = integrate(&problem, tol)?;
    if !trajectory.is_completed() {
        let (t, h) = match trajectory.status {
            crate::ode::TrajectoryStatus::StepFailure { t, h } => (t, h),
            _ => (trajectory.t_last(), T::zero()),
        };
        return Err(Error::StepFailure { t: t.to_f64_lossy(), h: h.to_f64_lossy() });
    }
    let samples = trajectory
        .samples()
        .iter()
        .map(|(t, z)| SensitivitySample { t: *t, x: z[0], y: z[1] / geom.radius(*t), y_integral: z[2] })
        .collect();
    Ok(SensitivityProfile {
        t_s,
        samples,
        x_initial: ic.x0,
        y_initial: ic.y0,
        dkappa_dts: ic.dkappa_dts,
        trajectory,
    })
}

/// Exit Bernoulli value as a function of exit pressure and entropy,
/// `G(p, kappa) = (m0/r)^2 (kappa/p)^(2/gamma) / 2 + gamma/(gamma-1) p^(1-1/gamma) kappa^(1/gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliExitForm<T> {
    pub gamma: T,
    pub m0: T,
    pub r_exit: T,
}

impl<T: Real> BernoulliExitForm<T> {
    pub fn value(&self, p: T, kappa: T) -> T {
        let one = T::one();
        let g = self.gamma;
        let q = self.m0 / self.r_exit;
        T::lit(0.5) * q * q * (kappa / p).powf(T::lit(2.0) / g) + g / (g - one) * p.powf(one - one / g) * kappa.powf(one / g)
    }

    /// `dG/dp = (1 - M^2)/rho`.
    pub fn d_pressure(&self, p: T, kappa: T) -> T {
        let one = T::one();
        let g = self.gamma;
        let rho = (p / kappa).powf(one / g);
        let u = self.m0 / (self.r_exit * rho);
        let m2 = u * u * rho / (g * p);
        (one - m2) / rho
    }

    /// `dG/dkappa = (m0/r)^2 kappa^(2/gamma-1) p^(-2/gamma) / gamma + (p/kappa)^(1-1/gamma)/(gamma-1)`.
    pub fn d_entropy(&self, p: T, kappa: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let g = self.gamma;
        let q = self.m0 / self.r_exit;
        q * q * kappa.powf(two / g - one) * p.powf(-two / g) / g + (p / kappa).powf(one - one / g) / (g - one)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureSensitivity<T> {
    pub dp_dts: T,
    /// `int Y` over the downstream span.
    pub db_dts: T,
    /// `G_p dp + G_kappa dkappa` with `dp` from `X(T)` and `dkappa`.
    pub db_dts_algebraic: T,
    pub g_p: T,
    pub g_kappa: T,
    pub dkappa_dts: T,
    pub x_exit: T,
}

impl<T: Real> PressureSensitivity<T> {
    pub fn self_check_residual(&self) -> T {
        rel_diff(self.db_dts_algebraic, self.db_dts)
    }

    pub fn self_check_passes(&self) -> bool {
        self.self_check_residual() <= T::lit(SELF_CHECK_TOL)
    }
}

/// `dp/dt_s` at the exit, from `dB/dt_s = int Y` and the exit Bernoulli form.
pub fn pressure_sensitivity<T: Real>(
    down: &SolutionProfile<T>,
    sens: &SensitivityProfile<T>,
) -> Result<PressureSensitivity<T>> {
    let exit: FlowState<T> = down.last().state;
    let kappa = down.inv.kappa0;
    let form = BernoulliExitForm { gamma: down.gamma, m0: down.inv.m0, r_exit: down.geom.radius(down.t_to()) };
    let g_p = form.d_pressure(exit.p, kappa);
    if !(g_p > T::zero()) {
        return Err(Error::Degenerate(format!("exit state is not subsonic: dG/dp = {g_p}")));
    }
    let g_kappa = form.d_entropy(exit.p, kappa);
    let last = sens.last();
    let db_dts = last.y_integral;
    let dp_dts = (db_dts - g_kappa * sens.dkappa_dts) / g_p;
    let gas = GasLaw { gamma: down.gamma, kappa };
    let dp_alg = sens.dkappa_dts * exit.rho.powf(gas.gamma) + gas.gamma * kappa * exit.rho.powf(gas.gamma - T::one()) * last.x;
    Ok(PressureSensitivity {
        dp_dts,
        db_dts,
        db_dts_algebraic: g_p * dp_alg + g_kappa * sens.dkappa_dts,
        g_p,
        g_kappa,
        dkappa_dts: sens.dkappa_dts,
        x_exit: last.x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::{bernoulli, BackgroundCharge};
    use crate::jump::apply_jump;
    use crate::radial::{solve_downstream, solve_upstream, SolverSettings};
    use approx::assert_relative_eq;

    #[test]
    fn exit_form_matches_bernoulli() {
        let g = GasLaw::new(1.4, 0.8).unwrap();
        let s = FlowState { rho: 2.0, u: 0.6, p: g.pressure(2.0), e: 0.0 };
        let r = 0.5;
        let form = BernoulliExitForm { gamma: 1.4, m0: r * s.rho * s.u, r_exit: r };
        assert_relative_eq!(form.value(s.p, g.kappa), bernoulli(&s, &g), max_relative = 1e-13);
    }

    #[test]
    fn exit_form_partials_match_differences() {
        let form = BernoulliExitForm { gamma: 1.4, m0: 0.3, r_exit: 0.5 };
        let (p, k) = (2.5, 0.8);
        let h = 1e-6;
        let fd_p = (form.value(p + h, k) - form.value(p - h, k)) / (2.0 * h);
        let fd_k = (form.value(p, k + h) - form.value(p, k - h)) / (2.0 * h);
        assert_relative_eq!(form.d_pressure(p, k), fd_p, max_relative = 1e-7);
        assert_relative_eq!(form.d_entropy(p, k), fd_k, max_relative = 1e-7);
    }

    #[test]
    fn coefficients_match_partials_of_rhs() {
        let bc = BranchConstants::new(1.4, 0.8, 0.4);
        let geom = Geometry::new(1.0, 0.5).unwrap();
        let (t, rho, e) = (0.3, 2.0, 4.0);
        let c = variational_coefficients(t, rho, e, &bc, &geom, 1e-6).unwrap();
        let h = 1e-6;
        let d_rho = (g1_unguarded(t, rho + h, e, &bc, &geom) - g1_unguarded(t, rho - h, e, &bc, &geom)) / (2.0 * h);
        let d_e = (g1_unguarded(t, rho, e + h, &bc, &geom) - g1_unguarded(t, rho, e - h, &bc, &geom)) / (2.0 * h);
        let bk = |k: f64| BranchConstants::new(1.4, k, 0.4);
        let d_k = (g1_unguarded(t, rho, e, &bk(0.8 + h), &geom) - g1_unguarded(t, rho, e, &bk(0.8 - h), &geom)) / (2.0 * h);
        assert_relative_eq!(c.a3, d_rho, max_relative = 1e-7);
        assert_relative_eq!(c.a1, d_e, max_relative = 1e-7);
        assert_relative_eq!(c.a2, d_k, max_relative = 1e-7);
    }

    #[test]
    fn flat_upstream_gives_zero_launch() {
        let g = GasLaw::new(1.4, 1.0 / 1.4).unwrap();
        let geom = Geometry::new(1.0, 0.5).unwrap();
        let up = FlowState { rho: 1.0, u: 2.0, p: 1.0 / 1.4, e: 3.0 };
        let jump = apply_jump(&up, 0.0, &g, &geom).unwrap();
        let ic = ic_from_slope(&jump, g.kappa, 0.0).unwrap();
        assert_eq!(ic.x0, 0.0);
        assert_eq!(ic.dkappa_dts, 0.0);
        assert!(ic.y0 < 0.0);
    }

    #[test]
    fn sign_chain_and_self_check() {
        let entrance = FlowState { rho: 1.0, u: 2.0, p: 1.0 / 1.4, e: 4.0 };
        let g = GasLaw::new(1.4, 1.0 / 1.4).unwrap();
        let geom = Geometry::new(1.0, 0.5).unwrap();
        let b = BackgroundCharge::constant(1.0).unwrap();
        let s = SolverSettings::default();
        let t_s = 0.2;
        let up = solve_upstream(&entrance, &g, &geom, &b, t_s, &s).unwrap();
        let jump = apply_jump(&up.last().state, t_s, &up.gas(), &geom).unwrap();
        let down = solve_downstream(&jump.downstream, jump.kappa_s, t_s, &g, &geom, &b, geom.span(), &s).unwrap();
        let ic = jump_sensitivity_ic(&up, &jump, &geom, s.sonic_guard).unwrap();
        assert!(ic.dmach2_dt > 0.0 && ic.x0 < 0.0 && ic.y0 < 0.0 && ic.dkappa_dts > 0.0);
        let sens = integrate_sensitivity(&down, &ic, &s.tol, s.sonic_guard).unwrap();
        assert!(sens.x_max() < 0.0);
        assert!(sens.y_max() <= ic.y0);
        assert!(sens.integral_identity_residual(&geom) < 1e-8);
        let ps = pressure_sensitivity(&down, &sens).unwrap();
        assert!(ps.db_dts < 0.0 && ps.g_kappa > 0.0 && ps.g_p > 0.0 && ps.dp_dts < 0.0);
        assert!(ps.self_check_passes(), "{}", ps.self_check_residual());
    }
}
