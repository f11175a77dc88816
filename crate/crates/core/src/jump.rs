//! Rankine-Hugoniot jump across a circular shock `t = t_s`.
//!
//! Mass flux, momentum flux, Bernoulli function and field strength are
//! continuous across the shock. Given the supersonic state in front of it,
//! the state behind is
//! `(rho u^2 / K, K / u, rho u^2 + p - rho K, E)` with `K = 2(gamma-1)/(gamma+1) B`.

use crate::error::{Error, Result};
use crate::gas::{bernoulli, k_of_state, mach_squared, FlowState, GasLaw, Geometry};
use crate::scalar::{rel_diff, Real};

/// Minimum `M^2 - 1` in front of a shock.
pub const SUPERSONIC_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord<T> {
    pub t_s: T,
    /// Physical radius of the shock circle.
    pub radius: T,
    pub gamma: T,
    pub upstream: FlowState<T>,
    pub downstream: FlowState<T>,
    pub kappa_minus: T,
    pub kappa_s: T,
    pub k_minus: T,
    pub mach2_minus: T,
    pub mach2_plus: T,
}

impl<T: Real> JumpRecord<T> {
    /// Record for an arbitrary pair of states; no physical checks.
    pub fn from_states(t_s: T, radius: T, gamma: T, upstream: FlowState<T>, downstream: FlowState<T>) -> Self {
        let kappa_minus = upstream.entropy(gamma);
        let kappa_s = downstream.entropy(gamma);
        let up_gas = GasLaw { gamma, kappa: kappa_minus };
        let down_gas = GasLaw { gamma, kappa: kappa_s };
        Self {
            t_s,
            radius,
            gamma,
            upstream,
            downstream,
            kappa_minus,
            kappa_s,
            k_minus: k_of_state(&upstream, &up_gas),
            mach2_minus: mach_squared(&upstream, &up_gas),
            mach2_plus: mach_squared(&downstream, &down_gas),
        }
    }

    pub fn upstream_gas(&self) -> GasLaw<T> {
        GasLaw { gamma: self.gamma, kappa: self.kappa_minus }
    }

    pub fn downstream_gas(&self) -> GasLaw<T> {
        GasLaw { gamma: self.gamma, kappa: self.kappa_s }
    }
}

/// Downstream state from the jump algebra, without any admissibility check.
pub fn rankine_hugoniot<T: Real>(up: &FlowState<T>, g: &GasLaw<T>) -> FlowState<T> {
    let k = k_of_state(up, g);
    let mom = up.rho * up.u * up.u;
    FlowState { rho: mom / k, u: k / up.u, p: mom + up.p - up.rho * k, e: up.e }
}

/// Applies the jump at `t_s` to a supersonic upstream state.
pub fn apply_jump<T: Real>(
    upstream: &FlowState<T>,
    t_s: T,
    g: &GasLaw<T>,
    geom: &Geometry<T>,
) -> Result<JumpRecord<T>> {
    upstream.validate()?;
    if !geom.contains(t_s) {
        return Err(Error::OutOfSpan {
            t: t_s.to_f64_lossy(),
            from: 0.0,
            to: geom.span().to_f64_lossy(),
        });
    }
    let mach2 = mach_squared(upstream, g);
    if !(mach2 >= T::one() + T::lit(SUPERSONIC_MARGIN)) {
        return Err(Error::NotSupersonic { t_s: t_s.to_f64_lossy(), mach2: mach2.to_f64_lossy() });
    }
    let downstream = rankine_hugoniot(upstream, g);
    Ok(JumpRecord::from_states(t_s, geom.radius(t_s), g.gamma, *upstream, downstream))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport<T> {
    /// `0 < u_s < u_-`.
    pub speeds_ordered: bool,
    /// `kappa_s > kappa_-`.
    pub entropy_increases: bool,
    /// `M_-^2 > 1 > M_s^2`.
    pub transonic: bool,
    /// Relative mismatch in `M_s^2 - 1 = -(p_-/p_s)(M_-^2 - 1)`.
    pub mach_identity_residual: T,
    pub mass_residual: T,
    pub momentum_residual: T,
    pub bernoulli_residual: T,
    pub field_continuous: bool,
}

impl<T: Real> AdmissibilityReport<T> {
    pub fn is_admissible(&self) -> bool {
        self.speeds_ordered && self.entropy_increases
    }

    pub fn max_residual(&self) -> T {
        self.mach_identity_residual
            .max(self.mass_residual)
            .max(self.momentum_residual)
            .max(self.bernoulli_residual)
    }
}

pub fn check_admissibility<T: Real>(j: &JumpRecord<T>) -> AdmissibilityReport<T> {
    let (up, down) = (&j.upstream, &j.downstream);
    let lhs = j.mach2_plus - T::one();
    let rhs = -(up.p / down.p) * (j.mach2_minus - T::one());
    let scale = lhs.abs().max(rhs.abs());
    let mach_identity_residual = if scale == T::zero() { T::zero() } else { (lhs - rhs).abs() / scale };
    AdmissibilityReport {
        speeds_ordered: down.u > T::zero() && down.u < up.u,
        entropy_increases: j.kappa_s > j.kappa_minus,
        transonic: j.mach2_minus > T::one() && j.mach2_plus < T::one(),
        mach_identity_residual,
        mass_residual: rel_diff(j.radius * down.rho * down.u, j.radius * up.rho * up.u),
        momentum_residual: rel_diff(down.rho * down.u * down.u + down.p, up.rho * up.u * up.u + up.p),
        bernoulli_residual: rel_diff(bernoulli(down, &j.downstream_gas()), bernoulli(up, &j.upstream_gas())),
        field_continuous: down.e == up.e,
    }
}

/// Entropy amplification across a shock with upstream Mach number squared
/// `x`, `kappa_s = f(x) kappa_-`, together with `f'(x)`.
pub fn entropy_map_f<T: Real>(x: T, gamma: T) -> Result<(T, T)> {
    if !(x > T::zero()) {
        return Err(Error::Domain { what: "entropy_map_f", value: x.to_f64_lossy() });
    }
    let one = T::one();
    let two = T::lit(2.0);
    let gp1 = gamma + one;
    let gm1 = gamma - one;
    let base = gm1 / gp1 + two / (gp1 * x);
    let value = (two * gamma * x - gm1) / gp1 * base.powf(gamma);
    let s = one / x - one;
    let derivative = two * gamma * gm1 / (gp1 * gp1) * base.powf(gm1) * s * s;
    Ok((value, derivative))
}

/// Classical normal-shock Mach relation, for cross-checks.
pub fn normal_shock_mach2<T: Real>(mach2: T, gamma: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    (two + (gamma - one) * mach2) / (two * gamma * mach2 - (gamma - one))
}
