//! Closed-form thermodynamics and ODE right-hand sides for radial
//! Euler-Poisson flow in the nozzle coordinate `t = r0 - r`.
//!
//! Everything here is a pure function on small value types. Velocities and
//! field strengths use the inflow-positive convention: `u > 0` means flow
//! towards the inner radius and `E > 0` means the field accelerates it.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default half-width of the excluded band `|M^2 - 1| < guard` around the
/// sonic point.
pub const DEFAULT_SONIC_GUARD: f64 = 1e-6;

/// Polytropic gas law `p = kappa * rho^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasLaw<T> {
    pub gamma: T,
    pub kappa: T,
}

impl<T: Real> GasLaw<T> {
    pub fn new(gamma: T, kappa: T) -> Result<Self> {
        if !(gamma > T::one()) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "adiabatic exponent must exceed 1, got {gamma}"
            )));
        }
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "entropy constant must be positive, got {kappa}"
            )));
        }
        Ok(Self { gamma, kappa })
    }

    /// Same exponent, different entropy constant (e.g. behind a shock).
    pub fn with_kappa(self, kappa: T) -> Self {
        Self { kappa, ..self }
    }

    pub fn pressure(&self, rho: T) -> T {
        self.kappa * rho.powf(self.gamma)
    }

    /// `c^2 = gamma * kappa * rho^(gamma - 1)`.
    pub fn sound_speed_sq(&self, rho: T) -> T {
        self.gamma * self.kappa * rho.powf(self.gamma - T::one())
    }
}

/// Annulus `r1 < r < r0`; the nozzle coordinate runs over `[0, r0 - r1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry<T> {
    pub r0: T,
    pub r1: T,
}

impl<T: Real> Geometry<T> {
    pub fn new(r0: T, r1: T) -> Result<Self> {
        if !(r1 > T::zero()) || !(r0 > r1) || !r0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "annulus radii must satisfy r0 > r1 > 0, got r0 = {r0}, r1 = {r1}"
            )));
        }
        Ok(Self { r0, r1 })
    }

    /// Nozzle span `T = r0 - r1`.
    pub fn span(&self) -> T {
        self.r0 - self.r1
    }

    /// Physical radius at nozzle coordinate `t`.
    #[inline]
    pub fn radius(&self, t: T) -> T {
        self.r0 - t
    }

    pub fn contains(&self, t: T) -> bool {
        t >= T::zero() && t <= self.span()
    }
}

/// Background ion density `b(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundCharge<T> {
    Constant(T),
    /// Knots `(t, b)` strictly increasing in `t`, linearly interpolated and
    /// held constant beyond either end.
    Table(Vec<(T, T)>),
}

impl<T: Real> BackgroundCharge<T> {
    pub fn constant(b: T) -> Result<Self> {
        if !(b > T::zero()) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "background charge must be positive, got {b}"
            )));
        }
        Ok(Self::Constant(b))
    }

    pub fn table(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("empty background charge table".into()));
        }
        for &(t, b) in &knots {
            if !t.is_finite() || !(b > T::zero()) || !b.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "background charge knot ({t}, {b}) must be finite with b > 0"
                )));
            }
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter(
                "background charge knots must be strictly increasing in t".into(),
            ));
        }
        Ok(Self::Table(knots))
    }

    pub fn eval(&self, t: T) -> T {
        match self {
            Self::Constant(b) => *b,
            Self::Table(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let idx = knots.partition_point(|k| k.0 <= t);
                let (ta, ba) = knots[idx - 1];
                let (tb, bb) = knots[idx];
                ba + (bb - ba) * (t - ta) / (tb - ta)
            }
        }
    }

    /// Supremum of `b`, used as the default bound `b0`.
    pub fn bound(&self) -> T {
        match self {
            Self::Constant(b) => *b,
            Self::Table(knots) => knots.iter().fold(T::zero(), |m, k| m.max(k.1)),
        }
    }

    /// A table with interior knots is only piecewise linear, not C^1.
    pub fn smoothness_warning(&self) -> Option<String> {
        match self {
            Self::Table(knots) if knots.len() > 2 => Some(format!(
                "background charge table has {} interior kinks; b is only piecewise linear",
                knots.len() - 2
            )),
            _ => None,
        }
    }
}

/// Pointwise flow state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState<T> {
    pub rho: T,
    /// Inflow speed, positive towards the inner boundary.
    pub u: T,
    pub p: T,
    /// Field strength, positive when it points with the flow.
    pub e: T,
}

impl<T: Real> FlowState<T> {
    pub fn new(rho: T, u: T, p: T, e: T) -> Result<Self> {
        let state = Self { rho, u, p, e };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > T::zero()
            && self.u > T::zero()
            && self.p > T::zero()
            && self.e.is_finite()
            && self.rho.is_finite()
            && self.u.is_finite()
            && self.p.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "flow state needs rho, u, p > 0 and finite E, got {self:?}"
            )))
        }
    }

    /// Entropy constant `p / rho^gamma` of this state.
    pub fn entropy(&self, gamma: T) -> T {
        self.p / self.rho.powf(gamma)
    }
}

/// Mass flux and entropy constants carried along a smooth branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedInvariants<T> {
    pub m0: T,
    pub kappa0: T,
}

impl<T: Real> ConservedInvariants<T> {
    /// `m0 = r0 * rho0 * u0`, `kappa0 = p0 / rho0^gamma`.
    pub fn from_entrance(entrance: &FlowState<T>, gamma: T, geom: &Geometry<T>) -> Self {
        Self {
            m0: geom.r0 * entrance.rho * entrance.u,
            kappa0: entrance.entropy(gamma),
        }
    }

    pub fn with_kappa(self, kappa0: T) -> Self {
        Self { kappa0, ..self }
    }
}

/// Constants that depend only on `(gamma, kappa, m0)` of a branch:
/// `1/mu0 = gamma kappa (m0^2/(gamma kappa))^((gamma-1)/(gamma+1))` and
/// `mu1 = (1/(gamma kappa mu0))^(1/(gamma-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchConstants<T> {
    pub gamma: T,
    pub kappa: T,
    pub m0: T,
    pub mu0: T,
    pub mu1: T,
}

impl<T: Real> BranchConstants<T> {
    pub fn new(gamma: T, kappa: T, m0: T) -> Self {
        let one = T::one();
        let gk = gamma * kappa;
        let inv_mu0 = gk * (m0 * m0 / gk).powf((gamma - one) / (gamma + one));
        let mu0 = one / inv_mu0;
        let mu1 = (one / (gk * mu0)).powf(one / (gamma - one));
        Self { gamma, kappa, m0, mu0, mu1 }
    }

    pub fn from_parts(gas: &GasLaw<T>, inv: &ConservedInvariants<T>) -> Self {
        Self::new(gas.gamma, inv.kappa0, inv.m0)
    }

    pub fn gas(&self) -> GasLaw<T> {
        GasLaw { gamma: self.gamma, kappa: self.kappa }
    }
}

/// `M^2 = u^2 rho / (gamma p)`.
pub fn mach_squared<T: Real>(s: &FlowState<T>, g: &GasLaw<T>) -> T {
    s.u * s.u * s.rho / (g.gamma * s.p)
}

/// Bernoulli function `u^2/2 + gamma p / ((gamma - 1) rho)`.
pub fn bernoulli<T: Real>(s: &FlowState<T>, g: &GasLaw<T>) -> T {
    let half = T::lit(0.5);
    half * s.u * s.u + g.gamma * s.p / ((g.gamma - T::one()) * s.rho)
}

/// `K = 2 (gamma - 1)/(gamma + 1) * B`.
pub fn k_of_state<T: Real>(s: &FlowState<T>, g: &GasLaw<T>) -> T {
    k_factor(g.gamma) * bernoulli(s, g)
}

#[inline]
pub(crate) fn k_factor<T: Real>(gamma: T) -> T {
    T::lit(2.0) * (gamma - T::one()) / (gamma + T::one())
}

fn check_mach2<T: Real>(what: &'static str, m2: T) -> Result<()> {
    if m2 > T::zero() && m2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value: m2.to_f64_lossy() })
    }
}

fn check_sonic<T: Real>(t: T, m2: T, guard: T) -> Result<()> {
    if (m2 - T::one()).abs() < guard || m2 == T::one() {
        Err(Error::SonicDegeneracy { t: t.to_f64_lossy(), mach2: m2.to_f64_lossy() })
    } else {
        Ok(())
    }
}

/// Density on a branch with constants `bc` at Mach number squared `m2`:
/// `rho = mu1 (1/(r^2 M^2))^(1/(gamma+1))`.
pub fn rho_from_mach<T: Real>(
    t: T,
    m2: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
) -> Result<T> {
    check_mach2("rho_from_mach", m2)?;
    let r = geom.radius(t);
    Ok(bc.mu1 * (T::one() / (r * r * m2)).powf(T::one() / (bc.gamma + T::one())))
}

/// Full state from `(t, M^2, E)` on a branch.
pub fn state_from_mach<T: Real>(
    t: T,
    m2: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
) -> Result<FlowState<T>> {
    let rho = rho_from_mach(t, m2, bc, geom)?;
    Ok(state_from_density(t, rho, e, bc, geom))
}

/// Full state from `(t, rho, E)` on a branch.
pub fn state_from_density<T: Real>(
    t: T,
    rho: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
) -> FlowState<T> {
    let u = bc.m0 / (geom.radius(t) * rho);
    let p = bc.kappa * rho.powf(bc.gamma);
    FlowState { rho, u, p, e }
}

/// Right-hand side of the Mach equation `(M^2)' = h1`.
pub fn rhs_h1<T: Real>(
    t: T,
    m2: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
    sonic_guard: T,
) -> Result<T> {
    check_mach2("rhs_h1", m2)?;
    check_sonic(t, m2, sonic_guard)?;
    Ok(h1_unguarded(t, m2, e, bc, geom))
}

pub(crate) fn h1_unguarded<T: Real>(
    t: T,
    m2: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
) -> T {
    let one = T::one();
    let g = bc.gamma;
    let r = geom.radius(t);
    let field = (g + one) * bc.mu0 * e * (r * r * m2).powf((g - one) / (g + one));
    let geometric = (T::lit(2.0) + (g - one) * m2) / r;
    m2 / (m2 - one) * (field - geometric)
}

/// Same quantity as [`rhs_h1`], written through `K`:
/// `(gamma+1) mu0 r^((gamma-3)/(gamma+1)) (M^2)^(2 gamma/(gamma+1)) / (M^2-1) * (r E - K)`.
pub fn rhs_h1_via_k<T: Real>(
    t: T,
    m2: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
    sonic_guard: T,
) -> Result<T> {
    check_mach2("rhs_h1_via_k", m2)?;
    check_sonic(t, m2, sonic_guard)?;
    let one = T::one();
    let g = bc.gamma;
    let r = geom.radius(t);
    let k = k_of_mach(t, m2, bc, geom);
    Ok((g + one)
        * bc.mu0
        * r.powf((g - T::lit(3.0)) / (g + one))
        * m2.powf(T::lit(2.0) * g / (g + one))
        / (m2 - one)
        * (r * e - k))
}

/// `K` evaluated from `(t, M^2)` through the branch constants.
pub fn k_of_mach<T: Real>(t: T, m2: T, bc: &BranchConstants<T>, geom: &Geometry<T>) -> T {
    let one = T::one();
    let g = bc.gamma;
    let r = geom.radius(t);
    let c2 = (one / bc.mu0) * (one / (r * r * m2)).powf((g - one) / (g + one));
    c2 * ((g - one) * m2 + T::lit(2.0)) / (g + one)
}

/// Right-hand side of the field equation in Mach form, `(r E)' = h2`.
pub fn rhs_h2<T: Real>(
    t: T,
    m2: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
) -> Result<T> {
    let rho = rho_from_mach(t, m2, bc, geom)?;
    Ok(geom.radius(t) * (rho - b.eval(t)))
}

/// Right-hand side of the density equation `rho' = g1`.
pub fn rhs_g1<T: Real>(
    t: T,
    rho: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
    sonic_guard: T,
) -> Result<T> {
    if !(rho > T::zero()) {
        return Err(Error::Domain { what: "rhs_g1", value: rho.to_f64_lossy() });
    }
    let r = geom.radius(t);
    let u2 = bc.m0 * bc.m0 / (r * r * rho * rho);
    let c2 = bc.gas().sound_speed_sq(rho);
    check_sonic(t, u2 / c2, sonic_guard)?;
    Ok(g1_unguarded(t, rho, e, bc, geom))
}

pub(crate) fn g1_unguarded<T: Real>(
    t: T,
    rho: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
) -> T {
    let r = geom.radius(t);
    let u2 = bc.m0 * bc.m0 / (r * r * rho * rho);
    let c2 = bc.gas().sound_speed_sq(rho);
    rho * (r * e - u2) / (r * (c2 - u2))
}

/// [`rhs_g1`] in the form `rho^(2-gamma) (r E - u^2) / (r gamma kappa (1 - M^2))`.
pub fn rhs_g1_mach_form<T: Real>(
    t: T,
    rho: T,
    e: T,
    bc: &BranchConstants<T>,
    geom: &Geometry<T>,
    sonic_guard: T,
) -> Result<T> {
    if !(rho > T::zero()) {
        return Err(Error::Domain { what: "rhs_g1_mach_form", value: rho.to_f64_lossy() });
    }
    let g = bc.gamma;
    let r = geom.radius(t);
    let u2 = bc.m0 * bc.m0 / (r * r * rho * rho);
    let m2 = u2 / bc.gas().sound_speed_sq(rho);
    check_sonic(t, m2, sonic_guard)?;
    Ok(rho.powf(T::lit(2.0) - g) * (r * e - u2) / (r * g * bc.kappa * (T::one() - m2)))
}

/// Right-hand side of the field equation in density form, `(r E)' = r (rho - b)`.
pub fn rhs_g2<T: Real>(t: T, rho: T, geom: &Geometry<T>, b: &BackgroundCharge<T>) -> T {
    geom.radius(t) * (rho - b.eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gas14() -> GasLaw<f64> {
        GasLaw::new(1.4, 1.0).unwrap()
    }

    #[test]
    fn mach_squared_examples() {
        let s = FlowState { rho: 1.0, u: 2.0, p: 1.0 / 1.4, e: 0.0 };
        assert_relative_eq!(mach_squared(&s, &gas14()), 4.0, max_relative = 1e-15);

        let g2 = GasLaw::new(2.0, 1.0).unwrap();
        let s = FlowState { rho: 2.0, u: 1.0, p: 1.0, e: 0.0 };
        assert_eq!(mach_squared(&s, &g2), 1.0);

        // sonic identity
        let (rho, p): (f64, f64) = (1.3, 0.7);
        let c = (1.4 * p / rho).sqrt();
        let s = FlowState { rho, u: c, p, e: 0.0 };
        assert_relative_eq!(mach_squared(&s, &gas14()), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn bernoulli_and_k() {
        let s = FlowState { rho: 1.0, u: 2.0, p: 1.0 / 1.4, e: 0.0 };
        assert_relative_eq!(bernoulli(&s, &gas14()), 4.5, max_relative = 1e-15);
        assert_relative_eq!(k_of_state(&s, &gas14()), 1.5, max_relative = 1e-15);

        let rest = FlowState { rho: 2.0, u: 0.0, p: 3.0, e: 0.0 };
        assert_relative_eq!(bernoulli(&rest, &gas14()), 1.4 * 3.0 / (0.4 * 2.0));

        // gamma = 3, B = 2: u = 0, 3p/(2 rho) = 2
        let g3 = GasLaw::new(3.0, 1.0).unwrap();
        let s = FlowState { rho: 3.0, u: 0.0, p: 4.0, e: 0.0 };
        assert_relative_eq!(bernoulli(&s, &g3), 2.0);
        assert_relative_eq!(k_of_state(&s, &g3), 2.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(GasLaw::new(1.0, 1.0).is_err());
        assert!(GasLaw::new(1.4, 0.0).is_err());
        assert!(Geometry::new(1.0, 1.0).is_err());
        assert!(Geometry::new(1.0, 0.0).is_err());
        assert!(BackgroundCharge::constant(0.0).is_err());
        assert!(BackgroundCharge::table(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(BackgroundCharge::table(vec![(0.0, 1.0), (0.5, -2.0)]).is_err());
        assert!(FlowState::new(1.0, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn table_interpolation() {
        let b = BackgroundCharge::table(vec![(0.0, 1.0), (0.5, 2.0), (1.0, 1.5)]).unwrap();
        assert_eq!(b.eval(-1.0), 1.0);
        assert_eq!(b.eval(0.25), 1.5);
        assert_eq!(b.eval(0.5), 2.0);
        assert_eq!(b.eval(0.75), 1.75);
        assert_eq!(b.eval(3.0), 1.5);
        assert_eq!(b.bound(), 2.0);
        assert!(b.smoothness_warning().is_some());
        assert!(BackgroundCharge::constant(1.0).unwrap().smoothness_warning().is_none());
    }

    #[test]
    fn rho_from_mach_round_trip_and_monotonicity() {
        let g = gas14();
        let geom = Geometry::new(1.0, 0.5).unwrap();
        let entrance = FlowState { rho: 1.0, u: 2.0, p: 1.0 / 1.4, e: 3.0 };
        let inv = ConservedInvariants::from_entrance(&entrance, g.gamma, &geom);
        let bc = BranchConstants::new(g.gamma, inv.kappa0, inv.m0);
        let rho = rho_from_mach(0.0, 4.0, &bc, &geom).unwrap();
        assert_relative_eq!(rho, 1.0, max_relative = 1e-12);

        for &(t, m2) in &[(0.1, 1.7), (0.3, 0.4), (0.45, 12.0)] {
            let s = state_from_mach(t, m2, 0.0, &bc, &geom).unwrap();
            assert_relative_eq!(mach_squared(&s, &bc.gas()), m2, max_relative = 1e-12);
            assert_relative_eq!(geom.radius(t) * s.rho * s.u, inv.m0, max_relative = 1e-12);
            assert_eq!(s.p, bc.kappa * s.rho.powf(1.4));
        }
        let a = rho_from_mach(0.1, 2.0, &bc, &geom).unwrap();
        let b = rho_from_mach(0.1, 20.0, &bc, &geom).unwrap();
        let c = rho_from_mach(0.1, 2000.0, &bc, &geom).unwrap();
        assert!(a > b && b > c && c > 0.0);
        // larger radius (smaller t) means smaller density
        assert!(rho_from_mach(0.0, 2.0, &bc, &geom).unwrap() < a);
        assert!(rho_from_mach(0.1, 0.0, &bc, &geom).is_err());
    }

    #[test]
    fn h1_examples() {
        let geom = Geometry::new(1.0, 0.5).unwrap();
        let bc = BranchConstants::new(1.4, 1.0, 1.0);
        let h = rhs_h1(0.0, 2.0, 0.0, &bc, &geom, 1e-6).unwrap();
        assert_relative_eq!(h, -5.6, max_relative = 1e-14);
        assert!(matches!(
            rhs_h1(0.0, 1.0 + 1e-8, 1.0, &bc, &geom, 1e-6),
            Err(Error::SonicDegeneracy { .. })
        ));
        assert!(rhs_h1(0.0, -1.0, 1.0, &bc, &geom, 1e-6).is_err());
    }

    #[test]
    fn h2_and_g2_examples() {
        let geom = Geometry::new(2.0, 0.5).unwrap();
        let b = BackgroundCharge::constant(1.0).unwrap();
        assert_relative_eq!(rhs_g2(0.5, 1.2, &geom, &b), 0.3, max_relative = 1e-14);
        // linearity in rho
        let d = rhs_g2(0.5, 1.2 + 0.7, &geom, &b) - rhs_g2(0.5, 1.2, &geom, &b);
        assert_relative_eq!(d, 1.5 * 0.7, max_relative = 1e-14);

        let bc = BranchConstants::new(1.4, 0.9, 1.3);
        let m2 = 1.8;
        let rho = rho_from_mach(0.5, m2, &bc, &geom).unwrap();
        let h2 = rhs_h2(0.5, m2, &bc, &geom, &b).unwrap();
        assert_eq!(h2, 1.5 * (rho - 1.0));
        assert_eq!(h2, rhs_g2(0.5, rho, &geom, &b));
        let neutral = BackgroundCharge::constant(rho).unwrap();
        assert_eq!(rhs_h2(0.5, m2, &bc, &geom, &neutral).unwrap(), 0.0);
    }

    #[test]
    fn g1_vanishes_at_field_balance() {
        let geom = Geometry::new(1.0, 0.5).unwrap();
        let bc = BranchConstants::new(1.4, 2.0, 1.0);
        let (t, rho): (f64, f64) = (0.2, 1.5);
        let r = geom.radius(t);
        let u2 = 1.0 / (r * r * rho * rho);
        let e = u2 / r;
        assert!(rhs_g1(t, rho, e, &bc, &geom, 1e-6).unwrap().abs() < 1e-15);
    }

    /// Sampled valid inputs: (gamma, kappa, m0, t, M^2, E) with r0 = 1, r1 = 0.4.
    fn random_inputs(n: usize, seed: u64) -> Vec<[f64; 6]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let gamma = rng.gen_range(1.05..4.0);
            let kappa = rng.gen_range(0.1..5.0);
            let m0 = rng.gen_range(0.1..5.0);
            let t = rng.gen_range(0.0..0.6);
            let m2: f64 = 10f64.powf(rng.gen_range(-2.0..2.0));
            if (m2 - 1.0).abs() < 1e-3 {
                continue;
            }
            let e = rng.gen_range(-5.0..5.0);
            out.push([gamma, kappa, m0, t, m2, e]);
        }
        out
    }

    #[test]
    fn h1_forms_agree_on_random_inputs() {
        let geom = Geometry::new(1.0, 0.4).unwrap();
        for [gamma, kappa, m0, t, m2, e] in random_inputs(10_000, 7) {
            let bc = BranchConstants::new(gamma, kappa, m0);
            let a = rhs_h1(t, m2, e, &bc, &geom, 1e-6).unwrap();
            let b = rhs_h1_via_k(t, m2, e, &bc, &geom, 1e-6).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn h1_sign_follows_field_excess() {
        let geom = Geometry::new(1.0, 0.4).unwrap();
        for [gamma, kappa, m0, t, m2, e] in random_inputs(2_000, 11) {
            if m2 <= 1.0 {
                continue;
            }
            let bc = BranchConstants::new(gamma, kappa, m0);
            let excess = geom.radius(t) * e - k_of_mach(t, m2, &bc, &geom);
            if excess.abs() < 1e-9 {
                continue;
            }
            let h = rhs_h1(t, m2, e, &bc, &geom, 1e-6).unwrap();
            assert_eq!(h > 0.0, excess > 0.0);
        }
    }

    #[test]
    fn k_of_mach_matches_k_of_state() {
        let geom = Geometry::new(1.0, 0.4).unwrap();
        for [gamma, kappa, m0, t, m2, _] in random_inputs(500, 3) {
            let bc = BranchConstants::new(gamma, kappa, m0);
            let s = state_from_mach(t, m2, 0.0, &bc, &geom).unwrap();
            assert_relative_eq!(
                k_of_mach(t, m2, &bc, &geom),
                k_of_state(&s, &bc.gas()),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn g1_forms_agree_on_random_inputs() {
        let geom = Geometry::new(1.0, 0.4).unwrap();
        for [gamma, kappa, m0, t, m2, e] in random_inputs(10_000, 13) {
            let bc = BranchConstants::new(gamma, kappa, m0);
            let rho = rho_from_mach(t, m2, &bc, &geom).unwrap();
            let a = rhs_g1(t, rho, e, &bc, &geom, 1e-6).unwrap();
            let b = rhs_g1_mach_form(t, rho, e, &bc, &geom, 1e-6).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn g1_is_mach_equation_in_density_variables() {
        // rho' from g1 must equal d/dt of rho(t, M^2(t)) along the Mach equation.
        let geom = Geometry::new(1.0, 0.4).unwrap();
        let bc = BranchConstants::new(1.4, 0.7, 1.9);
        let (t, m2, e): (f64, f64, f64) = (0.2, 3.0, 2.5);
        let h1 = rhs_h1(t, m2, e, &bc, &geom, 1e-6).unwrap();
        let h = 1e-6;
        let rho_at = |tt: f64| {
            let m = m2 + h1 * (tt - t);
            rho_from_mach(tt, m, &bc, &geom).unwrap()
        };
        let fd = (rho_at(t + h) - rho_at(t - h)) / (2.0 * h);
        let rho = rho_from_mach(t, m2, &bc, &geom).unwrap();
        let g1 = rhs_g1(t, rho, e, &bc, &geom, 1e-6).unwrap();
        assert_relative_eq!(fd, g1, max_relative = 1e-7);
    }

    #[test]
    fn f32_formulas() {
        let g = GasLaw::<f32>::new(1.4, 1.0).unwrap();
        let s = FlowState { rho: 1.0f32, u: 2.0, p: 1.0 / 1.4, e: 0.0 };
        assert!((mach_squared(&s, &g) - 4.0).abs() < 1e-5);
        assert!((bernoulli(&s, &g) - 4.5).abs() < 1e-5);
        let geom = Geometry::<f32>::new(1.0, 0.5).unwrap();
        let bc = BranchConstants::new(1.4f32, 1.0, 1.0);
        assert!((rhs_h1(0.0, 2.0, 0.0, &bc, &geom, 1e-4).unwrap() + 5.6).abs() < 1e-4);
    }
}
