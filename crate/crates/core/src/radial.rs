//! Supersonic (upstream) and subsonic (downstream) radial solves, plus the
//! computable certificates that stand in for the existence thresholds.
//!
//! The upstream branch integrates `(M^2, r E)`; density is recovered
//! algebraically. The downstream branch integrates `(rho, r E)` with the
//! post-shock entropy constant.

use crate::error::{Error, Result};
use crate::gas::{
    bernoulli, g1_unguarded, h1_unguarded, k_of_state, mach_squared, rho_from_mach, state_from_density,
    state_from_mach, BackgroundCharge, BranchConstants, ConservedInvariants, FlowState, GasLaw, Geometry,
    DEFAULT_SONIC_GUARD,
};
use crate::jump::JumpRecord;
use crate::ode::{dense_eval, integrate, GuardPredicate, IvpProblem, ToleranceConfig, Trajectory, TrajectoryStatus};
use crate::scalar::Real;

/// Entrance flow must satisfy `M0^2 >= 1 + ENTRANCE_MARGIN`.
pub const ENTRANCE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Supersonic,
    Subsonic,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Supersonic => "supersonic",
            Branch::Subsonic => "subsonic",
        }
    }
}

/// Which pair of unknowns was integrated; the second is always `r E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    MachField,
    DensityField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T> {
    pub tol: ToleranceConfig<T>,
    pub sonic_guard: T,
    pub positivity_floor: T,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol: ToleranceConfig::default(),
            sonic_guard: T::lit(DEFAULT_SONIC_GUARD),
            positivity_floor: T::lit(1e-12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample<T> {
    pub t: T,
    pub state: FlowState<T>,
    pub mach2: T,
}

/// Where and why an integration ended before its requested end point.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStop<T> {
    pub guard: String,
    pub t_stop: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionProfile<T> {
    pub branch: Branch,
    pub formulation: Formulation,
    pub gamma: T,
    /// Mass flux and the entropy constant of this branch.
    pub inv: ConservedInvariants<T>,
    pub geom: Geometry<T>,
    pub samples: Vec<ProfileSample<T>>,
    /// Requested span; the samples may end earlier when `stop` is set.
    pub span: (T, T),
    pub stop: Option<EarlyStop<T>>,
    pub trajectory: Trajectory<T>,
}

impl<T: Real> SolutionProfile<T> {
    pub fn constants(&self) -> BranchConstants<T> {
        BranchConstants::new(self.gamma, self.inv.kappa0, self.inv.m0)
    }

    pub fn gas(&self) -> GasLaw<T> {
        GasLaw { gamma: self.gamma, kappa: self.inv.kappa0 }
    }

    pub fn t_from(&self) -> T {
        self.samples[0].t
    }

    /// Last time reached (equal to `span.1` unless stopped early).
    pub fn t_to(&self) -> T {
        self.samples[self.samples.len() - 1].t
    }

    pub fn reached_end(&self) -> bool {
        self.stop.is_none()
    }

    pub fn last(&self) -> &ProfileSample<T> {
        &self.samples[self.samples.len() - 1]
    }

    fn state_from_raw(&self, t: T, y: &[T]) -> Result<FlowState<T>> {
        let bc = self.constants();
        let e = y[1] / self.geom.radius(t);
        match self.formulation {
            Formulation::MachField => state_from_mach(t, y[0], e, &bc, &self.geom),
            Formulation::DensityField => Ok(state_from_density(t, y[0], e, &bc, &self.geom)),
        }
    }

    /// Interpolated state at `t` within the reached span.
    pub fn state_at(&self, t: T) -> Result<FlowState<T>> {
        let y = dense_eval(&self.trajectory, t)?;
        self.state_from_raw(t, &y)
    }

    /// Gauss-Legendre quadrature of `f(t, state)` over the reached span.
    pub fn integrate_fn(&self, f: impl Fn(T, &FlowState<T>) -> T) -> Result<T> {
        let mut acc = T::zero();
        for (t, w, y) in self.trajectory.gauss_nodes() {
            acc = acc + w * f(t, &self.state_from_raw(t, &y)?);
        }
        Ok(acc)
    }

    /// `int E dt` over the reached span.
    pub fn field_integral(&self) -> Result<T> {
        self.integrate_fn(|_, s| s.e)
    }

    pub fn density_monotone(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].state.rho > w[0].state.rho)
    }

    /// `true` when `M^2` strictly increases between consecutive samples, with
    /// the largest decrease seen otherwise.
    pub fn mach_increasing(&self) -> (bool, T) {
        let worst = self
            .samples
            .windows(2)
            .fold(T::zero(), |m, w| m.max(w[0].mach2 - w[1].mach2));
        let strict = self.samples.windows(2).all(|w| w[1].mach2 > w[0].mach2);
        (strict, worst)
    }

    pub fn max_mach2(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.mach2))
    }

    pub fn min_mach2(&self) -> T {
        self.samples.iter().fold(T::infinity(), |m, s| m.min(s.mach2))
    }

    /// `max |r rho u - m0| / m0` over the samples.
    pub fn mass_flux_residual(&self) -> T {
        let m0 = self.inv.m0;
        self.samples.iter().fold(T::zero(), |m, s| {
            m.max((self.geom.radius(s.t) * s.state.rho * s.state.u - m0).abs() / m0)
        })
    }

    /// `max |p / rho^gamma - kappa| / kappa` over the samples.
    pub fn entropy_residual(&self) -> T {
        let k = self.inv.kappa0;
        self.samples
            .iter()
            .fold(T::zero(), |m, s| m.max((s.state.entropy(self.gamma) - k).abs() / k))
    }

    /// Relative mismatch in `B(t_to) - B(t_from) = int E dt`.
    pub fn bernoulli_field_residual(&self) -> Result<T> {
        let g = self.gas();
        let b_a = bernoulli(&self.samples[0].state, &g);
        let b_b = bernoulli(&self.last().state, &g);
        Ok((b_b - b_a - self.field_integral()?).abs() / b_a.abs())
    }

    /// `r E - K` at every sample.
    pub fn field_excess(&self) -> Vec<T> {
        let g = self.gas();
        self.samples
            .iter()
            .map(|s| self.geom.radius(s.t) * s.state.e - k_of_state(&s.state, &g))
            .collect()
    }

    /// Copy restricted to `[t_from, t_cut]`, ending with the interpolated
    /// state at `t_cut`.
    pub fn truncated(&self, t_cut: T) -> Result<Self> {
        let trajectory = self.trajectory.truncated(t_cut)?;
        build_profile(
            self.branch,
            self.formulation,
            self.gamma,
            self.inv,
            self.geom,
            (self.span.0, t_cut),
            trajectory,
        )
    }
}

fn build_profile<T: Real>(
    branch: Branch,
    formulation: Formulation,
    gamma: T,
    inv: ConservedInvariants<T>,
    geom: Geometry<T>,
    span: (T, T),
    trajectory: Trajectory<T>,
) -> Result<SolutionProfile<T>> {
    let stop = match &trajectory.status {
        TrajectoryStatus::Completed => None,
        TrajectoryStatus::GuardFired { name, t_stop } => Some(EarlyStop { guard: name.clone(), t_stop: *t_stop }),
        TrajectoryStatus::StepFailure { t, .. } => Some(EarlyStop { guard: "step-failure".into(), t_stop: *t }),
    };
    let mut profile = SolutionProfile {
        branch,
        formulation,
        gamma,
        inv,
        geom,
        samples: Vec::with_capacity(trajectory.samples().len()),
        span,
        stop,
        trajectory,
    };
    let g = profile.gas();
    let mut samples = Vec::with_capacity(profile.trajectory.samples().len());
    for (t, y) in profile.trajectory.samples() {
        let state = profile.state_from_raw(*t, y)?;
        samples.push(ProfileSample { t: *t, state, mach2: mach_squared(&state, &g) });
    }
    profile.samples = samples;
    Ok(profile)
}

fn check_entrance<T: Real>(entrance: &FlowState<T>, gamma: T) -> Result<T> {
    entrance.validate()?;
    let g = GasLaw { gamma, kappa: entrance.entropy(gamma) };
    let m2 = mach_squared(entrance, &g);
    if !(m2 >= T::one() + T::lit(ENTRANCE_MARGIN)) {
        return Err(Error::InvalidEntrance { mach2: m2.to_f64_lossy() });
    }
    Ok(m2)
}

/// Supersonic solve from the entrance to `t_stop`, returning whatever part
/// of the profile was reached; `stop` records an early guard stop.
pub fn integrate_upstream<T: Real>(
    entrance: &FlowState<T>,
    g: &GasLaw<T>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
    t_stop: T,
    formulation: Formulation,
    settings: &SolverSettings<T>,
) -> Result<SolutionProfile<T>> {
    let m2_0 = check_entrance(entrance, g.gamma)?;
    if !(t_stop >= T::zero() && t_stop <= geom.span()) {
        return Err(Error::OutOfSpan {
            t: t_stop.to_f64_lossy(),
            from: 0.0,
            to: geom.span().to_f64_lossy(),
        });
    }
    let inv = ConservedInvariants::from_entrance(entrance, g.gamma, geom);
    let bc = BranchConstants::from_parts(g, &inv);
    let geo = *geom;
    let guard = settings.sonic_guard;
    let first = match formulation {
        Formulation::MachField => m2_0,
        Formulation::DensityField => entrance.rho,
    };
    let y0 = vec![first, geom.r0 * entrance.e];
    if t_stop == T::zero() {
        return build_profile(
            Branch::Supersonic,
            formulation,
            g.gamma,
            inv,
            geo,
            (T::zero(), T::zero()),
            Trajectory::point(T::zero(), y0),
        );
    }

    let traj = match formulation {
        Formulation::MachField => {
            let problem = IvpProblem::new(T::zero(), t_stop, y0, move |t, y: &[T], dy: &mut [T]| {
                let r = geo.radius(t);
                let m2 = y[0];
                dy[0] = h1_unguarded(t, m2, y[1] / r, &bc, &geo);
                dy[1] = r * (rho_from_mach(t, m2, &bc, &geo)? - b.eval(t));
                Ok(())
            })
            .with_guard(GuardPredicate::hard_stop("sonic", move |_t, y: &[T]| y[0] - T::one() - guard));
            integrate(&problem, &settings.tol)?
        }
        Formulation::DensityField => {
            let floor = settings.positivity_floor;
            let problem = IvpProblem::new(T::zero(), t_stop, y0, move |t, y: &[T], dy: &mut [T]| {
                let r = geo.radius(t);
                if !(y[0] > T::zero()) {
                    return Err(Error::Domain { what: "density", value: y[0].to_f64_lossy() });
                }
                dy[0] = g1_unguarded(t, y[0], y[1] / r, &bc, &geo);
                dy[1] = r * (y[0] - b.eval(t));
                Ok(())
            })
            .with_guard(GuardPredicate::hard_stop("sonic", move |t, y: &[T]| {
                mach2_of_density(t, y[0], &bc, &geo) - T::one() - guard
            }))
            .with_guard(GuardPredicate::hard_stop("positivity", move |_t, y: &[T]| y[0] - floor));
            integrate(&problem, &settings.tol)?
        }
    };
    build_profile(Branch::Supersonic, formulation, g.gamma, inv, geo, (T::zero(), t_stop), traj)
}

fn mach2_of_density<T: Real>(t: T, rho: T, bc: &BranchConstants<T>, geom: &Geometry<T>) -> T {
    let r = geom.radius(t);
    let u2 = bc.m0 * bc.m0 / (r * r * rho * rho);
    u2 / bc.gas().sound_speed_sq(rho)
}

/// Supersonic solve on `[0, t_stop]` in `(M^2, r E)` variables. Fails if the
/// flow decelerates to the sonic guard first.
pub fn solve_upstream<T: Real>(
    entrance: &FlowState<T>,
    g: &GasLaw<T>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
    t_stop: T,
    settings: &SolverSettings<T>,
) -> Result<SolutionProfile<T>> {
    let profile = integrate_upstream(entrance, g, geom, b, t_stop, Formulation::MachField, settings)?;
    require_complete(profile)
}

/// Same IVP as [`solve_upstream`] in `(rho, r E)` variables.
pub fn solve_upstream_density_form<T: Real>(
    entrance: &FlowState<T>,
    g: &GasLaw<T>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
    t_stop: T,
    settings: &SolverSettings<T>,
) -> Result<SolutionProfile<T>> {
    let profile = integrate_upstream(entrance, g, geom, b, t_stop, Formulation::DensityField, settings)?;
    require_complete(profile)
}

fn require_complete<T: Real>(profile: SolutionProfile<T>) -> Result<SolutionProfile<T>> {
    match &profile.stop {
        None => Ok(profile),
        Some(stop) => {
            let last = profile.last();
            if stop.guard == "sonic" || stop.guard == "step-failure" {
                Err(Error::SonicDegeneracy { t: stop.t_stop.to_f64_lossy(), mach2: last.mach2.to_f64_lossy() })
            } else {
                Err(Error::GuardFired { guard: stop.guard.clone(), t: stop.t_stop.to_f64_lossy() })
            }
        }
    }
}

/// Subsonic solve on `[t_s, t_exit]` in `(rho, r E)` variables with entropy
/// `kappa_s`; returns the reached part of the profile.
#[allow(clippy::too_many_arguments)]
pub fn integrate_downstream<T: Real>(
    post_shock: &FlowState<T>,
    kappa_s: T,
    t_s: T,
    g: &GasLaw<T>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
    t_exit: T,
    settings: &SolverSettings<T>,
) -> Result<SolutionProfile<T>> {
    post_shock.validate()?;
    if !(t_s < t_exit) || !(t_s >= T::zero()) || !(t_exit <= geom.span()) {
        return Err(Error::InvalidParameter(format!(
            "downstream span must satisfy 0 <= t_s < t_exit <= T, got t_s = {t_s}, t_exit = {t_exit}"
        )));
    }
    let gas = g.with_kappa(kappa_s);
    let m2 = mach_squared(post_shock, &gas);
    if !(m2 < T::one()) {
        return Err(Error::Degenerate(format!("post-shock state is not subsonic: M^2 = {m2}")));
    }
    let r_s = geom.radius(t_s);
    let inv = ConservedInvariants { m0: r_s * post_shock.rho * post_shock.u, kappa0: kappa_s };
    let bc = BranchConstants::new(g.gamma, kappa_s, inv.m0);
    let geo = *geom;
    let guard = settings.sonic_guard;
    let floor = settings.positivity_floor;
    let problem = IvpProblem::new(t_s, t_exit, vec![post_shock.rho, r_s * post_shock.e], move |t, y: &[T], dy: &mut [T]| {
        let r = geo.radius(t);
        if !(y[0] > T::zero()) {
            return Err(Error::Domain { what: "density", value: y[0].to_f64_lossy() });
        }
        dy[0] = g1_unguarded(t, y[0], y[1] / r, &bc, &geo);
        dy[1] = r * (y[0] - b.eval(t));
        Ok(())
    })
    .with_guard(GuardPredicate::hard_stop("sonic", move |t, y: &[T]| {
        T::one() - mach2_of_density(t, y[0], &bc, &geo) - guard
    }))
    .with_guard(GuardPredicate::hard_stop("positivity", move |_t, y: &[T]| y[0] - floor));
    let traj = integrate(&problem, &settings.tol)?;
    build_profile(Branch::Subsonic, Formulation::DensityField, g.gamma, inv, geo, (t_s, t_exit), traj)
}

/// [`integrate_downstream`] that fails with the reached time when the flow
/// chokes or loses positivity before `t_exit`.
#[allow(clippy::too_many_arguments)]
pub fn solve_downstream<T: Real>(
    post_shock: &FlowState<T>,
    kappa_s: T,
    t_s: T,
    g: &GasLaw<T>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
    t_exit: T,
    settings: &SolverSettings<T>,
) -> Result<SolutionProfile<T>> {
    let profile = integrate_downstream(post_shock, kappa_s, t_s, g, geom, b, t_exit, settings)?;
    match &profile.stop {
        None => Ok(profile),
        Some(stop) => Err(Error::DownstreamChoked { guard: stop.guard.clone(), t_fail: stop.t_stop.to_f64_lossy() }),
    }
}

/// `delta0 = 1 - 2(gamma-1)/(gamma+1) ln(r0/r1)`.
pub fn delta0<T: Real>(gamma: T, geom: &Geometry<T>) -> T {
    T::one() - crate::gas::k_factor(gamma) * (geom.r0 / geom.r1).ln()
}

/// Lower-bound constant from integrating `(r E)' >= -r b0` across the nozzle:
/// `beta1 = b0 (r0^2 - r1^2) / 2`.
pub fn beta1<T: Real>(b0: T, geom: &Geometry<T>) -> T {
    b0 * (geom.r0 * geom.r0 - geom.r1 * geom.r1) * T::lit(0.5)
}

/// `F_s = r_s E_s - (r_s/r1)^2 u_s^2 - beta1`.
pub fn f_s<T: Real>(jump: &JumpRecord<T>, geom: &Geometry<T>, beta1: T) -> T {
    let q = jump.radius / geom.r1;
    jump.radius * jump.downstream.e - q * q * jump.downstream.u * jump.downstream.u - beta1
}

/// Lower bound `G_s` of `F_s`, written through the upstream Mach number.
pub fn g_s<T: Real>(jump: &JumpRecord<T>, geom: &Geometry<T>, beta1: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let gamma = jump.gamma;
    let (gp1, gm1) = (gamma + one, gamma - one);
    let q_s = geom.r0 / jump.radius;
    let ratio = (gp1 / (two * gm1)).exp() / q_s;
    let speed = gm1 / gp1 + two / (gp1 * jump.mach2_minus);
    jump.radius * jump.upstream.e - ratio * ratio * speed * speed * (gp1 / gm1) * jump.k_minus - beta1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificates<T> {
    pub delta0: T,
    pub b0: T,
    pub beta1: T,
    /// Minimum of `r E - K` over the upstream samples.
    pub min_field_excess: T,
    pub mach_monotone: bool,
    /// Largest decrease of `M^2` between consecutive upstream samples.
    pub mach_worst_violation: T,
    /// Downstream density strictly increasing; `None` without a downstream profile.
    pub density_monotone: Option<bool>,
    /// `1 - max M^2` downstream.
    pub subsonic_margin: Option<T>,
    pub f_s: T,
    pub g_s: T,
}

impl<T: Real> Certificates<T> {
    /// Supersonic branch accelerates and the downstream launch satisfies
    /// `F_s >= beta1`.
    pub fn certified(&self) -> bool {
        self.min_field_excess > T::zero() && self.f_s >= self.beta1
    }
}

pub fn compute_certificates<T: Real>(
    up: &SolutionProfile<T>,
    down: Option<&SolutionProfile<T>>,
    geom: &Geometry<T>,
    b: &BackgroundCharge<T>,
    jump: &JumpRecord<T>,
) -> Certificates<T> {
    let b0 = b.bound();
    let beta1 = beta1(b0, geom);
    let (mach_monotone, mach_worst_violation) = up.mach_increasing();
    let min_field_excess = up.field_excess().into_iter().fold(T::infinity(), T::min);
    Certificates {
        delta0: delta0(up.gamma, geom),
        b0,
        beta1,
        min_field_excess,
        mach_monotone,
        mach_worst_violation,
        density_monotone: down.map(|d| d.density_monotone()),
        subsonic_margin: down.map(|d| T::one() - d.max_mach2()),
        f_s: f_s(jump, geom, beta1),
        g_s: g_s(jump, geom, beta1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PineqReport<T> {
    pub holds: bool,
    pub violating_xi: Option<T>,
    /// Largest left-hand side seen on the grid.
    pub max_value: T,
    /// Closed-form maximum `e^(2/(gamma-1)) ((gamma-1)/(gamma+1))^2`, attained at `xi = e^(1/2)`.
    pub maximizer_value: T,
}

/// Left-hand side `2((g-1)/(g+1))^2 (e^((g+1)/(2(g-1)))/xi)^2 ln xi`.
pub fn pineq_lhs<T: Real>(gamma: T, xi: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let a = (gamma - one) / (gamma + one);
    let c = ((gamma + one) / (two * (gamma - one))).exp() / xi;
    two * a * a * c * c * xi.ln()
}

/// Grid check of the inequality `pineq_lhs(gamma, xi) < 1` on
/// `xi in [1, e^((gamma+1)/(2(gamma-1))))`, valid for `gamma >= 2`.
pub fn check_pineq<T: Real>(gamma: T, samples: usize) -> Result<PineqReport<T>> {
    if !(gamma >= T::lit(2.0)) {
        return Err(Error::InvalidParameter(format!("pineq check needs gamma >= 2, got {gamma}")));
    }
    if samples < 100 {
        return Err(Error::InvalidParameter(format!("pineq check needs at least 100 samples, got {samples}")));
    }
    let one = T::one();
    let upper = ((gamma + one) / (T::lit(2.0) * (gamma - one))).exp();
    let n = T::from_count(samples);
    let mut max_value = T::neg_infinity();
    let mut violating_xi = None;
    for i in 0..samples {
        // half-open grid: the upper end is excluded
        let xi = one + (upper - one) * T::from_count(i) / n;
        let v = pineq_lhs(gamma, xi);
        max_value = max_value.max(v);
        if !(v < one) && violating_xi.is_none() {
            violating_xi = Some(xi);
        }
    }
    let a = (gamma - one) / (gamma + one);
    let maximizer_value = (T::lit(2.0) / (gamma - one)).exp() * a * a;
    Ok(PineqReport { holds: violating_xi.is_none(), violating_xi, max_value, maximizer_value })
}
