//! Shock placement: compose the upstream solve, the jump and the downstream
//! solve into the exit-pressure map, and invert it by bisection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gas::{bernoulli, BackgroundCharge, FlowState, GasLaw, Geometry};
use crate::jump::{apply_jump, check_admissibility, AdmissibilityReport, JumpRecord};
use crate::radial::{
    beta1, compute_certificates, f_s, g_s, integrate_upstream, solve_downstream, Certificates, Formulation,
    SolutionProfile, SolverSettings,
};
use crate::scalar::Real;
use crate::sensitivity::{
    integrate_sensitivity, jump_sensitivity_ic, pressure_sensitivity, BernoulliExitForm, PressureSensitivity,
    SensitivityProfile,
};

/// Shock positions closer than `GRID_MARGIN * T` to the exit are excluded from maps.
pub const GRID_MARGIN: f64 = 1e-8;

/// A fully specified nozzle problem. The supersonic branch is solved once
/// over the whole nozzle and shared by every shock position.
#[derive(Debug, Clone)]
pub struct ShockProblem<T> {
    pub gas: GasLaw<T>,
    pub geom: Geometry<T>,
    pub entrance: FlowState<T>,
    pub b: BackgroundCharge<T>,
    pub settings: SolverSettings<T>,
    upstream: SolutionProfile<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockSolution<T> {
    pub t_s: T,
    pub upstream: SolutionProfile<T>,
    pub jump: JumpRecord<T>,
    pub downstream: SolutionProfile<T>,
    pub sensitivity: Option<(SensitivityProfile<T>, PressureSensitivity<T>)>,
    pub certificates: Certificates<T>,
    pub exit_pressure: T,
}

impl<T: Real> ShockSolution<T> {
    pub fn admissibility(&self) -> AdmissibilityReport<T> {
        check_admissibility(&self.jump)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint<T> {
    pub t_s: T,
    pub p_exit: Option<T>,
    /// `None` when the shock position lies beyond the supersonic reach.
    pub f_s: Option<T>,
    pub g_s: Option<T>,
    pub min_field_excess: Option<T>,
    pub error: Option<Error>,
}

impl<T> MapPoint<T> {
    pub fn status(&self) -> String {
        match &self.error {
            None => "ok".into(),
            Some(e) => e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitPressureMap<T> {
    pub points: Vec<MapPoint<T>>,
    /// Every point solved and `p_exit` strictly decreasing along the grid.
    pub monotone_decreasing: bool,
    /// Largest relative increase between consecutive solved points (zero if none).
    pub worst_inversion: T,
    /// `(p_min, p_max)` over the solved points.
    pub range: Option<(T, T)>,
    pub beta1: T,
}

impl<T: Real> ExitPressureMap<T> {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }

    /// Every solved point has `F_s >= beta1` and a positive field excess.
    pub fn certified(&self) -> bool {
        self.failures() == 0
            && self.points.iter().all(|p| {
                p.f_s.is_some_and(|f| f >= self.beta1) && p.min_field_excess.is_some_and(|m| m > T::zero())
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Grid used to establish the attainable range before bisecting.
    pub map_grid: usize,
    /// Bisect even if the map is not monotone.
    pub force: bool,
    pub with_sensitivity: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { map_grid: 21, force: false, with_sensitivity: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T> {
    pub solution: ShockSolution<T>,
    pub map: ExitPressureMap<T>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport<T> {
    /// `|G(p_exit, kappa_s) - B(exit)| / |B(exit)|`.
    pub exit_form_residual: T,
    /// `|B(T) - B(t_s) - int E| / |B(t_s)|` on the subsonic branch.
    pub downstream_field_residual: T,
    /// Same law on the supersonic branch over `[0, t_s]`.
    pub upstream_field_residual: T,
    /// `(1 - M^2)/rho` at the exit.
    pub g_p: T,
}

impl<T: Real> IdentityReport<T> {
    pub fn max_residual(&self) -> T {
        self.exit_form_residual.max(self.downstream_field_residual).max(self.upstream_field_residual)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max_residual() <= tol && self.g_p > T::zero()
    }
}

/// Central-difference estimates of the exit sensitivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceSensitivity<T> {
    pub h: T,
    pub drho_exit: T,
    pub dp_exit: T,
}

/// The seven signs that together force `dp/dt_s < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignLedger {
    pub dkappa_positive: bool,
    pub x0_negative: bool,
    pub y0_negative: bool,
    pub x_negative: bool,
    pub db_negative: bool,
    pub g_p_positive: bool,
    pub dp_negative: bool,
}

impl SignLedger {
    pub fn all(&self) -> bool {
        self.dkappa_positive
            && self.x0_negative
            && self.y0_negative
            && self.x_negative
            && self.db_negative
            && self.g_p_positive
            && self.dp_negative
    }
}

impl<T: Real> ShockProblem<T> {
    /// Validates the data and integrates the supersonic branch over the
    /// nozzle (or up to where it turns sonic).
    pub fn new(
        entrance: FlowState<T>,
        gamma: T,
        geom: Geometry<T>,
        b: BackgroundCharge<T>,
        settings: SolverSettings<T>,
    ) -> Result<Self> {
        entrance.validate()?;
        settings.tol.validate()?;
        let gas = GasLaw::new(gamma, entrance.entropy(gamma))?;
        let upstream = integrate_upstream(&entrance, &gas, &geom, &b, geom.span(), Formulation::MachField, &settings)?;
        Ok(Self { gas, geom, entrance, b, settings, upstream })
    }

    /// Supersonic branch over `[0, upstream_reach()]`.
    pub fn upstream(&self) -> &SolutionProfile<T> {
        &self.upstream
    }

    pub fn upstream_reach(&self) -> T {
        self.upstream.t_to()
    }

    pub fn span(&self) -> T {
        self.geom.span()
    }

    fn check_position(&self, t_s: T) -> Result<()> {
        if !(t_s >= T::zero() && t_s < self.span()) {
            return Err(Error::InvalidParameter(format!(
                "shock position must satisfy 0 <= t_s < {}, got {t_s}",
                self.span()
            )));
        }
        if t_s > self.upstream_reach() {
            return Err(Error::UpstreamSonic { reach: self.upstream_reach().to_f64_lossy(), t_s: t_s.to_f64_lossy() });
        }
        Ok(())
    }

    /// Upstream profile on `[0, t_s]` and the jump at `t_s`.
    pub fn shock_at(&self, t_s: T) -> Result<(SolutionProfile<T>, JumpRecord<T>)> {
        self.check_position(t_s)?;
        let up = self.upstream.truncated(t_s)?;
        let jump = apply_jump(&up.last().state, t_s, &self.gas, &self.geom)?;
        Ok((up, jump))
    }

    fn downstream_from(&self, jump: &JumpRecord<T>) -> Result<SolutionProfile<T>> {
        solve_downstream(
            &jump.downstream,
            jump.kappa_s,
            jump.t_s,
            &self.gas,
            &self.geom,
            &self.b,
            self.span(),
            &self.settings,
        )
    }

    /// Exit state for a shock at `t_s`.
    pub fn exit_state(&self, t_s: T) -> Result<FlowState<T>> {
        let (_, jump) = self.shock_at(t_s)?;
        Ok(self.downstream_from(&jump)?.last().state)
    }

    pub fn forward_solve(&self, t_s: T) -> Result<ShockSolution<T>> {
        let (upstream, jump) = self.shock_at(t_s)?;
        let downstream = self.downstream_from(&jump)?;
        let certificates = compute_certificates(&upstream, Some(&downstream), &self.geom, &self.b, &jump);
        let exit_pressure = downstream.last().state.p;
        Ok(ShockSolution { t_s, upstream, jump, downstream, sensitivity: None, certificates, exit_pressure })
    }

    /// [`ShockProblem::forward_solve`] plus the variational system and `dp/dt_s`.
    pub fn forward_solve_with_sensitivity(&self, t_s: T) -> Result<ShockSolution<T>> {
        let mut sol = self.forward_solve(t_s)?;
        let guard = self.settings.sonic_guard;
        let ic = jump_sensitivity_ic(&self.upstream, &sol.jump, &self.geom, guard)?;
        let sens = integrate_sensitivity(&sol.downstream, &ic, &self.settings.tol, guard)?;
        let ps = pressure_sensitivity(&sol.downstream, &sens)?;
        sol.sensitivity = Some((sens, ps));
        Ok(sol)
    }

    /// Central differences of exit density and pressure over `t_s +- h`.
    pub fn finite_difference_sensitivity(&self, t_s: T, h: T) -> Result<FiniteDifferenceSensitivity<T>> {
        let plus = self.exit_state(t_s + h)?;
        let minus = self.exit_state(t_s - h)?;
        let two_h = T::lit(2.0) * h;
        Ok(FiniteDifferenceSensitivity {
            h,
            drho_exit: (plus.rho - minus.rho) / two_h,
            dp_exit: (plus.p - minus.p) / two_h,
        })
    }

    /// Shock positions of an `n`-point map: uniform on `[0, T(1 - GRID_MARGIN)]`.
    pub fn grid(&self, n_grid: usize) -> Vec<T> {
        let last = self.span() * (T::one() - T::lit(GRID_MARGIN));
        let denom = T::from_count(n_grid - 1);
        (0..n_grid).map(|i| last * T::from_count(i) / denom).collect()
    }

    fn map_point(&self, t_s: T, beta1: T) -> MapPoint<T> {
        let (up, jump) = match self.shock_at(t_s) {
            Ok(x) => x,
            Err(e) => {
                return MapPoint { t_s, p_exit: None, f_s: None, g_s: None, min_field_excess: None, error: Some(e) }
            }
        };
        let min_field_excess = up.field_excess().into_iter().fold(T::infinity(), T::min);
        let mut point = MapPoint {
            t_s,
            p_exit: None,
            f_s: Some(f_s(&jump, &self.geom, beta1)),
            g_s: Some(g_s(&jump, &self.geom, beta1)),
            min_field_excess: Some(min_field_excess),
            error: None,
        };
        match self.downstream_from(&jump) {
            Ok(down) => point.p_exit = Some(down.last().state.p),
            Err(e) => point.error = Some(e),
        }
        point
    }

    /// Exit pressure over a uniform shock-position grid. Grid points are
    /// solved in parallel on the current rayon pool.
    pub fn exit_pressure_map(&self, n_grid: usize) -> Result<ExitPressureMap<T>> {
        if n_grid < 2 {
            return Err(Error::InvalidParameter(format!("map needs at least 2 grid points, got {n_grid}")));
        }
        let beta1 = beta1(self.b.bound(), &self.geom);
        let points: Vec<MapPoint<T>> = self.grid(n_grid).into_par_iter().map(|t| self.map_point(t, beta1)).collect();
        let solved: Vec<T> = points.iter().filter_map(|p| p.p_exit).collect();
        let worst_inversion = solved
            .windows(2)
            .fold(T::zero(), |m, w| m.max((w[1] - w[0]) / w[0].abs()));
        let monotone_decreasing = solved.len() == points.len() && solved.windows(2).all(|w| w[1] < w[0]);
        let range = if solved.is_empty() {
            None
        } else {
            Some((
                solved.iter().copied().fold(T::infinity(), T::min),
                solved.iter().copied().fold(T::neg_infinity(), T::max),
            ))
        };
        Ok(ExitPressureMap { points, monotone_decreasing, worst_inversion, range, beta1 })
    }

    /// Shock position whose exit pressure equals `p_ex`, by bisection to a
    /// bracket of width `tol_ts * T`.
    pub fn match_exit_pressure(&self, p_ex: T, tol_ts: T, opts: MatchOptions) -> Result<MatchResult<T>> {
        if !(p_ex > T::zero()) || !p_ex.is_finite() {
            return Err(Error::InvalidParameter(format!("exit pressure must be positive, got {p_ex}")));
        }
        if !(tol_ts > T::zero() && tol_ts < T::one()) {
            return Err(Error::InvalidParameter(format!("tol_ts must lie in (0, 1), got {tol_ts}")));
        }
        let map = self.exit_pressure_map(opts.map_grid)?;
        let Some((p_min, p_max)) = map.range else {
            return Err(Error::Degenerate("no grid point of the exit-pressure map could be solved".into()));
        };
        if p_ex < p_min || p_ex > p_max {
            return Err(Error::OutOfRange {
                p_ex: p_ex.to_f64_lossy(),
                p_min: p_min.to_f64_lossy(),
                p_max: p_max.to_f64_lossy(),
            });
        }
        let mut warnings = Vec::new();
        if !map.monotone_decreasing {
            if !opts.force {
                return Err(Error::NonMonotoneMap);
            }
            warnings.push("exit-pressure map is not monotone; bisection forced and the match may not be unique".into());
        }
        if !map.certified() {
            warnings.push("certificates do not hold at every grid point".into());
        }

        // first solved adjacent pair with p(lo) >= p_ex >= p(hi)
        let solved: Vec<(T, T)> = map.points.iter().filter_map(|p| p.p_exit.map(|v| (p.t_s, v))).collect();
        let bracket = solved.windows(2).find(|w| w[0].1 >= p_ex && p_ex >= w[1].1).map(|w| (w[0].0, w[1].0));
        let (mut lo, mut hi) = match bracket {
            Some(b) => b,
            None if solved.len() == 1 => (solved[0].0, solved[0].0),
            None => {
                return Err(Error::Degenerate(format!(
                    "no decreasing grid interval brackets p_ex = {p_ex}"
                )))
            }
        };

        let width = tol_ts * self.span();
        let mut iterations = 0;
        while hi - lo > width {
            let mid = (lo + hi) * T::lit(0.5);
            let p = self.exit_state(mid)?.p;
            iterations += 1;
            if p == p_ex {
                lo = mid;
                hi = mid;
            } else if p > p_ex {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_s = (lo + hi) * T::lit(0.5);
        let solution =
            if opts.with_sensitivity { self.forward_solve_with_sensitivity(t_s)? } else { self.forward_solve(t_s)? };
        Ok(MatchResult { solution, map, iterations, warnings })
    }
}

/// Residuals of the exit Bernoulli form and of `B' = E` on both branches.
pub fn bernoulli_exit_identities<T: Real>(sol: &ShockSolution<T>) -> Result<IdentityReport<T>> {
    let down = &sol.downstream;
    let exit = down.last().state;
    let gas = down.gas();
    let form = BernoulliExitForm { gamma: down.gamma, m0: down.inv.m0, r_exit: down.geom.radius(down.t_to()) };
    let b_exit = bernoulli(&exit, &gas);
    let b_shock = bernoulli(&sol.jump.upstream, &sol.jump.upstream_gas());
    let downstream_field_residual = (b_exit - b_shock - down.field_integral()?).abs() / b_shock.abs();
    Ok(IdentityReport {
        exit_form_residual: (form.value(exit.p, gas.kappa) - b_exit).abs() / b_exit.abs(),
        downstream_field_residual,
        upstream_field_residual: sol.upstream.bernoulli_field_residual()?,
        g_p: form.d_pressure(exit.p, gas.kappa),
    })
}

/// Sign chain of the sensitivity solution; `None` when it was not computed.
pub fn sign_ledger<T: Real>(sol: &ShockSolution<T>) -> Option<SignLedger> {
    let (sens, ps) = sol.sensitivity.as_ref()?;
    let zero = T::zero();
    Some(SignLedger {
        dkappa_positive: sens.dkappa_dts > zero,
        x0_negative: sens.x_initial < zero,
        y0_negative: sens.y_initial < zero,
        x_negative: sens.x_max() < zero,
        db_negative: ps.db_dts < zero,
        g_p_positive: ps.g_p > zero,
        dp_negative: ps.dp_dts < zero,
    })
}
