//! Adaptive Dormand-Prince 5(4) integrator with guard functions and
//! continuous (dense) output.
//!
//! Guards are scalar functions of `(t, y)` that are positive on the
//! admissible region. A hard-stop guard that becomes non-positive at the end
//! of an accepted step terminates the integration; its zero crossing is
//! localized by bisection on the dense interpolant of that step.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Right-hand side `dy/dt = f(t, y)`, written into the output slice.
pub type RhsFn<'a, T> = Box<dyn Fn(T, &[T], &mut [T]) -> Result<()> + 'a>;

/// Guard test function; positive while admissible.
pub type GuardFn<'a, T> = Box<dyn Fn(T, &[T]) -> T + 'a>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardKind {
    HardStop,
    Warning,
}

pub struct GuardPredicate<'a, T> {
    pub name: String,
    pub test: GuardFn<'a, T>,
    pub kind: GuardKind,
}

impl<'a, T: Real> GuardPredicate<'a, T> {
    pub fn hard_stop(name: impl Into<String>, test: impl Fn(T, &[T]) -> T + 'a) -> Self {
        Self { name: name.into(), test: Box::new(test), kind: GuardKind::HardStop }
    }

    pub fn warning(name: impl Into<String>, test: impl Fn(T, &[T]) -> T + 'a) -> Self {
        Self { name: name.into(), test: Box::new(test), kind: GuardKind::Warning }
    }
}

pub struct IvpProblem<'a, T> {
    pub rhs: RhsFn<'a, T>,
    pub t_start: T,
    pub t_end: T,
    pub y_start: Vec<T>,
    pub guards: Vec<GuardPredicate<'a, T>>,
}

impl<'a, T: Real> IvpProblem<'a, T> {
    pub fn new(
        t_start: T,
        t_end: T,
        y_start: Vec<T>,
        rhs: impl Fn(T, &[T], &mut [T]) -> Result<()> + 'a,
    ) -> Self {
        Self { rhs: Box::new(rhs), t_start, t_end, y_start, guards: Vec::new() }
    }

    pub fn with_guard(mut self, guard: GuardPredicate<'a, T>) -> Self {
        self.guards.push(guard);
        self
    }

    pub fn dimension(&self) -> usize {
        self.y_start.len()
    }

    fn validate(&self) -> Result<()> {
        if self.y_start.is_empty() {
            return Err(Error::InvalidParameter("IVP dimension must be at least 1".into()));
        }
        if !(self.t_end > self.t_start) || !self.t_end.is_finite() || !self.t_start.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "IVP needs t_end > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.y_start.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("IVP initial value is not finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
}

impl<T: Real> Default for ToleranceConfig<T> {
    fn default() -> Self {
        // 1e-10 is below f32 resolution; fall back to a multiple of epsilon there.
        let rtol = T::lit(1e-10).max(T::epsilon() * T::lit(100.0));
        let atol = T::lit(1e-12).max(T::epsilon() * T::lit(1.0));
        Self { rtol, atol, max_steps: 200_000 }
    }
}

impl<T: Real> ToleranceConfig<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > T::zero() && self.rtol <= T::lit(1e-3)) {
            return Err(Error::InvalidParameter(format!(
                "rtol must lie in (0, 1e-3], got {}",
                self.rtol
            )));
        }
        if !(self.atol > T::zero()) {
            return Err(Error::InvalidParameter(format!("atol must be positive, got {}", self.atol)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryStatus<T> {
    Completed,
    GuardFired { name: String, t_stop: T },
    StepFailure { t: T, h: T },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, PartialEq)]
struct DenseSegment<T> {
    t0: T,
    h: T,
    coeffs: [Vec<T>; 5],
}

impl<T: Real> DenseSegment<T> {
    fn eval(&self, t: T, out: &mut [T]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let [c1, c2, c3, c4, c5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = c1[i] + theta * (c2[i] + theta1 * (c3[i] + theta * (c4[i] + theta1 * c5[i])));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    samples: Vec<(T, Vec<T>)>,
    segments: Vec<DenseSegment<T>>,
    pub status: TrajectoryStatus<T>,
    pub stats: IntegrationStats,
    /// Warning-guard crossings `(name, t)`.
    pub warnings: Vec<(String, T)>,
}

impl<T: Real> Trajectory<T> {
    pub fn samples(&self) -> &[(T, Vec<T>)] {
        &self.samples
    }

    pub fn is_completed(&self) -> bool {
        matches!(self.status, TrajectoryStatus::Completed)
    }

    pub fn t_first(&self) -> T {
        self.samples[0].0
    }

    pub fn t_last(&self) -> T {
        self.samples[self.samples.len() - 1].0
    }

    pub fn last(&self) -> &(T, Vec<T>) {
        &self.samples[self.samples.len() - 1]
    }

    /// Single-sample trajectory for a degenerate (zero-length) span.
    pub fn point(t: T, y: Vec<T>) -> Self {
        Self {
            samples: vec![(t, y)],
            segments: Vec::new(),
            status: TrajectoryStatus::Completed,
            stats: IntegrationStats::default(),
            warnings: Vec::new(),
        }
    }

    /// Copy ending at `t_cut`, with the interpolated state as the last sample.
    pub fn truncated(&self, t_cut: T) -> Result<Self> {
        let y_cut = dense_eval(self, t_cut)?;
        let n = self.samples.partition_point(|s| s.0 < t_cut);
        if n == 0 {
            return Ok(Self::point(t_cut, y_cut));
        }
        let mut samples = self.samples[..n].to_vec();
        samples.push((t_cut, y_cut));
        Ok(Self {
            samples,
            segments: self.segments[..n].to_vec(),
            status: TrajectoryStatus::Completed,
            stats: self.stats,
            warnings: self.warnings.iter().filter(|w| w.1 <= t_cut).cloned().collect(),
        })
    }

    /// Quadrature nodes covering the span: five Gauss-Legendre nodes per
    /// accepted step, returned as `(t, weight, y(t))`.
    pub fn gauss_nodes(&self) -> Vec<(T, T, Vec<T>)> {
        const X: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let mut out = Vec::with_capacity(self.segments.len() * 5);
        let dim = self.samples[0].1.len();
        for (k, seg) in self.segments.iter().enumerate() {
            let a = self.samples[k].0;
            let b = self.samples[k + 1].0;
            if !(b > a) {
                continue;
            }
            let half = (b - a) * T::lit(0.5);
            let mid = (a + b) * T::lit(0.5);
            for (x, w) in X.iter().zip(W.iter()) {
                let t = mid + half * T::lit(*x);
                let mut y = vec![T::zero(); dim];
                seg.eval(t, &mut y);
                out.push((t, half * T::lit(*w), y));
            }
        }
        out
    }
}

/// Interpolated state at `t` within the trajectory span.
pub fn dense_eval<T: Real>(traj: &Trajectory<T>, t: T) -> Result<Vec<T>> {
    let from = traj.t_first();
    let to = traj.t_last();
    if !(t >= from && t <= to) {
        return Err(Error::OutOfSpan {
            t: t.to_f64_lossy(),
            from: from.to_f64_lossy(),
            to: to.to_f64_lossy(),
        });
    }
    let idx = traj.samples.partition_point(|s| s.0 < t);
    if idx < traj.samples.len() && traj.samples[idx].0 == t {
        return Ok(traj.samples[idx].1.clone());
    }
    let seg = &traj.segments[idx - 1];
    let mut out = vec![T::zero(); traj.samples[0].1.len()];
    seg.eval(t, &mut out);
    Ok(out)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BISECTION_REL: f64 = 1e-12;

struct Stepper<'p, 'a, T> {
    problem: &'p IvpProblem<'a, T>,
    tol: ToleranceConfig<T>,
    stats: IntegrationStats,
    k: [Vec<T>; 7],
    tmp: Vec<T>,
}

impl<'p, 'a, T: Real> Stepper<'p, 'a, T> {
    fn eval(&mut self, t: T, y: &[T], slot: usize) -> Result<()> {
        self.stats.rhs_evals += 1;
        (self.problem.rhs)(t, y, &mut self.k[slot])?;
        if self.k[slot].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Degenerate("non-finite right-hand side".into()))
        }
    }

    fn error_norm(&self, y: &[T], y_new: &[T], err: &[T]) -> T {
        let n = T::from_count(y.len());
        let sum = y.iter().zip(y_new).zip(err).fold(T::zero(), |acc, ((a, b), e)| {
            let sc = self.tol.atol + self.tol.rtol * a.abs().max(b.abs());
            let r = *e / sc;
            acc + r * r
        });
        (sum / n).sqrt()
    }

    /// Starting step size heuristic (Hairer, Norsett & Wanner).
    fn initial_step(&mut self, t: T, y: &[T], span: T) -> T {
        let n = T::from_count(y.len());
        let scaled = |v: &[T], tol: &ToleranceConfig<T>| {
            let s = v.iter().zip(y).fold(T::zero(), |acc, (vi, yi)| {
                let r = *vi / (tol.atol + tol.rtol * yi.abs());
                acc + r * r
            });
            (s / n).sqrt()
        };
        let d0 = scaled(y, &self.tol);
        let d1 = scaled(&self.k[0], &self.tol);
        let tiny = T::lit(1e-5);
        let mut h0 = if d0 < tiny || d1 < tiny { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
        h0 = h0.min(span);
        let y1: Vec<T> = y.iter().zip(&self.k[0]).map(|(a, f)| *a + h0 * *f).collect();
        if self.eval(t + h0, &y1, 1).is_err() {
            return h0 * T::lit(0.01);
        }
        let diff: Vec<T> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| *a - *b).collect();
        let d2 = scaled(&diff, &self.tol) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / dmax).powf(T::lit(0.2))
        };
        (h0 * T::lit(100.0)).min(h1).min(span)
    }

    /// One trial step; fills `tmp` with the 5th-order solution and returns the
    /// embedded error estimate norm.
    fn attempt(&mut self, t: T, y: &[T], h: T) -> Result<T> {
        let n = y.len();
        let l = T::lit;
        let mut stage = vec![T::zero(); n];
        let combos: [(f64, &[(usize, f64)]); 6] = [
            (C2, &[(0, A21)]),
            (C3, &[(0, A31), (1, A32)]),
            (C4, &[(0, A41), (1, A42), (2, A43)]),
            (C5, &[(0, A51), (1, A52), (2, A53), (3, A54)]),
            (1.0, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]),
            (1.0, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]),
        ];
        for (s, (c, coeffs)) in combos.iter().enumerate() {
            for i in 0..n {
                let mut acc = T::zero();
                for &(j, a) in coeffs.iter() {
                    acc = acc + l(a) * self.k[j][i];
                }
                stage[i] = y[i] + h * acc;
            }
            let tc = if s >= 4 { t + h } else { t + l(*c) * h };
            self.eval(tc, &stage, s + 1)?;
        }
        // stage 7 input is the 5th-order solution (FSAL)
        self.tmp.copy_from_slice(&stage);
        let mut err = vec![T::zero(); n];
        for (i, e) in err.iter_mut().enumerate() {
            *e = h
                * (l(E1) * self.k[0][i]
                    + l(E3) * self.k[2][i]
                    + l(E4) * self.k[3][i]
                    + l(E5) * self.k[4][i]
                    + l(E6) * self.k[5][i]
                    + l(E7) * self.k[6][i]);
        }
        let norm = self.error_norm(y, &self.tmp, &err);
        if norm.is_finite() {
            Ok(norm)
        } else {
            Err(Error::Degenerate("non-finite error estimate".into()))
        }
    }

    fn dense_segment(&self, t: T, y: &[T], y_new: &[T], h: T) -> DenseSegment<T> {
        let n = y.len();
        let l = T::lit;
        let mut c = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
        for i in 0..n {
            let dy = y_new[i] - y[i];
            let bspl = h * self.k[0][i] - dy;
            c[0][i] = y[i];
            c[1][i] = dy;
            c[2][i] = bspl;
            c[3][i] = dy - h * self.k[6][i] - bspl;
            c[4][i] = h
                * (l(D1) * self.k[0][i]
                    + l(D3) * self.k[2][i]
                    + l(D4) * self.k[3][i]
                    + l(D5) * self.k[4][i]
                    + l(D6) * self.k[5][i]
                    + l(D7) * self.k[6][i]);
        }
        DenseSegment { t0: t, h, coeffs: c }
    }
}

/// Integrates `problem` from `t_start` towards `t_end`.
///
/// Invalid problems or tolerances are errors; guard stops and step-size
/// underflow are reported through [`Trajectory::status`].
pub fn integrate<T: Real>(problem: &IvpProblem<'_, T>, tol: &ToleranceConfig<T>) -> Result<Trajectory<T>> {
    problem.validate()?;
    tol.validate()?;
    let n = problem.dimension();
    let span = problem.t_end - problem.t_start;
    let mut stepper = Stepper {
        problem,
        tol: *tol,
        stats: IntegrationStats::default(),
        k: std::array::from_fn(|_| vec![T::zero(); n]),
        tmp: vec![T::zero(); n],
    };

    let mut t = problem.t_start;
    let mut y = problem.y_start.clone();
    let mut traj = Trajectory {
        samples: vec![(t, y.clone())],
        segments: Vec::new(),
        status: TrajectoryStatus::Completed,
        stats: IntegrationStats::default(),
        warnings: Vec::new(),
    };

    let mut guard_prev: Vec<T> = problem.guards.iter().map(|g| (g.test)(t, &y)).collect();
    for (g, v) in problem.guards.iter().zip(&guard_prev) {
        if g.kind == GuardKind::HardStop && !(*v > T::zero()) {
            traj.status = TrajectoryStatus::GuardFired { name: g.name.clone(), t_stop: t };
            return Ok(traj);
        }
    }

    if stepper.eval(t, &y, 0).is_err() {
        traj.status = TrajectoryStatus::StepFailure { t, h: T::zero() };
        traj.stats = stepper.stats;
        return Ok(traj);
    }
    let mut h = stepper.initial_step(t, &y, span);
    let h_min = span * T::lit(1e-15) + T::min_positive_value();
    let mut last_rejected = false;

    loop {
        if stepper.stats.accepted + stepper.stats.rejected >= tol.max_steps || h < h_min {
            traj.status = TrajectoryStatus::StepFailure { t, h };
            break;
        }
        let remaining = problem.t_end - t;
        let last = h >= remaining * (T::one() - T::lit(1e-12));
        if last {
            h = remaining;
        }

        let norm = match stepper.attempt(t, &y, h) {
            Ok(norm) => norm,
            Err(_) => {
                stepper.stats.rejected += 1;
                h = h * T::lit(0.25);
                last_rejected = true;
                continue;
            }
        };

        if norm > T::one() {
            stepper.stats.rejected += 1;
            let fac = (T::lit(SAFETY) * norm.powf(T::lit(-0.2))).max(T::lit(FAC_MIN));
            h = h * fac;
            last_rejected = true;
            continue;
        }

        stepper.stats.accepted += 1;
        let t_new = if last { problem.t_end } else { t + h };
        let y_new = stepper.tmp.clone();
        let segment = stepper.dense_segment(t, &y, &y_new, h);

        // Guards: earliest hard-stop crossing wins.
        let mut stop: Option<(usize, T)> = None;
        let mut guard_new = Vec::with_capacity(guard_prev.len());
        for (gi, g) in problem.guards.iter().enumerate() {
            let v = (g.test)(t_new, &y_new);
            let crossed = guard_prev[gi] > T::zero() && !(v > T::zero());
            if crossed {
                let tc = bisect_guard(&segment, g, t, t_new, span, n);
                match g.kind {
                    GuardKind::HardStop => {
                        if stop.is_none_or(|(_, ts)| tc < ts) {
                            stop = Some((gi, tc));
                        }
                    }
                    GuardKind::Warning => traj.warnings.push((g.name.clone(), tc)),
                }
            }
            guard_new.push(v);
        }

        traj.segments.push(segment);
        if let Some((gi, t_stop)) = stop {
            if t_stop > t {
                let mut ys = vec![T::zero(); n];
                traj.segments.last().unwrap().eval(t_stop, &mut ys);
                traj.samples.push((t_stop, ys));
            } else {
                traj.segments.pop();
            }
            traj.status = TrajectoryStatus::GuardFired {
                name: problem.guards[gi].name.clone(),
                t_stop,
            };
            break;
        }

        traj.samples.push((t_new, y_new.clone()));
        guard_prev = guard_new;
        t = t_new;
        y = y_new;
        stepper.k[0] = stepper.k[6].clone();
        if last {
            traj.status = TrajectoryStatus::Completed;
            break;
        }

        let mut fac = if norm == T::zero() {
            T::lit(FAC_MAX)
        } else {
            (T::lit(SAFETY) * norm.powf(T::lit(-0.2))).min(T::lit(FAC_MAX)).max(T::lit(FAC_MIN))
        };
        if last_rejected {
            fac = fac.min(T::one());
        }
        last_rejected = false;
        h = h * fac;
    }

    traj.stats = stepper.stats;
    Ok(traj)
}

/// Last admissible time before the guard crossing inside one step.
fn bisect_guard<T: Real>(
    seg: &DenseSegment<T>,
    guard: &GuardPredicate<'_, T>,
    t_lo: T,
    t_hi: T,
    span: T,
    n: usize,
) -> T {
    let mut lo = t_lo;
    let mut hi = t_hi;
    let width = span * T::lit(BISECTION_REL);
    let mut y = vec![T::zero(); n];
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = lo + (hi - lo) * T::lit(0.5);
        if !(mid > lo && mid < hi) {
            break;
        }
        seg.eval(mid, &mut y);
        if (guard.test)(mid, &y) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decay<'a>(t_end: f64) -> IvpProblem<'a, f64> {
        IvpProblem::new(0.0, t_end, vec![1.0], |_t, y, dy| {
            dy[0] = -y[0];
            Ok(())
        })
    }

    #[test]
    fn exponential_decay() {
        let tol = ToleranceConfig::new(1e-8, 1e-12);
        let traj = integrate(&decay(1.0), &tol).unwrap();
        assert!(traj.is_completed());
        let (t, y) = traj.last();
        assert_eq!(*t, 1.0);
        assert!((y[0] - (-1.0f64).exp()).abs() <= 1e-8 * (-1.0f64).exp());
        assert_eq!(traj.samples()[0], (0.0, vec![1.0]));
        assert!(traj.samples().windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn constant_solution_has_no_rejections() {
        let p = IvpProblem::new(0.0, 5.0, vec![2.0, -3.0], |_t, _y, dy: &mut [f64]| {
            dy.iter_mut().for_each(|v| *v = 0.0);
            Ok(())
        });
        let traj = integrate(&p, &ToleranceConfig::default()).unwrap();
        assert!(traj.is_completed());
        assert_eq!(traj.stats.rejected, 0);
        assert!(traj.samples().iter().all(|(_, y)| y == &vec![2.0, -3.0]));
    }

    #[test]
    fn field_quadrature_matches_antiderivative() {
        // (r E)' = r (rho - b) with r = r0 - t and constant rho, b
        let (r0, rho, b, e0) = (2.0, 1.3, 0.8, 0.5);
        let p = IvpProblem::new(0.0, 1.5, vec![r0 * e0], move |t, _y, dy: &mut [f64]| {
            dy[0] = (r0 - t) * (rho - b);
            Ok(())
        });
        let tol = ToleranceConfig::new(1e-10, 1e-12);
        let traj = integrate(&p, &tol).unwrap();
        let exact = |t: f64| r0 * e0 + (rho - b) * (r0 * t - 0.5 * t * t);
        for (t, y) in traj.samples() {
            assert_relative_eq!(y[0], exact(*t), max_relative = 1e-10);
        }
    }

    #[test]
    fn dense_output_nodes_and_midpoints() {
        let tol = ToleranceConfig::new(1e-8, 1e-12);
        let traj = integrate(&decay(2.0), &tol).unwrap();
        for (t, y) in traj.samples() {
            assert_eq!(&dense_eval(&traj, *t).unwrap(), y);
        }
        for w in traj.samples().windows(2) {
            let tm = 0.5 * (w[0].0 + w[1].0);
            let y = dense_eval(&traj, tm).unwrap()[0];
            assert!((y - (-tm).exp()).abs() <= 10.0 * 1e-8 * (-tm).exp());
        }
        assert!(dense_eval(&traj, 2.5).is_err());
        assert!(dense_eval(&traj, -0.1).is_err());
    }

    #[test]
    fn dense_output_preserves_monotonicity() {
        let tol = ToleranceConfig::new(1e-8, 1e-12);
        let traj = integrate(&decay(3.0), &tol).unwrap();
        let mut prev = f64::INFINITY;
        let n = 3000;
        for i in 0..=n {
            let t = 3.0 * i as f64 / n as f64;
            let y = dense_eval(&traj, t).unwrap()[0];
            assert!(y < prev);
            prev = y;
        }
    }

    #[test]
    fn halving_rtol_halves_error() {
        // long enough span that step-count quantization does not dominate
        let t_end: f64 = 10.0;
        let exact = (-t_end).exp();
        let err = |rtol: f64| {
            let traj = integrate(&decay(t_end), &ToleranceConfig::new(rtol, 1e-300)).unwrap();
            ((traj.last().1[0] - exact) / exact).abs()
        };
        for &rtol in &[1e-5, 1e-6, 1e-8, 1e-10] {
            let (e1, e2) = (err(rtol), err(rtol / 2.0));
            assert!(e1 >= 2.0 * e2, "rtol {rtol}: {e1} vs {e2}");
        }
    }

    #[test]
    fn guard_localization() {
        let t_star = 0.7316;
        let p = decay(2.0).with_guard(GuardPredicate::hard_stop("linear", move |t, _y| t_star - t));
        let traj = integrate(&p, &ToleranceConfig::default()).unwrap();
        match &traj.status {
            TrajectoryStatus::GuardFired { name, t_stop } => {
                assert_eq!(name, "linear");
                assert!((t_stop - t_star).abs() <= 1e-10 * 2.0);
                assert_eq!(traj.t_last(), *t_stop);
            }
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn warning_guard_does_not_stop() {
        let p = decay(2.0).with_guard(GuardPredicate::warning("half", |_t, y| y[0] - 0.5));
        let traj = integrate(&p, &ToleranceConfig::default()).unwrap();
        assert!(traj.is_completed());
        assert_eq!(traj.warnings.len(), 1);
        assert!((traj.warnings[0].1 - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_reports_step_failure() {
        // y' = y^2 blows up at t = 1
        let p = IvpProblem::new(0.0, 2.0, vec![1.0], |_t, y, dy: &mut [f64]| {
            dy[0] = y[0] * y[0];
            Ok(())
        });
        let traj = integrate(&p, &ToleranceConfig::default()).unwrap();
        assert!(matches!(traj.status, TrajectoryStatus::StepFailure { .. }));
        assert!(traj.t_last() < 1.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(integrate(&decay(0.0), &ToleranceConfig::default()).is_err());
        assert!(integrate(&decay(1.0), &ToleranceConfig::new(1e-2, 1e-12)).is_err());
        assert!(integrate(&decay(1.0), &ToleranceConfig::new(1e-8, 0.0)).is_err());
    }

    #[test]
    fn deterministic() {
        let tol = ToleranceConfig::new(1e-9, 1e-12);
        let a = integrate(&decay(3.0), &tol).unwrap();
        let b = integrate(&decay(3.0), &tol).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gauss_nodes_integrate_solution() {
        let traj = integrate(&decay(1.0), &ToleranceConfig::new(1e-10, 1e-14)).unwrap();
        let integral: f64 = traj.gauss_nodes().iter().map(|(_, w, y)| w * y[0]).sum();
        assert_relative_eq!(integral, 1.0 - (-1.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn truncation_keeps_interpolant() {
        let traj = integrate(&decay(1.0), &ToleranceConfig::new(1e-10, 1e-14)).unwrap();
        let cut = traj.truncated(0.37).unwrap();
        assert_eq!(cut.t_last(), 0.37);
        assert_eq!(dense_eval(&cut, 0.2).unwrap(), dense_eval(&traj, 0.2).unwrap());
        let integral: f64 = cut.gauss_nodes().iter().map(|(_, w, y)| w * y[0]).sum();
        assert_relative_eq!(integral, 1.0 - (-0.37f64).exp(), max_relative = 1e-9);
        assert_eq!(traj.truncated(0.0).unwrap().samples().len(), 1);
        assert!(traj.truncated(1.5).is_err());
    }

    #[test]
    fn f32_decay() {
        let p = IvpProblem::new(0.0f32, 1.0, vec![1.0f32], |_t, y, dy: &mut [f32]| {
            dy[0] = -y[0];
            Ok(())
        });
        let traj = integrate(&p, &ToleranceConfig::default()).unwrap();
        assert!((traj.last().1[0] - (-1.0f32).exp()).abs() < 1e-5);
    }
}
