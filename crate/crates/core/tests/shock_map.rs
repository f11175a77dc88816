use epshock_core::matcher::{bernoulli_exit_identities, sign_ledger, GRID_MARGIN};
use epshock_core::*;

fn problem(e0: f64) -> ShockProblem64 {
    ShockProblem::new(
        FlowState { rho: 1.0, u: 2.0, p: 1.0 / 1.4, e: e0 },
        1.4,
        Geometry::new(1.0, 0.5).unwrap(),
        BackgroundCharge::constant(1.0).unwrap(),
        SolverSettings::default(),
    )
    .unwrap()
}

#[test]
fn certified_map_is_strictly_decreasing() {
    let pb = problem(4.0);
    let map = pb.exit_pressure_map(21).unwrap();
    assert!(map.certified());
    assert!(map.monotone_decreasing);
    let p: Vec<f64> = map.points.iter().map(|x| x.p_exit.unwrap()).collect();
    for w in p.windows(2) {
        assert!((w[0] - w[1]) / w[0] > 1e-10);
    }
    assert!(map.points.windows(2).all(|w| w[1].t_s > w[0].t_s));
    assert_eq!(map.points[0].t_s, 0.0);
    assert!((map.points[20].t_s - 0.5 * (1.0 - GRID_MARGIN)).abs() < 1e-15);
}

#[test]
fn refinement_keeps_range_and_monotonicity() {
    let pb = problem(4.0);
    let coarse = pb.exit_pressure_map(11).unwrap();
    let fine = pb.exit_pressure_map(21).unwrap();
    let (a, b) = (coarse.range.unwrap(), fine.range.unwrap());
    assert!((a.0 - b.0).abs() <= 1e-9 * a.0);
    assert!((a.1 - b.1).abs() <= 1e-9 * a.1);
    assert_eq!(coarse.monotone_decreasing, fine.monotone_decreasing);
    // coarse points are every other fine point
    for (i, pt) in coarse.points.iter().enumerate() {
        assert_eq!(pt.p_exit, fine.points[2 * i].p_exit);
    }
}

#[test]
fn sensitivity_matches_finite_differences() {
    let pb = problem(4.0);
    let h = 1e-5 * pb.span();
    for &t_s in &[0.05, 0.15, 0.25, 0.35, 0.45] {
        let sol = pb.forward_solve_with_sensitivity(t_s).unwrap();
        let (sens, ps) = sol.sensitivity.as_ref().unwrap();
        let fd = pb.finite_difference_sensitivity(t_s, h).unwrap();
        assert!((sens.last().x - fd.drho_exit).abs() <= 1e-3 * fd.drho_exit.abs(), "X(T) at {t_s}");
        assert!((ps.dp_dts - fd.dp_exit).abs() <= 1e-3 * fd.dp_exit.abs(), "dp at {t_s}");
        assert!(sign_ledger(&sol).unwrap().all());
        assert!(ps.self_check_passes());
        assert!(sens.integral_identity_residual(&pb.geom) < 1e-8);
    }
}

#[test]
fn sensitivity_sign_agrees_with_map_slope() {
    let pb = problem(4.0);
    let map = pb.exit_pressure_map(11).unwrap();
    for w in map.points.windows(2) {
        let slope = w[1].p_exit.unwrap() - w[0].p_exit.unwrap();
        let sol = pb.forward_solve_with_sensitivity(w[0].t_s).unwrap();
        let dp = sol.sensitivity.unwrap().1.dp_dts;
        assert_eq!(slope < 0.0, dp < 0.0);
    }
}

#[test]
fn round_trip_recovers_shock_position() {
    let pb = problem(4.0);
    for &target in &[0.0123, 0.2, 0.3141, 0.47] {
        let p_ex = pb.forward_solve(target).unwrap().exit_pressure;
        let m = pb.match_exit_pressure(p_ex, 1e-10, MatchOptions::default()).unwrap();
        assert!((m.solution.t_s - target).abs() <= 1e-8 * pb.span(), "{target}: {}", m.solution.t_s);
        assert!(m.warnings.is_empty());
        assert!(m.solution.admissibility().is_admissible());
        assert!(m.solution.downstream.density_monotone());
    }
}

#[test]
fn range_endpoints_match_boundaries() {
    let pb = problem(4.0);
    let map = pb.exit_pressure_map(21).unwrap();
    let (p_min, p_max) = map.range.unwrap();
    let top = pb.match_exit_pressure(p_max, 1e-10, MatchOptions::default()).unwrap();
    assert!(top.solution.t_s <= 1e-9 * pb.span());
    let bottom = pb.match_exit_pressure(p_min, 1e-10, MatchOptions::default()).unwrap();
    assert!((bottom.solution.t_s - map.points[20].t_s).abs() <= 1e-9 * pb.span());
    assert!(matches!(
        pb.match_exit_pressure(p_max * 1.001, 1e-10, MatchOptions::default()),
        Err(Error::OutOfRange { .. })
    ));
    assert!(matches!(
        pb.match_exit_pressure(p_min * 0.999, 1e-10, MatchOptions::default()),
        Err(Error::OutOfRange { .. })
    ));
}

#[test]
fn non_monotone_map_needs_force() {
    // weak field: the map dips and rises again
    let pb = problem(1.0);
    let map = pb.exit_pressure_map(21).unwrap();
    assert_eq!(map.failures(), 0);
    assert!(!map.monotone_decreasing && !map.certified());
    assert!(map.worst_inversion > 0.0);
    let p_ex = map.points[1].p_exit.unwrap();
    assert_eq!(pb.match_exit_pressure(p_ex, 1e-10, MatchOptions::default()).unwrap_err(), Error::NonMonotoneMap);
    let forced = pb.match_exit_pressure(p_ex, 1e-10, MatchOptions { force: true, ..Default::default() }).unwrap();
    assert!(!forced.warnings.is_empty());
    assert!((forced.solution.exit_pressure - p_ex).abs() <= 1e-8 * p_ex);
}

#[test]
fn choking_is_reported_with_location() {
    let pb = problem(0.0);
    match pb.forward_solve(0.2) {
        Err(Error::DownstreamChoked { guard, t_fail }) => {
            assert!(!guard.is_empty());
            assert!(t_fail > 0.2 && t_fail < 0.5);
        }
        other => panic!("{other:?}"),
    }
    // beyond the supersonic reach the shock cannot be placed at all
    assert!(pb.upstream_reach() < pb.span());
    assert!(matches!(pb.forward_solve(0.45), Err(Error::UpstreamSonic { .. })));
    let map = pb.exit_pressure_map(5).unwrap();
    assert_eq!(map.failures(), 5);
    assert!(map.range.is_none());
}

#[test]
fn exit_identities_on_both_branches() {
    let pb = problem(4.0);
    for &t_s in &[0.0, 0.1, 0.3, 0.5 * (1.0 - 1e-6)] {
        let sol = pb.forward_solve(t_s).unwrap();
        let rep = bernoulli_exit_identities(&sol).unwrap();
        assert!(rep.passes(1e-6), "{t_s}: {rep:?}");
    }
}

#[test]
fn parallel_map_matches_serial_solves() {
    let pb = problem(3.0);
    let map = pb.exit_pressure_map(7).unwrap();
    for pt in &map.points {
        assert_eq!(pt.p_exit.unwrap(), pb.forward_solve(pt.t_s).unwrap().exit_pressure);
    }
}
