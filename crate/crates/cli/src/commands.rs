use std::path::Path;
use std::time::Instant;

use epshock_core::matcher::{
    bernoulli_exit_identities, sign_ledger, ExitPressureMap, IdentityReport, MatchOptions, ShockSolution,
};
use epshock_core::radial::{beta1, check_pineq, delta0, Certificates};
use epshock_core::{Error, ShockProblem64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::ProblemConfig;
use crate::output::{error_kind, profile_csv, sweep_csv, write_file, write_json};
use crate::{exit_code_for, Cli, Command, EXIT_INVALID_CONFIG, EXIT_IO, EXIT_OK};

/// Result of one command: exit code plus the report body.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Map<String, Value>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { code: EXIT_OK, report: Map::new(), warnings: Vec::new(), files: Vec::new() }
    }

    fn fail(&mut self, e: &Error) {
        self.code = exit_code_for(e);
        self.report.insert("error".into(), error_json(e));
    }

    fn set(&mut self, key: &str, v: Value) {
        self.report.insert(key.into(), v);
    }

    fn write(&mut self, dir: &Path, name: &str, contents: &str) {
        match write_file(dir, name, contents) {
            Ok(p) => self.files.push(p.display().to_string()),
            Err(e) => {
                self.code = EXIT_IO;
                self.warnings.push(format!("cannot write {name}: {e}"));
            }
        }
    }
}

pub fn error_json(e: &Error) -> Value {
    let mut v = json!({ "kind": error_kind(e), "message": e.to_string() });
    let extra = match e {
        Error::DownstreamChoked { guard, t_fail } => json!({ "guard": guard, "t_fail": t_fail }),
        Error::GuardFired { guard, t } => json!({ "guard": guard, "t_fail": t }),
        Error::SonicDegeneracy { t, mach2 } => json!({ "guard": "sonic", "t_fail": t, "mach2": mach2 }),
        Error::StepFailure { t, h } => json!({ "guard": "step-failure", "t_fail": t, "h": h }),
        Error::UpstreamSonic { reach, t_s } => json!({ "guard": "sonic", "reach": reach, "t_s": t_s }),
        Error::OutOfRange { p_ex, p_min, p_max } => json!({ "p_ex": p_ex, "range": [p_min, p_max] }),
        _ => json!({}),
    };
    if let (Value::Object(a), Value::Object(b)) = (&mut v, extra) {
        a.extend(b);
    }
    v
}

pub fn certificates_json(c: &Certificates<f64>) -> Value {
    json!({
        "delta0": c.delta0,
        "b0": c.b0,
        "beta1": c.beta1,
        "min_field_excess": c.min_field_excess,
        "mach_monotone": c.mach_monotone,
        "mach_worst_violation": c.mach_worst_violation,
        "density_monotone": c.density_monotone,
        "subsonic_margin": c.subsonic_margin,
        "F_s": c.f_s,
        "G_s": c.g_s,
        "certified": c.certified(),
    })
}

fn identities_json(r: &IdentityReport<f64>) -> Value {
    json!({
        "exit_form_residual": r.exit_form_residual,
        "downstream_field_residual": r.downstream_field_residual,
        "upstream_field_residual": r.upstream_field_residual,
        "G_p": r.g_p,
    })
}

fn solution_json(sol: &ShockSolution<f64>) -> Value {
    let adm = sol.admissibility();
    let mut v = json!({
        "t_s": sol.t_s,
        "exit_pressure": sol.exit_pressure,
        "shock_radius": sol.jump.radius,
        "kappa_minus": sol.jump.kappa_minus,
        "kappa_s": sol.jump.kappa_s,
        "mach2_minus": sol.jump.mach2_minus,
        "mach2_plus": sol.jump.mach2_plus,
        "admissible": adm.is_admissible(),
        "jump_max_residual": adm.max_residual(),
        "certificates": certificates_json(&sol.certificates),
        "residuals": {
            "upstream_mass_flux": sol.upstream.mass_flux_residual(),
            "upstream_entropy": sol.upstream.entropy_residual(),
            "downstream_mass_flux": sol.downstream.mass_flux_residual(),
            "downstream_entropy": sol.downstream.entropy_residual(),
        },
    });
    if let Ok(id) = bernoulli_exit_identities(sol) {
        v["identities"] = identities_json(&id);
    }
    if let Some((sens, ps)) = &sol.sensitivity {
        v["sensitivity"] = json!({
            "X0": sens.x_initial,
            "Y0": sens.y_initial,
            "dkappa_dts": sens.dkappa_dts,
            "X_exit": ps.x_exit,
            "X_max": sens.x_max(),
            "dB_dts": ps.db_dts,
            "dB_dts_algebraic": ps.db_dts_algebraic,
            "self_check_residual": ps.self_check_residual(),
            "G_p": ps.g_p,
            "G_kappa": ps.g_kappa,
            "dp_dts": ps.dp_dts,
            "sign_ledger_passes": sign_ledger(sol).map(|l| l.all()),
        });
    }
    v
}

fn map_json(map: &ExitPressureMap<f64>) -> Value {
    let failures: Vec<Value> = map
        .points
        .iter()
        .filter_map(|p| p.error.as_ref().map(|e| json!({ "t_s": p.t_s, "error": error_json(e) })))
        .collect();
    json!({
        "grid": map.points.len(),
        "monotone_decreasing": map.monotone_decreasing,
        "worst_inversion": map.worst_inversion,
        "range": map.range.map(|(a, b)| vec![a, b]),
        "certified": map.certified(),
        "beta1": map.beta1,
        "failures": failures,
    })
}

/// Attaches sensitivities when they can be computed; otherwise warns.
fn with_sensitivity(pb: &ShockProblem64, sol: ShockSolution<f64>, warnings: &mut Vec<String>) -> ShockSolution<f64> {
    match pb.forward_solve_with_sensitivity(sol.t_s) {
        Ok(s) => s,
        Err(e) => {
            warnings.push(format!("sensitivity not available: {e}"));
            sol
        }
    }
}

fn write_profiles(out: &mut Outcome, dir: &Path, sol: &ShockSolution<f64>) {
    out.write(dir, "upstream.csv", &profile_csv(&sol.upstream));
    out.write(dir, "downstream.csv", &profile_csv(&sol.downstream));
}

pub fn forward(cfg: &ProblemConfig, t_s: f64, dir: &Path) -> Outcome {
    let mut out = Outcome::new();
    out.set("t_s", json!(t_s));
    let pb = match cfg.problem() {
        Ok(pb) => pb,
        Err(e) => {
            out.fail(&e);
            return out;
        }
    };
    match pb.forward_solve(t_s) {
        Ok(sol) => {
            let sol = with_sensitivity(&pb, sol, &mut out.warnings);
            write_profiles(&mut out, dir, &sol);
            out.set("solution", solution_json(&sol));
        }
        Err(e) => {
            if let Ok((up, _)) = pb.shock_at(t_s) {
                out.write(dir, "upstream.csv", &profile_csv(&up));
            }
            out.fail(&e);
        }
    }
    out
}

pub fn solve(cfg: &ProblemConfig, force: bool, dir: &Path) -> Outcome {
    let mut out = Outcome::new();
    let Some(p_ex) = cfg.p_ex else {
        out.code = EXIT_INVALID_CONFIG;
        out.set("error", json!({ "kind": "invalid-config", "message": "solve needs 'p_ex' in the config" }));
        return out;
    };
    out.set("p_ex", json!(p_ex));
    let pb = match cfg.problem() {
        Ok(pb) => pb,
        Err(e) => {
            out.fail(&e);
            return out;
        }
    };
    let opts = MatchOptions { map_grid: cfg.grid, force: force || cfg.force, with_sensitivity: false };
    out.set("force", json!(opts.force));
    match pb.match_exit_pressure(p_ex, cfg.tol_ts, opts) {
        Ok(m) => {
            out.warnings.extend(m.warnings.iter().cloned());
            let sol = with_sensitivity(&pb, m.solution, &mut out.warnings);
            write_profiles(&mut out, dir, &sol);
            out.set("iterations", json!(m.iterations));
            out.set("map", map_json(&m.map));
            out.set("solution", solution_json(&sol));
        }
        Err(e) => {
            if matches!(e, Error::NonMonotoneMap) {
                if let Ok(map) = pb.exit_pressure_map(cfg.grid) {
                    out.set("map", map_json(&map));
                }
            }
            out.fail(&e);
        }
    }
    out
}

pub fn sweep(cfg: &ProblemConfig, grid: usize, dir: &Path) -> Outcome {
    let mut out = Outcome::new();
    let pb = match cfg.problem() {
        Ok(pb) => pb,
        Err(e) => {
            out.fail(&e);
            return out;
        }
    };
    match pb.exit_pressure_map(grid) {
        Ok(map) => {
            out.write(dir, "sweep.csv", &sweep_csv(&map));
            out.set("map", map_json(&map));
        }
        Err(e) => out.fail(&e),
    }
    out
}

pub fn diagnose(cfg: &ProblemConfig) -> Outcome {
    let mut out = Outcome::new();
    let pb = match cfg.problem() {
        Ok(pb) => pb,
        Err(e) => {
            out.fail(&e);
            return out;
        }
    };
    let geom = pb.geom;
    let up = pb.upstream();
    let b0 = pb.b.bound();
    let (mach_monotone, mach_worst) = up.mach_increasing();
    let min_excess = up.field_excess().into_iter().fold(f64::INFINITY, f64::min);
    out.set(
        "geometry",
        json!({
            "delta0": delta0(pb.gas.gamma, &geom),
            "b0": b0,
            "beta1": beta1(b0, &geom),
            "span": geom.span(),
        }),
    );
    out.set(
        "upstream",
        json!({
            "reach": pb.upstream_reach(),
            "reaches_exit": up.reached_end(),
            "min_field_excess": min_excess,
            "mach_monotone": mach_monotone,
            "mach_worst_violation": mach_worst,
            "mass_flux_residual": up.mass_flux_residual(),
            "entropy_residual": up.entropy_residual(),
        }),
    );

    match pb.exit_pressure_map(cfg.grid) {
        Ok(map) => {
            let rows: Vec<Value> = map
                .points
                .iter()
                .map(|p| {
                    json!({
                        "t_s": p.t_s,
                        "F_s": p.f_s,
                        "G_s": p.g_s,
                        "F_s_certified": p.f_s.map(|f| f >= map.beta1),
                        "G_s_certified": p.g_s.map(|g| g >= map.beta1),
                        "min_field_excess": p.min_field_excess,
                        "p_exit": p.p_exit,
                        "status": p.error.as_ref().map_or("ok", error_kind),
                    })
                })
                .collect();
            out.set("shock_positions", Value::Array(rows));
            out.set("map", map_json(&map));
        }
        Err(e) => out.set("map", json!({ "error": error_json(&e) })),
    }

    let gamma = pb.gas.gamma;
    let pineq = if gamma >= 2.0 {
        match check_pineq(gamma, 1000) {
            Ok(r) => json!({
                "applicable": true,
                "holds": r.holds,
                "violating_xi": r.violating_xi,
                "max_value": r.max_value,
                "maximizer_value": r.maximizer_value,
            }),
            Err(e) => json!({ "applicable": true, "error": error_json(&e) }),
        }
    } else {
        json!({ "applicable": false })
    };
    out.set("pineq", pineq);
    out.set("sensitivity_check", sensitivity_check(cfg, &pb));
    out
}

/// Variational sensitivities against central differences at a seeded
/// random shock position.
fn sensitivity_check(cfg: &ProblemConfig, pb: &ShockProblem64) -> Value {
    let span = pb.span();
    let h = cfg.fd_step * span;
    let usable = pb.upstream_reach().min(span);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let t_s = usable * rng.gen_range(0.05..0.95);
    if !(t_s - h > 0.0 && t_s + h < usable) {
        return json!({ "t_s": t_s, "error": "supersonic reach too short for a central difference" });
    }
    let sol = match pb.forward_solve_with_sensitivity(t_s) {
        Ok(s) => s,
        Err(e) => return json!({ "t_s": t_s, "error": error_json(&e) }),
    };
    let fd = match pb.finite_difference_sensitivity(t_s, h) {
        Ok(fd) => fd,
        Err(e) => return json!({ "t_s": t_s, "error": error_json(&e) }),
    };
    let (sens, ps) = sol.sensitivity.as_ref().expect("sensitivity requested");
    let x = sens.last().x;
    let ledger = sign_ledger(&sol).expect("sensitivity requested");
    json!({
        "t_s": t_s,
        "seed": cfg.seed,
        "h": h,
        "X_exit": x,
        "X_exit_fd": fd.drho_exit,
        "X_exit_rel_err": (x - fd.drho_exit).abs() / fd.drho_exit.abs(),
        "dp_dts": ps.dp_dts,
        "dp_dts_fd": fd.dp_exit,
        "dp_dts_rel_err": (ps.dp_dts - fd.dp_exit).abs() / fd.dp_exit.abs(),
        "dB_self_check_residual": ps.self_check_residual(),
        "sign_ledger": {
            "dkappa_positive": ledger.dkappa_positive,
            "X0_negative": ledger.x0_negative,
            "Y0_negative": ledger.y0_negative,
            "X_negative": ledger.x_negative,
            "dB_negative": ledger.db_negative,
            "G_p_positive": ledger.g_p_positive,
            "dp_negative": ledger.dp_negative,
            "all": ledger.all(),
        },
    })
}

/// Loads the config, runs the command, writes `report.json` and returns the
/// process exit code.
pub fn run(cli: &Cli) -> i32 {
    let started = Instant::now();
    let common = cli.command.common();
    let dir = common.out.as_path();
    let mut report = Map::new();
    report.insert("command".into(), json!(cli.command.name()));

    let mut outcome = match ProblemConfig::load(&common.config) {
        Err(e) => {
            let mut o = Outcome::new();
            o.code = EXIT_INVALID_CONFIG;
            o.set("error", json!({ "kind": "invalid-config", "message": e.to_string() }));
            o
        }
        Ok(cfg) => {
            report.insert("config".into(), Value::Object(cfg.to_map()));
            let mut o = match &cli.command {
                Command::Forward { ts, .. } => forward(&cfg, *ts, dir),
                Command::Solve { common } => solve(&cfg, common.force, dir),
                Command::Sweep { grid, .. } => sweep(&cfg, *grid, dir),
                Command::Diagnose { .. } => diagnose(&cfg),
            };
            if let Some(w) = cfg.background().ok().and_then(|b| b.smoothness_warning()) {
                o.warnings.insert(0, w);
            }
            o
        }
    };

    if let Some(Value::Object(err)) = outcome.report.get("error") {
        eprintln!("epshock {}: {}", cli.command.name(), err.get("message").and_then(Value::as_str).unwrap_or(""));
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    report.insert("status".into(), json!(if outcome.code == EXIT_OK { "ok" } else { "error" }));
    report.insert("exit_code".into(), json!(outcome.code));
    report.extend(std::mem::take(&mut outcome.report));
    report.insert("warnings".into(), json!(outcome.warnings));
    report.insert("files".into(), json!(outcome.files));
    report.insert("wall_time_s".into(), json!(started.elapsed().as_secs_f64()));
    match write_json(dir, "report.json", &Value::Object(report)) {
        Ok(_) => outcome.code,
        Err(e) => {
            eprintln!("cannot write report: {e}");
            if outcome.code == EXIT_OK {
                EXIT_IO
            } else {
                outcome.code
            }
        }
    }
}
