use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use epshock_core::gas::bernoulli;
use epshock_core::matcher::ExitPressureMap;
use epshock_core::radial::SolutionProfile;
use epshock_core::Error;
use serde_json::Value;

pub const PROFILE_HEADER: &str = "t,r,rho,u,p,E,M2,kappa,B,branch";
pub const SWEEP_HEADER: &str = "t_s,p_exit,F_s,G_s,min_field_excess,status";

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn profile_csv(profile: &SolutionProfile<f64>) -> String {
    let gas = profile.gas();
    let mut out = String::with_capacity(profile.samples.len() * 200);
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for s in &profile.samples {
        let cols = [
            s.t,
            profile.geom.radius(s.t),
            s.state.rho,
            s.state.u,
            s.state.p,
            s.state.e,
            s.mach2,
            gas.kappa,
            bernoulli(&s.state, &gas),
        ];
        for c in cols {
            out.push_str(&num(c));
            out.push(',');
        }
        out.push_str(profile.branch.label());
        out.push('\n');
    }
    out
}

pub fn sweep_csv(map: &ExitPressureMap<f64>) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for p in &map.points {
        let status = p.error.as_ref().map_or("ok", error_kind);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(p.t_s),
            opt(p.p_exit),
            opt(p.f_s),
            opt(p.g_s),
            opt(p.min_field_excess),
            status
        );
    }
    out
}

/// Short machine-readable tag for an error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid-parameter",
        Error::Domain { .. } => "domain",
        Error::SonicDegeneracy { .. } => "sonic-degeneracy",
        Error::InvalidEntrance { .. } => "invalid-entrance",
        Error::NotSupersonic { .. } => "not-supersonic",
        Error::GuardFired { .. } => "guard-fired",
        Error::StepFailure { .. } => "step-failure",
        Error::DownstreamChoked { .. } => "downstream-choked",
        Error::UpstreamSonic { .. } => "upstream-sonic",
        Error::OutOfSpan { .. } => "out-of-span",
        Error::OutOfRange { .. } => "out-of-range",
        Error::NonMonotoneMap => "non-monotone-map",
        Error::Degenerate(_) => "degenerate",
    }
}

/// Creates `dir` and writes `name` into it, returning the written path.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    write_file(dir, name, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
    }
}
