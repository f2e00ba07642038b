//! Key=value configuration text with [section] headers, and the
//! serialization of operator and problem descriptions used by the CLI.

use std::collections::BTreeMap;

use crate::barriers::Domain;
use crate::operators::{CoeffPreset, Family, LowerOrderSpec, OperatorSpec};
use crate::scalar::Real;
use crate::solver::{BoundaryData, Forcing, Problem, Region};
use crate::{Error, Result};

pub type Section = BTreeMap<String, String>;
pub type Config = BTreeMap<String, Section>;

/// Parses `[section]` headers and `key=value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Config> {
    let mut out: Config = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section", lineno + 1)))?;
            current = name.trim().to_string();
            out.entry(current.clone()).or_default();
        } else if let Some((k, v)) = line.split_once('=') {
            out.entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        } else {
            return Err(Error::Config(format!(
                "line {}: expected key=value or [section], got '{line}'",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

pub fn get<'a>(cfg: &'a Config, section: &str, key: &str) -> Result<&'a str> {
    cfg.get(section)
        .and_then(|s| s.get(key))
        .map(|s| s.as_str())
        .ok_or_else(|| Error::Config(format!("missing [{section}] {key}")))
}

pub fn get_or<'a>(cfg: &'a Config, section: &str, key: &str, default: &'a str) -> &'a str {
    cfg.get(section)
        .and_then(|s| s.get(key))
        .map(|s| s.as_str())
        .unwrap_or(default)
}

pub fn parse_real<R: Real>(s: &str) -> Result<R> {
    s.parse::<f64>()
        .map(R::c)
        .map_err(|_| Error::Config(format!("not a number: '{s}'")))
}

pub fn parse_vec<R: Real>(s: &str) -> Result<Vec<R>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_real(t.trim())).collect()
}

/// Operator description from an [operator] section:
/// family, alpha (or p for the p-Laplacian families), lambda, Lambda,
/// coeff preset, delta list.
pub fn operator_from<R: Real>(cfg: &Config) -> Result<OperatorSpec<R>> {
    let family = Family::parse(get(cfg, "operator", "family")?)?;
    let alpha = match cfg.get("operator").and_then(|s| s.get("alpha")) {
        Some(a) => parse_real::<R>(a)?,
        None => {
            let p: R = parse_real(get(cfg, "operator", "p")?)?;
            p - R::c(2.0)
        }
    };
    let lam_min = parse_real(get_or(cfg, "operator", "lambda", "1"))?;
    let lam_max = parse_real(get_or(cfg, "operator", "Lambda", "1"))?;
    let coeff = CoeffPreset::parse(get_or(cfg, "operator", "coeff", "const"))?;
    let delta = parse_vec(get_or(cfg, "operator", "delta", ""))?;
    OperatorSpec::new(family, alpha, lam_min, lam_max).map(|s| s.with_coeff(coeff).with_delta(delta))
}

pub fn operator_to_kv<R: Real>(spec: &OperatorSpec<R>) -> String {
    let delta = spec
        .delta
        .iter()
        .map(|d| format!("{d}"))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "[operator]\nfamily={}\nalpha={}\nlambda={}\nLambda={}\ncoeff={}\ndelta={}\n",
        spec.family.name(),
        spec.alpha,
        spec.lam_min,
        spec.lam_max,
        spec.coeff.name(),
        delta
    )
}

/// Lower-order description from a [lower_order] section (optional).
pub fn lower_order_from<R: Real>(cfg: &Config) -> Result<LowerOrderSpec<R>> {
    match cfg.get("lower_order") {
        None => Ok(LowerOrderSpec::Zero),
        Some(sec) => match sec.get("form").map(|s| s.as_str()).unwrap_or("zero") {
            "zero" => Ok(LowerOrderSpec::Zero),
            "drift" => {
                let c_h = parse_real(sec.get("c_h").map(|s| s.as_str()).unwrap_or("1"))?;
                Ok(LowerOrderSpec::Drift { c_h })
            }
            other => Err(Error::Config(format!("unknown lower order form '{other}'"))),
        },
    }
}

/// Region from a [domain] section: kind=ball|annulus|box.
pub fn region_from<R: Real>(cfg: &Config) -> Result<Region<R>> {
    let kind = get(cfg, "domain", "kind")?;
    match kind {
        "ball" => {
            let center = parse_vec(get(cfg, "domain", "center")?)?;
            let radius = parse_real(get(cfg, "domain", "radius")?)?;
            Ok(Region::Dom(Domain::ball(center, radius)?))
        }
        "annulus" => {
            let center = parse_vec(get(cfg, "domain", "center")?)?;
            let r1 = parse_real(get(cfg, "domain", "r1")?)?;
            let r2 = parse_real(get(cfg, "domain", "r2")?)?;
            Ok(Region::Dom(Domain::annulus(center, r1, r2)?))
        }
        "box" => {
            let lo = parse_vec(get(cfg, "domain", "lo")?)?;
            let hi = parse_vec(get(cfg, "domain", "hi")?)?;
            if lo.len() != hi.len() || lo.is_empty() {
                return Err(Error::Config("box needs matching lo and hi lists".into()));
            }
            Ok(Region::Box { lo, hi })
        }
        other => Err(Error::Config(format!("unknown domain kind '{other}'"))),
    }
}

/// A full problem from [operator], [lower_order], [domain], [grid],
/// [problem] sections.
pub fn problem_from<R: Real>(cfg: &Config) -> Result<Problem<R>> {
    let op = operator_from(cfg)?;
    let region = region_from(cfg)?;
    let h = parse_real(get(cfg, "grid", "h")?)?;
    let mut prob = Problem::new(op, region, h);
    prob.lower = lower_order_from(cfg)?;
    prob.forcing = Forcing::parse(get_or(cfg, "problem", "forcing", "zero"))?;
    prob.boundary = BoundaryData::parse(get_or(cfg, "problem", "boundary", "zero"))?;
    if let Some(t) = cfg.get("problem").and_then(|s| s.get("tol")) {
        prob.tol = Some(parse_real(t)?);
    }
    if let Some(m) = cfg.get("problem").and_then(|s| s.get("max_iter")) {
        prob.max_iter = m
            .parse()
            .map_err(|_| Error::Config(format!("bad max_iter '{m}'")))?;
    }
    Ok(prob)
}
