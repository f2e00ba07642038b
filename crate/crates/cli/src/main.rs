//! Batch front end: audits, scans, certificates, barrier checks, solves and
//! regularity studies driven by flags or config files, with CSV reports and
//! machine-readable exit codes (0 = all checks passed, 1 = a mathematical
//! check failed, 2 = usage or config error).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use degenlab::barriers::{barrier_audit, choose_decay, choose_k, choose_m, smp_mu_pair, Domain};
use degenlab::config;
use degenlab::operators::{
    audit_doubling_bound, audit_duality, audit_ellipticity, audit_gradient_swap,
    audit_homogeneity, audit_x_continuity, power_diff_margin, CoeffPreset, Family,
    LowerOrderSpec, OperatorSpec,
};
use degenlab::proofkit::{certificate, pinch_eps_for, pinch_verify, CertInputs, RadialProfile};
use degenlab::regularity::{doubling_gap, refinement_scan};
use degenlab::rng::SampleRng;
use degenlab::solver::{solve, Problem};
use degenlab::Certificate64;

const USAGE: &str = "\
degenlab <command> [flags]

commands:
  audit            randomized structural audits of one operator family
  prop4-scan       pinched-eigenvalue scan of the weighted corrected hessian
  certificate      build and re-verify a regularity certificate
  barrier-audit    boundary barrier supersolution / subsolution audit
  smp-audit        annulus barrier audit for the strong maximum principle
  solve            run a Dirichlet solve from a config file
  regularity-scan  refinement study of interior seminorms
  doubling-check   doubled-variable functional on a solved field
  help             print this text

common flags: --config PATH, --seed U64, --out DIR, plus per-command
overrides (see the README). Config files are key=value lines under
[section] headers.

exit codes: 0 all checks passed, 1 a mathematical check failed,
2 usage or config error.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            ExitCode::from(2)
        }
    }
}

type CliResult = std::result::Result<ExitCode, String>;

struct Flags {
    map: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String], allowed: &[&str]) -> std::result::Result<Self, String> {
        let mut map = BTreeMap::new();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let key = a
                .strip_prefix("--")
                .ok_or_else(|| format!("unexpected argument '{a}'"))?;
            if !allowed.contains(&key) {
                return Err(format!("unknown flag '--{key}'"));
            }
            let val = it.next().ok_or_else(|| format!("flag '--{key}' needs a value"))?;
            map.insert(key.to_string(), val.clone());
        }
        Ok(Flags { map })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> std::result::Result<f64, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| format!("bad number for --{key}: '{v}'")),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> std::result::Result<u64, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| format!("bad integer for --{key}: '{v}'")),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> std::result::Result<usize, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| format!("bad integer for --{key}: '{v}'")),
        }
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("."))
    }
}

fn run(args: &[String]) -> CliResult {
    let Some(cmd) = args.first() else {
        return Err("missing command".into());
    };
    let rest = &args[1..];
    match cmd.as_str() {
        "audit" => cmd_audit(rest),
        "prop4-scan" => cmd_pinch_scan(rest),
        "certificate" => cmd_certificate(rest),
        "barrier-audit" => cmd_barrier_audit(rest),
        "smp-audit" => cmd_smp_audit(rest),
        "solve" => cmd_solve(rest),
        "regularity-scan" => cmd_regularity_scan(rest),
        "doubling-check" => cmd_doubling_check(rest),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(ExitCode::SUCCESS)
        }
        other => Err(format!("unknown command '{other}'")),
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> std::result::Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn load_config(flags: &Flags) -> std::result::Result<Option<config::Config>, String> {
    match flags.get("config") {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("reading config '{path}': {e}"))?;
            config::parse(&text).map(Some).map_err(|e| e.to_string())
        }
    }
}

fn exit_for(all_pass: bool) -> ExitCode {
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// One CSV report row: a named check with its measured worst value and the
/// threshold it must stay below.
struct Row {
    check: &'static str,
    detail: String,
    worst: f64,
    threshold: f64,
    pass: bool,
}

fn rows_to_csv(rows: &[Row]) -> String {
    let mut s = String::from("check,detail,worst,threshold,pass\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.check, r.detail, r.worst, r.threshold, r.pass
        ));
    }
    s
}

fn operator_from_flags(
    flags: &Flags,
    cfg: &Option<config::Config>,
) -> std::result::Result<OperatorSpec<f64>, String> {
    if let Some(cfg) = cfg {
        return config::operator_from(cfg).map_err(|e| e.to_string());
    }
    let family = Family::parse(flags.get("op").unwrap_or("pucci+")).map_err(|e| e.to_string())?;
    let alpha = flags.f64_or("alpha", 1.0)?;
    let lam = flags.f64_or("lambda", 1.0)?;
    let lam_up = flags.f64_or("Lambda", 2.0)?;
    let coeff =
        CoeffPreset::parse(flags.get("coeff").unwrap_or("const")).map_err(|e| e.to_string())?;
    let delta =
        config::parse_vec::<f64>(flags.get("delta").unwrap_or("")).map_err(|e| e.to_string())?;
    OperatorSpec::new(family, alpha, lam, lam_up)
        .map(|s| s.with_coeff(coeff).with_delta(delta))
        .map_err(|e| e.to_string())
}

fn cmd_audit(args: &[String]) -> CliResult {
    let flags = Flags::parse(
        args,
        &["config", "seed", "out", "op", "alpha", "lambda", "Lambda", "coeff", "delta", "n", "samples"],
    )?;
    let cfg = load_config(&flags)?;
    let spec = operator_from_flags(&flags, &cfg)?;
    let n = flags.usize_or("n", 2)?;
    let samples = flags.u64_or("samples", 10_000)?;
    let seed = flags.u64_or("seed", 0)?;
    let tolerance = 1e-9;
    let mut rows = Vec::new();
    let detail = format!(
        "{} N={} alpha={} lambda={} Lambda={} coeff={}",
        spec.family.name(),
        n,
        spec.alpha,
        spec.lam_min,
        spec.lam_max,
        spec.coeff.name()
    );

    if let Ok(worst) = audit_ellipticity(&spec, n, samples, seed) {
        rows.push(Row {
            check: "ellipticity_envelope",
            detail: detail.clone(),
            worst,
            threshold: tolerance,
            pass: worst <= tolerance,
        });
    }
    let xc = audit_x_continuity(&spec, n, samples, seed).map_err(|e| e.to_string())?;
    let xcap = spec.x_continuity_cap(n) * (1.0 + tolerance) + tolerance;
    rows.push(Row {
        check: "x_continuity",
        detail: detail.clone(),
        worst: xc,
        threshold: xcap,
        pass: xc <= xcap,
    });
    if let Ok(rep) = audit_doubling_bound(&spec, n, &[1.0, 10.0, 100.0], samples / 3 + 1, seed) {
        rows.push(Row {
            check: "doubling_bound",
            detail: detail.clone(),
            worst: rep.worst_margin,
            threshold: tolerance,
            pass: rep.worst_margin <= tolerance,
        });
    }
    let gs = audit_gradient_swap(&spec, n, samples, seed).map_err(|e| e.to_string())?;
    rows.push(Row {
        check: "gradient_swap_diag",
        detail: detail.clone(),
        worst: gs.worst_componentwise,
        threshold: gs.cap * (1.0 + tolerance),
        pass: gs.worst_componentwise <= gs.cap * (1.0 + tolerance),
    });
    rows.push(Row {
        check: "gradient_swap_nuclear",
        detail: detail.clone(),
        worst: gs.worst_nuclear_violation,
        threshold: tolerance,
        pass: gs.worst_nuclear_violation <= tolerance,
    });
    if let Ok(worst) = audit_homogeneity(&spec, n, samples, seed) {
        rows.push(Row {
            check: "homogeneity",
            detail: detail.clone(),
            worst,
            threshold: tolerance,
            pass: worst <= tolerance,
        });
    }
    if matches!(spec.family, Family::PucciPlus | Family::PucciMinus) {
        let worst = audit_duality(spec.alpha, spec.lam_min, spec.lam_max, n, samples, seed)
            .map_err(|e| e.to_string())?;
        rows.push(Row {
            check: "duality",
            detail: detail.clone(),
            worst,
            threshold: tolerance,
            pass: worst <= tolerance,
        });
    }
    // universal power-difference inequality sweep
    let mut min_margin = f64::INFINITY;
    for k in 0..samples {
        let mut rng = SampleRng::for_sample(seed, 7, k);
        let dim = 1 + (k % 3) as usize;
        let z = rng.vector(dim, -3.0, 3.0);
        let t = rng.vector(dim, -3.0, 3.0);
        min_margin = min_margin.min(power_diff_margin(&z, &t, spec.alpha));
    }
    rows.push(Row {
        check: "power_diff",
        detail,
        worst: -min_margin,
        threshold: 1e-12,
        pass: min_margin >= -1e-12,
    });

    let all_pass = rows.iter().all(|r| r.pass);
    write_file(&flags.out_dir(), "audit.csv", rows_to_csv(&rows).as_bytes())?;
    for r in &rows {
        println!(
            "{}: worst {:.3e} (threshold {:.3e}) {}",
            r.check,
            r.worst,
            r.threshold,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(exit_for(all_pass))
}

fn cmd_pinch_scan(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["seed", "out", "alpha", "gamma", "points", "n"])?;
    let alpha = flags.f64_or("alpha", 1.0)?;
    let gamma = flags.f64_or("gamma", 0.5)?;
    let points = flags.u64_or("points", 1000)?;
    let n = flags.usize_or("n", 2)?;
    let seed = flags.u64_or("seed", 0)?;
    let profile = RadialProfile::holder(gamma).map_err(|e| e.to_string())?;
    let eps = if alpha > 2.0 {
        Some(pinch_eps_for(&profile, n, 0.5).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let mut csv = String::from("check,point,norm_x,mu1,bound,alt_bound,ok\n");
    let mut all_ok = true;
    for k in 0..points {
        let mut rng = SampleRng::for_sample(seed, 11, k);
        let dir: Vec<f64> = rng.direction(n);
        let s = rng.uniform((1e-4f64).ln(), (0.5f64).ln()).exp();
        let x: Vec<f64> = dir.iter().map(|d| d * s).collect();
        let rep = pinch_verify(&profile, &x, alpha, eps).map_err(|e| e.to_string())?;
        all_ok &= rep.ok;
        csv.push_str(&format!(
            "pinch_bound,{k},{s},{},{},{},{}\n",
            rep.mu1, rep.bound, rep.alt_bound, rep.ok
        ));
    }
    write_file(&flags.out_dir(), "pinch_scan.csv", csv.as_bytes())?;
    println!("pinch scan: {points} points, alpha={alpha}, gamma={gamma}, all ok: {all_ok}");
    Ok(exit_for(all_ok))
}

fn cmd_certificate(args: &[String]) -> CliResult {
    let flags = Flags::parse(
        args,
        &["seed", "out", "alpha", "lambda", "Lambda", "n", "gammaF", "c-gammaF", "cF", "ch", "r", "sup-u", "sup-v"],
    )?;
    let inp = CertInputs {
        alpha: flags.f64_or("alpha", 1.0)?,
        lam_min: flags.f64_or("lambda", 1.0)?,
        lam_max: flags.f64_or("Lambda", 2.0)?,
        n: flags.usize_or("n", 2)?,
        gamma_f: flags.f64_or("gammaF", 1.0)?,
        c_gamma_f: flags.f64_or("c-gammaF", 1.0)?,
        c_f: flags.f64_or("cF", 1.0)?,
        c_h: flags.f64_or("ch", 0.0)?,
        r: flags.f64_or("r", 0.5)?,
        sup_u: flags.f64_or("sup-u", 1.0)?,
        sup_v: flags.f64_or("sup-v", 1.0)?,
    };
    match certificate(inp) {
        Err(e) => {
            println!("certificate: infeasible ({e})");
            Ok(ExitCode::from(1))
        }
        Ok(cert) => {
            let ok = cert.verify().is_ok();
            let mut csv = String::from("check,");
            csv.push_str(Certificate64::csv_header());
            csv.push('\n');
            csv.push_str(&format!("certificate_selfcheck,{}\n", cert.csv_row()));
            write_file(&flags.out_dir(), "certificate.csv", csv.as_bytes())?;
            write_file(&flags.out_dir(), "certificate.kv", cert.to_kv().as_bytes())?;
            println!(
                "certificate: regime {}, delta {:.3e}, M {:.3e}, verified {}",
                cert.regime.name(),
                cert.delta,
                cert.m_weight,
                ok
            );
            Ok(exit_for(ok))
        }
    }
}

fn cmd_barrier_audit(args: &[String]) -> CliResult {
    let flags = Flags::parse(
        args,
        &["seed", "out", "alpha", "lambda", "Lambda", "n", "ch", "f-inf", "samples", "m", "radius"],
    )?;
    let alpha = flags.f64_or("alpha", 1.0)?;
    let lam = flags.f64_or("lambda", 1.0)?;
    let lam_up = flags.f64_or("Lambda", 2.0)?;
    let n = flags.usize_or("n", 2)?;
    let c_h = flags.f64_or("ch", 0.0)?;
    let f_inf = flags.f64_or("f-inf", 1.0)?;
    let samples = flags.u64_or("samples", 10_000)?;
    let seed = flags.u64_or("seed", 0)?;
    let radius = flags.f64_or("radius", 1.0)?;
    let dom = Domain::ball(vec![0.0; n], radius).map_err(|e| e.to_string())?;
    let op = OperatorSpec::new(Family::PucciPlus, alpha, lam, lam_up).map_err(|e| e.to_string())?;
    let lower = if c_h == 0.0 {
        LowerOrderSpec::Zero
    } else {
        LowerOrderSpec::Drift { c_h }
    };
    let (k, _) =
        choose_k(alpha, lam, lam_up, n, dom.c1(), c_h, dom.diam()).map_err(|e| e.to_string())?;
    let m = match flags.get("m") {
        Some(v) => v.parse().map_err(|_| format!("bad number for --m: '{v}'"))?,
        None => choose_m(alpha, lam, n, k, c_h, f_inf, dom.max_dist()),
    };
    let rep =
        barrier_audit(&op, &lower, &dom, m, k, f_inf, samples, seed).map_err(|e| e.to_string())?;
    let mut csv = String::new();
    for i in 0..n {
        csv.push_str(&format!("x{i},"));
    }
    csv.push_str("d,F_value,h_value,bound_value,margin\n");
    for row in &rep.rows {
        for xi in &row.x {
            csv.push_str(&format!("{xi},"));
        }
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.d, row.f_value, row.h_value, row.bound_value, row.margin
        ));
    }
    write_file(&flags.out_dir(), "barrier_audit.csv", csv.as_bytes())?;
    let rows = vec![
        Row {
            check: "barrier_super",
            detail: format!("k={k} M={m}"),
            worst: rep.worst_margin_super,
            threshold: 0.0,
            pass: rep.worst_margin_super <= 0.0,
        },
        Row {
            check: "barrier_sub",
            detail: format!("k={k} M={m}"),
            worst: rep.worst_margin_sub,
            threshold: 0.0,
            pass: rep.worst_margin_sub <= 0.0,
        },
        Row {
            check: "barrier_chain",
            detail: format!("k={k} M={m}"),
            worst: rep.worst_chain_violation,
            threshold: 1e-9,
            pass: rep.worst_chain_violation <= 1e-9,
        },
    ];
    write_file(&flags.out_dir(), "barrier_summary.csv", rows_to_csv(&rows).as_bytes())?;
    let all = rows.iter().all(|r| r.pass);
    for r in &rows {
        println!("{}: worst {:.3e} {}", r.check, r.worst, if r.pass { "pass" } else { "FAIL" });
    }
    Ok(exit_for(all))
}

fn cmd_smp_audit(args: &[String]) -> CliResult {
    let flags =
        Flags::parse(args, &["seed", "out", "alpha", "lambda", "Lambda", "n", "radius", "samples"])?;
    let alpha = flags.f64_or("alpha", 1.0)?;
    let lam = flags.f64_or("lambda", 1.0)?;
    let lam_up = flags.f64_or("Lambda", 2.0)?;
    let n = flags.usize_or("n", 2)?;
    let radius = flags.f64_or("radius", 1.0)?;
    let samples = flags.u64_or("samples", 1000)?;
    let seed = flags.u64_or("seed", 0)?;
    let c = choose_decay(lam, lam_up, alpha, n, radius, seed).map_err(|e| e.to_string())?;
    let mut csv = String::from("check,r,mu_plus,mu_minus,combination,ok\n");
    let mut all_ok = true;
    let mut min_comb = f64::INFINITY;
    for k in 0..samples {
        let mut rng = SampleRng::for_sample(seed, 12, k);
        let dir: Vec<f64> = rng.direction(n);
        let r = rng.uniform(radius / 2.0, 1.5 * radius);
        let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let (mp, mm) = smp_mu_pair(&x, c, alpha).map_err(|e| e.to_string())?;
        let comb = lam * mp + lam_up * mm;
        let ok = comb > 0.0;
        all_ok &= ok;
        min_comb = min_comb.min(comb);
        csv.push_str(&format!("smp_combination,{r},{mp},{mm},{comb},{ok}\n"));
    }
    write_file(&flags.out_dir(), "smp_audit.csv", csv.as_bytes())?;
    println!("smp audit: c={c}, min combination {min_comb:.3e}, all ok: {all_ok}");
    Ok(exit_for(all_ok))
}

fn cmd_solve(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["config", "seed", "out"])?;
    let Some(cfg) = load_config(&flags)? else {
        return Err("solve needs --config".into());
    };
    let prob: Problem<f64> = config::problem_from(&cfg).map_err(|e| e.to_string())?;
    match solve(&prob) {
        Err(e) => {
            println!("solve: {e}");
            Ok(ExitCode::from(1))
        }
        Ok((u, history)) => {
            let out = flags.out_dir();
            write_file(&out, "field.csv", u.to_csv().as_bytes())?;
            write_file(&out, "field.bin", &u.to_binary())?;
            let mut resid = String::from("sweep,residual\n");
            for (i, r) in history.iter().enumerate() {
                resid.push_str(&format!("{i},{r}\n"));
            }
            write_file(&out, "residuals.csv", resid.as_bytes())?;
            println!(
                "solve: converged in {} sweeps, sup norm {:.6}, final residual {:.3e}",
                history.len(),
                u.sup_norm(),
                history.last().copied().unwrap_or(0.0)
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_regularity_scan(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["config", "seed", "out", "levels", "gamma", "margin"])?;
    let Some(cfg) = load_config(&flags)? else {
        return Err("regularity-scan needs --config".into());
    };
    let prob: Problem<f64> = config::problem_from(&cfg).map_err(|e| e.to_string())?;
    let levels = config::parse_vec::<f64>(flags.get("levels").unwrap_or("0.0625,0.03125,0.015625"))
        .map_err(|e| e.to_string())?;
    let gamma = flags.f64_or("gamma", 1.0)?;
    let margin = flags.f64_or("margin", 0.2)?;
    let scan = refinement_scan(&prob, &levels, gamma, margin).map_err(|e| e.to_string())?;
    let n = prob.region.dim();
    let mut csv = String::from("check,level,hgrid,gamma,seminorm,");
    for i in 0..n {
        csv.push_str(&format!("argmax_x{i},"));
    }
    for i in 0..n {
        csv.push_str(&format!("argmax_y{i},"));
    }
    csv.push_str("bounded_flag\n");
    for (i, row) in scan.rows.iter().enumerate() {
        csv.push_str(&format!("seminorm_bounded,{i},{},{gamma},{},", row.h, row.seminorm));
        for v in &row.argmax_x {
            csv.push_str(&format!("{v},"));
        }
        for v in &row.argmax_y {
            csv.push_str(&format!("{v},"));
        }
        csv.push_str(&format!("{}\n", scan.bounded));
    }
    write_file(&flags.out_dir(), "regularity_scan.csv", csv.as_bytes())?;
    println!(
        "regularity scan: seminorms {:?}, bounded: {}",
        scan.rows.iter().map(|r| r.seminorm).collect::<Vec<_>>(),
        scan.bounded
    );
    Ok(exit_for(scan.bounded))
}

fn cmd_doubling_check(args: &[String]) -> CliResult {
    let flags = Flags::parse(args, &["config", "seed", "out", "r"])?;
    let Some(cfg) = load_config(&flags)? else {
        return Err("doubling-check needs --config".into());
    };
    let prob: Problem<f64> = config::problem_from(&cfg).map_err(|e| e.to_string())?;
    let (u, _) = solve(&prob).map_err(|e| e.to_string())?;
    let sup = u.sup_norm();
    let n = prob.region.dim();
    let (lam_lo, lam_hi) = prob.op.effective_ellipticity().map_err(|e| e.to_string())?;
    let inp = CertInputs {
        alpha: prob.op.alpha,
        lam_min: lam_lo,
        lam_max: lam_hi,
        n,
        gamma_f: 1.0,
        c_gamma_f: prob.op.x_continuity_cap(n),
        c_f: prob.op.gradient_swap_cap(),
        c_h: prob.lower.c_h(),
        r: flags.f64_or("r", 0.5)?,
        sup_u: sup,
        sup_v: sup,
    };
    let cert = certificate(inp).map_err(|e| e.to_string())?;
    let profile = cert.profile().map_err(|e| e.to_string())?;
    let x0 = vec![0.0; n];
    let gap = doubling_gap(&u, &u, cert.m_weight, &profile, &x0).map_err(|e| e.to_string())?;
    let budget = 2.0 * prob.h * cert.m_weight;
    let pass = gap <= budget;
    let rows = vec![Row {
        check: "doubling_gap",
        detail: format!("M={} h={}", cert.m_weight, prob.h),
        worst: gap,
        threshold: budget,
        pass,
    }];
    write_file(&flags.out_dir(), "doubling_check.csv", rows_to_csv(&rows).as_bytes())?;
    println!("doubling check: gap {gap:.3e} within budget {budget:.3e}: {pass}");
    Ok(exit_for(pass))
}
