use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use shoplab_core::fixtures::example_one;
use shoplab_core::io::{generate, read_text, write_text, AlphaFile, CandidateFile, CtrProfile, GeneratorSpec, InstanceFile};
use shoplab_core::mechanisms::{outcome, payment_rows};
use shoplab_core::poa::{gen_tightness_instance, poa_report, PoaReport};
use shoplab_core::solver::{solve, SolverConfig, SolverOutcome, SolverStatus};
use shoplab_core::verifier::{find_equilibria_bruteforce, verify, EquilibriumCandidate, VerificationReport};
use shoplab_core::{
    allocate, induce_bids, AuctionInstance, Error, Mechanism, MultiplierVector, Rational, Result, Scalar, TieRule,
};

use crate::{goldens, sweep, Arith, Cli, Command, Format, Global, Status};

pub fn dispatch(cli: &Cli) -> Result<Status> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen { spec } => cmd_gen(g, spec),
        Command::Run { instance, alpha, alpha_file, tie_rule } => match g.arith {
            Arith::Rational => cmd_run::<Rational>(g, instance, alpha.as_deref(), alpha_file.as_deref(), tie_rule),
            Arith::Float => cmd_run::<f64>(g, instance, alpha.as_deref(), alpha_file.as_deref(), tie_rule),
        },
        Command::Solve { instance, config, report, trace } => {
            cmd_solve(g, instance, config.as_deref(), report.as_deref(), trace.as_deref())
        }
        Command::Verify { instance, candidate: Some(candidate), .. } => match g.arith {
            Arith::Rational => cmd_verify::<Rational>(g, instance, candidate),
            Arith::Float => cmd_verify::<f64>(g, instance, candidate),
        },
        Command::Verify { instance, candidate: None, grid, limit } => cmd_search(g, instance, *grid, *limit),
        Command::Poa { sweep: Some(count), max_bidders, max_items, max_slots, cap, .. } => {
            let bounds = sweep::SweepBounds {
                max_bidders: *max_bidders,
                max_items: *max_items,
                max_slots: *max_slots,
                cap: cap.clone(),
            };
            sweep::cmd_sweep(g, *count, &bounds)
        }
        Command::Poa { instance: Some(instance), candidate: Some(candidate), .. } => match g.arith {
            Arith::Rational => cmd_poa::<Rational>(g, instance, candidate),
            Arith::Float => cmd_poa::<f64>(g, instance, candidate),
        },
        Command::Poa { .. } => Err(Error::invalid("poa needs INSTANCE and CANDIDATE, or --sweep N")),
        Command::Goldens => goldens::cmd_goldens(g),
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { .. } | Error::Json { .. } => e,
        other => Error::invalid(format!("{}: {other}", path.display())),
    }
}

pub fn load_instance_file(path: &Path, g: &Global) -> Result<InstanceFile> {
    let text = read_text(path)?;
    let mut file: InstanceFile = serde_json::from_str(&text)
        .map_err(|source| Error::Json { context: path.display().to_string(), source })?;
    if let Some(m) = g.mechanism {
        file.mechanism = m;
    }
    if g.self_pricing {
        file.self_pricing = true;
    }
    Ok(file)
}

pub fn load_instance<T: Scalar>(path: &Path, g: &Global) -> Result<AuctionInstance<T>> {
    load_instance_file(path, g)?.to_instance().map_err(|e| with_path(path, e))
}

fn load_candidate(path: &Path) -> Result<CandidateFile> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json { context: path.display().to_string(), source })
}

/// Writes to `--out` when given, otherwise to stdout.
pub fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn param<'a>(params: &'a BTreeMap<String, String>, key: &str) -> Option<&'a str> {
    params.get(key).map(String::as_str)
}

fn parse_param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match param(params, key) {
        None => Ok(default),
        Some(s) => s.parse().map_err(|_| Error::invalid(format!("gen: cannot read {key}={s}"))),
    }
}

fn cmd_gen(g: &Global, spec: &[String]) -> Result<Status> {
    let words: Vec<&str> = spec.iter().flat_map(|s| s.split_whitespace()).collect();
    let (kind, rest) = words.split_first().ok_or_else(|| Error::invalid("gen: empty spec"))?;
    let mut params = BTreeMap::new();
    for w in rest {
        let (k, v) = w.split_once('=').unwrap_or((w, "true"));
        params.insert(k.to_string(), v.to_string());
    }
    let overrides = |mut file: InstanceFile| {
        if let Some(m) = g.mechanism {
            file.mechanism = m;
        }
        if g.self_pricing {
            file.self_pricing = true;
        }
        file
    };
    match *kind {
        "example1" => {
            emit(g, &overrides(InstanceFile::from_instance(&example_one::<Rational>())?).to_json())?;
        }
        "tightness" => {
            let k: usize = parse_param(&params, "K", 100)?;
            let eps = Rational::parse(param(&params, "eps").unwrap_or("0.001"))?;
            let (instance, alpha, allocation) = gen_tightness_instance(k, eps)?;
            let file = overrides(InstanceFile::from_instance(&instance)?);
            emit(g, &file.to_json())?;
            if let Some(out) = &g.out {
                let pi = shoplab_core::TieBreakDistribution::point_mass(allocation);
                let candidate = CandidateFile::from_parts(&instance, &alpha, &pi);
                write_text(&companion_path(out), &shoplab_core::io::to_json_pretty(&candidate))?;
            }
        }
        "random" => {
            let (min_items, max_items) = match param(&params, "items") {
                None => (1, 3),
                Some(s) => match s.split_once("..") {
                    Some((a, b)) => (
                        a.parse().map_err(|_| Error::invalid("gen: items=a..b"))?,
                        b.parse().map_err(|_| Error::invalid("gen: items=a..b"))?,
                    ),
                    None => {
                        let m: usize = s.parse().map_err(|_| Error::invalid("gen: items=m"))?;
                        (m, m)
                    }
                },
            };
            let base = GeneratorSpec {
                bidders: parse_param(&params, "n", 2)?,
                min_items,
                max_items,
                slots: parse_param(&params, "K", 3)?,
                value_max: parse_param(&params, "value_max", 10)?,
                ctr_profile: parse_param::<String>(&params, "ctr", "random".into())?.parse::<CtrProfile>()?,
                cap: param(&params, "cap").unwrap_or("4").to_string(),
                mechanism: g.mechanism.unwrap_or(Mechanism::Gsp),
                self_pricing: g.self_pricing,
                strict: parse_param(&params, "strict", false)?,
                seed: g.seed(),
            };
            let count: u64 = parse_param(&params, "count", 1)?;
            if count == 0 {
                return Err(Error::invalid("gen: count must be at least 1"));
            }
            if count == 1 {
                emit(g, &generate(&base)?.to_json())?;
            } else {
                let dir = g.out.as_ref().ok_or_else(|| Error::invalid("gen: count > 1 needs --out DIR"))?;
                std::fs::create_dir_all(dir)
                    .map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
                for s in 0..count {
                    let spec = GeneratorSpec { seed: base.seed + s, ..base.clone() };
                    write_text(&dir.join(format!("instance-{}.json", spec.seed)), &generate(&spec)?.to_json())?;
                }
            }
        }
        other => return Err(Error::invalid(format!("gen: unknown spec {other:?} (example1, tightness, random)"))),
    }
    Ok(Status::Ok)
}

/// `tight.json` -> `tight.alpha.json`.
pub fn companion_path(out: &Path) -> PathBuf {
    out.with_extension("alpha.json")
}

fn parse_tie_rule<T: Scalar>(rule: &str, instance: &AuctionInstance<T>, seed: u64) -> Result<TieRule> {
    match rule {
        "first" => Ok(TieRule::FirstListed),
        "random" => Ok(TieRule::Random(seed)),
        _ => match rule.strip_prefix("favor:") {
            Some(id) => instance
                .bidder_index(id)
                .map(TieRule::FavorBidder)
                .ok_or_else(|| Error::invalid(format!("unknown bidder {id:?}"))),
            None => Err(Error::invalid(format!("unknown tie rule {rule:?} (first, random, favor:<id>)"))),
        },
    }
}

fn read_alpha<T: Scalar>(
    instance: &AuctionInstance<T>,
    alpha: Option<&str>,
    alpha_file: Option<&Path>,
) -> Result<MultiplierVector<T>> {
    match (alpha, alpha_file) {
        (Some(list), _) => {
            let values = list.split(',').map(|s| T::parse(s.trim())).collect::<Result<Vec<T>>>()?;
            MultiplierVector::new(values, instance)
        }
        (None, Some(path)) => {
            let text = read_text(path)?;
            let file: AlphaFile = match serde_json::from_str::<AlphaFile>(&text) {
                Ok(f) => f,
                Err(_) => AlphaFile { alpha: load_candidate(path)?.alpha },
            };
            file.to_multipliers(instance).map_err(|e| with_path(path, e))
        }
        (None, None) => Ok(MultiplierVector::ones(instance)),
    }
}

fn cmd_run<T: Scalar>(
    g: &Global,
    path: &Path,
    alpha: Option<&str>,
    alpha_file: Option<&Path>,
    tie_rule: &str,
) -> Result<Status> {
    let instance: AuctionInstance<T> = load_instance(path, g)?;
    let alpha = read_alpha(&instance, alpha, alpha_file)?;
    let rule = parse_tie_rule(tie_rule, &instance, g.seed())?;
    let bids = induce_bids(&instance, &alpha)?;
    let allocation = allocate(&bids, rule);
    let (welfare, pay) = outcome(&instance, &bids, &allocation);
    let text = match g.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in payment_rows(&instance, &welfare, &pay) {
                w.serialize(row).map_err(csv_err)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?).expect("csv is utf-8")
        }
        Format::Human => {
            let mut s = String::new();
            let _ = writeln!(s, "mechanism: {}", instance.mechanism());
            let _ = writeln!(s, "allocation: {}", allocation.labels(&instance).join(" "));
            if let Some(prices) = &pay.per_item_price {
                for p in prices {
                    let setter = p.price_setter.map(|it| instance.item_label(it)).unwrap_or_else(|| "-".into());
                    let _ = writeln!(
                        s,
                        "  rank {} {}: bid {} price {} (set by {}) payment {}",
                        p.rank + 1,
                        instance.item_label(p.item),
                        bids.bid(p.item).render(),
                        p.price.render(),
                        setter,
                        p.payment.render()
                    );
                }
            }
            for (i, id) in instance.bidder_ids().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "bidder {id}: value {} payment {}",
                    welfare.per_bidder_value[i].render(),
                    pay.per_bidder_payment[i].render()
                );
            }
            let _ = writeln!(
                s,
                "welfare {} revenue {} bid-welfare {}",
                welfare.welfare.render(),
                pay.revenue.render(),
                welfare.bid_welfare.render()
            );
            s
        }
    };
    emit(g, &text)?;
    Ok(Status::Ok)
}

pub fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

/// Solver configuration from an optional file, overridden by flags.
pub fn solver_config(g: &Global, file: Option<&Path>) -> Result<SolverConfig> {
    let mut config: SolverConfig = match file {
        Some(path) => {
            let text = read_text(path)?;
            serde_json::from_str(&text).map_err(|source| Error::Json { context: path.display().to_string(), source })?
        }
        None => SolverConfig::default(),
    };
    if g.eps0.is_some() {
        config.eps0 = g.eps0;
    }
    if let Some(x) = g.eps_decay {
        config.eps_decay = x;
    }
    if let Some(x) = g.stages {
        config.stages = x;
    }
    if let Some(x) = g.samples {
        config.samples_per_eval = x;
    }
    if let Some(x) = g.damping {
        config.damping = x;
    }
    if let Some(t) = &g.tol {
        config.fp_tol = Some(t.parse().map_err(|_| Error::invalid(format!("--tol: cannot read {t}")))?);
    }
    if let Some(x) = g.restarts {
        config.restarts = x;
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn solver_report(instance: &AuctionInstance<Rational>, config: &SolverConfig, out: &SolverOutcome) -> serde_json::Value {
    let (status, best_residual) = match &out.status {
        SolverStatus::Converged => ("CONVERGED", None),
        SolverStatus::NonConverged { best_residual } => ("NON_CONVERGED", Some(*best_residual)),
    };
    json!({
        "status": status,
        "best_residual": best_residual,
        "restart": out.restart,
        "residual": out.residual,
        "std_err": out.std_err,
        "verify_tolerance": out.verify_tolerance,
        "candidate": CandidateFile::from_parts(instance, &out.candidate.alpha, &out.candidate.pi),
        "verification": out.candidate.report.to_json(instance),
        "restarts": out.restarts,
        "exact_ties": out.exact_ties,
        "relaxed_roi_violations": out.relaxed_roi_violations,
        "config": config,
    })
}

fn cmd_solve(
    g: &Global,
    path: &Path,
    config_file: Option<&Path>,
    report: Option<&Path>,
    trace: Option<&Path>,
) -> Result<Status> {
    let instance: AuctionInstance<Rational> = load_instance(path, g)?;
    let config = solver_config(g, config_file)?;
    let out = solve(&instance, &config)?;
    let candidate = CandidateFile::from_parts(&instance, &out.candidate.alpha, &out.candidate.pi);
    if let Some(path) = &g.out {
        write_text(path, &shoplab_core::io::to_json_pretty(&candidate))?;
    }
    if let Some(path) = report {
        write_text(path, &shoplab_core::io::to_json_pretty(&solver_report(&instance, &config, &out)))?;
    }
    if let Some(path) = trace {
        write_text(path, &out.trace_jsonl())?;
    }
    let converged = out.status.is_converged();
    println!("status: {}", if converged { "CONVERGED" } else { "NON_CONVERGED" });
    if let SolverStatus::NonConverged { best_residual } = out.status {
        println!("best residual: {best_residual}");
    }
    println!(
        "alpha: {}",
        out.candidate.alpha.as_slice().iter().map(approx).collect::<Vec<_>>().join(", ")
    );
    println!("support size: {}", out.candidate.pi.len());
    println!(
        "verification at tolerance {}: {}",
        out.verify_tolerance,
        if out.candidate.report.is_pass() { "PASS" } else { "FAIL" }
    );
    if g.out.is_none() {
        print!("{}", shoplab_core::io::to_json_pretty(&candidate));
    }
    Ok(if converged { Status::Ok } else { Status::Inconclusive })
}

/// Exact text when short, otherwise a float rendering.
pub fn approx<T: Scalar>(x: &T) -> String {
    match x.to_decimal() {
        Some(d) if d.len() <= 24 => d,
        _ => format!("{}", x.to_f64()),
    }
}

fn default_tolerance<T: Scalar>() -> &'static str {
    if T::is_exact() {
        "0"
    } else {
        "1e-9"
    }
}

fn tolerance<T: Scalar>(g: &Global) -> Result<T> {
    T::parse(g.tol.as_deref().unwrap_or(default_tolerance::<T>()))
}

fn human_report<T: Scalar>(instance: &AuctionInstance<T>, report: &VerificationReport<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", if report.is_pass() { "PASS" } else { "FAIL" });
    let _ = writeln!(s, "bid-consistent: {}", report.bid_consistent);
    for (i, id) in instance.bidder_ids().iter().enumerate() {
        let r = &report.roi_feasible[i];
        let _ = writeln!(
            s,
            "bidder {id}: value {} payment {} slack {} roi {} pacing {}",
            approx(&r.value),
            approx(&r.payment),
            approx(&r.slack),
            if r.pass { "ok" } else { "VIOLATED" },
            if report.maximal_pacing[i] { "ok" } else { "VIOLATED" }
        );
    }
    if let shoplab_core::verifier::Verdict::Fail(reasons) = &report.verdict {
        for r in reasons {
            let _ = writeln!(s, "  {r}");
        }
    }
    s
}

fn verification_csv<T: Scalar>(instance: &AuctionInstance<T>, report: &VerificationReport<T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bidder_id", "value", "payment", "slack", "roi_feasible", "maximal_pacing"])
        .map_err(csv_err)?;
    for (i, id) in instance.bidder_ids().iter().enumerate() {
        let r = &report.roi_feasible[i];
        w.write_record([
            id.clone(),
            r.value.render(),
            r.payment.render(),
            r.slack.render(),
            r.pass.to_string(),
            report.maximal_pacing[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?).expect("csv is utf-8"))
}

fn cmd_verify<T: Scalar>(g: &Global, path: &Path, candidate: &Path) -> Result<Status> {
    let instance: AuctionInstance<T> = load_instance(path, g)?;
    let (alpha, pi) = load_candidate(candidate)?.parse(&instance).map_err(|e| with_path(candidate, e))?;
    let report = verify(&instance, &alpha, &pi, tolerance::<T>(g)?)?;
    let text = match (&g.out, g.format) {
        (Some(_), _) => shoplab_core::io::to_json_pretty(&report.to_json(&instance)),
        (None, Format::Csv) => verification_csv(&instance, &report)?,
        (None, Format::Human) => human_report(&instance, &report),
    };
    emit(g, &text)?;
    Ok(if report.is_pass() { Status::Ok } else { Status::Fail })
}

fn cmd_search(g: &Global, path: &Path, grid: usize, limit: usize) -> Result<Status> {
    let instance: AuctionInstance<Rational> = load_instance(path, g)?;
    let result = find_equilibria_bruteforce(&instance, grid, limit)?;
    println!("grid points: {}", result.grid_points);
    println!("equilibria found: {}", result.candidates.len());
    match result.candidates.first() {
        None => {
            println!("verdict: INCONCLUSIVE");
            Ok(Status::Inconclusive)
        }
        Some(c) => {
            println!("verdict: PASS");
            let file = CandidateFile::from_parts(&instance, &c.alpha, &c.pi);
            match &g.out {
                Some(out) => write_text(out, &shoplab_core::io::to_json_pretty(&file))?,
                None => print!("{}", shoplab_core::io::to_json_pretty(&file)),
            }
            Ok(Status::Ok)
        }
    }
}

pub fn poa_json<T: Scalar>(report: &PoaReport<T>) -> serde_json::Value {
    json!({
        "wel_opt": report.wel_opt.render(),
        "wel_eq": report.wel_eq.render(),
        "rev_eq": report.rev_eq.render(),
        "ratio": report.ratio.render(),
        "ratio_approx": report.ratio.to_f64(),
        "smoothness_ok": report.smoothness_ok,
        "ownership_ok": report.ownership_ok,
        "welfare_covers_revenue": report.welfare_covers_revenue,
        "within_factor_two": report.within_factor_two,
    })
}

pub fn poa_holds<T>(report: &PoaReport<T>) -> bool {
    report.within_factor_two
        && report.welfare_covers_revenue
        && report.ownership_ok
        && report.smoothness_ok.iter().all(|b| *b)
}

fn cmd_poa<T: Scalar>(g: &Global, path: &Path, candidate: &Path) -> Result<Status> {
    let instance: AuctionInstance<T> = load_instance(path, g)?;
    let (alpha, pi) = load_candidate(candidate)?.parse(&instance).map_err(|e| with_path(candidate, e))?;
    let tol = tolerance::<T>(g)?;
    let report = verify(&instance, &alpha, &pi, tol.clone())?;
    let candidate = EquilibriumCandidate { alpha, pi, report };
    let poa = match poa_report(&instance, &candidate, tol) {
        Ok(p) => p,
        Err(Error::Unverified(msg)) => {
            eprintln!("refused: {msg}");
            print!("{}", human_report(&instance, &candidate.report));
            return Ok(Status::Fail);
        }
        Err(e) => return Err(e),
    };
    let text = match (&g.out, g.format) {
        (Some(_), _) | (None, Format::Csv) => shoplab_core::io::to_json_pretty(&poa_json(&poa)),
        (None, Format::Human) => format!(
            "wel_opt {}\nwel_eq {}\nrev_eq {}\nratio {} (~{})\nsmoothness_ok {:?}\nownership_ok {}\nwithin_factor_two {}\n",
            approx(&poa.wel_opt),
            approx(&poa.wel_eq),
            approx(&poa.rev_eq),
            approx_ratio(&poa),
            poa.ratio.to_f64(),
            poa.smoothness_ok,
            poa.ownership_ok,
            poa.within_factor_two
        ),
    };
    emit(g, &text)?;
    Ok(if poa_holds(&poa) { Status::Ok } else { Status::Fail })
}

fn approx_ratio<T: Scalar>(p: &PoaReport<T>) -> String {
    match &p.ratio {
        shoplab_core::poa::Ratio::Finite(r) => r.render(),
        shoplab_core::poa::Ratio::Infinite => "inf".into(),
    }
}
