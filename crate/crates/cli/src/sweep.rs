//! Seeded PoA sweep: generate, solve, verify, measure.

use std::io::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shoplab_core::io::{generate, CtrProfile, GeneratorSpec};
use shoplab_core::poa::{poa_report, PoaReport};
use shoplab_core::solver::solve;
use shoplab_core::{AuctionInstance, Error, Mechanism, Rational, Result, Scalar};

use crate::commands::{csv_err, poa_holds, solver_config};
use crate::{Global, Status};

pub struct SweepBounds {
    pub max_bidders: usize,
    pub max_items: usize,
    pub max_slots: usize,
    pub cap: String,
}

/// CSV columns; `status` and `verified` follow the fixed PoA columns.
pub const SWEEP_HEADER: [&str; 13] = [
    "seed",
    "n",
    "m",
    "K",
    "mechanism",
    "wel_opt",
    "wel_eq",
    "rev_eq",
    "ratio",
    "smoothness_ok",
    "ownership_ok",
    "status",
    "verified",
];

/// The random instance a sweep uses for `seed`.
pub fn sweep_instance(
    seed: u64,
    bounds: &SweepBounds,
    mechanism: Option<Mechanism>,
    self_pricing: bool,
) -> Result<AuctionInstance<Rational>> {
    if bounds.max_bidders == 0 || bounds.max_items == 0 || bounds.max_slots == 0 {
        return Err(Error::invalid("sweep bounds must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bidders = rng.gen_range(1..=bounds.max_bidders);
    let slots = rng.gen_range(1..=bounds.max_slots);
    let coin: bool = rng.gen();
    let spec = GeneratorSpec {
        bidders,
        min_items: 1,
        max_items: bounds.max_items,
        slots,
        value_max: 10,
        ctr_profile: CtrProfile::Random,
        cap: bounds.cap.clone(),
        mechanism: mechanism.unwrap_or(if coin { Mechanism::Gsp } else { Mechanism::Vcg }),
        self_pricing,
        strict: false,
        seed,
    };
    generate(&spec)?.to_instance()
}

struct Row {
    fields: Vec<String>,
    converged: bool,
    verified: bool,
    holds: bool,
}

fn num(x: &Rational) -> String {
    format!("{}", x.to_f64())
}

fn sweep_row(g: &Global, seed: u64, bounds: &SweepBounds) -> Result<Row> {
    let instance = sweep_instance(seed, bounds, g.mechanism, g.self_pricing)?;
    let mut config = solver_config(g, None)?;
    config.seed = seed;
    let out = solve(&instance, &config)?;
    let converged = out.status.is_converged();
    let verified = out.candidate.report.is_pass();
    let mut fields = vec![
        seed.to_string(),
        instance.num_bidders().to_string(),
        instance.total_items().to_string(),
        instance.num_slots().to_string(),
        instance.mechanism().to_string(),
    ];
    let mut holds = true;
    if verified {
        let (wel_opt, _) = shoplab_core::poa::optimal_welfare(&instance);
        let tol = wel_opt.clone() * Rational::parse("1e-6")?;
        let report: PoaReport<Rational> = poa_report(&instance, &out.candidate, tol)?;
        holds = poa_holds(&report);
        fields.extend([
            num(&report.wel_opt),
            num(&report.wel_eq),
            num(&report.rev_eq),
            format!("{}", report.ratio.to_f64()),
            report.smoothness_ok.iter().all(|b| *b).to_string(),
            report.ownership_ok.to_string(),
        ]);
    } else {
        let (wel_opt, _) = shoplab_core::poa::optimal_welfare(&instance);
        fields.extend([num(&wel_opt), String::new(), String::new(), String::new(), String::new(), String::new()]);
    }
    fields.push(if converged { "CONVERGED" } else { "NON_CONVERGED" }.to_string());
    fields.push(verified.to_string());
    Ok(Row { fields, converged, verified, holds })
}

pub fn cmd_sweep(g: &Global, count: u64, bounds: &SweepBounds) -> Result<Status> {
    if count == 0 {
        return Err(Error::invalid("sweep count must be at least 1"));
    }
    let start = g.seed();
    let rows: Vec<Row> = (start..start + count)
        .into_par_iter()
        .map(|seed| sweep_row(g, seed, bounds))
        .collect::<Result<_>>()?;

    let append = g.out.as_ref().is_some_and(|p| p.metadata().map(|m| m.len() > 0).unwrap_or(false));
    let mut w = csv::Writer::from_writer(Vec::new());
    if !append {
        w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    }
    for r in &rows {
        w.write_record(&r.fields).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    match &g.out {
        Some(path) => {
            let io = |source| Error::Io { path: path.display().to_string(), source };
            let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
            f.write_all(&bytes).map_err(io)?;
        }
        None => print!("{}", String::from_utf8(bytes).expect("csv is utf-8")),
    }

    let converged = rows.iter().filter(|r| r.converged).count();
    let verified = rows.iter().filter(|r| r.verified).count();
    let violations = rows.iter().filter(|r| r.verified && !r.holds).count();
    let summary =
        format!("instances {count}, converged {converged}, verified {verified}, bound violations {violations}");
    if g.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(if violations > 0 { Status::Fail } else { Status::Ok })
}
