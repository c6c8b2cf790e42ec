use std::path::Path;
use std::time::Instant;

use adiabat::resonance_scenarios::ShapeResonanceScenario;
use adiabat::verification_harness::{
    all_pass, csv_string, epsilon_records, epsilon_sweep, hbar_records, hbar_sweep, PointFailure, SweepRecord, Verdict,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{open_manifest, save_manifest, unix_now, write_atomic};
use crate::{CliError, Context, EXIT_GATE, EXIT_NUMERICAL, EXIT_PASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Epsilon,
    Hbar,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Epsilon => "epsilon",
            SweepKind::Hbar => "hbar",
        }
    }

    pub fn csv_name(self) -> String {
        format!("sweep_{}.csv", self.name())
    }
}

/// Steps the propagator will take for one ε, from the spectral width of H(0).
fn estimated_steps(ctx: &Context, sc: &ShapeResonanceScenario, eps: f64) -> Result<f64, CliError> {
    let (lo, hi) = sc.hamiltonian(sc.hbar, 0.0)?.spectral_bounds();
    let e = 0.5 * (sc.energy_window.0 + sc.energy_window.1);
    let width = (hi - e).abs().max((e - lo).abs());
    let ev = &ctx.config.evolve;
    let ds = (ev.phase_budget * eps / width).min(ev.max_ds);
    Ok((1.0 / ds).ceil())
}

fn plan(ctx: &Context, kind: SweepKind, sc: &ShapeResonanceScenario) -> Result<(), CliError> {
    let cfg = &ctx.config;
    println!("plan: {} sweep on {} (n = {}, {} workers)", kind.name(), sc.name, sc.grid.n, ctx.workers);
    match kind {
        SweepKind::Epsilon => {
            let runs = if cfg.defect { 2 } else { 1 };
            let mut total = 0.0;
            for &eps in &cfg.eps_ladder {
                let steps = estimated_steps(ctx, sc, eps)? * runs as f64;
                total += steps;
                println!("  job hbar = {} eps = {eps}: {runs} evolution(s), ~{steps:.0} steps", sc.hbar);
            }
            println!("  {} jobs, ~{total:.0} propagator steps, {} s-samples each", cfg.eps_ladder.len(), sc.s_samples.len());
        }
        SweepKind::Hbar => {
            for &h in &sc.hbar_ladder {
                println!(
                    "  job hbar = {h}: {} eigensolves{}",
                    sc.s_samples.len(),
                    if cfg.refine { format!(" + {} on the refined grid", sc.s_samples.len()) } else { String::new() }
                );
            }
            if cfg.a_halving {
                println!("  job a-halving at hbar = {}", sc.hbar_ladder[0]);
            }
        }
    }
    println!("  output: {}", ctx.out.join(kind.csv_name()).display());
    Ok(())
}

struct Outcome {
    rows: Vec<SweepRecord>,
    verdicts: Vec<Verdict>,
    failures: Vec<PointFailure>,
    result: Value,
}

fn execute(kind: SweepKind, ctx: &Context, sc: &ShapeResonanceScenario) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    match kind {
        SweepKind::Epsilon => {
            let setup = sc.setup(sc.hbar)?;
            let sw = epsilon_sweep(&setup, &cfg.epsilon_options())?;
            Ok(Outcome {
                rows: epsilon_records(&sw)?,
                verdicts: sw.verdicts.clone(),
                failures: sw.failures.clone(),
                result: serde_json::to_value(&sw)?,
            })
        }
        SweepKind::Hbar => {
            let sw = hbar_sweep(sc, &cfg.hbar_options(sc))?;
            Ok(Outcome {
                rows: hbar_records(&sw),
                verdicts: sw.verdicts.clone(),
                failures: sw.failures.clone(),
                result: serde_json::to_value(&sw)?,
            })
        }
    }
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    started_unix: f64,
    finished_unix: f64,
    elapsed_s: f64,
    workers: usize,
    csv: String,
    rows: usize,
    all_pass: bool,
    verdicts: &'a [Verdict],
    failures: &'a [PointFailure],
    result: &'a Value,
}

pub fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        let tag = match (v.pass, v.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "note",
        };
        println!("  {tag} {:<28} {}", v.gate, v.detail);
    }
}

/// Runs a sweep, writes its CSV and records it in the manifest. The CSV is
/// written only after every job has finished.
pub fn run(ctx: &Context, kind: SweepKind) -> Result<u8, CliError> {
    let sc = ctx.config.scenario()?;
    if ctx.dry_run {
        plan(ctx, kind, &sc)?;
        return Ok(EXIT_PASS);
    }
    let started = unix_now();
    let clock = Instant::now();
    let out = ctx.install(|| execute(kind, ctx, &sc))??;
    let elapsed = clock.elapsed().as_secs_f64();

    let csv = csv_string(&out.rows)?;
    let dir: &Path = &ctx.out;
    write_atomic(&dir.join(kind.csv_name()), csv.as_bytes())?;

    let mut manifest = open_manifest(dir, &ctx.config, serde_json::to_value(sc.describe())?)?;
    let pass = all_pass(&out.verdicts);
    let entry = SweepEntry {
        started_unix: started,
        finished_unix: unix_now(),
        elapsed_s: elapsed,
        workers: ctx.workers,
        csv: kind.csv_name(),
        rows: out.rows.len(),
        all_pass: pass,
        verdicts: &out.verdicts,
        failures: &out.failures,
        result: &out.result,
    };
    let sweeps = manifest.entry("sweeps").or_insert_with(|| json!({}));
    if let Value::Object(m) = sweeps {
        m.insert(kind.name().into(), serde_json::to_value(&entry)?);
    }
    save_manifest(dir, &manifest)?;

    println!("{} sweep on {}: {} rows in {:.1} s", kind.name(), sc.name, out.rows.len(), elapsed);
    print_verdicts(&out.verdicts);
    for f in &out.failures {
        println!("  point failed at hbar = {}{}: {}", f.hbar, f.eps.map(|e| format!(", eps = {e}")).unwrap_or_default(), f.error);
    }
    println!("wrote {}", dir.join(kind.csv_name()).display());
    Ok(if !out.failures.is_empty() {
        EXIT_NUMERICAL
    } else if pass {
        EXIT_PASS
    } else {
        EXIT_GATE
    })
}
