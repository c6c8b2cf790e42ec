use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use adiabat::verification_harness::{read_csv, SweepRecord};
use serde_json::Value;

use crate::artifacts::{load_manifest, write_atomic};
use crate::{CliError, EXIT_GATE, EXIT_PASS};

fn e(v: f64) -> String {
    format!("{v:.3e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(e).unwrap_or_else(|| "-".into())
}

/// Two whitespace-separated columns, one point per line.
fn dat(path: &Path, header: &str, pts: &[(f64, f64)]) -> Result<(), CliError> {
    let mut s = format!("# {header}\n");
    for (x, y) in pts {
        let _ = writeln!(s, "{x:e} {y:e}");
    }
    write_atomic(path, s.as_bytes())
}

fn records(dir: &Path, entry: &Value) -> Result<Vec<SweepRecord>, CliError> {
    let name = entry.get("csv").and_then(Value::as_str).ok_or_else(|| CliError::Config("sweep entry without csv".into()))?;
    let file = fs::File::open(dir.join(name)).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    Ok(read_csv(file)?)
}

fn gate_table(md: &mut String, entry: &Value) -> bool {
    let mut ok = true;
    md.push_str("| gate | result | detail |\n|---|---|---|\n");
    for v in entry.get("verdicts").and_then(Value::as_array).into_iter().flatten() {
        let pass = v["pass"].as_bool().unwrap_or(false);
        let gating = v["gating"].as_bool().unwrap_or(true);
        ok &= pass || !gating;
        let tag = if pass { "pass" } else if gating { "**FAIL**" } else { "note" };
        let _ = writeln!(md, "| {} | {tag} | {} |", v["gate"].as_str().unwrap_or("?"), v["detail"].as_str().unwrap_or(""));
    }
    for f in entry.get("failures").and_then(Value::as_array).into_iter().flatten() {
        ok = false;
        let _ = writeln!(md, "| point failure | **FAIL** | hbar {} eps {}: {} |", f["hbar"], f["eps"], f["error"].as_str().unwrap_or(""));
    }
    md.push('\n');
    ok
}

fn epsilon_section(md: &mut String, dir: &Path, entry: &Value) -> Result<bool, CliError> {
    let rows = records(dir, entry)?;
    let res = &entry["result"];
    let inp = &res["inputs"];
    let _ = writeln!(md, "## epsilon sweep\n");
    let _ = writeln!(
        md,
        "hbar = {}, n = {}, a = {}, delta = {}, delta' = {}, eps* (formula) = {}, eps* (measured) = {}\n",
        res["hbar"],
        res["n"],
        inp["a"],
        opt(inp["delta"].as_f64()),
        opt(inp["delta_prime"].as_f64()),
        opt(res["eps_star_formula"].as_f64()),
        opt(res["eps_star_measured"].as_f64()),
    );
    let pass = gate_table(md, entry);
    md.push_str("| eps | distance(1) | max distance | 2 delta' | 2 Pdot g3 delta | K eps | 2 g4 delta / (Delta eps) | RHS | defect |\n");
    md.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in &rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            opt(r.eps),
            opt(r.distance),
            opt(r.distance_max),
            opt(r.term_delta_prime),
            opt(r.term_pdot_delta),
            opt(r.term_k_eps),
            opt(r.term_delta_over_eps),
            opt(r.rhs_main),
            opt(r.defect)
        );
    }
    md.push('\n');

    let plots = dir.join("plots");
    let col = |f: fn(&SweepRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| Some((r.eps?, f(r)?))).collect()
    };
    dat(&plots.join("epsilon_distance.dat"), "eps final_distance", &col(|r| r.distance))?;
    dat(&plots.join("epsilon_rhs.dat"), "eps bound_rhs", &col(|r| r.rhs_main))?;
    let defect = col(|r| r.defect);
    if !defect.is_empty() {
        dat(&plots.join("epsilon_defect.dat"), "eps max_intertwining_defect", &defect)?;
    }
    Ok(pass)
}

fn fit_line(md: &mut String, name: &str, fit: &Value) {
    if fit.is_null() {
        let _ = writeln!(md, "- {name}: no fit");
    } else {
        let _ = writeln!(
            md,
            "- {name}: slope {:.4}, eta {:.4}, R^2 {:.4}",
            fit["slope"].as_f64().unwrap_or(f64::NAN),
            fit["eta"].as_f64().unwrap_or(f64::NAN),
            fit["r2"].as_f64().unwrap_or(f64::NAN)
        );
    }
}

fn hbar_section(md: &mut String, dir: &Path, entry: &Value) -> Result<bool, CliError> {
    let rows = records(dir, entry)?;
    let res = &entry["result"];
    let _ = writeln!(md, "## hbar sweep\n\nn = {}\n", res["n"]);
    let pass = gate_table(md, entry);
    md.push_str("| hbar | a | gap | delta | delta' | closeness | delta (refined grid) |\n|---|---|---|---|---|---|---|\n");
    for r in &rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.hbar,
            e(r.a),
            e(r.gap),
            e(r.delta),
            e(r.delta_prime),
            opt(r.closeness),
            opt(r.delta_refined)
        );
    }
    md.push('\n');
    fit_line(md, "log delta vs 1/hbar", &res["fit_delta"]);
    fit_line(md, "log delta' vs 1/hbar", &res["fit_delta_prime"]);
    fit_line(md, "log ||P_Omega - P|| vs 1/hbar", &res["fit_closeness"]);
    md.push('\n');

    let plots = dir.join("plots");
    let logs = |f: fn(&SweepRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| f(r).filter(|v| *v > 0.0).map(|v| (1.0 / r.hbar, v.ln()))).collect()
    };
    dat(&plots.join("hbar_log_delta.dat"), "inv_hbar ln_delta", &logs(|r| Some(r.delta)))?;
    dat(&plots.join("hbar_log_delta_prime.dat"), "inv_hbar ln_delta_prime", &logs(|r| Some(r.delta_prime)))?;
    dat(&plots.join("hbar_log_closeness.dat"), "inv_hbar ln_closeness", &logs(|r| r.closeness))?;
    Ok(pass)
}

/// Rebuilds `report.md` and `plots/` from the manifest and CSVs of a run
/// directory. Output depends only on those files.
pub fn run(dir: &Path) -> Result<u8, CliError> {
    let m = load_manifest(dir)?;
    let mut md = String::new();
    let sc = &m["scenario"];
    let _ = writeln!(md, "# Run report: {}\n", sc["name"].as_str().unwrap_or("?"));
    let _ = writeln!(md, "{}\n", sc["summary"].as_str().unwrap_or(""));
    let _ = writeln!(md, "config hash `{}`\n", m["config_hash"].as_str().unwrap_or("?"));
    let sweeps = m["sweeps"].as_object().cloned().unwrap_or_default();
    if sweeps.is_empty() {
        md.push_str("No sweeps recorded.\n");
    }
    let mut pass = true;
    if let Some(entry) = sweeps.get("epsilon") {
        pass &= epsilon_section(&mut md, dir, entry)?;
    }
    if let Some(entry) = sweeps.get("hbar") {
        pass &= hbar_section(&mut md, dir, entry)?;
    }
    let _ = writeln!(md, "Overall: {}", if pass { "all gates passed" } else { "one or more gates failed" });
    write_atomic(&dir.join("report.md"), md.as_bytes())?;
    println!("{md}");
    println!("wrote {}", dir.join("report.md").display());
    Ok(if pass { EXIT_PASS } else { EXIT_GATE })
}
