use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sweeps::{EpsilonSweep, HbarSweep};
use crate::error::{Error, Result};

/// One CSV row. Every row carries the full parameter tuple; quantities a
/// sweep does not produce are left empty. Wall-clock times live in the run
/// manifest so that rows are reproducible bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scenario: String,
    pub kind: String,
    pub n: usize,
    pub hbar: f64,
    pub eps: Option<f64>,
    pub a: f64,
    pub s: Option<f64>,
    pub energy: Option<f64>,
    pub gap: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub g3: Option<f64>,
    pub g4: f64,
    pub g5: Option<f64>,
    pub pdot: Option<f64>,
    pub pddot: Option<f64>,
    pub closeness: Option<f64>,
    pub distance: Option<f64>,
    pub distance_max: Option<f64>,
    pub defect: Option<f64>,
    pub term_delta_prime: Option<f64>,
    pub term_pdot_delta: Option<f64>,
    pub term_k_eps: Option<f64>,
    pub term_delta_over_eps: Option<f64>,
    pub rhs_main: Option<f64>,
    pub delta_refined: Option<f64>,
    pub steps: Option<usize>,
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

/// Order by (scenario, ħ, ε, s), independent of job completion order.
pub fn sort_records(rows: &mut [SweepRecord]) {
    rows.sort_by(|a, b| {
        a.scenario
            .cmp(&b.scenario)
            .then(a.hbar.total_cmp(&b.hbar))
            .then(cmp_opt(a.eps, b.eps))
            .then(cmp_opt(a.s, b.s))
    });
}

/// One row per ε: the final distance, its maximum over s and the bound
/// terms at the final s.
pub fn epsilon_records(sw: &EpsilonSweep) -> Result<Vec<SweepRecord>> {
    let inp = &sw.inputs;
    let last = inp.samples.last().ok_or_else(|| Error::Invalid("sweep without s-samples".into()))?;
    let mut eps: Vec<f64> = sw.points.iter().map(|p| p.eps).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let mut rows = Vec::with_capacity(eps.len());
    for e in eps {
        let pts: Vec<_> = sw.points.iter().filter(|p| p.eps == e).collect();
        let fin = pts
            .iter()
            .find(|p| p.s == last.s)
            .ok_or_else(|| Error::Invalid(format!("eps = {e} has no point at s = {}", last.s)))?;
        let b = sw.bounds.with_eps(e)?;
        let defect = pts.iter().filter_map(|p| p.defect).reduce(f64::max);
        rows.push(SweepRecord {
            scenario: sw.scenario.clone(),
            kind: "epsilon".into(),
            n: sw.n,
            hbar: sw.hbar,
            eps: Some(e),
            a: inp.a,
            s: Some(last.s),
            energy: Some(last.energy),
            gap: inp.min_gap,
            delta: inp.delta,
            delta_prime: inp.delta_prime,
            g3: Some(b.g3),
            g4: b.g4,
            g5: Some(b.g5),
            pdot: Some(last.pdot),
            pddot: Some(last.pddot),
            closeness: Some(inp.closeness),
            distance: Some(fin.distance),
            distance_max: pts.iter().map(|p| p.distance).reduce(f64::max),
            defect,
            term_delta_prime: Some(b.terms.delta_prime),
            term_pdot_delta: Some(2.0 * last.pdot * b.g3 * b.delta),
            term_k_eps: Some(b.terms.k_eps),
            term_delta_over_eps: Some(b.terms.delta_over_eps),
            rhs_main: Some(fin.rhs_main),
            delta_refined: None,
            steps: Some(fin.steps),
        });
    }
    sort_records(&mut rows);
    Ok(rows)
}

/// One row per ħ with the maxima over s.
pub fn hbar_records(sw: &HbarSweep) -> Vec<SweepRecord> {
    let mut rows: Vec<SweepRecord> = sw
        .rungs
        .iter()
        .map(|r| SweepRecord {
            scenario: sw.scenario.clone(),
            kind: "hbar".into(),
            n: sw.n,
            hbar: r.hbar,
            eps: None,
            a: r.a,
            s: None,
            energy: None,
            gap: r.gap,
            delta: r.delta,
            delta_prime: r.delta_prime,
            g3: None,
            g4: r.g4,
            g5: None,
            pdot: Some(r.inputs.pdot_max),
            pddot: Some(r.inputs.pddot_max),
            closeness: Some(r.closeness),
            distance: None,
            distance_max: None,
            defect: None,
            term_delta_prime: None,
            term_pdot_delta: None,
            term_k_eps: None,
            term_delta_over_eps: None,
            rhs_main: None,
            delta_refined: r.delta_refined,
            steps: None,
        })
        .collect();
    sort_records(&mut rows);
    rows
}

/// CSV with a header row; floats in shortest round-trip form.
pub fn write_csv<W: Write>(rows: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Invalid(format!("csv: {e}"))))
        .collect()
}

pub fn csv_string(rows: &[SweepRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Invalid(format!("csv is not UTF-8: {e}")))
}
