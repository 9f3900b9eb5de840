use std::io::{Read, Write};

use super::{normalize_ages, Scenario, StateVector, SurvivalTable};
use crate::error::{Error, Result};
use crate::mortality::BasisSet;

const HEADER: [&str; 12] = ["scenario", "t", "v1", "v2", "v3", "g", "y", "s", "p", "Rb", "Rs", "I_ratio"];

/// 17 significant digits: enough for an exact f64 round trip.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per scenario and date. Returns are blank at `t = 0`.
pub fn write_scenarios_csv<W: Write>(writer: W, scenarios: &[Scenario]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for (i, sc) in scenarios.iter().enumerate() {
        for (t, x) in sc.states.iter().enumerate() {
            let mut rec: Vec<String> = vec![i.to_string(), t.to_string()];
            rec.extend(x.to_array().iter().map(|&v| fmt(v)));
            if t == 0 {
                rec.push(String::new());
                rec.push(String::new());
            } else {
                rec.push(fmt(sc.bond_returns[t - 1]));
                rec.push(fmt(sc.equity_returns[t - 1]));
            }
            rec.push(fmt(sc.index_ratio[t]));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<scenario csv>", e))?;
    Ok(())
}

/// Inverse of [`write_scenarios_csv`]. Survival probabilities are recomputed
/// from the stored mortality factors for `ages`.
pub fn read_scenarios_csv<R: Read>(reader: R, basis: &BasisSet, ages: &[u32]) -> Result<Vec<Scenario>> {
    let ages = normalize_ages(ages)?;
    let phi = ages.iter().map(|&a| basis.eval(a)).collect::<Result<Vec<_>>>()?;
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(Error::Data {
            path: "<scenario csv>".into(),
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut out: Vec<Scenario> = Vec::new();
    let mut current: Option<(usize, Scenario)> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Data {
            path: "<scenario csv>".into(),
            line,
            message,
        };
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", HEADER[k])))
        };
        let id: usize = rec[0].parse().map_err(|e| bad(format!("scenario: {e}")))?;
        let t: usize = rec[1].parse().map_err(|e| bad(format!("t: {e}")))?;
        let mut x = [0.0; 7];
        for (k, slot) in x.iter_mut().enumerate() {
            *slot = num(k + 2)?;
        }
        let state = StateVector::from_array(x);
        let ratio = num(11)?;

        if t == 0 {
            if let Some((_, sc)) = current.take() {
                out.push(sc);
            }
            if id != out.len() {
                return Err(bad(format!("scenario {id} out of order")));
            }
            current = Some((
                id,
                Scenario {
                    states: vec![state],
                    bond_returns: Vec::new(),
                    equity_returns: Vec::new(),
                    index_ratio: vec![ratio],
                    survival: SurvivalTable {
                        ages: Vec::new(),
                        horizon: 0,
                        probs: Vec::new(),
                    },
                },
            ));
        } else {
            let (cur_id, sc) = current.as_mut().ok_or_else(|| bad("path does not start at t = 0".into()))?;
            if *cur_id != id || sc.states.len() != t {
                return Err(bad(format!("row (scenario {id}, t {t}) out of sequence")));
            }
            sc.states.push(state);
            sc.bond_returns.push(num(9)?);
            sc.equity_returns.push(num(10)?);
            sc.index_ratio.push(ratio);
        }
    }
    if let Some((_, sc)) = current.take() {
        out.push(sc);
    }
    for sc in &mut out {
        sc.survival = SurvivalTable::build(&sc.states, &ages, &phi);
    }
    Ok(out)
}
