//! Draws CSV: one row per retained iteration.

use std::io::{Read, Write};

use crate::error::{AcsError, Result};

use super::ChainOutput;

/// Write `chain,iter,theta0..,alpha,beta[,rho0..],X,P,T`.
pub fn write_draws_csv<W: Write>(chains: &[ChainOutput], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = chains.iter().find_map(|c| c.draws.first()) else {
        w.flush()?;
        return Ok(());
    };
    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend((0..first.theta.len()).map(|j| format!("theta{j}")));
    header.extend(["alpha".to_string(), "beta".to_string()]);
    if let Some(rho) = &first.rho {
        header.extend((0..rho.len()).map(|j| format!("rho{j}")));
    }
    header.extend(["X", "P", "T"].map(String::from));
    w.write_record(&header)?;
    for ch in chains {
        for d in &ch.draws {
            let mut row = vec![ch.chain.to_string(), d.iter.to_string()];
            row.extend(d.theta.iter().map(|v| v.to_string()));
            row.push(d.alpha.to_string());
            row.push(d.beta.to_string());
            if let Some(rho) = &d.rho {
                row.extend(rho.iter().map(|v| v.to_string()));
            }
            row.extend([d.x.to_string(), d.p.to_string(), d.total.to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns of a draws CSV, grouped by chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawColumns {
    pub names: Vec<String>,
    /// `chains[i][j]` holds column `j` of chain `i`.
    pub chains: Vec<Vec<Vec<f64>>>,
}

impl DrawColumns {
    pub fn column(&self, chain: usize, name: &str) -> Option<&[f64]> {
        let j = self.names.iter().position(|n| n == name)?;
        self.chains.get(chain).map(|c| c[j].as_slice())
    }
}

/// Read a draws CSV back; the `chain` and `iter` columns are dropped.
pub fn read_draws_csv<R: Read>(input: R) -> Result<DrawColumns> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("chain") || header.get(1) != Some("iter") {
        return Err(AcsError::Parse { row: 0, msg: "expected leading chain,iter columns".into() });
    }
    let names: Vec<String> = header.iter().skip(2).map(String::from).collect();
    let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| AcsError::Parse { row, msg: e.to_string() });
        let chain = parse(&rec[0])? as usize;
        while chains.len() <= chain {
            chains.push(vec![Vec::new(); names.len()]);
        }
        if rec.len() != names.len() + 2 {
            return Err(AcsError::Parse { row, msg: "wrong number of fields".into() });
        }
        for (j, field) in rec.iter().skip(2).enumerate() {
            chains[chain][j].push(parse(field)?);
        }
    }
    Ok(DrawColumns { names, chains })
}
