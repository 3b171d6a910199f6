//! Grid CSV: `cell_id,row,col,v1[,v2,...][,count]`.

use std::fs::File;
use std::path::Path;

use crate::covariate::CovariateField;
use crate::error::{AcsError, Result};
use crate::grid::GridSpec;
use crate::population::PopulationGrid;

/// Contents of a grid file; `counts` is absent for covariate-only files.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub grid: GridSpec,
    pub covariates: CovariateField,
    pub counts: Option<Vec<u64>>,
}

fn parse_err(row: usize, msg: impl Into<String>) -> AcsError {
    AcsError::Parse { row, msg: msg.into() }
}

impl GridFile {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(File::open(path)?)
    }

    pub fn from_reader<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.len() < 3 || header[..3] != ["cell_id", "row", "col"] {
            return Err(parse_err(0, "header must start with cell_id,row,col"));
        }
        let has_count = header.last().map(String::as_str) == Some("count");
        let k = header.len() - 3 - usize::from(has_count);
        for (j, name) in header[3..3 + k].iter().enumerate() {
            if *name != format!("v{}", j + 1) {
                return Err(parse_err(0, format!("expected covariate column v{}, found {name}", j + 1)));
            }
        }

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
            if rec.len() != header.len() {
                return Err(parse_err(row, format!("expected {} fields, found {}", header.len(), rec.len())));
            }
            let int = |j: usize| rec[j].trim().parse::<u64>().map_err(|e| parse_err(row, format!("{}: {e}", header[j])));
            let id = int(0)? as usize;
            let (r, c) = (int(1)? as usize, int(2)? as usize);
            let mut v = Vec::with_capacity(k);
            for j in 3..3 + k {
                let x: f64 = rec[j].trim().parse().map_err(|e| parse_err(row, format!("{}: {e}", header[j])))?;
                if !x.is_finite() {
                    return Err(parse_err(row, format!("{} is not finite", header[j])));
                }
                v.push(x);
            }
            let count = if has_count { Some(int(header.len() - 1)?) } else { None };
            rows.push((row, id, r, c, v, count));
        }
        if rows.is_empty() {
            return Err(parse_err(1, "no cells"));
        }
        let n_rows = rows.iter().map(|x| x.2).max().unwrap_or(0) + 1;
        let n_cols = rows.iter().map(|x| x.3).max().unwrap_or(0) + 1;
        let grid = GridSpec::new(n_rows, n_cols)?;
        if rows.len() != grid.cells() {
            return Err(parse_err(rows.len(), format!("{} rows do not fill a {n_rows}x{n_cols} grid", rows.len())));
        }
        let mut columns = vec![vec![f64::NAN; grid.cells()]; k];
        let mut counts = vec![0u64; grid.cells()];
        let mut seen = vec![false; grid.cells()];
        for (row, id, r, c, v, count) in rows {
            if id != grid.cell_at(r, c) {
                return Err(parse_err(row, format!("cell_id {id} does not equal row*cols+col for ({r},{c})")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(parse_err(row, format!("duplicate cell_id {id}")));
            }
            for (col, x) in columns.iter_mut().zip(v) {
                col[id] = x;
            }
            counts[id] = count.unwrap_or(0);
        }
        let covariates = CovariateField::from_columns(grid.cells(), &columns)?;
        Ok(Self { grid, covariates, counts: has_count.then_some(counts) })
    }

    pub fn from_population(pop: &PopulationGrid) -> Self {
        Self { grid: pop.grid, covariates: pop.covariates.clone(), counts: Some(pop.counts.clone()) }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_writer(File::create(path)?)
    }

    pub fn to_writer<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.covariates.k();
        let mut header = vec!["cell_id".to_string(), "row".into(), "col".into()];
        header.extend((1..=k).map(|j| format!("v{j}")));
        if self.counts.is_some() {
            header.push("count".into());
        }
        w.write_record(&header)?;
        for cell in 0..self.grid.cells() {
            let (r, c) = self.grid.row_col(cell);
            let mut rec = vec![cell.to_string(), r.to_string(), c.to_string()];
            rec.extend(self.covariates.row(cell)[1..].iter().map(|v| v.to_string()));
            if let Some(counts) = &self.counts {
                rec.push(counts[cell].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Population with networks extracted; covariates centered on request.
    pub fn into_population(mut self, center: bool) -> Result<PopulationGrid> {
        if center {
            self.covariates.center();
        }
        let counts = self.counts.unwrap_or_else(|| vec![0; self.grid.cells()]);
        PopulationGrid::new(self.grid, self.covariates, counts, None)
    }
}

/// Load a population from a grid CSV.
pub fn load_population_csv(path: &Path, center: bool) -> Result<PopulationGrid> {
    GridFile::read(path)?.into_population(center)
}

/// Save a population as a grid CSV.
pub fn save_population_csv(pop: &PopulationGrid, path: &Path) -> Result<()> {
    GridFile::from_population(pop).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "cell_id,row,col,v1,v2,count\n0,0,0,0.5,0.25,0\n1,0,1,-1.25,1.5625,3\n2,1,0,0.1,0.01,0\n3,1,1,2,4,1\n";
        let f = GridFile::from_reader(text.as_bytes()).unwrap();
        assert_eq!((f.grid.rows, f.grid.cols, f.covariates.k()), (2, 2, 2));
        assert_eq!(f.counts.as_deref(), Some(&[0, 3, 0, 1][..]));
        let mut buf = Vec::new();
        f.to_writer(&mut buf).unwrap();
        assert_eq!(GridFile::from_reader(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn covariate_only_file() {
        let text = "cell_id,row,col,v1\n0,0,0,1\n1,0,1,2\n";
        let f = GridFile::from_reader(text.as_bytes()).unwrap();
        assert!(f.counts.is_none());
        let pop = f.into_population(true).unwrap();
        assert_eq!(pop.total(), 0);
        assert!(!pop.is_usable());
        assert_eq!(pop.covariates.centers(), &[Some(1.5)]);
    }

    #[test]
    fn reports_the_bad_row() {
        let text = "cell_id,row,col,v1,count\n0,0,0,1,0\n1,0,1,abc,2\n";
        match GridFile::from_reader(text.as_bytes()) {
            Err(AcsError::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        let text = "cell_id,row,col,v1\n0,0,0,1\n5,0,1,2\n";
        assert!(matches!(GridFile::from_reader(text.as_bytes()), Err(AcsError::Parse { row: 2, .. })));
        let text = "cell_id,row,col,v1\n0,0,0,1\n1,0,1,2\n3,1,1,2\n";
        assert!(GridFile::from_reader(text.as_bytes()).is_err());
    }
}
