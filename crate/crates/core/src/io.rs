//! CSV emission. Floats are written with 17 significant digits so that
//! every value reads back bit for bit.

use std::io::Write;
use std::path::Path;

use crate::approximation::GridFunction;
use crate::criterion::CriterionReport;
use crate::entropy::EntropyProfile;
use crate::error::Result;
use crate::mc_bands::{BandResult, TailCurve};
use crate::processes::{CovarianceMatrix, PathEnsemble};

/// Round-trip representation: `{:.16e}`, `inf`, `-inf` or `NaN`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A rectangular numeric table with named columns.
pub trait ToTable {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<f64>>;
}

pub fn write_table<W: Write>(writer: W, table: &dyn ToTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.header())?;
    for row in table.rows() {
        w.write_record(row.iter().map(|v| format_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, table: &dyn ToTable) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_table(std::io::BufWriter::new(file), table)
}

pub fn table_to_string(table: &dyn ToTable) -> Result<String> {
    let mut buf = Vec::new();
    write_table(&mut buf, table)?;
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}

/// Header of node positions, one row per realization; the layout read back
/// by the `user_table` process.
impl ToTable for PathEnsemble {
    fn header(&self) -> Vec<String> {
        self.domain()
            .positions()
            .into_iter()
            .map(format_float)
            .collect()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.paths().map(|p| p.to_vec()).collect()
    }
}

impl ToTable for GridFunction {
    fn header(&self) -> Vec<String> {
        vec!["t".into(), "value".into()]
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.grid()
            .nodes()
            .into_iter()
            .zip(self.values())
            .map(|(t, v)| vec![t, *v])
            .collect()
    }
}

impl ToTable for CovarianceMatrix {
    fn header(&self) -> Vec<String> {
        self.domain()
            .positions()
            .into_iter()
            .map(format_float)
            .collect()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.entries()
            .row_iter()
            .map(|r| r.iter().cloned().collect())
            .collect()
    }
}

impl ToTable for EntropyProfile {
    fn header(&self) -> Vec<String> {
        ["epsilon", "H", "N_greedy", "N_packing"]
            .map(String::from)
            .to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                vec![
                    self.epsilons[i],
                    self.h_values[i],
                    self.n_greedy[i] as f64,
                    self.n_packing[i] as f64,
                ]
            })
            .collect()
    }
}

impl ToTable for TailCurve {
    fn header(&self) -> Vec<String> {
        ["u", "gamma", "stderr"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.u_grid.len())
            .map(|i| vec![self.u_grid[i], self.gamma[i], self.std_err[i]])
            .collect()
    }
}

impl ToTable for BandResult {
    fn header(&self) -> Vec<String> {
        ["t", "I_n", "lower", "upper"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.nodes.len())
            .map(|i| vec![self.nodes[i], self.i_n[i], self.lower[i], self.upper[i]])
            .collect()
    }
}

impl ToTable for CriterionReport {
    fn header(&self) -> Vec<String> {
        [
            "k",
            "n_lo",
            "n_hi",
            "lambda_star",
            "U",
            "mc_error",
            "cap_active",
            "tail_sum",
            "adjusted_tail_sum",
            "mean_sup_norm",
            "sup_to_u_ratio",
        ]
        .map(String::from)
        .to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                vec![
                    b.k as f64,
                    b.n_lo as f64,
                    b.n_hi as f64,
                    b.lambda_star,
                    b.u_value,
                    b.mc_error,
                    if b.cap_active { 1.0 } else { 0.0 },
                    self.tail_sums[i],
                    self.adjusted_tail_sums[i],
                    b.mean_sup_norm,
                    b.sup_to_u_ratio,
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::Domain;

    #[test]
    fn floats_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
            -0.0,
        ] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn ensemble_csv_layout() {
        let ens = PathEnsemble::new(
            Domain::points(vec![0.0, 1.0]).unwrap(),
            2,
            vec![1.0, 2.0, 3.0, 4.0],
            0,
        )
        .unwrap();
        let text = table_to_string(&ens).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1.0000000000000000e0,2.0000000000000000e0");
    }
}
