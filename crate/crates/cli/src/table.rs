//! Convergence tables and observed rates.

use std::io::{Read, Write};

use anyhow::{bail, Context};
use rmix_core::Error;
use serde::Serialize;

/// What the rates are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateBasis {
    /// Uniform refinement: `log2(e_l / e_{l+1})`.
    Halving,
    /// Flux DOF count: `-2 log(e_l / e_{l+1}) / log(N_{l+1} / N_l)`.
    Dofs,
}

/// Pairwise rates between consecutive levels. `dofs` is only read for
/// [`RateBasis::Dofs`].
pub fn observed_rates(errors: &[f64], dofs: &[usize], basis: RateBasis) -> rmix_core::Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::DimensionMismatch(format!("need at least 2 errors, got {}", errors.len())));
    }
    if let Some(&e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::NonPositiveError(e));
    }
    if basis == RateBasis::Dofs && dofs.len() != errors.len() {
        return Err(Error::DimensionMismatch(format!("{} errors but {} DOF counts", errors.len(), dofs.len())));
    }
    Ok((0..errors.len() - 1)
        .map(|l| {
            let r = (errors[l] / errors[l + 1]).ln();
            match basis {
                RateBasis::Halving => r / std::f64::consts::LN_2,
                RateBasis::Dofs => 2.0 * r / (dofs[l + 1] as f64 / dofs[l] as f64).ln(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub level: usize,
    pub n_flux: usize,
    pub n_pot: usize,
    pub h_max: f64,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub norms: Vec<String>,
    pub basis: RateBasis,
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    pub fn new(norms: Vec<String>, basis: RateBasis) -> Self {
        Self { norms, basis, rows: Vec::new() }
    }

    pub fn column(&self, norm: &str) -> Option<Vec<f64>> {
        let i = self.norms.iter().position(|n| n == norm)?;
        Some(self.rows.iter().map(|r| r.errors[i]).collect())
    }

    /// Rates of `norm`; `None` entries where an error is not positive.
    pub fn rates(&self, norm: &str) -> Option<Vec<Option<f64>>> {
        let errors = self.column(norm)?;
        let dofs: Vec<usize> = self.rows.iter().map(|r| r.n_flux).collect();
        Some(
            (1..errors.len())
                .map(|l| observed_rates(&errors[l - 1..=l], &dofs[l - 1..=l], self.basis).ok().map(|r| r[0]))
                .collect(),
        )
    }

    pub fn last_rate(&self, norm: &str) -> Option<f64> {
        self.rates(norm)?.last().copied().flatten()
    }

    /// CSV with columns `level,n_flux,n_pot,h_max,<norm>...,rate_<norm>...`;
    /// rate cells are empty on the first row.
    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["level".to_string(), "n_flux".into(), "n_pot".into(), "h_max".into()];
        header.extend(self.norms.iter().cloned());
        header.extend(self.norms.iter().map(|n| format!("rate_{n}")));
        w.write_record(&header)?;
        let rates: Vec<Vec<Option<f64>>> = self.norms.iter().map(|n| self.rates(n).unwrap_or_default()).collect();
        for (l, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.level.to_string(), row.n_flux.to_string(), row.n_pot.to_string(), format!("{:.12e}", row.h_max)];
            rec.extend(row.errors.iter().map(|e| format!("{e:.12e}")));
            for r in &rates {
                rec.push(match l.checked_sub(1).and_then(|i| r.get(i).copied().flatten()) {
                    Some(v) => format!("{v:.6}"),
                    None => String::new(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> anyhow::Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }

    /// Reads the error columns back; rate columns are ignored.
    pub fn read_csv<R: Read>(input: R, basis: RateBasis) -> anyhow::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let fixed = ["level", "n_flux", "n_pot", "h_max"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(a, b)| a != b) {
            bail!("table must start with columns {}", fixed.join(","));
        }
        let norm_cols: Vec<usize> = (fixed.len()..header.len()).filter(|&i| !header[i].starts_with("rate_")).collect();
        let norms = norm_cols.iter().map(|&i| header[i].to_string()).collect();
        let mut table = Self::new(norms, basis);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> anyhow::Result<f64> {
                rec[i].trim().parse::<f64>().with_context(|| format!("row {}: column {}", line + 1, &header[i]))
            };
            table.rows.push(TableRow {
                level: num(0)? as usize,
                n_flux: num(1)? as usize,
                n_pot: num(2)? as usize,
                h_max: num(3)?,
                errors: norm_cols.iter().map(|&i| num(i)).collect::<anyhow::Result<_>>()?,
            });
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_rates() {
        let r = observed_rates(&[0.4, 0.2, 0.1], &[], RateBasis::Halving).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let r = observed_rates(&[0.4, 0.1], &[], RateBasis::Halving).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-14);
        // Four times the DOFs at a quarter of the error: rate 2 in h.
        let r = observed_rates(&[0.4, 0.1], &[100, 400], RateBasis::Dofs).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn non_positive_errors_rejected() {
        assert_eq!(observed_rates(&[0.4, 0.0], &[], RateBasis::Halving), Err(Error::NonPositiveError(0.0)));
        assert!(matches!(observed_rates(&[-1.0, 0.5], &[], RateBasis::Halving), Err(Error::NonPositiveError(_))));
        assert!(observed_rates(&[1.0], &[], RateBasis::Halving).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = ConvergenceTable::new(vec!["flux_l2".into(), "potential".into()], RateBasis::Halving);
        for (l, e) in [0.4, 0.2, 0.1].iter().enumerate() {
            t.rows.push(TableRow { level: l, n_flux: 10 << (2 * l), n_pot: 8 << (2 * l), h_max: 0.5f64.powi(l as i32), errors: vec![*e, 1.0] });
        }
        let text = t.to_csv_string().unwrap();
        assert!(text.starts_with("level,n_flux,n_pot,h_max,flux_l2,potential,rate_flux_l2,rate_potential\n"));
        let back = ConvergenceTable::read_csv(text.as_bytes(), RateBasis::Halving).unwrap();
        assert_eq!(back.norms, t.norms);
        assert_eq!(back.column("flux_l2").unwrap(), vec![0.4, 0.2, 0.1]);
        assert!((back.last_rate("flux_l2").unwrap() - 1.0).abs() < 1e-12);
        assert!(back.last_rate("potential").unwrap().abs() < 1e-12);
    }
}
