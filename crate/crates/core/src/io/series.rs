//! Energy and dissipation time series as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::demag::DemagTensor;
use crate::dynamics::Trajectory;
use crate::energy::{dissipation, energy_series};
use crate::error::{Error, Result};
use crate::lowerorder::{AppliedField, MaterialParams};

pub const SERIES_HEADER: &str = "t,E_ex,E_dmi,E_lo,E_appl,E_total,E_helical,D_alpha,D_f,residual";

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SeriesRecord {
    pub t: f64,
    pub e_ex: f64,
    pub e_dmi: f64,
    pub e_lo: f64,
    pub e_appl: f64,
    pub e_total: f64,
    pub e_helical: f64,
    pub d_alpha: f64,
    pub d_f: f64,
    /// Energy-law residual `E_h(t) + D(t) − E_h(0)`.
    pub residual: f64,
}

impl SeriesRecord {
    fn fields(&self) -> [f64; 10] {
        [
            self.t,
            self.e_ex,
            self.e_dmi,
            self.e_lo,
            self.e_appl,
            self.e_total,
            self.e_helical,
            self.d_alpha,
            self.d_f,
            self.residual,
        ]
    }

    fn from_fields(v: [f64; 10]) -> Self {
        SeriesRecord {
            t: v[0],
            e_ex: v[1],
            e_dmi: v[2],
            e_lo: v[3],
            e_appl: v[4],
            e_total: v[5],
            e_helical: v[6],
            d_alpha: v[7],
            d_f: v[8],
            residual: v[9],
        }
    }
}

/// One record per stored time of `traj`.
pub fn series_records(
    traj: &Trajectory<f64>,
    f: &AppliedField<f64>,
    params: &MaterialParams<f64>,
    tensor: Option<&DemagTensor<f64>>,
) -> Result<Vec<SeriesRecord>> {
    let energies = energy_series(traj, f, params, tensor)?;
    let n = traj.len();
    let (da, df) = if n >= 2 {
        let d = dissipation(traj, f)?;
        (d.alpha_term, d.field_term)
    } else {
        (vec![0.0; n], vec![0.0; n])
    };
    let e0 = energies[0].helical_total;
    Ok((0..n)
        .map(|k| {
            let e = energies[k];
            SeriesRecord {
                t: traj.times[k],
                e_ex: e.exchange,
                e_dmi: e.dmi,
                e_lo: e.lower_order,
                e_appl: e.applied,
                e_total: e.total,
                e_helical: e.helical_total,
                d_alpha: da[k],
                d_f: df[k],
                residual: e.helical_total + da[k] + df[k] - e0,
            }
        })
        .collect())
}

pub fn format_series(records: &[SeriesRecord]) -> String {
    let mut s = String::with_capacity(32 + records.len() * 200);
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for r in records {
        let row: Vec<String> = r.fields().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn write_series(records: &[SeriesRecord], path: &Path) -> Result<()> {
    fs::write(path, format_series(records))?;
    Ok(())
}

pub fn parse_series(text: &str) -> Result<Vec<SeriesRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SERIES_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "unexpected series header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let vals: Vec<&str> = l.split(',').collect();
            if vals.len() != 10 {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: format!("expected 10 columns, found {}", vals.len()),
                });
            }
            let mut out = [0.0; 10];
            for (slot, v) in out.iter_mut().zip(&vals) {
                *slot = v.trim().parse().map_err(|_| Error::Parse {
                    line: k + 1,
                    msg: format!("bad number '{v}'"),
                })?;
            }
            Ok(SeriesRecord::from_fields(out))
        })
        .collect()
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRecord>> {
    parse_series(&fs::read_to_string(path)?)
}
