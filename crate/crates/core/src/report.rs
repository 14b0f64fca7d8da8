//! Plain CSV tables: `#`-prefixed `key=value` metadata lines, one header
//! line, then rows. Floats use the shortest representation that parses back
//! to the same value, so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::RapmParams;
use crate::solver::{Diagnostics, SolverConfig};

/// Shortest round-trip decimal for `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn meta_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.metadata.push((key.into(), fmt_f64(value)));
        self
    }

    pub fn push_numeric(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }
}

/// Metadata lines describing parameters and the effective discretization.
pub fn run_metadata(
    table: &mut CsvTable,
    params: &RapmParams,
    radius: f64,
    cfg: &SolverConfig,
    order: crate::mesh::ElementOrder,
    diag: &Diagnostics,
) {
    let dc = params.derived();
    table
        .meta_f64("rate", params.rate())
        .meta_f64("sigma", params.sigma())
        .meta_f64("strike", params.strike())
        .meta_f64("expiry", params.expiry())
        .meta_f64("risk_premium", params.risk_premium())
        .meta_f64("txn_cost", params.txn_cost())
        .meta_f64("t_star", dc.t_star)
        .meta_f64("tau_star", dc.tau_star)
        .meta_f64("tau_max", dc.tau_max)
        .meta_f64("d_coeff", dc.d_coeff)
        .meta_f64("c_r", dc.c_r)
        .meta_f64("radius", radius)
        .meta("order", order)
        .meta("nonlinearity", cfg.nonlinearity)
        .meta("mass", cfg.mass_mode)
        .meta("power", cfg.power_mode)
        .meta("boundary_v", cfg.boundary_v)
        .meta("boundary_weighting", cfg.boundary_weighting)
        .meta_f64("theta", cfg.theta)
        .meta("rannacher", cfg.rannacher_substeps)
        .meta_f64("dx_effective", diag.dx)
        .meta_f64("dtau_effective", diag.dtau)
        .meta("steps", diag.steps)
        .meta_f64("dtau_over_dx2", diag.dtau_dx2)
        .meta_f64("max_abs_v", diag.max_abs_v);
}

/// Option prices at `t = 0` next to the linear Black–Scholes reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub metadata: Vec<(String, String)>,
    /// `(S, V_rapm, V_bs, V_rapm − V_bs)`
    pub rows: Vec<[f64; 4]>,
}

impl PriceTable {
    pub fn new(metadata: Vec<(String, String)>, prices: &[(f64, f64)], params: &RapmParams) -> Result<Self> {
        let rows: Vec<[f64; 4]> = prices
            .iter()
            .map(|&(s, v)| {
                let bs = crate::model::bs_call_price(s, 0.0, params);
                [s, v, bs, v - bs]
            })
            .collect();
        if rows.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::InvalidConfig("spots must be strictly increasing".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("price table holds non-finite values".into()));
        }
        Ok(Self { metadata, rows })
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["S", "V_rapm", "V_bs", "diff"]);
        t.metadata = self.metadata.clone();
        for r in &self.rows {
            t.push_numeric(r);
        }
        t
    }
}

/// Gnuplot script plotting both price columns of a `_price.csv` file with a
/// vertical marker at the strike.
pub fn price_plot_script(csv_name: &str, strike: f64, title: &str) -> String {
    format!(
        "# gnuplot script\n\
         set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key top left\n\
         set xlabel 'S'\n\
         set ylabel 'V(S, 0)'\n\
         set title '{title}'\n\
         set arrow from {k},graph 0 to {k},graph 1 nohead dashtype 2\n\
         plot '{csv_name}' using 1:2 skip 1 with lines title 'RAPM (FEM)', \\\n\
         \x20    '{csv_name}' using 1:3 skip 1 with lines title 'Black-Scholes'\n",
        k = fmt_f64(strike),
    )
}
