//! CSV tables for plotting and regression diffs. Reals are written with 17
//! significant digits so that every value round-trips exactly.

use std::path::Path;

use crate::eigen::DispersionSample;
use crate::error::{Error, Result};
use crate::sim::FrontTrace;
use crate::speeds::{SpeedResult, WulffShape};
use crate::torus2d::UnboundednessReport;

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_reals(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| real(*x)).collect());
    }

    pub fn render(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Estimation(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()?)?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Columns `lambda, theta, lambda_cos_theta, mu, method, grid_N, residual`, plus
/// `reference_mu, agreement` when a reference is supplied.
pub fn dispersion_table(samples: &[DispersionSample], reference: Option<&[f64]>) -> Table {
    let mut header = vec!["lambda", "theta", "lambda_cos_theta", "mu", "method", "grid_N", "residual"];
    if reference.is_some() {
        header.extend(["reference_mu", "agreement"]);
    }
    let mut t = Table::new(&header);
    for (k, s) in samples.iter().enumerate() {
        let mut row = vec![
            real(s.lambda),
            real(s.theta),
            real(s.lambda_bar),
            real(s.mu),
            s.method.label().to_string(),
            s.grid_n.to_string(),
            real(s.residual),
        ];
        if let Some(r) = reference {
            row.push(real(r[k]));
            row.push(real((s.mu - r[k]).abs()));
        }
        t.push(row);
    }
    t
}

/// Polar table `theta, c_star, lambda_star, w, phi_min`.
pub fn speeds_table(speeds: &[SpeedResult], spreading: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["theta", "c_star", "lambda_star", "w", "phi_min"]);
    for (s, (w, phi)) in speeds.iter().zip(spreading) {
        t.push_reals(&[s.theta, s.c_star, s.lambda_star, *w, *phi]);
    }
    t
}

/// `theta, w, phi_min, x, y` for every direction of the shape.
pub fn wulff_table(shape: &WulffShape) -> Table {
    let mut t = Table::new(&["theta", "w", "phi_min", "x", "y"]);
    for k in 0..shape.theta_grid.len() {
        let p = shape.polygon[k];
        t.push_reals(&[shape.theta_grid[k], shape.w_values[k], shape.minimizer_phi[k], p[0], p[1]]);
    }
    t
}

pub fn vertices_table(shape: &WulffShape) -> Table {
    let mut t = Table::new(&["x", "y"]);
    for v in &shape.vertices {
        t.push_reals(v);
    }
    t
}

pub fn trace_table(traces: &[FrontTrace]) -> Table {
    let mut t = Table::new(&["theta", "t", "r"]);
    for tr in traces {
        for (time, r) in &tr.samples {
            t.push_reals(&[tr.theta, *time, *r]);
        }
    }
    t
}

pub fn contour_table(points: &[[f64; 2]]) -> Table {
    let mut t = Table::new(&["x", "y"]);
    for p in points {
        t.push_reals(p);
    }
    t
}

pub fn torus_table(report: &UnboundednessReport) -> Table {
    let mut t = Table::new(&["n", "mu", "c_star", "lambda_star", "width", "cells"]);
    for r in &report.rows {
        t.push(vec![
            r.n.to_string(),
            real(r.mu),
            real(r.c_star),
            real(r.lambda_star),
            real(r.width),
            r.cells.to_string(),
        ]);
    }
    t
}
