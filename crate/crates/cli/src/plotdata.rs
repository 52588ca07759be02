//! Aligned density columns for plotting tools. Files are CSV with a
//! `#`-prefixed header line, so gnuplot reads them with
//! `set datafile separator ","`.

use std::io::Write;

use cvdiscord_core::fock::CounterexampleReport;
use cvdiscord_core::numeric::normal_pdf;
use cvdiscord_core::sampler::format_f64;
use cvdiscord_core::verifier::ConditionalHistograms;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub columns: Vec<String>,
    pub x: Vec<f64>,
    pub series: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn new(x: Vec<f64>) -> Self {
        PlotData {
            columns: vec!["x".into()],
            x,
            series: Vec::new(),
        }
    }

    pub fn with_series(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push(name.into());
        self.series.push(values);
        self
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.x.is_empty() || self.series.is_empty() {
            return Err(CliError::Runtime("nothing to plot: no density values".into()));
        }
        if let Some(s) = self.series.iter().find(|s| s.len() != self.x.len()) {
            return Err(CliError::Runtime(format!(
                "plot columns are not aligned: {} x values but a series of {}",
                self.x.len(),
                s.len()
            )));
        }
        Ok(())
    }

    pub fn write<W: Write + ?Sized>(&self, w: &mut W) -> Result<(), CliError> {
        self.validate()?;
        writeln!(w, "# {}", self.columns.join(","))?;
        for (i, x) in self.x.iter().enumerate() {
            write!(w, "{}", format_f64(*x))?;
            for s in &self.series {
                write!(w, ",{}", format_f64(s[i]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Unconditional and both conditional densities on the shared bin centers.
pub fn from_histograms(h: &ConditionalHistograms) -> PlotData {
    PlotData::new(h.unconditional.centers())
        .with_series("unconditional", h.unconditional.density())
        .with_series("plus", h.plus.density())
        .with_series("minus", h.minus.density())
}

/// Adds the Gaussian whose variance is the mean of the two conditional
/// variances, centred on the unconditional mean.
pub fn with_average_variance(pd: PlotData, mean: f64, var_plus: f64, var_minus: f64) -> PlotData {
    let var = 0.5 * (var_plus + var_minus);
    let curve = pd.x.iter().map(|&x| normal_pdf(x, mean, var)).collect();
    pd.with_series("average_variance_gaussian", curve)
}

pub fn from_counterexample(rep: &CounterexampleReport) -> Result<PlotData, CliError> {
    let (grid, pu, pp, pm) = rep
        .curves
        .as_ref()
        .ok_or_else(|| CliError::Runtime(format!("{} carries no density curves", rep.name)))?;
    Ok(PlotData::new(grid.points().to_vec())
        .with_series("unconditional", pu.clone())
        .with_series("plus", pp.clone())
        .with_series("minus", pm.clone()))
}
