//! Grid sweeps over the objective coefficients, one trained and evaluated
//! run per cell, sharing the base seed so cells are comparable.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::TrainMode;

use super::train::run_experiment;
use super::TrainConfig;

/// Lists of values to combine; omitted fields keep the base config value.
/// The Cartesian product is taken in field order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub mode: Option<Vec<TrainMode>>,
    pub seed: Option<Vec<u64>>,
    pub lambda: Option<Vec<f64>>,
    pub delta0: Option<Vec<f64>>,
    pub blur: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
}

impl SweepGrid {
    pub fn from_json(text: &str) -> Result<SweepGrid> {
        Ok(serde_json::from_str(text)?)
    }

    /// All configurations of the product over the base config.
    pub fn cells(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let modes = self.mode.clone().unwrap_or_else(|| vec![base.mode]);
        let seeds = self.seed.clone().unwrap_or_else(|| vec![base.seed]);
        let lambdas = self.lambda.clone().unwrap_or_else(|| vec![base.lambda]);
        let delta0s = self.delta0.clone().unwrap_or_else(|| vec![base.delta0]);
        let blurs = self.blur.clone().unwrap_or_else(|| vec![base.blur]);
        let betas = self.beta.clone().unwrap_or_else(|| vec![base.beta]);
        let taus = self.tau.clone().unwrap_or_else(|| vec![base.tau]);

        let mut cells = Vec::new();
        for &mode in &modes {
            for &seed in &seeds {
                for &lambda in &lambdas {
                    for &delta0 in &delta0s {
                        for &blur in &blurs {
                            for &beta in &betas {
                                for &tau in &taus {
                                    cells.push(TrainConfig {
                                        mode,
                                        seed,
                                        lambda,
                                        delta0,
                                        blur,
                                        beta,
                                        tau,
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// One sweep cell's outcome; `error` is set (and metrics empty) when the
/// cell failed, without aborting the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub mode: TrainMode,
    pub seed: u64,
    pub lambda: f64,
    pub delta0: f64,
    pub blur: f64,
    pub beta: f64,
    pub tau: f64,
    pub accuracy: Option<f64>,
    pub map_known: Option<f64>,
    pub ap_unknown: Option<f64>,
    pub wi: Option<f64>,
    pub aose: Option<usize>,
    pub sigma_mu: Option<f64>,
    pub dunn: Option<f64>,
    pub calinski_harabasz: Option<f64>,
    pub hubert: Option<f64>,
    pub davies_bouldin: Option<f64>,
    pub xie_beni: Option<f64>,
    pub error: Option<String>,
}

/// Train and evaluate every cell of the grid sequentially (cells are
/// independent; per-cell errors are recorded, not fatal).
pub fn run_sweep(base: &TrainConfig, grid: &SweepGrid) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (cell, cfg) in grid.cells(base).into_iter().enumerate() {
        let mut row = SweepRow {
            cell,
            mode: cfg.mode,
            seed: cfg.seed,
            lambda: cfg.lambda,
            delta0: cfg.delta0,
            blur: cfg.blur,
            beta: cfg.beta,
            tau: cfg.tau,
            accuracy: None,
            map_known: None,
            ap_unknown: None,
            wi: None,
            aose: None,
            sigma_mu: None,
            dunn: None,
            calinski_harabasz: None,
            hubert: None,
            davies_bouldin: None,
            xie_beni: None,
            error: None,
        };
        match run_experiment(&cfg) {
            Ok(out) => {
                let m = out.report.metrics.expect("experiment always evaluates");
                row.accuracy = Some(m.accuracy);
                row.map_known = Some(m.map_known);
                row.ap_unknown = m.ap_unknown;
                row.wi = Some(m.wi);
                row.aose = Some(m.aose);
                row.sigma_mu = m.sigma_mu;
                if let Some(c) = m.cluster {
                    row.dunn = Some(c.dunn);
                    row.calinski_harabasz = Some(c.calinski_harabasz);
                    row.hubert = Some(c.hubert);
                    row.davies_bouldin = Some(c.davies_bouldin);
                    row.xie_beni = Some(c.xie_beni);
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    rows
}

pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
        v.as_ref().map_or(String::new(), |x| x.to_string())
    }
    let mut out = String::from(
        "cell,mode,seed,lambda,delta0,blur,beta,tau,accuracy,map_known,ap_unknown,wi,aose,sigma_mu,dunn,calinski_harabasz,hubert,davies_bouldin,xie_beni,error\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.cell,
            r.mode,
            r.seed,
            r.lambda,
            r.delta0,
            r.blur,
            r.beta,
            r.tau,
            opt(&r.accuracy),
            opt(&r.map_known),
            opt(&r.ap_unknown),
            opt(&r.wi),
            opt(&r.aose),
            opt(&r.sigma_mu),
            opt(&r.dunn),
            opt(&r.calinski_harabasz),
            opt(&r.hubert),
            opt(&r.davies_bouldin),
            opt(&r.xie_beni),
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_product_counts() {
        let grid = SweepGrid {
            lambda: Some(vec![0.0, 1.7e-3]),
            blur: Some(vec![0.1, 0.2]),
            ..SweepGrid::default()
        };
        let cells = grid.cells(&TrainConfig::default());
        assert_eq!(cells.len(), 4);
        // lambda = 0 cell is the ablation row
        assert!(cells.iter().any(|c| c.lambda == 0.0));
    }

    #[test]
    fn grid_parses_from_json() {
        let grid = SweepGrid::from_json(r#"{"blur": [0.5, 0.3, 0.2, 0.15, 0.1]}"#).unwrap();
        assert_eq!(grid.blur.as_ref().unwrap().len(), 5);
        assert!(SweepGrid::from_json(r#"{"nope": []}"#).is_err());
    }

    #[test]
    fn sweep_runs_cells_and_reports_errors_per_cell() {
        let base = crate::pipeline::train::tests::fast_cfg(TrainMode::OdSn);
        let base = TrainConfig { iterations: 20, ..base };
        let grid = SweepGrid {
            // second blur is invalid: the cell must fail without killing the sweep
            blur: Some(vec![0.1, -1.0]),
            ..SweepGrid::default()
        };
        let rows = run_sweep(&base, &grid);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_none());
        assert!(rows[0].map_known.is_some());
        assert!(rows[1].error.is_some());

        let csv = sweep_rows_to_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("cell,mode,seed"));
    }
}
