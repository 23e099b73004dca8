use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arima::{fit_with, ArimaModel, FitOptions, FitReport};
use super::order::ArimaOrder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub report: FitReport,
    /// One-step-ahead MSE over the holdout with the fitted coefficients held fixed.
    pub holdout_mse: f64,
    pub model: ArimaModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub order: ArimaOrder,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    /// Ascending holdout MSE; ties go to the simpler, then lexicographically smaller order.
    pub ranked: Vec<GridEntry>,
    pub failures: Vec<GridFailure>,
}

pub fn grid_select(train: &[f64], holdout: &[f64], orders: &[ArimaOrder]) -> Result<GridOutcome> {
    grid_select_with(train, holdout, orders, &FitOptions::default())
}

pub fn grid_select_with(
    train: &[f64],
    holdout: &[f64],
    orders: &[ArimaOrder],
    opts: &FitOptions,
) -> Result<GridOutcome> {
    if orders.is_empty() {
        return Err(Error::invalid("order grid is empty"));
    }
    if holdout.is_empty() {
        return Err(Error::insufficient("holdout is empty"));
    }
    let results: Vec<(ArimaOrder, Result<GridEntry>)> =
        orders.par_iter().map(|&order| (order, evaluate(train, holdout, order, opts))).collect();

    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for (order, result) in results {
        match result {
            Ok(entry) => ranked.push(entry),
            Err(e) => failures.push(GridFailure { order, error: e.to_string() }),
        }
    }
    if ranked.is_empty() {
        return Err(Error::AllFitsFailed(failures.iter().map(|f| format!("{}: {}", f.order, f.error)).collect()));
    }
    ranked.sort_by(|a, b| {
        let (oa, ob) = (a.report.order, b.report.order);
        a.holdout_mse.total_cmp(&b.holdout_mse).then(oa.complexity().cmp(&ob.complexity())).then(oa.cmp(&ob))
    });
    failures.sort_by_key(|f| f.order);
    Ok(GridOutcome { ranked, failures })
}

fn evaluate(train: &[f64], holdout: &[f64], order: ArimaOrder, opts: &FitOptions) -> Result<GridEntry> {
    let (model, report) = fit_with(train, order, opts)?;
    let holdout_mse = holdout_mse(&model, holdout);
    if !holdout_mse.is_finite() {
        return Err(Error::invalid(format!("{order} diverged on the holdout")));
    }
    Ok(GridEntry { report, holdout_mse, model })
}

/// Rolling one-step errors over `holdout`, forecasts clamped at zero.
pub fn holdout_mse(model: &ArimaModel, holdout: &[f64]) -> f64 {
    let mut state = model.clone();
    let sse: f64 = holdout
        .iter()
        .map(|&x| {
            let predicted = state.advance(x).max(0.0);
            (x - predicted).powi(2)
        })
        .sum();
    sse / holdout.len() as f64
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::seed::rng_from;

    fn ar2(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let (mut a, mut b) = (0.0, 0.0);
        (0..n + 100)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                let x = 0.5 * a + 0.3 * b + e;
                b = a;
                a = x;
                x + 100.0
            })
            .skip(100)
            .collect()
    }

    #[test]
    fn single_order_ranks_first() {
        let x = ar2(600, 1);
        let out = grid_select(&x[..500], &x[500..], &[ArimaOrder::new(1, 0, 0)]).unwrap();
        assert_eq!(out.ranked.len(), 1);
        assert_eq!(out.ranked[0].report.order, ArimaOrder::new(1, 0, 0));
    }

    #[test]
    fn ranking_is_non_decreasing() {
        let x = ar2(3000, 2);
        let grid = [ArimaOrder::new(1, 1, 1), ArimaOrder::new(1, 2, 1), ArimaOrder::new(2, 1, 2), ArimaOrder::new(2, 2, 2)];
        let out = grid_select(&x[..2000], &x[2000..], &grid).unwrap();
        assert_eq!(out.ranked.len(), 4);
        assert!(out.ranked.windows(2).all(|w| w[0].holdout_mse <= w[1].holdout_mse));
    }

    #[test]
    fn true_order_wins_repeated_trials() {
        let grid = [
            ArimaOrder::new(1, 0, 0),
            ArimaOrder::new(2, 0, 0),
            ArimaOrder::new(0, 0, 1),
            ArimaOrder::new(0, 1, 1),
            ArimaOrder::new(1, 1, 0),
        ];
        let wins = (0..20)
            .filter(|seed| {
                let x = ar2(3000, 1000 + seed);
                let out = grid_select(&x[..2000], &x[2000..], &grid).unwrap();
                out.ranked[0].report.order == ArimaOrder::new(2, 0, 0)
            })
            .count();
        assert!(wins >= 16, "AR(2) won {wins}/20");
    }

    #[test]
    fn failures_are_reported() {
        let x = ar2(40, 3);
        let grid = [ArimaOrder::new(1, 0, 0), ArimaOrder::new(5, 0, 5)];
        let out = grid_select(&x[..30], &x[30..], &grid).unwrap();
        assert_eq!(out.ranked.len(), 1);
        assert_eq!(out.failures[0].order, ArimaOrder::new(5, 0, 5));
        assert!(matches!(grid_select(&x[..30], &x[30..], &grid[1..]), Err(Error::AllFitsFailed(_))));
        assert!(grid_select(&x, &x, &[]).is_err());
    }
}
