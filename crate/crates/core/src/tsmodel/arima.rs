use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::difference::{difference, undifference};
use super::order::ArimaOrder;
use super::roots::{is_invertible, is_stationary, reflect_inside};
use crate::error::{Error, Result};

pub const MODEL_SCHEMA: u32 = 1;

/// A fitted ARIMA model together with the recent history needed to forecast.
///
/// The differenced series `w` is modelled as `w_t = intercept + z_t` with
/// `z_t = sum(ar[i] z_{t-1-i}) + e_t + sum(ma[j] e_{t-1-j})`. The intercept is
/// only estimated for undifferenced models; with `d >= 1` it is zero so that
/// pure integrated models extrapolate polynomially instead of drifting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub intercept: f64,
    pub residual_variance: f64,
    /// Most recent raw observations, oldest first (up to `p + d`).
    pub last_observations: Vec<f64>,
    /// Most recent one-step residuals, oldest first (up to `q`).
    pub last_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub order: ArimaOrder,
    /// In-sample one-step mean squared error.
    pub mse: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative decrease of the sum of squares below which the search stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub order_cap: usize,
    /// Start AR coefficients from the Yule-Walker solution instead of zeros.
    pub yule_walker_start: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 500, order_cap: super::order::DEFAULT_ORDER_CAP, yule_walker_start: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub values: Vec<f64>,
    /// Some raw forecast fell below zero and was clamped.
    pub clamped: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema: u32,
    #[serde(flatten)]
    model: ArimaModel,
}

pub fn fit(values: &[f64], order: ArimaOrder) -> Result<(ArimaModel, FitReport)> {
    fit_with(values, order, &FitOptions::default())
}

/// Conditional-sum-of-squares fit.
///
/// The first `max(p, q)` residuals of the differenced series are fixed at zero
/// and the remaining squared one-step errors are minimised by damped
/// Gauss-Newton (Levenberg-Marquardt) with analytic derivatives. Steps that
/// leave the stationary/invertible region are rejected.
pub fn fit_with(values: &[f64], order: ArimaOrder, opts: &FitOptions) -> Result<(ArimaModel, FitReport)> {
    order.validate_with_cap(opts.order_cap)?;
    if values.len() < order.min_series_len() {
        return Err(Error::insufficient(format!(
            "{order} needs at least {} samples, got {}",
            order.min_series_len(),
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("series contains {v}")));
    }
    let ArimaOrder { p, d, q } = order;
    let w = difference(values, d)?;
    let intercept = if d == 0 { mean(&w) } else { 0.0 };
    let z: Vec<f64> = w.iter().map(|v| v - intercept).collect();
    let lags = order.conditioning_lags();

    let spread = z.iter().fold(0.0f64, |m, v| m.max((v - z[0]).abs()));
    if p + q > 0 && spread <= 1e-12 * (1.0 + z[0].abs()) {
        // Every differenced value is the same: the series is an exact polynomial.
        let model = ArimaModel {
            order,
            ar_coeffs: vec![0.0; p],
            ma_coeffs: vec![0.0; q],
            intercept: mean(&w),
            residual_variance: 0.0,
            last_observations: tail(values, p + d),
            last_residuals: vec![0.0; q],
        };
        return Ok((model, FitReport { order, mse: 0.0, converged: true, iterations: 0 }));
    }

    let mut ar = vec![0.0; p];
    if p > 0 && opts.yule_walker_start {
        if let Some(start) = yule_walker(&z, p).filter(|c| is_stationary(c)) {
            ar = start;
        }
    }
    let mut params: Vec<f64> = ar.into_iter().chain(std::iter::repeat(0.0).take(q)).collect();
    let (mut iterations, mut converged) = (0, true);
    if p + q > 0 {
        let out = levenberg_marquardt(&z, p, q, params, opts);
        params = out.params;
        iterations = out.iterations;
        converged = out.converged;
    }

    let (mut ar, mut ma) = (params[..p].to_vec(), params[p..].to_vec());
    if !is_stationary(&ar) {
        match reflect_inside(&ar) {
            Some(fixed) => ar = fixed,
            None => converged = false,
        }
    }
    if !is_invertible(&ma) {
        let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
        match reflect_inside(&neg) {
            Some(fixed) => ma = fixed.iter().map(|t| -t).collect(),
            None => converged = false,
        }
    }

    let e = css_residuals(&z, &ar, &ma, lags);
    let used = (z.len() - lags) as f64;
    let sse: f64 = e[lags..].iter().map(|v| v * v).sum();
    let mse = sse / used;
    let model = ArimaModel {
        order,
        ar_coeffs: ar,
        ma_coeffs: ma,
        intercept,
        residual_variance: mse,
        last_observations: tail(values, p + d),
        last_residuals: tail(&e, q),
    };
    Ok((model, FitReport { order, mse, converged, iterations }))
}

impl ArimaModel {
    /// A model with explicit coefficients and state.
    pub fn new(
        order: ArimaOrder,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        intercept: f64,
        last_observations: Vec<f64>,
        last_residuals: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            order,
            ar_coeffs,
            ma_coeffs,
            intercept,
            residual_variance: 0.0,
            last_observations,
            last_residuals,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let ArimaOrder { p, d, q } = self.order;
        if self.ar_coeffs.len() != p || self.ma_coeffs.len() != q {
            return Err(Error::Format(format!("coefficient counts do not match {}", self.order)));
        }
        if self.last_observations.len() < d || self.last_observations.len() > p + d {
            return Err(Error::Format(format!("{} needs between {d} and {} stored observations", self.order, p + d)));
        }
        if self.last_residuals.len() > q {
            return Err(Error::Format(format!("{} stores at most {q} residuals", self.order)));
        }
        if !(self.residual_variance >= 0.0) {
            return Err(Error::Format("residual variance must be non-negative".into()));
        }
        Ok(())
    }

    /// Point forecasts before clamping: future errors are zero, the AR
    /// recursion runs on its own forecasts, and the result is re-integrated.
    pub fn forecast_raw(&self, horizon: usize) -> Vec<f64> {
        let ArimaOrder { p, d, q } = self.order;
        let diffed = if self.last_observations.len() > d {
            difference(&self.last_observations, d).expect("length checked")
        } else {
            Vec::new()
        };
        let mut z: Vec<f64> = std::iter::repeat(0.0)
            .take(p.saturating_sub(diffed.len()))
            .chain(diffed.iter().map(|w| w - self.intercept))
            .collect();
        let mut e: Vec<f64> =
            std::iter::repeat(0.0).take(q - self.last_residuals.len()).chain(self.last_residuals.iter().copied()).collect();

        let mut w = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let ar: f64 = self.ar_coeffs.iter().enumerate().map(|(i, c)| c * z[z.len() - 1 - i]).sum();
            let ma: f64 = self.ma_coeffs.iter().enumerate().map(|(j, c)| c * e[e.len() - 1 - j]).sum();
            let next = ar + ma;
            z.push(next);
            e.push(0.0);
            w.push(next + self.intercept);
        }
        let anchor = &self.last_observations[self.last_observations.len() - d..];
        undifference(&w, anchor, d).expect("anchor has d values")
    }

    /// Forecasts `horizon` steps ahead, clamping negative rates to zero.
    pub fn forecast(&self, horizon: usize) -> Forecast {
        let mut clamped = false;
        let values = self
            .forecast_raw(horizon)
            .into_iter()
            .map(|v| {
                if v < 0.0 {
                    clamped = true;
                    0.0
                } else {
                    v
                }
            })
            .collect();
        Forecast { values, clamped }
    }

    /// Feeds one new observation with fixed coefficients and returns the
    /// (unclamped) one-step prediction that was made for it.
    pub fn advance(&mut self, value: f64) -> f64 {
        let ArimaOrder { p, d, q } = self.order;
        let predicted = self.forecast_raw(1)[0];
        self.last_observations.push(value);
        trim_front(&mut self.last_observations, p + d);
        if q > 0 {
            self.last_residuals.push(value - predicted);
            trim_front(&mut self.last_residuals, q);
        }
        predicted
    }

    /// Same coefficients, state rebuilt from `history` under the fitting
    /// convention (first `max(p, q)` residuals zero).
    pub fn condition(&self, history: &[f64]) -> Result<ArimaModel> {
        let ArimaOrder { p, d, q } = self.order;
        let w = difference(history, d)?;
        let z: Vec<f64> = w.iter().map(|v| v - self.intercept).collect();
        let e = css_residuals(&z, &self.ar_coeffs, &self.ma_coeffs, self.order.conditioning_lags());
        Ok(ArimaModel {
            last_observations: tail(history, p + d),
            last_residuals: tail(&e, q),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument { schema: MODEL_SCHEMA, model: self.clone() })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.schema != MODEL_SCHEMA {
            return Err(Error::Format(format!("unsupported model schema {}", doc.schema)));
        }
        doc.model.check()?;
        Ok(doc.model)
    }
}

/// One-step residuals of the centred, differenced series with the first
/// `lags` residuals held at zero.
pub(crate) fn css_residuals(z: &[f64], ar: &[f64], ma: &[f64], lags: usize) -> Vec<f64> {
    let mut e = vec![0.0; z.len()];
    for t in lags..z.len() {
        let mut pred = 0.0;
        for (i, c) in ar.iter().enumerate() {
            pred += c * z[t - 1 - i];
        }
        for (j, c) in ma.iter().enumerate() {
            pred += c * e[t - 1 - j];
        }
        e[t] = z[t] - pred;
    }
    e
}

struct Solution {
    params: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Sum of squares, gradient `J'e` and Gauss-Newton matrix `J'J` at `params`.
fn normal_equations(z: &[f64], p: usize, q: usize, params: &[f64]) -> (f64, DMatrix<f64>, DVector<f64>) {
    let k = p + q;
    let lags = p.max(q);
    let (ar, ma) = params.split_at(p);
    let n = z.len();
    let e = css_residuals(z, ar, ma, lags);
    // de[k][t]: derivative of e_t with respect to parameter k.
    let mut de = vec![vec![0.0; n]; k];
    let mut jtj = DMatrix::<f64>::zeros(k, k);
    let mut jte = DVector::<f64>::zeros(k);
    let mut sse = 0.0;
    let mut row = vec![0.0; k];
    for t in lags..n {
        for (idx, slot) in row.iter_mut().enumerate() {
            let mut g = if idx < p { -z[t - 1 - idx] } else { -e[t - 1 - (idx - p)] };
            for (j, c) in ma.iter().enumerate() {
                g -= c * de[idx][t - 1 - j];
            }
            *slot = g;
        }
        for idx in 0..k {
            de[idx][t] = row[idx];
        }
        for a in 0..k {
            jte[a] += row[a] * e[t];
            for b in a..k {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
        sse += e[t] * e[t];
    }
    for a in 0..k {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    (sse, jtj, jte)
}

fn sum_of_squares(z: &[f64], p: usize, q: usize, params: &[f64]) -> f64 {
    let lags = p.max(q);
    let (ar, ma) = params.split_at(p);
    css_residuals(z, ar, ma, lags)[lags..].iter().map(|v| v * v).sum()
}

fn admissible(p: usize, params: &[f64]) -> bool {
    params.iter().all(|v| v.is_finite()) && is_stationary(&params[..p]) && is_invertible(&params[p..])
}

fn levenberg_marquardt(z: &[f64], p: usize, q: usize, start: Vec<f64>, opts: &FitOptions) -> Solution {
    const MAX_DAMPING: f64 = 1e16;
    let k = p + q;
    let mut params = start;
    let (mut sse, mut jtj, mut jte) = normal_equations(z, p, q, &params);
    let mut damping = 1e-3;
    for iteration in 1..=opts.max_iterations {
        if jte.iter().all(|g| *g == 0.0) {
            return Solution { params, iterations: iteration - 1, converged: true };
        }
        let mut lhs = jtj.clone();
        for i in 0..k {
            lhs[(i, i)] += damping * jtj[(i, i)].max(1e-12);
        }
        let step = lhs.lu().solve(&(-&jte));
        let candidate: Option<Vec<f64>> =
            step.map(|s| params.iter().zip(s.iter()).map(|(a, b)| a + b).collect::<Vec<f64>>()).filter(|c| admissible(p, c.as_slice()));
        let improved = candidate.and_then(|c| {
            let c_sse = sum_of_squares(z, p, q, &c);
            (c_sse < sse).then_some((c, c_sse))
        });
        match improved {
            Some((c, c_sse)) => {
                let relative = (sse - c_sse) / sse.max(f64::MIN_POSITIVE);
                params = c;
                (sse, jtj, jte) = normal_equations(z, p, q, &params);
                damping = (damping / 10.0).max(1e-12);
                if relative < opts.tolerance {
                    return Solution { params, iterations: iteration, converged: true };
                }
            }
            None => {
                damping *= 10.0;
                if damping > MAX_DAMPING {
                    // No descent direction left: a (possibly boundary) minimum.
                    return Solution { params, iterations: iteration, converged: true };
                }
            }
        }
    }
    Solution { params, iterations: opts.max_iterations, converged: false }
}

/// Yule-Walker AR coefficients from biased sample autocovariances.
pub fn yule_walker(z: &[f64], p: usize) -> Option<Vec<f64>> {
    if p == 0 {
        return Some(Vec::new());
    }
    if z.len() <= p {
        return None;
    }
    let m = mean(z);
    let n = z.len() as f64;
    let gamma: Vec<f64> = (0..=p)
        .map(|k| z.iter().zip(&z[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n)
        .collect();
    if gamma[0] <= 0.0 {
        return None;
    }
    let r = DMatrix::from_fn(p, p, |i, j| gamma[i.abs_diff(j)]);
    let rhs = DVector::from_fn(p, |i, _| gamma[i + 1]);
    r.lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn tail(v: &[f64], n: usize) -> Vec<f64> {
    v[v.len().saturating_sub(n)..].to_vec()
}

fn trim_front(v: &mut Vec<f64>, keep: usize) {
    if v.len() > keep {
        v.drain(..v.len() - keep);
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::seed::rng_from;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let mut x = Vec::with_capacity(n);
        let mut prev = 0.0;
        for _ in 0..n + 200 {
            let e: f64 = rng.sample(StandardNormal);
            prev = phi * prev + e;
            x.push(prev);
        }
        x.split_off(200)
    }

    #[test]
    fn recovers_ar1_like_closed_form_yule_walker() {
        let x = ar1(0.8, 10_000, 7);
        let (model, report) = fit(&x, ArimaOrder::new(1, 0, 0)).unwrap();
        let phi = model.ar_coeffs[0];
        assert!((0.75..=0.85).contains(&phi), "phi = {phi}");
        // Lag-one autocorrelation is the closed-form AR(1) Yule-Walker estimate.
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let g0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
        let g1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        assert!((phi - g1 / g0).abs() < 0.01);
        assert!(report.converged);
    }

    #[test]
    fn constant_series_random_walk_has_no_error() {
        let x = vec![7.0; 50];
        let (model, report) = fit(&x, ArimaOrder::new(0, 1, 0)).unwrap();
        assert_eq!(report.mse, 0.0);
        assert_eq!(model.residual_variance, 0.0);
        assert_eq!(model.forecast(3).values, vec![7.0; 3]);
    }

    #[test]
    fn degenerate_differenced_series() {
        let x: Vec<f64> = (0..100).map(|i| 3.0 * i as f64).collect();
        let (model, report) = fit(&x, ArimaOrder::new(1, 1, 1)).unwrap();
        assert!(report.converged);
        assert_eq!(model.ar_coeffs, vec![0.0]);
        assert_eq!(model.ma_coeffs, vec![0.0]);
        assert_eq!(model.residual_variance, 0.0);
        assert_eq!(model.forecast(2).values, vec![300.0, 303.0]);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(fit(&[1.0; 20], ArimaOrder::new(1, 0, 1)).is_err());
    }

    #[test]
    fn random_walk_forecast_is_flat() {
        let m = ArimaModel::new(ArimaOrder::new(0, 1, 0), vec![], vec![], 0.0, vec![42.0], vec![]).unwrap();
        assert_eq!(m.forecast(5).values, vec![42.0; 5]);
    }

    #[test]
    fn double_integration_extrapolates_linearly() {
        let m = ArimaModel::new(ArimaOrder::new(0, 2, 0), vec![], vec![], 0.0, vec![10.0, 13.0], vec![]).unwrap();
        assert_eq!(m.forecast(3).values, vec![16.0, 19.0, 22.0]);
    }

    #[test]
    fn ar1_decays_geometrically() {
        let m = ArimaModel::new(ArimaOrder::new(1, 0, 0), vec![0.5], vec![], 0.0, vec![10.0], vec![]).unwrap();
        assert_eq!(m.forecast_raw(3), vec![5.0, 2.5, 1.25]);
    }

    #[test]
    fn negative_forecasts_are_clamped_and_flagged() {
        let m = ArimaModel::new(ArimaOrder::new(0, 2, 0), vec![], vec![], 0.0, vec![10.0, 4.0], vec![]).unwrap();
        let f = m.forecast(2);
        assert_eq!(f.values, vec![0.0, 0.0]);
        assert!(f.clamped);
    }

    #[test]
    fn advance_matches_refit_state() {
        let x: Vec<f64> = ar1(0.5, 600, 3).iter().map(|v| v + 50.0).collect();
        let (model, _) = fit(&x[..500], ArimaOrder::new(1, 1, 1)).unwrap();
        let mut stepped = model.clone();
        for v in &x[500..] {
            stepped.advance(*v);
        }
        let rebuilt = model.condition(&x).unwrap();
        let (a, b) = (stepped.forecast_raw(4), rebuilt.forecast_raw(4));
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn json_round_trip_and_schema_check() {
        let x = ar1(0.6, 400, 11);
        let (model, _) = fit(&x, ArimaOrder::new(2, 0, 1)).unwrap();
        let text = model.to_json().unwrap();
        assert!(text.contains("\"schema\": 1"));
        assert_eq!(ArimaModel::from_json(&text).unwrap(), model);
        let bumped = text.replace("\"schema\": 1", "\"schema\": 2");
        assert!(ArimaModel::from_json(&bumped).is_err());
    }

    #[test]
    fn refit_is_bit_deterministic() {
        let x = ar1(0.7, 2000, 5);
        let a = fit(&x, ArimaOrder::new(2, 1, 2)).unwrap();
        let b = fit(&x, ArimaOrder::new(2, 1, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitted_models_are_stationary_and_invertible() {
        for seed in 0..5 {
            let x = ar1(0.9, 1500, seed);
            for order in [ArimaOrder::new(2, 1, 2), ArimaOrder::new(1, 2, 1)] {
                let (m, _) = fit(&x, order).unwrap();
                assert!(is_stationary(&m.ar_coeffs) && is_invertible(&m.ma_coeffs), "{order} seed {seed}: {m:?}");
            }
        }
    }
}
