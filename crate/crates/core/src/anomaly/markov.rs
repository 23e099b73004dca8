use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;

pub const CHAIN_SCHEMA: u32 = 1;
const ROW_TOLERANCE: f64 = 1e-9;

/// Discretised workload levels with a row-stochastic transition matrix.
///
/// State `i` covers rates in `[bin_edges[i-1], bin_edges[i])`, with the first
/// and last states unbounded below and above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub bin_edges: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub anomalous_states: Vec<usize>,
    /// Mean observed rate of each state, used when generating streams.
    pub state_rates: Vec<f64>,
    /// Raw transition counts before smoothing, when fitted from data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyForecast {
    pub horizon_steps: usize,
    /// Probability of entering an anomalous state within the horizon.
    pub probability: f64,
    /// One minus the normalised entropy of the current state's next-step distribution.
    pub confidence: f64,
}

#[derive(Serialize, Deserialize)]
struct ChainDocument {
    schema: u32,
    #[serde(flatten)]
    chain: MarkovChain,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Fits a chain over equal-count rate bins with add-one smoothing.
///
/// Tied quantiles are merged, so heavily repeated values yield fewer than
/// `n_states` states. A state is anomalous when it covers rates above the
/// `anomaly_quantile` of the history; the top state always is.
pub fn fit_markov(history: &[f64], n_states: usize, anomaly_quantile: f64) -> Result<MarkovChain> {
    if n_states < 2 {
        return Err(Error::invalid("a workload chain needs at least two states"));
    }
    if !(anomaly_quantile > 0.0 && anomaly_quantile < 1.0) {
        return Err(Error::invalid(format!("anomaly quantile {anomaly_quantile} not in (0, 1)")));
    }
    if history.len() < 2 {
        return Err(Error::insufficient("a transition needs at least two samples"));
    }
    if history.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("history contains non-finite rates"));
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut edges: Vec<f64> = Vec::with_capacity(n_states - 1);
    for j in 1..n_states {
        let e = quantile(&sorted, j as f64 / n_states as f64);
        if edges.last().is_none_or(|last| e > *last) && e > sorted[0] {
            edges.push(e);
        }
    }
    let states = edges.len() + 1;
    let threshold = quantile(&sorted, anomaly_quantile);
    let anomalous_states = (0..states).filter(|&i| i + 1 == states || edges[i] > threshold).collect();

    let state_of = |v: f64| edges.partition_point(|e| *e <= v);
    let mut counts = vec![vec![0u64; states]; states];
    let mut sums = vec![(0.0, 0u64); states];
    for (i, w) in history.windows(2).enumerate() {
        counts[state_of(w[0])][state_of(w[1])] += 1;
        if i == 0 {
            let s = &mut sums[state_of(w[0])];
            s.0 += w[0];
            s.1 += 1;
        }
        let s = &mut sums[state_of(w[1])];
        s.0 += w[1];
        s.1 += 1;
    }
    let transition = counts
        .iter()
        .map(|row| {
            let total = row.iter().sum::<u64>() as f64 + states as f64;
            row.iter().map(|c| (*c as f64 + 1.0) / total).collect()
        })
        .collect();
    let state_rates = (0..states)
        .map(|i| match sums[i] {
            (s, n) if n > 0 => s / n as f64,
            _ => bin_midpoint(&edges, i),
        })
        .collect();
    Ok(MarkovChain { bin_edges: edges, transition, anomalous_states, state_rates, counts: Some(counts) })
}

fn bin_midpoint(edges: &[f64], i: usize) -> f64 {
    match (i.checked_sub(1).map(|j| edges[j]), edges.get(i)) {
        (Some(lo), Some(hi)) => (lo + hi) / 2.0,
        (Some(lo), None) => lo,
        (None, Some(hi)) => *hi,
        (None, None) => 0.0,
    }
}

impl MarkovChain {
    pub fn new(bin_edges: Vec<f64>, transition: Vec<Vec<f64>>, anomalous_states: Vec<usize>) -> Result<Self> {
        let state_rates = (0..=bin_edges.len()).map(|i| bin_midpoint(&bin_edges, i)).collect();
        let chain = Self { bin_edges, transition, anomalous_states, state_rates, counts: None };
        chain.check()?;
        Ok(chain)
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    fn check(&self) -> Result<()> {
        let s = self.n_states();
        if s == 0 || self.bin_edges.len() + 1 != s || self.state_rates.len() != s {
            return Err(Error::Format("bin edges do not match the state count".into()));
        }
        if self.bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("bin edges must be strictly ascending".into()));
        }
        if self.anomalous_states.iter().any(|a| *a >= s) {
            return Err(Error::Format("anomalous state out of range".into()));
        }
        for row in &self.transition {
            if row.len() != s || row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::Format("transition rows must be non-negative and square".into()));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Format("transition rows must sum to one".into()));
            }
        }
        Ok(())
    }

    /// State holding `rate`; rates beyond the outer edges fall in the end states.
    pub fn state_of(&self, rate: f64) -> usize {
        self.bin_edges.partition_point(|e| *e <= rate)
    }

    pub fn is_anomalous(&self, state: usize) -> bool {
        self.anomalous_states.contains(&state)
    }

    /// Samples a state path of `steps` states starting after `start`.
    pub fn simulate(&self, start: usize, steps: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng_from(seed);
        let mut state = start.min(self.n_states() - 1);
        (0..steps)
            .map(|_| {
                let u: f64 = rng.random();
                let row = &self.transition[state];
                let mut acc = 0.0;
                state = row
                    .iter()
                    .position(|p| {
                        acc += p;
                        u < acc
                    })
                    .unwrap_or(row.len() - 1);
                state
            })
            .collect()
    }

    /// A rate stream following a simulated path, one representative rate per state.
    pub fn generate_rates(&self, start: usize, steps: usize, seed: u64) -> Vec<f64> {
        self.simulate(start, steps, seed).into_iter().map(|s| self.state_rates[s]).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ChainDocument { schema: CHAIN_SCHEMA, chain: self.clone() })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChainDocument = serde_json::from_str(text)?;
        if doc.schema != CHAIN_SCHEMA {
            return Err(Error::Format(format!("unsupported chain schema {}", doc.schema)));
        }
        doc.chain.check()?;
        Ok(doc.chain)
    }
}

/// First-passage probability into the anomalous states within `horizon_steps`,
/// computed on the chain with those states made absorbing.
pub fn predict_anomaly(chain: &MarkovChain, current_rate: f64, horizon_steps: usize) -> Result<AnomalyForecast> {
    if horizon_steps == 0 {
        return Err(Error::invalid("horizon must be at least one step"));
    }
    let s = chain.n_states();
    let current = chain.state_of(current_rate);
    let row = &chain.transition[current];
    let confidence = if s < 2 {
        1.0
    } else {
        let entropy: f64 = row.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
        (1.0 - entropy / (s as f64).ln()).clamp(0.0, 1.0)
    };

    let probability = if chain.is_anomalous(current) {
        1.0
    } else {
        let mut dist = vec![0.0; s];
        dist[current] = 1.0;
        for _ in 0..horizon_steps {
            let mut next = vec![0.0; s];
            for (i, mass) in dist.iter().enumerate() {
                if *mass == 0.0 {
                    continue;
                }
                if chain.is_anomalous(i) {
                    next[i] += mass;
                } else {
                    for (j, p) in chain.transition[i].iter().enumerate() {
                        next[j] += mass * p;
                    }
                }
            }
            dist = next;
        }
        chain.anomalous_states.iter().map(|a| dist[*a]).sum::<f64>().clamp(0.0, 1.0)
    };
    Ok(AnomalyForecast { horizon_steps, probability, confidence })
}

/// Adds `boost` to every transition into `target_states` and renormalises.
pub fn perturb_markov(chain: &MarkovChain, boost: f64, target_states: &[usize]) -> Result<MarkovChain> {
    if !(boost >= 0.0) {
        return Err(Error::invalid(format!("boost {boost} must be non-negative")));
    }
    if let Some(t) = target_states.iter().find(|t| **t >= chain.n_states()) {
        return Err(Error::invalid(format!("target state {t} out of range")));
    }
    if boost == 0.0 {
        return Ok(chain.clone());
    }
    let mut out = chain.clone();
    out.counts = None;
    for row in out.transition.iter_mut() {
        if boost.is_infinite() {
            let n = target_states.len() as f64;
            row.iter_mut().for_each(|p| *p = 0.0);
            for t in target_states {
                row[*t] += 1.0 / n;
            }
            continue;
        }
        for t in target_states {
            row[*t] += boost;
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn alternation_counts() {
        let h: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { 9.0 }).collect();
        let c = fit_markov(&h, 2, 0.5).unwrap();
        assert_eq!(c.counts.as_ref().unwrap(), &vec![vec![0, 50], vec![49, 0]]);
        assert_eq!(c.anomalous_states, vec![1]);
        assert_eq!(c.state_rates, vec![1.0, 9.0]);
    }

    #[test]
    fn constant_history_collapses_to_one_state() {
        let c = fit_markov(&[5.0; 40], 4, 0.9).unwrap();
        assert_eq!(c.n_states(), 1);
        assert!((c.transition[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_chain_never_reaches_anomaly() {
        let c = MarkovChain::new(vec![10.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1]).unwrap();
        let f = predict_anomaly(&c, 5.0, 10).unwrap();
        assert_eq!(f.probability, 0.0);
        assert_eq!(f.confidence, 1.0);
    }

    #[test]
    fn anomalous_start_is_certain() {
        let c = MarkovChain::new(vec![10.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1]).unwrap();
        for h in 1..5 {
            assert_eq!(predict_anomaly(&c, 50.0, h).unwrap().probability, 1.0);
        }
        assert_eq!(predict_anomaly(&c, 5.0, 1).unwrap().confidence, 0.0);
        assert!(predict_anomaly(&c, 5.0, 0).is_err());
    }

    #[test]
    fn rates_outside_edges_clamp() {
        let c = MarkovChain::new(vec![10.0, 20.0], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], vec![2])
            .unwrap();
        assert_eq!(c.state_of(-100.0), 0);
        assert_eq!(c.state_of(1e9), 2);
        assert_eq!(c.state_of(10.0), 1);
    }

    #[test]
    fn boost_limits() {
        let h: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64).collect();
        let c = fit_markov(&h, 3, 0.8).unwrap();
        assert_eq!(perturb_markov(&c, 0.0, &[2]).unwrap(), c);
        let big = perturb_markov(&c, 1e12, &[2]).unwrap();
        assert!(big.transition.iter().all(|r| r[2] > 1.0 - 1e-9));
        let inf = perturb_markov(&c, f64::INFINITY, &[1, 2]).unwrap();
        assert!(inf.transition.iter().all(|r| r[0] == 0.0 && r[1] == 0.5));
        assert!(perturb_markov(&c, -1.0, &[0]).is_err());
        assert!(perturb_markov(&c, 1.0, &[7]).is_err());
    }

    #[test]
    fn malformed_chains_are_rejected() {
        assert!(MarkovChain::new(vec![1.0], vec![vec![0.5, 0.4], vec![0.5, 0.5]], vec![]).is_err());
        assert!(MarkovChain::new(vec![2.0, 1.0], vec![vec![1.0, 0.0, 0.0]; 3], vec![]).is_err());
        assert!(fit_markov(&[1.0], 2, 0.5).is_err());
        assert!(fit_markov(&[1.0, 2.0], 1, 0.5).is_err());
    }

    #[test]
    fn boosting_anomalous_states_raises_their_occupancy() {
        let h: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 101) as f64).collect();
        let c = fit_markov(&h, 5, 0.8).unwrap();
        let p = perturb_markov(&c, 0.5, &c.anomalous_states).unwrap();
        let occupancy = |chain: &MarkovChain| {
            chain.simulate(0, 5000, 3).iter().filter(|s| chain.is_anomalous(**s)).count()
        };
        assert!(occupancy(&p) > occupancy(&c));
    }

    #[test]
    fn json_round_trip() {
        let h: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let c = fit_markov(&h, 3, 0.7).unwrap();
        assert_eq!(MarkovChain::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn fitted_and_perturbed_rows_are_stochastic(
            h in prop::collection::vec(0.0f64..1000.0, 2..300),
            n in 2usize..8,
            q in 0.05f64..0.95,
            boost in 0.0f64..100.0,
        ) {
            let c = fit_markov(&h, n, q).unwrap();
            let targets = c.anomalous_states.clone();
            let p = perturb_markov(&c, boost, &targets).unwrap();
            for chain in [&c, &p] {
                for row in &chain.transition {
                    prop_assert!(row.iter().all(|x| *x >= 0.0));
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
                prop_assert!(chain.bin_edges.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
