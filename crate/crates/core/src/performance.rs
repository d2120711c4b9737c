//! Closed-form uplink performance: PFZF local combining followed by LSFD at
//! the CPU.
//!
//! For UE `t` and a serving AP `m`, with `g_m = A - delta_mt L_{S_m}`:
//!
//! ```text
//! b_m    = sqrt(g_m gamma_mt)                 desired gain
//! c_km   = sqrt(g_m gamma_mk), k co-pilot     coherent interference
//! D_m    = sum_k p_k (beta_mk - delta_mt delta_mk gamma_mk) + 1
//! SINR_t = p_t (a.b)^2 / (sum_k p_k (a.c_k)^2 + sum_m a_m^2 D_m)
//! ```
//!
//! The optimal LSFD weights maximize this Rayleigh quotient:
//! `a = (sum_k p_k c_k c_k^T + diag(D))^-1 b`, up to scale.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::assignment::PilotAssignment;
use crate::error::{Error, Result};
use crate::estimation::{compute_gamma, EstimationQuality};
use crate::linalg::solve_spd;
use crate::network::{group_strong_ues, AssociationMap, NetworkConfig, NetworkRealization, PowerProfile};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LsfdMode {
    #[default]
    Optimal,
    /// `a_mt = 1 / |M_t|`, for ablation.
    Equal,
}

/// LSFD weights, `a[[m, t]]`, zero outside `M_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LsfdWeights {
    pub a: Array2<f64>,
}

/// Everything one UE's SINR depends on, restricted to its serving APs.
#[derive(Clone, Debug)]
pub struct UeTerms {
    pub aps: Vec<usize>,
    pub power: f64,
    pub gain: Array1<f64>,
    /// `(p_k, c_k)` for every co-pilot UE `k != t`.
    pub interferers: Vec<(f64, Array1<f64>)>,
    pub diag: Array1<f64>,
}

/// Inputs shared by all UEs of one evaluated assignment.
pub struct Evaluation<'a> {
    pub beta: &'a Array2<f64>,
    pub gamma: &'a Array2<f64>,
    pub powers: &'a PowerProfile,
    /// Strong grouping must already be applied.
    pub assoc: &'a AssociationMap,
    pub assignment: &'a PilotAssignment,
    pub antennas: usize,
    total_rx: Vec<f64>,
    strong_rx: Vec<f64>,
}

impl<'a> Evaluation<'a> {
    pub fn new(
        beta: &'a Array2<f64>,
        gamma: &'a Array2<f64>,
        powers: &'a PowerProfile,
        assoc: &'a AssociationMap,
        assignment: &'a PilotAssignment,
        antennas: usize,
    ) -> Self {
        let (num_aps, num_ues) = beta.dim();
        let total_rx = (0..num_aps)
            .map(|m| (0..num_ues).map(|k| powers.uplink[k] * beta[[m, k]]).sum())
            .collect();
        let strong_rx = (0..num_aps)
            .map(|m| {
                assoc.strong_ues[m]
                    .iter()
                    .map(|&k| powers.uplink[k] * gamma[[m, k]])
                    .sum()
            })
            .collect();
        Self {
            beta,
            gamma,
            powers,
            assoc,
            assignment,
            antennas,
            total_rx,
            strong_rx,
        }
    }

    pub fn terms(&self, t: usize) -> Result<UeTerms> {
        let aps = self.assoc.serving_aps[t].clone();
        let pilot = self
            .assignment
            .pilot(t)
            .ok_or_else(|| Error::InvalidConfig(format!("UE {t} has no pilot")))?;
        let dof: Vec<f64> = aps
            .iter()
            .map(|&m| {
                let strong = self.assoc.strong_flag[[m, t]] as usize;
                (self.antennas - strong * self.assoc.strong_pilot_count[m]) as f64
            })
            .collect();
        let amplitude = |k: usize| -> Array1<f64> {
            aps.iter()
                .zip(&dof)
                .map(|(&m, g)| (g * self.gamma[[m, k]]).sqrt())
                .collect()
        };
        let interferers = self
            .assignment
            .copilots(pilot)
            .iter()
            .filter(|&&k| k != t)
            .map(|&k| (self.powers.uplink[k], amplitude(k)))
            .collect();
        let diag = aps
            .iter()
            .map(|&m| {
                let strong = if self.assoc.strong_flag[[m, t]] {
                    self.strong_rx[m]
                } else {
                    0.0
                };
                self.total_rx[m] - strong + 1.0
            })
            .collect();
        Ok(UeTerms {
            power: self.powers.uplink[t],
            gain: amplitude(t),
            interferers,
            diag,
            aps,
        })
    }
}

impl UeTerms {
    /// Interference-plus-noise matrix `sum_k p_k c_k c_k^T + diag(D)`.
    pub fn covariance(&self) -> Array2<f64> {
        let n = self.aps.len();
        let mut r = Array2::from_diag(&self.diag);
        for (p, c) in &self.interferers {
            for i in 0..n {
                for j in 0..n {
                    r[[i, j]] += p * c[i] * c[j];
                }
            }
        }
        r
    }

    /// SINR for weights aligned with `aps`.
    pub fn sinr(&self, a: &[f64]) -> f64 {
        let a = Array1::from(a.to_vec());
        let signal = self.power * a.dot(&self.gain).powi(2);
        let coherent: f64 = self.interferers.iter().map(|(p, c)| p * a.dot(c).powi(2)).sum();
        let incoherent: f64 = a.iter().zip(&self.diag).map(|(x, d)| x * x * d).sum();
        signal / (coherent + incoherent)
    }

    pub fn optimal_weights(&self) -> Result<Vec<f64>> {
        let a = solve_spd(&self.covariance(), &self.gain)?;
        let norm = a.dot(&a).sqrt();
        Ok(a.iter().map(|x| x / norm).collect())
    }

    pub fn equal_weights(&self) -> Vec<f64> {
        vec![1.0 / self.aps.len() as f64; self.aps.len()]
    }
}

/// Unit-norm optimal LSFD weights of UE `t`, aligned with `M_t`.
pub fn compute_lsfd(t: usize, eval: &Evaluation<'_>) -> Result<Vec<f64>> {
    eval.terms(t)?.optimal_weights()
}

/// PFZF SINR of UE `t` for weights aligned with `M_t`.
pub fn sinr_pfzf(t: usize, weights: &[f64], eval: &Evaluation<'_>) -> Result<f64> {
    Ok(eval.terms(t)?.sinr(weights))
}

/// Fraction of each coherence block that carries uplink data, as used in the
/// SE bound: `(1 - Lp / Lc) / 2`.
pub fn prelog(lc: usize, lp: usize) -> f64 {
    (lc - lp) as f64 / (2 * lc) as f64
}

pub fn se_uplink(sinr: f64, lc: usize, lp: usize) -> f64 {
    prelog(lc, lp) * (1.0 + sinr).log2()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeReport {
    pub sinr: Vec<f64>,
    /// bits/s/Hz
    pub se: Vec<f64>,
    pub sum_se: f64,
    /// Per-user SE sorted ascending.
    pub sorted_se: Vec<f64>,
    pub weights: LsfdWeights,
}

impl SeReport {
    /// Empirical quantile `q` in `[0, 1]` of the per-user SE, linearly
    /// interpolated between order statistics.
    pub fn percentile(&self, q: f64) -> f64 {
        quantile(&self.sorted_se, q)
    }

    pub fn mean_se(&self) -> f64 {
        self.sum_se / self.se.len() as f64
    }
}

/// Linear-interpolation quantile of an ascending slice; NaN when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Full pipeline for one assignment: gamma, strong grouping, LSFD, SINR, SE.
pub fn evaluate(
    real: &NetworkRealization,
    assoc: &AssociationMap,
    assignment: &PilotAssignment,
    powers: &PowerProfile,
    config: &NetworkConfig,
    mode: LsfdMode,
) -> Result<SeReport> {
    let lp = config.pilot_length;
    let EstimationQuality { gamma } = compute_gamma(real.beta.view(), powers, lp, assignment)?;
    let grouped = group_strong_ues(real, assoc, config.strong_threshold, assignment, config.antennas_per_ap)?;
    let eval = Evaluation::new(&real.beta, &gamma, powers, &grouped, assignment, config.antennas_per_ap);

    let num_ues = real.num_ues();
    let mut a = Array2::zeros(real.beta.dim());
    let mut sinr = Vec::with_capacity(num_ues);
    for t in 0..num_ues {
        let terms = eval.terms(t)?;
        let w = match mode {
            LsfdMode::Optimal => terms.optimal_weights()?,
            LsfdMode::Equal => terms.equal_weights(),
        };
        for (&m, &x) in terms.aps.iter().zip(&w) {
            a[[m, t]] = x;
        }
        sinr.push(terms.sinr(&w));
    }
    let se: Vec<f64> = sinr.iter().map(|&s| se_uplink(s, config.coherence_block, lp)).collect();
    let mut sorted_se = se.clone();
    sorted_se.sort_by(f64::total_cmp);
    Ok(SeReport {
        sum_se: se.iter().sum(),
        sinr,
        se,
        sorted_se,
        weights: LsfdWeights { a },
    })
}
