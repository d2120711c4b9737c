//! MMSE estimation quality and pilot-contamination error metrics.
//!
//! All quantities are linear scale. The error metrics are differences of two
//! nearly equal ratios, so they are evaluated in the rearranged form
//! `a c / ((q + 1)(q + c + 1))`, with `q = p Lp beta_mt`, `a = q beta_mt` and
//! `c` the co-pilot power seen at the AP excluding UE `t` itself. This is
//! exactly zero without contamination and never loses significance to
//! cancellation.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::network::PowerProfile;

/// Pilot index per UE plus the induced co-pilot sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PilotAssignment {
    pilot_of: Vec<Option<usize>>,
    copilot_sets: Vec<Vec<usize>>,
}

impl PilotAssignment {
    pub fn new(num_ues: usize, num_pilots: usize) -> Self {
        Self {
            pilot_of: vec![None; num_ues],
            copilot_sets: vec![Vec::new(); num_pilots],
        }
    }

    /// Builds a complete assignment from a pilot vector.
    pub fn from_pilots(pilots: &[usize], num_pilots: usize) -> Self {
        let mut pa = Self::new(pilots.len(), num_pilots);
        for (t, &i) in pilots.iter().enumerate() {
            pa.assign(t, i);
        }
        pa
    }

    /// # Panics
    ///
    /// If `t` already holds a pilot or `pilot` is out of range; assignments
    /// are never revisited.
    pub fn assign(&mut self, t: usize, pilot: usize) {
        assert!(pilot < self.num_pilots(), "pilot {pilot} out of range");
        assert!(self.pilot_of[t].is_none(), "UE {t} already assigned");
        self.pilot_of[t] = Some(pilot);
        self.copilot_sets[pilot].push(t);
    }

    pub fn pilot(&self, t: usize) -> Option<usize> {
        self.pilot_of[t]
    }

    /// UEs holding `pilot`, in assignment order.
    pub fn copilots(&self, pilot: usize) -> &[usize] {
        &self.copilot_sets[pilot]
    }

    pub fn num_ues(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn num_pilots(&self) -> usize {
        self.copilot_sets.len()
    }

    pub fn is_complete(&self) -> bool {
        self.pilot_of.iter().all(Option::is_some)
    }

    /// Pilot vector of a complete assignment.
    pub fn pilots(&self) -> Result<Vec<usize>> {
        self.pilot_of
            .iter()
            .enumerate()
            .map(|(t, p)| p.ok_or_else(|| Error::InvalidConfig(format!("UE {t} has no pilot"))))
            .collect()
    }
}

/// Per-AP, per-UE contamination error with own received pilot power `q`
/// (`p Lp beta_mt`), LSFC `beta_mt` and co-pilot power `c` from other UEs.
#[inline]
pub fn contamination_error(q: f64, beta_mt: f64, c: f64) -> f64 {
    q * beta_mt * c / ((q + 1.0) * (q + c + 1.0))
}

/// `gamma_mt` with no pilot sharing.
#[inline]
pub fn uncontaminated_gamma(q: f64, beta_mt: f64) -> f64 {
    q * beta_mt / (q + 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationQuality {
    /// `gamma[[m, t]]`
    pub gamma: Array2<f64>,
}

pub fn compute_gamma(
    beta: ArrayView2<f64>,
    powers: &PowerProfile,
    lp: usize,
    assignment: &PilotAssignment,
) -> Result<EstimationQuality> {
    let pilots = assignment.pilots()?;
    let (num_aps, num_ues) = beta.dim();
    let lp = lp as f64;
    let mut received = Array2::<f64>::zeros((num_aps, assignment.num_pilots()));
    for (k, &i) in pilots.iter().enumerate() {
        let p = powers.pilot[k] * lp;
        for m in 0..num_aps {
            received[[m, i]] += p * beta[[m, k]];
        }
    }
    let gamma = Array2::from_shape_fn((num_aps, num_ues), |(m, t)| {
        let b = beta[[m, t]];
        powers.pilot[t] * lp * b * b / (received[[m, pilots[t]]] + 1.0)
    });
    Ok(EstimationQuality { gamma })
}

fn copilot_power(t: usize, m: usize, beta: ArrayView2<f64>, powers: &PowerProfile, lp: f64, copilots: &[usize]) -> f64 {
    copilots
        .iter()
        .filter(|&&k| k != t)
        .map(|&k| powers.pilot[k] * lp * beta[[m, k]])
        .sum()
}

/// Aggregate estimation error of UE `t` over its serving APs if it were to
/// take `pilot`, given the UEs already holding that pilot in `partial`.
/// Evaluated from scratch.
pub fn estimation_error_global(
    t: usize,
    pilot: usize,
    beta: ArrayView2<f64>,
    powers: &PowerProfile,
    lp: usize,
    partial: &PilotAssignment,
    serving: &[usize],
) -> f64 {
    let lp = lp as f64;
    serving
        .iter()
        .map(|&m| {
            let c = copilot_power(t, m, beta, powers, lp, partial.copilots(pilot));
            let q = powers.pilot[t] * lp * beta[[m, t]];
            contamination_error(q, beta[[m, t]], c)
        })
        .sum()
}

/// Local estimation error at AP `m`, counting only `served_copilots`
/// (co-pilot UEs served by `m`).
pub fn estimation_error_local(
    t: usize,
    m: usize,
    beta: ArrayView2<f64>,
    powers: &PowerProfile,
    lp: usize,
    served_copilots: &[usize],
) -> f64 {
    let lp = lp as f64;
    let c = copilot_power(t, m, beta, powers, lp, served_copilots);
    let q = powers.pilot[t] * lp * beta[[m, t]];
    contamination_error(q, beta[[m, t]], c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn unit_powers(n: usize) -> PowerProfile {
        PowerProfile::uniform(n, 1.0)
    }

    #[test]
    fn gamma_single_and_shared() {
        let beta = array![[1.0]];
        let pa = PilotAssignment::from_pilots(&[0], 1);
        let g = compute_gamma(beta.view(), &unit_powers(1), 1, &pa).unwrap();
        assert_eq!(g.gamma[[0, 0]], 0.5);

        let beta = array![[1.0, 1.0]];
        let pa = PilotAssignment::from_pilots(&[0, 0], 1);
        let g = compute_gamma(beta.view(), &unit_powers(2), 1, &pa).unwrap();
        assert!((g.gamma[[0, 0]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.gamma[[0, 1]] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_matches_symbol_by_symbol_oracle() {
        let mut rng = crate::seed::rng(11);
        for _ in 0..50 {
            let beta = Array2::from_shape_fn((3, 4), |_| 10f64.powf(-rng.random::<f64>() * 4.0));
            let powers = PowerProfile {
                pilot: (0..4).map(|_| 1.0 + 99.0 * rng.random::<f64>()).collect(),
                uplink: vec![1.0; 4],
            };
            let pilots: Vec<usize> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let pa = PilotAssignment::from_pilots(&pilots, 2);
            let lp = 2.0;
            let g = compute_gamma(beta.view(), &powers, 2, &pa).unwrap();
            for m in 0..3 {
                for t in 0..4 {
                    let mut den = 1.0;
                    for k in 0..4 {
                        let overlap = if pilots[k] == pilots[t] { 1.0 } else { 0.0 };
                        den += powers.pilot[k] * lp * beta[[m, k]] * overlap;
                    }
                    let want = powers.pilot[t] * lp * beta[[m, t]].powi(2) / den;
                    assert!((g.gamma[[m, t]] / want - 1.0).abs() < 1e-13);
                    assert!(g.gamma[[m, t]] > 0.0 && g.gamma[[m, t]] <= beta[[m, t]]);
                }
            }
        }
    }

    #[test]
    fn incomplete_assignment_is_rejected() {
        let pa = PilotAssignment::new(2, 1);
        assert!(compute_gamma(array![[1.0, 1.0]].view(), &unit_powers(2), 1, &pa).is_err());
    }

    #[test]
    fn global_error_examples() {
        let beta = array![[1.0, 1.0, 1.0]];
        let powers = unit_powers(3);
        let mut partial = PilotAssignment::new(3, 2);
        // Unused pilot.
        assert_eq!(
            estimation_error_global(0, 1, beta.view(), &powers, 1, &partial, &[0]),
            0.0
        );

        partial.assign(1, 0);
        let e = estimation_error_global(0, 0, beta.view(), &powers, 1, &partial, &[0]);
        assert!((e - (0.5 - 1.0 / 3.0)).abs() < 1e-15);
        assert!((e - 1.0 / 6.0).abs() < 1e-15);

        partial.assign(2, 0);
        let e3 = estimation_error_global(0, 0, beta.view(), &powers, 1, &partial, &[0]);
        // 1/2 - 1/4
        assert!((e3 - 0.25).abs() < 1e-15);
        assert!(e3 > e);
    }

    #[test]
    fn global_is_sum_of_local() {
        let beta = array![[0.3, 0.7, 0.2], [0.9, 0.1, 0.5]];
        let powers = PowerProfile::uniform(3, 4.0);
        let mut partial = PilotAssignment::new(3, 2);
        partial.assign(1, 1);
        partial.assign(2, 1);
        let g = estimation_error_global(0, 1, beta.view(), &powers, 2, &partial, &[0, 1]);
        let l: f64 = [0, 1]
            .iter()
            .map(|&m| estimation_error_local(0, m, beta.view(), &powers, 2, partial.copilots(1)))
            .sum();
        assert!((g - l).abs() < 1e-15);
    }

    #[test]
    fn local_error_limits() {
        let beta = array![[1.0, 1e-12]];
        let powers = unit_powers(2);
        assert_eq!(estimation_error_local(0, 0, beta.view(), &powers, 1, &[]), 0.0);
        let e = estimation_error_local(0, 0, beta.view(), &powers, 1, &[1]);
        assert!(e > 0.0 && e < 1e-12);
    }

    #[test]
    fn error_stays_positive_at_realistic_snr() {
        // p ~ 1.6e11 with weak contamination: the naive difference of ratios
        // rounds to zero here, the rearranged form does not.
        let p = 10f64.powf(11.199);
        let q = p * 7.0 * 1e-9;
        let c = p * 7.0 * 1e-26;
        let naive = q * 1e-9 / (q + 1.0) - q * 1e-9 / (q + c + 1.0);
        assert_eq!(naive, 0.0);
        assert!(contamination_error(q, 1e-9, c) > 0.0);
    }
}
