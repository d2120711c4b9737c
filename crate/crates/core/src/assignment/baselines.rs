//! Baseline schemes: uniform random pilots, and a master-AP least-contamination
//! rule in the spirit of scalable cell-free assignment.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{AssignContext, PilotScheme, StepStats};
use crate::estimation::PilotAssignment;
use crate::network::PowerProfile;
use crate::seed;

pub fn random_pa_step(t: usize, lp: usize, seed: u64) -> usize {
    seed::rng(seed::derive(seed, &[seed::tag::RANDOM_PA, t as u64])).random_range(0..lp)
}

pub struct RandomPa {
    seed: u64,
}

impl RandomPa {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl PilotScheme for RandomPa {
    fn select(&mut self, ctx: &AssignContext<'_>, t: usize, _position: usize, _stats: &mut StepStats) -> usize {
        random_pa_step(t, ctx.lp, self.seed)
    }

    fn commit(&mut self, _ctx: &AssignContext<'_>, _t: usize, _pilot: usize) {}
}

fn master_ap(beta: ArrayView2<f64>, t: usize) -> usize {
    let col = beta.column(t);
    (0..col.len()).fold(0, |best, m| if col[m] > col[best] { m } else { best })
}

fn argmin_lowest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Pilot with the least co-pilot power `sum p_k beta_{m* k}` at UE `t`'s
/// strongest AP `m*`, evaluated from scratch.
pub fn scalable_pa_step(
    t: usize,
    beta: ArrayView2<f64>,
    powers: &PowerProfile,
    lp: usize,
    partial: &PilotAssignment,
) -> usize {
    let m = master_ap(beta, t);
    argmin_lowest((0..lp).map(|i| {
        partial
            .copilots(i)
            .iter()
            .map(|&k| powers.pilot[k] * beta[[m, k]])
            .sum::<f64>()
    }))
}

pub struct ScalablePa {
    /// `sum p_k beta_mk` per AP and pilot.
    sums: Array2<f64>,
}

impl ScalablePa {
    pub fn new(num_aps: usize, lp: usize) -> Self {
        Self {
            sums: Array2::zeros((num_aps, lp)),
        }
    }
}

impl PilotScheme for ScalablePa {
    fn select(&mut self, ctx: &AssignContext<'_>, t: usize, _position: usize, stats: &mut StepStats) -> usize {
        let m = master_ap(ctx.beta, t);
        stats.contamination_reads += ctx.lp;
        argmin_lowest(self.sums.row(m).iter().copied())
    }

    fn commit(&mut self, ctx: &AssignContext<'_>, t: usize, pilot: usize) {
        let p = ctx.powers.pilot[t];
        for (m, sum) in self.sums.column_mut(pilot).iter_mut().enumerate() {
            *sum += p * ctx.beta[[m, t]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign_all, SchemeConfig, SchemeId};
    use crate::network::{AssociationMap, NetworkRealization};
    use ndarray::array;

    #[test]
    fn random_single_pilot() {
        assert!((0..100).all(|t| random_pa_step(t, 1, 5) == 0));
    }

    #[test]
    fn random_is_reproducible_and_varies_with_seed() {
        let a: Vec<usize> = (0..50).map(|t| random_pa_step(t, 7, 1)).collect();
        let b: Vec<usize> = (0..50).map(|t| random_pa_step(t, 7, 1)).collect();
        let c: Vec<usize> = (0..50).map(|t| random_pa_step(t, 7, 2)).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_frequencies_within_three_sigma() {
        let n = 100_000usize;
        let mut counts = [0usize; 7];
        for t in 0..n {
            counts[random_pa_step(t, 7, 2024)] += 1;
        }
        let p = 1.0 / 7.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn scalable_examples() {
        let beta = array![[0.9, 0.1, 0.2, 0.3]];
        let powers = PowerProfile::uniform(4, 1.0);
        let mut partial = PilotAssignment::new(4, 2);
        assert_eq!(scalable_pa_step(0, beta.view(), &powers, 2, &partial), 0);
        partial.assign(0, 0);
        assert_eq!(scalable_pa_step(1, beta.view(), &powers, 2, &partial), 1);
        partial.assign(1, 1);
        // Pilot 0 carries 0.9, pilot 1 carries 0.1.
        assert_eq!(scalable_pa_step(2, beta.view(), &powers, 2, &partial), 1);
        partial.assign(2, 1);
        // Pilot 0 carries 0.9, pilot 1 carries 0.3.
        assert_eq!(scalable_pa_step(3, beta.view(), &powers, 2, &partial), 1);
        partial.assign(3, 1);

        let real = NetworkRealization {
            ap_positions: vec![[0.0; 2]],
            ue_positions: vec![[0.0; 2]; 4],
            beta: beta.clone(),
            seed: 0,
        };
        let assoc = AssociationMap::build(&real, 1.0);
        let pa = assign_all(&SchemeConfig::new(SchemeId::Scalable), &real, &assoc, &powers, 2).unwrap();
        assert_eq!(pa, partial);
    }

    #[test]
    fn scalable_uses_master_ap_only() {
        // UE 2's master is AP 1, which hears UE 0 (pilot 0) weakly.
        let beta = array![[1.0, 0.01, 0.1], [0.01, 1.0, 0.5]];
        let powers = PowerProfile::uniform(3, 1.0);
        let mut partial = PilotAssignment::new(3, 2);
        partial.assign(0, 0);
        partial.assign(1, 1);
        assert_eq!(scalable_pa_step(2, beta.view(), &powers, 2, &partial), 0);
    }
}
