//! Centralized estimation-error-minimization (EEM) assignment.

use ndarray::Array2;

use super::{AssignContext, PilotScheme, StepStats};
use crate::estimation::contamination_error;

/// Running sums of `p_k Lp beta_mk` over the UEs holding each pilot, per AP.
#[derive(Clone, Debug)]
pub struct ContaminationCache {
    sums: Array2<f64>,
}

impl ContaminationCache {
    pub fn new(num_aps: usize, lp: usize) -> Self {
        Self {
            sums: Array2::zeros((num_aps, lp)),
        }
    }

    pub fn get(&self, m: usize, pilot: usize) -> f64 {
        self.sums[[m, pilot]]
    }

    /// Adds UE `t` on `pilot` to every AP's sum.
    pub fn add(&mut self, ctx: &AssignContext<'_>, t: usize, pilot: usize) {
        let p = ctx.powers.pilot[t] * ctx.lp as f64;
        for (m, sum) in self.sums.column_mut(pilot).iter_mut().enumerate() {
            *sum += p * ctx.beta[[m, t]];
        }
    }
}

/// One EEM decision: the first `Lp` arrivals take distinct pilots, later ones
/// the lowest-indexed pilot minimizing the aggregate error over `M_t`.
pub fn eem_step(
    ctx: &AssignContext<'_>,
    cache: &ContaminationCache,
    t: usize,
    position: usize,
    stats: &mut StepStats,
) -> usize {
    if position < ctx.lp {
        return position;
    }
    let serving = &ctx.assoc.serving_aps[t];
    let q_of = |m: usize| ctx.powers.pilot[t] * ctx.lp as f64 * ctx.beta[[m, t]];

    let mut best = (f64::INFINITY, 0);
    for pilot in 0..ctx.lp {
        let err: f64 = serving
            .iter()
            .map(|&m| contamination_error(q_of(m), ctx.beta[[m, t]], cache.get(m, pilot)))
            .sum();
        stats.contamination_reads += serving.len();
        if err < best.0 {
            best = (err, pilot);
        }
    }
    best.1
}

pub struct Eem {
    cache: ContaminationCache,
}

impl Eem {
    pub fn new(num_aps: usize, lp: usize) -> Self {
        Self {
            cache: ContaminationCache::new(num_aps, lp),
        }
    }
}

impl PilotScheme for Eem {
    fn select(&mut self, ctx: &AssignContext<'_>, t: usize, position: usize, stats: &mut StepStats) -> usize {
        eem_step(ctx, &self.cache, t, position, stats)
    }

    fn commit(&mut self, ctx: &AssignContext<'_>, t: usize, pilot: usize) {
        self.cache.add(ctx, t, pilot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign_all, assign_in_order, SchemeConfig, SchemeId};
    use crate::estimation::{estimation_error_global, PilotAssignment};
    use crate::network::{AssociationMap, NetworkRealization, PowerProfile};
    use ndarray::array;

    fn real(beta: Array2<f64>) -> NetworkRealization {
        let (m, t) = beta.dim();
        NetworkRealization {
            ap_positions: vec![[0.0; 2]; m],
            ue_positions: vec![[0.0; 2]; t],
            beta,
            seed: 0,
        }
    }

    #[test]
    fn first_lp_arrivals_take_their_position() {
        let r = real(Array2::from_elem((2, 5), 1e-8));
        let assoc = AssociationMap::build(&r, 1.0);
        let powers = PowerProfile::uniform(5, 1e9);
        let cfg = SchemeConfig::new(SchemeId::Eem);
        let (pa, stats) = assign_in_order(&cfg, &r, &assoc, &powers, 7, &[4, 2, 0, 1, 3]).unwrap();
        assert_eq!(pa.pilots().unwrap(), vec![2, 3, 1, 4, 0]);
        assert!(stats.iter().all(|s| s.contamination_reads == 0));
    }

    #[test]
    fn picks_less_contaminated_pilot() {
        // AP 0 hears UE 0 (pilot 0) strongly and UE 1 (pilot 1) weakly; UE 2
        // is served by AP 0 only and should share with the weaker UE 1.
        let beta = array![[1.0, 0.01, 0.5], [0.01, 1.0, 0.001]];
        let r = real(beta.clone());
        let assoc = AssociationMap::from_serving(vec![vec![0], vec![1], vec![0]], 2);
        let powers = PowerProfile::uniform(3, 1.0);
        let cfg = SchemeConfig::new(SchemeId::Eem);
        let pa = assign_all(&cfg, &r, &assoc, &powers, 2).unwrap();
        assert_eq!(pa.pilot(2), Some(1));

        // Brute force over both pilots from scratch.
        let mut partial = PilotAssignment::new(3, 2);
        partial.assign(0, 0);
        partial.assign(1, 1);
        let errs: Vec<f64> = (0..2)
            .map(|i| estimation_error_global(2, i, beta.view(), &powers, 2, &partial, &[0]))
            .collect();
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn exact_tie_keeps_lowest_pilot() {
        // Third UE sees both earlier UEs identically.
        let r = real(array![[0.3, 0.3, 0.5]]);
        let assoc = AssociationMap::build(&r, 1.0);
        let powers = PowerProfile::uniform(3, 1.0);
        let pa = assign_all(&SchemeConfig::new(SchemeId::Eem), &r, &assoc, &powers, 2).unwrap();
        assert_eq!(pa.pilots().unwrap(), vec![0, 1, 0]);
        // Without the tie the weaker co-pilot wins.
        let r = real(array![[1.0, 0.2, 0.2]]);
        let pa = assign_all(&SchemeConfig::new(SchemeId::Eem), &r, &assoc, &powers, 2).unwrap();
        assert_eq!(pa.pilots().unwrap(), vec![0, 1, 1]);
    }
}
