//! Distributed priority-based (DPB) assignment.
//!
//! Each of a UE's `S` strongest serving APs ranks every pilot by the local
//! estimation error it would see, using only its own LSFC row and the pilots
//! of the UEs it serves, and offers the pilots within `(1 + delta)` of its
//! best. The UE then intersects the offers from the largest AP groups down
//! to pairs, in priority order, and falls back to the best pilot of its top
//! AP when no two offers overlap.

use itertools::Itertools;
use ndarray::ArrayView2;
use rand::Rng;

use super::{AssignContext, PilotScheme, SchemeConfig, StepStats, TieRule};
use crate::estimation::{contamination_error, estimation_error_local};
use crate::network::PowerProfile;
use crate::seed;

/// Candidate pilots of one AP, ordered by ascending local error (lower
/// pilot index first on ties).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateOffer {
    pub ap: usize,
    pub pilots: Vec<usize>,
}

/// Pilots within `(1 + delta)` of the smallest error, best first.
pub fn candidate_set(errors: &[f64], delta: f64) -> Vec<usize> {
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = (1.0 + delta) * min;
    let mut pilots: Vec<usize> = (0..errors.len()).filter(|&i| errors[i] <= limit).collect();
    pilots.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(a.cmp(&b)));
    pilots
}

/// Candidate set of AP `m` for UE `t`, evaluated from explicit per-pilot
/// co-pilot lists of the UEs served by `m`.
pub fn dpb_candidates(
    t: usize,
    m: usize,
    delta: f64,
    beta: ArrayView2<f64>,
    powers: &PowerProfile,
    lp: usize,
    local_copilots: &[Vec<usize>],
) -> Vec<usize> {
    let errors: Vec<f64> = (0..lp)
        .map(|i| estimation_error_local(t, m, beta, powers, lp, &local_copilots[i]))
        .collect();
    candidate_set(&errors, delta)
}

/// Everything an AP knows: its own LSFC row, the UEs' pilot powers and the
/// pilots of the UEs it serves.
#[derive(Clone, Debug)]
pub struct ApLocalState {
    ap: usize,
    beta_row: Vec<f64>,
    pilot_power: Vec<f64>,
    lp: usize,
    /// `sum p_k Lp beta_mk` over served UEs holding each pilot.
    served_power: Vec<f64>,
    served: Vec<(usize, usize)>,
}

impl ApLocalState {
    pub fn new(ap: usize, beta_row: Vec<f64>, pilot_power: Vec<f64>, lp: usize) -> Self {
        Self {
            ap,
            beta_row,
            pilot_power,
            lp,
            served_power: vec![0.0; lp],
            served: Vec::new(),
        }
    }

    pub fn from_context(ap: usize, ctx: &AssignContext<'_>) -> Self {
        Self::new(ap, ctx.beta.row(ap).to_vec(), ctx.powers.pilot.clone(), ctx.lp)
    }

    pub fn ap(&self) -> usize {
        self.ap
    }

    /// `(ue, pilot)` of every notified UE, in notification order.
    pub fn served(&self) -> &[(usize, usize)] {
        &self.served
    }

    /// Local error of UE `t` for every pilot.
    pub fn local_errors(&self, t: usize, stats: &mut StepStats) -> Vec<f64> {
        let b = self.beta_row[t];
        let q = self.pilot_power[t] * self.lp as f64 * b;
        stats.error_evaluations += self.lp;
        self.served_power
            .iter()
            .map(|&c| contamination_error(q, b, c))
            .collect()
    }

    pub fn offer(&self, t: usize, delta: f64, stats: &mut StepStats) -> CandidateOffer {
        CandidateOffer {
            ap: self.ap,
            pilots: candidate_set(&self.local_errors(t, stats), delta),
        }
    }

    /// A served UE announced its pilot.
    pub fn notify(&mut self, t: usize, pilot: usize) {
        self.served_power[pilot] += self.pilot_power[t] * self.lp as f64 * self.beta_row[t];
        self.served.push((t, pilot));
    }
}

/// Resolves the offers of the priority APs (highest priority first) into one
/// pilot. Groups of size `l = S'` down to 2 are tried in lexicographic order
/// of priority ranks; the first nonempty intersection wins.
pub fn priority_select<R: Rng>(
    offers: &[CandidateOffer],
    tie_rule: TieRule,
    rng: &mut R,
    stats: &mut StepStats,
) -> usize {
    let s = offers.len();
    for level in (2..=s).rev() {
        for group in (0..s).combinations(level) {
            stats.intersection_checks += 1;
            // Ordered by the group's highest-priority AP.
            let lead = &offers[group[0]].pilots;
            let common: Vec<usize> = lead
                .iter()
                .copied()
                .filter(|i| group[1..].iter().all(|&g| offers[g].pilots.contains(i)))
                .collect();
            if common.is_empty() {
                continue;
            }
            return match tie_rule {
                TieRule::Deterministic => common[0],
                TieRule::SeededRandom => {
                    let mut pool = common;
                    pool.sort_unstable();
                    pool[rng.random_range(0..pool.len())]
                }
            };
        }
    }
    offers[0].pilots[0]
}

pub struct Dpb {
    aps: Vec<ApLocalState>,
    s: usize,
    delta: f64,
    tie_rule: TieRule,
    seed: u64,
}

impl Dpb {
    pub fn new(cfg: &SchemeConfig, ctx: &AssignContext<'_>) -> Self {
        Self {
            aps: (0..ctx.beta.nrows())
                .map(|m| ApLocalState::from_context(m, ctx))
                .collect(),
            s: cfg.dpb_s,
            delta: cfg.dpb_delta,
            tie_rule: cfg.tie_rule,
            seed: cfg.seed,
        }
    }

    /// Stream used by UE `t` to break ties among common pilots.
    pub fn tie_rng(seed: u64, t: usize) -> rand_chacha::ChaCha8Rng {
        seed::rng(seed::derive(seed, &[seed::tag::DPB_TIE, t as u64]))
    }
}

impl PilotScheme for Dpb {
    fn select(&mut self, ctx: &AssignContext<'_>, t: usize, _position: usize, stats: &mut StepStats) -> usize {
        let serving = &ctx.assoc.serving_aps[t];
        let priority = &serving[..self.s.min(serving.len())];
        let offers: Vec<CandidateOffer> = priority
            .iter()
            .map(|&m| self.aps[m].offer(t, self.delta, stats))
            .collect();
        priority_select(&offers, self.tie_rule, &mut Self::tie_rng(self.seed, t), stats)
    }

    fn commit(&mut self, ctx: &AssignContext<'_>, t: usize, pilot: usize) {
        for &m in &ctx.assoc.serving_aps[t] {
            self.aps[m].notify(t, pilot);
        }
    }
}
