//! Pilot assignment schemes.
//!
//! Every scheme assigns pilots one UE at a time in arrival order and never
//! revisits an earlier decision, so appending UEs leaves the prefix intact.

mod baselines;
mod dpb;
mod eem;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::estimation::PilotAssignment;
use crate::network::{AssociationMap, NetworkRealization, PowerProfile};

pub use baselines::{random_pa_step, scalable_pa_step, RandomPa, ScalablePa};
pub use dpb::{candidate_set, dpb_candidates, priority_select, ApLocalState, CandidateOffer, Dpb};
pub use eem::{eem_step, ContaminationCache, Eem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Eem,
    Dpb,
    Random,
    Scalable,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Eem, SchemeId::Dpb, SchemeId::Random, SchemeId::Scalable];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Eem => "eem",
            SchemeId::Dpb => "dpb",
            SchemeId::Random => "random",
            SchemeId::Scalable => "scalable",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme '{s}'")))
    }
}

/// How DPB picks among several common candidate pilots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Uniform over the common set, from a per-UE seeded stream.
    SeededRandom,
    /// The common pilot ranked best by the group's highest-priority AP.
    Deterministic,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "seeded_random" => Ok(TieRule::SeededRandom),
            "deterministic" => Ok(TieRule::Deterministic),
            _ => Err(Error::InvalidConfig(format!("unknown tie rule '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: SchemeId,
    /// Number of priority APs consulted by DPB.
    pub dpb_s: usize,
    /// Relative candidate threshold of DPB.
    pub dpb_delta: f64,
    pub tie_rule: TieRule,
    pub seed: u64,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeId) -> Self {
        Self {
            scheme,
            dpb_s: 3,
            dpb_delta: 0.1,
            tie_rule: TieRule::SeededRandom,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dpb_s == 0 {
            return Err(Error::InvalidConfig("dpb_s must be at least 1".into()));
        }
        if !(self.dpb_delta.is_finite() && self.dpb_delta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dpb_delta {} must be >= 0",
                self.dpb_delta
            )));
        }
        Ok(())
    }
}

/// Read-only inputs shared by all schemes.
#[derive(Clone, Copy)]
pub struct AssignContext<'a> {
    pub beta: ArrayView2<'a, f64>,
    pub powers: &'a PowerProfile,
    pub assoc: &'a AssociationMap,
    pub lp: usize,
}

/// Operation counters for one UE step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Cached per-(AP, pilot) contamination sums read.
    pub contamination_reads: usize,
    /// Local estimation-error evaluations (one per AP and pilot).
    pub error_evaluations: usize,
    /// Candidate-set group intersections tried.
    pub intersection_checks: usize,
}

pub trait PilotScheme {
    /// Chooses a pilot for UE `t`, the `position`-th arrival.
    fn select(&mut self, ctx: &AssignContext<'_>, t: usize, position: usize, stats: &mut StepStats) -> usize;

    /// Records the decision in the scheme's bookkeeping.
    fn commit(&mut self, ctx: &AssignContext<'_>, t: usize, pilot: usize);
}

pub fn build_scheme(cfg: &SchemeConfig, ctx: &AssignContext<'_>) -> Result<Box<dyn PilotScheme>> {
    cfg.validate()?;
    let num_aps = ctx.beta.nrows();
    Ok(match cfg.scheme {
        SchemeId::Eem => Box::new(Eem::new(num_aps, ctx.lp)),
        SchemeId::Dpb => Box::new(Dpb::new(cfg, ctx)),
        SchemeId::Random => Box::new(RandomPa::new(cfg.seed)),
        SchemeId::Scalable => Box::new(ScalablePa::new(num_aps, ctx.lp)),
    })
}

/// Assigns pilots in the given arrival order and reports per-UE counters
/// (indexed by UE).
pub fn assign_in_order(
    cfg: &SchemeConfig,
    real: &NetworkRealization,
    assoc: &AssociationMap,
    powers: &PowerProfile,
    lp: usize,
    order: &[usize],
) -> Result<(PilotAssignment, Vec<StepStats>)> {
    let num_ues = real.num_ues();
    if assoc.num_ues() != num_ues || powers.pilot.len() < num_ues {
        return Err(Error::InvalidConfig(
            "association or powers do not match the drop".into(),
        ));
    }
    let mut seen = vec![false; num_ues];
    for &t in order {
        if t >= num_ues || std::mem::replace(&mut seen[t], true) {
            return Err(Error::InvalidConfig(format!(
                "arrival order is not a permutation (UE {t})"
            )));
        }
    }
    let ctx = AssignContext {
        beta: real.beta.view(),
        powers,
        assoc,
        lp,
    };
    let mut scheme = build_scheme(cfg, &ctx)?;
    let mut assignment = PilotAssignment::new(num_ues, lp);
    let mut stats = vec![StepStats::default(); num_ues];
    for (position, &t) in order.iter().enumerate() {
        let pilot = scheme.select(&ctx, t, position, &mut stats[t]);
        assignment.assign(t, pilot);
        scheme.commit(&ctx, t, pilot);
    }
    Ok((assignment, stats))
}

/// Assigns pilots to all UEs in index order.
pub fn assign_all(
    cfg: &SchemeConfig,
    real: &NetworkRealization,
    assoc: &AssociationMap,
    powers: &PowerProfile,
    lp: usize,
) -> Result<PilotAssignment> {
    let order: Vec<usize> = (0..real.num_ues()).collect();
    assign_in_order(cfg, real, assoc, powers, lp, &order).map(|(pa, _)| pa)
}
