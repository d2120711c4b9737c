//! Network drops, large-scale fading and AP–UE association.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assignment::PilotAssignment;
use crate::error::{Error, Result};
use crate::seed;

/// Three-slope path-loss model with a flat region below `d0_m`.
///
/// Loss in dB at distance `d` (km inside the log terms):
///
/// - `d > d1`:       `L + 10 n_far log10(d)`
/// - `d0 < d <= d1`: `L + 10 (n_far - n_mid) log10(d1) + 10 n_mid log10(d)`
/// - `d <= d0`:      the mid branch plus `10 n_near log10(d / d0)`
///
/// so the branches meet at both breakpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    /// Constant term `L` in dB. The default corresponds to 1.9 GHz with a
    /// 15 m AP and a 1.65 m UE (Hata-COST231 correction terms).
    pub fixed_loss_db: f64,
    pub d0_m: f64,
    pub d1_m: f64,
    pub exponent_near: f64,
    pub exponent_mid: f64,
    pub exponent_far: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            fixed_loss_db: 140.7,
            d0_m: 10.0,
            d1_m: 50.0,
            exponent_near: 0.0,
            exponent_mid: 2.0,
            exponent_far: 3.5,
        }
    }
}

/// Distances below this are clamped before evaluating the path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;

impl PathLoss {
    /// Path loss in dB (positive number) at `distance_m`.
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let km = |m: f64| m.max(MIN_DISTANCE_M) / 1000.0;
        let d = km(distance_m);
        let d0 = km(self.d0_m);
        let d1 = km(self.d1_m);
        let far = |d: f64| self.fixed_loss_db + 10.0 * self.exponent_far * d.log10();
        let mid = |d: f64| {
            self.fixed_loss_db
                + 10.0 * (self.exponent_far - self.exponent_mid) * d1.log10()
                + 10.0 * self.exponent_mid * d.log10()
        };
        if d > d1 {
            far(d)
        } else if d > d0 {
            mid(d)
        } else {
            mid(d0) + 10.0 * self.exponent_near * (d / d0).log10()
        }
    }

    fn validate(&self) -> Result<()> {
        let vals = [
            self.fixed_loss_db,
            self.d0_m,
            self.d1_m,
            self.exponent_near,
            self.exponent_mid,
            self.exponent_far,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite path-loss constant".into()));
        }
        if !(self.d0_m > 0.0 && self.d0_m < self.d1_m) {
            return Err(Error::InvalidConfig(format!(
                "path-loss breakpoints must satisfy 0 < d0 < d1 (d0 = {}, d1 = {})",
                self.d0_m, self.d1_m
            )));
        }
        Ok(())
    }
}

/// Linear-scale LSFC for one AP–UE pair.
pub fn compute_lsfc(distance_m: f64, shadow_db: f64, params: &PathLoss) -> f64 {
    db_to_linear(-params.loss_db(distance_m) + shadow_db)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub area_side_m: f64,
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas_per_ap: usize,
    pub bandwidth_hz: f64,
    pub coherence_block: usize,
    pub pilot_length: usize,
    pub shadow_sigma_db: f64,
    pub assoc_threshold: f64,
    pub strong_threshold: f64,
    /// Shared by pilot and data transmission.
    pub tx_power_mw: f64,
    pub noise_figure_db: f64,
    pub pathloss: PathLoss,
    /// Measure distances on a torus of side `area_side_m`.
    pub wrap_around: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            area_side_m: 1000.0,
            num_aps: 100,
            num_ues: 100,
            antennas_per_ap: 8,
            bandwidth_hz: 20e6,
            coherence_block: 200,
            pilot_length: 7,
            shadow_sigma_db: 8.0,
            assoc_threshold: 0.95,
            strong_threshold: 0.95,
            tx_power_mw: 100.0,
            noise_figure_db: 9.0,
            pathloss: PathLoss::default(),
            wrap_around: false,
        }
    }
}

impl NetworkConfig {
    /// Reduced preset used for quick runs and the acceptance suite.
    pub fn desk_scale() -> Self {
        Self {
            num_aps: 30,
            num_ues: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("area_side_m", self.area_side_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("shadow_sigma_db", self.shadow_sigma_db),
            ("assoc_threshold", self.assoc_threshold),
            ("strong_threshold", self.strong_threshold),
            ("tx_power_mw", self.tx_power_mw),
            ("noise_figure_db", self.noise_figure_db),
        ];
        if let Some((name, _)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} is not finite")));
        }
        self.pathloss.validate()?;
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.area_side_m <= 0.0 {
            return fail("area_side_m must be positive".into());
        }
        if self.num_aps == 0 || self.num_ues == 0 {
            return fail("need at least one AP and one UE".into());
        }
        if self.pilot_length == 0 || self.pilot_length > self.coherence_block {
            return fail(format!(
                "pilot_length must satisfy 0 < Lp <= Lc (Lp = {}, Lc = {})",
                self.pilot_length, self.coherence_block
            ));
        }
        if self.antennas_per_ap <= self.pilot_length {
            return fail(format!(
                "PFZF needs more antennas than pilots (A = {}, Lp = {})",
                self.antennas_per_ap, self.pilot_length
            ));
        }
        if !(self.assoc_threshold > 0.0 && self.assoc_threshold <= 1.0) {
            return fail(format!("assoc_threshold {} not in (0, 1]", self.assoc_threshold));
        }
        if !(self.strong_threshold > 0.0 && self.strong_threshold <= 1.0) {
            return fail(format!("strong_threshold {} not in (0, 1]", self.strong_threshold));
        }
        if self.bandwidth_hz <= 0.0 || self.tx_power_mw <= 0.0 || self.shadow_sigma_db < 0.0 {
            return fail("bandwidth, power and shadow sigma must be positive".into());
        }
        Ok(())
    }
}

pub type Point = [f64; 2];

/// One Monte-Carlo drop.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkRealization {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    /// `beta[[m, t]]`, linear scale.
    pub beta: Array2<f64>,
    pub seed: u64,
}

impl NetworkRealization {
    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.beta.ncols()
    }

    /// Keeps only the first `num_ues` UEs.
    pub fn truncate_ues(&self, num_ues: usize) -> Self {
        let n = num_ues.min(self.num_ues());
        Self {
            ap_positions: self.ap_positions.clone(),
            ue_positions: self.ue_positions[..n].to_vec(),
            beta: self.beta.slice(ndarray::s![.., ..n]).to_owned(),
            seed: self.seed,
        }
    }
}

fn distance(a: Point, b: Point, side: f64, wrap: bool) -> f64 {
    let axis = |d: f64| {
        let d = d.abs();
        if wrap {
            d.min(side - d)
        } else {
            d
        }
    };
    axis(a[0] - b[0]).hypot(axis(a[1] - b[1]))
}

/// Draws a drop. APs are placed first, then each UE's position followed by
/// its shadowing towards every AP, so a drop with more UEs extends a drop
/// with fewer under the same seed.
pub fn generate_drop(config: &NetworkConfig, seed: u64) -> Result<NetworkRealization> {
    config.validate()?;
    let side = config.area_side_m;
    let mut rng = seed::rng(seed);
    let shadow =
        Normal::new(0.0, config.shadow_sigma_db).map_err(|e| Error::InvalidConfig(format!("shadow sigma: {e}")))?;

    let point =
        |rng: &mut rand_chacha::ChaCha8Rng| -> Point { [rng.random::<f64>() * side, rng.random::<f64>() * side] };
    let ap_positions: Vec<Point> = (0..config.num_aps).map(|_| point(&mut rng)).collect();

    let mut beta = Array2::zeros((config.num_aps, config.num_ues));
    let mut ue_positions = Vec::with_capacity(config.num_ues);
    for t in 0..config.num_ues {
        let ue = point(&mut rng);
        for (m, &ap) in ap_positions.iter().enumerate() {
            let draw = shadow.sample(&mut rng);
            let d = distance(ap, ue, side, config.wrap_around);
            let shadow_db = if d > config.pathloss.d1_m { draw } else { 0.0 };
            beta[[m, t]] = compute_lsfc(d, shadow_db, &config.pathloss);
        }
        ue_positions.push(ue);
    }

    Ok(NetworkRealization {
        ap_positions,
        ue_positions,
        beta,
        seed,
    })
}

/// Normalized (by noise power) pilot and uplink powers.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    pub pilot: Vec<f64>,
    pub uplink: Vec<f64>,
}

impl PowerProfile {
    pub fn uniform(num_ues: usize, p: f64) -> Self {
        Self {
            pilot: vec![p; num_ues],
            uplink: vec![p; num_ues],
        }
    }
}

/// Thermal noise floor in dBm for the configured bandwidth and noise figure.
pub fn noise_power_dbm(config: &NetworkConfig) -> f64 {
    -174.0 + 10.0 * config.bandwidth_hz.log10() + config.noise_figure_db
}

pub fn normalize_powers(config: &NetworkConfig) -> PowerProfile {
    let tx_dbm = 10.0 * config.tx_power_mw.log10();
    PowerProfile::uniform(config.num_ues, db_to_linear(tx_dbm - noise_power_dbm(config)))
}

/// Length of the shortest prefix of `sorted_desc` whose sum reaches
/// `fraction` of the total.
fn cumulative_prefix_len(sorted_desc: &[f64], fraction: f64) -> usize {
    let total: f64 = sorted_desc.iter().sum();
    let target = fraction * total;
    let mut acc = 0.0;
    for (k, v) in sorted_desc.iter().enumerate() {
        acc += v;
        if acc >= target {
            return k + 1;
        }
    }
    sorted_desc.len()
}

/// Sorts indices by descending key, lower index first on ties.
fn sort_desc_by(indices: &mut [usize], key: impl Fn(usize) -> f64) {
    indices.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
}

/// Serving set of every UE: the strongest APs whose LSFCs add up to at least
/// `beta_th` of the UE's total LSFC. Each list is ordered by descending LSFC.
pub fn associate_aps(real: &NetworkRealization, beta_th: f64) -> Vec<Vec<usize>> {
    let m_count = real.num_aps();
    (0..real.num_ues())
        .map(|t| {
            let col = real.beta.column(t);
            let mut order: Vec<usize> = (0..m_count).collect();
            sort_desc_by(&mut order, |m| col[m]);
            let sorted: Vec<f64> = order.iter().map(|&m| col[m]).collect();
            order.truncate(cumulative_prefix_len(&sorted, beta_th));
            order
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssociationMap {
    /// `M_t`, descending LSFC.
    pub serving_aps: Vec<Vec<usize>>,
    /// `T_m`, ascending UE index.
    pub served_ues: Vec<Vec<usize>>,
    /// `S_m`, descending LSFC. Empty until [`group_strong_ues`] runs.
    pub strong_ues: Vec<Vec<usize>>,
    /// `L_{S_m}`: distinct pilots among `S_m`.
    pub strong_pilot_count: Vec<usize>,
    /// `delta[[m, t]]`
    pub strong_flag: Array2<bool>,
}

impl AssociationMap {
    pub fn from_serving(serving_aps: Vec<Vec<usize>>, num_aps: usize) -> Self {
        let num_ues = serving_aps.len();
        let mut served_ues = vec![Vec::new(); num_aps];
        for (t, aps) in serving_aps.iter().enumerate() {
            for &m in aps {
                served_ues[m].push(t);
            }
        }
        Self {
            serving_aps,
            served_ues,
            strong_ues: vec![Vec::new(); num_aps],
            strong_pilot_count: vec![0; num_aps],
            strong_flag: Array2::from_elem((num_aps, num_ues), false),
        }
    }

    pub fn build(real: &NetworkRealization, beta_th: f64) -> Self {
        Self::from_serving(associate_aps(real, beta_th), real.num_aps())
    }

    pub fn num_aps(&self) -> usize {
        self.served_ues.len()
    }

    pub fn num_ues(&self) -> usize {
        self.serving_aps.len()
    }

    pub fn serves(&self, m: usize, t: usize) -> bool {
        self.serving_aps[t].contains(&m)
    }
}

/// Picks the strong UEs `S_m` at every AP (cumulative-LSFC prefix over `T_m`
/// with fraction `nu_strong`) and counts their distinct pilots.
pub fn group_strong_ues(
    real: &NetworkRealization,
    assoc: &AssociationMap,
    nu_strong: f64,
    assignment: &PilotAssignment,
    antennas: usize,
) -> Result<AssociationMap> {
    let mut out = assoc.clone();
    out.strong_flag.fill(false);
    for m in 0..assoc.num_aps() {
        let mut order = assoc.served_ues[m].clone();
        sort_desc_by(&mut order, |t| real.beta[[m, t]]);
        let sorted: Vec<f64> = order.iter().map(|&t| real.beta[[m, t]]).collect();
        order.truncate(cumulative_prefix_len(&sorted, nu_strong));

        let mut pilots: Vec<usize> = order.iter().filter_map(|&t| assignment.pilot(t)).collect();
        pilots.sort_unstable();
        pilots.dedup();
        if pilots.len() >= antennas {
            return Err(Error::InvalidConfig(format!(
                "AP {m}: {} distinct strong pilots leave no PFZF degrees of freedom with {antennas} antennas",
                pilots.len()
            )));
        }
        for &t in &order {
            out.strong_flag[[m, t]] = true;
        }
        out.strong_pilot_count[m] = pilots.len();
        out.strong_ues[m] = order;
    }
    Ok(out)
}
