use std::path::Path;

use serde::Deserialize;

use crate::assignment::{SchemeConfig, SchemeId, TieRule};
use crate::error::{Error, Result};
use crate::network::NetworkConfig;
use crate::performance::LsfdMode;

/// Flat JSON configuration. Every field is optional and overrides the preset
/// it is applied to; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub area_side_m: Option<f64>,
    pub num_aps: Option<usize>,
    pub num_ues: Option<usize>,
    pub antennas_per_ap: Option<usize>,
    pub bandwidth_hz: Option<f64>,
    pub coherence_block: Option<usize>,
    pub pilot_length: Option<usize>,
    pub shadow_sigma_db: Option<f64>,
    pub assoc_threshold: Option<f64>,
    pub strong_threshold: Option<f64>,
    pub tx_power_mw: Option<f64>,
    pub noise_figure_db: Option<f64>,
    pub pl_fixed_loss_db: Option<f64>,
    pub pl_d0_m: Option<f64>,
    pub pl_d1_m: Option<f64>,
    pub pl_exponent_near: Option<f64>,
    pub pl_exponent_mid: Option<f64>,
    pub pl_exponent_far: Option<f64>,
    pub wrap_around: Option<bool>,

    /// Comma-separated scheme ids, e.g. `"eem,dpb"`.
    pub scheme: Option<String>,
    pub dpb_s: Option<usize>,
    pub dpb_delta: Option<f64>,
    pub tie_rule: Option<TieRule>,
    /// Master seed of the experiment.
    pub seed: Option<u64>,

    pub lsfd: Option<LsfdMode>,
    pub num_drops: Option<usize>,
}

macro_rules! apply {
    ($src:expr, $dst:expr; $($from:ident => $($to:ident).+),* $(,)?) => {
        $( if let Some(v) = $src.$from.clone() { $dst.$($to).+ = v; } )*
    };
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn apply_network(&self, cfg: &mut NetworkConfig) {
        apply!(self, cfg;
            area_side_m => area_side_m,
            num_aps => num_aps,
            num_ues => num_ues,
            antennas_per_ap => antennas_per_ap,
            bandwidth_hz => bandwidth_hz,
            coherence_block => coherence_block,
            pilot_length => pilot_length,
            shadow_sigma_db => shadow_sigma_db,
            assoc_threshold => assoc_threshold,
            strong_threshold => strong_threshold,
            tx_power_mw => tx_power_mw,
            noise_figure_db => noise_figure_db,
            pl_fixed_loss_db => pathloss.fixed_loss_db,
            pl_d0_m => pathloss.d0_m,
            pl_d1_m => pathloss.d1_m,
            pl_exponent_near => pathloss.exponent_near,
            pl_exponent_mid => pathloss.exponent_mid,
            pl_exponent_far => pathloss.exponent_far,
            wrap_around => wrap_around,
        );
    }

    pub fn apply_scheme(&self, cfg: &mut SchemeConfig) {
        apply!(self, cfg;
            dpb_s => dpb_s,
            dpb_delta => dpb_delta,
            tie_rule => tie_rule,
            seed => seed,
        );
    }

    pub fn schemes(&self) -> Result<Option<Vec<SchemeId>>> {
        self.scheme.as_deref().map(parse_scheme_list).transpose()
    }
}

pub fn parse_scheme_list(s: &str) -> Result<Vec<SchemeId>> {
    let ids: Vec<SchemeId> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if ids.is_empty() {
        return Err(Error::InvalidConfig("empty scheme list".into()));
    }
    Ok(ids)
}
