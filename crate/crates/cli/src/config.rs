//! JSON experiment configuration: schema types, conversion into the library
//! domain types, and the content hash embedded in every output row.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spde_moments::model::{
    BoundedProfile, EquationSpec, NoiseSpec, SpatialCovariance, TimeFamily,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub equation: EquationBlock,
    pub noise: NoiseBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationBlock {
    pub kind: EquationKindCfg,
    pub d: usize,
    pub u0: f64,
    #[serde(default)]
    pub v0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationKindCfg {
    Heat,
    Wave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub family: TimeFamilyCfg,
    pub spatial: SpatialCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFamilyCfg {
    White,
    Do {
        hurst: f64,
    },
    Fractional {
        hurst: f64,
    },
    Generalized {
        a1: f64,
        a2: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialCfg {
    Bounded { a0: f64, profile: ProfileCfg },
    Riesz { alpha: f64 },
    SpaceWhite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileCfg {
    Constant,
    GaussianBump { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub t: Vec<f64>,
    pub n: Vec<usize>,
    pub n_rep: usize,
    pub quad_steps: usize,
    pub seed: u64,
    /// Lattice geometry; required by the fieldsim method only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub half_width: f64,
    pub n_x: usize,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub dump_fields: bool,
}

impl ExperimentConfig {
    /// Parses with field-path diagnostics on error.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            format!(
                "config field `{}`: {} (line {}, column {})",
                e.path(),
                inner,
                inner.line(),
                inner.column()
            )
        })
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    /// Hash of the science-relevant blocks (equation, noise, run); the
    /// output block does not affect results and is excluded.
    pub fn content_hash(&self) -> String {
        let payload = serde_json::to_string(&(&self.equation, &self.noise, &self.run))
            .expect("hash serialization");
        let digest = Sha256::digest(payload.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }

    /// Builds the library domain types, collecting construction errors.
    pub fn to_core(&self) -> Result<(EquationSpec, NoiseSpec), String> {
        let eq = match self.equation.kind {
            EquationKindCfg::Heat => EquationSpec::heat(self.equation.d, self.equation.u0),
            EquationKindCfg::Wave => {
                EquationSpec::wave(self.equation.d, self.equation.u0, self.equation.v0)
            }
        }
        .map_err(|e| e.to_string())?;
        let spatial = match &self.noise.spatial {
            SpatialCfg::Bounded { a0, profile } => {
                let profile = match profile {
                    ProfileCfg::Constant => BoundedProfile::Constant,
                    ProfileCfg::GaussianBump { width } => {
                        BoundedProfile::GaussianBump { width: *width }
                    }
                };
                SpatialCovariance::bounded(*a0, profile)
            }
            SpatialCfg::Riesz { alpha } => SpatialCovariance::riesz(*alpha, self.equation.d),
            SpatialCfg::SpaceWhite => SpatialCovariance::space_white(self.equation.d),
        }
        .map_err(|e| e.to_string())?;
        let family = match &self.noise.family {
            TimeFamilyCfg::White => TimeFamily::WhiteTime,
            TimeFamilyCfg::Do { hurst } => {
                TimeFamily::do_noise(*hurst).map_err(|e| e.to_string())?
            }
            TimeFamilyCfg::Fractional { hurst } => {
                TimeFamily::fractional(*hurst).map_err(|e| e.to_string())?
            }
            TimeFamilyCfg::Generalized { a1, a2 } => {
                TimeFamily::generalized(*a1, *a2).map_err(|e| e.to_string())?
            }
        };
        Ok((eq, NoiseSpec::new(family, spatial)))
    }

    /// Short names used in CSV rows.
    pub fn family_name(&self) -> &'static str {
        match self.noise.family {
            TimeFamilyCfg::White => "white",
            TimeFamilyCfg::Do { .. } => "do",
            TimeFamilyCfg::Fractional { .. } => "fractional",
            TimeFamilyCfg::Generalized { .. } => "generalized",
        }
    }

    pub fn spatial_name(&self) -> &'static str {
        match &self.noise.spatial {
            SpatialCfg::Bounded { profile: ProfileCfg::Constant, .. } => "bounded-constant",
            SpatialCfg::Bounded { profile: ProfileCfg::GaussianBump { .. }, .. } => {
                "bounded-gaussian-bump"
            }
            SpatialCfg::Riesz { .. } => "riesz",
            SpatialCfg::SpaceWhite => "space-white",
        }
    }

    /// The scalar parameter reported in the spatial_param column: A0 for
    /// bounded kernels, alpha for the Riesz kernel.
    pub fn spatial_param(&self) -> Option<f64> {
        match &self.noise.spatial {
            SpatialCfg::Bounded { a0, .. } => Some(*a0),
            SpatialCfg::Riesz { alpha } => Some(*alpha),
            SpatialCfg::SpaceWhite => None,
        }
    }

    pub fn generalized_params(&self) -> (Option<f64>, Option<f64>) {
        match self.noise.family {
            TimeFamilyCfg::Generalized { a1, a2 } => (Some(a1), Some(a2)),
            _ => (None, None),
        }
    }

    pub fn equation_name(&self) -> &'static str {
        match self.equation.kind {
            EquationKindCfg::Heat => "heat",
            EquationKindCfg::Wave => "wave",
        }
    }
}
