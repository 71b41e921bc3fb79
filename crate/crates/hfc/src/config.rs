//! Global quadrature presets selectable through `HFC_QUAD_PROFILE`.

use serde::{Deserialize, Serialize};

/// Density preset for contour quadrature, sup-norm sweeps and log grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadProfile {
    Fast,
    Default,
    Strict,
}

impl QuadProfile {
    /// Reads `HFC_QUAD_PROFILE` (`fast`, `default`, `strict`); unknown values
    /// fall back to `Default`.
    pub fn from_env() -> Self {
        match std::env::var("HFC_QUAD_PROFILE").as_deref() {
            Ok("fast") => QuadProfile::Fast,
            Ok("strict") => QuadProfile::Strict,
            _ => QuadProfile::Default,
        }
    }

    /// Contour nodes per decade on each ray. The floor of 16 keeps the
    /// Cauchy construction self-test below its 1e-8 bar on every profile.
    pub fn contour_nodes_per_decade(self) -> usize {
        match self {
            QuadProfile::Fast | QuadProfile::Default => 16,
            QuadProfile::Strict => 24,
        }
    }

    /// Sup-norm sweep nodes per decade for a `d`-dimensional boundary grid.
    /// Dense one coordinate at a time, coarser jointly: the adaptive
    /// refinement rounds recover the local maximum.
    pub fn sup_nodes_per_decade(self, d: usize) -> usize {
        let base = match self {
            QuadProfile::Fast => [32, 6, 3],
            QuadProfile::Default => [64, 10, 4],
            QuadProfile::Strict => [96, 16, 6],
        };
        base[d.clamp(1, 3) - 1]
    }

    /// Log-grid nodes per decade for square-function grids.
    pub fn log_grid_per_decade(self, d: usize) -> usize {
        let base = match self {
            QuadProfile::Fast => [16, 8, 4],
            QuadProfile::Default => [32, 16, 6],
            QuadProfile::Strict => [64, 24, 8],
        };
        base[d.clamp(1, 3) - 1]
    }

    /// Monte Carlo sample budget for gamma-norm estimates.
    pub fn mc_samples(self) -> usize {
        match self {
            QuadProfile::Fast => 1024,
            QuadProfile::Default => 4096,
            QuadProfile::Strict => 16384,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadProfile::Fast => "fast",
            QuadProfile::Default => "default",
            QuadProfile::Strict => "strict",
        }
    }
}

impl Default for QuadProfile {
    fn default() -> Self {
        QuadProfile::Default
    }
}
