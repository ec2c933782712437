use std::ops::Range;

use crate::error::{config_err, domain_err, Result};

use super::AngleGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Main,
    /// Between main lobe and sidelobe region; not fitted.
    Transition,
    Peripheral,
}

/// Desired pattern magnitude over a synthesis grid, split into sections.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMask {
    pub desired: Vec<f64>,
    pub regions: Vec<Region>,
    pub main_section: Range<usize>,
    pub main_level: f64,
    pub peripheral_level: f64,
}

impl BeamMask {
    /// Flat main section `|theta - center| <= half_width`, sidelobe section beyond
    /// `half_width + transition`, with `G_m s_m^2 + G_p s_p^2 = 1` and
    /// `s_p = 10^{sll_db / 20} s_m`.
    pub fn flat_top(grid: &AngleGrid, center: f64, half_width: f64, transition: f64, sll_db: f64) -> Result<Self> {
        if !(half_width > 0.0 && transition >= 0.0) {
            return domain_err("main section half width must be positive and transition non-negative");
        }
        if !(sll_db < 0.0) {
            return domain_err(format!("sidelobe level must be below the main level, got {sll_db} dB"));
        }
        let tol = 1e-12;
        let regions: Vec<Region> = grid
            .angles
            .iter()
            .map(|&th| {
                let d = (th - center).abs();
                if d <= half_width + tol {
                    Region::Main
                } else if d > half_width + transition + tol {
                    Region::Peripheral
                } else {
                    Region::Transition
                }
            })
            .collect();
        let start = regions.iter().position(|r| *r == Region::Main);
        let Some(start) = start else {
            return config_err("main section contains no grid point");
        };
        let end = start + regions[start..].iter().take_while(|r| **r == Region::Main).count();
        let g_m = (end - start) as f64;
        let g_p = regions.iter().filter(|r| **r == Region::Peripheral).count() as f64;
        let ratio = 10f64.powf(sll_db / 20.0);
        let main_level = 1.0 / (g_m + g_p * ratio * ratio).sqrt();
        let peripheral_level = ratio * main_level;
        let desired = regions
            .iter()
            .map(|r| match r {
                Region::Main => main_level,
                Region::Peripheral => peripheral_level,
                Region::Transition => 0.0,
            })
            .collect();
        Ok(Self { desired, regions, main_section: start..end, main_level, peripheral_level })
    }

    /// Fits an arbitrary non-negative pattern everywhere (no sidelobe section).
    pub fn from_pattern(desired: Vec<f64>) -> Result<Self> {
        if desired.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return domain_err("desired pattern must be finite and non-negative");
        }
        let main_level = desired.iter().cloned().fold(0.0, f64::max);
        if main_level <= 0.0 {
            return domain_err("desired pattern is identically zero");
        }
        let n = desired.len();
        Ok(Self { regions: vec![Region::Main; n], desired, main_section: 0..n, main_level, peripheral_level: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.desired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.desired.is_empty()
    }

    /// `G_m s_m^2 + G_p s_p^2`.
    pub fn total_power(&self) -> f64 {
        self.desired.iter().map(|v| v * v).sum()
    }
}
