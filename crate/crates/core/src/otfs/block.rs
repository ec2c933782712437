use crate::error::{config_err, Result};
use crate::C64;

use super::OtfsConfig;

macro_rules! grid_block {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            rows: usize,
            cols: usize,
            data: Vec<C64>,
        }

        impl $name {
            pub fn zeros(rows: usize, cols: usize) -> Self {
                Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
            }

            pub fn for_config(cfg: &OtfsConfig) -> Self {
                Self::zeros(cfg.n(), cfg.m())
            }

            /// Wraps row-major data (`row * cols + col`).
            pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
                if data.len() != rows * cols {
                    return config_err(format!(
                        "block data has {} entries, expected {rows}x{cols}",
                        data.len()
                    ));
                }
                Ok(Self { rows, cols, data })
            }

            pub fn rows(&self) -> usize {
                self.rows
            }
            pub fn cols(&self) -> usize {
                self.cols
            }
            pub fn as_slice(&self) -> &[C64] {
                &self.data
            }
            pub fn as_mut_slice(&mut self) -> &mut [C64] {
                &mut self.data
            }
            pub fn into_vec(self) -> Vec<C64> {
                self.data
            }
            pub fn get(&self, r: usize, c: usize) -> C64 {
                self.data[r * self.cols + c]
            }
            pub fn set(&mut self, r: usize, c: usize, v: C64) {
                self.data[r * self.cols + c] = v;
            }

            pub(crate) fn check(&self, cfg: &OtfsConfig) -> Result<()> {
                if self.rows != cfg.n() || self.cols != cfg.m() {
                    return config_err(format!(
                        "block is {}x{}, configuration expects {}x{}",
                        self.rows,
                        self.cols,
                        cfg.n(),
                        cfg.m()
                    ));
                }
                Ok(())
            }
        }
    };
}

grid_block!(
    /// Symbols on the Doppler-delay grid, indexed `(k, l)`.
    DelayDopplerBlock
);
grid_block!(
    /// Samples on the time-frequency grid, indexed `(n, m)`.
    TimeFrequencyBlock
);
