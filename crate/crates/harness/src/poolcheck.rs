//! Sweep of adaptive pooling parameters over square inputs and targets.

use std::fmt::Write as _;

use nirmal_core::pooling::compute_pool_params;

use crate::error::Result;

pub const SWEEP_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolCheckRow {
    pub h_in: usize,
    pub target: usize,
    pub window: usize,
    pub stride: usize,
    pub out: usize,
}

impl PoolCheckRow {
    /// Achieved output size differs from the requested one.
    pub fn deviates(&self) -> bool {
        self.out != self.target
    }
}

/// One row per `(h_in, target)` in `[1, max]²`.
pub fn sweep(max: usize) -> Result<Vec<PoolCheckRow>> {
    let mut rows = Vec::with_capacity(max * max);
    for h_in in 1..=max {
        for target in 1..=max {
            let p = compute_pool_params(h_in, h_in, target, target)?;
            rows.push(PoolCheckRow {
                h_in,
                target,
                window: p.window_h,
                stride: p.stride_h,
                out: p.out_h,
            });
        }
    }
    Ok(rows)
}

pub fn format_csv(rows: &[PoolCheckRow]) -> String {
    let mut out = String::from("h_in,target,window,stride,out,deviates\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.h_in,
            r.target,
            r.window,
            r.stride,
            r.out,
            r.deviates()
        );
    }
    out
}
