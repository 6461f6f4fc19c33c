use adf_core::ann::default_nlist;
use adf_core::field::AdfParams;
use adf_core::trajectory::BaselineConfig;

use crate::Failure;

pub const DEFAULT_MATCH_THRESHOLD_M: f64 = 200.0;

/// Validated run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub sigma0_m: f64,
    pub k: usize,
    pub nprobe: usize,
    /// Requested list count; `None` uses the size rule.
    pub nlist: Option<usize>,
    pub fixed_bandwidth_m: Option<f64>,
    pub match_threshold_m: Option<f64>,
    pub extract_percentile: f64,
    pub baseline_threshold: f64,
    pub seed: u64,
}

fn positive(flag: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{flag} must be a positive number, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        positive("sigma0", self.sigma0_m)?;
        if self.k == 0 {
            return Err(Failure::Usage("--k must be at least 1".into()));
        }
        if self.nprobe == 0 {
            return Err(Failure::Usage("--nprobe must be at least 1".into()));
        }
        if self.nlist == Some(0) {
            return Err(Failure::Usage("--nlist must be at least 1".into()));
        }
        if let Some(b) = self.fixed_bandwidth_m {
            positive("fixed-bandwidth", b)?;
        }
        if let Some(t) = self.match_threshold_m {
            positive("threshold", t)?;
        }
        if !(self.extract_percentile > 0.0 && self.extract_percentile < 100.0) {
            return Err(Failure::Usage(format!(
                "--percentile must lie in (0, 100), got {}",
                self.extract_percentile
            )));
        }
        if !(0.0..=1.0).contains(&self.baseline_threshold) {
            return Err(Failure::Usage(format!(
                "--baseline-threshold must lie in [0, 1], got {}",
                self.baseline_threshold
            )));
        }
        Ok(())
    }

    pub fn adf_params(&self) -> AdfParams {
        let mut p = match self.fixed_bandwidth_m {
            Some(s) => AdfParams::fixed(s),
            None => AdfParams::default(),
        };
        p.sigma0_m = self.sigma0_m;
        p.k = self.k;
        p.nprobe = self.nprobe;
        p
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            threshold: self.baseline_threshold,
            ..Default::default()
        }
    }

    /// List count for `n` points: the requested value (or the size rule),
    /// never more than `n`.
    pub fn effective_nlist(&self, n: usize) -> usize {
        self.nlist.unwrap_or_else(|| default_nlist(n)).min(n).max(1)
    }

    pub fn threshold(&self) -> f64 {
        self.match_threshold_m.unwrap_or(DEFAULT_MATCH_THRESHOLD_M)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            sigma0_m: 500.0,
            k: 100,
            nprobe: 16,
            nlist: None,
            fixed_bandwidth_m: None,
            match_threshold_m: None,
            extract_percentile: 75.0,
            baseline_threshold: 0.75,
            seed: 0,
        }
    }

    #[test]
    fn defaults_are_valid() {
        let c = base();
        c.validate().unwrap();
        assert_eq!(c.threshold(), 200.0);
        assert_eq!(c.adf_params(), AdfParams::default());
        assert_eq!(c.effective_nlist(1_000_000), 4000);
        assert_eq!(c.effective_nlist(10_000_000), 4096);
    }

    #[test]
    fn nlist_shrinks_to_point_count() {
        let c = RunConfig { nlist: Some(4096), ..base() };
        assert_eq!(c.effective_nlist(100), 100);
        assert_eq!(c.effective_nlist(10_000), 4096);
    }

    #[test]
    fn bad_flags_name_themselves() {
        let cases = [
            RunConfig { sigma0_m: -1.0, ..base() },
            RunConfig { k: 0, ..base() },
            RunConfig { extract_percentile: 100.0, ..base() },
            RunConfig { baseline_threshold: 1.5, ..base() },
            RunConfig { fixed_bandwidth_m: Some(0.0), ..base() },
        ];
        let flags = ["--sigma0", "--k", "--percentile", "--baseline-threshold", "--fixed-bandwidth"];
        for (c, flag) in cases.iter().zip(flags) {
            match c.validate() {
                Err(Failure::Usage(m)) => assert!(m.contains(flag), "{m}"),
                other => panic!("{other:?}"),
            }
        }
    }
}
