use std::fmt::Write as _;

use serde::Serialize;

use super::metrics::estimate_rates;
use super::runner::ProblemSpec;
use crate::geometry::MeshQualityReport;
use crate::Error;

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub mesh: String,
    pub quality: Option<MeshQualityReport>,
    pub n_dofs: usize,
    pub n_multipliers: usize,
    pub e1: Option<f64>,
    pub e0: Option<f64>,
    /// `||lambda - lambda_h||_{-1/2,h}`.
    pub lambda_error: Option<f64>,
    pub tau: Option<f64>,
    pub condest: Option<f64>,
    pub residual: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl LevelResult {
    pub(crate) fn failed(level: usize, mesh: String, e: Error) -> Self {
        Self {
            level,
            mesh,
            quality: None,
            n_dofs: 0,
            n_multipliers: 0,
            e1: None,
            e0: None,
            lambda_error: None,
            tau: None,
            condest: None,
            residual: None,
            seconds: 0.0,
            error: Some(e.to_string()),
        }
    }

    pub fn hbar(&self) -> Option<f64> {
        self.quality.map(|q| q.h_mean)
    }
}

/// Rates between consecutive levels against the mean cell diameter, plus the
/// `e1` rate against the maximum diameter. Entry `i` pairs levels `i, i+1`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RateTable {
    pub e1: Vec<Option<f64>>,
    pub e0: Vec<Option<f64>>,
    pub lambda: Vec<Option<f64>>,
    pub e1_vs_hmax: Vec<Option<f64>>,
}

fn pairwise(
    levels: &[LevelResult],
    err: impl Fn(&LevelResult) -> Option<f64>,
    h: impl Fn(&LevelResult) -> Option<f64>,
) -> Vec<Option<f64>> {
    levels
        .windows(2)
        .map(|w| {
            let (e0, e1, h0, h1) = (err(&w[0])?, err(&w[1])?, h(&w[0])?, h(&w[1])?);
            estimate_rates(&[e0, e1], &[h0, h1]).ok()?[0]
        })
        .collect()
}

impl RateTable {
    pub fn from_levels(levels: &[LevelResult]) -> Self {
        let hbar = |l: &LevelResult| l.hbar();
        Self {
            e1: pairwise(levels, |l| l.e1, hbar),
            e0: pairwise(levels, |l| l.e0, hbar),
            lambda: pairwise(levels, |l| l.lambda_error, hbar),
            e1_vs_hmax: pairwise(levels, |l| l.e1, |l| l.quality.map(|q| q.h)),
        }
    }

    /// Last defined rate of a column.
    pub fn last(col: &[Option<f64>]) -> Option<f64> {
        col.last().copied().flatten()
    }
}

pub const E0_NOTE: &str = "e0 measures u - Pi^nabla u_h: the L2 projection onto P_k is not computable on this space";

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: ProblemSpec,
    pub notes: Vec<String>,
    pub levels: Vec<LevelResult>,
    pub rates: RateTable,
    pub total_seconds: f64,
}

impl ConvergenceReport {
    pub(crate) fn new(spec: &ProblemSpec, levels: Vec<LevelResult>, rates: RateTable) -> Self {
        let total_seconds = levels.iter().map(|l| l.seconds).sum();
        Self { config: spec.clone(), notes: vec![E0_NOTE.to_owned()], levels, rates, total_seconds }
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per level: mesh, N_P, h, hbar, e1, ecr, e0, ecr.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
        let rate = |col: &[Option<f64>], i: usize| {
            if i == 0 {
                "-".to_owned()
            } else {
                col.get(i - 1).copied().flatten().map(|r| format!("{r:.6}")).unwrap_or_else(|| "-".into())
            }
        };
        let mut s = String::from("mesh,N_P,h,hbar,e1,ecr,e0,ecr\n");
        for (i, l) in self.levels.iter().enumerate() {
            let q = l.quality;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                l.mesh,
                q.map(|q| q.n_cells.to_string()).unwrap_or_else(|| "-".into()),
                fmt(q.map(|q| q.h)),
                fmt(q.map(|q| q.h_mean)),
                fmt(l.e1),
                rate(&self.rates.e1, i),
                fmt(l.e0),
                rate(&self.rates.e0, i),
            );
        }
        s
    }

    /// The report with wall-clock timings zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.total_seconds = 0.0;
        for l in &mut r.levels {
            l.seconds = 0.0;
        }
        r
    }
}
