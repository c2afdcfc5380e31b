use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use super::problems::ProblemName;
use super::runner::{run_study, MeshFamily, ProblemSpec};
use crate::curved::{kstar_default, CorrectionConfig, DeltaRegime, SigmaStrategy};
use crate::element::Stabilization;
use crate::weak_bc::{MultiplierOrder, WeakBcConfig, DEFAULT_ALPHA, DEFAULT_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeshArg {
    Structured,
    Voronoi,
    Disk,
    Squares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Nitsche,
    Bh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KPrimeArg {
    #[value(name = "k")]
    K,
    #[value(name = "k-1")]
    KMinus1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaArg {
    Normal,
    DistanceGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StabArg {
    DRecipe,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

/// Convergence studies for the virtual element method with weakly imposed
/// Dirichlet conditions.
#[derive(Debug, Parser)]
#[command(name = "vem-study", version)]
pub struct Args {
    #[arg(long, value_enum, default_value = "test1-2d")]
    pub problem: ProblemName,
    /// Defaults to voronoi for polygonal problems, disk or squares otherwise.
    #[arg(long, value_enum)]
    pub mesh: Option<MeshArg>,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, value_enum, default_value = "nitsche")]
    pub method: MethodArg,
    /// Nitsche parameter (default 1000).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Barbosa-Hughes parameter (default 0.001).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Barbosa-Hughes multiplier order.
    #[arg(long, value_enum)]
    pub kprime: Option<KPrimeArg>,
    #[arg(long, value_enum, default_value = "off")]
    pub correction: OnOff,
    /// `auto` or an integer in `0..=order`.
    #[arg(long, default_value = "auto")]
    pub kstar: String,
    #[arg(long, value_enum, default_value = "normal")]
    pub sigma: SigmaArg,
    /// Boundary refinement steps of the squares mesh.
    #[arg(long)]
    pub refine_steps: Option<u32>,
    #[arg(long, value_enum, default_value = "d-recipe")]
    pub stab: StabArg,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Estimate the 1-norm condition number of every system.
    #[arg(long)]
    pub condest: bool,
    /// Write each level's matrix in Matrix Market format next to the report.
    #[arg(long)]
    pub export_matrix: bool,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
}

pub const VORONOI_BASE_SEEDS: usize = 16;
pub const VORONOI_LLOYD_ITERS: usize = 10;
pub const STRUCTURED_BASE: usize = 4;
pub const DISK_BASE_BOUNDARY: usize = 16;
pub const SQUARES_BASE: usize = 4;

fn usage(msg: impl Into<String>) -> Result<ProblemSpec, String> {
    Err(msg.into())
}

/// Resolves flags into a study specification; `Err` is a usage error.
pub fn spec_from_args(a: &Args) -> Result<ProblemSpec, String> {
    let k = a.order;
    if k == 0 {
        return usage("--order must be at least 1");
    }
    let method = match a.method {
        MethodArg::Nitsche => {
            if a.alpha.is_some() {
                return usage("--alpha applies to --method bh only");
            }
            if a.kprime == Some(KPrimeArg::KMinus1) {
                return usage("Nitsche requires --kprime k");
            }
            WeakBcConfig::nitsche(k, a.gamma.unwrap_or(DEFAULT_GAMMA))
        }
        MethodArg::Bh => {
            if a.gamma.is_some() {
                return usage("--gamma applies to --method nitsche only");
            }
            let kp = match a.kprime.unwrap_or(KPrimeArg::K) {
                KPrimeArg::K => MultiplierOrder::K,
                KPrimeArg::KMinus1 if k == 1 => return usage("--kprime k-1 needs --order at least 2"),
                KPrimeArg::KMinus1 => MultiplierOrder::KMinus1,
            };
            WeakBcConfig::barbosa_hughes(k, a.alpha.unwrap_or(DEFAULT_ALPHA), kp)
        }
    };
    let mesh_kind = a.mesh.unwrap_or(match a.problem {
        ProblemName::Disk => MeshArg::Disk,
        ProblemName::QuarterDisk => MeshArg::Squares,
        _ => MeshArg::Voronoi,
    });
    let polygonal = !a.problem.is_curved();
    if polygonal != matches!(mesh_kind, MeshArg::Structured | MeshArg::Voronoi) {
        return usage("structured and voronoi meshes fit the polygonal problems; disk and squares the curved ones");
    }
    if a.refine_steps.is_some() && mesh_kind != MeshArg::Squares {
        return usage("--refine-steps applies to --mesh squares only");
    }
    let mesh = match mesh_kind {
        MeshArg::Structured => MeshFamily::Structured { base: STRUCTURED_BASE },
        MeshArg::Voronoi => MeshFamily::Voronoi { base_seeds: VORONOI_BASE_SEEDS, lloyd_iters: VORONOI_LLOYD_ITERS },
        MeshArg::Disk => MeshFamily::Disk { base_boundary: DISK_BASE_BOUNDARY },
        MeshArg::Squares => MeshFamily::Squares { base: SQUARES_BASE, refine_steps: a.refine_steps.unwrap_or(0) },
    };
    let correction = match a.correction {
        OnOff::Off => None,
        OnOff::On => {
            let regime = if mesh_kind == MeshArg::Squares { DeltaRegime::HLinear } else { DeltaRegime::HSquared };
            let kstar = match a.kstar.as_str() {
                "auto" => kstar_default(k, regime),
                s => match s.parse::<usize>() {
                    Ok(v) if v <= k => v,
                    _ => return usage(format!("--kstar must be auto or an integer in 0..={k}")),
                },
            };
            let sigma = match a.sigma {
                SigmaArg::Normal => SigmaStrategy::EdgeNormal,
                SigmaArg::DistanceGradient => SigmaStrategy::DistanceGradient,
            };
            Some(CorrectionConfig::with_kstar(kstar, sigma))
        }
    };
    let stab = match a.stab {
        StabArg::DRecipe => Stabilization::DRecipe,
        StabArg::Euclidean => Stabilization::Euclidean,
    };
    let mut spec = ProblemSpec::new(a.problem, method, mesh).with_correction(correction).with_stabilization(stab);
    spec.seed = a.seed;
    spec.condest = a.condest;
    if a.export_matrix {
        let stem = a.out.as_ref().map(|p| p.with_extension("")).unwrap_or_else(|| PathBuf::from("vem-study"));
        spec.export_matrix = Some(stem);
    }
    if a.levels == 0 {
        return usage("--levels must be at least 1");
    }
    Ok(spec)
}

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let a = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let spec = match spec_from_args(&a) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let report = match run_study(&spec, a.levels) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let text = match a.format {
        FormatArg::Csv => report.to_csv(),
        FormatArg::Json => match report.to_json() {
            Ok(t) => t + "\n",
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        },
    };
    match &a.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                eprintln!("error: writing {}: {e}", p.display());
                return 1;
            }
        }
        None => print!("{text}"),
    }
    if report.levels.iter().any(|l| l.error.is_some()) {
        eprintln!("error: some levels failed; see the report");
        return 1;
    }
    0
}
