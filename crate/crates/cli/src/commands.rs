use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;

use adf_core::ann::{load_snapshot, save_snapshot, train, BruteForce, IvfIndex, KMeansConfig, NeighborSource};
use adf_core::eval::{latency_bench, spatial_match, threshold_sweep, BenchMode, BenchReport, MatchReport};
use adf_core::extract::{extract_batch, knn_density_trace, FieldTrace};
use adf_core::field::{evaluate_all_with, evaluate_with, AdfParams, Bandwidth, ScoredPointSet};
use adf_core::geo::geodetic_to_ecef;
use adf_core::io;
use adf_core::synth::{generate, SynthSpec};
use adf_core::trajectory::{run_baseline_batch, PoiRecord, Trajectory};
use adf_core::{EcefCoord, Ellipsoid, Exec};

use crate::config::RunConfig;
use crate::{CmdResult, Failure};

const SWEEP_THRESHOLDS_M: [f64; 9] = [100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0];
const ABLATE_BANDWIDTHS_M: [f64; 3] = [250.0, 500.0, 750.0];
const ABLATE_NPROBE: [usize; 5] = [4, 8, 16, 64, 256];
const ABLATE_K: [usize; 3] = [50, 100, 150];

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    flights: usize,
    /// Samples per flight (1 Hz).
    #[arg(long, default_value_t = 900)]
    duration: usize,
    #[arg(long, default_value_t = 0.5)]
    turn_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    holding_fraction: f64,
    /// Position noise std-dev (m).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Scored cloud size.
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    /// Cloud spread around maneuvers (m).
    #[arg(long, default_value_t = 300.0)]
    spread: f64,
    #[arg(long)]
    two_regime: bool,
    /// Omit reported velocities.
    #[arg(long)]
    no_velocity: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Trajectory JSONL.
    #[arg(long)]
    trajectories: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    /// POI CSV to index.
    #[arg(long)]
    points: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalFieldArgs {
    #[arg(long)]
    points: PathBuf,
    /// Saved index for `points`; trained on the fly when absent.
    #[arg(long)]
    index: Option<PathBuf>,
    /// POI CSV of query locations; defaults to the points themselves.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Leave each point out of its own field value.
    #[arg(long)]
    exclude_self: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference POIs (POI or extract CSV).
    #[arg(long)]
    baseline: PathBuf,
    /// Candidate POIs (POI or extract CSV).
    #[arg(long)]
    candidate: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    points: PathBuf,
    /// Reference POIs; computed from the trajectories when absent.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    queries: usize,
}

fn data_err(e: impl Into<anyhow::Error>, what: &Path) -> Failure {
    Failure::Data(e.into().context(format!("reading {}", what.display())))
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display())).map_err(Failure::Data)?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn ingest(path: &Path) -> Result<Vec<Trajectory>, Failure> {
    let ing = io::load_trajectories(path).map_err(|e| data_err(e, path))?;
    for s in &ing.skipped {
        eprintln!("warning: skipped flight {}: {}", s.flight_id, s.reason);
    }
    eprintln!(
        "ingested {} flights from {} rows; skipped {}",
        ing.trajectories.len(),
        ing.rows,
        ing.skipped.len()
    );
    Ok(ing.trajectories)
}

fn to_ecef(pois: &[PoiRecord]) -> Vec<EcefCoord> {
    let ell = Ellipsoid::WGS84;
    pois.iter().map(|p| geodetic_to_ecef(&p.geodetic(), &ell)).collect()
}

fn load_points(path: &Path) -> Result<(Vec<PoiRecord>, ScoredPointSet), Failure> {
    let mut pois = io::load_pois(path).map_err(|e| data_err(e, path))?;
    if pois.is_empty() {
        return Err(data_err(adf_core::AdfError::EmptyInput, path));
    }
    io::sort_pois(&mut pois);
    let pts = ScoredPointSet::new(to_ecef(&pois), pois.iter().map(|p| p.score).collect())
        .map_err(|e| data_err(e, path))?;
    Ok((pois, pts))
}

fn trained(cfg: &RunConfig, pts: &ScoredPointSet) -> Result<IvfIndex, Failure> {
    let nlist = cfg.effective_nlist(pts.len());
    if cfg.nlist.is_some_and(|n| n > nlist) {
        eprintln!("note: --nlist shrunk to {nlist} for {} points", pts.len());
    }
    Ok(train(pts.positions(), nlist, &KMeansConfig::with_seed(cfg.seed))?)
}

/// Loads a snapshot built from exactly `pts`, or trains a fresh index.
fn index_for(cfg: &RunConfig, pts: &ScoredPointSet, snapshot: Option<&Path>) -> Result<IvfIndex, Failure> {
    let idx = match snapshot {
        Some(p) => {
            let idx = load_snapshot(p).map_err(|e| data_err(e, p))?;
            if idx.points() != pts.positions() {
                return Err(Failure::Data(anyhow::anyhow!(
                    "index {} was not built from these points",
                    p.display()
                )));
            }
            idx
        }
        None => trained(cfg, pts)?,
    };
    if !idx.check_partition() {
        return Err(Failure::Internal("inverted lists do not partition the points".into()));
    }
    Ok(idx)
}

fn retrieval_mode(mode: Option<&str>) -> Result<BenchMode, Failure> {
    mode.unwrap_or("ivf")
        .parse()
        .map_err(|_| Failure::Usage(format!("--mode must be ivf or brute, got {:?}", mode.unwrap_or_default())))
}

pub fn synth(cfg: &RunConfig, a: &SynthArgs, out: Option<&Path>) -> CmdResult {
    let dir = out.ok_or_else(|| Failure::Usage("synth needs --out <dir>".into()))?;
    let spec = SynthSpec {
        n_flights: a.flights,
        duration_s: a.duration,
        turn_fraction: a.turn_fraction,
        holding_fraction: a.holding_fraction,
        noise_m: a.noise,
        n_points: a.points,
        poi_spread_m: a.spread,
        two_regime: a.two_regime,
        with_velocity: !a.no_velocity,
        ..Default::default()
    };
    let data = generate(&spec, cfg.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(dir)?;
    io::save_trajectories(&dir.join("trajectories.jsonl"), &data.trajectories)?;
    io::save_pois(&dir.join("points.csv"), &data.point_records())?;
    io::save_pois(&dir.join("onsets.csv"), &data.onset_records())?;
    eprintln!(
        "wrote {} flights, {} turn onsets and {} scored points to {}",
        data.trajectories.len(),
        data.onset_records().len(),
        data.points.len(),
        dir.display()
    );
    Ok(())
}

fn baseline_for(cfg: &RunConfig, trajs: &[Trajectory]) -> Vec<PoiRecord> {
    let mut pois = Vec::new();
    for (t, r) in trajs.iter().zip(run_baseline_batch(trajs, &cfg.baseline(), Exec::default())) {
        match r {
            Ok((_, p)) => pois.extend(p),
            Err(e) => eprintln!("warning: no kinematic POIs for {}: {e}", t.flight_id),
        }
    }
    io::sort_pois(&mut pois);
    pois
}

pub fn baseline_pois(cfg: &RunConfig, a: &BaselineArgs, out: Option<&Path>) -> CmdResult {
    let trajs = ingest(&a.trajectories)?;
    let pois = baseline_for(cfg, &trajs);
    eprintln!("{} kinematic POIs", pois.len());
    io::write_pois(output(out)?, &pois)?;
    Ok(())
}

pub fn build_index(cfg: &RunConfig, a: &BuildIndexArgs, out: Option<&Path>) -> CmdResult {
    let path = out.ok_or_else(|| Failure::Usage("build-index needs --out <file>".into()))?;
    let (_, pts) = load_points(&a.points)?;
    let idx = index_for(cfg, &pts, None)?;
    save_snapshot(&idx, path)?;
    eprintln!("indexed {} points in {} lists", idx.len(), idx.nlist());
    Ok(())
}

fn field_at<S: NeighborSource>(
    queries: &[EcefCoord],
    pts: &ScoredPointSet,
    src: &S,
    params: &AdfParams,
) -> Result<Vec<f64>, Failure> {
    let vals = adf_core::par::map(Exec::default(), queries, |q| evaluate_with(q, pts, src, params).map(|v| v.0));
    Ok(vals.into_iter().collect::<Result<_, _>>()?)
}

pub fn eval_field(cfg: &RunConfig, a: &EvalFieldArgs, out: Option<&Path>) -> CmdResult {
    let (pois, pts) = load_points(&a.points)?;
    let params = cfg.adf_params();
    let idx = index_for(cfg, &pts, a.index.as_deref())?;
    let ivf = idx.searcher(params.nprobe);
    let (rows, values) = match &a.queries {
        Some(q) => {
            let mut rows = io::load_pois(q).map_err(|e| data_err(e, q))?;
            io::sort_pois(&mut rows);
            let qs = to_ecef(&rows);
            let v = field_at(&qs, &pts, &ivf, &params)?;
            (rows, v)
        }
        None => {
            let v = evaluate_all_with(&pts, &ivf, &params, !a.exclude_self, Exec::default())?;
            (pois, v.into_iter().map(|f| f.0).collect())
        }
    };
    io::write_field_values(output(out)?, &rows, &values)?;
    Ok(())
}

fn extract_with<S: NeighborSource>(
    trajs: &[Trajectory],
    pts: &ScoredPointSet,
    src: &S,
    params: &AdfParams,
    percentile: f64,
) -> Result<Vec<FieldTrace>, Failure> {
    Ok(extract_batch(trajs, pts, src, params, percentile, Exec::default())
        .into_iter()
        .collect::<Result<_, _>>()?)
}

pub fn extract_pois(cfg: &RunConfig, a: &ExtractArgs, mode: Option<&str>, out: Option<&Path>) -> CmdResult {
    let mode = retrieval_mode(mode)?;
    let trajs = ingest(&a.trajectories)?;
    let (_, pts) = load_points(&a.points)?;
    let params = cfg.adf_params();
    let traces = match mode {
        BenchMode::Ivf => {
            let idx = index_for(cfg, &pts, a.index.as_deref())?;
            extract_with(&trajs, &pts, &idx.searcher(params.nprobe), &params, cfg.extract_percentile)?
        }
        BenchMode::Brute => extract_with(&trajs, &pts, &BruteForce::new(pts.positions()), &params, cfg.extract_percentile)?,
    };
    let rows = io::extract_rows(&traces);
    eprintln!(
        "{} samples, {} flagged",
        rows.len(),
        rows.iter().filter(|r| r.is_poi).count()
    );
    io::write_extract(output(out)?, &rows)?;
    Ok(())
}

fn load_set(path: &Path) -> Result<Vec<EcefCoord>, Failure> {
    let ell = Ellipsoid::WGS84;
    Ok(io::load_point_set(path)
        .map_err(|e| data_err(e, path))?
        .iter()
        .map(|g| geodetic_to_ecef(g, &ell))
        .collect())
}

pub fn evaluate(cfg: &RunConfig, a: &EvaluateArgs, out: Option<&Path>) -> CmdResult {
    let set_a = load_set(&a.baseline)?;
    let set_b = load_set(&a.candidate)?;
    let reports = match cfg.match_threshold_m {
        Some(t) => vec![spatial_match(&set_a, &set_b, t)?],
        None => threshold_sweep(&set_a, &set_b, &SWEEP_THRESHOLDS_M)?,
    };
    io::write_match_tsv(output(out)?, &reports)?;
    Ok(())
}

const ABLATE_HEADER: [&str; 11] = [
    "sweep",
    "bandwidth",
    "nprobe",
    "k",
    "threshold_m",
    "matched",
    "unique_a",
    "unique_b",
    "precision",
    "recall",
    "f1",
];

fn ablate_row(sweep: &str, params: &AdfParams, r: &MatchReport) -> Vec<String> {
    let bw = match params.bandwidth {
        Bandwidth::Adaptive => "adaptive".to_string(),
        Bandwidth::Fixed(s) => s.to_string(),
    };
    vec![
        sweep.into(),
        bw,
        params.nprobe.to_string(),
        params.k.to_string(),
        r.threshold_m.to_string(),
        r.matched.to_string(),
        r.unique_a.to_string(),
        r.unique_b.to_string(),
        format!("{:.2}", r.precision * 100.0),
        format!("{:.2}", r.recall * 100.0),
        format!("{:.2}", r.f1 * 100.0),
    ]
}

pub fn ablate(cfg: &RunConfig, a: &AblateArgs, out: Option<&Path>) -> CmdResult {
    let trajs = ingest(&a.trajectories)?;
    let (_, pts) = load_points(&a.points)?;
    let reference = match &a.baseline {
        Some(p) => load_set(p)?,
        None => to_ecef(&baseline_for(cfg, &trajs)),
    };
    let idx = index_for(cfg, &pts, a.index.as_deref())?;
    let base = cfg.adf_params();
    let threshold = cfg.threshold();

    let mut settings: Vec<(&str, AdfParams)> = vec![("bandwidth", AdfParams { bandwidth: Bandwidth::Adaptive, ..base })];
    for s in ABLATE_BANDWIDTHS_M {
        settings.push(("bandwidth", AdfParams { bandwidth: Bandwidth::Fixed(s), ..base }));
    }
    for nprobe in ABLATE_NPROBE {
        settings.push(("nprobe", AdfParams { nprobe, ..base }));
    }
    for k in ABLATE_K {
        settings.push(("k", AdfParams { k, ..base }));
    }

    let mut rows = Vec::new();
    for (sweep, params) in &settings {
        let traces = extract_with(&trajs, &pts, &idx.searcher(params.nprobe), params, cfg.extract_percentile)?;
        let flagged: Vec<EcefCoord> = traces.iter().flat_map(FieldTrace::flagged_ecef).collect();
        rows.push(ablate_row(sweep, params, &spatial_match(&reference, &flagged, threshold)?));
    }
    let src = idx.searcher(base.nprobe);
    let knn: Vec<EcefCoord> = adf_core::par::map(Exec::default(), &trajs, |t| {
        knn_density_trace(t, &src, base.k, cfg.extract_percentile).map(|d| d.flagged_ecef())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?
    .concat();
    let mut knn_row = ablate_row("knn", &base, &spatial_match(&reference, &knn, threshold)?);
    knn_row[1] = "-".into();
    rows.push(knn_row);
    io::write_tsv(output(out)?, &ABLATE_HEADER, &rows)?;
    Ok(())
}

fn bench_row(r: &BenchReport, idx: &IvfIndex) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
        r.mode,
        idx.len(),
        idx.nlist(),
        r.params.nprobe,
        r.params.k,
        r.n_queries,
        r.ms_per_query
    )
}

pub fn bench(cfg: &RunConfig, a: &BenchArgs, mode: Option<&str>, out: Option<&Path>) -> CmdResult {
    let modes = match mode {
        None | Some("both") => vec![BenchMode::Ivf, BenchMode::Brute],
        Some(m) => vec![m
            .parse::<BenchMode>()
            .map_err(|_| Failure::Usage(format!("--mode must be ivf, brute or both, got {m:?}")))?],
    };
    if a.queries < adf_core::eval::MIN_BENCH_QUERIES {
        return Err(Failure::Usage(format!(
            "--queries must be at least {}",
            adf_core::eval::MIN_BENCH_QUERIES
        )));
    }
    let (_, pts) = load_points(&a.points)?;
    let idx = index_for(cfg, &pts, a.index.as_deref())?;
    let params = cfg.adf_params();
    let mut w = output(out)?;
    writeln!(w, "mode\tn_points\tnlist\tnprobe\tk\tn_queries\tms_per_query")?;
    let mut reports = Vec::new();
    for m in modes {
        let r = latency_bench(&pts, &idx, &params, m, a.queries, cfg.seed)?;
        writeln!(w, "{}", bench_row(&r, &idx))?;
        reports.push(r);
    }
    if let [ivf, brute] = reports.as_slice() {
        if ivf.values.len() != brute.values.len() {
            return Err(Failure::Internal("bench modes saw different query streams".into()));
        }
        writeln!(w, "# speedup\t{:.2}", brute.ms_per_query / ivf.ms_per_query)?;
    }
    w.flush()?;
    Ok(())
}
