//! Experiment orchestration: configuration, replication fan-out,
//! aggregation, and persistence.
//!
//! A configuration names an experiment kind, one or more `(d, n)`
//! instances, a retention grid, and a replication count. Replication `i`
//! of grid point `g` always runs with the stream seed
//! `derive_seed(master, [g, i])`, so records depend only on the
//! configuration contents and the master seed — never on the worker
//! count, scheduling, or platform — and any subset of the grid reruns
//! identically.

pub mod record;
pub mod stats;

use std::time::Instant;

use rayon::prelude::*;

pub use record::{
    read_records, write_records, write_summaries, ExperimentKind, OutputFormat, ResultRecord,
    SummaryRow, RECORD_CSV_HEADER, SUMMARY_CSV_HEADER,
};
pub use stats::{
    empirical_count_pmf, empirical_factorial_moment, tv_distance_to_poisson, wilson_interval,
    TV_TAIL_CUTOFF, WILSON_Z,
};

use crate::error::{Error, Result};
use crate::exploration::{
    explore_from_edge, side_quorum_from_levels, LevelSplit, Side, StopReason,
};
use crate::graph::{EdgeCodec, GraphParams, VertexId};
use crate::percolation::{
    analyze_stream, build_sample, connected_levels, connectivity_report, ConnectivityReport,
    Parametrization, PercolationParam, SampleGraph,
};
use crate::rng::derive_seed;
use crate::theory::{self, alpha_parameter, predicted_connectivity, ENUMERATION_GUARD};

/// Default ceiling on `n^d` before a grid point is refused with an error
/// record (2^27 vertices).
pub const DEFAULT_MAX_VERTICES: u64 = 1 << 27;

/// Default slack subtracted from the hyperplane connectivity limit when
/// deriving the quorum fraction.
pub const DEFAULT_ALPHA_EPS: f64 = 0.1;

/// One graph shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub d: u32,
    pub n: u64,
}

/// The retention grid, in whichever parametrization the user gave.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Window(Vec<f64>),
    Lambda(Vec<f64>),
    Retention(Vec<f64>),
}

impl GridSpec {
    fn values(&self) -> &[f64] {
        match self {
            GridSpec::Window(v) | GridSpec::Lambda(v) | GridSpec::Retention(v) => v,
        }
    }

    fn parametrization(&self, value: f64) -> Parametrization {
        match self {
            GridSpec::Window(_) => Parametrization::Window(value),
            GridSpec::Lambda(_) => Parametrization::ExpectedDegree(value),
            GridSpec::Retention(_) => Parametrization::Retention(value),
        }
    }
}

/// Which Poisson rate the isolated-count distribution is compared to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuRule {
    /// The window limit `exp(-t)`.
    WindowLimit,
    /// The exact finite-size mean `n^d (1 - p)^m`, for finite-size
    /// studies.
    ExactMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub instances: Vec<Instance>,
    pub grid: GridSpec,
    pub replications: u64,
    pub master_seed: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Quorum fraction; `None` derives it per point from the hyperplane
    /// limit minus `alpha_eps`.
    pub alpha: Option<f64>,
    pub alpha_eps: f64,
    pub mu_rule: MuRule,
    pub max_vertices: u64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, d: u32, n: u64, grid: GridSpec) -> Self {
        ExperimentConfig {
            kind,
            instances: vec![Instance { d, n }],
            grid,
            replications: 1,
            master_seed: 0,
            workers: 0,
            alpha: None,
            alpha_eps: DEFAULT_ALPHA_EPS,
            mu_rule: MuRule::WindowLimit,
            max_vertices: DEFAULT_MAX_VERTICES,
        }
    }
}

/// A fully resolved grid point.
#[derive(Debug, Clone)]
struct GridPoint {
    grid_index: u64,
    pp: PercolationParam,
    alpha: Option<f64>,
}

fn resolve_points(config: &ExperimentConfig) -> Result<Vec<GridPoint>> {
    if config.replications < 1 {
        return Err(Error::config("replications must be >= 1"));
    }
    if config.instances.is_empty() {
        return Err(Error::config("no (d, n) instances given"));
    }
    if config.grid.values().is_empty() {
        return Err(Error::config("empty grid"));
    }
    let needs_quorum = matches!(
        config.kind,
        ExperimentKind::HyperplaneCheck | ExperimentKind::ExplorationCheck
    );
    let mut points = Vec::with_capacity(config.instances.len() * config.grid.values().len());
    for (ii, inst) in config.instances.iter().enumerate() {
        let params = GraphParams::new(inst.d, inst.n).map_err(|e| Error::config(e.to_string()))?;
        if needs_quorum && inst.d < 2 {
            return Err(Error::config(format!(
                "{} experiments need d >= 2, got d = {}",
                config.kind.as_str(),
                inst.d
            )));
        }
        if config.kind == ExperimentKind::OracleCheck && params.num_edges() > ENUMERATION_GUARD {
            return Err(Error::config(format!(
                "oracle experiments need at most {ENUMERATION_GUARD} edges, \
                 H({}, {}) has {}",
                inst.d,
                inst.n,
                params.num_edges()
            )));
        }
        for (vi, &value) in config.grid.values().iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::config(format!("grid value {value} is not finite")));
            }
            let pp = PercolationParam::new(params, config.grid.parametrization(value))
                .map_err(|e| Error::config(e.to_string()))?;
            let alpha = if needs_quorum {
                Some(match config.alpha {
                    Some(a) if a > 0.0 => a,
                    Some(a) => return Err(Error::config(format!("alpha = {a} must be positive"))),
                    None => alpha_parameter(pp.window(), inst.d, config.alpha_eps)
                        .map_err(|e| Error::config(e.to_string()))?,
                })
            } else {
                None
            };
            points.push(GridPoint {
                grid_index: (ii * config.grid.values().len() + vi) as u64,
                pp,
                alpha,
            });
        }
    }
    Ok(points)
}

/// Run every replication of every grid point and return the records in
/// canonical order (grid index, then replication).
///
/// A grid point whose vertex count exceeds the configured guard yields
/// one error record per replication and the run continues, so the record
/// count is always `replications * grid size`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let points = resolve_points(config)?;
    let reps = config.replications;
    let total = points.len() as u64 * reps;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let records: Vec<ResultRecord> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|task| {
                let point = &points[(task / reps) as usize];
                let replication = task % reps;
                run_one(config, point, replication)
            })
            .collect()
    });
    Ok(records)
}

fn run_one(config: &ExperimentConfig, point: &GridPoint, replication: u64) -> ResultRecord {
    let start = Instant::now();
    let pp = &point.pp;
    let params = pp.params();
    let seed = derive_seed(config.master_seed, &[point.grid_index, replication]);
    let mut record = ResultRecord {
        kind: config.kind,
        d: params.dimension(),
        n: params.side(),
        grid_index: point.grid_index,
        replication,
        t: pp.window(),
        lambda: pp.lambda(),
        p: pp.retention(),
        master_seed: config.master_seed,
        seed,
        alpha: point.alpha,
        is_connected: None,
        num_components: None,
        size_of_largest: None,
        num_isolated: None,
        giant_plus_isolated: None,
        hyperplane_connected_counts: None,
        quorum: None,
        explored: None,
        starved: None,
        wall_ms: 0.0,
        error: None,
    };

    if params.num_vertices() > config.max_vertices {
        record.error = Some(format!(
            "resource guard: {} vertices exceed the limit of {}",
            params.num_vertices(),
            config.max_vertices
        ));
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        return record;
    }

    let outcome = match config.kind {
        ExperimentKind::ConnectivitySweep
        | ExperimentKind::PoissonCheck
        | ExperimentKind::OracleCheck => analyze_stream(pp, seed, false).map(|a| {
            fill_report(&mut record, &a.report);
        }),
        ExperimentKind::HyperplaneCheck => analyze_stream(pp, seed, true).map(|a| {
            fill_report(&mut record, &a.report);
            let levels = a.hyperplane_levels.expect("requested");
            fill_quorum(
                &mut record,
                &levels,
                params.side(),
                point.alpha.expect("resolved"),
            );
        }),
        ExperimentKind::ExplorationCheck => {
            run_exploration(pp, seed, point.alpha.expect("resolved"), &mut record)
        }
    };
    if let Err(e) = outcome {
        record.error = Some(e.to_string());
    }
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

fn fill_report(record: &mut ResultRecord, report: &ConnectivityReport) {
    record.is_connected = Some(report.is_connected);
    record.num_components = Some(report.num_components);
    record.size_of_largest = Some(report.size_of_largest);
    record.num_isolated = Some(report.num_isolated);
    record.giant_plus_isolated = Some(report.giant_plus_isolated);
}

fn fill_quorum(record: &mut ResultRecord, levels: &[Vec<bool>], n: u64, alpha: f64) {
    let split = LevelSplit::new(n).expect("n >= 2");
    record.hyperplane_connected_counts = Some(
        levels
            .iter()
            .map(|l| l.iter().filter(|&&c| c).count() as u64)
            .collect(),
    );
    let quorum = levels.iter().all(|l| {
        side_quorum_from_levels(l, &split, Side::Low, alpha)
            && side_quorum_from_levels(l, &split, Side::High, alpha)
    });
    record.quorum = Some(quorum);
}

/// Exploration experiment: materialize the sample, check the quorum, and
/// when it holds run the exploration from every qualifying occupied edge
/// (the smallest direction other than the edge's own whose coordinate
/// sits in the low half).
fn run_exploration(
    pp: &PercolationParam,
    seed: u64,
    alpha: f64,
    record: &mut ResultRecord,
) -> Result<()> {
    let params = pp.params();
    let sample = build_sample(pp, seed)?;
    let report = connectivity_report(&sample);
    fill_report(record, &report);

    let d = params.dimension();
    let n = params.side();
    let mut levels = Vec::with_capacity(d as usize);
    for direction in 1..=d {
        levels.push(connected_levels(&sample, direction)?);
    }
    fill_quorum(record, &levels, n, alpha);

    record.explored = Some(0);
    record.starved = Some(0);
    if record.quorum != Some(true) {
        return Ok(());
    }

    let split = LevelSplit::new(n)?;
    let connected_high: Vec<Vec<u64>> = levels
        .iter()
        .map(|l| split.high_levels().filter(|&k| l[k as usize - 1]).collect())
        .collect();
    let codec = EdgeCodec::new(&params);
    let mut explored = 0u64;
    let mut starved = 0u64;
    for v in 0..params.num_vertices() {
        for &w in sample.neighbors_of(v) {
            let w = w as u64;
            if w <= v {
                continue;
            }
            let mut edge_dir = 0;
            for j in 0..d {
                if codec.digit(v, j) != codec.digit(w, j) {
                    edge_dir = j;
                    break;
                }
            }
            let chosen = (0..d).find(|&j| j != edge_dir && codec.digit(v, j) < split.boundary());
            let Some(j) = chosen else { continue };
            explored += 1;
            let out = explore_from_edge(
                &sample,
                VertexId(v),
                VertexId(w),
                j + 1,
                &connected_high[j as usize],
            )?;
            if out.reason == StopReason::Starved {
                starved += 1;
            }
        }
    }
    record.explored = Some(explored);
    record.starved = Some(starved);
    Ok(())
}

/// Aggregate records into one row per grid point.
///
/// Error records are counted but excluded from the statistics; a grid
/// point with no valid records at all is a domain error, as is an empty
/// record set.
pub fn summarize(records: &[ResultRecord], mu_rule: MuRule) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::domain("no records to summarize"));
    }
    let mut order: Vec<u64> = Vec::new();
    for r in records {
        if !order.contains(&r.grid_index) {
            order.push(r.grid_index);
        }
    }
    order.sort_unstable();

    let mut rows = Vec::with_capacity(order.len());
    for g in order {
        let group: Vec<&ResultRecord> = records.iter().filter(|r| r.grid_index == g).collect();
        let valid: Vec<&ResultRecord> = group
            .iter()
            .copied()
            .filter(|r| r.error.is_none())
            .collect();
        if valid.is_empty() {
            return Err(Error::domain(format!(
                "grid point {g} has no valid records"
            )));
        }
        let head = valid[0];
        let trials = valid.len() as u64;
        let connected = valid
            .iter()
            .filter(|r| r.is_connected == Some(true))
            .count() as u64;
        let (wilson_low, wilson_high) = wilson_interval(connected, trials, WILSON_Z)?;
        let isolated: Vec<u64> = valid
            .iter()
            .map(|r| {
                r.num_isolated
                    .ok_or_else(|| Error::domain("record lacks the isolated count"))
            })
            .collect::<Result<_>>()?;
        let mean_isolated = isolated.iter().sum::<u64>() as f64 / trials as f64;
        let mu = match mu_rule {
            MuRule::WindowLimit => libm::exp(-head.t),
            MuRule::ExactMean => {
                let params = GraphParams::new(head.d, head.n)?;
                theory::expected_isolated(params, head.lambda)?
            }
        };
        let tv_distance = tv_distance_to_poisson(&isolated, mu)?;
        let (y_pmf, y_tail) = empirical_count_pmf(&isolated)?;
        let with_quorum: Vec<&&ResultRecord> =
            valid.iter().filter(|r| r.quorum.is_some()).collect();
        let quorum_frequency = if with_quorum.is_empty() {
            None
        } else {
            Some(
                with_quorum
                    .iter()
                    .filter(|r| r.quorum == Some(true))
                    .count() as f64
                    / with_quorum.len() as f64,
            )
        };
        let total_explored: u64 = valid.iter().filter_map(|r| r.explored).sum();
        let total_starved: u64 = valid.iter().filter_map(|r| r.starved).sum();
        let starved_fraction = if total_explored > 0 {
            Some(total_starved as f64 / total_explored as f64)
        } else {
            None
        };
        rows.push(SummaryRow {
            kind: head.kind,
            d: head.d,
            n: head.n,
            grid_index: g,
            t: head.t,
            lambda: head.lambda,
            p: head.p,
            num_records: group.len() as u64,
            num_errors: (group.len() - valid.len()) as u64,
            connected,
            p_connected: connected as f64 / trials as f64,
            wilson_low,
            wilson_high,
            predicted_connectivity: predicted_connectivity(head.t),
            mean_isolated,
            mu,
            tv_distance,
            quorum_frequency,
            starved_fraction,
            y_pmf,
            y_tail,
        });
    }
    Ok(rows)
}

/// Exploration statistics helper for diagnostics outside the runner: the
/// starved fraction over qualifying edges of one sample.
pub fn starved_fraction(sample: &SampleGraph, alpha: f64) -> Result<(u64, u64, bool)> {
    let pp = PercolationParam::from_retention(sample.params(), sample.retention())?;
    let mut record = ResultRecord {
        kind: ExperimentKind::ExplorationCheck,
        d: sample.params().dimension(),
        n: sample.params().side(),
        grid_index: 0,
        replication: 0,
        t: pp.window(),
        lambda: pp.lambda(),
        p: pp.retention(),
        master_seed: 0,
        seed: sample.seed(),
        alpha: Some(alpha),
        is_connected: None,
        num_components: None,
        size_of_largest: None,
        num_isolated: None,
        giant_plus_isolated: None,
        hyperplane_connected_counts: None,
        quorum: None,
        explored: None,
        starved: None,
        wall_ms: 0.0,
        error: None,
    };
    run_exploration(&pp, sample.seed(), alpha, &mut record)?;
    Ok((
        record.explored.unwrap_or(0),
        record.starved.unwrap_or(0),
        record.quorum == Some(true),
    ))
}
