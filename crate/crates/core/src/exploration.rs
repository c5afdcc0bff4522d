//! Exploration diagnostics over sampled graphs: level splits, edge
//! classification, connectivity quorum events, and the two-active-vertex
//! exploration that either reaches an internally connected hyperplane or
//! starves.
//!
//! The construction splits the levels of a chosen direction into a low
//! half `{1, ..., floor(n/2)}` and a high half, which partitions the
//! edges into low-low, high-high and crossing classes with independent
//! occupation. A quorum event asks for more than `alpha n / 2` internally
//! connected hyperplanes on a side; conditioned on a quorum in the high
//! half, the exploration started from an occupied low-half edge probes
//! crossing edges (step 2) and fresh low-half growth (step 3), and the
//! closed-form bounds here dominate its one-cycle failure probabilities.
//!
//! Everything runs read-only over an immutable [`SampleGraph`]; d >= 2 is
//! required throughout, since hyperplanes of H(1, n) are single vertices.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::graph::{EdgeCodec, EdgeIndex, GraphParams, VertexId};
use crate::percolation::{connected_levels, SampleGraph};

/// A side of the level split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Levels `1 ..= floor(n/2)`.
    Low,
    /// Levels `floor(n/2)+1 ..= n`.
    High,
}

/// The fixed split of the n levels into a low and a high half.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSplit {
    n: u64,
    boundary: u64,
}

impl LevelSplit {
    pub fn new(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("level split needs n >= 2"));
        }
        Ok(LevelSplit { n, boundary: n / 2 })
    }

    /// Largest level of the low half, `floor(n/2)`.
    pub fn boundary(&self) -> u64 {
        self.boundary
    }

    pub fn low_levels(&self) -> std::ops::RangeInclusive<u64> {
        1..=self.boundary
    }

    pub fn high_levels(&self) -> std::ops::RangeInclusive<u64> {
        self.boundary + 1..=self.n
    }

    pub fn side_of(&self, level: u64) -> Side {
        debug_assert!(level >= 1 && level <= self.n);
        if level <= self.boundary {
            Side::Low
        } else {
            Side::High
        }
    }
}

/// Split the levels `1..=n`; the low half gets `floor(n/2)` levels.
pub fn partition_levels(n: u64) -> Result<LevelSplit> {
    LevelSplit::new(n)
}

/// Class of an edge relative to the level split of one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Both endpoints have their split coordinate in the low half.
    BothLow,
    /// Both endpoints have their split coordinate in the high half.
    BothHigh,
    /// The endpoints straddle the split (possible only for edges in the
    /// split direction itself).
    Crossing,
}

/// Classify an edge relative to the split of `direction`'s levels. For a
/// fixed direction the three classes partition the edge set, and the
/// occupation of each class is independent of the other two.
pub fn classify_edge(params: GraphParams, e: EdgeIndex, direction: u32) -> Result<EdgeClass> {
    let (a, b) = params.edge_endpoints(e)?;
    let split = LevelSplit::new(params.side())?;
    let la = params.hyperplane_of(a, direction)?.level;
    let lb = params.hyperplane_of(b, direction)?.level;
    Ok(match (split.side_of(la), split.side_of(lb)) {
        (Side::Low, Side::Low) => EdgeClass::BothLow,
        (Side::High, Side::High) => EdgeClass::BothHigh,
        _ => EdgeClass::Crossing,
    })
}

/// Whether more than `alpha n / 2` of the side's hyperplanes in
/// `direction` are internally connected.
pub fn side_quorum(sample: &SampleGraph, direction: u32, side: Side, alpha: f64) -> Result<bool> {
    require_diagnostic_dims(sample.params())?;
    if alpha <= 0.0 {
        return Err(Error::domain("quorum fraction alpha must be positive"));
    }
    let levels = connected_levels(sample, direction)?;
    Ok(side_quorum_from_levels(
        &levels,
        &LevelSplit::new(sample.params().side())?,
        side,
        alpha,
    ))
}

/// Quorum check against already computed per-level connectivity.
pub fn side_quorum_from_levels(
    levels: &[bool],
    split: &LevelSplit,
    side: Side,
    alpha: f64,
) -> bool {
    let range = match side {
        Side::Low => split.low_levels(),
        Side::High => split.high_levels(),
    };
    let count = range.filter(|&k| levels[k as usize - 1]).count() as f64;
    count > alpha * levels.len() as f64 / 2.0
}

/// The full quorum event: every direction has a quorum on both sides.
pub fn full_quorum(sample: &SampleGraph, alpha: f64) -> Result<bool> {
    require_diagnostic_dims(sample.params())?;
    for direction in 1..=sample.params().dimension() {
        for side in [Side::Low, Side::High] {
            if !side_quorum(sample, direction, side, alpha)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn require_diagnostic_dims(params: GraphParams) -> Result<()> {
    if params.dimension() < 2 {
        return Err(Error::domain(
            "exploration diagnostics need d >= 2; H(1, n) has no hyperplane structure",
        ));
    }
    Ok(())
}

/// Why an exploration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Step 2 found an occupied edge into a connected high-side
    /// hyperplane; the start edge is wired to the giant component.
    FoundHyperplane,
    /// Step 3 discovered fewer than two fresh vertices.
    Starved,
}

/// Result of one exploration run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExplorationOutcome {
    /// Cycle (1-based) at which the run stopped.
    pub cycles: u64,
    pub reason: StopReason,
    /// Vertices marked searched, always `2 * cycles`.
    pub searched: u64,
}

/// Edges the exploration read, for independence instrumentation: step 2
/// probes crossing edges only, step 3 reads low-low edges only.
#[derive(Debug, Clone, Default)]
pub struct ExplorationTrace {
    pub step2_probes: Vec<EdgeIndex>,
    pub step3_reads: Vec<EdgeIndex>,
}

/// Run the exploration from the occupied edge `(v, v2)`.
///
/// Preconditions: the edge is occupied and differs in a direction other
/// than `direction`; the shared level of `v, v2` in `direction` is in
/// the low half; `connected_high_levels` lists the high-side levels whose
/// hyperplanes are internally connected (the caller computes them, which
/// preserves the conditioning on the high-side quorum).
///
/// Each cycle marks the two active vertices searched, probes every edge
/// from them into the connected high-side hyperplanes (stop with
/// [`StopReason::FoundHyperplane`] if any is occupied), then collects the
/// set W of fresh low-half vertices reached by occupied edges from the
/// actives (stop with [`StopReason::Starved`] if `|W| < 2`), and finally
/// activates the two smallest vertex indices of W.
pub fn explore_from_edge(
    sample: &SampleGraph,
    v: VertexId,
    v2: VertexId,
    direction: u32,
    connected_high_levels: &[u64],
) -> Result<ExplorationOutcome> {
    explore_impl(sample, v, v2, direction, connected_high_levels, None).map(|(outcome, _)| outcome)
}

/// [`explore_from_edge`] plus the trace of which edges each step read.
pub fn explore_from_edge_traced(
    sample: &SampleGraph,
    v: VertexId,
    v2: VertexId,
    direction: u32,
    connected_high_levels: &[u64],
) -> Result<(ExplorationOutcome, ExplorationTrace)> {
    let mut trace = ExplorationTrace::default();
    let (outcome, _) = explore_impl(
        sample,
        v,
        v2,
        direction,
        connected_high_levels,
        Some(&mut trace),
    )?;
    Ok((outcome, trace))
}

fn explore_impl(
    sample: &SampleGraph,
    v: VertexId,
    v2: VertexId,
    direction: u32,
    connected_high_levels: &[u64],
    mut trace: Option<&mut ExplorationTrace>,
) -> Result<(ExplorationOutcome, ())> {
    let params = sample.params();
    require_diagnostic_dims(params)?;
    params.hyperplane_of(VertexId(0), direction)?;
    let split = LevelSplit::new(params.side())?;
    let codec = EdgeCodec::new(&params);
    let j = direction - 1;
    let stride = codec.stride(j);
    let n = params.side();

    // Precondition checks.
    if !sample.has_edge(v.0, v2.0) {
        return Err(Error::domain("start edge is not occupied"));
    }
    let start_index = codec
        .index_of(v.0, v2.0)
        .ok_or_else(|| Error::domain("start vertices are not adjacent"))?;
    if codec.direction_of(start_index) == j {
        return Err(Error::domain(
            "start edge must differ in a direction other than the split direction",
        ));
    }
    let base_level = codec.digit(v.0, j) + 1;
    debug_assert_eq!(base_level, codec.digit(v2.0, j) + 1);
    if split.side_of(base_level) != Side::Low {
        return Err(Error::domain(
            "start vertices must have their split coordinate in the low half",
        ));
    }
    for &r in connected_high_levels {
        if r < 1 || r > n || split.side_of(r) != Side::High {
            return Err(Error::domain(format!(
                "connected hyperplane level {r} is not in the high half"
            )));
        }
    }

    let mut searched: HashSet<u64> = HashSet::new();
    let mut active = (v.0, v2.0);
    let mut cycles = 0u64;
    loop {
        cycles += 1;
        searched.insert(active.0);
        searched.insert(active.1);

        // Step 2: probe the one edge from each active vertex into each
        // connected high-side hyperplane (changing the split coordinate
        // to that level is the only way to reach it in one step).
        let mut hit = false;
        'probe: for x in [active.0, active.1] {
            let dx = codec.digit(x, j);
            let base = x - dx * stride;
            for &r in connected_high_levels {
                let w = base + (r - 1) * stride;
                if let Some(t) = trace.as_deref_mut() {
                    t.step2_probes
                        .push(EdgeIndex(codec.index_of(x, w).expect("adjacent")));
                }
                if sample.has_edge(x, w) {
                    hit = true;
                    break 'probe;
                }
            }
        }
        if hit {
            return Ok((
                ExplorationOutcome {
                    cycles,
                    reason: StopReason::FoundHyperplane,
                    searched: searched.len() as u64,
                },
                (),
            ));
        }

        // Step 3: fresh low-half vertices reached by occupied edges from
        // the actives.
        let mut fresh: BTreeSet<u64> = BTreeSet::new();
        for x in [active.0, active.1] {
            for &w in sample.neighbors_of(x) {
                let w = w as u64;
                if codec.digit(w, j) < split.boundary() && !searched.contains(&w) {
                    if let Some(t) = trace.as_deref_mut() {
                        t.step3_reads
                            .push(EdgeIndex(codec.index_of(x, w).expect("adjacent")));
                    }
                    fresh.insert(w);
                }
            }
        }
        if fresh.len() < 2 {
            return Ok((
                ExplorationOutcome {
                    cycles,
                    reason: StopReason::Starved,
                    searched: searched.len() as u64,
                },
                (),
            ));
        }

        // Step 4: activate the two smallest fresh vertices.
        let mut it = fresh.into_iter();
        active = (it.next().unwrap(), it.next().unwrap());
    }
}

/// Upper bound on the probability that one cycle of step 2 misses every
/// connected high-side hyperplane: `(1 - lambda/m)^(alpha n)`. Does not
/// depend on the cycle, since hyperplanes are never depleted.
pub fn step2_escape_bound(alpha: f64, lambda: f64, m: u64, n: u64) -> Result<f64> {
    let m_f = m as f64;
    if !(0.0..=m_f).contains(&lambda) {
        return Err(Error::domain(format!(
            "lambda = {lambda} out of [0, {m_f}]"
        )));
    }
    if alpha < 0.0 || alpha * n as f64 > m_f {
        return Err(Error::domain(format!(
            "alpha n = {} exceeds the {m_f} probed edges available",
            alpha * n as f64
        )));
    }
    Ok(libm::pow(1.0 - lambda / m_f, alpha * n as f64))
}

/// Upper bound on `P(fewer than 2 fresh vertices in step 3 of cycle k)`:
/// the step-3 discovery count dominates a binomial with
/// `(2d-1)(n-1) - 4k` trials at rate `lambda/m`, whose mass at {0, 1} is
/// at most
/// `q^E + (2d-1) n (lambda/m) q^(E-1)` with `E = (2d-1)(n-1) - 4k`.
/// Increasing in k at fixed parameters; fails when the regime is
/// exhausted (`E <= 0`).
pub fn step3_starvation_bound(k: u64, lambda: f64, params: GraphParams) -> Result<f64> {
    let d = params.dimension() as u64;
    let n = params.side();
    let m = params.degree() as f64;
    if !(0.0..=m).contains(&lambda) {
        return Err(Error::domain(format!("lambda = {lambda} out of [0, {m}]")));
    }
    let budget = (2 * d - 1) * (n - 1);
    if 4 * k >= budget {
        return Err(Error::domain(format!(
            "cycle {k} exhausts the (2d-1)(n-1) = {budget} fresh-vertex budget"
        )));
    }
    let exponent = (budget - 4 * k) as f64;
    let q = 1.0 - lambda / m;
    Ok(libm::pow(q, exponent)
        + (2 * d - 1) as f64 * n as f64 * (lambda / m) * libm::pow(q, exponent - 1.0))
}
