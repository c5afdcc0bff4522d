//! Bernoulli bond percolation on H(d, n): reproducible sampling without
//! touching vacant edges, and connectivity analysis of the outcomes.
//!
//! The sampler walks the canonical edge index space in increasing order
//! with geometric jumps, so the cost of one realization is proportional
//! to the number of occupied edges rather than to the ~`d n^(d+1) / 2`
//! potential ones. Identical `(params, p, seed)` reproduce bit-identical
//! samples on every platform; see [`crate::rng`] for the pinned
//! generator.

use crate::error::{Error, Result};
use crate::graph::{EdgeCodec, EdgeIndex, GraphParams, HyperplaneId, VertexId};
use crate::rng::{self, Xoshiro256PlusPlus};

/// Percolation strength in one of its three equivalent parametrizations:
/// expected occupied degree `lambda`, per-edge retention probability
/// `p = lambda / (d (n-1))`, or window coordinate `t = lambda - d ln n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parametrization {
    ExpectedDegree(f64),
    Retention(f64),
    Window(f64),
}

/// A retention level for a specific graph, convertible between the three
/// parametrizations. The originally given representation is kept, so
/// converting back and forth does not accumulate error on it.
#[derive(Debug, Clone, Copy)]
pub struct PercolationParam {
    params: GraphParams,
    given: Parametrization,
}

impl PercolationParam {
    pub fn from_lambda(params: GraphParams, lambda: f64) -> Result<Self> {
        Self::new(params, Parametrization::ExpectedDegree(lambda))
    }

    pub fn from_retention(params: GraphParams, p: f64) -> Result<Self> {
        Self::new(params, Parametrization::Retention(p))
    }

    pub fn from_window(params: GraphParams, t: f64) -> Result<Self> {
        Self::new(params, Parametrization::Window(t))
    }

    pub fn new(params: GraphParams, given: Parametrization) -> Result<Self> {
        let pp = PercolationParam { params, given };
        let lambda = pp.lambda();
        let m = params.degree() as f64;
        if !lambda.is_finite() || lambda < 0.0 || lambda > m {
            return Err(Error::domain(format!(
                "expected degree lambda = {lambda} out of range [0, {m}] \
                 (retention probability must lie in [0, 1])"
            )));
        }
        Ok(pp)
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn given(&self) -> Parametrization {
        self.given
    }

    /// Expected occupied degree.
    pub fn lambda(&self) -> f64 {
        let d_log_n = self.params.dimension() as f64 * libm::log(self.params.side() as f64);
        match self.given {
            Parametrization::ExpectedDegree(l) => l,
            Parametrization::Retention(p) => p * self.params.degree() as f64,
            Parametrization::Window(t) => d_log_n + t,
        }
    }

    /// Per-edge retention probability.
    pub fn retention(&self) -> f64 {
        match self.given {
            Parametrization::Retention(p) => p,
            _ => self.lambda() / self.params.degree() as f64,
        }
    }

    /// Window coordinate `t = lambda - d ln n`.
    pub fn window(&self) -> f64 {
        let d_log_n = self.params.dimension() as f64 * libm::log(self.params.side() as f64);
        match self.given {
            Parametrization::Window(t) => t,
            _ => self.lambda() - d_log_n,
        }
    }

    /// Re-express with `lambda` as the stored representation.
    pub fn as_lambda(&self) -> Self {
        PercolationParam {
            params: self.params,
            given: Parametrization::ExpectedDegree(self.lambda()),
        }
    }

    /// Re-express with the retention probability as the stored
    /// representation.
    pub fn as_retention(&self) -> Self {
        PercolationParam {
            params: self.params,
            given: Parametrization::Retention(self.retention()),
        }
    }

    /// Re-express with the window coordinate as the stored
    /// representation.
    pub fn as_window(&self) -> Self {
        PercolationParam {
            params: self.params,
            given: Parametrization::Window(self.window()),
        }
    }
}

// ---------------------------------------------------------------------
// Occupied-edge stream.
// ---------------------------------------------------------------------

/// Iterator over the occupied edge indices of one realization, in
/// increasing order.
///
/// Jump lengths between occupied edges follow the geometric distribution
/// via inverse transform, `floor(ln u / ln(1 - p))`, so only occupied
/// edges cost work. `p = 0` and `p = 1` are special-cased and consume no
/// randomness.
pub struct EdgeSampler {
    total: u64,
    next_candidate: u64,
    mode: SamplerMode,
}

enum SamplerMode {
    Empty,
    Full,
    Geometric { log_q: f64, rng: Xoshiro256PlusPlus },
}

impl EdgeSampler {
    fn new(params: GraphParams, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p = {p} out of [0, 1]")));
        }
        let mode = if p <= 0.0 {
            SamplerMode::Empty
        } else if p >= 1.0 {
            SamplerMode::Full
        } else {
            SamplerMode::Geometric {
                log_q: libm::log1p(-p),
                rng: Xoshiro256PlusPlus::from_seed_u64(rng::derive_seed(seed, &[rng::role::EDGES])),
            }
        };
        Ok(EdgeSampler {
            total: params.num_edges(),
            next_candidate: 0,
            mode,
        })
    }
}

impl Iterator for EdgeSampler {
    type Item = EdgeIndex;

    #[inline]
    fn next(&mut self) -> Option<EdgeIndex> {
        match &mut self.mode {
            SamplerMode::Empty => None,
            SamplerMode::Full => {
                if self.next_candidate < self.total {
                    let e = self.next_candidate;
                    self.next_candidate += 1;
                    Some(EdgeIndex(e))
                } else {
                    None
                }
            }
            SamplerMode::Geometric { log_q, rng } => {
                if self.next_candidate >= self.total {
                    return None;
                }
                let u = rng.next_unit_positive();
                let skip = libm::log(u) / *log_q;
                let remaining = (self.total - self.next_candidate) as f64;
                if skip >= remaining {
                    self.next_candidate = self.total;
                    return None;
                }
                let e = self.next_candidate + skip as u64;
                self.next_candidate = e + 1;
                Some(EdgeIndex(e))
            }
        }
    }
}

/// Stream of occupied edge indices for one realization, in increasing
/// order; each edge is occupied independently with probability `p`.
pub fn sample_occupied_edges(params: GraphParams, p: f64, seed: u64) -> Result<EdgeSampler> {
    EdgeSampler::new(params, p, seed)
}

// ---------------------------------------------------------------------
// Materialized sample.
// ---------------------------------------------------------------------

/// One percolation realization: occupied adjacency in compressed sparse
/// row form plus its provenance `(params, p, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    params: GraphParams,
    p: f64,
    seed: u64,
    /// offsets[v]..offsets[v+1] indexes `adj` for vertex v; the degree
    /// array is the consecutive differences.
    offsets: Vec<u64>,
    adj: Vec<u32>,
    num_occupied: u64,
}

impl SampleGraph {
    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn retention(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_occupied_edges(&self) -> u64 {
        self.num_occupied
    }

    /// Occupied degree of `v`.
    #[inline]
    pub fn degree_of(&self, v: u64) -> u64 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    /// Occupied neighbors of `v`, in occupied-edge-index order.
    #[inline]
    pub fn neighbors_of(&self, v: u64) -> &[u32] {
        &self.adj[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    /// Whether the edge `{a, b}` is occupied.
    #[inline]
    pub fn has_edge(&self, a: u64, b: u64) -> bool {
        let (probe, target) = if self.degree_of(a) <= self.degree_of(b) {
            (a, b as u32)
        } else {
            (b, a as u32)
        };
        self.neighbors_of(probe).contains(&target)
    }

    /// Number of vertices with occupied degree zero.
    pub fn isolated_count(&self) -> u64 {
        let mut count = 0;
        for v in 0..self.params.num_vertices() as usize {
            if self.offsets[v + 1] == self.offsets[v] {
                count += 1;
            }
        }
        count
    }

    /// Persistent heap footprint of the sample: the offset table plus
    /// the adjacency storage.
    pub fn estimated_heap_bytes(&self) -> usize {
        self.offsets.capacity() * std::mem::size_of::<u64>()
            + self.adj.capacity() * std::mem::size_of::<u32>()
    }

    /// The occupied edge set as sorted canonical indices.
    pub fn occupied_edge_indices(&self) -> Vec<EdgeIndex> {
        let codec = EdgeCodec::new(&self.params);
        let mut out = Vec::with_capacity(self.num_occupied as usize);
        for v in 0..self.params.num_vertices() {
            for &w in self.neighbors_of(v) {
                if (w as u64) > v {
                    out.push(EdgeIndex(
                        codec
                            .index_of(v, w as u64)
                            .expect("adjacent by construction"),
                    ));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Whether every occupied edge here is also occupied in `other`.
    pub fn edge_set_is_subset_of(&self, other: &SampleGraph) -> bool {
        debug_assert_eq!(self.params, other.params);
        for v in 0..self.params.num_vertices() {
            for &w in self.neighbors_of(v) {
                if (w as u64) > v && !other.has_edge(v, w as u64) {
                    return false;
                }
            }
        }
        true
    }

    /// Build a sample from an explicit edge set (strictly increasing
    /// indices). This is the single construction path: the streaming
    /// sampler feeds it, and diagnostics or tests can fabricate samples
    /// with a known edge set.
    pub fn from_edge_indices<I>(
        params: GraphParams,
        p: f64,
        seed: u64,
        edges: I,
    ) -> Result<SampleGraph>
    where
        I: IntoIterator<Item = EdgeIndex>,
    {
        let nv = params.num_vertices();
        if nv > u32::MAX as u64 {
            return Err(Error::Resource(format!(
                "{nv} vertices exceed the in-memory sample capacity"
            )));
        }
        let codec = EdgeCodec::new(&params);
        let total = params.num_edges();
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut prev: Option<u64> = None;
        for e in edges {
            if e.0 >= total {
                return Err(Error::domain(format!(
                    "edge index {} out of range [0, {total})",
                    e.0
                )));
            }
            if let Some(p) = prev {
                if e.0 <= p {
                    return Err(Error::domain(
                        "edge indices must be strictly increasing (no duplicates)",
                    ));
                }
            }
            prev = Some(e.0);
            let (a, b) = codec.endpoints(e.0);
            pairs.push((a as u32, b as u32));
        }
        Ok(Self::from_pairs(params, p, seed, &pairs))
    }

    fn from_pairs(params: GraphParams, p: f64, seed: u64, pairs: &[(u32, u32)]) -> SampleGraph {
        let nv = params.num_vertices() as usize;
        let mut offsets = vec![0u64; nv + 1];
        for &(a, b) in pairs {
            offsets[a as usize + 1] += 1;
            offsets[b as usize + 1] += 1;
        }
        for v in 0..nv {
            offsets[v + 1] += offsets[v];
        }
        let mut adj = vec![0u32; 2 * pairs.len()];
        let mut cursor: Vec<u64> = offsets[..nv].to_vec();
        for &(a, b) in pairs {
            adj[cursor[a as usize] as usize] = b;
            cursor[a as usize] += 1;
            adj[cursor[b as usize] as usize] = a;
            cursor[b as usize] += 1;
        }
        SampleGraph {
            params,
            p,
            seed,
            offsets,
            adj,
            num_occupied: pairs.len() as u64,
        }
    }
}

/// Sample one realization and materialize its adjacency. The occupied
/// edge set equals exactly the stream of [`sample_occupied_edges`] for
/// the same `(params, p, seed)`.
pub fn build_sample(pp: &PercolationParam, seed: u64) -> Result<SampleGraph> {
    let params = pp.params();
    let p = pp.retention();
    let nv = params.num_vertices();
    if nv > u32::MAX as u64 {
        return Err(Error::Resource(format!(
            "{nv} vertices exceed the in-memory sample capacity"
        )));
    }
    let codec = EdgeCodec::new(&params);
    let expected = params.num_edges() as f64 * p;
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(expected as usize + 16);
    for e in sample_occupied_edges(params, p, seed)? {
        let (a, b) = codec.endpoints(e.0);
        pairs.push((a as u32, b as u32));
    }
    Ok(SampleGraph::from_pairs(params, p, seed, &pairs))
}

// ---------------------------------------------------------------------
// Connectivity analysis.
// ---------------------------------------------------------------------

/// Union-find with union by size and path halving.
#[derive(Debug, Clone)]
pub struct DisjointSetForest {
    parent: Vec<u32>,
    size: Vec<u32>,
    components: u64,
}

impl DisjointSetForest {
    pub fn new(count: u64) -> Result<Self> {
        if count > u32::MAX as u64 {
            return Err(Error::Resource(format!(
                "{count} elements exceed union-find capacity"
            )));
        }
        Ok(DisjointSetForest {
            parent: (0..count as u32).collect(),
            size: vec![1; count as usize],
            components: count,
        })
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        loop {
            let p = self.parent[x as usize];
            if p == x {
                return x;
            }
            let gp = self.parent[p as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
    }

    /// Merge the components of `a` and `b`; true if they were distinct.
    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.components -= 1;
        true
    }

    pub fn num_components(&self) -> u64 {
        self.components
    }

    /// Size of the component containing `x`.
    pub fn component_size(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.size[r as usize]
    }

    /// Root with the largest component, ties broken by smallest root
    /// index.
    fn largest_root(&mut self) -> (u32, u32) {
        let mut best_root = 0u32;
        let mut best_size = 0u32;
        for v in 0..self.parent.len() as u32 {
            let r = self.find(v);
            let s = self.size[r as usize];
            if s > best_size || (s == best_size && r < best_root) {
                best_size = s;
                best_root = r;
            }
        }
        (best_root, best_size)
    }
}

/// Component structure of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub num_components: u64,
    pub size_of_largest: u64,
    /// Number of isolated vertices (occupied degree zero).
    pub num_isolated: u64,
    pub is_connected: bool,
    /// Whether every vertex is isolated or in the largest component,
    /// i.e. the graph is the giant component plus dust.
    pub giant_plus_isolated: bool,
}

/// Compute the component structure of a sample with union-find over the
/// occupied adjacency.
pub fn connectivity_report(sample: &SampleGraph) -> ConnectivityReport {
    let nv = sample.params().num_vertices();
    let mut forest = DisjointSetForest::new(nv).expect("sample capacity already checked");
    for v in 0..nv {
        for &w in sample.neighbors_of(v) {
            if (w as u64) > v {
                forest.union(v as u32, w);
            }
        }
    }
    let isolated = sample.isolated_count();
    finish_report(&mut forest, isolated, |v| sample.degree_of(v) == 0)
}

fn finish_report<F: Fn(u64) -> bool>(
    forest: &mut DisjointSetForest,
    num_isolated: u64,
    is_isolated: F,
) -> ConnectivityReport {
    let nv = forest.parent.len() as u64;
    let (giant_root, giant_size) = forest.largest_root();
    let mut giant_plus_isolated = true;
    for v in 0..nv {
        if !is_isolated(v) && forest.find(v as u32) != giant_root {
            giant_plus_isolated = false;
            break;
        }
    }
    let report = ConnectivityReport {
        num_components: forest.num_components(),
        size_of_largest: giant_size as u64,
        num_isolated,
        is_connected: forest.num_components() == 1,
        giant_plus_isolated,
    };
    debug_assert!(!report.is_connected || report.num_isolated == 0 || nv == 1);
    debug_assert!(report.num_isolated <= report.num_components);
    debug_assert!(report.size_of_largest as u128 * report.num_components as u128 >= nv as u128);
    report
}

/// Number of isolated vertices of a sample; always equals the
/// `num_isolated` field of its connectivity report.
pub fn count_isolated(sample: &SampleGraph) -> u64 {
    sample.isolated_count()
}

// ---------------------------------------------------------------------
// Monotone coupling.
// ---------------------------------------------------------------------

/// Sample two coupled realizations at retention `p_low <= p_high` such
/// that the sparse edge set is contained in the dense one edge by edge.
///
/// The dense sample is drawn first (bit-identical to
/// `build_sample(p_high, seed)`); each of its edges is then kept for the
/// sparse sample with probability `p_low / p_high` using an independent
/// thinning stream, which realizes the shared-uniform coupling per edge.
pub fn coupled_pair(
    params: GraphParams,
    p_low: f64,
    p_high: f64,
    seed: u64,
) -> Result<(SampleGraph, SampleGraph)> {
    if !(0.0..=1.0).contains(&p_low) || !(0.0..=1.0).contains(&p_high) {
        return Err(Error::domain("retention probabilities must lie in [0, 1]"));
    }
    if p_low > p_high {
        return Err(Error::domain(format!(
            "coupling needs p_low <= p_high, got {p_low} > {p_high}"
        )));
    }
    let nv = params.num_vertices();
    if nv > u32::MAX as u64 {
        return Err(Error::Resource(format!(
            "{nv} vertices exceed the in-memory sample capacity"
        )));
    }
    let codec = EdgeCodec::new(&params);
    let mut thin =
        Xoshiro256PlusPlus::from_seed_u64(rng::derive_seed(seed, &[rng::role::COUPLING]));
    let mut high_pairs: Vec<(u32, u32)> = Vec::new();
    let mut low_pairs: Vec<(u32, u32)> = Vec::new();
    for e in sample_occupied_edges(params, p_high, seed)? {
        let (a, b) = codec.endpoints(e.0);
        let pair = (a as u32, b as u32);
        high_pairs.push(pair);
        if thin.next_unit() * p_high < p_low {
            low_pairs.push(pair);
        }
    }
    let high = SampleGraph::from_pairs(params, p_high, seed, &high_pairs);
    let low = SampleGraph::from_pairs(params, p_low, seed, &low_pairs);
    Ok((low, high))
}

// ---------------------------------------------------------------------
// Hyperplane connectivity.
// ---------------------------------------------------------------------

/// Whether the subgraph induced by a hyperplane, using only occupied
/// edges with both endpoints on it, is connected as a graph on its
/// `n^(d-1)` vertices. For d = 1 a hyperplane is a single vertex and the
/// answer is vacuously true.
pub fn hyperplane_connected(sample: &SampleGraph, h: HyperplaneId) -> Result<bool> {
    let params = sample.params();
    // Validates direction and level.
    params
        .hyperplane_of(VertexId(0), h.direction)
        .and_then(|_| {
            if h.level < 1 || h.level > params.side() {
                Err(Error::domain(format!(
                    "hyperplane level {} out of range [1, {}]",
                    h.level,
                    params.side()
                )))
            } else {
                Ok(())
            }
        })?;
    let n = params.side();
    let low_pow = {
        let mut acc = 1u64;
        for _ in 0..h.direction - 1 {
            acc *= n;
        }
        acc
    };
    let digit = h.level - 1;
    let local = |v: u64| -> u32 { (v % low_pow + v / (low_pow * n) * low_pow) as u32 };
    let mut forest = DisjointSetForest::new(params.lines_per_direction())?;
    for v in params.hyperplane_vertices(h)? {
        let lv = local(v.0);
        for &w in sample.neighbors_of(v.0) {
            let w = w as u64;
            if w > v.0 && w / low_pow % n == digit {
                forest.union(lv, local(w));
            }
        }
    }
    Ok(forest.num_components() == 1)
}

/// Internal connectivity of all n hyperplanes of one direction at once:
/// one union-find pass over the occupied edges that do not cross levels
/// of `direction`. Element k-1 answers for level k.
pub fn connected_levels(sample: &SampleGraph, direction: u32) -> Result<Vec<bool>> {
    let params = sample.params();
    params.hyperplane_of(VertexId(0), direction)?;
    let n = params.side();
    let nv = params.num_vertices();
    let low_pow = {
        let mut acc = 1u64;
        for _ in 0..direction - 1 {
            acc *= n;
        }
        acc
    };
    let mut forest = DisjointSetForest::new(nv)?;
    for v in 0..nv {
        let dv = v / low_pow % n;
        for &w in sample.neighbors_of(v) {
            let w = w as u64;
            if w > v && w / low_pow % n == dv {
                forest.union(v as u32, w as u32);
            }
        }
    }
    levels_from_forest(&mut forest, nv, n, low_pow)
}

fn levels_from_forest(
    forest: &mut DisjointSetForest,
    nv: u64,
    n: u64,
    low_pow: u64,
) -> Result<Vec<bool>> {
    let mut rep: Vec<Option<u32>> = vec![None; n as usize];
    let mut connected = vec![true; n as usize];
    for v in 0..nv {
        let k = (v / low_pow % n) as usize;
        let root = forest.find(v as u32);
        match rep[k] {
            None => rep[k] = Some(root),
            Some(r) => {
                if r != root {
                    connected[k] = false;
                }
            }
        }
    }
    Ok(connected)
}

// ---------------------------------------------------------------------
// Streaming analysis (no materialized adjacency).
// ---------------------------------------------------------------------

/// Connectivity report plus optional per-direction hyperplane
/// connectivity, computed in one pass over the occupied edge stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamedAnalysis {
    pub report: ConnectivityReport,
    /// `levels[j-1][k-1]`: hyperplane (j, k) internally connected.
    pub hyperplane_levels: Option<Vec<Vec<bool>>>,
}

/// Analyze a realization directly from the edge stream, never storing
/// adjacency. Produces exactly the same report (and hyperplane
/// connectivity) as building the sample and analyzing it, at a fraction
/// of the memory traffic; large sweeps use this path.
pub fn analyze_stream(
    pp: &PercolationParam,
    seed: u64,
    with_hyperplanes: bool,
) -> Result<StreamedAnalysis> {
    let params = pp.params();
    let p = pp.retention();
    let nv = params.num_vertices();
    if nv > u32::MAX as u64 {
        return Err(Error::Resource(format!(
            "{nv} vertices exceed the in-memory analysis capacity"
        )));
    }
    let d = params.dimension();
    let codec = EdgeCodec::new(&params);
    let mut degrees = vec![0u32; nv as usize];
    let mut main = DisjointSetForest::new(nv)?;
    let mut per_direction: Vec<DisjointSetForest> = if with_hyperplanes {
        (0..d)
            .map(|_| DisjointSetForest::new(nv))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    for e in sample_occupied_edges(params, p, seed)? {
        let dir = codec.direction_of(e.0);
        let (a, b) = codec.endpoints(e.0);
        degrees[a as usize] += 1;
        degrees[b as usize] += 1;
        main.union(a as u32, b as u32);
        if with_hyperplanes {
            // An edge in direction `dir` lies inside one hyperplane of
            // every other direction.
            for (j, forest) in per_direction.iter_mut().enumerate() {
                if j as u32 != dir {
                    forest.union(a as u32, b as u32);
                }
            }
        }
    }

    let num_isolated = degrees.iter().filter(|&&d| d == 0).count() as u64;
    let report = finish_report(&mut main, num_isolated, |v| degrees[v as usize] == 0);

    let hyperplane_levels = if with_hyperplanes {
        let mut all = Vec::with_capacity(d as usize);
        for (j, forest) in per_direction.iter_mut().enumerate() {
            all.push(levels_from_forest(
                forest,
                nv,
                params.side(),
                codec.stride(j as u32),
            )?);
        }
        Some(all)
    } else {
        None
    };

    Ok(StreamedAnalysis {
        report,
        hyperplane_levels,
    })
}
