//! Deterministic combinatorics of the Hamming graph H(d, n).
//!
//! Vertices are d-tuples of levels in `{1, ..., n}`; two vertices are
//! adjacent when they differ in exactly one coordinate, so the graph is
//! the Cartesian product of d complete graphs on n vertices. Everything
//! in this module is a pure function of the immutable parameters; the
//! graph itself is never materialized, which keeps instances with 10^7+
//! vertices cheap to work with.
//!
//! Index conventions (fixed for the life of the output formats):
//!
//! * vertex coding is little-endian mixed radix: coordinate 1 is the
//!   least significant base-n digit, `index = sum_i (v_i - 1) n^(i-1)`;
//! * edge indices are grouped by direction, then by line (the n vertices
//!   agreeing in every coordinate but the direction), then by the
//!   lexicographic level pair, so per-direction blocks are contiguous;
//! * coordinates and hyperplane levels are 1-based at the API boundary,
//!   matching the tuple notation, and 0-based internally.

use crate::error::{Error, Result};

/// Validated parameters of H(d, n) plus the derived counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphParams {
    d: u32,
    n: u64,
    num_vertices: u64,
    num_edges: u64,
}

/// Flat vertex index in `[0, n^d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u64);

/// Canonical edge index in `[0, M)` with `M = d n^d (n-1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIndex(pub u64);

/// One of the `d * n` hyperplanes: the vertices whose coordinate
/// `direction` equals `level`. Each induces a copy of H(d-1, n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HyperplaneId {
    /// Coordinate direction, 1-based.
    pub direction: u32,
    /// Fixed level in that coordinate, 1-based.
    pub level: u64,
}

impl GraphParams {
    /// Validate `(d, n)` and precompute vertex and edge counts.
    ///
    /// Fails if `d < 1`, `n < 2`, or if `n^d` or the edge count does not
    /// fit an unsigned 64-bit index; silent overflow would corrupt every
    /// statistic downstream.
    pub fn new(d: u32, n: u64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParams(format!(
                "dimension d={d}, need d >= 1"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("side n={n}, need n >= 2")));
        }
        let num_vertices = checked_pow(n, d)
            .ok_or_else(|| Error::Capacity(format!("n^d overflows u64 for n={n}, d={d}")))?;
        let m = (d as u128) * (num_vertices as u128) * ((n - 1) as u128) / 2;
        let num_edges = u64::try_from(m)
            .map_err(|_| Error::Capacity(format!("edge count overflows u64 for n={n}, d={d}")))?;
        // Same count through the per-direction decomposition; the two
        // routes agreeing is an invariant of the encoding.
        let per_direction = (num_vertices / n) as u128 * (n as u128 * (n as u128 - 1) / 2);
        debug_assert_eq!(m, d as u128 * per_direction);
        Ok(GraphParams {
            d,
            n,
            num_vertices,
            num_edges,
        })
    }

    pub fn dimension(&self) -> u32 {
        self.d
    }

    pub fn side(&self) -> u64 {
        self.n
    }

    /// `n^d`.
    pub fn num_vertices(&self) -> u64 {
        self.num_vertices
    }

    /// Vertex degree `m = d (n - 1)`.
    pub fn degree(&self) -> u64 {
        self.d as u64 * (self.n - 1)
    }

    /// Total edge count `M = d n^d (n-1) / 2`.
    pub fn num_edges(&self) -> u64 {
        self.num_edges
    }

    /// Number of lines per direction, `n^(d-1)`.
    pub fn lines_per_direction(&self) -> u64 {
        self.num_vertices / self.n
    }

    /// Number of edges within one line, `n (n-1) / 2`.
    pub fn pairs_per_line(&self) -> u64 {
        self.n * (self.n - 1) / 2
    }

    /// Number of edges per direction block, `n^(d-1) * n(n-1)/2`.
    pub fn edges_per_direction(&self) -> u64 {
        self.lines_per_direction() * self.pairs_per_line()
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.0 >= self.num_vertices {
            return Err(Error::domain(format!(
                "vertex {} out of range [0, {})",
                v.0, self.num_vertices
            )));
        }
        Ok(())
    }

    fn check_direction(&self, direction: u32) -> Result<()> {
        if direction < 1 || direction > self.d {
            return Err(Error::domain(format!(
                "direction {direction} out of range [1, {}]",
                self.d
            )));
        }
        Ok(())
    }

    /// Encode a 1-based coordinate tuple into a vertex index.
    pub fn encode_vertex(&self, coords: &[u64]) -> Result<VertexId> {
        if coords.len() != self.d as usize {
            return Err(Error::domain(format!(
                "expected {} coordinates, got {}",
                self.d,
                coords.len()
            )));
        }
        let mut index = 0u64;
        let mut pow = 1u64;
        for (i, &c) in coords.iter().enumerate() {
            if c < 1 || c > self.n {
                return Err(Error::domain(format!(
                    "coordinate {} = {c} out of range [1, {}]",
                    i + 1,
                    self.n
                )));
            }
            index += (c - 1) * pow;
            pow = pow.saturating_mul(self.n);
        }
        Ok(VertexId(index))
    }

    /// Decode a vertex index back into its 1-based coordinate tuple.
    pub fn decode_vertex(&self, v: VertexId) -> Result<Vec<u64>> {
        self.check_vertex(v)?;
        let mut rest = v.0;
        let mut coords = Vec::with_capacity(self.d as usize);
        for _ in 0..self.d {
            coords.push(rest % self.n + 1);
            rest /= self.n;
        }
        Ok(coords)
    }

    /// All `d (n-1)` neighbors of `v`, ordered by direction then level.
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check_vertex(v)?;
        let mut out = Vec::with_capacity(self.degree() as usize);
        let mut pow = 1u64;
        for _ in 0..self.d {
            let digit = v.0 / pow % self.n;
            let base = v.0 - digit * pow;
            for level in 0..self.n {
                if level != digit {
                    out.push(VertexId(base + level * pow));
                }
            }
            pow = pow.saturating_mul(self.n);
        }
        Ok(out)
    }

    /// Endpoints of the edge with canonical index `e`, as an unordered
    /// pair with the smaller vertex first. The endpoints differ in
    /// exactly the direction of the index's block.
    pub fn edge_endpoints(&self, e: EdgeIndex) -> Result<(VertexId, VertexId)> {
        if e.0 >= self.num_edges {
            return Err(Error::domain(format!(
                "edge index {} out of range [0, {})",
                e.0, self.num_edges
            )));
        }
        let codec = EdgeCodec::new(self);
        let (a, b) = codec.endpoints(e.0);
        Ok((VertexId(a), VertexId(b)))
    }

    /// Canonical index of the edge `{a, b}`; fails unless the two
    /// vertices differ in exactly one coordinate.
    pub fn edge_index(&self, a: VertexId, b: VertexId) -> Result<EdgeIndex> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        let codec = EdgeCodec::new(self);
        codec
            .index_of(a.0, b.0)
            .map(EdgeIndex)
            .ok_or_else(|| Error::domain(format!("vertices {} and {} are not adjacent", a.0, b.0)))
    }

    /// The hyperplane through `v` in the given direction: `(j, v_j)`.
    pub fn hyperplane_of(&self, v: VertexId, direction: u32) -> Result<HyperplaneId> {
        self.check_vertex(v)?;
        self.check_direction(direction)?;
        let pow = checked_pow(self.n, direction - 1).expect("within num_vertices");
        let digit = v.0 / pow % self.n;
        Ok(HyperplaneId {
            direction,
            level: digit + 1,
        })
    }

    fn check_hyperplane(&self, h: HyperplaneId) -> Result<()> {
        self.check_direction(h.direction)?;
        if h.level < 1 || h.level > self.n {
            return Err(Error::domain(format!(
                "hyperplane level {} out of range [1, {}]",
                h.level, self.n
            )));
        }
        Ok(())
    }

    /// The `n^(d-1)` vertices of a hyperplane, in increasing index order.
    pub fn hyperplane_vertices(&self, h: HyperplaneId) -> Result<impl Iterator<Item = VertexId>> {
        self.check_hyperplane(h)?;
        let low_pow = checked_pow(self.n, h.direction - 1).expect("within num_vertices");
        let high_pow = low_pow * self.n;
        let fixed = (h.level - 1) * low_pow;
        let count = self.lines_per_direction();
        Ok((0..count).map(move |local| {
            let low = local % low_pow;
            let high = local / low_pow;
            VertexId(low + fixed + high * high_pow)
        }))
    }

    /// Map a hyperplane vertex to its index within the hyperplane's copy
    /// of H(d-1, n): strip the fixed digit.
    pub fn hyperplane_local_index(&self, h: HyperplaneId, v: VertexId) -> Result<u64> {
        self.check_hyperplane(h)?;
        self.check_vertex(v)?;
        let low_pow = checked_pow(self.n, h.direction - 1).expect("within num_vertices");
        let digit = v.0 / low_pow % self.n;
        if digit + 1 != h.level {
            return Err(Error::domain(format!(
                "vertex {} is not on hyperplane ({}, {})",
                v.0, h.direction, h.level
            )));
        }
        Ok(v.0 % low_pow + v.0 / (low_pow * self.n) * low_pow)
    }
}

fn checked_pow(base: u64, exp: u32) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Precomputed tables for hot-path edge index <-> endpoint conversion.
///
/// The streaming sampler decodes millions of indices per realization, so
/// this avoids re-deriving powers of n per call.
#[derive(Debug, Clone)]
pub(crate) struct EdgeCodec {
    d: u32,
    n: u64,
    /// pow[i] = n^i for i in 0..=d.
    pow: Vec<u64>,
    pairs_per_line: u64,
    edges_per_direction: u64,
}

impl EdgeCodec {
    pub fn new(params: &GraphParams) -> Self {
        let mut pow = Vec::with_capacity(params.d as usize + 1);
        let mut acc = 1u64;
        for _ in 0..=params.d {
            pow.push(acc);
            acc = acc.saturating_mul(params.n);
        }
        EdgeCodec {
            d: params.d,
            n: params.n,
            pow,
            pairs_per_line: params.pairs_per_line(),
            edges_per_direction: params.edges_per_direction(),
        }
    }

    /// 0-based digit of `v` in 0-based direction `dir`.
    #[inline]
    pub fn digit(&self, v: u64, dir: u32) -> u64 {
        v / self.pow[dir as usize] % self.n
    }

    /// Pairs ranked before those with first element `a`; `a (2n - a - 1) / 2`
    /// in u128 because 2n - 1 can exceed 32 bits.
    #[inline]
    fn pairs_before(&self, a: u64) -> u64 {
        (a as u128 * (2 * self.n - a - 1) as u128 / 2) as u64
    }

    /// Rank of the unordered 0-based pair `(a, b)`, `a < b`, in
    /// lexicographic order: (0,1), (0,2), ..., (1,2), ...
    #[inline]
    fn pair_rank(&self, a: u64, b: u64) -> u64 {
        self.pairs_before(a) + (b - a - 1)
    }

    /// Inverse of `pair_rank`. The square-root estimate can be off by an
    /// ulp, so it is corrected exactly afterwards.
    #[inline]
    fn pair_unrank(&self, q: u64) -> (u64, u64) {
        let n = self.n;
        let w = (2 * n - 1) as u128;
        let disc = (w * w - 8 * q as u128) as f64;
        let est = ((2 * n - 1) as f64 - disc.sqrt()) / 2.0;
        let mut a = if est > 0.0 { est as u64 } else { 0 };
        a = a.min(n - 2);
        while self.pairs_before(a) > q {
            a -= 1;
        }
        while self.pairs_before(a + 1) <= q {
            a += 1;
        }
        let b = q - self.pairs_before(a) + a + 1;
        (a, b)
    }

    /// Endpoints of edge index `e`, smaller vertex first.
    #[inline]
    pub fn endpoints(&self, e: u64) -> (u64, u64) {
        let dir = (e / self.edges_per_direction) as u32;
        let rem = e % self.edges_per_direction;
        let line = rem / self.pairs_per_line;
        let q = rem % self.pairs_per_line;
        let (a, b) = self.pair_unrank(q);
        let low_pow = self.pow[dir as usize];
        let base = line % low_pow + line / low_pow * (low_pow * self.n);
        (base + a * low_pow, base + b * low_pow)
    }

    /// Direction block (0-based) of edge index `e`.
    #[inline]
    pub fn direction_of(&self, e: u64) -> u32 {
        (e / self.edges_per_direction) as u32
    }

    /// Canonical index of the edge `{u, w}`; `None` unless the vertices
    /// differ in exactly one digit.
    pub fn index_of(&self, u: u64, w: u64) -> Option<u64> {
        if u == w {
            return None;
        }
        let mut dir = None;
        for i in 0..self.d {
            if self.digit(u, i) != self.digit(w, i) {
                if dir.is_some() {
                    return None;
                }
                dir = Some(i);
            }
        }
        let dir = dir?;
        let low_pow = self.pow[dir as usize];
        let a = self.digit(u, dir);
        let b = self.digit(w, dir);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let line = u % low_pow + u / (low_pow * self.n) * low_pow;
        Some(
            dir as u64 * self.edges_per_direction
                + line * self.pairs_per_line
                + self.pair_rank(a, b),
        )
    }

    /// n^dir, the stride of the given 0-based direction.
    #[inline]
    pub fn stride(&self, dir: u32) -> u64 {
        self.pow[dir as usize]
    }
}
