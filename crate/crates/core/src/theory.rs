//! Closed-form evaluators for the connectivity window, and exact
//! brute-force computations on tiny instances.
//!
//! The window coordinate is `t = lambda - d ln n`, where `lambda` is the
//! expected occupied degree. In the window the connectivity probability
//! converges to the double exponential `exp(-exp(-t))`, and the number of
//! isolated vertices converges to Poisson(`exp(-t)`). The brute-force
//! routines enumerate all `2^M` edge subsets of an instance small enough
//! to allow it, and serve as ground truth for the Monte Carlo engine.
//!
//! All logarithms are natural; the double-exponential limit leaves no
//! choice of base.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{EdgeIndex, GraphParams};

/// Largest edge count the subset enumeration accepts (2^25 ~ 3.4e7
/// subsets, a few seconds). Every instance the test suites need is far
/// below this.
pub const ENUMERATION_GUARD: u64 = 25;

/// A point of the critical window for a given graph: `lambda = d ln n + t`.
#[derive(Debug, Clone, Copy)]
pub struct WindowPoint {
    params: GraphParams,
    t: f64,
}

impl WindowPoint {
    /// Fails when the implied `lambda` is negative or the implied
    /// retention probability exceeds 1.
    pub fn new(params: GraphParams, t: f64) -> Result<Self> {
        let lambda = params.dimension() as f64 * libm::log(params.side() as f64) + t;
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::domain(format!(
                "window t={t} gives negative expected degree lambda={lambda}"
            )));
        }
        if lambda > params.degree() as f64 {
            return Err(Error::domain(format!(
                "window t={t} gives lambda={lambda} > degree {}",
                params.degree()
            )));
        }
        Ok(WindowPoint { params, t })
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lambda(&self) -> f64 {
        self.params.dimension() as f64 * libm::log(self.params.side() as f64) + self.t
    }

    pub fn p(&self) -> f64 {
        self.lambda() / self.params.degree() as f64
    }
}

/// Lower and upper bounds on the r-th factorial moment of the isolated
/// vertex count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBounds {
    pub r: u32,
    pub lower: f64,
    pub upper: f64,
}

/// Limit of the connectivity probability at window coordinate `t`:
/// `exp(-exp(-t))`. Strictly increasing, with limits 0 and 1 at -/+
/// infinity.
pub fn predicted_connectivity(t: f64) -> f64 {
    libm::exp(-libm::exp(-t))
}

/// Window coordinate governing each hyperplane's own connectivity limit:
/// a hyperplane of H(d, n) at window `t` behaves like H(d-1, n) at window
/// `(d-1) t / d`.
pub fn hyperplane_window(t: f64, d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain(
            "hyperplane window needs d >= 2; hyperplanes of H(1, n) are single vertices",
        ));
    }
    Ok((d - 1) as f64 * t / d as f64)
}

/// Quorum fraction `alpha = exp(-exp(-(d-1)t/d)) - eps`: the hyperplane
/// connectivity limit minus a slack. Fails unless the result is positive.
pub fn alpha_parameter(t: f64, d: u32, eps: f64) -> Result<f64> {
    let alpha = predicted_connectivity(hyperplane_window(t, d)?) - eps;
    if alpha <= 0.0 {
        return Err(Error::domain(format!(
            "alpha = {alpha} must be positive; reduce eps"
        )));
    }
    Ok(alpha)
}

/// Falling factorial `(x)_r = x (x-1) ... (x-r+1)` of a nonnegative
/// integer, exact through u128 when it fits and in floating point with an
/// early zero exit otherwise.
pub fn falling_factorial(x: u64, r: u32) -> f64 {
    if (r as u64) > x {
        return 0.0;
    }
    let mut exact: u128 = 1;
    for k in 0..r as u64 {
        match exact.checked_mul((x - k) as u128) {
            Some(v) => exact = v,
            None => {
                // Too large for integer arithmetic; redo in f64.
                let mut acc = 1.0f64;
                for j in 0..r as u64 {
                    acc *= (x - j) as f64;
                }
                return acc;
            }
        }
    }
    exact as f64
}

/// Bounds on `E[(Y)_r]` for the isolated-vertex count Y at expected
/// degree `lambda`:
///
/// * lower: `(n^d)_r (1 - lambda/m)^(r m)` — joint isolation is cheapest
///   when none of the r vertices are adjacent;
/// * upper: `(n^d)_r (1 - lambda/m)^(r m - r(r-1)/2)` — and most likely
///   when all r sit on one line, sharing `r(r-1)/2` incident edges.
///
/// The bounds are meant for fixed `r` as n grows; `r > n` is rejected
/// rather than extended. `r` exceeding the vertex count yields exact
/// zeros (the falling factorial vanishes).
pub fn factorial_moment_bounds(r: u32, params: GraphParams, lambda: f64) -> Result<MomentBounds> {
    if r < 1 {
        return Err(Error::domain("moment order r must be >= 1"));
    }
    let m = params.degree() as f64;
    if !(0.0..=m).contains(&lambda) {
        return Err(Error::domain(format!(
            "lambda = {lambda} out of range [0, {m}]"
        )));
    }
    if r as u64 > params.num_vertices() {
        return Ok(MomentBounds {
            r,
            lower: 0.0,
            upper: 0.0,
        });
    }
    if r as u64 > params.side() {
        return Err(Error::domain(format!(
            "moment order r = {r} exceeds side n = {}; bounds are stated for r <= n",
            params.side()
        )));
    }
    let ff = falling_factorial(params.num_vertices(), r);
    let q = (m - lambda) / m;
    let rm = r as f64 * m;
    let shared = (r as f64) * (r as f64 - 1.0) / 2.0;
    Ok(MomentBounds {
        r,
        lower: ff * libm::pow(q, rm),
        upper: ff * libm::pow(q, rm - shared),
    })
}

/// Exact expected number of isolated vertices, `n^d (1 - lambda/m)^m`.
/// A vertex is isolated exactly when its m incident edges are all vacant,
/// independently.
pub fn expected_isolated(params: GraphParams, lambda: f64) -> Result<f64> {
    Ok(factorial_moment_bounds(1, params, lambda)?.lower)
}

/// Poisson probability mass `e^(-mu) mu^k / k!`, by the stable upward
/// recurrence.
pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    debug_assert!(mu >= 0.0);
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut p = libm::exp(-mu);
    for i in 1..=k {
        p *= mu / i as f64;
    }
    p
}

// ---------------------------------------------------------------------
// Exact brute force by subset enumeration.
// ---------------------------------------------------------------------

/// What `subset_expectation` evaluates per subset.
enum Measure {
    Connectivity,
    FactorialMoment(u32),
}

struct TinyInstance {
    num_vertices: usize,
    edges: Vec<(u32, u32)>,
    /// weight[k] = p^k (1-p)^(M-k).
    weight_by_count: Vec<f64>,
}

impl TinyInstance {
    fn new(params: GraphParams, p: f64) -> Result<Self> {
        let m_edges = params.num_edges();
        if m_edges > ENUMERATION_GUARD {
            return Err(Error::Resource(format!(
                "{m_edges} edges exceed the enumeration guard of {ENUMERATION_GUARD}"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p = {p} out of [0, 1]")));
        }
        let edges: Vec<(u32, u32)> = (0..m_edges)
            .map(|e| {
                let (a, b) = params.edge_endpoints(EdgeIndex(e)).expect("index in range");
                (a.0 as u32, b.0 as u32)
            })
            .collect();
        let mut weight_by_count = Vec::with_capacity(m_edges as usize + 1);
        for k in 0..=m_edges {
            let occupied = libm::pow(p, k as f64);
            let vacant = libm::pow(1.0 - p, (m_edges - k) as f64);
            weight_by_count.push(occupied * vacant);
        }
        Ok(TinyInstance {
            num_vertices: params.num_vertices() as usize,
            edges,
            weight_by_count,
        })
    }
}

/// Sum over all 2^M edge subsets of `P(subset) * measure(subset)`.
///
/// Subsets are split into fixed-size chunks processed in parallel; the
/// per-chunk partial sums are combined in chunk order, so the result does
/// not depend on how the chunks were scheduled.
fn subset_expectation(params: GraphParams, p: f64, measure: Measure) -> Result<f64> {
    let instance = TinyInstance::new(params, p)?;
    let m_edges = instance.edges.len() as u32;
    let total: u64 = 1u64 << m_edges;
    const CHUNK_BITS: u32 = 16;
    let chunk = 1u64 << CHUNK_BITS.min(m_edges);
    let chunks = total / chunk;

    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            let mut adj = [0u64; 64];
            for mask in c * chunk..(c + 1) * chunk {
                adj[..instance.num_vertices].fill(0);
                let mut bits = mask;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let (a, b) = instance.edges[i];
                    adj[a as usize] |= 1u64 << b;
                    adj[b as usize] |= 1u64 << a;
                }
                let value = match measure {
                    Measure::Connectivity => {
                        if subset_connected(&adj[..instance.num_vertices]) {
                            1.0
                        } else {
                            continue;
                        }
                    }
                    Measure::FactorialMoment(r) => {
                        let isolated = adj[..instance.num_vertices]
                            .iter()
                            .filter(|&&a| a == 0)
                            .count() as u64;
                        let ff = falling_factorial(isolated, r);
                        if ff == 0.0 {
                            continue;
                        }
                        ff
                    }
                };
                let term = instance.weight_by_count[mask.count_ones() as usize] * value;
                // Kahan compensation; 2^25 terms can lose digits otherwise.
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            sum
        })
        .collect();

    Ok(partials.iter().sum())
}

fn subset_connected(adj: &[u64]) -> bool {
    let full = if adj.len() == 64 {
        u64::MAX
    } else {
        (1u64 << adj.len()) - 1
    };
    let mut reach = 1u64;
    let mut frontier = 1u64;
    while frontier != 0 {
        let mut next = 0u64;
        let mut bits = frontier;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            next |= adj[v];
        }
        frontier = next & !reach;
        reach |= frontier;
    }
    reach == full
}

/// Exact probability that the percolated instance is connected, by
/// enumeration of all edge subsets. Guarded to M <= 25 edges.
pub fn brute_force_connectivity(params: GraphParams, p: f64) -> Result<f64> {
    subset_expectation(params, p, Measure::Connectivity)
}

/// Exact `E[(Y)_r]` for the isolated-vertex count Y, by enumeration of
/// all edge subsets. Guarded to M <= 25 edges.
pub fn brute_force_factorial_moment(params: GraphParams, p: f64, r: u32) -> Result<f64> {
    if r < 1 {
        return Err(Error::domain("moment order r must be >= 1"));
    }
    subset_expectation(params, p, Measure::FactorialMoment(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: u32, n: u64) -> GraphParams {
        GraphParams::new(d, n).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol * b.abs().max(1.0),
            "{a} vs {b} (tol {tol})"
        );
    }

    #[test]
    fn predicted_connectivity_examples() {
        close(predicted_connectivity(0.0), (-1.0f64).exp(), 1e-12);
        assert!(predicted_connectivity(80.0) > 1.0 - 1e-12);
        assert!(predicted_connectivity(-50.0) < 1e-12);
        // exp(-exp(-t)) = 1/2 at t = -ln ln 2.
        let t_half = -f64::ln(f64::ln(2.0));
        close(predicted_connectivity(t_half), 0.5, 1e-12);
    }

    #[test]
    fn predicted_connectivity_is_increasing() {
        let mut prev = predicted_connectivity(-6.0);
        let mut t = -6.0 + 0.25;
        while t <= 6.0 {
            let cur = predicted_connectivity(t);
            assert!(cur > prev, "not increasing at t={t}");
            prev = cur;
            t += 0.25;
        }
    }

    #[test]
    fn hyperplane_window_examples() {
        assert_eq!(hyperplane_window(0.0, 2).unwrap(), 0.0);
        close(hyperplane_window(1.0, 2).unwrap(), 0.5, 1e-15);
        close(hyperplane_window(3.0, 3).unwrap(), 2.0, 1e-15);
        assert!(hyperplane_window(1.0, 1).is_err());
    }

    #[test]
    fn alpha_parameter_examples() {
        close(
            alpha_parameter(0.0, 2, 0.1).unwrap(),
            (-1.0f64).exp() - 0.1,
            1e-12,
        );
        close(
            alpha_parameter(2.0, 2, 0.05).unwrap(),
            f64::exp(-f64::exp(-1.0)) - 0.05,
            1e-12,
        );
        // eps equal to the whole value leaves nothing.
        let full = predicted_connectivity(hyperplane_window(0.0, 2).unwrap());
        assert!(alpha_parameter(0.0, 2, full).is_err());
    }

    #[test]
    fn poisson_pmf_examples() {
        assert_eq!(poisson_pmf(0, 0.0), 1.0);
        assert_eq!(poisson_pmf(3, 0.0), 0.0);
        close(poisson_pmf(2, 1.0), 1.0 / (2.0 * f64::exp(1.0)), 1e-12);
        // P(Y = 0) at rate exp(-t) is the connectivity limit.
        for t in [-1.0, 0.0, 0.5, 2.0] {
            close(
                poisson_pmf(0, f64::exp(-t)),
                predicted_connectivity(t),
                1e-12,
            );
        }
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        for mu in [0.0, 0.3, 1.0, 2.5, 7.0] {
            let k_max = 50 + (10.0 * mu) as u64;
            let total: f64 = (0..=k_max).map(|k| poisson_pmf(k, mu)).sum();
            assert!((total - 1.0).abs() < 1e-12, "mu={mu}: {total}");
        }
    }

    #[test]
    fn falling_factorial_cases() {
        assert_eq!(falling_factorial(5, 2), 20.0);
        assert_eq!(falling_factorial(3, 4), 0.0);
        assert_eq!(falling_factorial(3, 3), 6.0);
        assert_eq!(falling_factorial(10, 0), 1.0);
        // Beyond u128: falls back to floating point, stays finite.
        let big = falling_factorial(u64::MAX, 3);
        assert!(big.is_finite() && big > 0.0);
    }

    #[test]
    fn moment_bounds_examples() {
        // r = 1: both bounds equal the exact E[Y].
        let p14 = params(1, 4);
        let b1 = factorial_moment_bounds(1, p14, 1.0).unwrap();
        close(b1.lower, b1.upper, 1e-15);
        close(b1.lower, 4.0 * libm::pow(2.0 / 3.0, 3.0), 1e-12);

        // d=1, n=4, lambda=1, r=2: plug-in arithmetic.
        let b2 = factorial_moment_bounds(2, p14, 1.0).unwrap();
        close(b2.lower, 12.0 * libm::pow(2.0 / 3.0, 6.0), 1e-12);
        close(b2.upper, 12.0 * libm::pow(2.0 / 3.0, 5.0), 1e-12);
        assert!(b2.lower <= b2.upper);

        // lambda = 0: empty graph, every vertex isolated.
        let b0 = factorial_moment_bounds(2, p14, 0.0).unwrap();
        assert_eq!(b0.lower, 12.0);
        assert_eq!(b0.upper, 12.0);

        // r beyond the vertex count: zero bounds.
        let p22 = params(2, 2);
        let bz = factorial_moment_bounds(5, p22, 1.0).unwrap();
        assert_eq!((bz.lower, bz.upper), (0.0, 0.0));

        // r beyond n but within the vertex count: out of the bounds' scope.
        assert!(factorial_moment_bounds(3, p22, 1.0).is_err());
        assert!(factorial_moment_bounds(0, p14, 1.0).is_err());
        assert!(factorial_moment_bounds(2, p14, 9.9).is_err());
    }

    #[test]
    fn brute_force_connectivity_examples() {
        // Single edge: connected iff the edge is present.
        for p in [0.0, 0.3, 0.8, 1.0] {
            close(brute_force_connectivity(params(1, 2), p).unwrap(), p, 1e-12);
        }
        // Triangle at p = 1/2: connected iff >= 2 edges, 3 p^2 (1-p) + p^3.
        close(
            brute_force_connectivity(params(1, 3), 0.5).unwrap(),
            0.5,
            1e-12,
        );
        // 4-cycle at p = 1/2: 4 p^3 (1-p) + p^4 = 5/16.
        close(
            brute_force_connectivity(params(2, 2), 0.5).unwrap(),
            5.0 / 16.0,
            1e-12,
        );
    }

    #[test]
    fn brute_force_connectivity_monotone_in_p() {
        for (d, n) in [(1, 4), (2, 2), (3, 2)] {
            let pr = params(d, n);
            let mut prev = 0.0;
            for i in 0..=10 {
                let p = i as f64 / 10.0;
                let c = brute_force_connectivity(pr, p).unwrap();
                assert!(c >= prev - 1e-12, "(d={d}, n={n}) not monotone at p={p}");
                prev = c;
            }
            assert!((brute_force_connectivity(pr, 1.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_guard() {
        // d=1, n=8 has 28 edges.
        assert!(matches!(
            brute_force_connectivity(params(1, 8), 0.5),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            brute_force_factorial_moment(params(1, 8), 0.5, 1),
            Err(Error::Resource(_))
        ));
        assert!(brute_force_connectivity(params(1, 3), 1.5).is_err());
        assert!(brute_force_factorial_moment(params(1, 3), 0.5, 0).is_err());
    }

    #[test]
    fn brute_force_moment_examples() {
        // E[Y] for the triangle at p = 1/2: 3 (1-p)^2 = 0.75.
        close(
            brute_force_factorial_moment(params(1, 3), 0.5, 1).unwrap(),
            0.75,
            1e-12,
        );
        // r beyond the vertex count vanishes.
        assert_eq!(
            brute_force_factorial_moment(params(1, 3), 0.5, 4).unwrap(),
            0.0
        );
        // p = 0: everything isolated, E[(Y)_r] = (n^d)_r.
        close(
            brute_force_factorial_moment(params(2, 2), 0.0, 2).unwrap(),
            12.0,
            1e-12,
        );
    }

    /// Independent route to E[(Y)_r]: sum over ordered r-tuples of
    /// distinct vertices of the probability that all their incident
    /// edges are vacant (the union counted once).
    fn tuple_sum_moment(pr: GraphParams, p: f64, r: u32) -> f64 {
        use std::collections::HashSet;
        let nv = pr.num_vertices();
        let mut total = 0.0;
        let mut tuple = vec![0u64; r as usize];
        fn rec(
            pr: GraphParams,
            p: f64,
            tuple: &mut Vec<u64>,
            depth: usize,
            nv: u64,
            total: &mut f64,
        ) {
            if depth == tuple.len() {
                let mut incident: HashSet<u64> = HashSet::new();
                for &v in tuple.iter() {
                    for w in pr.neighbors(crate::graph::VertexId(v)).unwrap() {
                        let e = pr.edge_index(crate::graph::VertexId(v), w).unwrap();
                        incident.insert(e.0);
                    }
                }
                *total += libm::pow(1.0 - p, incident.len() as f64);
                return;
            }
            for v in 0..nv {
                if tuple[..depth].contains(&v) {
                    continue;
                }
                tuple[depth] = v;
                rec(pr, p, tuple, depth + 1, nv, total);
            }
        }
        rec(pr, p, &mut tuple, 0, nv, &mut total);
        total
    }

    #[test]
    fn subset_and_tuple_routes_agree() {
        for (d, n) in [(1, 3), (1, 4), (2, 2)] {
            let pr = params(d, n);
            for p in [0.2, 0.5, 0.7] {
                for r in 1..=3u32 {
                    let by_subsets = brute_force_factorial_moment(pr, p, r).unwrap();
                    let by_tuples = tuple_sum_moment(pr, p, r);
                    close(by_subsets, by_tuples, 1e-10);
                }
            }
        }
    }

    #[test]
    fn sandwich_on_tiny_instances() {
        // lambda = d ln n (window t = 0 at tiny n); r limited to the
        // bounds' stated scope r <= n.
        for (d, n) in [(1u32, 3u64), (1, 4), (1, 5), (2, 2), (3, 2)] {
            let pr = params(d, n);
            let lambda = d as f64 * libm::log(n as f64);
            let p = lambda / pr.degree() as f64;
            assert!(p <= 1.0);
            for r in 1..=3u32.min(n as u32) {
                let exact = brute_force_factorial_moment(pr, p, r).unwrap();
                let bounds = factorial_moment_bounds(r, pr, lambda).unwrap();
                assert!(
                    bounds.lower <= exact + 1e-12 && exact <= bounds.upper + 1e-12,
                    "(d={d}, n={n}, r={r}): {} <= {exact} <= {} violated",
                    bounds.lower,
                    bounds.upper
                );
                if r == 1 {
                    close(bounds.lower, exact, 1e-10);
                }
            }
        }
    }

    #[test]
    fn moments_converge_to_window_limit() {
        // (n^d)_r (1 - lambda/m)^(rm) -> exp(-t r) as n grows, with the
        // deviation shrinking monotonically along the grid.
        for d in [1u32, 2] {
            for t in [-1.0, 0.0, 1.0] {
                for r in 1..=3u32 {
                    let limit = libm::exp(-t * r as f64);
                    let mut prev_dev = f64::INFINITY;
                    for n in [100u64, 1_000, 10_000, 100_000] {
                        let pr = params(d, n);
                        let lambda = d as f64 * libm::log(n as f64) + t;
                        let lower = factorial_moment_bounds(r, pr, lambda).unwrap().lower;
                        let dev = (lower - limit).abs();
                        assert!(
                            dev < prev_dev,
                            "deviation not shrinking: d={d} t={t} r={r} n={n}"
                        );
                        prev_dev = dev;
                    }
                    assert!(prev_dev < 2e-2 * limit, "relative gap too wide");
                }
            }
        }
    }

    #[test]
    fn window_point_validation() {
        let pr = params(2, 100);
        let w = WindowPoint::new(pr, 0.0).unwrap();
        close(w.lambda(), 2.0 * libm::log(100.0), 1e-12);
        close(w.p(), 2.0 * libm::log(100.0) / 198.0, 1e-12);
        // t below -d ln n makes lambda negative.
        assert!(WindowPoint::new(pr, -10.0).is_err());
        // Tiny graph where d ln n + t exceeds the degree.
        assert!(WindowPoint::new(params(1, 2), 1.0).is_err());
    }
}
