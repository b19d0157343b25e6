//! Partial complexities and punctured graphs.
//!
//! The base of a counting problem is a graph: the circle of directions at an interior point, or
//! the union of the boundary sides a direction enters through. Singular orbits puncture the base,
//! and the partial complexity counts the components that remain. [`PuncturedGraph`] does the
//! combinatorics on explicit graphs; the series functions read the same counts off the beam
//! splitting.

use std::f64::consts::TAU;

use petgraph::algo::connected_components;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::counting::{
    direction_counting_map_beams, direction_seeds, position_counting_flow_beams, Abscissa, CountingSeries,
};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::polygon::Polygon;
use crate::unfold::{SplitOptions, SplitResult};

/// Directions closer than this are one puncture.
const DIRECTION_EPS: f64 = 1e-12;

/// Finite multigraph without isolated vertices.
#[derive(Clone, Debug)]
pub struct PuncturedGraph {
    graph: UnGraph<(), ()>,
}

/// A point of a graph: a vertex, or an interior point of an edge at parameter `at ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphPoint {
    Vertex { vertex: usize },
    Edge { edge: usize, at: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentBounds {
    /// `χ(R) + Σ val`.
    pub lower: i64,
    pub actual: i64,
    /// `c(R) + Σ val`.
    pub upper: i64,
    pub is_forest: bool,
}

impl PuncturedGraph {
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<PuncturedGraph> {
        let mut graph = UnGraph::with_capacity(vertex_count, edges.len());
        for _ in 0..vertex_count {
            graph.add_node(());
        }
        for &(a, b) in edges {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Domain(format!("edge ({a}, {b}) uses a missing vertex")));
            }
            graph.add_edge(NodeIndex::new(a), NodeIndex::new(b), ());
        }
        let g = PuncturedGraph { graph };
        if let Some(v) = (0..vertex_count).find(|&v| g.degree(v) == 0) {
            return Err(Error::Domain(format!("vertex {v} is isolated")));
        }
        Ok(g)
    }

    /// A cycle with `n ≥ 1` vertices (a single loop for `n = 1`).
    pub fn cycle(n: usize) -> Result<PuncturedGraph> {
        if n == 0 {
            return Err(Error::Domain("a cycle needs at least one vertex".into()));
        }
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        PuncturedGraph::new(n, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.graph.edge_indices().map(|e| self.endpoints(e.index())).collect()
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.graph.edge_endpoints(petgraph::graph::EdgeIndex::new(e)).unwrap();
        (a.index(), b.index())
    }

    /// Number of edge ends at `v`; a loop counts twice.
    pub fn degree(&self, v: usize) -> usize {
        self.graph
            .edge_indices()
            .map(|e| {
                let (a, b) = self.endpoints(e.index());
                (a == v) as usize + (b == v) as usize
            })
            .sum()
    }

    pub fn components(&self) -> usize {
        connected_components(&self.graph)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64
    }

    /// `(h₀, h₁)`.
    pub fn betti(&self) -> (i64, i64) {
        let c = self.components() as i64;
        (c, c - self.euler_characteristic())
    }

    pub fn is_forest(&self) -> bool {
        self.betti().1 == 0
    }

    fn check(&self, x: &GraphPoint) -> Result<()> {
        match *x {
            GraphPoint::Vertex { vertex } if vertex < self.vertex_count() => Ok(()),
            GraphPoint::Edge { edge, at } if edge < self.edge_count() && at > 0.0 && at < 1.0 => Ok(()),
            _ => Err(Error::Domain(format!("{x:?} is not a point of the graph"))),
        }
    }

    /// Number of edges at `x` minus one.
    pub fn valence(&self, x: &GraphPoint) -> Result<i64> {
        self.check(x)?;
        Ok(match *x {
            GraphPoint::Vertex { vertex } => self.degree(vertex) as i64 - 1,
            GraphPoint::Edge { .. } => 1,
        })
    }

    /// The graph with the given points removed. Every removed point leaves one dangling end per
    /// incident edge end.
    pub fn puncture(&self, points: &[GraphPoint]) -> Result<PuncturedGraph> {
        let mut removed = vec![false; self.vertex_count()];
        let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); self.edge_count()];
        for x in points {
            self.check(x)?;
            match *x {
                GraphPoint::Vertex { vertex } => {
                    if removed[vertex] {
                        return Err(Error::Domain(format!("vertex {vertex} is punctured twice")));
                    }
                    removed[vertex] = true;
                }
                GraphPoint::Edge { edge, at } => {
                    if cuts[edge].contains(&at) {
                        return Err(Error::Domain(format!("edge {edge} is punctured twice at {at}")));
                    }
                    cuts[edge].push(at);
                }
            }
        }
        let mut graph = UnGraph::new_undirected();
        let kept: Vec<Option<NodeIndex>> =
            removed.iter().map(|&r| if r { None } else { Some(graph.add_node(())) }).collect();
        for (e, cut) in cuts.iter_mut().enumerate() {
            cut.sort_by(f64::total_cmp);
            let (a, b) = self.endpoints(e);
            let mut current = kept[a].unwrap_or_else(|| graph.add_node(()));
            for _ in cut.iter() {
                let end = graph.add_node(());
                graph.add_edge(current, end, ());
                current = graph.add_node(());
            }
            let last = kept[b].unwrap_or_else(|| graph.add_node(()));
            graph.add_edge(current, last, ());
        }
        Ok(PuncturedGraph { graph })
    }

    /// Bounds `χ(R) + Σ val ≤ c(R ∖ points) ≤ c(R) + Σ val`, with equality on the right for forests.
    pub fn component_bounds_check(&self, points: &[GraphPoint]) -> Result<ComponentBounds> {
        let total_val: i64 = points.iter().map(|x| self.valence(x)).sum::<Result<i64>>()?;
        let actual = self.puncture(points)?.components() as i64;
        let bounds = ComponentBounds {
            lower: self.euler_characteristic() + total_val,
            actual,
            upper: self.components() as i64 + total_val,
            is_forest: self.is_forest(),
        };
        if bounds.actual < bounds.lower
            || bounds.actual > bounds.upper
            || (bounds.is_forest && bounds.actual != bounds.upper)
        {
            return Err(Error::Integrity(format!("component bounds violated: {bounds:?}")));
        }
        Ok(bounds)
    }
}

/// Component count as a right-continuous step function: `value(x)` is the value of the last
/// breakpoint at or below `x`, or `initial` before the first one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexitySeries {
    pub abscissa: Abscissa,
    pub budget: f64,
    pub initial: usize,
    pub breakpoints: Vec<(f64, usize)>,
    pub complete: bool,
}

impl ComplexitySeries {
    pub fn value(&self, x: f64) -> usize {
        let i = self.breakpoints.partition_point(|&(a, _)| a <= x);
        if i == 0 {
            self.initial
        } else {
            self.breakpoints[i - 1].1
        }
    }

    fn push(&mut self, at: f64, value: usize) {
        if let Some(last) = self.breakpoints.last_mut() {
            if last.0 == at {
                last.1 = value;
                return;
            }
        }
        if self.breakpoints.last().map_or(self.initial, |l| l.1) != value {
            self.breakpoints.push((at, value));
        }
    }

    /// Writes `abscissa,value`, starting with the value at 0.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "abscissa,value")?;
        writeln!(w, "0,{}", self.initial)?;
        for (a, v) in &self.breakpoints {
            writeln!(w, "{a},{v}")?;
        }
        Ok(())
    }
}

/// Event directions of a flow series, ordered by length: `(length, direction in [0, 2π))`.
fn direction_events(g: &CountingSeries) -> Vec<(f64, f64)> {
    g.records.iter().map(|r| (r.length, r.param().rem_euclid(TAU))).collect()
}

fn is_new_direction(seen: &mut Vec<f64>, theta: f64) -> bool {
    let i = seen.partition_point(|&x| x < theta);
    let close = |j: usize| seen.get(j).is_some_and(|&x| (x - theta).abs() <= DIRECTION_EPS);
    let wraps = seen.first().is_some_and(|&x| x + TAU - theta <= DIRECTION_EPS)
        || seen.last().is_some_and(|&x| theta + TAU - x <= DIRECTION_EPS);
    if close(i) || (i > 0 && close(i - 1)) || wraps {
        return false;
    }
    seen.insert(i, theta);
    true
}

fn flow_series(g: &CountingSeries) -> ComplexitySeries {
    let mut h = ComplexitySeries {
        abscissa: Abscissa::Length,
        budget: g.budget,
        initial: 1,
        breakpoints: Vec::new(),
        complete: g.complete,
    };
    let mut seen = Vec::new();
    for (t, theta) in direction_events(g) {
        is_new_direction(&mut seen, theta);
        h.push(t, seen.len().max(1));
    }
    h
}

/// Position complexity `h_z(l)` for `l ≤ max_length` with the counting series and the beams it
/// was derived from.
pub fn position_complexity_flow_full(
    p: &Polygon,
    z: &Point,
    max_length: f64,
    options: SplitOptions,
) -> Result<(ComplexitySeries, CountingSeries, SplitResult)> {
    let (g, result) = position_counting_flow_beams(p, z, max_length, options)?;
    Ok((flow_series(&g), g, result))
}

/// Position complexity `h_z(l)`: components of the circle of directions at `z` minus the
/// directions of singular orbits of length at most `l`.
pub fn position_complexity_flow(p: &Polygon, z: &Point, max_length: f64, options: SplitOptions) -> Result<ComplexitySeries> {
    Ok(position_complexity_flow_full(p, z, max_length, options)?.0)
}

/// Number of direction classes at the end of a flow splitting, counted on the final beams: the
/// leaves are merged wherever the cut between them is not a singular direction.
pub fn classes_from_leaves(result: &SplitResult) -> usize {
    let l = result.budget.max_length.unwrap_or(f64::INFINITY);
    let mut events: Vec<f64> = Vec::new();
    for r in result.records.iter().filter(|r| r.length <= l) {
        is_new_direction(&mut events, r.param().rem_euclid(TAU));
    }
    let mut starts: Vec<f64> = result.leaves().map(|b| b.interval().0.rem_euclid(TAU)).collect();
    starts.sort_by(f64::total_cmp);
    let near_event = |x: f64| {
        events.iter().any(|&e| {
            let d = (x - e).rem_euclid(TAU);
            d <= 1e-9 || TAU - d <= 1e-9
        })
    };
    let mut cuts: Vec<f64> = Vec::new();
    for s in starts.into_iter().filter(|&s| near_event(s)) {
        if cuts.last().is_none_or(|&c| s - c > 1e-9) {
            cuts.push(s);
        }
    }
    if cuts.len() > 1 && cuts[0] + TAU - cuts[cuts.len() - 1] <= 1e-9 {
        cuts.pop();
    }
    cuts.len().max(1)
}

/// The circle of directions punctured at the given directions, as a cycle graph with one vertex.
pub fn punctured_circle(directions: &[f64]) -> Result<(PuncturedGraph, Vec<GraphPoint>)> {
    let circle = PuncturedGraph::cycle(1)?;
    let mut seen = Vec::new();
    for &d in directions {
        is_new_direction(&mut seen, d.rem_euclid(TAU));
    }
    // The vertex sits at direction 0; other directions are edge points.
    let points = seen
        .iter()
        .map(|&d| {
            if d <= DIRECTION_EPS || TAU - d <= DIRECTION_EPS {
                GraphPoint::Vertex { vertex: 0 }
            } else {
                GraphPoint::Edge { edge: 0, at: d / TAU }
            }
        })
        .collect();
    Ok((circle, points))
}

fn direction_series(g: &CountingSeries, seeds: usize) -> ComplexitySeries {
    let mut f = ComplexitySeries {
        abscissa: Abscissa::Steps,
        budget: g.budget,
        initial: seeds,
        breakpoints: Vec::new(),
        complete: g.complete,
    };
    let mut cuts: Vec<f64> = Vec::new();
    for r in &g.records {
        let u = r.param();
        let i = cuts.partition_point(|&x| x < u);
        let dup = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .any(|j| cuts.get(j).is_some_and(|&x| (x - u).abs() <= DIRECTION_EPS));
        if !dup {
            cuts.insert(i, u);
        }
        f.push(r.steps as f64, seeds + cuts.len());
    }
    f
}

/// Direction complexity `fd_θ(n)` for `n ≤ max_steps` together with `gd_θ`.
pub fn direction_complexity_map_full(
    p: &Polygon,
    theta: f64,
    max_steps: usize,
    options: SplitOptions,
) -> Result<(ComplexitySeries, CountingSeries, SplitResult)> {
    let seeds = direction_seeds(p, theta)?.1.len();
    let (g, result) = direction_counting_map_beams(p, theta, max_steps, options)?;
    Ok((direction_series(&g, seeds), g, result))
}

/// Direction complexity `fd_θ(n)`: components of the inward boundary minus the phase points that
/// become singular within `n` segments.
pub fn direction_complexity_map(p: &Polygon, theta: f64, max_steps: usize, options: SplitOptions) -> Result<ComplexitySeries> {
    Ok(direction_complexity_map_full(p, theta, max_steps, options)?.0)
}

/// Result of comparing a complexity series with a counting series over the same base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    /// Smallest abscissa from which `h - g` stays constant.
    pub threshold: f64,
    /// The constant value of `h - g`.
    pub offset: i64,
    /// Whether the constancy is witnessed by counting events after the threshold (or trivially,
    /// when there are no events at all).
    pub stabilized: bool,
}

/// Finds `l₀` and `h₀` with `h(l) = h₀ + g(l)` for `l₀ ≤ l ≤ budget`.
pub fn bridge_constants(h: &ComplexitySeries, g: &CountingSeries) -> Result<Bridge> {
    if h.abscissa != g.abscissa || (h.budget - g.budget).abs() > 1e-12 * h.budget.abs().max(1.0) {
        return Err(Error::Domain("series are over different budgets".into()));
    }
    let mut xs: Vec<f64> = std::iter::once(0.0)
        .chain(h.breakpoints.iter().map(|b| b.0))
        .chain(g.events())
        .filter(|&x| x <= h.budget)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let diff = |x: f64| h.value(x) as i64 - g.count(x) as i64;
    let mut threshold = xs[0];
    let mut offset = diff(threshold);
    for &x in &xs[1..] {
        let d = diff(x);
        if d != offset {
            threshold = x;
            offset = d;
        }
    }
    let stabilized = if g.is_empty() { h.breakpoints.is_empty() } else { g.events().any(|x| x > threshold) };
    Ok(Bridge { threshold, offset, stabilized })
}
