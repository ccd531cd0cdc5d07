//! Planar arc-diagram engine shared by circle diagrams, stacked surgery
//! diagrams and stretched bimodule diagrams.
//!
//! A diagram has weight lines `0..lines` (bottom to top). Vertices are pairs
//! `(position, line)`. Every vertex is the endpoint of exactly one arc
//! approaching from below and one from above; components are traced by
//! alternating sides. Nesting and containment are decided on an exact
//! rectilinear embedding (all coordinates integers, no two distinct segments
//! overlap), so the nesting forest is a genuine point-in-region computation.

use std::collections::BTreeMap;

use crate::error::{BkError, Result};

pub type Vertex = (i64, usize);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ArcKind {
    /// Arc below `line` connecting `(i, line)` and `(j, line)`, `i < j`.
    CupBelow { line: usize, i: i64, j: i64 },
    /// Arc above `line` connecting `(i, line)` and `(j, line)`, `i < j`.
    CapAbove { line: usize, i: i64, j: i64 },
    /// Segment from `(i, line)` up to `(j, line + 1)`, `|i - j| <= 1`.
    Cross { line: usize, i: i64, j: i64 },
    /// Ray from `(i, 0)` to the lower boundary.
    RayDown { i: i64 },
    /// Ray from `(i, top)` to the upper boundary.
    RayUp { i: i64 },
}

impl ArcKind {
    fn endpoints(&self, top: usize) -> Vec<Vertex> {
        match *self {
            ArcKind::CupBelow { line, i, j } | ArcKind::CapAbove { line, i, j } => {
                vec![(i, line), (j, line)]
            }
            ArcKind::Cross { line, i, j } => vec![(i, line), (j, line + 1)],
            ArcKind::RayDown { i } => vec![(i, 0)],
            ArcKind::RayUp { i } => vec![(i, top)],
        }
    }

    /// Does this arc approach vertex `v` from below the line of `v`?
    fn from_below_at(&self, v: Vertex) -> bool {
        match *self {
            ArcKind::CupBelow { .. } => true,
            ArcKind::CapAbove { .. } => false,
            ArcKind::Cross { line, .. } => v.1 == line + 1,
            ArcKind::RayDown { .. } => true,
            ArcKind::RayUp { .. } => false,
        }
    }

    fn other_endpoint(&self, v: Vertex, top: usize) -> Option<Vertex> {
        let eps = self.endpoints(top);
        if eps.len() < 2 {
            return None;
        }
        if eps[0] == v {
            Some(eps[1])
        } else {
            Some(eps[0])
        }
    }

    pub fn is_ray(&self) -> bool {
        matches!(self, ArcKind::RayDown { .. } | ArcKind::RayUp { .. })
    }
}

/// A traced component. For circles, `vertices[k]` is joined to
/// `vertices[k + 1]` (cyclically) by `arcs[k]`. For lines the traversal runs
/// from one ray to the other and `arcs` has one more entry than `vertices`.
#[derive(Clone, Debug)]
pub struct Component {
    pub arcs: Vec<usize>,
    pub vertices: Vec<Vertex>,
    /// Per vertex of the stored traversal: does the walk cross the weight
    /// line upward there?
    pub upward: Vec<bool>,
    pub is_circle: bool,
}

impl Component {
    /// Index of the rightmost vertex: maximal position, ties broken by the
    /// higher line. Any tie choice differs by an even distance, so sign
    /// consumers are agnostic.
    pub fn rightmost(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.vertices.iter().enumerate() {
            if *v > self.vertices[best] {
                best = k;
            }
        }
        best
    }

    pub fn contains_vertex(&self, v: Vertex) -> bool {
        self.vertices.contains(&v)
    }

    pub fn vertex_index(&self, v: Vertex) -> Option<usize> {
        self.vertices.iter().position(|u| *u == v)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Diagram {
    pub lines: usize,
    pub arcs: Vec<ArcKind>,
}

impl Diagram {
    pub fn new(lines: usize) -> Self {
        assert!(lines >= 1);
        Diagram {
            lines,
            arcs: Vec::new(),
        }
    }

    fn top(&self) -> usize {
        self.lines - 1
    }

    pub fn push(&mut self, arc: ArcKind) {
        self.arcs.push(arc);
    }

    /// Incidence map: vertex -> (arc from below, arc from above).
    fn incidence(&self) -> Result<BTreeMap<Vertex, (usize, usize)>> {
        let mut below: BTreeMap<Vertex, usize> = BTreeMap::new();
        let mut above: BTreeMap<Vertex, usize> = BTreeMap::new();
        for (id, arc) in self.arcs.iter().enumerate() {
            for v in arc.endpoints(self.top()) {
                let slot = if arc.from_below_at(v) { &mut below } else { &mut above };
                if slot.insert(v, id).is_some() {
                    return Err(BkError::InvalidDiagram(format!(
                        "vertex {v:?} has two arcs on the same side"
                    )));
                }
            }
        }
        if below.len() != above.len() || below.keys().ne(above.keys()) {
            return Err(BkError::InvalidDiagram(
                "every vertex needs one arc from below and one from above".into(),
            ));
        }
        Ok(below
            .into_iter()
            .map(|(v, b)| (v, (b, above[&v])))
            .collect())
    }

    /// Trace all components.
    pub fn components(&self) -> Result<Vec<Component>> {
        let inc = self.incidence()?;
        let top = self.top();
        let mut used = vec![false; self.arcs.len()];
        let mut out = Vec::new();

        // Open components first, starting at a downward or upward ray.
        for (start, arc) in self.arcs.iter().enumerate() {
            if used[start] || !arc.is_ray() {
                continue;
            }
            used[start] = true;
            let mut arcs = vec![start];
            let mut vertices = Vec::new();
            let mut upward = Vec::new();
            let mut cur = arc.endpoints(top)[0];
            let mut via = start;
            loop {
                vertices.push(cur);
                upward.push(self.arcs[via].from_below_at(cur));
                let (b, a) = inc[&cur];
                let next = if via == b { a } else { b };
                used[next] = true;
                arcs.push(next);
                match self.arcs[next].other_endpoint(cur, top) {
                    Some(v) => {
                        cur = v;
                        via = next;
                    }
                    None => break,
                }
            }
            out.push(Component {
                arcs,
                vertices,
                upward,
                is_circle: false,
            });
        }

        // Remaining components are circles.
        for start in 0..self.arcs.len() {
            if used[start] {
                continue;
            }
            used[start] = true;
            let first = self.arcs[start].endpoints(top)[0];
            let mut arcs = Vec::new();
            let mut vertices = Vec::new();
            let mut upward = Vec::new();
            let mut cur = first;
            let mut via = start;
            loop {
                // The incoming arc `via` determines the crossing direction.
                vertices.push(cur);
                upward.push(self.arcs[via].from_below_at(cur));
                let (b, a) = inc[&cur];
                let next = if via == b { a } else { b };
                arcs.push(next);
                used[next] = true;
                cur = self.arcs[next]
                    .other_endpoint(cur, top)
                    .ok_or_else(|| BkError::InvalidDiagram("ray inside a closed walk".into()))?;
                via = next;
                if cur == first && via == start {
                    break;
                }
                if vertices.len() > self.arcs.len() + 1 {
                    return Err(BkError::Invariant("component trace did not close".into()));
                }
            }
            // By construction arcs[k] joins vertices[k] to vertices[k + 1].
            out.push(Component {
                arcs,
                vertices,
                upward,
                is_circle: true,
            });
        }
        Ok(out)
    }

    /// Sum of a distance metric over a path of arcs along a circle, walking
    /// forward from vertex index `from` to vertex index `to`.
    pub fn path_distance<F>(&self, comp: &Component, from: usize, to: usize, dist: &F) -> u64
    where
        F: Fn(&ArcKind) -> u64,
    {
        assert!(comp.is_circle);
        let n = comp.vertices.len();
        let mut d = 0;
        let mut k = from;
        while k != to {
            d += dist(&self.arcs[comp.arcs[k]]);
            k = (k + 1) % n;
        }
        d
    }

    /// Exact rectilinear embedding of one component, as vertical segments
    /// `(x, ylo, yhi)` and horizontal segments `(y, xlo, xhi)`. Coordinates
    /// are doubled so that midpoints stay integral.
    pub fn geometry(&self, comp: &Component) -> Polygon {
        let depths = self.depths();
        let mut poly = Polygon::default();
        for &aid in &comp.arcs {
            let arc = self.arcs[aid];
            let d = *depths.get(&aid).unwrap_or(&0);
            self.arc_segments(arc, d, &mut poly);
        }
        poly
    }

    /// Geometry of a set of arcs (used for open paths such as phantom edges).
    pub fn arc_geometry(&self, aid: usize) -> Polygon {
        let depths = self.depths();
        let mut poly = Polygon::default();
        self.arc_segments(self.arcs[aid], *depths.get(&aid).unwrap_or(&0), &mut poly);
        poly
    }

    fn arc_segments(&self, arc: ArcKind, depth: i64, poly: &mut Polygon) {
        // Depth K - d so that arcs containing others reach further out.
        const K: i64 = 32;
        assert!(depth < K, "nesting depth out of range");
        let reach = 20 + 2 * (K - depth);
        match arc {
            ArcKind::CupBelow { line, i, j } => {
                let y0 = 200 * line as i64;
                let yb = y0 - reach;
                poly.vertical(2 * i, yb, y0);
                poly.vertical(2 * j, yb, y0);
                poly.horizontal(yb, 2 * i, 2 * j);
            }
            ArcKind::CapAbove { line, i, j } => {
                let y0 = 200 * line as i64;
                let yt = y0 + reach;
                poly.vertical(2 * i, y0, yt);
                poly.vertical(2 * j, y0, yt);
                poly.horizontal(yt, 2 * i, 2 * j);
            }
            ArcKind::Cross { line, i, j } => {
                let y0 = 200 * line as i64;
                if i == j {
                    poly.vertical(2 * i, y0, y0 + 200);
                } else {
                    poly.vertical(2 * i, y0, y0 + 100);
                    poly.vertical(2 * j, y0 + 100, y0 + 200);
                    poly.horizontal(y0 + 100, 2 * i.min(j), 2 * i.max(j));
                }
            }
            ArcKind::RayDown { i } => poly.vertical(2 * i, -100, 0),
            ArcKind::RayUp { i } => {
                let y0 = 200 * self.top() as i64;
                poly.vertical(2 * i, y0, y0 + 100);
            }
        }
    }

    /// Containment depth of each cup/cap arc among arcs on the same side of
    /// the same line.
    fn depths(&self) -> BTreeMap<usize, i64> {
        let mut groups: BTreeMap<(bool, usize), Vec<(usize, i64, i64)>> = BTreeMap::new();
        for (id, arc) in self.arcs.iter().enumerate() {
            match *arc {
                ArcKind::CupBelow { line, i, j } => {
                    groups.entry((false, line)).or_default().push((id, i, j))
                }
                ArcKind::CapAbove { line, i, j } => {
                    groups.entry((true, line)).or_default().push((id, i, j))
                }
                _ => {}
            }
        }
        let mut out = BTreeMap::new();
        for group in groups.values() {
            for &(id, i, j) in group {
                let d = group
                    .iter()
                    .filter(|&&(_, a, b)| a < i && j < b)
                    .count() as i64;
                out.insert(id, d);
            }
        }
        out
    }

    /// Circle containment: is `inner` strictly inside `outer`?
    pub fn circle_contains(&self, outer: &Component, inner: &Component) -> bool {
        assert!(outer.is_circle);
        let outer_poly = self.geometry(outer);
        let inner_poly = self.geometry(inner);
        let p = inner_poly.point_on();
        outer_poly.contains(p)
    }

    /// Nesting forest over the given circles: `parent[k]` is the index of the
    /// smallest circle strictly containing circle `k`, if any.
    pub fn nesting_parents(&self, circles: &[&Component]) -> Vec<Option<usize>> {
        let polys: Vec<Polygon> = circles.iter().map(|c| self.geometry(c)).collect();
        let pts: Vec<(i64, i64)> = polys.iter().map(|p| p.point_on()).collect();
        let mut parents = vec![None; circles.len()];
        for k in 0..circles.len() {
            let mut best: Option<usize> = None;
            for m in 0..circles.len() {
                if m == k || !polys[m].contains(pts[k]) {
                    continue;
                }
                best = match best {
                    None => Some(m),
                    // The smallest containing circle is itself inside every
                    // other container.
                    Some(b) => {
                        if polys[b].contains(pts[m]) {
                            Some(m)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            parents[k] = best;
        }
        parents
    }
}

/// Rectilinear curve as segment soup; crossings with horizontal rays decide
/// interior membership (half-open spans make corner hits unambiguous).
#[derive(Clone, Debug, Default)]
pub struct Polygon {
    pub verticals: Vec<(i64, i64, i64)>,
    pub horizontals: Vec<(i64, i64, i64)>,
}

impl Polygon {
    fn vertical(&mut self, x: i64, ylo: i64, yhi: i64) {
        debug_assert!(ylo < yhi);
        self.verticals.push((x, ylo, yhi));
    }

    fn horizontal(&mut self, y: i64, xlo: i64, xhi: i64) {
        debug_assert!(xlo < xhi);
        self.horizontals.push((y, xlo, xhi));
    }

    /// A point on the curve that is never on any other disjoint curve: the
    /// midpoint of a horizontal segment (odd x whenever the span is odd, but
    /// distinct same-level horizontals never overlap, so any midpoint works).
    pub fn point_on(&self) -> (i64, i64) {
        if let Some(&(y, xlo, xhi)) = self.horizontals.first() {
            ((xlo + xhi) / 2, y)
        } else {
            let &(x, ylo, yhi) = self
                .verticals
                .first()
                .expect("component has at least one segment");
            (x, (ylo + yhi) / 2)
        }
    }

    /// Parity of crossings of the ray from `p` in +x direction with the
    /// vertical segments, spans taken half-open `[ylo, yhi)`.
    pub fn contains(&self, p: (i64, i64)) -> bool {
        let (px, py) = p;
        let mut crossings = 0usize;
        for &(x, ylo, yhi) in &self.verticals {
            if x > px && ylo <= py && py < yhi {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_circle() {
        let mut d = Diagram::new(1);
        d.push(ArcKind::CupBelow { line: 0, i: 0, j: 1 });
        d.push(ArcKind::CapAbove { line: 0, i: 0, j: 1 });
        let comps = d.components().unwrap();
        assert_eq!(comps.len(), 1);
        assert!(comps[0].is_circle);
        assert_eq!(comps[0].vertices.len(), 2);
    }

    #[test]
    fn nested_circles_containment() {
        let mut d = Diagram::new(1);
        d.push(ArcKind::CupBelow { line: 0, i: 0, j: 3 });
        d.push(ArcKind::CupBelow { line: 0, i: 1, j: 2 });
        d.push(ArcKind::CapAbove { line: 0, i: 0, j: 3 });
        d.push(ArcKind::CapAbove { line: 0, i: 1, j: 2 });
        let comps = d.components().unwrap();
        assert_eq!(comps.len(), 2);
        let refs: Vec<&Component> = comps.iter().collect();
        let parents = d.nesting_parents(&refs);
        let inner = comps
            .iter()
            .position(|c| c.contains_vertex((1, 0)))
            .unwrap();
        let outer = 1 - inner;
        assert_eq!(parents[inner], Some(outer));
        assert_eq!(parents[outer], None);
    }

    #[test]
    fn side_by_side_not_nested() {
        let mut d = Diagram::new(1);
        d.push(ArcKind::CupBelow { line: 0, i: 0, j: 1 });
        d.push(ArcKind::CupBelow { line: 0, i: 2, j: 3 });
        d.push(ArcKind::CapAbove { line: 0, i: 0, j: 1 });
        d.push(ArcKind::CapAbove { line: 0, i: 2, j: 3 });
        let comps = d.components().unwrap();
        let refs: Vec<&Component> = comps.iter().collect();
        assert_eq!(d.nesting_parents(&refs), vec![None, None]);
    }

    #[test]
    fn lines_with_rays() {
        let mut d = Diagram::new(1);
        d.push(ArcKind::RayDown { i: 0 });
        d.push(ArcKind::RayDown { i: 1 });
        d.push(ArcKind::RayUp { i: 0 });
        d.push(ArcKind::RayUp { i: 1 });
        let comps = d.components().unwrap();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| !c.is_circle));
    }

    #[test]
    fn two_line_stack_merges_through_verticals() {
        // Lower circle diagram joined to the upper one by two verticals.
        let mut d = Diagram::new(2);
        d.push(ArcKind::CupBelow { line: 0, i: 0, j: 1 });
        d.push(ArcKind::Cross { line: 0, i: 0, j: 0 });
        d.push(ArcKind::Cross { line: 0, i: 1, j: 1 });
        d.push(ArcKind::CapAbove { line: 1, i: 0, j: 1 });
        let comps = d.components().unwrap();
        assert_eq!(comps.len(), 1);
        assert!(comps[0].is_circle);
        assert_eq!(comps[0].vertices.len(), 4);
    }
}
