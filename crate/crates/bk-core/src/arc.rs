//! Cup, cap, circle and oriented circle diagrams.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blocks::{block_of, Block, Weight, WeightSym};
use crate::error::{BkError, Result};
use crate::planar::{ArcKind, Component, Diagram};

/// A crossingless collection of cups and rays below the weight line, with one
/// arc endpoint at every `*` of the block.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct CupDiagram {
    block: Block,
    cups: Vec<(i64, i64)>,
    rays: Vec<i64>,
}

impl CupDiagram {
    pub fn new(block: Block, mut cups: Vec<(i64, i64)>, mut rays: Vec<i64>) -> Result<Self> {
        for c in cups.iter_mut() {
            if c.0 > c.1 {
                *c = (c.1, c.0);
            }
        }
        cups.sort();
        rays.sort();
        let d = CupDiagram { block, cups, rays };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let mut endpoints: Vec<i64> = self
            .cups
            .iter()
            .flat_map(|&(i, j)| [i, j])
            .chain(self.rays.iter().copied())
            .collect();
        endpoints.sort();
        let stars = self.block.star_positions();
        if endpoints != stars {
            return Err(BkError::InvalidDiagram(format!(
                "arc endpoints {endpoints:?} do not match the stars {stars:?} of block {}",
                self.block
            )));
        }
        for (a, &(i, j)) in self.cups.iter().enumerate() {
            for &(k, l) in &self.cups[a + 1..] {
                let crossing = (i < k && k < j && j < l) || (k < i && i < l && l < j);
                if crossing {
                    return Err(BkError::InvalidDiagram(format!(
                        "cups ({i},{j}) and ({k},{l}) cross"
                    )));
                }
            }
            for &r in &self.rays {
                if i < r && r < j {
                    return Err(BkError::InvalidDiagram(format!(
                        "ray at {r} crosses cup ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn cups(&self) -> &[(i64, i64)] {
        &self.cups
    }

    pub fn rays(&self) -> &[i64] {
        &self.rays
    }

    pub fn reflect(&self) -> CapDiagram {
        CapDiagram(self.clone())
    }

    pub fn ascii_rows(&self) -> Vec<String> {
        arc_rows(&self.block, &self.cups, &self.rays)
    }
}

/// A cap diagram, stored as the reflection of a cup diagram.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct CapDiagram(CupDiagram);

impl CapDiagram {
    pub fn reflect(&self) -> CupDiagram {
        self.0.clone()
    }

    pub fn block(&self) -> &Block {
        self.0.block()
    }

    pub fn caps(&self) -> &[(i64, i64)] {
        self.0.cups()
    }

    pub fn rays(&self) -> &[i64] {
        self.0.rays()
    }

    pub fn ascii_rows(&self) -> Vec<String> {
        let mut rows = arc_rows(self.block(), self.caps(), self.rays());
        rows.reverse();
        rows
    }
}

fn arc_rows(block: &Block, arcs: &[(i64, i64)], rays: &[i64]) -> Vec<String> {
    let (start, end) = block.support();
    let width = (end - start).max(0) as usize;
    if width == 0 {
        return Vec::new();
    }
    let depth_of = |&(i, j): &(i64, i64)| arcs.iter().filter(|&&(a, b)| a < i && j < b).count();
    let max_depth = arcs.iter().map(depth_of).max().unwrap_or(0);
    let rows_n = if arcs.is_empty() && rays.is_empty() {
        0
    } else {
        max_depth + 1
    };
    let mut rows = vec![vec![' '; width]; rows_n];
    for arc in arcs {
        let row = max_depth - depth_of(arc);
        rows[row][(arc.0 - start) as usize] = '(';
        rows[row][(arc.1 - start) as usize] = ')';
    }
    for &r in rays {
        for row in rows.iter_mut() {
            row[(r - start) as usize] = '|';
        }
    }
    rows.into_iter().map(|r| r.into_iter().collect()).collect()
}

/// The canonical cup diagram of a weight: repeatedly connect adjacent `v^`
/// pairs (skipping `o`, `x` and matched symbols), then put rays under the
/// leftovers.
pub fn canonical_cup(w: &Weight) -> CupDiagram {
    let block = block_of(w);
    let mut cups = Vec::new();
    let mut rays = Vec::new();
    let mut open_downs: Vec<i64> = Vec::new();
    for (i, s) in w.iter() {
        match s {
            WeightSym::Down => open_downs.push(i),
            WeightSym::Up => {
                if let Some(d) = open_downs.pop() {
                    cups.push((d, i));
                } else {
                    rays.push(i);
                }
            }
            _ => {}
        }
    }
    rays.extend(open_downs);
    CupDiagram::new(block, cups, rays).expect("canonical construction is valid")
}

/// All cup diagrams over a balanced block that consist of cups only, i.e. the
/// canonical cup diagrams of the weights in `Lambda^o`.
pub fn cups_only_diagrams(block: &Block) -> Vec<CupDiagram> {
    block.members(true).iter().map(canonical_cup).collect()
}

/// A cap diagram stacked onto a cup diagram over the same block.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct CircleDiagram {
    bottom: CupDiagram,
    top: CapDiagram,
}

impl CircleDiagram {
    pub fn new(bottom: CupDiagram, top: CapDiagram) -> Result<Self> {
        if bottom.block() != top.block() {
            return Err(BkError::BlockMismatch(format!(
                "cup over {} stacked with cap over {}",
                bottom.block(),
                top.block()
            )));
        }
        Ok(CircleDiagram { bottom, top })
    }

    pub fn block(&self) -> &Block {
        self.bottom.block()
    }

    pub fn bottom(&self) -> &CupDiagram {
        &self.bottom
    }

    pub fn top(&self) -> &CapDiagram {
        &self.top
    }

    pub fn planar(&self) -> Diagram {
        let mut d = Diagram::new(1);
        for &(i, j) in self.bottom.cups() {
            d.push(ArcKind::CupBelow { line: 0, i, j });
        }
        for &i in self.bottom.rays() {
            d.push(ArcKind::RayDown { i });
        }
        for &(i, j) in self.top.caps() {
            d.push(ArcKind::CapAbove { line: 0, i, j });
        }
        for &i in self.top.rays() {
            d.push(ArcKind::RayUp { i });
        }
        d
    }

    /// Components in a deterministic order; circles alternate bottom cups and
    /// top caps, lines contain the rays.
    pub fn components(&self) -> Vec<Component> {
        self.planar()
            .components()
            .expect("validated circle diagram")
    }

    pub fn circle_count(&self) -> usize {
        self.components().iter().filter(|c| c.is_circle).count()
    }

    pub fn line_count(&self) -> usize {
        self.components().iter().filter(|c| !c.is_circle).count()
    }

    /// Nesting forest over the circles, as `(circle index, parent index)`.
    pub fn nesting(&self) -> Vec<Option<usize>> {
        let planar = self.planar();
        let comps = self.components();
        let circles: Vec<&Component> = comps.iter().filter(|c| c.is_circle).collect();
        planar.nesting_parents(&circles)
    }

    /// All orientations: every labeling of the components that satisfies the
    /// orientation conditions, including the ray condition.
    pub fn orientations(&self) -> Vec<OrientedCircleDiagram> {
        let comps = self.components();
        let mut out = Vec::new();
        let n = comps.len();
        for mask in 0u64..(1 << n) {
            let mut nu = Weight::empty();
            for (idx, s) in self.block().iter() {
                if s == crate::blocks::BlockSym::X {
                    nu.set(idx, WeightSym::X);
                }
            }
            for (k, comp) in comps.iter().enumerate() {
                let flip = mask >> k & 1 == 1;
                for (v, &up) in comp.vertices.iter().zip(&comp.upward) {
                    let sym = if up != flip { WeightSym::Up } else { WeightSym::Down };
                    nu.set(v.0, sym);
                }
            }
            if let Ok(o) = OrientedCircleDiagram::new(self.clone(), nu) {
                out.push(o);
            }
        }
        out.sort_by(|a, b| a.orientation.cmp(&b.orientation));
        out.dedup();
        out
    }
}

/// Circle orientation state: anticlockwise iff the rightmost vertex of the
/// circle is labeled `^`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum CircleState {
    Anticlockwise,
    Clockwise,
}

/// A circle diagram together with an orienting middle weight.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct OrientedCircleDiagram {
    shape: CircleDiagram,
    orientation: Weight,
}

impl PartialOrd for OrientedCircleDiagram {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrientedCircleDiagram {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.shape.bottom(), self.shape.top(), &self.orientation).cmp(&(
            other.shape.bottom(),
            other.shape.top(),
            &other.orientation,
        ))
    }
}

impl OrientedCircleDiagram {
    pub fn new(shape: CircleDiagram, orientation: Weight) -> Result<Self> {
        check_oriented(&shape, &orientation)?;
        Ok(OrientedCircleDiagram { shape, orientation })
    }

    pub fn shape(&self) -> &CircleDiagram {
        &self.shape
    }

    pub fn orientation(&self) -> &Weight {
        &self.orientation
    }

    pub fn block(&self) -> &Block {
        self.shape.block()
    }

    /// Degree: number of clockwise cups plus clockwise caps. An arc is
    /// clockwise when its rightmost endpoint is labeled `v`.
    pub fn degree(&self) -> u32 {
        let clockwise = |&(_, j): &(i64, i64)| self.orientation.get(j) == WeightSym::Down;
        let cups = self.shape.bottom().cups().iter().filter(|a| clockwise(a)).count();
        let caps = self.shape.top().caps().iter().filter(|a| clockwise(a)).count();
        (cups + caps) as u32
    }

    /// States of the circles, in the order `components()` lists them
    /// (line components yield `None`).
    pub fn circle_states(&self) -> Vec<Option<CircleState>> {
        self.shape
            .components()
            .iter()
            .map(|c| {
                if !c.is_circle {
                    return None;
                }
                let t = c.vertices[c.rightmost()];
                Some(if self.orientation.get(t.0) == WeightSym::Up {
                    CircleState::Anticlockwise
                } else {
                    CircleState::Clockwise
                })
            })
            .collect()
    }

    pub fn ascii_rows(&self) -> Vec<String> {
        let mut rows = self.shape.top().ascii_rows();
        rows.push(self.orientation_row());
        rows.extend(self.shape.bottom().ascii_rows());
        rows
    }

    fn orientation_row(&self) -> String {
        let (start, end) = self.shape.block().support();
        (start..end)
            .map(|i| self.orientation.get(i).to_char())
            .collect()
    }
}

impl fmt::Display for OrientedCircleDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cups{:?} {} caps{:?}",
            self.shape.bottom().cups(),
            self.orientation.ascii(),
            self.shape.top().caps()
        )
    }
}

fn check_oriented(shape: &CircleDiagram, nu: &Weight) -> Result<()> {
    let block = shape.block();
    // Arcs carry exactly the v/^ labels and the o/x pattern matches the
    // block. Up/down counts may differ from the block's when the diagram has
    // lines; basis sets restrict them separately.
    let (ws, we) = nu.support();
    let (bs, be) = block.support();
    for i in ws.min(bs)..we.max(be) {
        let ok = match block.get(i) {
            crate::blocks::BlockSym::Star => {
                matches!(nu.get(i), WeightSym::Down | WeightSym::Up)
            }
            crate::blocks::BlockSym::X => nu.get(i) == WeightSym::X,
            crate::blocks::BlockSym::O => nu.get(i) == WeightSym::O,
        };
        if !ok {
            return Err(BkError::BlockMismatch(format!(
                "weight {nu} does not label the vertices of block {block}"
            )));
        }
    }
    let one_each = |&(i, j): &(i64, i64)| {
        let (a, b) = (nu.get(i), nu.get(j));
        (a == WeightSym::Up && b == WeightSym::Down) || (a == WeightSym::Down && b == WeightSym::Up)
    };
    for c in shape.bottom().cups() {
        if !one_each(c) {
            return Err(BkError::InvalidDiagram(format!(
                "cup {c:?} is not oriented by {nu}"
            )));
        }
    }
    for c in shape.top().caps() {
        if !one_each(c) {
            return Err(BkError::InvalidDiagram(format!(
                "cap {c:?} is not oriented by {nu}"
            )));
        }
    }
    ray_condition(shape.bottom().rays(), nu)?;
    ray_condition(shape.top().rays(), nu)?;
    Ok(())
}

/// The ray condition: it must not be possible to find `i < j` with `nu_i = v`
/// and `nu_j = ^`, both on rays (of the same cup or cap diagram).
fn ray_condition(rays: &[i64], nu: &Weight) -> Result<()> {
    let mut seen_down = false;
    for &r in rays {
        match nu.get(r) {
            WeightSym::Down => seen_down = true,
            WeightSym::Up if seen_down => {
                return Err(BkError::InvalidDiagram(
                    "a v-ray lies left of a ^-ray".into(),
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::Weight;

    fn w(s: &str) -> Weight {
        Weight::parse(0, s).unwrap()
    }

    #[test]
    fn canonical_cup_examples() {
        let c = canonical_cup(&w("v^"));
        assert_eq!(c.cups(), &[(0, 1)]);
        assert!(c.rays().is_empty());

        let c = canonical_cup(&w("vv^^"));
        assert_eq!(c.cups(), &[(0, 3), (1, 2)]);
        assert!(c.rays().is_empty());

        let c = canonical_cup(&w("^v"));
        assert!(c.cups().is_empty());
        assert_eq!(c.rays(), &[0, 1]);
    }

    #[test]
    fn reflect_is_involution() {
        for s in ["v^", "vv^^", "^v", "v^xv^"] {
            let c = canonical_cup(&w(s));
            assert_eq!(c.reflect().reflect(), c);
        }
    }

    #[test]
    fn stack_examples() {
        let c = canonical_cup(&w("v^"));
        let d = CircleDiagram::new(c.clone(), c.reflect()).unwrap();
        assert_eq!((d.circle_count(), d.line_count()), (1, 0));

        let c = canonical_cup(&w("vv^^"));
        let d = CircleDiagram::new(c.clone(), c.reflect()).unwrap();
        assert_eq!((d.circle_count(), d.line_count()), (2, 0));
        let nesting = d.nesting();
        assert_eq!(nesting.iter().filter(|p| p.is_some()).count(), 1);

        let c = canonical_cup(&w("^v"));
        let d = CircleDiagram::new(c.clone(), c.reflect()).unwrap();
        assert_eq!((d.circle_count(), d.line_count()), (0, 2));
    }

    #[test]
    fn orientation_counts() {
        let one = CircleDiagram::new(canonical_cup(&w("v^")), canonical_cup(&w("v^")).reflect())
            .unwrap();
        assert_eq!(one.orientations().len(), 2);

        let two = CircleDiagram::new(canonical_cup(&w("vv^^")), canonical_cup(&w("vv^^")).reflect())
            .unwrap();
        assert_eq!(two.orientations().len(), 4);

        // Two lines: the labeling v then ^ (left to right) is forbidden by
        // the ray condition on both the cup and the cap side.
        let rays = CircleDiagram::new(canonical_cup(&w("^v")), canonical_cup(&w("^v")).reflect())
            .unwrap();
        assert_eq!(rays.orientations().len(), 3);
    }

    #[test]
    fn degree_examples() {
        let shape =
            CircleDiagram::new(canonical_cup(&w("v^")), canonical_cup(&w("v^")).reflect()).unwrap();
        let mut degs: Vec<u32> = shape.orientations().iter().map(|o| o.degree()).collect();
        degs.sort();
        assert_eq!(degs, vec![0, 2]);

        let nested =
            CircleDiagram::new(canonical_cup(&w("vv^^")), canonical_cup(&w("vv^^")).reflect())
                .unwrap();
        let all_acw = nested
            .orientations()
            .into_iter()
            .find(|o| {
                o.circle_states()
                    .iter()
                    .all(|s| *s == Some(CircleState::Anticlockwise))
            })
            .unwrap();
        assert_eq!(all_acw.degree(), 0);
    }

    #[test]
    fn degree_matches_cups_plus_minus_one_per_circle() {
        // deg = sum over circles of (#cups in the circle) +/- 1.
        for b in crate::blocks::balanced_blocks_up_to(6, 0) {
            for lam in b.members(true) {
                for mu in b.members(true) {
                    let shape = CircleDiagram::new(
                        canonical_cup(&lam),
                        canonical_cup(&mu).reflect(),
                    )
                    .unwrap();
                    let comps = shape.components();
                    let planar = shape.planar();
                    for o in shape.orientations() {
                        let states = o.circle_states();
                        let mut expected = 0i64;
                        for (c, st) in comps.iter().zip(&states) {
                            let cups = c
                                .arcs
                                .iter()
                                .filter(|&&a| {
                                    matches!(planar.arcs[a], ArcKind::CupBelow { .. })
                                })
                                .count() as i64;
                            expected += match st.unwrap() {
                                CircleState::Clockwise => cups + 1,
                                CircleState::Anticlockwise => cups - 1,
                            };
                        }
                        assert_eq!(o.degree() as i64, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_orientation_is_minimal() {
        for b in crate::blocks::balanced_blocks_up_to(6, 1) {
            for lam in b.members(false) {
                let cup = canonical_cup(&lam);
                // deg of the cup part alone: clockwise cups under lambda.
                let deg = |nu: &Weight| {
                    cup.cups()
                        .iter()
                        .filter(|&&(_, j)| nu.get(j) == WeightSym::Down)
                        .count()
                };
                assert_eq!(deg(&lam), 0, "canonical orientation of {lam} has degree 0");
            }
        }
    }

    #[test]
    fn circle_distance_is_two_mod_four() {
        for b in crate::blocks::balanced_blocks_up_to(6, 2) {
            for lam in b.members(true) {
                for mu in b.members(true) {
                    let shape = CircleDiagram::new(
                        canonical_cup(&lam),
                        canonical_cup(&mu).reflect(),
                    )
                    .unwrap();
                    let planar = shape.planar();
                    for c in shape.components() {
                        let d: u64 = c
                            .arcs
                            .iter()
                            .map(|&a| match planar.arcs[a] {
                                ArcKind::CupBelow { i, j, .. } | ArcKind::CapAbove { i, j, .. } => {
                                    b.distance(i, j)
                                }
                                _ => 0,
                            })
                            .sum();
                        assert_eq!(d % 4, 2, "circle distance in block {}", b.ascii());
                    }
                }
            }
        }
    }

    #[test]
    fn nesting_matches_brute_force_point_test() {
        for b in crate::blocks::balanced_blocks_up_to(6, 1) {
            for lam in b.members(true) {
                for mu in b.members(true) {
                    let shape = CircleDiagram::new(
                        canonical_cup(&lam),
                        canonical_cup(&mu).reflect(),
                    )
                    .unwrap();
                    let planar = shape.planar();
                    let comps = shape.components();
                    let circles: Vec<_> = comps.iter().filter(|c| c.is_circle).collect();
                    let parents = planar.nesting_parents(&circles);
                    // Antisymmetry and consistency with pairwise containment.
                    for (k, c) in circles.iter().enumerate() {
                        for (m, d) in circles.iter().enumerate() {
                            if k == m {
                                continue;
                            }
                            let kin = planar.circle_contains(d, c);
                            let min = planar.circle_contains(c, d);
                            assert!(!(kin && min), "containment must be antisymmetric");
                            if parents[k] == Some(m) {
                                assert!(kin);
                            }
                        }
                    }
                }
            }
        }
    }
}
