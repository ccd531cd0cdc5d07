//! The combinatorial web side: label vectors, slice-word webs generated by
//! F-moves, stacked webs with geometric internal-phantom-edge counts, and the
//! foam degree formulas used as cross-checks for the algebra's signs.
//!
//! A web is stored as a slice word: a base label vector and a list of moves,
//! one per horizontal band. The induced planar graph is rectilinear (ordinary
//! and phantom edges are axis-aligned polylines with one rung per band), so
//! enclosure questions reduce to exact integer ray casting.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arc::CupDiagram;
use crate::blocks::{Block, BlockSym};
use crate::error::{BkError, Result};
use crate::poly::LaurentPoly;

/// A finitely supported vector of labels in `{0, 1, 2}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct LabelVector {
    start: i64,
    entries: Vec<u8>,
}

impl LabelVector {
    pub fn new(start: i64, entries: Vec<u8>) -> Result<Self> {
        if entries.iter().any(|e| *e > 2) {
            return Err(BkError::Parse("label entries must be 0, 1 or 2".into()));
        }
        let mut v = LabelVector { start, entries };
        v.normalize();
        Ok(v)
    }

    fn normalize(&mut self) {
        while self.entries.first() == Some(&0) {
            self.entries.remove(0);
            self.start += 1;
        }
        while self.entries.last() == Some(&0) {
            self.entries.pop();
        }
        if self.entries.is_empty() {
            self.start = 0;
        }
    }

    pub fn get(&self, i: i64) -> u8 {
        if i < self.start || i >= self.start + self.entries.len() as i64 {
            0
        } else {
            self.entries[(i - self.start) as usize]
        }
    }

    pub fn set(&mut self, i: i64, v: u8) {
        assert!(v <= 2);
        if i < self.start {
            let pad = (self.start - i) as usize;
            let mut entries = vec![0; pad];
            entries.extend(self.entries.iter().copied());
            self.entries = entries;
            self.start = i;
        } else if i >= self.start + self.entries.len() as i64 {
            self.entries.resize((i - self.start) as usize + 1, 0);
        }
        self.entries[(i - self.start) as usize] = v;
        self.normalize();
    }

    pub fn support(&self) -> (i64, i64) {
        (self.start, self.start + self.entries.len() as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u8)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.start + k as i64, v))
    }

    pub fn sum(&self) -> u32 {
        self.entries.iter().map(|&v| v as u32).sum()
    }

    /// Balanced label vectors have an even number of entries equal to 1.
    pub fn is_balanced(&self) -> bool {
        self.entries.iter().filter(|&&v| v == 1).count() % 2 == 0
    }

    /// The block with the same sequence under `0 -> o`, `1 -> *`, `2 -> x`.
    pub fn to_block(&self) -> Result<Block> {
        let syms = self
            .entries
            .iter()
            .map(|v| match v {
                0 => BlockSym::O,
                1 => BlockSym::Star,
                _ => BlockSym::X,
            })
            .collect();
        Block::balanced(self.start, syms)
    }

    pub fn from_block(b: &Block) -> Self {
        let entries = b
            .iter()
            .map(|(_, s)| match s {
                BlockSym::O => 0,
                BlockSym::Star => 1,
                BlockSym::X => 2,
            })
            .collect();
        LabelVector {
            start: b.support().0,
            entries,
        }
    }
}

impl Serialize for LabelVector {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            window: [i64; 2],
            entries: &'a [u8],
        }
        let (a, b) = self.support();
        Repr {
            window: [a, b - 1],
            entries: &self.entries,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            window: [i64; 2],
            entries: Vec<u8>,
        }
        let r = Repr::deserialize(de)?;
        LabelVector::new(r.window[0], r.entries).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "(empty)");
        }
        if self.start != 0 {
            write!(f, "[{}]", self.start)?;
        }
        for e in &self.entries {
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// One slice: the move `F_i` (`r = 1`) or `F_i^(2)` (`r = 2`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct SliceMove {
    pub i: i64,
    pub r: u8,
}

/// A web presented as a base vector and a word of F-moves, one per band.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SliceWeb {
    base: LabelVector,
    moves: Vec<SliceMove>,
}

/// Apply a single move to a running vector, if its local picture exists.
pub fn apply_move(v: &LabelVector, m: SliceMove) -> Option<LabelVector> {
    let (a, b) = (v.get(m.i), v.get(m.i + 1));
    match m.r {
        1 => {
            if a >= 1 && b <= 1 {
                let mut w = v.clone();
                w.set(m.i, a - 1);
                w.set(m.i + 1, b + 1);
                Some(w)
            } else {
                None
            }
        }
        2 => {
            if (a, b) == (2, 0) {
                let mut w = v.clone();
                w.set(m.i, 0);
                w.set(m.i + 1, 2);
                Some(w)
            } else {
                None
            }
        }
        _ => None,
    }
}

impl SliceWeb {
    pub fn new(base: LabelVector, moves: Vec<SliceMove>) -> Result<Self> {
        let mut cur = base.clone();
        for (k, m) in moves.iter().enumerate() {
            cur = apply_move(&cur, *m).ok_or_else(|| {
                BkError::InvalidDiagram(format!("move {k} ({m:?}) is illegal for {cur}"))
            })?;
        }
        Ok(SliceWeb { base, moves })
    }

    pub fn base(&self) -> &LabelVector {
        &self.base
    }

    pub fn moves(&self) -> &[SliceMove] {
        &self.moves
    }

    pub fn top(&self) -> LabelVector {
        let mut cur = self.base.clone();
        for m in &self.moves {
            cur = apply_move(&cur, *m).expect("validated on construction");
        }
        cur
    }

    /// Topological reduction onto the top boundary: the cup diagram cut out
    /// by the ordinary strands (glued through the trivalent vertices).
    pub fn reduction(&self, block: &Block) -> Result<CupDiagram> {
        let geo = self.geometry();
        let (circles, strands, _) = glue(geo.ordinary.into_iter().map(|p| (1, p)).collect());
        if !circles.is_empty() {
            return Err(BkError::InvalidDiagram("slice web contains a closed circle".into()));
        }
        let mut cups = Vec::new();
        let mut rays = Vec::new();
        for e in &strands {
            let tops: Vec<i64> = e
                .endpoints()
                .into_iter()
                .filter(|p| p.1 == geo.height)
                .map(|p| p.0 / 2)
                .collect();
            match tops.len() {
                2 => cups.push((tops[0], tops[1])),
                1 => rays.push(tops[0]),
                _ => {
                    return Err(BkError::Invariant(
                        "ordinary strand of a slice web must reach the top boundary".into(),
                    ))
                }
            }
        }
        CupDiagram::new(block.clone(), cups, rays)
    }

    /// Rectilinear geometry: band `t` spans `y in [4t, 4t + 4]` with its rung
    /// at `4t + 2`; x-coordinates are doubled positions.
    pub fn geometry(&self) -> WebGeometry {
        let mut edges: Vec<(u8, Polyline)> = Vec::new();
        let mut active: BTreeMap<i64, usize> = BTreeMap::new();
        for (p, v) in self.base.iter() {
            if v > 0 {
                let id = edges.len();
                edges.push((v, Polyline::start((2 * p, 0))));
                active.insert(p, id);
            }
        }
        let mut cur = self.base.clone();
        for (t, m) in self.moves.iter().enumerate() {
            let y = 4 * t as i64 + 2;
            let (a, b) = (cur.get(m.i), cur.get(m.i + 1));
            let (xi, xj) = (2 * m.i, 2 * (m.i + 1));
            match (m.r, a, b) {
                (1, 1, 0) => {
                    // Ordinary strand slants right, no vertex.
                    let e = active.remove(&m.i).unwrap();
                    edges[e].1.push((xi, y));
                    edges[e].1.push((xj, y));
                    active.insert(m.i + 1, e);
                }
                (1, 2, 0) => {
                    // Split: the phantom ends, two ordinary strands start.
                    let pe = active.remove(&m.i).unwrap();
                    edges[pe].1.push((xi, y));
                    let l = edges.len();
                    edges.push((1, Polyline::start((xi, y))));
                    let r = edges.len();
                    let mut rp = Polyline::start((xi, y));
                    rp.push((xj, y));
                    edges.push((1, rp));
                    active.insert(m.i, l);
                    active.insert(m.i + 1, r);
                }
                (1, 2, 1) => {
                    // Pass: the phantom ends at the left vertex, the strand
                    // steps left through the rung, a new phantom starts at
                    // the right vertex.
                    let pe = active.remove(&m.i).unwrap();
                    edges[pe].1.push((xi, y));
                    let oe = active.remove(&(m.i + 1)).unwrap();
                    edges[oe].1.push((xj, y));
                    edges[oe].1.push((xi, y));
                    active.insert(m.i, oe);
                    let np = edges.len();
                    edges.push((2, Polyline::start((xj, y))));
                    active.insert(m.i + 1, np);
                }
                (1, 1, 1) => {
                    // Merge: both strands end at the right vertex, a phantom
                    // starts there. Never produced by the canonical builder
                    // but legal in hand-written words.
                    let le = active.remove(&m.i).unwrap();
                    edges[le].1.push((xi, y));
                    edges[le].1.push((xj, y));
                    let re = active.remove(&(m.i + 1)).unwrap();
                    edges[re].1.push((xj, y));
                    let np = edges.len();
                    edges.push((2, Polyline::start((xj, y))));
                    active.insert(m.i + 1, np);
                }
                (2, 2, 0) => {
                    // Phantom transport, no vertices.
                    let e = active.remove(&m.i).unwrap();
                    edges[e].1.push((xi, y));
                    edges[e].1.push((xj, y));
                    active.insert(m.i + 1, e);
                }
                _ => unreachable!("validated moves"),
            }
            cur = apply_move(&cur, *m).unwrap();
        }
        let height = 4 * self.moves.len() as i64 + 4;
        for (&p, &e) in &active {
            edges[e].1.push((2 * p, height));
        }
        let mut ordinary = Vec::new();
        let mut phantom = Vec::new();
        for (label, mut poly) in edges {
            poly.simplify();
            if label == 1 {
                ordinary.push(poly);
            } else {
                phantom.push(poly);
            }
        }
        WebGeometry {
            ordinary,
            phantom,
            height,
        }
    }

    /// ASCII rendering: running vectors (`|` ordinary, `:` phantom) and one
    /// annotated rung row per move, top vector first.
    pub fn ascii_rows(&self) -> Vec<String> {
        let (lo, hi0) = self.base.support();
        let mut hi = hi0;
        let mut cur = self.base.clone();
        let mut vecs = vec![cur.clone()];
        for m in &self.moves {
            cur = apply_move(&cur, *m).unwrap();
            hi = hi.max(cur.support().1).max(m.i + 2);
            vecs.push(cur.clone());
        }
        let width = (hi - lo).max(1) as usize;
        let col = |p: i64| (p - lo) as usize;
        let vec_row = |v: &LabelVector| {
            let mut row = vec![' '; width];
            for (p, e) in v.iter() {
                row[col(p)] = match e {
                    1 => '|',
                    2 => ':',
                    _ => ' ',
                };
            }
            row.into_iter().collect::<String>()
        };
        let mut rows = Vec::new();
        for (t, m) in self.moves.iter().enumerate().rev() {
            rows.push(vec_row(&vecs[t + 1]));
            let mut row = vec![' '; width];
            row[col(m.i)] = '+';
            row[col(m.i + 1)] = '+';
            let mut s: String = row.into_iter().collect();
            s.push_str(if m.r == 2 { "  F^2_" } else { "  F_" });
            s.push_str(&m.i.to_string());
            rows.push(s);
        }
        rows.push(vec_row(&vecs[0]));
        rows
    }
}

/// An axis-aligned polyline in doubled coordinates.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Polyline {
    pub points: Vec<(i64, i64)>,
}

impl Polyline {
    fn start(p: (i64, i64)) -> Self {
        Polyline { points: vec![p] }
    }

    fn push(&mut self, p: (i64, i64)) {
        if self.points.last() != Some(&p) {
            self.points.push(p);
        }
    }

    /// Merge consecutive collinear segments.
    fn simplify(&mut self) {
        let mut out: Vec<(i64, i64)> = Vec::with_capacity(self.points.len());
        for &p in &self.points {
            while out.len() >= 2 {
                let a = out[out.len() - 2];
                let b = out[out.len() - 1];
                let collinear = (a.0 == b.0 && b.0 == p.0) || (a.1 == b.1 && b.1 == p.1);
                if collinear {
                    out.pop();
                } else {
                    break;
                }
            }
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        self.points = out;
    }

    pub fn is_closed(&self) -> bool {
        self.points.len() > 2 && self.points.first() == self.points.last()
    }

    /// Rotate a closed polyline so it starts at a corner, then re-simplify;
    /// straight runs across the closure seam would otherwise stay split.
    fn normalize_closed(&mut self) {
        if !self.is_closed() {
            return;
        }
        self.points.pop();
        let n = self.points.len();
        let corner = (0..n).find(|&k| {
            let a = self.points[(k + n - 1) % n];
            let b = self.points[k];
            let c = self.points[(k + 1) % n];
            !((a.0 == b.0 && b.0 == c.0) || (a.1 == b.1 && b.1 == c.1))
        });
        if let Some(k) = corner {
            self.points.rotate_left(k);
        }
        let first = self.points[0];
        self.points.push(first);
        self.simplify();
        if self.points.first() != self.points.last() {
            let f = *self.points.first().unwrap();
            self.points.push(f);
        }
    }

    fn endpoints(&self) -> Vec<(i64, i64)> {
        if self.is_closed() {
            Vec::new()
        } else {
            vec![*self.points.first().unwrap(), *self.points.last().unwrap()]
        }
    }

    fn reversed(&self) -> Polyline {
        let mut points = self.points.clone();
        points.reverse();
        Polyline { points }
    }

    fn translate(&self, dy: i64) -> Polyline {
        Polyline {
            points: self.points.iter().map(|&(x, y)| (x, y + dy)).collect(),
        }
    }

    fn mirror_y(&self, height: i64) -> Polyline {
        Polyline {
            points: self.points.iter().map(|&(x, y)| (x, height - y)).collect(),
        }
    }

    fn segments(&self) -> impl Iterator<Item = ((i64, i64), (i64, i64))> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    fn verticals(&self) -> Vec<(i64, i64, i64)> {
        self.segments()
            .filter(|(a, b)| a.0 == b.0 && a.1 != b.1)
            .map(|(a, b)| (a.0, a.1.min(b.1), a.1.max(b.1)))
            .collect()
    }

    /// Parity ray cast against the verticals, spans half-open `[lo, hi)`.
    pub fn contains(&self, p: (i64, i64)) -> bool {
        let mut c = 0usize;
        for (x, lo, hi) in self.verticals() {
            if x > p.0 && lo <= p.1 && p.1 < hi {
                c += 1;
            }
        }
        c % 2 == 1
    }

    /// An interior point of a vertical segment if one exists, else of a rung.
    fn interior_point(&self) -> (i64, i64) {
        for (a, b) in self.segments() {
            if a.0 == b.0 && (a.1 - b.1).abs() >= 2 {
                return (a.0, (a.1 + b.1) / 2);
            }
        }
        for (a, b) in self.segments() {
            if a.1 == b.1 && (a.0 - b.0).abs() >= 2 {
                return ((a.0 + b.0) / 2, a.1);
            }
        }
        *self.points.first().expect("nonempty polyline")
    }

    /// Midpoint of the first rung: its x is odd while every vertical of the
    /// arrangement sits at even x, so the point lies on no other curve.
    fn rung_point(&self) -> Option<(i64, i64)> {
        self.segments()
            .find(|(a, b)| a.1 == b.1 && (a.0 - b.0).abs() == 2)
            .map(|(a, b)| ((a.0 + b.0) / 2, a.1))
    }

    /// Number of valleys: cup-shaped local minima of a closed curve.
    pub fn valley_count(&self) -> usize {
        if !self.is_closed() {
            return 0;
        }
        let pts = &self.points[..self.points.len() - 1];
        let n = pts.len();
        let mut valleys = 0;
        for k in 0..n {
            let prev = pts[(k + n - 1) % n];
            let cur = pts[k];
            let next = pts[(k + 1) % n];
            if cur.1 == next.1 && prev.1 > cur.1 {
                let after = pts[(k + 2) % n];
                if after.1 > next.1 {
                    valleys += 1;
                }
            }
        }
        valleys
    }
}

/// Assembled geometry of one slice web.
pub struct WebGeometry {
    pub ordinary: Vec<Polyline>,
    pub phantom: Vec<Polyline>,
    pub height: i64,
}

/// A stacked web: layers glued along their shared boundaries.
pub struct StackedWeb {
    pub circles: Vec<Polyline>,
    pub open_ordinary: Vec<Polyline>,
    pub phantom: Vec<Polyline>,
    /// Heights of the layer junctions, bottom to top.
    pub junctions: Vec<i64>,
    pub height: i64,
}

/// Stack layer geometries bottom to top; `reflected` layers are mirrored so
/// that their base boundary faces up.
pub fn stack(layers: &[(&WebGeometry, bool)]) -> StackedWeb {
    let mut polys: Vec<(u8, Polyline)> = Vec::new();
    let mut off = 0i64;
    let mut junctions = Vec::new();
    for (k, (geo, reflected)) in layers.iter().enumerate() {
        for (label, set) in [(1u8, &geo.ordinary), (2u8, &geo.phantom)] {
            for p in set.iter() {
                let placed = if *reflected {
                    p.mirror_y(geo.height).translate(off)
                } else {
                    p.translate(off)
                };
                polys.push((label, placed));
            }
        }
        off += geo.height;
        if k + 1 < layers.len() {
            junctions.push(off);
        }
    }
    let height = off;
    let (circles, open_ordinary, phantom) = glue(polys);
    StackedWeb {
        circles,
        open_ordinary,
        phantom,
        junctions,
        height,
    }
}

/// Glue polylines endpoint-to-endpoint (same label, exactly two ends meeting)
/// and sort the results into closed circles, open ordinary strands and
/// phantom edges.
fn glue(polys: Vec<(u8, Polyline)>) -> (Vec<Polyline>, Vec<Polyline>, Vec<Polyline>) {
    let mut items: Vec<Option<(u8, Polyline)>> = polys.into_iter().map(Some).collect();
    loop {
        let mut ends: HashMap<(u8, (i64, i64)), Vec<usize>> = HashMap::new();
        for (k, item) in items.iter().enumerate() {
            if let Some((label, poly)) = item {
                for e in poly.endpoints() {
                    ends.entry((*label, e)).or_default().push(k);
                }
            }
        }
        let mut merged_any = false;
        let mut keys: Vec<_> = ends.into_iter().collect();
        keys.sort_by_key(|((l, p), _)| (*l, *p));
        for ((_, point), ids) in keys {
            if ids.len() != 2 {
                continue;
            }
            let (a, b) = (ids[0], ids[1]);
            if a == b {
                // Both ends of one polyline meet: close the loop.
                let (label, mut poly) = items[a].take().unwrap();
                let first = *poly.points.first().unwrap();
                poly.push(first);
                poly.normalize_closed();
                items[a] = Some((label, poly));
                merged_any = true;
                break;
            }
            let (label, pa) = items[a].take().unwrap();
            let (_, pb) = items[b].take().unwrap();
            let pa = if *pa.points.last().unwrap() == point {
                pa
            } else {
                pa.reversed()
            };
            let pb = if *pb.points.first().unwrap() == point {
                pb
            } else {
                pb.reversed()
            };
            let mut joined = pa;
            for &p in &pb.points {
                joined.push(p);
            }
            joined.simplify();
            joined.normalize_closed();
            items[a] = Some((label, joined));
            items[b] = None;
            merged_any = true;
            break;
        }
        if !merged_any {
            break;
        }
    }
    let mut circles = Vec::new();
    let mut open_ordinary = Vec::new();
    let mut phantom = Vec::new();
    for item in items.into_iter().flatten() {
        match item {
            (1, p) if p.is_closed() => circles.push(p),
            (1, p) => open_ordinary.push(p),
            (_, p) => phantom.push(p),
        }
    }
    (circles, open_ordinary, phantom)
}

impl StackedWeb {
    /// Positions (undoubled) where a circle crosses the horizontal line `y`.
    pub fn crossings(&self, circle: usize, y: i64) -> Vec<i64> {
        let mut out: Vec<i64> = self.circles[circle]
            .verticals()
            .into_iter()
            .filter(|&(_, lo, hi)| lo < y && y < hi)
            .map(|(x, _, _)| x / 2)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Index of the circle with the given crossing positions at the given
    /// horizontal lines.
    pub fn find_circle(&self, lines: &[(i64, &[i64])]) -> Option<usize> {
        (0..self.circles.len())
            .find(|&c| lines.iter().all(|(y, want)| self.crossings(c, *y) == *want))
    }

    fn circle_contains_point(&self, circle: usize, p: (i64, i64)) -> bool {
        self.circles[circle].contains(p)
    }

    fn circle_inside(&self, inner: usize, outer: usize) -> bool {
        let p = self.circles[inner]
            .rung_point()
            .expect("every web circle has a rung");
        self.circle_contains_point(outer, p)
    }

    /// Circles strictly inside the given one.
    pub fn nested_in(&self, circle: usize) -> Vec<usize> {
        (0..self.circles.len())
            .filter(|&k| k != circle && self.circle_inside(k, circle))
            .collect()
    }

    /// Total number of internal phantom edges of a circle: phantom edges in
    /// its interior but not in the interior of any circle nested in it.
    pub fn ipe(&self, circle: usize) -> usize {
        let nested = self.nested_in(circle);
        self.phantom
            .iter()
            .filter(|e| {
                let p = e.interior_point();
                self.circle_contains_point(circle, p)
                    && nested.iter().all(|&k| !self.circle_contains_point(k, p))
            })
            .count()
    }

    /// Phantom stubs attached to a circle, in cyclic order along its
    /// polyline: `(phantom index, points downward)`.
    fn stubs_on(&self, circle: usize) -> Vec<(usize, bool)> {
        let mut out = Vec::new();
        for p in &self.circles[circle].points {
            for (e, ph) in self.phantom.iter().enumerate() {
                for end in [0usize, 1] {
                    let pts = &ph.points;
                    if pts.len() < 2 {
                        continue;
                    }
                    let (attach, next) = if end == 0 {
                        (pts[0], pts[1])
                    } else {
                        (pts[pts.len() - 1], pts[pts.len() - 2])
                    };
                    if attach == *p {
                        out.push((e, next.1 < attach.1));
                    }
                }
            }
        }
        out
    }

    /// Internal phantom edges after removing every circle nested in this
    /// one. Removing a circle reconnects the phantom stubs attached to it by
    /// the non-crossing matching of downward against upward stubs around the
    /// circle, so edges that were cut by the removed circle join up again;
    /// the count is over the resulting classes.
    pub fn ipe_minus_nested(&self, circle: usize) -> usize {
        let nested = self.nested_in(circle);
        let mut class: Vec<usize> = (0..self.phantom.len()).collect();
        fn find(class: &mut Vec<usize>, k: usize) -> usize {
            if class[k] != k {
                let r = find(class, class[k]);
                class[k] = r;
                r
            } else {
                k
            }
        }
        for &d in &nested {
            let stubs = self.stubs_on(d);
            // Cyclic bracket matching of downward (opening) against upward
            // (closing) stubs; the wrap-around leftovers pair in order.
            let mut stack: Vec<(usize, bool)> = Vec::new();
            let mut leftover_ups: Vec<usize> = Vec::new();
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            for &(e, down) in &stubs {
                if down {
                    stack.push((e, down));
                } else if let Some((d_e, _)) = stack.pop() {
                    pairs.push((d_e, e));
                } else {
                    leftover_ups.push(e);
                }
            }
            for (up, (down, _)) in leftover_ups.into_iter().zip(stack.into_iter().rev()) {
                pairs.push((down, up));
            }
            for (a, b) in pairs {
                let (ra, rb) = (find(&mut class, a), find(&mut class, b));
                class[ra] = rb;
            }
        }
        // After the removal the nested interiors belong to the circle, so a
        // class counts when any member lies in the full interior.
        let mut reps: Vec<usize> = (0..self.phantom.len())
            .filter(|&e| self.circle_contains_point(circle, self.phantom[e].interior_point()))
            .map(|e| find(&mut class, e))
            .collect();
        reps.sort();
        reps.dedup();
        reps.len()
    }
}

/// Internal-phantom-edge formula: from the circle distance and the distances
/// of its nested circles.
pub fn ipe_formula(d_circle: u64, nested_distances: &[u64]) -> Result<u64> {
    let nest = nested_distances.len() as u64;
    let total = d_circle + nested_distances.iter().sum::<u64>() + 2 * nest;
    if total < 2 || (total - 2) % 4 != 0 {
        return Err(BkError::Invariant(format!(
            "ipe formula input {total} is not 2 mod 4"
        )));
    }
    Ok((total - 2) / 4)
}

/// Internal phantom edges after removing the nested circles.
pub fn ipe_minus_nested_formula(d_circle: u64) -> Result<u64> {
    if d_circle < 2 || (d_circle - 2) % 4 != 0 {
        return Err(BkError::Invariant(format!(
            "circle distance {d_circle} is not 2 mod 4"
        )));
    }
    Ok((d_circle - 2) / 4)
}

/// A value in `(1/2)Z`, stored doubled.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct HalfInt(i64);

impl HalfInt {
    pub fn from_halves(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn as_integer(self) -> Option<i64> {
        (self.0 % 2 == 0).then_some(self.0 / 2)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Degree of a pre-foam from its underlying topology: minus the Euler
/// characteristic of the reduction, plus two per dot, plus half the number of
/// vertical boundary components.
pub fn foam_degree(chi: i64, dots: u32, vbound: u32) -> HalfInt {
    HalfInt(-2 * chi + 4 * dots as i64 + vbound as i64)
}

/// Grading shift of the web algebra over a label vector.
pub fn shift_d(k: &LabelVector) -> Result<i64> {
    let total = k.sum();
    if total % 2 != 0 {
        return Err(BkError::InvalidDiagram(format!(
            "label vector {k} has odd total weight"
        )));
    }
    let ell = (total / 2) as i64;
    let sum: i64 = k.iter().map(|(_, v)| (v as i64) * (v as i64 - 1)).sum();
    Ok(ell - sum)
}

/// Evaluation of a dotted sphere with `a` dots on the front facet and `b` on
/// the back one.
pub fn eval_dotted_sphere(a: u32, b: u32) -> i64 {
    match (a, b) {
        (1, 0) => 1,
        (0, 1) => -1,
        _ => 0,
    }
}

/// Circle removal: a closed web of `m` circles evaluates to `(q + q^-1)^m`.
pub fn eval_closed_web_q(m: u32) -> LaurentPoly {
    LaurentPoly::quantum_two().pow(m)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Cell {
    Empty,
    /// A phantom destined for the cup or cross target with this index.
    Two(usize),
    /// An ordinary strand destined for a fixed position.
    One(i64),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Target {
    Cup { left: i64, right: i64 },
    Cross { at: i64 },
}

/// Canonical F-generated slice web realizing a cup-ray configuration from
/// the base `2w + w` vector: right boundary points are created before left
/// ones, each component from the rightmost available base entry, with a
/// minimal number of moves and no circles.
pub fn web_of_cupray(cups: &[(i64, i64)], rays: &[i64], target: &LabelVector) -> Result<SliceWeb> {
    let (tstart, tend) = target.support();
    let crosses: Vec<i64> = target
        .iter()
        .filter(|&(_, v)| v == 2)
        .map(|(p, _)| p)
        .collect();
    let mut two_targets: Vec<Target> = cups
        .iter()
        .map(|&(l, r)| Target::Cup {
            left: l.min(r),
            right: l.max(r),
        })
        .chain(crosses.iter().map(|&at| Target::Cross { at }))
        .collect();
    let point = |t: &Target| match *t {
        Target::Cup { right, .. } => right,
        Target::Cross { at } => at,
    };
    // Rightmost component first, served by the rightmost available phantom.
    two_targets.sort_by_key(|t| std::cmp::Reverse(point(t)));
    let mut ray_targets: Vec<i64> = rays.to_vec();
    ray_targets.sort_by_key(|&p| std::cmp::Reverse(p));

    let ell = two_targets.len() as i64;
    let ell_rays = ray_targets.len() as i64;
    let lo = tstart;
    let hi = (tstart + ell + ell_rays).max(tend);
    let mut cells: Vec<Cell> = vec![Cell::Empty; (hi - lo) as usize];
    for (k, _) in two_targets.iter().enumerate() {
        let pos = tstart + ell - 1 - k as i64;
        cells[(pos - lo) as usize] = Cell::Two(k);
    }
    for (k, &dest) in ray_targets.iter().enumerate() {
        let pos = tstart + ell + ell_rays - 1 - k as i64;
        cells[(pos - lo) as usize] = Cell::One(dest);
    }
    let base_entries: Vec<u8> = cells
        .iter()
        .map(|c| match c {
            Cell::Empty => 0,
            Cell::Two(_) => 2,
            Cell::One(_) => 1,
        })
        .collect();
    let base = LabelVector::new(lo, base_entries)?;

    struct Search<'a> {
        lo: i64,
        two_targets: &'a [Target],
        target: &'a LabelVector,
        seen: HashMap<Vec<Cell>, usize>,
    }

    impl Search<'_> {
        fn complete(&self, cells: &[Cell]) -> bool {
            cells.iter().enumerate().all(|(k, c)| {
                let pos = self.lo + k as i64;
                match *c {
                    Cell::Empty => self.target.get(pos) == 0,
                    Cell::One(dest) => dest == pos,
                    Cell::Two(tid) => {
                        matches!(self.two_targets[tid], Target::Cross { at } if at == pos)
                    }
                }
            })
        }

        fn dfs(&mut self, cells: &mut Vec<Cell>, depth: usize, word: &mut Vec<SliceMove>) -> bool {
            if self.complete(cells) {
                return true;
            }
            if depth == 0 {
                return false;
            }
            if let Some(&d) = self.seen.get(cells) {
                if d >= depth {
                    return false;
                }
            }
            self.seen.insert(cells.clone(), depth);
            let n = cells.len();
            for k in (0..n.saturating_sub(1)).rev() {
                let i = self.lo + k as i64;
                let (a, b) = (cells[k], cells[k + 1]);
                // Phantom transport before single moves at the same column.
                if let (Cell::Two(t), Cell::Empty) = (a, b) {
                    cells[k] = Cell::Empty;
                    cells[k + 1] = Cell::Two(t);
                    word.push(SliceMove { i, r: 2 });
                    if self.dfs(cells, depth - 1, word) {
                        return true;
                    }
                    word.pop();
                    cells[k] = a;
                    cells[k + 1] = b;
                }
                let undo = |cells: &mut Vec<Cell>| {
                    cells[k] = a;
                    cells[k + 1] = b;
                };
                match (a, b) {
                    (Cell::Two(t), Cell::Empty) => {
                        if let Target::Cup { left, right } = self.two_targets[t] {
                            if left <= i && right >= i + 1 {
                                cells[k] = Cell::One(left);
                                cells[k + 1] = Cell::One(right);
                                word.push(SliceMove { i, r: 1 });
                                if self.dfs(cells, depth - 1, word) {
                                    return true;
                                }
                                word.pop();
                                undo(cells);
                            }
                        }
                    }
                    (Cell::Two(t), Cell::One(d)) => {
                        cells[k] = Cell::One(d);
                        cells[k + 1] = Cell::Two(t);
                        word.push(SliceMove { i, r: 1 });
                        if self.dfs(cells, depth - 1, word) {
                            return true;
                        }
                        word.pop();
                        undo(cells);
                    }
                    (Cell::One(d), Cell::Empty) => {
                        if d >= i + 1 {
                            cells[k] = Cell::Empty;
                            cells[k + 1] = Cell::One(d);
                            word.push(SliceMove { i, r: 1 });
                            if self.dfs(cells, depth - 1, word) {
                                return true;
                            }
                            word.pop();
                            undo(cells);
                        }
                    }
                    _ => {}
                }
            }
            false
        }
    }

    let cap = cells.len() * cells.len() * 4 + 4;
    let mut word = Vec::new();
    for depth in 0..=cap {
        let mut work = cells.clone();
        let mut search = Search {
            lo,
            two_targets: &two_targets,
            target,
            seen: HashMap::new(),
        };
        if search.dfs(&mut work, depth, &mut word) {
            return SliceWeb::new(base, word);
        }
        word.clear();
    }
    Err(BkError::Invariant(format!(
        "no F-generated word reaches {target} from {base}"
    )))
}

/// The unique F-generated web of a cups-only weight, preferring right to
/// left.
pub fn web_of_weight(w: &crate::blocks::Weight) -> Result<SliceWeb> {
    let cup = crate::arc::canonical_cup(w);
    if !cup.rays().is_empty() {
        return Err(BkError::InvalidDiagram(format!(
            "weight {w} has rays; only cups-only weights have a cup web"
        )));
    }
    web_of_cup_diagram(&cup)
}

/// The canonical web of a cup-ray diagram.
pub fn web_of_cup_diagram(cup: &CupDiagram) -> Result<SliceWeb> {
    let target = LabelVector::from_block(cup.block());
    web_of_cupray(cup.cups(), cup.rays(), &target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::Weight;

    fn w(s: &str) -> Weight {
        Weight::parse(0, s).unwrap()
    }

    #[test]
    fn smallest_web() {
        let web = web_of_weight(&w("v^")).unwrap();
        assert_eq!(web.moves(), &[SliceMove { i: 0, r: 1 }]);
        assert_eq!(web.top(), LabelVector::new(0, vec![1, 1]).unwrap());
    }

    #[test]
    fn nested_web_word() {
        let web = web_of_weight(&w("vv^^")).unwrap();
        assert_eq!(
            web.moves(),
            &[
                SliceMove { i: 1, r: 1 },
                SliceMove { i: 2, r: 1 },
                SliceMove { i: 0, r: 1 },
                SliceMove { i: 1, r: 1 },
            ]
        );
    }

    #[test]
    fn reduction_equals_canonical_cup() {
        for b in crate::blocks::balanced_blocks_up_to(6, 2) {
            for lam in b.members(true) {
                let web = web_of_weight(&lam).unwrap();
                let red = web.reduction(&b).unwrap();
                assert_eq!(red, crate::arc::canonical_cup(&lam), "weight {lam}");
            }
        }
    }

    #[test]
    fn word_is_minimal_on_small_diagrams() {
        // Breadth-first over all legal words: no shorter circle-free word
        // realizes the diagram.
        for b in crate::blocks::balanced_blocks_up_to(4, 1) {
            for lam in b.members(true) {
                let cup = crate::arc::canonical_cup(&lam);
                let web = web_of_weight(&lam).unwrap();
                let n = web.moves().len();
                let target = LabelVector::from_block(cup.block());
                let mut frontier = vec![SliceWeb::new(web.base().clone(), vec![]).unwrap()];
                for depth in 1..n {
                    let mut next = Vec::new();
                    for sw in &frontier {
                        let top = sw.top();
                        let (lo, hi) = (
                            top.support().0.min(target.support().0) - 1,
                            top.support().1.max(target.support().1) + 1,
                        );
                        for i in lo..hi {
                            for r in [1, 2] {
                                if apply_move(&top, SliceMove { i, r }).is_some() {
                                    let mut moves = sw.moves().to_vec();
                                    moves.push(SliceMove { i, r });
                                    let cand = SliceWeb::new(sw.base().clone(), moves).unwrap();
                                    if cand.top() == target {
                                        if let Ok(red) = cand.reduction(cup.block()) {
                                            assert_ne!(
                                                red, cup,
                                                "word of length {depth} beats {n} for {lam}"
                                            );
                                        }
                                    }
                                    next.push(cand);
                                }
                            }
                        }
                    }
                    frontier = next;
                }
            }
        }
    }

    #[test]
    fn smallest_circle_has_no_internal_phantoms() {
        let web = web_of_weight(&w("v^")).unwrap();
        let geo = web.geometry();
        let stacked = stack(&[(&geo, false), (&geo, true)]);
        assert_eq!(stacked.circles.len(), 1);
        assert!(stacked.open_ordinary.is_empty());
        assert_eq!(stacked.ipe(0), 0);
        assert_eq!(stacked.ipe_minus_nested(0), 0);
    }

    #[test]
    fn nested_pair_phantom_counts() {
        let web = web_of_weight(&w("vv^^")).unwrap();
        let geo = web.geometry();
        let stacked = stack(&[(&geo, false), (&geo, true)]);
        assert_eq!(stacked.circles.len(), 2);
        let y = stacked.junctions[0];
        let outer = stacked.find_circle(&[(y, &[0, 3])]).unwrap();
        let inner = stacked.find_circle(&[(y, &[1, 2])]).unwrap();
        assert_eq!(stacked.nested_in(outer), vec![inner]);
        assert_eq!(stacked.ipe(outer), 2);
        assert_eq!(stacked.ipe_minus_nested(outer), 1);
        assert_eq!(stacked.ipe(inner), 0);
    }

    #[test]
    fn foam_degree_constants() {
        // Cup and cap pre-foams: disks without dots or vertical boundary.
        assert_eq!(foam_degree(1, 0, 0).as_integer(), Some(-1));
        // Saddle: a disk with four vertical boundary lines.
        assert_eq!(foam_degree(1, 0, 4).as_integer(), Some(1));
        // Dotted cup: Euler characteristic zero with one dot.
        assert_eq!(foam_degree(0, 1, 0).as_integer(), Some(2));
    }

    #[test]
    fn shift_examples() {
        let k = LabelVector::new(0, vec![1, 1]).unwrap();
        assert_eq!(shift_d(&k).unwrap(), 1);
        let k = LabelVector::new(0, vec![2]).unwrap();
        assert_eq!(shift_d(&k).unwrap(), -1);
    }

    #[test]
    fn sphere_values() {
        assert_eq!(eval_dotted_sphere(1, 0), 1);
        assert_eq!(eval_dotted_sphere(0, 1), -1);
        assert_eq!(eval_dotted_sphere(2, 0), 0);
        assert_eq!(eval_dotted_sphere(0, 0), 0);
    }

    #[test]
    fn closed_web_evaluation() {
        assert_eq!(eval_closed_web_q(0).to_string(), "1");
        assert_eq!(eval_closed_web_q(1).to_string(), "q^-1 + q");
        assert_eq!(eval_closed_web_q(2).to_string(), "q^-2 + 2 + q^2");
    }
}

#[cfg(test)]
mod surgery_shape_tests {
    use super::*;
    use crate::blocks::{Block, Weight};

    fn w(s: &str) -> Weight {
        Weight::parse(0, s).unwrap()
    }

    /// The four-layer web of a partially surged stacked diagram
    /// `lambda, middle*, middle, eta*` with `middle` a cup-ray diagram.
    fn surgery_stack(lambda: &str, cups: &[(i64, i64)], rays: &[i64], eta: &str) -> StackedWeb {
        let block = Block::parse(0, "****").unwrap();
        let target = LabelVector::from_block(&block);
        let bottom = web_of_weight(&w(lambda)).unwrap().geometry();
        let middle = web_of_cupray(cups, rays, &target).unwrap().geometry();
        let top = web_of_weight(&w(eta)).unwrap().geometry();
        stack(&[(&bottom, false), (&middle, true), (&middle, false), (&top, true)])
    }

    #[test]
    fn h_shape_circle_has_two_internal_phantom_edges() {
        // After the first surgery of (v^v^ | vv^^) * (vv^^ | v^v^) the big
        // circle is the H shape of distance 6.
        let st = surgery_stack("v^v^", &[(1, 2)], &[0, 3], "v^v^");
        let all = [0i64, 1, 2, 3];
        let j_low = st.junctions[0];
        let j_high = st.junctions[2];
        let h = st
            .find_circle(&[(j_low, &all), (j_high, &all)])
            .expect("the H circle crosses both vertex lines everywhere");
        assert_eq!(st.ipe(h), 2);
        assert!(st.nested_in(h).is_empty());
    }

    #[test]
    fn c_shape_circle_has_one_internal_phantom_edge() {
        // After the first surgery of (vv^^ | v^v^) * (v^v^ | vv^^) the big
        // circle is the C shape of distance 10.
        let st = surgery_stack("vv^^", &[(2, 3)], &[0, 1], "vv^^");
        let all = [0i64, 1, 2, 3];
        let j_low = st.junctions[0];
        let j_high = st.junctions[2];
        let c = st
            .find_circle(&[(j_low, &all), (j_high, &all)])
            .expect("the C circle crosses both vertex lines everywhere");
        assert_eq!(st.ipe(c), 1);
        assert!(st.nested_in(c).is_empty());
    }
}

#[cfg(test)]
mod dbg2 {
    use super::*;
    use crate::blocks::{Block, Weight};
    #[test]
    fn dbg_c_shape() {
        let block = Block::parse(0, "****").unwrap();
        let target = LabelVector::from_block(&block);
        let bottom = web_of_weight(&Weight::parse(0, "vv^^").unwrap()).unwrap();
        eprintln!("bottom word {:?}", bottom.moves());
        let middle = web_of_cupray(&[(2, 3)], &[0, 1], &target).unwrap();
        eprintln!("middle base {} word {:?}", middle.base(), middle.moves());
        let bg = bottom.geometry();
        let mg = middle.geometry();
        let st = stack(&[(&bg, false), (&mg, true), (&mg, false), (&bg, true)]);
        eprintln!("junctions {:?} circles {}", st.junctions, st.circles.len());
        for (k, c) in st.circles.iter().enumerate() {
            eprintln!("C{k} {:?}", c.points);
            eprintln!("  crossings low {:?} high {:?}", st.crossings(k, st.junctions[0]), st.crossings(k, st.junctions[2]));
        }
        for p in &st.phantom { eprintln!("ph {:?}", p.points); }
        let c = st.find_circle(&[(st.junctions[0], &[0,1,2,3]), (st.junctions[2], &[0,1,2,3])]).unwrap();
        eprintln!("ipe = {}, nested = {:?}", st.ipe(c), st.nested_in(c));
        for (e, p) in st.phantom.iter().enumerate() {
            let pt = {
                // replicate interior_point
                p.points.windows(2).find(|w| w[0].0 == w[1].0 && (w[0].1 - w[1].1).abs() >= 2)
                    .map(|w| (w[0].0, (w[0].1 + w[1].1) / 2))
                    .unwrap_or(p.points[0])
            };
            eprintln!("phantom {e}: rep {:?} inside-C: {}", pt, st.circles[c].contains(pt));
        }
    }
}
