//! Bimodules over the Blanchet-Khovanov algebras: admissible matchings,
//! composite matchings, stretched circle diagram bases, downward and upward
//! reductions, the two actions and the generator-to-matching assignment.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::{mult_basis, AlgebraElement, BasisDiagram};
use crate::arc::{canonical_cup, CapDiagram, CupDiagram};
use crate::blocks::{Block, BlockSym, Weight, WeightSym};
use crate::error::{BkError, Result};
use crate::planar::{ArcKind, Component, Diagram, Vertex};
use crate::poly::LaurentPoly;

/// Generator type of a matching: `raise` distinguishes the `+a_i` row from
/// the `-a_i` row, `power` is 1 for single moves and 2 for the empty moves.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct MatchingType {
    pub raise: bool,
    pub power: u8,
    pub i: i64,
}

impl fmt::Display for MatchingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.raise { '+' } else { '-' };
        if self.power == 2 {
            write!(f, "{sign}2a_{}", self.i)
        } else {
            write!(f, "{sign}a_{}", self.i)
        }
    }
}

/// The local picture a matching carries at positions `i`, `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum LocalPicture {
    /// Slanted ray from `(from, bottom)` to `(to, top)`.
    Ray { from: i64, to: i64 },
    /// Arc joining `(i, top)` and `(i + 1, top)`.
    Cup,
    /// Arc joining `(i, bottom)` and `(i + 1, bottom)`.
    Cap,
    /// Empty move: only the `o`/`x` entries swap.
    Empty,
}

/// An admissible matching between two blocks: vertical rays at shared stars
/// and one local picture at `(i, i + 1)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matching {
    ty: MatchingType,
    source: Block,
    target: Block,
    local: LocalPicture,
}

fn entry(b: &Block, i: i64) -> u8 {
    match b.get(i) {
        BlockSym::O => 0,
        BlockSym::Star => 1,
        BlockSym::X => 2,
    }
}

impl Matching {
    /// The matching of the given type out of `source`, or `None` when no
    /// local picture fits (the generator acts as zero there).
    pub fn fit(ty: MatchingType, source: &Block) -> Option<Matching> {
        if ty.power == 0 || ty.power > 2 {
            return None;
        }
        let (a, b) = (entry(source, ty.i), entry(source, ty.i + 1));
        let delta: i8 = if ty.raise { 1 } else { -1 } * ty.power as i8;
        let (ta, tb) = (a as i8 + delta, b as i8 - delta);
        if !(0..=2).contains(&ta) || !(0..=2).contains(&tb) {
            return None;
        }
        let (ta, tb) = (ta as u8, tb as u8);
        let local = if ty.power == 2 {
            // Only the full swaps (o,x) <-> (x,o) are empty moves.
            if (a, b) == (0, 2) || (a, b) == (2, 0) {
                LocalPicture::Empty
            } else {
                return None;
            }
        } else {
            match ((a, b), (ta, tb)) {
                ((0, 1), (1, 0)) => LocalPicture::Ray { from: ty.i + 1, to: ty.i },
                ((1, 2), (2, 1)) => LocalPicture::Ray { from: ty.i, to: ty.i + 1 },
                ((1, 0), (0, 1)) => LocalPicture::Ray { from: ty.i, to: ty.i + 1 },
                ((2, 1), (1, 2)) => LocalPicture::Ray { from: ty.i + 1, to: ty.i },
                ((0, 2), (1, 1)) | ((2, 0), (1, 1)) => LocalPicture::Cup,
                ((1, 1), (2, 0)) | ((1, 1), (0, 2)) => LocalPicture::Cap,
                _ => return None,
            }
        };
        let mut syms: BTreeMap<i64, BlockSym> = source.iter().collect();
        let put = |syms: &mut BTreeMap<i64, BlockSym>, p: i64, v: u8| {
            let s = match v {
                0 => BlockSym::O,
                1 => BlockSym::Star,
                _ => BlockSym::X,
            };
            syms.insert(p, s);
        };
        put(&mut syms, ty.i, ta);
        put(&mut syms, ty.i + 1, tb);
        let (lo, hi) = match (syms.keys().next(), syms.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (0, -1),
        };
        let entries: Vec<BlockSym> = (lo..=hi)
            .map(|k| syms.get(&k).copied().unwrap_or(BlockSym::O))
            .collect();
        let stars = entries.iter().filter(|s| **s == BlockSym::Star).count() as u32;
        let crosses = entries.iter().filter(|s| **s == BlockSym::X).count() as u32;
        // Moves preserve up and down counts, so carry over the source surplus.
        let surplus = source.up() as i64 - (source.star_count() / 2 + source.cross_count()) as i64;
        let up = (stars / 2 + crosses) as i64 + surplus;
        let down = (stars + 2 * crosses) as i64 - up;
        if up < 0 || down < 0 {
            return None;
        }
        let target = Block::new(lo, entries, up as u32, down as u32).ok()?;
        Some(Matching {
            ty,
            source: source.clone(),
            target,
            local,
        })
    }

    /// All single or empty matchings from `source` to `target`.
    pub fn between(source: &Block, target: &Block) -> Vec<Matching> {
        let (s0, s1) = source.support();
        let (t0, t1) = target.support();
        let lo = s0.min(t0) - 1;
        let hi = s1.max(t1) + 1;
        let mut out = Vec::new();
        for i in lo..hi {
            for raise in [false, true] {
                for power in [1u8, 2] {
                    if let Some(m) = Matching::fit(MatchingType { raise, power, i }, source) {
                        if m.target() == target && !out.contains(&m) {
                            out.push(m);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ty(&self) -> MatchingType {
        self.ty
    }

    pub fn source(&self) -> &Block {
        &self.source
    }

    pub fn target(&self) -> &Block {
        &self.target
    }

    pub fn local(&self) -> LocalPicture {
        self.local
    }

    pub fn is_empty_move(&self) -> bool {
        self.local == LocalPicture::Empty
    }

    /// Expansion of an empty move into its cup-then-cap composition; single
    /// moves expand to themselves.
    fn expand(&self) -> Vec<Matching> {
        if !self.is_empty_move() {
            return vec![self.clone()];
        }
        let ty1 = MatchingType { raise: self.ty.raise, power: 1, i: self.ty.i };
        let first = Matching::fit(ty1, &self.source).expect("empty move opens with a cup");
        let second = Matching::fit(ty1, &first.target).expect("empty move closes with a cap");
        debug_assert_eq!(second.target, self.target);
        debug_assert_eq!(first.local, LocalPicture::Cup);
        debug_assert_eq!(second.local, LocalPicture::Cap);
        vec![first, second]
    }

    /// Arcs of this layer between `line` (source) and `line + 1` (target).
    fn arcs(&self, line: usize) -> Vec<ArcKind> {
        let mut out = Vec::new();
        for (p, s) in self.source.iter() {
            if s == BlockSym::Star
                && p != self.ty.i
                && p != self.ty.i + 1
                && self.target.get(p) == BlockSym::Star
            {
                out.push(ArcKind::Cross { line, i: p, j: p });
            }
        }
        match self.local {
            LocalPicture::Ray { from, to } => out.push(ArcKind::Cross { line, i: from, j: to }),
            LocalPicture::Cup => out.push(ArcKind::CupBelow {
                line: line + 1,
                i: self.ty.i,
                j: self.ty.i + 1,
            }),
            LocalPicture::Cap => out.push(ArcKind::CapAbove {
                line,
                i: self.ty.i,
                j: self.ty.i + 1,
            }),
            LocalPicture::Empty => {}
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct MatchingRepr {
    #[serde(rename = "type")]
    ty: String,
    i: i64,
    source: Block,
    target: Block,
}

impl Serialize for Matching {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let ty = match (self.ty.raise, self.ty.power) {
            (true, 1) => "+a_i",
            (false, 1) => "-a_i",
            (true, _) => "+2a_i",
            (false, _) => "-2a_i",
        };
        MatchingRepr {
            ty: ty.into(),
            i: self.ty.i,
            source: self.source.clone(),
            target: self.target.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Matching {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let r = MatchingRepr::deserialize(de)?;
        let (raise, power) = match r.ty.as_str() {
            "+a_i" => (true, 1),
            "-a_i" => (false, 1),
            "+2a_i" => (true, 2),
            "-2a_i" => (false, 2),
            other => return Err(D::Error::custom(format!("unknown matching type {other:?}"))),
        };
        let m = Matching::fit(MatchingType { raise, power, i: r.i }, &r.source)
            .ok_or_else(|| D::Error::custom("local picture does not fit the source block"))?;
        if m.target != r.target {
            return Err(D::Error::custom("declared target does not match the move"));
        }
        Ok(m)
    }
}

/// A stack of matchings, layer `k` joining block `k` to block `k + 1`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CompositeMatching {
    base: Block,
    layers: Vec<Matching>,
}

impl CompositeMatching {
    pub fn identity(base: Block) -> Self {
        CompositeMatching {
            base,
            layers: Vec::new(),
        }
    }

    pub fn new(base: Block, layers: Vec<Matching>) -> Result<Self> {
        let mut cur = &base;
        for (k, layer) in layers.iter().enumerate() {
            if layer.source() != cur {
                return Err(BkError::NonComposable(format!(
                    "layer {k} expects source {} but the stack reaches {cur}",
                    layer.source()
                )));
            }
            cur = layer.target();
        }
        Ok(CompositeMatching { base, layers })
    }

    pub fn from_layers(layers: Vec<Matching>) -> Result<Self> {
        let base = layers
            .first()
            .map(|m| m.source().clone())
            .ok_or_else(|| BkError::NonComposable("empty layer list needs a base block".into()))?;
        CompositeMatching::new(base, layers)
    }

    pub fn layers(&self) -> &[Matching] {
        &self.layers
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut out = vec![self.base.clone()];
        for l in &self.layers {
            out.push(l.target().clone());
        }
        out
    }

    pub fn source(&self) -> &Block {
        &self.base
    }

    pub fn target(&self) -> &Block {
        self.layers.last().map(|l| l.target()).unwrap_or(&self.base)
    }

    pub fn empty_move_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_empty_move()).count()
    }
}

/// A basis vector of a bimodule: the bottom weight, one weight per expanded
/// line, and the top weight.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct StretchedKey {
    pub lambda: Weight,
    pub nus: Vec<Weight>,
    pub eta: Weight,
}

/// The bimodule attached to a composite matching: basis, degrees, actions.
///
/// Empty moves are represented on the substituted matching (each replaced by
/// a cup-then-cap pair) with the internal circles forced anticlockwise and an
/// upward degree shift per empty move.
pub struct Bimodule {
    original: CompositeMatching,
    expanded_layers: Vec<Matching>,
    expanded_blocks: Vec<Block>,
    /// A vertex on each internal circle created by the substitution.
    internal: Vec<Vertex>,
    shift: i64,
    basis: Vec<StretchedKey>,
}

impl Bimodule {
    pub fn new(matching: CompositeMatching) -> Result<Self> {
        let mut expanded_layers = Vec::new();
        let mut internal = Vec::new();
        for layer in matching.layers() {
            if layer.is_empty_move() {
                internal.push((layer.ty().i, expanded_layers.len() + 1));
                expanded_layers.extend(layer.expand());
            } else {
                expanded_layers.push(layer.clone());
            }
        }
        let mut expanded_blocks = vec![matching.source().clone()];
        for l in &expanded_layers {
            expanded_blocks.push(l.target().clone());
        }
        let shift = matching.empty_move_count() as i64;
        let mut module = Bimodule {
            original: matching,
            expanded_layers,
            expanded_blocks,
            internal,
            shift,
            basis: Vec::new(),
        };
        module.basis = module.enumerate_basis()?;
        Ok(module)
    }

    pub fn matching(&self) -> &CompositeMatching {
        &self.original
    }

    pub fn basis(&self) -> &[StretchedKey] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    fn lines(&self) -> usize {
        self.expanded_blocks.len()
    }

    pub fn bottom_block(&self) -> &Block {
        &self.expanded_blocks[0]
    }

    pub fn top_block(&self) -> &Block {
        self.expanded_blocks.last().unwrap()
    }

    /// The full stretched diagram for a bottom and top weight choice.
    fn full_diagram(&self, lambda: &Weight, eta: &Weight) -> Result<Diagram> {
        let bottom = canonical_cup(lambda);
        let top = canonical_cup(eta);
        if !bottom.rays().is_empty() || !top.rays().is_empty() {
            return Err(BkError::InvalidDiagram(
                "stretched basis diagrams are cups-only at the boundary".into(),
            ));
        }
        let mut d = Diagram::new(self.lines());
        for &(i, j) in bottom.cups() {
            d.push(ArcKind::CupBelow { line: 0, i, j });
        }
        for (k, layer) in self.expanded_layers.iter().enumerate() {
            for arc in layer.arcs(k) {
                d.push(arc);
            }
        }
        let topline = self.lines() - 1;
        for &(i, j) in top.cups() {
            d.push(ArcKind::CapAbove { line: topline, i, j });
        }
        Ok(d)
    }

    fn enumerate_basis(&self) -> Result<Vec<StretchedKey>> {
        let mut out = Vec::new();
        for lambda in self.bottom_block().members(true) {
            for eta in self.top_block().members(true) {
                let diag = self.full_diagram(&lambda, &eta)?;
                let comps = diag.components()?;
                if comps.iter().any(|c| !c.is_circle) {
                    return Err(BkError::Invariant(
                        "stretched diagram with cups-only boundary has an open component".into(),
                    ));
                }
                let n = comps.len();
                for mask in 0u64..(1 << n) {
                    let mut labels: BTreeMap<Vertex, bool> = BTreeMap::new();
                    for (k, comp) in comps.iter().enumerate() {
                        let flip = mask >> k & 1 == 1;
                        for (v, &up) in comp.vertices.iter().zip(&comp.upward) {
                            labels.insert(*v, up != flip);
                        }
                    }
                    if !self.internal_circles_anticlockwise(&comps, &labels) {
                        continue;
                    }
                    out.push(StretchedKey {
                        lambda: lambda.clone(),
                        nus: self.labels_to_nus(&labels),
                        eta: eta.clone(),
                    });
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    fn internal_circles_anticlockwise(
        &self,
        comps: &[Component],
        labels: &BTreeMap<Vertex, bool>,
    ) -> bool {
        self.internal.iter().all(|&(i, line)| {
            let comp = comps
                .iter()
                .find(|c| c.contains_vertex((i, line)))
                .expect("internal circle vertex exists");
            labels[&comp.vertices[comp.rightmost()]]
        })
    }

    fn labels_to_nus(&self, labels: &BTreeMap<Vertex, bool>) -> Vec<Weight> {
        let mut nus = Vec::with_capacity(self.lines());
        for (line, block) in self.expanded_blocks.iter().enumerate() {
            let mut w = Weight::empty();
            for (p, s) in block.iter() {
                match s {
                    BlockSym::X => w.set(p, WeightSym::X),
                    BlockSym::Star => {
                        let up = labels[&(p, line)];
                        w.set(p, if up { WeightSym::Up } else { WeightSym::Down });
                    }
                    BlockSym::O => {}
                }
            }
            nus.push(w);
        }
        nus
    }

    fn key_labels(&self, key: &StretchedKey) -> BTreeMap<Vertex, bool> {
        let mut labels = BTreeMap::new();
        for (line, nu) in key.nus.iter().enumerate() {
            for (p, s) in nu.iter() {
                match s {
                    WeightSym::Up => labels.insert((p, line), true),
                    WeightSym::Down => labels.insert((p, line), false),
                    _ => None,
                };
            }
        }
        labels
    }

    /// Degree: clockwise circles minus anticlockwise circles, plus the empty
    /// move shift; line components contribute nothing.
    pub fn degree(&self, key: &StretchedKey) -> Result<i64> {
        let diag = self.full_diagram(&key.lambda, &key.eta)?;
        let comps = diag.components()?;
        let labels = self.key_labels(key);
        let mut deg = self.shift;
        for c in comps.iter().filter(|c| c.is_circle) {
            deg += if labels[&c.vertices[c.rightmost()]] { -1 } else { 1 };
        }
        Ok(deg)
    }

    pub fn graded_dimension(&self) -> Result<LaurentPoly> {
        let mut p = LaurentPoly::zero();
        for k in &self.basis {
            p.add_term(self.degree(k)?, 1);
        }
        Ok(p)
    }

    /// Reduction diagram: layers plus one boundary diagram, with open ends on
    /// the other boundary line.
    fn reduction_diagram(&self, boundary: &Weight, downward: bool) -> Result<Diagram> {
        let mut d = Diagram::new(self.lines());
        let topline = self.lines() - 1;
        let cup = canonical_cup(boundary);
        if !cup.rays().is_empty() {
            return Err(BkError::InvalidDiagram("reduction boundary must be cups-only".into()));
        }
        if downward {
            for &p in &self.bottom_block().star_positions() {
                d.push(ArcKind::RayDown { i: p });
            }
            for &(i, j) in cup.cups() {
                d.push(ArcKind::CapAbove { line: topline, i, j });
            }
        } else {
            for &(i, j) in cup.cups() {
                d.push(ArcKind::CupBelow { line: 0, i, j });
            }
            for &p in &self.top_block().star_positions() {
                d.push(ArcKind::RayUp { i: p });
            }
        }
        for (k, layer) in self.expanded_layers.iter().enumerate() {
            for arc in layer.arcs(k) {
                d.push(arc);
            }
        }
        Ok(d)
    }

    /// Downward reduction under a top weight: components of the layer stack
    /// not connected to the bottom line are removed, the others close into
    /// caps over the bottom block.
    pub fn downward_reduction(&self, eta: &Weight) -> Result<CapDiagram> {
        let diag = self.reduction_diagram(eta, true)?;
        let comps = diag.components()?;
        let mut caps = Vec::new();
        for c in comps.iter().filter(|c| !c.is_circle) {
            let ends = boundary_ray_positions(&diag, c, true);
            if ends.len() != 2 {
                return Err(BkError::Invariant(
                    "open stack component must meet the bottom line twice".into(),
                ));
            }
            caps.push((ends[0], ends[1]));
        }
        Ok(CupDiagram::new(self.bottom_block().clone(), caps, Vec::new())?.reflect())
    }

    /// Upward reduction over a bottom weight.
    pub fn upward_reduction(&self, lambda: &Weight) -> Result<CupDiagram> {
        let diag = self.reduction_diagram(lambda, false)?;
        let comps = diag.components()?;
        let mut cups = Vec::new();
        for c in comps.iter().filter(|c| !c.is_circle) {
            let ends = boundary_ray_positions(&diag, c, false);
            if ends.len() != 2 {
                return Err(BkError::Invariant(
                    "open stack component must meet the top line twice".into(),
                ));
            }
            cups.push((ends[0], ends[1]));
        }
        CupDiagram::new(self.top_block().clone(), cups, Vec::new())
    }

    /// Left (bottom) action of an algebra element over the bottom block.
    pub fn act_left(&self, a: &AlgebraElement, m: &BimoduleElement) -> Result<BimoduleElement> {
        let mut out = BimoduleElement::zero();
        for (key, mc) in m.terms() {
            let reduction = self.downward_reduction(&key.eta)?;
            let red_diag = self.reduction_diagram(&key.eta, true)?;
            let red_comps = red_diag.components()?;
            let mu_weight = weight_of_cups(&reduction.reflect());
            let factor = BasisDiagram::new(key.lambda.clone(), key.nus[0].clone(), mu_weight)?;
            for (ad, ac) in a.terms() {
                if ad.mu != key.lambda {
                    continue;
                }
                let prod = mult_basis(ad, &factor)?;
                for (pd, pc) in prod.terms() {
                    let lifted = self.lift(&red_diag, &red_comps, key, &pd.nu, true)?;
                    out.add_term(
                        StretchedKey {
                            lambda: ad.lambda.clone(),
                            nus: lifted,
                            eta: key.eta.clone(),
                        },
                        mc * ac * pc,
                    );
                }
            }
        }
        Ok(out)
    }

    /// Right (top) action of an algebra element over the top block.
    pub fn act_right(&self, m: &BimoduleElement, b: &AlgebraElement) -> Result<BimoduleElement> {
        let mut out = BimoduleElement::zero();
        for (key, mc) in m.terms() {
            let reduction = self.upward_reduction(&key.lambda)?;
            let red_diag = self.reduction_diagram(&key.lambda, false)?;
            let red_comps = red_diag.components()?;
            let red_weight = weight_of_cups(&reduction);
            let r = self.lines() - 1;
            let factor = BasisDiagram::new(red_weight, key.nus[r].clone(), key.eta.clone())?;
            for (bd, bc) in b.terms() {
                if bd.lambda != key.eta {
                    continue;
                }
                let prod = mult_basis(&factor, bd)?;
                for (pd, pc) in prod.terms() {
                    let lifted = self.lift(&red_diag, &red_comps, key, &pd.nu, false)?;
                    out.add_term(
                        StretchedKey {
                            lambda: key.lambda.clone(),
                            nus: lifted,
                            eta: bd.mu.clone(),
                        },
                        mc * bc * pc,
                    );
                }
            }
        }
        Ok(out)
    }

    /// Lift a boundary weight through the reduction components: components
    /// touching the boundary line are reoriented to match `new_nu`, all
    /// others keep the orientation recorded in `key`.
    fn lift(
        &self,
        diag: &Diagram,
        comps: &[Component],
        key: &StretchedKey,
        new_nu: &Weight,
        downward: bool,
    ) -> Result<Vec<Weight>> {
        let mut labels = self.key_labels(key);
        let boundary_line = if downward { 0 } else { self.lines() - 1 };
        for c in comps.iter().filter(|c| !c.is_circle) {
            let ends = boundary_ray_positions(diag, c, downward);
            let k0 = c
                .vertex_index((ends[0], boundary_line))
                .ok_or_else(|| BkError::Invariant("lost boundary vertex".into()))?;
            let want = new_nu.get(ends[0]) == WeightSym::Up;
            let flip = c.upward[k0] != want;
            for (v, &up) in c.vertices.iter().zip(&c.upward) {
                labels.insert(*v, up != flip);
            }
            // The lift is unique; it must also agree at the other end.
            let k1 = c
                .vertex_index((ends[1], boundary_line))
                .ok_or_else(|| BkError::Invariant("lost boundary vertex".into()))?;
            if (c.upward[k1] != flip) != (new_nu.get(ends[1]) == WeightSym::Up) {
                return Err(BkError::Invariant(
                    "orientation lift inconsistent at the second boundary vertex".into(),
                ));
            }
        }
        Ok(self.labels_to_nus(&labels))
    }

    /// Matrix of the left action of a basis diagram: `matrix[row][col]` is
    /// the coefficient of `basis[row]` in `a * basis[col]`.
    pub fn action_matrix_left(&self, a: &BasisDiagram) -> Result<Vec<Vec<i64>>> {
        let el = AlgebraElement::basis_vector(self.bottom_block().clone(), a.clone())?;
        self.matrix_of(|m| self.act_left(&el, m))
    }

    pub fn action_matrix_right(&self, b: &BasisDiagram) -> Result<Vec<Vec<i64>>> {
        let el = AlgebraElement::basis_vector(self.top_block().clone(), b.clone())?;
        self.matrix_of(|m| self.act_right(m, &el))
    }

    fn matrix_of<F>(&self, act: F) -> Result<Vec<Vec<i64>>>
    where
        F: Fn(&BimoduleElement) -> Result<BimoduleElement>,
    {
        let n = self.basis.len();
        let mut matrix = vec![vec![0i64; n]; n];
        for (col, key) in self.basis.iter().enumerate() {
            let image = act(&BimoduleElement::basis_vector(key.clone()))?;
            for (k, c) in image.terms() {
                let row = self
                    .basis
                    .iter()
                    .position(|b| b == k)
                    .ok_or_else(|| BkError::Invariant("action left the module basis".into()))?;
                matrix[row][col] = c;
            }
        }
        Ok(matrix)
    }
}

/// Positions where an open component meets the bottom (or top) boundary rays.
fn boundary_ray_positions(diag: &Diagram, c: &Component, bottom: bool) -> Vec<i64> {
    let mut out: Vec<i64> = c
        .arcs
        .iter()
        .filter_map(|&a| match diag.arcs[a] {
            ArcKind::RayDown { i } if bottom => Some(i),
            ArcKind::RayUp { i } if !bottom => Some(i),
            _ => None,
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// The weight orienting a cups-only cup diagram minimally: `v` at every left
/// cup endpoint and `^` at every right one.
pub fn weight_of_cups(c: &CupDiagram) -> Weight {
    let mut w = Weight::empty();
    for (p, s) in c.block().iter() {
        if s == BlockSym::X {
            w.set(p, WeightSym::X);
        }
    }
    for &(i, j) in c.cups() {
        w.set(i, WeightSym::Down);
        w.set(j, WeightSym::Up);
    }
    w
}

/// A finite integer combination of stretched basis keys.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct BimoduleElement {
    terms: BTreeMap<StretchedKey, i64>,
}

impl BimoduleElement {
    pub fn zero() -> Self {
        BimoduleElement::default()
    }

    pub fn basis_vector(key: StretchedKey) -> Self {
        let mut e = BimoduleElement::zero();
        e.add_term(key, 1);
        e
    }

    pub fn add_term(&mut self, key: StretchedKey, c: i64) {
        if c == 0 {
            return;
        }
        let e = self.terms.entry(key).or_insert(0);
        *e += c;
        if *e == 0 {
            self.terms.retain(|_, v| *v != 0);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&StretchedKey, i64)> {
        self.terms.iter().map(|(k, &c)| (k, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// One generator of a quantum group word fed to the matching assignment.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Generator {
    E { i: i64, power: u8 },
    F { i: i64, power: u8 },
    Id,
}

impl Generator {
    /// Parse tokens like `E2`, `F_-1`, `E0^2`, `F3^(2)`, `1`.
    pub fn parse(tok: &str) -> Result<Self> {
        if tok == "1" {
            return Ok(Generator::Id);
        }
        let (head, power) = match tok.split_once('^') {
            Some((h, p)) => {
                let p: u8 = p
                    .trim_start_matches('(')
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| BkError::Parse(format!("bad divided power in {tok:?}")))?;
                (h, p)
            }
            None => (tok, 1),
        };
        let mut chars = head.chars();
        let kind = chars.next().ok_or_else(|| BkError::Parse("empty generator token".into()))?;
        let i: i64 = chars
            .as_str()
            .trim_start_matches('_')
            .parse()
            .map_err(|_| BkError::Parse(format!("bad generator index in {tok:?}")))?;
        match kind {
            'E' => Ok(Generator::E { i, power }),
            'F' => Ok(Generator::F { i, power }),
            _ => Err(BkError::Parse(format!("unknown generator {tok:?}"))),
        }
    }
}

/// Assign a composite matching to a word of generators applied to a starting
/// block (read left to right, stacked bottom to top). Divided powers above 2
/// and non-fitting local pictures give `None`, i.e. the zero bimodule.
pub fn howe_cm(word: &[Generator], start: &Block) -> Option<CompositeMatching> {
    let mut layers = Vec::new();
    let mut cur = start.clone();
    for g in word {
        let ty = match *g {
            Generator::Id => continue,
            Generator::E { i, power } => {
                if power > 2 {
                    return None;
                }
                MatchingType { raise: true, power, i }
            }
            Generator::F { i, power } => {
                if power > 2 {
                    return None;
                }
                MatchingType { raise: false, power, i }
            }
        };
        let m = Matching::fit(ty, &cur)?;
        cur = m.target().clone();
        layers.push(m);
    }
    Some(CompositeMatching {
        base: start.clone(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{idempotents, unit};

    fn b(s: &str) -> Block {
        Block::parse(0, s).unwrap()
    }

    fn w(s: &str) -> Weight {
        Weight::parse(0, s).unwrap()
    }

    /// The cup matching between `**ox` and `****`.
    fn example_matching() -> CompositeMatching {
        let src = b("**ox");
        let m = Matching::fit(MatchingType { raise: true, power: 1, i: 2 }, &src).unwrap();
        assert_eq!(m.target(), &b("****"));
        assert_eq!(m.local(), LocalPicture::Cup);
        CompositeMatching::from_layers(vec![m]).unwrap()
    }

    #[test]
    fn example_module_has_dimension_six() {
        let module = Bimodule::new(example_matching()).unwrap();
        assert_eq!(module.dim(), 6);
        let mut degs: Vec<i64> = module
            .basis()
            .iter()
            .map(|k| module.degree(k).unwrap())
            .collect();
        degs.sort();
        assert_eq!(degs, vec![-2, -1, 0, 0, 1, 2]);
    }

    #[test]
    fn identity_matching_restricts_the_algebra() {
        let module = Bimodule::new(CompositeMatching::identity(b("**"))).unwrap();
        assert_eq!(module.dim(), 2);
        let mut degs: Vec<i64> = module
            .basis()
            .iter()
            .map(|k| module.degree(k).unwrap())
            .collect();
        degs.sort();
        assert_eq!(degs, vec![-1, 1]);
    }

    #[test]
    fn unit_acts_as_identity() {
        let module = Bimodule::new(example_matching()).unwrap();
        let one_l = unit(&b("**ox"));
        let one_r = unit(&b("****"));
        for key in module.basis() {
            let v = BimoduleElement::basis_vector(key.clone());
            assert_eq!(module.act_left(&one_l, &v).unwrap(), v);
            assert_eq!(module.act_right(&v, &one_r).unwrap(), v);
        }
    }

    #[test]
    fn mismatched_idempotent_annihilates() {
        let module = Bimodule::new(example_matching()).unwrap();
        for key in module.basis() {
            for e in idempotents(&b("**ox")) {
                let ev = AlgebraElement::basis_vector(b("**ox"), e.clone()).unwrap();
                let v = BimoduleElement::basis_vector(key.clone());
                let image = module.act_left(&ev, &v).unwrap();
                if e.lambda == key.lambda {
                    assert_eq!(image, v);
                } else {
                    assert!(image.is_zero());
                }
            }
        }
    }

    #[test]
    fn actions_commute_on_example() {
        let module = Bimodule::new(example_matching()).unwrap();
        let left = crate::algebra::basis(&b("**ox"));
        let right = crate::algebra::basis(&b("****"));
        for a in &left {
            let av = AlgebraElement::basis_vector(b("**ox"), a.clone()).unwrap();
            for bb in &right {
                let bv = AlgebraElement::basis_vector(b("****"), bb.clone()).unwrap();
                for key in module.basis() {
                    let v = BimoduleElement::basis_vector(key.clone());
                    let lr = module
                        .act_right(&module.act_left(&av, &v).unwrap(), &bv)
                        .unwrap();
                    let rl = module
                        .act_left(&av, &module.act_right(&v, &bv).unwrap())
                        .unwrap();
                    assert_eq!(lr, rl);
                }
            }
        }
    }

    #[test]
    fn actions_are_degree_additive_on_example() {
        let module = Bimodule::new(example_matching()).unwrap();
        for a in crate::algebra::basis(&b("**ox")) {
            let av = AlgebraElement::basis_vector(b("**ox"), a.clone()).unwrap();
            for key in module.basis() {
                let v = BimoduleElement::basis_vector(key.clone());
                let image = module.act_left(&av, &v).unwrap();
                for (k, _) in image.terms() {
                    assert_eq!(
                        module.degree(k).unwrap(),
                        a.degree() as i64 + module.degree(key).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn downward_reduction_examples() {
        // All-rays layers reduce to the boundary cap itself.
        let module = Bimodule::new(CompositeMatching::identity(b("**"))).unwrap();
        let red = module.downward_reduction(&w("v^")).unwrap();
        assert_eq!(red, canonical_cup(&w("v^")).reflect());

        // The example module reduces every top cap to a cap over **ox.
        let module = Bimodule::new(example_matching()).unwrap();
        for eta in b("****").members(true) {
            let red = module.downward_reduction(&eta).unwrap();
            assert_eq!(red.block(), &b("**ox"));
            assert_eq!(red.caps().len(), 1);
        }
    }

    #[test]
    fn empty_move_module_decomposes() {
        // Block with (o, x) at positions (0, 1): the +2a_0 empty move fits.
        let src = b("ox**");
        let empty = Matching::fit(MatchingType { raise: true, power: 2, i: 0 }, &src).unwrap();
        assert!(empty.is_empty_move());
        let n = Bimodule::new(CompositeMatching::from_layers(vec![empty]).unwrap()).unwrap();

        // The cup-then-cap module over the same blocks.
        let cup = Matching::fit(MatchingType { raise: true, power: 1, i: 0 }, &src).unwrap();
        let cap = Matching::fit(MatchingType { raise: true, power: 1, i: 0 }, cup.target()).unwrap();
        let m = Bimodule::new(CompositeMatching::from_layers(vec![cup, cap]).unwrap()).unwrap();

        // Graded dimensions: dim_q M = (q + q^-1) dim_q N.
        let dim_n = n.graded_dimension().unwrap();
        let dim_m = m.graded_dimension().unwrap();
        assert_eq!(dim_m, LaurentPoly::quantum_two() * dim_n.clone());
        assert_eq!(m.dim(), 2 * n.dim());
    }

    #[test]
    fn howe_assignments() {
        let id = howe_cm(&[Generator::Id], &b("**")).unwrap();
        assert_eq!(id.layers().len(), 0);

        // The example matching is the unique fitting picture between its
        // blocks, reached by a single raising generator.
        let m = howe_cm(&[Generator::E { i: 2, power: 1 }], &b("**ox")).unwrap();
        assert_eq!(m.layers()[0].local(), LocalPicture::Cup);
        assert_eq!(m.target(), &b("****"));
        assert_eq!(Matching::between(&b("**ox"), &b("****")).len(), 1);

        // Higher divided powers act as zero.
        assert!(howe_cm(&[Generator::E { i: 0, power: 3 }], &b("**")).is_none());

        // Empty moves are the squared generators.
        let e2 = howe_cm(&[Generator::E { i: 0, power: 2 }], &b("ox")).unwrap();
        assert!(e2.layers()[0].is_empty_move());
    }

    #[test]
    fn generator_parsing() {
        assert_eq!(Generator::parse("1").unwrap(), Generator::Id);
        assert_eq!(Generator::parse("E2").unwrap(), Generator::E { i: 2, power: 1 });
        assert_eq!(Generator::parse("F_-1").unwrap(), Generator::F { i: -1, power: 1 });
        assert_eq!(Generator::parse("F0^(2)").unwrap(), Generator::F { i: 0, power: 2 });
        assert!(Generator::parse("G3").is_err());
    }
}
