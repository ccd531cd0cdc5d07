//! Weights, blocks and the positional metrics (position, distance, saddle
//! width) that drive every sign in the surgery multiplication.
//!
//! A weight is a ZZ-indexed sequence over `{o, x, v, ^}` with finite support;
//! a block is its equivalence class under permuting `v`/`^`, recorded as a
//! sequence over `{o, x, *}` together with up/down counts.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BkError, Result};

/// Entry of a weight: `o`, `x`, `v` (down) or `^` (up).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum WeightSym {
    O,
    X,
    Down,
    Up,
}

impl WeightSym {
    pub fn to_char(self) -> char {
        match self {
            WeightSym::O => 'o',
            WeightSym::X => 'x',
            WeightSym::Down => 'v',
            WeightSym::Up => '^',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'o' => Ok(WeightSym::O),
            'x' => Ok(WeightSym::X),
            'v' => Ok(WeightSym::Down),
            '^' => Ok(WeightSym::Up),
            _ => Err(BkError::Parse(format!("invalid weight symbol {c:?}"))),
        }
    }
}

/// Entry of a block sequence: `o`, `x` or `*`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum BlockSym {
    O,
    X,
    Star,
}

impl BlockSym {
    pub fn to_char(self) -> char {
        match self {
            BlockSym::O => 'o',
            BlockSym::X => 'x',
            BlockSym::Star => '*',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'o' => Ok(BlockSym::O),
            'x' => Ok(BlockSym::X),
            '*' => Ok(BlockSym::Star),
            _ => Err(BkError::Parse(format!("invalid block symbol {c:?}"))),
        }
    }
}

/// A diagrammatical weight: finitely many non-`o` entries on ZZ.
///
/// Stored normalized: `start` is the position of the first non-`o` entry and
/// `syms` carries the window up to the last one. Equality ignores `o`-padding.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Weight {
    start: i64,
    syms: Vec<WeightSym>,
}

impl Weight {
    pub fn new(start: i64, syms: Vec<WeightSym>) -> Self {
        let mut w = Weight { start, syms };
        w.normalize();
        w
    }

    pub fn empty() -> Self {
        Weight::default()
    }

    /// Parse from characters `o x v ^` placed at consecutive positions
    /// starting at `start`.
    pub fn parse(start: i64, s: &str) -> Result<Self> {
        let syms = s.chars().map(WeightSym::from_char).collect::<Result<_>>()?;
        Ok(Weight::new(start, syms))
    }

    fn normalize(&mut self) {
        while self.syms.first() == Some(&WeightSym::O) {
            self.syms.remove(0);
            self.start += 1;
        }
        while self.syms.last() == Some(&WeightSym::O) {
            self.syms.pop();
        }
        if self.syms.is_empty() {
            self.start = 0;
        }
    }

    pub fn get(&self, i: i64) -> WeightSym {
        if i < self.start || i >= self.start + self.syms.len() as i64 {
            WeightSym::O
        } else {
            self.syms[(i - self.start) as usize]
        }
    }

    pub fn set(&mut self, i: i64, s: WeightSym) {
        if i < self.start {
            let pad = (self.start - i) as usize;
            let mut syms = vec![WeightSym::O; pad];
            syms.extend(self.syms.iter().copied());
            self.syms = syms;
            self.start = i;
        } else if i >= self.start + self.syms.len() as i64 {
            let need = (i - self.start) as usize + 1;
            self.syms.resize(need, WeightSym::O);
        }
        self.syms[(i - self.start) as usize] = s;
        self.normalize();
    }

    /// Smallest window `[start, end)` containing all non-`o` entries.
    pub fn support(&self) -> (i64, i64) {
        (self.start, self.start + self.syms.len() as i64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, WeightSym)> + '_ {
        self.syms
            .iter()
            .enumerate()
            .map(move |(k, &s)| (self.start + k as i64, s))
    }

    /// Positions labeled `v` or `^`.
    pub fn oriented_positions(&self) -> Vec<i64> {
        self.iter()
            .filter(|(_, s)| matches!(s, WeightSym::Down | WeightSym::Up))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn ascii(&self) -> String {
        self.syms.iter().map(|s| s.to_char()).collect()
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syms.is_empty() {
            return write!(f, "(empty)");
        }
        if self.start != 0 {
            write!(f, "[{}]", self.start)?;
        }
        write!(f, "{}", self.ascii())
    }
}

/// A block: a sequence over `{o, x, *}` with up/down counts.
///
/// `up` counts the `^`'s of any member weight and `down` the `v`'s, where an
/// `x` counts as both.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Block {
    start: i64,
    syms: Vec<BlockSym>,
    up: u32,
    down: u32,
}

impl Block {
    pub fn new(start: i64, syms: Vec<BlockSym>, up: u32, down: u32) -> Result<Self> {
        let mut b = Block {
            start,
            syms,
            up,
            down,
        };
        b.normalize();
        let stars = b.star_count();
        let crosses = b.cross_count();
        if b.up + b.down != stars + 2 * crosses {
            return Err(BkError::Parse(format!(
                "inconsistent block counts: up={} down={} with {} stars and {} crosses",
                b.up, b.down, stars, crosses
            )));
        }
        if b.up < crosses || b.down < crosses {
            return Err(BkError::Parse(
                "block up/down counts smaller than cross count".into(),
            ));
        }
        Ok(b)
    }

    /// The balanced block on a given sequence, when it exists.
    pub fn balanced(start: i64, syms: Vec<BlockSym>) -> Result<Self> {
        let stars = syms.iter().filter(|s| **s == BlockSym::Star).count() as u32;
        let crosses = syms.iter().filter(|s| **s == BlockSym::X).count() as u32;
        if stars % 2 != 0 {
            return Err(BkError::Parse(
                "a balanced block needs an even number of stars".into(),
            ));
        }
        let half = stars / 2 + crosses;
        Block::new(start, syms, half, half)
    }

    /// Parse a block from characters `o x *`. With an even number of stars
    /// this yields the balanced block on the sequence; with an odd number the
    /// up count exceeds the down count by one.
    pub fn parse(start: i64, s: &str) -> Result<Self> {
        let syms = s.chars().map(BlockSym::from_char).collect::<Result<Vec<_>>>()?;
        let stars = syms.iter().filter(|s| **s == BlockSym::Star).count() as u32;
        let crosses = syms.iter().filter(|s| **s == BlockSym::X).count() as u32;
        Block::new(start, syms, crosses + stars.div_ceil(2), crosses + stars / 2)
    }

    fn normalize(&mut self) {
        while self.syms.first() == Some(&BlockSym::O) {
            self.syms.remove(0);
            self.start += 1;
        }
        while self.syms.last() == Some(&BlockSym::O) {
            self.syms.pop();
        }
        if self.syms.is_empty() {
            self.start = 0;
        }
    }

    pub fn get(&self, i: i64) -> BlockSym {
        if i < self.start || i >= self.start + self.syms.len() as i64 {
            BlockSym::O
        } else {
            self.syms[(i - self.start) as usize]
        }
    }

    pub fn support(&self) -> (i64, i64) {
        (self.start, self.start + self.syms.len() as i64)
    }

    pub fn up(&self) -> u32 {
        self.up
    }

    pub fn down(&self) -> u32 {
        self.down
    }

    pub fn is_balanced(&self) -> bool {
        self.up == self.down
    }

    pub fn star_count(&self) -> u32 {
        self.syms.iter().filter(|s| **s == BlockSym::Star).count() as u32
    }

    pub fn cross_count(&self) -> u32 {
        self.syms.iter().filter(|s| **s == BlockSym::X).count() as u32
    }

    /// Positions carrying a `*`, in increasing order. These are the vertices
    /// of every arc diagram over this block.
    pub fn star_positions(&self) -> Vec<i64> {
        self.iter()
            .filter(|(_, s)| *s == BlockSym::Star)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cross_positions(&self) -> Vec<i64> {
        self.iter()
            .filter(|(_, s)| *s == BlockSym::X)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, BlockSym)> + '_ {
        self.syms
            .iter()
            .enumerate()
            .map(move |(k, &s)| (self.start + k as i64, s))
    }

    pub fn ascii(&self) -> String {
        self.syms.iter().map(|s| s.to_char()).collect()
    }

    /// Whether `w` is a member weight of this block.
    pub fn contains_weight(&self, w: &Weight) -> bool {
        block_of(w) == *self
    }

    /// Position metric: number of stars at positions `<= i` plus twice the
    /// number of crosses at positions `<= i`.
    pub fn position(&self, i: i64) -> u64 {
        let mut p = 0u64;
        for (j, s) in self.iter() {
            if j > i {
                break;
            }
            match s {
                BlockSym::Star => p += 1,
                BlockSym::X => p += 2,
                BlockSym::O => {}
            }
        }
        p
    }

    /// Distance of an arc connecting vertices `i` and `j`.
    pub fn distance(&self, i: i64, j: i64) -> u64 {
        self.position(i).abs_diff(self.position(j))
    }

    /// Saddle width `(distance + 1) / 2`; errors when the distance is even,
    /// which signals an arc whose endpoints have the same parity and hence an
    /// invalid cup for these algebras.
    pub fn saddle_width(&self, i: i64, j: i64) -> Result<u64> {
        let d = self.distance(i, j);
        if d % 2 == 0 {
            return Err(BkError::NonIntegralSaddleWidth { i, j, distance: d });
        }
        Ok((d + 1) / 2)
    }

    /// All member weights; with `cups_only`, exactly those whose canonical cup
    /// diagram has no rays (empty unless the block is balanced).
    pub fn members(&self, cups_only: bool) -> Vec<Weight> {
        if cups_only && !self.is_balanced() {
            return Vec::new();
        }
        let stars = self.star_positions();
        let ups_needed = self.up as i64 - self.cross_count() as i64;
        if ups_needed < 0 || ups_needed as usize > stars.len() {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut picks: Vec<BTreeSet<usize>> = Vec::new();
        choose(stars.len(), ups_needed as usize, &mut picks);
        for pick in picks {
            let mut w = Weight::empty();
            for (i, s) in self.iter() {
                match s {
                    BlockSym::O => {}
                    BlockSym::X => w.set(i, WeightSym::X),
                    BlockSym::Star => {}
                }
            }
            for (k, &pos) in stars.iter().enumerate() {
                let sym = if pick.contains(&k) {
                    WeightSym::Up
                } else {
                    WeightSym::Down
                };
                w.set(pos, sym);
            }
            if !cups_only || crate::arc::canonical_cup(&w).rays().is_empty() {
                out.push(w);
            }
        }
        out.sort();
        out
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syms.is_empty() {
            return write!(f, "(empty)");
        }
        if self.start != 0 {
            write!(f, "[{}]", self.start)?;
        }
        write!(f, "{}", self.ascii())
    }
}

fn choose(n: usize, k: usize, out: &mut Vec<BTreeSet<usize>>) {
    fn rec(next: usize, n: usize, k: usize, cur: &mut BTreeSet<usize>, out: &mut Vec<BTreeSet<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        if next >= n || n - next < k - cur.len() {
            return;
        }
        cur.insert(next);
        rec(next + 1, n, k, cur, out);
        cur.remove(&next);
        rec(next + 1, n, k, cur, out);
    }
    let mut cur = BTreeSet::new();
    rec(0, n, k, &mut cur, out);
}

/// The block containing a weight: `v`/`^` become `*`, `x` and `o` copy
/// through.
pub fn block_of(w: &Weight) -> Block {
    let mut syms = Vec::new();
    let (start, end) = w.support();
    let mut up = 0;
    let mut down = 0;
    for i in start..end {
        let s = match w.get(i) {
            WeightSym::O => BlockSym::O,
            WeightSym::X => {
                up += 1;
                down += 1;
                BlockSym::X
            }
            WeightSym::Down => {
                down += 1;
                BlockSym::Star
            }
            WeightSym::Up => {
                up += 1;
                BlockSym::Star
            }
        };
        syms.push(s);
    }
    Block::new(start, syms, up, down).expect("counts derived from the weight are consistent")
}

/// Enumerate balanced block shapes with the given number of stars and at most
/// `max_crosses` crosses, with symbols at consecutive positions starting at 0.
///
/// Interior `o`'s change no positional metric and no diagram, so each shape
/// class is listed once, densely packed.
pub fn balanced_blocks(stars: u32, max_crosses: u32) -> Vec<Block> {
    assert!(stars % 2 == 0, "balanced blocks have an even number of stars");
    let mut out = Vec::new();
    for crosses in 0..=max_crosses {
        let n = (stars + crosses) as usize;
        let mut picks = Vec::new();
        choose(n, crosses as usize, &mut picks);
        for pick in picks {
            let syms: Vec<BlockSym> = (0..n)
                .map(|k| if pick.contains(&k) { BlockSym::X } else { BlockSym::Star })
                .collect();
            out.push(Block::balanced(0, syms).expect("even star count"));
        }
    }
    out
}

/// All balanced blocks with up to `max_stars` stars and `max_crosses` crosses.
pub fn balanced_blocks_up_to(max_stars: u32, max_crosses: u32) -> Vec<Block> {
    let mut out = Vec::new();
    let mut s = 0;
    while s <= max_stars {
        out.extend(balanced_blocks(s, max_crosses));
        s += 2;
    }
    out
}

/// JSON shape shared by weights and blocks: an inclusive window `[a, b]` and
/// the entry characters over it.
#[derive(Serialize, Deserialize)]
struct WindowRepr {
    window: [i64; 2],
    entries: String,
}

impl WindowRepr {
    fn of(support: (i64, i64), entries: String) -> Self {
        let (a, b) = support;
        WindowRepr {
            window: [a, b - 1],
            entries,
        }
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        WindowRepr::of(self.support(), self.ascii()).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = WindowRepr::deserialize(de)?;
        Weight::parse(r.window[0], &r.entries).map_err(D::Error::custom)
    }
}

impl Serialize for Block {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        WindowRepr::of(self.support(), self.ascii()).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = WindowRepr::deserialize(de)?;
        Block::parse(r.window[0], &r.entries).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Weight {
        Weight::parse(0, s).unwrap()
    }

    #[test]
    fn block_of_examples() {
        let b = block_of(&w("v^"));
        assert_eq!(b.ascii(), "**");
        assert_eq!((b.up(), b.down()), (1, 1));
        assert!(b.is_balanced());

        let b = block_of(&w("x"));
        assert_eq!(b.ascii(), "x");
        assert_eq!((b.up(), b.down()), (1, 1));
        assert!(b.is_balanced());

        let b = block_of(&w("^^ov"));
        assert_eq!(b.ascii(), "**o*");
        assert_eq!((b.up(), b.down()), (2, 1));
        assert!(!b.is_balanced());
    }

    #[test]
    fn block_of_constant_on_orbit() {
        let b = Block::parse(0, "**o*x*").unwrap();
        let members = b.members(false);
        assert!(!members.is_empty());
        for m in &members {
            assert_eq!(block_of(m), b);
        }
    }

    #[test]
    fn equality_ignores_padding() {
        assert_eq!(Weight::parse(0, "ov^o").unwrap(), Weight::parse(1, "v^").unwrap());
        assert_eq!(Block::parse(0, "o**").unwrap(), Block::parse(1, "**").unwrap());
    }

    #[test]
    fn members_examples() {
        let b = Block::parse(0, "**").unwrap();
        let all = b.members(false);
        assert_eq!(all, vec![w("v^"), w("^v")]);
        assert_eq!(b.members(true), vec![w("v^")]);
        assert_eq!(block_of(&w("v^")), b);

        let empty = Block::parse(0, "").unwrap();
        assert_eq!(empty.members(false), vec![Weight::empty()]);
        assert_eq!(empty.members(true), vec![Weight::empty()]);

        let b4 = Block::parse(0, "****").unwrap();
        assert_eq!(b4.members(false).len(), 6);
        assert_eq!(b4.members(true), vec![w("vv^^"), w("v^v^")]);
    }

    #[test]
    fn members_cardinality_binomial() {
        // |members| = C(stars, up - crosses) on balanced blocks.
        for b in balanced_blocks_up_to(6, 2) {
            let n = b.star_count() as i64;
            let k = b.up() as i64 - b.cross_count() as i64;
            let binom = {
                let mut acc = 1i64;
                for j in 0..k {
                    acc = acc * (n - j) / (j + 1);
                }
                acc
            };
            assert_eq!(b.members(false).len() as i64, binom, "block {}", b.ascii());
        }
    }

    #[test]
    fn position_examples() {
        let b = Block::parse(0, "****").unwrap();
        assert_eq!(
            (0..4).map(|i| b.position(i)).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        let b = Block::parse(0, "*x*").unwrap();
        assert_eq!(
            (0..3).map(|i| b.position(i)).collect::<Vec<_>>(),
            vec![1, 3, 4]
        );
        let b = Block::parse(0, "o*").unwrap();
        assert_eq!(b.position(-5), 0);
    }

    #[test]
    fn distance_and_saddle_width() {
        let b = Block::parse(0, "****").unwrap();
        assert_eq!(b.distance(1, 2), 1);
        assert_eq!(b.saddle_width(1, 2).unwrap(), 1);
        assert_eq!(b.distance(0, 3), 3);
        assert_eq!(b.saddle_width(0, 3).unwrap(), 2);
        let bx = Block::parse(0, "*x*").unwrap();
        assert_eq!(bx.distance(0, 2), 3);
        assert_eq!(bx.saddle_width(0, 2).unwrap(), 2);
        // even distance is rejected, not rounded
        assert!(b.saddle_width(0, 2).is_err());
    }

    #[test]
    fn canonical_cup_distances_are_odd() {
        for b in balanced_blocks_up_to(6, 2) {
            for lambda in b.members(false) {
                let cup = crate::arc::canonical_cup(&lambda);
                for &(i, j) in cup.cups() {
                    assert_eq!(b.distance(i, j) % 2, 1, "block {} cup ({i},{j})", b.ascii());
                    b.saddle_width(i, j).unwrap();
                }
            }
        }
    }
}
