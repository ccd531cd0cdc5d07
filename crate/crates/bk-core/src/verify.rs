//! Exhaustive verification harness: runs the structural law suites over all
//! balanced blocks within given size caps and reports counterexamples in
//! full.

use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    basis, idempotents, mult, mult_basis, mult_basis_traced, mult_basis_with_order, unit,
    AlgebraElement, StepKind, SurgeryState,
};
use crate::arc::{canonical_cup, CircleDiagram};
use crate::bimod::{Bimodule, BimoduleElement, CompositeMatching, Matching, MatchingType};
use crate::blocks::{balanced_blocks_up_to, Block};
use crate::error::Result;
use crate::planar::ArcKind;
use crate::web::{ipe_formula, ipe_minus_nested_formula, stack, web_of_weight};

/// Size caps and determinism knobs for a verification run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Caps {
    pub max_stars: u32,
    pub max_crosses: u32,
    /// Star cap for the triple (associativity) laws.
    pub max_stars_triple: u32,
    pub order_samples: u32,
    pub seed: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_stars: 6,
            max_crosses: 2,
            max_stars_triple: 6,
            order_samples: 10_000,
            seed: 0,
        }
    }
}

/// Outcome of one suite: checks counted and counterexamples collected.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: u64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} checks, {}",
            self.name,
            self.checks,
            if self.passed() {
                "ok".to_string()
            } else {
                format!("{} FAILURES", self.failures.len())
            }
        )
    }
}

fn blocks_for(caps: &Caps, stars: u32) -> Vec<Block> {
    balanced_blocks_up_to(stars, caps.max_crosses)
}

/// Associativity of the surgery multiplication on all basis triples with
/// matching idempotent supports.
pub fn associativity(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("associativity");
    let blocks = balanced_blocks_up_to(caps.max_stars_triple, caps.max_crosses.min(1));
    let results: Vec<Result<(u64, Vec<String>)>> = blocks
        .par_iter()
        .map(|block| {
            let bas = basis(block);
            let mut checks = 0;
            let mut failures = Vec::new();
            for x in &bas {
                for y in &bas {
                    if x.mu != y.lambda {
                        continue;
                    }
                    let xy = mult_basis(x, y)?;
                    for z in &bas {
                        if y.mu != z.lambda {
                            continue;
                        }
                        checks += 1;
                        let yz = mult_basis(y, z)?;
                        let zv = AlgebraElement::basis_vector(block.clone(), z.clone())?;
                        let xv = AlgebraElement::basis_vector(block.clone(), x.clone())?;
                        let lhs = mult(&xy, &zv)?;
                        let rhs = mult(&xv, &yz)?;
                        if lhs != rhs {
                            failures.push(format!(
                                "block {block}: ({x})({y})({z}): lhs = {lhs}, rhs = {rhs}"
                            ));
                        }
                    }
                }
            }
            Ok((checks, failures))
        })
        .collect();
    for r in results {
        let (checks, failures) = r?;
        report.checks += checks;
        report.failures.extend(failures);
    }
    Ok(report)
}

/// Randomly sampled valid surgery orders agree with the leftmost order.
pub fn order_independence(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("order-independence");
    let blocks = blocks_for(caps, caps.max_stars);
    let mut pairs = Vec::new();
    for block in &blocks {
        let bas = basis(block);
        for x in &bas {
            for y in &bas {
                if x.mu == y.lambda {
                    pairs.push((x.clone(), y.clone()));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Ok(report);
    }
    let mut rng = StdRng::seed_from_u64(caps.seed);
    for _ in 0..caps.order_samples {
        let (x, y) = &pairs[rng.gen_range(0..pairs.len())];
        // Draw a random valid order: any available pair at each step.
        let mut state = SurgeryState::new(x, y)?;
        let mut order = Vec::new();
        while state.remaining() > 0 {
            let avail = state.available_pairs();
            let pick = avail[rng.gen_range(0..avail.len())];
            order.push(pick);
            state.step(pick)?;
        }
        report.checks += 1;
        let shuffled = mult_basis_with_order(x, y, &order)?;
        let leftmost = mult_basis(x, y)?;
        if shuffled != leftmost {
            report.failures.push(format!(
                "({x})({y}) under order {order:?}: {shuffled} != {leftmost}"
            ));
        }
    }
    Ok(report)
}

/// Nonzero products are homogeneous of additive degree, circle distances are
/// 2 mod 4, and the quarter exponents are integral.
pub fn grading(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("grading");
    for block in blocks_for(caps, caps.max_stars) {
        let bas = basis(&block);
        for x in &bas {
            for y in &bas {
                if x.mu != y.lambda {
                    continue;
                }
                report.checks += 1;
                let p = mult_basis(x, y)?;
                if p.is_zero() {
                    continue;
                }
                match p.homogeneous_degree() {
                    Some(d) if d == x.degree() + y.degree() => {}
                    other => report.failures.push(format!(
                        "({x})({y}) has degree {other:?}, expected {}",
                        x.degree() + y.degree()
                    )),
                }
            }
        }
        for lam in block.members(true) {
            for mu in block.members(true) {
                let shape =
                    CircleDiagram::new(canonical_cup(&lam), canonical_cup(&mu).reflect())?;
                let planar = shape.planar();
                for c in shape.components() {
                    report.checks += 1;
                    let d: u64 = c
                        .arcs
                        .iter()
                        .map(|&a| match planar.arcs[a] {
                            ArcKind::CupBelow { i, j, .. } | ArcKind::CapAbove { i, j, .. } => {
                                block.distance(i, j)
                            }
                            _ => 0,
                        })
                        .sum();
                    if d % 4 != 2 {
                        report.failures.push(format!(
                            "circle distance {d} in block {block} is not 2 mod 4"
                        ));
                    }
                    if ipe_minus_nested_formula(d).is_err() {
                        report
                            .failures
                            .push(format!("quarter exponent not integral for d = {d}"));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Geometric internal-phantom-edge counts on two-layer stacked webs agree
/// with the distance formulas, circle by circle.
pub fn ipe_geometry(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("ipe-geometry");
    let blocks = blocks_for(caps, caps.max_stars);
    let results: Vec<Result<(u64, Vec<String>)>> = blocks
        .par_iter()
        .map(|block| {
            let mut checks = 0;
            let mut failures = Vec::new();
            for lam in block.members(true) {
                for mu in block.members(true) {
                    let shape =
                        CircleDiagram::new(canonical_cup(&lam), canonical_cup(&mu).reflect())?;
                    let planar = shape.planar();
                    let comps = shape.components();
                    let circles: Vec<_> = comps.iter().filter(|c| c.is_circle).collect();
                    let parents = planar.nesting_parents(&circles);
                    let dist = |k: usize| -> u64 {
                        circles[k]
                            .arcs
                            .iter()
                            .map(|&a| match planar.arcs[a] {
                                ArcKind::CupBelow { i, j, .. }
                                | ArcKind::CapAbove { i, j, .. } => block.distance(i, j),
                                _ => 0,
                            })
                            .sum()
                    };
                    let bottom = web_of_weight(&lam)?.geometry();
                    let top = web_of_weight(&mu)?.geometry();
                    let stacked = stack(&[(&bottom, false), (&top, true)]);
                    let y = stacked.junctions[0];
                    for (k, circle) in circles.iter().enumerate() {
                        checks += 1;
                        let mut positions: Vec<i64> =
                            circle.vertices.iter().map(|v| v.0).collect();
                        positions.sort();
                        positions.dedup();
                        let web_idx = match stacked.find_circle(&[(y, &positions)]) {
                            Some(idx) => idx,
                            None => {
                                failures.push(format!(
                                    "no web circle for {positions:?} in {lam} {mu}"
                                ));
                                continue;
                            }
                        };
                        // Every circle nested inside, not only direct children.
                        let mut all_nested: Vec<u64> = Vec::new();
                        for (m, _) in circles.iter().enumerate() {
                            let mut p = parents[m];
                            while let Some(q) = p {
                                if q == k {
                                    all_nested.push(dist(m));
                                    break;
                                }
                                p = parents[q];
                            }
                        }
                        let expect_ipe = ipe_formula(dist(k), &all_nested)?;
                        let expect_minus = ipe_minus_nested_formula(dist(k))?;
                        let got_ipe = stacked.ipe(web_idx) as u64;
                        let got_minus = stacked.ipe_minus_nested(web_idx) as u64;
                        if got_ipe != expect_ipe || got_minus != expect_minus {
                            failures.push(format!(
                                "block {block} {lam}|{mu} circle {positions:?}: geometric \
                                 ipe {got_ipe}/{got_minus}, formula {expect_ipe}/{expect_minus}"
                            ));
                        }
                    }
                }
            }
            Ok((checks, failures))
        })
        .collect();
    for r in results {
        let (checks, failures) = r?;
        report.checks += checks;
        report.failures.extend(failures);
    }
    Ok(report)
}

/// The arc-side sign exponents of nested surgery steps agree mod 2 with the
/// exponents reconstructed from internal-phantom-edge counts and the saddle
/// width.
pub fn sign_cross_check(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("sign-cross-check");
    for block in blocks_for(caps, caps.max_stars) {
        let bas = basis(&block);
        for x in &bas {
            for y in &bas {
                if x.mu != y.lambda {
                    continue;
                }
                let (_, trace) = mult_basis_traced(x, y)?;
                for rec in &trace {
                    report.checks += 1;
                    let s = rec.saddle_width;
                    if !rec.nested {
                        continue;
                    }
                    let d_in = rec.d_inner.expect("nested steps record the inner circle");
                    let d_out = rec.d_outer.expect("nested steps record the outer circle");
                    // Web side: (-1)^(ipe(C_out) - s + ipe(C_out - C_in)),
                    // both counts taken from the distance formulas.
                    let web_exp =
                        ipe_formula(d_out, &[d_in])? + ipe_minus_nested_formula(d_out)? + s;
                    // Arc side: nested merges carry -(-1)^((d_in-2)/4)(-1)^s;
                    // nested splits carry the topological factor with the
                    // sign asymmetry of the two copies.
                    let arc_exp = match rec.kind {
                        StepKind::Merge => 1 + (d_in - 2) / 4 + s,
                        StepKind::Split => (d_in - 2) / 4 + s + 1,
                    };
                    if (web_exp + arc_exp) % 2 != 0 {
                        report.failures.push(format!(
                            "({x})({y}) step {rec:?}: web exponent {web_exp}, arc exponent {arc_exp}"
                        ));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Bimodule laws: action commutation on short composite matchings plus the
/// unit laws transported through the reductions.
pub fn bimodule_laws(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("bimodule-laws");
    let stars = caps.max_stars.min(4);
    for block in balanced_blocks_up_to(stars, caps.max_crosses.min(1)) {
        for m1 in all_matchings_from(&block) {
            if m1.target().star_count() > stars {
                continue;
            }
            let mut composites = vec![CompositeMatching::from_layers(vec![m1.clone()])?];
            for m2 in all_matchings_from(m1.target()) {
                if m2.target().star_count() <= stars {
                    composites.push(CompositeMatching::from_layers(vec![m1.clone(), m2])?);
                }
            }
            for cm in composites {
                let module = Bimodule::new(cm)?;
                if module.dim() == 0 {
                    continue;
                }
                let left = basis(module.bottom_block());
                let right = basis(module.top_block());
                for a in &left {
                    let av =
                        AlgebraElement::basis_vector(module.bottom_block().clone(), a.clone())?;
                    for b in &right {
                        let bv =
                            AlgebraElement::basis_vector(module.top_block().clone(), b.clone())?;
                        for key in module.basis() {
                            report.checks += 1;
                            let v = BimoduleElement::basis_vector(key.clone());
                            let lr = module.act_right(&module.act_left(&av, &v)?, &bv)?;
                            let rl = module.act_left(&av, &module.act_right(&v, &bv)?)?;
                            if lr != rl {
                                report.failures.push(format!(
                                    "actions do not commute over {} with a = {a}, b = {b}",
                                    module.matching().source()
                                ));
                            }
                        }
                    }
                }
                let one_l = unit(module.bottom_block());
                let one_r = unit(module.top_block());
                for key in module.basis() {
                    report.checks += 1;
                    let v = BimoduleElement::basis_vector(key.clone());
                    if module.act_left(&one_l, &v)? != v || module.act_right(&v, &one_r)? != v {
                        report
                            .failures
                            .push(format!("unit does not act as identity on {key:?}"));
                    }
                }
            }
        }
    }
    report.checks += 1;
    if let Err(e) = empty_move_decomposition() {
        report.failures.push(format!("empty move decomposition: {e}"));
    }
    Ok(report)
}

/// The cup-then-cap module decomposes as two shifted copies of the empty
/// move module: graded dimensions match and the action matrices are block
/// diagonal with two copies of the empty move action.
pub fn empty_move_decomposition() -> Result<()> {
    use crate::error::BkError;
    let src = Block::parse(0, "ox**")?;
    let empty = Matching::fit(MatchingType { raise: true, power: 2, i: 0 }, &src)
        .ok_or_else(|| BkError::Invariant("empty move does not fit".into()))?;
    let n = Bimodule::new(CompositeMatching::from_layers(vec![empty])?)?;
    let cup = Matching::fit(MatchingType { raise: true, power: 1, i: 0 }, &src)
        .ok_or_else(|| BkError::Invariant("cup move does not fit".into()))?;
    let cap = Matching::fit(MatchingType { raise: true, power: 1, i: 0 }, cup.target())
        .ok_or_else(|| BkError::Invariant("cap move does not fit".into()))?;
    let m = Bimodule::new(CompositeMatching::from_layers(vec![cup, cap])?)?;

    let expect = crate::poly::LaurentPoly::quantum_two() * n.graded_dimension()?;
    if m.graded_dimension()? != expect {
        return Err(BkError::Invariant(format!(
            "graded dimensions do not match: {} vs {}",
            m.graded_dimension()?,
            expect
        )));
    }

    // The basis splits by the orientation of the internal circle; the
    // anticlockwise half is the empty move basis and neither action touches
    // the internal circle.
    let acw: Vec<usize> = (0..m.dim())
        .filter(|&k| n.basis().contains(&m.basis()[k]))
        .collect();
    let cw: Vec<usize> = (0..m.dim()).filter(|k| !acw.contains(k)).collect();
    if acw.len() != n.dim() || cw.len() != n.dim() {
        return Err(BkError::Invariant("basis does not split evenly".into()));
    }
    let outer = |k: &crate::bimod::StretchedKey| {
        (
            k.lambda.clone(),
            k.nus.first().cloned(),
            k.nus.last().cloned(),
            k.eta.clone(),
        )
    };
    let pair_of = |k: usize| -> Option<usize> {
        let sig = outer(&m.basis()[k]);
        cw.iter().copied().find(|&c| outer(&m.basis()[c]) == sig)
    };
    for a in basis(m.bottom_block()) {
        let full = m.action_matrix_left(&a)?;
        let small = n.action_matrix_left(&a)?;
        for (r, &kr) in acw.iter().enumerate() {
            for (c, &kc) in acw.iter().enumerate() {
                let (pr, pc) = match (pair_of(kr), pair_of(kc)) {
                    (Some(pr), Some(pc)) => (pr, pc),
                    _ => return Err(BkError::Invariant("missing clockwise partner".into())),
                };
                if full[kr][kc] != small[r][c] || full[pr][pc] != small[r][c] {
                    return Err(BkError::Invariant(
                        "action blocks differ from the empty move module".into(),
                    ));
                }
                if full[kr][pc] != 0 || full[pr][kc] != 0 {
                    return Err(BkError::Invariant("summands mix under the action".into()));
                }
            }
        }
    }
    Ok(())
}

/// Degree bookkeeping: the clockwise-arc degree agrees with the per-circle
/// cup count, and flipping one circle moves the degree by exactly two.
pub fn degree_laws(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("degree-laws");
    for block in blocks_for(caps, caps.max_stars) {
        for lam in block.members(true) {
            for mu in block.members(true) {
                let shape =
                    CircleDiagram::new(canonical_cup(&lam), canonical_cup(&mu).reflect())?;
                let planar = shape.planar();
                let comps = shape.components();
                let orientations = shape.orientations();
                for o in &orientations {
                    report.checks += 1;
                    let states = o.circle_states();
                    let mut expected = 0i64;
                    for (c, st) in comps.iter().zip(&states) {
                        let cups = c
                            .arcs
                            .iter()
                            .filter(|&&a| matches!(planar.arcs[a], ArcKind::CupBelow { .. }))
                            .count() as i64;
                        expected += match st {
                            Some(crate::arc::CircleState::Clockwise) => cups + 1,
                            Some(crate::arc::CircleState::Anticlockwise) => cups - 1,
                            None => 0,
                        };
                    }
                    if o.degree() as i64 != expected {
                        report
                            .failures
                            .push(format!("degree mismatch on {lam}|{}|{mu}", o.orientation()));
                    }
                }
                for o in &orientations {
                    for o2 in &orientations {
                        let flips = o
                            .circle_states()
                            .iter()
                            .zip(o2.circle_states())
                            .filter(|(a, b)| **a != *b)
                            .count();
                        if flips == 1 {
                            report.checks += 1;
                            if o.degree().abs_diff(o2.degree()) != 2 {
                                report.failures.push(format!(
                                    "single flip changed degree by {} on {lam}|{mu}",
                                    o.degree().abs_diff(o2.degree())
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Idempotent and unit laws over all blocks in range.
pub fn idempotent_laws(caps: &Caps) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("idempotents");
    for block in blocks_for(caps, caps.max_stars) {
        let bas = basis(&block);
        let one = unit(&block);
        for e in idempotents(&block) {
            report.checks += 1;
            let ev = AlgebraElement::basis_vector(block.clone(), e.clone())?;
            if mult(&ev, &ev)? != ev {
                report.failures.push(format!("{e} is not idempotent"));
            }
        }
        for d in &bas {
            report.checks += 1;
            let v = AlgebraElement::basis_vector(block.clone(), d.clone())?;
            if mult(&one, &v)? != v || mult(&v, &one)? != v {
                report.failures.push(format!("unit fails on {d}"));
            }
            for e in idempotents(&block) {
                let ev = AlgebraElement::basis_vector(block.clone(), e.clone())?;
                let le = mult(&ev, &v)?;
                let expected_zero = e.lambda != d.lambda;
                if expected_zero != le.is_zero() {
                    report
                        .failures
                        .push(format!("left idempotent law fails on {e}, {d}"));
                }
            }
        }
    }
    Ok(report)
}

/// Every named suite in a fixed order.
pub fn all_suites(caps: &Caps) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        associativity(caps)?,
        order_independence(caps)?,
        grading(caps)?,
        ipe_geometry(caps)?,
        sign_cross_check(caps)?,
        bimodule_laws(caps)?,
        degree_laws(caps)?,
        idempotent_laws(caps)?,
    ])
}

/// All single matchings out of a block within one position of its support.
pub fn all_matchings_from(block: &Block) -> Vec<Matching> {
    let (lo, hi) = block.support();
    let mut out = Vec::new();
    for i in (lo - 1)..(hi + 1) {
        for raise in [false, true] {
            for power in [1u8, 2] {
                if let Some(m) = Matching::fit(MatchingType { raise, power, i }, block) {
                    out.push(m);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_caps() -> Caps {
        Caps {
            max_stars: 4,
            max_crosses: 1,
            max_stars_triple: 4,
            order_samples: 200,
            seed: 7,
        }
    }

    #[test]
    fn suites_pass_at_small_caps() {
        for report in all_suites(&small_caps()).unwrap() {
            assert!(report.passed(), "{report}\n{:?}", report.failures);
            assert!(report.checks > 0, "{report} ran no checks");
        }
    }

    #[test]
    fn order_independence_is_reproducible() {
        let caps = small_caps();
        let a = order_independence(&caps).unwrap();
        let b = order_independence(&caps).unwrap();
        assert_eq!(a.checks, b.checks);
        assert_eq!(a.failures, b.failures);
    }
}





