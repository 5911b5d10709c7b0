//! Independent verification of packings and of the accounting behind
//! them.
//!
//! Nothing here reuses the packers' placement logic: validity is
//! recomputed pairwise from the placed geometry, squares are re-mapped
//! to shelves by containment, and the ledger scalars b, e, v, β, α are
//! replayed from the transcript, so agreement with the packer is
//! evidence rather than tautology. Every comparison is exact.

use crate::brick::{BrickState, TreeSnapshot};
use crate::fixed::{DecisionCase, Event, FixedPacker, ShelfKind};
use crate::geometry::{PlacedSquare, Region};
use crate::scalar::Scalar;
use crate::shelf::{ChargeKind, ChargeLedger, ChargeSource, Entity};
use serde::Serialize;

/// One geometric violation: an overlapping pair, or a square outside
/// the container (`b` absent).
#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub a: usize,
    pub b: Option<usize>,
    pub overlap: Option<Region>,
}

/// Result of the geometric validity check.
#[derive(Clone, Debug, Serialize)]
pub struct ValidityReport {
    pub disjoint: bool,
    pub contained: bool,
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.disjoint && self.contained
    }
}

/// Exact pairwise interior-disjointness, plus containment when a
/// container is given. Permutation-invariant in the input order.
pub fn validate(placed: &[PlacedSquare], container: Option<&Region>) -> ValidityReport {
    let mut violations = Vec::new();
    let mut contained = true;
    if let Some(c) = container {
        for sq in placed {
            if !c.contains(&sq.region()) {
                contained = false;
                violations.push(Violation {
                    a: sq.id,
                    b: None,
                    overlap: None,
                });
            }
        }
    }

    // Sweep over x-sorted squares; only x-overlapping pairs are tested.
    let mut order: Vec<usize> = (0..placed.len()).collect();
    order.sort_by(|&i, &j| placed[i].x.cmp(&placed[j].x));
    let mut active: Vec<usize> = Vec::new();
    let mut disjoint = true;
    for &i in &order {
        let ri = placed[i].region();
        active.retain(|&j| placed[j].region().x1 > ri.x0);
        for &j in &active {
            let rj = placed[j].region();
            if ri.interiors_overlap(&rj) {
                disjoint = false;
                let (a, b) = if placed[i].id < placed[j].id {
                    (placed[i].id, placed[j].id)
                } else {
                    (placed[j].id, placed[i].id)
                };
                violations.push(Violation {
                    a,
                    b: Some(b),
                    overlap: ri.intersection(&rj),
                });
            }
        }
        active.push(i);
    }
    violations.sort_by_key(|v| (v.a, v.b));
    ValidityReport {
        disjoint,
        contained,
        violations,
    }
}

/// One audited inequality: `pass` iff the measured value satisfies the
/// claimed bound exactly.
#[derive(Clone, Debug, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub claimed: Scalar,
    pub measured: Scalar,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&AuditCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    fn check_ge(&mut self, name: impl Into<String>, measured: Scalar, claimed: Scalar) {
        let pass = measured >= claimed;
        self.checks.push(AuditCheck {
            name: name.into(),
            claimed,
            measured,
            pass,
        });
    }

    fn check_le(&mut self, name: impl Into<String>, measured: Scalar, claimed: Scalar) {
        let pass = measured <= claimed;
        self.checks.push(AuditCheck {
            name: name.into(),
            claimed,
            measured,
            pass,
        });
    }

    fn check_gt(&mut self, name: impl Into<String>, measured: Scalar, claimed: Scalar) {
        let pass = measured > claimed;
        self.checks.push(AuditCheck {
            name: name.into(),
            claimed,
            measured,
            pass,
        });
    }

    fn check_eq(&mut self, name: impl Into<String>, measured: Scalar, claimed: Scalar) {
        let pass = measured == claimed;
        self.checks.push(AuditCheck {
            name: name.into(),
            claimed,
            measured,
            pass,
        });
    }
}

fn half() -> Scalar {
    Scalar::ratio(1, 2)
}

/// Maps every square to its most specific containing shelf, purely from
/// geometry. `None` for squares in no shelf (large and ceiling ones).
fn map_squares_to_shelves(packer: &FixedPacker) -> Vec<Option<usize>> {
    let shelves = packer.shelves();
    packer
        .squares()
        .iter()
        .map(|sq| {
            let r = sq.region();
            let mut best: Option<(usize, Scalar)> = None;
            for (idx, rec) in shelves.iter().enumerate() {
                if rec.shelf.bounds.contains(&r) {
                    let area = rec.shelf.bounds.area();
                    if best.as_ref().map(|(_, a)| &area < a).unwrap_or(true) {
                        best = Some((idx, area));
                    }
                }
            }
            best.map(|(idx, _)| idx)
        })
        .collect()
}

/// Occupied + assigned area of an entity minus the extra area its
/// squares gave away, recomputed from the square map and the ledger.
fn total_area_of_entity(
    entity: Entity,
    members: &[usize],
    squares: &[PlacedSquare],
    ledger: &ChargeLedger,
) -> Scalar {
    let occupied: Scalar = members.iter().map(|&id| squares[id].area()).sum();
    let mut total = occupied;
    for e in &ledger.entries {
        if e.to == entity {
            total += &e.amount;
        }
        if e.kind == ChargeKind::Extra {
            if let ChargeSource::Square(id) = e.from {
                if members.contains(&id) {
                    total -= &e.amount;
                }
            }
        }
    }
    total
}

/// Full audit of a fixed-packer state: geometry and ledger consistency,
/// the β/α decision discipline, and every density lemma.
pub fn audit_fixed(packer: &FixedPacker) -> AuditReport {
    let mut report = AuditReport::default();
    let squares = packer.squares();
    let shelves = packer.shelves();
    let shelf_of = map_squares_to_shelves(packer);

    // Shelf membership recomputed from geometry must agree with the
    // packed lists, and cursors must equal the packed sides plus carved
    // lane widths.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); shelves.len()];
    for (sq, shelf) in squares.iter().zip(&shelf_of) {
        if let Some(s) = shelf {
            members[*s].push(sq.id);
        }
    }
    let mut mismatch = 0i64;
    for (idx, rec) in shelves.iter().enumerate() {
        let mut expected = rec.shelf.packed.clone();
        expected.sort_unstable();
        let mut got = members[idx].clone();
        got.sort_unstable();
        if expected != got {
            mismatch += 1;
        }
        let packed_sides: Scalar = rec
            .shelf
            .packed
            .iter()
            .map(|&id| squares[id].side.clone())
            .sum();
        let carved: Scalar = shelves
            .iter()
            .enumerate()
            .filter(|(other_idx, other)| {
                *other_idx != idx
                    && rec.shelf.bounds.contains(&other.shelf.bounds)
                    && matches!(
                        other.kind,
                        ShelfKind::Vertical { .. } | ShelfKind::Subshelf { .. }
                    )
            })
            .map(|(_, other)| other.shelf.height())
            .sum();
        if &packed_sides + &carved != rec.shelf.cursor {
            mismatch += 1;
        }
    }
    report.check_eq(
        "shelf-membership-consistency",
        Scalar::from_int(mismatch),
        Scalar::zero(),
    );

    // Recompute the ledger scalars from geometry and the transcript.
    let mut b = Scalar::zero();
    let mut v = Scalar::zero();
    for (idx, rec) in shelves.iter().enumerate() {
        match rec.kind {
            ShelfKind::Buffer(_) => {
                let sides: Scalar = rec
                    .shelf
                    .packed
                    .iter()
                    .map(|&id| squares[id].side.clone())
                    .sum();
                let carved: Scalar = shelves
                    .iter()
                    .enumerate()
                    .filter(|(other_idx, o)| {
                        *other_idx != idx
                            && rec.shelf.bounds.contains(&o.shelf.bounds)
                            && matches!(o.kind, ShelfKind::Subshelf { in_end: None, .. })
                    })
                    .map(|(_, o)| o.shelf.height())
                    .sum();
                b += sides + carved;
            }
            ShelfKind::Vertical { .. } => v += rec.shelf.height(),
            _ => {}
        }
    }
    let e = packer
        .events()
        .iter()
        .filter(|ev| matches!(ev, Event::EndClosed { .. } | Event::EndInstantClosed { .. }))
        .count() as i64;
    report.check_eq("ledger-b-recomputation", packer.b_used().clone(), b.clone());
    report.check_eq("ledger-v-recomputation", packer.v_total().clone(), v.clone());
    report.check_eq(
        "ledger-e-recomputation",
        Scalar::from_int(packer.e_closed() as i64),
        Scalar::from_int(e),
    );
    let beta = &b + &(Scalar::ratio(3, 32) * Scalar::from_int(e)) - Scalar::ratio(3, 16);
    let alpha = &v * &half();
    report.check_eq("beta-definition", packer.beta(), beta.clone());
    report.check_eq("alpha-definition", packer.alpha(), alpha.clone());

    audit_decisions(packer, &mut report);
    audit_main_density(packer, &mut report);
    audit_vertical_shelves(packer, &members, &mut report);
    audit_open_shelves(packer, &members, &mut report);
    audit_buffer_growth(packer, &mut report);
    audit_properties(packer, &mut report);

    // Ledger constants. The required buffer length is a consequence of
    // the budget, so it is only claimed for in-budget inputs.
    if *packer.total_small_area() <= Scalar::ratio(11, 32) {
        report.check_le("buffer-length-required", alpha, Scalar::ratio(22, 16));
    }
    let all_b_closed = (0..4).all(|j| !packer.buffer_shelf(j).shelf.open);
    if all_b_closed {
        let usable: Scalar = (0..4)
            .map(|j| packer.buffer_shelf(j).shelf.length() - Scalar::ratio(1, 16))
            .sum();
        report.check_eq(
            "buffer-length-gained-by-b",
            usable - Scalar::ratio(3, 16),
            Scalar::ratio(17, 16),
        );
    }
    report.check_le("b-within-capacity", b, Scalar::ratio(24, 16));

    report
}

/// Replays the transcript and checks every buffer decision against
/// Definition 1's rule, with β and α recomputed at decision time.
fn audit_decisions(packer: &FixedPacker, report: &mut AuditReport) {
    let squares = packer.squares();
    let shelves = packer.shelves();
    let sixteenth = Scalar::ratio(1, 16);
    let mut b = Scalar::zero();
    let mut e = 0i64;
    let mut v = Scalar::zero();
    let mut bad_values = 0i64;
    let mut bad_rule = 0i64;
    for ev in packer.events() {
        match ev {
            Event::Placed { square, shelf } => {
                if matches!(shelves[*shelf].kind, ShelfKind::Buffer(_)) {
                    b += &squares[*square].side;
                }
            }
            Event::ShelfOpened { shelf } => match shelves[*shelf].kind {
                ShelfKind::Subshelf { in_end: None, .. } => b += shelves[*shelf].shelf.height(),
                ShelfKind::Vertical { .. } => v += shelves[*shelf].shelf.height(),
                _ => {}
            },
            Event::EndClosed { .. } | Event::EndInstantClosed { .. } => e += 1,
            Event::Decision {
                k,
                case,
                x,
                beta_before,
                alpha_before,
                ..
            } => {
                let beta =
                    &b + &(Scalar::ratio(3, 32) * Scalar::from_int(e)) - Scalar::ratio(3, 16);
                let alpha = &v * &half();
                if &beta != beta_before || &alpha != alpha_before {
                    bad_values += 1;
                }
                let case1 = beta >= alpha || &beta + x >= &alpha + &sixteenth;
                let ok = match case {
                    DecisionCase::PackIntoMain => case1,
                    DecisionCase::BufferH3 => !case1 && *k == 3,
                    DecisionCase::BufferSub => !case1 && *k >= 4,
                    // Forced fallback is only legal when case 1 did not
                    // apply and the buffer had no room anywhere.
                    DecisionCase::ForcedMain => !case1,
                };
                if !ok {
                    bad_rule += 1;
                }
            }
            _ => {}
        }
    }
    report.check_eq(
        "decision-recorded-values",
        Scalar::from_int(bad_values),
        Scalar::zero(),
    );
    report.check_eq("def1-discipline", Scalar::from_int(bad_rule), Scalar::zero());
}

/// The total area of placed small squares covers half of the used main
/// sections outside the end buffers.
fn audit_main_density(packer: &FixedPacker, report: &mut AuditReport) {
    let small: Scalar = packer
        .squares()
        .iter()
        .filter(|sq| sq.class_k.map(|k| k >= 2).unwrap_or(false))
        .map(|sq| sq.area())
        .sum();
    let mut used_outside_e = Scalar::zero();
    for i in 0..4 {
        let shelf = &packer.main_shelf(i).shelf;
        let mut len = shelf.cursor.clone();
        if i < 3 {
            let cap = shelf.length() - Scalar::ratio(1, 8);
            if len > cap {
                len = cap;
            }
        }
        used_outside_e += len * Scalar::ratio(1, 4);
    }
    report.check_ge("main-packing-density", small, used_outside_e * half());
}

/// Per-shelf density lemmas for closed vertical shelves and closed
/// buffer subshelves.
fn audit_vertical_shelves(
    packer: &FixedPacker,
    members: &[Vec<usize>],
    report: &mut AuditReport,
) {
    let squares = packer.squares();
    let ledger = packer.ledger();
    // The assigned set is recomputed from decision events rather than
    // the packer's flags.
    let assigned: Vec<usize> = packer
        .events()
        .iter()
        .filter_map(|ev| match ev {
            Event::Decision { vertical, .. } => Some(*vertical),
            _ => None,
        })
        .collect();
    let mut worst_closed_vertical: Option<Scalar> = None;
    let mut worst_subshelf: Option<Scalar> = None;
    for (idx, rec) in packer.shelves().iter().enumerate() {
        let total = total_area_of_entity(Entity::Shelf(idx), &members[idx], squares, ledger);
        match rec.kind {
            ShelfKind::Vertical { .. } if !rec.shelf.open && assigned.contains(&idx) => {
                let slack = total - rec.shelf.bounds.area() * half();
                if worst_closed_vertical
                    .as_ref()
                    .map(|w| &slack < w)
                    .unwrap_or(true)
                {
                    worst_closed_vertical = Some(slack);
                }
            }
            ShelfKind::Subshelf { in_end: None, .. } if !rec.shelf.open => {
                let w = rec.shelf.height();
                let h = rec.shelf.length();
                let bound = (&w * &half()).square() + (&w * &half()) * (&h * &half());
                let slack = total - bound;
                if worst_subshelf.as_ref().map(|s| &slack < s).unwrap_or(true) {
                    worst_subshelf = Some(slack);
                }
            }
            _ => {}
        }
    }
    if let Some(w) = worst_closed_vertical {
        report.check_ge("closed-vertical-shelves", w, Scalar::zero());
    }
    if let Some(w) = worst_subshelf {
        report.check_ge("closed-buffer-subshelves", w, Scalar::zero());
    }
}

/// Open vertical shelves are covered by their initial buffer (plus the
/// open subshelf, when one exists), and classes never have more than
/// one open vertical shelf or subshelf.
fn audit_open_shelves(packer: &FixedPacker, members: &[Vec<usize>], report: &mut AuditReport) {
    let squares = packer.squares();
    let shelves = packer.shelves();
    let ledger = packer.ledger();

    let mut class_violations = 0i64;
    let mut classes: Vec<u32> = shelves
        .iter()
        .filter_map(|rec| match rec.kind {
            ShelfKind::Vertical { k } | ShelfKind::Subshelf { k, .. } => Some(k),
            _ => None,
        })
        .collect();
    classes.sort_unstable();
    classes.dedup();
    for &k in &classes {
        let open_vertical = shelves
            .iter()
            .filter(|r| matches!(r.kind, ShelfKind::Vertical { k: kk } if kk == k) && r.shelf.open)
            .count();
        let open_sub = shelves
            .iter()
            .filter(
                |r| matches!(r.kind, ShelfKind::Subshelf { k: kk, .. } if kk == k) && r.shelf.open,
            )
            .count();
        if open_vertical > 1 || open_sub > 1 {
            class_violations += 1;
        }
    }
    report.check_eq(
        "at-most-one-open-shelf-per-class",
        Scalar::from_int(class_violations),
        Scalar::zero(),
    );

    // Initial-H3 members: H3 squares placed in B before the initial
    // phase closed.
    let mut initial3_members: Vec<usize> = Vec::new();
    let mut h3_initial_open = true;
    for ev in packer.events() {
        match ev {
            Event::InitialPhaseClosed { k: 3 } => h3_initial_open = false,
            Event::Placed { square, shelf }
                if h3_initial_open
                    && matches!(shelves[*shelf].kind, ShelfKind::Buffer(_))
                    && squares[*square].class_k == Some(3) =>
            {
                initial3_members.push(*square);
            }
            _ => {}
        }
    }

    let mut worst: Option<Scalar> = None;
    for (idx, rec) in shelves.iter().enumerate() {
        let ShelfKind::Vertical { k } = rec.kind else {
            continue;
        };
        if !rec.shelf.open {
            continue;
        }
        let initial_total = if k == 3 {
            total_area_of_entity(Entity::InitialH3, &initial3_members, squares, ledger)
        } else {
            shelves
                .iter()
                .enumerate()
                .find(|(_, r)| matches!(r.kind, ShelfKind::Initial { k: kk } if kk == k))
                .map(|(i_idx, _)| {
                    total_area_of_entity(Entity::Shelf(i_idx), &members[i_idx], squares, ledger)
                })
                .unwrap_or_else(Scalar::zero)
        };
        let v_total = total_area_of_entity(Entity::Shelf(idx), &members[idx], squares, ledger);
        let mut lhs = initial_total + v_total;
        let mut rhs = rec.shelf.bounds.area() * half();
        if let Some((sub_idx, sub)) = shelves.iter().enumerate().find(|(_, r)| {
            matches!(r.kind, ShelfKind::Subshelf { k: kk, .. } if kk == k) && r.shelf.open
        }) {
            lhs += total_area_of_entity(Entity::Shelf(sub_idx), &members[sub_idx], squares, ledger);
            rhs += sub.shelf.bounds.area() * half();
        }
        let slack = lhs - rhs;
        if worst.as_ref().map(|w| &slack < w).unwrap_or(true) {
            worst = Some(slack);
        }
    }
    if let Some(w) = worst {
        report.check_ge("open-vertical-shelves", w, Scalar::zero());
    }
}

/// Whenever the buffer packing grew, the small input received so far
/// must exceed `(β + x − 1/16)/4` with β taken before the growth.
fn audit_buffer_growth(packer: &FixedPacker, report: &mut AuditReport) {
    let squares = packer.squares();
    let shelves = packer.shelves();
    let quarter = Scalar::ratio(1, 4);
    let sixteenth = Scalar::ratio(1, 16);
    let mut b = Scalar::zero();
    let mut e = 0i64;
    let mut small_so_far = Scalar::zero();
    let mut worst: Option<Scalar> = None;
    for ev in packer.events() {
        match ev {
            Event::Placed { square, shelf } => {
                let side = &squares[*square].side;
                small_so_far += squares[*square].area();
                if matches!(shelves[*shelf].kind, ShelfKind::Buffer(_)) {
                    let beta =
                        &b + &(Scalar::ratio(3, 32) * Scalar::from_int(e)) - Scalar::ratio(3, 16);
                    let bound = (&beta + side - &sixteenth) * &quarter;
                    let slack = &small_so_far - &bound;
                    if worst.as_ref().map(|w| &slack < w).unwrap_or(true) {
                        worst = Some(slack);
                    }
                    b += side;
                }
            }
            Event::ShelfOpened { shelf }
                if matches!(shelves[*shelf].kind, ShelfKind::Subshelf { in_end: None, .. }) =>
            {
                b += shelves[*shelf].shelf.height();
            }
            Event::EndClosed { .. } | Event::EndInstantClosed { .. } => e += 1,
            _ => {}
        }
    }
    if let Some(w) = worst {
        report.check_gt("buffer-growth", w, Scalar::zero());
    }
}

/// Trajectory properties: area milestones when the packing first
/// reaches B3, B4, M2 and M3.
fn audit_properties(packer: &FixedPacker, report: &mut AuditReport) {
    let squares = packer.squares();
    let b3 = &packer.layout().buffer[2].bounds;
    let b4 = &packer.layout().buffer[3].bounds;
    let m2 = &packer.layout().main[1].bounds;
    let m3 = &packer.layout().main[2].bounds;

    let mut small_so_far = Scalar::zero();
    let mut first_b3: Option<Scalar> = None;
    let mut first_b4: Option<Scalar> = None;
    let mut first_m2: Option<Scalar> = None;
    let mut lower_half_at_m3: Option<Scalar> = None;
    for ev in packer.events() {
        if let Event::Placed { square, .. } = ev {
            let sq = &squares[*square];
            let r = sq.region();
            small_so_far += sq.area();
            if first_b3.is_none() && b3.contains(&r) {
                first_b3 = Some(small_so_far.clone());
            }
            if first_b4.is_none() && b4.contains(&r) {
                first_b4 = Some(small_so_far.clone());
            }
            if first_m2.is_none() && m2.contains(&r) {
                first_m2 = Some(small_so_far.clone());
            }
            if lower_half_at_m3.is_none() && m3.contains(&r) {
                lower_half_at_m3 = Some(lower_half_total(packer, *square));
            }
        }
    }
    if let Some(total) = first_b3 {
        report.check_gt("square-first-in-b3", total, Scalar::ratio(7, 64));
    }
    if let Some(total) = first_b4 {
        report.check_gt("square-first-in-b4", total, Scalar::ratio(17, 64));
    }
    if let Some(total) = first_m2 {
        report.check_ge("density-at-m2", total, Scalar::ratio(7, 64));
    }
    if let Some(total) = lower_half_at_m3 {
        report.check_ge("lower-half-density-at-m3", total, Scalar::ratio(10, 64));
    }
}

/// Flow-based total area of the lower half at the moment square
/// `up_to` (exclusive) was placed: occupied small area in the lower
/// half plus charges flowing in, minus charges flowing out.
fn lower_half_total(packer: &FixedPacker, up_to: usize) -> Scalar {
    let half_line = Scalar::ratio(1, 2);
    let squares = packer.squares();
    let shelves = packer.shelves();
    let in_lower_sq = |id: usize| squares[id].region().y1 <= half_line;
    let in_lower_entity = |ent: Entity| match ent {
        Entity::Shelf(idx) => shelves[idx].shelf.bounds.y1 <= half_line,
        Entity::InitialH3 => true,
    };
    let mut total = Scalar::zero();
    for sq in squares.iter().take(up_to) {
        if sq.class_k.map(|k| k >= 2).unwrap_or(false) && in_lower_sq(sq.id) {
            total += sq.area();
        }
    }
    for entry in &packer.ledger().entries {
        let from_lower = match entry.from {
            ChargeSource::Square(id) => {
                if id >= up_to {
                    continue;
                }
                in_lower_sq(id)
            }
            ChargeSource::Entity(ent) => in_lower_entity(ent),
        };
        let to_lower = in_lower_entity(entry.to);
        match (from_lower, to_lower) {
            (false, true) => total += &entry.amount,
            (true, false) => total -= &entry.amount,
            _ => {}
        }
    }
    total
}

/// Incremental per-step auditor for the main-density lemma. Keeps its
/// own running totals derived from the transcript, so per-step checks
/// stay cheap.
#[derive(Debug)]
pub struct StepAuditor {
    seen_events: usize,
    small_area: Scalar,
    used_len: [Scalar; 4],
}

impl Default for StepAuditor {
    fn default() -> Self {
        Self::new()
    }
}

impl StepAuditor {
    pub fn new() -> Self {
        StepAuditor {
            seen_events: 0,
            small_area: Scalar::zero(),
            used_len: [
                Scalar::zero(),
                Scalar::zero(),
                Scalar::zero(),
                Scalar::zero(),
            ],
        }
    }

    /// Consumes new events and re-checks the main-density invariant.
    pub fn observe(&mut self, packer: &FixedPacker) -> AuditCheck {
        let squares = packer.squares();
        let shelves = packer.shelves();
        let layout = packer.layout();
        for ev in &packer.events()[self.seen_events..] {
            match ev {
                Event::Placed { square, shelf } => {
                    let sq = &squares[*square];
                    self.small_area += sq.area();
                    if let ShelfKind::Main(i) = shelves[*shelf].kind {
                        self.used_len[i] += &sq.side;
                    }
                }
                Event::ShelfOpened { shelf } => {
                    if matches!(shelves[*shelf].kind, ShelfKind::Vertical { .. }) {
                        let bounds = &shelves[*shelf].shelf.bounds;
                        for (i, spec) in layout.main.iter().enumerate() {
                            if spec.bounds.contains(bounds) {
                                self.used_len[i] += shelves[*shelf].shelf.height();
                                break;
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        self.seen_events = packer.events().len();

        let mut used_outside_e = Scalar::zero();
        for (i, len) in self.used_len.iter().enumerate() {
            let mut len = len.clone();
            if i < 3 {
                let cap = layout.main[i].bounds.width() - Scalar::ratio(1, 8);
                if len > cap {
                    len = cap;
                }
            }
            used_outside_e += len * Scalar::ratio(1, 4);
        }
        let claimed = used_outside_e * half();
        let pass = self.small_area >= claimed;
        AuditCheck {
            name: "main-packing-density".to_string(),
            claimed,
            measured: self.small_area.clone(),
            pass,
        }
    }
}

/// Exact audit of a brick tree snapshot: tiling well-formedness, brick
/// aspect ratios, occupied-brick minimality, the free-area fraction and
/// the global density and edge-length guarantees.
pub fn audit_dynamic(snapshot: &TreeSnapshot, placed: &[PlacedSquare]) -> AuditReport {
    let mut report = AuditReport::default();
    let bricks = &snapshot.bricks;
    let sqrt2 = Scalar::sqrt2();

    let mut structure_errors = 0i64;
    let mut free_area = Scalar::zero();
    let mut occupied_ids: Vec<usize> = Vec::new();
    let mut worst_occupied: Option<Scalar> = None;
    for brick in bricks {
        let w = brick.region.width();
        let h = brick.region.height();
        let (short, long) = if w <= h { (&w, &h) } else { (&h, &w) };
        if long != &(short * &sqrt2) {
            structure_errors += 1;
        }
        if short != &Scalar::sqrt2_pow(brick.exponent) {
            structure_errors += 1;
        }
        match &brick.state {
            BrickState::Free => free_area += brick.region.area(),
            BrickState::Occupied(id) => {
                if occupied_ids.contains(id) || *id >= placed.len() {
                    structure_errors += 1;
                    continue;
                }
                occupied_ids.push(*id);
                let sq = &placed[*id];
                if !brick.region.contains(&sq.region()) {
                    structure_errors += 1;
                }
                if (sq.x.clone(), sq.y.clone())
                    != (brick.region.x0.clone(), brick.region.y0.clone())
                {
                    structure_errors += 1;
                }
                // Minimality of the occupied brick: 2x² ≥ short².
                let slack = Scalar::from_int(2) * sq.side.square() - short.square();
                if worst_occupied.as_ref().map(|w| &slack < w).unwrap_or(true) {
                    worst_occupied = Some(slack);
                }
            }
            BrickState::Split(a, b) => {
                if !tile_exactly(&brick.region, bricks, *a, *b) {
                    structure_errors += 1;
                }
            }
        }
    }
    if occupied_ids.len() != placed.len() {
        structure_errors += 1;
    }

    let root = &bricks[snapshot.root];
    let leaf_area: Scalar = bricks
        .iter()
        .filter(|b| !matches!(b.state, BrickState::Split(..)))
        .map(|b| b.region.area())
        .sum();
    if leaf_area != root.region.area() {
        structure_errors += 1;
    }
    report.check_eq(
        "tree-well-formed",
        Scalar::from_int(structure_errors),
        Scalar::zero(),
    );
    if let Some(w) = worst_occupied {
        report.check_ge("occupied-brick-density", w, Scalar::zero());
    }

    report.check_le("free-fraction", free_area, root.region.area() * half());

    let total_area: Scalar = placed.iter().map(|sq| sq.area()).sum();
    let long_side = root.region.width().max(root.region.height());
    // density ≥ 1/8 and edge ≤ 2√2·√area are the same exact comparison:
    // long² ≤ 8·area.
    report.check_ge(
        "density-one-eighth",
        Scalar::from_int(8) * &total_area,
        long_side.square(),
    );
    report.check_le(
        "edge-length-competitive",
        long_side.square(),
        Scalar::from_int(8) * total_area,
    );
    report
}

fn tile_exactly(parent: &Region, bricks: &[crate::brick::BrickSnapshot], a: usize, b: usize) -> bool {
    if a >= bricks.len() || b >= bricks.len() {
        return false;
    }
    let ra = &bricks[a].region;
    let rb = &bricks[b].region;
    if !parent.contains(ra) || !parent.contains(rb) || ra.interiors_overlap(rb) {
        return false;
    }
    ra.area() + rb.area() == parent.area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brick::BrickTree;
    use crate::fixed::{FixedPacker, PackOutcome};

    fn r(n: i64, d: i64) -> Scalar {
        Scalar::ratio(n, d)
    }

    fn sq(id: usize, x: (i64, i64), y: (i64, i64), side: (i64, i64)) -> PlacedSquare {
        PlacedSquare::new(id, r(x.0, x.1), r(y.0, y.1), r(side.0, side.1))
    }

    #[test]
    fn validate_examples() {
        let unit = Region::unit();
        let ok = validate(
            &[sq(0, (0, 1), (0, 1), (1, 2)), sq(1, (1, 2), (0, 1), (1, 2))],
            Some(&unit),
        );
        assert!(ok.is_valid(), "edge contact is valid");

        let overlap = validate(
            &[sq(0, (0, 1), (0, 1), (1, 2)), sq(1, (1, 4), (1, 4), (1, 2))],
            None,
        );
        assert!(!overlap.disjoint);
        assert_eq!(overlap.violations.len(), 1);
        assert_eq!(
            (overlap.violations[0].a, overlap.violations[0].b),
            (0, Some(1))
        );

        let outside = validate(&[sq(0, (3, 4), (3, 4), (1, 2))], Some(&unit));
        assert!(!outside.contained);
    }

    #[test]
    fn validate_is_permutation_invariant() {
        let squares = vec![
            sq(0, (0, 1), (0, 1), (1, 2)),
            sq(1, (1, 4), (1, 4), (1, 2)),
            sq(2, (2, 3), (1, 8), (1, 4)),
        ];
        let forward = validate(&squares, None);
        let mut reversed = squares.clone();
        reversed.reverse();
        let backward = validate(&reversed, None);
        let key = |v: &Violation| (v.a, v.b);
        assert_eq!(
            forward.violations.iter().map(key).collect::<Vec<_>>(),
            backward.violations.iter().map(key).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fresh_fixed_state_passes_audit() {
        let p = FixedPacker::new();
        let report = audit_fixed(&p);
        assert!(report.passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn small_run_passes_audit_and_validation() {
        let mut p = FixedPacker::new();
        for (n, d) in [
            (1, 5),
            (1, 8),
            (1, 10),
            (1, 16),
            (3, 32),
            (1, 4),
            (1, 32),
            (1, 40),
            (1, 7),
            (1, 9),
            (3, 64),
            (1, 6),
            (13, 50), // medium
            (26, 50), // large
        ] {
            match p.pack_next(r(n, d)).unwrap() {
                PackOutcome::Placed(_) => {}
                PackOutcome::Rejected(w) => panic!("rejected {n}/{d}: {w:?}"),
            }
        }
        let validity = validate(p.squares(), Some(&Region::unit()));
        assert!(validity.is_valid(), "{:?}", validity.violations);
        let report = audit_fixed(&p);
        assert!(report.passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn step_auditor_tracks_density() {
        let mut p = FixedPacker::new();
        let mut auditor = StepAuditor::new();
        for (n, d) in [(1, 5), (1, 8), (1, 16), (1, 4), (1, 4), (1, 4), (1, 4)] {
            p.pack_next(r(n, d)).unwrap();
            let check = auditor.observe(&p);
            assert!(check.pass, "step check failed: {check:?}");
        }
    }

    #[test]
    fn corrupted_placement_is_flagged() {
        let squares = vec![
            sq(0, (0, 1), (0, 1), (1, 2)),
            sq(1, (1, 4), (0, 1), (1, 2)), // overlaps the first
        ];
        assert!(!validate(&squares, Some(&Region::unit())).is_valid());
    }

    #[test]
    fn dynamic_audit_passes_and_detects_corruption() {
        let mut tree = BrickTree::new();
        for s in [r(1, 1), r(1, 2), r(3, 2), r(1, 8), r(1, 1)] {
            tree.pack(s);
        }
        let snap = tree.snapshot();
        let report = audit_dynamic(&snap, tree.placed());
        assert!(report.passed(), "failures: {:?}", report.failures());

        // Negative control: resize a leaf.
        let mut corrupted = snap.clone();
        let leaf = corrupted
            .bricks
            .iter()
            .position(|b| !matches!(b.state, BrickState::Split(..)))
            .unwrap();
        let region = &corrupted.bricks[leaf].region;
        corrupted.bricks[leaf].region = Region::new(
            region.x0.clone(),
            region.y0.clone(),
            region.x1.clone() + r(1, 100),
            region.y1.clone(),
        );
        let bad = audit_dynamic(&corrupted, tree.placed());
        assert!(!bad.passed(), "corrupted tree must fail the audit");
    }
}
