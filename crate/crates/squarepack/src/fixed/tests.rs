use super::*;
use crate::scalar::Scalar;
use crate::shelf::{ChargeKind, ChargeSource, Entity};

fn r(n: i64, d: i64) -> Scalar {
    Scalar::ratio(n, d)
}

fn place(p: &mut FixedPacker, n: i64, d: i64) -> PlacedSquare {
    match p.pack_next(r(n, d)).unwrap() {
        PackOutcome::Placed(sq) => sq,
        PackOutcome::Rejected(w) => panic!("unexpected rejection of {n}/{d}: {w:?}"),
    }
}

fn expect_reject(p: &mut FixedPacker, n: i64, d: i64) -> Witness {
    match p.pack_next(r(n, d)).unwrap() {
        PackOutcome::Rejected(w) => w,
        PackOutcome::Placed(sq) => panic!("unexpected placement of {n}/{d}: {sq:?}"),
    }
}

#[test]
fn fresh_state() {
    let p = FixedPacker::new();
    assert!(p.squares().is_empty());
    assert_eq!(p.beta(), r(-3, 16));
    assert_eq!(p.alpha(), Scalar::zero());
    assert_eq!(p.main_shelf(0).shelf.cursor, Scalar::zero());
    assert!(p.initial.is_empty(), "initial shelves are created lazily");
    assert_eq!(p.select_main_region(), Some(0));
    assert_eq!(p.current_buffer(), BufferRef::B(0));
}

#[test]
fn first_large_square_in_top_right_corner() {
    let mut p = FixedPacker::new();
    let sq = place(&mut p, 3, 5);
    assert_eq!((sq.x, sq.y), (r(2, 5), r(2, 5)));
}

#[test]
fn second_large_square_rejected_with_witness() {
    let mut p = FixedPacker::new();
    place(&mut p, 51, 100);
    let before = p.squares().len();
    let w = expect_reject(&mut p, 51, 100);
    assert!(matches!(w.conflict, Conflict::Square(0)));
    assert_eq!(w.candidate, Some((r(49, 100), r(49, 100))));
    assert_eq!(p.squares().len(), before, "rejection must not mutate");
}

#[test]
fn large_next_to_medium() {
    let mut p = FixedPacker::new();
    let m = place(&mut p, 13, 50);
    assert_eq!((m.x, m.y), (Scalar::zero(), r(37, 50)));
    let l = place(&mut p, 3, 5);
    assert_eq!((l.x, l.y), (r(2, 5), r(2, 5)));
}

#[test]
fn quarter_side_is_small_not_medium() {
    // 1/4 sits on the class boundary: H2, not medium.
    let mut p = FixedPacker::new();
    let sq = place(&mut p, 1, 4);
    assert_eq!((sq.x, sq.y), (Scalar::zero(), Scalar::zero()));
}

#[test]
fn ceiling_first_shelf_left_to_right() {
    let mut p = FixedPacker::new();
    let a = place(&mut p, 3, 10);
    let b = place(&mut p, 3, 10);
    let c = place(&mut p, 3, 10);
    assert_eq!((a.x, a.y), (r(0, 1), r(7, 10)));
    assert_eq!((b.x, b.y), (r(3, 10), r(7, 10)));
    assert_eq!((c.x, c.y), (r(6, 10), r(7, 10)));
    // 4th would cross the right boundary: switches to the second shelf,
    // flush right at the greatest feasible top edge.
    let d = place(&mut p, 3, 10);
    assert_eq!((d.x, d.y), (r(7, 10), r(2, 5)));
    assert!(p.ceiling.second_active);
}

#[test]
fn h2_squares_fill_m1_left_to_right() {
    let mut p = FixedPacker::new();
    let a = place(&mut p, 1, 5);
    let b = place(&mut p, 1, 5);
    assert_eq!((a.x, a.y), (Scalar::zero(), Scalar::zero()));
    assert_eq!((b.x, b.y), (r(1, 5), Scalar::zero()));
}

#[test]
fn first_tiny_square_opens_initial_shelf_in_a() {
    let mut p = FixedPacker::new();
    let sq = place(&mut p, 1, 16);
    assert_eq!((sq.x, sq.y), (Scalar::zero(), r(3, 8)));
    let rec = p.initial.get(&4).unwrap();
    assert_eq!(
        p.shelves()[rec.shelf].shelf.bounds,
        crate::geometry::Region::from_ratios((0, 1), (3, 8), (1, 4), (7, 16))
    );
    // A second class stacks on top.
    let sq5 = place(&mut p, 1, 32);
    assert_eq!((sq5.x, sq5.y), (Scalar::zero(), r(7, 16)));
}

#[test]
fn main_region_selection_order() {
    let mut p = FixedPacker::new();
    assert_eq!(p.select_main_region(), Some(0));
    // Fill M1 (length 1) with four 1/4-squares, then overflow it.
    for _ in 0..4 {
        place(&mut p, 1, 4);
    }
    assert_eq!(p.select_main_region(), Some(0));
    let sq = place(&mut p, 1, 4); // overflows M1, placed in M2 (right to left)
    assert_eq!((sq.x, sq.y), (r(3, 4), r(1, 4)));
    assert_eq!(p.select_main_region(), Some(1));
    // M1's closing square charged its extra area to M1.
    assert_eq!(
        p.ledger().entries[0].amount,
        r(1, 4) * (r(1, 4) - r(1, 8))
    );
    // Fill M2 (length 1/2) and overflow it: ties prefer M3.
    place(&mut p, 1, 4);
    assert_eq!(p.select_main_region(), Some(1));
    let sq = place(&mut p, 1, 4);
    assert_eq!(p.select_main_region(), Some(3), "used(M3) > used(M4) = 0");
    assert_eq!((sq.x, sq.y), (r(1, 2), r(1, 2)), "M3 packs right to left");
    // Alternation: next goes to M4, then M3, then M4 reaches 1/2 ≥ 3/8
    // and M3 is preferred from then on.
    let sq = place(&mut p, 1, 4);
    assert_eq!((sq.x, sq.y), (r(5, 8), r(3, 4)), "M4 packs right to left");
    assert_eq!(p.select_main_region(), Some(2));
    place(&mut p, 1, 4); // M3, used 1/2
    assert_eq!(p.select_main_region(), Some(3));
    place(&mut p, 1, 4); // M4, used 1/2 >= 3/8
    assert_eq!(p.select_main_region(), Some(2), "M4 full enough, stay in M3");
    place(&mut p, 1, 4); // M3, used 3/4 = full
    assert_eq!(p.select_main_region(), Some(2), "M3 equals M4, tie to M3");
}

#[test]
fn end_buffer_closes_instantly_on_large_overlap() {
    let mut p = FixedPacker::new();
    // Five H2 squares of side 39/200 reach cursor 0.975; the overlap
    // with E1 is 0.1 ≥ 1/16, so E1 closes for its credit immediately.
    for _ in 0..5 {
        place(&mut p, 39, 200);
    }
    assert_eq!(p.main_shelf(0).shelf.cursor, r(39, 40));
    let sq = place(&mut p, 1, 4); // overflow M1
    assert_eq!((sq.x, sq.y), (r(3, 4), r(1, 4)));
    assert_eq!(p.e_closed(), 1);
    assert_eq!(p.end_status()[0], EndStatus::Closed);
    assert_eq!(p.beta(), r(3, 32) - r(3, 16), "beta jumps by 1.5/16");
    assert!(p
        .events()
        .iter()
        .any(|e| matches!(e, Event::EndInstantClosed { region: 0, ell } if *ell == r(1, 10))));
}

#[test]
fn end_buffer_opens_on_small_overlap() {
    let mut p = FixedPacker::new();
    // Four H2 squares of side 29/128 reach cursor 29/32; overlap 1/32.
    for _ in 0..4 {
        place(&mut p, 29, 128);
    }
    place(&mut p, 1, 4); // overflow M1
    assert_eq!(p.e_closed(), 0);
    assert_eq!(p.end_status()[0], EndStatus::Active);
    assert_eq!(p.current_buffer(), BufferRef::End(0));
    let es = p.end_state().unwrap();
    assert_eq!(es.ell, r(1, 32));
    assert_eq!(
        p.shelves()[es.shelf].shelf.bounds,
        crate::geometry::Region::from_ratios((29, 32), (0, 1), (1, 1), (1, 4))
    );
}

/// Drives the packer into a buffer decision with β = 1/16 > α = 1/32:
/// case 1, the square stays in the vertical shelf.
#[test]
fn buffer_decision_case1_by_first_disjunct() {
    let mut p = FixedPacker::new();
    // Two H3 squares of side 1/8: initial H3 packing in B1, b = 1/4.
    let a = place(&mut p, 1, 8);
    let b = place(&mut p, 1, 8);
    assert_eq!((a.x, a.y), (Scalar::zero(), r(1, 4)));
    assert_eq!((b.x, b.y), (r(1, 8), r(1, 4)));
    assert_eq!(p.b_used(), &r(1, 4));
    // Four H4 squares of side 1/16 fill the initial H4 shelf exactly.
    for _ in 0..4 {
        place(&mut p, 1, 16);
    }
    // The fifth closes the initial phase and opens a vertical shelf in
    // M1 at the used-section frontier (cursor 0).
    let v1 = place(&mut p, 1, 16);
    assert_eq!((v1.x, v1.y), (Scalar::zero(), Scalar::zero()));
    assert_eq!(p.alpha(), r(1, 32));
    // Two more fill the shelf to cursor 3/16 without touching its head.
    let v2 = place(&mut p, 1, 16);
    let v3 = place(&mut p, 1, 16);
    assert_eq!((v2.x, v2.y), (Scalar::zero(), r(1, 16)));
    assert_eq!((v3.x, v3.y), (Scalar::zero(), r(2, 16)));
    // The next one would intersect the head: buffer decision with
    // β = 1/4 − 3/16 = 1/16 ≥ α: packed into the shelf, extra credited
    // to the buffer, a slice debited to the shelf.
    let before_entries = p.ledger().entries.len();
    let v4 = place(&mut p, 1, 16);
    assert_eq!((v4.x, v4.y), (Scalar::zero(), r(3, 16)));
    let decision = p
        .events()
        .iter()
        .find_map(|e| match e {
            Event::Decision {
                case,
                beta_before,
                alpha_before,
                ..
            } => Some((*case, beta_before.clone(), alpha_before.clone())),
            _ => None,
        })
        .expect("decision event");
    assert_eq!(decision.0, DecisionCase::PackIntoMain);
    assert_eq!(decision.1, r(1, 16));
    assert_eq!(decision.2, r(1, 32));
    let new: Vec<_> = p.ledger().entries[before_entries..].iter().collect();
    assert_eq!(new.len(), 2);
    assert_eq!(new[0].kind, ChargeKind::BufferCredit);
    assert_eq!(new[0].amount, r(1, 16) * (r(1, 16) - r(1, 32)));
    assert_eq!(new[1].kind, ChargeKind::BufferAssign);
    assert_eq!(new[1].amount, r(1, 1024));
    let v_idx = *p.vertical.get(&4).unwrap();
    assert!(p.shelves()[v_idx].buffer_assigned);
}

/// β = 0, α = 1/16, x = 1/8: the second disjunct holds with equality,
/// so the H3 square still goes to the vertical shelf.
#[test]
fn buffer_decision_case1_boundary() {
    let mut p = FixedPacker::new();
    place(&mut p, 3, 32);
    place(&mut p, 3, 32); // b = 3/16, β = 0
    let v1 = place(&mut p, 1, 8); // closes initial H3, opens V3 in M1
    assert_eq!((v1.x, v1.y), (Scalar::zero(), Scalar::zero()));
    assert_eq!(p.beta(), Scalar::zero());
    assert_eq!(p.alpha(), r(1, 16));
    let v2 = place(&mut p, 1, 8); // crowded; β + x = 1/8 = α + 1/16
    assert_eq!((v2.x, v2.y), (Scalar::zero(), r(1, 8)));
    let case = p
        .events()
        .iter()
        .find_map(|e| match e {
            Event::Decision { case, .. } => Some(*case),
            _ => None,
        })
        .unwrap();
    assert_eq!(case, DecisionCase::PackIntoMain);
}

/// Neither disjunct holds and k ≥ 4: a subshelf of the class width is
/// carved out of the current buffer strip.
#[test]
fn buffer_decision_case2_opens_subshelf() {
    let mut p = FixedPacker::new();
    place(&mut p, 3, 32);
    place(&mut p, 3, 32); // b = 3/16, β = 0
    place(&mut p, 1, 8); // V3 opens (α = 1/16)
    for _ in 0..8 {
        place(&mut p, 1, 32); // initial H5 shelf fills to 1/4 exactly
    }
    let first_v5 = place(&mut p, 1, 32); // closes initial H5, opens V5
    assert_eq!((first_v5.x, first_v5.y), (r(1, 8), Scalar::zero()));
    assert_eq!(p.alpha(), r(5, 64));
    for _ in 0..6 {
        place(&mut p, 1, 32); // V5 cursor reaches 7/32
    }
    let before_b = p.b_used().clone();
    // Crowded now; β = 0 < α and β + x < α + 1/16: case 2b.
    let sub_sq = place(&mut p, 1, 40);
    assert_eq!((sub_sq.x, sub_sq.y), (r(3, 16), r(1, 4)));
    let case = p
        .events()
        .iter()
        .find_map(|e| match e {
            Event::Decision { case, .. } => Some(*case),
            _ => None,
        })
        .unwrap();
    assert_eq!(case, DecisionCase::BufferSub);
    assert_eq!(p.b_used().clone(), before_b + r(1, 32));
    let sub = *p.open_subshelf.get(&5).unwrap();
    assert_eq!(
        p.shelves()[sub].shelf.bounds,
        crate::geometry::Region::from_ratios((3, 16), (1, 4), (7, 32), (3, 8))
    );
    // The (w/2)² part of the subshelf is assigned to the vertical shelf.
    let assign = p
        .ledger()
        .entries
        .iter()
        .rfind(|e| e.kind == ChargeKind::BufferAssign)
        .unwrap();
    assert_eq!(assign.amount, r(1, 4096));
    assert!(matches!(assign.from, ChargeSource::Entity(Entity::Shelf(s)) if s == sub));
    // Follow-up H5 squares land in the subshelf until it fills.
    let in_sub = place(&mut p, 1, 40);
    assert_eq!((in_sub.x, in_sub.y), (r(3, 16), r(1, 4) + r(1, 40)));
}

#[test]
fn rejects_invalid_sides() {
    let mut p = FixedPacker::new();
    assert!(p.pack_next(Scalar::zero()).is_err());
    assert!(p.pack_next(r(-1, 2)).is_err());
    assert!(p.pack_next(r(3, 2)).is_err());
}

#[test]
fn small_squares_never_rejected_within_budget_smoke() {
    // A healthy mixed prefix of small squares with total area well under
    // 11/32 packs without rejection.
    let mut p = FixedPacker::new();
    let sides = [
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
        (1, 11),
        (1, 13),
        (1, 64),
        (3, 64),
        (1, 6),
    ];
    let mut total = Scalar::zero();
    for (n, d) in sides {
        total += r(n, d).square();
        place(&mut p, n, d);
    }
    assert!(total <= r(11, 32));
}
