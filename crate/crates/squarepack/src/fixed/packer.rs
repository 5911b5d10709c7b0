//! Packing logic of the Recursive Shelf Algorithm.
//!
//! Every flow resolves its target placement without mutating, validates
//! the candidate against the container and the other subroutines'
//! squares, and only then applies the full cascade (closures, charges,
//! shelf openings, the placement). A rejected square therefore leaves
//! the state exactly as it was.

use super::*;
use crate::geometry::{PlacedSquare, Region};
use crate::scalar::Scalar;
use crate::shelf::{
    classify, ChargeEntry, ChargeKind, ChargeSource, Direction, Entity, InvalidSide, Shelf,
};

const NO_REGION: Option<usize> = None;

impl FixedPacker {
    /// Feeds the next square to the algorithm.
    ///
    /// Dispatch: `H_0` to the large corner slot, `H_1` to ceiling
    /// packing, `H_{≥2}` to packSmall. On `Rejected` the state is
    /// unchanged and the witness carries the candidate position plus
    /// the first conflict.
    pub fn pack_next(&mut self, side: Scalar) -> Result<PackOutcome, InvalidSide> {
        let k = classify(&side)?;
        Ok(match k {
            0 => self.place_large(side),
            1 => self.ceiling_pack(side),
            _ => self.pack_small(side, k),
        })
    }

    fn reject(&self, side: Scalar, candidate: Option<(Scalar, Scalar)>, conflict: Conflict) -> PackOutcome {
        PackOutcome::Rejected(Witness {
            side,
            candidate,
            conflict,
        })
    }

    fn square_region(x: &Scalar, y: &Scalar, side: &Scalar) -> Region {
        Region::new(x.clone(), y.clone(), x + side, y + side)
    }

    /// First placed square whose interior intersects `region`.
    fn conflict_with_any(&self, region: &Region) -> Option<usize> {
        self.squares
            .iter()
            .find(|sq| sq.region().interiors_overlap(region))
            .map(|sq| sq.id)
    }

    /// First medium or large square intersecting `region`. Small
    /// placements land in disjoint shelf lanes, so only the other
    /// subroutines' squares can collide with them; the verifier checks
    /// full pairwise disjointness independently.
    fn conflict_with_foreign(&self, region: &Region) -> Option<usize> {
        self.foreign
            .iter()
            .map(|&id| &self.squares[id])
            .find(|sq| sq.region().interiors_overlap(region))
            .map(|sq| sq.id)
    }

    // ---- large squares ----------------------------------------------

    /// Places an `H_0` square in the top right corner of the unit square.
    fn place_large(&mut self, side: Scalar) -> PackOutcome {
        let corner = Scalar::one() - &side;
        let region = Self::square_region(&corner, &corner, &side);
        if let Some(c) = self.conflict_with_any(&region) {
            return self.reject(side, Some((corner.clone(), corner)), Conflict::Square(c));
        }
        let id = self.squares.len();
        let sq = PlacedSquare::new(id, corner.clone(), corner, side).with_class(0);
        self.squares.push(sq.clone());
        self.large = Some(id);
        self.foreign.push(id);
        self.events.push(Event::PlacedLarge { square: id });
        self.input_count += 1;
        PackOutcome::Placed(sq)
    }

    // ---- medium squares (ceiling packing) ----------------------------

    /// First shelf: flush to the top edge, left to right. Once a square
    /// would cross the right boundary, permanently switch to the second
    /// shelf: flush right, each square at the greatest top edge that
    /// avoids every placed square.
    fn ceiling_pack(&mut self, side: Scalar) -> PackOutcome {
        let one = Scalar::one();
        if !self.ceiling.second_active && &self.ceiling.cursor + &side <= one {
            let x = self.ceiling.cursor.clone();
            let y = &one - &side;
            let region = Self::square_region(&x, &y, &side);
            if let Some(c) = self.conflict_with_any(&region) {
                return self.reject(side, Some((x, y)), Conflict::Square(c));
            }
            let id = self.squares.len();
            let sq = PlacedSquare::new(id, x, y, side.clone()).with_class(1);
            self.squares.push(sq.clone());
            self.foreign.push(id);
            self.ceiling.cursor += &side;
            self.events.push(Event::PlacedCeiling {
                square: id,
                second_shelf: false,
            });
            self.input_count += 1;
            return PackOutcome::Placed(sq);
        }

        // Second shelf, flush against the right boundary.
        let x0 = &one - &side;
        let mut candidates: Vec<Scalar> = vec![one.clone()];
        for sq in &self.squares {
            let r = sq.region();
            if r.x1 > x0 && r.x0 < one {
                candidates.push(r.y0);
            }
        }
        candidates.sort();
        candidates.dedup();
        let mut first_conflict = None;
        for top in candidates.into_iter().rev() {
            let y = &top - &side;
            if y.is_negative() {
                continue;
            }
            let region = Self::square_region(&x0, &y, &side);
            match self.conflict_with_any(&region) {
                None => {
                    let id = self.squares.len();
                    let sq = PlacedSquare::new(id, x0, y, side.clone()).with_class(1);
                    self.squares.push(sq.clone());
                    self.foreign.push(id);
                    self.ceiling.second_active = true;
                    self.events.push(Event::PlacedCeiling {
                        square: id,
                        second_shelf: true,
                    });
                    self.input_count += 1;
                    return PackOutcome::Placed(sq);
                }
                Some(c) => first_conflict = first_conflict.or(Some((top, c))),
            }
        }
        match first_conflict {
            Some((top, c)) => {
                let y = &top - &side;
                self.reject(side, Some((x0, y)), Conflict::Square(c))
            }
            None => self.reject(side, None, Conflict::OutOfContainer),
        }
    }

    // ---- small squares (packSmall) ------------------------------------

    fn pack_small(&mut self, side: Scalar, k: u32) -> PackOutcome {
        if k == 2 {
            return self.fill_main_h2(side);
        }
        if self.initial_phase_open(k) {
            return self.fill_initial(side, k);
        }
        if k >= 4 {
            if let Some(&sub) = self.open_subshelf.get(&k) {
                return self.fill_buffer(side, k, sub);
            }
        }
        let v = *self
            .vertical
            .get(&k)
            .expect("initial phase closed implies a vertical shelf exists");
        if !self.shelves[v].buffer_assigned && self.is_crowded(v, &side) {
            return self.buffer_decision(side, k, v);
        }
        self.fill_main_small(side, k, v)
    }

    fn initial_phase_open(&self, k: u32) -> bool {
        if k == 3 {
            self.initial3_open
        } else {
            self.initial.get(&k).map(|r| r.open).unwrap_or(true)
        }
    }

    /// Would the square, placed at the cursor, intersect the open head
    /// of the vertical shelf? (Open-interior contact.)
    fn is_crowded(&self, v: usize, side: &Scalar) -> bool {
        let shelf = &self.shelves[v].shelf;
        &shelf.cursor + side > shelf.length() - shelf.height()
    }

    /// Main region that currently receives H2 squares and vertical
    /// shelves: M1 until closed, then M2, then the emptier of M3/M4
    /// (ties to M3), with M3 preferred outright once used(M4) ≥ 3/8.
    pub fn select_main_region(&self) -> Option<usize> {
        self.current_main_with(NO_REGION)
    }

    fn current_main_with(&self, pretend_closed: Option<usize>) -> Option<usize> {
        let open = |i: usize| {
            pretend_closed != Some(i) && self.shelves[self.main_idx[i]].shelf.open
        };
        if open(0) {
            return Some(0);
        }
        if open(1) {
            return Some(1);
        }
        match (open(2), open(3)) {
            (true, true) => {
                let u3 = &self.shelves[self.main_idx[2]].shelf.cursor;
                let u4 = &self.shelves[self.main_idx[3]].shelf.cursor;
                if u3 <= u4 || *u4 >= Scalar::ratio(3, 8) {
                    Some(2)
                } else {
                    Some(3)
                }
            }
            (true, false) => Some(2),
            (false, true) => Some(3),
            (false, false) => None,
        }
    }

    /// Commits a square into a shelf and does the shared bookkeeping.
    fn commit_place(&mut self, side: Scalar, k: u32, shelf_idx: usize) -> PlacedSquare {
        let id = self.squares.len();
        let pos = self.shelves[shelf_idx]
            .shelf
            .try_pack(id, &side)
            .expect("resolved placement must fit");
        let sq = PlacedSquare::new(id, pos.0, pos.1, side).with_class(k);
        self.total_small_area += sq.area();
        if matches!(self.shelves[shelf_idx].kind, ShelfKind::Buffer(_)) {
            self.b_used += &sq.side;
        }
        self.squares.push(sq.clone());
        self.events.push(Event::Placed {
            square: id,
            shelf: shelf_idx,
        });
        self.input_count += 1;
        sq
    }

    fn charge(&mut self, kind: ChargeKind, from: ChargeSource, to: Entity, amount: Scalar) {
        self.ledger.push(ChargeEntry {
            kind,
            from,
            to,
            amount,
        });
    }

    // ---- H2 into the main regions -------------------------------------

    fn fill_main_h2(&mut self, side: Scalar) -> PackOutcome {
        let Some(i) = self.select_main_region() else {
            return self.reject(side, None, Conflict::NoRegion);
        };
        let mi = self.main_idx[i];
        if self.shelves[mi].shelf.fits(&side) {
            let shelf = &self.shelves[mi].shelf;
            let pos = shelf.position_at(&shelf.cursor.clone(), &side);
            let region = Self::square_region(&pos.0, &pos.1, &side);
            if let Some(c) = self.conflict_with_foreign(&region) {
                return self.reject(side, Some(pos), Conflict::Square(c));
            }
            return PackOutcome::Placed(self.commit_place(side, 2, mi));
        }

        // Overflow: the square's extra area is charged to the closed
        // region and the square continues in the next one.
        let Some(next) = self.current_main_with(Some(i)) else {
            return self.reject(side, None, Conflict::NoRegion);
        };
        let mnext = self.main_idx[next];
        if !self.shelves[mnext].shelf.fits(&side) {
            return self.reject(side, None, Conflict::NoRegion);
        }
        let shelf = &self.shelves[mnext].shelf;
        let pos = shelf.position_at(&shelf.cursor.clone(), &side);
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }

        let extra = self.shelves[mi].shelf.extra_of(&side);
        let overflow_id = self.squares.len();
        self.close_main_region(i, Some((overflow_id, extra)));
        PackOutcome::Placed(self.commit_place(side, 2, mnext))
    }

    fn close_main_region(&mut self, i: usize, overflow: Option<(usize, Scalar)>) {
        let mi = self.main_idx[i];
        self.shelves[mi].shelf.open = false;
        if let Some((square, amount)) = overflow {
            self.charge(
                ChargeKind::Extra,
                ChargeSource::Square(square),
                Entity::Shelf(mi),
                amount,
            );
        }
        self.events.push(Event::MainClosed { region: i });
        self.events.push(Event::ShelfClosed { shelf: mi });
        if i < 3 {
            self.initialize_end_buffer(i);
        }
    }

    /// The overlap L of the closed main packing with `E_i` decides the
    /// end buffer's fate: with ℓ ≥ 1/16 it closes immediately for its
    /// 1.5/16 credit, otherwise `E_i ∖ L` becomes the active buffer.
    fn initialize_end_buffer(&mut self, i: usize) {
        let m = &self.shelves[self.main_idx[i]].shelf;
        let eighth = Scalar::ratio(1, 8);
        let spill = &m.cursor - &(m.length() - &eighth);
        let ell = if spill.is_negative() {
            Scalar::zero()
        } else {
            spill
        };
        if ell >= Scalar::ratio(1, 16) {
            self.end_status[i] = EndStatus::Closed;
            self.e_closed += 1;
            self.events.push(Event::EndInstantClosed { region: i, ell });
            return;
        }
        let bounds = m.section_from_end(&(&eighth - &ell));
        let shelf = Shelf::new(bounds, Direction::PosY, 3);
        let idx = self.shelves.len();
        self.shelves.push(ShelfRec {
            shelf,
            kind: ShelfKind::EndTransverse(i),
            buffer_assigned: false,
        });
        self.events.push(Event::ShelfOpened { shelf: idx });
        self.events.push(Event::EndOpened {
            region: i,
            ell: ell.clone(),
        });
        if let Some(old) = self.end_state.take() {
            self.end_status[old.region_i] = EndStatus::Displaced;
        }
        self.end_status[i] = EndStatus::Active;
        self.end_state = Some(EndBufferState {
            region_i: i,
            shelf: idx,
            ell,
            endbufferlength: Scalar::zero(),
            potential_extra: Scalar::zero(),
            marked_from_l: Scalar::zero(),
            oversize_events: 0,
        });
        self.current_buffer = BufferRef::End(i);
    }

    // ---- vertical shelves ----------------------------------------------

    /// Plan for opening a vertical shelf of width `w`: which region to
    /// close (if any), the host region, and the column bounds.
    fn plan_vertical_opening(&self, w: &Scalar) -> Result<(Option<usize>, usize, Region), Conflict> {
        let Some(i) = self.select_main_region() else {
            return Err(Conflict::NoRegion);
        };
        if self.column_fits(i, w) {
            return Ok((None, i, self.column_bounds(i, w)));
        }
        let Some(next) = self.current_main_with(Some(i)) else {
            return Err(Conflict::NoRegion);
        };
        if !self.column_fits(next, w) {
            return Err(Conflict::NoRegion);
        }
        Ok((Some(i), next, self.column_bounds(next, w)))
    }

    fn column_fits(&self, i: usize, w: &Scalar) -> bool {
        let shelf = &self.shelves[self.main_idx[i]].shelf;
        &shelf.cursor + w <= shelf.length()
    }

    /// Column of width `w` carved at the used-section frontier of `M_i`.
    fn column_bounds(&self, i: usize, w: &Scalar) -> Region {
        let shelf = &self.shelves[self.main_idx[i]].shelf;
        let b = &shelf.bounds;
        match shelf.dir {
            Direction::PosX => Region::new(
                &b.x0 + &shelf.cursor,
                b.y0.clone(),
                &b.x0 + &shelf.cursor + w,
                b.y1.clone(),
            ),
            Direction::NegX => Region::new(
                &b.x1 - &shelf.cursor - w,
                b.y0.clone(),
                &b.x1 - &shelf.cursor,
                b.y1.clone(),
            ),
            _ => unreachable!("main regions are horizontal"),
        }
    }

    fn open_vertical_shelf(&mut self, k: u32, host: usize, col: Region) -> usize {
        let w = col.width();
        self.shelves[self.main_idx[host]].shelf.cursor += &w;
        let idx = self.shelves.len();
        self.shelves.push(ShelfRec {
            shelf: Shelf::new(col, Direction::PosY, k),
            kind: ShelfKind::Vertical { k },
            buffer_assigned: false,
        });
        self.vertical.insert(k, idx);
        self.v_total += &w;
        self.events.push(Event::ShelfOpened { shelf: idx });
        idx
    }

    // ---- initial buffers ------------------------------------------------

    fn fill_initial(&mut self, side: Scalar, k: u32) -> PackOutcome {
        let quarter = Scalar::ratio(1, 4);
        let init_len = if k == 3 {
            self.initial3_len.clone()
        } else {
            self.initial
                .get(&k)
                .map(|r| r.len.clone())
                .unwrap_or_else(Scalar::zero)
        };

        if &init_len + &side > quarter {
            // Initial phase over: charge the closer's extra area to the
            // initial shelf and open the first vertical shelf with it.
            let w = Scalar::pow2(-(k as i32));
            let (close_region, host, col) = match self.plan_vertical_opening(&w) {
                Ok(plan) => plan,
                Err(c) => return self.reject(side, None, c),
            };
            let pos = (col.x0.clone(), col.y0.clone());
            let region = Self::square_region(&pos.0, &pos.1, &side);
            if let Some(c) = self.conflict_with_foreign(&region) {
                return self.reject(side, Some(pos), Conflict::Square(c));
            }

            let overflow_id = self.squares.len();
            if k == 3 {
                self.initial3_open = false;
                let amount = &side * &(&side - &Scalar::ratio(1, 16));
                self.charge(
                    ChargeKind::Extra,
                    ChargeSource::Square(overflow_id),
                    Entity::InitialH3,
                    amount,
                );
            } else {
                let rec = self.initial.get_mut(&k).expect("initial shelf exists");
                rec.open = false;
                let shelf_idx = rec.shelf;
                self.shelves[shelf_idx].shelf.open = false;
                let amount = self.shelves[shelf_idx].shelf.extra_of(&side);
                self.charge(
                    ChargeKind::Extra,
                    ChargeSource::Square(overflow_id),
                    Entity::Shelf(shelf_idx),
                    amount,
                );
                self.events.push(Event::ShelfClosed { shelf: shelf_idx });
            }
            self.events.push(Event::InitialPhaseClosed { k });
            if let Some(ci) = close_region {
                self.close_main_region(ci, None);
            }
            let v = self.open_vertical_shelf(k, host, col);
            return PackOutcome::Placed(self.commit_place(side, k, v));
        }

        if k >= 4 {
            // Pack into (or lazily create) the initial shelf in A.
            match self.initial.get(&k) {
                Some(rec) => {
                    let shelf_idx = rec.shelf;
                    let shelf = &self.shelves[shelf_idx].shelf;
                    let pos = shelf.position_at(&shelf.cursor.clone(), &side);
                    let region = Self::square_region(&pos.0, &pos.1, &side);
                    if let Some(c) = self.conflict_with_foreign(&region) {
                        return self.reject(side, Some(pos), Conflict::Square(c));
                    }
                    self.initial.get_mut(&k).unwrap().len = init_len + &side;
                    PackOutcome::Placed(self.commit_place(side, k, shelf_idx))
                }
                None => {
                    let a = &self.layout.initial_area;
                    let h = Scalar::pow2(-(k as i32));
                    let y0 = self.a_stack_top.clone();
                    let y1 = &y0 + &h;
                    debug_assert!(y1 <= a.y1, "initial shelves exceed region A");
                    let bounds =
                        Region::new(a.x0.clone(), y0.clone(), &a.x0 + &quarter, y1.clone());
                    let pos = (a.x0.clone(), y0);
                    let region = Self::square_region(&pos.0, &pos.1, &side);
                    if let Some(c) = self.conflict_with_foreign(&region) {
                        return self.reject(side, Some(pos), Conflict::Square(c));
                    }
                    let idx = self.shelves.len();
                    self.shelves.push(ShelfRec {
                        shelf: Shelf::new(bounds, Direction::PosX, k),
                        kind: ShelfKind::Initial { k },
                        buffer_assigned: false,
                    });
                    self.events.push(Event::ShelfOpened { shelf: idx });
                    self.a_stack_top = y1;
                    self.initial.insert(
                        k,
                        InitialRec {
                            shelf: idx,
                            len: side.clone(),
                            open: true,
                        },
                    );
                    PackOutcome::Placed(self.commit_place(side, k, idx))
                }
            }
        } else {
            // k == 3: the initial H3 packing lives in the B shelves.
            let slot = match self.resolve_h3_slot(&side) {
                Ok(s) => s,
                Err(c) => return self.reject(side, None, c),
            };
            let shelf = &self.shelves[slot.target].shelf;
            let pos = shelf.position_at(&shelf.cursor.clone(), &side);
            let region = Self::square_region(&pos.0, &pos.1, &side);
            if let Some(c) = self.conflict_with_foreign(&region) {
                return self.reject(side, Some(pos), Conflict::Square(c));
            }
            let overflow_id = self.squares.len();
            self.apply_h3_advance(&slot, overflow_id, &side);
            self.initial3_len = init_len + &side;
            PackOutcome::Placed(self.commit_place(side, 3, slot.target))
        }
    }

    // ---- buffer subshelves -----------------------------------------------

    fn fill_buffer(&mut self, side: Scalar, k: u32, sub: usize) -> PackOutcome {
        if self.shelves[sub].shelf.fits(&side) {
            let shelf = &self.shelves[sub].shelf;
            let pos = shelf.position_at(&shelf.cursor.clone(), &side);
            let region = Self::square_region(&pos.0, &pos.1, &side);
            if let Some(c) = self.conflict_with_foreign(&region) {
                return self.reject(side, Some(pos), Conflict::Square(c));
            }
            return PackOutcome::Placed(self.commit_place(side, k, sub));
        }

        // Subshelf full: charge the closer's extra to it and return to
        // the vertical shelf.
        let v = *self.vertical.get(&k).expect("subshelf implies vertical shelf");
        debug_assert!(self.shelves[v].shelf.fits(&side));
        let shelf = &self.shelves[v].shelf;
        let pos = shelf.position_at(&shelf.cursor.clone(), &side);
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }
        let overflow_id = self.squares.len();
        let amount = self.shelves[sub].shelf.extra_of(&side);
        self.charge(
            ChargeKind::Extra,
            ChargeSource::Square(overflow_id),
            Entity::Shelf(sub),
            amount,
        );
        self.shelves[sub].shelf.open = false;
        self.open_subshelf.remove(&k);
        self.events.push(Event::ShelfClosed { shelf: sub });
        PackOutcome::Placed(self.commit_place(side, k, v))
    }

    // ---- the buffer decision ----------------------------------------------

    /// First head contact of a vertical shelf: decide between packing
    /// into the shelf (case 1, when the buffer is long enough) and
    /// extending the buffer packing (case 2).
    fn buffer_decision(&mut self, side: Scalar, k: u32, v: usize) -> PackOutcome {
        let beta = self.beta();
        let alpha = self.alpha();
        let sixteenth = Scalar::ratio(1, 16);
        let case1 = beta >= alpha || &beta + &side >= &alpha + &sixteenth;
        let w_v = self.shelves[v].shelf.height();
        let assign_amount = (&w_v * &Scalar::ratio(1, 2)).square();

        if case1 {
            return self.decide_pack_into_main(
                side,
                k,
                v,
                DecisionCase::PackIntoMain,
                beta,
                alpha,
                assign_amount,
            );
        }

        if k == 3 {
            match self.current_buffer {
                BufferRef::B(_) => {
                    let slot = match self.resolve_h3_slot(&side) {
                        Ok(s) => s,
                        Err(_) => {
                            // Nowhere in B ∪ E: only reachable when the
                            // buffer is already over-provisioned.
                            return self.decide_pack_into_main(
                                side,
                                k,
                                v,
                                DecisionCase::ForcedMain,
                                beta,
                                alpha,
                                assign_amount,
                            );
                        }
                    };
                    let shelf = &self.shelves[slot.target].shelf;
                    let pos = shelf.position_at(&shelf.cursor.clone(), &side);
                    let region = Self::square_region(&pos.0, &pos.1, &side);
                    if let Some(c) = self.conflict_with_foreign(&region) {
                        return self.reject(side, Some(pos), Conflict::Square(c));
                    }
                    self.events.push(Event::Decision {
                        k,
                        vertical: v,
                        case: DecisionCase::BufferH3,
                        x: side.clone(),
                        beta_before: beta,
                        alpha_before: alpha,
                    });
                    let overflow_id = self.squares.len();
                    self.apply_h3_advance(&slot, overflow_id, &side);
                    let sq = self.commit_place(side, 3, slot.target);
                    self.charge(
                        ChargeKind::BufferAssign,
                        ChargeSource::Square(sq.id),
                        Entity::Shelf(v),
                        assign_amount,
                    );
                    self.shelves[v].buffer_assigned = true;
                    if self
                        .end_state
                        .as_ref()
                        .is_some_and(|es| es.shelf == slot.target)
                    {
                        let x = sq.side.clone();
                        let es = self.end_state.as_mut().unwrap();
                        es.endbufferlength += &x;
                        self.maybe_close_end_buffer();
                    }
                    PackOutcome::Placed(sq)
                }
                BufferRef::End(_) => self.decide_end_h3(side, k, v, beta, alpha, assign_amount),
            }
        } else {
            match self.current_buffer {
                BufferRef::B(j) => {
                    self.decide_open_subshelf_in_b(side, k, v, j, beta, alpha, assign_amount)
                }
                BufferRef::End(_) => {
                    self.decide_open_subshelf_in_end(side, k, v, beta, alpha, assign_amount)
                }
            }
        }
    }

    /// Case 1 (and the forced fallback): the square goes into the
    /// vertical shelf; its extra area is credited to the buffer region
    /// and an occupied buffer slice is debited to the shelf.
    #[allow(clippy::too_many_arguments)]
    fn decide_pack_into_main(
        &mut self,
        side: Scalar,
        k: u32,
        v: usize,
        case: DecisionCase,
        beta: Scalar,
        alpha: Scalar,
        assign_amount: Scalar,
    ) -> PackOutcome {
        debug_assert!(self.shelves[v].shelf.fits(&side));
        let shelf = &self.shelves[v].shelf;
        let pos = shelf.position_at(&shelf.cursor.clone(), &side);
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }
        self.events.push(Event::Decision {
            k,
            vertical: v,
            case,
            x: side.clone(),
            beta_before: beta,
            alpha_before: alpha,
        });
        let buffer_entity = self.current_buffer_entity();
        let extra = self.shelves[v].shelf.extra_of(&side);
        let sq = self.commit_place(side, k, v);
        self.charge(
            ChargeKind::BufferCredit,
            ChargeSource::Square(sq.id),
            buffer_entity,
            extra,
        );
        self.charge(
            ChargeKind::BufferAssign,
            ChargeSource::Entity(buffer_entity),
            Entity::Shelf(v),
            assign_amount,
        );
        self.shelves[v].buffer_assigned = true;
        PackOutcome::Placed(sq)
    }

    /// Case 2a while the active buffer is an end buffer: pack the H3
    /// square transversely into `E_i ∖ L`, or divert an oversize one to
    /// its vertical shelf, paid for from L.
    fn decide_end_h3(
        &mut self,
        side: Scalar,
        k: u32,
        v: usize,
        beta: Scalar,
        alpha: Scalar,
        assign_amount: Scalar,
    ) -> PackOutcome {
        let es = self.end_state.as_ref().expect("end buffer active");
        let eshelf = es.shelf;
        let sixteenth = Scalar::ratio(1, 16);
        if side <= self.shelves[eshelf].shelf.height() {
            debug_assert!(self.shelves[eshelf].shelf.fits(&side));
            let shelf = &self.shelves[eshelf].shelf;
            let pos = shelf.position_at(&shelf.cursor.clone(), &side);
            let region = Self::square_region(&pos.0, &pos.1, &side);
            if let Some(c) = self.conflict_with_foreign(&region) {
                return self.reject(side, Some(pos), Conflict::Square(c));
            }
            self.events.push(Event::Decision {
                k,
                vertical: v,
                case: DecisionCase::BufferH3,
                x: side.clone(),
                beta_before: beta,
                alpha_before: alpha,
            });
            let sq = self.commit_place(side, 3, eshelf);
            self.charge(
                ChargeKind::BufferAssign,
                ChargeSource::Entity(Entity::Shelf(eshelf)),
                Entity::Shelf(v),
                assign_amount,
            );
            self.shelves[v].buffer_assigned = true;
            let x = sq.side.clone();
            let es = self.end_state.as_mut().unwrap();
            es.endbufferlength += &x;
            self.maybe_close_end_buffer();
            return PackOutcome::Placed(sq);
        }

        // Oversize H3: into the vertical shelf; its extra area plus a
        // marked slice of L form the buffer part.
        debug_assert!(self.shelves[v].shelf.fits(&side));
        let shelf = &self.shelves[v].shelf;
        let pos = shelf.position_at(&shelf.cursor.clone(), &side);
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }
        self.events.push(Event::Decision {
            k,
            vertical: v,
            case: DecisionCase::BufferH3,
            x: side.clone(),
            beta_before: beta,
            alpha_before: alpha,
        });
        let extra = &side * &(&side - &sixteenth);
        let sq = self.commit_place(side, 3, v);
        self.charge(
            ChargeKind::Extra,
            ChargeSource::Square(sq.id),
            Entity::Shelf(eshelf),
            extra,
        );
        self.charge(
            ChargeKind::BufferAssign,
            ChargeSource::Entity(Entity::Shelf(eshelf)),
            Entity::Shelf(v),
            assign_amount,
        );
        self.shelves[v].buffer_assigned = true;
        let es = self.end_state.as_mut().unwrap();
        es.marked_from_l += &es.ell.clone() * &sixteenth;
        es.oversize_events += 1;
        es.endbufferlength += &sixteenth;
        self.maybe_close_end_buffer();
        PackOutcome::Placed(sq)
    }

    /// Case 2b in the B region: open a vertical buffer subshelf of the
    /// class width at the end of the current buffer packing.
    #[allow(clippy::too_many_arguments)]
    fn decide_open_subshelf_in_b(
        &mut self,
        side: Scalar,
        k: u32,
        v: usize,
        j: usize,
        beta: Scalar,
        alpha: Scalar,
        assign_amount: Scalar,
    ) -> PackOutcome {
        let w = Scalar::pow2(-(k as i32));
        let host = self.resolve_subshelf_host(j, &w);
        let Some((host_idx, advance_to)) = host else {
            return self.decide_pack_into_main(
                side,
                k,
                v,
                DecisionCase::ForcedMain,
                beta,
                alpha,
                assign_amount,
            );
        };
        let col = self.carve_bounds(host_idx, &w);
        let pos = (col.x0.clone(), col.y0.clone());
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }

        self.events.push(Event::Decision {
            k,
            vertical: v,
            case: DecisionCase::BufferSub,
            x: side.clone(),
            beta_before: beta,
            alpha_before: alpha,
        });
        if let Some(to) = advance_to {
            self.current_buffer = BufferRef::B(to);
            self.last_b = to;
            self.events.push(Event::BufferAdvanced {
                to: self.buffer_idx[to],
            });
        }
        let in_end = match self.shelves[host_idx].kind {
            ShelfKind::EndTransverse(i) => Some(i),
            _ => None,
        };
        let sub = self.open_subshelf_in(host_idx, k, col, in_end);
        let sq = self.commit_place(side, k, sub);
        self.charge(
            ChargeKind::BufferAssign,
            ChargeSource::Entity(Entity::Shelf(sub)),
            Entity::Shelf(v),
            assign_amount,
        );
        self.shelves[v].buffer_assigned = true;
        PackOutcome::Placed(sq)
    }

    /// Case 2b while an end buffer is active: a horizontal subshelf on
    /// top of the end packing. Half its width counts as buffer length
    /// now; the other half is only potential.
    fn decide_open_subshelf_in_end(
        &mut self,
        side: Scalar,
        k: u32,
        v: usize,
        beta: Scalar,
        alpha: Scalar,
        assign_amount: Scalar,
    ) -> PackOutcome {
        let es = self.end_state.as_ref().expect("end buffer active");
        let eshelf = es.shelf;
        let region_i = es.region_i;
        let w = Scalar::pow2(-(k as i32));
        debug_assert!(
            &self.shelves[eshelf].shelf.cursor + &w <= self.shelves[eshelf].shelf.length()
        );
        let col = self.carve_bounds(eshelf, &w);
        let pos = (col.x0.clone(), col.y0.clone());
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }

        self.events.push(Event::Decision {
            k,
            vertical: v,
            case: DecisionCase::BufferSub,
            x: side.clone(),
            beta_before: beta,
            alpha_before: alpha,
        });
        let sub = self.open_subshelf_in(eshelf, k, col, Some(region_i));
        let sq = self.commit_place(side, k, sub);
        self.charge(
            ChargeKind::BufferAssign,
            ChargeSource::Entity(Entity::Shelf(eshelf)),
            Entity::Shelf(v),
            assign_amount,
        );
        self.shelves[v].buffer_assigned = true;
        let half_w = &w * &Scalar::ratio(1, 2);
        let es = self.end_state.as_mut().unwrap();
        es.endbufferlength += &half_w;
        es.potential_extra += &half_w;
        self.maybe_close_end_buffer();
        PackOutcome::Placed(sq)
    }

    fn current_buffer_entity(&self) -> Entity {
        match self.current_buffer {
            BufferRef::B(j) => Entity::Shelf(self.buffer_idx[j]),
            BufferRef::End(_) => {
                Entity::Shelf(self.end_state.as_ref().expect("end buffer active").shelf)
            }
        }
    }

    /// Carves a perpendicular lane of width `w` at the host shelf's
    /// used-section frontier. The host cursor advances by `w`.
    fn carve_bounds(&self, host: usize, w: &Scalar) -> Region {
        let shelf = &self.shelves[host].shelf;
        let b = &shelf.bounds;
        match shelf.dir {
            Direction::PosX => Region::new(
                &b.x0 + &shelf.cursor,
                b.y0.clone(),
                &b.x0 + &shelf.cursor + w,
                b.y1.clone(),
            ),
            Direction::NegX => Region::new(
                &b.x1 - &shelf.cursor - w,
                b.y0.clone(),
                &b.x1 - &shelf.cursor,
                b.y1.clone(),
            ),
            Direction::PosY => Region::new(
                b.x0.clone(),
                &b.y0 + &shelf.cursor,
                b.x1.clone(),
                &b.y0 + &shelf.cursor + w,
            ),
            Direction::NegY => Region::new(
                b.x0.clone(),
                &b.y1 - &shelf.cursor - w,
                b.x1.clone(),
                &b.y1 - &shelf.cursor,
            ),
        }
    }

    /// Subshelves in horizontal strips are vertical columns; in
    /// vertical strips (B3, B4) and end buffers they are horizontal.
    fn open_subshelf_in(
        &mut self,
        host: usize,
        k: u32,
        col: Region,
        in_end: Option<usize>,
    ) -> usize {
        let w = if self.shelves[host].shelf.dir.is_horizontal() {
            col.width()
        } else {
            col.height()
        };
        self.shelves[host].shelf.cursor += &w;
        if matches!(self.shelves[host].kind, ShelfKind::Buffer(_)) {
            self.b_used += &w;
        }
        let dir = if self.shelves[host].shelf.dir.is_horizontal() {
            Direction::PosY
        } else {
            Direction::PosX
        };
        let idx = self.shelves.len();
        self.shelves.push(ShelfRec {
            shelf: Shelf::new(col, dir, k),
            kind: ShelfKind::Subshelf { k, in_end },
            buffer_assigned: false,
        });
        self.open_subshelf.insert(k, idx);
        self.events.push(Event::ShelfOpened { shelf: idx });
        idx
    }

    /// Host B strip (or scan target) with room for a `w`-wide subshelf.
    /// Returns the host shelf index and the B index to advance to, if
    /// the current buffer moves forward.
    fn resolve_subshelf_host(&self, j: usize, w: &Scalar) -> Option<(usize, Option<usize>)> {
        let room = |idx: usize| {
            let s = &self.shelves[idx].shelf;
            &s.cursor + w <= s.length()
        };
        if room(self.buffer_idx[j]) {
            return Some((self.buffer_idx[j], None));
        }
        for next in (j + 1)..4 {
            if room(self.buffer_idx[next]) {
                return Some((self.buffer_idx[next], Some(next)));
            }
        }
        // Overflow scan: the tail of any earlier buffer region, then an
        // open end buffer.
        for jj in 0..4 {
            if room(self.buffer_idx[jj]) {
                return Some((self.buffer_idx[jj], None));
            }
        }
        self.open_end_shelves()
            .into_iter()
            .find(|&idx| room(idx))
            .map(|idx| (idx, None))
    }

    fn open_end_shelves(&self) -> Vec<usize> {
        self.shelves
            .iter()
            .enumerate()
            .filter(|(_, rec)| {
                matches!(rec.kind, ShelfKind::EndTransverse(_)) && rec.shelf.open
            })
            .map(|(idx, _)| idx)
            .collect()
    }

    /// Where the next H3 buffer square goes: the current B strip, the
    /// next strip (closing the current one with the square's extra
    /// area), or any other strip or open end buffer with room.
    fn resolve_h3_slot(&self, side: &Scalar) -> Result<H3Slot, Conflict> {
        let start = match self.current_buffer {
            BufferRef::B(j) => j,
            BufferRef::End(_) => self.last_b,
        };
        let fits = |idx: usize| self.shelves[idx].shelf.fits(side);
        if fits(self.buffer_idx[start]) {
            return Ok(H3Slot {
                target: self.buffer_idx[start],
                advance: None,
            });
        }
        for next in (start + 1)..4 {
            if fits(self.buffer_idx[next]) {
                return Ok(H3Slot {
                    target: self.buffer_idx[next],
                    advance: Some(Advance {
                        close_b: start,
                        to_b: next,
                    }),
                });
            }
        }
        for jj in 0..4 {
            if fits(self.buffer_idx[jj]) {
                return Ok(H3Slot {
                    target: self.buffer_idx[jj],
                    advance: None,
                });
            }
        }
        for idx in self.open_end_shelves() {
            if *side <= self.shelves[idx].shelf.height() && fits(idx) {
                return Ok(H3Slot {
                    target: idx,
                    advance: None,
                });
            }
        }
        Err(Conflict::BufferExhausted)
    }

    /// Applies the advance of an H3 slot: closes the overflowed strip,
    /// charging the square's extra area to it, and moves the current
    /// buffer forward (when it points into B).
    fn apply_h3_advance(&mut self, slot: &H3Slot, overflow_square: usize, side: &Scalar) {
        let Some(adv) = &slot.advance else {
            return;
        };
        let closed_idx = self.buffer_idx[adv.close_b];
        let amount = &side.clone() * &(side - &Scalar::ratio(1, 16));
        self.charge(
            ChargeKind::Extra,
            ChargeSource::Square(overflow_square),
            Entity::Shelf(closed_idx),
            amount,
        );
        self.shelves[closed_idx].shelf.open = false;
        self.events.push(Event::ShelfClosed { shelf: closed_idx });
        if matches!(self.current_buffer, BufferRef::B(_)) {
            self.current_buffer = BufferRef::B(adv.to_b);
        }
        self.last_b = adv.to_b;
        self.events.push(Event::BufferAdvanced {
            to: self.buffer_idx[adv.to_b],
        });
    }

    /// Closes the active end buffer once the usable end-buffer length
    /// reaches 2/16, crediting it through the closed-end count.
    fn maybe_close_end_buffer(&mut self) {
        let Some(es) = &self.end_state else {
            return;
        };
        if &es.endbufferlength + &es.potential_extra < Scalar::ratio(2, 16) {
            return;
        }
        let es = self.end_state.take().unwrap();
        self.shelves[es.shelf].shelf.open = false;
        self.events.push(Event::ShelfClosed { shelf: es.shelf });
        self.end_status[es.region_i] = EndStatus::Closed;
        self.e_closed += 1;
        self.events.push(Event::EndClosed {
            region: es.region_i,
            endbufferlength: es.endbufferlength,
            potential_extra: es.potential_extra,
            marked_from_l: es.marked_from_l,
        });
        self.current_buffer = BufferRef::B(self.last_b);
    }

    // ---- small squares into vertical shelves -------------------------------

    fn fill_main_small(&mut self, side: Scalar, k: u32, v: usize) -> PackOutcome {
        if self.shelves[v].shelf.fits(&side) {
            let shelf = &self.shelves[v].shelf;
            let pos = shelf.position_at(&shelf.cursor.clone(), &side);
            let region = Self::square_region(&pos.0, &pos.1, &side);
            if let Some(c) = self.conflict_with_foreign(&region) {
                return self.reject(side, Some(pos), Conflict::Square(c));
            }
            return PackOutcome::Placed(self.commit_place(side, k, v));
        }

        // Overflow: open the next vertical shelf, charging the extra
        // area to the one being closed.
        let w = Scalar::pow2(-(k as i32));
        let (close_region, host, col) = match self.plan_vertical_opening(&w) {
            Ok(plan) => plan,
            Err(c) => return self.reject(side, None, c),
        };
        let pos = (col.x0.clone(), col.y0.clone());
        let region = Self::square_region(&pos.0, &pos.1, &side);
        if let Some(c) = self.conflict_with_foreign(&region) {
            return self.reject(side, Some(pos), Conflict::Square(c));
        }

        let overflow_id = self.squares.len();
        let amount = self.shelves[v].shelf.extra_of(&side);
        self.charge(
            ChargeKind::Extra,
            ChargeSource::Square(overflow_id),
            Entity::Shelf(v),
            amount,
        );
        self.shelves[v].shelf.open = false;
        self.events.push(Event::ShelfClosed { shelf: v });
        if let Some(ci) = close_region {
            self.close_main_region(ci, None);
        }
        let new_v = self.open_vertical_shelf(k, host, col);
        PackOutcome::Placed(self.commit_place(side, k, new_v))
    }
}

#[derive(Clone, Debug)]
struct H3Slot {
    target: usize,
    advance: Option<Advance>,
}

#[derive(Clone, Debug)]
struct Advance {
    close_b: usize,
    to_b: usize,
}
