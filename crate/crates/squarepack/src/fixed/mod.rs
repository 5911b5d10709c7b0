//! The fixed-container Recursive Shelf Algorithm.
//!
//! Dispatches arriving squares by height class: the single large slot in
//! the top-right corner, ceiling packing for medium squares, and the
//! shelf-and-buffer machinery of `packSmall` for everything smaller.
//! Packs any online sequence with total area at most 11/32 into the
//! unit square; a placement that would collide with another
//! subroutine's packing or leave the container is reported as
//! [`PackOutcome::Rejected`] with a witness, leaving the state
//! untouched.

mod layout;
mod packer;

pub use layout::{BufferSpec, MainSpec, RegionLayout};

use crate::geometry::PlacedSquare;
use crate::scalar::Scalar;
use crate::shelf::{ChargeLedger, Shelf};
use std::collections::BTreeMap;

/// Role of a shelf in the arena.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShelfKind {
    /// `M_i` (0-based), the H2 main shelf of a region.
    Main(usize),
    /// `B_j` (0-based), an H3 buffer strip.
    Buffer(usize),
    /// Vertical shelf for class `k` carved out of a main region.
    Vertical { k: u32 },
    /// Vertical (or, in an end buffer, horizontal) buffer subshelf for
    /// class `k`. `in_end` names the end buffer it lives in, if any.
    Subshelf { k: u32, in_end: Option<usize> },
    /// Initial shelf for class `k ≥ 4` in region A.
    Initial { k: u32 },
    /// Transverse shelf over `E_i ∖ L` while the end buffer is active.
    EndTransverse(usize),
}

/// A shelf plus its role and per-shelf flags.
#[derive(Clone, Debug)]
pub struct ShelfRec {
    pub shelf: Shelf,
    pub kind: ShelfKind,
    /// Whether a buffer decision has been made for this (vertical) shelf.
    pub buffer_assigned: bool,
}

/// Which buffer currently receives buffer packings.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BufferRef {
    B(usize),
    End(usize),
}

/// Lifecycle of an end buffer `E_i`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EndStatus {
    Untouched,
    /// Currently the active buffer region.
    Active,
    /// Was active, got superseded before closing; never credited.
    Displaced,
    Closed,
}

/// Live accounting for the active end buffer.
#[derive(Clone, Debug)]
pub struct EndBufferState {
    pub region_i: usize,
    pub shelf: usize,
    /// Width of the overlap L of the main packing with `E_i`.
    pub ell: Scalar,
    pub endbufferlength: Scalar,
    pub potential_extra: Scalar,
    /// Area marked used from L (ℓ/16 per oversize H3 event).
    pub marked_from_l: Scalar,
    pub oversize_events: u32,
}

/// Which branch a buffer decision took.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DecisionCase {
    /// Case 1: β ≥ α or β + x ≥ α + 1/16 — square goes to the vertical
    /// shelf, buffer does not grow.
    PackIntoMain,
    /// Case 2a: an H3 square extends the buffer packing.
    BufferH3,
    /// Case 2b: a new buffer subshelf is opened for k ≥ 4.
    BufferSub,
    /// No buffer position existed anywhere; packed into the vertical
    /// shelf. Only reachable when the buffer region is already
    /// over-provisioned.
    ForcedMain,
}

/// Transcript entry. The verifier replays these to recompute the
/// ledger scalars independently of the packer's caches.
#[derive(Clone, Debug)]
pub enum Event {
    Placed { square: usize, shelf: usize },
    PlacedLarge { square: usize },
    PlacedCeiling { square: usize, second_shelf: bool },
    ShelfOpened { shelf: usize },
    ShelfClosed { shelf: usize },
    InitialPhaseClosed { k: u32 },
    MainClosed { region: usize },
    BufferAdvanced { to: usize },
    BufferScanPlaced { shelf: usize },
    EndInstantClosed { region: usize, ell: Scalar },
    EndOpened { region: usize, ell: Scalar },
    EndClosed {
        region: usize,
        endbufferlength: Scalar,
        potential_extra: Scalar,
        marked_from_l: Scalar,
    },
    Decision {
        k: u32,
        vertical: usize,
        case: DecisionCase,
        x: Scalar,
        beta_before: Scalar,
        alpha_before: Scalar,
    },
}

/// Why a placement was refused.
#[derive(Clone, Debug)]
pub enum Conflict {
    /// Would overlap the placed square with this id.
    Square(usize),
    /// Would leave the unit square.
    OutOfContainer,
    /// No main packing region can host the square or shelf.
    NoRegion,
    /// No buffer position exists anywhere in B ∪ E.
    BufferExhausted,
}

/// Candidate position and first conflict of a rejected square.
#[derive(Clone, Debug)]
pub struct Witness {
    pub side: Scalar,
    pub candidate: Option<(Scalar, Scalar)>,
    pub conflict: Conflict,
}

/// Result of feeding one square to the packer.
#[derive(Clone, Debug)]
pub enum PackOutcome {
    Placed(PlacedSquare),
    Rejected(Witness),
}

#[derive(Clone, Debug)]
pub(crate) struct InitialRec {
    pub shelf: usize,
    pub len: Scalar,
    pub open: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct CeilingState {
    pub cursor: Scalar,
    pub second_active: bool,
}

/// Full state of the Recursive Shelf Algorithm.
#[derive(Clone, Debug)]
pub struct FixedPacker {
    pub(crate) layout: RegionLayout,
    pub(crate) shelves: Vec<ShelfRec>,
    pub(crate) squares: Vec<PlacedSquare>,
    pub(crate) ledger: ChargeLedger,
    pub(crate) events: Vec<Event>,

    pub(crate) main_idx: [usize; 4],
    pub(crate) buffer_idx: [usize; 4],

    pub(crate) large: Option<usize>,
    pub(crate) ceiling: CeilingState,
    /// Medium and large square ids, the only cross-subroutine conflicts
    /// a small placement can have.
    pub(crate) foreign: Vec<usize>,

    pub(crate) current_buffer: BufferRef,
    pub(crate) last_b: usize,
    pub(crate) initial3_len: Scalar,
    pub(crate) initial3_open: bool,
    pub(crate) initial: BTreeMap<u32, InitialRec>,
    pub(crate) a_stack_top: Scalar,
    pub(crate) vertical: BTreeMap<u32, usize>,
    pub(crate) open_subshelf: BTreeMap<u32, usize>,

    pub(crate) b_used: Scalar,
    pub(crate) e_closed: u32,
    pub(crate) v_total: Scalar,
    pub(crate) end_status: [EndStatus; 3],
    pub(crate) end_state: Option<EndBufferState>,

    pub(crate) input_count: usize,
    pub(crate) total_small_area: Scalar,
}

impl Default for FixedPacker {
    fn default() -> Self {
        Self::new()
    }
}

impl FixedPacker {
    /// Empty state: M1 open for H2, the H3 buffer shelf open in B1.
    pub fn new() -> Self {
        let layout = RegionLayout::unit_square();
        let mut shelves = Vec::new();
        let mut main_idx = [0usize; 4];
        for (i, spec) in layout.main.iter().enumerate() {
            main_idx[i] = shelves.len();
            shelves.push(ShelfRec {
                shelf: Shelf::new(spec.bounds.clone(), spec.dir, 2),
                kind: ShelfKind::Main(i),
                buffer_assigned: false,
            });
        }
        let mut buffer_idx = [0usize; 4];
        for (j, spec) in layout.buffer.iter().enumerate() {
            buffer_idx[j] = shelves.len();
            shelves.push(ShelfRec {
                shelf: Shelf::new(spec.bounds.clone(), spec.dir, 3),
                kind: ShelfKind::Buffer(j),
                buffer_assigned: false,
            });
        }
        let a_stack_top = layout.initial_area.y0.clone();
        FixedPacker {
            layout,
            shelves,
            squares: Vec::new(),
            ledger: ChargeLedger::new(),
            events: Vec::new(),
            main_idx,
            buffer_idx,
            large: None,
            ceiling: CeilingState {
                cursor: Scalar::zero(),
                second_active: false,
            },
            foreign: Vec::new(),
            current_buffer: BufferRef::B(0),
            last_b: 0,
            initial3_len: Scalar::zero(),
            initial3_open: true,
            initial: BTreeMap::new(),
            a_stack_top,
            vertical: BTreeMap::new(),
            open_subshelf: BTreeMap::new(),
            b_used: Scalar::zero(),
            e_closed: 0,
            v_total: Scalar::zero(),
            end_status: [EndStatus::Untouched; 3],
            end_state: None,
            input_count: 0,
            total_small_area: Scalar::zero(),
        }
    }

    pub fn layout(&self) -> &RegionLayout {
        &self.layout
    }

    pub fn squares(&self) -> &[PlacedSquare] {
        &self.squares
    }

    pub fn shelves(&self) -> &[ShelfRec] {
        &self.shelves
    }

    pub fn ledger(&self) -> &ChargeLedger {
        &self.ledger
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn main_shelf(&self, i: usize) -> &ShelfRec {
        &self.shelves[self.main_idx[i]]
    }

    pub fn buffer_shelf(&self, j: usize) -> &ShelfRec {
        &self.shelves[self.buffer_idx[j]]
    }

    /// Total width of the used sections in B (Definition 1's `b`).
    pub fn b_used(&self) -> &Scalar {
        &self.b_used
    }

    /// Number of closed end buffers (Definition 1's `e`).
    pub fn e_closed(&self) -> u32 {
        self.e_closed
    }

    /// Total width of vertical shelves in the main region (`v`).
    pub fn v_total(&self) -> &Scalar {
        &self.v_total
    }

    /// `β = b + 1.5/16·e − 3/16`.
    pub fn beta(&self) -> Scalar {
        &self.b_used + &(Scalar::ratio(3, 32) * Scalar::from_int(self.e_closed as i64))
            - Scalar::ratio(3, 16)
    }

    /// `α = v/2`.
    pub fn alpha(&self) -> Scalar {
        &self.v_total * &Scalar::ratio(1, 2)
    }

    pub fn end_status(&self) -> &[EndStatus; 3] {
        &self.end_status
    }

    pub fn end_state(&self) -> Option<&EndBufferState> {
        self.end_state.as_ref()
    }

    pub fn current_buffer(&self) -> BufferRef {
        self.current_buffer
    }

    /// Sum of areas of placed small squares.
    pub fn total_small_area(&self) -> &Scalar {
        &self.total_small_area
    }
}

#[cfg(test)]
mod tests;
