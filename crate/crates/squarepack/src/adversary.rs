//! Competitive-analysis harness and seeded stream generators.
//!
//! The opponent drives the known lower-bound construction for dynamic
//! containers: it probes with a square the size of the player's current
//! spanning box and responds to a side placement with one more square
//! of the same size, or to a center placement with two squares (the box
//! size and half of it). Side play converges to density 2/3, center
//! play to 3/4, and once the center is occupied near the limit, a final
//! square of 3/4 the spanning box pushes the density to 3/7.
//!
//! Figure-dependent constants (the initial two unit squares, the probe
//! and response sizes, the canonical side/center positions) follow the
//! recurrences the construction reports: a side round satisfies
//! δ' = δ/4 + 1/2 exactly and a center round δ' = δ/4 + 9/16.

use crate::geometry::PlacedSquare;
use crate::scalar::Scalar;
use crate::verifier;
use serde::Serialize;

/// Canonical position class of a probe placement.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayerMove {
    Side,
    Center,
}

/// Classification plus whether the placement matched one of the
/// canonical patterns exactly.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoveClass {
    pub mv: PlayerMove,
    pub canonical: bool,
}

/// A placement touching a corner of the doubled box `[0, 2s]²` is a
/// side position; everything else counts as a center position. Exact
/// matches of the canonical patterns are marked canonical.
pub fn classify_move(placement: &PlacedSquare, box_side: &Scalar) -> MoveClass {
    let two_s = box_side * &Scalar::from_int(2);
    let r = placement.region();
    let zero = Scalar::zero();
    let corners = [
        (two_s.clone(), zero.clone()),
        (zero.clone(), two_s.clone()),
        (two_s.clone(), two_s.clone()),
    ];
    let touches_corner = corners.iter().any(|(cx, cy)| r.contains_point(cx, cy));
    let half_s = box_side * &Scalar::ratio(1, 2);
    let canonical_side = (placement.x == *box_side && placement.y.is_zero())
        || (placement.x.is_zero() && placement.y == *box_side);
    let canonical_center = placement.x == half_s && placement.y == *box_side;
    if touches_corner {
        MoveClass {
            mv: PlayerMove::Side,
            canonical: canonical_side,
        }
    } else {
        MoveClass {
            mv: PlayerMove::Center,
            canonical: canonical_center,
        }
    }
}

/// Anything that packs an online sequence into the first quadrant.
pub trait DynamicPlayer {
    /// Returns the lower-left corner for a square of the given side.
    fn place(&mut self, side: &Scalar) -> (Scalar, Scalar);
}

impl DynamicPlayer for crate::brick::BrickTree {
    fn place(&mut self, side: &Scalar) -> (Scalar, Scalar) {
        let sq = self.pack(side.clone());
        (sq.x, sq.y)
    }
}

/// Scripted player following the canonical side/center patterns.
///
/// On a side round the probe goes to `(s, 0)` and the follow-up to
/// `(0, s)`; on a center round the probe straddles the top at
/// `(s/2, s)`, the big response fills `(s, 0)` and the half-size one
/// `(3s/2, 3s/2)`. The closing square is placed flush right at `(s, 0)`.
pub struct ScriptedPlayer {
    moves: Vec<PlayerMove>,
    box_side: Scalar,
    init_count: u32,
    round_step: u32,
    round_index: usize,
}

impl ScriptedPlayer {
    /// `moves` is cycled when shorter than the match.
    pub fn new(moves: Vec<PlayerMove>) -> Self {
        assert!(!moves.is_empty());
        ScriptedPlayer {
            moves,
            box_side: Scalar::zero(),
            init_count: 0,
            round_step: 0,
            round_index: 0,
        }
    }

    pub fn all_side() -> Self {
        Self::new(vec![PlayerMove::Side])
    }

    pub fn all_center() -> Self {
        Self::new(vec![PlayerMove::Center])
    }

    fn current_move(&self) -> PlayerMove {
        self.moves[self.round_index % self.moves.len()]
    }
}

impl DynamicPlayer for ScriptedPlayer {
    fn place(&mut self, side: &Scalar) -> (Scalar, Scalar) {
        let zero = Scalar::zero();
        // Initial configuration: two unit squares side by side.
        if self.init_count == 0 {
            self.init_count = 1;
            return (zero.clone(), zero);
        }
        if self.init_count == 1 {
            self.init_count = 2;
            self.box_side = Scalar::from_int(2);
            return (Scalar::one(), zero);
        }
        let s = self.box_side.clone();
        // The closing demand is 3/4 of the box: park it flush right.
        if *side == &s * &Scalar::ratio(3, 4) {
            return (s, zero);
        }
        match (self.current_move(), self.round_step) {
            (PlayerMove::Side, 0) => {
                self.round_step = 1;
                (s, zero)
            }
            (PlayerMove::Side, _) => {
                self.round_step = 0;
                self.round_index += 1;
                self.box_side = &s * &Scalar::from_int(2);
                (zero, s)
            }
            (PlayerMove::Center, 0) => {
                self.round_step = 1;
                (&s * &Scalar::ratio(1, 2), s.clone())
            }
            (PlayerMove::Center, 1) => {
                self.round_step = 2;
                (s, zero)
            }
            (PlayerMove::Center, _) => {
                self.round_step = 0;
                self.round_index += 1;
                let pos = &s * &Scalar::ratio(3, 2);
                self.box_side = &s * &Scalar::from_int(2);
                (pos.clone(), pos)
            }
        }
    }
}

/// One record per round of the match transcript.
#[derive(Clone, Debug, Serialize)]
pub struct RoundRecord {
    pub round: u32,
    pub phase: String,
    pub demands: Vec<Scalar>,
    pub placements: Vec<PlacedSquare>,
    pub player_move: Option<MoveClass>,
    pub spanning_side: Scalar,
    pub density: Scalar,
}

/// Verified match transcript. `violation` truncates the match.
#[derive(Clone, Debug, Serialize)]
pub struct MatchTranscript {
    pub rounds: Vec<RoundRecord>,
    pub violation: Option<String>,
    pub final_density: Scalar,
    pub closed: bool,
}

/// Zero round budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("max_rounds must be at least 1")]
pub struct InvalidRounds;

/// Plays the opponent against `player` for up to `max_rounds` rounds.
/// Every placement is validated before the next demand; a violation
/// truncates the transcript with its reason.
pub fn run_match(
    player: &mut dyn DynamicPlayer,
    max_rounds: u32,
    epsilon: &Scalar,
) -> Result<MatchTranscript, InvalidRounds> {
    if max_rounds == 0 {
        return Err(InvalidRounds);
    }
    let mut placed: Vec<PlacedSquare> = Vec::new();
    let mut issued_area = Scalar::zero();
    let mut rounds = Vec::new();
    let mut violation: Option<String> = None;
    let mut center_seen = false;
    let mut closed = false;

    let mut issue = |side: Scalar,
                     placed: &mut Vec<PlacedSquare>,
                     issued_area: &mut Scalar|
     -> Result<PlacedSquare, String> {
        let (x, y) = player.place(&side);
        if x.is_negative() || y.is_negative() {
            return Err(format!("placement ({x}, {y}) leaves the first quadrant"));
        }
        let sq = PlacedSquare::new(placed.len(), x, y, side);
        placed.push(sq.clone());
        let validity = verifier::validate(placed, None);
        if !validity.is_valid() {
            placed.pop();
            return Err(format!("overlapping placement: {:?}", validity.violations));
        }
        *issued_area += sq.area();
        Ok(sq)
    };

    let spanning = |placed: &[PlacedSquare]| -> Scalar {
        let mut max_x = Scalar::zero();
        let mut max_y = Scalar::zero();
        for sq in placed {
            let r = sq.region();
            if r.x1 > max_x {
                max_x = r.x1;
            }
            if r.y1 > max_y {
                max_y = r.y1;
            }
        }
        max_x.max(max_y)
    };

    // Round 0: the initial configuration of two unit squares.
    let mut init_record = RoundRecord {
        round: 0,
        phase: "init".to_string(),
        demands: vec![Scalar::one(), Scalar::one()],
        placements: Vec::new(),
        player_move: None,
        spanning_side: Scalar::zero(),
        density: Scalar::zero(),
    };
    for _ in 0..2 {
        match issue(Scalar::one(), &mut placed, &mut issued_area) {
            Ok(sq) => init_record.placements.push(sq),
            Err(reason) => {
                violation = Some(reason);
                break;
            }
        }
    }
    let s0 = spanning(&placed);
    init_record.spanning_side = s0.clone();
    init_record.density = &issued_area / &s0.square();
    rounds.push(init_record);

    let limit = Scalar::ratio(3, 4);
    let mut round = 1u32;
    while violation.is_none() && round <= max_rounds {
        let box_side = spanning(&placed);
        let mut record = RoundRecord {
            round,
            phase: "round".to_string(),
            demands: vec![box_side.clone()],
            placements: Vec::new(),
            player_move: None,
            spanning_side: Scalar::zero(),
            density: Scalar::zero(),
        };
        let probe = match issue(box_side.clone(), &mut placed, &mut issued_area) {
            Ok(sq) => sq,
            Err(reason) => {
                violation = Some(reason);
                rounds.push(record);
                break;
            }
        };
        record.placements.push(probe.clone());
        let mv = classify_move(&probe, &box_side);
        record.player_move = Some(mv);
        let responses: Vec<Scalar> = match mv.mv {
            PlayerMove::Side => vec![box_side.clone()],
            PlayerMove::Center => {
                center_seen = true;
                vec![box_side.clone(), &box_side * &Scalar::ratio(1, 2)]
            }
        };
        for side in responses {
            record.demands.push(side.clone());
            match issue(side, &mut placed, &mut issued_area) {
                Ok(sq) => record.placements.push(sq),
                Err(reason) => {
                    violation = Some(reason);
                    break;
                }
            }
        }
        let s = spanning(&placed);
        record.spanning_side = s.clone();
        record.density = &issued_area / &s.square();
        let density = record.density.clone();
        rounds.push(record);
        if violation.is_some() {
            break;
        }

        // Close once the density sits within the ε-window of its limit
        // with the center occupied: one final square of 3/4 the box.
        let within = (&limit - &density) < *epsilon && (&density - &limit) < *epsilon;
        if center_seen && within {
            let final_side = &s * &Scalar::ratio(3, 4);
            let mut close_record = RoundRecord {
                round: round + 1,
                phase: "close".to_string(),
                demands: vec![final_side.clone()],
                placements: Vec::new(),
                player_move: None,
                spanning_side: Scalar::zero(),
                density: Scalar::zero(),
            };
            match issue(final_side, &mut placed, &mut issued_area) {
                Ok(sq) => {
                    close_record.placements.push(sq);
                    closed = true;
                }
                Err(reason) => violation = Some(reason),
            }
            let s = spanning(&placed);
            close_record.spanning_side = s.clone();
            close_record.density = &issued_area / &s.square();
            rounds.push(close_record);
            break;
        }
        round += 1;
    }

    let final_density = rounds
        .last()
        .map(|r| r.density.clone())
        .unwrap_or_else(Scalar::zero);
    Ok(MatchTranscript {
        rounds,
        violation,
        final_density,
        closed,
    })
}

// ---- seeded stream generation ----------------------------------------

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Class bias presets for the budgeted generator.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassMix {
    /// Everything: occasional large and medium squares over a small mix.
    Mixed,
    /// Only `H_{≥2}`.
    SmallOnly,
    /// Only `H_1`.
    MediumOnly,
    /// Deep classes `H_4..H_9`.
    Tiny,
    /// Sides exactly `2^-k`: every class-boundary case.
    BoundaryPowers,
    /// A few mediums first, then a flood of tiny squares.
    MediumThenTiny,
    /// H3 squares too wide for end buffers, mixed with H4.
    OversizeH3,
}

impl ClassMix {
    pub const ALL: [ClassMix; 7] = [
        ClassMix::Mixed,
        ClassMix::SmallOnly,
        ClassMix::MediumOnly,
        ClassMix::Tiny,
        ClassMix::BoundaryPowers,
        ClassMix::MediumThenTiny,
        ClassMix::OversizeH3,
    ];

    pub fn parse(s: &str) -> Option<ClassMix> {
        Some(match s {
            "mixed" => ClassMix::Mixed,
            "small-only" => ClassMix::SmallOnly,
            "medium-only" => ClassMix::MediumOnly,
            "tiny" => ClassMix::Tiny,
            "boundary-powers" => ClassMix::BoundaryPowers,
            "medium-then-tiny" => ClassMix::MediumThenTiny,
            "oversize-h3" => ClassMix::OversizeH3,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassMix::Mixed => "mixed",
            ClassMix::SmallOnly => "small-only",
            ClassMix::MediumOnly => "medium-only",
            ClassMix::Tiny => "tiny",
            ClassMix::BoundaryPowers => "boundary-powers",
            ClassMix::MediumThenTiny => "medium-then-tiny",
            ClassMix::OversizeH3 => "oversize-h3",
        }
    }
}

/// Deterministic-per-seed sequence of rational sides whose prefix sums
/// of areas never exceed `budget`. Aims for `target_len` squares but
/// stops early when the budget cannot fit another square of the mix's
/// smallest size.
pub fn random_budgeted_stream(
    seed: u64,
    budget: &Scalar,
    mix: ClassMix,
    target_len: usize,
) -> Vec<Scalar> {
    assert!(budget.is_positive(), "budget must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sides = Vec::new();
    let mut remaining = budget.clone();
    let min_side = Scalar::pow2(-12);
    for i in 0..target_len {
        let mut side = draw_side(&mut rng, mix, i, target_len);
        // Halving keeps the dyadic structure while it shrinks to fit
        // the remaining budget.
        while side.square() > remaining {
            side = side * Scalar::ratio(1, 2);
            if side < min_side {
                return sides;
            }
        }
        remaining -= side.square();
        sides.push(side);
    }
    sides
}

fn draw_side(rng: &mut ChaCha8Rng, mix: ClassMix, index: usize, target_len: usize) -> Scalar {
    let class_side = |rng: &mut ChaCha8Rng, k: i32| -> Scalar {
        // Uniform dyadic side in (2^-(k+1), 2^-k].
        let m: i64 = rng.gen_range(1..=64);
        Scalar::pow2(-(k + 1)) * (Scalar::one() + Scalar::ratio(m, 64))
    };
    match mix {
        ClassMix::Mixed => {
            let roll: u32 = rng.gen_range(0..100);
            let k = match roll {
                0 => 0,
                1..=4 => 1,
                5..=34 => 2,
                35..=59 => 3,
                60..=79 => 4,
                80..=89 => 5,
                90..=95 => 6,
                _ => rng.gen_range(7..=9),
            };
            class_side(rng, k)
        }
        ClassMix::SmallOnly => {
            let k = [2, 2, 3, 3, 3, 4, 4, 5, 6, 7][rng.gen_range(0..10usize)];
            class_side(rng, k)
        }
        ClassMix::MediumOnly => class_side(rng, 1),
        ClassMix::Tiny => {
            let k = rng.gen_range(4..=9);
            class_side(rng, k)
        }
        ClassMix::BoundaryPowers => Scalar::pow2(-rng.gen_range(1..=9)),
        ClassMix::MediumThenTiny => {
            if index < 3.min(target_len / 4) {
                class_side(rng, 1)
            } else {
                class_side(rng, rng.gen_range(4..=8))
            }
        }
        ClassMix::OversizeH3 => {
            if rng.gen_bool(0.6) {
                // H3 sides in (3/32, 1/8]: wide enough to miss most
                // end-buffer widths.
                let m: i64 = rng.gen_range(1..=8);
                Scalar::ratio(3, 32) + Scalar::ratio(m, 256)
            } else {
                class_side(rng, 4)
            }
        }
    }
}

/// Unbudgeted sides for the dynamic packer, spanning brick exponents
/// `lo..=hi` with both rational and √2-multiple values.
pub fn random_dynamic_stream(seed: u64, len: usize, lo: i32, hi: i32) -> Vec<Scalar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let e: i32 = rng.gen_range(lo..=hi);
            let m: i64 = rng.gen_range(33..=64);
            let base = Scalar::sqrt2_pow(e);
            if rng.gen_bool(0.5) {
                // Rational-leaning side just below the brick edge.
                base * Scalar::ratio(m, 64) * Scalar::ratio(181, 256)
            } else {
                base * Scalar::ratio(m, 64)
            }
        })
        .collect()
}
