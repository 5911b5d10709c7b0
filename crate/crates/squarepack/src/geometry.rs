//! Axis-aligned squares and rectangular regions with exact coordinates.

use crate::scalar::Scalar;
use std::fmt;

/// A square placed in the plane, occupying `[x, x+side] × [y, y+side]`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct PlacedSquare {
    /// Arrival index in the input sequence.
    pub id: usize,
    pub x: Scalar,
    pub y: Scalar,
    pub side: Scalar,
    /// Height-class order, when the square was packed by the fixed packer.
    pub class_k: Option<u32>,
}

impl PlacedSquare {
    pub fn new(id: usize, x: Scalar, y: Scalar, side: Scalar) -> Self {
        assert!(side.is_positive(), "square side must be positive");
        PlacedSquare {
            id,
            x,
            y,
            side,
            class_k: None,
        }
    }

    pub fn with_class(mut self, k: u32) -> Self {
        self.class_k = Some(k);
        self
    }

    pub fn region(&self) -> Region {
        Region::new(
            self.x.clone(),
            self.y.clone(),
            &self.x + &self.side,
            &self.y + &self.side,
        )
    }

    pub fn area(&self) -> Scalar {
        self.side.square()
    }
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]` with positive extent.
#[derive(Clone, PartialEq, Eq, serde::Serialize)]
pub struct Region {
    pub x0: Scalar,
    pub y0: Scalar,
    pub x1: Scalar,
    pub y1: Scalar,
}

impl Region {
    pub fn new(x0: Scalar, y0: Scalar, x1: Scalar, y1: Scalar) -> Self {
        assert!(x0 < x1 && y0 < y1, "degenerate region");
        Region { x0, y0, x1, y1 }
    }

    pub fn from_ratios(x0: (i64, i64), y0: (i64, i64), x1: (i64, i64), y1: (i64, i64)) -> Self {
        Region::new(
            Scalar::ratio(x0.0, x0.1),
            Scalar::ratio(y0.0, y0.1),
            Scalar::ratio(x1.0, x1.1),
            Scalar::ratio(y1.0, y1.1),
        )
    }

    /// The unit square `[0,1]²`.
    pub fn unit() -> Self {
        Region::new(
            Scalar::zero(),
            Scalar::zero(),
            Scalar::one(),
            Scalar::one(),
        )
    }

    pub fn width(&self) -> Scalar {
        &self.x1 - &self.x0
    }

    pub fn height(&self) -> Scalar {
        &self.y1 - &self.y0
    }

    pub fn area(&self) -> Scalar {
        self.width() * self.height()
    }

    /// True iff the open interiors of the two regions intersect.
    /// Shared edges or corners do not count as overlap.
    pub fn interiors_overlap(&self, other: &Region) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    /// Closed containment; touching the boundary is allowed.
    pub fn contains(&self, inner: &Region) -> bool {
        self.x0 <= inner.x0 && inner.x1 <= self.x1 && self.y0 <= inner.y0 && inner.y1 <= self.y1
    }

    pub fn contains_point(&self, x: &Scalar, y: &Scalar) -> bool {
        &self.x0 <= x && x <= &self.x1 && &self.y0 <= y && y <= &self.y1
    }

    /// Intersection, or `None` when the interiors are disjoint.
    pub fn intersection(&self, other: &Region) -> Option<Region> {
        if !self.interiors_overlap(other) {
            return None;
        }
        Some(Region::new(
            self.x0.clone().max(other.x0.clone()),
            self.y0.clone().max(other.y0.clone()),
            self.x1.clone().min(other.x1.clone()),
            self.y1.clone().min(other.y1.clone()),
        ))
    }
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}] x [{}, {}]",
            self.x0, self.x1, self.y0, self.y1
        )
    }
}

/// True iff the open interiors of `a` and `b` intersect.
pub fn interiors_overlap(a: &Region, b: &Region) -> bool {
    a.interiors_overlap(b)
}

/// True iff `inner ⊆ outer` (closed containment).
pub fn contains(outer: &Region, inner: &Region) -> bool {
    outer.contains(inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq(x: (i64, i64), y: (i64, i64), side: (i64, i64)) -> PlacedSquare {
        PlacedSquare::new(
            0,
            Scalar::ratio(x.0, x.1),
            Scalar::ratio(y.0, y.1),
            Scalar::ratio(side.0, side.1),
        )
    }

    #[test]
    fn overlap_examples() {
        let unit = Region::unit();
        let shifted = Region::from_ratios((1, 1), (0, 1), (2, 1), (1, 1));
        assert!(!unit.interiors_overlap(&shifted), "edge contact is not overlap");
        let halves = Region::from_ratios((1, 2), (1, 2), (3, 2), (3, 2));
        assert!(unit.interiors_overlap(&halves));
        let far = Region::from_ratios((2, 1), (2, 1), (3, 1), (3, 1));
        assert!(!unit.interiors_overlap(&far));
    }

    #[test]
    fn contains_examples() {
        let unit = Region::unit();
        assert!(unit.contains(&sq((0, 1), (0, 1), (1, 1)).region()));
        assert!(!unit.contains(&sq((1, 2), (1, 2), (3, 4)).region()));
        assert!(unit.contains(&unit.clone()));
    }

    #[test]
    fn area_examples() {
        assert_eq!(
            sq((0, 1), (0, 1), (1, 4)).area(),
            Scalar::ratio(1, 16)
        );
        let brick = Region::new(
            Scalar::zero(),
            Scalar::zero(),
            Scalar::one(),
            Scalar::sqrt2(),
        );
        assert_eq!(brick.area(), Scalar::sqrt2());
    }

    #[test]
    #[should_panic(expected = "side must be positive")]
    fn zero_side_rejected() {
        sq((0, 1), (0, 1), (0, 1));
    }

    fn arb_region() -> impl Strategy<Value = Region> {
        (-40i64..40, -40i64..40, 1i64..30, 1i64..30).prop_map(|(x, y, w, h)| {
            Region::from_ratios((x, 8), (y, 8), (x + w, 8), (y + h, 8))
        })
    }

    proptest! {
        #[test]
        fn overlap_is_symmetric(a in arb_region(), b in arb_region()) {
            prop_assert_eq!(a.interiors_overlap(&b), b.interiors_overlap(&a));
        }

        #[test]
        fn contains_is_reflexive_and_transitive(
            a in arb_region(), b in arb_region(), c in arb_region()
        ) {
            prop_assert!(a.contains(&a));
            if a.contains(&b) && b.contains(&c) {
                prop_assert!(a.contains(&c));
            }
        }

        #[test]
        fn area_positive(a in arb_region()) {
            prop_assert!(a.area().is_positive());
        }
    }
}
