//! Dynamic-container brick packing.
//!
//! Bricks are rectangles with side lengths that are powers of √2 and
//! aspect ratio √2. A brick of exponent `k` has short side `√2^k` and
//! long side `√2^(k+1)`; splitting it across the long side yields two
//! bricks of exponent `k-1`, and joining two congruent bricks along
//! their long sides yields one of exponent `k+1`.
//!
//! The packer keeps one maximal brick anchored at the origin. Each
//! square goes into the smallest free subbrick that can hold its
//! smallest fitting brick, subdividing down to that size; when nothing
//! fits, the root is doubled into the first quadrant until it does.
//! This maintains a packing density of at least 1/8 and a container
//! edge within a factor 2√2 of the optimal square.

use crate::geometry::{PlacedSquare, Region};
use crate::scalar::Scalar;
use std::collections::{BTreeMap, BTreeSet};

/// Smallest brick exponent whose short side can hold a square of side
/// `x`: the minimal `k` with `√2^k ≥ x`.
pub fn smallest_brick_exponent(x: &Scalar) -> i32 {
    assert!(x.is_positive(), "square side must be positive");
    let mut k = 0i32;
    let mut len = Scalar::one();
    let sqrt2 = Scalar::sqrt2();
    if len >= *x {
        loop {
            let next = &len / &sqrt2;
            if next >= *x {
                k -= 1;
                len = next;
            } else {
                return k;
            }
        }
    }
    while len < *x {
        k += 1;
        len = len * &sqrt2;
    }
    k
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum NodeState {
    Free,
    Occupied(usize),
    Split(usize, usize),
}

#[derive(Clone, Debug)]
struct Node {
    exponent: i32,
    /// Long side vertical (portrait) or horizontal (landscape).
    portrait: bool,
    origin: (Scalar, Scalar),
    state: NodeState,
}

impl Node {
    fn short(&self) -> Scalar {
        Scalar::sqrt2_pow(self.exponent)
    }

    fn long(&self) -> Scalar {
        Scalar::sqrt2_pow(self.exponent + 1)
    }

    fn dims(&self) -> (Scalar, Scalar) {
        if self.portrait {
            (self.short(), self.long())
        } else {
            (self.long(), self.short())
        }
    }

    fn region(&self) -> Region {
        let (w, h) = self.dims();
        Region::new(
            self.origin.0.clone(),
            self.origin.1.clone(),
            &self.origin.0 + &w,
            &self.origin.1 + &h,
        )
    }

    fn area(&self) -> Scalar {
        let (w, h) = self.dims();
        w * h
    }
}

/// Binary subdivision tree of √2-bricks with a growable root.
#[derive(Clone, Debug)]
pub struct BrickTree {
    nodes: Vec<Node>,
    root: Option<usize>,
    placed: Vec<PlacedSquare>,
    total_area: Scalar,
    free_area: Scalar,
    /// Free leaves by exponent, ordered by (y, x) origin for the
    /// deterministic smallest-origin tie break.
    free: BTreeMap<i32, BTreeSet<(Scalar, Scalar, usize)>>,
}

/// Density figures after at least one placement.
#[derive(Clone, Debug)]
pub struct DensityReport {
    pub total_area: Scalar,
    pub bmax_area: Scalar,
    /// Long side of the root brick: the maintained container edge.
    pub enclosing_square_side: Scalar,
    /// `total_area / enclosing_square_side²`.
    pub density: Scalar,
    /// Side of the tight axis-aligned bounding square of the squares
    /// actually placed; the real density can only be better.
    pub tight_spanning_side: Scalar,
}

/// Plain-data view of the tree for independent verification.
#[derive(Clone, Debug)]
pub struct TreeSnapshot {
    pub bricks: Vec<BrickSnapshot>,
    pub root: usize,
}

#[derive(Clone, Debug)]
pub struct BrickSnapshot {
    pub region: Region,
    pub exponent: i32,
    pub state: BrickState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BrickState {
    Free,
    Occupied(usize),
    Split(usize, usize),
}

impl Default for BrickTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BrickTree {
    pub fn new() -> Self {
        BrickTree {
            nodes: Vec::new(),
            root: None,
            placed: Vec::new(),
            total_area: Scalar::zero(),
            free_area: Scalar::zero(),
            free: BTreeMap::new(),
        }
    }

    pub fn placed(&self) -> &[PlacedSquare] {
        &self.placed
    }

    pub fn total_area(&self) -> &Scalar {
        &self.total_area
    }

    /// Sum of areas of free leaf bricks (maintained incrementally; the
    /// verifier recomputes it from the snapshot).
    pub fn free_leaf_area(&self) -> &Scalar {
        &self.free_area
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Packs the next square. Never fails for positive sides.
    pub fn pack(&mut self, side: Scalar) -> PlacedSquare {
        assert!(side.is_positive(), "square side must be positive");
        let want = smallest_brick_exponent(&side);
        let id = self.placed.len();

        let leaf = match self.root {
            None => {
                // First square: the root is exactly its smallest brick,
                // anchored at the origin.
                let node = Node {
                    exponent: want,
                    portrait: true,
                    origin: (Scalar::zero(), Scalar::zero()),
                    state: NodeState::Free,
                };
                self.free_area += node.area();
                self.nodes.push(node);
                self.root = Some(0);
                self.index_free(0);
                0
            }
            Some(_) => {
                while self.best_free(want).is_none() {
                    self.double_root();
                }
                self.best_free(want).unwrap()
            }
        };

        let leaf = self.subdivide_to(leaf, want);
        self.occupy(leaf, id);

        let node = &self.nodes[leaf];
        debug_assert!(node.short() >= side);
        // Minimality of S(Q) gives every occupied brick density ≥ 1/(2√2).
        debug_assert!(
            Scalar::from_int(2) * side.square() >= node.short().square(),
            "occupied brick is not the minimal fitting brick"
        );
        let square = PlacedSquare::new(id, node.origin.0.clone(), node.origin.1.clone(), side);
        self.total_area += square.area();
        self.placed.push(square.clone());
        square
    }

    /// Smallest free leaf with exponent at least `want`; ties broken by
    /// lexicographically smallest (y, x) origin.
    fn best_free(&self, want: i32) -> Option<usize> {
        self.free
            .range(want..)
            .find(|(_, set)| !set.is_empty())
            .and_then(|(_, set)| set.iter().next().map(|&(_, _, id)| id))
    }

    fn index_free(&mut self, idx: usize) {
        let node = &self.nodes[idx];
        debug_assert_eq!(node.state, NodeState::Free);
        self.free
            .entry(node.exponent)
            .or_default()
            .insert((node.origin.1.clone(), node.origin.0.clone(), idx));
    }

    fn unindex_free(&mut self, idx: usize) {
        let node = &self.nodes[idx];
        let key = (node.origin.1.clone(), node.origin.0.clone(), idx);
        let removed = self
            .free
            .get_mut(&node.exponent)
            .map(|set| set.remove(&key))
            .unwrap_or(false);
        debug_assert!(removed, "free index out of sync");
    }

    /// Doubles the root: attaches a congruent free sibling across the
    /// current short side so the union is the next-larger brick, still
    /// anchored at the origin inside the first quadrant.
    fn double_root(&mut self) {
        let root = self.root.expect("cannot double an empty tree");
        let (exp, portrait, origin) = {
            let n = &self.nodes[root];
            (n.exponent, n.portrait, n.origin.clone())
        };
        debug_assert!(origin.0.is_zero() && origin.1.is_zero());
        let (w, h) = self.nodes[root].dims();
        let sibling_origin = if portrait {
            (w.clone(), Scalar::zero())
        } else {
            (Scalar::zero(), h.clone())
        };
        let sibling = Node {
            exponent: exp,
            portrait,
            origin: sibling_origin,
            state: NodeState::Free,
        };
        self.free_area += sibling.area();
        let sibling_idx = self.nodes.len();
        self.nodes.push(sibling);
        self.index_free(sibling_idx);

        let new_root = Node {
            exponent: exp + 1,
            portrait: !portrait,
            origin: (Scalar::zero(), Scalar::zero()),
            state: NodeState::Split(root, sibling_idx),
        };
        let new_root_idx = self.nodes.len();
        self.nodes.push(new_root);
        self.root = Some(new_root_idx);
    }

    /// Splits `idx` until a brick of exponent exactly `want` remains,
    /// always recursing into the child that keeps the parent's origin.
    fn subdivide_to(&mut self, mut idx: usize, want: i32) -> usize {
        debug_assert!(self.nodes[idx].exponent >= want);
        while self.nodes[idx].exponent > want {
            self.unindex_free(idx);
            let (exp, portrait, origin) = {
                let n = &self.nodes[idx];
                (n.exponent, n.portrait, n.origin.clone())
            };
            // Halve across the long side; children flip orientation and
            // the second child sits half the long side away.
            let second_origin = if portrait {
                (origin.0.clone(), &origin.1 + &Scalar::sqrt2_pow(exp - 1))
            } else {
                (&origin.0 + &Scalar::sqrt2_pow(exp - 1), origin.1.clone())
            };
            let first = Node {
                exponent: exp - 1,
                portrait: !portrait,
                origin,
                state: NodeState::Free,
            };
            let second = Node {
                exponent: exp - 1,
                portrait: !portrait,
                origin: second_origin,
                state: NodeState::Free,
            };
            let first_idx = self.nodes.len();
            self.nodes.push(first);
            let second_idx = self.nodes.len();
            self.nodes.push(second);
            self.nodes[idx].state = NodeState::Split(first_idx, second_idx);
            self.index_free(first_idx);
            self.index_free(second_idx);
            idx = first_idx;
        }
        idx
    }

    fn occupy(&mut self, idx: usize, square_id: usize) {
        self.unindex_free(idx);
        self.free_area -= self.nodes[idx].area();
        self.nodes[idx].state = NodeState::Occupied(square_id);
    }

    /// Root brick bounds, when any square has been placed.
    pub fn bmax(&self) -> Option<Region> {
        self.root.map(|r| self.nodes[r].region())
    }

    pub fn density_report(&self) -> Result<DensityReport, EmptyTree> {
        let root = self.root.ok_or(EmptyTree)?;
        let side = self.nodes[root].long();
        let bmax_area = self.nodes[root].area();
        let density = &self.total_area / &side.square();

        let mut max_x = Scalar::zero();
        let mut max_y = Scalar::zero();
        let mut min_x = self.placed[0].x.clone();
        let mut min_y = self.placed[0].y.clone();
        for sq in &self.placed {
            let r = sq.region();
            if r.x1 > max_x {
                max_x = r.x1;
            }
            if r.y1 > max_y {
                max_y = r.y1;
            }
            if r.x0 < min_x {
                min_x = r.x0;
            }
            if r.y0 < min_y {
                min_y = r.y0;
            }
        }
        let tight = (max_x - min_x).max(max_y - min_y);

        Ok(DensityReport {
            total_area: self.total_area.clone(),
            bmax_area,
            enclosing_square_side: side,
            density,
            tight_spanning_side: tight,
        })
    }

    /// Plain-data dump for the verifier and for rendering.
    pub fn snapshot(&self) -> TreeSnapshot {
        let bricks = self
            .nodes
            .iter()
            .map(|n| BrickSnapshot {
                region: n.region(),
                exponent: n.exponent,
                state: match n.state {
                    NodeState::Free => BrickState::Free,
                    NodeState::Occupied(id) => BrickState::Occupied(id),
                    NodeState::Split(a, b) => BrickState::Split(a, b),
                },
            })
            .collect();
        TreeSnapshot {
            bricks,
            root: self.root.expect("snapshot of an empty tree"),
        }
    }
}

/// Density report requested before any square was placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no squares placed yet")]
pub struct EmptyTree;
