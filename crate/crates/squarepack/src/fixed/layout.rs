//! Region layout of the unit square for the fixed-container packer.
//!
//! The lower half holds M1, M2 (H2 main shelves), B1, B2 (H3 buffer
//! strips) and A (initial shelves for tiny classes); the upper half
//! holds M3, M4 and the vertical buffer strips B3, B4. The last eighth
//! of M1..M3 doubles as the end buffers E1..E3. The regions tile the
//! unit square exactly.

use crate::geometry::Region;
use crate::scalar::Scalar;
use crate::shelf::Direction;

/// Specification of one main packing region `M_i`.
#[derive(Clone, Debug)]
pub struct MainSpec {
    pub bounds: Region,
    pub dir: Direction,
    /// End buffer `E_i` (the final eighth in packing direction), absent
    /// for M4.
    pub end: Option<Region>,
}

/// Specification of one buffer strip `B_j`.
#[derive(Clone, Debug)]
pub struct BufferSpec {
    pub bounds: Region,
    pub dir: Direction,
}

/// The fixed subdivision of the unit square.
#[derive(Clone, Debug)]
pub struct RegionLayout {
    pub main: [MainSpec; 4],
    pub buffer: [BufferSpec; 4],
    /// Initial buffer area for height classes `k ≥ 4`.
    pub initial_area: Region,
}

fn eighth_section(bounds: &Region, dir: Direction) -> Region {
    let len = Scalar::ratio(1, 8);
    match dir {
        Direction::PosX => Region::new(
            &bounds.x1 - &len,
            bounds.y0.clone(),
            bounds.x1.clone(),
            bounds.y1.clone(),
        ),
        Direction::NegX => Region::new(
            bounds.x0.clone(),
            bounds.y0.clone(),
            &bounds.x0 + &len,
            bounds.y1.clone(),
        ),
        _ => unreachable!("main regions are horizontal"),
    }
}

impl RegionLayout {
    pub fn unit_square() -> Self {
        let m1 = Region::from_ratios((0, 1), (0, 1), (1, 1), (1, 4));
        let m2 = Region::from_ratios((1, 2), (1, 4), (1, 1), (1, 2));
        let m3 = Region::from_ratios((0, 1), (1, 2), (3, 4), (3, 4));
        let m4 = Region::from_ratios((0, 1), (3, 4), (7, 8), (1, 1));
        let main = [
            MainSpec {
                end: Some(eighth_section(&m1, Direction::PosX)),
                bounds: m1,
                dir: Direction::PosX,
            },
            MainSpec {
                end: Some(eighth_section(&m2, Direction::NegX)),
                bounds: m2,
                dir: Direction::NegX,
            },
            MainSpec {
                end: Some(eighth_section(&m3, Direction::NegX)),
                bounds: m3,
                dir: Direction::NegX,
            },
            MainSpec {
                end: None,
                bounds: m4,
                dir: Direction::NegX,
            },
        ];
        let buffer = [
            BufferSpec {
                bounds: Region::from_ratios((0, 1), (1, 4), (1, 2), (3, 8)),
                dir: Direction::PosX,
            },
            BufferSpec {
                bounds: Region::from_ratios((1, 4), (3, 8), (1, 2), (1, 2)),
                dir: Direction::PosX,
            },
            BufferSpec {
                bounds: Region::from_ratios((7, 8), (1, 2), (1, 1), (1, 1)),
                dir: Direction::PosY,
            },
            BufferSpec {
                bounds: Region::from_ratios((3, 4), (1, 2), (7, 8), (3, 4)),
                dir: Direction::PosY,
            },
        ];
        RegionLayout {
            main,
            buffer,
            initial_area: Region::from_ratios((0, 1), (3, 8), (1, 4), (1, 2)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The named regions tile the unit square without interior overlap.
    #[test]
    fn layout_tiles_unit_square() {
        let layout = RegionLayout::unit_square();
        let mut regions: Vec<Region> = Vec::new();
        for m in &layout.main {
            regions.push(m.bounds.clone());
        }
        for b in &layout.buffer {
            regions.push(b.bounds.clone());
        }
        regions.push(layout.initial_area.clone());

        let total: Scalar = regions.iter().map(|r| r.area()).sum();
        assert_eq!(total, Scalar::one());

        let unit = Region::unit();
        for r in &regions {
            assert!(unit.contains(r));
        }
        for i in 0..regions.len() {
            for j in 0..i {
                assert!(
                    !regions[i].interiors_overlap(&regions[j]),
                    "regions {i} and {j} overlap"
                );
            }
        }
    }

    #[test]
    fn end_buffers_sit_at_packing_ends() {
        let layout = RegionLayout::unit_square();
        let e1 = layout.main[0].end.as_ref().unwrap();
        assert_eq!(*e1, Region::from_ratios((7, 8), (0, 1), (1, 1), (1, 4)));
        let e2 = layout.main[1].end.as_ref().unwrap();
        assert_eq!(*e2, Region::from_ratios((1, 2), (1, 4), (5, 8), (1, 2)));
        let e3 = layout.main[2].end.as_ref().unwrap();
        assert_eq!(*e3, Region::from_ratios((0, 1), (1, 2), (1, 8), (3, 4)));
        assert!(layout.main[3].end.is_none());

        // Main lengths 1, 1/2, 3/4, 7/8; buffer lengths 1/2, 1/4, 1/2, 1/4.
        let main_lens: Vec<Scalar> = layout
            .main
            .iter()
            .map(|m| m.bounds.width())
            .collect();
        assert_eq!(
            main_lens,
            vec![
                Scalar::one(),
                Scalar::ratio(1, 2),
                Scalar::ratio(3, 4),
                Scalar::ratio(7, 8)
            ]
        );
        for (j, expect) in [(0, (1, 2)), (1, (1, 4)), (2, (1, 2)), (3, (1, 4))] {
            let b = &layout.buffer[j];
            let len = if b.dir.is_horizontal() {
                b.bounds.width()
            } else {
                b.bounds.height()
            };
            assert_eq!(len, Scalar::ratio(expect.0, expect.1), "B{}", j + 1);
        }
    }
}
