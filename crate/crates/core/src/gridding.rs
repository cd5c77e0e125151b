//! Regular prediction grids with padding, neighbourhood lookup and
//! fill-distance geometry.
//!
//! Grid points are indexed row-major with `x` varying fastest. Padded
//! indices run over the full `M1 × M2` array; the requested (interior)
//! `m1 × m2` block sits at offset `(left, bottom)` inside it. The interior
//! includes both domain endpoints, so `hx = width / (m1 − 1)`.

use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::scalar::Scalar;

/// Extra grid lines added on each side of the interior block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub left: usize,
    pub right: usize,
    pub bottom: usize,
    pub top: usize,
}

/// Regular grid plus the padding that gives every registered observation a
/// complete `2L × 2L` neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedGrid<T> {
    origin: Point<T>,
    spacing: (T, T),
    interior_dims: (usize, usize),
    pad: Padding,
    total_dims: (usize, usize),
    order: usize,
}

/// The `(2L)²` grid points around one location, in canonical row-major
/// block order.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood<T> {
    /// Padded-grid indices, row-major over the block (x fastest).
    pub indices: Vec<usize>,
    /// Padded `(ix, iy)` of the block's lower-left point.
    pub block_origin: (usize, usize),
    /// Position of the location inside its central box, in units of spacing.
    pub local_offset: (T, T),
}

impl<T> Neighborhood<T> {
    /// Side length `2L` of the block.
    pub fn side(&self) -> usize {
        (self.indices.len() as f64).sqrt().round() as usize
    }
}

/// Cell containing a location, in padded coordinates (may be out of range).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell<T> {
    ix: i64,
    iy: i64,
    dx: T,
    dy: T,
}

impl<T: Scalar> PaddedGrid<T> {
    /// Lays an `m1 × m2` grid over `domain` and pads it minimally so that
    /// every observation has a full order-`order` neighbourhood.
    pub fn build(
        domain: Rect<T>,
        dims: (usize, usize),
        order: usize,
        obs_locs: &[Point<T>],
    ) -> Result<Self> {
        let (m1, m2) = dims;
        if order < 1 {
            return Err(Error::domain("neighbour order must be at least 1"));
        }
        if m1 < 2 * order || m2 < 2 * order {
            return Err(Error::domain(format!(
                "grid {m1}x{m2} is smaller than the {0}x{0} neighbourhood block",
                2 * order
            )));
        }
        let spacing = (
            domain.width() / T::of_usize(m1 - 1),
            domain.height() / T::of_usize(m2 - 1),
        );
        let mut grid = Self {
            origin: Point::new(domain.xmin, domain.ymin),
            spacing,
            interior_dims: dims,
            pad: Padding::default(),
            total_dims: dims,
            order,
        };
        let lo_reach = order as i64 - 1;
        let hi_reach = order as i64;
        let (mut left, mut right, mut bottom, mut top) = (0i64, 0i64, 0i64, 0i64);
        for (i, p) in obs_locs.iter().enumerate() {
            if !domain.contains(p) {
                return Err(Error::domain(format!(
                    "observation {i} at ({}, {}) lies outside the grid domain",
                    p.x, p.y
                )));
            }
            let c = grid.interior_cell(p);
            left = left.max(lo_reach - c.ix);
            bottom = bottom.max(lo_reach - c.iy);
            right = right.max(c.ix + hi_reach - (m1 as i64 - 1));
            top = top.max(c.iy + hi_reach - (m2 as i64 - 1));
        }
        grid.pad = Padding {
            left: left as usize,
            right: right as usize,
            bottom: bottom as usize,
            top: top as usize,
        };
        grid.total_dims = (
            m1 + grid.pad.left + grid.pad.right,
            m2 + grid.pad.bottom + grid.pad.top,
        );
        Ok(grid)
    }

    /// Lower-left interior grid point.
    pub fn origin(&self) -> Point<T> {
        self.origin
    }

    pub fn spacing(&self) -> (T, T) {
        self.spacing
    }

    pub fn interior_dims(&self) -> (usize, usize) {
        self.interior_dims
    }

    pub fn pad(&self) -> Padding {
        self.pad
    }

    pub fn total_dims(&self) -> (usize, usize) {
        self.total_dims
    }

    /// Neighbour order `L` the padding was computed for.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total_len(&self) -> usize {
        self.total_dims.0 * self.total_dims.1
    }

    pub fn interior_len(&self) -> usize {
        self.interior_dims.0 * self.interior_dims.1
    }

    /// Number of padding points.
    pub fn padding_len(&self) -> usize {
        self.total_len() - self.interior_len()
    }

    /// Padded-grid index of padded coordinates `(ix, iy)`.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.total_dims.0 && iy < self.total_dims.1);
        iy * self.total_dims.0 + ix
    }

    /// Padded coordinates of a padded-grid index.
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.total_dims.0, idx / self.total_dims.0)
    }

    /// Padded index of interior coordinates `(jx, jy)`.
    #[inline]
    pub fn interior_to_padded(&self, jx: usize, jy: usize) -> usize {
        self.index(jx + self.pad.left, jy + self.pad.bottom)
    }

    /// Location of a padded grid point.
    pub fn point(&self, idx: usize) -> Point<T> {
        let (ix, iy) = self.coords(idx);
        self.point_at(ix as i64 - self.pad.left as i64, iy as i64 - self.pad.bottom as i64)
    }

    /// Location of interior-relative coordinates (negative values are padding).
    fn point_at(&self, jx: i64, jy: i64) -> Point<T> {
        Point::new(
            self.origin.x + T::of(jx as f64) * self.spacing.0,
            self.origin.y + T::of(jy as f64) * self.spacing.1,
        )
    }

    /// Interior grid points in row-major order.
    pub fn interior_points(&self) -> Vec<Point<T>> {
        let (m1, m2) = self.interior_dims;
        let mut out = Vec::with_capacity(m1 * m2);
        for jy in 0..m2 {
            for jx in 0..m1 {
                out.push(self.point_at(jx as i64, jy as i64));
            }
        }
        out
    }

    /// All padded grid points in row-major order.
    pub fn all_points(&self) -> Vec<Point<T>> {
        (0..self.total_len()).map(|i| self.point(i)).collect()
    }

    /// Cell in interior-relative coordinates, floor convention on grid lines.
    fn interior_cell(&self, p: &Point<T>) -> Cell<T> {
        let fx = snap_to_line((p.x - self.origin.x) / self.spacing.0);
        let fy = snap_to_line((p.y - self.origin.y) / self.spacing.1);
        let (flx, fly) = (fx.floor(), fy.floor());
        Cell {
            ix: flx.as_f64() as i64,
            iy: fly.as_f64() as i64,
            dx: fx - flx,
            dy: fy - fly,
        }
    }

    /// The order-`order` neighbourhood whose central box holds `loc`.
    ///
    /// Fails with an internal error when the block leaves the padded grid,
    /// which means `loc` was not registered when the grid was built.
    pub fn neighborhood(&self, loc: &Point<T>, order: usize) -> Result<Neighborhood<T>> {
        if order < 1 {
            return Err(Error::domain("neighbour order must be at least 1"));
        }
        let c = self.interior_cell(loc);
        let side = 2 * order;
        let x0 = c.ix - (order as i64 - 1) + self.pad.left as i64;
        let y0 = c.iy - (order as i64 - 1) + self.pad.bottom as i64;
        let (mx, my) = (self.total_dims.0 as i64, self.total_dims.1 as i64);
        if x0 < 0 || y0 < 0 || x0 + side as i64 > mx || y0 + side as i64 > my {
            return Err(Error::internal(format!(
                "neighbourhood of ({}, {}) leaves the padded grid; the grid was not padded for this location",
                loc.x, loc.y
            )));
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        let mut indices = Vec::with_capacity(side * side);
        for by in 0..side {
            for bx in 0..side {
                indices.push(self.index(x0 + bx, y0 + by));
            }
        }
        Ok(Neighborhood {
            indices,
            block_origin: (x0, y0),
            local_offset: (c.dx, c.dy),
        })
    }

    /// Fill distance of the grid nodes over the interior of a cell.
    pub fn fill_distance(&self) -> T {
        T::of(0.5) * self.spacing.0.hypot(self.spacing.1)
    }
}

/// Rounds a fractional grid coordinate onto a grid line when it is only
/// off by division roundoff, so the floor convention sees exact lines.
#[inline]
fn snap_to_line<T: Scalar>(f: T) -> T {
    let r = f.round();
    if (f - r).abs() <= T::of(64.0) * T::epsilon() * r.abs().max(T::one()) {
        r
    } else {
        f
    }
}

/// Fill distance `h√2/2` of a square grid with spacing `h`.
pub fn fill_distance_square_grid<T: Scalar>(h: T) -> T {
    h * T::SQRT_2() * T::of(0.5)
}

/// `sup_c min_n ‖c − n‖` over candidate points `c` and nodes `n`.
pub fn fill_distance<T: Scalar>(nodes: &[Point<T>], candidates: &[Point<T>]) -> T {
    candidates
        .iter()
        .map(|c| {
            nodes
                .iter()
                .map(|n| c.dist(n))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), T::max)
}

/// `per_side × per_side` lattice covering `rect`, edges included.
pub fn dense_candidates<T: Scalar>(rect: &Rect<T>, per_side: usize) -> Vec<Point<T>> {
    let k = per_side.max(2);
    let step_x = rect.width() / T::of_usize(k - 1);
    let step_y = rect.height() / T::of_usize(k - 1);
    let mut out = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            out.push(Point::new(
                rect.xmin + T::of_usize(i) * step_x,
                rect.ymin + T::of_usize(j) * step_y,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Rect<f64> {
        Rect::unit()
    }

    #[test]
    fn interior_observations_need_no_padding() {
        let obs = [Point::new(0.5, 0.5), Point::new(0.3, 0.62)];
        let g = PaddedGrid::build(unit(), (11, 11), 1, &obs).unwrap();
        assert_eq!(g.pad(), Padding::default());
        assert_eq!(g.total_dims(), (11, 11));
    }

    #[test]
    fn centred_observation_pads_symmetrically() {
        // 6 points per side: 5 cells, the middle cell is centred on 0.5.
        let obs = [Point::new(0.5, 0.5)];
        let g = PaddedGrid::build(unit(), (8, 8), 4, &obs).unwrap();
        let p = g.pad();
        assert_eq!(p.left, p.right);
        assert_eq!(p.bottom, p.top);
        // 7 cells, centre cell index 3 with block 0..=7: no padding.
        assert_eq!(p, Padding::default());
        let g = PaddedGrid::build(unit(), (6, 6), 3, &obs).unwrap();
        let p = g.pad();
        assert_eq!((p.left, p.right, p.bottom, p.top), (0, 0, 0, 0));
        let g = PaddedGrid::build(unit(), (8, 10), 4, &obs).unwrap();
        let p = g.pad();
        assert_eq!(p.left, p.right);
        assert_eq!(p.bottom, p.top);
    }

    #[test]
    fn edge_observations_pad_by_order() {
        let obs = [Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        let g = PaddedGrid::build(unit(), (20, 20), 4, &obs).unwrap();
        // floor convention: the lower-left point owns cell 0, the upper-right
        // one owns the cell beyond the last grid line
        assert_eq!(g.pad(), Padding { left: 3, right: 4, bottom: 3, top: 4 });
        assert_eq!(g.total_dims(), (27, 27));
    }

    #[test]
    fn build_rejects_bad_input() {
        let outside = [Point::new(1.2, 0.5)];
        assert!(matches!(
            PaddedGrid::build(unit(), (20, 20), 2, &outside),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            PaddedGrid::build(unit(), (3, 20), 2, &[]),
            Err(Error::Domain(_))
        ));
        assert!(PaddedGrid::build(unit(), (20, 20), 0, &[]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let obs = [Point::new(0.01, 0.99)];
        let g = PaddedGrid::build(unit(), (9, 7), 2, &obs).unwrap();
        for idx in 0..g.total_len() {
            let (ix, iy) = g.coords(idx);
            assert_eq!(g.index(ix, iy), idx);
        }
    }

    #[test]
    fn neighborhood_of_grid_node_uses_floor_rule() {
        let g = PaddedGrid::build(unit(), (11, 11), 2, &[]).unwrap();
        let nb = g.neighborhood(&Point::new(0.5, 0.5), 2).unwrap();
        assert_eq!(nb.indices.len(), 16);
        // node (5,5) is the lower-left corner of the central box,
        // i.e. block position (1,1)
        assert_eq!(nb.block_origin, (4, 4));
        assert_eq!(nb.indices[4 + 1], g.index(5, 5));
        assert!(nb.local_offset.0.abs() < 1e-12 && nb.local_offset.1.abs() < 1e-12);
    }

    #[test]
    fn order_four_block_has_64_points() {
        let obs = [Point::new(0.43, 0.57)];
        let g = PaddedGrid::build(unit(), (20, 20), 4, &obs).unwrap();
        let nb = g.neighborhood(&obs[0], 4).unwrap();
        assert_eq!(nb.indices.len(), 64);
        assert_eq!(nb.side(), 8);
    }

    #[test]
    fn cell_centre_block_matches_nearest_sixteen() {
        let g = PaddedGrid::build(unit(), (12, 12), 2, &[]).unwrap();
        let (h, _) = g.spacing();
        let loc = Point::new(5.5 * h, 4.5 * h);
        let nb = g.neighborhood(&loc, 2).unwrap();
        let mut brute: Vec<(f64, usize)> = (0..g.total_len())
            .map(|i| (g.point(i).dist(&loc), i))
            .collect();
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // 4 at distance h/√2, 8 at h√10/2, 4 at 3h/√2
        let mut nearest: Vec<usize> = brute[..16].iter().map(|&(_, i)| i).collect();
        nearest.sort_unstable();
        let mut block = nb.indices.clone();
        block.sort_unstable();
        assert_eq!(block, nearest);
        // symmetric about the cell: the block centroid is the cell centre
        let (sx, sy) = nb
            .indices
            .iter()
            .map(|&i| g.point(i))
            .fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
        assert!((sx / 16.0 - loc.x).abs() < 1e-12);
        assert!((sy / 16.0 - loc.y).abs() < 1e-12);
    }

    #[test]
    fn unregistered_location_is_internal_error() {
        let g = PaddedGrid::build(unit(), (10, 10), 2, &[]).unwrap();
        assert!(matches!(
            g.neighborhood(&Point::new(0.0, 0.5), 2),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn fill_distance_geometry() {
        assert!((fill_distance_square_grid(0.1f64) - 0.070_710_678_118_654_75).abs() < 1e-15);
        assert!((fill_distance_square_grid(0.05f64) * 2.0 - fill_distance_square_grid(0.1)).abs() < 1e-15);
        // observation on a node: sup-min over the surrounding cells is still
        // half the diagonal, reached at the cell centres
        let h = 0.1;
        let nodes: Vec<Point<f64>> = (0..3)
            .flat_map(|j| (0..3).map(move |i| Point::new(i as f64 * h, j as f64 * h)))
            .collect();
        let cand = dense_candidates(&Rect::new(0.0, 0.2, 0.0, 0.2).unwrap(), 41);
        let d = fill_distance(&nodes, &cand);
        assert!((d - h * 2f64.sqrt() / 2.0).abs() < 1e-12);
        let g = PaddedGrid::build(unit(), (11, 11), 1, &[]).unwrap();
        assert!((g.fill_distance() - d).abs() < 1e-12);
    }
}
