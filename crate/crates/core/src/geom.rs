//! Planar locations and rectangles.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A location in the plane. Distances are Euclidean in coordinate units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub xmin: T,
    pub xmax: T,
    pub ymin: T,
    pub ymax: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(xmin: T, xmax: T, ymin: T, ymax: T) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || !(xmin.is_finite() && xmax.is_finite() && ymin.is_finite() && ymax.is_finite()) {
            return Err(Error::domain(format!(
                "degenerate rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    pub fn unit() -> Self {
        Self {
            xmin: T::zero(),
            xmax: T::one(),
            ymin: T::zero(),
            ymax: T::one(),
        }
    }

    /// Smallest rectangle holding every point; `None` when fewer than two
    /// distinct coordinates exist along either axis.
    pub fn bounding(points: &[Point<T>]) -> Option<Self> {
        let first = points.first()?;
        let mut r = Self {
            xmin: first.x,
            xmax: first.x,
            ymin: first.y,
            ymax: first.y,
        };
        for p in &points[1..] {
            r.xmin = r.xmin.min(p.x);
            r.xmax = r.xmax.max(p.x);
            r.ymin = r.ymin.min(p.y);
            r.ymax = r.ymax.max(p.y);
        }
        Self::new(r.xmin, r.xmax, r.ymin, r.ymax).ok()
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn width(&self) -> T {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> T {
        self.ymax - self.ymin
    }
}
