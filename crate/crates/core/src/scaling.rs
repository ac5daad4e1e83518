use serde::{Deserialize, Serialize};

/// Per-axis min-max map of 2D points onto the unit square.
///
/// An axis whose range collapses (`max == min`) maps every value to 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitBounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl UnitBounds {
    /// Bounds of a point set; `None` when the set is empty.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a [f64; 2]>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bounds = UnitBounds { min: first, max: first };
        for p in iter {
            for (axis, v) in p.iter().enumerate() {
                bounds.min[axis] = bounds.min[axis].min(*v);
                bounds.max[axis] = bounds.max[axis].max(*v);
            }
        }
        Some(bounds)
    }

    /// Unclamped affine map; exact 0 and 1 at the bounds.
    pub fn map(&self, p: [f64; 2]) -> [f64; 2] {
        let mut out = [0.5; 2];
        for axis in 0..2 {
            let span = self.max[axis] - self.min[axis];
            if span > 0.0 {
                out[axis] = (p[axis] - self.min[axis]) / span;
            }
        }
        out
    }

    pub fn map_clamped(&self, p: [f64; 2]) -> [f64; 2] {
        let m = self.map(p);
        [m[0].clamp(0.0, 1.0), m[1].clamp(0.0, 1.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_degenerate_axis() {
        let b = UnitBounds::from_points(&[[0.0, 3.0], [10.0, 3.0], [4.0, 3.0]]).unwrap();
        assert_eq!(b.map([0.0, 3.0]), [0.0, 0.5]);
        assert_eq!(b.map([10.0, 3.0]), [1.0, 0.5]);
        assert_eq!(b.map([4.0, 3.0]), [0.4, 0.5]);
        assert_eq!(b.map_clamped([-5.0, 100.0]), [0.0, 0.5]);
        assert_eq!(b.map_clamped([50.0, 3.0]), [1.0, 0.5]);
        assert!(UnitBounds::from_points(&[]).is_none());
    }
}
