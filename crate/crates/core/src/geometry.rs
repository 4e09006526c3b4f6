//! Boxes, regions and the super-key order used to sort them.
//!
//! A [`SuperKey`] pairs one coordinate of a box with the box's unique name so
//! that sorting by a single coordinate still yields a strict total order.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unique identifier of a box. Doubles as the node name in the tree graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Name(pub u64);

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for Name {
    fn from(v: u64) -> Self {
        Name(v)
    }
}

/// A named axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub name: Name,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    /// Checked constructor: coordinates must be finite and min ≤ max per axis.
    pub fn new(name: impl Into<Name>, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            name: name.into(),
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|c| c.is_finite());
        if !finite {
            return Err(Error::InvalidBox {
                name: self.name,
                reason: "non-finite coordinate",
            });
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::InvalidBox {
                name: self.name,
                reason: "minimum exceeds maximum",
            });
        }
        Ok(())
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn region(&self) -> Region {
        Region {
            x_min: self.x_min,
            y_min: self.y_min,
            x_max: self.x_max,
            y_max: self.y_max,
        }
    }

    #[inline]
    pub fn key(&self, key: SortKey) -> SuperKey {
        SuperKey::new(key.coordinate(self), self.name)
    }

    /// Same box shifted by `(dx, dy)` under a new name.
    pub fn translated(&self, name: Name, dx: f64, dy: f64) -> BBox {
        BBox {
            name,
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }
}

/// The rectangle enclosing a node's box and every box beneath it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Region {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        Region::new(c[0], c[1], c[2], c[3])
    }

    /// Coordinate-wise expansion to cover `other`.
    #[inline]
    pub fn union(&self, other: &Region) -> Region {
        Region {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    pub fn contains_box(&self, b: &BBox) -> bool {
        self.contains_region(&b.region())
    }
}

/// Closed-interval overlap on both axes; touching edges count.
#[inline]
pub fn boxes_intersect(a: &BBox, b: &BBox) -> bool {
    a.x_min <= b.x_max && b.x_min <= a.x_max && a.y_min <= b.y_max && b.y_min <= a.y_max
}

#[inline]
pub fn intersects_region(b: &BBox, r: &Region) -> bool {
    b.x_min <= r.x_max && r.x_min <= b.x_max && b.y_min <= r.y_max && r.y_min <= b.y_max
}

/// Region of a node from its own box and the regions of up to two children.
pub fn merge_region<'a>(node_box: &BBox, children: impl IntoIterator<Item = &'a Region>) -> Region {
    children
        .into_iter()
        .fold(node_box.region(), |acc, r| acc.union(r))
}

/// Which coordinate a super key is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SortKey {
    XMin,
    YMin,
    XMax,
    YMax,
}

impl SortKey {
    pub const ALL: [SortKey; 4] = [SortKey::XMin, SortKey::YMin, SortKey::XMax, SortKey::YMax];

    /// Split axis for a tree level: x_min at even depths, y_min at odd.
    #[inline]
    pub fn split_axis(depth: usize) -> SortKey {
        if depth % 2 == 0 {
            SortKey::XMin
        } else {
            SortKey::YMin
        }
    }

    #[inline]
    pub fn coordinate(self, b: &BBox) -> f64 {
        match self {
            SortKey::XMin => b.x_min,
            SortKey::YMin => b.y_min,
            SortKey::XMax => b.x_max,
            SortKey::YMax => b.y_max,
        }
    }
}

/// A coordinate catenated with a box name.
///
/// Ordered by coordinate, then name. Coordinates are assumed finite, so the
/// order is total; distinct names never compare equal.
#[derive(Clone, Copy, Debug)]
pub struct SuperKey {
    pub coordinate: f64,
    pub name: Name,
}

impl SuperKey {
    pub fn new(coordinate: f64, name: Name) -> Self {
        SuperKey { coordinate, name }
    }
}

#[inline]
pub fn compare_superkey(a: &SuperKey, b: &SuperKey) -> Ordering {
    a.coordinate
        .partial_cmp(&b.coordinate)
        .unwrap_or(Ordering::Equal)
        .then(a.name.cmp(&b.name))
}

impl PartialEq for SuperKey {
    fn eq(&self, other: &Self) -> bool {
        compare_superkey(self, other) == Ordering::Equal
    }
}

impl Eq for SuperKey {}

impl PartialOrd for SuperKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SuperKey {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_superkey(self, other)
    }
}

/// Rejects collections that reuse a name.
pub fn ensure_unique_names(boxes: &[BBox]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(boxes.len());
    for b in boxes {
        if !seen.insert(b.name) {
            return Err(Error::DuplicateName(b.name));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(name: u64, c: [f64; 4]) -> BBox {
        BBox::new(name, c[0], c[1], c[2], c[3]).unwrap()
    }

    fn reg(c: [f64; 4]) -> Region {
        Region::from_coords(c)
    }

    #[test]
    fn intersect_examples() {
        assert!(boxes_intersect(&bx(0, [0., 0., 2., 2.]), &bx(1, [1., 1., 3., 3.])));
        assert!(!boxes_intersect(&bx(0, [0., 0., 1., 1.]), &bx(1, [2., 2., 3., 3.])));
        // shared edge
        assert!(boxes_intersect(&bx(0, [0., 0., 1., 1.]), &bx(1, [1., 0., 2., 1.])));
    }

    #[test]
    fn region_examples() {
        assert!(intersects_region(&bx(0, [0., 0., 1., 1.]), &reg([0., 0., 10., 10.])));
        assert!(!intersects_region(&bx(0, [5., 5., 6., 6.]), &reg([0., 0., 1., 1.])));
        assert!(intersects_region(&bx(0, [0., 0., 1., 1.]), &reg([0., 0., 1., 1.])));
    }

    #[test]
    fn merge_examples() {
        let b = bx(0, [1., 1., 2., 2.]);
        assert_eq!(merge_region(&b, []), reg([1., 1., 2., 2.]));
        assert_eq!(
            merge_region(&b, &[reg([0., 0., 1., 1.]), reg([2., 2., 3., 3.])]),
            reg([0., 0., 3., 3.])
        );
        let b = bx(0, [0., 0., 1., 1.]);
        assert_eq!(merge_region(&b, &[reg([0.5, 0.5, 2., 2.])]), reg([0., 0., 2., 2.]));
    }

    #[test]
    fn superkey_examples() {
        let k = |c, n| SuperKey::new(c, Name(n));
        assert_eq!(compare_superkey(&k(5.0, 1), &k(7.0, 0)), Ordering::Less);
        assert_eq!(compare_superkey(&k(5.0, 1), &k(5.0, 2)), Ordering::Less);
        assert_eq!(compare_superkey(&k(5.0, 2), &k(5.0, 1)), Ordering::Greater);
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BBox::new(0, 1., 0., 0., 1.).is_err());
        assert!(BBox::new(0, 0., 0., f64::NAN, 1.).is_err());
        assert!(BBox::new(0, 0., 0., 1., f64::INFINITY).is_err());
    }

    #[test]
    fn duplicate_names_detected() {
        let a = bx(3, [0., 0., 1., 1.]);
        assert!(matches!(
            ensure_unique_names(&[a, a]),
            Err(Error::DuplicateName(Name(3)))
        ));
    }

    fn arb_box(name: u64) -> impl Strategy<Value = BBox> {
        (-50i32..50, -50i32..50, 0i32..20, 0i32..20).prop_map(move |(x, y, w, h)| {
            let (x, y) = (x as f64 * 0.5, y as f64 * 0.5);
            bx(name, [x, y, x + w as f64 * 0.5, y + h as f64 * 0.5])
        })
    }

    fn arb_key() -> impl Strategy<Value = SuperKey> {
        (-5i32..5, 0u64..6).prop_map(|(c, n)| SuperKey::new(c as f64, Name(n)))
    }

    proptest! {
        #[test]
        fn intersect_symmetric_reflexive(a in arb_box(0), b in arb_box(1)) {
            prop_assert_eq!(boxes_intersect(&a, &b), boxes_intersect(&b, &a));
            prop_assert!(boxes_intersect(&a, &a));
            prop_assert_eq!(boxes_intersect(&a, &b), intersects_region(&a, &b.region()));
        }

        #[test]
        fn superkey_strict_total_order(a in arb_key(), b in arb_key(), c in arb_key()) {
            prop_assert_eq!(compare_superkey(&a, &a), Ordering::Equal);
            prop_assert_eq!(compare_superkey(&a, &b), compare_superkey(&b, &a).reverse());
            if a.name != b.name {
                prop_assert_ne!(compare_superkey(&a, &b), Ordering::Equal);
            }
            if a < b && b < c {
                prop_assert!(a < c);
            }
        }

        #[test]
        fn merge_is_smallest_enclosure(
            node in arb_box(0),
            kids in proptest::collection::vec(arb_box(1), 0..=2),
        ) {
            let regions: Vec<Region> = kids.iter().map(BBox::region).collect();
            let m = merge_region(&node, &regions);
            prop_assert!(m.contains_box(&node));
            for r in &regions {
                prop_assert!(m.contains_region(r));
            }
            // every coordinate is attained by some input, so no shrink keeps containment
            let eps = 1e-9;
            let inputs: Vec<Region> = std::iter::once(node.region()).chain(regions.iter().copied()).collect();
            let shrunk = [
                Region::new(m.x_min + eps, m.y_min, m.x_max, m.y_max),
                Region::new(m.x_min, m.y_min + eps, m.x_max, m.y_max),
                Region::new(m.x_min, m.y_min, m.x_max - eps, m.y_max),
                Region::new(m.x_min, m.y_min, m.x_max, m.y_max - eps),
            ];
            for s in shrunk {
                prop_assert!(!inputs.iter().all(|r| s.contains_region(r)));
            }
        }
    }
}
