//! Points, rectangles, rank space and the z-order curve.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StixError};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn distance_squared(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Euclidean distance. Every index and the oracle go through this one
    /// function so reported distances are bit-identical.
    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_squared(other).sqrt()
    }

    #[inline]
    pub fn coord(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mbr {
    pub lo: Point,
    pub hi: Point,
}

impl Mbr {
    /// Checked constructor; corners must be finite and ordered.
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(StixError::InvalidGeometry(format!(
                "non-finite rectangle corner {lo:?} / {hi:?}"
            )));
        }
        if lo.x > hi.x || lo.y > hi.y {
            return Err(StixError::InvalidGeometry(format!(
                "rectangle corners out of order: lo {lo:?}, hi {hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub const fn from_point(p: Point) -> Self {
        Self { lo: p, hi: p }
    }

    /// The unit square `[0,1]²`.
    pub const fn unit() -> Self {
        Self {
            lo: Point::new(0.0, 0.0),
            hi: Point::new(1.0, 1.0),
        }
    }

    /// An inverted rectangle that acts as the identity for [`Mbr::expand`] and
    /// [`Mbr::union`]. It intersects nothing.
    pub const fn empty() -> Self {
        Self {
            lo: Point::new(f64::INFINITY, f64::INFINITY),
            hi: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.x > self.hi.x || self.lo.y > self.hi.y
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut mbr = Self::empty();
        for p in points {
            mbr.expand(p);
        }
        mbr
    }

    /// Square of side `side` centred on `center`.
    pub fn square(center: Point, side: f64) -> Self {
        let h = side / 2.0;
        Self {
            lo: Point::new(center.x - h, center.y - h),
            hi: Point::new(center.x + h, center.y + h),
        }
    }

    #[inline]
    pub fn expand(&mut self, p: &Point) {
        self.lo.x = self.lo.x.min(p.x);
        self.lo.y = self.lo.y.min(p.y);
        self.hi.x = self.hi.x.max(p.x);
        self.hi.y = self.hi.y.max(p.y);
    }

    #[inline]
    pub fn union(&self, other: &Mbr) -> Mbr {
        Mbr {
            lo: Point::new(self.lo.x.min(other.lo.x), self.lo.y.min(other.lo.y)),
            hi: Point::new(self.hi.x.max(other.hi.x), self.hi.y.max(other.hi.y)),
        }
    }

    /// True iff the closed rectangles share at least one point.
    #[inline]
    pub fn intersects(&self, other: &Mbr) -> bool {
        self.lo.x <= other.hi.x
            && other.lo.x <= self.hi.x
            && self.lo.y <= other.hi.y
            && other.lo.y <= self.hi.y
    }

    /// Closed containment test, `lo <= p <= hi` componentwise.
    #[inline]
    pub fn contains_point(&self, p: &Point) -> bool {
        self.lo.x <= p.x && p.x <= self.hi.x && self.lo.y <= p.y && p.y <= self.hi.y
    }

    pub fn contains_mbr(&self, other: &Mbr) -> bool {
        self.lo.x <= other.lo.x
            && self.lo.y <= other.lo.y
            && other.hi.x <= self.hi.x
            && other.hi.y <= self.hi.y
    }

    pub fn intersection(&self, other: &Mbr) -> Option<Mbr> {
        if !self.intersects(other) {
            return None;
        }
        Some(Mbr {
            lo: Point::new(self.lo.x.max(other.lo.x), self.lo.y.max(other.lo.y)),
            hi: Point::new(self.hi.x.min(other.hi.x), self.hi.y.min(other.hi.y)),
        })
    }

    #[inline]
    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (self.hi.x - self.lo.x) * (self.hi.y - self.lo.y)
    }

    /// Half perimeter.
    #[inline]
    pub fn margin(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (self.hi.x - self.lo.x) + (self.hi.y - self.lo.y)
    }

    #[inline]
    pub fn overlap_area(&self, other: &Mbr) -> f64 {
        let w = self.hi.x.min(other.hi.x) - self.lo.x.max(other.lo.x);
        let h = self.hi.y.min(other.hi.y) - self.lo.y.max(other.lo.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn center(&self) -> Point {
        Point::new((self.lo.x + self.hi.x) / 2.0, (self.lo.y + self.hi.y) / 2.0)
    }

    pub fn clamp_point(&self, p: &Point) -> Point {
        Point::new(
            p.x.clamp(self.lo.x, self.hi.x),
            p.y.clamp(self.lo.y, self.hi.y),
        )
    }

    /// Squared distance from `p` to the nearest point of the rectangle.
    #[inline]
    pub fn min_dist_squared(&self, p: &Point) -> f64 {
        let dx = (self.lo.x - p.x).max(0.0).max(p.x - self.hi.x);
        let dy = (self.lo.y - p.y).max(0.0).max(p.y - self.hi.y);
        dx * dx + dy * dy
    }

    /// Euclidean distance from `p` to the rectangle; zero when `p` is inside.
    pub fn min_dist(&self, p: &Point) -> f64 {
        self.min_dist_squared(p).sqrt()
    }
}

pub fn mbr_intersects(a: &Mbr, b: &Mbr) -> bool {
    a.intersects(b)
}

pub fn point_within(p: &Point, w: &Mbr) -> bool {
    w.contains_point(p)
}

pub fn min_dist(p: &Point, m: &Mbr) -> f64 {
    m.min_dist(p)
}

/// Per-axis ranks of a point among all dataset points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RankSpacePoint {
    pub xr: u32,
    pub yr: u32,
}

impl RankSpacePoint {
    pub fn rank(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.xr,
            Axis::Y => self.yr,
        }
    }
}

/// Replace coordinates by their per-axis sort position. Ties on a coordinate
/// are broken by the accompanying id, so ranks on each axis form a permutation
/// of `0..n`.
pub fn rank_space_map(points: &[(u64, Point)]) -> Vec<RankSpacePoint> {
    let n = points.len();
    let mut ranks = vec![RankSpacePoint::default(); n];
    let mut order: Vec<usize> = (0..n).collect();

    for axis in [Axis::X, Axis::Y] {
        order.sort_by(|&a, &b| {
            let (ia, pa) = &points[a];
            let (ib, pb) = &points[b];
            pa.coord(axis)
                .total_cmp(&pb.coord(axis))
                .then_with(|| ia.cmp(ib))
        });
        for (rank, &i) in order.iter().enumerate() {
            match axis {
                Axis::X => ranks[i].xr = rank as u32,
                Axis::Y => ranks[i].yr = rank as u32,
            }
        }
    }
    ranks
}

/// Curve resolution for a dataset of `n` points: `ceil(log2(n))` bits per axis.
pub fn bits_per_axis(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

#[inline]
fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact_bits(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | (x >> 4)) & 0x00FF_00FF_00FF_00FF;
    x = (x | (x >> 8)) & 0x0000_FFFF_0000_FFFF;
    x = (x | (x >> 16)) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

/// Morton code with x in the even bit positions (x bit 0 is the LSB) and y in the odd ones.
pub fn z_order(xr: u32, yr: u32, bits: u32) -> Result<u64> {
    if bits > 32 {
        return Err(StixError::InvalidParameter(format!(
            "z-order supports at most 32 bits per axis, got {bits}"
        )));
    }
    let limit = 1u64 << bits;
    for r in [xr, yr] {
        if r as u64 >= limit {
            return Err(StixError::RankOverflow { rank: r as u64, bits });
        }
    }
    Ok(z_order_unchecked(xr, yr))
}

#[inline]
pub(crate) fn z_order_unchecked(xr: u32, yr: u32) -> u64 {
    spread_bits(xr) | (spread_bits(yr) << 1)
}

/// Inverse of [`z_order`].
pub fn z_decode(z: u64) -> (u32, u32) {
    (compact_bits(z), compact_bits(z >> 1))
}
