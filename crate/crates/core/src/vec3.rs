//! Small fixed-size vector used for per-cell values.

use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    /// Coordinate unit vector `e_axis` (0-based axis).
    #[inline]
    pub fn unit(axis: usize) -> Self {
        let mut v = Self::zero();
        v.0[axis] = T::one();
        v
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Vec3([T::lit(v[0]), T::lit(v[1]), T::lit(v[2])])
    }

    pub fn to_f64(self) -> [f64; 3] {
        [
            self.0[0].to_f64_lossy(),
            self.0[1].to_f64_lossy(),
            self.0[2].to_f64_lossy(),
        ]
    }

    #[inline]
    pub fn x(self) -> T {
        self.0[0]
    }
    #[inline]
    pub fn y(self) -> T {
        self.0[1]
    }
    #[inline]
    pub fn z(self) -> T {
        self.0[2]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    /// `self × e_axis` without forming the unit vector.
    #[inline]
    pub fn cross_unit(self, axis: usize) -> Self {
        let [a1, a2, a3] = self.0;
        let z = T::zero();
        match axis {
            0 => Vec3([z, a3, -a2]),
            1 => Vec3([-a3, z, a1]),
            _ => Vec3([a2, -a1, z]),
        }
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn max_abs(self) -> T {
        self.0[0].abs().max(self.0[1].abs()).max(self.0[2].abs())
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// `None` when the vector has zero length.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Vec3([self.0[0] / s, self.0[1] / s, self.0[2] / s])
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
