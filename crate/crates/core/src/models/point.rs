use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest chart dimension of any built-in model.
pub const MAX_DIM: usize = 3;

/// A point or tangent vector in chart coordinates of a model space.
///
/// Stored inline so that the simulation hot loops never allocate.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Point {
    len: usize,
    c: [f64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            coords.len() <= MAX_DIM,
            "dimension {} exceeds {MAX_DIM}",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            len: coords.len(),
            c,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim <= MAX_DIM);
        Point {
            len: dim,
            c: [0.0; MAX_DIM],
        }
    }

    /// Unit vector along coordinate `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut p = Point::zeros(dim);
        p.c[axis] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.len
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.len]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.c[..self.len]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.as_slice().iter()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.len, other.len);
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// `self + s * v`
    pub fn axpy(&self, s: f64, v: &Point) -> Point {
        let mut out = *self;
        for i in 0..self.len {
            out.c[i] += s * v.c[i];
        }
        out
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|v| format!("{v}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl From<&[f64]> for Point {
    fn from(v: &[f64]) -> Self {
        Point::new(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point::new(&v)
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Point {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        self.axpy(-1.0, &rhs)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        *self = self.axpy(1.0, &rhs);
    }
}

impl SubAssign for Point {
    fn sub_assign(&mut self, rhs: Point) {
        *self = self.axpy(-1.0, &rhs);
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(mut self, s: f64) -> Point {
        for v in self.as_mut_slice() {
            *v *= s;
        }
        self
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        self * -1.0
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point of dimension {} exceeds {MAX_DIM}",
                v.len()
            )));
        }
        Ok(Point::new(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = Point::from([1.0, 2.0]);
        let b = Point::from([0.5, -1.0]);
        assert_eq!((a + b).as_slice(), &[1.5, 1.0]);
        assert_eq!((a - b).as_slice(), &[0.5, 3.0]);
        assert_eq!((a * 2.0).as_slice(), &[2.0, 4.0]);
        assert_eq!(a.dot(&b), -1.5);
        assert_eq!(a.dim(), 2);
    }

    #[test]
    fn serde_as_sequence() {
        let p = Point::from([0.25, -1.0, 3.0]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.25,-1.0,3.0]");
        let back: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Point>("[1,2,3,4]").is_err());
    }
}
