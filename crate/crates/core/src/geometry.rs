//! Boxes, points and affine maps, plus the displacement and overlap measures
//! every other module builds on.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box in pixels: `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
    pub confidence: Option<T>,
    pub class_id: Option<i32>,
}

impl<T: Scalar> BoundingBox<T> {
    /// Builds a validated box without confidence or class.
    pub fn new(x: T, y: T, w: T, h: T) -> Result<Self> {
        let b = Self {
            x,
            y,
            w,
            h,
            confidence: None,
            class_id: None,
        };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from its center and extents.
    pub fn from_center(c: Point<T>, w: T, h: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new(c.x - w / two, c.y - h / two, w, h)
    }

    pub fn with_confidence(mut self, confidence: T) -> Result<Self> {
        self.confidence = Some(confidence);
        self.validate()?;
        Ok(self)
    }

    pub fn with_class(mut self, class_id: i32) -> Self {
        self.class_id = Some(class_id);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::invalid(format!(
                "box origin must be finite, got ({}, {})",
                self.x, self.y
            )));
        }
        if !(self.w > T::zero() && self.h > T::zero() && self.w.is_finite() && self.h.is_finite())
        {
            return Err(Error::invalid(format!(
                "box extents must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        if let Some(c) = self.confidence {
            if !(c >= T::zero() && c <= T::one()) {
                return Err(Error::invalid(format!("confidence {c} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Point<T> {
        let two = T::lit(2.0);
        Point::new(self.x + self.w / two, self.y + self.h / two)
    }

    pub fn right(&self) -> T {
        self.x + self.w
    }

    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Same box with its center moved to `c`, extents kept.
    pub fn recentered(&self, c: Point<T>) -> Self {
        let two = T::lit(2.0);
        Self {
            x: c.x - self.w / two,
            y: c.y - self.h / two,
            ..*self
        }
    }

    pub fn cast<U: Scalar>(&self) -> BoundingBox<U> {
        let f = |v: T| U::lit(v.as_f64());
        BoundingBox {
            x: f(self.x),
            y: f(self.y),
            w: f(self.w),
            h: f(self.h),
            confidence: self.confidence.map(f),
            class_id: self.class_id,
        }
    }
}

/// Mahalanobis distance between two box centers under the diagonal covariance
/// `diag(w1²/4, h1²/4)` built from the first box's half-extents.
///
/// The first box is the reference (older) observation; the measure is not
/// symmetric in its arguments.
pub fn mahalanobis_distance<T: Scalar>(b1: &BoundingBox<T>, b2: &BoundingBox<T>) -> Result<T> {
    b1.validate()?;
    b2.validate()?;
    let c1 = b1.center();
    let c2 = b2.center();
    let two = T::lit(2.0);
    // C⁻¹ is diag(4/w², 4/h²); dividing the offsets by the half-extents is the same quadratic form.
    let dx = (c1.x - c2.x) / (b1.w / two);
    let dy = (c1.y - c2.y) / (b1.h / two);
    Ok((dx * dx + dy * dy).sqrt())
}

/// Intersection over union; 0 when the boxes do not overlap.
pub fn iou<T: Scalar>(b1: &BoundingBox<T>, b2: &BoundingBox<T>) -> T {
    if (b1.x, b1.y, b1.w, b1.h) == (b2.x, b2.y, b2.w, b2.h) {
        return T::one();
    }
    let ix = (b1.right().min(b2.right()) - b1.x.max(b2.x)).max(T::zero());
    let iy = (b1.bottom().min(b2.bottom()) - b1.y.max(b2.y)).max(T::zero());
    let inter = ix * iy;
    if inter <= T::zero() {
        return T::zero();
    }
    let union = b1.area() + b2.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).min(T::one())
}

/// 2×3 affine map `p' = [a b; c d] p + [tx; ty]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform<T> {
    /// Row-major `[a, b, tx, c, d, ty]`.
    pub m: [T; 6],
}

impl<T: Scalar> Default for AffineTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> AffineTransform<T> {
    /// Builds a transform, rejecting singular linear parts.
    pub fn new(m: [T; 6]) -> Result<Self> {
        let t = Self { m };
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("affine coefficients must be finite"));
        }
        if t.determinant().abs() <= T::epsilon() {
            return Err(Error::invalid("affine transform is not invertible"));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [o, z, z, z, o, z],
        }
    }

    pub fn translation(tx: T, ty: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [o, z, tx, z, o, ty],
        }
    }

    pub fn scale(s: T) -> Self {
        let z = T::zero();
        Self {
            m: [s, z, z, z, s, z],
        }
    }

    /// Rotation by `radians` (counter-clockwise in a y-up frame) about `center`.
    pub fn rotation_about(radians: T, center: Point<T>) -> Self {
        let (s, c) = radians.sin_cos();
        let tx = center.x - c * center.x + s * center.y;
        let ty = center.y - s * center.x - c * center.y;
        Self {
            m: [c, -s, tx, s, c, ty],
        }
    }

    pub fn determinant(&self) -> T {
        self.m[0] * self.m[4] - self.m[1] * self.m[3]
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs() > T::epsilon()
    }

    pub fn translation_part(&self) -> Point<T> {
        Point::new(self.m[2], self.m[5])
    }

    pub fn apply(&self, p: Point<T>) -> Point<T> {
        let m = &self.m;
        Point::new(
            m[0] * p.x + m[1] * p.y + m[2],
            m[3] * p.x + m[4] * p.y + m[5],
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() <= T::epsilon() {
            return Err(Error::invalid("affine transform is not invertible"));
        }
        let [a, b, tx, c, d, ty] = self.m;
        let ia = d / det;
        let ib = -b / det;
        let ic = -c / det;
        let id = a / det;
        Ok(Self {
            m: [ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)],
        })
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn after(&self, first: &Self) -> Self {
        let [a, b, tx, c, d, ty] = self.m;
        let [e, f, ux, g, h, uy] = first.m;
        Self {
            m: [
                a * e + b * g,
                a * f + b * h,
                a * ux + b * uy + tx,
                c * e + d * g,
                c * f + d * h,
                c * ux + d * uy + ty,
            ],
        }
    }

    /// Largest absolute coefficient difference from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Scalar>(&self) -> AffineTransform<U> {
        AffineTransform {
            m: self.m.map(|v| U::lit(v.as_f64())),
        }
    }
}

/// Affine image of `p` under `t`.
pub fn apply_transform<T: Scalar>(t: &AffineTransform<T>, p: Point<T>) -> Point<T> {
    t.apply(p)
}
