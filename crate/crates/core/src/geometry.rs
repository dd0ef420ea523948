//! Small vector helpers shared by the scene and tracer.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// A half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`. Returns `None` for a zero vector.
    pub fn new(origin: Vec3, direction: Vec3) -> Option<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(Self {
            origin,
            direction: direction / n,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Azimuth/elevation pair in radians. Azimuth is measured in the xy plane
/// from +x toward +y, elevation from the xy plane toward +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub fn from_direction(d: &Vec3) -> Self {
        let n = d.norm();
        let u = d / n;
        Self {
            azimuth: u.y.atan2(u.x),
            elevation: u.z.clamp(-1.0, 1.0).asin(),
        }
    }

    pub fn to_unit(self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::new(ce * ca, ce * sa, se)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for i in 0..3 {
            out.min[i] = out.min[i].min(other.min[i]);
            out.max[i] = out.max[i].max(other.max[i]);
        }
        out
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// True if `p` is inside with at least `margin` clearance on every side.
    pub fn contains_strictly(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|i| p[i] > self.min[i] + margin && p[i] < self.max[i] - margin)
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    /// Slab test. Returns the entry distance if the ray overlaps the box
    /// within `[t_min, t_max]`.
    pub fn hit(&self, ray: &Ray, inv_dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let mut near = (self.min[i] - ray.origin[i]) * inv_dir[i];
            let mut far = (self.max[i] - ray.origin[i]) * inv_dir[i];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN arises for a zero direction component with the origin on a
            // slab plane; treat it as "inside the slab".
            if near.is_nan() || far.is_nan() {
                if ray.origin[i] < self.min[i] || ray.origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            // pad for round-off so that hits on box faces are not lost
            let pad = 1e-9 * (1.0 + far.abs());
            t0 = t0.max(near - pad);
            t1 = t1.min(far + pad);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Reflects point `p` through the plane `n·x = d` (`n` unit).
pub fn reflect_point(p: &Vec3, n: &Vec3, d: f64) -> Vec3 {
    p - n * (2.0 * (n.dot(p) - d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_round_trip() {
        let d = Vec3::new(-1.0, 2.0, 0.5);
        let a = Angles::from_direction(&d);
        let u = a.to_unit();
        assert!((u - d.normalize()).norm() < 1e-12);
    }

    #[test]
    fn reflect_through_plane() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let r = reflect_point(&p, &Vec3::new(0.0, 0.0, 1.0), 1.0);
        assert_eq!(r, Vec3::new(1.0, 2.0, -1.0));
    }

    #[test]
    fn ray_rejects_zero_direction() {
        assert!(Ray::new(Vec3::zeros(), Vec3::zeros()).is_none());
    }
}
