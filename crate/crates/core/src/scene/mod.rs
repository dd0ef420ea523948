//! Triangulated scenes: an indoor room with box furniture, or an urban block
//! layout extruded from 2D footprints over a ground plane.

mod bvh;
mod material;
mod polygon;

use serde::{Deserialize, Serialize};

pub use bvh::Bvh;
pub use material::{
    fresnel_reflection, Material, MaterialLibrary, Polarization, MAX_MATERIAL_FREQ_HZ, MIN_MATERIAL_FREQ_HZ,
};
pub use polygon::{point_in_polygon, polygon_is_simple, signed_area, triangulate};

use crate::geometry::{Aabb, Ray, Vec3};
use crate::{Error, Result};

/// Offset used when re-launching rays from a surface point.
pub const SURFACE_EPSILON: f64 = 1e-6;

const BARYCENTRIC_TOLERANCE: f64 = 1e-10;

/// One triangle of the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: [Vec3; 3],
    /// Unit normal, `(v1 − v0) × (v2 − v0)` normalized.
    pub normal: Vec3,
    /// Index into [`Scene::materials`].
    pub material: usize,
}

impl Facet {
    pub fn new(vertices: [Vec3; 3], material: usize) -> Result<Self> {
        let cross = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        let n = cross.norm();
        if !(n > 1e-12) || !n.is_finite() {
            return Err(Error::InvalidScene("degenerate triangle".into()));
        }
        Ok(Self {
            vertices,
            normal: cross / n,
            material,
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.vertices[1] - self.vertices[0])
            .cross(&(self.vertices[2] - self.vertices[0]))
            .norm()
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(v);
        }
        b
    }

    /// Plane offset `d` in `n·x = d`.
    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.vertices[0])
    }

    /// Möller–Trumbore, two-sided. Returns the hit distance if it lies in
    /// `(t_min, t_max]`.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<f64> {
        let e1 = self.vertices[1] - self.vertices[0];
        let e2 = self.vertices[2] - self.vertices[0];
        let p = ray.direction.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-15 * e1.norm() * e2.norm() {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - self.vertices[0];
        let u = s.dot(&p) * inv;
        if !(-BARYCENTRIC_TOLERANCE..=1.0 + BARYCENTRIC_TOLERANCE).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = ray.direction.dot(&q) * inv;
        if v < -BARYCENTRIC_TOLERANCE || u + v > 1.0 + BARYCENTRIC_TOLERANCE {
            return None;
        }
        let t = e2.dot(&q) * inv;
        (t > t_min && t <= t_max).then_some(t)
    }

    /// Whether a point already known to lie on the facet plane falls inside
    /// the triangle.
    pub fn contains_coplanar(&self, p: &Vec3) -> bool {
        let v0 = self.vertices[1] - self.vertices[0];
        let v1 = self.vertices[2] - self.vertices[0];
        let v2 = p - self.vertices[0];
        let d00 = v0.dot(&v0);
        let d01 = v0.dot(&v1);
        let d11 = v1.dot(&v1);
        let d20 = v2.dot(&v0);
        let d21 = v2.dot(&v1);
        let denom = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / denom;
        let w = (d00 * d21 - d01 * d20) / denom;
        v >= -BARYCENTRIC_TOLERANCE && w >= -BARYCENTRIC_TOLERANCE && v + w <= 1.0 + BARYCENTRIC_TOLERANCE
    }
}

/// Coplanar, equally oriented facets grouped into one reflecting plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub normal: Vec3,
    pub offset: f64,
    pub facets: Vec<usize>,
}

impl Surface {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Nearest intersection returned by [`Scene::intersect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub facet: usize,
    pub t: f64,
    pub point: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
enum Solid {
    Box(Aabb),
    Prism { polygon: Vec<[f64; 2]>, height: f64 },
}

impl Solid {
    fn contains(&self, p: &Vec3, margin: f64) -> bool {
        match self {
            Solid::Box(b) => (0..3).all(|i| p[i] > b.min[i] - margin && p[i] < b.max[i] + margin),
            Solid::Prism { polygon, height } => p.z < height + margin && point_in_polygon(polygon, [p.x, p.y]),
        }
    }
}

/// Which family a scene was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Indoor,
    Urban,
}

/// Axis-aligned furniture box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub material: String,
}

/// Room description: a closed box with optional furniture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndoorLayout {
    pub dimensions: [f64; 3],
    pub wall_material: String,
    pub floor_material: String,
    pub ceiling_material: String,
    #[serde(default)]
    pub obstacles: Vec<BoxObstacle>,
}

impl IndoorLayout {
    /// An empty room of the given size, all surfaces concrete.
    pub fn empty(dimensions: [f64; 3]) -> Self {
        Self {
            dimensions,
            wall_material: "concrete".into(),
            floor_material: "concrete".into(),
            ceiling_material: "concrete".into(),
            obstacles: Vec::new(),
        }
    }

    /// The default 7.6 × 10.5 × 3.1 m laboratory: concrete shell, plasterboard
    /// ceiling, a metal equipment cabinet and two plywood benches.
    pub fn lab() -> Self {
        let obstacle = |min: [f64; 3], max: [f64; 3], material: &str| BoxObstacle {
            min,
            max,
            material: material.into(),
        };
        Self {
            dimensions: [7.6, 10.5, 3.1],
            wall_material: "concrete".into(),
            floor_material: "concrete".into(),
            ceiling_material: "plasterboard".into(),
            obstacles: vec![
                obstacle([0.3, 8.6, 0.01], [1.2, 10.1, 2.0], "metal"),
                obstacle([1.0, 3.5, 0.01], [2.0, 7.5, 0.9], "plywood"),
                obstacle([5.6, 8.0, 0.01], [7.2, 9.0, 0.9], "plywood"),
            ],
        }
    }
}

/// Extruded building footprint. Vertices in meters, either orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub polygon: Vec<[f64; 2]>,
    pub height: f64,
    pub material: String,
}

/// Urban block layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrbanLayout {
    /// `[[x_min, y_min], [x_max, y_max]]`.
    pub extent: [[f64; 2]; 2],
    pub ground_material: String,
    #[serde(default)]
    pub footprints: Vec<Footprint>,
}

impl UrbanLayout {
    /// Ground only, no buildings.
    pub fn open(extent: [[f64; 2]; 2]) -> Self {
        Self {
            extent,
            ground_material: "concrete".into(),
            footprints: Vec::new(),
        }
    }

    /// Regular grid of square blocks centered on the origin.
    pub fn grid(
        extent: [[f64; 2]; 2],
        blocks: (usize, usize),
        block_size: f64,
        street_width: f64,
        heights: &[f64],
        materials: &[&str],
    ) -> Self {
        let pitch = block_size + street_width;
        let mut footprints = Vec::with_capacity(blocks.0 * blocks.1);
        for j in 0..blocks.1 {
            for i in 0..blocks.0 {
                let cx = (i as f64 - (blocks.0 as f64 - 1.0) / 2.0) * pitch;
                let cy = (j as f64 - (blocks.1 as f64 - 1.0) / 2.0) * pitch;
                let h = block_size / 2.0;
                let k = j * blocks.0 + i;
                footprints.push(Footprint {
                    polygon: vec![[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]],
                    height: heights[k % heights.len()],
                    material: materials[k % materials.len()].to_string(),
                });
            }
        }
        Self {
            extent,
            ground_material: "concrete".into(),
            footprints,
        }
    }

    /// The default 300 × 300 m district: a 4 × 4 grid of 28 m blocks on a
    /// 60 m pitch (32 m streets) with mixed heights and facades.
    pub fn district() -> Self {
        let heights = [
            24.0, 36.0, 18.0, 27.0, 33.0, 21.0, 42.0, 15.0, 30.0, 19.0, 26.0, 38.0, 22.0, 35.0, 17.0, 29.0,
        ];
        Self::grid(
            [[-150.0, -150.0], [150.0, 150.0]],
            (4, 4),
            28.0,
            32.0,
            &heights,
            &["brick", "concrete", "marble"],
        )
    }
}

/// Immutable triangulated scene with a BVH for ray queries.
#[derive(Debug, Clone)]
pub struct Scene {
    pub kind: SceneKind,
    pub facets: Vec<Facet>,
    pub materials: Vec<Material>,
    pub bounds: Aabb,
    surfaces: Vec<Surface>,
    solids: Vec<Solid>,
    bvh: Bvh,
}

/// Collects facets and interns materials in first-use order.
struct SceneBuilder<'a> {
    library: &'a MaterialLibrary,
    facets: Vec<Facet>,
    materials: Vec<Material>,
}

impl<'a> SceneBuilder<'a> {
    fn new(library: &'a MaterialLibrary) -> Self {
        Self {
            library,
            facets: Vec::new(),
            materials: Vec::new(),
        }
    }

    fn material(&mut self, name: &str) -> Result<usize> {
        if let Some(i) = self.materials.iter().position(|m| m.name == name) {
            return Ok(i);
        }
        let m = self.library.get(name)?.clone();
        m.validate()?;
        self.materials.push(m);
        Ok(self.materials.len() - 1)
    }

    fn triangle(&mut self, a: Vec3, b: Vec3, c: Vec3, material: usize) -> Result<()> {
        self.facets.push(Facet::new([a, b, c], material)?);
        Ok(())
    }

    /// Quad `a b c d` (counter-clockwise seen from the normal side).
    fn quad(&mut self, q: [Vec3; 4], material: usize) -> Result<()> {
        self.triangle(q[0], q[1], q[2], material)?;
        self.triangle(q[0], q[2], q[3], material)
    }

    /// Twelve triangles of a box. `faces` holds materials for
    /// `[-x, +x, -y, +y, -z, +z]`.
    fn cuboid(&mut self, min: [f64; 3], max: [f64; 3], faces: [usize; 6], inward: bool) -> Result<()> {
        let [x0, y0, z0] = min;
        let [x1, y1, z1] = max;
        let p = Vec3::new;
        // outward-facing quads
        let mut quads = [
            [p(x0, y0, z0), p(x0, y0, z1), p(x0, y1, z1), p(x0, y1, z0)],
            [p(x1, y0, z0), p(x1, y1, z0), p(x1, y1, z1), p(x1, y0, z1)],
            [p(x0, y0, z0), p(x1, y0, z0), p(x1, y0, z1), p(x0, y0, z1)],
            [p(x0, y1, z0), p(x0, y1, z1), p(x1, y1, z1), p(x1, y1, z0)],
            [p(x0, y0, z0), p(x0, y1, z0), p(x1, y1, z0), p(x1, y0, z0)],
            [p(x0, y0, z1), p(x1, y0, z1), p(x1, y1, z1), p(x0, y1, z1)],
        ];
        for (q, &m) in quads.iter_mut().zip(faces.iter()) {
            if inward {
                q.reverse();
            }
            self.quad(*q, m)?;
        }
        Ok(())
    }

    fn finish(self, kind: SceneKind, bounds: Aabb, solids: Vec<Solid>) -> Scene {
        let boxes: Vec<Aabb> = self.facets.iter().map(Facet::bounds).collect();
        let bvh = Bvh::build(&boxes);
        let surfaces = group_surfaces(&self.facets);
        Scene {
            kind,
            facets: self.facets,
            materials: self.materials,
            bounds,
            surfaces,
            solids,
            bvh,
        }
    }
}

fn group_surfaces(facets: &[Facet]) -> Vec<Surface> {
    let mut surfaces: Vec<Surface> = Vec::new();
    for (i, f) in facets.iter().enumerate() {
        let d = f.offset();
        let found = surfaces
            .iter_mut()
            .find(|s| (s.normal - f.normal).norm() < 1e-9 && (s.offset - d).abs() < 1e-9 * (1.0 + d.abs()));
        match found {
            Some(s) => s.facets.push(i),
            None => surfaces.push(Surface {
                normal: f.normal,
                offset: d,
                facets: vec![i],
            }),
        }
    }
    surfaces
}

impl Scene {
    /// Closed room with inward-facing walls plus box obstacles with outward
    /// faces. Obstacles must lie strictly inside the room.
    pub fn indoor(layout: &IndoorLayout, library: &MaterialLibrary) -> Result<Scene> {
        let dims = layout.dimensions;
        if !dims.iter().all(|d| *d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "room dimensions must be positive, got {dims:?}"
            )));
        }
        let mut b = SceneBuilder::new(library);
        let wall = b.material(&layout.wall_material)?;
        let floor = b.material(&layout.floor_material)?;
        let ceiling = b.material(&layout.ceiling_material)?;
        b.cuboid([0.0; 3], dims, [wall, wall, wall, wall, floor, ceiling], true)?;

        let mut solids = Vec::with_capacity(layout.obstacles.len());
        for (k, o) in layout.obstacles.iter().enumerate() {
            let inside = (0..3).all(|i| o.min[i] > 0.0 && o.max[i] < dims[i] && o.min[i] < o.max[i]);
            if !inside {
                return Err(Error::InvalidScene(format!(
                    "obstacle {k} ({:?}..{:?}) is not strictly inside the {:?} m room",
                    o.min, o.max, dims
                )));
            }
            let m = b.material(&o.material)?;
            b.cuboid(o.min, o.max, [m; 6], false)?;
            solids.push(Solid::Box(Aabb { min: o.min, max: o.max }));
        }
        let bounds = Aabb {
            min: [0.0; 3],
            max: dims,
        };
        Ok(b.finish(SceneKind::Indoor, bounds, solids))
    }

    /// Ground plane over the extent plus walls and a flat roof for each
    /// footprint.
    pub fn urban(layout: &UrbanLayout, library: &MaterialLibrary) -> Result<Scene> {
        let [[x0, y0], [x1, y1]] = layout.extent;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidScene("urban extent is empty".into()));
        }
        let mut b = SceneBuilder::new(library);
        let ground = b.material(&layout.ground_material)?;
        let p = Vec3::new;
        b.quad([p(x0, y0, 0.0), p(x1, y0, 0.0), p(x1, y1, 0.0), p(x0, y1, 0.0)], ground)?;

        let mut solids = Vec::with_capacity(layout.footprints.len());
        let mut top: f64 = 0.0;
        for (k, fp) in layout.footprints.iter().enumerate() {
            if !(fp.height > 0.0 && fp.height.is_finite()) {
                return Err(Error::InvalidScene(format!("footprint {k}: height must be > 0")));
            }
            if !polygon_is_simple(&fp.polygon) {
                return Err(Error::InvalidScene(format!(
                    "footprint {k}: polygon is degenerate or self-intersecting"
                )));
            }
            if !fp
                .polygon
                .iter()
                .all(|v| v[0] >= x0 && v[0] <= x1 && v[1] >= y0 && v[1] <= y1)
            {
                return Err(Error::InvalidScene(format!("footprint {k} leaves the extent")));
            }
            let mut poly = fp.polygon.clone();
            if signed_area(&poly) < 0.0 {
                poly.reverse();
            }
            let m = b.material(&fp.material)?;
            let h = fp.height;
            let n = poly.len();
            for i in 0..n {
                let a = poly[i];
                let c = poly[(i + 1) % n];
                // counter-clockwise footprint: outward normal is to the right
                b.quad(
                    [
                        p(a[0], a[1], 0.0),
                        p(c[0], c[1], 0.0),
                        p(c[0], c[1], h),
                        p(a[0], a[1], h),
                    ],
                    m,
                )?;
            }
            for [i, j, l] in triangulate(&poly) {
                let v = |q: [f64; 2]| p(q[0], q[1], h);
                b.triangle(v(poly[i]), v(poly[j]), v(poly[l]), m)?;
            }
            top = top.max(h);
            solids.push(Solid::Prism {
                polygon: poly,
                height: h,
            });
        }
        let bounds = Aabb {
            min: [x0, y0, 0.0],
            max: [x1, y1, top.max(100.0) * 10.0],
        };
        Ok(b.finish(SceneKind::Urban, bounds, solids))
    }

    /// A scene without any facets: every endpoint pair sees a single LoS
    /// path.
    pub fn free_space(bounds: Aabb) -> Scene {
        SceneBuilder::new(&MaterialLibrary::empty()).finish(SceneKind::Urban, bounds, Vec::new())
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn material_of(&self, facet: usize) -> &Material {
        &self.materials[self.facets[facet].material]
    }

    /// Nearest facet hit with distance in `(t_min, t_max]`, ties broken by
    /// the lowest facet index.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        self.bvh.traverse(ray, t_min, t_max, |i, bound| {
            if let Some(t) = self.facets[i].intersect(ray, t_min, bound) {
                let better = match best {
                    None => true,
                    Some((bt, bi)) => t < bt || (t == bt && i < bi),
                };
                if better {
                    best = Some((t, i));
                    return t;
                }
            }
            bound
        });
        best.map(|(t, facet)| Hit {
            facet,
            t,
            point: ray.at(t),
        })
    }

    /// Reference implementation of [`Scene::intersect`] without the BVH.
    pub fn intersect_linear(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        for (i, f) in self.facets.iter().enumerate() {
            if let Some(t) = f.intersect(ray, t_min, t_max) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best.map(|(t, facet)| Hit {
            facet,
            t,
            point: ray.at(t),
        })
    }

    /// Whether any facet crosses the open segment `(a, b)`, shrunk by
    /// [`SURFACE_EPSILON`] at both ends.
    pub fn segment_blocked(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 2.0 * SURFACE_EPSILON {
            return false;
        }
        let ray = Ray {
            origin: *a,
            direction: d / len,
        };
        self.intersect(&ray, SURFACE_EPSILON, len - SURFACE_EPSILON).is_some()
    }

    /// Checks that `p` is a usable antenna position: inside the bounds and
    /// not inside or on any obstacle or building.
    pub fn validate_point(&self, p: &Vec3) -> Result<()> {
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidEndpoint(format!("non-finite position {p:?}")));
        }
        let inside = match self.kind {
            SceneKind::Indoor => self.bounds.contains_strictly(p, SURFACE_EPSILON),
            SceneKind::Urban => self.bounds.contains(p) && p.z > SURFACE_EPSILON,
        };
        if !inside {
            return Err(Error::InvalidEndpoint(format!(
                "position [{}, {}, {}] is outside the scene bounds",
                p.x, p.y, p.z
            )));
        }
        if self.solids.iter().any(|s| s.contains(p, SURFACE_EPSILON)) {
            return Err(Error::InvalidEndpoint(format!(
                "position [{}, {}, {}] is embedded in scene geometry",
                p.x, p.y, p.z
            )));
        }
        Ok(())
    }

    /// True if `p` is inside an obstacle or building footprint, with a
    /// horizontal clearance `margin`.
    pub fn occupied(&self, p: &Vec3, margin: f64) -> bool {
        self.solids.iter().any(|s| match s {
            Solid::Box(b) => {
                p.x > b.min[0] - margin
                    && p.x < b.max[0] + margin
                    && p.y > b.min[1] - margin
                    && p.y < b.max[1] + margin
                    && p.z > b.min[2] - margin
                    && p.z < b.max[2] + margin
            }
            Solid::Prism { polygon, height } => {
                p.z < height + margin
                    && (point_in_polygon(polygon, [p.x, p.y])
                        || polygon::distance_to_polygon(polygon, [p.x, p.y]) < margin)
            }
        })
    }

    /// Footprint polygons of urban buildings (empty for indoor scenes).
    pub fn footprints(&self) -> impl Iterator<Item = (&[[f64; 2]], f64)> {
        self.solids.iter().filter_map(|s| match s {
            Solid::Prism { polygon, height } => Some((polygon.as_slice(), *height)),
            Solid::Box(_) => None,
        })
    }

    /// Geometric center of the bounds at ground level for urban scenes.
    pub fn center(&self) -> Vec3 {
        let mut c = self.bounds.center();
        if self.kind == SceneKind::Urban {
            c.z = 0.0;
        }
        c
    }
}
