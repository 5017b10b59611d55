//! 3D/2D geometry primitives shared by the whole pipeline.
//!
//! Conventions: meters for 3D coordinates, pixels for image coordinates,
//! radians for angles. All functions here are pure and thread-safe.
//!
//! "Line" distances are always to the infinite line, never to a segment or
//! half-line: the reflected rays the solvers score are geometrically lines,
//! and clamping to a half-line would flatten the objective away from the
//! optimum.

use nalgebra::{Matrix2, Point2, Unit, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
/// Unit-length 3D direction (|d| = 1 within 1e-12, maintained by `Unit`).
pub type Dir3 = Unit<Vector3<f64>>;
/// Image-plane coordinate in pixels.
pub type Pixel = Point2<f64>;

/// Condition-number limit for the 2x2 normal-equation solve in
/// [`intersect_lines2_lsq`]. Above this the line bundle is treated as
/// parallel and the solve refused.
pub const MAX_LINE_CONDITION: f64 = 1e8;

/// Minimum pixel separation between the two points defining a [`Line2`].
pub const MIN_LINE2_EXTENT: f64 = 1e-9;

/// A ray: origin plus unit direction. Doubles as an infinite-line carrier
/// for the point-to-line distances.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Dir3,
}

impl Ray {
    pub fn new(origin: Point3, direction: Dir3) -> Self {
        Self { origin, direction }
    }

    /// Point at parameter `t` (meters along the direction).
    pub fn at(&self, t: f64) -> Point3 {
        self.origin + t * self.direction.into_inner()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sphere {
    pub center: Point3,
    pub radius: f64,
}

impl Sphere {
    /// `radius` must be positive.
    pub fn new(center: Point3, radius: f64) -> Self {
        debug_assert!(radius > 0.0, "sphere radius must be positive");
        Self { center, radius }
    }
}

/// A 2D line through two non-coincident pixel points.
#[derive(Debug, Clone, Copy)]
pub struct Line2 {
    a: Pixel,
    b: Pixel,
}

impl Line2 {
    pub fn new(a: Pixel, b: Pixel) -> Result<Self> {
        let sep = (b - a).norm();
        if sep <= MIN_LINE2_EXTENT {
            return Err(Error::DegenerateLine(sep));
        }
        Ok(Self { a, b })
    }

    pub fn point_a(&self) -> Pixel {
        self.a
    }

    pub fn point_b(&self) -> Pixel {
        self.b
    }

    /// Unit direction from `a` to `b`.
    pub fn direction(&self) -> Unit<Vector2<f64>> {
        Unit::new_normalize(self.b - self.a)
    }
}

/// Mirror reflection of a propagation direction about a surface normal:
/// `r = d - 2 (d.n) n`.
///
/// Both inputs must be unit length; the output is unit length and makes the
/// same angle with `normal` as `-incoming` does.
pub fn reflect_direction(incoming: &Dir3, normal: &Dir3) -> Dir3 {
    let d = incoming.into_inner();
    let n = normal.into_inner();
    Unit::new_normalize(d - 2.0 * d.dot(&n) * n)
}

/// Nearest forward intersection of a ray with a sphere.
///
/// Returns the smaller non-negative root of the quadratic, or `None` when
/// the ray misses (negative discriminant) or the sphere lies entirely
/// behind the origin. A miss is a valid outcome, not an error.
pub fn ray_sphere_intersect(ray: &Ray, sphere: &Sphere) -> Option<f64> {
    let m = ray.origin - sphere.center;
    let b = ray.direction.dot(&m); // half the usual b; a = 1 for unit dir
    let c = m.norm_squared() - sphere.radius * sphere.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = disc.sqrt();
    // Stable quadratic: compute the root of larger magnitude first.
    let q = -(b + b.signum() * sqrt_disc);
    let (t0, t1) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        let (r0, r1) = (q, c / q);
        (r0.min(r1), r0.max(r1))
    };
    if t0 >= 0.0 {
        Some(t0)
    } else if t1 >= 0.0 {
        Some(t1)
    } else {
        None
    }
}

/// Angle between two unit directions in radians, accurate for small angles
/// (atan2 form, no acos cancellation near zero).
pub fn angle_between(a: &Dir3, b: &Dir3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Perpendicular distance from a point to the infinite line carried by `line`.
pub fn point_to_line3_distance(p: &Point3, line: &Ray) -> f64 {
    let v = p - line.origin;
    let along = v.dot(&line.direction);
    (v - along * line.direction.into_inner()).norm()
}

/// Perpendicular distance from a pixel point to the infinite 2D line.
pub fn point_to_line2_distance(p: &Pixel, line: &Line2) -> f64 {
    let d = line.direction().into_inner();
    let w = p - line.a;
    (w - w.dot(&d) * d).norm()
}

/// Global minimizer of the summed squared distances to a bundle of 2D lines,
/// together with the condition number of the 2x2 normal matrix.
///
/// Solves `M p = q` with `M = sum(I - d_i d_i^T)` and
/// `q = sum((I - d_i d_i^T) a_i)`; this is the closed-form optimum of the
/// squared line-distance objective. Fails with
/// [`Error::SingularGeometry`] when the bundle is (near-)parallel.
pub fn intersect_lines2_lsq(lines: &[Line2]) -> Result<(Pixel, f64)> {
    if lines.len() < 2 {
        return Err(Error::InsufficientLines(lines.len()));
    }
    let mut m = Matrix2::<f64>::zeros();
    let mut q = Vector2::<f64>::zeros();
    for line in lines {
        let d = line.direction().into_inner();
        let proj = Matrix2::identity() - d * d.transpose();
        m += proj;
        q += proj * line.a.coords;
    }

    // Eigenvalues of the symmetric 2x2: tr/2 +- sqrt((tr/2)^2 - det).
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let gap = (half_tr * half_tr - det).max(0.0).sqrt();
    let (lo, hi) = (half_tr - gap, half_tr + gap);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > MAX_LINE_CONDITION {
        return Err(Error::SingularGeometry { cond });
    }

    let p = Vector2::new(
        (q.x * m[(1, 1)] - q.y * m[(0, 1)]) / det,
        (q.y * m[(0, 0)] - q.x * m[(1, 0)]) / det,
    );
    Ok((Pixel::from(p), cond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_dir(rng: &mut SplitMix64) -> Dir3 {
        loop {
            let v = Vector3::new(rng.next_normal(), rng.next_normal(), rng.next_normal());
            if v.norm() > 1e-6 {
                return Unit::new_normalize(v);
            }
        }
    }

    fn pixel(u: f64, v: f64) -> Pixel {
        Pixel::new(u, v)
    }

    #[test]
    fn reflect_normal_incidence() {
        let d = Unit::new_normalize(Vector3::new(0.0, 0.0, -1.0));
        let n = Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0));
        let r = reflect_direction(&d, &n);
        assert!((r.into_inner() - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn reflect_45_degrees() {
        let d = Unit::new_normalize(Vector3::new(1.0, 0.0, -1.0));
        let n = Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0));
        let r = reflect_direction(&d, &n);
        let expected = Vector3::new(1.0, 0.0, 1.0) / 2.0f64.sqrt();
        assert!((r.into_inner() - expected).norm() < 1e-15);
    }

    #[test]
    fn reflect_equal_angles_random() {
        // Oracle: compare the incidence and reflection angles computed
        // directly from dot products, independent of the reflection formula.
        let mut rng = SplitMix64::new(0x5eed);
        for _ in 0..1000 {
            let d = random_dir(&mut rng);
            let n = random_dir(&mut rng);
            let r = reflect_direction(&d, &n);
            assert!((r.norm() - 1.0).abs() < 1e-12);
            let angle_in = (-d.dot(&n)).clamp(-1.0, 1.0).acos();
            let angle_out = r.dot(&n).clamp(-1.0, 1.0).acos();
            assert!(
                (angle_in - angle_out).abs() < 1e-10,
                "in {angle_in} out {angle_out}"
            );
        }
    }

    #[test]
    fn reflect_is_involution() {
        let mut rng = SplitMix64::new(0xf01d);
        for _ in 0..1000 {
            let d = random_dir(&mut rng);
            let n = random_dir(&mut rng);
            let back = reflect_direction(&reflect_direction(&d, &n), &n);
            assert!((back.into_inner() - d.into_inner()).norm() < 1e-12);
        }
    }

    #[test]
    fn ray_sphere_axial_hit() {
        let ray = Ray::new(
            Point3::origin(),
            Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0)),
        );
        let sphere = Sphere::new(Point3::new(0.0, 0.0, 0.010), 0.001);
        let t = ray_sphere_intersect(&ray, &sphere).unwrap();
        assert!((t - 0.009).abs() < 1e-15);
    }

    #[test]
    fn ray_sphere_miss() {
        let ray = Ray::new(
            Point3::origin(),
            Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0)),
        );
        let sphere = Sphere::new(Point3::new(0.0, 0.005, 0.010), 0.001);
        assert!(ray_sphere_intersect(&ray, &sphere).is_none());
    }

    #[test]
    fn ray_sphere_behind_origin() {
        let ray = Ray::new(
            Point3::origin(),
            Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0)),
        );
        let sphere = Sphere::new(Point3::new(0.0, 0.0, -0.010), 0.001);
        assert!(ray_sphere_intersect(&ray, &sphere).is_none());
    }

    #[test]
    fn ray_sphere_tangent() {
        // Power-of-two offsets keep the discriminant exactly zero.
        let r = 2.0_f64.powi(-8);
        let z = 2.0_f64.powi(-6);
        let ray = Ray::new(
            Point3::origin(),
            Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0)),
        );
        let sphere = Sphere::new(Point3::new(r, 0.0, z), r);
        let t = ray_sphere_intersect(&ray, &sphere).unwrap();
        let hit = ray.at(t);
        assert!(((hit - sphere.center).norm() - r).abs() < 1e-9);
        assert!((t - z).abs() < 1e-12);
    }

    #[test]
    fn ray_sphere_hit_lies_on_surface() {
        let mut rng = SplitMix64::new(0xca11);
        let mut hits = 0;
        for _ in 0..2000 {
            let ray = Ray::new(
                Point3::new(
                    rng.next_range(-1.0, 1.0),
                    rng.next_range(-1.0, 1.0),
                    rng.next_range(-1.0, 1.0),
                ),
                random_dir(&mut rng),
            );
            let sphere = Sphere::new(
                Point3::new(
                    rng.next_range(-1.0, 1.0),
                    rng.next_range(-1.0, 1.0),
                    rng.next_range(-1.0, 1.0),
                ),
                rng.next_range(0.05, 0.5),
            );
            if let Some(t) = ray_sphere_intersect(&ray, &sphere) {
                hits += 1;
                assert!(t >= 0.0);
                let g = ray.at(t);
                assert!(((g - sphere.center).norm() - sphere.radius).abs() < 1e-9);
            }
        }
        assert!(hits > 50, "expected a healthy share of hits, got {hits}");
    }

    #[test]
    fn line3_distance_basics() {
        let line = Ray::new(
            Point3::origin(),
            Unit::new_normalize(Vector3::new(1.0, 0.0, 0.0)),
        );
        assert!((point_to_line3_distance(&Point3::new(0.0, 1.0, 0.0), &line) - 1.0).abs() < 1e-15);
        assert!(point_to_line3_distance(&Point3::new(3.0, 0.0, 0.0), &line) < 1e-15);
        // Infinite-line convention: points "behind" the origin measure the
        // same perpendicular distance.
        assert!((point_to_line3_distance(&Point3::new(-1.0, 1.0, 0.0), &line) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn line2_distance_basics() {
        let line = Line2::new(pixel(0.0, 0.0), pixel(1.0, 0.0)).unwrap();
        assert!((point_to_line2_distance(&pixel(0.0, 1.0), &line) - 1.0).abs() < 1e-15);
        assert!(point_to_line2_distance(&pixel(0.5, 0.0), &line) < 1e-15);
    }

    #[test]
    fn line2_distance_matches_cross_product_oracle() {
        let mut rng = SplitMix64::new(0xc105);
        for _ in 0..1000 {
            let a = pixel(rng.next_range(-100.0, 100.0), rng.next_range(-100.0, 100.0));
            let b = pixel(rng.next_range(-100.0, 100.0), rng.next_range(-100.0, 100.0));
            if (b - a).norm() < 1e-3 {
                continue;
            }
            let p = pixel(rng.next_range(-100.0, 100.0), rng.next_range(-100.0, 100.0));
            let line = Line2::new(a, b).unwrap();
            let ab = b - a;
            let ap = p - a;
            let oracle = (ab.x * ap.y - ab.y * ap.x).abs() / ab.norm();
            assert!((point_to_line2_distance(&p, &line) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn line2_rejects_coincident_points() {
        assert!(matches!(
            Line2::new(pixel(1.0, 1.0), pixel(1.0, 1.0)),
            Err(Error::DegenerateLine(_))
        ));
    }

    #[test]
    fn lsq_two_axes_meet_at_origin() {
        let lines = [
            Line2::new(pixel(-1.0, 0.0), pixel(1.0, 0.0)).unwrap(),
            Line2::new(pixel(0.0, -1.0), pixel(0.0, 1.0)).unwrap(),
        ];
        let (p, cond) = intersect_lines2_lsq(&lines).unwrap();
        assert!(p.coords.norm() < 1e-12);
        assert!((cond - 1.0).abs() < 1e-12);
    }

    /// Summed squared distance from `p` to all lines; the oracle objective.
    fn sum_sq_dist(p: &Pixel, lines: &[Line2]) -> f64 {
        lines
            .iter()
            .map(|l| point_to_line2_distance(p, l).powi(2))
            .sum()
    }

    /// 2001x2001 grid search over a square window, refined twice around the
    /// incumbent. Independent of the closed-form solve.
    fn grid_search_oracle(lines: &[Line2], center: Pixel, half: f64) -> Pixel {
        let mut best = center;
        let mut best_val = f64::INFINITY;
        let (mut c, mut h) = (center, half);
        for _refine in 0..3 {
            let n = 2001;
            let step = 2.0 * h / (n - 1) as f64;
            for i in 0..n {
                for j in 0..n {
                    let p = pixel(
                        c.x - h + i as f64 * step,
                        c.y - h + j as f64 * step,
                    );
                    let v = sum_sq_dist(&p, lines);
                    if v < best_val {
                        best_val = v;
                        best = p;
                    }
                }
            }
            c = best;
            h = step * 2.0;
        }
        best
    }

    #[test]
    fn lsq_triangle_matches_grid_search() {
        let lines = [
            Line2::new(pixel(0.0, 0.0), pixel(2.0, 0.0)).unwrap(),
            Line2::new(pixel(0.0, 0.0), pixel(0.0, 2.0)).unwrap(),
            Line2::new(pixel(2.0, 0.0), pixel(0.0, 2.0)).unwrap(),
        ];
        let (p, _) = intersect_lines2_lsq(&lines).unwrap();
        let oracle = grid_search_oracle(&lines, pixel(1.0, 1.0), 2.0);
        assert!(
            (p - oracle).norm() < 1e-3,
            "closed form {p:?} vs grid {oracle:?}"
        );
        // For this triangle the optimum is analytically (0.5, 0.5).
        assert!((p - pixel(0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn lsq_parallel_lines_rejected() {
        let lines = [
            Line2::new(pixel(0.0, 0.0), pixel(1.0, 0.0)).unwrap(),
            Line2::new(pixel(0.0, 1.0), pixel(1.0, 1.0)).unwrap(),
        ];
        assert!(matches!(
            intersect_lines2_lsq(&lines),
            Err(Error::SingularGeometry { .. })
        ));
    }

    #[test]
    fn lsq_single_line_rejected() {
        let lines = [Line2::new(pixel(0.0, 0.0), pixel(1.0, 0.0)).unwrap()];
        assert!(matches!(
            intersect_lines2_lsq(&lines),
            Err(Error::InsufficientLines(1))
        ));
    }

    #[test]
    fn lsq_result_is_stationary() {
        // Pushing the optimum 0.1 px in any compass direction must not
        // decrease the summed squared distance.
        let mut rng = SplitMix64::new(0x57a7);
        for _ in 0..200 {
            let mut lines = Vec::new();
            for _ in 0..4 {
                let a = pixel(rng.next_range(0.0, 640.0), rng.next_range(0.0, 480.0));
                let b = pixel(rng.next_range(0.0, 640.0), rng.next_range(0.0, 480.0));
                if let Ok(line) = Line2::new(a, b) {
                    lines.push(line);
                }
            }
            if lines.len() < 2 {
                continue;
            }
            let Ok((p, _)) = intersect_lines2_lsq(&lines) else {
                continue;
            };
            let at_opt = sum_sq_dist(&p, &lines);
            for (dx, dy) in [
                (1.0, 0.0),
                (-1.0, 0.0),
                (0.0, 1.0),
                (0.0, -1.0),
                (1.0, 1.0),
                (1.0, -1.0),
                (-1.0, 1.0),
                (-1.0, -1.0),
            ] {
                let q = pixel(p.x + 0.1 * dx, p.y + 0.1 * dy);
                assert!(
                    sum_sq_dist(&q, &lines) >= at_opt - 1e-12,
                    "perturbation ({dx},{dy}) decreased the objective"
                );
            }
        }
    }
}
