//! Separating-axis overlap test for oriented vehicle rectangles.

use crate::dynamics::ContinuousVehicleState;

/// Closed-overlap tolerance: rectangles whose projections are separated by
/// no more than this still count as touching.
const TOUCH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Obb {
    /// Unit vector along the vehicle's heading.
    ax: (f64, f64),
    /// Unit vector across the vehicle.
    ay: (f64, f64),
    half_len: f64,
    half_wid: f64,
}

impl Obb {
    fn new(s: &ContinuousVehicleState, len: f64, wid: f64) -> Self {
        let (sin, cos) = s.theta.sin_cos();
        Obb {
            ax: (sin, cos),
            ay: (cos, -sin),
            half_len: len / 2.0,
            half_wid: wid / 2.0,
        }
    }

    fn radius_on(&self, axis: (f64, f64)) -> f64 {
        self.half_len * dot(self.ax, axis).abs() + self.half_wid * dot(self.ay, axis).abs()
    }
}

fn dot(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.0 + a.1 * b.1
}

/// True when the footprints of two vehicles touch or overlap.
pub fn footprints_overlap(
    a: &ContinuousVehicleState,
    b: &ContinuousVehicleState,
    len: f64,
    wid: f64,
) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    // Quick reject beyond the sum of half-diagonals.
    let diag = (len * len + wid * wid).sqrt();
    if dx * dx + dy * dy > diag * diag + TOUCH_EPS {
        return false;
    }
    let oa = Obb::new(a, len, wid);
    let ob = Obb::new(b, len, wid);
    for axis in [oa.ax, oa.ay, ob.ax, ob.ay] {
        let dist = dot((dx, dy), axis).abs();
        if dist > oa.radius_on(axis) + ob.radius_on(axis) + TOUCH_EPS {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn at(x: f64, y: f64, theta: f64) -> ContinuousVehicleState {
        ContinuousVehicleState {
            x,
            y,
            theta,
            v: 0.0,
            psi: 0.0,
        }
    }

    #[test]
    fn identical_poses_collide() {
        assert!(footprints_overlap(
            &at(1.0, 2.0, 0.3),
            &at(1.0, 2.0, 0.3),
            4.5,
            1.8
        ));
    }

    #[test]
    fn far_apart_do_not_collide() {
        assert!(!footprints_overlap(
            &at(0.0, 0.0, 0.0),
            &at(10.0, 0.0, 1.0),
            4.5,
            1.8
        ));
    }

    #[test]
    fn touching_bumpers_collide() {
        // theta = pi/2 points along +X; bumpers meet at x = 2.25.
        assert!(footprints_overlap(
            &at(0.0, 0.0, FRAC_PI_2),
            &at(4.5, 0.0, FRAC_PI_2),
            4.5,
            1.8
        ));
        assert!(!footprints_overlap(
            &at(0.0, 0.0, FRAC_PI_2),
            &at(4.5 + 1e-6, 0.0, FRAC_PI_2),
            4.5,
            1.8
        ));
    }

    fn corners(s: &ContinuousVehicleState, len: f64, wid: f64) -> [(f64, f64); 4] {
        let (sin, cos) = s.theta.sin_cos();
        let (l, w) = (len / 2.0, wid / 2.0);
        let f = |a: f64, b: f64| (s.x + a * sin + b * cos, s.y + a * cos - b * sin);
        [f(l, w), f(l, -w), f(-l, -w), f(-l, w)]
    }

    fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    }

    fn inside(poly: &[(f64, f64); 4], pt: (f64, f64)) -> bool {
        let signs: Vec<f64> = (0..4)
            .map(|i| cross(poly[i], poly[(i + 1) % 4], pt))
            .collect();
        signs.iter().all(|&c| c >= 0.0) || signs.iter().all(|&c| c <= 0.0)
    }

    fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
        let d1 = cross(c, d, a);
        let d2 = cross(c, d, b);
        let d3 = cross(a, b, c);
        let d4 = cross(a, b, d);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }

    /// Polygon-intersection reference: a vertex inside the other polygon or
    /// a proper edge crossing.
    fn polygons_overlap(p: &[(f64, f64); 4], q: &[(f64, f64); 4]) -> bool {
        p.iter().any(|&v| inside(q, v))
            || q.iter().any(|&v| inside(p, v))
            || (0..4)
                .any(|i| (0..4).any(|j| segments_cross(p[i], p[(i + 1) % 4], q[j], q[(j + 1) % 4])))
    }

    #[test]
    fn matches_polygon_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..20_000 {
            let a = at(0.0, 0.0, rng.gen_range(-3.2..3.2));
            let b = at(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-3.2..3.2),
            );
            let expected = polygons_overlap(&corners(&a, 4.5, 1.8), &corners(&b, 4.5, 1.8));
            assert_eq!(
                footprints_overlap(&a, &b, 4.5, 1.8),
                expected,
                "{a:?} {b:?}"
            );
            hits += expected as usize;
        }
        assert!(hits > 1000 && hits < 19_000);
    }

    #[test]
    fn rotated_box_separated_only_by_its_own_axis() {
        // Projections onto the first box's axes overlap; the diagonal of
        // the second box's long side separates them.
        let a = at(0.0, 0.0, 0.0);
        let b = at(2.1, 4.4, FRAC_PI_4);
        let ra = Obb::new(&a, 4.5, 1.8);
        let rb = Obb::new(&b, 4.5, 1.8);
        for axis in [ra.ax, ra.ay] {
            assert!(dot((2.1, 4.4), axis).abs() <= ra.radius_on(axis) + rb.radius_on(axis));
        }
        assert!(!footprints_overlap(&a, &b, 4.5, 1.8));
        assert!(!polygons_overlap(
            &corners(&a, 4.5, 1.8),
            &corners(&b, 4.5, 1.8)
        ));
    }
}
