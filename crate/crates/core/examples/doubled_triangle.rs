//! Spherical triangles from their angles, geodesics on the doubled
//! triangle, and the lens family collapsing to a football.

use std::f64::consts::PI;

use conic::polytope::{hausdorff_distance, lens_degeneration_curve, lens_poles, triangle_from_angles, Side, SurfacePoint, TriangleSurface, DEFAULT_MAX_UNFOLD};

fn main() -> conic::Result<()> {
    let t = triangle_from_angles(2.0 * PI / 3.0, 2.0 * PI / 3.0, 2.0 * PI / 3.0)?;
    println!("equilateral 2pi/3: sides {:.6?} area {:.6}", t.sides, t.area());

    let octant = TriangleSurface::from_angles(PI / 2.0, PI / 2.0, PI / 2.0)?;
    let [a, b, _] = octant.base.vertices;
    let d = octant.distance(&SurfacePoint::new(a, Side::Front), &SurfacePoint::new(b, Side::Back), DEFAULT_MAX_UNFOLD)?;
    println!("octant: vertex distance {d:.12}, orders {:?}", octant.orders());

    let b = 2.0 * PI / 3.0;
    println!("{:>8} {:>10} {:>10} {:>10} {:>12}", "eps", "a", "b", "c", "to poles");
    for (eps, sides) in lens_degeneration_curve(b, b, &[1e-1, 1e-2, 1e-3, 1e-4])? {
        let tri = triangle_from_angles(2.0 * b - PI + eps, b, b)?;
        let h = hausdorff_distance(&tri.vertices, &lens_poles())?;
        println!("{eps:>8.0e} {:>10.6} {:>10.6} {:>10.6} {h:>12.6}", sides[0], sides[1], sides[2]);
    }
    Ok(())
}
