//! Planar polygons and cell-centre rasterisation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type Point = [f64; 2];

/// A polygon with an exterior ring and optional holes. Rings are stored
/// without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<Point>>,
}

fn normalise_ring(mut ring: Vec<Point>) -> Result<Vec<Point>> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring.dedup();
    if ring.len() < 3 {
        return Err(Error::Input(format!(
            "degenerate polygon ring with {} distinct vertices",
            ring.len()
        )));
    }
    if ring.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("polygon has non-finite coordinates".into()));
    }
    Ok(ring)
}

impl Polygon {
    pub fn new(exterior: Vec<Point>) -> Result<Self> {
        Self::with_holes(exterior, Vec::new())
    }

    pub fn with_holes(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let mut rings = vec![normalise_ring(exterior)?];
        for h in holes {
            rings.push(normalise_ring(h)?);
        }
        Ok(Self { rings })
    }

    /// Axis-aligned rectangle.
    pub fn rect(min: Point, max: Point) -> Result<Self> {
        Self::new(vec![min, [max[0], min[1]], max, [min[0], max[1]]])
    }

    pub fn exterior(&self) -> &[Point] {
        &self.rings[0]
    }

    pub fn rings(&self) -> &[Vec<Point>] {
        &self.rings
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings
            .iter()
            .flat_map(|r| r.iter().enumerate().map(move |(i, &a)| (a, r[(i + 1) % r.len()])))
    }

    /// Even-odd point-in-polygon test across all rings.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Area enclosed by the exterior minus holes.
    pub fn area(&self) -> f64 {
        let ring_area = |r: &Vec<Point>| {
            let s: f64 = (0..r.len())
                .map(|i| {
                    let a = r[i];
                    let b = r[(i + 1) % r.len()];
                    a[0] * b[1] - b[0] * a[1]
                })
                .sum();
            (0.5 * s).abs()
        };
        let outer = ring_area(&self.rings[0]);
        outer - self.rings[1..].iter().map(ring_area).sum::<f64>()
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for v in &self.rings[0] {
            for k in 0..2 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        (min, max)
    }

    /// Shortest distance from `p` to any edge.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let edges: Vec<(Point, Point)> = self.edges().collect();
        for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                let adjacent = b == c || d == a;
                if adjacent {
                    continue;
                }
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Cells whose centre lies inside any of `polygons`, as ascending indices.
pub fn rasterize_polygons(polygons: &[Polygon], grid: &Grid) -> Vec<usize> {
    let mut cells = BTreeSet::new();
    for poly in polygons {
        let (min, max) = poly.bbox();
        let Some((r0, r1, c0, c1)) = grid.cells_in_bbox(min, max) else {
            continue;
        };
        for r in r0..=r1 {
            for c in c0..=c1 {
                if poly.contains(grid.centre(r, c)) {
                    cells.insert(grid.index(r, c));
                }
            }
        }
    }
    cells.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, cs: f64) -> Grid {
        Grid::new(n, n, 0.0, 0.0, cs).unwrap()
    }

    /// Tests every cell centre, with no bounding-box shortcut.
    fn brute_force(polys: &[Polygon], g: &Grid) -> Vec<usize> {
        (0..g.len())
            .filter(|&i| {
                let (r, c) = g.row_col(i);
                polys.iter().any(|p| p.contains(g.centre(r, c)))
            })
            .collect()
    }

    #[test]
    fn square_over_one_cell() {
        let g = grid(4, 5.0);
        let p = Polygon::rect([5.0, 5.0], [10.0, 10.0]).unwrap();
        assert_eq!(rasterize_polygons(&[p], &g), vec![g.index(2, 1)]);
    }

    #[test]
    fn polygon_missing_all_centres() {
        let g = grid(4, 5.0);
        let p = Polygon::rect([0.1, 0.1], [2.0, 2.0]).unwrap();
        assert!(rasterize_polygons(&[p], &g).is_empty());
    }

    #[test]
    fn offset_square_catches_one_centre() {
        let g = grid(6, 5.0);
        // Straddles cells (rows 3..4, cols 0..1); only centre (7.5, 7.5) is inside.
        let p = Polygon::rect([3.0, 3.0], [8.0, 8.0]).unwrap();
        let got = rasterize_polygons(std::slice::from_ref(&p), &g);
        assert_eq!(got, brute_force(&[p], &g));
        assert_eq!(got, vec![g.index(4, 1)]);
        // A 10 m square hanging off the south-west corner reaches one centre.
        let p10 = Polygon::rect([-5.0, -5.0], [5.0, 5.0]).unwrap();
        let got = rasterize_polygons(std::slice::from_ref(&p10), &g);
        assert_eq!(got, brute_force(&[p10], &g));
        assert_eq!(got, vec![g.index(5, 0)]);
    }

    #[test]
    fn degenerate_polygon_rejected() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn holes_are_excluded() {
        let g = grid(3, 1.0);
        let p = Polygon::with_holes(
            vec![[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [0.0, 3.0]],
            vec![vec![[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]],
        )
        .unwrap();
        let cells = rasterize_polygons(std::slice::from_ref(&p), &g);
        assert_eq!(cells.len(), 8);
        assert!(!cells.contains(&g.index(1, 1)));
        assert_eq!(p.area(), 8.0);
    }

    #[test]
    fn area_distance_and_simplicity() {
        let sq = Polygon::rect([0.0, 0.0], [10.0, 10.0]).unwrap();
        assert_eq!(sq.area(), 100.0);
        assert_eq!(sq.distance_to_boundary([5.0, 5.0]), 5.0);
        assert_eq!(sq.distance_to_boundary([13.0, 14.0]), 5.0);
        assert!(sq.is_simple());
        let bowtie = Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(!bowtie.is_simple());
    }

    #[test]
    fn random_polygons_match_brute_force() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = Grid::new(17, 13, 100.0, 50.0, 2.5).unwrap();
        for _ in 0..50 {
            let cx = 100.0 + (rng.next_u32() % 40) as f64;
            let cy = 50.0 + (rng.next_u32() % 30) as f64;
            let ring: Vec<Point> = (0..7)
                .map(|k| {
                    let ang = k as f64 * std::f64::consts::TAU / 7.0;
                    let r = 2.0 + (rng.next_u32() % 100) as f64 / 10.0;
                    [cx + r * ang.cos(), cy + r * ang.sin()]
                })
                .collect();
            let p = Polygon::new(ring).unwrap();
            assert_eq!(rasterize_polygons(std::slice::from_ref(&p), &g), brute_force(&[p], &g));
        }
    }
}
