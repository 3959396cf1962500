//! Geometric shadowing: thin obstructions adding a fixed attenuation to every
//! propagation path that crosses them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::position::Position;

/// Shape of an obstruction. The variant must match the scenario dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum WallGeometry {
    /// 1-D scenarios: a single blocking coordinate.
    Point { at: f64 },
    /// 2-D scenarios: infinitely thin segment from `a` to `b`.
    Segment { a: [f64; 2], b: [f64; 2] },
    /// 3-D scenarios: planar polygon given by at least three coplanar vertices.
    Polygon { vertices: Vec<[f64; 3]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub geometry: WallGeometry,
    pub attenuation_db: f64,
}

impl Wall {
    pub fn new(geometry: WallGeometry, attenuation_db: f64) -> Result<Self> {
        if !(attenuation_db >= 0.0 && attenuation_db.is_finite()) {
            return Err(Error::param(
                "attenuation_db",
                format!("must be finite and >= 0, got {attenuation_db}"),
            ));
        }
        if let WallGeometry::Polygon { vertices } = &geometry {
            if vertices.len() < 3 {
                return Err(Error::param("vertices", "a polygon wall needs at least 3 vertices"));
            }
            if norm3(&newell_normal(vertices)) == 0.0 {
                return Err(Error::param("vertices", "polygon wall has zero area"));
            }
        }
        Ok(Wall {
            geometry,
            attenuation_db,
        })
    }

    pub fn dim(&self) -> usize {
        match self.geometry {
            WallGeometry::Point { .. } => 1,
            WallGeometry::Segment { .. } => 2,
            WallGeometry::Polygon { .. } => 3,
        }
    }

    /// Whether the open segment `(from, to)` passes through the wall.
    ///
    /// Grazing contact (collinear overlap, touching at an endpoint of the
    /// propagation path) does not count as a crossing.
    pub fn crosses(&self, from: &Position, to: &Position) -> bool {
        let (p, q) = (from.coords(), to.coords());
        match &self.geometry {
            WallGeometry::Point { at } => {
                let (lo, hi) = if p[0] < q[0] { (p[0], q[0]) } else { (q[0], p[0]) };
                lo < *at && *at < hi
            }
            WallGeometry::Segment { a, b } => segments_cross([p[0], p[1]], [q[0], q[1]], *a, *b),
            WallGeometry::Polygon { vertices } => {
                segment_crosses_polygon([p[0], p[1], p[2]], [q[0], q[1], q[2]], vertices)
            }
        }
    }
}

/// Shadowing term in dB: minus the summed attenuation of every wall crossed by
/// the open segment between `source` and `x`.
pub fn eval_shadowing(walls: &[Wall], source: &Position, x: &Position) -> f64 {
    -walls
        .iter()
        .filter(|w| w.crosses(source, x))
        .map(|w| w.attenuation_db)
        .sum::<f64>()
}

/// Path `p -> q` (open) against wall `a -> b` (closed).
fn segments_cross(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom == 0.0 {
        return false;
    }
    let ap = [a[0] - p[0], a[1] - p[1]];
    let t = (ap[0] * s[1] - ap[1] * s[0]) / denom;
    let u = (ap[0] * r[1] - ap[1] * r[0]) / denom;
    t > 0.0 && t < 1.0 && (0.0..=1.0).contains(&u)
}

fn newell_normal(v: &[[f64; 3]]) -> [f64; 3] {
    let mut n = [0.0; 3];
    for (i, cur) in v.iter().enumerate() {
        let next = v[(i + 1) % v.len()];
        n[0] += (cur[1] - next[1]) * (cur[2] + next[2]);
        n[1] += (cur[2] - next[2]) * (cur[0] + next[0]);
        n[2] += (cur[0] - next[0]) * (cur[1] + next[1]);
    }
    n
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn segment_crosses_polygon(p: [f64; 3], q: [f64; 3], vertices: &[[f64; 3]]) -> bool {
    let n = newell_normal(vertices);
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let denom = n[0] * d[0] + n[1] * d[1] + n[2] * d[2];
    if denom == 0.0 {
        return false;
    }
    let v0 = vertices[0];
    let t = (n[0] * (v0[0] - p[0]) + n[1] * (v0[1] - p[1]) + n[2] * (v0[2] - p[2])) / denom;
    if !(t > 0.0 && t < 1.0) {
        return false;
    }
    let hit = [p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]];

    // Project onto the coordinate plane where the polygon has the largest area.
    let drop = (0..3)
        .max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
        .unwrap_or(2);
    let (u, v) = match drop {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let pt = [hit[u], hit[v]];
    let poly: Vec<[f64; 2]> = vertices.iter().map(|w| [w[u], w[v]]).collect();
    point_in_polygon(pt, &poly)
}

/// Even-odd crossing-number test.
fn point_in_polygon(pt: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > pt[1]) != (b[1] > pt[1]) {
            let x_cross = a[0] + (pt[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if pt[0] < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
