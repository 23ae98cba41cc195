//! Computational domain: an axis-aligned rectangle minus circular holes.
//!
//! Interior points come from rejection sampling against the bounding
//! rectangle; boundary points from a length-weighted choice among the
//! boundary components (four edges plus one circle per hole). Outward
//! normals on the holes point into the holes, i.e. out of the fluid.

use rand::Rng;

use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Hole {
    pub center: [f64; 2],
    pub radius: f64,
}

/// A point on the boundary together with the outward unit normal and the
/// index of the boundary component it came from (0..4 are the bottom, right,
/// top, left edges; 4+i is hole i).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RectWithHoles {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub holes: Vec<Hole>,
}

impl RectWithHoles {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, holes: Vec<Hole>) -> Result<Self> {
        for v in [xmin, xmax, ymin, ymax] {
            if !v.is_finite() {
                return Err(Error::config("rectangle bounds must be finite"));
            }
        }
        if xmin >= xmax || ymin >= ymax {
            return Err(Error::config(format!(
                "rectangle bounds must satisfy xmin < xmax and ymin < ymax, \
                 got [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        for (i, h) in holes.iter().enumerate() {
            if !(h.radius > 0.0) || !h.radius.is_finite() {
                return Err(Error::config(format!("hole {i} has non-positive radius")));
            }
            let inside = h.center[0] - h.radius > xmin
                && h.center[0] + h.radius < xmax
                && h.center[1] - h.radius > ymin
                && h.center[1] + h.radius < ymax;
            if !inside {
                return Err(Error::config(format!(
                    "hole {i} (center ({}, {}), radius {}) is not strictly inside the rectangle",
                    h.center[0], h.center[1], h.radius
                )));
            }
        }
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                let dx = holes[i].center[0] - holes[j].center[0];
                let dy = holes[i].center[1] - holes[j].center[1];
                let dist = (dx * dx + dy * dy).sqrt();
                if dist <= holes[i].radius + holes[j].radius {
                    return Err(Error::config(format!("holes {i} and {j} overlap or touch")));
                }
            }
        }
        Ok(RectWithHoles { xmin, xmax, ymin, ymax, holes })
    }

    pub fn rectangle(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        Self::new(xmin, xmax, ymin, ymax, Vec::new())
    }

    /// The [0, 2] x [-0.5, 1.5] rectangle with the six benchmark holes.
    pub fn six_hole_benchmark() -> Self {
        let holes = vec![
            Hole { center: [0.5, 0.0], radius: 0.2 },
            Hole { center: [1.25, -0.2], radius: 0.15 },
            Hole { center: [1.3, 0.4], radius: 0.18 },
            Hole { center: [0.5, 1.1], radius: 0.2 },
            Hole { center: [1.2, 0.9], radius: 0.18 },
            Hole { center: [1.6, 1.0], radius: 0.15 },
        ];
        Self::new(0.0, 2.0, -0.5, 1.5, holes).expect("benchmark domain is valid")
    }

    /// Strict interior: inside the open rectangle and outside every closed
    /// disk, so points exactly on a hole circle are not interior.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        if !(p[0] > self.xmin && p[0] < self.xmax && p[1] > self.ymin && p[1] < self.ymax) {
            return false;
        }
        for h in &self.holes {
            let dx = p[0] - h.center[0];
            let dy = p[1] - h.center[1];
            if dx * dx + dy * dy <= h.radius * h.radius {
                return false;
            }
        }
        true
    }

    /// Inside the closed disk of some hole (used to drop evaluation points).
    pub fn in_hole(&self, p: [f64; 2]) -> bool {
        self.holes.iter().any(|h| {
            let dx = p[0] - h.center[0];
            let dy = p[1] - h.center[1];
            dx * dx + dy * dy <= h.radius * h.radius
        })
    }

    pub fn rect_area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    /// Fluid area: rectangle minus the holes.
    pub fn fluid_area(&self) -> f64 {
        let disks: f64 =
            self.holes.iter().map(|h| std::f64::consts::PI * h.radius * h.radius).sum();
        self.rect_area() - disks
    }

    /// Rejection sampling against the bounding rectangle. Expected
    /// acceptance rate is `fluid_area / rect_area`.
    pub fn sample_interior(&self, n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let p = [
                rng.gen_range(self.xmin..self.xmax),
                rng.gen_range(self.ymin..self.ymax),
            ];
            if self.contains(p) {
                pts.push(p);
            }
        }
        pts
    }

    /// Perimeter of each boundary component, edges first, then holes.
    pub fn component_lengths(&self) -> Vec<f64> {
        let w = self.xmax - self.xmin;
        let h = self.ymax - self.ymin;
        let mut lengths = vec![w, h, w, h];
        lengths.extend(self.holes.iter().map(|hole| std::f64::consts::TAU * hole.radius));
        lengths
    }

    pub fn total_boundary_length(&self) -> f64 {
        self.component_lengths().iter().sum()
    }

    /// Point, outward normal, and component id at parameter `t` in [0, 1)
    /// along component `comp`.
    pub(crate) fn boundary_point(&self, comp: usize, t: f64) -> BoundarySample {
        let w = self.xmax - self.xmin;
        let h = self.ymax - self.ymin;
        let (point, normal) = match comp {
            0 => ([self.xmin + t * w, self.ymin], [0.0, -1.0]),
            1 => ([self.xmax, self.ymin + t * h], [1.0, 0.0]),
            2 => ([self.xmin + t * w, self.ymax], [0.0, 1.0]),
            3 => ([self.xmin, self.ymin + t * h], [-1.0, 0.0]),
            _ => {
                let hole = &self.holes[comp - 4];
                let phi = std::f64::consts::TAU * t;
                let (s, c) = phi.sin_cos();
                (
                    [hole.center[0] + hole.radius * c, hole.center[1] + hole.radius * s],
                    // Out of the fluid means into the hole.
                    [-c, -s],
                )
            }
        };
        BoundarySample { point, normal, component: comp }
    }

    /// Length-weighted multinomial over components, then uniform position on
    /// the chosen component.
    pub fn sample_boundary(&self, n: usize, rng: &mut impl Rng) -> Vec<BoundarySample> {
        let lengths = self.component_lengths();
        let total: f64 = lengths.iter().sum();
        (0..n)
            .map(|_| {
                let mut u = rng.gen_range(0.0..total);
                let mut comp = 0;
                for (i, len) in lengths.iter().enumerate() {
                    if u < *len || i == lengths.len() - 1 {
                        comp = i;
                        break;
                    }
                    u -= len;
                }
                self.boundary_point(comp, rng.gen_range(0.0..1.0))
            })
            .collect()
    }

    /// Composite midpoint-rule boundary integral of `g . n`: for compatible
    /// Dirichlet data of an incompressible flow this must vanish. `nodes`
    /// are distributed over the components proportionally to length (at
    /// least one per component).
    pub fn compatibility_flux(&self, g: impl Fn([f64; 2]) -> [f64; 2], nodes: usize) -> f64 {
        let lengths = self.component_lengths();
        let total: f64 = lengths.iter().sum();
        let mut flux = 0.0;
        for (comp, len) in lengths.iter().enumerate() {
            let nc = ((nodes as f64 * len / total).round() as usize).max(1);
            let hstep = len / nc as f64;
            let mut acc = 0.0;
            for k in 0..nc {
                let t = (k as f64 + 0.5) / nc as f64;
                let bp = self.boundary_point(comp, t);
                let gv = g(bp.point);
                acc += gv[0] * bp.normal[0] + gv[1] * bp.normal[1];
            }
            flux += acc * hstep;
        }
        flux
    }
}
