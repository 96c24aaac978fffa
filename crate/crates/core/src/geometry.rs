//! Level-set domains on the unit square and their cut-cell decomposition.
//!
//! The background grid has `N` cells per axis and `(N+1)²` nodes; node `(i, j)`
//! sits at `(i·h, j·h)` and is stored at index `j·(N+1) + i`. Cell `(i, j)` has
//! lower-left node `(i, j)` and its corners are enumerated counterclockwise:
//! `k0 = (i, j)`, `k1 = (i+1, j)`, `k2 = (i+1, j+1)`, `k3 = (i, j+1)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Center of the unit square; rotations of the domain pivot about it.
pub const SQUARE_CENTER: Point = [0.5, 0.5];

/// Default snapping threshold factor `ζ`.
pub const DEFAULT_ZETA: f64 = 1.0;
/// Default snapping threshold exponent `α`.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Rotates `p` counterclockwise by `angle` about the center of the unit square.
pub fn rotate_about_center(p: Point, angle: f64) -> Point {
    if angle == 0.0 {
        return p;
    }
    let (s, c) = angle.sin_cos();
    let dx = p[0] - SQUARE_CENTER[0];
    let dy = p[1] - SQUARE_CENTER[1];
    [
        SQUARE_CENTER[0] + dx * c - dy * s,
        SQUARE_CENTER[1] + dx * s + dy * c,
    ]
}

fn circle_value(center: Point, radius: f64, x: f64, y: f64) -> f64 {
    (x - center[0]).hypot(y - center[1]) - radius
}

/// Signed implicit description of the domain: negative inside, positive outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSet {
    Circle {
        center: Point,
        radius: f64,
    },
    /// Intersection of two equal circles.
    Leaf {
        center1: Point,
        center2: Point,
        radius: f64,
    },
    /// A leaf whose centers are rotated counterclockwise by `angle` about the
    /// center of the unit square.
    RotatedLeaf {
        center1: Point,
        center2: Point,
        radius: f64,
        angle: f64,
    },
}

impl LevelSet {
    /// Circle of radius 0.45 centered in the unit square.
    pub fn standard_circle() -> Self {
        LevelSet::Circle {
            center: [0.5, 0.5],
            radius: 0.45,
        }
    }

    /// Leaf from circles of radius 0.4 centered at (0.4, 0.5) and (0.6, 0.5).
    pub fn standard_leaf() -> Self {
        LevelSet::Leaf {
            center1: [0.4, 0.5],
            center2: [0.6, 0.5],
            radius: 0.4,
        }
    }

    /// The standard leaf rotated by `angle`.
    pub fn standard_rotated_leaf(angle: f64) -> Self {
        LevelSet::RotatedLeaf {
            center1: [0.4, 0.5],
            center2: [0.6, 0.5],
            radius: 0.4,
            angle,
        }
    }

    /// Evaluates the level-set function at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            LevelSet::Circle { center, radius } => circle_value(center, radius, x, y),
            LevelSet::Leaf {
                center1,
                center2,
                radius,
            } => circle_value(center1, radius, x, y).max(circle_value(center2, radius, x, y)),
            LevelSet::RotatedLeaf {
                center1,
                center2,
                radius,
                angle,
            } => {
                let c1 = rotate_about_center(center1, angle);
                let c2 = rotate_about_center(center2, angle);
                circle_value(c1, radius, x, y).max(circle_value(c2, radius, x, y))
            }
        }
    }

    /// Rotation angle of the domain (zero for unrotated variants).
    pub fn angle(&self) -> f64 {
        match *self {
            LevelSet::RotatedLeaf { angle, .. } => angle,
            _ => 0.0,
        }
    }

    /// Short name used in configuration files and run metadata.
    pub fn kind(&self) -> &'static str {
        match self {
            LevelSet::Circle { .. } => "circle",
            LevelSet::Leaf { .. } => "leaf",
            LevelSet::RotatedLeaf { .. } => "rotated_leaf",
        }
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LevelSet::Circle { center, radius } => {
                write!(f, "circle(center=({}, {}), radius={})", center[0], center[1], radius)
            }
            LevelSet::Leaf {
                center1,
                center2,
                radius,
            } => write!(
                f,
                "leaf(c1=({}, {}), c2=({}, {}), radius={})",
                center1[0], center1[1], center2[0], center2[1], radius
            ),
            LevelSet::RotatedLeaf {
                center1,
                center2,
                radius,
                angle,
            } => write!(
                f,
                "rotated_leaf(c1=({}, {}), c2=({}, {}), radius={}, angle={})",
                center1[0], center1[1], center2[0], center2[1], radius, angle
            ),
        }
    }
}

/// Free-function form of [`LevelSet::eval`].
pub fn eval_level_set(ls: &LevelSet, x: f64, y: f64) -> f64 {
    ls.eval(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Internal,
    Ghost,
    Inactive,
}

impl NodeClass {
    pub fn is_active(self) -> bool {
        !matches!(self, NodeClass::Inactive)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Internal => "internal",
            NodeClass::Ghost => "ghost",
            NodeClass::Inactive => "inactive",
        }
    }
}

/// Applies the snapping-back-to-grid rule in place: every value with
/// `0 < -φ < threshold` is replaced by machine epsilon. Returns the number of
/// snapped values.
pub fn snap_to_grid(phi: &mut [f64], threshold: f64) -> usize {
    let mut count = 0;
    for v in phi.iter_mut() {
        if *v < 0.0 && v.abs() < threshold {
            *v = f64::EPSILON;
            count += 1;
        }
    }
    count
}

/// Uniform background grid with per-node classification.
#[derive(Debug, Clone)]
pub struct GridTopology {
    n: usize,
    h: f64,
    phi: Vec<f64>,
    class: Vec<NodeClass>,
    snapped: usize,
}

impl GridTopology {
    /// Classifies a grid from raw nodal level-set values (row-major, `(N+1)²`
    /// entries). Snapping with threshold `ζ h^α` is applied first.
    pub fn from_values(n: usize, mut phi: Vec<f64>, zeta: f64, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs N >= 2, got {n}")));
        }
        if !(zeta > 0.0) || !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "snapping parameters must be positive (zeta = {zeta}, alpha = {alpha})"
            )));
        }
        let side = n + 1;
        if phi.len() != side * side {
            return Err(Error::InvalidArgument(format!(
                "expected {} level-set values, got {}",
                side * side,
                phi.len()
            )));
        }
        let h = 1.0 / n as f64;
        let snapped = snap_to_grid(&mut phi, zeta * h.powf(alpha));

        let internal: Vec<bool> = phi.iter().map(|&v| v < 0.0).collect();
        if !internal.iter().any(|&b| b) {
            return Err(Error::EmptyDomain { n });
        }
        let mut class = vec![NodeClass::Inactive; side * side];
        for j in 0..side {
            for i in 0..side {
                let idx = j * side + i;
                class[idx] = if internal[idx] {
                    NodeClass::Internal
                } else if neighbors8(n, i, j).any(|(a, b)| internal[b * side + a]) {
                    NodeClass::Ghost
                } else {
                    NodeClass::Inactive
                };
            }
        }
        Ok(GridTopology {
            n,
            h,
            phi,
            class,
            snapped,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of nodes along one axis, `N + 1`.
    pub fn side(&self) -> usize {
        self.n + 1
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn node_ij(&self, index: usize) -> (usize, usize) {
        (index % (self.n + 1), index / (self.n + 1))
    }

    pub fn node_position(&self, i: usize, j: usize) -> Point {
        [i as f64 * self.h, j as f64 * self.h]
    }

    pub fn class(&self, i: usize, j: usize) -> NodeClass {
        self.class[self.node_index(i, j)]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    /// Post-snapping nodal level-set values.
    pub fn level_set_values(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi[self.node_index(i, j)]
    }

    /// How many nodes were moved outside by snapping.
    pub fn snapped_count(&self) -> usize {
        self.snapped
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.class.iter().filter(|&&c| c == class).count()
    }

    /// Lattice indices of the corners of cell `(i, j)` in counterclockwise order.
    pub fn cell_corners(&self, i: usize, j: usize) -> [(usize, usize); 4] {
        [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
    }

    /// Clips every background cell against the domain, in row-major cell order.
    pub fn cut_cells(&self) -> Result<Vec<CutCellPolygon>> {
        let mut out = Vec::new();
        for j in 0..self.n {
            for i in 0..self.n {
                if let Some(poly) = clip_cell(self, i, j)? {
                    out.push(poly);
                }
            }
        }
        Ok(out)
    }
}

fn neighbors8(n: usize, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
    let (i, j) = (i as isize, j as isize);
    let max = n as isize;
    (-1..=1)
        .flat_map(move |dj| (-1..=1).map(move |di| (i + di, j + dj)))
        .filter(move |&(a, b)| (a, b) != (i, j) && a >= 0 && b >= 0 && a <= max && b <= max)
        .map(|(a, b)| (a as usize, b as usize))
}

/// Evaluates the level set on an `N × N` grid, snaps nodes closer than
/// `ζ h^α` to the boundary, and classifies every node.
pub fn classify_nodes(ls: &LevelSet, n: usize, zeta: f64, alpha: f64) -> Result<GridTopology> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs N >= 2, got {n}")));
    }
    let side = n + 1;
    let h = 1.0 / n as f64;
    let mut phi = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            phi.push(ls.eval(i as f64 * h, j as f64 * h));
        }
    }
    GridTopology::from_values(n, phi, zeta, alpha)
}

/// Boundary intersection points of a cut cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCut {
    /// Where the boundary leaves the cell walking counterclockwise from an inside corner.
    pub a: Point,
    /// Where it re-enters.
    pub b: Point,
    /// Cell side (`0..4`, side `s` joins corner `s` to corner `s+1`) holding `a`.
    pub side_a: usize,
    /// Cell side holding `b`.
    pub side_b: usize,
}

fn crossing(k0: Point, k1: Point, v0: f64, v1: f64) -> Point {
    let theta = v0 / (v0 - v1);
    [
        theta * k1[0] + (1.0 - theta) * k0[0],
        theta * k1[1] + (1.0 - theta) * k0[1],
    ]
}

/// Intersects the zero level of the bilinear-edge interpolant with the cell
/// sides. Corner values exactly equal to zero count as outside.
pub fn edge_intersections(corners: &[Point; 4], values: &[f64; 4]) -> Result<BoundaryCut> {
    let inside = values.map(|v| v < 0.0);
    let changes = (0..4).filter(|&s| inside[s] != inside[(s + 1) % 4]).count();
    if changes != 2 {
        return Err(Error::InvalidArgument(format!(
            "cell corners have {changes} sign changes, expected exactly 2"
        )));
    }
    let mut a = None;
    let mut b = None;
    for s in 0..4 {
        let t = (s + 1) % 4;
        if inside[s] != inside[t] {
            let p = crossing(corners[s], corners[t], values[s], values[t]);
            if inside[s] {
                a = Some((p, s));
            } else {
                b = Some((p, s));
            }
        }
    }
    let ((a, side_a), (b, side_b)) = (a.expect("two sign changes"), b.expect("two sign changes"));
    Ok(BoundaryCut { a, b, side_a, side_b })
}

/// The part of a background cell inside the discrete domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CutCellPolygon {
    /// Lattice index `(i, j)` of the cell.
    pub cell: (usize, usize),
    /// Counterclockwise vertices.
    pub vertices: Vec<Point>,
    /// `on_boundary[r]` is true when edge `r` (from vertex `r` to `r+1`) lies on
    /// the boundary of the discrete domain.
    pub on_boundary: Vec<bool>,
    pub cut: Option<BoundaryCut>,
    /// Background cell size.
    pub h: f64,
}

impl CutCellPolygon {
    /// Lower-left corner of the background cell.
    pub fn origin(&self) -> Point {
        [self.cell.0 as f64 * self.h, self.cell.1 as f64 * self.h]
    }

    /// Vertices in the cell's reference frame `((x - x0)/h, (y - y0)/h)`.
    pub fn reference_vertices(&self) -> Vec<Point> {
        let o = self.origin();
        self.vertices
            .iter()
            .map(|v| [(v[0] - o[0]) / self.h, (v[1] - o[1]) / self.h])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// True when the polygon is the whole background cell.
    pub fn is_full(&self) -> bool {
        self.cut.is_none()
    }

    /// Edges as `(start, end)` pairs, counterclockwise.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let m = self.vertices.len();
        (0..m).map(move |r| (self.vertices[r], self.vertices[(r + 1) % m]))
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        polygon_centroid(&self.vertices)
    }
}

/// Signed shoelace area (positive for counterclockwise vertices).
pub fn polygon_area(vertices: &[Point]) -> f64 {
    let m = vertices.len();
    0.5 * (0..m)
        .map(|r| {
            let (p, q) = (vertices[r], vertices[(r + 1) % m]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

pub fn polygon_centroid(vertices: &[Point]) -> Point {
    let m = vertices.len();
    // Shifting to the first vertex keeps the cross products well scaled.
    let o = vertices[0];
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for r in 0..m {
        let p = [vertices[r][0] - o[0], vertices[r][1] - o[1]];
        let q = [vertices[(r + 1) % m][0] - o[0], vertices[(r + 1) % m][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)]
}

/// Clips cell `(i, j)` against the discrete domain. Returns `None` when no
/// corner is internal.
pub fn clip_cell(topo: &GridTopology, i: usize, j: usize) -> Result<Option<CutCellPolygon>> {
    let idx = topo.cell_corners(i, j);
    let corners = idx.map(|(a, b)| topo.node_position(a, b));
    let values = idx.map(|(a, b)| topo.phi(a, b));
    let inside = values.map(|v| v < 0.0);
    let n_inside = inside.iter().filter(|&&b| b).count();
    if n_inside == 0 {
        return Ok(None);
    }
    let n = topo.n();
    // Which cell sides lie on the outer boundary of the unit square.
    let outer_side = [j == 0, i + 1 == n, j + 1 == n, i == 0];

    if n_inside == 4 {
        return Ok(Some(CutCellPolygon {
            cell: (i, j),
            vertices: corners.to_vec(),
            on_boundary: outer_side.to_vec(),
            cut: None,
            h: topo.h(),
        }));
    }

    let cut = edge_intersections(&corners, &values).map_err(|_| Error::UnsupportedCut {
        i,
        j,
        sign_changes: (0..4).filter(|&s| inside[s] != inside[(s + 1) % 4]).count(),
    })?;

    // Each vertex carries the side its outgoing edge lies on; `None` is the cut segment.
    let mut verts: Vec<(Point, Option<usize>)> = Vec::with_capacity(5);
    for s in 0..4 {
        if inside[s] {
            verts.push((corners[s], Some(s)));
        }
        if s == cut.side_a {
            verts.push((cut.a, None));
        }
        if s == cut.side_b {
            verts.push((cut.b, Some(s)));
        }
    }
    // A corner value of exactly zero produces coincident vertices.
    let mut r = 0;
    while verts.len() > 3 && r < verts.len() {
        let next = (r + 1) % verts.len();
        if verts[r].0 == verts[next].0 {
            let side = verts[next].1;
            verts[r].1 = side;
            verts.remove(next);
        } else {
            r += 1;
        }
    }
    let on_boundary = verts
        .iter()
        .map(|&(_, side)| side.map_or(true, |s| outer_side[s]))
        .collect();
    Ok(Some(CutCellPolygon {
        cell: (i, j),
        vertices: verts.into_iter().map(|(p, _)| p).collect(),
        on_boundary,
        cut: Some(cut),
        h: topo.h(),
    }))
}

/// Quarter-turn rotation of lattice indices about the grid center.
pub fn rotate_lattice_quarter(n: usize, i: usize, j: usize) -> (usize, usize) {
    (n - j, i)
}

/// Angle of a quarter turn.
pub const QUARTER_TURN: f64 = FRAC_PI_2;
