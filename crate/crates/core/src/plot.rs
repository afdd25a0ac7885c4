//! Level-set extraction and SVG figures for certificates in one to three
//! dimensions.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{BoxDomain, Poly};

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("plots support 1 to 3 variables, got {0}")]
    Unsupported(usize),
    #[error("grid needs at least 2 points per axis, got {0}")]
    Grid(usize),
}

/// Values of a polynomial on a tensor grid including the faces of the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Node coordinates per axis.
    pub axes: Vec<Vec<f64>>,
    /// Values, first axis fastest.
    pub values: Vec<f64>,
}

impl Grid {
    pub fn sample(p: &Poly, domain: &BoxDomain, points: usize) -> Result<Grid, PlotError> {
        Grid::sample_with(domain, points, |x| {
            p.eval(x).expect("grid matches dimension")
        })
    }

    pub fn sample_with(
        domain: &BoxDomain,
        points: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Grid, PlotError> {
        if points < 2 {
            return Err(PlotError::Grid(points));
        }
        let axes: Vec<Vec<f64>> = (0..domain.dim())
            .map(|a| {
                (0..points)
                    .map(|i| {
                        domain.lo[a]
                            + (domain.hi[a] - domain.lo[a]) * i as f64 / (points - 1) as f64
                    })
                    .collect()
            })
            .collect();
        let total = points.pow(domain.dim() as u32);
        let values = (0..total)
            .map(|k| {
                let x: Vec<f64> = (0..domain.dim())
                    .map(|a| axes[a][(k / points.pow(a as u32)) % points])
                    .collect();
                f(&x)
            })
            .collect();
        Ok(Grid { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    fn at(&self, idx: &[usize]) -> f64 {
        let mut k = 0;
        let mut stride = 1;
        for (a, &i) in idx.iter().enumerate() {
            k += i * stride;
            stride *= self.axes[a].len();
        }
        self.values[k]
    }

    /// Comma-separated `x1,…,xn,value` lines with a header.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out: String = (1..=n).map(|i| format!("x{i},")).collect::<String>() + "value\n";
        let sizes: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        for (k, v) in self.values.iter().enumerate() {
            let mut rem = k;
            for (a, &s) in sizes.iter().enumerate() {
                let _ = write!(out, "{},", self.axes[a][rem % s]);
                rem /= s;
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }
}

/// Connected piece of a level curve; `closed` when it returns to its start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

/// Marching squares on a 2-D grid. Saddle cells are split by the cell-centre
/// average.
pub fn marching_squares(grid: &Grid, level: f64) -> Vec<Polyline> {
    assert_eq!(grid.dim(), 2, "marching squares needs a 2-D grid");
    let (xs, ys) = (&grid.axes[0], &grid.axes[1]);
    // Edge keys: (i, j, 0) horizontal from node (i,j) to (i+1,j); (i, j, 1) vertical to (i,j+1).
    type Key = (usize, usize, u8);
    let point = |k: Key| -> [f64; 2] {
        let (i, j, dir) = k;
        let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (grid.at(&[i, j]) - level, grid.at(&[i2, j2]) - level);
        let t = if a == b { 0.5 } else { a / (a - b) };
        [xs[i] + t * (xs[i2] - xs[i]), ys[j] + t * (ys[j2] - ys[j])]
    };
    let mut segments: Vec<(Key, Key)> = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            let v = [
                grid.at(&[i, j]) - level,
                grid.at(&[i + 1, j]) - level,
                grid.at(&[i + 1, j + 1]) - level,
                grid.at(&[i, j + 1]) - level,
            ];
            let inside: Vec<bool> = v.iter().map(|x| *x < 0.0).collect();
            // Edges in cyclic order: bottom, right, top, left.
            let edges: [Key; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let crossing: Vec<usize> = (0..4)
                .filter(|&e| inside[e] != inside[(e + 1) % 4])
                .collect();
            match crossing.len() {
                2 => segments.push((edges[crossing[0]], edges[crossing[1]])),
                4 => {
                    let centre = v.iter().sum::<f64>() / 4.0 < 0.0;
                    // Corners on the centre's side are joined through the cell.
                    if inside[0] == centre {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }
    chain(segments)
        .into_iter()
        .map(|(keys, closed)| Polyline {
            points: keys.into_iter().map(point).collect(),
            closed,
        })
        .collect()
}

/// Joins segments sharing endpoints into maximal chains.
fn chain<K: Copy + Eq + std::hash::Hash>(segments: Vec<(K, K)>) -> Vec<(Vec<K>, bool)> {
    let mut adj: HashMap<K, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adj.entry(a).or_default().push(s);
        adj.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let next = |at: K, used: &[bool], adj: &HashMap<K, Vec<usize>>| {
        adj[&at].iter().copied().find(|&s| !used[s])
    };
    // Open chains first, starting from endpoints of degree one.
    let mut starts: Vec<K> = segments
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .filter(|k| adj[k].len() == 1)
        .collect();
    starts.extend(segments.iter().map(|s| s.0));
    for start in starts {
        let mut keys = vec![start];
        let mut at = start;
        while let Some(s) = next(at, &used, &adj) {
            used[s] = true;
            let (a, b) = segments[s];
            at = if a == at { b } else { a };
            keys.push(at);
        }
        if keys.len() > 1 {
            let closed = keys.first() == keys.last();
            out.push((keys, closed));
        }
    }
    out
}

/// Points where `p − level` changes sign along the axis, refined by bisection.
pub fn crossings_1d(p: &Poly, lo: f64, hi: f64, points: usize, level: f64) -> Vec<f64> {
    let g = |x: f64| p.eval(&[x]).expect("univariate") - level;
    let xs: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let mut out = Vec::new();
    for w in xs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            out.push(a);
            continue;
        }
        if ga * gb >= 0.0 {
            continue;
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if g(m) * ga > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// `h²/8 · max|∂²p/∂x_a²|` over the grid nodes, doubled: a bound on
/// `|p − level|` along interpolated edge crossings.
pub fn interpolation_bound(p: &Poly, domain: &BoxDomain, points: usize) -> f64 {
    (0..domain.dim())
        .map(|a| {
            let h = (domain.hi[a] - domain.lo[a]) / (points - 1) as f64;
            let d2 = p.derivative(a).derivative(a);
            let g = Grid::sample(&d2, domain, points.min(64)).expect("points ≥ 2");
            2.0 * h * h / 8.0 * g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

/// One horizontal slice of a 3-D level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub x3: f64,
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LevelSet {
    Crossings(Vec<f64>),
    Contours(Vec<Polyline>),
    Slices {
        slices: Vec<Slice>,
        cloud: Vec<[f64; 3]>,
    },
}

/// Level-`level` set of `p` over `domain` on a `points`-per-axis grid.
pub fn level_set(
    p: &Poly,
    domain: &BoxDomain,
    points: usize,
    level: f64,
) -> Result<LevelSet, PlotError> {
    match domain.dim() {
        1 => Ok(LevelSet::Crossings(crossings_1d(
            p,
            domain.lo[0],
            domain.hi[0],
            points,
            level,
        ))),
        2 => Ok(LevelSet::Contours(marching_squares(
            &Grid::sample(p, domain, points)?,
            level,
        ))),
        3 => {
            let grid = Grid::sample(p, domain, points)?;
            let plane =
                BoxDomain::new(domain.lo[..2].to_vec(), domain.hi[..2].to_vec()).expect("sub-box");
            let slices = grid.axes[2]
                .iter()
                .map(|&z| {
                    let g = Grid::sample_with(&plane, points, |x| {
                        p.eval(&[x[0], x[1], z]).expect("3 vars")
                    })?;
                    Ok(Slice {
                        x3: z,
                        polylines: marching_squares(&g, level),
                    })
                })
                .collect::<Result<Vec<_>, PlotError>>()?;
            Ok(LevelSet::Slices {
                slices,
                cloud: isosurface_cloud(&grid, level),
            })
        }
        n => Err(PlotError::Unsupported(n)),
    }
}

/// Linearly interpolated crossings along every grid edge of a 3-D grid.
pub fn isosurface_cloud(grid: &Grid, level: f64) -> Vec<[f64; 3]> {
    let sizes: Vec<usize> = grid.axes.iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for k in 0..sizes[2] {
        for j in 0..sizes[1] {
            for i in 0..sizes[0] {
                let idx = [i, j, k];
                let a = grid.at(&idx) - level;
                for axis in 0..3 {
                    if idx[axis] + 1 >= sizes[axis] {
                        continue;
                    }
                    let mut nb = idx;
                    nb[axis] += 1;
                    let b = grid.at(&nb) - level;
                    if (a < 0.0) != (b < 0.0) {
                        let t = a / (a - b);
                        let mut p = [0.0; 3];
                        for (c, slot) in p.iter_mut().enumerate() {
                            let (x0, x1) = (grid.axes[c][idx[c]], grid.axes[c][nb[c]]);
                            *slot = x0 + t * (x1 - x0);
                        }
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Embedded in every figure as an XML comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub tol: f64,
    pub problem_sha256: Option<String>,
    pub degree: u32,
}

impl Provenance {
    fn comment(&self) -> String {
        format!(
            "<!-- provenance: seed={} tol={:e} degree={} problem_sha256={} -->\n",
            self.seed,
            self.tol,
            self.degree,
            self.problem_sha256.as_deref().unwrap_or("none")
        )
    }
}

/// What goes into a figure besides the level set.
pub struct Figure<'a> {
    pub domain: &'a BoxDomain,
    pub radius: f64,
    pub level_set: &'a LevelSet,
    /// Curve of the polynomial for 1-D figures.
    pub profile: Option<&'a Poly>,
    /// Oracle boundary curve (2-D only), e.g. a reverse-time orbit.
    pub boundary: Option<&'a [Vec<f64>]>,
    pub provenance: &'a Provenance,
}

const SIZE: f64 = 480.0;
/// Slices drawn in a 3-D figure; the level-set data keeps all of them.
const MAX_PANELS: usize = 9;
const PAD: f64 = 30.0;

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
    origin: [f64; 2],
    size: [f64; 2],
}

impl Frame {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let u = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]);
        let v = (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]);
        (
            self.origin[0] + u * self.size[0],
            self.origin[1] + (1.0 - v) * self.size[1],
        )
    }

    fn scale(&self) -> [f64; 2] {
        [
            self.size[0] / (self.hi[0] - self.lo[0]),
            self.size[1] / (self.hi[1] - self.lo[1]),
        ]
    }
}

fn path(
    frame: &Frame,
    pts: impl IntoIterator<Item = [f64; 2]>,
    closed: bool,
    style: &str,
) -> String {
    let mut d = String::new();
    for (k, p) in pts.into_iter().enumerate() {
        let (x, y) = frame.map(p);
        let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
    }
    if closed {
        d.push('Z');
    }
    format!("<path d=\"{}\" {style}/>\n", d.trim_end())
}

const DOTTED_BLUE: &str =
    "fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.2\" stroke-dasharray=\"2,3\"";
const DOTTED_GREY: &str =
    "fill=\"none\" stroke=\"#777\" stroke-width=\"1\" stroke-dasharray=\"1,3\"";
const BLACK: &str = "fill=\"none\" stroke=\"black\" stroke-width=\"1.6\"";
const RED: &str = "fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.2\" stroke-dasharray=\"6,3\"";

/// Λ (dotted), the ball `B_R` (dotted), the level set (black) and the
/// optional oracle boundary (red), as one standalone SVG document.
pub fn svg(fig: &Figure) -> String {
    let mut body = String::new();
    let (width, height) = match fig.level_set {
        LevelSet::Crossings(xs) => {
            let p = fig.profile.expect("1-D figures need the polynomial");
            let (lo, hi) = (fig.domain.lo[0], fig.domain.hi[0]);
            let ts: Vec<f64> = (0..=400)
                .map(|i| lo + (hi - lo) * i as f64 / 400.0)
                .collect();
            let vals: Vec<f64> = ts
                .iter()
                .map(|&t| p.eval(&[t]).expect("univariate"))
                .collect();
            let top = vals.iter().fold(1.5f64, |m, v| m.max(*v)).min(10.0);
            let bottom = vals.iter().fold(0.0f64, |m, v| m.min(*v));
            let r = fig.radius;
            let (left, right) = (lo.min(-r), hi.max(r));
            let frame = Frame {
                lo: [left, bottom],
                hi: [right, top],
                origin: [PAD, PAD],
                size: [SIZE, SIZE * 0.6],
            };
            body += &path(
                &frame,
                ts.iter().zip(&vals).map(|(&t, &v)| [t, v.min(top)]),
                false,
                BLACK,
            );
            body += &path(&frame, [[left, 1.0], [right, 1.0]], false, DOTTED_GREY);
            for x in [lo, hi] {
                body += &path(&frame, [[x, bottom], [x, top]], false, DOTTED_BLUE);
            }
            for x in [-r, r] {
                body += &path(&frame, [[x, bottom], [x, top]], false, DOTTED_GREY);
            }
            for &x in xs {
                let (cx, cy) = frame.map([x, 1.0]);
                let _ = writeln!(
                    body,
                    "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"#c0392b\"/>"
                );
            }
            (SIZE + 2.0 * PAD, SIZE * 0.6 + 2.0 * PAD)
        }
        LevelSet::Contours(lines) => {
            let frame = square_frame(fig.domain, fig.radius, [PAD, PAD], SIZE);
            body += &panel(&frame, fig.domain, fig.radius);
            for l in lines {
                body += &path(&frame, l.points.iter().copied(), l.closed, BLACK);
            }
            if let Some(b) = fig.boundary {
                body += &path(&frame, b.iter().map(|p| [p[0], p[1]]), false, RED);
            }
            (SIZE + 2.0 * PAD, SIZE + 2.0 * PAD)
        }
        LevelSet::Slices { slices, .. } => {
            let step = slices.len().div_ceil(MAX_PANELS).max(1);
            let slices: Vec<&Slice> = slices.iter().step_by(step).collect();
            let cols = (slices.len() as f64).sqrt().ceil().max(1.0) as usize;
            let rows = slices.len().div_ceil(cols).max(1);
            let cell = SIZE / cols as f64;
            let plane = BoxDomain::new(fig.domain.lo[..2].to_vec(), fig.domain.hi[..2].to_vec())
                .expect("sub-box");
            for (k, s) in slices.iter().enumerate() {
                let origin = [
                    PAD + (k % cols) as f64 * cell,
                    PAD + (k / cols) as f64 * (cell + 14.0),
                ];
                let frame = square_frame(&plane, fig.radius, origin, cell - 8.0);
                // Ball cross-section at this height.
                let r2 = fig.radius * fig.radius - s.x3 * s.x3;
                body += &panel(&frame, &plane, r2.max(0.0).sqrt());
                for l in &s.polylines {
                    body += &path(&frame, l.points.iter().copied(), l.closed, BLACK);
                }
                let _ = writeln!(
                    body,
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">x3 = {:.3}</text>",
                    origin[0],
                    origin[1] + cell + 4.0,
                    s.x3
                );
            }
            (SIZE + 2.0 * PAD, rows as f64 * (cell + 14.0) + 2.0 * PAD)
        }
    };
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n{}<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
        fig.provenance.comment()
    )
}

/// Frame showing the box and the ball with equal axis scales.
fn square_frame(domain: &BoxDomain, radius: f64, origin: [f64; 2], size: f64) -> Frame {
    let lo = [domain.lo[0].min(-radius), domain.lo[1].min(-radius)];
    let hi = [domain.hi[0].max(radius), domain.hi[1].max(radius)];
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    Frame {
        lo: [c[0] - span / 2.0, c[1] - span / 2.0],
        hi: [c[0] + span / 2.0, c[1] + span / 2.0],
        origin,
        size: [size, size],
    }
}

fn panel(frame: &Frame, domain: &BoxDomain, radius: f64) -> String {
    let (x0, y1) = frame.map([domain.lo[0], domain.lo[1]]);
    let (x1, y0) = frame.map([domain.hi[0], domain.hi[1]]);
    let (cx, cy) = frame.map([0.0, 0.0]);
    let s = frame.scale();
    format!(
        "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" {DOTTED_BLUE}/>\n<ellipse cx=\"{cx:.2}\" cy=\"{cy:.2}\" rx=\"{:.2}\" ry=\"{:.2}\" {DOTTED_GREY}/>\n",
        x1 - x0,
        y1 - y0,
        radius * s[0],
        radius * s[1]
    )
}
