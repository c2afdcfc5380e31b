use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point, PolygonalMesh};
use crate::curved::{ray_exit, LevelSet};
use crate::{Error, Result};

/// Polar ring mesh of a convex domain with every boundary vertex on the curve.
///
/// `interior_resolution` is the number of radial layers. Vertex counts on the
/// rings are halved towards the center to keep cells isotropic; the innermost
/// layer is one polygon.
pub fn build_disk_approx_mesh(
    levelset: &dyn LevelSet,
    n_boundary: usize,
    interior_resolution: usize,
) -> Result<PolygonalMesh> {
    if !levelset.is_convex() {
        return Err(Error::InvalidArgument(format!("level set {} is not convex", levelset.name())));
    }
    if n_boundary < 3 {
        return Err(Error::InvalidArgument("n_boundary must be at least 3".into()));
    }
    let m = interior_resolution.max(1);
    let center = levelset.center();

    // ring_counts[j] for ring j+1, normalized radius (j+1)/m
    let mut counts = vec![n_boundary; m];
    for j in (0..m - 1).rev() {
        let outer = counts[j + 1];
        let rho = (j + 1) as f64 / m as f64;
        let halved_spacing = 2.0 * PI * rho / (outer / 2) as f64;
        counts[j] = if outer.is_multiple_of(2) && outer / 2 >= 4 && halved_spacing <= 1.5 / m as f64 {
            outer / 2
        } else {
            outer
        };
    }

    let mut exits: HashMap<u64, f64> = HashMap::new();
    let mut vertices = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(m);
    for (j, &n) in counts.iter().enumerate() {
        let rho = (j + 1) as f64 / m as f64;
        let mut ring = Vec::with_capacity(n);
        for i in 0..n {
            let theta = 2.0 * PI * i as f64 / n as f64;
            let key = theta.to_bits();
            let dir = Point::new(theta.cos(), theta.sin());
            let t = match exits.get(&key) {
                Some(&t) => t,
                None => {
                    let t = ray_exit(levelset, center, dir)?;
                    exits.insert(key, t);
                    t
                }
            };
            ring.push(vertices.len());
            vertices.push(if j + 1 == m { center + dir * t } else { center + dir * (rho * t) });
        }
        rings.push(ring);
    }

    let mut cells = vec![rings[0].clone()];
    for j in 0..m - 1 {
        let (inner, outer) = (&rings[j], &rings[j + 1]);
        let r = outer.len() / inner.len();
        for i in 0..inner.len() {
            let mut cell = vec![inner[i]];
            for s in 0..=r {
                cell.push(outer[(r * i + s) % outer.len()]);
            }
            cell.push(inner[(i + 1) % inner.len()]);
            cells.push(cell);
        }
    }
    PolygonalMesh::with_levelset(vertices, cells, Some(levelset.name()))
}

/// Result of the square agglomeration generator.
#[derive(Debug, Clone)]
pub struct SquaresMeshInfo {
    pub mesh: PolygonalMesh,
    /// Cells that are unrefined base squares.
    pub interior_cells: Vec<usize>,
    /// Cells built from retained sub-squares of boundary parents.
    pub boundary_cells: Vec<usize>,
    /// Base squares meeting the domain that kept no sub-square.
    pub dropped_parents: usize,
    /// Side of a base square.
    pub base_side: f64,
}

/// Union-of-squares approximation of a convex domain from inside.
///
/// Base squares fully inside the domain are kept whole. Base squares cut by
/// the boundary are split `boundary_refine_steps` times; the sub-squares lying
/// fully inside are agglomerated into one cell per connected component, and
/// components narrower than a base square join a neighbouring cell.
pub fn build_squares_approx_mesh(
    levelset: &dyn LevelSet,
    base_n: usize,
    boundary_refine_steps: u32,
) -> Result<SquaresMeshInfo> {
    if base_n == 0 {
        return Err(Error::InvalidArgument("base_n must be at least 1".into()));
    }
    if !levelset.is_convex() {
        return Err(Error::InvalidArgument(format!("level set {} is not convex", levelset.name())));
    }
    if boundary_refine_steps > 12 {
        return Err(Error::InvalidArgument("boundary_refine_steps is limited to 12".into()));
    }
    let (lo, hi) = levelset.bounding_box();
    let side = (hi - lo).max() / base_n as f64;
    let nx = (((hi.x - lo.x) / side) - 1e-9).ceil().max(1.0) as i64;
    let ny = (((hi.y - lo.y) / side) - 1e-9).ceil().max(1.0) as i64;
    let sub = 1i64 << boundary_refine_steps;
    let fine = side / sub as f64;
    let tol = 1e-12;
    let lattice = |i: i64, j: i64| Point::new(lo.x + i as f64 * fine, lo.y + j as f64 * fine);

    let mut inside_cache: HashMap<(i64, i64), bool> = HashMap::new();
    let mut inside =
        |i: i64, j: i64| *inside_cache.entry((i, j)).or_insert_with(|| levelset.value(lattice(i, j)) <= tol);

    // cells as lattice loops in fine lattice coordinates
    let mut pieces: Vec<Piece> = Vec::new();
    let mut interior_at: HashMap<(i64, i64), usize> = HashMap::new();
    let mut dropped = 0usize;
    for pj in 0..ny {
        for pi in 0..nx {
            let (i0, j0) = (pi * sub, pj * sub);
            let corners = [(i0, j0), (i0 + sub, j0), (i0 + sub, j0 + sub), (i0, j0 + sub)];
            let n_in = corners.iter().filter(|&&(i, j)| inside(i, j)).count();
            if n_in == 4 {
                interior_at.insert((pi, pj), pieces.len());
                pieces.push(Piece { lattice_loop: corners.to_vec(), interior: true });
                continue;
            }
            let meets = n_in > 0 || {
                let c = Point::new(lo.x + (pi as f64 + 0.5) * side, lo.y + (pj as f64 + 0.5) * side);
                levelset.value(c) < 0.0
            };
            let mut kept: Vec<Vec<bool>> = vec![vec![false; sub as usize]; sub as usize];
            let mut any = false;
            if sub > 1 {
                for b in 0..sub {
                    for a in 0..sub {
                        let (i, j) = (i0 + a, j0 + b);
                        let k = inside(i, j) && inside(i + 1, j) && inside(i + 1, j + 1) && inside(i, j + 1);
                        kept[b as usize][a as usize] = k;
                        any |= k;
                    }
                }
            }
            if !any {
                if meets {
                    dropped += 1;
                    log::debug!("base square ({pi}, {pj}) keeps no sub-square, dropped");
                }
                continue;
            }
            for comp in components(&kept) {
                let lp = trace_component(&comp).into_iter().map(|(a, b)| (i0 + a as i64, j0 + b as i64)).collect();
                pieces.push(Piece { lattice_loop: lp, interior: false });
            }
        }
    }
    if dropped > 0 {
        log::info!("squares mesh: {dropped} base squares dropped");
    }
    if pieces.is_empty() {
        return Err(Error::MeshGeneration("no square lies inside the domain".into()));
    }
    let groups = agglomerate(&pieces, &interior_at, sub);

    let loops: Vec<(Vec<(i64, i64)>, bool)> = groups
        .iter()
        .map(|g| match g.as_slice() {
            [p] => Ok((pieces[*p].lattice_loop.clone(), pieces[*p].interior)),
            _ => Ok((merge_loops(&pieces, g, sub)?, false)),
        })
        .collect::<Result<_>>()?;

    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    for (lp, _) in &loops {
        for &p in lp {
            index.entry(p).or_insert_with(|| {
                vertices.push(lattice(p.0, p.1));
                vertices.len() - 1
            });
        }
    }
    let mut cells = Vec::with_capacity(loops.len());
    let mut interior_cells = Vec::new();
    let mut boundary_cells = Vec::new();
    for (c, (lp, interior)) in loops.iter().enumerate() {
        let mut cell = Vec::with_capacity(lp.len());
        if *interior {
            // hanging vertices of refined neighbours
            for s in 0..4 {
                let (a, b) = (lp[s], lp[(s + 1) % 4]);
                cell.push(index[&a]);
                let (di, dj) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
                let mut p = (a.0 + di, a.1 + dj);
                while p != b {
                    if let Some(&v) = index.get(&p) {
                        cell.push(v);
                    }
                    p = (p.0 + di, p.1 + dj);
                }
            }
            interior_cells.push(c);
        } else {
            cell.extend(lp.iter().map(|p| index[p]));
            boundary_cells.push(c);
        }
        cells.push(cell);
    }
    let mesh = PolygonalMesh::with_levelset(vertices, cells, Some(levelset.name()))?;
    Ok(SquaresMeshInfo { mesh, interior_cells, boundary_cells, dropped_parents: dropped, base_side: side })
}

type LatticeEdge = ((i64, i64), (i64, i64));

struct Piece {
    /// Counter-clockwise; unit steps for boundary pieces, corners only for
    /// interior squares.
    lattice_loop: Vec<(i64, i64)>,
    interior: bool,
}

impl Piece {
    fn unit_edges(&self) -> Vec<LatticeEdge> {
        let n = self.lattice_loop.len();
        let mut out = Vec::new();
        for s in 0..n {
            let (a, b) = (self.lattice_loop[s], self.lattice_loop[(s + 1) % n]);
            let (di, dj) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
            let mut p = a;
            while p != b {
                let q = (p.0 + di, p.1 + dj);
                out.push((p, q));
                p = q;
            }
        }
        out
    }

    fn extent(&self) -> i64 {
        let (mut lo, mut hi) = ((i64::MAX, i64::MAX), (i64::MIN, i64::MIN));
        for &(i, j) in &self.lattice_loop {
            lo = (lo.0.min(i), lo.1.min(j));
            hi = (hi.0.max(i), hi.1.max(j));
        }
        (hi.0 - lo.0).max(hi.1 - lo.1)
    }
}

/// Groups of pieces forming one cell. Boundary pieces narrower than a base
/// square in both directions are merged into the neighbour sharing the most unit edges,
/// preferring boundary pieces, so that boundary cells keep a diameter
/// comparable to the base size.
fn agglomerate(pieces: &[Piece], interior_at: &HashMap<(i64, i64), usize>, sub: i64) -> Vec<Vec<usize>> {
    let mut owner: HashMap<LatticeEdge, usize> = HashMap::new();
    for (p, piece) in pieces.iter().enumerate() {
        if !piece.interior {
            for e in piece.unit_edges() {
                owner.insert(e, p);
            }
        }
    }
    // piece across a directed unit edge: the unit square on its right
    let across = |(a, b): LatticeEdge| -> Option<usize> {
        if let Some(&p) = owner.get(&(b, a)) {
            return Some(p);
        }
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let (rx, ry) = (dy, -dx);
        let ll = (a.0.min(b.0).min(a.0 + rx), a.1.min(b.1).min(a.1 + ry));
        interior_at.get(&(ll.0.div_euclid(sub), ll.1.div_euclid(sub))).copied()
    };
    let mut parent: Vec<usize> = (0..pieces.len()).collect();
    fn root(parent: &mut [usize], mut p: usize) -> usize {
        while parent[p] != p {
            parent[p] = parent[parent[p]];
            p = parent[p];
        }
        p
    }
    for (p, piece) in pieces.iter().enumerate() {
        if piece.interior || piece.extent() >= sub {
            continue;
        }
        let rp = root(&mut parent, p);
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for e in piece.unit_edges() {
            if let Some(q) = across(e) {
                let rq = root(&mut parent, q);
                if rq != rp {
                    *shared.entry(rq).or_default() += 1;
                }
            }
        }
        let best =
            shared.into_iter().max_by_key(|&(q, n)| (!pieces[q].interior, n, std::cmp::Reverse(q))).map(|(q, _)| q);
        if let Some(q) = best {
            parent[rp] = q;
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for p in 0..pieces.len() {
        let r = root(&mut parent, p);
        let s = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[s].push(p);
    }
    groups
}

/// Outer loop of a union of pieces, listing every lattice point passed.
fn merge_loops(pieces: &[Piece], group: &[usize], sub: i64) -> Result<Vec<(i64, i64)>> {
    use std::collections::HashSet;
    let mut edges: HashSet<LatticeEdge> = HashSet::new();
    for &p in group {
        let piece = &pieces[p];
        let unit = if piece.interior {
            let mut full = Piece { lattice_loop: Vec::new(), interior: true };
            let c = &piece.lattice_loop;
            for s in 0..4 {
                let (a, b) = (c[s], c[(s + 1) % 4]);
                let (di, dj) = ((b.0 - a.0) / sub, (b.1 - a.1) / sub);
                full.lattice_loop.extend((0..sub).map(|t| (a.0 + di * t, a.1 + dj * t)));
            }
            full.unit_edges()
        } else {
            piece.unit_edges()
        };
        for (a, b) in unit {
            if !edges.remove(&(b, a)) {
                edges.insert((a, b));
            }
        }
    }
    let mut next: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    for &(a, b) in &edges {
        if next.insert(a, b).is_some() {
            return Err(Error::MeshGeneration(format!("agglomerated cell pinches at lattice point {a:?}")));
        }
    }
    let start = *next.keys().min().expect("non-empty group");
    let mut lp = vec![start];
    let mut p = next[&start];
    while p != start {
        lp.push(p);
        p = next[&p];
    }
    if lp.len() != next.len() {
        return Err(Error::MeshGeneration("agglomerated cell has a hole".into()));
    }
    Ok(lp)
}

fn components(kept: &[Vec<bool>]) -> Vec<Vec<(usize, usize)>> {
    let n = kept.len();
    let mut seen = vec![vec![false; n]; n];
    let mut out = Vec::new();
    for b0 in 0..n {
        for a0 in 0..n {
            if !kept[b0][a0] || seen[b0][a0] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![(a0, b0)];
            seen[b0][a0] = true;
            while let Some((a, b)) = stack.pop() {
                comp.push((a, b));
                let nbrs = [(a.wrapping_sub(1), b), (a + 1, b), (a, b.wrapping_sub(1)), (a, b + 1)];
                for (x, y) in nbrs {
                    if x < n && y < n && kept[y][x] && !seen[y][x] {
                        seen[y][x] = true;
                        stack.push((x, y));
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Counter-clockwise boundary of a hole-free 4-connected set of unit squares,
/// listing every lattice point passed.
fn trace_component(comp: &[(usize, usize)]) -> Vec<(usize, usize)> {
    use std::collections::HashSet;
    let set: HashSet<(usize, usize)> = comp.iter().copied().collect();
    let has = |a: isize, b: isize| a >= 0 && b >= 0 && set.contains(&(a as usize, b as usize));
    let mut next: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for &(a, b) in comp {
        let (ai, bi) = (a as isize, b as isize);
        if !has(ai, bi - 1) {
            next.insert((a, b), (a + 1, b));
        }
        if !has(ai + 1, bi) {
            next.insert((a + 1, b), (a + 1, b + 1));
        }
        if !has(ai, bi + 1) {
            next.insert((a + 1, b + 1), (a, b + 1));
        }
        if !has(ai - 1, bi) {
            next.insert((a, b + 1), (a, b));
        }
    }
    let start = *next.keys().min().expect("non-empty component");
    let mut lp = vec![start];
    let mut p = next[&start];
    while p != start {
        lp.push(p);
        p = next[&p];
    }
    lp
}
