use rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{BoundaryEdge, Cell, Domain, DroppedFacet, InteriorEdge, Mesh};
use crate::error::MeshError;
use crate::geometry::{self, HalfPlane, Point};

/// Facets shorter than this fraction of `h` are treated as degenerate.
const DEGENERATE_FACET: f64 = 1e-12;

/// Uniform `nx x ny` grid of rectangles with cell centers at the centroids.
pub fn build_uniform_rect(nx: usize, ny: usize, domain: &Domain) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidCount { nx, ny });
    }
    let (lo, hi) = geometry::bounding_box(domain.vertices());
    let rect = Domain::rectangle(lo.x, hi.x, lo.y, hi.y)?;
    if domain.vertices().len() != 4 || (domain.area() - rect.area()).abs() > 1e-12 * rect.area() {
        return Err(MeshError::NotRectangle);
    }
    let xs: Vec<f64> = (0..=nx)
        .map(|i| lo.x + (hi.x - lo.x) * i as f64 / nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=ny)
        .map(|j| lo.y + (hi.y - lo.y) * j as f64 / ny as f64)
        .collect();
    let id = |i: usize, j: usize| j * nx + i;

    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let vertices = vec![
                Point::new(xs[i], ys[j]),
                Point::new(xs[i + 1], ys[j]),
                Point::new(xs[i + 1], ys[j + 1]),
                Point::new(xs[i], ys[j + 1]),
            ];
            cells.push(Cell {
                center: Point::new(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])),
                area: (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]),
                vertices,
            });
        }
    }

    let mut interior = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                let (k, l) = (id(i, j), id(i + 1, j));
                let length = ys[j + 1] - ys[j];
                let distance = cells[l].center.x - cells[k].center.x;
                interior.push(InteriorEdge {
                    cells: [k, l],
                    endpoints: [Point::new(xs[i + 1], ys[j]), Point::new(xs[i + 1], ys[j + 1])],
                    length,
                    distance,
                    normal: Point::new(1.0, 0.0),
                    diamond_area: 0.5 * length * distance,
                });
            }
            if j + 1 < ny {
                let (k, l) = (id(i, j), id(i, j + 1));
                let length = xs[i + 1] - xs[i];
                let distance = cells[l].center.y - cells[k].center.y;
                interior.push(InteriorEdge {
                    cells: [k, l],
                    endpoints: [Point::new(xs[i + 1], ys[j + 1]), Point::new(xs[i], ys[j + 1])],
                    length,
                    distance,
                    normal: Point::new(0.0, 1.0),
                    diamond_area: 0.5 * length * distance,
                });
            }
        }
    }

    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundaryEdge {
            cell: id(i, 0),
            endpoints: [Point::new(xs[i], ys[0]), Point::new(xs[i + 1], ys[0])],
            length: xs[i + 1] - xs[i],
        });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge {
            cell: id(nx - 1, j),
            endpoints: [Point::new(xs[nx], ys[j]), Point::new(xs[nx], ys[j + 1])],
            length: ys[j + 1] - ys[j],
        });
    }
    for i in (0..nx).rev() {
        boundary.push(BoundaryEdge {
            cell: id(i, ny - 1),
            endpoints: [Point::new(xs[i + 1], ys[ny]), Point::new(xs[i], ys[ny])],
            length: xs[i + 1] - xs[i],
        });
    }
    for j in (0..ny).rev() {
        boundary.push(BoundaryEdge {
            cell: id(0, j),
            endpoints: [Point::new(xs[0], ys[j + 1]), Point::new(xs[0], ys[j])],
            length: ys[j + 1] - ys[j],
        });
    }

    Mesh::from_parts(rect, cells, interior, boundary, Vec::new())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Facet {
    Boundary,
    Site(usize),
}

/// Voronoi diagram of `sites` clipped to a convex domain; each site is the
/// center of its own cell.
pub fn build_voronoi(sites: &[Point], domain: &Domain) -> Result<Mesh, MeshError> {
    if sites.is_empty() {
        return Err(MeshError::NoSites);
    }
    for (i, &s) in sites.iter().enumerate() {
        if !s.is_finite() || !domain.strictly_contains(s) {
            return Err(MeshError::SiteOutsideDomain(i));
        }
    }
    let scale = domain.diameter();
    let dup_tol = 1e-12 * scale;
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| {
        sites[a]
            .x
            .total_cmp(&sites[b].x)
            .then(sites[a].y.total_cmp(&sites[b].y))
    });
    for w in 0..order.len() {
        for v in w + 1..order.len() {
            let (a, b) = (order[w], order[v]);
            if sites[b].x - sites[a].x > dup_tol {
                break;
            }
            if sites[a].distance(sites[b]) <= dup_tol {
                return Err(MeshError::DuplicateSite(a.min(b), a.max(b)));
            }
        }
    }

    let base: Vec<(Point, Facet)> = domain
        .vertices()
        .iter()
        .map(|&p| (p, Facet::Boundary))
        .collect();
    let polygons: Vec<Vec<(Point, Facet)>> = (0..sites.len())
        .map(|i| voronoi_cell(i, sites, &base, scale))
        .collect();

    let size = polygons
        .iter()
        .map(|poly| {
            let pts: Vec<Point> = poly.iter().map(|&(p, _)| p).collect();
            geometry::diameter(&pts)
        })
        .fold(0.0, f64::max);
    let min_facet = DEGENERATE_FACET * size;

    let cells: Vec<Cell> = polygons
        .iter()
        .zip(sites)
        .map(|(poly, &site)| {
            let vertices: Vec<Point> = poly.iter().map(|&(p, _)| p).collect();
            Cell {
                center: site,
                area: geometry::area(&vertices),
                vertices,
            }
        })
        .collect();

    let has_facet = |cell: usize, other: usize| -> Option<f64> {
        let poly = &polygons[cell];
        let n = poly.len();
        (0..n)
            .find(|&k| poly[k].1 == Facet::Site(other))
            .map(|k| poly[k].0.distance(poly[(k + 1) % n].0))
    };

    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut dropped = Vec::new();
    for (i, poly) in polygons.iter().enumerate() {
        let n = poly.len();
        for k in 0..n {
            let (a, label) = poly[k];
            let b = poly[(k + 1) % n].0;
            let length = a.distance(b);
            match label {
                Facet::Boundary => {
                    if length > min_facet {
                        boundary.push(BoundaryEdge {
                            cell: i,
                            endpoints: [a, b],
                            length,
                        });
                    }
                }
                Facet::Site(j) if i < j => {
                    let mirrored = has_facet(j, i);
                    if length <= min_facet || mirrored.is_none_or(|m| m <= min_facet) {
                        dropped.push(DroppedFacet { cells: [i, j], length });
                        continue;
                    }
                    let distance = sites[i].distance(sites[j]);
                    interior.push(InteriorEdge {
                        cells: [i, j],
                        endpoints: [a, b],
                        length,
                        distance,
                        normal: (b - a).perp_cw() * (1.0 / length),
                        diamond_area: 0.5 * length * distance,
                    });
                }
                Facet::Site(j) => {
                    if has_facet(j, i).is_none() {
                        dropped.push(DroppedFacet { cells: [j, i], length });
                    }
                }
            }
        }
    }

    Mesh::from_parts(domain.clone(), cells, interior, boundary, dropped)
}

fn voronoi_cell(
    i: usize,
    sites: &[Point],
    base: &[(Point, Facet)],
    scale: f64,
) -> Vec<(Point, Facet)> {
    let site = sites[i];
    let mut others: Vec<usize> = (0..sites.len()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| {
        site.distance(sites[a])
            .total_cmp(&site.distance(sites[b]))
            .then(a.cmp(&b))
    });
    let mut poly = base.to_vec();
    for j in others {
        let reach = poly
            .iter()
            .map(|&(p, _)| p.distance(site))
            .fold(0.0, f64::max);
        if site.distance(sites[j]) > 2.0 * reach {
            break;
        }
        poly = geometry::clip_labeled(&poly, &HalfPlane::bisector(site, sites[j]), Facet::Site(j));
        dedup_vertices(&mut poly, 1e-14 * scale);
    }
    poly
}

/// Removes consecutive vertices closer than `tol`; the surviving vertex takes
/// the label of the edge that follows the removed one.
fn dedup_vertices(poly: &mut Vec<(Point, Facet)>, tol: f64) {
    let mut k = 0;
    while poly.len() > 3 && k < poly.len() {
        let next = (k + 1) % poly.len();
        if poly[k].0.distance(poly[next].0) <= tol {
            poly[k].1 = poly[next].1;
            poly.remove(next);
            if next < k {
                k -= 1;
            }
        } else {
            k += 1;
        }
    }
}

/// Sites on an `nx x ny` lattice over the domain's bounding box, each moved
/// uniformly by up to `jitter` half-spacings; sites falling outside the domain
/// are discarded.
pub fn jittered_lattice_sites(
    nx: usize,
    ny: usize,
    domain: &Domain,
    jitter: f64,
    seed: u64,
) -> Vec<Point> {
    let (lo, hi) = geometry::bounding_box(domain.vertices());
    let dx = (hi.x - lo.x) / nx as f64;
    let dy = (hi.y - lo.y) / ny as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * 2.0 - 1.0;
    let mut sites = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = lo.x + (i as f64 + 0.5) * dx;
            let cy = lo.y + (j as f64 + 0.5) * dy;
            let p = Point::new(cx + 0.5 * jitter * dx * unit(), cy + 0.5 * jitter * dy * unit());
            if domain.strictly_contains(p) {
                sites.push(p);
            }
        }
    }
    sites
}
