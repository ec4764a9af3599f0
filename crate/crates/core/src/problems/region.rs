//! Polyhedral regions of mean vectors and a certified distance test.
//!
//! Candidate answers are decided by asking whether the empirical mean lies
//! within a weighted quadratic distance of a region. Regions are finite
//! unions of polyhedra `{x : a_r . x >= b_r for every row r}`.

use super::primitive::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// `{x : normal_r . x >= offset_r}`; no rows means the whole space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polyhedron {
    pub rows: Vec<Row>,
}

impl Polyhedron {
    pub fn whole() -> Self {
        Polyhedron { rows: Vec::new() }
    }

    pub fn push(&mut self, normal: Vec<f64>, offset: f64) {
        self.rows.push(Row { normal, offset });
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|r| dot(&r.normal, x) >= r.offset)
    }

    pub fn lift(&self, block: &[usize], k: usize) -> Polyhedron {
        Polyhedron {
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let mut n = vec![0.0; k];
                    for (j, &a) in r.normal.iter().enumerate() {
                        n[block[j]] = a;
                    }
                    Row {
                        normal: n,
                        offset: r.offset,
                    }
                })
                .collect(),
        }
    }

    pub fn intersect(&self, other: &Polyhedron) -> Polyhedron {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Polyhedron { rows }
    }
}

/// A union of polyhedra. `exact` is false when the union over-approximates
/// the set it stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub pieces: Vec<Polyhedron>,
    pub exact: bool,
}

impl Region {
    pub fn whole() -> Self {
        Region {
            pieces: vec![Polyhedron::whole()],
            exact: true,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.pieces.iter().any(|p| p.contains(x))
    }

    /// Whether `inf_{x in region} q(x) <= radius`, with
    /// `q(x) = sum_k c_k (x_k - center_k)^2 / 2`.
    pub fn within(&self, c: &[f64], center: &[f64], radius: f64) -> Proximity {
        let mut verdict = Proximity::Outside;
        for p in &self.pieces {
            match quadratic_proximity(p, c, center, radius) {
                Proximity::Inside => return Proximity::Inside,
                Proximity::Unknown => verdict = Proximity::Unknown,
                Proximity::Outside => {}
            }
        }
        verdict
    }

    /// Cartesian product of per-block regions, lifted into `k` coordinates.
    pub fn product(blocks: &[(&[usize], Region)], k: usize) -> Region {
        let mut pieces = vec![Polyhedron::whole()];
        let mut exact = true;
        for (arms, region) in blocks {
            exact &= region.exact;
            let lifted: Vec<Polyhedron> = region.pieces.iter().map(|p| p.lift(arms, k)).collect();
            pieces = pieces
                .iter()
                .flat_map(|a| lifted.iter().map(move |b| a.intersect(b)))
                .collect();
        }
        Region { pieces, exact }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximity {
    /// A point of the region within the radius was found.
    Inside,
    /// A dual certificate shows every point of the region is beyond the radius.
    Outside,
    /// Neither was established within the iteration budget.
    Unknown,
}

const MAX_SWEEPS: usize = 2000;

/// Hildreth's dual coordinate ascent for the projection of `center` onto a
/// polyhedron in the metric `diag(c)`. The dual objective is a certified lower
/// bound on the distance, the primal iterate (once feasible) an upper bound.
pub fn quadratic_proximity(p: &Polyhedron, c: &[f64], center: &[f64], radius: f64) -> Proximity {
    if p.contains(center) {
        return Proximity::Inside;
    }
    if c.iter().any(|&ck| !(ck > 0.0)) {
        return Proximity::Unknown;
    }
    let rows: Vec<(&Row, f64)> = p
        .rows
        .iter()
        .map(|r| (r, r.normal.iter().zip(c).map(|(a, ck)| a * a / ck).sum::<f64>()))
        .collect();
    if rows.iter().any(|(r, s)| *s == 0.0 && r.offset > 0.0) {
        return Proximity::Outside;
    }
    let scale = 1.0 + center.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut x = center.to_vec();
    let mut y = vec![0.0; rows.len()];
    for _ in 0..MAX_SWEEPS {
        for (r, (row, s)) in rows.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            let step = ((row.offset - dot(&row.normal, &x)) / s).max(-y[r]);
            if step != 0.0 {
                y[r] += step;
                for ((xk, a), ck) in x.iter_mut().zip(&row.normal).zip(c) {
                    *xk += step * a / ck;
                }
            }
        }
        let primal: f64 = x
            .iter()
            .zip(center)
            .zip(c)
            .map(|((xk, m), ck)| ck * (xk - m).powi(2))
            .sum::<f64>()
            / 2.0;
        let linear: f64 = rows
            .iter()
            .zip(&y)
            .map(|((row, _), yr)| yr * (row.offset - dot(&row.normal, center)))
            .sum();
        let dual = linear - primal;
        if dual > radius {
            return Proximity::Outside;
        }
        let violation = rows
            .iter()
            .map(|(row, _)| row.offset - dot(&row.normal, &x))
            .fold(0.0, f64::max);
        if violation <= 1e-12 * scale {
            if primal <= radius {
                return Proximity::Inside;
            }
            if primal - dual <= 1e-12 * primal.max(1e-300) {
                return Proximity::Outside;
            }
        }
    }
    Proximity::Unknown
}
