//! Simplicial partitions of the standard simplex.
//!
//! The vertex pool and the simplex list together generate the inner cone
//! (rank-one terms `b b'` over pool vertices) and the outer cone (symmetric
//! pair terms `b c' + c b'` over vertices sharing a simplex).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Vertices closer than this in max-norm are the same vertex.
pub const VERTEX_TOL: f64 = 1e-12;

// relative slack for calling two edge lengths equal
const EDGE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertex_ids: Vec<usize>,
    diameter: f64,
}

impl Simplex {
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
}

#[derive(Debug, Clone)]
pub struct SimplicialPartition {
    n: usize,
    vertices: Vec<DVector<f64>>,
    simplices: Vec<Simplex>,
}

/// Builds the trivial partition: one simplex spanned by the unit vectors.
pub fn initial_partition(n: usize) -> Result<SimplicialPartition> {
    if n == 0 {
        return Err(Error::InvalidArgument("partition dimension must be positive".into()));
    }
    let vertices: Vec<_> = (0..n)
        .map(|i| {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            v
        })
        .collect();
    let mut partition = SimplicialPartition {
        n,
        vertices,
        simplices: Vec::new(),
    };
    let ids: Vec<usize> = (0..n).collect();
    let diameter = partition.compute_diameter(&ids);
    partition.simplices.push(Simplex {
        vertex_ids: ids,
        diameter,
    });
    Ok(partition)
}

impl SimplicialPartition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, id: usize) -> &DVector<f64> {
        &self.vertices[id]
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn simplex(&self, id: usize) -> Result<&Simplex> {
        self.simplices.get(id).ok_or(Error::UnknownSimplex(id))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }

    /// Largest pairwise Euclidean distance among the simplex's vertices.
    pub fn diameter(&self, simplex_id: usize) -> Result<f64> {
        Ok(self.simplex(simplex_id)?.diameter)
    }

    /// Id of the simplex with the largest diameter (lowest id on ties).
    pub fn max_diameter_simplex(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.simplices.iter().enumerate() {
            if s.diameter > self.simplices[best].diameter {
                best = i;
            }
        }
        best
    }

    /// Splits the longest edge of a simplex at its midpoint.
    ///
    /// The first child keeps `simplex_id`; the second is appended. Ties
    /// between equally long edges go to the lexicographically lowest pair of
    /// pool indices.
    pub fn bisect(&mut self, simplex_id: usize) -> Result<(usize, usize)> {
        let ids = self.simplex(simplex_id)?.vertex_ids.clone();
        if ids.len() < 2 {
            return Err(Error::InvalidArgument(
                "a one-point simplex has no edge to bisect".into(),
            ));
        }
        let (a, b) = self.longest_edge(&ids);
        self.split_edge(simplex_id, ids, a, b)
    }

    /// Splits the edge `{u, w}` of a simplex at its midpoint.
    ///
    /// Child order follows [`Self::bisect`]: the child keeping `min(u, w)`
    /// retains `simplex_id`.
    pub fn bisect_edge(&mut self, simplex_id: usize, u: usize, w: usize) -> Result<(usize, usize)> {
        let ids = self.simplex(simplex_id)?.vertex_ids.clone();
        if u == w || !ids.contains(&u) || !ids.contains(&w) {
            return Err(Error::InvalidArgument(format!(
                "{{{u}, {w}}} is not an edge of simplex {simplex_id}"
            )));
        }
        self.split_edge(simplex_id, ids, u.min(w), u.max(w))
    }

    fn split_edge(&mut self, simplex_id: usize, ids: Vec<usize>, a: usize, b: usize) -> Result<(usize, usize)> {
        let midpoint = (&self.vertices[a] + &self.vertices[b]) * 0.5;
        let mid = self.intern(midpoint);

        let first: Vec<usize> = ids.iter().map(|&v| if v == b { mid } else { v }).collect();
        let second: Vec<usize> = ids.iter().map(|&v| if v == a { mid } else { v }).collect();
        let d_first = self.compute_diameter(&first);
        let d_second = self.compute_diameter(&second);
        self.simplices[simplex_id] = Simplex {
            vertex_ids: first,
            diameter: d_first,
        };
        self.simplices.push(Simplex {
            vertex_ids: second,
            diameter: d_second,
        });
        Ok((simplex_id, self.simplices.len() - 1))
    }

    /// Pool-index pair `(lo, hi)` of the simplex's longest edge.
    pub fn longest_edge_of(&self, simplex_id: usize) -> Result<Option<(usize, usize)>> {
        let ids = &self.simplex(simplex_id)?.vertex_ids;
        if ids.len() < 2 {
            return Ok(None);
        }
        Ok(Some(self.longest_edge(ids)))
    }

    fn longest_edge(&self, ids: &[usize]) -> (usize, usize) {
        let mut best: Option<((usize, usize), f64)> = None;
        for (i, &u) in ids.iter().enumerate() {
            for &w in &ids[i + 1..] {
                let pair = (u.min(w), u.max(w));
                let len = (&self.vertices[u] - &self.vertices[w]).norm();
                best = match best {
                    None => Some((pair, len)),
                    Some((bp, bl)) => {
                        let tie = (len - bl).abs() <= EDGE_TIE_TOL * bl.max(len);
                        if (!tie && len > bl) || (tie && pair < bp) {
                            Some((pair, len))
                        } else {
                            Some((bp, bl))
                        }
                    }
                };
            }
        }
        best.expect("simplex has at least one edge").0
    }

    fn compute_diameter(&self, ids: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for (i, &u) in ids.iter().enumerate() {
            for &w in &ids[i + 1..] {
                d = d.max((&self.vertices[u] - &self.vertices[w]).norm());
            }
        }
        d
    }

    fn intern(&mut self, v: DVector<f64>) -> usize {
        if let Some(id) = self
            .vertices
            .iter()
            .position(|u| (u - &v).amax() <= VERTEX_TOL)
        {
            return id;
        }
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    /// `|det|` of the matrix of vertex coordinates, proportional to the
    /// simplex's (n-1)-volume. The whole standard simplex has measure 1.
    pub fn relative_volume(&self, simplex_id: usize) -> Result<f64> {
        let m = self.coordinate_matrix(simplex_id)?;
        Ok(m.determinant().abs())
    }

    /// Barycentric coordinates of `point` with respect to a simplex.
    pub fn barycentric(&self, simplex_id: usize, point: &DVector<f64>) -> Result<DVector<f64>> {
        if point.len() != self.n {
            return Err(Error::Dimension(format!(
                "point has length {}, expected {}",
                point.len(),
                self.n
            )));
        }
        let m = self.coordinate_matrix(simplex_id)?;
        m.lu()
            .solve(point)
            .ok_or_else(|| Error::NumericalFailure("degenerate simplex".into()))
    }

    fn coordinate_matrix(&self, simplex_id: usize) -> Result<DMatrix<f64>> {
        let s = self.simplex(simplex_id)?;
        let cols: Vec<_> = s.vertex_ids.iter().map(|&i| self.vertices[i].clone()).collect();
        Ok(DMatrix::from_columns(&cols))
    }

    /// Ids of simplices having both `u` and `w` among their vertices.
    pub fn simplices_with_pair(&self, u: usize, w: usize) -> impl Iterator<Item = usize> + '_ {
        self.simplices
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.vertex_ids.contains(&u) && s.vertex_ids.contains(&w))
            .map(|(i, _)| i)
    }

    /// JSON dump of the vertex pool and simplex index tuples.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "vertices": self.vertices.iter().map(|v| v.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "simplices": self.simplices.iter().map(|s| s.vertex_ids.clone()).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coords(p: &SimplicialPartition, id: usize) -> Vec<f64> {
        p.vertex(id).iter().copied().collect()
    }

    #[test]
    fn initial_shapes() {
        let p = initial_partition(2).unwrap();
        assert_eq!(p.vertex_count(), 2);
        assert_eq!(p.simplex_count(), 1);
        assert_eq!(coords(&p, 0), vec![1.0, 0.0]);
        assert!((p.diameter(0).unwrap() - 2f64.sqrt()).abs() < 1e-15);

        let p = initial_partition(4).unwrap();
        assert_eq!(p.vertex_count(), 4);
        assert_eq!(p.simplex_count(), 1);

        let p = initial_partition(1).unwrap();
        assert_eq!(p.vertex_count(), 1);
        assert_eq!(coords(&p, 0), vec![1.0]);
        assert_eq!(p.diameter(0).unwrap(), 0.0);

        assert!(initial_partition(0).is_err());
    }

    #[test]
    fn bisect_segment_twice() {
        let mut p = initial_partition(2).unwrap();
        let (a, b) = p.bisect(0).unwrap();
        assert_eq!(p.vertex_count(), 3);
        assert_eq!(coords(&p, 2), vec![0.5, 0.5]);
        assert!((p.diameter(a).unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((p.diameter(b).unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);
        p.bisect(a).unwrap();
        p.bisect(b).unwrap();
        let mut found: Vec<Vec<f64>> = (3..5).map(|i| coords(&p, i)).collect();
        found.sort_by(|x, y| x[0].partial_cmp(&y[0]).unwrap());
        assert_eq!(found, vec![vec![0.25, 0.75], vec![0.75, 0.25]]);
    }

    #[test]
    fn triangle_tie_rule_picks_lowest_pair() {
        // all three edges have length sqrt(2); (0, 1) is the lowest pair
        let mut p = initial_partition(3).unwrap();
        assert_eq!(p.longest_edge_of(0).unwrap(), Some((0, 1)));
        p.bisect(0).unwrap();
        assert_eq!(coords(&p, 3), vec![0.5, 0.5, 0.0]);
        assert!((p.diameter(0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unknown_simplex() {
        let mut p = initial_partition(3).unwrap();
        assert!(matches!(p.bisect(5), Err(Error::UnknownSimplex(5))));
        assert!(matches!(p.diameter(1), Err(Error::UnknownSimplex(1))));
        let mut one = initial_partition(1).unwrap();
        assert!(one.bisect(0).is_err());
    }

    #[test]
    fn shared_midpoints_are_deduplicated() {
        let mut p = initial_partition(3).unwrap();
        // split everything a few times; shared edges must reuse vertices
        for _ in 0..30 {
            let id = p.max_diameter_simplex();
            p.bisect(id).unwrap();
        }
        let vs = p.vertices();
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                assert!((&vs[i] - &vs[j]).amax() > VERTEX_TOL);
            }
        }
    }

    fn check_cover(p: &SimplicialPartition, rng: &mut ChaCha8Rng) {
        let n = p.n();
        let total: f64 = (0..p.simplex_count())
            .map(|i| p.relative_volume(i).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "volume {total}");
        for _ in 0..200 {
            // random interior point of the simplex
            let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = raw.iter().sum();
            let x = DVector::from_iterator(n, raw.into_iter().map(|r| r / s));
            let hits = (0..p.simplex_count())
                .filter(|&i| p.barycentric(i, &x).unwrap().iter().all(|&l| l >= -1e-12))
                .count();
            // a random point lands on a shared face with probability zero
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn bisection_keeps_a_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=4 {
            let mut p = initial_partition(n).unwrap();
            for _ in 0..25 {
                let id = rng.random_range(0..p.simplex_count());
                let before = p.diameter(id).unwrap();
                let edge = p.longest_edge_of(id).unwrap().unwrap();
                let edge_len = (p.vertex(edge.0) - p.vertex(edge.1)).norm();
                let (a, b) = p.bisect(id).unwrap();
                assert!(p.diameter(a).unwrap() <= before + 1e-15);
                assert!(p.diameter(b).unwrap() <= before + 1e-15);
                let midpoint = (p.vertex(edge.0) + p.vertex(edge.1)) * 0.5;
                let shared: Vec<usize> = p.simplex(a).unwrap().vertex_ids.iter().copied()
                    .filter(|v| p.simplex(b).unwrap().vertex_ids.contains(v))
                    .collect();
                let mid = shared.into_iter().find(|&v| (p.vertex(v) - &midpoint).amax() < 1e-15).unwrap();
                let half = (p.vertex(mid) - p.vertex(edge.0)).norm();
                assert!((half - edge_len / 2.0).abs() < 1e-14);
            }
            check_cover(&p, &mut rng);
        }
    }

    #[test]
    fn uniform_refinement_shrinks_diameter() {
        let mut p = initial_partition(3).unwrap();
        let mut last = p.diameter(p.max_diameter_simplex()).unwrap();
        let mut strictly_decreased = 0;
        for _ in 0..20 {
            let id = p.max_diameter_simplex();
            p.bisect(id).unwrap();
            let now = p.diameter(p.max_diameter_simplex()).unwrap();
            assert!(now <= last);
            if now < last {
                strictly_decreased += 1;
            }
            last = now;
        }
        assert!(strictly_decreased >= 2);
        assert!(last < 2f64.sqrt());
    }

    #[test]
    fn json_dump_lists_tuples() {
        let mut p = initial_partition(2).unwrap();
        p.bisect(0).unwrap();
        let j = p.to_json();
        assert_eq!(j["simplices"].as_array().unwrap().len(), 2);
        assert_eq!(j["vertices"][2], serde_json::json!([0.5, 0.5]));
    }
}
