use cpsignal::partition::{initial_partition, SimplicialPartition};
use proptest::prelude::*;

fn total_volume(p: &SimplicialPartition) -> f64 {
    (0..p.simplex_count()).map(|i| p.relative_volume(i).unwrap()).sum()
}

fn min_vertex_gap(p: &SimplicialPartition) -> f64 {
    let v = p.vertices();
    let mut gap = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            gap = gap.min((&v[i] - &v[j]).amax());
        }
    }
    gap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Each step either bisects a simplex's longest edge or splits an
    /// arbitrary edge of it.
    #[test]
    fn refinement_keeps_a_partition(n in 2usize..=5, steps in prop::collection::vec((any::<u16>(), any::<u16>(), any::<u16>(), any::<bool>()), 1..25)) {
        let mut p = initial_partition(n).unwrap();
        for (s, a, b, longest) in steps {
            let id = s as usize % p.simplex_count();
            let parent = p.simplices()[id].clone();
            let (lo, hi) = if longest {
                p.longest_edge_of(id).unwrap().unwrap()
            } else {
                let ids = &parent.vertex_ids;
                let i = a as usize % n;
                let j = (i + 1 + b as usize % (n - 1)) % n;
                (ids[i].min(ids[j]), ids[i].max(ids[j]))
            };
            let edge = (p.vertex(lo) - p.vertex(hi)).norm();
            let (c1, c2) = if longest { p.bisect(id).unwrap() } else { p.bisect_edge(id, lo, hi).unwrap() };
            for c in [c1, c2] {
                prop_assert!(p.diameter(c).unwrap() <= parent.diameter() + 1e-12);
                let ids = &p.simplices()[c].vertex_ids;
                prop_assert!(ids.contains(&lo) != ids.contains(&hi));
            }
            // the new vertex sits halfway along the split edge
            let shared: Vec<usize> = p.simplices()[c1].vertex_ids.iter().copied()
                .filter(|v| p.simplices()[c2].vertex_ids.contains(v) && !parent.vertex_ids.contains(v))
                .collect();
            prop_assert_eq!(shared.len(), 1);
            let half = (p.vertex(shared[0]) - p.vertex(lo)).norm();
            prop_assert!((half - edge / 2.0).abs() <= 1e-12);
        }
        prop_assert!((total_volume(&p) - 1.0).abs() <= 1e-9);
        prop_assert!(min_vertex_gap(&p) > 1e-12);
    }
}

#[test]
fn uniform_bisection_shrinks_the_diameter() {
    let mut p = initial_partition(3).unwrap();
    let max_diameter = |p: &SimplicialPartition| p.diameter(p.max_diameter_simplex()).unwrap();
    let start = max_diameter(&p);
    let mut prev = start;
    for _ in 0..20 {
        p.bisect(p.max_diameter_simplex()).unwrap();
        let d = max_diameter(&p);
        assert!(d <= prev + 1e-15);
        prev = d;
    }
    assert!(prev < start);
    for _ in 0..200 {
        p.bisect(p.max_diameter_simplex()).unwrap();
    }
    assert!(max_diameter(&p) < 0.25 * start);
    assert!((total_volume(&p) - 1.0).abs() <= 1e-9);
}
