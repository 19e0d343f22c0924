use std::collections::VecDeque;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rpfit::adapt::propagate_orders;
use rpfit::fem::DofMap;
use rpfit::io::{perturb_interior, unit_square, MeshFile};
use rpfit::linalg::Mat2;
use rpfit::tmop::QualityMetric;

fn grid_neighbors(n: usize) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); n * n];
    for j in 0..n {
        for i in 0..n {
            let e = j * n + i;
            if i > 0 {
                nb[e].push(e - 1);
            }
            if i + 1 < n {
                nb[e].push(e + 1);
            }
            if j > 0 {
                nb[e].push(e - n);
            }
            if j + 1 < n {
                nb[e].push(e + n);
            }
        }
    }
    nb
}

fn bfs(nb: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; nb.len()];
    d[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(e) = q.pop_front() {
        for &f in &nb[e] {
            if d[f] == usize::MAX {
                d[f] = d[e] + 1;
                q.push_back(f);
            }
        }
    }
    d
}

fn rotation(t: f64) -> Mat2<f64> {
    Mat2::new(t.cos(), -t.sin(), t.sin(), t.cos())
}

fn jacobian() -> impl Strategy<Value = Mat2<f64>> {
    (0.2f64..3.0, 0.2f64..3.0, -1.0f64..1.0, -3.2f64..3.2)
        .prop_map(|(a, d, s, r)| rotation(r).matmul(&Mat2::new(a, s, 0.0, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagation_matches_distance_formula(n in 2usize..7, dp in 1usize..3, seed in any::<u64>()) {
        let nb = grid_neighbors(n);
        let mut state = seed;
        let orders: Vec<usize> = (0..n * n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                1 + (state >> 60) as usize % 5
            })
            .collect();
        let p = propagate_orders(&orders, &nb, dp);
        let dist: Vec<Vec<usize>> = (0..n * n).map(|s| bfs(&nb, s)).collect();
        for e in 0..n * n {
            let expect = (0..n * n)
                .map(|f| orders[f].saturating_sub(dp * dist[f][e]))
                .fold(orders[e], usize::max);
            prop_assert_eq!(p[e], expect);
            for &f in &nb[e] {
                prop_assert!(p[e].abs_diff(p[f]) <= dp);
            }
        }
        prop_assert_eq!(propagate_orders(&p, &nb, dp), p);
    }

    #[test]
    fn shape_metric_ignores_rotation_and_scale(m in jacobian(), r in -3.2f64..3.2, s in 0.1f64..10.0) {
        let mu = QualityMetric::<f64>::Shape2;
        let base = mu.value(&m);
        prop_assert!(base >= -1e-14);
        let moved = mu.value(&rotation(r).matmul(&m).scale(s));
        prop_assert!((moved - base).abs() <= 1e-10 * (1.0 + base));
    }

    #[test]
    fn size_metric_ignores_rotation(m in jacobian(), r in -3.2f64..3.2) {
        for mu in [QualityMetric::<f64>::Size77, QualityMetric::ShapeSize80 { gamma: 0.4 }] {
            let base = mu.value(&m);
            prop_assert!(base >= -1e-14);
            let moved = mu.value(&rotation(r).matmul(&m));
            prop_assert!((moved - base).abs() <= 1e-10 * (1.0 + base));
        }
    }

    #[test]
    fn metrics_vanish_at_identity_multiples(r in -3.2f64..3.2) {
        let q = rotation(r);
        for mu in [QualityMetric::<f64>::Shape2, QualityMetric::Size77, QualityMetric::ShapeSize80 { gamma: 0.7 }] {
            prop_assert!(mu.value(&q).abs() < 1e-12);
        }
        prop_assert!(QualityMetric::<f64>::Shape2.value(&q.scale(2.5)).abs() < 1e-12);
    }

    #[test]
    fn uniform_dof_count(n in 1usize..6, p in 1usize..5, split in any::<bool>()) {
        let mesh = unit_square::<f64>(n, n, p, split).unwrap();
        // P_p on the split grid and Q_p on the quad grid share the same lattice
        prop_assert_eq!(mesh.dof_count(), (n * p + 1) * (n * p + 1));
        prop_assert_eq!(DofMap::new(&mesh).unwrap().num_global, mesh.dof_count());
    }

    #[test]
    fn mixed_dof_count_matches_dof_map(seed in any::<u64>(), split in any::<bool>()) {
        let mut mesh = unit_square::<f64>(4, 4, 1, split).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orders: Vec<usize> = (0..mesh.num_elements()).map(|_| rand::Rng::gen_range(&mut rng, 1..=4)).collect();
        mesh.set_orders(&orders).unwrap();
        prop_assert_eq!(DofMap::new(&mesh).unwrap().num_global, mesh.dof_count());
    }

    #[test]
    fn meshfile_round_trip(seed in any::<u64>(), split in any::<bool>(), p in 1usize..4) {
        let mut mesh = unit_square::<f64>(3, 2, p, split).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        perturb_interior(&mut mesh, 0.2, &mut rng).unwrap();
        let text = MeshFile::new(mesh.clone()).to_text();
        let back = MeshFile::parse(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
        for (a, b) in mesh.elements.iter().zip(&back.mesh.elements) {
            prop_assert_eq!(&a.nodes, &b.nodes);
            prop_assert_eq!(a.order, b.order);
        }
    }
}
