use std::path::Path;

use sbmq::graph::load_edge_list;
use sbmq::spectral::{modularity_eigs, nb_eigs};

fn counts(name: &str) -> (usize, usize) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.txt"));
    let g = load_edge_list(&path).unwrap();
    let k = (g.n() / 2).min(30);
    let m = modularity_eigs(&g, 1.0, k).unwrap();
    let b = nb_eigs(&g, k).unwrap();
    assert!(m.q_star <= m.k_requested && b.q_star <= b.k_requested);
    assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    assert!(b.band_edge >= 0.0);
    (m.q_star, b.q_star)
}

#[test]
fn karate() {
    assert_eq!(counts("karate"), (1, 2));
}

#[test]
fn football() {
    assert_eq!(counts("football"), (10, 10));
}

#[test]
fn les_miserables() {
    assert_eq!(counts("lesmis"), (2, 4));
}
