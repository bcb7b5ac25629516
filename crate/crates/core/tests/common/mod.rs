#![allow(dead_code)]

use haxc::hierarchy::{params, HierarchyTree, NodeRecord};
use haxc::validation::SampleMatrix;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Central mixed difference of `f` over the coordinates in `idx` with step
/// `h`, refined by one Richardson step.
pub fn mixed_fd<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], idx: &[usize], h: f64) -> f64 {
    let raw = |h: f64| {
        let m = idx.len();
        let mut total = 0.0;
        for signs in 0u32..(1 << m) {
            let mut y = x.to_vec();
            let mut s = 1.0;
            for (b, &i) in idx.iter().enumerate() {
                if signs >> b & 1 == 1 {
                    y[i] += h;
                } else {
                    y[i] -= h;
                    s = -s;
                }
            }
            total += s * f(&y);
        }
        total / (2.0 * h).powi(m as i32)
    };
    (4.0 * raw(h / 2.0) - raw(h)) / 3.0
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn matrix(rows: &[Vec<f64>]) -> SampleMatrix {
    SampleMatrix::new(rows).expect("sample in [0,1]")
}

pub fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// The seven-leaf, four-level tree used as the running example of
/// hierarchical generators: leaves 1..7 hang below
/// root → {n1 → 1}, {n2 → n21 → 2, n2 → n22 → 3}, {n3 → n31 → 4, n3 → n32 → {n321 → 5, n322 → 6, n323 → 7}}.
pub fn seven_leaf_tree() -> HierarchyTree {
    let edges: &[(&str, Option<&str>)] = &[
        ("n0", None),
        ("n1", Some("n0")),
        ("w1", Some("n1")),
        ("n2", Some("n0")),
        ("n21", Some("n2")),
        ("w2", Some("n21")),
        ("n22", Some("n2")),
        ("w3", Some("n22")),
        ("n3", Some("n0")),
        ("n31", Some("n3")),
        ("w4", Some("n31")),
        ("n32", Some("n3")),
        ("n321", Some("n32")),
        ("w5", Some("n321")),
        ("n322", Some("n32")),
        ("w6", Some("n322")),
        ("n323", Some("n32")),
        ("w7", Some("n323")),
    ];
    let nodes = edges.iter().map(|(id, p)| NodeRecord::new(*id, *p, Default::default())).collect();
    let leaves = (1..=7).map(|i| format!("w{i}")).collect();
    HierarchyTree::new(nodes, leaves).unwrap()
}

/// Two-level nested Gumbel tree with α at the root and per sector.
pub fn two_level_alpha_tree(root: f64, sectors: &[(usize, f64)]) -> HierarchyTree {
    let sizes: Vec<usize> = sectors.iter().map(|s| s.0).collect();
    let sp: Vec<_> = sectors.iter().map(|s| params(&[("alpha", s.1)])).collect();
    HierarchyTree::two_level(&sizes, params(&[("alpha", root)]), &sp).unwrap()
}

/// Three-level nested Gumbel tree: root α0 over
/// {a: α1 over leaves 1,2} and {b: α2 over {c: α3 over leaves 3,4}, leaf 5}.
pub fn three_level_alpha_tree(a0: f64, a1: f64, a2: f64, a3: f64) -> HierarchyTree {
    let nodes = vec![
        NodeRecord::new("root", None, params(&[("alpha", a0)])),
        NodeRecord::new("a", Some("root"), params(&[("alpha", a1)])),
        NodeRecord::new("x1", Some("a"), Default::default()),
        NodeRecord::new("x2", Some("a"), Default::default()),
        NodeRecord::new("b", Some("root"), params(&[("alpha", a2)])),
        NodeRecord::new("c", Some("b"), params(&[("alpha", a3)])),
        NodeRecord::new("x3", Some("c"), Default::default()),
        NodeRecord::new("x4", Some("c"), Default::default()),
        NodeRecord::new("x5", Some("b"), Default::default()),
    ];
    let leaves = (1..=5).map(|i| format!("x{i}")).collect();
    HierarchyTree::new(nodes, leaves).unwrap()
}

/// Gumbel stdf ℓ_α in closed form.
pub fn gumbel_l(alpha: f64, x: &[f64]) -> f64 {
    x.iter().map(|v| v.powf(1.0 / alpha)).sum::<f64>().powf(alpha)
}
