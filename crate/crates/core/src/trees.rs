//! Rooted plane trees whose internal vertices have at least two children.

use std::fmt;

use crate::transforms::Transform;
use crate::{Error, Result, C64};

/// Largest leaf count accepted by [`enumerate`].
pub const MAX_LEAVES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PlaneTree {
    Leaf,
    Node(Vec<PlaneTree>),
}

impl PlaneTree {
    pub fn leaf_count(&self) -> usize {
        match self {
            PlaneTree::Leaf => 1,
            PlaneTree::Node(ch) => ch.iter().map(PlaneTree::leaf_count).sum(),
        }
    }

    /// Number of internal vertices, `|V(T)|`.
    pub fn vertex_count(&self) -> usize {
        match self {
            PlaneTree::Leaf => 0,
            PlaneTree::Node(ch) => 1 + ch.iter().map(PlaneTree::vertex_count).sum::<usize>(),
        }
    }

    /// True when every internal vertex has at least two children.
    pub fn is_valid(&self) -> bool {
        match self {
            PlaneTree::Leaf => true,
            PlaneTree::Node(ch) => ch.len() >= 2 && ch.iter().all(PlaneTree::is_valid),
        }
    }

    /// Cherry on two leaves.
    pub fn cherry() -> Self {
        PlaneTree::Node(vec![PlaneTree::Leaf, PlaneTree::Leaf])
    }

    /// Parses the bracket encoding produced by `Display`, e.g. `[[x,x],x]`.
    pub fn parse(text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let tree = parse_at(&chars, &mut pos)?;
        if pos != chars.len() || !tree.is_valid() {
            return Err(Error::Invalid(format!("bad tree encoding: {text}")));
        }
        Ok(tree)
    }
}

fn parse_at(chars: &[char], pos: &mut usize) -> Result<PlaneTree> {
    let bad = || Error::Invalid("bad tree encoding".into());
    match chars.get(*pos) {
        Some('x') => {
            *pos += 1;
            Ok(PlaneTree::Leaf)
        }
        Some('[') => {
            *pos += 1;
            let mut children = vec![parse_at(chars, pos)?];
            loop {
                match chars.get(*pos) {
                    Some(',') => {
                        *pos += 1;
                        children.push(parse_at(chars, pos)?);
                    }
                    Some(']') => {
                        *pos += 1;
                        return Ok(PlaneTree::Node(children));
                    }
                    _ => return Err(bad()),
                }
            }
        }
        _ => Err(bad()),
    }
}

impl fmt::Display for PlaneTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaneTree::Leaf => write!(f, "x"),
            PlaneTree::Node(ch) => {
                write!(f, "[")?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Compositions of `n` into `k` positive parts, in lexicographic order.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(rest: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if rest < k {
            return;
        }
        for first in 1..=rest - (k - 1) {
            cur.push(first);
            rec(rest - first, k - 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, &mut cur, &mut out);
    out
}

/// All plane trees with `n_leaves` leaves, ordered by the number of root
/// children and then lexicographically on the children.
pub fn enumerate(n_leaves: usize) -> Result<Vec<PlaneTree>> {
    if n_leaves == 0 || n_leaves > MAX_LEAVES {
        return Err(Error::Invalid(format!(
            "leaf count must lie in 1..={MAX_LEAVES}, got {n_leaves}"
        )));
    }
    let mut table: Vec<Vec<PlaneTree>> = vec![Vec::new(), vec![PlaneTree::Leaf]];
    for n in 2..=n_leaves {
        let mut trees = Vec::new();
        for k in 2..=n {
            for parts in compositions(n, k) {
                let mut partial: Vec<Vec<PlaneTree>> = vec![Vec::new()];
                for &p in &parts {
                    let mut next = Vec::with_capacity(partial.len() * table[p].len());
                    for prefix in &partial {
                        for t in &table[p] {
                            let mut v = prefix.clone();
                            v.push(t.clone());
                            next.push(v);
                        }
                    }
                    partial = next;
                }
                trees.extend(partial.into_iter().map(PlaneTree::Node));
            }
        }
        table.push(trees);
    }
    Ok(table.swap_remove(n_leaves))
}

/// Number of trees with `n` leaves, from the composition recursion alone.
pub fn count(n: usize) -> u64 {
    let mut c = vec![0u64; n.max(1) + 1];
    c[1] = 1;
    for m in 2..=n {
        // d[j][s]: ordered sequences of j trees with s leaves in total
        let mut total = 0u64;
        let mut d = vec![0u64; m + 1];
        d[0] = 1;
        for j in 1..=m {
            let mut nd = vec![0u64; m + 1];
            for s in 0..=m {
                if d[s] == 0 {
                    continue;
                }
                for p in 1..=m - s {
                    nd[s + p] += d[s] * c[p];
                }
            }
            d = nd;
            if j >= 2 {
                total += d[m];
            }
        }
        c[m] = total;
    }
    c[n]
}

/// `F_T(z) = ∏_v F_{m(v)}(s_{e_1}, …, s_{e_m})`, where `s_e` sums the
/// entries of `z` under the edge `e`.
pub fn tree_weight(tree: &PlaneTree, f: &Transform, z: &[C64]) -> Result<C64> {
    if tree.leaf_count() != z.len() {
        return Err(Error::Invalid(format!(
            "tree has {} leaves, tuple has {} entries",
            tree.leaf_count(),
            z.len()
        )));
    }
    let mut pos = 0;
    weight_at(tree, f, z, &mut pos).map(|(_, w)| w)
}

fn weight_at(tree: &PlaneTree, f: &Transform, z: &[C64], pos: &mut usize) -> Result<(C64, C64)> {
    match tree {
        PlaneTree::Leaf => {
            let v = z[*pos];
            *pos += 1;
            Ok((v, C64::new(1.0, 0.0)))
        }
        PlaneTree::Node(ch) => {
            let mut sums = Vec::with_capacity(ch.len());
            let mut w = C64::new(1.0, 0.0);
            for c in ch {
                let (s, cw) = weight_at(c, f, z, pos)?;
                sums.push(s);
                w *= cw;
            }
            if w == C64::new(0.0, 0.0) {
                return Ok((sums.iter().sum(), w));
            }
            let own = f.eval(&sums)?;
            Ok((sums.iter().sum(), w * own))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schroeder_counts() {
        let expected = [1u64, 1, 3, 11, 45, 197, 903, 4279];
        for (i, &e) in expected.iter().enumerate() {
            let n = i + 1;
            assert_eq!(enumerate(n).unwrap().len() as u64, e, "n = {n}");
            assert_eq!(count(n), e, "n = {n}");
        }
    }

    #[test]
    fn three_leaf_trees_in_canonical_order() {
        let names: Vec<String> = enumerate(3).unwrap().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["[x,[x,x]]", "[[x,x],x]", "[x,x,x]"]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(enumerate(0).is_err());
        assert!(enumerate(MAX_LEAVES + 1).is_err());
    }

    #[test]
    fn vertex_counts() {
        let t = PlaneTree::parse("[[x,x],x]").unwrap();
        assert_eq!(t.vertex_count(), 2);
        assert_eq!(t.leaf_count(), 3);
        assert_eq!(PlaneTree::Leaf.vertex_count(), 0);
    }

    #[test]
    fn parse_rejects_unary_nodes() {
        assert!(PlaneTree::parse("[x]").is_err());
        assert!(PlaneTree::parse("[x,x").is_err());
    }

    #[test]
    fn weight_of_left_caterpillar() {
        // F_m(w) = product of the arguments times m
        let f = Transform::new(
            "prod",
            false,
            |w: &[C64]| Ok(w.iter().product::<C64>() * w.len() as f64),
        );
        let z = [C64::new(1.0, 1.0), C64::new(2.0, 0.0), C64::new(0.0, -3.0)];
        let t = PlaneTree::parse("[[x,x],x]").unwrap();
        let got = tree_weight(&t, &f, &z).unwrap();
        let expect = (z[0] + z[1]) * z[2] * 2.0 * (z[0] * z[1] * 2.0);
        assert!((got - expect).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn enumerated_trees_are_valid_and_distinct(n in 1usize..=7) {
            let trees = enumerate(n).unwrap();
            let mut seen = std::collections::HashSet::new();
            for t in &trees {
                prop_assert!(t.is_valid());
                prop_assert_eq!(t.leaf_count(), n);
                prop_assert!(seen.insert(t.clone()));
                prop_assert_eq!(&PlaneTree::parse(&t.to_string()).unwrap(), t);
            }
        }
    }
}
