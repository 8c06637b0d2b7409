use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::Dag;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Dir {
    /// Arrived from a child, moving against the arc.
    Up,
    /// Arrived from a parent, moving along the arc.
    Down,
}

/// Is every trail between `x` and `y` blocked by `z`?
///
/// Reachability over (node, direction) pairs: a trail may pass a
/// non-collider outside `z`, and a collider that is in `z` or has a
/// descendant in `z`.
pub fn is_d_separated(dag: &Dag, x: &[usize], y: &[usize], z: &[usize]) -> Result<bool> {
    let n = dag.len();
    let xs: BTreeSet<usize> = x.iter().copied().collect();
    let ys: BTreeSet<usize> = y.iter().copied().collect();
    let zs: BTreeSet<usize> = z.iter().copied().collect();
    if xs.iter().chain(&ys).chain(&zs).any(|&v| v >= n) {
        return Err(Error::contract("d-separation query references an unknown node"));
    }
    if !xs.is_disjoint(&ys) || !xs.is_disjoint(&zs) || !ys.is_disjoint(&zs) {
        return Err(Error::contract("d-separation sets must be disjoint"));
    }

    let in_z = |v: usize| zs.contains(&v);
    let z_ancestors = dag.ancestral_closure(zs.iter().copied());

    let mut visited = BTreeSet::new();
    let mut queue: VecDeque<(usize, Dir)> = xs.iter().map(|&v| (v, Dir::Up)).collect();
    while let Some((v, dir)) = queue.pop_front() {
        if !visited.insert((v, dir)) {
            continue;
        }
        if !in_z(v) && ys.contains(&v) {
            return Ok(false);
        }
        match dir {
            Dir::Up if !in_z(v) => {
                queue.extend(dag.parents(v).iter().map(|&p| (p, Dir::Up)));
                queue.extend(dag.children(v).iter().map(|&c| (c, Dir::Down)));
            }
            Dir::Up => {}
            Dir::Down => {
                if !in_z(v) {
                    queue.extend(dag.children(v).iter().map(|&c| (c, Dir::Down)));
                }
                if z_ancestors[v] {
                    queue.extend(dag.parents(v).iter().map(|&p| (p, Dir::Up)));
                }
            }
        }
    }
    Ok(true)
}
