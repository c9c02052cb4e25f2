//! Zhang-Suen thinning and skeleton topology helpers.

use super::grid::GridImage;

/// Neighbor offsets in Zhang-Suen order P2..P9: N, NE, E, SE, S, SW, W, NW.
const RING: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn ring_bits(img: &GridImage, u: i64, v: i64) -> [bool; 8] {
    let mut n = [false; 8];
    for (k, (du, dv)) in RING.iter().enumerate() {
        n[k] = img.get_i(u + du, v + dv);
    }
    n
}

/// Number of 0 -> 1 transitions around the 8-neighborhood.
pub fn crossing_number(img: &GridImage, u: i64, v: i64) -> usize {
    let n = ring_bits(img, u, v);
    (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count()
}

/// Number of set 8-neighbors.
pub fn neighbor_count(img: &GridImage, u: i64, v: i64) -> usize {
    ring_bits(img, u, v).iter().filter(|&&b| b).count()
}

/// A skeleton pixel where three or more curves meet.
pub fn is_junction(img: &GridImage, u: i64, v: i64) -> bool {
    img.get_i(u, v) && neighbor_count(img, u, v) >= 3 && crossing_number(img, u, v) >= 3
}

/// A skeleton pixel terminating a curve.
pub fn is_endpoint(img: &GridImage, u: i64, v: i64) -> bool {
    img.get_i(u, v) && {
        let b = neighbor_count(img, u, v);
        b == 1 || (b == 2 && crossing_number(img, u, v) == 1)
    }
}

fn zs_deletable(n: &[bool; 8], first_pass: bool) -> bool {
    let b = n.iter().filter(|&&x| x).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
    if first_pass {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// 8-connectivity Yokoi number; 1 means removing the pixel keeps topology.
fn yokoi8(n: &[bool; 8]) -> i32 {
    // counter-clockwise from east: E, NE, N, NW, W, SW, S, SE
    let x = [n[2], n[1], n[0], n[7], n[6], n[5], n[4], n[3]];
    let c = |k: usize| !x[k % 8] as i32;
    [0usize, 2, 4, 6]
        .iter()
        .map(|&k| c(k) - c(k) * c(k + 1) * c(k + 2))
        .sum()
}

fn in_full_block(img: &GridImage, u: i64, v: i64) -> bool {
    [(-1, -1), (0, -1), (-1, 0), (0, 0)].iter().any(|&(ou, ov)| {
        let (a, b) = (u + ou, v + ov);
        img.get_i(a, b) && img.get_i(a + 1, b) && img.get_i(a, b + 1) && img.get_i(a + 1, b + 1)
    })
}

/// Thins a filled binary region to one-pixel-wide curves.
///
/// Runs the two Zhang-Suen sub-iterations until stable, then removes the few
/// remaining pixels of fully set 2x2 blocks whenever that does not change
/// 8-connectivity.
pub fn skeletonize(img: &GridImage) -> GridImage {
    let mut out = img.clone();
    let side = out.side() as i64;
    let idx = |u: i64, v: i64| (v * side + u) as usize;

    let mut stamp = vec![0u32; (side * side) as usize];
    let mut generation = 1u32;
    let mut candidates: Vec<(i64, i64)> = out
        .iter_set()
        .map(|(u, v)| (u as i64, v as i64))
        .filter(|&(u, v)| ring_bits(&out, u, v).iter().any(|&b| !b))
        .collect();

    let mut first_pass = true;
    let mut idle_passes = 0;
    while idle_passes < 2 && !candidates.is_empty() {
        let deleted: Vec<(i64, i64)> = candidates
            .iter()
            .copied()
            .filter(|&(u, v)| out.get_i(u, v) && zs_deletable(&ring_bits(&out, u, v), first_pass))
            .collect();
        for &(u, v) in &deleted {
            out.set(u as usize, v as usize, false);
        }
        idle_passes = if deleted.is_empty() { idle_passes + 1 } else { 0 };

        generation += 1;
        let mut next = Vec::with_capacity(candidates.len());
        let mut push = |u: i64, v: i64, next: &mut Vec<(i64, i64)>| {
            if out.get_i(u, v) && stamp[idx(u, v)] != generation {
                stamp[idx(u, v)] = generation;
                next.push((u, v));
            }
        };
        for &(u, v) in &candidates {
            push(u, v, &mut next);
        }
        for &(u, v) in &deleted {
            for (du, dv) in RING {
                push(u + du, v + dv, &mut next);
            }
        }
        candidates = next;
        first_pass = !first_pass;
    }

    // residual 2x2 blocks
    loop {
        let mut changed = false;
        for v in 0..side {
            for u in 0..side {
                if !out.get_i(u, v) || !in_full_block(&out, u, v) {
                    continue;
                }
                let n = ring_bits(&out, u, v);
                let b = n.iter().filter(|&&x| x).count();
                if b >= 2 && yokoi8(&n) == 1 {
                    out.set(u as usize, v as usize, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    out
}

/// Removes skeleton branches that run from an endpoint to a junction (or to
/// another endpoint) in fewer than `max_len_px` pixels.
pub fn prune_spurs(img: &GridImage, max_len_px: usize) -> GridImage {
    if max_len_px == 0 {
        return img.clone();
    }
    let mut out = img.clone();
    let mut doomed: Vec<(i64, i64)> = Vec::new();
    let endpoints: Vec<(i64, i64)> = img
        .iter_set()
        .map(|(u, v)| (u as i64, v as i64))
        .filter(|&(u, v)| is_endpoint(img, u, v))
        .collect();

    for start in endpoints {
        let mut path = vec![start];
        let mut on_path = std::collections::HashSet::from([start]);
        let mut cur = start;
        let short = loop {
            if path.len() >= max_len_px {
                break false;
            }
            let open: Vec<(i64, i64)> = RING
                .iter()
                .map(|(du, dv)| (cur.0 + du, cur.1 + dv))
                .filter(|p| img.get_i(p.0, p.1) && !on_path.contains(p))
                .collect();
            let next = match open.as_slice() {
                [] => break true,
                [p] => *p,
                [a, b] if (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1 => {
                    // staircase corner: step orthogonally first
                    if a.0 == cur.0 || a.1 == cur.1 {
                        *a
                    } else {
                        *b
                    }
                }
                _ => {
                    // cur itself branches
                    path.pop();
                    break true;
                }
            };
            if is_junction(img, next.0, next.1) {
                break true;
            }
            path.push(next);
            on_path.insert(next);
            cur = next;
        };
        if short {
            doomed.extend(path);
        }
    }
    for (u, v) in doomed {
        out.set(u as usize, v as usize, false);
    }
    out
}
