//! Local refinement: beam search over a fine grid around each coarse contact.

use rayon::prelude::*;

use crate::geom::Vec3;
use crate::params::GpParams;
use crate::volume::Volume3;

/// Grid offsets `phi_q * (x, y, z)` with `x, y, z` in `-phi_r..=phi_r`, x fastest.
pub fn grid_offsets(p: &GpParams) -> Vec<Vec3> {
    let r = p.phi_r as i64;
    let mut out = Vec::with_capacity(p.refinement_grid_size());
    for z in -r..=r {
        for y in -r..=r {
            for x in -r..=r {
                out.push(Vec3::new(x as f64, y as f64, z as f64) * p.phi_q);
            }
        }
    }
    out
}

/// Refines `coarse` (basal-first, with matching `spacings`) and returns the
/// lowest-cost refined sequence and its cost.
pub fn refine_path(
    coarse: &[Vec3],
    spacings: &[f64],
    smoothed: &Volume3,
    blob: &Volume3,
    p: &GpParams,
) -> (Vec<Vec3>, f64) {
    let offsets = grid_offsets(p);
    let cands: Vec<Vec<Vec3>> = coarse.iter().map(|c| offsets.iter().map(|o| c + o).collect()).collect();
    let unary: Vec<Vec<f64>> = cands
        .iter()
        .map(|cs| cs.iter().map(|c| -(p.phi_i * smoothed.sample(c) + p.phi_b * blob.sample(c))).collect())
        .collect();
    // beam entries: (cost, lexicographic rank of the sequence, candidate, parent entry)
    let mut steps: Vec<Vec<(f64, usize, usize, usize)>> = Vec::with_capacity(coarse.len());
    let mut first: Vec<(f64, usize, usize, usize)> =
        unary[0].iter().enumerate().map(|(c, &u)| (u, c, c, usize::MAX)).collect();
    let cmp = |a: &(f64, usize, usize, usize), b: &(f64, usize, usize, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    first.sort_by(cmp);
    first.truncate(p.eta_max2);
    steps.push(first);
    for i in 1..coarse.len() {
        let prev = steps.last().unwrap();
        // lexicographic order of the surviving sequences
        let mut order: Vec<usize> = (0..prev.len()).collect();
        order.sort_by_key(|&e| prev[e].1);
        let mut lex = vec![0usize; prev.len()];
        for (r, &e) in order.iter().enumerate() {
            lex[e] = r;
        }
        let d = spacings[i - 1];
        let ncand = cands[i].len();
        let mut children: Vec<(f64, usize, usize, usize)> = prev
            .par_iter()
            .enumerate()
            .flat_map_iter(|(e, &(cost, _, pc, _))| {
                let from = cands[i - 1][pc];
                let cands = &cands;
                let unary = &unary;
                let lex = &lex;
                (0..ncand).map(move |c| {
                    let dist = (cands[i][c] - from).norm();
                    let w = if dist < d { p.phi_d1 } else { p.phi_d2 };
                    (cost + unary[i][c] + (dist - d).abs() * w, lex[e] * ncand + c, c, e)
                })
            })
            .collect();
        if children.len() > p.eta_max2 {
            children.select_nth_unstable_by(p.eta_max2 - 1, cmp);
            children.truncate(p.eta_max2);
        }
        children.sort_by(cmp);
        steps.push(children);
    }
    let (cost, _, mut c, mut e) = steps.last().unwrap()[0];
    let mut out = vec![Vec3::zeros(); coarse.len()];
    for i in (0..coarse.len()).rev() {
        out[i] = cands[i][c];
        if i > 0 {
            let parent = steps[i - 1][e];
            c = parent.2;
            e = parent.3;
        }
    }
    (out, cost)
}
