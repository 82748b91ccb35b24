//! Self-checks against exhaustive oracles: basis rank, character
//! orthogonality and the folding recursion.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Complex, DMatrix};

use crate::basis::{BasisKind, BasisSpec};
use crate::domain::CategoricalSpace;
use crate::error::Result;
use crate::rna::{can_pair, decode, nussinov, pair_table, ALPHABET};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Shape and smallest singular value of the full-order design matrix on
/// `[k]^n`. For a wide matrix this certifies full row rank.
pub fn min_singular_value(n: usize, k: usize, kind: BasisKind) -> Result<(usize, usize, f64)> {
    let spec = BasisSpec::new(CategoricalSpace::new(n, k)?, kind, n)?;
    let m = spec.design_matrix()?;
    let (rows, cols) = m.shape();
    let sv = m.singular_values();
    Ok((rows, cols, sv.iter().cloned().fold(f64::INFINITY, f64::min)))
}

/// Matrix of complex characters `exp(2 pi i <a, x> / k)`, one column per
/// frequency `a`, one row per point `x`, both in lexicographic order.
pub fn character_matrix(n: usize, k: usize) -> Result<DMatrix<Complex<f64>>> {
    let space = CategoricalSpace::new(n, k)?;
    let size = space.size().expect("small test domain") as usize;
    let points: Vec<Vec<usize>> = (0..size)
        .map(|i| space.point_at(i as u128).into_inner())
        .collect();
    Ok(DMatrix::from_fn(size, size, |r, c| {
        let dot: usize = points[r].iter().zip(&points[c]).map(|(x, a)| x * a).sum();
        let theta = 2.0 * PI * (dot % k) as f64 / k as f64;
        Complex::new(theta.cos(), theta.sin())
    }))
}

/// Largest entry of `|A^H A - k^n I|`.
pub fn orthogonality_error(n: usize, k: usize) -> Result<f64> {
    let a = character_matrix(n, k)?;
    let gram = a.adjoint() * &a;
    let size = a.ncols();
    let scale = size as f64;
    let mut worst: f64 = 0.0;
    for r in 0..size {
        for c in 0..size {
            let target = if r == c { scale } else { 0.0 };
            worst = worst.max((gram[(r, c)] - Complex::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// Maximum pair count by enumerating every subset of admissible pairs.
/// Independent of the dynamic program; feasible for short sequences.
pub fn brute_force_pairs(sequence: &[usize], min_loop: usize) -> u32 {
    let n = sequence.len();
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in i + min_loop + 1..n {
            if can_pair(ALPHABET[sequence[i]], ALPHABET[sequence[j]]) {
                candidates.push((i, j));
            }
        }
    }
    let mut best = 0u32;
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    search(&candidates, 0, &mut chosen, &mut best);
    best
}

fn compatible(a: (usize, usize), b: (usize, usize)) -> bool {
    let (i, j) = a;
    let (k, l) = b;
    if i == k || i == l || j == k || j == l {
        return false;
    }
    // nested or disjoint, never crossing
    !((i < k && k < j && j < l) || (k < i && i < l && l < j))
}

fn search(cands: &[(usize, usize)], from: usize, chosen: &mut Vec<(usize, usize)>, best: &mut u32) {
    *best = (*best).max(chosen.len() as u32);
    if chosen.len() + (cands.len() - from) <= *best as usize {
        return;
    }
    for idx in from..cands.len() {
        let c = cands[idx];
        if chosen.iter().all(|&p| compatible(p, c)) {
            chosen.push(c);
            search(cands, idx + 1, chosen, best);
            chosen.pop();
        }
    }
}

/// True when `structure` is balanced, every pair is allowed, hairpins
/// respect `min_loop`, and the pair count matches `pairs`.
pub fn structure_is_consistent(
    sequence: &[usize],
    structure: &str,
    min_loop: usize,
    pairs: u32,
) -> bool {
    let Ok(table) = pair_table(structure) else {
        return false;
    };
    let seq = decode(sequence);
    let letters: Vec<char> = seq.chars().collect();
    let mut count = 0;
    for (i, p) in table.iter().enumerate() {
        if let Some(j) = *p {
            if i < j {
                if j - i <= min_loop || !can_pair(letters[i], letters[j]) {
                    return false;
                }
                count += 1;
            }
        }
    }
    count == pairs
}

/// Compares the folding recursion to exhaustive enumeration on every
/// sequence of each length up to `max_len`.
pub fn nussinov_exhaustive(max_len: usize, min_loop: usize) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut failures = Vec::new();
    for len in 1..=max_len {
        let total = 4usize.pow(len as u32);
        let mut seq = vec![0usize; len];
        for code in 0..total {
            let mut c = code;
            for s in seq.iter_mut() {
                *s = c % 4;
                c /= 4;
            }
            let fold = nussinov(&seq, min_loop);
            let pairs = (-fold.energy).round() as u32;
            let oracle = brute_force_pairs(&seq, min_loop);
            if pairs != oracle || !structure_is_consistent(&seq, &fold.structure, min_loop, pairs) {
                failures.push(format!(
                    "{}: dp {pairs}, oracle {oracle}, structure {}",
                    decode(&seq),
                    fold.structure
                ));
            }
            checked += 1;
        }
    }
    (checked, failures)
}

/// Runs every check at sizes that finish in seconds.
pub fn run_all() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for n in 1..=3 {
        for k in 2..=4 {
            for kind in [BasisKind::OneHotFourier, BasisKind::GroupFourier] {
                let (rows, cols, smin) = min_singular_value(n, k, kind)?;
                // one-hot terms form a basis; the real group terms only span
                let shape_ok = match kind {
                    BasisKind::OneHotFourier => rows == cols,
                    BasisKind::GroupFourier => rows <= cols,
                };
                checks.push(Check {
                    name: format!("rank {kind:?} n={n} k={k}"),
                    passed: shape_ok && smin > 1e-8,
                    detail: format!("{rows}x{cols}, smallest singular value {smin:.3e}"),
                });
            }
        }
    }
    for (n, k) in [(2, 3), (2, 5), (3, 4)] {
        let err = orthogonality_error(n, k)?;
        checks.push(Check {
            name: format!("orthogonality n={n} k={k}"),
            passed: err < 1e-9,
            detail: format!("max |A^H A - k^n I| = {err:.3e}"),
        });
    }
    let (checked, failures) = nussinov_exhaustive(7, crate::rna::DEFAULT_MIN_LOOP);
    checks.push(Check {
        name: "folding vs enumeration".into(),
        passed: failures.is_empty(),
        detail: match failures.first() {
            None => format!("{checked} sequences agree"),
            Some(f) => format!("{} of {checked} disagree, first {f}", failures.len()),
        },
    });
    Ok(checks)
}
