//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts. Run with `cargo test -p catfour-core --test acceptance -- --nocapture`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use catfour::basis::{BasisKind, BasisSpec, OneHotConvention};
use catfour::campaign::{
    beats, pooled_sem, run_cells, summarize, BoxConfig, CampaignConfig, CampaignSummary,
    FolderConfig,
};
use catfour::eco::EcoModel;
use catfour::optimizer::{Afo, Algorithm, ExperimentConfig};
use catfour::rna::nussinov;
use catfour::tco::{HorseshoeHyper, McmcConfig, TcoModel};
use catfour::{CategoricalPoint, CategoricalSpace, RngSeed};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DESIGN_TARGET: &str = "((((....))))....((((....))))";

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {tag} {name}: {detail}");
}

fn latin(permutation: Option<Vec<usize>>) -> BoxConfig {
    BoxConfig::LatinSquare {
        k: 5,
        noise: 0.1,
        permutation,
    }
}

fn campaign(
    box_config: BoxConfig,
    budget: usize,
    seeds: u64,
    algs: &[(&str, Algorithm, Afo)],
) -> CampaignSummary {
    let mut c = CampaignConfig::new("acceptance", budget, (1..=seeds).collect(), box_config);
    for (label, alg, afo) in algs {
        c = c.with_experiment(*label, ExperimentConfig::new(*alg, *afo, budget));
    }
    let cells = run_cells(&c).unwrap();
    summarize(&c, &cells).unwrap()
}

fn final_stats(s: &CampaignSummary, label: &str) -> (f64, f64) {
    let a = s.get(label).unwrap();
    (a.final_mean(), a.final_sem())
}

fn fmt(label: &str, (m, s): (f64, f64)) -> String {
    format!("{label} {m:.3}±{s:.3}")
}

#[test]
fn c01_basis_completeness() {
    let start = Instant::now();
    let mut worst_sv = f64::INFINITY;
    let mut worst_fit: f64 = 0.0;
    let mut square = true;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=3 {
        for k in 2..=4 {
            let spec = BasisSpec::new(
                CategoricalSpace::new(n, k).unwrap(),
                BasisKind::OneHotFourier,
                n,
            )
            .unwrap();
            let a = spec.design_matrix().unwrap();
            let size = k.pow(n as u32);
            square &= a.nrows() == size && a.ncols() == size;
            // smallest singular value as the root of the smallest Gram eigenvalue
            let gram = a.transpose() * &a;
            let eig = gram
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .min()
                .max(0.0)
                .sqrt();
            worst_sv = worst_sv.min(eig.min(a.singular_values().min()));
            // least squares through the normal equations
            let chol = gram.cholesky().expect("full rank");
            for _ in 0..20 {
                let f = DVector::from_fn(size, |_, _| rng.random_range(-10.0..10.0));
                let coef = chol.solve(&(a.transpose() * &f));
                worst_fit = worst_fit.max((&a * coef - &f).amax());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = square && worst_sv > 1e-8 && worst_fit < 1e-8 && secs < 10.0;
    report(
        1,
        "basis completeness",
        pass,
        &format!("square {square}, min singular value {worst_sv:.3e}, max residual {worst_fit:.2e}, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn c02_character_orthogonality() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (n, k) in [(2usize, 3usize), (2, 5), (3, 4)] {
        let size = k.pow(n as u32);
        let digits = |mut i: usize| -> Vec<usize> {
            let mut v = vec![0; n];
            for slot in v.iter_mut().rev() {
                *slot = i % k;
                i /= k;
            }
            v
        };
        let pts: Vec<Vec<usize>> = (0..size).map(digits).collect();
        let re = DMatrix::from_fn(size, size, |r, c| {
            let dot: usize = pts[r].iter().zip(&pts[c]).map(|(a, b)| a * b).sum();
            (2.0 * PI * dot as f64 / k as f64).cos()
        });
        let im = DMatrix::from_fn(size, size, |r, c| {
            let dot: usize = pts[r].iter().zip(&pts[c]).map(|(a, b)| a * b).sum();
            (2.0 * PI * dot as f64 / k as f64).sin()
        });
        // A^H A = (Re^T Re + Im^T Im) + i (Re^T Im - Im^T Re)
        let g_re = re.transpose() * &re + im.transpose() * &im
            - DMatrix::<f64>::identity(size, size) * size as f64;
        let g_im = re.transpose() * &im - im.transpose() * &re;
        worst = worst.max(g_re.amax()).max(g_im.amax());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && secs < 5.0;
    report(
        2,
        "character orthogonality",
        pass,
        &format!("max |A^H A - k^n I| {worst:.2e}, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn c03_latin_square_reproduction() {
    let algs = [
        ("eco_g", Algorithm::EcoG, Afo::Sa),
        ("rs", Algorithm::Rs, Afo::Sa),
        ("plain_sa", Algorithm::PlainSa, Afo::Sa),
    ];
    let full = campaign(latin(None), 500, 20, &algs);
    let (eco, rs, sa) = (
        final_stats(&full, "eco_g"),
        final_stats(&full, "rs"),
        final_stats(&full, "plain_sa"),
    );
    let full_pass = eco.0 <= 2.0 && beats(eco, rs) && beats(eco, sa);
    report(
        3,
        "latin square 20 seeds x 500",
        full_pass,
        &format!(
            "{}, {}, {} (need eco_g <= 2.0 and 2 pooled SEM below both)",
            fmt("eco_g", eco),
            fmt("rs", rs),
            fmt("plain_sa", sa)
        ),
    );
    let fast = campaign(latin(None), 300, 10, &algs[..1]);
    let fe = final_stats(&fast, "eco_g");
    let fast_pass = fe.0 <= 4.0;
    report(
        3,
        "latin square fast variant 10 seeds x 300",
        fast_pass,
        &format!("{} (need <= 4.0)", fmt("eco_g", fe)),
    );
    assert!(full_pass && fast_pass);
}

#[test]
fn c04_permutation_invariance() {
    let algs = [("eco_g", Algorithm::EcoG, Afo::Sa)];
    let base = final_stats(&campaign(latin(None), 500, 20, &algs), "eco_g");
    let mut pass = true;
    let mut detail = vec![fmt("sigma0", base)];
    for (name, perm) in [
        ("sigma1", vec![3, 2, 4, 0, 1]),
        ("sigma2", vec![1, 2, 3, 4, 0]),
    ] {
        let p = final_stats(&campaign(latin(Some(perm)), 500, 20, &algs), "eco_g");
        pass &= (p.0 - base.0).abs() <= 2.0 * base.1;
        detail.push(fmt(name, p));
    }
    report(
        4,
        "permutation invariance",
        pass,
        &format!("{} (band sigma0 ± 2 SEM)", detail.join(", ")),
    );
    assert!(pass);
}

#[test]
fn c05_rna_ordering() {
    let algs = [
        ("eco_f", Algorithm::EcoF, Afo::Sa),
        ("eco_g", Algorithm::EcoG, Afo::Sa),
        ("tco_f", Algorithm::TcoF, Afo::Sa),
        ("rs", Algorithm::Rs, Afo::Sa),
    ];
    let s = campaign(
        BoxConfig::RnaOptimize {
            n: 30,
            folder: FolderConfig::default(),
        },
        500,
        10,
        &algs,
    );
    let rs = final_stats(&s, "rs");
    let mut pass = true;
    let mut detail = vec![fmt("rs", rs)];
    for label in ["eco_f", "eco_g", "tco_f"] {
        let a = final_stats(&s, label);
        let ok = beats(a, rs);
        pass &= ok;
        detail.push(format!(
            "{} gap {:.3} vs 2 pooled SEM {:.3}",
            fmt(label, a),
            rs.0 - a.0,
            2.0 * pooled_sem(a.1, rs.1)
        ));
    }
    report(5, "rna optimization ordering", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn c06_design_sample_efficiency() {
    let algs = [
        ("eco_f", Algorithm::EcoF, Afo::Mcts),
        ("rs", Algorithm::Rs, Afo::Mcts),
    ];
    let s = campaign(
        BoxConfig::RnaDesign {
            target: Some(DESIGN_TARGET.into()),
            target_file: None,
            folder: FolderConfig::default(),
        },
        300,
        10,
        &algs,
    );
    let eco = s.get("eco_f").unwrap();
    let rs = s.get("rs").unwrap();
    let final_ok = eco.final_mean() <= 0.05;
    let mut checkpoints = Vec::new();
    let mut all_beat = true;
    for step in (50..=300).step_by(50) {
        let (e, r) = (eco.at_step(step).0, rs.at_step(step).0);
        all_beat &= e < r;
        checkpoints.push(format!("{step}:{e:.3}<{r:.3}"));
    }
    let pass = final_ok && all_beat;
    report(
        6,
        "design sample efficiency",
        pass,
        &format!(
            "eco_f final {:.3} (need <= 0.05); checkpoints {}",
            eco.final_mean(),
            checkpoints.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn c07_eco_mass_conservation() {
    let space = CategoricalSpace::new(10, 4).unwrap();
    let spec = BasisSpec::new(space, BasisKind::OneHotFourier, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lambda = 1.0;
    let mut model = EcoModel::new(spec, lambda).unwrap();
    let mut worst: f64 = 0.0;
    let mut bad = 0usize;
    for i in 0..10_000 {
        let p = space.random_point(&mut rng);
        let y = match i % 4 {
            0 => rng.random_range(-1.0..1.0),
            1 => rng.random_range(-1e6..1e6),
            2 => rng.random_range(-1e-9..1e-9),
            _ => model.predict(&p),
        };
        model.update(&p, y).unwrap();
        let w: Vec<f64> = model
            .alpha_plus()
            .iter()
            .chain(model.alpha_minus())
            .cloned()
            .collect();
        bad += w.iter().filter(|v| !v.is_finite() || **v < 0.0).count();
        worst = worst.max((w.iter().sum::<f64>() - lambda).abs());
    }
    let pass = worst <= 1e-9 && bad == 0;
    report(
        7,
        "eco mass conservation",
        pass,
        &format!("max |mass - lambda| {worst:.2e}, invalid weights {bad}"),
    );
    assert!(pass);
}

fn horseshoe_posterior_mean(
    spec: &BasisSpec,
    data: &[(CategoricalPoint, f64)],
    seed: u64,
) -> Vec<f64> {
    let d = spec.d();
    let hyper = HorseshoeHyper::default_for(d).unwrap();
    let mcmc = McmcConfig::with_seed(RngSeed(seed));
    let mut model = TcoModel::new(spec.clone(), hyper, mcmc).unwrap();
    for (p, y) in data {
        model.observe(p, *y).unwrap();
    }
    let draws = model.sample_draws(200).unwrap();
    (0..d)
        .map(|j| draws.iter().map(|v| v[j]).sum::<f64>() / draws.len() as f64)
        .collect()
}

#[test]
fn c08_horseshoe_recovery_and_shrinkage() {
    let start = Instant::now();
    let space = CategoricalSpace::new(19, 2).unwrap();
    let spec = BasisSpec::with_options(
        space,
        BasisKind::OneHotFourier,
        1,
        OneHotConvention::ZeroOne,
        1_000_000,
    )
    .unwrap();
    assert_eq!(spec.d(), 20);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut recovered = 0;
    let mut notes = Vec::new();
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<(CategoricalPoint, f64)> = (0..60)
            .map(|_| {
                let p = space.random_point(&mut rng);
                let y = 3.0 * spec.features(p.values())[5] + noise.sample(&mut rng);
                (p, y)
            })
            .collect();
        let mean = horseshoe_posterior_mean(&spec, &data, 100 + seed);
        let others = mean
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != 5)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let ok = (2.5..=3.5).contains(&mean[5]) && others < 0.5;
        recovered += ok as usize;
        notes.push(format!("{:.2}/{:.2}", mean[5], others));
    }
    let null_space = CategoricalSpace::new(49, 2).unwrap();
    let null_spec = BasisSpec::with_options(
        null_space,
        BasisKind::OneHotFourier,
        1,
        OneHotConvention::ZeroOne,
        1_000_000,
    )
    .unwrap();
    assert_eq!(null_spec.d(), 50);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let data: Vec<(CategoricalPoint, f64)> = (0..50)
        .map(|_| {
            (
                null_space.random_point(&mut rng),
                std_normal.sample(&mut rng),
            )
        })
        .collect();
    let mean = horseshoe_posterior_mean(&null_spec, &data, 77);
    let small = mean.iter().filter(|v| v.abs() < 0.1).count() as f64 / mean.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    let pass = recovered >= 9 && small >= 0.9 && secs < 300.0;
    report(
        8,
        "horseshoe recovery and shrinkage",
        pass,
        &format!(
            "recovered {recovered}/10 (alpha5/max other: {}), null shrinkage {:.0}% below 0.1, {secs:.1}s",
            notes.join(" "),
            100.0 * small
        ),
    );
    assert!(pass);
}

fn pairable(a: usize, b: usize) -> bool {
    // A=0 C=1 G=2 U=3: AU, CG, GU wobble
    matches!((a.min(b), a.max(b)), (0, 3) | (1, 2) | (2, 3))
}

/// Exhaustive search over subsets of admissible pairs.
fn enumerate_max_pairs(seq: &[usize]) -> u32 {
    let n = seq.len();
    let cands: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 4..n).map(move |j| (i, j)))
        .filter(|&(i, j)| pairable(seq[i], seq[j]))
        .collect();
    fn rec(c: &[(usize, usize)], idx: usize, used: &mut Vec<(usize, usize)>) -> u32 {
        if idx == c.len() {
            return used.len() as u32;
        }
        let skip = rec(c, idx + 1, used);
        let (i, j) = c[idx];
        let ok = used.iter().all(|&(a, b)| {
            let distinct = a != i && a != j && b != i && b != j;
            let crossing = (a < i && i < b && b < j) || (i < a && a < j && j < b);
            distinct && !crossing
        });
        if !ok {
            return skip;
        }
        used.push((i, j));
        let take = rec(c, idx + 1, used);
        used.pop();
        skip.max(take)
    }
    rec(&cands, 0, &mut Vec::new())
}

fn memo_max_pairs(
    seq: &[usize],
    i: usize,
    j: usize,
    memo: &mut HashMap<(usize, usize), u32>,
) -> u32 {
    if j < i + 4 {
        return 0;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let mut best = memo_max_pairs(seq, i, j - 1, memo);
    for l in i..j - 3 {
        if pairable(seq[l], seq[j]) {
            let left = if l > i {
                memo_max_pairs(seq, i, l - 1, memo)
            } else {
                0
            };
            best = best.max(left + 1 + memo_max_pairs(seq, l + 1, j - 1, memo));
        }
    }
    memo.insert((i, j), best);
    best
}

#[test]
fn c09_nussinov_oracles() {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for len in 1..=8u32 {
        for code in 0..4usize.pow(len) {
            let seq: Vec<usize> = (0..len).map(|p| (code >> (2 * p)) & 3).collect();
            let dp = -nussinov(&seq, 3).energy as u32;
            mismatches += (dp != enumerate_max_pairs(&seq)) as usize;
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let seq: Vec<usize> = (0..12).map(|_| rng.random_range(0..4)).collect();
        let dp = -nussinov(&seq, 3).energy as u32;
        mismatches += (dp != memo_max_pairs(&seq, 0, 11, &mut HashMap::new())) as usize;
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 120.0;
    report(
        9,
        "nussinov oracle equivalence",
        pass,
        &format!("{checked} sequences, {mismatches} mismatches, {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn c10_relative_timing() {
    let algs = [
        ("eco_f", Algorithm::EcoF, Afo::Sa),
        ("eco_g", Algorithm::EcoG, Afo::Sa),
    ];
    let mut c = CampaignConfig::new("timing", 150, vec![1, 2, 3], latin(None));
    c.jobs = Some(1);
    for (label, alg, afo) in algs {
        c = c.with_experiment(label, ExperimentConfig::new(alg, afo, 150));
    }
    let s = summarize(&c, &run_cells(&c).unwrap()).unwrap();
    let f = s.get("eco_f").unwrap().seconds_per_step;
    let g = s.get("eco_g").unwrap().seconds_per_step;
    let ratio = g / f;
    let pass = (1.5..=3.5).contains(&ratio);
    report(
        10,
        "relative timing",
        pass,
        &format!(
            "eco_g {:.3} ms/step, eco_f {:.3} ms/step, ratio {ratio:.2} (need 1.5..3.5)",
            g * 1e3,
            f * 1e3
        ),
    );
    assert!(pass);
}
