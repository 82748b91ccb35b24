//! Benchmark black boxes.

use std::io::Write;
use std::process::{Command, Stdio};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{BlackBox, CategoricalSpace, RngSeed, RngStream};
use crate::error::{Error, Result};
use crate::mcts::DesignSchema;
use crate::rna::{decode, normalized_hamming, RnaFolder};

pub const DEFAULT_LATIN_NOISE: f64 = 0.1;

/// `k x k` grid with `k` symbols; the penalty counts repeated symbols per
/// row and column as `k - distinct`.
pub struct LatinSquareBox {
    k: usize,
    noise_sigma: f64,
    rng: ChaCha8Rng,
}

impl LatinSquareBox {
    pub fn new(k: usize, noise_sigma: f64, seed: RngSeed) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidSpace { n: k * k, k });
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise sigma must be >= 0, got {noise_sigma}"
            )));
        }
        Ok(Self {
            k,
            noise_sigma,
            rng: seed.rng(RngStream::Noise),
        })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    /// Noiseless penalty of a row-major `k x k` grid.
    pub fn penalty(k: usize, x: &[usize]) -> Result<f64> {
        if x.len() != k * k {
            return Err(Error::DimensionMismatch(format!(
                "latin square of order {k} needs {} entries, got {}",
                k * k,
                x.len()
            )));
        }
        let mut seen = vec![false; k];
        let mut distinct = |cells: &mut dyn Iterator<Item = usize>| {
            seen.iter_mut().for_each(|s| *s = false);
            let mut c = 0;
            for v in cells {
                if v < k && !seen[v] {
                    seen[v] = true;
                    c += 1;
                }
            }
            c
        };
        let mut total = 0;
        for r in 0..k {
            total += k - distinct(&mut (0..k).map(|c| x[r * k + c]));
        }
        for c in 0..k {
            total += k - distinct(&mut (0..k).map(|r| x[r * k + c]));
        }
        Ok(total as f64)
    }
}

impl BlackBox for LatinSquareBox {
    fn space(&self) -> CategoricalSpace {
        CategoricalSpace::new(self.k * self.k, self.k).expect("k >= 2")
    }

    fn score(&mut self, x: &[usize]) -> Result<f64> {
        self.space().validate(x)?;
        let p = Self::penalty(self.k, x)?;
        if self.noise_sigma == 0.0 {
            return Ok(p);
        }
        let normal = Normal::new(0.0, self.noise_sigma).expect("valid sigma");
        Ok(p + normal.sample(&mut self.rng))
    }

    fn name(&self) -> String {
        format!("latin_square_{}", self.k)
    }
}

/// Folding energy of the sequence decoded with `0->A, 1->C, 2->G, 3->U`.
pub struct RnaOptimizeBox {
    n: usize,
    folder: RnaFolder,
}

impl RnaOptimizeBox {
    pub fn new(n: usize, folder: RnaFolder) -> Result<Self> {
        CategoricalSpace::new(n, 4)?;
        Ok(Self { n, folder })
    }
}

impl BlackBox for RnaOptimizeBox {
    fn space(&self) -> CategoricalSpace {
        CategoricalSpace::new(self.n, 4).expect("validated")
    }

    fn score(&mut self, x: &[usize]) -> Result<f64> {
        self.space().validate(x)?;
        Ok(self.folder.fold(&decode(x))?.energy)
    }

    fn name(&self) -> String {
        format!("rna_optimize_{}", self.n)
    }
}

/// Normalized Hamming distance between the target and the fold of the
/// sequence encoded by a slot-space point.
pub struct RnaDesignBox {
    target: String,
    schema: DesignSchema,
    folder: RnaFolder,
}

impl RnaDesignBox {
    pub fn new(target: &str, folder: RnaFolder) -> Result<Self> {
        let schema = DesignSchema::from_target(target)?;
        Ok(Self {
            target: target.to_string(),
            schema,
            folder,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn design_schema(&self) -> &DesignSchema {
        &self.schema
    }

    pub fn sequence(&self, x: &[usize]) -> Result<String> {
        self.schema.decode_sequence(x)
    }
}

impl BlackBox for RnaDesignBox {
    fn space(&self) -> CategoricalSpace {
        self.schema.space()
    }

    fn score(&mut self, x: &[usize]) -> Result<f64> {
        let seq = self.schema.decode_sequence(x)?;
        let fold = self.folder.fold(&seq)?;
        normalized_hamming(&self.target, &fold.structure)
    }

    fn schema(&self) -> Option<DesignSchema> {
        Some(self.schema.clone())
    }

    fn name(&self) -> String {
        "rna_design".into()
    }
}

/// Scores points with an external program: one process per evaluation,
/// `v0|v1|...` on standard input, a decimal score on the last output line.
pub struct ExternalBox {
    space: CategoricalSpace,
    command: Vec<String>,
}

impl ExternalBox {
    pub fn new(space: CategoricalSpace, command: &str) -> Result<Self> {
        let command: Vec<String> = command.split_whitespace().map(String::from).collect();
        if command.is_empty() {
            return Err(Error::InvalidArgument("empty external command".into()));
        }
        Ok(Self { space, command })
    }
}

impl BlackBox for ExternalBox {
    fn space(&self) -> CategoricalSpace {
        self.space
    }

    fn score(&mut self, x: &[usize]) -> Result<f64> {
        self.space.validate(x)?;
        let display = self.command.join(" ");
        let ext_err = |message: String| Error::External {
            command: display.clone(),
            message,
        };
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ext_err(format!("spawn failed: {e}")))?;
        {
            let line: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            let mut stdin = child.stdin.take().expect("stdin piped");
            writeln!(stdin, "{}", line.join("|"))
                .map_err(|e| ext_err(format!("write failed: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| ext_err(format!("wait failed: {e}")))?;
        if !out.status.success() {
            return Err(ext_err(format!("exit status {}", out.status)));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let last = text
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| Error::ExternalParse("empty output".into()))?;
        let v: f64 = last
            .parse()
            .map_err(|_| Error::ExternalParse(format!("not a number: {last:?}")))?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("external score {v}")));
        }
        Ok(v)
    }

    fn name(&self) -> String {
        "external".into()
    }
}

/// Relabels levels before delegating: the inner box sees `perm[x_i]`.
pub struct PermutedBox<B> {
    inner: B,
    perm: Vec<usize>,
    scratch: Vec<usize>,
}

impl<B: BlackBox> PermutedBox<B> {
    pub fn new(inner: B, perm: Vec<usize>) -> Result<Self> {
        let k = inner.space().k();
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        if sorted != (0..k).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{k}"
            )));
        }
        Ok(Self {
            inner,
            perm,
            scratch: Vec::new(),
        })
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

impl<B: BlackBox> BlackBox for PermutedBox<B> {
    fn space(&self) -> CategoricalSpace {
        self.inner.space()
    }

    fn score(&mut self, x: &[usize]) -> Result<f64> {
        self.space().validate(x)?;
        self.scratch.clear();
        self.scratch.extend(x.iter().map(|&v| self.perm[v]));
        self.inner.score(&self.scratch)
    }

    fn schema(&self) -> Option<DesignSchema> {
        self.inner.schema()
    }

    fn name(&self) -> String {
        format!("{}_permuted", self.inner.name())
    }
}

/// A uniformly random level permutation, for relabeling experiments.
pub fn random_permutation<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..k).collect();
    p.shuffle(rng);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cyclic_square(k: usize) -> Vec<usize> {
        (0..k * k).map(|i| (i / k + i % k) % k).collect()
    }

    #[test]
    fn latin_penalties() {
        assert_eq!(LatinSquareBox::penalty(5, &cyclic_square(5)).unwrap(), 0.0);
        assert_eq!(LatinSquareBox::penalty(5, &[2; 25]).unwrap(), 40.0);
        assert_eq!(
            LatinSquareBox::penalty(3, &[0, 1, 2, 0, 1, 2, 0, 1, 2]).unwrap(),
            6.0
        );
        assert!(LatinSquareBox::penalty(3, &[0; 8]).is_err());
    }

    #[test]
    fn latin_range_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [3usize, 5] {
            let space = CategoricalSpace::new(k * k, k).unwrap();
            for _ in 0..10_000 {
                let x = space.random_point(&mut rng);
                let p = LatinSquareBox::penalty(k, x.values()).unwrap();
                assert!((0.0..=(2 * k * (k - 1)) as f64).contains(&p));
            }
        }
    }

    #[test]
    fn latin_noise_is_seeded_and_small() {
        let mut a = LatinSquareBox::new(5, 0.1, RngSeed(3)).unwrap();
        let mut b = LatinSquareBox::new(5, 0.1, RngSeed(3)).unwrap();
        let x = cyclic_square(5);
        let va: Vec<f64> = (0..200).map(|_| a.score(&x).unwrap()).collect();
        let vb: Vec<f64> = (0..200).map(|_| b.score(&x).unwrap()).collect();
        assert_eq!(va, vb);
        let mean = va.iter().sum::<f64>() / 200.0;
        let sd = (va.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
        assert!(mean.abs() < 0.03);
        assert!((sd - 0.1).abs() < 0.03);
        let mut quiet = LatinSquareBox::new(5, 0.0, RngSeed(3)).unwrap();
        assert_eq!(quiet.score(&x).unwrap(), 0.0);
    }

    #[test]
    fn rna_optimize_values() {
        let mut b = RnaOptimizeBox::new(9, RnaFolder::default()).unwrap();
        assert_eq!(b.score(&[0; 9]).unwrap(), 0.0);
        let x = crate::rna::encode("GGGAAACCC").unwrap();
        assert_eq!(b.score(&x).unwrap(), -3.0);
    }

    #[test]
    fn rna_design_values() {
        let mut b = RnaDesignBox::new("(((...)))", RnaFolder::default()).unwrap();
        let x = b.design_schema().encode_sequence("GGGAAACCC").unwrap();
        assert_eq!(b.score(x.values()).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let space = b.space();
        for _ in 0..200 {
            let p = space.random_point(&mut rng);
            let v = b.score(p.values()).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn permuted_box_relabels() {
        let space = CategoricalSpace::new(2, 3).unwrap();
        let inner = crate::domain::FnBox::new(space, |x: &[usize]| (x[0] * 3 + x[1]) as f64);
        let mut p = PermutedBox::new(inner, vec![2, 0, 1]).unwrap();
        assert_eq!(p.score(&[0, 1]).unwrap(), 6.0);
        let inner = crate::domain::FnBox::new(space, |_: &[usize]| 0.0);
        assert!(PermutedBox::new(inner, vec![0, 0, 1]).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn external_box_protocol() {
        let space = CategoricalSpace::new(3, 4).unwrap();
        assert!(ExternalBox::new(space, "  ").is_err());
        let mut b = ExternalBox {
            space,
            command: vec![
                "sh".into(),
                "-c".into(),
                "read l; echo \"$l\" | tr '|' '\\n' | awk '{s+=$1} END {print s}'".into(),
            ],
        };
        assert_eq!(b.score(&[1, 2, 3]).unwrap(), 6.0);
        let mut bad = ExternalBox {
            space,
            command: vec!["sh".into(), "-c".into(), "echo oops".into()],
        };
        assert!(matches!(
            bad.score(&[0, 0, 0]),
            Err(Error::ExternalParse(_))
        ));
    }
}
