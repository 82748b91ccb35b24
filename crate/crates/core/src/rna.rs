//! RNA sequence utilities: a base-pair-maximization folder, an adapter for
//! an external folding program, and dot-bracket parsing.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Level-to-letter map used by the sequence optimization box.
pub const ALPHABET: [char; 4] = ['A', 'C', 'G', 'U'];
pub const DEFAULT_MIN_LOOP: usize = 3;
pub const EXTERNAL_FOLDER_ENV: &str = "CATFOUR_EXTERNAL_FOLDER";

pub fn nucleotide_index(letter: char) -> Option<usize> {
    ALPHABET
        .iter()
        .position(|&c| c == letter.to_ascii_uppercase())
}

pub fn encode(sequence: &str) -> Result<Vec<usize>> {
    sequence
        .chars()
        .enumerate()
        .map(|(position, letter)| {
            nucleotide_index(letter).ok_or(Error::InvalidNucleotide { letter, position })
        })
        .collect()
}

pub fn decode(levels: &[usize]) -> String {
    levels.iter().map(|&l| ALPHABET[l]).collect()
}

/// AU, UA, GC, CG, GU, UG.
pub fn can_pair(a: char, b: char) -> bool {
    matches!(
        (a, b),
        ('A', 'U') | ('U', 'A') | ('G', 'C') | ('C', 'G') | ('G', 'U') | ('U', 'G')
    )
}

/// Partner table of a balanced dot-bracket string.
pub fn pair_table(structure: &str) -> Result<Vec<Option<usize>>> {
    let mut table = vec![None; structure.chars().count()];
    let mut stack = Vec::new();
    for (position, c) in structure.chars().enumerate() {
        match c {
            '.' => {}
            '(' => stack.push(position),
            ')' => {
                let open = stack.pop().ok_or(Error::StructureParse {
                    position,
                    message: "unmatched ')'".into(),
                })?;
                table[open] = Some(position);
                table[position] = Some(open);
            }
            other => {
                return Err(Error::StructureParse {
                    position,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    if let Some(open) = stack.pop() {
        return Err(Error::StructureParse {
            position: open,
            message: "unmatched '('".into(),
        });
    }
    Ok(table)
}

/// Reads a target structure file, stripping surrounding whitespace.
pub fn read_target(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let target = text.trim().to_string();
    pair_table(&target)?;
    Ok(target)
}

/// Position-wise mismatches between two structures divided by their length.
pub fn normalized_hamming(a: &str, b: &str) -> Result<f64> {
    let (la, lb) = (a.chars().count(), b.chars().count());
    if la != lb {
        return Err(Error::DimensionMismatch(format!(
            "structures of length {la} and {lb}"
        )));
    }
    if la == 0 {
        return Ok(0.0);
    }
    let diff = a.chars().zip(b.chars()).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / la as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub energy: f64,
    pub structure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RnaFolder {
    InternalNussinov { min_loop: usize },
    ExternalProcess { command: Vec<String> },
}

impl Default for RnaFolder {
    fn default() -> Self {
        RnaFolder::InternalNussinov {
            min_loop: DEFAULT_MIN_LOOP,
        }
    }
}

impl RnaFolder {
    /// External folder from a whitespace-separated command line. The
    /// environment variable, when set, takes precedence.
    pub fn external(command: &str) -> Result<Self> {
        let line = std::env::var(EXTERNAL_FOLDER_ENV).unwrap_or_else(|_| command.to_string());
        let command: Vec<String> = line.split_whitespace().map(String::from).collect();
        if command.is_empty() {
            return Err(Error::InvalidArgument(
                "empty external folder command".into(),
            ));
        }
        Ok(RnaFolder::ExternalProcess { command })
    }

    pub fn fold(&self, sequence: &str) -> Result<Fold> {
        if sequence.is_empty() {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        let levels = encode(sequence)?;
        match self {
            RnaFolder::InternalNussinov { min_loop } => Ok(nussinov(&levels, *min_loop)),
            RnaFolder::ExternalProcess { command } => fold_external(command, &decode(&levels)),
        }
    }
}

fn pairs_levels(a: usize, b: usize) -> bool {
    can_pair(ALPHABET[a], ALPHABET[b])
}

/// Maximum number of non-crossing allowed pairs with `j - i > min_loop`.
/// Traceback prefers pairing `(i, j)`, then leaving `i` unpaired, then
/// leaving `j` unpaired, then the smallest split.
pub fn nussinov(levels: &[usize], min_loop: usize) -> Fold {
    let n = levels.len();
    let mut table = vec![0u32; n * n];
    let at = |i: usize, j: usize| i * n + j;
    for span in 1..n {
        for i in 0..n - span {
            let j = i + span;
            let mut best = table[at(i + 1, j)].max(table[at(i, j - 1)]);
            if span > min_loop && pairs_levels(levels[i], levels[j]) {
                best = best.max(table[at(i + 1, j - 1)] + 1);
            }
            for k in i + 1..j - 1 {
                best = best.max(table[at(i, k)] + table[at(k + 1, j)]);
            }
            table[at(i, j)] = best;
        }
    }
    let mut structure = vec!['.'; n];
    let mut stack = Vec::new();
    if n > 1 {
        stack.push((0, n - 1));
    }
    while let Some((i, j)) = stack.pop() {
        if i >= j {
            continue;
        }
        let v = table[at(i, j)];
        if v == 0 {
            continue;
        }
        let inner = if j - i >= 2 {
            table[at(i + 1, j - 1)]
        } else {
            0
        };
        if j - i > min_loop && pairs_levels(levels[i], levels[j]) && inner + 1 == v {
            structure[i] = '(';
            structure[j] = ')';
            stack.push((i + 1, j - 1));
        } else if table[at(i + 1, j)] == v {
            stack.push((i + 1, j));
        } else if table[at(i, j - 1)] == v {
            stack.push((i, j - 1));
        } else {
            let k = (i + 1..j - 1)
                .find(|&k| table[at(i, k)] + table[at(k + 1, j)] == v)
                .expect("traceback split exists");
            stack.push((k + 1, j));
            stack.push((i, k));
        }
    }
    let pairs = if n > 1 { table[at(0, n - 1)] } else { 0 };
    Fold {
        energy: -(pairs as f64),
        structure: structure.into_iter().collect(),
    }
}

fn fold_external(command: &[String], sequence: &str) -> Result<Fold> {
    let display = command.join(" ");
    let ext_err = |message: String| Error::External {
        command: display.clone(),
        message,
    };
    let mut child = Command::new(&command[0])
        .args(&command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| ext_err(format!("spawn failed: {e}")))?;
    {
        let mut stdin = child.stdin.take().expect("stdin piped");
        writeln!(stdin, "{sequence}").map_err(|e| ext_err(format!("write failed: {e}")))?;
    }
    let output = child
        .wait_with_output()
        .map_err(|e| ext_err(format!("wait failed: {e}")))?;
    if !output.status.success() {
        return Err(ext_err(format!(
            "exit status {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let fold = parse_fold_line(&stdout)?;
    if fold.structure.chars().count() != sequence.len() {
        return Err(Error::ExternalParse(format!(
            "structure length {} differs from sequence length {}",
            fold.structure.len(),
            sequence.len()
        )));
    }
    Ok(fold)
}

/// Parses the last non-empty line of folder output, e.g.
/// `((((...)))) ( -5.40)`.
pub fn parse_fold_line(output: &str) -> Result<Fold> {
    let line = output
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| Error::ExternalParse("empty output".into()))?;
    let split = line
        .find(|c: char| !matches!(c, '.' | '(' | ')'))
        .ok_or_else(|| Error::ExternalParse(format!("no energy in {line:?}")))?;
    let (structure, rest) = line.split_at(split);
    let rest = rest.trim();
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| {
            Error::ExternalParse(format!("expected parenthesized energy in {line:?}"))
        })?;
    let energy: f64 = inner
        .trim()
        .parse()
        .map_err(|_| Error::ExternalParse(format!("bad energy {inner:?}")))?;
    if structure.is_empty() {
        return Err(Error::ExternalParse(format!("no structure in {line:?}")));
    }
    pair_table(structure).map_err(|e| Error::ExternalParse(e.to_string()))?;
    Ok(Fold {
        energy,
        structure: structure.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold(s: &str) -> Fold {
        RnaFolder::default().fold(s).unwrap()
    }

    #[test]
    fn small_examples() {
        assert_eq!(
            fold("GGGAAACCC"),
            Fold {
                energy: -3.0,
                structure: "(((...)))".into()
            }
        );
        assert_eq!(fold("AAAA").structure, "....");
        assert_eq!(fold("AAAA").energy, 0.0);
        assert_eq!(fold("GC").energy, 0.0);
        assert_eq!(fold("G").structure, ".");
        assert_eq!(fold("GAAAC").structure, "(...)");
        assert_eq!(fold("GAAC").structure, "....");
    }

    #[test]
    fn two_hairpin_target_is_reachable() {
        let f = fold("GGGGAAAACCCCAAAACCCCAAAAGGGG");
        assert_eq!(f.structure, "((((....))))....((((....))))");
        assert_eq!(f.energy, -8.0);
    }

    #[test]
    fn wobble_pairs_count() {
        assert_eq!(fold("GAAAU").energy, -1.0);
        assert_eq!(fold("UAAAG").energy, -1.0);
    }

    #[test]
    fn invalid_letters() {
        assert!(matches!(
            RnaFolder::default().fold("GAXC"),
            Err(Error::InvalidNucleotide {
                letter: 'X',
                position: 2
            })
        ));
        assert!(RnaFolder::default().fold("").is_err());
    }

    #[test]
    fn lowercase_is_accepted() {
        assert_eq!(fold("gggaaaccc").energy, -3.0);
    }

    #[test]
    fn pair_table_parsing() {
        let t = pair_table("(((...)))").unwrap();
        assert_eq!(t[0], Some(8));
        assert_eq!(t[2], Some(6));
        assert_eq!(t[4], None);
        assert!(matches!(
            pair_table("(()"),
            Err(Error::StructureParse { position: 0, .. })
        ));
        assert!(matches!(
            pair_table("())"),
            Err(Error::StructureParse { position: 2, .. })
        ));
        assert!(pair_table("(x)").is_err());
    }

    #[test]
    fn hamming() {
        assert_eq!(normalized_hamming("((..))", "((..))").unwrap(), 0.0);
        assert_eq!(normalized_hamming("(..)", ".().").unwrap(), 1.0);
        assert_eq!(normalized_hamming("(..)", "....").unwrap(), 0.5);
        assert!(normalized_hamming("..", "...").is_err());
    }

    #[test]
    fn fold_line_parsing() {
        let f = parse_fold_line("GGGAAACCC\n(((...))) ( -5.40)\n").unwrap();
        assert_eq!(f.structure, "(((...)))");
        assert_eq!(f.energy, -5.4);
        let f = parse_fold_line("  ....(...)   (  0.00 )  \n\n").unwrap();
        assert_eq!(f.structure, "....(...)");
        assert_eq!(f.energy, 0.0);
        assert!(parse_fold_line("").is_err());
        assert!(parse_fold_line("(((...)))").is_err());
        assert!(parse_fold_line("(((...))) -5.4").is_err());
        assert!(parse_fold_line("((...) (-1.0)").is_err());
    }

    #[cfg(unix)]
    #[test]
    fn external_process_roundtrip() {
        let folder = RnaFolder::ExternalProcess {
            command: vec![
                "sh".into(),
                "-c".into(),
                "read s; echo $s; echo '(((...))) (-3.10)'".into(),
            ],
        };
        let f = folder.fold("GGGAAACCC").unwrap();
        assert_eq!(f.structure, "(((...)))");
        assert_eq!(f.energy, -3.1);
        assert!(folder.fold("GGGAAAC").is_err());

        let failing = RnaFolder::ExternalProcess {
            command: vec!["sh".into(), "-c".into(), "exit 3".into()],
        };
        assert!(matches!(
            failing.fold("GGGAAACCC"),
            Err(Error::External { .. })
        ));
        let missing = RnaFolder::ExternalProcess {
            command: vec!["/nonexistent/folder-binary".into()],
        };
        assert!(matches!(
            missing.fold("GGGAAACCC"),
            Err(Error::External { .. })
        ));
    }
}
