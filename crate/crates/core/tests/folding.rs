use std::collections::HashMap;

use catfour::rna::{can_pair, decode, encode, nussinov, pair_table, RnaFolder, ALPHABET};
use catfour::verify::{brute_force_pairs, structure_is_consistent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First-base recursion: base i is unpaired or pairs with some l.
fn memo_pairs(
    seq: &[usize],
    i: usize,
    j: usize,
    min_loop: usize,
    memo: &mut HashMap<(usize, usize), u32>,
) -> u32 {
    if i >= j || j - i <= min_loop {
        return 0;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let mut best = memo_pairs(seq, i + 1, j, min_loop, memo);
    for l in i + min_loop + 1..=j {
        if can_pair(ALPHABET[seq[i]], ALPHABET[seq[l]]) {
            let inner = if l > i + 1 {
                memo_pairs(seq, i + 1, l - 1, min_loop, memo)
            } else {
                0
            };
            let rest = if l < j {
                memo_pairs(seq, l + 1, j, min_loop, memo)
            } else {
                0
            };
            best = best.max(1 + inner + rest);
        }
    }
    memo.insert((i, j), best);
    best
}

fn recursion_pairs(seq: &[usize], min_loop: usize) -> u32 {
    if seq.is_empty() {
        return 0;
    }
    memo_pairs(seq, 0, seq.len() - 1, min_loop, &mut HashMap::new())
}

#[test]
fn dp_matches_enumeration_up_to_length_six() {
    for len in 1..=6u32 {
        for code in 0..4usize.pow(len) {
            let seq: Vec<usize> = (0..len).map(|p| (code >> (2 * p)) & 3).collect();
            let fold = nussinov(&seq, 3);
            let pairs = -fold.energy as u32;
            assert_eq!(pairs, brute_force_pairs(&seq, 3), "{}", decode(&seq));
            assert!(structure_is_consistent(&seq, &fold.structure, 3, pairs));
        }
    }
}

#[test]
fn dp_matches_memoized_recursion_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for len in [12, 20, 35] {
        for _ in 0..50 {
            let seq: Vec<usize> = (0..len).map(|_| rng.random_range(0..4)).collect();
            for min_loop in [0, 3] {
                let fold = nussinov(&seq, min_loop);
                let pairs = -fold.energy as u32;
                assert_eq!(pairs, recursion_pairs(&seq, min_loop), "{}", decode(&seq));
                assert!(structure_is_consistent(
                    &seq,
                    &fold.structure,
                    min_loop,
                    pairs
                ));
            }
        }
    }
}

#[test]
fn folder_output_round_trips_through_pair_table() {
    let f = RnaFolder::default();
    let fold = f.fold("GGGGAAAACCCCAAAACCCCAAAAGGGG").unwrap();
    let table = pair_table(&fold.structure).unwrap();
    assert_eq!(table.iter().filter(|p| p.is_some()).count(), 16);
    assert!(encode("ACGT").is_err());
}
