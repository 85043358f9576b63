use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::space::{MixedDesignSpace, MixedPoint};

const REPAIR_ATTEMPTS: usize = 10_000;

/// Balanced column of `n` level labels: counts differ by at most one, and the
/// levels receiving the extra copy are drawn at random.
fn balanced_levels(levels: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut col: Vec<usize> = (0..n / levels).flat_map(|_| 1..=levels).collect();
    let mut extra: Vec<usize> = (1..=levels).collect();
    extra.shuffle(rng);
    col.extend_from_slice(&extra[..n % levels]);
    col.shuffle(rng);
    col
}

/// Initial design of experiments.
///
/// Quantitative columns are Latin-hypercube stratified; each qualitative
/// column is level-balanced, which guarantees every level of the largest
/// qualitative variable appears at least once. Duplicate rows are repaired by
/// swapping entries within a qualitative column (counts are preserved).
pub fn initial_doe(space: &MixedDesignSpace, n: usize, seed: u64) -> Result<Vec<MixedPoint>> {
    let max_levels = space.levels().into_iter().max().unwrap_or(0);
    if n == 0 || n < max_levels {
        return Err(Error::InvalidArgument(format!(
            "DOE size {n} is below the minimum {}",
            max_levels.max(1)
        )));
    }
    if space.is_qualitative_only() {
        let card = space.cardinality()?;
        if (n as u64) > card {
            return Err(Error::InvalidArgument(format!(
                "DOE size {n} exceeds the {card} distinct designs of the space"
            )));
        }
    }
    let mut rng = rng_for(seed, "doe");

    let mut xcols: Vec<Vec<f64>> = Vec::with_capacity(space.q());
    for v in space.quantitative() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        xcols.push(
            strata
                .into_iter()
                .map(|s| {
                    let u = (s as f64 + rng.gen::<f64>()) / n as f64;
                    v.lower + u * (v.upper - v.lower)
                })
                .collect(),
        );
    }
    let mut tcols: Vec<Vec<usize>> = space
        .qualitative()
        .iter()
        .map(|v| balanced_levels(v.num_levels, n, &mut rng))
        .collect();

    if space.q() == 0 && space.m() > 0 {
        repair_duplicates(&mut tcols, n, &mut rng)?;
    }

    let points = (0..n)
        .map(|i| {
            MixedPoint::new(
                xcols.iter().map(|c| c[i]).collect(),
                tcols.iter().map(|c| c[i]).collect(),
            )
        })
        .collect();
    Ok(points)
}

fn repair_duplicates(tcols: &mut [Vec<usize>], n: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let row = |cols: &[Vec<usize>], i: usize| -> Vec<usize> { cols.iter().map(|c| c[i]).collect() };
    for _ in 0..REPAIR_ATTEMPTS {
        let mut seen = HashSet::with_capacity(n);
        let dup = (0..n).find(|&i| !seen.insert(row(tcols, i)));
        let Some(i) = dup else { return Ok(()) };
        let j = rng.gen_range(0..tcols.len());
        let other = rng.gen_range(0..n);
        tcols[j].swap(i, other);
    }
    Err(Error::InvalidArgument(
        "could not build a duplicate-free DOE".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(points: &[MixedPoint], j: usize, levels: usize) -> Vec<usize> {
        let mut c = vec![0; levels];
        for p in points {
            c[p.t[j] - 1] += 1;
        }
        c
    }

    #[test]
    fn largest_variable_covered_once() {
        let s =
            MixedDesignSpace::from_parts(&[], &[("a", 4), ("b", 7), ("c", 41), ("d", 42)]).unwrap();
        let doe = initial_doe(&s, 42, 5).unwrap();
        assert_eq!(counts(&doe, 3, 42), vec![1; 42]);
        for (j, l) in [(0, 4), (1, 7), (2, 41)] {
            let c = counts(&doe, j, l);
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
        }
        let uniq: HashSet<_> = doe.iter().map(|p| p.t.clone()).collect();
        assert_eq!(uniq.len(), 42);
    }

    #[test]
    fn balanced_single_variable() {
        let s = MixedDesignSpace::from_parts(&[], &[("t", 3)]).unwrap();
        let doe = initial_doe(&s, 3, 1).unwrap();
        assert_eq!(counts(&doe, 0, 3), vec![1, 1, 1]);
        let s = MixedDesignSpace::from_parts(&[("x", 0.0, 1.0)], &[("t", 3)]).unwrap();
        let doe = initial_doe(&s, 6, 1).unwrap();
        assert_eq!(counts(&doe, 0, 3), vec![2, 2, 2]);
    }

    #[test]
    fn latin_hypercube_strata() {
        let s = MixedDesignSpace::from_parts(&[("x1", -2.0, 3.0), ("x2", 0.0, 1.0)], &[]).unwrap();
        let doe = initial_doe(&s, 5, 11).unwrap();
        for (j, v) in s.quantitative().iter().enumerate() {
            let mut fifths: Vec<usize> = doe
                .iter()
                .map(|p| (((p.x[j] - v.lower) / (v.upper - v.lower)) * 5.0) as usize)
                .collect();
            fifths.sort_unstable();
            assert_eq!(fifths, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn errors_and_determinism() {
        let s = MixedDesignSpace::from_parts(&[], &[("a", 2), ("b", 3)]).unwrap();
        assert!(initial_doe(&s, 2, 0).is_err());
        assert!(initial_doe(&s, 7, 0).is_err());
        assert!(initial_doe(&s, 6, 0).is_ok());
        let a = initial_doe(&s, 5, 9).unwrap();
        let b = initial_doe(&s, 5, 9).unwrap();
        assert_eq!(a, b);
    }
}
