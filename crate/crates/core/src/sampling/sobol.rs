use super::direction_numbers::{DIRECTION_TABLE, MAX_DIM};
use crate::error::{Error, Result};
use crate::seed::{derive_indexed, mix64};

const BITS: usize = 32;
const SCALE: f64 = 1.0 / 4_294_967_296.0;

/// Largest supported dimension.
pub const SOBOL_MAX_DIM: usize = MAX_DIM;

fn direction_vectors(dim: usize) -> Vec<[u32; BITS]> {
    let mut out = Vec::with_capacity(dim);
    let mut first = [0u32; BITS];
    for (i, v) in first.iter_mut().enumerate() {
        *v = 1u32 << (BITS - 1 - i);
    }
    out.push(first);
    for &(s, a, m) in DIRECTION_TABLE.iter().take(dim.saturating_sub(1)) {
        let s = s as usize;
        let mut v = [0u32; BITS];
        for i in 0..s.min(BITS) {
            v[i] = m[i] << (BITS - 1 - i);
        }
        for i in s..BITS {
            let mut x = v[i - s] ^ (v[i - s] >> s);
            for k in 1..s {
                if (a >> (s - 1 - k)) & 1 == 1 {
                    x ^= v[i - k];
                }
            }
            v[i] = x;
        }
        out.push(v);
    }
    out
}

/// Hash-based nested uniform (Owen) scramble of a 32-bit fixed-point
/// coordinate. Each output bit depends only on the seed and the higher input
/// bits, as in a random permutation tree.
fn owen_scramble(x: u32, seed: u32) -> u32 {
    let mut n = x.reverse_bits();
    n ^= n.wrapping_mul(0x3d20_adea);
    n = n.wrapping_add(seed);
    n = n.wrapping_mul((seed >> 16) | 1);
    n ^= n.wrapping_mul(0x0552_6c56);
    n ^= n.wrapping_mul(0x53a2_2864);
    n.reverse_bits()
}

/// Gray-code Sobol' generator with optional Owen scrambling.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
    scramble: Option<Vec<u32>>,
}

impl SobolSequence {
    pub fn new(dim: usize, scramble_seed: Option<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "Sobol dimension must be at least 1".into(),
            ));
        }
        if dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "Sobol dimension {dim} exceeds the {MAX_DIM} available direction-number sets"
            )));
        }
        let scramble = scramble_seed.map(|s| {
            (0..dim as u64)
                .map(|j| (mix64(derive_indexed(s, "owen", j)) >> 32) as u32)
                .collect()
        });
        Ok(Self {
            directions: direction_vectors(dim),
            state: vec![0; dim],
            index: 0,
            scramble,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Jump to an arbitrary index.
    pub fn seek(&mut self, index: u64) {
        let gray = index ^ (index >> 1);
        for (s, v) in self.state.iter_mut().zip(&self.directions) {
            let mut x = 0u32;
            for (bit, dir) in v.iter().enumerate() {
                if (gray >> bit) & 1 == 1 {
                    x ^= dir;
                }
            }
            *s = x;
        }
        self.index = index;
    }

    /// Emit the current point and advance.
    pub fn next_point(&mut self) -> Vec<f64> {
        let out = match &self.scramble {
            None => self.state.iter().map(|&x| f64::from(x) * SCALE).collect(),
            Some(seeds) => self
                .state
                .iter()
                .zip(seeds)
                .map(|(&x, &s)| f64::from(owen_scramble(x, s)) * SCALE)
                .collect(),
        };
        let c = (!self.index).trailing_zeros() as usize;
        assert!(c < BITS, "Sobol index space exhausted");
        for (s, v) in self.state.iter_mut().zip(&self.directions) {
            *s ^= v[c];
        }
        self.index += 1;
        out
    }
}

impl Iterator for SobolSequence {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.next_point())
    }
}

/// `n` rows of a `dim`-dimensional Sobol' sequence starting at index `skip`.
/// Every entry lies in `[0, 1)`.
pub fn sobol_unit(
    dim: usize,
    n: usize,
    skip: u64,
    scramble_seed: Option<u64>,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let mut seq = SobolSequence::new(dim, scramble_seed)?;
    seq.seek(skip);
    Ok((0..n).map(|_| seq.next_point()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_unscrambled() {
        let s = sobol_unit(2, 2, 0, None).unwrap();
        assert_eq!(s, vec![vec![0.0, 0.0], vec![0.5, 0.5]]);
        let s = sobol_unit(1, 4, 0, None).unwrap();
        assert_eq!(
            s.iter().map(|r| r[0]).collect::<Vec<_>>(),
            vec![0.0, 0.5, 0.75, 0.25]
        );
    }

    #[test]
    fn seek_matches_sequential() {
        let all = sobol_unit(5, 40, 0, Some(3)).unwrap();
        let tail = sobol_unit(5, 10, 30, Some(3)).unwrap();
        assert_eq!(&all[30..], &tail[..]);
    }

    #[test]
    fn dimension_limits() {
        assert!(SobolSequence::new(0, None).is_err());
        assert!(SobolSequence::new(SOBOL_MAX_DIM, None).is_ok());
        assert!(SobolSequence::new(SOBOL_MAX_DIM + 1, None).is_err());
    }

    #[test]
    fn owen_scramble_preserves_stratification() {
        // Scrambling permutes elementary intervals, so the first 2^k points
        // still occupy every dyadic interval of length 2^-k exactly once.
        let pts = sobol_unit(3, 64, 0, Some(99)).unwrap();
        for j in 0..3 {
            let mut counts = [0usize; 64];
            for p in &pts {
                counts[(p[j] * 64.0) as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1), "dim {j}: {counts:?}");
        }
    }
}
