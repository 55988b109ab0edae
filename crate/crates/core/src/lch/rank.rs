//! Rank of a monodromy character with rational exponents.

use num_rational::BigRational;
use num_traits::{One, Zero};

/// Character values `Π_j q_j^{r_ij}` for fixed, multiplicatively independent
/// bases `q_j`, stored as exponent vectors `r_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonodromyCharacter {
    pub exponents: Vec<Vec<BigRational>>,
}

impl MonodromyCharacter {
    /// Values `q^{r_i}` for a single base `q`.
    pub fn single_base(exponents: Vec<BigRational>) -> Self {
        MonodromyCharacter {
            exponents: exponents.into_iter().map(|r| vec![r]).collect(),
        }
    }

    /// Parses exponents such as `"1"`, `"-3/4"`.
    pub fn parse_single_base(src: &[&str]) -> Result<Self, num_rational::ParseRatioError> {
        let rs = src
            .iter()
            .map(|s| s.trim().parse::<BigRational>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::single_base(rs))
    }
}

/// Rank of the image group, i.e. the dimension over ℚ of the span of the
/// exponent vectors, by exact Gaussian elimination.
pub fn monodromy_rank(chi: &MonodromyCharacter) -> usize {
    let mut rows: Vec<Vec<BigRational>> = chi.exponents.clone();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    for r in &mut rows {
        r.resize(cols, BigRational::zero());
    }
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = BigRational::one() / rows[rank][c].clone();
        let pivot_row: Vec<BigRational> = rows[rank].iter().map(|v| v * &inv).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= &f * p;
                }
            }
        }
        rows[rank] = pivot_row;
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank_of(src: &[&str]) -> usize {
        monodromy_rank(&MonodromyCharacter::parse_single_base(src).unwrap())
    }

    #[test]
    fn single_base_ranks() {
        assert_eq!(rank_of(&["1"]), 1);
        assert_eq!(rank_of(&["0", "0", "0"]), 0);
        assert_eq!(rank_of(&["1", "1/2", "3"]), 1);
        assert_eq!(rank_of(&[]), 0);
    }

    #[test]
    fn independent_bases() {
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        let chi = MonodromyCharacter {
            exponents: vec![vec![r(1, 1), r(0, 1)], vec![r(2, 1), r(0, 1)], vec![r(1, 3), r(1, 2)]],
        };
        assert_eq!(monodromy_rank(&chi), 2);
    }
}
