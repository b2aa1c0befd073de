use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{EitError, Result};

/// Injection amplitude of the built-in schemes (1 mA).
pub const INJECTION_CURRENT: f64 = 1e-3;

/// `L` zero-mean current patterns over `M` electrodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPatternSet {
    n_electrodes: usize,
    patterns: Vec<Vec<f64>>,
}

impl CurrentPatternSet {
    /// Checks zero mean and linear independence.
    pub fn new(n_electrodes: usize, patterns: Vec<Vec<f64>>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(EitError::Input("no current patterns given".into()));
        }
        for (l, p) in patterns.iter().enumerate() {
            if p.len() != n_electrodes {
                return Err(EitError::Shape(format!(
                    "pattern {l} has {} entries, expected {n_electrodes}",
                    p.len()
                )));
            }
            check_zero_mean(p).map_err(|e| EitError::Input(format!("pattern {l}: {e}")))?;
        }
        let set = Self { n_electrodes, patterns };
        let rank = set.rank();
        if rank < set.len() {
            return Err(EitError::Input(format!(
                "current patterns are linearly dependent (rank {rank} < {})",
                set.len()
            )));
        }
        Ok(set)
    }

    pub fn n_electrodes(&self) -> usize {
        self.n_electrodes
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn pattern(&self, l: usize) -> &[f64] {
        &self.patterns[l]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.patterns.iter().map(|p| p.as_slice())
    }

    /// `M × L` matrix with the patterns as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_electrodes, self.len(), |m, l| self.patterns[l][m])
    }

    pub fn rank(&self) -> usize {
        let a = self.matrix();
        let sv = a.singular_values();
        let tol = sv.max() * 1e-10 * self.n_electrodes.max(self.len()) as f64;
        sv.iter().filter(|&&s| s > tol).count()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_electrodes: self.n_electrodes,
            patterns: self.patterns.iter().map(|p| p.iter().map(|x| x * factor).collect()).collect(),
        }
    }
}

pub(crate) fn check_zero_mean(p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let scale: f64 = p.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    if sum.abs() > 1e-12 * scale {
        return Err(EitError::Input(format!("current pattern is not zero-mean (sum = {sum:e})")));
    }
    Ok(())
}

/// One 1 mA pattern per `(source, sink)` pair; electrode indices are zero-based.
pub fn build_current_patterns(n_electrodes: usize, pairs: &[(usize, usize)]) -> Result<CurrentPatternSet> {
    let mut seen = Vec::with_capacity(pairs.len());
    let mut patterns = Vec::with_capacity(pairs.len());
    for (l, &(src, snk)) in pairs.iter().enumerate() {
        if src >= n_electrodes || snk >= n_electrodes {
            return Err(EitError::Input(format!(
                "pair {l} ({src}, {snk}) references an electrode >= {n_electrodes}"
            )));
        }
        if src == snk {
            return Err(EitError::Input(format!("pair {l}: source and sink are both electrode {src}")));
        }
        let key = (src.min(snk), src.max(snk));
        if seen.contains(&key) {
            return Err(EitError::Input(format!("duplicate current pattern ({src}, {snk})")));
        }
        seen.push(key);
        let mut p = vec![0.0; n_electrodes];
        p[src] = INJECTION_CURRENT;
        p[snk] = -INJECTION_CURRENT;
        patterns.push(p);
    }
    CurrentPatternSet::new(n_electrodes, patterns)
}

/// Named injection schemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternScheme {
    /// Sources on odd (zero-based) electrodes only, sink `skip` positions ahead.
    OddSkip(usize),
    /// Every electrode drives its next neighbour; the last pair is dropped.
    Adjacent,
    /// Explicit pairs.
    Pairs(Vec<(usize, usize)>),
}

impl PatternScheme {
    pub fn pairs(&self, n_electrodes: usize) -> Result<Vec<(usize, usize)>> {
        match self {
            PatternScheme::OddSkip(skip) => {
                if *skip == 0 || skip % n_electrodes == 0 {
                    return Err(EitError::Input(format!("skip {skip} maps sources onto themselves")));
                }
                Ok((1..n_electrodes).step_by(2).map(|s| (s, (s + skip) % n_electrodes)).collect())
            }
            PatternScheme::Adjacent => Ok((0..n_electrodes - 1).map(|s| (s, s + 1)).collect()),
            PatternScheme::Pairs(p) => Ok(p.clone()),
        }
    }

    pub fn build(&self, n_electrodes: usize) -> Result<CurrentPatternSet> {
        build_current_patterns(n_electrodes, &self.pairs(n_electrodes)?)
    }
}

impl FromStr for PatternScheme {
    type Err = EitError;

    /// Accepts `odd-skip-<k>`, `adjacent`, or `pairs:<s>-<t>,<s>-<t>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "adjacent" {
            return Ok(PatternScheme::Adjacent);
        }
        if let Some(k) = s.strip_prefix("odd-skip-") {
            let k = k
                .parse()
                .map_err(|_| EitError::Config(format!("bad skip in pattern scheme '{s}'")))?;
            return Ok(PatternScheme::OddSkip(k));
        }
        if let Some(list) = s.strip_prefix("pairs:") {
            let pairs = list
                .split(',')
                .map(|p| {
                    let (a, b) = p
                        .split_once('-')
                        .ok_or_else(|| EitError::Config(format!("bad pair '{p}' in pattern scheme")))?;
                    let a = a.trim().parse().map_err(|_| EitError::Config(format!("bad pair '{p}'")))?;
                    let b = b.trim().parse().map_err(|_| EitError::Config(format!("bad pair '{p}'")))?;
                    Ok((a, b))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(PatternScheme::Pairs(pairs));
        }
        Err(EitError::Config(format!("unknown pattern scheme '{s}'")))
    }
}

impl std::fmt::Display for PatternScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PatternScheme::OddSkip(k) => write!(f, "odd-skip-{k}"),
            PatternScheme::Adjacent => write!(f, "adjacent"),
            PatternScheme::Pairs(p) => {
                write!(f, "pairs:")?;
                for (i, (a, b)) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}-{b}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let set = build_current_patterns(32, &[(1, 17)]).unwrap();
        let p = set.pattern(0);
        assert_eq!(p[1], 0.001);
        assert_eq!(p[17], -0.001);
        assert_eq!(p.iter().filter(|x| **x != 0.0).count(), 2);
    }

    #[test]
    fn duplicate_and_reversed_pairs_rejected() {
        assert!(build_current_patterns(8, &[(1, 3), (1, 3)]).is_err());
        assert!(build_current_patterns(8, &[(1, 3), (3, 1)]).is_err());
        assert!(build_current_patterns(8, &[(2, 2)]).is_err());
    }

    #[test]
    fn dependent_patterns_rejected() {
        // (0,1) + (1,2) = (0,2)
        assert!(build_current_patterns(4, &[(0, 1), (1, 2), (0, 2)]).is_err());
    }

    #[test]
    fn odd_skip_scheme_has_full_rank() {
        for skip in [1, 3, 15, 17] {
            let set = PatternScheme::OddSkip(skip).build(32).unwrap();
            assert_eq!(set.len(), 16);
            assert_eq!(set.rank(), 16);
            for p in set.iter() {
                assert!(p.iter().sum::<f64>().abs() < 1e-18);
            }
            for (l, p) in set.iter().enumerate() {
                assert_eq!(p[2 * l + 1], INJECTION_CURRENT);
            }
        }
        // Opposite injection repeats pairs with swapped sign.
        assert!(PatternScheme::OddSkip(16).build(32).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for name in ["odd-skip-15", "adjacent", "pairs:1-17,3-19"] {
            let s: PatternScheme = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("nonsense".parse::<PatternScheme>().is_err());
    }

    #[test]
    fn non_zero_mean_rejected() {
        assert!(CurrentPatternSet::new(3, vec![vec![1.0, 0.0, 0.0]]).is_err());
    }
}
