use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use super::Configuration;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::invalid(format!("unknown Pauli letter `{other}`"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        Self(ops)
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n])
    }

    pub fn single(n: usize, site: usize, op: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.0[site] = op;
        s
    }

    pub fn set(&mut self, site: usize, op: Pauli) {
        self.0[site] = op;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    /// `P|index> = phase |flipped>`.
    pub fn apply_index(&self, index: u64) -> (u64, Complex64) {
        let mut out = index;
        let mut phase = Complex64::new(1.0, 0.0);
        for (j, op) in self.0.iter().enumerate() {
            let bit = (index >> j) & 1;
            match op {
                Pauli::I => {}
                Pauli::X => out ^= 1 << j,
                Pauli::Y => {
                    out ^= 1 << j;
                    // Y|0> = i|1>, Y|1> = -i|0>
                    phase *= if bit == 0 {
                        Complex64::i()
                    } else {
                        -Complex64::i()
                    };
                }
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        (out, phase)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, string: PauliString) -> Self {
        Self {
            coefficient,
            string,
        }
    }
}

/// `H = Σ_k c_k P_k` with real coefficients and Pauli strings of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSumHamiltonian {
    n_sites: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSumHamiltonian {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        let n_sites = terms
            .first()
            .map(|t| t.string.len())
            .ok_or_else(|| Error::invalid("Pauli sum needs at least one term"))?;
        for t in &terms {
            check_len(n_sites, t.string.len())?;
            if !t.coefficient.is_finite() {
                return Err(Error::invalid("Pauli coefficients must be finite"));
            }
        }
        Ok(Self { n_sites, terms })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `(σ', <σ'|H|σ>)` for packed indices, merged and with zeros dropped,
    /// sorted by target index.
    pub fn row_index(&self, index: u64) -> Vec<(u64, Complex64)> {
        let mut acc: BTreeMap<u64, Complex64> = BTreeMap::new();
        for t in &self.terms {
            let (target, phase) = t.string.apply_index(index);
            *acc.entry(target).or_default() += phase * t.coefficient;
        }
        acc.into_iter().filter(|(_, v)| v.norm() > 0.0).collect()
    }

    /// Non-zero elements `<σ'|H|σ>` of the column of `σ`.
    pub fn matrix_row(&self, sigma: &Configuration) -> Result<Vec<(Configuration, Complex64)>> {
        check_len(self.n_sites, sigma.len())?;
        Ok(self
            .row_index(sigma.to_index())
            .into_iter()
            .map(|(i, v)| (Configuration::from_index(i, self.n_sites), v))
            .collect())
    }

    /// One term per line: `coefficient pauli_string`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let coef = parts
                .next()
                .ok_or_else(|| Error::parse(n + 1, "missing coefficient"))?
                .parse::<f64>()
                .map_err(|e| Error::parse(n + 1, e.to_string()))?;
            let string = parts
                .next()
                .ok_or_else(|| Error::parse(n + 1, "missing Pauli string"))?
                .parse::<PauliString>()
                .map_err(|e| Error::parse(n + 1, e.to_string()))?;
            if parts.next().is_some() {
                return Err(Error::parse(n + 1, "trailing tokens"));
            }
            terms.push(PauliTerm::new(coef, string));
        }
        Self::new(terms)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            s.push_str(&format!("{} {}\n", t.coefficient, t.string));
        }
        s
    }
}

/// Free-function form of [`PauliSumHamiltonian::matrix_row`].
pub fn pauli_matrix_row(
    sigma: &Configuration,
    ham: &PauliSumHamiltonian,
) -> Result<Vec<(Configuration, Complex64)>> {
    ham.matrix_row(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ham(text: &str) -> PauliSumHamiltonian {
        PauliSumHamiltonian::parse(text).unwrap()
    }

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_rows() {
        let z = ham("1.0 Z");
        assert_eq!(
            z.matrix_row(&cfg("1")).unwrap(),
            vec![(cfg("1"), Complex64::new(-1.0, 0.0))]
        );
        let x = ham("0.5 X");
        assert_eq!(
            x.matrix_row(&cfg("0")).unwrap(),
            vec![(cfg("1"), Complex64::new(0.5, 0.0))]
        );
        let y = ham("1.0 Y");
        assert_eq!(
            y.matrix_row(&cfg("0")).unwrap(),
            vec![(cfg("1"), Complex64::new(0.0, 1.0))]
        );
        assert_eq!(
            y.matrix_row(&cfg("1")).unwrap(),
            vec![(cfg("0"), Complex64::new(0.0, -1.0))]
        );
    }

    #[test]
    fn cancelling_terms_are_dropped() {
        let h = ham("1.0 ZI\n-1.0 ZI\n0.25 IX");
        let row = h.matrix_row(&cfg("00")).unwrap();
        assert_eq!(row, vec![(cfg("01"), Complex64::new(0.25, 0.0))]);
    }

    #[test]
    fn parse_errors() {
        assert!(PauliSumHamiltonian::parse("1.0 XQ").is_err());
        assert!(PauliSumHamiltonian::parse("1.0 XZ\n1.0 X").is_err());
        assert!(PauliSumHamiltonian::parse("abc XZ").is_err());
        assert!(PauliSumHamiltonian::parse("# only comments\n").is_err());
        let h = ham("# comment\n0.5 XZI # trailing\n-1 YYZ\n");
        assert_eq!(h.terms().len(), 2);
        assert_eq!(ham(&h.to_text()), h);
    }

    #[test]
    fn length_mismatch() {
        assert!(ham("1 XZ").matrix_row(&cfg("0")).is_err());
    }
}
