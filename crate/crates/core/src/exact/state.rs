use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense amplitude vector over the `2^N` occupation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    n_sites: usize,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>, n_sites: usize) -> Result<Self> {
        if n_sites >= usize::BITS as usize || amplitudes.len() != 1usize << n_sites {
            return Err(Error::LengthMismatch {
                expected: 1usize.checked_shl(n_sites as u32).unwrap_or(0),
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            n_sites,
        })
    }

    pub fn from_real(amplitudes: &[f64], n_sites: usize) -> Result<Self> {
        Self::new(
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
            n_sites,
        )
    }

    /// Computational basis state `|index>`.
    pub fn basis(index: u64, n_sites: usize) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_sites];
        *amps
            .get_mut(index as usize)
            .ok_or_else(|| Error::invalid("basis index out of range"))? = Complex64::new(1.0, 0.0);
        Self::new(amps, n_sites)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: u64) -> Complex64 {
        self.amplitudes[index as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid(
                "cannot normalize a zero or non-finite state",
            ));
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        Ok(self)
    }

    /// Born probabilities `|ψ(σ)|²`, renormalized to sum to one.
    pub fn probabilities(&self) -> Vec<f64> {
        let z = self.norm_sqr();
        self.amplitudes.iter().map(|a| a.norm_sqr() / z).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Little-endian `(re, im)` f64 pairs plus a text sidecar next to it
    /// (`<path>.txt`) recording `n_sites` and the site ordering.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(self.dim() * 16);
        for a in &self.amplitudes {
            bytes.extend_from_slice(&a.re.to_le_bytes());
            bytes.extend_from_slice(&a.im.to_le_bytes());
        }
        fs::write(path, bytes)?;
        fs::write(
            sidecar(path),
            format!(
                "n_sites={}\nordering=row-major\nbit_convention=bit j = occupation of site j\nformat=complex128-le\n",
                self.n_sites
            ),
        )?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = fs::read_to_string(sidecar(path))?;
        let n_sites = meta
            .lines()
            .find_map(|l| l.strip_prefix("n_sites="))
            .ok_or_else(|| Error::parse(1, "sidecar without n_sites"))?
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::parse(1, e.to_string()))?;
        let bytes = fs::read(path)?;
        if bytes.len() % 16 != 0 {
            return Err(Error::invalid(
                "state file is not a whole number of complex values",
            ));
        }
        let amps = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::new(amps, n_sites)
    }
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    s.into()
}

/// `|<a|b>|²` for normalized inputs; inputs are normalized on the fly.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    let ov = a.inner(b)?.norm_sqr();
    Ok((ov / (a.norm_sqr() * b.norm_sqr())).clamp(0.0, 1.0))
}
