//! Square-array geometry and the Rydberg Hamiltonian
//!
//! ```text
//! H = -Ω Σ_r Sx(r) - δ Σ_r Π(r) + Σ_{r<r'} V(r - r') Π(r) Π(r')
//! ```
//!
//! with `Sx = σx / 2`, `Π = |e><e|` and `V(r) = V0 / |r|^6` truncated to a
//! fixed number of neighbour shells. Each unordered pair is listed once, which
//! absorbs the usual one-half in front of the double sum.
//!
//! Basis convention: site `j` is bit `j` of the basis index, `1` meaning the
//! atom is in the Rydberg state. Sites are numbered row-major, `j = x + Lx*y`.

mod operator;
mod pauli;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use operator::{mean_spin, LocalOperator};
pub use pauli::{pauli_matrix_row, Pauli, PauliString, PauliSumHamiltonian, PauliTerm};

use crate::error::{check_len, Error, Result};

/// Largest number of sites supported by the bit-packed basis index.
pub const MAX_SITES: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    lx: usize,
    ly: usize,
}

impl LatticeGeometry {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::invalid("lattice dimensions must be positive"));
        }
        if lx * ly > MAX_SITES {
            return Err(Error::TooLarge {
                sites: lx * ly,
                limit: MAX_SITES,
            });
        }
        Ok(Self { lx, ly })
    }

    pub fn square(l: usize) -> Result<Self> {
        Self::new(l, l)
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    /// `(x, y)` of site `index`.
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.lx, index / self.lx)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        x + self.lx * y
    }

    /// `(-1)^(x+y)`.
    pub fn stagger_sign(&self, index: usize) -> f64 {
        let (x, y) = self.coords(index);
        if (x + y) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> usize {
        let (xi, yi) = self.coords(i);
        let (xj, yj) = self.coords(j);
        let dx = xi.abs_diff(xj);
        let dy = yi.abs_diff(yj);
        dx * dx + dy * dy
    }

    /// Squared distance of the `shell`-th neighbour shell of the infinite
    /// square lattice (1-based): 1, 2, 4, 5, 8, 9, 10, ...
    pub fn shell_squared_distance(shell: usize) -> Option<usize> {
        if shell == 0 {
            return None;
        }
        let mut shells = Vec::new();
        let mut r = 1usize;
        while shells.len() < shell {
            shells.clear();
            for dx in 0..=r {
                for dy in 0..=r {
                    let d2 = dx * dx + dy * dy;
                    if d2 > 0 && d2 <= r * r {
                        shells.push(d2);
                    }
                }
            }
            shells.sort_unstable();
            shells.dedup();
            r += 1;
        }
        Some(shells[shell - 1])
    }
}

/// Interaction between an unordered pair of sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RydbergModel {
    geometry: LatticeGeometry,
    omega: f64,
    delta: f64,
    v0: f64,
    cutoff: usize,
    couplings: Vec<Coupling>,
}

impl RydbergModel {
    pub fn new(
        geometry: LatticeGeometry,
        omega: f64,
        delta: f64,
        v0: f64,
        cutoff: usize,
    ) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega must be finite and non-negative"));
        }
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::invalid("v0 must be finite and positive"));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("delta must be finite"));
        }
        if cutoff == 0 {
            return Err(Error::invalid("cutoff must retain at least one shell"));
        }
        let couplings = couplings_for(&geometry, v0, cutoff);
        Ok(Self {
            geometry,
            omega,
            delta,
            v0,
            cutoff,
            couplings,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// Same lattice and interactions at a different detuning.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::invalid("delta must be finite"));
        }
        let mut m = self.clone();
        m.delta = delta;
        Ok(m)
    }

    /// Diagonal matrix element for a packed basis index.
    pub fn diagonal_energy_index(&self, index: u64) -> f64 {
        let occupied = index.count_ones() as f64;
        let mut e = -self.delta * occupied;
        for c in &self.couplings {
            if (index >> c.i) & 1 == 1 && (index >> c.j) & 1 == 1 {
                e += c.strength;
            }
        }
        e
    }

    /// Parse the `key=value` model description format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lx = None;
        let mut ly = None;
        let mut omega = 1.0;
        let mut delta = None;
        let mut v0 = None;
        let mut cutoff = 3;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(n + 1, "expected key=value"))?;
            let value = value.trim();
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|e| Error::parse(n + 1, format!("{key}: {e}")))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|e| Error::parse(n + 1, format!("{key}: {e}")))
            };
            match key.trim() {
                "lx" => lx = Some(int(value)?),
                "ly" => ly = Some(int(value)?),
                "omega" => omega = num(value)?,
                "delta" => delta = Some(num(value)?),
                "v0" => v0 = Some(num(value)?),
                "cutoff" => cutoff = int(value)?,
                other => return Err(Error::parse(n + 1, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::invalid(format!("model description is missing `{k}`"));
        let geometry = LatticeGeometry::new(
            lx.ok_or_else(|| missing("lx"))?,
            ly.ok_or_else(|| missing("ly"))?,
        )?;
        Self::new(
            geometry,
            omega,
            delta.ok_or_else(|| missing("delta"))?,
            v0.ok_or_else(|| missing("v0"))?,
            cutoff,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "# site ordering: row-major (j = x + lx*y)\nlx={}\nly={}\nomega={}\ndelta={}\nv0={}\ncutoff={}\n",
            self.geometry.lx, self.geometry.ly, self.omega, self.delta, self.v0, self.cutoff
        )
    }

    /// The same Hamiltonian written as a Pauli sum, using `Π = (1 - Z)/2`.
    pub fn to_pauli_sum(&self) -> PauliSumHamiltonian {
        let n = self.n_sites();
        let mut constant = 0.0;
        let mut z = vec![0.0; n];
        let mut terms = Vec::new();
        for j in 0..n {
            if self.omega != 0.0 {
                terms.push(PauliTerm::new(
                    -self.omega / 2.0,
                    PauliString::single(n, j, Pauli::X),
                ));
            }
            // -δ Π_j = -δ/2 + δ/2 Z_j
            constant -= self.delta / 2.0;
            z[j] += self.delta / 2.0;
        }
        for c in &self.couplings {
            // V Π_i Π_j = V/4 (1 - Z_i - Z_j + Z_i Z_j)
            constant += c.strength / 4.0;
            z[c.i] -= c.strength / 4.0;
            z[c.j] -= c.strength / 4.0;
            let mut s = PauliString::identity(n);
            s.set(c.i, Pauli::Z);
            s.set(c.j, Pauli::Z);
            terms.push(PauliTerm::new(c.strength / 4.0, s));
        }
        for (j, &coef) in z.iter().enumerate() {
            if coef != 0.0 {
                terms.push(PauliTerm::new(coef, PauliString::single(n, j, Pauli::Z)));
            }
        }
        if constant != 0.0 {
            terms.push(PauliTerm::new(constant, PauliString::identity(n)));
        }
        PauliSumHamiltonian::new(terms).expect("terms built with a common length")
    }
}

fn couplings_for(geometry: &LatticeGeometry, v0: f64, cutoff: usize) -> Vec<Coupling> {
    let max_d2 = LatticeGeometry::shell_squared_distance(cutoff).unwrap_or(0);
    let n = geometry.n_sites();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = geometry.squared_distance(i, j);
            if d2 <= max_d2 {
                let d6 = (d2 * d2 * d2) as f64;
                out.push(Coupling {
                    i,
                    j,
                    strength: v0 / d6,
                });
            }
        }
    }
    out
}

/// Every unordered pair within the cutoff, listed once with `V0 / d^6`.
pub fn build_couplings(model: &RydbergModel) -> Vec<Coupling> {
    model.couplings.clone()
}

/// Occupation string, one entry per site, `1` = Rydberg state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(Vec<u8>);

impl Configuration {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!(
                "occupation must be 0 or 1, got {b}"
            )));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|j| ((index >> j) & 1) as u8).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &b)| acc | ((b as u64) << j))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }

    pub fn get(&self, site: usize) -> u8 {
        self.0[site]
    }

    pub fn flipped(&self, site: usize) -> Self {
        let mut c = self.clone();
        c.0[site] ^= 1;
        c
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    /// Accepts both `0101` and `0 1 0 1`.
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("invalid occupation `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self(bits))
    }
}

/// `-δ Σ σ_j + Σ_pairs V_ij σ_i σ_j`.
pub fn diagonal_energy(sigma: &Configuration, model: &RydbergModel) -> Result<f64> {
    check_len(model.n_sites(), sigma.len())?;
    let b = sigma.bits();
    let occupied = sigma.count_ones() as f64;
    let interaction: f64 = model
        .couplings
        .iter()
        .filter(|c| b[c.i] == 1 && b[c.j] == 1)
        .map(|c| c.strength)
        .sum();
    Ok(-model.delta * occupied + interaction)
}

/// Off-diagonal row of the drive term: one single-site flip per site, each
/// with matrix element `-Ω/2`.
pub fn connected_configs(sigma: &Configuration, model: &RydbergModel) -> Vec<(Configuration, f64)> {
    let element = -model.omega / 2.0;
    (0..sigma.len())
        .map(|j| (sigma.flipped(j), element))
        .collect()
}
