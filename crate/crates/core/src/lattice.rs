//! Lattice geometry, field descriptors and structure-of-arrays storage.
//!
//! A [`Field`] stores `ncomp` double-precision values per lattice site with
//! all sites of one component contiguous: element `(c, s)` lives at
//! `c * padded_sites + s`. The site count is rounded up to a multiple of the
//! configured padding so that any lane width dividing it can sweep the field
//! without a tail loop. Padding is zero on creation and never visible through
//! the public read accessors.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Padding multiple used when none is given explicitly. It is the widest lane
/// width the built-in kernels instantiate at compile time.
pub const DEFAULT_PAD_MULTIPLE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeShape {
    nx: usize,
    ny: usize,
    nz: usize,
}

impl LatticeShape {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidConfig(format!(
                "lattice extents must be >= 1, got {nx}x{ny}x{nz}"
            )));
        }
        nx.checked_mul(ny)
            .and_then(|n| n.checked_mul(nz))
            .ok_or_else(|| Error::InvalidConfig("lattice site count overflows".into()))?;
        Ok(Self { nx, ny, nz })
    }

    /// A one-dimensional lattice of `n` sites.
    pub fn linear(n: usize) -> Result<Self> {
        Self::new(n, 1, 1)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nsites(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Site index of `(x, y, z)`, x fastest.
    #[inline]
    pub fn site(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }
}

impl std::fmt::Display for LatticeShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

impl std::str::FromStr for LatticeShape {
    type Err = Error;

    /// Parses `NXxNYxNZ`, e.g. `16x16x16`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("invalid shape `{s}`, expected NXxNYxNZ"));
        let dims: Vec<usize> = s
            .split(['x', 'X'])
            .map(|d| d.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match dims.as_slice() {
            [nx, ny, nz] => Self::new(*nx, *ny, *nz),
            _ => Err(bad()),
        }
    }
}

/// Smallest multiple of `vvl` that is at least `nsites`.
pub fn pad_sites(nsites: usize, vvl: usize) -> Result<usize> {
    if vvl == 0 {
        return Err(Error::InvalidConfig("lane count must be >= 1".into()));
    }
    if nsites == 0 {
        return Err(Error::InvalidConfig("site count must be >= 1".into()));
    }
    Ok(nsites.div_ceil(vvl) * vvl)
}

/// Linear offset of component `c` at site `s` in a SoA buffer.
#[inline]
pub fn soa_index(c: usize, s: usize, ncomp: usize, padded_sites: usize) -> Result<usize> {
    if c >= ncomp {
        return Err(Error::Bounds(format!("component {c} >= ncomp {ncomp}")));
    }
    if s >= padded_sites {
        return Err(Error::Bounds(format!(
            "site {s} >= padded sites {padded_sites}"
        )));
    }
    Ok(c * padded_sites + s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldDescriptor {
    shape: LatticeShape,
    ncomp: usize,
    padded_sites: usize,
}

impl FieldDescriptor {
    /// Descriptor padded to [`DEFAULT_PAD_MULTIPLE`].
    pub fn new(shape: LatticeShape, ncomp: usize) -> Result<Self> {
        Self::with_padding(shape, ncomp, DEFAULT_PAD_MULTIPLE)
    }

    pub fn with_padding(shape: LatticeShape, ncomp: usize, pad_multiple: usize) -> Result<Self> {
        if ncomp == 0 {
            return Err(Error::InvalidConfig("ncomp must be >= 1".into()));
        }
        let padded_sites = pad_sites(shape.nsites(), pad_multiple)?;
        padded_sites
            .checked_mul(ncomp)
            .ok_or_else(|| Error::InvalidConfig("field size overflows".into()))?;
        Ok(Self {
            shape,
            ncomp,
            padded_sites,
        })
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn nsites(&self) -> usize {
        self.shape.nsites()
    }

    pub fn padded_sites(&self) -> usize {
        self.padded_sites
    }

    /// Total doubles in the backing storage, padding included.
    pub fn len(&self) -> usize {
        self.ncomp * self.padded_sites
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, c: usize, s: usize) -> Result<usize> {
        soa_index(c, s, self.ncomp, self.padded_sites)
    }

    pub(crate) fn ensure_same(&self, other: &FieldDescriptor) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!(
                "descriptor mismatch: ncomp {} over {} ({} padded) vs ncomp {} over {} ({} padded)",
                self.ncomp,
                self.shape,
                self.padded_sites,
                other.ncomp,
                other.shape,
                other.padded_sites
            )));
        }
        Ok(())
    }
}

/// Host-side lattice field in SoA layout.
#[derive(Debug, Clone)]
pub struct Field {
    desc: FieldDescriptor,
    data: Vec<f64>,
}

impl Field {
    /// Zero-initialized field, padding included.
    pub fn new(desc: FieldDescriptor) -> Self {
        Self {
            desc,
            data: vec![0.0; desc.len()],
        }
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.desc
    }

    pub fn get(&self, c: usize, s: usize) -> Result<f64> {
        self.check_real(c, s)?;
        Ok(self.data[c * self.desc.padded_sites + s])
    }

    pub fn set(&mut self, c: usize, s: usize, v: f64) -> Result<()> {
        self.check_real(c, s)?;
        self.data[c * self.desc.padded_sites + s] = v;
        Ok(())
    }

    /// Real sites of component `c`.
    pub fn component(&self, c: usize) -> &[f64] {
        let p = self.desc.padded_sites;
        &self.data[c * p..c * p + self.desc.nsites()]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.desc.padded_sites;
        let n = self.desc.nsites();
        &mut self.data[c * p..c * p + n]
    }

    /// Sets every real element to `gen(c, s)`.
    pub fn fill(&mut self, mut gen: impl FnMut(usize, usize) -> f64) {
        for c in 0..self.desc.ncomp {
            for (s, v) in self.component_mut(c).iter_mut().enumerate() {
                *v = gen(c, s);
            }
        }
    }

    /// Largest absolute difference over real sites. NaN if any compared
    /// element pair differs by NaN.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.desc.ensure_same(&other.desc)?;
        let mut max = 0.0f64;
        for c in 0..self.desc.ncomp {
            for (a, b) in self.component(c).iter().zip(other.component(c)) {
                let d = (a - b).abs();
                if d.is_nan() {
                    return Ok(f64::NAN);
                }
                max = max.max(d);
            }
        }
        Ok(max)
    }

    /// Bitwise equality over real sites.
    pub fn bitwise_eq(&self, other: &Field) -> bool {
        self.desc == other.desc
            && (0..self.desc.ncomp).all(|c| {
                self.component(c)
                    .iter()
                    .zip(other.component(c))
                    .all(|(a, b)| a.to_bits() == b.to_bits())
            })
    }

    /// Builds a field from site-major data: `data[s * ncomp + c]`.
    pub fn from_aos(desc: FieldDescriptor, data: &[f64]) -> Result<Self> {
        let (n, nc) = (desc.nsites(), desc.ncomp);
        if data.len() != n * nc {
            return Err(Error::Shape(format!(
                "AoS length {} != ncomp {} * nsites {}",
                data.len(),
                nc,
                n
            )));
        }
        let mut f = Field::new(desc);
        for (s, site) in data.chunks_exact(nc).enumerate() {
            for (c, v) in site.iter().enumerate() {
                f.data[c * desc.padded_sites + s] = *v;
            }
        }
        Ok(f)
    }

    /// Site-major copy of the real sites.
    pub fn to_aos(&self) -> Vec<f64> {
        let (n, nc, p) = (self.desc.nsites(), self.desc.ncomp, self.desc.padded_sites);
        let mut out = Vec::with_capacity(n * nc);
        for s in 0..n {
            out.extend((0..nc).map(|c| self.data[c * p + s]));
        }
        out
    }

    /// Writes the binary dump: little-endian `u64` ncomp, nx, ny, nz, then
    /// `ncomp * nsites` doubles in SoA order without padding.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let shape = self.desc.shape;
        for v in [self.desc.ncomp, shape.nx, shape.ny, shape.nz] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for c in 0..self.desc.ncomp {
            for v in self.component(c) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump written by [`Field::write_dump`], padding to `pad_multiple`.
    pub fn read_dump<R: Read>(mut r: R, pad_multiple: usize) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0usize; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = usize::try_from(u64::from_le_bytes(word))
                .map_err(|_| Error::Shape("dump header value exceeds usize".into()))?;
        }
        let [ncomp, nx, ny, nz] = header;
        let desc =
            FieldDescriptor::with_padding(LatticeShape::new(nx, ny, nz)?, ncomp, pad_multiple)?;
        let mut f = Field::new(desc);
        for c in 0..ncomp {
            for v in f.component_mut(c) {
                r.read_exact(&mut word)?;
                *v = f64::from_le_bytes(word);
            }
        }
        Ok(f)
    }

    /// Full backing storage, padding included.
    pub(crate) fn raw(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn check_real(&self, c: usize, s: usize) -> Result<()> {
        if c >= self.desc.ncomp || s >= self.desc.nsites() {
            return Err(Error::Bounds(format!(
                "({c}, {s}) outside ncomp {} x nsites {}",
                self.desc.ncomp,
                self.desc.nsites()
            )));
        }
        Ok(())
    }
}
