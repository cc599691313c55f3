use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::d3q19::{D3Q19Model, Q};
use crate::error::{Error, Result};
use crate::lattice::{Field, FieldDescriptor, LatticeShape};

/// Host copies of the two distributions of a binary mixture.
#[derive(Debug, Clone)]
pub struct BinaryFluidState {
    pub f: Field,
    pub g: Field,
}

impl BinaryFluidState {
    pub fn zeros(shape: LatticeShape) -> Result<Self> {
        let desc = FieldDescriptor::new(shape, Q)?;
        Ok(Self {
            f: Field::new(desc),
            g: Field::new(desc),
        })
    }

    /// Uniform state at equilibrium.
    pub fn equilibrium(
        shape: LatticeShape,
        rho: f64,
        u: [f64; 3],
        phi: f64,
        model: &D3Q19Model,
    ) -> Result<Self> {
        let feq = model.equilibrium(rho, u);
        let geq = model.phi_equilibrium(phi, u);
        let mut st = Self::zeros(shape)?;
        st.f.fill(|i, _| feq[i]);
        st.g.fill(|i, _| geq[i]);
        Ok(st)
    }

    /// Random admissible state: per-site equilibria at random `rho` in
    /// [0.9, 1.1], `|u_a| <= 0.05`, `phi` in [-0.8, 0.8], each population
    /// perturbed by up to 5%.
    pub fn random(shape: LatticeShape, seed: u64, model: &D3Q19Model) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = Self::zeros(shape)?;
        for s in 0..shape.nsites() {
            let rho = rng.gen_range(0.9..1.1);
            let u = [(); 3].map(|_| rng.gen_range(-0.05..0.05));
            let phi = rng.gen_range(-0.8..0.8);
            let feq = model.equilibrium(rho, u);
            let geq = model.phi_equilibrium(phi, u);
            for i in 0..Q {
                st.f.set(i, s, feq[i] * (1.0 + rng.gen_range(-0.05..0.05)))?;
                st.g.set(i, s, geq[i] * (1.0 + rng.gen_range(-0.05..0.05)))?;
            }
        }
        Ok(st)
    }

    pub fn shape(&self) -> LatticeShape {
        self.f.descriptor().shape()
    }

    pub fn f_site(&self, s: usize) -> [f64; Q] {
        std::array::from_fn(|i| self.f.component(i)[s])
    }

    pub fn g_site(&self, s: usize) -> [f64; Q] {
        std::array::from_fn(|i| self.g.component(i)[s])
    }

    /// Five-component field of `rho, ux, uy, uz, phi` per site.
    pub fn observables(&self, model: &D3Q19Model) -> Result<Field> {
        let shape = self.shape();
        let mut out = Field::new(FieldDescriptor::new(shape, 5)?);
        for s in 0..shape.nsites() {
            let (rho, u) = model
                .moments(&self.f_site(s))
                .map_err(|_| Error::SingularState { site: s, rho: 0.0 })?;
            let phi: f64 = self.g_site(s).iter().sum();
            for (c, v) in [rho, u[0], u[1], u[2], phi].into_iter().enumerate() {
                out.set(c, s, v)?;
            }
        }
        Ok(out)
    }

    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.f.bitwise_eq(&other.f) && self.g.bitwise_eq(&other.g)
    }
}
