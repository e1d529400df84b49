//! Grand-canonical weight functions.
//!
//! Every kernel is written in terms of `x = beta * (e - mu)` and rearranged so
//! that neither tail overflows: `f`, `s` and `omega` stay finite for
//! `|x|` far beyond the ~700 where a naive `exp` breaks down.

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Complex `ln(1 + e^w)`, continuous for `|Im w| < pi`.
pub fn softplus_complex(w: Complex64) -> Complex64 {
    if w.re > 0.0 {
        w + ((-w).exp() + 1.0).ln()
    } else {
        (w.exp() + 1.0).ln()
    }
}

/// Logistic `1 / (1 + e^x)`.
#[inline]
fn logistic_neg(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

fn logistic_neg_complex(x: Complex64) -> Complex64 {
    if x.re >= 0.0 {
        let e = (-x).exp();
        e / (e + 1.0)
    } else {
        (x.exp() + 1.0).inv()
    }
}

/// Reservoir temperature and chemical potential shared by all leads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    temperature: f64,
    chemical_potential: f64,
}

impl Ensemble {
    pub fn new(temperature: f64, chemical_potential: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        if !chemical_potential.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "chemical potential must be finite, got {chemical_potential}"
            )));
        }
        Ok(Self { temperature, chemical_potential })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn chemical_potential(&self) -> f64 {
        self.chemical_potential
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    #[inline]
    fn reduced(&self, e: f64) -> f64 {
        (e - self.chemical_potential) / self.temperature
    }

    /// Fermi-Dirac occupation `f(e)`.
    #[inline]
    pub fn fermi(&self, e: f64) -> f64 {
        logistic_neg(self.reduced(e))
    }

    /// Hole occupation `1 - f(e)`, computed without cancellation.
    #[inline]
    pub fn fermi_complement(&self, e: f64) -> f64 {
        logistic_neg(-self.reduced(e))
    }

    /// `df/de = -beta f (1 - f)`.
    #[inline]
    pub fn fermi_derivative(&self, e: f64) -> f64 {
        -self.beta() * self.fermi(e) * self.fermi_complement(e)
    }

    /// Entropy per mode `s(e) = x f + ln(1 + e^{-x})`, even in `x`.
    #[inline]
    pub fn entropy_kernel(&self, e: f64) -> f64 {
        let a = self.reduced(e).abs();
        let t = (-a).exp();
        a * t / (1.0 + t) + t.ln_1p()
    }

    /// Grand potential per mode `omega(e) = -T ln(1 + e^{-x})`; `d omega / de = f`.
    #[inline]
    pub fn grand_kernel(&self, e: f64) -> f64 {
        -self.temperature * softplus(-self.reduced(e))
    }

    /// `-ln f(e)`, finite for every finite `e`.
    #[inline]
    pub fn neg_ln_fermi(&self, e: f64) -> f64 {
        softplus(self.reduced(e))
    }

    /// `-ln(1 - f(e))`, finite for every finite `e`.
    #[inline]
    pub fn neg_ln_fermi_complement(&self, e: f64) -> f64 {
        softplus(-self.reduced(e))
    }

    fn reduced_complex(&self, z: Complex64) -> Complex64 {
        (z - self.chemical_potential) / self.temperature
    }

    /// Analytic continuation of `f` (valid for `|Im z| < pi T`).
    pub fn fermi_complex(&self, z: Complex64) -> Complex64 {
        logistic_neg_complex(self.reduced_complex(z))
    }

    pub fn entropy_kernel_complex(&self, z: Complex64) -> Complex64 {
        let x = self.reduced_complex(z);
        if x.re >= 0.0 {
            x * logistic_neg_complex(x) + softplus_complex(-x)
        } else {
            -x * logistic_neg_complex(-x) + softplus_complex(x)
        }
    }

    pub fn grand_kernel_complex(&self, z: Complex64) -> Complex64 {
        -softplus_complex(-self.reduced_complex(z)) * self.temperature
    }
}

/// Spectral weight functions used in the energy integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `1` (state counting).
    Count,
    /// `f(e)` (particle number).
    Occupation,
    /// `e f(e)` (internal energy).
    Energy,
    /// `s(e)` (entropy).
    Entropy,
    /// `omega(e)` (grand potential).
    Grand,
}

impl Kernel {
    pub const THERMO: [Kernel; 4] = [Kernel::Grand, Kernel::Energy, Kernel::Entropy, Kernel::Occupation];

    #[inline]
    pub fn eval(self, ens: &Ensemble, e: f64) -> f64 {
        match self {
            Kernel::Count => 1.0,
            Kernel::Occupation => ens.fermi(e),
            Kernel::Energy => e * ens.fermi(e),
            Kernel::Entropy => ens.entropy_kernel(e),
            Kernel::Grand => ens.grand_kernel(e),
        }
    }

    pub fn eval_complex(self, ens: &Ensemble, z: Complex64) -> Complex64 {
        match self {
            Kernel::Count => Complex64::new(1.0, 0.0),
            Kernel::Occupation => ens.fermi_complex(z),
            Kernel::Energy => z * ens.fermi_complex(z),
            Kernel::Entropy => ens.entropy_kernel_complex(z),
            Kernel::Grand => ens.grand_kernel_complex(z),
        }
    }
}
