//! Precoder construction for the eight supported schemes.
//!
//! All precoders are built from the channel estimate in downlink orientation
//! (K x N_t, row `k` is `ĥ_k^H`). THP filters come from the LQ factors
//! `Ĥ = L Q`:
//!
//! * `F = Q^H`, `G = diag(l_11, ..., l_KK)^-1`
//! * dTHP: `B = G L`, private precoder `P = β F B^-1`
//! * cTHP: `B = L G`, private precoder `P = β F G B^-1`
//!
//! Users are processed in natural index order.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{
    dominant_right_singular_vector, lower_triangular_inverse, lq_decompose, pseudo_inverse_from_lq, vector_norm,
    ComplexMatrix, LqFactors,
};
use crate::{Error, Result, C64};

/// Private-stream precoding family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseScheme {
    ZfLinear,
    Cthp,
    Dthp,
    /// Zero-forcing DPC rate approximation: dTHP without power or modulo loss.
    ZfDpc,
}

/// A base scheme with or without a common (rate-splitting) stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemeTag {
    pub base: BaseScheme,
    pub rs: bool,
}

impl SchemeTag {
    pub const ZF: Self = Self {
        base: BaseScheme::ZfLinear,
        rs: false,
    };
    pub const RS_LINEAR: Self = Self {
        base: BaseScheme::ZfLinear,
        rs: true,
    };
    pub const CTHP: Self = Self {
        base: BaseScheme::Cthp,
        rs: false,
    };
    pub const CTHP_RS: Self = Self {
        base: BaseScheme::Cthp,
        rs: true,
    };
    pub const DTHP: Self = Self {
        base: BaseScheme::Dthp,
        rs: false,
    };
    pub const DTHP_RS: Self = Self {
        base: BaseScheme::Dthp,
        rs: true,
    };
    pub const ZF_DPC: Self = Self {
        base: BaseScheme::ZfDpc,
        rs: false,
    };
    pub const ZF_DPC_RS: Self = Self {
        base: BaseScheme::ZfDpc,
        rs: true,
    };

    pub const ALL: [Self; 8] = [
        Self::ZF,
        Self::RS_LINEAR,
        Self::CTHP,
        Self::CTHP_RS,
        Self::DTHP,
        Self::DTHP_RS,
        Self::ZF_DPC,
        Self::ZF_DPC_RS,
    ];

    /// Short name used on the command line and in result files.
    pub const fn tag(&self) -> &'static str {
        match (self.base, self.rs) {
            (BaseScheme::ZfLinear, false) => "zf",
            (BaseScheme::ZfLinear, true) => "rs-linear",
            (BaseScheme::Cthp, false) => "cthp",
            (BaseScheme::Cthp, true) => "cthp-rs",
            (BaseScheme::Dthp, false) => "dthp",
            (BaseScheme::Dthp, true) => "dthp-rs",
            (BaseScheme::ZfDpc, false) => "zf-dpc",
            (BaseScheme::ZfDpc, true) => "zf-dpc-rs",
        }
    }

    /// The same base scheme without the common stream.
    pub const fn without_rs(&self) -> Self {
        Self {
            base: self.base,
            rs: false,
        }
    }

    pub const fn is_thp_family(&self) -> bool {
        !matches!(self.base, BaseScheme::ZfLinear)
    }

    /// THP structure whose filters this scheme uses, if any.
    pub const fn structure(&self) -> Option<ThpStructure> {
        match self.base {
            BaseScheme::ZfLinear => None,
            BaseScheme::Cthp => Some(ThpStructure::Centralized),
            BaseScheme::Dthp | BaseScheme::ZfDpc => Some(ThpStructure::Decentralized),
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.tag() == s)
            .ok_or(Error::InvalidParameter("unknown scheme tag"))
    }
}

/// Where the scaling matrix `G` sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThpStructure {
    /// `G` at the transmitter.
    Centralized,
    /// `G` at the receivers.
    Decentralized,
}

/// Feedforward, scaling and feedback filters of one THP structure.
#[derive(Clone, Debug, PartialEq)]
pub struct ThpFilters {
    pub structure: ThpStructure,
    /// `F = Q^H`, N_t x K.
    pub f: ComplexMatrix,
    /// Diagonal of `G`, i.e. `1 / l_kk`.
    pub g: Vec<f64>,
    /// Unit-diagonal lower-triangular feedback filter.
    pub b: ComplexMatrix,
    pub lq: LqFactors,
}

pub fn build_thp_filters(h_est: &ComplexMatrix, structure: ThpStructure) -> Result<ThpFilters> {
    let lq = lq_decompose(h_est)?;
    Ok(thp_filters_from_lq(lq, structure))
}

fn thp_filters_from_lq(lq: LqFactors, structure: ThpStructure) -> ThpFilters {
    let g: Vec<f64> = lq.diag.iter().map(|l| 1.0 / l).collect();
    let mut b = match structure {
        ThpStructure::Decentralized => lq.l.scale_rows(&g),
        ThpStructure::Centralized => lq.l.scale_columns(&g),
    };
    for k in 0..b.rows() {
        b[(k, k)] = C64::new(1.0, 0.0);
    }
    ThpFilters {
        structure,
        f: lq.q.conj_transpose(),
        g,
        b,
        lq,
    }
}

impl ThpFilters {
    /// Private precoder without β: `F B^-1` (dTHP) or `F G B^-1` (cTHP).
    pub fn unit_precoder(&self) -> ComplexMatrix {
        let b_inv = lower_triangular_inverse(&self.b).expect("feedback filter has a unit diagonal");
        match self.structure {
            ThpStructure::Decentralized => self.f.matmul(&b_inv),
            ThpStructure::Centralized => self.f.scale_columns(&self.g).matmul(&b_inv),
        }
    }

    /// Filter applied to the feedback output `w`: `F` or `F G`.
    pub fn feedforward(&self) -> ComplexMatrix {
        match self.structure {
            ThpStructure::Decentralized => self.f.clone(),
            ThpStructure::Centralized => self.f.scale_columns(&self.g),
        }
    }
}

/// THP power scaling.
///
/// dTHP: `β = sqrt(λ (E_tr - ||p_c||²) / K)`;
/// cTHP: `β = sqrt(λ (E_tr - ||p_c||²) / Σ_k 1/l_kk²)`.
pub fn compute_beta(structure: ThpStructure, e_tr: f64, lambda: f64, lq: &LqFactors, common_power: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(e_tr.is_finite() && e_tr > 0.0) {
        return Err(Error::InvalidParameter("transmit power must be positive"));
    }
    if !(common_power >= 0.0 && common_power < e_tr) {
        return Err(Error::InvalidPowerSplit(common_power / e_tr));
    }
    let private_power = e_tr - common_power;
    let denom = match structure {
        ThpStructure::Decentralized => lq.users() as f64,
        ThpStructure::Centralized => lq.inverse_diag_energy(),
    };
    Ok((lambda * private_power / denom).sqrt())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("power loss factor must lie in (0, 1]"))
    }
}

/// Everything the transmitter uses for one scheme on one channel estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub scheme: SchemeTag,
    pub e_tr: f64,
    /// `t = ||p_c||² / E_tr`.
    pub power_split: f64,
    pub p_common: Option<Vec<C64>>,
    /// N_t x K, column `k` is `p_k`. For THP schemes this is the full
    /// product including β, applied to the perturbed symbols `v`.
    pub p_private: ComplexMatrix,
    /// THP private precoder without β; `None` for linear precoding.
    pub p_unit: Option<ComplexMatrix>,
    pub f: Option<ComplexMatrix>,
    pub g: Option<Vec<f64>>,
    pub b: Option<ComplexMatrix>,
    pub beta: Option<f64>,
    /// Power loss factor, 1 for linear precoding and ZF-DPC.
    pub lambda: f64,
    pub lq: Option<LqFactors>,
}

impl PrecoderSet {
    pub fn users(&self) -> usize {
        self.p_private.cols()
    }

    pub fn common_power(&self) -> f64 {
        self.p_common.as_deref().map_or(0.0, |p| vector_norm(p).powi(2))
    }

    /// Average transmit power.
    ///
    /// THP transmits `β F_eff w` where the modulo outputs `w` have power
    /// `1/λ` each, so the private part is `β² ||F_eff||_F² / λ`.
    pub fn transmit_power(&self) -> f64 {
        let private = match (&self.f, &self.g, self.beta) {
            (Some(f), Some(g), Some(beta)) => {
                let ff = match self.scheme.structure() {
                    Some(ThpStructure::Centralized) => f.scale_columns(g),
                    _ => f.clone(),
                };
                beta * beta * ff.frobenius_norm_sqr() / self.lambda
            }
            _ => self.p_private.frobenius_norm_sqr(),
        };
        self.common_power() + private
    }

    /// Structure of the THP filters, if any.
    pub fn structure(&self) -> Option<ThpStructure> {
        self.scheme.structure()
    }
}

/// Per-estimate quantities shared by every scheme and power split.
#[derive(Clone, Debug)]
pub struct ChannelFactors {
    pub h_est: ComplexMatrix,
    pub lq: LqFactors,
    /// Dominant right singular vector of `Ĥ`.
    pub common_direction: Vec<C64>,
    /// Zero-forcing directions: pseudo-inverse columns scaled to unit norm.
    pub zf_directions: ComplexMatrix,
    pub dthp: ThpFilters,
    pub cthp: ThpFilters,
    dthp_unit: ComplexMatrix,
    cthp_unit: ComplexMatrix,
}

impl ChannelFactors {
    pub fn new(h_est: &ComplexMatrix) -> Result<Self> {
        let lq = lq_decompose(h_est)?;
        let common_direction = dominant_right_singular_vector(h_est)?;
        let pinv = pseudo_inverse_from_lq(&lq);
        let norms: Vec<f64> = (0..pinv.cols()).map(|c| 1.0 / vector_norm(&pinv.column(c))).collect();
        let zf_directions = pinv.scale_columns(&norms);
        let dthp = thp_filters_from_lq(lq.clone(), ThpStructure::Decentralized);
        let cthp = thp_filters_from_lq(lq.clone(), ThpStructure::Centralized);
        let dthp_unit = dthp.unit_precoder();
        let cthp_unit = cthp.unit_precoder();
        Ok(Self {
            h_est: h_est.clone(),
            lq,
            common_direction,
            zf_directions,
            dthp,
            cthp,
            dthp_unit,
            cthp_unit,
        })
    }

    pub fn users(&self) -> usize {
        self.h_est.rows()
    }

    pub fn filters(&self, structure: ThpStructure) -> &ThpFilters {
        match structure {
            ThpStructure::Decentralized => &self.dthp,
            ThpStructure::Centralized => &self.cthp,
        }
    }

    /// Builds the precoder set for `scheme` with a fraction `power_split` of
    /// `e_tr` on the common stream.
    pub fn build(&self, scheme: SchemeTag, e_tr: f64, lambda: f64, power_split: f64) -> Result<PrecoderSet> {
        check_lambda(lambda)?;
        if !(e_tr.is_finite() && e_tr > 0.0) {
            return Err(Error::InvalidParameter("transmit power must be positive"));
        }
        let split_ok = if scheme.rs {
            (0.0..1.0).contains(&power_split)
        } else {
            power_split == 0.0
        };
        if !split_ok {
            return Err(Error::InvalidPowerSplit(power_split));
        }

        let common_power = power_split * e_tr;
        let p_common = (common_power > 0.0).then(|| {
            self.common_direction
                .iter()
                .map(|z| z * common_power.sqrt())
                .collect::<Vec<_>>()
        });
        let k = self.users() as f64;

        let set = match scheme.base {
            BaseScheme::ZfLinear => PrecoderSet {
                scheme,
                e_tr,
                power_split,
                p_common,
                p_private: self.zf_directions.scale(((e_tr - common_power) / k).sqrt()),
                p_unit: None,
                f: None,
                g: None,
                b: None,
                beta: None,
                lambda: 1.0,
                lq: None,
            },
            BaseScheme::Cthp | BaseScheme::Dthp | BaseScheme::ZfDpc => {
                let lambda = if scheme.base == BaseScheme::ZfDpc { 1.0 } else { lambda };
                let structure = scheme.structure().expect("THP family");
                let filters = self.filters(structure);
                let beta = compute_beta(structure, e_tr, lambda, &self.lq, common_power)?;
                let unit = match structure {
                    ThpStructure::Decentralized => &self.dthp_unit,
                    ThpStructure::Centralized => &self.cthp_unit,
                };
                PrecoderSet {
                    scheme,
                    e_tr,
                    power_split,
                    p_common,
                    p_private: unit.scale(beta),
                    p_unit: Some(unit.clone()),
                    f: Some(filters.f.clone()),
                    g: Some(filters.g.clone()),
                    b: Some(filters.b.clone()),
                    beta: Some(beta),
                    lambda,
                    lq: Some(self.lq.clone()),
                }
            }
        };
        Ok(set)
    }
}

/// One-shot construction; sweeps reuse a [`ChannelFactors`] instead.
pub fn build_precoder_set(
    h_est: &ComplexMatrix,
    scheme: SchemeTag,
    e_tr: f64,
    lambda: f64,
    power_split: f64,
) -> Result<PrecoderSet> {
    ChannelFactors::new(h_est)?.build(scheme, e_tr, lambda, power_split)
}
