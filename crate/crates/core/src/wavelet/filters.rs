//! Daubechies filter banks db1–db8.
//!
//! Decomposition low-pass taps are embedded as literals (ordered as the
//! time-reversed minimum-phase scaling filter). The remaining three
//! filters follow from the quadrature-mirror relation
//! `dec_hi[k] = (-1)^k · dec_lo[L-1-k]` and time reversal. Every filter
//! is checked against the orthonormality invariants when constructed.

// Tap tables keep the full literal precision.
#![allow(clippy::excessive_precision, clippy::approx_constant)]

use super::WaveletError;

#[rustfmt::skip]
const DB1_DEC_LO: [f64; 2] = [
    0.707106781186547524401,
    0.707106781186547524401,
];
#[rustfmt::skip]
const DB2_DEC_LO: [f64; 4] = [
    -0.129409522551260381174,
    0.224143868042013381026,
    0.836516303737807905575,
    0.482962913144534143375,
];
#[rustfmt::skip]
const DB3_DEC_LO: [f64; 6] = [
    0.0352262918857095366027,
    -0.0854412738820266616928,
    -0.135011020010254588696,
    0.459877502118491570095,
    0.806891509311092576494,
    0.332670552950082615999,
];
#[rustfmt::skip]
const DB4_DEC_LO: [f64; 8] = [
    -0.0105974017850690321049,
    0.0328830116668851997354,
    0.0308413818355607636272,
    -0.18703481171909308408,
    -0.0279837694168598542114,
    0.630880767929858907882,
    0.71484657055291564709,
    0.230377813308896500863,
];
#[rustfmt::skip]
const DB5_DEC_LO: [f64; 10] = [
    0.003335725285473771278,
    -0.0125807519990819994685,
    -0.00624149021279827427419,
    0.0775714938400457135231,
    -0.0322448695846383746485,
    -0.242294887066382031863,
    0.138428145901320731505,
    0.724308528437772927728,
    0.60382926979718967054,
    0.160102397974192914481,
];
#[rustfmt::skip]
const DB6_DEC_LO: [f64; 12] = [
    -0.00107730108530847956485,
    0.00477725751094551063964,
    0.000553842201161496139252,
    -0.0315820393174860295651,
    0.0275228655303057286255,
    0.0975016055873230491023,
    -0.129766867567261935562,
    -0.226264693965439820076,
    0.315250351709197629086,
    0.751133908021095350679,
    0.494623890398453085677,
    0.111540743350109463621,
];
#[rustfmt::skip]
const DB7_DEC_LO: [f64; 14] = [
    0.000353713799974520248446,
    -0.00180164070404749091527,
    0.000429577972921366521132,
    0.012550998556099840613,
    -0.0165745416306668806541,
    -0.0380299369350144135796,
    0.0806126091510830719129,
    0.0713092192668302647509,
    -0.224036184993874982638,
    -0.143906003928564975405,
    0.469782287405193122472,
    0.729132090846235119917,
    0.396539319481917306539,
    0.07785205408500917902,
];
#[rustfmt::skip]
const DB8_DEC_LO: [f64; 16] = [
    -0.000117476784124769533731,
    0.00067544940645056936637,
    -0.000391740373376947046298,
    -0.00487035299345157431042,
    0.00874609404740577671638,
    0.0139810279173982816487,
    -0.0440882539307947515068,
    -0.0173693010018075461696,
    0.128747426620478458857,
    0.000472484573913282770361,
    -0.284015542961546926516,
    -0.0158291052563493056674,
    0.585354683654206712771,
    0.675630736297289806808,
    0.312871590914299970659,
    0.054415842243104009955,
];

const TOLERANCE: f64 = 1e-12;

/// An orthonormal analysis/synthesis filter quadruple.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletFilter {
    pub name: String,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

impl WaveletFilter {
    /// Looks up `db1` … `db8` (`haar` is accepted for `db1`).
    pub fn by_name(name: &str) -> Result<WaveletFilter, WaveletError> {
        let lower = name.to_ascii_lowercase();
        let order = match lower.as_str() {
            "haar" => 1,
            s => s
                .strip_prefix("db")
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| WaveletError::UnknownWavelet(name.to_string()))?,
        };
        Self::daubechies(order)
    }

    /// The Daubechies filter with `order` vanishing moments (1..=8).
    pub fn daubechies(order: usize) -> Result<WaveletFilter, WaveletError> {
        let taps: &[f64] = match order {
            1 => &DB1_DEC_LO,
            2 => &DB2_DEC_LO,
            3 => &DB3_DEC_LO,
            4 => &DB4_DEC_LO,
            5 => &DB5_DEC_LO,
            6 => &DB6_DEC_LO,
            7 => &DB7_DEC_LO,
            8 => &DB8_DEC_LO,
            _ => return Err(WaveletError::UnknownWavelet(format!("db{order}"))),
        };
        let filter = Self::from_dec_lo(format!("db{order}"), taps.to_vec());
        filter.validate()?;
        Ok(filter)
    }

    fn from_dec_lo(name: String, dec_lo: Vec<f64>) -> WaveletFilter {
        let len = dec_lo.len();
        let dec_hi: Vec<f64> = (0..len)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * dec_lo[len - 1 - k])
            .collect();
        let rec_lo = dec_lo.iter().rev().copied().collect();
        let rec_hi = dec_hi.iter().rev().copied().collect();
        WaveletFilter {
            name,
            dec_lo,
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }

    /// Checks sums, unit norm, shift orthogonality, the QMF relation and
    /// the time-reversal of the reconstruction filters.
    pub fn validate(&self) -> Result<(), WaveletError> {
        let fail = |what: &str| Err(WaveletError::InvalidFilter(format!("{}: {what}", self.name)));
        let len = self.len();
        if len == 0 || !len.is_multiple_of(2) {
            return fail("filter length must be even and nonzero");
        }
        if [&self.dec_hi, &self.rec_lo, &self.rec_hi].iter().any(|f| f.len() != len) {
            return fail("filter lengths differ");
        }
        if (self.dec_lo.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() > TOLERANCE {
            return fail("sum(dec_lo) != sqrt(2)");
        }
        if self.dec_hi.iter().sum::<f64>().abs() > TOLERANCE {
            return fail("sum(dec_hi) != 0");
        }
        for shift in (0..len).step_by(2) {
            let dot: f64 = (0..len - shift).map(|k| self.dec_lo[k] * self.dec_lo[k + shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - want).abs() > TOLERANCE {
                return fail(&format!("dec_lo not orthonormal under even shift {shift}"));
            }
        }
        for k in 0..len {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            if self.dec_hi[k] != sign * self.dec_lo[len - 1 - k] {
                return fail("quadrature-mirror relation violated");
            }
            if self.rec_lo[k] != self.dec_lo[len - 1 - k] || self.rec_hi[k] != self.dec_hi[len - 1 - k] {
                return fail("reconstruction filters are not time-reversed");
            }
        }
        Ok(())
    }
}
