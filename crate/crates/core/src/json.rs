//! JSON wire formats and deterministic float printing.
//!
//! States travel as `{"dims":[d1,...,dn], "amps":[[re,im],...]}`. All floats
//! are written with 17 significant digits so a re-read is bit-exact.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{KcgeError, Result};
use crate::tensor::{CMatrix, PureState, C64, JSON_NORM_ATOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub amps: Vec<[f64; 2]>,
}

impl StateJson {
    /// Accepts norms within `1e-6` of one (renormalizing), rejects the rest.
    pub fn into_state(self) -> Result<PureState> {
        let amps: Vec<C64> = self.amps.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > JSON_NORM_ATOL {
            return Err(KcgeError::NotNormalized(norm));
        }
        PureState::from_unnormalized(self.dims, amps)
    }
}

impl From<&PureState> for StateJson {
    fn from(s: &PureState) -> Self {
        StateJson { dims: s.dims().to_vec(), amps: s.amplitudes().iter().map(|a| [a.re, a.im]).collect() }
    }
}

pub fn parse_state(text: &str) -> Result<PureState> {
    serde_json::from_str::<StateJson>(text)?.into_state()
}

/// Row-major `[[ [re,im], ... ], ...]`.
pub fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(KcgeError::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

/// `%.17g`-style rendering. Integral values keep a trailing `.0`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        let trimmed = if fixed.contains('.') { fixed.trim_end_matches('0').to_string() } else { fixed };
        if trimmed.ends_with('.') {
            format!("{trimmed}0")
        } else {
            trimmed
        }
    } else {
        let m = mantissa.trim_end_matches('0');
        let m = if m.ends_with('.') { format!("{m}0") } else { m.to_string() };
        format!("{m}e{exp}")
    }
}

struct Sig17<F>(F);

macro_rules! delegate_formatter {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl<F: Formatter> Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        w.write_all(format_f64(value as f64).as_bytes())
    }

    delegate_formatter! {
        begin_array(); end_array();
        begin_array_value(first: bool); end_array_value();
        begin_object(); end_object();
        begin_object_key(first: bool); end_object_key();
        begin_object_value(); end_object_value();
    }
}

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Compact JSON with 17-significant-digit floats.
pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats() {
        assert_eq!(format_f64(0.5), "0.5");
        assert_eq!(format_f64(1.0), "1.0");
        assert_eq!(format_f64(-2.0), "-2.0");
        assert_eq!(format_f64(std::f64::consts::FRAC_1_SQRT_2), "0.70710678118654757");
        assert_eq!(format_f64(1e-20), "9.9999999999999995e-21");
        assert_eq!(format_f64(2f64.powi(-70)), "8.4703294725430034e-22");
        assert_eq!(format_f64(1e17), "1.0e17");
        assert_eq!(format_f64(f64::NAN), "null");
    }

    #[test]
    fn norm_gate() {
        let ok = r#"{"dims":[2],"amps":[[1.0000001,0],[0,0]]}"#;
        assert!(parse_state(ok).is_ok());
        let bad = r#"{"dims":[2],"amps":[[1.1,0],[0,0]]}"#;
        assert!(matches!(parse_state(bad), Err(KcgeError::NotNormalized(_))));
        let short = r#"{"dims":[2,2],"amps":[[1,0]]}"#;
        assert!(matches!(parse_state(short), Err(KcgeError::DimensionMismatch(_))));
    }

    proptest! {
        #[test]
        fn float_text_roundtrips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let text = format_f64(x);
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
