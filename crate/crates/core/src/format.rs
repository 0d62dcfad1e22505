//! Number formatting shared by every CSV/JSON writer: 12 significant digits,
//! `%g`-style, so outputs diff cleanly across runs.

/// Formats `v` with 12 significant digits, trailing zeros trimmed.
pub fn sig12(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

/// `v` rounded to the value its 12-digit representation denotes.
pub fn round12(v: f64) -> f64 {
    if v.is_finite() {
        sig12(v).parse().unwrap_or(v)
    } else {
        v
    }
}

/// Serde adapter writing `f64` fields rounded to 12 significant digits.
pub fn ser_round12<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round12(*v))
}

/// Like [`ser_round12`] for optional values; `None` becomes `null`.
pub fn ser_round12_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&round12(*v)),
        None => s.serialize_none(),
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
