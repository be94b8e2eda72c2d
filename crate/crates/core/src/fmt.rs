//! Number formatting shared by every CSV and metadata writer.

/// Formats `v` with 17 significant digits, like C's `%.17g`.
///
/// Fixed notation is used for decimal exponents in `[-5, 17)`, scientific
/// otherwise. Seventeen digits are enough to round-trip any `f64`.
pub fn sig17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    // Let the formatter decide the exponent so rounding carries are handled.
    let sci = format!("{v:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let (mantissa, e) = sci.split_once('e').unwrap_or((&sci, "0"));
        format!("{}e{e}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}
