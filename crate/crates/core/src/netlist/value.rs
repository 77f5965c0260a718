//! Engineering-notation numbers: `720n`, `1.13u`, `1meg`, `1k`, `2.5e-3`.
//!
//! Parsing rewrites the suffix as a decimal exponent and defers to the
//! standard library's correctly rounded float parser, so `720n` yields the
//! same `f64` as the literal `720e-9`. Formatting picks the engineering
//! suffix and shifts the shortest round-trip digits, so `parse(format(x))`
//! returns `x` bit for bit.

const SUFFIXES: &[(&str, i32)] = &[
    ("meg", 6),
    ("f", -15),
    ("p", -12),
    ("n", -9),
    ("u", -6),
    ("m", -3),
    ("k", 3),
];

/// Parses a number with an optional engineering suffix. Trailing letters
/// after a recognized suffix are ignored, as in SPICE (`1kohm`).
pub fn parse_value(token: &str) -> Option<f64> {
    let t = token.trim();
    if t.is_empty() {
        return None;
    }
    // Longest numeric prefix: sign, digits, point, exponent.
    let bytes = t.as_bytes();
    let mut end = 0;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    let mut digits = 0;
    while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
        if bytes[end].is_ascii_digit() {
            digits += 1;
        }
        end += 1;
    }
    if digits == 0 {
        return None;
    }
    // Exponent only if followed by digits ("1e-9" yes, "1meg" no).
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut k = end + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        let start = k;
        while k < bytes.len() && bytes[k].is_ascii_digit() {
            k += 1;
        }
        if k > start {
            end = k;
        }
    }
    let (num, rest) = t.split_at(end);
    let rest_lc = rest.to_ascii_lowercase();
    if rest_lc.is_empty() {
        return num.parse().ok();
    }
    let (_, shift) = SUFFIXES.iter().find(|(s, _)| rest_lc.starts_with(s))?;
    let tail = &rest_lc[suffix_len(&rest_lc)..];
    if !tail.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    // Fold the suffix into the exponent textually.
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().ok()?),
        None => (num, 0),
    };
    format!("{mantissa}e{}", exp + shift).parse().ok()
}

fn suffix_len(rest_lc: &str) -> usize {
    if rest_lc.starts_with("meg") {
        3
    } else {
        1
    }
}

/// Formats a value with an engineering suffix where one applies.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:e}", v.abs());
    let (mant, exp) = sci
        .split_once('e')
        .expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    let eng = exp.div_euclid(3) * 3;
    let suffix = match eng {
        -15 => "f",
        -12 => "p",
        -9 => "n",
        -6 => "u",
        -3 => "m",
        0 => "",
        3 => "k",
        6 => "meg",
        _ => return format!("{v:e}"),
    };
    // Decimal point goes after (exp - eng + 1) digits.
    let int_len = (exp - eng + 1) as usize;
    let body = if digits.len() <= int_len {
        format!("{digits:0<int_len$}")
    } else {
        format!("{}.{}", &digits[..int_len], &digits[int_len..])
    };
    let sign = if v < 0.0 { "-" } else { "" };
    format!("{sign}{body}{suffix}")
}
