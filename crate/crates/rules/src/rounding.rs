//! Display rounding. Classification never goes through these.

/// Formats `value` with one decimal, rounding half away from zero on the
/// shortest decimal representation of the value (so `20.85` shows as `20.9`
/// even though its binary value is slightly below).
pub fn round_half_up_1dp(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let negative = value.is_sign_negative() && value != 0.0;
    let repr = format!("{}", value.abs());
    // Display for f64 never uses exponent notation.
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((repr.as_str(), ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    digits.push(frac.first().copied().unwrap_or(0));
    if frac.get(1).is_some_and(|&d| d >= 5) {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let (whole, tenth) = digits.split_at(digits.len() - 1);
    let whole: String = whole.iter().map(|d| char::from(b'0' + d)).collect();
    let sign = if negative && (!whole.trim_start_matches('0').is_empty() || tenth[0] != 0) { "-" } else { "" };
    format!("{sign}{whole}.{}", tenth[0])
}
