//! Parser for transform identifiers used in scenario files and on the
//! command line.

use ndarray::{Array1, Array2};

use super::{AffineTransform, HarmonicField, Monomial, Polynomial, RadialLift, SphereMap, Transform};
use crate::error::{Error, Result};
use crate::scalar::Real;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidTransform(msg.into())
}

/// Splits `name(args)` into the name and its top-level comma separated arguments.
fn split_call(spec: &str) -> Result<(&str, Vec<&str>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, Vec::new()));
    };
    if !spec.ends_with(')') {
        return Err(invalid(format!("unbalanced parentheses in `{spec}`")));
    }
    let name = spec[..open].trim();
    let body = &spec[open + 1..spec.len() - 1];
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(invalid(format!("unbalanced brackets in `{spec}`")));
                }
            }
            ',' if depth == 0 => {
                args.push(body[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(invalid(format!("unbalanced brackets in `{spec}`")));
    }
    if !body.trim().is_empty() {
        args.push(body[start..].trim());
    }
    Ok((name, args))
}

fn keyed<'a>(arg: &'a str, key: &str) -> Option<&'a str> {
    let (k, v) = arg.split_once('=')?;
    (k.trim() == key).then(|| v.trim())
}

fn find_keyed<'a>(args: &[&'a str], key: &str) -> Result<&'a str> {
    args.iter()
        .find_map(|a| keyed(a, key))
        .ok_or_else(|| invalid(format!("missing `{key}=` argument")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| invalid(format!("expected a non-negative integer, got `{s}`")))
}

fn parse_vector<T: Real>(s: &str) -> Result<Vec<T>> {
    let v: Vec<f64> = serde_json::from_str(s).map_err(|e| invalid(format!("bad vector `{s}`: {e}")))?;
    Ok(v.into_iter().map(T::lit).collect())
}

fn parse_matrix<T: Real>(s: &str) -> Result<Array2<T>> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(s).map_err(|e| invalid(format!("bad matrix `{s}`: {e}")))?;
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("matrix `{s}` must be a non-empty rectangle")));
    }
    Ok(Array2::from_shape_fn((m, n), |(i, j)| T::lit(rows[i][j])))
}

fn parse_sphere_map<T: Real>(spec: &str) -> Result<SphereMap<T>> {
    let (name, args) = split_call(spec)?;
    match name {
        "identity" => Ok(SphereMap::Identity {
            n: args.first().map_or(Ok(2), |a| parse_usize(a))?,
        }),
        "angle_multiply" => {
            let k: i32 = args
                .first()
                .ok_or_else(|| invalid("angle_multiply needs k"))?
                .trim_start_matches("k=")
                .parse()
                .map_err(|_| invalid("angle_multiply needs an integer k"))?;
            SphereMap::angle_multiply(k)
        }
        "rotation" => {
            if let Ok(theta) = find_keyed(&args, "theta") {
                let theta: f64 = theta.parse().map_err(|_| invalid("bad rotation angle"))?;
                Ok(SphereMap::planar_rotation(T::lit(theta)))
            } else {
                SphereMap::rotation(parse_matrix(find_keyed(&args, "R")?)?)
            }
        }
        other => Err(invalid(format!("unknown sphere map `{other}`"))),
    }
}

/// Parses `x1^2 - x2^2`, `x1 + 0.001*x1^3`, `2*x1*x2` and the like.
fn parse_polynomial<T: Real>(expr: &str, dim: Option<usize>) -> Result<Polynomial<T>> {
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(invalid("empty polynomial"));
    }
    // split into signed terms, keeping exponent signs like 1e-3 intact
    let mut terms: Vec<(f64, String)> = Vec::new();
    let mut sign = 1.0;
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for c in compact.chars() {
        let is_split = (c == '+' || c == '-')
            && !matches!(prev, Some('e') | Some('E') | Some('^') | Some('*') | None);
        if is_split {
            terms.push((sign, std::mem::take(&mut current)));
            sign = if c == '-' { -1.0 } else { 1.0 };
        } else if current.is_empty() && (c == '-' || c == '+') && prev.is_none() {
            sign = if c == '-' { -1.0 } else { 1.0 };
        } else {
            current.push(c);
        }
        prev = Some(c);
    }
    terms.push((sign, current));

    let mut parsed: Vec<(f64, Vec<(usize, u32)>)> = Vec::new();
    let mut max_index = 0;
    for (sign, text) in terms {
        if text.is_empty() {
            return Err(invalid(format!("malformed polynomial `{expr}`")));
        }
        let mut coefficient = sign;
        let mut powers = Vec::new();
        for factor in text.split('*') {
            if let Some(var) = factor.strip_prefix('x') {
                let (idx, pow) = match var.split_once('^') {
                    Some((i, p)) => (i, p.parse::<u32>().map_err(|_| invalid(format!("bad exponent in `{factor}`")))?),
                    None => (var, 1),
                };
                let idx = parse_usize(idx)?;
                if idx == 0 {
                    return Err(invalid("polynomial variables are numbered from x1"));
                }
                max_index = max_index.max(idx);
                powers.push((idx - 1, pow));
            } else {
                let c: f64 = factor
                    .parse()
                    .map_err(|_| invalid(format!("bad factor `{factor}` in `{expr}`")))?;
                coefficient *= c;
            }
        }
        parsed.push((coefficient, powers));
    }
    let dim = dim.unwrap_or(max_index.max(1));
    if max_index > dim {
        return Err(invalid(format!("x{max_index} exceeds dim={dim}")));
    }
    let terms = parsed
        .into_iter()
        .map(|(c, powers)| {
            let mut exponents = vec![0u32; dim];
            for (i, p) in powers {
                exponents[i] += p;
            }
            Monomial {
                coefficient: T::lit(c),
                exponents,
            }
        })
        .collect();
    Polynomial::new(dim, terms)
}

pub(super) fn parse_transform<T: Real>(spec: &str) -> Result<Transform<T>> {
    let (name, args) = split_call(spec)?;
    let want = |k: usize| -> Result<()> {
        if args.len() == k {
            Ok(())
        } else {
            Err(invalid(format!("`{name}` takes {k} argument(s), got {}", args.len())))
        }
    };
    match name {
        "identity" => {
            want(1)?;
            Ok(Transform::Identity(parse_usize(args[0])?))
        }
        "square" => {
            want(1)?;
            Ok(Transform::Square(parse_usize(args[0])?))
        }
        "exp_sin" => {
            want(0)?;
            Ok(Transform::ExpSin)
        }
        "affine" => {
            want(2)?;
            let p = parse_matrix(find_keyed(&args, "P")?)?;
            let q = Array1::from(parse_vector(find_keyed(&args, "q")?)?);
            Ok(Transform::Affine(AffineTransform::new(p, q)?))
        }
        "radial_lift" => {
            want(1)?;
            Ok(Transform::RadialLift(RadialLift::new(parse_sphere_map(args[0])?)))
        }
        "harmonic" => {
            want(1)?;
            let arg = args[0];
            let (part, k) = arg
                .split_once("_z^")
                .ok_or_else(|| invalid(format!("expected re_z^k or im_z^k, got `{arg}`")))?;
            let k: u32 = k.parse().map_err(|_| invalid(format!("bad power in `{arg}`")))?;
            let field = match part {
                "re" => HarmonicField::new_re(k)?,
                "im" => HarmonicField::new_im(k)?,
                _ => return Err(invalid(format!("expected re or im, got `{part}`"))),
            };
            Ok(Transform::Harmonic(field))
        }
        "poly" => {
            if args.is_empty() || args.len() > 2 {
                return Err(invalid("poly takes an expression and an optional dim="));
            }
            let dim = match args.get(1) {
                Some(a) => Some(parse_usize(keyed(a, "dim").ok_or_else(|| invalid("expected dim="))?)?),
                None => None,
            };
            Ok(Transform::Polynomial(parse_polynomial(args[0], dim)?))
        }
        "component" => {
            want(2)?;
            Transform::component(parse_transform(args[1])?, parse_usize(args[0])?)
        }
        "restrict" => {
            want(3)?;
            Transform::restricted(
                parse_transform(args[0])?,
                parse_vector(find_keyed(&args, "lo")?)?,
                parse_vector(find_keyed(&args, "hi")?)?,
            )
        }
        other => Err(invalid(format!("unknown transform `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_forms() {
        let p: Polynomial<f64> = parse_polynomial("x1 + 0.001*x1^3", None).unwrap();
        assert_eq!(p.dim(), 1);
        assert!((p.eval(&[2.0]) - 2.008).abs() < 1e-15);
        let p: Polynomial<f64> = parse_polynomial("-x1^2 + 3*x2 - 1e-3*x1*x2", None).unwrap();
        assert_eq!(p.eval(&[1.0, 2.0]), -1.0 + 6.0 - 0.002);
        let p: Polynomial<f64> = parse_polynomial("4", Some(2)).unwrap();
        assert_eq!(p.eval(&[5.0, 5.0]), 4.0);
        assert!(parse_polynomial::<f64>("x3", Some(2)).is_err());
        assert!(parse_polynomial::<f64>("x0^2", None).is_err());
        assert!(parse_polynomial::<f64>("x1 +", None).is_err());
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "affine(P=[[1,2]],q=[1,2])",
            "affine(P=[[1],[2,3]],q=[1,2])",
            "radial_lift(angle_multiply(0))",
            "radial_lift(rotation(R=[[1,1],[0,1]]))",
            "harmonic(re_z^0)",
            "harmonic(ab_z^2)",
            "wobble(3)",
            "identity(2",
            "square()",
        ] {
            assert!(Transform::<f64>::parse(bad).is_err(), "{bad}");
        }
    }
}
