//! Line-oriented system description files.
//!
//! A file opens with `ifs <name> dim <n> backend <euclidean|sequence>`,
//! lists one `map` line per similitude, and may set run parameters with
//! `depth`, `tol`, `grid`, `budget` and `seed` lines. Euclidean maps come
//! in a 2D rotation form `map scale <r> rotate <degrees> translate <x> <y>
//! [about <cx> <cy>]` and a general form `map scale <r> matrix <n² values>
//! translate <n values>`; sequence maps are `map scale 1/2 kind
//! <interleave-odd|interleave-even|affine-first>`. Every real token also
//! accepts a fraction `p/q`. Blank lines and `#` comments are skipped.

use std::fmt;

use simbound_core::spaces::{validate_similitude, IfsSpec, SequenceStep, Similitude};
use simbound_core::Backend;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunParams {
    pub depth: Option<u32>,
    pub tol: Option<f64>,
    pub grid: Option<f64>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecFile {
    pub ifs: IfsSpec,
    pub params: RunParams,
}

#[derive(Clone, Debug)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, msg: msg.into() })
}

/// Real token: decimal, scientific, or fraction `p/q`.
pub fn parse_real(tok: &str) -> Option<f64> {
    if let Some((num, den)) = tok.split_once('/') {
        let n: f64 = num.parse().ok()?;
        let d: f64 = den.parse().ok()?;
        if d == 0.0 || !n.is_finite() || !d.is_finite() {
            return None;
        }
        return Some(n / d);
    }
    tok.parse().ok().filter(|v: &f64| v.is_finite())
}

struct Cursor<'a> {
    toks: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn word(&mut self, what: &str) -> Result<&'a str, ParseError> {
        match self.toks.next() {
            Some(t) => Ok(t),
            None => err(self.line, format!("missing {what}")),
        }
    }

    fn real(&mut self, what: &str) -> Result<f64, ParseError> {
        let t = self.word(what)?;
        parse_real(t).ok_or(ParseError {
            line: self.line,
            msg: format!("bad {what} `{t}`"),
        })
    }

    fn integer(&mut self, what: &str) -> Result<u64, ParseError> {
        let t = self.word(what)?;
        t.parse().map_err(|_| ParseError {
            line: self.line,
            msg: format!("bad {what} `{t}`"),
        })
    }

    fn keyword(&mut self, expected: &str) -> Result<(), ParseError> {
        let t = self.word(expected)?;
        if t != expected {
            return err(self.line, format!("expected `{expected}`, got `{t}`"));
        }
        Ok(())
    }

    fn done(&mut self) -> Result<(), ParseError> {
        match self.toks.next() {
            Some(t) => err(self.line, format!("trailing token `{t}`")),
            None => Ok(()),
        }
    }
}

fn parse_map(
    cur: &mut Cursor,
    backend: Backend,
    dim: usize,
) -> Result<Similitude, ParseError> {
    let line = cur.line;
    cur.keyword("scale")?;
    let ratio = cur.real("scale value")?;
    match backend {
        Backend::Sequence => {
            if ratio != 0.5 {
                return err(line, "sequence maps contract by exactly 1/2");
            }
            cur.keyword("kind")?;
            let kind = cur.word("map kind")?;
            let step = match kind {
                "interleave-even" => SequenceStep::InterleaveEven,
                "interleave-odd" => SequenceStep::InterleaveOdd,
                "affine-first" => SequenceStep::AffineFirst,
                other => return err(line, format!("unknown map kind `{other}`")),
            };
            cur.done()?;
            Ok(Similitude::sequence(step))
        }
        Backend::Euclidean => {
            let form = cur.word("`rotate` or `matrix`")?;
            match form {
                "rotate" => {
                    if dim != 2 {
                        return err(line, "rotate form needs dim 2");
                    }
                    let angle = cur.real("angle")?;
                    cur.keyword("translate")?;
                    let tx = cur.real("translation x")?;
                    let ty = cur.real("translation y")?;
                    let about = match cur.toks.next() {
                        None => None,
                        Some("about") => {
                            let cx = cur.real("center x")?;
                            let cy = cur.real("center y")?;
                            Some([cx, cy])
                        }
                        Some(t) => return err(line, format!("trailing token `{t}`")),
                    };
                    cur.done()?;
                    let built = match about {
                        // Rotation about a point composes after the plain
                        // scale-and-translate map.
                        Some(c) => Similitude::euclidean_2d(ratio, 0.0, tx, ty)
                            .and_then(|f| f.rotated_about(angle, &c)),
                        None => Similitude::euclidean_2d(ratio, angle, tx, ty),
                    };
                    built.map_err(|e| ParseError { line, msg: e.to_string() })
                }
                "matrix" => {
                    let mut rotation = Vec::with_capacity(dim * dim);
                    for k in 0..dim * dim {
                        rotation.push(cur.real(&format!("matrix entry {k}"))?);
                    }
                    cur.keyword("translate")?;
                    let mut translation = Vec::with_capacity(dim);
                    for k in 0..dim {
                        translation.push(cur.real(&format!("translation entry {k}"))?);
                    }
                    cur.done()?;
                    Similitude::euclidean(ratio, dim, rotation, translation)
                        .map_err(|e| ParseError { line, msg: e.to_string() })
                }
                other => err(line, format!("unknown map form `{other}`")),
            }
        }
    }
}

pub fn parse_spec(text: &str) -> Result<SpecFile, ParseError> {
    let mut header: Option<(String, usize, Backend, usize)> = None;
    let mut maps: Vec<(usize, Similitude)> = Vec::new();
    let mut params = RunParams::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: content.split_whitespace(), line };
        let head = cur.word("keyword")?;
        match head {
            "ifs" => {
                if header.is_some() {
                    return err(line, "duplicate `ifs` header");
                }
                if !maps.is_empty() {
                    return err(line, "`ifs` header must precede map lines");
                }
                let name = cur.word("system name")?.to_string();
                cur.keyword("dim")?;
                let dim = cur.integer("dimension")? as usize;
                cur.keyword("backend")?;
                let backend = match cur.word("backend")? {
                    "euclidean" => Backend::Euclidean,
                    "sequence" => Backend::Sequence,
                    other => return err(line, format!("unknown backend `{other}`")),
                };
                if backend == Backend::Euclidean && dim == 0 {
                    return err(line, "euclidean systems need dim >= 1");
                }
                cur.done()?;
                header = Some((name, line, backend, dim));
            }
            "map" => {
                let Some((_, _, backend, dim)) = header.as_ref() else {
                    return err(line, "map line before `ifs` header");
                };
                maps.push((line, parse_map(&mut cur, *backend, *dim)?));
            }
            "depth" => {
                params.depth = Some(cur.integer("depth")? as u32);
                cur.done()?;
            }
            "tol" => {
                params.tol = Some(cur.real("tolerance")?);
                cur.done()?;
            }
            "grid" => {
                params.grid = Some(cur.real("grid cell")?);
                cur.done()?;
            }
            "budget" => {
                params.budget = Some(cur.integer("budget")?);
                cur.done()?;
            }
            "seed" => {
                params.seed = Some(cur.integer("seed")?);
                cur.done()?;
            }
            other => return err(line, format!("unknown keyword `{other}`")),
        }
    }
    let Some((name, header_line, _, _)) = header else {
        return err(text.lines().count().max(1), "missing `ifs` header");
    };
    for (line, map) in &maps {
        let check = validate_similitude(map, 64, params.seed.unwrap_or(0));
        if !check.pass {
            return err(
                *line,
                format!(
                    "similitude fails scaling validation, relative deviation {:e}",
                    check.max_relative_deviation
                ),
            );
        }
    }
    let ifs = IfsSpec::new(name, maps.into_iter().map(|(_, m)| m).collect())
        .map_err(|e| ParseError { line: header_line, msg: e.to_string() })?;
    Ok(SpecFile { ifs, params })
}

/// Full-precision real for spec files; survives a parse round trip exactly.
fn spec_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize_spec(spec: &SpecFile) -> String {
    let mut out = String::new();
    let dim = spec.ifs.dim().unwrap_or(0);
    out.push_str(&format!(
        "ifs {} dim {} backend {}\n",
        spec.ifs.name,
        dim,
        spec.ifs.backend().name()
    ));
    for map in spec.ifs.maps() {
        if let Some(m) = map.as_euclidean() {
            out.push_str(&format!("map scale {} matrix", spec_real(m.ratio)));
            for v in &m.rotation {
                out.push(' ');
                out.push_str(&spec_real(*v));
            }
            out.push_str(" translate");
            for v in &m.translation {
                out.push(' ');
                out.push_str(&spec_real(*v));
            }
            out.push('\n');
        } else if let Some(m) = map.as_sequence() {
            // Spec files name single-step maps; composites have no line form.
            let step = match m.chain.as_slice() {
                [step] => *step,
                _ => unreachable!("parsed maps are single-step"),
            };
            out.push_str(&format!("map scale 1/2 kind {}\n", step.name()));
        }
    }
    if let Some(d) = spec.params.depth {
        out.push_str(&format!("depth {d}\n"));
    }
    if let Some(t) = spec.params.tol {
        out.push_str(&format!("tol {}\n", spec_real(t)));
    }
    if let Some(g) = spec.params.grid {
        out.push_str(&format!("grid {}\n", spec_real(g)));
    }
    if let Some(b) = spec.params.budget {
        out.push_str(&format!("budget {b}\n"));
    }
    if let Some(s) = spec.params.seed {
        out.push_str(&format!("seed {s}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use simbound_core::fixtures;

    #[test]
    fn fraction_and_decimal_tokens_parse() {
        assert_eq!(parse_real("1/2"), Some(0.5));
        assert_eq!(parse_real("-3/4"), Some(-0.75));
        assert_eq!(parse_real("2.5e-1"), Some(0.25));
        assert_eq!(parse_real("1/0"), None);
        assert_eq!(parse_real("x"), None);
    }

    #[test]
    fn gallery_round_trips_field_for_field() {
        for name in fixtures::GALLERY {
            let spec = SpecFile {
                ifs: fixtures::by_name(name).unwrap(),
                params: RunParams {
                    depth: Some(6),
                    tol: Some(0.03125),
                    grid: None,
                    budget: Some(1_000_000),
                    seed: Some(7),
                },
            };
            let text = serialize_spec(&spec);
            let back = parse_spec(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, spec, "{name}");
        }
    }

    #[test]
    fn rotate_form_matches_matrix_form() {
        let text = "ifs probe dim 2 backend euclidean\n\
                    map scale 1/3 rotate 60 translate 1/3 0\n\
                    map scale 1/3 rotate 0 translate 0 0\n";
        let spec = parse_spec(text).unwrap();
        let direct = Similitude::euclidean_2d(1.0 / 3.0, 60.0, 1.0 / 3.0, 0.0).unwrap();
        assert_eq!(spec.ifs.maps()[0], direct);
    }

    #[test]
    fn rotate_about_composes_after_translation() {
        let text = "ifs probe dim 2 backend euclidean\n\
                    map scale 1/2 rotate -90 translate 0.5 0.5 about 0.75 0.75\n\
                    map scale 1/2 rotate 0 translate 0 0\n";
        let spec = parse_spec(text).unwrap();
        let expected = Similitude::homothety(0.5, &[1.0, 1.0])
            .unwrap()
            .rotated_about(-90.0, &[0.75, 0.75])
            .unwrap();
        assert_eq!(spec.ifs.maps()[0], expected);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "ifs probe dim 2 backend euclidean\n\
                    map scale 1.0 rotate 0 translate 0 0\n";
        let e = parse_spec(text).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.msg.contains("ratio"), "{e}");

        let e = parse_spec("ifs probe dim 2 backend fancy\n").unwrap_err();
        assert_eq!(e.line, 1);

        let e = parse_spec("map scale 1/2 rotate 0 translate 0 0\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.msg.contains("header"), "{e}");

        let text = "ifs probe dim 2 backend euclidean\n\
                    depth 5\n\
                    wobble 3\n";
        let e = parse_spec(text).unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# segment pair\n\
                    ifs seg dim 1 backend euclidean\n\
                    \n\
                    map scale 1/2 matrix 1 translate 0   # left half\n\
                    map scale 1/2 matrix 1 translate 1/2\n\
                    depth 4\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.ifs.n_maps(), 2);
        assert_eq!(spec.params.depth, Some(4));
    }

    #[test]
    fn sequence_maps_parse_by_kind() {
        let text = "ifs l1 dim 0 backend sequence\n\
                    map scale 1/2 kind interleave-even\n\
                    map scale 1/2 kind interleave-odd\n\
                    map scale 1/2 kind affine-first\n";
        let spec = parse_spec(text).unwrap();
        assert_eq!(spec.ifs, {
            let mut f = fixtures::by_name("l1-schief").unwrap();
            f.name = "l1".into();
            f
        });

        let bad = "ifs l1 dim 0 backend sequence\nmap scale 1/3 kind affine-first\n";
        assert_eq!(parse_spec(bad).unwrap_err().line, 2);
    }
}
