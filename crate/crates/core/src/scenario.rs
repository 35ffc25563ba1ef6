//! Scenario files.
//!
//! A scenario is UTF-8 text made of bracketed sections holding `key = value`
//! lines. Values are a double-quoted expression, a tuple of three quoted
//! expressions in `( )` or `[ ]`, a bare number, or a quoted word. `#`
//! starts a comment outside quotes. Sections and keys may appear at most
//! once; every error carries the offending line (1-based).
//!
//! ```text
//! [coframe]        e1, e2, e3          rows of the triad h^a_b
//! [gauge]          row1, row2, row3    rows of Λ
//! [defects]        b, Omega, m, rho, c1, c2, phi
//! [deformation]    inverse | forward, velocity, density, body_force
//! [material]       lambda, mu, kappa, G, nu, R_outer, r_core
//! [couplings]      kappa1 .. kappa7, parity
//! [numerics]       h, tolerance, strategy, frank_mode, grid_min, grid_max,
//!                  grid_n, box_min, box_max, box_n, ball_radius, ball_n,
//!                  sphere_lat, sphere_lon
//! ```

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::defects::{DefectFields, FrankMode};
use crate::elasticity::{DeformationMap, MaterialConstants};
use crate::energy::Couplings;
use crate::expr::Expr;
use crate::field::{Field, Slot, Strategy, DEFAULT_STEP};
use crate::geometry::CoFrame;
use crate::sampling::Grid;
use crate::Result;

/// Scenario failure; `line` is 1-based, `None` when the problem is an absent
/// section or key.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "scenario line {l}: {}", self.message),
            None => write!(f, "scenario: {}", self.message),
        }
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError {
        line: Some(line),
        message: message.into(),
    })
}

pub const SECTIONS: [&str; 7] = ["coframe", "gauge", "defects", "deformation", "material", "couplings", "numerics"];

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "coframe" => &["e1", "e2", "e3"],
        "gauge" => &["row1", "row2", "row3"],
        "defects" => &["b", "Omega", "m", "rho", "c1", "c2", "phi"],
        "deformation" => &["inverse", "forward", "velocity", "density", "body_force"],
        "material" => &["lambda", "mu", "kappa", "G", "nu", "R_outer", "r_core"],
        "couplings" => &["kappa1", "kappa2", "kappa3", "kappa4", "kappa5", "kappa6", "kappa7", "parity"],
        "numerics" => &[
            "h",
            "tolerance",
            "strategy",
            "frank_mode",
            "grid_min",
            "grid_max",
            "grid_n",
            "box_min",
            "box_max",
            "box_n",
            "ball_radius",
            "ball_n",
            "sphere_lat",
            "sphere_lon",
        ],
        _ => &[],
    }
}

/// A parsed right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Expr(Expr),
    Triple([Expr; 3]),
    Number(f64),
    Word(String),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Expr(_) => "a quoted expression",
            Value::Triple(_) => "a tuple of three expressions",
            Value::Number(_) => "a number",
            Value::Word(_) => "a word",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub line: usize,
    pub entries: BTreeMap<String, Entry>,
}

/// A parsed scenario file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub sections: BTreeMap<String, Section>,
}

/// Splits `s` at top-level commas, respecting quotes.
fn split_items(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth_quote = false;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '"' => depth_quote = !depth_quote,
            ',' if !depth_quote => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn unquote(s: &str, line: usize) -> Result<&str, ScenarioError> {
    if s.len() >= 2 && s.starts_with('"') && s.ends_with('"') && !s[1..s.len() - 1].contains('"') {
        Ok(&s[1..s.len() - 1])
    } else {
        err(line, format!("expected a double-quoted string, found `{s}`"))
    }
}

fn parse_expression(s: &str, line: usize) -> Result<Expr, ScenarioError> {
    let text = unquote(s, line)?;
    Expr::parse(text).map_err(|e| ScenarioError {
        line: Some(line),
        message: format!("in \"{text}\": {e}"),
    })
}

fn parse_value(raw: &str, line: usize) -> Result<Value, ScenarioError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return err(line, "missing value");
    }
    let open = raw.chars().next().unwrap();
    if open == '(' || open == '[' {
        let close = if open == '(' { ')' } else { ']' };
        if !raw.ends_with(close) {
            return err(line, format!("unterminated tuple, expected `{close}`"));
        }
        let items = split_items(&raw[1..raw.len() - 1]);
        if items.len() != 3 {
            return err(line, format!("expected three components, found {}", items.len()));
        }
        return Ok(Value::Triple([
            parse_expression(items[0], line)?,
            parse_expression(items[1], line)?,
            parse_expression(items[2], line)?,
        ]));
    }
    if open == '"' {
        let text = unquote(raw, line)?;
        if text.chars().all(|c| c.is_ascii_alphabetic() || c == '_') && Expr::parse(text).is_err() {
            return Ok(Value::Word(text.to_string()));
        }
        return Ok(Value::Expr(parse_expression(raw, line)?));
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Value::Number(v)),
        _ => err(line, format!("expected a number, a quoted expression or a tuple, found `{raw}`")),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc = Scenario::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = strip_comment(raw).trim();
            if l.is_empty() {
                continue;
            }
            if l.starts_with('[') {
                if !l.ends_with(']') {
                    return err(line, "unterminated section header");
                }
                let name = l[1..l.len() - 1].trim();
                if !SECTIONS.contains(&name) {
                    return err(line, format!("unknown section [{name}]; expected one of {}", SECTIONS.join(", ")));
                }
                if let Some(prev) = sc.sections.get(name) {
                    return err(
                        line,
                        format!("duplicate section [{name}] (first defined on line {}, again on line {line})", prev.line),
                    );
                }
                sc.sections.insert(
                    name.to_string(),
                    Section {
                        line,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = l.split_once('=') else {
                return err(line, format!("expected `key = value` or a [section], found `{l}`"));
            };
            let key = key.trim();
            let Some(section) = current.as_ref() else {
                return err(line, format!("key `{key}` appears before any section"));
            };
            if !keys_of(section).contains(&key) {
                return err(
                    line,
                    format!("unknown key `{key}` in [{section}]; expected one of {}", keys_of(section).join(", ")),
                );
            }
            let value = parse_value(value, line)?;
            let sec = sc.sections.get_mut(section).expect("current section exists");
            if let Some(prev) = sec.entries.get(key) {
                return err(
                    line,
                    format!("duplicate key `{key}` in [{section}] (first on line {}, again on line {line})", prev.line),
                );
            }
            sec.entries.insert(key.to_string(), Entry { line, value });
        }
        sc.validate()?;
        Ok(sc)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(d) = self.sections.get("deformation") {
            if d.entries.contains_key("inverse") && d.entries.contains_key("forward") {
                return err(d.line, "[deformation] takes either `inverse` or `forward`, not both");
            }
        }
        for (name, sec) in &self.sections {
            for (key, entry) in &sec.entries {
                let want = expected_kind(name, key);
                let ok = matches!(
                    (want, &entry.value),
                    (Kind::Triple, Value::Triple(_))
                        | (Kind::Expr, Value::Expr(_))
                        | (Kind::Expr, Value::Number(_))
                        | (Kind::Number, Value::Number(_))
                        | (Kind::Word, Value::Word(_))
                );
                if !ok {
                    let w = match want {
                        Kind::Triple => "a tuple of three expressions",
                        Kind::Expr => "a quoted expression",
                        Kind::Number => "a number",
                        Kind::Word => "a quoted word",
                    };
                    return err(entry.line, format!("`{key}` in [{name}] must be {w}, found {}", entry.value.kind()));
                }
            }
        }
        if let Some(n) = self.section("numerics") {
            for key in ["grid_n", "box_n", "ball_n", "sphere_lat", "sphere_lon"] {
                if let Some(e) = n.entries.get(key) {
                    if let Value::Number(v) = e.value {
                        if v < 1.0 || v.fract() != 0.0 {
                            return err(e.line, format!("`{key}` must be a positive integer"));
                        }
                    }
                }
            }
            for key in ["h", "tolerance", "ball_radius"] {
                if let Some(Entry { line, value: Value::Number(v) }) = n.entries.get(key) {
                    if *v <= 0.0 {
                        return err(*line, format!("`{key}` must be positive"));
                    }
                }
            }
            for key in ["strategy", "frank_mode"] {
                if let Some(Entry { line, value: Value::Word(w) }) = n.entries.get(key) {
                    let allowed: &[&str] = if key == "strategy" { &["symbolic", "fd"] } else { &["calibrated", "raw"] };
                    if !allowed.contains(&w.as_str()) {
                        return err(*line, format!("`{key}` must be one of {}", allowed.join(", ")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<(Scenario, String), ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Ok((Scenario::parse(&text)?, text))
    }

    /// Overrides a numeric key, as command-line flags do. The entry gets
    /// line 0.
    pub fn set_number(&mut self, section: &str, key: &str, v: f64) {
        let sec = self.sections.entry(section.to_string()).or_default();
        sec.entries.insert(
            key.to_string(),
            Entry {
                line: 0,
                value: Value::Number(v),
            },
        );
    }

    pub fn has(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    /// Fails naming the first absent section.
    pub fn require(&self, sections: &[&str]) -> Result<(), ScenarioError> {
        for s in sections {
            if !self.has(s) {
                return Err(ScenarioError {
                    line: None,
                    message: format!("missing required section [{s}]"),
                });
            }
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.sections.get(section).and_then(|s| s.entries.get(key)).map(|e| &e.value)
    }

    fn number(&self, section: &str, key: &str, default: f64) -> f64 {
        match self.get(section, key) {
            Some(Value::Number(v)) => *v,
            _ => default,
        }
    }

    fn expr(&self, section: &str, key: &str, default: &str) -> Expr {
        match self.get(section, key) {
            Some(Value::Expr(e)) => e.clone(),
            Some(Value::Number(v)) => Expr::Num(*v),
            _ => Expr::parse(default).expect("default expression"),
        }
    }

    fn triple(&self, section: &str, key: &str, default: [&str; 3]) -> [Expr; 3] {
        match self.get(section, key) {
            Some(Value::Triple(t)) => t.clone(),
            _ => default.map(|d| Expr::parse(d).expect("default expression")),
        }
    }

    fn word(&self, section: &str, key: &str) -> Option<&str> {
        match self.get(section, key) {
            Some(Value::Word(w)) => Some(w),
            _ => None,
        }
    }

    pub fn step(&self) -> f64 {
        self.number("numerics", "h", DEFAULT_STEP)
    }

    pub fn tolerance(&self) -> f64 {
        self.number("numerics", "tolerance", 1e-6)
    }

    pub fn strategy(&self) -> Strategy {
        match self.word("numerics", "strategy") {
            Some("fd") => Strategy::FiniteDifference { h: self.step() },
            _ => Strategy::Symbolic,
        }
    }

    pub fn frank_mode(&self) -> FrankMode {
        match self.word("numerics", "frank_mode") {
            Some("raw") => FrankMode::Raw,
            _ => FrankMode::Calibrated,
        }
    }

    pub fn grid(&self) -> Grid {
        let d = Grid::default();
        Grid::cube(
            self.number("numerics", "grid_min", d.lo[0]),
            self.number("numerics", "grid_max", d.hi[0]),
            self.number("numerics", "grid_n", d.n as f64) as usize,
        )
    }

    /// Integration box for the free energy: bounds and cells per axis.
    pub fn energy_box(&self) -> ([f64; 3], [f64; 3], usize) {
        (
            [self.number("numerics", "box_min", 0.0); 3],
            [self.number("numerics", "box_max", 1.0); 3],
            self.number("numerics", "box_n", 32.0) as usize,
        )
    }

    /// Ball radius, volume cells, latitude and longitude cells.
    pub fn ball(&self) -> (f64, usize, usize, usize) {
        (
            self.number("numerics", "ball_radius", 1.0),
            self.number("numerics", "ball_n", 32.0) as usize,
            self.number("numerics", "sphere_lat", 64.0) as usize,
            self.number("numerics", "sphere_lon", 128.0) as usize,
        )
    }

    fn field(&self, degree: usize, slots: Vec<Slot>, exprs: Vec<Expr>) -> Result<Field> {
        let per = crate::exterior::component_count(degree);
        let chunks = exprs.chunks(per).map(|c| c.to_vec()).collect();
        Field::from_exprs(degree, slots, chunks, self.strategy())
    }

    fn matrix(&self, section: &str, keys: [&str; 3]) -> Result<Field> {
        let rows = [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]];
        let exprs = (0..3).flat_map(|i| self.triple(section, keys[i], rows[i])).collect();
        self.field(0, vec![Slot::Up, Slot::Down], exprs)
    }

    /// The coframe; identity unless `[coframe]` is present.
    pub fn coframe(&self) -> Result<CoFrame> {
        if !self.has("coframe") {
            return Ok(CoFrame::identity());
        }
        CoFrame::from_triad(self.matrix("coframe", ["e1", "e2", "e3"])?)
    }

    /// The gauge matrix `Λ`, if `[gauge]` is present.
    pub fn gauge(&self) -> Result<Option<Field>> {
        if !self.has("gauge") {
            return Ok(None);
        }
        Ok(Some(self.matrix("gauge", ["row1", "row2", "row3"])?))
    }

    /// Defect densities given directly; zero by default.
    pub fn defects(&self) -> Result<DefectFields> {
        let one = |k: &str| self.field(1, vec![], self.triple("defects", k, ["0", "0", "0"]).to_vec());
        let mut d = DefectFields::new(
            one("b")?,
            one("Omega")?,
            one("m")?,
            self.field(0, vec![], vec![self.expr("defects", "rho", "0")])?,
        )?;
        d.c1 = self.number("defects", "c1", d.c1);
        d.c2 = self.number("defects", "c2", d.c2);
        Ok(d)
    }

    /// Extra-matter potential `φ`, if given.
    pub fn phi(&self) -> Result<Option<Field>> {
        match self.get("defects", "phi") {
            None => Ok(None),
            Some(_) => Ok(Some(self.field(0, vec![], vec![self.expr("defects", "phi", "0")])?)),
        }
    }

    pub fn deformation(&self) -> Result<Option<DeformationMap>> {
        if let Some(Value::Triple(f)) = self.get("deformation", "forward") {
            return Ok(Some(DeformationMap::from_forward(f.clone())));
        }
        if !self.has("deformation") {
            return Ok(None);
        }
        let inv = self.triple("deformation", "inverse", ["x", "y", "z"]);
        let [a, b, c] = inv.map(|e| self.field(0, vec![], vec![e]));
        Ok(Some(DeformationMap::from_inverse([a?, b?, c?])?))
    }

    /// Velocity, mass density and body force; zero, one and zero by default.
    pub fn motion(&self) -> Result<(Field, Field, Field)> {
        let vec = |k: &str| self.field(0, vec![Slot::Up], self.triple("deformation", k, ["0", "0", "0"]).to_vec());
        Ok((
            vec("velocity")?,
            self.field(0, vec![], vec![self.expr("deformation", "density", "1")])?,
            vec("body_force")?,
        ))
    }

    pub fn material(&self) -> MaterialConstants {
        let d = MaterialConstants::default();
        MaterialConstants {
            lambda: self.number("material", "lambda", d.lambda),
            mu: self.number("material", "mu", d.mu),
            kappa: self.number("material", "kappa", d.kappa),
            g: self.number("material", "G", d.g),
            nu: self.number("material", "nu", d.nu),
            r_outer: self.number("material", "R_outer", d.r_outer),
            r_core: self.number("material", "r_core", d.r_core),
        }
    }

    pub fn couplings(&self) -> Couplings {
        let mut c = Couplings::new(std::array::from_fn(|i| self.number("couplings", &format!("kappa{}", i + 1), 0.0)));
        if let Some(Value::Number(p)) = self.get("couplings", "parity") {
            c.parity = Some(*p);
        }
        c
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Triple,
    Expr,
    Number,
    Word,
}

fn expected_kind(section: &str, key: &str) -> Kind {
    match (section, key) {
        ("coframe" | "gauge", _) => Kind::Triple,
        ("defects", "b" | "Omega" | "m") => Kind::Triple,
        ("defects", "rho" | "phi") => Kind::Expr,
        ("deformation", "inverse" | "forward" | "velocity" | "body_force") => Kind::Triple,
        ("deformation", "density") => Kind::Expr,
        ("numerics", "strategy" | "frank_mode") => Kind::Word,
        _ => Kind::Number,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Point;

    #[test]
    fn defaults() {
        let s = Scenario::parse("[numerics]\ntolerance = 1e-8\n").unwrap();
        assert!(s.coframe().unwrap().is_identity());
        assert_eq!(s.tolerance(), 1e-8);
        assert_eq!(s.step(), 1e-4);
        assert_eq!(s.grid(), Grid::default());
        let d = s.defects().unwrap();
        assert_eq!(d.burgers.value(&Point::spatial(0.3, 0.2, 0.1)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn defect_fields_round_trip() {
        let s = Scenario::parse(
            "[defects]\nrho = \"0.5\"  # constant\nOmega = (\"sin(2*z)\", \"cos(2*z)\", \"0\")\n",
        )
        .unwrap();
        let d = s.defects().unwrap();
        let p = Point::spatial(0.1, 0.2, 0.3);
        assert_eq!(d.scalar.value(&p).unwrap().components()[0], 0.5);
        let om = d.frank.value(&p).unwrap();
        assert_eq!(om.components(), &[0.6f64.sin(), 0.6f64.cos(), 0.0]);
    }

    #[test]
    fn duplicate_section_names_both_lines() {
        let e = Scenario::parse("[defects]\nrho = \"1\"\n\n[defects]\n").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("line 1") && e.message.contains("line 4"), "{}", e.message);
    }

    #[test]
    fn errors_carry_lines() {
        let cases = [
            ("[numerics]\nfoo = 1\n", 2),
            ("rho = \"1\"\n", 1),
            ("[defects]\nrho = \"1 +\"\n", 2),
            ("[defects]\nb = (\"1\", \"2\")\n", 2),
            ("[defects]\nrho = \"1\"\nrho = \"2\"\n", 3),
            ("[nonsense]\n", 1),
            ("[numerics]\ngrid_n = 2.5\n", 2),
            ("[numerics]\nstrategy = \"magic\"\n", 2),
            ("[defects]\nb = \"x\"\n", 2),
        ];
        for (text, line) in cases {
            assert_eq!(Scenario::parse(text).unwrap_err().line, Some(line), "{text}");
        }
    }

    #[test]
    fn required_sections() {
        let s = Scenario::parse("[numerics]\n").unwrap();
        let e = s.require(&["couplings"]).unwrap_err();
        assert_eq!(e.line, None);
        assert!(e.message.contains("[couplings]"));
    }
}
